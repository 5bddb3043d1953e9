"""The four integrals that determine every energy of the problem."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np


@dataclass(frozen=True)
class NormTuple:
    """``(|grad u|_2^2, |u|_2^2, |u|_q^q, |u|_{2*}^{2*})``.

    The fiber map acts on these four numbers by exact exponential rescaling,
    so every energy, Pohozaev and fiber computation works on tuples and never
    resamples a field.
    """

    grad2: float
    mass2: float
    lq: float
    l2star: float

    def __post_init__(self):
        for name in ("grad2", "mass2", "lq", "l2star"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def zero(cls) -> "NormTuple":
        return cls(0.0, 0.0, 0.0, 0.0)

    def is_zero(self) -> bool:
        return self.grad2 == 0 and self.mass2 == 0 and self.lq == 0 and self.l2star == 0

    def scaled(self, s: float, N: int, q: float) -> "NormTuple":
        """Norms of the mass-preserving dilation ``s * u`` (exact)."""
        crit = 2.0 * N / (N - 2.0)
        dq = N * (q - 2.0) / (2.0 * q)
        return NormTuple(
            self.grad2 * np.exp(2.0 * s),
            self.mass2,
            self.lq * np.exp(q * dq * s),
            self.l2star * np.exp(crit * s),
        )

    def amplified(self, k: float, q: float, N: int) -> "NormTuple":
        """Norms of ``k * u`` for a scalar amplitude ``k``."""
        crit = 2.0 * N / (N - 2.0)
        k = abs(k)
        return NormTuple(self.grad2 * k**2, self.mass2 * k**2,
                         self.lq * k**q, self.l2star * k**crit)

    def as_dict(self) -> dict:
        return asdict(self)
