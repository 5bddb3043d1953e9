"""Problem parameters for the mass-constrained Kirchhoff problem."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import InvalidParams


def critical_exponent(N: int) -> float:
    """Sobolev critical exponent 2N/(N-2)."""
    return 2.0 * N / (N - 2.0)


@dataclass(frozen=True)
class ProblemParams:
    """One instance ``(N, a, b, mu, q, c)`` of the normalized Kirchhoff problem.

    ``b`` and ``mu`` are free real parameters; ``a`` and the mass ``c`` are
    positive; ``q`` is the subcritical exponent, ``2 < q < 2*``.
    """

    N: int
    a: float = 1.0
    b: float = 0.0
    mu: float = 0.0
    q: float = 2.5
    c: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise InvalidParams(f"N must be an integer >= 4, got {self.N}")
        for name in ("a", "b", "mu", "q", "c"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParams(f"{name} must be finite")
        if self.a <= 0:
            raise InvalidParams(f"a must be > 0, got {self.a}")
        if self.c <= 0:
            raise InvalidParams(f"c must be > 0, got {self.c}")
        if not 2.0 < self.q < self.crit:
            raise InvalidParams(
                f"q must satisfy 2 < q < 2* = {self.crit:g}, got {self.q}")

    @property
    def crit(self) -> float:
        return critical_exponent(self.N)

    @property
    def delta_q(self) -> float:
        return self.N * (self.q - 2.0) / (2.0 * self.q)

    @property
    def mass_factor(self) -> float:
        """c^{q(1-delta_q)/2}, the mass weight of the Gagliardo-Nirenberg bound."""
        return self.c ** (self.q * (1.0 - self.delta_q) / 2.0)

    def replace(self, **changes) -> "ProblemParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)
