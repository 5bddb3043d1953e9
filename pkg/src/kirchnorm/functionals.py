"""Energies, the Pohozaev functional, the fiber map and related diagnostics.

Everything except the Gagliardo-Nirenberg constant works on a
:class:`NormTuple`. The fiber map ``s -> I(s*u)`` rescales the four norms
exactly, so fiber projection is one-dimensional root finding.
"""

from __future__ import annotations

import math
import threading
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceError, RegimeError, SaturationError, ZeroField
from .norms import NormTuple
from .params import ProblemParams
from . import radial, scalar

__all__ = [
    "NormTuple", "energy_I", "energy_J", "pohozaev_P", "fiber_eval", "fiber_project",
    "FiberRoot", "FiberReport", "gn_constant", "cached_gn_constant", "clear_gn_cache",
    "gn_default_grid", "multiplier", "diagnostics_K_Q", "P0_BAND",
]

P0_BAND = 1e-8


def energy_I(t: NormTuple, p: ProblemParams) -> float:
    return (p.a / 2 * t.grad2 + p.b / 4 * t.grad2**2 - p.mu / p.q * t.lq
            - t.l2star / p.crit)


def energy_J(t: NormTuple, p: ProblemParams) -> float:
    """Four-dimensional auxiliary functional with the ``1/(1 - b S^2)`` weights."""
    if p.N != 4:
        raise RegimeError("J is defined in dimension 4 only")
    S = scalar.sobolev_constant(4)
    w = 1.0 - p.b * S**2
    if w <= 0:
        raise RegimeError(f"J needs b < S^-2 = {S**-2:.6g}, got b = {p.b:.6g}")
    return (p.a / (2 * w) * t.grad2 + p.b / (4 * w) * t.grad2**2 - p.mu / p.q * t.lq
            - t.l2star / 4)


def pohozaev_P(t: NormTuple, p: ProblemParams) -> float:
    return (p.a * t.grad2 + p.b * t.grad2**2 - p.mu * p.delta_q * t.lq - t.l2star)


def _saturation_guard(s: float, p: ProblemParams):
    if abs(s) > 700.0 / p.crit:
        raise SaturationError(f"|s| = {abs(s):.4g} exceeds 700/2* = {700.0 / p.crit:.4g}")


def fiber_eval(t: NormTuple, s: float, p: ProblemParams):
    """``(Psi(s), Psi'(s), Psi''(s))`` of the fiber map ``Psi(s) = I(s*u)``."""
    _saturation_guard(s, p)
    qd = p.q * p.delta_q
    g = t.grad2 * math.exp(2 * s)
    lq = t.lq * math.exp(qd * s)
    l2 = t.l2star * math.exp(p.crit * s)
    ts = NormTuple(g, t.mass2, lq, l2)
    psi = energy_I(ts, p)
    psi1 = pohozaev_P(ts, p)
    psi2 = 2 * p.a * g + 4 * p.b * g**2 - p.mu * p.delta_q * qd * lq - p.crit * l2
    return psi, psi1, psi2


@dataclass(frozen=True)
class FiberRoot:
    s: float
    psi: float
    psi2: float
    cls: str
    grad2: float


@dataclass(frozen=True)
class FiberReport:
    """Critical points of the fiber map, classified by the sign of ``Psi''``."""

    roots: tuple
    landscape: tuple = field(repr=False)

    def classes(self) -> list:
        return [r.cls for r in self.roots]

    def as_dict(self) -> dict:
        return {"roots": [asdict(r) for r in self.roots],
                "landscape": [list(x) for x in self.landscape]}


def _classify(psi2: float, grad2: float, a: float) -> str:
    if abs(psi2) <= P0_BAND * a * grad2:
        return "zero"
    return "plus" if psi2 > 0 else "minus"


def fiber_project(t: NormTuple, p: ProblemParams, n_landscape: int = 121) -> FiberReport:
    """All ``s`` with ``s*u`` on the Pohozaev set.

    In ``x = e^s`` the fiber derivative is the generalized polynomial
    ``a g x^2 + b g^2 x^4 - mu delta lq x^{q delta} - l2* x^{2*}``.
    """
    if t.is_zero() or t.grad2 == 0:
        raise ZeroField("fiber projection of a zero tuple")
    qd = p.q * p.delta_q
    land = scalar.Landscape(((p.a * t.grad2, 2.0), (p.b * t.grad2**2, 4.0),
                             (-p.mu * p.delta_q * t.lq, qd), (-t.l2star, p.crit)), "fiber")
    # scan window inside the saturation limit
    lim = 700.0 / p.crit
    lo_s, hi_s = land.scales()
    t_min = max(1e-3 * min(lo_s, 1.0), math.exp(-lim))
    t_max = min(10 * max(hi_s, 1.0), math.exp(lim))
    roots = scalar.find_roots(land, t_max=t_max, t_min=t_min)
    out = []
    for r in roots:
        s = math.log(r.t)
        psi, _, psi2 = fiber_eval(t, s, p)
        g = t.grad2 * math.exp(2 * s)
        out.append(FiberRoot(s, psi, psi2, _classify(psi2, g, p.a), g))
    s_lo, s_hi = out[0].s - 3.0, out[-1].s + 3.0
    s_lo, s_hi = max(s_lo, -lim), min(s_hi, lim)
    grid = np.linspace(s_lo, s_hi, n_landscape)
    land_samples = tuple((float(s), float(fiber_eval(t, s, p)[0])) for s in grid)
    return FiberReport(tuple(out), land_samples)


def multiplier(t: NormTuple, p: ProblemParams) -> float:
    """Lagrange multiplier of a constrained critical point, ``mu (1-delta) lq / c``."""
    return p.mu * (1.0 - p.delta_q) * t.lq / p.c


def diagnostics_K_Q(t: NormTuple, A: float, p: ProblemParams):
    """``(K(u), Q_A(u))`` for a weak limit ``u`` and gradient-norm limit ``A``."""
    if A < 0:
        raise ValueError("A must be nonnegative")
    K = (p.a / 2 + p.b * A**2 / 4) * t.grad2 - t.l2star / p.crit - p.mu / p.q * t.lq
    Q = (p.a + p.b * A**2) * t.grad2 - p.mu * p.delta_q * t.lq - t.l2star
    return K, Q


# ------------------------------------------------------------ Gagliardo-Nirenberg

_GN_LOCK = threading.Lock()
_GN_CACHE: dict = {}
_GN_DEFAULT: dict = {}


def gn_default_grid(N: int, n_cells: int = 8000) -> radial.RadialGrid:
    return radial.RadialGrid.graded(N, 40.0, n_cells=n_cells)


def clear_gn_cache():
    with _GN_LOCK:
        _GN_CACHE.clear()
        _GN_DEFAULT.clear()


def cached_gn_constant(N: int, q: float) -> Optional[float]:
    """Value from a previous :func:`gn_constant` call on the default grid."""
    with _GN_LOCK:
        hit = _GN_DEFAULT.get((int(N), float(q)))
    return None if hit is None else hit[0]


def _weinstein_ascent(grid: radial.RadialGrid, q: float, max_iters: int, tol: float,
                      plateau_tol: float = 1e-9):
    N = grid.N
    d = N * (q - 2) / (2 * q)
    A, B = q * d / 2, q * (1 - d) / 2
    w = grid.weights[:-1]
    kmain, koff = grid.stiffness_bands()

    u = np.exp(-grid.rho[:-1])
    u /= math.sqrt(np.dot(w, u * u))

    def full(v):
        return np.append(v, 0.0)

    def parts(v):
        g = grid.grad2(full(v))
        m = float(np.dot(w, v * v))
        lq = float(np.dot(w, np.abs(v) ** q))
        return g, m, lq

    def objective(v):
        g, m, lq = parts(v)
        return math.log(lq) - A * math.log(g) - B * math.log(m)

    F = objective(u)
    slopes = []
    step = 1.0
    for it in range(max_iters):
        g, m, lq = parts(u)
        Ku = grid.stiffness_apply(full(u))[:-1]
        G = q * w * np.abs(u) ** (q - 2) * u / lq - 2 * A * Ku / g - 2 * B * w * u / m
        ab = np.zeros((3, len(u)))
        ab[0, 1:] = koff / g
        ab[1] = kmain / g + w / m
        ab[2, :-1] = koff / g
        direction = solve_banded((1, 1), ab, G)
        slope = float(np.dot(G, direction))
        slopes.append(slope)
        # The quotient is dilation invariant. On the grid the invariance is
        # only approximate, so after every other mode has converged the
        # iterates creep along the scale orbit with a constant tiny slope;
        # the value gain from that creep is below 1e-12.
        plateau = len(slopes) > 10 and slope < plateau_tol and slopes[-11] < 1.1 * slope
        if slope < tol or plateau:
            return u, F, it
        step = min(4.0 * step, 1.0)
        while True:
            trial = u + step * direction
            Ft = objective(trial)
            if Ft >= F + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                raise ConvergenceError("Gagliardo-Nirenberg ascent stalled",
                                       {"iters": it, "slope": slope, "value": F})
        u = trial / math.sqrt(np.dot(w, trial * trial))
        F = objective(u)
    raise ConvergenceError("Gagliardo-Nirenberg ascent hit max_iters",
                           {"iters": max_iters, "slope": slope, "value": F})


def gn_constant(N: int, q: float, grid: Optional[radial.RadialGrid] = None,
                max_iters: int = 5000, tol: float = 1e-20, return_maximizer: bool = False):
    """Best constant in ``|u|_q^q <= C^q |grad u|_2^{q delta} |u|_2^{q(1-delta)}``.

    Maximizes the Weinstein quotient over radial fields on ``grid`` by
    ``H^1``-preconditioned ascent from a Gaussian, so the value is the
    discrete supremum on that grid. Results are memoized per
    ``(N, q, grid signature)``; the memo is filled under a lock so concurrent
    callers compute once.
    """
    N, q = int(N), float(q)
    if not 2.0 < q < 2.0 * N / (N - 2):
        raise ValueError(f"q must lie in (2, 2*) for N={N}")
    default = grid is None
    if default:
        grid = gn_default_grid(N)
    key = (N, q, grid.signature)
    with _GN_LOCK:
        hit = _GN_CACHE.get(key)
        if hit is None:
            u, F, _ = _weinstein_ascent(grid, q, max_iters, tol)
            field_ = radial.RadialField(grid, np.append(u, 0.0))
            hit = (math.exp(F / q), field_)
            _GN_CACHE[key] = hit
            if default:
                _GN_DEFAULT[(N, q)] = hit
    return (hit[0], hit[1]) if return_maximizer else hit[0]
