"""Closed-form thresholds, one-dimensional landscapes and their roots.

Every landscape of the scalar reduction is a generalized polynomial
``sum_i c_i t^{p_i}`` on ``t > 0``. That representation gives exact
derivatives, a scale envelope for bracketing (balance points of pairs of
monomials), the sign at infinity, and Descartes' bound on the number of
positive roots, which is what ``TooManyRoots`` enforces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .errors import (ConditioningWarning, DomainError, MissingConstant, NoRootFound,
                     RegimeError, TooManyRoots)
from .params import ProblemParams, critical_exponent
from . import radial


@lru_cache(maxsize=None)
def sobolev_constant(N: int) -> float:
    """Best Sobolev constant ``S`` from ``S^{N/2} = |grad U_{1,0}|_2^2``.

    The gradient norm of the bubble is integrated adaptively on the whole
    half-line, so no truncation radius enters.
    """
    if N < 3:
        raise ValueError("N must be >= 3")
    return radial.bubble_integrals(int(N))["grad2"] ** (2.0 / N)


# ------------------------------------------------------------------ landscapes

@dataclass(frozen=True)
class Landscape:
    """``t -> sum(coef * t**power)`` on ``t > 0``."""

    terms: Tuple[Tuple[float, float], ...]
    name: str = "landscape"

    def __post_init__(self):
        merged: dict = {}
        for c, p in self.terms:
            merged[float(p)] = merged.get(float(p), 0.0) + float(c)
        kept = tuple((c, p) for p, c in sorted(merged.items()) if c != 0.0)
        object.__setattr__(self, "terms", kept)

    def __call__(self, t):
        t = _check_positive(t)
        return sum(c * t**p for c, p in self.terms) if self.terms else 0.0 * t

    def derivative(self, t):
        t = _check_positive(t)
        return sum(c * p * t ** (p - 1.0) for c, p in self.terms if p != 0.0)

    @property
    def leading_sign(self) -> int:
        return int(np.sign(self.terms[-1][0])) if self.terms else 0

    @property
    def origin_sign(self) -> int:
        return int(np.sign(self.terms[0][0])) if self.terms else 0

    @property
    def max_roots(self) -> int:
        """Descartes' rule of signs for real exponents."""
        s = [np.sign(c) for c, _ in self.terms]
        return int(sum(1 for x, y in zip(s[:-1], s[1:]) if x != y))

    def scales(self) -> Tuple[float, float]:
        """Smallest and largest balance point ``|c_i/c_j|^{1/(p_j-p_i)}``."""
        pts = []
        for i, (ci, pi) in enumerate(self.terms):
            for cj, pj in self.terms[i + 1:]:
                pts.append(abs(ci / cj) ** (1.0 / (pj - pi)))
        if not pts:
            return 1.0, 1.0
        return min(pts), max(pts)


def _check_positive(t):
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("landscape functions are defined for t > 0 only")
    return arr if arr.ndim else float(arr)


def _sob(p: ProblemParams) -> float:
    """``S^{-2*/2}``."""
    return sobolev_constant(p.N) ** (-p.crit / 2.0)


def _gn_lookup(p: ProblemParams, C_q, lookup: bool):
    if C_q is not None:
        return float(C_q)
    if lookup:
        from .functionals import cached_gn_constant  # deferred: functionals imports scalar
        value = cached_gn_constant(p.N, p.q)
        if value is not None:
            return value
    raise MissingConstant(
        f"the Gagliardo-Nirenberg constant for N={p.N}, q={p.q:g} has not been computed; "
        "call functionals.gn_constant first or pass C_q")


def landscape_g(p: ProblemParams) -> Landscape:
    S = sobolev_constant(p.N)
    return Landscape(((p.a, 0.0), (-1.0, 4.0 / (p.N - 2)), (p.b * S ** (p.N / 2.0), 2.0)), "g")


def landscape_f(p: ProblemParams) -> Landscape:
    return Landscape(((p.a, 0.0), (-_sob(p), 4.0 / (p.N - 2)), (p.b, 2.0)), "f")


def landscape_h(p: ProblemParams) -> Landscape:
    return Landscape(((p.a / 2, 2.0), (p.b / 4, 4.0), (-_sob(p) / p.crit, p.crit)), "h")


def landscape_k(p: ProblemParams) -> Landscape:
    return Landscape(((p.a / 4, 2.0), (-(1 / p.crit - 0.25) * _sob(p), p.crit)), "k")


def landscape_f1(p: ProblemParams, C_q=None, lookup=True) -> Landscape:
    C = _gn_lookup(p, C_q, lookup)
    qd = p.q * p.delta_q
    return Landscape(((p.a, 2.0), (p.b, 4.0), (-_sob(p), p.crit),
                      (-p.mu * p.mass_factor * C**p.q * p.delta_q, qd)), "f1")


def landscape_h1(p: ProblemParams, C_q=None, lookup=True) -> Landscape:
    C = _gn_lookup(p, C_q, lookup)
    qd = p.q * p.delta_q
    return Landscape(((p.a / 2, 2.0), (p.b / 4, 4.0), (-_sob(p) / p.crit, p.crit),
                      (-p.mu / p.q * C**p.q * p.mass_factor, qd)), "h1")


def landscape_fc(p: ProblemParams, C_q=None, lookup=True) -> Landscape:
    if p.N != 4:
        raise RegimeError("f_c is a four-dimensional landscape")
    C = _gn_lookup(p, C_q, lookup)
    S = sobolev_constant(4)
    return Landscape(((p.a / 2, 0.0), (-p.mu * C**p.q / p.q * p.c ** ((4 - p.q) / 2), p.q - 3),
                      (-(1 - p.b * S**2) / (4 * S**2), 1.0)), "f_c")


def landscape_I0(p: ProblemParams) -> Landscape:
    return Landscape(((p.a / p.N, 1.0), (-(p.N - 4) / (4.0 * p.N) * p.b, 2.0)), "I0")


def eval_g(t, params: ProblemParams):
    """``b S^{N/2} t^2 - t^{4/(N-2)} + a``."""
    return landscape_g(params)(t)


def eval_f(t, params: ProblemParams):
    """``b t^2 - S^{-N/(N-2)} t^{4/(N-2)} + a`` (``t`` is a gradient norm)."""
    return landscape_f(params)(t)


def eval_f1(t, params: ProblemParams, C_q=None, lookup=True):
    """``t^2 f(t) - mu C_q^q c^{q(1-delta)/2} delta t^{q delta}``; equals ``t h1'(t)``."""
    return landscape_f1(params, C_q, lookup)(t)


def eval_h(t, params: ProblemParams):
    return landscape_h(params)(t)


def eval_h1(t, params: ProblemParams, C_q=None, lookup=True):
    """Lower bound of ``I`` on ``S_c`` as a function of the gradient norm."""
    return landscape_h1(params, C_q, lookup)(t)


def eval_k(t, params: ProblemParams):
    return landscape_k(params)(t)


def eval_fc(k, params: ProblemParams, C_q=None, lookup=True):
    """Four-dimensional barrier function; ``k`` is a squared gradient norm."""
    return landscape_fc(params, C_q, lookup)(k)


def eval_I0_reduced(t, params: ProblemParams):
    """``a t / N - (N-4) b t^2 / (4N)``: the pure-critical energy on the
    Pohozaev set as a function of ``t = |grad u|_2^2``."""
    return landscape_I0(params)(t)


# ------------------------------------------------------------------ roots

@dataclass(frozen=True)
class Root:
    t: float
    deriv_sign: int
    value: float
    paired: bool = False


@dataclass(frozen=True)
class RootPair:
    """Two nearly merged roots; each is individually ill-conditioned."""

    lower: Root
    upper: Root

    @property
    def gap(self) -> float:
        return self.upper.t - self.lower.t


def _refine(fn, lo, hi, flo):
    """Bisection to 1e-6 relative, then a bracketed secant to 1e-12."""
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    fhi = fn(hi)
    x0, f0, x1, f1 = lo, flo, hi, fhi
    for _ in range(100):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not lo <= x2 <= hi:
            x2 = 0.5 * (lo + hi)
        f2 = fn(x2)
        if f2 == 0:
            return x2
        if (f2 > 0) == (flo > 0):
            lo, flo = x2, f2
        else:
            hi = x2
        if abs(x2 - x1) <= 1e-12 * abs(x2):
            return x2
        x0, f0, x1, f1 = x1, f1, x2, f2
    return optimize.brentq(fn, lo, hi, xtol=1e-300, rtol=1e-15)


def _local_extremum(fn, lo, hi, sign):
    """Refine an interior extremum (``sign=+1`` max, ``-1`` min) in log t."""
    g = lambda x: -sign * fn(math.exp(x))
    res = optimize.minimize_scalar(g, bounds=(math.log(lo), math.log(hi)), method="bounded",
                                   options={"xatol": 1e-13})
    return math.exp(res.x)


def find_roots(fn: Union[Landscape, Callable], t_max: Optional[float] = None, *,
               t_min: Optional[float] = None, max_roots: Optional[int] = None,
               n_scan: int = 4000, merge_tol: float = 1e-6) -> list:
    """All sign-change roots of ``fn`` on ``(0, T_max)``, in increasing order.

    For a :class:`Landscape` the bracket is ``T_max = 10 max(envelope, 1)``,
    doubled until ``fn`` has the sign of its leading term; the lower end sits
    three decades below the smallest monomial balance point so the scan sees
    the sign at the origin. A plain callable needs ``t_max``.

    Sampled extrema are refined before bracketing, so two roots separated
    by less than the scan spacing are still found. Roots closer than
    ``merge_tol`` relative are flagged ``paired`` and a
    :class:`ConditioningWarning` is issued.
    """
    if isinstance(fn, Landscape):
        lo_scale, hi_scale = fn.scales()
        T = 10.0 * max(hi_scale, 1.0) if t_max is None else float(t_max)
        for _ in range(200):
            if fn.leading_sign == 0 or np.sign(fn(T)) == fn.leading_sign:
                break
            T *= 2.0
        lo = 1e-3 * min(lo_scale, 1.0) if t_min is None else float(t_min)
        deriv = fn.derivative
        limit = fn.max_roots if max_roots is None else max_roots
    else:
        if t_max is None:
            raise ValueError("t_max is required for a plain callable")
        T = float(t_max)
        lo = T * 1e-9 if t_min is None else float(t_min)
        deriv = None
        limit = max_roots
    ts = np.geomspace(lo, T, n_scan)
    vs = np.asarray(fn(ts), dtype=float)

    # refine sampled interior extrema so that near-tangent dips are resolved
    knots = [(ts[0], vs[0])]
    for i in range(1, len(ts) - 1):
        if (vs[i] - vs[i - 1]) * (vs[i + 1] - vs[i]) < 0:
            kind = 1 if vs[i] > vs[i - 1] else -1
            x = _local_extremum(fn, ts[i - 1], ts[i + 1], kind)
            fx = float(fn(x))
            knots.append((ts[i], vs[i]) if kind * vs[i] > kind * fx else (x, fx))
        if np.sign(vs[i]) != np.sign(vs[i - 1]) or np.sign(vs[i + 1]) != np.sign(vs[i]):
            knots.append((ts[i], vs[i]))
    knots.append((ts[-1], vs[-1]))
    knots.sort(key=lambda kv: kv[0])

    found = []
    for (a, fa), (b, fb) in zip(knots[:-1], knots[1:]):
        if fa == 0 and (not found or found[-1] != a):
            found.append(a)
        elif fa * fb < 0:
            found.append(_refine(fn, a, b, fa))
    if not found:
        raise NoRootFound(f"{getattr(fn, 'name', 'function')} has no sign change on "
                          f"[{lo:.3g}, {T:.3g}]", min_value=float(min(v for _, v in knots)))
    if limit is not None and len(found) > limit:
        raise TooManyRoots(f"{len(found)} roots found, at most {limit} admissible")

    roots = []
    for x in found:
        if deriv is not None:
            d = float(deriv(x))
        else:
            e = 1e-7 * x
            d = float(fn(x + e) - fn(x - e))
        roots.append(Root(float(x), int(np.sign(d)), float(fn(x))))
    for i in range(len(roots) - 1):
        if roots[i + 1].t - roots[i].t < merge_tol * roots[i + 1].t:
            roots[i] = Root(roots[i].t, roots[i].deriv_sign, roots[i].value, True)
            roots[i + 1] = Root(roots[i + 1].t, roots[i + 1].deriv_sign, roots[i + 1].value, True)
            warnings.warn(f"roots {roots[i].t:.12g} and {roots[i + 1].t:.12g} nearly merge",
                          ConditioningWarning, stacklevel=2)
    return roots


def root_pairs(roots: Sequence[Root]) -> list:
    out = []
    for r, s in zip(roots[:-1], roots[1:]):
        if r.paired and s.paired:
            out.append(RootPair(r, s))
    return out


# ------------------------------------------------------------------ thresholds

@dataclass(frozen=True)
class ThresholdSet:
    """Closed-form constants of one parameter point.

    Quantities whose defining regime does not apply are ``None`` and the
    reason is recorded in ``absent``.
    """

    params: ProblemParams
    S: float
    b0: float
    b1: float
    C_q: Optional[float] = None
    eta: Optional[float] = None
    xi_minus: Optional[float] = None
    xi_plus: Optional[float] = None
    c_N_minus: Optional[float] = None
    c_N_plus: Optional[float] = None
    xi_1: Optional[float] = None
    c_N: Optional[float] = None
    Lambda: Optional[float] = None
    k0: Optional[float] = None
    c0: Optional[float] = None
    c1: Optional[float] = None
    k_c: Optional[float] = None
    xi0_mu: Optional[float] = None
    xi_minus_mu: Optional[float] = None
    xi_plus_mu: Optional[float] = None
    xi0_mu1: Optional[float] = None
    absent: dict = field(default_factory=dict)

    def require(self, name: str) -> float:
        v = getattr(self, name)
        if v is None:
            raise RegimeError(f"{name} is undefined here: {self.absent.get(name, 'not computed')}")
        return v

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"}
        out["params"] = self.params.as_dict()
        return out


def _b_thresholds(N: int, a: float, S: float):
    b0 = (2.0 / (N - 2)) * ((N - 4) / (a * (N - 2))) ** ((N - 4) / 2.0) * S ** (-N / 2.0)
    b1 = (4.0 / N) * ((N - 4) / (a * N)) ** ((N - 4) / 2.0) * S ** (-N / 2.0)
    if N == 4:
        # both prefactors are exactly one; keep the values bit-identical
        b0 = b1 = S ** -2.0
    return b0, b1


def thresholds(params: ProblemParams, C_q: Optional[float] = None) -> ThresholdSet:
    """Compute every constant whose defining hypotheses hold at ``params``.

    ``C_q`` (the Gagliardo-Nirenberg constant) enables ``c0, c1, k_c`` and the
    ``mu``-perturbed roots; if omitted the cache of
    :func:`kirchnorm.functionals.gn_constant` is consulted.
    """
    p = params
    N, a, b = p.N, p.a, p.b
    S = sobolev_constant(N)
    b0, b1 = _b_thresholds(N, a, S)
    if C_q is None:
        try:
            C_q = _gn_lookup(p, None, True)
        except MissingConstant:
            C_q = None
    out = dict(params=p, S=S, b0=b0, b1=b1, C_q=C_q)
    absent = {}

    if N >= 5 and b > 0:
        out["eta"] = math.sqrt(2 * a / ((N - 4) * b))
    else:
        absent["eta"] = "needs N >= 5 and b > 0"

    def level(xi):
        return a * xi**2 / N - (N - 4) / (4.0 * N) * b * xi**4

    if N >= 5 and 0 < b < b0:
        r = find_roots(landscape_f(p))
        out.update(xi_minus=r[0].t, xi_plus=r[-1].t,
                   c_N_minus=level(r[0].t), c_N_plus=level(r[-1].t))
    else:
        why = "needs N >= 5 and 0 < b < b0"
        absent.update(xi_minus=why, xi_plus=why, c_N_minus=why, c_N_plus=why)

    if N >= 5 and b < 0:
        r = find_roots(landscape_f(p))
        out.update(xi_1=r[0].t, c_N=level(r[0].t))
    else:
        absent.update(xi_1="needs N >= 5 and b < 0", c_N="needs N >= 5 and b < 0")

    if N == 4 and b * S**2 < 1:
        out["Lambda"] = a**2 * S**2 / (4 * (1 - b * S**2))
    else:
        absent["Lambda"] = "needs N=4 and b < S^-2"

    n4 = N == 4 and 0 < b < S**-2 and p.q < 3
    if n4:
        k0 = 2 * a * S**2 * (3 - p.q) / ((1 - b * S**2) * (4 - p.q))
        out["k0"] = k0
    else:
        absent["k0"] = "needs N=4, 0 < b < S^-2, 2 < q < 3"
    if n4 and p.mu > 0 and C_q is not None:
        Cq = C_q**p.q
        X = 4 * p.mu * Cq * S**2 * (3 - p.q) / (p.q * (1 - b * S**2))
        out["c0"] = k0**2 * X ** (-2.0 / (4 - p.q))
        out["c1"] = (a * p.q * k0 ** (3 - p.q) / (2 * p.mu * Cq * (4 - p.q) * (1 - b * S**2))) ** (2.0 / (4 - p.q))
        out["k_c"] = X ** (1.0 / (4 - p.q)) * math.sqrt(p.c)
    else:
        why = "needs N=4, 0 < b < S^-2, 2 < q < 3, mu > 0 and C_q"
        absent.update(c0=why, c1=why, k_c=why)

    names = ("xi0_mu", "xi_minus_mu", "xi_plus_mu", "xi0_mu1")
    if N >= 5 and p.mu > 0 and b > 0 and C_q is not None:
        try:
            r = find_roots(landscape_f1(p, C_q))
        except NoRootFound:
            r = []
        if len(r) == 3:
            out.update(xi0_mu=r[0].t, xi_minus_mu=r[1].t, xi_plus_mu=r[2].t)
        else:
            if len(r) == 1:
                out["xi0_mu"] = r[0].t
            for nm in names[len(r) > 0:3]:
                absent[nm] = f"f1 has {len(r)} positive roots, three needed (mu c^(q(1-delta)/2) too large or b >= b0)"
        try:
            z = find_roots(landscape_h1(p, C_q))
        except NoRootFound:
            z = []
        if len(z) == 1:
            out["xi0_mu1"] = z[0].t
        else:
            absent["xi0_mu1"] = f"h1 has {len(z)} positive zeros, a unique one needed"
    else:
        for nm in names:
            absent[nm] = "needs N >= 5, b > 0, mu > 0 and C_q"

    return ThresholdSet(absent=absent, **out)


def critical_levels(params: ProblemParams):
    """``(c_{N,-}, c_{N,+})`` for ``0 < b < b0`` or ``c_N`` for ``b < 0`` (N >= 5)."""
    p = params
    if p.N < 5:
        raise RegimeError("critical levels are defined for N >= 5")
    if p.b == 0:
        raise RegimeError("b = 0 is excluded: the pure-critical fiber has a single degenerate level")
    roots = find_roots(landscape_f(p))
    level = lambda xi: p.a * xi**2 / p.N - (p.N - 4) / (4.0 * p.N) * p.b * xi**4
    if p.b < 0:
        return level(roots[0].t)
    return level(roots[0].t), level(roots[-1].t)
