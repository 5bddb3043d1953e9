"""Radial discretization of H^1_rad(R^N).

Fields are continuous and piecewise linear in ``rho = r^2`` on a graded node
set ``0 = r_0 < ... < r_M = R_max``, with a homogeneous Dirichlet condition
at ``R_max``. Working in ``rho`` keeps the origin regular: the discrete
Laplacian is exact for every ``alpha + beta r^2`` (including at ``r = 0``),
and the lumped quadrature integrates ``alpha + beta r^2`` exactly against
``r^{N-1}`` on every cell.

Closed-form profiles (the Aubin-Talenti bubble, the truncated bubbles used in
the mountain-pass construction) also get an adaptive-quadrature route that is
independent of any grid.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate, interpolate, optimize

from .errors import SupportOverflow, ZeroField
from .norms import NormTuple
from .params import critical_exponent

# Gauss-Legendre nodes for the far-field cell moments.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def _sinh_nodes(R_max: float, n_cells: int, h0: float) -> np.ndarray:
    x = np.arange(n_cells + 1, dtype=float) / n_cells
    ratio = h0 * n_cells / R_max
    if ratio >= 1.0:
        return R_max * x
    beta = optimize.brentq(lambda b: b / math.sinh(b) - ratio if b < 700 else -ratio,
                           1e-8, 700.0, xtol=1e-14)
    # R sinh(beta x)/sinh(beta) without overflow
    r = R_max * np.exp(beta * (x - 1.0)) * (-np.expm1(-2.0 * beta * x)) / (-math.expm1(-2.0 * beta))
    r[0] = 0.0
    r[-1] = R_max
    return r


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes, lumped quadrature weights and cell stiffness weights.

    ``weights[i]`` integrates against ``|S^{N-1}| r^{N-1} dr`` and
    ``stiffness[j]`` is the exact weight of cell ``j`` in ``|grad u|_2^2``
    for the piecewise-linear-in-``r^2`` interpolant.
    """

    N: int
    nodes: np.ndarray
    weights: np.ndarray = field(repr=False)
    stiffness: np.ndarray = field(repr=False)
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.nodes, self.weights, self.stiffness):
            arr.setflags(write=False)

    @classmethod
    def from_nodes(cls, N: int, nodes, spec: Optional[dict] = None) -> "RadialGrid":
        r = np.asarray(nodes, dtype=float).copy()
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("nodes must start at 0 and be strictly increasing")
        rho = r * r
        lo, hi = rho[:-1], rho[1:]
        H = hi - lo
        p = N / 2.0
        area = sphere_area(N)
        # int_lo^hi (1/2) rho^{p-1} drho, closed form so the total is exact
        m0 = (hi**p - lo**p) / (2.0 * p)
        # int_lo^hi (rho - lo) (1/2) rho^{p-1} drho
        m1 = (hi ** (p + 1) - lo ** (p + 1)) / (2.0 * (p + 1)) - lo * m0
        far = lo >= 10.0 * H
        if np.any(far):
            t = _GL_T[None, :]
            base = lo[far, None] + H[far, None] * t
            m1[far] = 0.5 * H[far] ** 2 * np.sum(_GL_W * t * base ** (p - 1.0), axis=1)
        w_right = m1 / H
        w_left = m0 - w_right
        weights = np.zeros_like(r)
        weights[:-1] += w_left
        weights[1:] += w_right
        weights *= area
        stiffness = 2.0 * area * (hi ** (p + 1) - lo ** (p + 1)) / (p + 1) / H**2
        spec = dict(spec or {})
        spec.setdefault("kind", "nodes")
        return cls(int(N), r, weights, stiffness, spec)

    @classmethod
    def graded(cls, N: int, R_max: float, n_cells: int = 8000,
               h0: Optional[float] = None, breakpoints: Iterable[float] = ()) -> "RadialGrid":
        """Sinh-stretched grid: spacing ``~h0`` near the origin, geometric far out.

        ``h0`` defaults to ``20 / n_cells`` so that refinement keeps the
        stretching parameter fixed and nests the node sets. Interior nodes
        closest to each breakpoint are moved onto it (profiles with kinks).
        """
        if h0 is None:
            h0 = 20.0 / n_cells
        r = _sinh_nodes(float(R_max), int(n_cells), float(h0))
        bps = tuple(float(b) for b in breakpoints)
        for bp in bps:
            if 0 < bp < R_max:
                i = int(np.argmin(np.abs(r - bp)))
                if 0 < i < len(r) - 1 and r[i - 1] < bp < r[i + 1]:
                    r[i] = bp
        spec = {"kind": "graded", "N": int(N), "R_max": float(R_max),
                "n_cells": int(n_cells), "h0": float(h0), "breakpoints": list(bps)}
        return cls.from_nodes(N, r, spec)

    @property
    def R_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def rho(self) -> np.ndarray:
        return self.nodes**2

    @property
    def signature(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.N).encode())
        h.update(np.ascontiguousarray(self.nodes).tobytes())
        return h.hexdigest()[:16]

    def integrate(self, values) -> float:
        """Quadrature of ``int_{B_R} f dx`` for nodal samples ``f``."""
        return float(np.dot(self.weights, values))

    def grad2(self, values) -> float:
        d = np.diff(values)
        return float(np.dot(self.stiffness, d * d))

    def stiffness_apply(self, values) -> np.ndarray:
        """``K u`` where ``u^T K u = |grad u|_2^2``."""
        flux = self.stiffness * np.diff(values)
        out = np.zeros_like(values, dtype=float)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def stiffness_bands(self):
        """Main and off diagonal of K on the free nodes (all but the last)."""
        k = self.stiffness
        main = np.zeros(self.size - 1)
        main += k
        main[1:] += k[:-1]
        off = -k[:-1]
        return main, off

    def ball_volume(self) -> float:
        return sphere_area(self.N) * self.R_max**self.N / self.N


@dataclass(frozen=True, eq=False)
class RadialField:
    """Nodal samples of a radial function on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError("values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def __add__(self, other: "RadialField") -> "RadialField":
        if other.grid is not self.grid:
            raise ValueError("fields live on different grids")
        return RadialField(self.grid, self.values + other.values)

    def __mul__(self, k: float) -> "RadialField":
        return RadialField(self.grid, k * self.values)

    __rmul__ = __mul__

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def mass(self) -> float:
        return self.grid.integrate(self.values**2)

    def grad2(self) -> float:
        return self.grid.grad2(self.values)

    def lp(self, p: float) -> float:
        return self.grid.integrate(np.abs(self.values) ** p)

    def support_radius(self, rtol: float = 1e-12) -> float:
        a = np.abs(self.values)
        big = np.nonzero(a > rtol * a.max())[0] if a.max() > 0 else []
        return float(self.grid.nodes[big[-1]]) if len(big) else 0.0

    # ------------------------------------------------------------------ io
    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# N={self.grid.N}\n")
        buf.write(f"# grid={json.dumps(self.grid.spec, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "value"])
        for r, v in zip(self.grid.nodes, self.values):
            w.writerow([repr(float(r)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RadialField":
        N, spec, rows = None, {}, []
        for line in text.splitlines():
            if line.startswith("# N="):
                N = int(line[4:])
            elif line.startswith("# grid="):
                spec = json.loads(line[7:])
            elif line and not line.startswith("#") and not line.startswith("r,"):
                r, v = line.split(",")
                rows.append((float(r), float(v)))
        if N is None:
            raise ValueError("missing '# N=' header")
        arr = np.array(rows)
        return cls(RadialGrid.from_nodes(N, arr[:, 0], spec), arr[:, 1])

    def to_json(self) -> str:
        return json.dumps({
            "N": self.grid.N,
            "grid": self.grid.spec,
            "grid_signature": self.grid.signature,
            "r": [float(x) for x in self.grid.nodes],
            "values": [float(x) for x in self.values],
        })

    @classmethod
    def from_json(cls, text: str) -> "RadialField":
        d = json.loads(text)
        grid = RadialGrid.from_nodes(d["N"], np.array(d["r"], dtype=float), d.get("grid"))
        return cls(grid, np.array(d["values"], dtype=float))


# --------------------------------------------------------------------- bubbles

def bubble_profile(r, N: int, eps: float = 1.0):
    """Aubin-Talenti bubble ``(sqrt(N(N-2) eps) / (eps + r^2))^{(N-2)/2}``."""
    r = np.asarray(r, dtype=float)
    return (math.sqrt(N * (N - 2) * eps) / (eps + r * r)) ** ((N - 2) / 2.0)


def bubble_derivative(r, N: int, eps: float = 1.0):
    r = np.asarray(r, dtype=float)
    return -(N - 2) * r / (eps + r * r) * bubble_profile(r, N, eps)


def _radial_quad(f, breaks=(), upper=math.inf):
    """``int_0^upper f(r) dr`` split at ``breaks`` with a tight adaptive rule."""
    pts = [0.0] + sorted(b for b in breaks if 0 < b < upper) + [upper]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
        total += val
    return total


@lru_cache(maxsize=None)
def bubble_integrals(N: int) -> dict:
    """Adaptive-quadrature norms of ``U_{1,0}``: gradient, critical, mass."""
    area = sphere_area(N)
    crit = critical_exponent(N)
    breaks = (1.0, 10.0, 100.0)
    grad2 = area * _radial_quad(lambda r: bubble_derivative(r, N) ** 2 * r ** (N - 1), breaks)
    l2s = area * _radial_quad(lambda r: bubble_profile(r, N) ** crit * r ** (N - 1), breaks)
    mass = math.inf
    if N >= 5:
        mass = area * _radial_quad(lambda r: bubble_profile(r, N) ** 2 * r ** (N - 1), breaks)
    return {"grad2": grad2, "l2star": l2s, "mass2": mass}


def bubble_mass(N: int, eps: float = 1.0) -> float:
    """``|U_{eps,0}|_2^2 = eps |U_{1,0}|_2^2`` (finite only for N >= 5)."""
    return eps * bubble_integrals(N)["mass2"]


def epsilon_for_mass(N: int, c: float) -> float:
    """The unique ``eps_c`` with ``|U_{eps_c,0}|_2^2 = c`` (N >= 5)."""
    if N < 5:
        raise ValueError("the bubble has infinite mass for N <= 4")
    return c / bubble_integrals(N)["mass2"]


def default_rmax(N: int, eps: float = 1.0, rtol: float = 1e-8) -> float:
    """Truncation radius keeping every analytic bubble tail below ``rtol``.

    Uses ``U ~ A r^{2-N}`` for ``r >> sqrt(eps)``. The N = 4 mass diverges and
    is exempt. The gradient budget is 1e4 times tighter because the Dirichlet
    cut puts a jump across the (long) last cell whose energy grows with the
    number of cells.
    """
    A = (N * (N - 2)) ** ((N - 2) / 4.0)
    ints = bubble_integrals(N)
    area = sphere_area(N)
    crit = critical_exponent(N)
    # tail(R) = coef * R^{-power} for eps = 1
    tails = [
        (area * (N - 2) ** 2 * A**2 / (N - 2) * 1e4, N - 2, ints["grad2"]),
        (area * A**crit / N, N, ints["l2star"]),
    ]
    if N >= 5:
        tails.append((area * A**2 / (N - 4), N - 4, ints["mass2"]))
    R = 1.0
    for coef, power, total in tails:
        R = max(R, (coef / (rtol * total)) ** (1.0 / power))
    return R * math.sqrt(eps)


def bubble_grid(N: int, eps: float = 1.0, n_cells: int = 8000) -> RadialGrid:
    """Default grid for ``U_{eps,0}``."""
    return RadialGrid.graded(N, default_rmax(N, eps), n_cells=n_cells,
                             h0=20.0 * math.sqrt(eps) / n_cells)


def sample(grid: RadialGrid, profile: Callable, dirichlet: bool = True) -> RadialField:
    v = np.array(profile(grid.nodes), dtype=float)
    if dirichlet:
        v[-1] = 0.0
    return RadialField(grid, v)


def make_bubble(grid: RadialGrid, epsilon: float = 1.0) -> RadialField:
    """Samples ``U_{epsilon,0}``; the last node carries the Dirichlet zero."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return sample(grid, lambda r: bubble_profile(r, grid.N, epsilon))


# ---------------------------------------------------------- truncated bubbles

def truncated_bubble_profile(r, n: float):
    """Four-dimensional bubble at scale ``1/n`` with a linear cut-off on [1, 2].

    ``2 sqrt2 n / (1 + n^2 r^2)`` on [0, 1), ``2 sqrt2 n (2 - r) / (1 + n^2)``
    on [1, 2), zero beyond.
    """
    r = np.asarray(r, dtype=float)
    k = 2.0 * math.sqrt(2.0) * n
    out = np.where(r < 1.0, k / (1.0 + n * n * r * r), k * (2.0 - r) / (1.0 + n * n))
    return np.where(r < 2.0, out, 0.0)


def truncated_bubble_derivative(r, n: float):
    r = np.asarray(r, dtype=float)
    k = 2.0 * math.sqrt(2.0) * n
    out = np.where(r < 1.0, -2.0 * k * n * n * r / (1.0 + n * n * r * r) ** 2, -k / (1.0 + n * n))
    return np.where(r < 2.0, out, 0.0)


def make_truncated_bubble(grid4: RadialGrid, n: float) -> RadialField:
    if grid4.N != 4:
        raise ValueError("truncated bubbles are four-dimensional")
    if grid4.R_max < 2.0:
        raise ValueError("grid must reach r = 2")
    return sample(grid4, lambda r: truncated_bubble_profile(r, n))


def truncated_bubble_grid(n: float, R_max: float = 4.0, n_cells: int = 8000) -> RadialGrid:
    return RadialGrid.graded(4, R_max, n_cells=n_cells, h0=20.0 / (n * n_cells),
                             breakpoints=(1.0, 2.0))


def truncated_bubble_norms(n: float, q: float = 2.5) -> NormTuple:
    """Adaptive-quadrature norms of ``U_n`` (no grid)."""
    area = sphere_area(4)
    br = (1.0 / n, 10.0 / n, 1.0)
    f = lambda r: truncated_bubble_profile(r, n)
    df = lambda r: truncated_bubble_derivative(r, n)
    return NormTuple(
        area * _radial_quad(lambda r: df(r) ** 2 * r**3, br, 2.0),
        area * _radial_quad(lambda r: f(r) ** 2 * r**3, br, 2.0),
        area * _radial_quad(lambda r: f(r) ** q * r**3, br, 2.0),
        area * _radial_quad(lambda r: f(r) ** 4 * r**3, br, 2.0),
    )


# ------------------------------------------------------------------ operations

def norm_tuple(u: RadialField, q: float) -> NormTuple:
    """``(|grad u|^2, |u|_2^2, |u|_q^q, |u|_{2*}^{2*})`` by grid quadrature."""
    a = np.abs(u.values)
    crit = critical_exponent(u.grid.N)
    return NormTuple(u.grad2(), u.grid.integrate(a * a),
                     u.grid.integrate(a**q), u.grid.integrate(a**crit))


def dilate(u: RadialField, s: float, rtol: float = 1e-12) -> RadialField:
    """Mass-preserving dilation ``(s*u)(r) = e^{Ns/2} u(e^s r)``.

    Resamples with a monotone cubic in ``r^2``; only for building initial
    fields and explicit paths (fiber computations rescale tuples instead).
    """
    if s == 0:
        return RadialField(u.grid, u.values.copy())
    grid = u.grid
    if math.exp(-s) * u.support_radius(rtol) > grid.R_max * (1 + 1e-12):
        raise SupportOverflow(
            f"dilation by s={s:g} moves the support to "
            f"{math.exp(-s) * u.support_radius(rtol):.4g} > R_max={grid.R_max:.4g}")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        interp = interpolate.PchipInterpolator(grid.rho, u.values, extrapolate=False)
        x = (math.exp(s) * grid.nodes) ** 2
        vals = np.where(x <= grid.rho[-1], interp(np.minimum(x, grid.rho[-1])), 0.0)
    vals = np.nan_to_num(vals) * math.exp(grid.N * s / 2.0)
    vals[-1] = 0.0
    return RadialField(grid, vals)


def laplacian_apply(u: RadialField) -> RadialField:
    """Discrete ``u'' + (N-1) u'/r`` with regularity at 0, Dirichlet at R_max."""
    lap = -u.grid.stiffness_apply(u.values) / u.grid.weights
    lap[-1] = 0.0
    return RadialField(u.grid, lap)


def project_mass(u: RadialField, c: float) -> RadialField:
    """Rescale ``u`` so that ``|u|_2^2 = c``."""
    m = u.mass()
    if m == 0:
        raise ZeroField("cannot normalize the zero field")
    return RadialField(u.grid, u.values * math.sqrt(c / m))
