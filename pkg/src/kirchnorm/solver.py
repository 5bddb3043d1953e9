"""Mass-constrained gradient flows and explicit mountain-pass paths.

The flow minimizes ``I`` (or the four-dimensional ``J``) on
``{|u|_2^2 = c}`` restricted to nodal fields on a radial grid. Both
objectives have the form

    alpha/2 g + beta/4 g^2 - mu/q |u|_q^q - 1/p |u|_p^p,   g = |grad u|_2^2,

with ``(alpha, beta, p) = (a, b, 2*)`` for ``I`` and
``(a, b, 4) / (1 - b S^2)`` (the critical power stays 4) for ``J``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.linalg import solve_banded

from . import functionals as fn
from . import radial, scalar
from .errors import MassMismatch, RegimeError, RegionExit, Stalled
from .norms import NormTuple
from .params import ProblemParams


@dataclass(frozen=True)
class FlowConfig:
    """Settings of :func:`gradient_flow`.

    ``residual_tol`` bounds the Euler-Lagrange residual
    ``|(alpha + beta g)(-Delta u) + lambda u - mu |u|^{q-2} u - |u|^{p-2} u|_2``
    measured relative to ``|(alpha + beta g)(-Delta u)|_2``, so one tolerance
    serves minimizers whose gradient norms differ by many decades. ``region`` caps the squared
    gradient norm; steps that would cross it are rejected.
    """

    step: float = 1.0
    max_iters: int = 20000
    residual_tol: float = 1e-8
    region: Optional[float] = None
    objective: str = "I"
    min_step: float = 1e-14
    record_trajectory: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.objective not in ("I", "J"):
            raise ValueError("objective must be 'I' or 'J'")
        if self.region is not None and not self.region > 0:
            raise ValueError("region cap must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FlowResult:
    field: radial.RadialField
    tuple: NormTuple
    energy: float
    multiplier: float
    pohozaev_residual: float
    el_residual: float
    iters: int
    status: str
    params: ProblemParams
    config: FlowConfig
    el_residual_abs: float = float("nan")
    multiplier_closed: float = float("nan")
    energy_I: float = float("nan")
    near_degenerate: bool = False
    notes: tuple = ()
    trajectory: tuple = field(default=(), repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        return {
            "status": self.status, "iters": self.iters, "objective": self.config.objective,
            "energy": self.energy, "energy_I": self.energy_I,
            "multiplier": self.multiplier, "multiplier_closed": self.multiplier_closed,
            "pohozaev_residual": self.pohozaev_residual, "el_residual": self.el_residual,
            "el_residual_abs": self.el_residual_abs,
            "tuple": self.tuple.as_dict(), "min_interior_value": float(np.min(self.field.values[:-1])),
            "near_degenerate": self.near_degenerate, "notes": list(self.notes),
        }

    def to_json(self, include_field: bool = False) -> str:
        out = {
            "kind": "FlowResult", "params": self.params.as_dict(),
            "config": self.config.as_dict(), "grid": self.field.grid.spec,
            "grid_signature": self.field.grid.signature, **self.summary(),
        }
        if include_field:
            out["field"] = json.loads(self.field.to_json())
        return json.dumps(out, sort_keys=True, indent=1)

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "energy", "grad2", "residual"])
        for row in self.trajectory:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
        return buf.getvalue()


def _coefficients(p: ProblemParams, objective: str):
    if objective == "I":
        return p.a, p.b, p.crit
    if p.N != 4:
        raise RegimeError("J is defined in dimension 4 only")
    w = 1.0 - p.b * scalar.sobolev_constant(4) ** 2
    if w <= 0:
        raise RegimeError("J needs b < S^-2")
    return p.a / w, p.b / w, 4.0


def _objective_value(t: NormTuple, p: ProblemParams, objective: str) -> float:
    return fn.energy_I(t, p) if objective == "I" else fn.energy_J(t, p)


def objective_pohozaev(t: NormTuple, p: ProblemParams, objective: str = "I") -> float:
    """Pohozaev functional of the chosen objective (``P`` for ``I``)."""
    alpha, beta, pe = _coefficients(p, objective)
    return alpha * t.grad2 + beta * t.grad2**2 - p.mu * p.delta_q * t.lq - t.l2star


def near_degenerate(p: ProblemParams, th: Optional[scalar.ThresholdSet] = None,
                    margin: float = 1e-3) -> bool:
    """True within ``margin`` of ``q = 3`` or ``c = c0`` (four-dimensional regime)."""
    if p.N != 4:
        return False
    if abs(3.0 - p.q) < margin:
        return True
    if th is not None and th.c0 is not None and abs(th.c0 - p.c) < margin * th.c0:
        return True
    return False


def _power_remainder(w, u, d, p):
    """``sum w (|u+d|^p - |u|^p - p |u|^{p-2} u d)``, the second-order Taylor
    remainder, evaluated without cancellation."""
    out = np.empty_like(u)
    x = np.full_like(u, np.inf)
    nz = np.abs(u) > 1e-150
    x[nz] = d[nz] / u[nz]
    small = nz & (np.abs(x) < 1e-3)
    xs = x[small]
    # binomial series (1+x)^p - 1 - p x
    series = p * (p - 1) / 2 * xs**2 * (1 + (p - 2) / 3 * xs * (1 + (p - 3) / 4 * xs * (1 + (p - 4) / 5 * xs)))
    out[small] = np.abs(u[small]) ** p * series
    mid = nz & ~small & (x > -0.5) & (x < 4.0)
    xm = x[mid]
    out[mid] = np.abs(u[mid]) ** p * (np.expm1(p * np.log1p(xm)) - p * xm)
    rest = ~(small | mid)
    ur, dr = u[rest], d[rest]
    out[rest] = np.abs(ur + dr) ** p - np.abs(ur) ** p - p * np.abs(ur) ** (p - 2) * ur * dr
    return float(np.dot(w, out))


CONFINEMENT_RTOL = 1e-6


class _Discrete:
    """Discrete objective, gradient and preconditioner on the free nodes."""

    def __init__(self, grid: radial.RadialGrid, p: ProblemParams, objective: str):
        self.grid, self.p, self.objective = grid, p, objective
        self.alpha, self.beta, self.pe = _coefficients(p, objective)
        self.w = grid.weights[:-1]
        self.kmain, self.koff = grid.stiffness_bands()

    def full(self, u):
        return np.append(u, 0.0)

    def norms(self, u) -> NormTuple:
        a = np.abs(u)
        return NormTuple(self.grid.grad2(self.full(u)), float(np.dot(self.w, u * u)),
                         float(np.dot(self.w, a**self.p.q)), float(np.dot(self.w, a**self.pe)))

    def value(self, t: NormTuple) -> float:
        p = self.p
        return (self.alpha / 2 * t.grad2 + self.beta / 4 * t.grad2**2 - p.mu / p.q * t.lq
                - t.l2star / self.pe)

    def delta(self, u, d, t0: NormTuple, t1: NormTuple, G, lam) -> float:
        """``E(u + d) - E(u)`` for a mass-preserving increment ``d``.

        Written as the tangential first-order term ``G . d`` plus exact
        second-order remainders (using ``u.W d = -d.W d / 2``), so that no
        large terms cancel near a critical point.
        """
        p = self.p
        Kd = self.grid.stiffness_apply(self.full(d))[:-1]
        dKd = float(np.dot(d, Kd))
        dg = t1.grad2 - t0.grad2
        coef0 = self.alpha + self.beta * t0.grad2
        return (float(np.dot(G, d)) + lam / 2 * float(np.dot(self.w * d, d))
                + coef0 / 2 * dKd + self.beta / 4 * dg * dg
                - p.mu / p.q * _power_remainder(self.w, u, d, p.q)
                - _power_remainder(self.w, u, d, self.pe) / self.pe)

    def gradient(self, u, t: NormTuple):
        Ku = self.grid.stiffness_apply(self.full(u))[:-1]
        a = np.abs(u)
        coef = self.alpha + self.beta * t.grad2
        nonlin = self.p.mu * self.w * a ** (self.p.q - 2) * u + self.w * a ** (self.pe - 2) * u
        return coef * Ku - nonlin, Ku, coef

    def residual(self, u, t: NormTuple):
        grad, Ku, coef = self.gradient(u, t)
        lam = -float(np.dot(u, grad)) / t.mass2
        R = grad / self.w + lam * u
        res = math.sqrt(float(np.dot(self.w, R * R)))
        scale = math.sqrt(float(np.dot(self.w, (coef * Ku / self.w) ** 2)))
        return grad, Ku, coef, lam, (res / scale if scale > 0 else math.inf), res

    def precondition(self, rhs_list, Ku, coef, sigma, t: NormTuple):
        """Solve with ``coef K + sigma W + 2 beta (Ku)(Ku)^T`` (Sherman-Morrison)."""
        ab = np.zeros((3, len(self.w)))
        ab[0, 1:] = coef * self.koff
        ab[1] = coef * self.kmain + sigma * self.w
        ab[2, :-1] = coef * self.koff
        cols = np.column_stack(list(rhs_list) + [Ku])
        sol = solve_banded((1, 1), ab, cols)
        out = [sol[:, i] for i in range(len(rhs_list))]
        if self.beta > 0:
            z = sol[:, -1]
            denom = 1.0 + 2 * self.beta * float(np.dot(Ku, z))
            out = [x - (2 * self.beta * float(np.dot(Ku, x)) / denom) * z for x in out]
        return out


def gradient_flow(init: radial.RadialField, params: ProblemParams,
                  config: FlowConfig = FlowConfig()) -> FlowResult:
    """Projected, preconditioned steepest descent on the mass sphere.

    Each step solves with ``A = (alpha + beta g) K + sigma W`` (plus the
    rank-one nonlocal term), removes the mass-normal component in the
    ``A``-metric, retracts onto ``|u|_2^2 = c`` by rescaling, and backtracks
    until Armijo decrease holds and the region cap is respected. Stops on the
    relative Euler-Lagrange residual.
    """
    p = params
    D = _Discrete(init.grid, p, config.objective)
    u = init.values[:-1].copy()
    if abs(float(np.dot(D.w, u * u)) - p.c) > 1e-10 * p.c:
        u *= math.sqrt(p.c / float(np.dot(D.w, u * u)))
    t = D.norms(u)
    cap = config.region
    if cap is not None and t.grad2 >= cap:
        raise RegionExit(f"initial field has |grad u|^2 = {t.grad2:.6g} >= cap {cap:.6g}",
                         {"tuple": t.as_dict()})
    E = D.value(t)
    traj = []
    step = config.step
    status, it = "max-iters", 0
    res = absres = math.inf
    lam = math.nan
    for it in range(config.max_iters + 1):
        grad, Ku, coef, lam, res, absres = D.residual(u, t)
        if config.record_trajectory:
            traj.append((it, E, t.grad2, res))
        if res <= config.residual_tol:
            status = "converged"
            break
        if it == config.max_iters:
            break
        sigma = max(lam, 1e-3 * coef * t.grad2 / t.mass2)
        # precondition the tangential part grad + lambda W u: same direction,
        # no cancellation against the large mass-normal component
        G = grad + lam * D.w * u
        x, y = D.precondition([G, D.w * u], Ku, coef, sigma, t)
        theta = float(np.dot(D.w * u, x)) / float(np.dot(D.w * u, y))
        d = -(x - theta * y)
        slope = float(np.dot(G, d))
        if slope >= 0:
            status = "stalled"
            break
        step = min(2.0 * step, config.step)
        crossed = False
        while True:
            trial = u + step * d
            mt = float(np.dot(D.w, trial * trial))
            trial *= math.sqrt(p.c / mt)
            tt = D.norms(trial)
            crossed = cap is not None and tt.grad2 >= cap
            if not crossed:
                dE = D.delta(u, trial - u, t, tt, G, lam)
                if dE <= 1e-4 * step * slope:
                    Et = D.value(tt)
                    break
            step *= 0.5
            if step < config.min_step:
                break
        if step < config.min_step:
            status = "region-exit" if crossed else "stalled"
            break
        u, t, E = trial, tt, Et

    fieldv = radial.RadialField(init.grid, D.full(u))
    if status == "converged" and fieldv.support_radius(CONFINEMENT_RTOL) > 0.5 * init.grid.R_max:
        # the Dirichlet ground state of the truncated ball is a discrete
        # critical point with no whole-space counterpart
        status = "confined"
    th = None
    try:
        th = scalar.thresholds(p) if p.N == 4 else None
    except Exception:
        th = None
    result = FlowResult(
        field=fieldv, tuple=t, energy=E, multiplier=lam,
        pohozaev_residual=objective_pohozaev(t, p, config.objective),
        el_residual=res, el_residual_abs=absres, iters=it, status=status, params=p, config=config,
        multiplier_closed=fn.multiplier(t, p), energy_I=fn.energy_I(t, p),
        near_degenerate=near_degenerate(p, th), trajectory=tuple(traj))
    if status == "region-exit":
        raise RegionExit(f"flow pinned at the region cap {cap:.6g} after {it} iterations",
                         {"tuple": t.as_dict(), "result": result})
    if status == "confined":
        raise Stalled(f"flow drained to the ground state of the truncated domain "
                      f"(|grad u|^2 = {t.grad2:.3g}, field not decayed by R_max/2)",
                      {"result": result, "residual": res, "iters": it, "confined": True})
    if status in ("stalled", "max-iters"):
        raise Stalled(f"flow did not reach residual {config.residual_tol:g} "
                      f"({status}, residual {res:.3g} after {it} iterations)",
                      {"result": result, "residual": res, "iters": it})
    return result


# ------------------------------------------------------------------ minimizers

@dataclass(frozen=True)
class MinimizerSetup:
    """Region cap, grid length scale and initial guess of a local-minimizer run."""

    cap: float
    scale: float
    grad2_target: float
    reason: str


def _minimizer_setup(p: ProblemParams, objective: str = "I") -> MinimizerSetup:
    th = scalar.thresholds(p)
    if p.N >= 5:
        if not (p.mu > 0 and th.b1 < p.b < th.b0 and p.q < 2 + 4.0 / p.N):
            raise RegimeError("local minimizer needs N >= 5, mu > 0, b1 < b < b0, q < 2 + 4/N")
        C = fn.gn_constant(p.N, p.q)
        th = scalar.thresholds(p, C_q=C)
        if th.xi0_mu1 is None or th.xi_plus_mu is None:
            raise RegimeError("mu c^(q(1-delta)/2) is above the checked sufficient bound: "
                              + th.absent.get("xi0_mu1", th.absent.get("xi_plus_mu", "")))
        if scalar.eval_h1(th.xi_plus_mu, p, C_q=C) <= 0:
            raise RegimeError("sufficient condition h1(xi_+^mu) > 0 fails")
        cap = th.xi0_mu1**2
        # the minimizer sits near the first minimum of h1
        g_est = th.xi0_mu**2
        reason = "cap (xi_0^{mu,1})^2"
    else:
        S = th.S
        if not (p.mu > 0 and 0 < p.b < S**-2 and p.q < 3):
            raise RegimeError("local minimizer needs N = 4, mu > 0, 0 < b < S^-2, 2 < q < 3")
        C = fn.gn_constant(4, p.q)
        th = scalar.thresholds(p, C_q=C)
        if not p.c < th.c0:
            raise RegimeError(f"needs c < c0 = {th.c0:.6g}")
        cap = th.k0
        # minimum of the lower bound k f_c(k) on (0, k0)
        h = lambda k: k * scalar.eval_fc(k, p, C_q=C)
        r = optimize.minimize_scalar(lambda x: h(math.exp(x)),
                                     bounds=(math.log(cap) - 40, math.log(cap)), method="bounded")
        g_est = min(math.exp(r.x), 0.5 * cap)
        if objective == "J":
            # J has a/w in place of a; balancing (a/w) g against mu |u|_q^q ~ g^(q-2)
            # moves the minimizer to g ~ w^(1/(3-q)) times the I estimate
            g_est *= (1 - p.b * S**2) ** (1.0 / (3 - p.q))
        reason = "cap k0"
    scale = math.sqrt(p.c / g_est)
    return MinimizerSetup(cap, scale, g_est, reason)


def minimizer_grid(p: ProblemParams, scale: float, n_cells: int = 16000,
                   r_factor: float = 80.0, grading: float = 20.0) -> radial.RadialGrid:
    """Grid for a minimizer of length scale ``scale`` (exponential tail):
    ``R_max = r_factor * scale`` and origin spacing ``grading * scale / n_cells``."""
    return radial.RadialGrid.graded(p.N, r_factor * scale, n_cells=n_cells,
                                    h0=grading * scale / n_cells)


def initial_guess(grid: radial.RadialGrid, p: ProblemParams, grad2: float) -> radial.RadialField:
    """Bubble core times a Gaussian bump, mass ``c``, analytically dilated so
    that ``|grad u|_2^2 = grad2``."""
    N = p.N
    prof = lambda r: (1.0 + r * r) ** (-(N - 2) / 2.0) * np.exp(-r * r / 4.0)
    # reference norms of the unit-scale profile on a grid that resolves it
    ref = radial.project_mass(radial.sample(radial.RadialGrid.graded(N, 60.0, 4000), prof), p.c)
    s = 0.5 * math.log(grad2 / ref.grad2())
    k = math.exp(s)
    u = radial.sample(grid, lambda r: math.exp(N * s / 2) * prof(k * r))
    return radial.project_mass(u, p.c)


def local_minimizer(params: ProblemParams, objective: str = "I", n_cells: int = 64000,
                    config: Optional[FlowConfig] = None, r_factor: float = 80.0,
                    grading: float = 20.0) -> FlowResult:
    """Local minimizer inside the gradient-norm region of the regime.

    Starts at ``grad2 = 0.1 cap`` and asserts negative energy and a positive
    multiplier at the end.
    """
    p = params
    setup = _minimizer_setup(p, objective)
    grid = minimizer_grid(p, setup.scale, n_cells, r_factor, grading)
    init = initial_guess(grid, p, 0.1 * setup.cap)
    cfg = config or FlowConfig()
    cfg = replace(cfg, region=setup.cap, objective=objective)
    res = gradient_flow(init, p, cfg)
    notes = [setup.reason]
    if not res.energy < 0:
        notes.append("energy is not negative")
    if not res.multiplier > 0:
        notes.append("multiplier is not positive")
    if np.any(res.field.values[:-1] <= 0):
        notes.append("field is not positive at every interior node")
    if abs(res.field.values[-2]) > 1e-8 * abs(res.field.values[0]):
        notes.append("field has not decayed at R_max")
    return replace(res, notes=tuple(notes))


# ------------------------------------------------------------------ paths

@dataclass(frozen=True)
class PathReport:
    kind: str
    t: tuple
    levels: tuple
    grad2: tuple
    sup_level: float
    sup_t: float
    endpoints: tuple
    comparison: dict = field(default_factory=dict)
    params: Optional[ProblemParams] = None
    grid_signature: str = ""
    near_degenerate: bool = False

    def as_dict(self) -> dict:
        return {"kind": self.kind, "sup_level": self.sup_level, "sup_t": self.sup_t,
                "endpoints": list(self.endpoints), "comparison": self.comparison,
                "params": self.params.as_dict() if self.params else None,
                "grid_signature": self.grid_signature, "near_degenerate": self.near_degenerate,
                "t": list(self.t), "levels": list(self.levels), "grad2": list(self.grad2)}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "level", "grad2"])
        for row in zip(self.t, self.levels, self.grad2):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def mp_path_mu0(params: ProblemParams, n_samples: int = 2001,
                n_cells: int = 8000) -> PathReport:
    """Explicit dilation path through the pure-critical mountain pass.

    Starts from the mass-``c`` bubble dilated to ``s0`` with
    ``I(s0 * u) < c_{N,-}`` and ends at the ``P^+`` projection.
    """
    p = params
    th = scalar.thresholds(p)
    if not (p.N >= 5 and p.mu == 0 and 0 < p.b < th.b0):
        raise RegimeError("the mu = 0 path needs N >= 5, mu = 0 and 0 < b < b0")
    eps = radial.epsilon_for_mass(p.N, p.c)
    u = radial.project_mass(radial.make_bubble(radial.bubble_grid(p.N, eps, n_cells), eps), p.c)
    tup = radial.norm_tuple(u, p.q)
    rep = fn.fiber_project(tup, p)
    minus = [r for r in rep.roots if r.cls == "minus"]
    plus = [r for r in rep.roots if r.cls == "plus"]
    if not minus or not plus:
        raise RegimeError(f"fiber roots {rep.classes()} do not form a minus/plus pair")
    s_minus, s_plus = minus[0].s, plus[-1].s
    s0 = s_minus - 1.0
    while fn.fiber_eval(tup, s0, p)[0] >= 0.5 * minus[0].psi:
        s0 -= 1.0
    ts = np.linspace(0.0, 1.0, n_samples)
    ss = ts * s_plus + (1 - ts) * s0
    levels = np.array([fn.fiber_eval(tup, s, p)[0] for s in ss])
    g2 = tup.grad2 * np.exp(2 * ss)
    # the sup is at the P^- root, which lies on the path
    t_star = (s_minus - s0) / (s_plus - s0)
    sup_level = max(float(levels.max()), minus[0].psi)
    sup_t = t_star if minus[0].psi >= levels.max() else float(ts[int(levels.argmax())])
    return PathReport(
        kind="mu0-dilation", t=tuple(ts), levels=tuple(levels), grad2=tuple(g2),
        sup_level=sup_level, sup_t=sup_t,
        endpoints=(float(levels[0]), float(levels[-1])),
        comparison={"c_N_minus": th.c_N_minus, "c_N_plus": th.c_N_plus,
                    "xi_minus": th.xi_minus, "s0": s0, "s_minus": s_minus, "s_plus": s_plus},
        params=p, grid_signature=u.grid.signature)


def _w_path_grid(ubar: radial.RadialField, n: float, n_cells: int) -> radial.RadialGrid:
    R = max(ubar.grid.R_max, 4.0)
    return radial.RadialGrid.graded(4, R, n_cells=n_cells, h0=5.0 / (n * n_cells) * 20,
                                    breakpoints=(1.0, 2.0))


def resample(u: radial.RadialField, grid: radial.RadialGrid) -> radial.RadialField:
    """Monotone cubic transfer (in ``r^2``) of a field to another grid."""
    from scipy.interpolate import PchipInterpolator
    f = PchipInterpolator(u.grid.rho, u.values, extrapolate=False)
    x = np.minimum(grid.rho, u.grid.rho[-1])
    vals = np.nan_to_num(f(x))
    vals[grid.rho > u.grid.rho[-1]] = 0.0
    vals[-1] = 0.0
    return radial.RadialField(grid, vals)


def mp_path_W(params: ProblemParams, ubar: FlowResult, n: int = 100,
              t_grid: Optional[Sequence[float]] = None, m_c: Optional[float] = None,
              n_cells: int = 24000, n_samples: int = 241) -> PathReport:
    """The superposition path ``W_{n,t} = tau [ubar(tau x) + t U_n(tau x)]``.

    ``tau = |ubar + t U_n|_2 / sqrt(c)`` restores the mass, and in dimension
    four the norms of ``W`` follow from those of ``v = ubar + t U_n`` exactly:
    ``g, |.|_4^4`` unchanged, ``|W|_q^q = tau^{q-4} |v|_q^q``.
    """
    p = params
    if p.N != 4:
        raise RegimeError("W-paths are four-dimensional")
    th = scalar.thresholds(p, C_q=fn.gn_constant(4, p.q))
    S = th.S
    grid = _w_path_grid(ubar.field, n, n_cells)
    ub = resample(ubar.field, grid)
    Un = radial.make_truncated_bubble(grid, n)
    mbar = fn.energy_J(ubar.tuple, p)
    if m_c is None:
        m_c = ubar.energy_I

    def tuple_at(t):
        v = ub.values + t * Un.values
        vt = radial.norm_tuple(radial.RadialField(grid, v), p.q)
        tau = math.sqrt(vt.mass2 / p.c)
        W = NormTuple(vt.grad2, vt.mass2 / tau**2, tau ** (p.q - 4) * vt.lq, vt.l2star)
        if abs(W.mass2 - p.c) > 1e-10 * p.c:
            raise MassMismatch(f"|W|_2^2 = {W.mass2:.12g} differs from c = {p.c:.12g}")
        return W

    level = lambda t: fn.energy_I(tuple_at(t), p)
    t_star = math.sqrt((p.a + p.b * ub.grad2()) / (1 - p.b * S**2))
    if t_grid is None:
        t_bar = 2 * t_star
        for _ in range(60):
            if level(t_bar) < 2 * m_c:
                break
            t_bar *= 2
        else:
            raise RegimeError("no endpoint with I(W) < 2 m(c) found")
        t_grid = np.linspace(0.0, t_bar, n_samples)
    t_grid = np.asarray(t_grid, dtype=float)
    tuples = [tuple_at(t) for t in t_grid]
    levels = np.array([fn.energy_I(x, p) for x in tuples])
    k = int(np.argmax(levels))
    lo = t_grid[max(k - 1, 0)]
    hi = t_grid[min(k + 1, len(t_grid) - 1)]
    sup_t, sup_level = float(t_grid[k]), float(levels[k])
    if hi > lo:
        r = optimize.minimize_scalar(lambda t: -level(t), bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-10 * max(hi, 1.0)})
        if -r.fun > sup_level:
            sup_t, sup_level = float(r.x), float(-r.fun)
    Lam = th.Lambda
    return PathReport(
        kind="W-superposition", t=tuple(t_grid), levels=tuple(levels),
        grad2=tuple(x.grad2 for x in tuples), sup_level=sup_level, sup_t=sup_t,
        endpoints=(float(levels[0]), float(levels[-1])),
        comparison={"n": n, "m_bar": mbar, "Lambda": Lam, "threshold": mbar + Lam,
                    "margin": mbar + Lam - sup_level, "t_star": t_star,
                    "m_c": m_c, "endpoint_below_2m": bool(levels[-1] < 2 * m_c)},
        params=p, grid_signature=grid.signature, near_degenerate=near_degenerate(p, th))


@dataclass(frozen=True)
class LevelEstimate:
    upper: float
    lower: Optional[float]
    lower_sampled: Optional[float]
    threshold: Optional[float]
    n_paths: int

    def as_dict(self) -> dict:
        return asdict(self)


def boundary_barrier(params: ProblemParams, n_samples: int = 64, seed: int = 0,
                     n_cells: int = 4000):
    """Lower barrier ``d`` on the boundary ``{|grad u|_2^2 = k0}`` (N = 4).

    Returns ``(k0 f_c(k0), min of I over sampled boundary fields)``. The
    first is the analytic bound from the Sobolev and Gagliardo-Nirenberg
    inequalities; the second evaluates random mass-``c`` fields dilated
    exactly (on their norm tuples) onto the boundary.
    """
    p = params
    C = fn.gn_constant(4, p.q)
    th = scalar.thresholds(p, C_q=C)
    k0 = th.require("k0")
    analytic = k0 * scalar.eval_fc(k0, p, C_q=C)
    rng = np.random.default_rng(seed)
    grid = radial.RadialGrid.graded(4, 60.0, n_cells=n_cells)
    sampled = math.inf
    for _ in range(n_samples):
        k = int(rng.integers(1, 4))
        vals = sum(rng.uniform(0.2, 1.0) * np.exp(-((grid.nodes - rng.uniform(0, 3)) / rng.uniform(0.3, 3)) ** 2)
                   for _ in range(k))
        vals[-1] = 0.0
        t = radial.norm_tuple(radial.project_mass(radial.RadialField(grid, vals), p.c), p.q)
        s = 0.5 * math.log(k0 / t.grad2)
        sampled = min(sampled, fn.energy_I(t.scaled(s, 4, p.q), p))
    return analytic, sampled


def mp_level_estimate(params: ProblemParams, paths: List[PathReport],
                      barrier: bool = True) -> LevelEstimate:
    """Upper bound ``min sup`` over paths, with the boundary barrier as lower bound."""
    if not paths:
        raise ValueError("at least one path is required")
    upper = min(pr.sup_level for pr in paths)
    lower = lower_s = None
    if barrier and params.N == 4:
        lower, lower_s = boundary_barrier(params)
    threshold = paths[0].comparison.get("threshold") if paths[0].comparison else None
    return LevelEstimate(upper, lower, lower_s, threshold, len(paths))
