"""Regime classification and per-regime verification reports.

``classify`` maps a parameter point to the regime whose hypotheses it meets;
``verify`` runs that regime's inequality and identity checks and returns a
:class:`RegimeReport` with the computed values behind every verdict.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from . import __version__
from . import functionals as fn
from . import radial, scalar, solver
from .errors import KirchnormError, NoRootFound, RegimeError
from .norms import NormTuple
from .params import ProblemParams

SCHEMA = "kirchnorm.regime-report/1"
MARGIN = 1e-9

TH21_I, TH21_II, TH21_III = "Th2.1(i)", "Th2.1(ii)", "Th2.1(iii)"
TH23, TH24, TH25, TH26, TH27 = "Th2.3", "Th2.4", "Th2.5", "Th2.6", "Th2.7"
INADMISSIBLE = "inadmissible"
TAGS = (TH21_I, TH21_II, TH21_III, TH23, TH24, TH25, TH26, TH27, INADMISSIBLE)
ALIASES = {TH26: "Th3.1"}

_CLI_NAMES = {"th2.1i": TH21_I, "th2.1ii": TH21_II, "th2.1iii": TH21_III, "th2.3": TH23,
              "th2.4": TH24, "th2.5": TH25, "th2.6": TH26, "th3.1": TH26, "th2.7": TH27}


def tag_from_name(name: str) -> str:
    """``'th2.7'`` / ``'Th2.1(i)'`` style names to a canonical tag."""
    key = name.strip().lower().replace("(", "").replace(")", "")
    if key in _CLI_NAMES:
        return _CLI_NAMES[key]
    raise ValueError(f"unknown regime {name!r}; choose from {sorted(_CLI_NAMES)}")


# ------------------------------------------------------------------ classification

@dataclass(frozen=True)
class Classification:
    tag: str
    reason: str
    admissible: tuple = ()


def _classify(p: ProblemParams) -> Classification:
    S = scalar.sobolev_constant(p.N)
    b0, b1 = scalar._b_thresholds(p.N, p.a, S)
    if p.N >= 5:
        if p.mu == 0:
            if p.b < 0:
                return Classification(TH21_II, "N >= 5, mu = 0, b < 0", (TH21_II,))
            if p.b == 0:
                return Classification(INADMISSIBLE, "b = 0 violates b < 0 and b > 0")
            if p.b < b0:
                return Classification(TH21_I, "N >= 5, mu = 0, 0 < b < b0", (TH21_I,))
            if p.b == b0:
                return Classification(INADMISSIBLE, "b = b0 violates b < b0 and b > b0")
            return Classification(TH21_III, "N >= 5, mu = 0, b > b0", (TH21_III,))
        if p.mu < 0:
            if p.b > 0:
                return Classification(TH23, "N >= 5, mu < 0, b > 0", (TH23,))
            return Classification(INADMISSIBLE, "mu < 0 needs b > 0")
        # mu > 0
        if not p.b > b1:
            return Classification(INADMISSIBLE, "mu > 0 needs b > b1")
        if not p.b < b0:
            return Classification(INADMISSIBLE, "mu > 0 needs b < b0")
        if not p.q < 2 + 4.0 / p.N:
            return Classification(INADMISSIBLE, "mu > 0 needs q < 2 + 4/N")
        return Classification(TH26, "N >= 5, mu > 0, b1 < b < b0, q < 2 + 4/N", (TH26,))
    # N = 4
    if p.mu == 0:
        if p.b > 0:
            return Classification(TH24, "N = 4, mu = 0, b > 0", (TH24,))
        return Classification(INADMISSIBLE, "N = 4, mu = 0 needs b > 0")
    if p.mu < 0:
        return Classification(INADMISSIBLE, "N = 4 with mu < 0 is outside the hypothesis table")
    if not p.b > 0:
        return Classification(INADMISSIBLE, "N = 4, mu > 0 needs b > 0")
    if not p.b < S**-2:
        return Classification(INADMISSIBLE, "N = 4, mu > 0 needs b < S^-2")
    if not p.q < 3:
        return Classification(INADMISSIBLE, "N = 4, mu > 0 needs q < 3")
    th = scalar.thresholds(p, C_q=fn.gn_constant(4, p.q))
    if not p.c < th.c0:
        return Classification(INADMISSIBLE, f"N = 4, mu > 0 needs c < c0 = {th.c0:.9g}")
    if p.c < min(th.c0, th.c1):
        return Classification(TH27, "N = 4, mu > 0, 0 < b < S^-2, q < 3, c < min(c0, c1)",
                              (TH25, TH27))
    return Classification(TH25, "N = 4, mu > 0, 0 < b < S^-2, q < 3, c < c0", (TH25,))


def classify(params: ProblemParams) -> str:
    """Regime tag of a parameter point (total: never raises on valid params)."""
    return _classify(params).tag


def classify_detail(params: ProblemParams) -> Classification:
    return _classify(params)


# ------------------------------------------------------------------ checks

@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    relation: str
    values: dict
    status: str
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status in ("fail", "error")


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, float, np.floating, np.integer)):
        return float(x)
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def strict(name, anchor, lhs, rhs, relation=">", lhs_name="lhs", rhs_name="rhs",
           scale=None) -> Check:
    """``lhs > rhs`` (or ``<``) with the relative margin rule. ``scale``
    replaces ``max(|lhs|, |rhs|)`` when both sides are differences of larger terms."""
    diff = lhs - rhs if relation == ">" else rhs - lhs
    scale = max(abs(lhs), abs(rhs), 1e-300) if scale is None else scale
    if diff > MARGIN * scale:
        status = "pass"
    elif diff >= -MARGIN * scale:
        status = "marginal"
    else:
        status = "fail"
    return Check(name, anchor, f"{lhs_name} {relation} {rhs_name}",
                 {lhs_name: _num(lhs), rhs_name: _num(rhs), "margin": _num(diff)}, status)


def close(name, anchor, value, ref, rtol, value_name="value", ref_name="ref",
          scale=None) -> Check:
    err = abs(value - ref) / max(abs(ref), 1e-300 if scale is None else scale)
    return Check(name, anchor, f"|{value_name} - {ref_name}| <= {rtol:g} |{ref_name}|",
                 {value_name: _num(value), ref_name: _num(ref), "rel_err": _num(err)},
                 "pass" if err <= rtol else "fail")


def truth(name, anchor, relation, ok, values, detail="") -> Check:
    return Check(name, anchor, relation, {k: _num(v) for k, v in values.items()},
                 "pass" if ok else "fail", detail)


def errored(name, anchor, relation, exc) -> Check:
    return Check(name, anchor, relation, {}, "error", f"{type(exc).__name__}: {exc}")


# ------------------------------------------------------------------ report

@dataclass
class RegimeReport:
    params: ProblemParams
    thresholds: scalar.ThresholdSet
    regime_tag: str
    reason: str
    depth: str
    checks: List[Check] = field(default_factory=list)
    artifacts: Dict[str, dict] = field(default_factory=dict)

    @property
    def failed(self) -> List[Check]:
        return [c for c in self.checks if c.failed]

    @property
    def marginal(self) -> List[Check]:
        return [c for c in self.checks if c.status == "marginal"]

    @property
    def ok(self) -> bool:
        return not self.failed

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA, "version": __version__, "params": self.params.as_dict(),
            "regime_tag": self.regime_tag, "alias": ALIASES.get(self.regime_tag),
            "reason": self.reason, "depth": self.depth,
            "thresholds": _jsonable(self.thresholds.as_dict()),
            "checks": [asdict(c) for c in self.checks],
            "artifacts": _jsonable(self.artifacts),
            "summary": {"n_checks": len(self.checks), "n_failed": len(self.failed),
                        "n_marginal": len(self.marginal), "ok": self.ok},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=1)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


# ------------------------------------------------------------------ probes

def bubble_tuple(p: ProblemParams, n_cells: int = 8000) -> NormTuple:
    """Norms of the mass-``c`` bubble (N >= 5) or the truncated bubble
    scaled to mass ``c`` (N = 4, cut-off scale 1/200)."""
    if p.N >= 5:
        eps = radial.epsilon_for_mass(p.N, p.c)
        u = radial.make_bubble(radial.bubble_grid(p.N, eps, n_cells), eps)
        return radial.norm_tuple(radial.project_mass(u, p.c), p.q)
    t = radial.truncated_bubble_norms(200, q=p.q)
    return t.amplified(math.sqrt(p.c / t.mass2), p.q, 4)


def random_fields(N: int, count: int, seed: int = 0, n_cells: int = 2000,
                  R: float = 40.0) -> List[radial.RadialField]:
    """Smooth positive radial fields: sums of one to three Gaussian shells."""
    rng = np.random.default_rng(seed)
    grid = radial.RadialGrid.graded(N, R, n_cells=n_cells)
    out = []
    for _ in range(count):
        vals = np.zeros(grid.size)
        for _ in range(int(rng.integers(1, 4))):
            vals += rng.uniform(0.2, 1.0) * np.exp(
                -((grid.nodes - rng.uniform(0.0, 4.0)) / rng.uniform(0.4, 3.0)) ** 2)
        vals[-1] = 0.0
        out.append(radial.RadialField(grid, vals))
    return out


def _cutoff(r):
    """Smooth non-increasing cut-off: 1 on [0, 1], 0 beyond 2."""
    r = np.asarray(r, dtype=float)
    x = np.clip(r - 1.0, 0.0, 1.0)
    e = lambda t: np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return e(1 - x) / (e(1 - x) + e(x))


def _cutoff_derivative(r, h=1e-6):
    return (_cutoff(r + h) - _cutoff(r - h)) / (2 * h)


def v_eps_quotient(eps: float, a: float, b: float) -> float:
    """``a^2 |grad v|^4 / (4 (|v|_4^4 - b |grad v|^4))`` for the cut-off
    four-dimensional bubble ``v = psi U_eps`` (adaptive quadrature)."""
    area = radial.sphere_area(4)
    U = lambda r: radial.bubble_profile(r, 4, eps)
    dU = lambda r: radial.bubble_derivative(r, 4, eps)
    grad = lambda r: (_cutoff(r) * dU(r) + _cutoff_derivative(r) * U(r)) ** 2 * r**3
    l4 = lambda r: (_cutoff(r) * U(r)) ** 4 * r**3
    pts = sorted({0.0, math.sqrt(eps), 10 * math.sqrt(eps), 1.0, 2.0})
    G = area * sum(integrate.quad(grad, lo, hi, limit=400, epsabs=0, epsrel=1e-12)[0]
                   for lo, hi in zip(pts[:-1], pts[1:]))
    L = area * sum(integrate.quad(l4, lo, hi, limit=400, epsabs=0, epsrel=1e-12)[0]
                   for lo, hi in zip(pts[:-1], pts[1:]))
    return a * a * G * G / (4 * (L - b * G * G))


def _fiber_points(p: ProblemParams, tuples: Sequence[NormTuple]):
    out = []
    for t in tuples:
        try:
            rep = fn.fiber_project(t, p)
        except NoRootFound:
            continue
        for r in rep.roots:
            out.append((t.scaled(r.s, p.N, p.q), r))
    return out


# ------------------------------------------------------------------ per-regime check lists

def _checks_21i(p, th, depth, rep):
    A = "Th2.1(i)"
    # c_N_plus is a difference of terms of size a xi_+^2 / N; it vanishes at b = b1
    plus_scale = p.a * th.xi_plus**2 / p.N
    t = bubble_tuple(p)
    try:
        fr = fn.fiber_project(t, p)
        rep.checks.append(truth("two_root_structure", A, "fiber classes == [minus, plus]",
                                fr.classes() == ["minus", "plus"], {"classes": fr.classes()}))
        if fr.classes() == ["minus", "plus"]:
            rep.checks.append(close("level_minus", A, fr.roots[0].psi, th.c_N_minus, 5e-3,
                                    "I(phi_minus)", "c_N_minus"))
            rep.checks.append(close("level_plus", A, fr.roots[1].psi, th.c_N_plus, 5e-3,
                                    "I(phi_plus)", "c_N_plus", scale=plus_scale))
    except KirchnormError as e:
        rep.checks.append(errored("two_root_structure", A, "fiber classes == [minus, plus]", e))
    rep.checks.append(strict("c_minus_above_c_plus", A, th.c_N_minus, th.c_N_plus, ">",
                             "c_N_minus", "c_N_plus"))
    rep.checks.append(strict("c_minus_positive", A, th.c_N_minus, 0.0, ">", "c_N_minus", "0"))
    rep.checks.append(strict("c_plus_sign_vs_b1", A, th.c_N_plus, 0.0,
                             ">" if p.b > th.b1 else "<", "c_N_plus", "0", scale=plus_scale))
    try:
        path = solver.mp_path_mu0(p)
        rep.artifacts["mu0_path"] = {k: v for k, v in path.as_dict().items()
                                     if k not in ("t", "levels", "grad2")}
        rep.checks.append(close("path_sup_is_c_minus", A, path.sup_level, th.c_N_minus, 5e-3,
                                "sup I(gamma)", "c_N_minus"))
        g = np.sqrt(path.grad2)
        rep.checks.append(truth("path_crosses_xi_minus", A, "min |grad| < xi_minus < max |grad|",
                                g.min() < th.xi_minus < g.max(),
                                {"min": g.min(), "xi_minus": th.xi_minus, "max": g.max()}))
    except KirchnormError as e:
        rep.checks.append(errored("path_sup_is_c_minus", A, "sup I(gamma) = c_N_minus", e))


def _checks_21ii(p, th, depth, rep):
    A = "Th2.1(ii)"
    t = bubble_tuple(p)
    try:
        fr = fn.fiber_project(t, p)
        rep.checks.append(truth("single_minus_root", A, "fiber classes == [minus]",
                                fr.classes() == ["minus"], {"classes": fr.classes()}))
        if fr.classes() == ["minus"]:
            rep.checks.append(close("level", A, fr.roots[0].psi, th.c_N, 5e-3, "I(phi_1)", "c_N"))
    except KirchnormError as e:
        rep.checks.append(errored("single_minus_root", A, "fiber classes == [minus]", e))
    rep.checks.append(strict("c_N_positive", A, th.c_N, 0.0, ">", "c_N", "0"))


def _checks_21iii(p, th, depth, rep):
    A = "Th2.1(iii)"
    f = scalar.landscape_f(p)
    lo, hi = f.scales()
    r = optimize.minimize_scalar(lambda x: f(math.exp(x)),
                                 bounds=(math.log(lo) - 10, math.log(hi) + 10), method="bounded",
                                 options={"xatol": 1e-12})
    tmin = math.exp(r.x)
    fmin = float(f(tmin)) / max(1.0, p.a * tmin**2)
    rep.checks.append(strict("min_f_positive", A, float(f(tmin)), 0.0, ">", "min f", "0"))
    tuples = [bubble_tuple(p)] + [radial.norm_tuple(radial.project_mass(u, p.c), p.q)
                                  for u in random_fields(p.N, 8, seed=3)]
    found = []
    for t in tuples:
        try:
            fn.fiber_project(t, p)
            found.append(True)
        except NoRootFound:
            found.append(False)
    rep.checks.append(truth("no_fiber_roots", A, "fiber_project raises NoRootFound",
                            not any(found), {"samples": len(found), "with_roots": sum(found),
                                             "argmin_t": tmin, "scaled_min": fmin}))


def _checks_23(p, th, depth, rep):
    A = "Th2.3(i)"
    tuples = [bubble_tuple(p)] + [radial.norm_tuple(radial.project_mass(u, p.c), p.q)
                                  for u in random_fields(p.N, 8, seed=5)]
    pts = _fiber_points(p, tuples)
    if th.xi_minus is None:
        rep.checks.append(truth("pohozaev_set_empty", A, "no fiber roots for b >= b0",
                                not pts, {"points": len(pts)}))
        return
    rep.checks.append(truth("pohozaev_points_found", A, "fiber roots exist", bool(pts),
                            {"points": len(pts)}))
    if not pts:
        return
    lam = [fn.multiplier(t, p) for t, _ in pts]
    # closed-form multiplier mu (1 - delta) lq / c: negative for mu < 0
    rep.checks.append(truth("multiplier_sign", A, "mu (1-delta) lq / c < 0",
                            all(x < 0 for x in lam), {"max_multiplier": max(lam)},
                            "the closed-form identity gives lambda < 0 for mu < 0"))
    g = [math.sqrt(t.grad2) for t, _ in pts]
    rep.checks.append(truth("gradient_window", A, "xi_minus < |grad u| < xi_plus",
                            all(th.xi_minus < x < th.xi_plus for x in g),
                            {"min": min(g), "max": max(g), "xi_minus": th.xi_minus,
                             "xi_plus": th.xi_plus}))
    E = min(fn.energy_I(t, p) for t, _ in pts)
    rep.checks.append(strict("energy_above_c_plus", A, E, th.c_N_plus, ">", "min I", "c_N_plus"))


def _checks_24(p, th, depth, rep):
    A = "Th2.4"
    S = th.S
    if p.b >= S**-2:
        fields_ = random_fields(4, 100, seed=11)
        tuples = [radial.norm_tuple(radial.project_mass(u, p.c), p.q) for u in fields_]
        E = [fn.energy_I(t, p) for t in tuples]
        rep.checks.append(strict("energy_positive", A, min(E), 0.0, ">", "min I0", "0"))
        t = tuples[0]
        ss = np.arange(0.0, -21.0, -4.0)
        Es = np.array([fn.energy_I(t.scaled(s, 4, p.q), p) for s in ss])
        ok = bool(np.all(Es > 0) and np.all(np.diff(Es) < 0) and Es[-1] < 1e-12 * Es[0])
        rep.checks.append(truth("dilations_decrease_to_zero", A,
                                "I0(s*u) > 0, decreasing, -> 0 as s -> -inf", ok,
                                {"s": list(ss), "I0": list(Es)}))
        pts = _fiber_points(p, tuples[:10])
        rep.checks.append(truth("pohozaev_set_empty", A, "no fiber roots for b >= S^-2",
                                not pts, {"points": len(pts)}))
        return
    Lam = p.a**2 * S**2 / (4 * (1 - p.b * S**2))
    rep.checks.append(close("Lambda_formula", A, th.Lambda, Lam, 1e-14, "Lambda", "a^2 S^2/(4(1-bS^2))"))
    # mu = 0: the fiber maximum of any u with |u|_4^4 > b |grad u|^4 is the quotient
    t = radial.truncated_bubble_norms(1000, q=p.q)
    qt = p.a**2 * t.grad2**2 / (4 * (t.l2star - p.b * t.grad2**2))
    rep.checks.append(close("truncated_bubble_fiber_max", A, qt, Lam, 1e-4,
                            "max_s I0(s*T_1000)", "Lambda"))
    eps = np.array([0.2, 0.1, 0.05])
    Q = np.array([v_eps_quotient(e, p.a, p.b) for e in eps])
    coef = np.polyfit(eps, Q, 1)
    fit = np.polyval(coef, eps)
    r2 = 1 - np.sum((Q - fit) ** 2) / np.sum((Q - Q.mean()) ** 2)
    rep.checks.append(truth("v_eps_quotient_decreasing", A, "Q(0.2) > Q(0.1) > Q(0.05) > Lambda",
                            bool(Q[0] > Q[1] > Q[2] > Lam), {"eps": list(eps), "Q": list(Q),
                                                             "Lambda": Lam},
                            "" if np.all(Q > 0) else "some v_eps has |v|_4^4 <= b |grad v|^4"))
    rep.checks.append(truth("v_eps_quotient_linear", A, "linear fit R^2 > 0.99", r2 > 0.99,
                            {"R2": r2, "slope": coef[0], "intercept": coef[1], "Lambda": Lam},
                            "" if r2 > 0.99 else "eps = 0.2 is outside the linear range when "
                            "|v|_4^4 - b |grad v|^4 is small"))


def _checks_n4_quick(p, th, rep, anchor):
    C = th.C_q
    fc_k0 = scalar.eval_fc(th.k0, p, C_q=C)
    rep.checks.append(strict("c_below_c0", anchor, th.c0, p.c, ">", "c0", "c"))
    rep.checks.append(strict("fc_at_kc_positive", anchor, scalar.eval_fc(th.k_c, p, C_q=C), 0.0,
                             ">", "f_c(k_c)", "0"))
    rep.checks.append(strict("barrier_positive", anchor, th.k0 * fc_k0, 0.0, ">", "k0 f_c(k0)", "0"))


def _minimizer_checks(p, th, rep, anchor):
    out = {}
    for obj in ("I", "J"):
        try:
            r = solver.local_minimizer(p, obj)
        except KirchnormError as e:
            rep.checks.append(errored(f"minimizer_{obj}", anchor, f"{obj}-flow converges", e))
            continue
        out[obj] = r
        rep.artifacts[f"minimizer_{obj}"] = r.summary()
        rep.checks.append(strict(f"minimizer_{obj}_negative", anchor, r.energy, 0.0, "<",
                                 f"{obj}(u)", "0"))
        rep.checks.append(strict(f"minimizer_{obj}_inside_region", anchor, r.tuple.grad2,
                                 th.k0, "<", "|grad u|^2", "k0"))
        rep.checks.append(strict(f"minimizer_{obj}_multiplier", anchor, r.multiplier, 0.0, ">",
                                 "lambda", "0"))
        rep.checks.append(truth(f"minimizer_{obj}_positive", anchor, "u > 0 at interior nodes",
                                bool(np.all(r.field.values[:-1] > 0)),
                                {"min": float(r.field.values[:-1].min())}))
        rep.checks.append(_certificate(r, anchor, f"minimizer_{obj}"))
    if "J" in out:
        r = out["J"]
        rep.checks.append(strict("J_dominates_I", anchor, r.energy, r.energy_I, ">",
                                 "J(u_bar)", "I(u_bar)"))
    return out


def _certificate(r, anchor, name) -> Check:
    p = r.params
    P_ok = abs(r.pohozaev_residual) <= 10 * r.el_residual * p.a * r.tuple.grad2
    rel = abs(r.multiplier - r.multiplier_closed) / abs(r.multiplier_closed) if p.mu else 0.0
    return truth(f"{name}_certificate", anchor,
                 "|P| <= 10 el a g and |lambda - mu(1-delta)lq/c| <= 1e-6 |.|",
                 P_ok and rel <= 1e-6,
                 {"P": r.pohozaev_residual, "el_residual": r.el_residual,
                  "a_grad2": p.a * r.tuple.grad2, "multiplier_rel_err": rel})


def _checks_25(p, th, depth, rep):
    _checks_n4_quick(p, th, rep, "Th2.5")
    if depth == "full":
        _minimizer_checks(p, th, rep, "Th2.5")


def _checks_27(p, th, depth, rep):
    A = "Th2.7"
    _checks_n4_quick(p, th, rep, A)
    d_analytic, d_sampled = solver.boundary_barrier(p)
    rep.checks.append(strict("boundary_barrier_sampled", A, d_sampled, 0.0, ">",
                             "min I on boundary samples", "0"))
    rep.checks.append(strict("barrier_below_samples", A, d_sampled, d_analytic, ">",
                             "sampled", "k0 f_c(k0)"))
    if depth != "full":
        return
    mins = _minimizer_checks(p, th, rep, "Th2.5")
    if "I" not in mins or "J" not in mins:
        return
    paths = []
    for n in (50, 100, 200):
        try:
            path = solver.mp_path_W(p, mins["J"], n=n, m_c=mins["I"].energy)
        except KirchnormError as e:
            rep.checks.append(errored(f"w_path_{n}", A, "W-path evaluates", e))
            continue
        paths.append(path)
        rep.artifacts[f"w_path_{n}"] = {k: v for k, v in path.as_dict().items()
                                        if k not in ("t", "levels", "grad2")}
        cmp = path.comparison
        rep.checks.append(strict(f"w_path_{n}_below_threshold", A, path.sup_level,
                                 cmp["threshold"], "<", "sup I(W)", "m_bar + Lambda"))
        rep.checks.append(strict(f"w_path_{n}_endpoint", A, path.endpoints[1],
                                 2 * cmp["m_c"], "<", "I(W(t_bar))", "2 m(c)"))
    if paths:
        est = solver.mp_level_estimate(p, paths)
        rep.artifacts["level_estimate"] = est.as_dict()
        rep.checks.append(strict("level_sandwich", A, est.upper, est.lower, ">",
                                 "min sup", "barrier d"))


def _checks_26(p, th, depth, rep):
    A = "Th2.6"
    C = th.C_q
    ok = th.xi_plus_mu is not None and th.xi0_mu1 is not None
    rep.checks.append(truth("f1_three_roots", A, "f1 has three positive roots",
                            th.xi_plus_mu is not None,
                            {"xi0_mu": th.xi0_mu, "xi_minus_mu": th.xi_minus_mu,
                             "xi_plus_mu": th.xi_plus_mu},
                            th.absent.get("xi_plus_mu", "")))
    rep.checks.append(truth("h1_unique_zero", A, "h1 has a unique positive zero",
                            th.xi0_mu1 is not None, {"xi0_mu1": th.xi0_mu1},
                            th.absent.get("xi0_mu1", "")))
    if not ok:
        return
    rep.checks.append(strict("h1_sufficient_condition", A,
                             scalar.eval_h1(th.xi_plus_mu, p, C_q=C), 0.0, ">",
                             "h1(xi_+^mu)", "0"))
    if depth != "full":
        return
    try:
        r = solver.local_minimizer(p)
    except KirchnormError as e:
        rep.checks.append(errored("minimizer", A, "flow converges", e))
        return
    rep.artifacts["minimizer"] = r.summary()
    rep.checks.append(strict("m_negative", A, r.energy, 0.0, "<", "m(b,mu)", "0"))
    rep.checks.append(strict("multiplier_positive", A, r.multiplier, 0.0, ">", "lambda", "0"))
    rep.checks.append(truth("positive_field", A, "u > 0 at interior nodes",
                            bool(np.all(r.field.values[:-1] > 0)),
                            {"min": float(r.field.values[:-1].min())}))
    rep.checks.append(_certificate(r, A, "minimizer"))
    rows = [(p.mu, abs(r.energy), r.tuple.grad2)]
    for f in (10**-0.5, 0.1):
        pm = p.replace(mu=p.mu * f)
        try:
            rm = solver.local_minimizer(pm)
            rows.append((pm.mu, abs(rm.energy), rm.tuple.grad2))
        except KirchnormError as e:
            rep.checks.append(errored("mu_sweep", A, "flows converge", e))
            return
    E = [x[1] for x in rows]
    g = [x[2] for x in rows]
    rep.artifacts["mu_sweep"] = {"mu": [x[0] for x in rows], "abs_m": E, "grad2": g}
    rep.checks.append(truth("mu_sweep_trend", A, "|m| and |grad u|^2 decrease with mu",
                            E[0] > E[1] > E[2] > 0 and g[0] > g[1] > g[2] > 0,
                            {"mu": [x[0] for x in rows], "abs_m": E, "grad2": g}))


_CHECKS = {TH21_I: _checks_21i, TH21_II: _checks_21ii, TH21_III: _checks_21iii,
           TH23: _checks_23, TH24: _checks_24, TH25: _checks_25, TH26: _checks_26,
           TH27: _checks_27}


def verify(params: ProblemParams, depth: str = "quick",
           regime: Optional[str] = None) -> RegimeReport:
    """Run the check list of the regime of ``params`` (or of ``regime``,
    which must be admissible at ``params``). ``depth='quick'`` skips flows."""
    if depth not in ("quick", "full"):
        raise ValueError("depth must be 'quick' or 'full'")
    cl = _classify(params)
    tag = cl.tag
    if regime is not None:
        want = tag_from_name(regime) if regime not in TAGS else regime
        if want not in cl.admissible:
            raise RegimeError(f"{want} hypotheses do not hold here ({cl.tag}: {cl.reason})")
        tag = want
    if tag == INADMISSIBLE:
        raise RegimeError(f"inadmissible parameters: {cl.reason}")
    C = fn.gn_constant(params.N, params.q) if params.mu != 0 else None
    th = scalar.thresholds(params, C_q=C)
    rep = RegimeReport(params, th, tag, cl.reason, depth)
    try:
        _CHECKS[tag](params, th, depth, rep)
    except KirchnormError as e:
        rep.checks.append(errored("check_list", tag, "complete", e))
    return rep


# ------------------------------------------------------------------ threshold-relative values

_REL = re.compile(r"^\s*([-+])?\s*((?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*([A-Za-z_][A-Za-z0-9_^\-]*)\s*$")
_NAMES = {"b0": "b0", "b1": "b1", "c0": "c0", "c1": "c1", "k0": "k0", "S^-2": "S^-2",
          "Sinv2": "S^-2", "bmid": "bmid", "mid": "bmid"}


def resolve_value(text: Union[str, float], base: ProblemParams) -> float:
    """Numbers pass through; ``'0.5b0'``, ``'2*b1'``, ``'0.9c0'``, ``'bmid'``,
    ``'-b0'`` or ``'0.5S^-2'`` are resolved against the thresholds of ``base``."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(text)
    except ValueError:
        pass
    m = _REL.match(text)
    if not m or m.group(3) not in _NAMES:
        raise ValueError(f"cannot parse {text!r}: use a number or k*name with name in "
                         f"{sorted(set(_NAMES.values()))}")
    k = (-1.0 if m.group(1) == "-" else 1.0) * (1.0 if m.group(2) is None else float(m.group(2)))
    name = _NAMES[m.group(3)]
    S = scalar.sobolev_constant(base.N)
    b0, b1 = scalar._b_thresholds(base.N, base.a, S)
    if name == "b0":
        v = b0
    elif name == "b1":
        v = b1
    elif name == "bmid":
        v = 0.5 * (b0 + b1)
    elif name == "S^-2":
        v = S**-2
    else:
        th = scalar.thresholds(base, C_q=fn.gn_constant(base.N, base.q))
        v = th.require(name)
    return k * v


def resolve_params(base: ProblemParams, **values) -> ProblemParams:
    """Apply possibly threshold-relative values; ``b`` is resolved before
    ``c`` so that ``c = 0.9c0`` refers to the final ``b``."""
    p = base
    for key in ("N", "a", "q", "mu", "b", "c"):
        if key in values and values[key] is not None:
            v = values[key]
            p = p.replace(**{key: int(v) if key == "N" else resolve_value(v, p)})
    return p


# ------------------------------------------------------------------ sweeps

SWEEP_COLUMNS = ("axis", "value", "regime_tag", "reason", "b0", "b1", "c_N_minus", "c_N_plus",
                 "c_N", "c0", "fc_at_kc", "n_checks", "n_failed", "n_marginal", "failed_checks",
                 "error")


def _sweep_row(args):
    axis, raw, base, depth = args
    row = {k: "" for k in SWEEP_COLUMNS}
    row.update(axis=axis, value=raw)
    try:
        value = resolve_value(raw, base)
        row["value"] = value
        p = base.replace(**{axis: value})
        cl = _classify(p)
        row.update(regime_tag=cl.tag, reason=cl.reason)
        C = None
        if p.mu > 0 or (p.N == 4 and axis == "c"):
            C = fn.gn_constant(p.N, p.q)
        th = scalar.thresholds(p, C_q=C)
        for k in ("b0", "b1", "c_N_minus", "c_N_plus", "c_N", "c0"):
            v = getattr(th, k)
            row[k] = "" if v is None else v
        if p.N == 4 and th.k_c is not None:
            row["fc_at_kc"] = scalar.eval_fc(th.k_c, p, C_q=th.C_q)
        if cl.tag != INADMISSIBLE:
            rep = verify(p, depth)
            row.update(n_checks=len(rep.checks), n_failed=len(rep.failed),
                       n_marginal=len(rep.marginal),
                       failed_checks=";".join(c.name for c in rep.failed))
    except Exception as e:  # rows never abort the sweep
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def sweep(axis: str, values: Sequence[Union[str, float]], base: ProblemParams,
          depth: str = "quick", jobs: int = 1) -> List[dict]:
    """One summary row per value, in input order."""
    if axis not in ("b", "c", "mu", "q"):
        raise ValueError("axis must be one of b, c, mu, q")
    tasks = [(axis, v, base, depth) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_row, tasks))
    return [_sweep_row(t) for t in tasks]


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# ------------------------------------------------------------------ default samples

def default_sample(tag: str) -> ProblemParams:
    """A representative admissible point of each regime (used by the CLI)."""
    tag = tag_from_name(tag) if tag not in TAGS else tag
    S5 = scalar.sobolev_constant(5)
    b0, b1 = scalar._b_thresholds(5, 1.0, S5)
    S4 = scalar.sobolev_constant(4)
    n4 = ProblemParams(N=4, a=1.0, b=0.5 * S4**-2, mu=1.0, q=2.5, c=1.0)
    if tag == TH21_I:
        return ProblemParams(N=5, b=0.5 * (b0 + b1))
    if tag == TH21_II:
        return ProblemParams(N=5, b=-b0)
    if tag == TH21_III:
        return ProblemParams(N=5, b=2 * b0)
    if tag == TH23:
        return ProblemParams(N=5, b=0.5 * b0, mu=-1.0, q=3.0)
    if tag == TH24:
        return ProblemParams(N=4, b=0.1 * S4**-2)
    if tag == TH26:
        return ProblemParams(N=5, b=0.5 * (b0 + b1), mu=0.1, q=2.5)
    th = scalar.thresholds(n4, C_q=fn.gn_constant(4, 2.5))
    return n4.replace(c=0.5 * min(th.c0, th.c1))
