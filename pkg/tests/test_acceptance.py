"""Acceptance run: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from kirchnorm import functionals as fn
from kirchnorm import radial, scalar, solver
from kirchnorm import verify as V
from kirchnorm.errors import NoRootFound
from kirchnorm.params import ProblemParams

RESULTS = {}

TITLES = {
    1: "Sobolev self-consistency and refinement order",
    2: "N=4 threshold collapse b0 = b1 = S^-2",
    3: "pure-critical two-level structure",
    4: "nonexistence above b0",
    5: "single mountain-pass level for b < 0",
    6: "critical-point certificates of every converged flow",
    7: "N=5 perturbed minimizer and mu-sweep trend",
    8: "N=4 local minimizers of I and J",
    9: "W-path threshold and boundary barrier",
    10: "truncated-bubble asymptotic orders",
    11: "N=4, mu=0 probes",
    12: "Gagliardo-Nirenberg suite and f_c sign flip",
}


def report(k, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {TITLES[k]} | {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def S_closed(N):
    return math.pi * N * (N - 2) * (math.gamma(N / 2) / math.gamma(N)) ** (2.0 / N)


S4, S5 = S_closed(4), S_closed(5)
B0_5, B1_5 = scalar._b_thresholds(5, 1.0, scalar.sobolev_constant(5))


def n4_sample(bfrac, cfrac, mu, q):
    p = ProblemParams(4, b=bfrac * S4**-2, mu=mu, q=q)
    th = scalar.thresholds(p, C_q=fn.gn_constant(4, q))
    return p.replace(c=cfrac * th.c0)


N4_BASE = (0.5, 0.5, 1.0, 2.5)
N4_SAMPLES = [N4_BASE, (0.3, 0.3, 1.0, 2.3), (0.7, 0.7, 0.5, 2.7)]
N5_MUS = (0.1, 0.1 / math.sqrt(10), 0.01)


@pytest.fixture(scope="module")
def flows():
    """Every flow of the acceptance run, computed once."""
    out = {}
    for s in N4_SAMPLES:
        p = n4_sample(*s)
        out[("I",) + s] = solver.local_minimizer(p, "I")
        out[("J",) + s] = solver.local_minimizer(p, "J")
    for mu in N5_MUS:
        out[("N5", mu)] = solver.local_minimizer(
            ProblemParams(5, b=0.5 * (B0_5 + B1_5), mu=mu, q=2.5))
    return out


# ------------------------------------------------------------------ 1

def test_criterion_01_sobolev_self_consistency():
    worst, orders = 0.0, []
    for N in (4, 5, 6):
        ref = S_closed(N) ** (N / 2)
        errs = []
        for n in (8000, 16000, 32000):
            t = radial.norm_tuple(radial.make_bubble(radial.bubble_grid(N, n_cells=n)), 2.5)
            e = [abs(t.grad2 / ref - 1), abs(t.l2star / ref - 1), abs(t.grad2 / t.l2star - 1)]
            if n == 8000:
                worst = max(worst, max(e))
            errs.append(e[:2])
        errs = np.array(errs)
        orders.extend(np.log2(errs[:-1] / errs[1:]).ravel())
    report(1, worst <= 1e-4 and min(orders) >= 1.8,
           f"max rel disagreement {worst:.2e} (<= 1e-4), min refinement order {min(orders):.3f} (>= 1.8)")


# ------------------------------------------------------------------ 2

def test_criterion_02_threshold_collapse():
    ok, vals = True, []
    for a in (0.5, 1.0, 2.0):
        th = scalar.thresholds(ProblemParams(4, a=a))
        S = scalar.sobolev_constant(4)
        ok &= th.b0 == th.b1 == S**-2
        vals.append(th.b0)
    report(2, ok, f"b0 = b1 = S^-2 = {vals[0]!r} bitwise for a in (0.5, 1, 2)")


# ------------------------------------------------------------------ 3

def test_criterion_03_two_level_structure():
    fails, worst_level, worst_path, min_margin = [], 0.0, 0.0, math.inf
    for f in (0.1, 0.3, 0.5, 0.7, 0.9):
        p = ProblemParams(5, b=B1_5 + f * (B0_5 - B1_5))
        th = scalar.thresholds(p)
        rep = fn.fiber_project(V.bubble_tuple(p), p)
        if rep.classes() != ["minus", "plus"]:
            fails.append(f"f={f}: classes {rep.classes()}")
            continue
        worst_level = max(worst_level, abs(rep.roots[0].psi / th.c_N_minus - 1),
                          abs(rep.roots[1].psi / th.c_N_plus - 1))
        for ck in (V.strict("", "", th.c_N_minus, th.c_N_plus), V.strict("", "", th.c_N_plus, 0.0)):
            if ck.status != "pass":
                fails.append(f"f={f}: {ck.values}")
        min_margin = min(min_margin, th.c_N_plus / th.c_N_minus)
        path = solver.mp_path_mu0(p)
        worst_path = max(worst_path, abs(path.sup_level / th.c_N_minus - 1))
    ok = not fails and worst_level <= 5e-3 and worst_path <= 5e-3
    report(3, ok, f"5 b in (b1, b0): level err {worst_level:.2e}, path sup err {worst_path:.2e} "
                  f"(<= 5e-3), min c+/c- {min_margin:.3e} > 0 {fails or ''}")


# ------------------------------------------------------------------ 4

def test_criterion_04_nonexistence():
    details, ok = [], True
    for k in (1.01, 2.0, 10.0):
        p = ProblemParams(5, b=k * B0_5)
        rep = V.verify(p)
        mins = [c for c in rep.checks if c.name == "min_f_positive"][0].values["min f"]
        try:
            fn.fiber_project(V.bubble_tuple(p), p)
            raised = False
        except NoRootFound:
            raised = True
        ok &= rep.ok and raised and mins > 0
        details.append(f"{k}b0: min f = {mins:.3e}")
    report(4, ok, "; ".join(details) + ", NoRootFound on every fiber")


# ------------------------------------------------------------------ 5

def test_criterion_05_negative_b():
    details, ok = [], True
    for k in (-0.1, -1.0, -10.0):
        p = ProblemParams(5, b=k * B0_5)
        th = scalar.thresholds(p)
        rep = fn.fiber_project(V.bubble_tuple(p), p)
        ok &= rep.classes() == ["minus"] and th.c_N > 0
        ok &= abs(rep.roots[0].psi / th.c_N - 1) <= 5e-3
        details.append(f"{k}b0: {rep.classes()}, c_N = {th.c_N:.6g}")
    report(5, ok, "; ".join(details))


# ------------------------------------------------------------------ 6

def test_criterion_06_certificates(flows):
    worst_P, worst_lam, bad = 0.0, 0.0, []
    for key, r in flows.items():
        assert r.converged
        p = r.params
        Pq = abs(r.pohozaev_residual) / (r.el_residual * p.a * r.tuple.grad2)
        lq = abs(r.multiplier / r.multiplier_closed - 1)
        worst_P, worst_lam = max(worst_P, Pq), max(worst_lam, lq)
        if Pq > 10 or lq > 1e-6:
            bad.append(key)
    report(6, not bad, f"{len(flows)} flows: max |P|/(el a g) = {worst_P:.3f} (<= 10), "
                       f"max multiplier rel err {worst_lam:.2e} (<= 1e-6) {bad or ''}")


# ------------------------------------------------------------------ 7

def test_criterion_07_n5_minimizer(flows):
    rs = [flows[("N5", mu)] for mu in N5_MUS]
    ok = all(r.converged and r.energy < 0 and r.multiplier > 0
             and np.all(r.field.values[:-1] > 0) for r in rs)
    E = [abs(r.energy) for r in rs]
    g = [r.tuple.grad2 for r in rs]
    ok &= E[0] > E[1] > E[2] > 0 and g[0] > g[1] > g[2] > 0
    report(7, ok, "mu = 0.1 .. 0.01: |m| = " + ", ".join(f"{x:.4g}" for x in E)
           + "; grad2 = " + ", ".join(f"{x:.4g}" for x in g))


# ------------------------------------------------------------------ 8

def test_criterion_08_n4_minimizers(flows):
    p = n4_sample(*N4_BASE)
    rI, rJ = flows[("I",) + N4_BASE], flows[("J",) + N4_BASE]
    k0 = scalar.thresholds(p).k0
    ok = True
    for r in (rI, rJ):
        ok &= r.converged and r.energy < 0 and r.tuple.grad2 < k0
    # J >= I at each minimizer
    ok &= fn.energy_J(rI.tuple, p) >= rI.energy and rJ.energy >= rJ.energy_I
    report(8, ok, f"I: E = {rI.energy:.6g}, g = {rI.tuple.grad2:.4g}; J: E = {rJ.energy:.6g}, "
                  f"I(u_J) = {rJ.energy_I:.6g}, g = {rJ.tuple.grad2:.4g}; k0 = {k0:.4g}")


# ------------------------------------------------------------------ 9

def test_criterion_09_mountain_pass_threshold(flows):
    details, ok = [], True
    for s in N4_SAMPLES:
        p = n4_sample(*s)
        rI, rJ = flows[("I",) + s], flows[("J",) + s]
        path = solver.mp_path_W(p, rJ, n=100, m_c=rI.energy)
        cmp = path.comparison
        ck = V.strict("", "", path.sup_level, cmp["threshold"], "<")
        analytic, sampled = solver.boundary_barrier(p)
        ok &= ck.status == "pass" and sampled > 0 and analytic > 0
        details.append(f"(b,c,mu,q)=({s[0]}S^-2,{s[1]}c0,{s[2]},{s[3]}): margin {cmp['margin']:.4f}, "
                       f"d >= {analytic:.4g}, sampled {sampled:.4g}")
    report(9, ok, "; ".join(details))


# ------------------------------------------------------------------ 10

def test_criterion_10_truncation_orders():
    S2 = S4**2
    rows = []
    for n in (10, 20, 40, 80, 160, 320):
        t = radial.truncated_bubble_norms(n)
        rows.append([t.mass2 * n * n / math.log(1 + n * n), (t.grad2 - S2) * n * n,
                     (t.l2star - S2) * n**4])
    rows = np.abs(np.array(rows))
    spread = rows.max(axis=0) / rows.min(axis=0)
    report(10, bool(np.all(spread < 10)),
           "max/min of n^2|U|^2/log(1+n^2), n^2(|grad U|^2-S^2), n^4(|U|_4^4-S^2): "
           + ", ".join(f"{x:.3f}" for x in spread) + " (< 10)")


# ------------------------------------------------------------------ 11

def test_criterion_11_n4_mu0_probes():
    details, ok = [], True
    for k in (1.0, 2.0):
        rep = V.verify(ProblemParams(4, b=k * S4**-2))
        vals = {c.name: c for c in rep.checks}
        ok &= rep.ok
        details.append(f"b={k}S^-2: min I0 over 100 fields {vals['energy_positive'].values['min I0']:.4g}")
    for k in (0.01, 0.1, 0.3):
        rep = V.verify(ProblemParams(4, b=k * S4**-2))
        fit = [c for c in rep.checks if c.name == "v_eps_quotient_linear"][0].values
        ok &= rep.ok
        details.append(f"b={k}S^-2: R2 {fit['R2']:.6f}, intercept/Lambda {fit['intercept'] / fit['Lambda']:.4f}")
    report(11, ok, "; ".join(details))


# ------------------------------------------------------------------ 12

def test_criterion_12_gn_suite():
    worst = -math.inf
    for N, q in ((4, 2.5), (5, 2.5)):
        C = fn.gn_constant(N, q)
        grid = fn.gn_default_grid(N)
        rng = np.random.default_rng(2024 + N)
        d = N * (q - 2) / (2 * q)
        for _ in range(200):
            k = rng.integers(1, 5)
            vals = sum(A * np.exp(-((grid.nodes - c0) / w) ** 2) for A, w, c0 in
                       zip(rng.normal(size=k), rng.uniform(0.2, 4.0, size=k), rng.uniform(0, 6, size=k)))
            vals[-1] = 0.0
            t = radial.norm_tuple(radial.RadialField(grid, vals), q)
            rhs = C**q * t.grad2 ** (q * d / 2) * t.mass2 ** (q * (1 - d) / 2)
            worst = max(worst, (t.lq - rhs) / rhs)
    base = n4_sample(*N4_BASE)
    C = fn.gn_constant(4, 2.5)
    c0 = scalar.thresholds(base, C_q=C).c0
    argmax_ok, signs = True, []
    for frac in (0.5, 0.99, 1.01, 2.0):
        p = base.replace(c=frac * c0)
        th = scalar.thresholds(p, C_q=C)
        k = np.linspace(1e-6 * th.k_c, 10 * th.k_c, 200001)
        kmax = k[np.argmax(scalar.eval_fc(k, p, C_q=C))]
        argmax_ok &= abs(kmax - th.k_c) <= k[1] - k[0]
        signs.append(int(np.sign(scalar.eval_fc(th.k_c, p, C_q=C))))
    ok = worst <= 1e-8 and argmax_ok and signs == [1, 1, -1, -1]
    report(12, ok, f"400 fields: max GN slack {worst:.2e} (<= 1e-8); argmax at k_c within one "
                   f"grid step: {argmax_ok}; sign f_c(k_c) at c/c0 = 0.5, 0.99, 1.01, 2: {signs}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
