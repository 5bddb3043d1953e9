"""Scalar reduction: closed-form thresholds, landscapes and root analysis.

Reference values come from independent routes: the Gamma-function closed form
of the Sobolev constant, direct substitution into the threshold formulas, and
brute-force sign scans of the landscape functions on dense grids.
"""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from kirchnorm import ProblemParams
from kirchnorm import scalar
from kirchnorm.errors import (ConditioningWarning, DomainError, MissingConstant,
                              NoRootFound, TooManyRoots)


def S_closed(N):
    return math.pi * N * (N - 2) * (gamma(N / 2) / gamma(N)) ** (2.0 / N)


def scan_roots(fn, lo, hi, n=400001):
    """Brute-force oracle: sign changes of fn on a dense log grid."""
    t = np.geomspace(lo, hi, n)
    v = np.array([fn(x) for x in t]) if not hasattr(fn(t[:2]), "__len__") else fn(t)
    idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
    return [0.5 * (t[i] + t[i + 1]) for i in idx]


# ---------------------------------------------------------------- constants

@pytest.mark.parametrize("N", [3, 4, 5, 6, 7])
def test_sobolev_constant_matches_gamma_closed_form(N):
    assert scalar.sobolev_constant(N) == pytest.approx(S_closed(N), rel=1e-10)


def test_sobolev_constant_cached():
    assert scalar.sobolev_constant(5) is scalar.sobolev_constant(5)


def test_four_dimensional_thresholds_collapse_exactly():
    for a in (0.3, 1.0, 7.0):
        th = scalar.thresholds(ProblemParams(4, a=a))
        assert th.b0 == th.b1 == th.S ** -2


def test_b0_five_dimensional_substitution():
    S = S_closed(5)
    th = scalar.thresholds(ProblemParams(5, a=1.0))
    assert th.b0 == pytest.approx((2 / 3) * (1 / 3) ** 0.5 * S ** -2.5, rel=1e-10)
    assert th.b1 == pytest.approx((4 / 5) * (1 / 5) ** 0.5 * S ** -2.5, rel=1e-10)


def test_lambda_at_b_zero():
    th = scalar.thresholds(ProblemParams(4, a=1.0, b=0.0))
    assert th.Lambda == pytest.approx(S_closed(4) ** 2 / 4, rel=1e-10)


def test_absent_fields_carry_reasons():
    th = scalar.thresholds(ProblemParams(4, a=1.0))
    assert th.eta is None and "eta" in th.absent
    th5 = scalar.thresholds(ProblemParams(5, b=-1e-4))
    assert th5.eta is None and th5.xi_plus is None and th5.c_N is not None
    assert th5.Lambda is None and "N=4" in th5.absent["Lambda"]
    with pytest.raises(Exception, match="eta"):
        th.require("eta")


@settings(max_examples=60, deadline=None)
@given(N=st.integers(5, 9), a=st.floats(0.05, 20.0))
def test_b1_below_b0(N, a):
    th = scalar.thresholds(ProblemParams(N, a=a))
    assert th.b1 < th.b0


# ---------------------------------------------------------------- landscapes

def test_f_root_at_b_zero():
    N, a = 5, 1.0
    S = S_closed(N)
    p = ProblemParams(N, a=a, b=0.0)
    t = (a * S ** (N / (N - 2))) ** ((N - 2) / 4)
    assert abs(scalar.eval_f(t, p)) < 1e-12


@pytest.mark.parametrize("name", ["g", "f"])
def test_landscapes_tend_to_a_at_origin(name):
    p = ProblemParams(5, a=2.5, b=1e-4)
    fn = getattr(scalar, "eval_" + name)
    assert fn(1e-12, p) == pytest.approx(2.5, rel=1e-6)


def test_domain_error_for_nonpositive_argument():
    p = ProblemParams(5, b=1e-4)
    for fn in (scalar.eval_f, scalar.eval_g, scalar.eval_h, scalar.eval_k, scalar.eval_I0_reduced):
        with pytest.raises(DomainError):
            fn(0.0, p)
        with pytest.raises(DomainError):
            fn(-1.0, p)


def test_f1_h1_need_constant():
    p = ProblemParams(5, b=1e-4, mu=1e-3, q=2.5)
    scalar_missing = scalar.eval_f1
    with pytest.raises(MissingConstant):
        scalar_missing(1.0, p, C_q=None, lookup=False)
    assert math.isfinite(scalar.eval_f1(1.0, p, C_q=1.0))


def test_h_and_f_relation():
    # h'(t) = t f(t), checked by central differences
    p = ProblemParams(6, a=1.3, b=2e-5)
    for t in (0.5, 3.0, 20.0):
        e = 1e-6 * t
        dh = (scalar.eval_h(t + e, p) - scalar.eval_h(t - e, p)) / (2 * e)
        assert dh == pytest.approx(t * scalar.eval_f(t, p), rel=1e-6)


def test_f1_is_t_times_h1_prime():
    p = ProblemParams(5, a=1.0, b=4.4e-4, mu=2e-3, q=2.5, c=1.0)
    for t in (0.1, 5.0, 40.0):
        e = 1e-6 * t
        dh = (scalar.eval_h1(t + e, p, C_q=0.7) - scalar.eval_h1(t - e, p, C_q=0.7)) / (2 * e)
        assert t * dh == pytest.approx(scalar.eval_f1(t, p, C_q=0.7), rel=1e-6, abs=1e-9)


def test_fc_formula_and_zero_at_c0():
    S = S_closed(4)
    a, b, mu, q, C = 1.0, 0.5 / S**2, 0.5, 2.5, 0.8
    th = scalar.thresholds(ProblemParams(4, a=a, b=b, mu=mu, q=q, c=1.0), C_q=C)
    at_c0 = ProblemParams(4, a=a, b=b, mu=mu, q=q, c=th.c0)
    th0 = scalar.thresholds(at_c0, C_q=C)
    assert th0.k_c == pytest.approx(th.k0, rel=1e-12)
    assert abs(scalar.eval_fc(th0.k_c, at_c0, C_q=C)) < 1e-12
    # direct substitution of the definition
    k = 3.7
    ref = a / 2 - mu * C**q / q * 1.0 ** ((4 - q) / 2) * k ** (q - 3) - (1 - b * S**2) / (4 * S**2) * k
    assert scalar.eval_fc(k, ProblemParams(4, a=a, b=b, mu=mu, q=q, c=1.0), C_q=C) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(frac=st.floats(0.05, 3.0).filter(lambda x: abs(x - 1) > 1e-3),
       bfrac=st.floats(0.05, 0.95), q=st.floats(2.05, 2.95))
def test_fc_argmax_and_sign(frac, bfrac, q):
    S = S_closed(4)
    base = ProblemParams(4, a=1.0, b=bfrac / S**2, mu=0.5, q=q, c=1.0)
    C = 0.9
    c0 = scalar.thresholds(base, C_q=C).c0
    p = base.replace(c=frac * c0)
    th = scalar.thresholds(p, C_q=C)
    k = np.linspace(1e-6 * th.k_c, 10 * th.k_c, 200001)
    vals = scalar.eval_fc(k, p, C_q=C)
    kmax = k[np.argmax(vals)]
    assert abs(kmax - th.k_c) <= 2 * (k[1] - k[0])
    assert np.sign(scalar.eval_fc(th.k_c, p, C_q=C)) == np.sign(c0 - p.c)


def test_I0_reduced_monotonicity():
    p = ProblemParams(5, a=1.0, b=3e-4)
    eta2 = scalar.thresholds(p).eta ** 2
    up = np.linspace(1e-3 * eta2, eta2 * (1 - 1e-3), 2000)
    down = np.linspace(eta2 * (1 + 1e-3), 50 * eta2, 2000)
    assert np.all(np.diff(scalar.eval_I0_reduced(up, p)) > 0)
    assert np.all(np.diff(scalar.eval_I0_reduced(down, p)) < 0)


# ---------------------------------------------------------------- roots

def test_f_two_roots_against_scan():
    p = ProblemParams(5, a=1.0)
    b0 = scalar.thresholds(p).b0
    p = p.replace(b=b0 / 2)
    roots = scalar.find_roots(scalar.landscape_f(p))
    assert len(roots) == 2
    ref = scan_roots(lambda t: scalar.eval_f(t, p), 1e-2, 1e4)
    assert len(ref) == 2
    for r, x in zip(roots, ref):
        assert r.t == pytest.approx(x, rel=1e-4)
    assert roots[0].deriv_sign < 0 < roots[1].deriv_sign
    for r in roots:
        assert abs(scalar.eval_f(r.t, p)) <= 1e-10 * p.a


def test_f_no_root_above_b0():
    p = ProblemParams(5, a=1.0)
    b0 = scalar.thresholds(p).b0
    for k in (1.01, 2.0, 10.0):
        with pytest.raises(NoRootFound) as ei:
            scalar.find_roots(scalar.landscape_f(p.replace(b=k * b0)))
        assert ei.value.min_value > 0


def test_f1_three_roots_ordering():
    p = ProblemParams(5, a=1.0, q=2.5)
    th = scalar.thresholds(p)
    b = 0.5 * (th.b0 + th.b1)
    p = p.replace(b=b, mu=1e-3)
    th = scalar.thresholds(p, C_q=1.0)
    assert th.xi0_mu < th.xi_minus_mu < th.xi_minus < th.xi_plus < th.xi_plus_mu
    ref = scan_roots(lambda t: scalar.eval_f1(t, p, C_q=1.0), 1e-8, 1e4, n=600001)
    got = [th.xi0_mu, th.xi_minus_mu, th.xi_plus_mu]
    assert len(ref) == 3
    for r, x in zip(got, ref):
        assert r == pytest.approx(x, rel=1e-3)
    assert th.xi0_mu1 is not None
    assert abs(scalar.eval_h1(th.xi0_mu1, p, C_q=1.0)) < 1e-10


def test_eta_between_roots_and_h_identity():
    p = ProblemParams(6, a=1.0)
    th = scalar.thresholds(p)
    for frac in (0.2, 0.6, 0.95):
        q = p.replace(b=th.b1 + frac * (th.b0 - th.b1))
        t = scalar.thresholds(q)
        assert 0 < t.xi_minus < t.eta < t.xi_plus
        assert scalar.eval_h(t.xi_plus, q) == pytest.approx(t.c_N_plus, rel=1e-9)
        assert scalar.eval_k(t.xi_plus, q) == pytest.approx(t.c_N_plus, rel=1e-9)


def test_critical_levels_orderings():
    p = ProblemParams(5, a=1.0)
    th = scalar.thresholds(p)
    for frac in (0.1, 0.5, 0.9):
        lv = scalar.critical_levels(p.replace(b=th.b1 + frac * (th.b0 - th.b1)))
        assert lv[0] > lv[1] > 0
    cN = scalar.critical_levels(p.replace(b=-1e-3))
    assert cN > 0
    with pytest.raises(NoRootFound):
        scalar.critical_levels(p.replace(b=2 * th.b0))


def test_c_plus_changes_sign_at_b1():
    p = ProblemParams(5, a=1.0)
    b1 = scalar.thresholds(p).b1
    cm, below = scalar.critical_levels(p.replace(b=b1 * (1 - 1e-6)))
    above = scalar.critical_levels(p.replace(b=b1 * (1 + 1e-6)))[1]
    assert below < 0 < above
    # continuity: c_{N,+} is O(1e-6) relative to the level scale
    assert abs(below) < 1e-4 * cm and abs(above) < 1e-4 * cm


def test_nearly_merged_roots_warn():
    p = ProblemParams(5, a=1.0)
    b0 = scalar.thresholds(p).b0
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        roots = scalar.find_roots(scalar.landscape_f(p.replace(b=b0 * (1 - 1e-13))))
    assert len(roots) == 2
    assert any(issubclass(w.category, ConditioningWarning) for w in rec)
    assert roots[0].paired and roots[1].paired


def test_too_many_roots_guard():
    with pytest.raises(TooManyRoots):
        scalar.find_roots(lambda t: np.sin(t), t_max=40.0, max_roots=2)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(5, 8), a=st.floats(0.2, 5.0), frac=st.floats(0.01, 0.99))
def test_root_residual_property(N, a, frac):
    p = ProblemParams(N, a=a)
    b0 = scalar.thresholds(p).b0
    p = p.replace(b=frac * b0)
    roots = scalar.find_roots(scalar.landscape_f(p))
    assert len(roots) == 2
    for r in roots:
        assert abs(scalar.eval_f(r.t, p)) <= 1e-10 * a
    # the same roots seen through g with t = xi S^{-N/4}
    S = scalar.sobolev_constant(N)
    groots = scalar.find_roots(scalar.landscape_g(p))
    for r, gr in zip(roots, groots):
        assert gr.t * S ** (N / 4) == pytest.approx(r.t, rel=1e-9)


def test_landscape_merges_equal_exponents():
    land = scalar.Landscape(((2.0, 2.0), (3.0, 4.0), (-5.0, 4.0)))
    assert land.terms == ((2.0, 2.0), (-2.0, 4.0))
    assert land.scales() == (1.0, 1.0)
    assert land(2.0) == pytest.approx(2 * 4 - 2 * 16)
    assert scalar.Landscape(((1.0, 3.0), (-1.0, 3.0))).terms == ()
