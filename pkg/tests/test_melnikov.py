import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hopfsplit.frequency import best_approximants
from hopfsplit.melnikov import (
    PerturbationParams,
    ResonanceError,
    SplittingSeries,
    _exact_log_amp,
    _log_terms,
    amplitude_sup,
    build_series,
    dominant,
    evaluate,
    fourier_c,
    harmonic_amplitude,
    I1,
    I2,
    log_amplitude_sup,
    log_I1_table,
    pi_poly,
    taylor_d,
    trig_coeffs,
)

from oracles import shifted_contour

P = PerturbationParams(2.0**-4)


# --------------------------------------------------------------------------
# coefficients


def test_fourier_c_examples():
    assert fourier_c(0, 5) == pytest.approx(0.2041241452, abs=1e-10)
    assert fourier_c(1, 5) == pytest.approx(0.0412414523, abs=1e-10)
    assert 1e6 * fourier_c(0, 1e6) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("c", [1.2, 2.0, 5.0, 11.0])
def test_fourier_c_vs_quadrature(c):
    for j in range(6):
        ref = quad(lambda th: math.cos(j * th) / (c - math.cos(th)), 0, 2 * math.pi,
                   epsabs=1e-14, limit=200)[0] / math.pi
        if j == 0:
            ref /= 2
        assert fourier_c(j, c) == pytest.approx(ref, rel=1e-9)


def test_fourier_c_domain():
    with pytest.raises(ValueError):
        fourier_c(0, 1.0)


def test_taylor_d_examples():
    assert taylor_d(0, 7) == pytest.approx(5 / 7)
    assert taylor_d(1, 7) == pytest.approx(6 / 49)
    with pytest.raises(ValueError):
        taylor_d(0, 1)


def test_taylor_d_vs_series_expansion():
    d = 7
    coeffs = mp.taylor(lambda y: mp.diff(lambda u: u**5 / (d - u), y), 0, 12)
    for k in range(8):
        assert taylor_d(k, d) == pytest.approx(float(coeffs[4 + k]), rel=1e-12)
        if k:
            assert taylor_d(k, d) < taylor_d(k - 1, d)


def test_trig_coeff_examples():
    assert trig_coeffs(2, 1)[0] == pytest.approx(0.5)
    assert trig_coeffs(1, 0)[1] == pytest.approx(0.5)
    assert trig_coeffs(0, 0)[0] == 1
    with pytest.raises(IndexError):
        trig_coeffs(3, 5)


@pytest.mark.parametrize("m", range(13))
def test_cosine_power_resynthesis(m):
    psi = np.linspace(0, 2 * np.pi, 100, endpoint=False) + 0.123
    cos_sum = sum(trig_coeffs(m, i)[0] * np.cos((m - 2 * i) * psi) for i in range(m // 2 + 1))
    sin_sum = sum(trig_coeffs(m, i)[1] * np.sin((m + 1 - 2 * i) * psi)
                  for i in range((m + 1) // 2 + 1))
    assert np.max(np.abs(cos_sum - np.cos(psi) ** m)) < 1e-12
    assert np.max(np.abs(sin_sum - np.cos(psi) ** m * np.sin(psi))) < 1e-12


# --------------------------------------------------------------------------
# hyperbolic integrals


def test_I1_examples():
    v = math.pi / math.cosh(math.pi / 2)
    ref = quad(lambda t: math.cos(t) / math.cosh(t), -60, 60, limit=400, epsabs=1e-14)[0]
    assert v == pytest.approx(ref, rel=1e-11)
    assert I1(1, 1, 1) == pytest.approx(v, rel=1e-14)
    assert I1(1, 1, 3) == pytest.approx(v, rel=1e-13)


@pytest.mark.parametrize("s,nu", [(0.3, 0.2), (1.0, 1.0), (2.5, 0.7)])
def test_I2_base_identity(s, nu):
    assert I2(s, nu, 2) == pytest.approx(s / nu * I1(s, nu, 1), rel=1e-13)


def test_resonant_even_index():
    with pytest.raises(ResonanceError):
        I1(0.0, 0.5, 2)
    assert I1(0.0, 0.5, 1) == pytest.approx(math.pi / 0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(1, 12), st.floats(0.001, 1.0))
def test_integrals_vs_shifted_contour(nu, n, frac):
    s = frac * 30 * 2 * nu / math.pi  # sπ/2ν up to 30
    assert I1(s, nu, n) == pytest.approx(shifted_contour(s, nu, n, False), rel=1e-9)
    if n >= 2:
        assert I2(s, nu, n) == pytest.approx(shifted_contour(s, nu, n, True), rel=1e-9)


def test_log_table_far_beyond_underflow():
    # sπ/2ν ≈ 6400: the value itself is far below the smallest double
    t = log_I1_table(1.0, 2.0**-12, 40)
    assert np.all(np.isfinite(t[1:]))
    assert t[1] == pytest.approx(math.log(2 * math.pi * 2**12) - math.pi / 2 * 2**12, rel=1e-12)


def test_pi_poly_examples():
    for w in (0.01, 0.7, 3.0):
        assert pi_poly(1, w) == 0 and pi_poly(2, w) == 0
        assert math.exp(pi_poly(4, w)) == pytest.approx(1 + 4 * w * w)


@pytest.mark.parametrize("r", [50, 80, 200, 1000])
@pytest.mark.parametrize("w", [0.01, 0.1, 1.0, 10.0])
def test_pi_poly_integral_mode(r, w):
    exact = pi_poly(r, w)
    approx = pi_poly(r, w, mode="integral")
    assert abs(approx - exact) / abs(exact) < 2 / r


# --------------------------------------------------------------------------
# harmonic amplitudes


def _best_dominant(nu: float, component: int) -> tuple[int, int]:
    apx = best_approximants(P.gamma, 16)[1:]
    terms = [harmonic_amplitude(a.N, a.D, P.with_nu(nu), component) for a in apx]
    best = max(terms, key=lambda t: t.log_amp)
    return best.m1, best.m2


def test_dominant_approximant_harmonics():
    assert _best_dominant(2.0**-4, 1) == (1, 1)
    assert _best_dominant(2.0**-6, 1) == (3, 5)
    assert _best_dominant(2.0**-6, 2) == (2, 3)


@pytest.mark.parametrize("log2nu", [-6, -9, -12, -16, -20])
def test_component_ratio_is_L(log2nu):
    nu = 2.0**log2nu
    for a in best_approximants(P.gamma, 30)[1:]:
        h1 = harmonic_amplitude(a.N, a.D, P.with_nu(nu), 1)
        h2 = harmonic_amplitude(a.N, a.D, P.with_nu(nu), 2)
        if h1.s_abs * math.pi / nu < 40:
            continue
        assert math.exp(h1.log_amp - h2.log_amp) == pytest.approx(h1.L, rel=1e-8)
        if h1.s_abs * math.pi / nu > 60:
            assert abs(h1.log_amp - h2.log_amp - math.log(h1.L)) < 1e-6


@pytest.mark.parametrize("m1,nu", [(1, 0.25), (3, 2.0**-6), (13, 2.0**-10), (89, 2.0**-16)])
def test_index_sum_is_unimodal(m1, nu):
    params = P.with_nu(nu)
    a = abs(m1 - params.gamma_value * round(m1 / params.gamma_value))
    i = np.arange(max(0, -(-(5 - m1) // 2)), 400, dtype=float)
    table = log_I1_table(a, nu, int(m1 + 2 * i[-1] + 1))
    for comp in (1, 2):
        t = _log_terms(m1, 0, a, params, comp, i, table)
        k = int(np.argmax(t))
        assert np.all(np.diff(t[: k + 1]) > 0)
        assert np.all(np.diff(t[k:]) < 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 60), st.floats(0.01, 0.5))
def test_amplitude_depends_on_abs_m2_and_abs_s(m1, m2, nu):
    params = P.with_nu(nu)
    a = abs(m1 - params.gamma_value * m2)
    for comp in (1, 2):
        up = _exact_log_amp(m1, m2, a, params, comp)[0]
        down = _exact_log_amp(m1, -m2, a, params, comp)[0]
        assert up == pytest.approx(down, rel=1e-13)


def test_asymptotic_mode_tracks_exact():
    # the two agree once sπ/2ν is large enough for half-exponentials and
    # m1 >= 5, where both index sums start at zero
    for a in best_approximants(P.gamma, 20)[5:]:
        nu = 0.05 / (a.N * a.N * float(a.c_s))
        ex = harmonic_amplitude(a.N, a.D, P.with_nu(nu), 1)
        if ex.s_abs * math.pi / (2 * nu) < 35:
            continue
        asy = harmonic_amplitude(a.N, a.D, P.with_nu(nu), 1, mode="asymptotic")
        assert abs(ex.log_amp - asy.log_amp) < 1e-6 * abs(ex.log_amp)


def test_resonant_harmonic_rejected():
    with pytest.raises(ValueError):
        harmonic_amplitude(0, 0, P, 2)
    with pytest.raises(ValueError):
        harmonic_amplitude(0, 3, P, 1)


# --------------------------------------------------------------------------
# series


def test_single_term_far_from_changes():
    # the golden change points sit near log2 ν = -12.0, -13.27, -14.66
    for x in (-12.57, -13.96):
        assert len(build_series(P.with_nu(2.0**x), 1)) == 1


def test_two_term_windows_shrink():
    xs = np.arange(-12.6, -16.6, -0.02)
    counts = [len(build_series(P.with_nu(2.0**x), 1)) for x in xs]
    assert set(counts) <= {1, 2}
    windows, start = [], None
    for x, n in zip(xs, counts):
        if n == 2 and start is None:
            start = x
        if n == 1 and start is not None:
            windows.append(start - x)
            start = None
    assert len(windows) >= 2
    assert all(b < a for a, b in zip(windows, windows[1:]))


def test_dominant_harmonic_combines_index_terms():
    s = build_series(P.with_nu(2.0**-2), 1)
    assert 1 < s.terms[0].n_contributions <= 14


def test_series_truncation_invariants():
    for x in (-3, -5, -8):
        s = build_series(P.with_nu(2.0**x), 2)
        top = s.terms[0].log_amp
        assert all(t.log_amp >= top + math.log(1e-10) for t in s.terms)
        assert len({(t.m1, t.m2) for t in s.terms}) == len(s.terms)
        assert s.frontier < top + math.log(1e-10)
        assert [t.log_amp for t in s.terms] == sorted((t.log_amp for t in s.terms), reverse=True)


def test_eps_linearity():
    s1 = build_series(P, 1)
    s2 = build_series(P.__class__(P.nu, eps=2 * P.eps), 1)
    for psi, th in [(0.3, 1.1), (2.0, 5.0), (4.4, 0.2)]:
        assert evaluate(s2, psi, th) == pytest.approx(2 * evaluate(s1, psi, th), rel=1e-12)


def test_evaluate_examples():
    s = build_series(P, 1)
    assert evaluate(s, 0.0, 0.0) == 0.0
    one = SplittingSeries(1, P, [s.terms[0]])
    t = s.terms[0]
    assert evaluate(one, math.pi / (2 * t.m1), 0.0) == pytest.approx(P.eps * t.amp)
    shift = evaluate(one, 0.7 + 2 * math.pi / t.m1, 1.3) - evaluate(one, 0.7, 1.3)
    assert abs(shift) < 1e-14 * P.eps * t.amp
    assert amplitude_sup(one) == pytest.approx(P.eps * t.amp)


def test_component_ordering_at_desk_scale():
    for x in (-4, -5):
        params = P.with_nu(2.0**x)
        lo = log_amplitude_sup(build_series(params, 1))
        hi = log_amplitude_sup(build_series(params, 2))
        assert lo < hi


def test_dominant_between_table_rows():
    for x in np.linspace(-5.973, -6.233, 6):
        assert dominant(build_series(P.with_nu(2.0**x), 1)) == (3, 5)


def test_dominant_empty_series():
    with pytest.raises(ValueError):
        dominant(SplittingSeries(1, P, []))


def test_params_validation():
    for kw in ({"nu": 0.0}, {"nu": 0.1, "c": 1.0}, {"nu": 0.1, "d": 1.4}):
        with pytest.raises(ValueError):
            PerturbationParams(**kw)
