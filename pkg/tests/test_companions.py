import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hopfsplit.companions import (
    Analytic,
    Cp,
    Monomial,
    alternating_binomial,
    alternating_binomial_reflected,
    asymptotic_form,
    autonomous_fit,
    autonomous_harmonics,
    autonomous_melnikov,
    duffing_exponents,
    duffing_Ic_quadrature,
    duffing_Ic_residues,
    duffing_Ic_series,
    duffing_singularity,
    first_harmonic_weight,
    fit_log_amplitude,
    log_dominant_term,
    regularity_dominant,
    y1_fifth_leading,
)

Y1_5 = Monomial(0, 0, 5, 0)


def monomials(max_r: int):
    for exps in itertools.product(range(max_r + 1), repeat=4):
        if 1 <= sum(exps) <= max_r:
            yield Monomial(*exps)


def direct_melnikov(mono: Monomial, nu: float, psi0: float) -> float:
    # ∫ {H1, H0} along the unperturbed orbit, by quadrature
    def integrand(t):
        R2 = math.sqrt(2) / math.cosh(nu * t)
        R1 = R2 * math.tanh(nu * t)
        psi = t + psi0
        c, s = math.cos(psi), math.sin(psi)
        trig = mono.m * c ** max(mono.m - 1, 0) * s ** (mono.n + 1) if mono.m else 0.0
        if mono.n:
            trig -= mono.n * c ** (mono.m + 1) * s ** (mono.n - 1)
        return trig * R1**mono.k * R2**mono.l

    T = 60 / nu
    val, _ = quad(integrand, -T, T, limit=20000, epsabs=1e-14, epsrel=1e-12)
    return val


def test_monomial_fields():
    m = Monomial(1, 2, 3, 4)
    assert (m.r, m.k, m.l, m.m, m.n) == (10, 3, 7, 4, 6)
    with pytest.raises(ValueError):
        Monomial(0, 0, 0, 0)
    with pytest.raises(ValueError):
        Monomial(-1, 0, 2, 0)


@pytest.mark.parametrize("mono", [Y1_5, Monomial(1, 0, 2, 0), Monomial(0, 1, 1, 1), Monomial(2, 0, 0, 1)])
@pytest.mark.parametrize("psi0", [0.4, 2.1])
def test_harmonics_match_direct_quadrature(mono, psi0):
    nu = 0.5
    v = autonomous_melnikov(mono, nu, psi0).value
    assert v == pytest.approx(direct_melnikov(mono, nu, psi0), rel=1e-8, abs=1e-12)


def test_y1_fifth_leading_term():
    # the harmonic route carries an extra 2^5 from R2 = √2 sech; the remainder is 1 + 10ν² + ...
    for nu in (0.02, 0.05):
        for psi0 in (0.3, 1.2, 2.5):
            ratio = autonomous_melnikov(Y1_5, nu, psi0).value / y1_fifth_leading(nu, psi0)
            assert ratio / 32 == pytest.approx(1 + 10 * nu**2, abs=30 * nu**4)


def test_y1_fifth_vanishes_at_zero_phase():
    assert y1_fifth_leading(0.1, 0.0) == 0.0
    amp = max(math.hypot(a, b) for _, a, b in autonomous_harmonics(Y1_5, 0.1))
    assert abs(autonomous_melnikov(Y1_5, 0.1, 0.0).value) < 1e-12 * amp


def test_asymptotic_form():
    assert asymptotic_form(Y1_5) == (5, math.pi / 2)
    assert asymptotic_form(Monomial(1, 0, 2, 0)) == (4, math.pi / 2)
    assert asymptotic_form(Monomial(1, 0, 1, 0)) == (3, math.pi)


@pytest.mark.parametrize("mono", [Y1_5, Monomial(1, 0, 2, 0), Monomial(0, 2, 1, 0)])
def test_odd_degree_decay_rate(mono):
    # ν log A1 → -π/2 for odd degree, with the power r + k visible in the next term
    power, mult = asymptotic_form(mono)
    nus = np.array([0.01, 0.005])
    amp = [max(math.hypot(a, b) for j, a, b in autonomous_harmonics(mono, nu) if j == 1) for nu in nus]
    corrected = [nu * (math.log(A) + power * math.log(nu)) for nu, A in zip(nus, amp)]
    assert corrected[-1] == pytest.approx(-mult, abs=0.02)
    assert abs(corrected[1] + mult) < abs(corrected[0] + mult)


def test_even_degree_dominated_by_second_harmonic():
    mono = Monomial(1, 0, 1, 0)
    power, mult = asymptotic_form(mono)
    gaps = []
    for nu in (0.01, 0.005):
        h = {j: math.hypot(a, b) for j, a, b in autonomous_harmonics(mono, nu)}
        assert 1 not in h or h[1] < 1e-12 * h[2]
        gaps.append(nu * (math.log(h[2]) + power * math.log(nu)) + mult)
    # what is left is ν log A, so it halves with ν
    assert abs(gaps[1]) < 0.02
    assert gaps[1] / gaps[0] == pytest.approx(0.5, abs=0.05)


def test_fit_recovers_synthetic_data():
    nu = np.linspace(0.05, 0.2, 12)
    a, b, c, d = 0.7, -5.3, -1.6, 2.4
    y = a * nu + b * nu * np.log(nu) + c + d * nu**2
    fit = fit_log_amplitude(nu, y)
    assert (fit.a, fit.b, fit.c, fit.d) == pytest.approx((a, b, c, d), abs=1e-10)
    fixed = fit_log_amplitude(nu, y, c_fixed=c)
    assert (fixed.a, fixed.b, fixed.d) == pytest.approx((a, b, d), abs=1e-10)


def test_fit_needs_enough_samples():
    with pytest.raises(ValueError):
        autonomous_fit(Y1_5, [0.1, 0.2, 0.3])
    with pytest.raises(ValueError, match="rank"):
        fit_log_amplitude(np.full(8, 0.1), np.zeros(8))


def test_y1_fifth_fits():
    nus = np.linspace(0.05, 0.2, 16)
    free = autonomous_fit(Y1_5, nus)
    assert free.c == pytest.approx(-1.58898, abs=1e-2)
    frozen = autonomous_fit(Y1_5, nus, c_fixed=-math.pi / 2)
    assert frozen.b == pytest.approx(-5.256, rel=0.1)


def test_alternating_binomial_reflection():
    for r in range(1, 16, 2):
        for nhat in range(r + 1):
            assert alternating_binomial(nhat, r - nhat) == alternating_binomial_reflected(nhat, r - nhat)
    with pytest.raises(ValueError):
        alternating_binomial(2, 2)


def test_first_harmonic_weight_nonzero_for_odd_degree():
    count = 0
    for mono in monomials(15):
        if mono.r % 2 == 1:
            assert first_harmonic_weight(mono) != 0, mono
            count += 1
    assert count > 1000


# ---------------------------------------------------------------------------
# forced Duffing


def test_duffing_residues_known_point():
    assert duffing_Ic_residues(7, 10) == pytest.approx(duffing_Ic_quadrature(7, 10), rel=1e-8)


def test_duffing_residues_random_points():
    rng = np.random.default_rng(20241015)
    for d, w in zip(rng.uniform(1.5, 10, 20), rng.uniform(1, 20, 20)):
        assert duffing_Ic_residues(d, w) == pytest.approx(duffing_Ic_quadrature(d, w), rel=1e-7), (d, w)


def test_duffing_odd_part_vanishes():
    d, w = 4.0, 3.0

    def odd(t):
        x = math.sqrt(2) / math.cosh(t)
        return x * x / (d - x) * math.sin(w * t)

    val, _ = quad(odd, -40, 40, limit=2000)
    assert abs(val) < 1e-12


def test_duffing_series_matches_residues():
    s = duffing_Ic_series(7, 5)
    assert s.converged
    assert s.value == pytest.approx(duffing_Ic_residues(7, 5), rel=1e-8)


@pytest.mark.parametrize("d", [1.6, 3.0, 7.0])
def test_duffing_series_largest_term_moves_out(d):
    runs = [duffing_Ic_series(d, w) for w in (20, 80, 320)]
    for w, s in zip((20, 80, 320), runs):
        # index of the largest term grows linearly in ω, tending to √2 ω / d for large d
        assert s.largest_index == pytest.approx(math.sqrt(2) * w / math.sqrt(d * d - 2), rel=0.1, abs=1)
    # and its share of the sum shrinks like ω^(-1/2)
    for a, b in zip(runs, runs[1:]):
        assert b.largest_over_sum / a.largest_over_sum == pytest.approx(0.5, rel=0.1)


def test_duffing_series_budget():
    with pytest.raises(RuntimeError):
        duffing_Ic_series(1.5, 40, terms=20)


def test_duffing_leading_exponential():
    d = 3.0
    s0 = duffing_singularity(d)
    w = math.sqrt(2) * d / math.sqrt(d * d - 2)
    scaled = [duffing_Ic_residues(d, om) * math.exp(om * s0) for om in (10, 20, 40)]
    assert scaled[-1] == pytest.approx(2 * math.pi * w, rel=1e-6)


def test_duffing_exponent_gap_is_cubic():
    for d in (20, 40, 80):
        a, b = duffing_exponents(d)
        assert a > b
        assert (a - b) * d**3 == pytest.approx(math.sqrt(2) / 3, rel=0.02)


def test_duffing_domain():
    with pytest.raises(ValueError):
        duffing_Ic_residues(1.4, 2)
    with pytest.raises(ValueError):
        duffing_Ic_series(3, -1)


# ---------------------------------------------------------------------------
# regularity


@pytest.mark.parametrize("p,tau", [(2.0, 1.0), (5.0, 1.5), (3.0, 2.0)])
def test_finite_regularity_power_law(p, tau):
    c = 1.3
    vals = []
    for nu in (1e-3, 1e-4, 1e-5, 1e-6):
        dom = regularity_dominant(Cp(p), c, tau, nu)
        vals.append(dom.log_d - (p / tau) * math.log(nu))
        assert dom.log_d == pytest.approx(math.log(dom.constant) + (p / tau) * math.log(nu), abs=1e-9)
    assert np.ptp(vals) < 1e-9


def test_analytic_stretched_exponent():
    c, rho = 1.3, 0.7
    xs = []
    for nu in (1e-4, 1e-6, 1e-8):
        dom = regularity_dominant(Analytic(rho), c, 1.0, nu)
        xs.append(dom.log_d * math.sqrt(nu))
        assert dom.log_d == pytest.approx(-dom.constant / math.sqrt(nu), rel=1e-12)
    assert np.ptp(xs) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["cp", "an"]), st.floats(1.0, 6.0), st.floats(1.0, 2.5), st.floats(0.2, 3.0),
       st.floats(-9.0, -3.0))
def test_dominant_index_matches_brute_force(kind, shape, tau, c, log10nu):
    nu = 10.0**log10nu
    mode = Cp(shape) if kind == "cp" else Analytic(shape)
    dom = regularity_dominant(mode, c, tau, nu)
    if not 1 <= dom.k_M <= 1e6:
        return
    k = np.arange(1, 10**6 + 1, dtype=float)
    if kind == "cp":
        logs = -c / (nu * k**tau) - shape * np.log(k)
    else:
        logs = -c / (nu * k**tau) - k / shape
    best = int(np.argmax(logs)) + 1
    assert abs(best - dom.k_M) <= 1
    assert log_dominant_term(mode, c, tau, nu, float(best)) <= dom.log_d + 1e-9


def test_regularity_domain():
    with pytest.raises(ValueError):
        regularity_dominant(Cp(0.5), 1.0, 1.0, 1e-3)
    with pytest.raises(ValueError):
        regularity_dominant(Analytic(1.0), 1.0, 0.5, 1e-3)
    with pytest.raises(TypeError):
        regularity_dominant("smooth", 1.0, 1.0, 1e-3)
