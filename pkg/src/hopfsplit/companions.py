"""Side computations: autonomous monomial perturbations, a forced Duffing oscillator,
and how the regularity of the forcing sets the size of the dominant term."""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb, log, pi

import numpy as np
from scipy.integrate import quad

from .melnikov import SignedLog, log_I1_table


# --------------------------------------------------------------------------
# autonomous monomials x1^k1 x2^k2 y1^l1 y2^l2


@dataclass(frozen=True)
class Monomial:
    k1: int
    k2: int
    l1: int
    l2: int

    def __post_init__(self):
        if min(self.k1, self.k2, self.l1, self.l2) < 0:
            raise ValueError("exponents must be non-negative")
        if self.r < 1:
            raise ValueError("degree must be >= 1")

    @property
    def r(self) -> int:
        return self.k1 + self.k2 + self.l1 + self.l2

    @property
    def k(self) -> int:
        return self.k1 + self.k2

    @property
    def l(self) -> int:
        return self.l1 + self.l2

    @property
    def m(self) -> int:
        return self.k1 + self.l1

    @property
    def n(self) -> int:
        return self.k2 + self.l2


def _binom(a: int, b: int) -> int:
    if a < 0 or b < 0 or b > a:
        return 0
    return comb(a, b)


def alternating_binomial(nhat: int, mhat: int) -> int:
    """Σ_s (-1)^s C(n̂, s) C(m̂, (r+1)/2 - s) with r = n̂ + m̂ odd."""
    r = nhat + mhat
    if r % 2 == 0:
        raise ValueError("n̂ + m̂ must be odd")
    return sum((-1) ** s * _binom(nhat, s) * _binom(mhat, (r + 1) // 2 - s) for s in range(nhat + 1))


def alternating_binomial_reflected(nhat: int, mhat: int) -> int:
    """(-1)^n̂ Σ_s (-1)^s C(n̂, s) C(m̂, (r-1)/2 - s), equal to the direct form."""
    r = nhat + mhat
    if r % 2 == 0:
        raise ValueError("n̂ + m̂ must be odd")
    return (-1) ** nhat * sum(
        (-1) ** s * _binom(nhat, s) * _binom(mhat, (r - 1) // 2 - s) for s in range(nhat + 1)
    )


def first_harmonic_weight(mono: Monomial) -> int:
    """m C(n+1, m-1) + n C(n-1, m+1), the integer in front of the first harmonic."""
    m, n = mono.m, mono.n
    c1 = alternating_binomial(n + 1, m - 1) if m >= 1 else 0
    c2 = alternating_binomial(n - 1, m + 1) if n >= 1 else 0
    return m * c1 + n * c2


def _trig_fourier(mono: Monomial) -> tuple[np.ndarray, np.ndarray]:
    """Cosine and sine coefficients of m c^{m-1} s^{n+1} - n c^{m+1} s^{n-1} in ψ.

    The polynomial has degree r + 1, so a DFT on 2r + 4 nodes is exact.
    """
    m, n = mono.m, mono.n
    N = 2 * mono.r + 4
    psi = np.arange(N) * 2 * pi / N
    c, s = np.cos(psi), np.sin(psi)
    vals = np.zeros(N)
    if m:
        vals += m * c ** (m - 1) * s ** (n + 1)
    if n:
        vals -= n * c ** (m + 1) * s ** (n - 1)
    F = np.fft.rfft(vals) / N
    cos_c = 2 * F.real
    sin_c = -2 * F.imag
    cos_c[0] /= 2
    return cos_c[: mono.r + 2], sin_c[: mono.r + 2]


def _radial_integrals(mono: Monomial, nu: float, j: int) -> float:
    """∫ trig(j t) R1^k R2^l dt with R2 = √2 sech(νt), R1 = R2 tanh(νt).

    For k even the trig factor is cos(jt), for k odd it is sin(jt).
    """
    k, l = mono.k, mono.l
    pre = 2 ** (mono.r / 2)
    total = 0.0
    if k % 2 == 0:
        # sinh^k = (cosh² - 1)^{k/2}
        h = k // 2
        table = log_I1_table(j, nu, 2 * k + l + 1)
        for p in range(h + 1):
            power = 2 * k + l - 2 * p
            total += comb(h, p) * (-1) ** (h - p) * math.exp(table[power])
    else:
        h = (k - 1) // 2
        table = log_I1_table(j, nu, 2 * k + l + 1)
        for p in range(h + 1):
            power = 2 * k + l - 2 * p
            # ∫ sin(jt) sinh / cosh^n = j/(ν(n-1)) I1(j, ν, n-1)
            val = j / (nu * (power - 1)) * math.exp(table[power - 1])
            total += comb(h, p) * (-1) ** (h - p) * val
    return pre * total


def autonomous_harmonics(mono: Monomial, nu: float) -> list[tuple[int, float, float]]:
    """[(j, cos coefficient, sin coefficient)] of M1(ψ0) = Σ a_j cos jψ0 + b_j sin jψ0."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    cos_c, sin_c = _trig_fourier(mono)
    out = []
    for j in range(1, len(cos_c)):
        if abs(cos_c[j]) < 1e-13 and abs(sin_c[j]) < 1e-13:
            continue
        J = _radial_integrals(mono, nu, j)
        # ψ = t + ψ0; only the parity matching R(t) survives the integral
        if mono.k % 2 == 0:
            # ∫cos(jt)R: cos jψ -> cos jψ0, sin jψ -> sin jψ0
            a, b = cos_c[j] * J, sin_c[j] * J
        else:
            # ∫sin(jt)R: cos jψ -> -sin jψ0, sin jψ -> cos jψ0
            a, b = sin_c[j] * J, -cos_c[j] * J
        out.append((j, a, b))
    return out


def autonomous_melnikov(mono: Monomial, nu: float, psi0: float) -> SignedLog:
    """M1(ψ0) for a single monomial, returned as (sign, log |value|)."""
    val = math.fsum(a * math.cos(j * psi0) + b * math.sin(j * psi0)
                    for j, a, b in autonomous_harmonics(mono, nu))
    if val == 0:
        return SignedLog(0, -math.inf)
    return SignedLog(1 if val > 0 else -1, log(abs(val)))


def first_harmonic_amplitude(mono: Monomial, nu: float) -> float:
    for j, a, b in autonomous_harmonics(mono, nu):
        if j == 1:
            return math.hypot(a, b)
    return 0.0


def asymptotic_form(mono: Monomial) -> tuple[int, float]:
    """(power of 1/ν, multiplier of 1/ν in the exponent) of the leading term."""
    return mono.r + mono.k, (pi / 2 if mono.r % 2 else pi)


def y1_fifth_leading(nu: float, psi0: float) -> float:
    """5π sin ψ0 / (384√2) · ν^-5 · e^{-π/(2ν)}."""
    return 5 * pi * math.sin(psi0) / (384 * math.sqrt(2)) * nu**-5 * math.exp(-pi / (2 * nu))


@dataclass(frozen=True)
class AutonomousFit:
    a: float
    b: float
    c: float
    d: float
    residual: float


def fit_log_amplitude(nu: np.ndarray, values: np.ndarray, c_fixed: float | None = None) -> AutonomousFit:
    """Least squares of values ≈ a ν + b ν log ν + c + d ν²."""
    nu = np.asarray(nu, dtype=float)
    y = np.asarray(values, dtype=float)
    cols = [nu, nu * np.log(nu)]
    if c_fixed is None:
        cols.append(np.ones_like(nu))
    cols.append(nu**2)
    A = np.vstack(cols).T
    rhs = y - (c_fixed if c_fixed is not None else 0.0)
    if len(nu) < A.shape[1] or np.linalg.matrix_rank(A) < A.shape[1]:
        raise ValueError("rank-deficient fit")
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = float(np.linalg.norm(A @ coef - rhs))
    if c_fixed is None:
        a, b, c, d = coef
    else:
        a, b, d = coef
        c = c_fixed
    return AutonomousFit(float(a), float(b), float(c), float(d), resid)


def autonomous_fit(mono: Monomial, nu_samples, c_fixed: float | None = None) -> AutonomousFit:
    """Fit ν log A1(ν) of the first harmonic of the Melnikov function."""
    nu = np.asarray(nu_samples, dtype=float)
    if len(nu) < 6:
        raise ValueError("need at least 6 samples")
    y = np.array([v * log(first_harmonic_amplitude(mono, v)) for v in nu])
    return fit_log_amplitude(nu, y, c_fixed)


# --------------------------------------------------------------------------
# forced Duffing oscillator: ∫ x²/(d - x) cos(ωt) dt along x = √2 sech t


def _check_duffing(d: float, omega: float):
    if not d > math.sqrt(2):
        raise ValueError("d must exceed sqrt(2)")
    if not omega > 0:
        raise ValueError("omega must be positive")


def duffing_singularity(d: float) -> float:
    """s0 = arccos(√2/d), the height of the closest pole of 1/(d - x(t))."""
    return math.acos(math.sqrt(2) / d)


def duffing_Ic_residues(d: float, omega: float) -> float:
    _check_duffing(d, omega)
    s0 = duffing_singularity(d)
    w = math.sqrt(2) * d / math.sqrt(d * d - 2)
    # residues divided by i at i s0, i(2π - s0), iπ/2 and i3π/2
    res = (
        -w * math.exp(-omega * s0)
        + w * math.exp(-omega * (2 * pi - s0))
        + math.sqrt(2) * math.exp(-omega * pi / 2)
        - math.sqrt(2) * math.exp(-3 * omega * pi / 2)
    )
    # 2πi · i res / (1 - e^{-2πω})
    return -2 * pi * res / (-math.expm1(-2 * pi * omega))


def duffing_Ic_quadrature(d: float, omega: float) -> float:
    """Independent oracle: quadrature of ∫ x²/(d-x) e^{iωt} dt on the line Im t = 0.8 s0.

    The integrand is analytic in the strip below the closest pole, so moving
    the path up removes most of the oscillatory cancellation.
    """
    _check_duffing(d, omega)
    h = 0.8 * duffing_singularity(d)

    def F(t):
        z = complex(t, h)
        x = math.sqrt(2) / np.cosh(z)
        return x * x / (d - x) * np.exp(1j * omega * z)

    T = 40.0
    re, _ = quad(lambda t: F(t).real, -T, T, limit=4000, epsabs=0, epsrel=1e-11)
    return re


@dataclass
class DuffingSeries:
    value: float
    terms: list[float]
    largest_index: int
    largest_over_sum: float
    converged: bool


def duffing_Ic_series(d: float, omega: float, terms: int = 10_000, rel_tol: float = 1e-17) -> DuffingSeries:
    """d Σ_{k>=2} (√2/d)^k I_k with I_k = ∫cos(ωt)/cosh^k t."""
    _check_duffing(d, omega)
    table = log_I1_table(omega, 1.0, terms + 1)
    q = log(math.sqrt(2) / d)
    vals: list[float] = []
    converged = False
    peak = 0.0
    for k in range(2, terms + 1):
        v = d * math.exp(k * q + table[k])
        vals.append(v)
        peak = max(peak, v)
        if v < rel_tol * peak and k > 10 and vals[-1] < vals[-2]:
            converged = True
            break
    if not converged:
        raise RuntimeError("series not converged within the term budget")
    total = math.fsum(vals)
    big = int(np.argmax(vals))
    return DuffingSeries(total, vals, big + 2, vals[big] / total, converged)


def duffing_exponents(d: float) -> tuple[float, float]:
    """(π/2 - √2/d, arccos(√2/d)): decay rates in ω of the series bound and of the residue result."""
    return pi / 2 - math.sqrt(2) / d, duffing_singularity(d)


# --------------------------------------------------------------------------
# regularity of the forcing


@dataclass(frozen=True)
class Cp:
    p: float


@dataclass(frozen=True)
class Analytic:
    rho: float


@dataclass(frozen=True)
class DominantTerm:
    k_M: float
    log_d: float
    constant: float  # C of the power law or of the stretched exponential


def log_dominant_term(mode: Cp | Analytic, c_small: float, tau: float, nu: float, k: float,
                      K: float = 1.0) -> float:
    """log d(k) for the Fourier decay implied by the regularity."""
    base = log(K) - c_small / (nu * k**tau)
    if isinstance(mode, Cp):
        return base - mode.p * log(k)
    return base - k / mode.rho


def regularity_dominant(mode: Cp | Analytic, c_small: float, tau: float, nu: float,
                        K: float = 1.0) -> DominantTerm:
    if tau < 1 or nu <= 0 or c_small <= 0:
        raise ValueError("need tau >= 1, nu > 0, c > 0")
    if isinstance(mode, Cp):
        if mode.p < 1:
            raise ValueError("p must be >= 1")
        p = mode.p
        kM = (c_small * tau / (nu * p)) ** (1 / tau)
        C = K * (p / (c_small * math.e * tau)) ** (p / tau)
    elif isinstance(mode, Analytic):
        if mode.rho <= 0:
            raise ValueError("rho must be positive")
        kt = c_small * tau * mode.rho
        kM = (kt / nu) ** (1 / (tau + 1))
        C = kt ** (1 / (tau + 1)) / mode.rho + c_small / kt ** (tau / (tau + 1))
    else:
        raise TypeError("mode must be Cp or Analytic")
    return DominantTerm(kM, log_dominant_term(mode, c_small, tau, nu, kM, K), C)
