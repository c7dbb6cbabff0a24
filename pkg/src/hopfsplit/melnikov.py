"""Closed-form Melnikov integrals of the forced Hamiltonian-Hopf normal form.

The perturbation is eps * g(y1) * f(theta) with g(y) = y^5/(d - y) and
f(theta) = 1/(c - cos theta), theta = gamma*t + theta0.  Along the
unperturbed homoclinic orbit the two splitting components become sine series

    dF_i(psi0, theta0) = eps * sum C_i[m1, m2] * sin(m1*psi0 - m2*theta0).

Every amplitude is carried as (sign, natural log of magnitude) because the
values span thousands of decades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import comb, lgamma, log, pi
from typing import NamedTuple

import mpmath as mp
import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .frequency import Frequency, best_approximants, golden

LOG2 = log(2.0)


class SignedLog(NamedTuple):
    sign: int
    log: float

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log) if self.sign else 0.0


class ResonanceError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationParams:
    nu: float
    eps: float = 1e-3
    c: float = 5.0
    d: float = 7.0
    gamma: Frequency = field(default_factory=golden, compare=False)

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        if not self.d > math.sqrt(2):
            raise ValueError("d must exceed sqrt(2)")
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0,1)")
        if not self.eps >= 0:
            raise ValueError("eps must be non-negative")

    @property
    def gamma_value(self) -> float:
        return float(self.gamma.value(30))

    @property
    def rho_c(self) -> float:
        return self.c + math.sqrt(self.c * self.c - 1)

    @property
    def K(self) -> float:
        return log(self.d) + LOG2 / 2 + log(self.rho_c) / self.gamma_value - 1

    @property
    def B(self) -> float:
        return pi / 2

    def with_nu(self, nu: float) -> "PerturbationParams":
        return replace(self, nu=nu)


# --------------------------------------------------------------------------
# expansion coefficients


def fourier_c(j: int, c: float) -> float:
    """Cosine coefficient of 1/(c - cos θ)."""
    if not c > 1:
        raise ValueError("c must exceed 1")
    if j < 0:
        raise ValueError("j must be >= 0")
    c0 = 1 / math.sqrt(c * c - 1)
    return c0 if j == 0 else 2 * c0 / (c + math.sqrt(c * c - 1)) ** j


def log_fourier_c(j: int, c: float) -> float:
    c0 = -0.5 * log(c * c - 1)
    return c0 if j == 0 else LOG2 + c0 - j * log(c + math.sqrt(c * c - 1))


def taylor_d(k: int, d: float) -> float:
    """Coefficient of y^(4+k) in g'(y) for g(y) = y^5/(d-y)."""
    if not d > math.sqrt(2):
        raise ValueError("d must exceed sqrt(2)")
    if k < 0:
        raise ValueError("k must be >= 0")
    return (5 + k) * d ** (-k - 1)


def cos_power_coeff(m: int, i: int) -> Fraction:
    """a_{m,i}: cos^m ψ = Σ_i a_{m,i} cos((m-2i)ψ), 0 <= i <= m/2."""
    if m < 0 or not 0 <= i <= m // 2:
        raise IndexError("index out of range")
    if 2 * i == m:
        return Fraction(comb(m, i), 2**m)
    return Fraction(comb(m, i), 2 ** (m - 1))


def cos_power_sine_coeff(m: int, i: int) -> Fraction:
    """b_{m,i}: cos^m ψ sin ψ = Σ_i b_{m,i} sin((m+1-2i)ψ), 0 <= i <= (m+1)/2."""
    if m < 0 or not 0 <= i <= (m + 1) // 2:
        raise IndexError("index out of range")
    return Fraction((m + 1 - 2 * i) * comb(m + 1, i), 2**m * (m + 1))


def trig_coeffs(m: int, i: int) -> tuple[float | None, float | None]:
    a = float(cos_power_coeff(m, i)) if 0 <= i <= m // 2 else None
    b = float(cos_power_sine_coeff(m, i)) if 0 <= i <= (m + 1) // 2 else None
    if a is None and b is None:
        raise IndexError("index out of range")
    return a, b


def _lbinom(n, k):
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(np.asarray(n) - k + 1.0)


# --------------------------------------------------------------------------
# hyperbolic integrals


def _log_cosh(x: float) -> float:
    x = abs(x)
    return x + math.log1p(math.exp(-2 * x)) - LOG2


def _log_sinh_abs(x: float) -> float:
    x = abs(x)
    if x < 1e-3:
        return log(x) + math.log1p(x * x / 6)
    return x + math.log1p(-math.exp(-2 * x)) - LOG2


def log_I1_table(s: float, nu: float, n_max: int) -> np.ndarray:
    """log I1(s, ν, n) for n = 0..n_max (entry 0 unused).

    I1(s, ν, n) = ∫ cos(s t) / cosh^n(ν t) dt, which is positive for all s.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    n_max = max(n_max, 2)
    out = np.full(n_max + 1, -np.inf)
    a = abs(s)
    x = a * pi / (2 * nu)
    n = np.arange(3, n_max + 1, dtype=float)
    step = (
        np.log(a * a + ((n - 2) * nu) ** 2)
        - 2 * log(nu)
        - np.log((n - 1) * (n - 2))
    )
    out[1] = log(pi / nu) - _log_cosh(x)
    if a > 0:
        out[2] = log(a * pi / nu**2) - _log_sinh_abs(x)
    else:
        out[2] = np.nan
    # odd chain n = 3, 5, ... ; even chain n = 4, 6, ...
    out[3::2] = out[1] + np.cumsum(step[0::2])
    out[4::2] = out[2] + np.cumsum(step[1::2])
    return out


def log_I1(s: float, nu: float, n: int) -> SignedLog:
    if n < 1:
        raise ValueError("n must be >= 1")
    if s == 0 and n % 2 == 0:
        raise ResonanceError("resonant harmonic")
    return SignedLog(1, float(log_I1_table(s, nu, n)[n]))


def log_I2(s: float, nu: float, n: int) -> SignedLog:
    """I2(s, ν, n) = ∫ sinh(ν t) sin(s t) / cosh^n(ν t) dt = s/(ν(n-1)) I1(s, ν, n-1)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if s == 0:
        return SignedLog(0, -math.inf)
    base = log_I1(s, nu, n - 1)
    return SignedLog(1 if s > 0 else -1, log(abs(s) / (nu * (n - 1))) + base.log)


def I1(s: float, nu: float, n: int) -> float:
    return log_I1(s, nu, n).value


def I2(s: float, nu: float, n: int) -> float:
    return log_I2(s, nu, n).value


def pi_poly(r: int, w: float, mode: str = "exact") -> float:
    """log Π_r(w), Π_1 = Π_2 = 1, Π_r = (1 + (r-2)^2 w^2) Π_{r-2}.

    ``mode="integral"`` replaces the product by its integral approximation,
    whose relative error in the log is O(1/r).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if mode == "exact":
        j = np.arange(r - 2, 0, -2, dtype=float)
        return float(np.sum(np.log1p((j * w) ** 2)))
    if mode == "integral":
        return _log_pi_integral(r, w)
    raise ValueError(f"unknown mode {mode!r}")


def _log_pi_integral(k, w):
    k1 = np.asarray(k, dtype=float) - 1
    z = k1 * w
    return k1 / 2 * (np.log1p(z * z) - 2) + np.arctan(z) / w


# --------------------------------------------------------------------------
# harmonic amplitudes


@dataclass(frozen=True)
class HarmonicTerm:
    m1: int
    m2: int
    log_amp: float
    sign: int
    component: int
    s_abs: float
    L: float
    n_contributions: int = 0

    @property
    def amp(self) -> float:
        return math.exp(self.log_amp)


def signed_small_divisor(m1: int, m2: int, gamma: Frequency) -> float:
    """m1 - γ m2 evaluated without cancellation."""
    if m2 == 0:
        return float(m1)
    with mp.workdps(30 + len(str(abs(m2)))):
        return float(m1 - gamma.value(30 + len(str(abs(m2)))) * m2)


def _peak_index(m1: int, s: float, nu: float, d: float) -> float:
    # stationary point of the i-sum: u^2 + m1 u - (s²/ν² + m1²)/(2d²-4) = 0
    q = ((s / nu) ** 2 + m1 * m1) / (2 * d * d - 4)
    return (-m1 + math.sqrt(m1 * m1 + 4 * q)) / 2


def _log_terms(m1: int, m2: int, s: float, params: PerturbationParams, component: int,
               i: np.ndarray, logI1: np.ndarray) -> np.ndarray:
    n = m1 + 2 * i
    idx = n.astype(int)
    d = params.d
    # 2^((3+k)/2) d_k with k = n - 5
    log_pre = (n - 2) / 2 * LOG2 + np.log(n) - (n - 4) * log(d)
    if component == 1:
        # b_{n-1,i} = m1 binom(n, i) / (2^(n-1) n)
        coeff = log(m1) - (n - 1) * LOG2 - np.log(n) + _lbinom(n, i)
        return log_pre + coeff + logI1[idx]
    # a_{n,i} (halved when 2i = n) times I2(s, ν, n+1) = |s|/(ν n) I1(s, ν, n)
    coeff = _lbinom(n, i) - np.where(2 * i == n, n, n - 1) * LOG2
    return log_pre + coeff + np.log(abs(s) / (params.nu * n)) + logI1[idx]


def harmonic_amplitude(m1: int, m2: int, params: PerturbationParams, component: int,
                       mode: str = "exact") -> HarmonicTerm:
    """Amplitude of the sin(m1 ψ0 - m2 θ0) harmonic of component 1 or 2.

    ``mode="exact"`` sums every (k, i, j) contribution with exact hyperbolic
    factors; ``mode="asymptotic"`` uses the Stirling-ready prefactor times
    the explicit S_A sum, with cosh and sinh replaced by half-exponentials.
    """
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    if m1 < 0 or (m1 == 0 and component == 1):
        raise ValueError("m1 must be >= 1 (>= 0 for component 2)")
    if m1 == 0 and m2 <= 0:
        raise ValueError("m1 = 0 harmonics are indexed by m2 > 0")
    s = signed_small_divisor(m1, m2, params.gamma)
    if s == 0:
        raise ResonanceError("resonant harmonic")
    a = abs(s)
    nu = params.nu
    L = nu * m1 * m1 / (m1 * a) if m1 else 0.0
    if mode == "asymptotic":
        if m1 < 1:
            raise ValueError("asymptotic mode needs m1 >= 1")
        log_amp, nterms = _asymptotic_log_amp(m1, m2, a, params, component)
    elif mode == "exact":
        log_amp, nterms = _exact_log_amp(m1, m2, a, params, component)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sign = 1 if component == 1 else (1 if s > 0 else -1)
    return HarmonicTerm(m1, m2, log_amp, sign, component, a, L, nterms)


def _exact_log_amp(m1, m2, a, params, component):
    nu, d = params.nu, params.d
    i0 = max(0, -(-(5 - m1) // 2))
    if m1 == 0:
        i0 = 3
    u = _peak_index(m1, a, nu, d)
    i_end = int(max(i0 + 8, 2 * u + 30 * math.sqrt(u + 1) + 40))
    while True:
        i = np.arange(i0, i_end + 1, dtype=float)
        logI1 = log_I1_table(a, nu, m1 + 2 * i_end + 1)
        t = _log_terms(m1, m2, a, params, component, i, logI1)
        top = float(np.max(t))
        if t[-1] < top - 40 or i_end > 50_000_000:
            break
        i_end *= 2
    keep = t > top - 40
    total = top + log(float(np.sum(np.exp(t[keep] - top))))
    extra = log_fourier_c(abs(m2), params.c)
    if m2 == 0 or m1 == 0:
        extra += LOG2  # both l-branches land on the same harmonic
    return total + extra, int(np.count_nonzero(keep))


def _asymptotic_log_amp(m1, m2, a, params, component):
    nu, d, c = params.nu, params.d, params.c
    x = a * pi / (2 * nu)
    r = a / (nu * d)
    pref = (
        LOG2 - abs(m2) * log(params.rho_c) - 0.5 * log(c * c - 1)
        + 3 * log(d) - x - m1 / 2 * LOG2 + (m1 - 1) * log(r) + log(d) - lgamma(m1 + 1)
    )
    if component == 1:
        pref += log(2 * pi / nu) + log(m1)
    else:
        pref += log(2 * pi * a / nu**2)
    u = _peak_index(m1, a, nu, d)
    i_end = int(max(8, 2 * u + 30 * math.sqrt(u + 1) + 40))
    w = nu / a
    while True:
        i = np.arange(0, i_end + 1, dtype=float)
        n = m1 + 2 * i
        # log Π_n(w) along the parity chain b, b+2, ... of m1
        b = 1 if m1 % 2 else 2
        steps = np.log1p((np.arange(b, m1 + 2 * i_end - 1, 2) * w) ** 2)
        logpi_all = np.concatenate(([0.0], np.cumsum(steps)))
        logpi = logpi_all[((n - b) // 2).astype(int)]
        logA = (
            np.log(n) - i * LOG2 - gammaln(m1 + i + 1) - gammaln(i + 1)
            + 2 * i * log(r) + lgamma(m1 + 1) - log(d) + logpi
        )
        top = float(np.max(logA))
        if logA[-1] < top - log(1e16) - 5 or i_end > 50_000_000:
            break
        i_end *= 2
    keep = logA > top - 40
    log_SA = top + log(float(np.sum(np.exp(logA[keep] - top))))
    return pref + log_SA, int(np.count_nonzero(keep))


# --------------------------------------------------------------------------
# series


@dataclass
class SplittingSeries:
    component: int
    params: PerturbationParams
    terms: list[HarmonicTerm]
    truncation_rel_tol: float = 1e-10
    frontier: float = -math.inf  # log-amplitude bound of what was not scanned

    def __len__(self):
        return len(self.terms)

    @property
    def log_max(self) -> float:
        if not self.terms:
            raise ValueError("empty series")
        return self.terms[0].log_amp

    def scaled_coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(m1, m2, signed amplitude / max amplitude)."""
        top = self.log_max
        m1 = np.array([t.m1 for t in self.terms], dtype=float)
        m2 = np.array([t.m2 for t in self.terms], dtype=float)
        w = np.array([t.sign * math.exp(t.log_amp - top) for t in self.terms])
        return m1, m2, w

    def evaluate_scaled(self, psi0, theta0):
        """Series value divided by eps * max amplitude (never underflows)."""
        m1, m2, w = self.scaled_coefficients()
        psi0 = np.asarray(psi0, dtype=float)
        theta0 = np.asarray(theta0, dtype=float)
        phase = np.multiply.outer(psi0, m1) - np.multiply.outer(theta0, m2)
        # smallest terms first keeps the float sum well conditioned
        order = np.argsort(np.abs(w))
        return np.sum(np.sin(phase[..., order]) * w[order], axis=-1)


def evaluate(series: SplittingSeries, psi0: float, theta0: float) -> float:
    """Σ eps C sin(m1 ψ0 - m2 θ0) with compensated summation."""
    vals = [
        series.params.eps * t.sign * math.exp(t.log_amp) * math.sin(t.m1 * psi0 - t.m2 * theta0)
        for t in series.terms
    ]
    return math.fsum(vals)


def dominant(series: SplittingSeries) -> tuple[int, int]:
    if not series.terms:
        raise ValueError("empty series")
    top = max(t.log_amp for t in series.terms)
    ties = [t for t in series.terms if t.log_amp == top]
    best = min(ties, key=lambda t: (t.m1, t.m2))
    return best.m1, best.m2


def log_amplitude_sup(series: SplittingSeries, grid: int = 256) -> float:
    """log of sup over the torus of |Σ C sin(...)| (eps not included)."""
    if not series.terms:
        raise ValueError("empty series")
    if len(series.terms) == 1:
        return series.terms[0].log_amp
    ang = np.arange(grid) * 2 * np.pi / grid
    P, T = np.meshgrid(ang, ang, indexing="ij")
    vals = np.abs(series.evaluate_scaled(P, T))
    k = int(np.argmax(vals))
    x0 = np.array([P.flat[k], T.flat[k]])
    res = minimize(lambda x: -abs(float(series.evaluate_scaled(x[0], x[1]))), x0,
                   method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000})
    best = max(float(vals.flat[k]), -float(res.fun))
    return series.log_max + log(best)


def amplitude_sup(series: SplittingSeries, grid: int = 256) -> float:
    """sup over the torus of |ΔF̃| including eps (may underflow to 0)."""
    return series.params.eps * math.exp(log_amplitude_sup(series, grid))


# --------------------------------------------------------------------------
# candidate enumeration


def _estimate_log_amp(m1, m2, s_abs, params: PerturbationParams, component: int) -> np.ndarray:
    """Vectorised upper estimate of log C via the peak term of the i-sum."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    a = np.asarray(s_abs, dtype=float)
    nu, d, c = params.nu, params.d, params.c
    q = ((a / nu) ** 2 + m1 * m1) / (2 * d * d - 4)
    u = (-m1 + np.sqrt(m1 * m1 + 4 * q)) / 2
    i0 = np.maximum(0, np.ceil((5 - m1) / 2))
    i0 = np.where(m1 == 0, 3, i0)
    best = np.full(m1.shape, -np.inf)
    for shift in (-1.0, 0.0, 1.0):
        i = np.maximum(i0, np.floor(u) + shift)
        n = m1 + 2 * i
        x = a * pi / (2 * nu)
        logI1 = (LOG2 + log(pi) - np.log(nu) - x + (n - 1) * np.log(a / nu)
                 - gammaln(n) + _log_pi_integral(n, nu / a))
        log_pre = (n - 2) / 2 * LOG2 + np.log(n) - (n - 4) * log(d)
        if component == 1:
            coeff = np.log(np.maximum(m1, 1)) - (n - 1) * LOG2 - np.log(n) + _lbinom(n, i)
            t = log_pre + coeff + logI1
        else:
            coeff = _lbinom(n, i) - (n - 1) * LOG2
            t = log_pre + coeff + np.log(a / (nu * n)) + logI1
        best = np.maximum(best, t)
    c0 = -0.5 * log(c * c - 1)
    logc = np.where(m2 == 0, c0, LOG2 + c0 - np.abs(m2) * log(params.rho_c))
    return best + logc + LOG2 + 0.5 * np.log(2 * pi * (u + 1))


def candidate_harmonics(params: PerturbationParams, box_m1: int, box_m2: int,
                        component: int) -> set[tuple[int, int]]:
    cands: set[tuple[int, int]] = set()
    lo = 0 if component == 2 else 1
    for m1 in range(lo, box_m1 + 1):
        for m2 in range(-box_m2, box_m2 + 1):
            if m1 == 0 and m2 <= 0:
                continue
            cands.add((m1, m2))
    # best approximants, their doubles and the intermediate fractions
    gamma = params.gamma
    count = 8
    while True:
        apx = best_approximants(gamma, count)
        last = apx[-1]
        if last.N and params.nu * last.N * last.N * float(last.c_s) > 1e3:
            break
        count += 8
        if count > 400:
            break
    qs = gamma.quotients(count + 1)
    for a in apx[1:]:
        if not a.N:
            continue
        L = params.nu * a.N * a.N * float(a.c_s)
        if not 1e-3 <= L <= 1e3:
            continue
        cands.add((a.N, a.D))
        cands.add((2 * a.N, 2 * a.D))
        prev = apx[a.n - 1]
        for k in range(1, min(qs[a.n + 1], 20)):
            cands.add((k * a.N + prev.N, k * a.D + prev.D))
    return {cd for cd in cands if cd[0] >= lo and not (cd[0] == 0 and cd[1] <= 0)}


class BudgetExhausted(RuntimeError):
    pass


def build_series(params: PerturbationParams, component: int, harmonic_budget: int = 512,
                 truncation_rel_tol: float = 1e-10, margin: float = 30.0) -> SplittingSeries:
    """Truncated Melnikov series keeping every harmonic above the relative tolerance."""
    log_tol = log(truncation_rel_tol)
    box_m1, box_m2 = 24, 48
    while True:
        cands = sorted(candidate_harmonics(params, box_m1, box_m2, component))
        m1 = np.array([c[0] for c in cands])
        m2 = np.array([c[1] for c in cands])
        s = np.array([abs(signed_small_divisor(a, b, params.gamma)) if abs(b) > 10_000
                      else abs(a - params.gamma_value * b) for a, b in cands])
        ok = s > 0
        m1, m2, s = m1[ok], m2[ok], s[ok]
        est = _estimate_log_amp(m1, m2, s, params, component)
        cutoff = float(np.max(est)) + log_tol - margin
        pick = np.nonzero(est >= cutoff)[0]
        terms = [harmonic_amplitude(int(m1[k]), int(m2[k]), params, component) for k in pick]
        top = max(t.log_amp for t in terms)
        terms = [t for t in terms if t.log_amp >= top + log_tol]
        terms.sort(key=lambda t: (-t.log_amp, t.m1, t.m2))
        # frontier: the box boundary must sit well below the kept range
        edge = (m1 == box_m1) | (np.abs(m2) == box_m2)
        frontier = float(np.max(est[edge])) if np.any(edge) else -math.inf
        if frontier < top + log_tol - 5:
            return SplittingSeries(component, params, terms, truncation_rel_tol, frontier)
        if box_m1 >= harmonic_budget:
            raise BudgetExhausted(
                f"frontier {frontier:.3f} above tolerance {top + log_tol:.3f} at budget {harmonic_budget}"
            )
        box_m1, box_m2 = 2 * box_m1, 2 * box_m2
