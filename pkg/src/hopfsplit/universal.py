"""Universal profile Ψ(L) of the dominant harmonic and dominant-harmonic change points.

For a harmonic with numerator m1 and c_s = 1/(m1 |m1 - γ m2|) the scaled
parameter is L = c_s ν m1², and √(c_s ν) log(C/ε) ≈ Ψ1(L) independently of
which approximant produced the harmonic.  Both Ψ parts below already carry
the √L factor, so Ψ1 = psi11 + psi12 is directly comparable to
√(c_s ν) log C.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .frequency import Approximant, Frequency, best_approximants, c_s_limits, golden
from .melnikov import PerturbationParams, harmonic_amplitude

LOG2 = math.log(2.0)


def interior_index_ratio(L: float, d: float) -> float:
    """Positive root I of (2d²-4)(I² + I) - 1 = 1/L²."""
    return (-1 + math.sqrt(1 + 4 * (1 + 1 / (L * L)) / (2 * d * d - 4))) / 2


@dataclass(frozen=True)
class PsiEvaluation:
    L: float
    I_star: float
    psi11: float
    psi12: float
    c: float
    d: float
    K: float

    @property
    def psi1(self) -> float:
        return self.psi11 + self.psi12

    def psi2_for(self, m1: int) -> float:
        return self.psi1 - math.sqrt(self.L) / m1 * math.log(self.L)


def _params_constants(params: PerturbationParams) -> tuple[float, float, float]:
    return params.c, params.d, params.K


def psi1(L: float, params: PerturbationParams) -> PsiEvaluation:
    if not L > 0:
        raise ValueError("L must be positive")
    c, d, K = _params_constants(params)
    I = interior_index_ratio(L, d)
    root = math.sqrt(L)
    prefactor = -(K + math.log(L) + params.B / L)
    k = 1 + 2 * I
    mid = (
        -2 * I * math.log(L * d)
        - (1 + I) * math.log1p(I)
        - (I * math.log(I) if I > 0 else 0.0)
        + I * (2 - LOG2)
        + k * (math.log1p((k * L) ** 2) - 2) / 2
        + math.atan(k * L) / L
    )
    return PsiEvaluation(L, I, root * prefactor, root * mid, c, d, K)


def psi1_value(L: float, params: PerturbationParams) -> float:
    return psi1(L, params).psi1


def psi2(L: float, m1: int, params: PerturbationParams) -> float:
    if m1 < 1:
        raise ValueError("m1 must be >= 1")
    return psi1(L, params).psi2_for(m1)


def prefactor_profile(L: float, params: PerturbationParams) -> float:
    """The P_F part alone, √L·(-(K + log L + B/L))."""
    return psi1(L, params).psi11


def _maximise(fun: Callable[[float], float], lo: float = 1e-4, hi: float = 1e2) -> tuple[float, float]:
    # maximise over log L; the profile is unimodal on this bracket
    res = minimize_scalar(lambda x: -fun(math.exp(x)), bounds=(math.log(lo), math.log(hi)),
                          method="bounded", options={"xatol": 1e-12})
    L = math.exp(res.x)
    return L, fun(L)


def psi1_max(params: PerturbationParams) -> tuple[float, float]:
    """(L_M, Ψ_M) with Ψ_M = max Ψ1."""
    return _maximise(lambda L: psi1_value(L, params))


def psi1_max_surface(c_values: Sequence[float], d_values: Sequence[float],
                     gamma: Frequency | None = None) -> np.ndarray:
    """Array of shape (len(c), len(d), 2) holding (L_M, Ψ_M) per parameter pair."""
    gamma = gamma or golden()
    out = np.empty((len(c_values), len(d_values), 2))
    for a, c in enumerate(c_values):
        for b, d in enumerate(d_values):
            out[a, b] = psi1_max(PerturbationParams(0.5, c=c, d=d, gamma=gamma))
    return out


# --------------------------------------------------------------------------
# golden-mean constants


@dataclass(frozen=True)
class GoldenChangeConstants:
    L_prefactor: float  # change point of the P_F-only model
    L_tilde: float  # change point of the full profile, in L / c_s
    psi_hat_at_change: float
    L_tilde_max: float
    psi_hat_max: float
    c_s: float


def golden_prefactor_change(params: PerturbationParams, damping: float = 0.5,
                            tol: float = 1e-14, max_iter: int = 10_000) -> float:
    """Fixed point of L = (πγ/(2(1+γ))) / (2(1+γ)log(1+γ) + Kγ + γ log L)."""
    g = params.gamma_value
    num = math.pi * g / (2 * (1 + g))

    def rhs(L):
        return num / (2 * (1 + g) * math.log(1 + g) + params.K * g + g * math.log(L))

    L = 0.2
    for _ in range(max_iter):
        new = (1 - damping) * L + damping * rhs(L)
        if abs(new - L) < tol * L:
            return new
        L = new
    # the damped map did not settle; fall back on a bracketing solve
    return brentq(lambda x: x - rhs(x), 1e-3, 10.0, xtol=1e-15)


def golden_change_constants(params: PerturbationParams | None = None) -> GoldenChangeConstants:
    params = params or PerturbationParams(0.5)
    g = params.gamma_value
    cs = 3 + g
    ratio = (1 + g) ** 2

    def hat(Lt):
        return psi1_value(cs * Lt, params) / math.sqrt(cs)

    Lt = brentq(lambda x: hat(x) - hat(ratio * x), 1e-3, 0.2, xtol=1e-15)
    Lt_max, hat_max = _maximise(hat)
    return GoldenChangeConstants(golden_prefactor_change(params), Lt, hat(Lt), Lt_max, hat_max, cs)


# --------------------------------------------------------------------------
# change points


@dataclass(frozen=True)
class ChangePoint:
    from_approx: Approximant
    to_approx: Approximant
    nu: float
    component: int
    L_at_change: float

    @property
    def log2_nu(self) -> float:
        return math.log2(self.nu)


class NoChangeInRange(ValueError):
    pass


MODES = ("psi", "prefactor", "amplitude")


def approximant_score(a: Approximant, nu: float, params: PerturbationParams, component: int,
                      mode: str) -> float:
    """Approximation of √ν log(C/ε) for the harmonic (N, D) of an approximant."""
    cs = float(a.c_s)
    L = cs * nu * a.N * a.N
    if mode == "amplitude":
        term = harmonic_amplitude(a.N, a.D, params.with_nu(nu), component)
        return math.sqrt(nu) * term.log_amp
    ev = psi1(L, params)
    if mode == "psi":
        val = ev.psi1 if component == 1 else ev.psi2_for(a.N)
    elif mode == "prefactor":
        val = ev.psi11
        if component == 2:
            val -= math.sqrt(L) / a.N * math.log(L)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return val / math.sqrt(cs)


def change_points(freq: Frequency, params: PerturbationParams, nu_range: tuple[float, float],
                  component: int = 1, mode: str = "psi", grid_per_octave: int = 64,
                  max_order: int = 60) -> list[ChangePoint]:
    """Changes of dominant best-approximant harmonic inside ``nu_range``.

    The dominant approximant is tracked on a log grid; each switch is then
    refined by a bracketing root solve on the score difference in log2 ν.
    Approximants that never win on the grid are hidden and produce no change.
    """
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    lo, hi = sorted(nu_range)
    params = params if params.gamma is freq else PerturbationParams(
        params.nu, params.eps, params.c, params.d, freq)
    apx = [a for a in best_approximants(freq, max_order) if a.n >= 1 and a.N > 0]
    # orders whose L lies in a generous window around the profile peak
    x_lo, x_hi = math.log2(lo), math.log2(hi)
    xs = np.linspace(x_hi, x_lo, max(3, int(grid_per_octave * (x_hi - x_lo)) + 1))

    def leader(x):
        nu = 2.0**x
        best, best_val = None, -math.inf
        for a in apx:
            L = float(a.c_s) * nu * a.N * a.N
            if not 1e-4 < L < 1e3:
                continue
            v = approximant_score(a, nu, params, component, mode)
            if v > best_val:
                best, best_val = a, v
        if best is None:
            raise ValueError("no approximant covers this nu; raise max_order")
        return best

    out: list[ChangePoint] = []
    prev_x, prev = xs[0], leader(xs[0])
    for x in xs[1:]:
        cur = leader(x)
        if cur.n != prev.n:
            a, b = prev, cur

            def diff(y, a=a, b=b):
                nu = 2.0**y
                return approximant_score(b, nu, params, component, mode) - \
                    approximant_score(a, nu, params, component, mode)

            fa, fb = diff(prev_x), diff(x)
            if fa * fb > 0:
                # a third approximant won in between; refine the grid step
                mid = (prev_x + x) / 2
                raise NoChangeInRange(f"unresolved switch near log2 nu = {mid:.6f}; raise grid_per_octave")
            y = brentq(diff, x, prev_x, xtol=1e-13, rtol=1e-15)
            nu = 2.0**y
            out.append(ChangePoint(a, b, nu, component, float(a.c_s) * nu * a.N * a.N))
        prev_x, prev = x, cur
    if not out:
        raise NoChangeInRange("no change in range")
    return out


# --------------------------------------------------------------------------
# asymptotics of the change sequence


@dataclass
class ChangeAsymptotics:
    first: list[ChangePoint]
    second: list[ChangePoint]
    ratios: list[float]
    log2_gaps: list[float]
    scaled: list[float]  # ν_j γ^{-2j} for the golden mean, ν_j N_j² otherwise
    limit_constant: float
    differences: list[float]
    coeffs: list[float]


def _fit_intercept(x: Sequence[float], y: Sequence[float], last: int = 6) -> float:
    x = np.asarray(x[-last:], dtype=float)
    y = np.asarray(y[-last:], dtype=float)
    if len(x) < 2:
        return float(y[-1])
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def _fibonacci_index(N: int) -> int:
    # F_1 = 1, F_2 = 2, F_3 = 3, ...
    a, b, j = 1, 2, 1
    while a < N:
        a, b, j = b, a + b, j + 1
    if a != N:
        raise ValueError(f"{N} is not a Fibonacci number")
    return j


def change_asymptotics(freq: Frequency, params: PerturbationParams,
                       nu_range: tuple[float, float], mode: str = "amplitude") -> ChangeAsymptotics:
    """Change sequences of both components with their ratios, gaps and limit constants."""
    first = change_points(freq, params, nu_range, 1, mode)
    second = change_points(freq, params, nu_range, 2, mode)
    by_pair = {(p.from_approx.N, p.to_approx.N): p for p in second}
    if len(first) < 2:
        raise ValueError("insufficient change points")
    # order by decreasing ν
    first.sort(key=lambda p: -p.nu)
    ratios = [b.nu / a.nu for a, b in zip(first, first[1:])]
    gaps = [math.log2(r) for r in ratios]
    is_golden = freq.period() == (1, 1) and freq.quotients(2)[1] == 1
    g = float(freq.value(30))
    if is_golden:
        js = [_fibonacci_index(p.from_approx.N) for p in first]
        scaled = [p.nu * g ** (-2 * j) for p, j in zip(first, js)]
    else:
        scaled = [p.nu * p.from_approx.N ** 2 for p in first]
    limit = _fit_intercept([math.sqrt(p.nu) for p in first], scaled)
    diffs, coeffs = [], []
    for p in first:
        q = by_pair.get((p.from_approx.N, p.to_approx.N))
        if q is None:
            continue
        diffs.append(p.nu - q.nu)
        nu_m = (p.nu + q.nu) / 2
        coeffs.append((p.nu - q.nu) / nu_m**1.5)
    return ChangeAsymptotics(first, second, ratios, gaps, scaled, limit, diffs, coeffs)


# --------------------------------------------------------------------------
# peak prediction from the limits of c_s


def predicted_peak(freq: Frequency, N: int, params: PerturbationParams,
                   max_order: int = 60) -> tuple[float, float]:
    """(log2 ν, peak value) of the harmonic of numerator N using the limit c_s of its residue class."""
    apx = best_approximants(freq, max_order)
    match = [a for a in apx if a.N == N]
    if not match:
        raise ValueError(f"{N} is not a best-approximant numerator")
    per = freq.period()
    limits = c_s_limits(freq)
    cs = limits[match[0].n % per[1]]
    L_M, psi_M = psi1_max(params)
    return math.log2(L_M / (cs * N * N)), psi_M / math.sqrt(cs)
