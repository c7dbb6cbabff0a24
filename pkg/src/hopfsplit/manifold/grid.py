"""Splitting grids over the section torus and comparison with the Melnikov series."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import mpmath
import numba
import numpy as np

from ..melnikov import PerturbationParams, SplittingSeries, build_series, dominant, log_amplitude_sup
from . import kernels as _k
from .dd import WORK_DPS, from_dd, to_dd
from .integrator import (DEFAULT_ORDER, DEFAULT_R2, DEFAULT_TOL, SectionError, State4, StiffnessError,
                         array_to_state, default_t_max, gamma_mp, param_vector, seed_stable,
                         seed_unstable, state_to_array, to_section)
from .spectral import TorusInterpolant, unit_roots

MAX_NEWTON = 25
STABLE_METHODS = ("reversibility", "integrate")


class NewtonError(RuntimeError):
    pass


def _wrap(x: mpmath.mpf) -> mpmath.mpf:
    """Reduce an angle to (-pi, pi]."""
    twopi = 2 * mpmath.pi
    return x - twopi * mpmath.floor((x + mpmath.pi) / twopi)


def _angle_dd(values) -> tuple[np.ndarray, np.ndarray]:
    c = np.array([to_dd(mpmath.cos(v)) for v in values])
    s = np.array([to_dd(mpmath.sin(v)) for v in values])
    return c, s


@dataclass
class ArrivalData:
    """Section images of an equispaced seed torus.

    ``shift_psi`` is the arrival angle minus the seed angle (continuous branch
    near the flight time), ``shift_theta`` is gamma times the signed flight time.
    Both are stored relative to ``ref_psi``/``ref_theta``, the values for the
    unperturbed flight, so the double-double samples keep their full accuracy.
    """

    manifold: str
    ref_psi: mpmath.mpf
    ref_theta: mpmath.mpf
    shift_psi: np.ndarray
    shift_theta: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    steps: int
    elapsed: float


def _set_threads(threads: int | None):
    if threads is None:
        threads = int(os.environ.get("HOPFSPLIT_THREADS", "0") or 0)
    if threads and threads > 0:
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


def seed_arrivals(params: PerturbationParams, n_psi: int, n_theta: int, manifold: str = "unstable",
                  order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, R2_init=DEFAULT_R2,
                  precision: str = "extended", checkpoint: str | None = None,
                  progress=None) -> ArrivalData:
    """Integrate every seed of the fundamental torus to the section.

    With ``checkpoint`` set, finished seed rows are stored in that .npz file
    and skipped when the call is repeated.
    """
    if manifold not in ("unstable", "stable"):
        raise ValueError("manifold must be 'unstable' or 'stable'")
    K = _k.kernels(precision)
    P = param_vector(params)
    seed_fn = seed_unstable if manifold == "unstable" else seed_stable
    direction = 1.0 if manifold == "unstable" else -1.0
    t_max = default_t_max(params, R2_init)
    gam = gamma_mp(params)
    with mpmath.workdps(WORK_DPS):
        t_ref = direction * mpmath.acosh(mpmath.sqrt(2) / mpmath.mpf(R2_init)) / mpmath.mpf(params.nu)
        ref_b = gam * t_ref
        psis = [2 * mpmath.pi * j / n_psi for j in range(n_psi)]
        thetas = [2 * mpmath.pi * k / n_theta for k in range(n_theta)]
        cth, sth = _angle_dd(thetas)

    shape = (n_psi, n_theta, 2)
    out = {name: np.zeros(shape) for name in ("shift_psi", "shift_theta", "F1", "F2")}
    done = np.zeros(n_psi, dtype=bool)
    if checkpoint and os.path.exists(checkpoint):
        saved = np.load(checkpoint)
        if tuple(saved["shape"]) == (n_psi, n_theta) and float(saved["nu"]) == params.nu:
            for name in out:
                out[name][:] = saved[name]
            done[:] = saved["done"]
    steps = 0
    t0 = time.perf_counter()
    for j in range(n_psi):
        if done[j]:
            continue
        base = seed_fn(psis[j], 0, params, R2_init)
        Xb, _ = state_to_array(base, params)
        X = np.repeat(Xb[None], n_theta, axis=0)
        X[:, 4] = cth
        X[:, 5] = sth
        T = np.zeros((n_theta, 2))
        status = np.zeros(n_theta, dtype=np.int64)
        stats = np.zeros((n_theta, 3))
        K.section_batch(X, T, P, order, tol, direction, t_max, 1.0, status, stats)
        bad = np.nonzero(status != _k.OK)[0]
        if bad.size:
            st = int(status[bad[0]])
            cls = StiffnessError if st == _k.STEP_UNDERFLOW else SectionError
            raise cls(st, f"seed ({j}, {int(bad[0])}) of the {manifold} torus")
        steps += int(stats[:, 0].sum())
        with mpmath.workdps(WORK_DPS):
            for k in range(n_theta):
                x1, x2, y1, y2 = (from_dd(X[k, v]) for v in range(4))
                t = from_dd(T[k])
                g3 = (y1**2 + y2**2) / 2
                F1 = x1 * y2 - x2 * y1
                F2 = (x1**2 + x2**2) / 2 - g3 + g3**2
                turn = mpmath.atan2(y2, y1) - psis[j]
                out["shift_psi"][j, k] = to_dd(t - t_ref + _wrap(turn - t))
                out["shift_theta"][j, k] = to_dd(gam * t - ref_b)
                out["F1"][j, k] = to_dd(F1)
                out["F2"][j, k] = to_dd(F2)
        done[j] = True
        if checkpoint:
            np.savez(checkpoint, shape=np.array([n_psi, n_theta]), nu=params.nu, done=done, **out)
        if progress is not None:
            progress(j + 1, n_psi)
    return ArrivalData(manifold, t_ref, ref_b, out["shift_psi"], out["shift_theta"], out["F1"], out["F2"], steps,
                       time.perf_counter() - t0)


@dataclass
class InvertedTorus:
    """Graph values at prescribed section coordinates, plus solver diagnostics."""

    F1: np.ndarray  # (n_psi, n_theta, 2)
    F2: np.ndarray
    seed_psi: list
    seed_theta: list
    iterations: int
    residual: float
    spectral_tail: float


def invert_arrivals(data: ArrivalData, psi_targets, theta_targets, tol: float = 1e-30) -> InvertedTorus:
    """Solve seed + shift(seed) = target on the torus, then read off F1, F2.

    Newton on the trigonometric interpolants of the two shifts.
    """
    n_psi, n_theta = data.F1.shape[:2]
    cN, sN = unit_roots(n_psi)
    roots = (cN, sN) + ((cN, sN) if n_theta == n_psi else unit_roots(n_theta))
    I_a = TorusInterpolant(data.shift_psi, roots)
    I_b = TorusInterpolant(data.shift_theta, roots)
    I_1 = TorusInterpolant(data.F1, roots)
    I_2 = TorusInterpolant(data.F2, roots)
    tail = max(I.tail() for I in (I_1, I_2))

    with mpmath.workdps(WORK_DPS):
        pts = [(mpmath.mpf(p), mpmath.mpf(q)) for p in psi_targets for q in theta_targets]
        mean_a = from_dd(I_a.Cr[0, 0]) + data.ref_psi
        mean_b = from_dd(I_b.Cr[0, 0]) + data.ref_theta
        u = [_wrap(p - mean_a) for p, _ in pts]
        w = [_wrap(q - mean_b) for _, q in pts]
        res = math.inf
        it = 0
        for it in range(1, MAX_NEWTON + 1):
            cu, su = _angle_dd(u)
            cw, sw = _angle_dd(w)
            a, a_u, a_w = I_a(cu, su, cw, sw)
            b, b_u, b_w = I_b(cu, su, cw, sw)
            res = 0.0
            for i, (p, q) in enumerate(pts):
                r1 = _wrap(u[i] + data.ref_psi + from_dd(a[i]) - p)
                r2 = _wrap(w[i] + data.ref_theta + from_dd(b[i]) - q)
                res = max(res, abs(float(r1)), abs(float(r2)))
                j11, j12, j21, j22 = 1 + a_u[i], a_w[i], b_u[i], 1 + b_w[i]
                det = j11 * j22 - j12 * j21
                u[i] = u[i] - (j22 * r1 - j12 * r2) / det
                w[i] = w[i] - (j11 * r2 - j21 * r1) / det
            if res < tol:
                break
        else:
            raise NewtonError(f"torus inversion residual {res:.3e} after {MAX_NEWTON} iterations")
        cu, su = _angle_dd(u)
        cw, sw = _angle_dd(w)
    F1, _, _ = I_1(cu, su, cw, sw)
    F2, _, _ = I_2(cu, su, cw, sw)
    shape = (len(psi_targets), len(theta_targets), 2)
    return InvertedTorus(F1.reshape(shape), F2.reshape(shape), u, w, it, res, tail)


def _dd_sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # elementwise double-double difference via two-sum on the high words
    s = a[..., 0] - b[..., 0]
    bb = s - a[..., 0]
    err = (a[..., 0] - (s - bb)) + (-b[..., 0] - bb)
    lo = err + a[..., 1] - b[..., 1]
    hi = s + lo
    return np.stack([hi, lo - (hi - s)], axis=-1)


@dataclass
class NumericSplittingGrid:
    """Graph values of both manifolds on an equispaced mesh of the section torus.

    Arrays with a trailing axis of length 2 are double-double pairs.
    """

    nu: float
    eps: float
    psi0: np.ndarray
    theta0: np.ndarray
    F1u: np.ndarray
    F2u: np.ndarray
    F1s: np.ndarray
    F2s: np.ndarray
    precision: str = "extended"
    stable_method: str = "reversibility"
    info: dict = field(default_factory=dict)

    @property
    def dF1_dd(self) -> np.ndarray:
        return _dd_sub(self.F1u, self.F1s)

    @property
    def dF2_dd(self) -> np.ndarray:
        return _dd_sub(self.F2u, self.F2s)

    @property
    def dF1(self) -> np.ndarray:
        d = self.dF1_dd
        return d[..., 0] + d[..., 1]

    @property
    def dF2(self) -> np.ndarray:
        d = self.dF2_dd
        return d[..., 0] + d[..., 1]

    def dF(self, component: int) -> np.ndarray:
        return {1: self.dF1, 2: self.dF2}[component]

    @property
    def mesh(self) -> np.ndarray:
        """(n_psi, n_theta, 8): psi0, theta0, F1u, F2u, F1s, F2s, dF1, dF2 (rounded to double)."""
        P, T = np.meshgrid(self.psi0, self.theta0, indexing="ij")
        cols = [P, T] + [a[..., 0] + a[..., 1] for a in (self.F1u, self.F2u, self.F1s, self.F2s)]
        cols += [self.dF1, self.dF2]
        return np.stack(cols, axis=-1)

    def rows(self):
        """Yield (psi0, theta0, F1u, F2u, F1s, F2s, dF1, dF2) with mpf graph values."""
        d1, d2 = self.dF1_dd, self.dF2_dd
        for j, p in enumerate(self.psi0):
            for k, q in enumerate(self.theta0):
                yield (float(p), float(q), from_dd(self.F1u[j, k]), from_dd(self.F2u[j, k]),
                       from_dd(self.F1s[j, k]), from_dd(self.F2s[j, k]),
                       from_dd(d1[j, k]), from_dd(d2[j, k]))


def splitting_grid(params: PerturbationParams, n_psi: int = 64, n_theta: int = 64,
                   precision: str = "extended", order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL,
                   R2_init=DEFAULT_R2, stable: str = "reversibility", threads: int | None = None,
                   checkpoint: str | None = None, progress=None,
                   allow_small_nu: bool = False) -> NumericSplittingGrid:
    """Numerical splitting function on the n_psi x n_theta section mesh.

    Seeds on an equispaced fundamental torus are carried to the section; the
    section coordinates (arrival angle of y, forcing phase) and the graph values
    are interpolated spectrally over the seed torus and inverted by Newton at the
    mesh nodes.  The stable manifold is obtained either from the reversing
    symmetry (x1, x2, y1, y2, t) -> (-x1, x2, y1, -y2, -t), which maps W^u over
    (psi, theta) to W^s over (-psi, -theta), or by integrating mirrored seeds
    backward in time.
    """
    if n_psi < 8 or n_theta < 8:
        raise ValueError("grid sizes must be at least 8")
    if params.nu < 2.0**-7 and not allow_small_nu:
        raise ValueError("nu below 2^-7 exceeds the default precision budget")
    if stable not in STABLE_METHODS:
        raise ValueError(f"stable must be one of {STABLE_METHODS}")
    _set_threads(threads)
    newton_tol = 1e-30 if precision == "extended" else 1e-14
    psi_t = [2 * math.pi * j / n_psi for j in range(n_psi)]
    theta_t = [2 * math.pi * k / n_theta for k in range(n_theta)]
    with mpmath.workdps(WORK_DPS):
        psi_mp = [2 * mpmath.pi * j / n_psi for j in range(n_psi)]
        theta_mp = [2 * mpmath.pi * k / n_theta for k in range(n_theta)]

    ck_u = checkpoint + ".unstable.npz" if checkpoint else None
    arr_u = seed_arrivals(params, n_psi, n_theta, "unstable", order, tol, R2_init, precision, ck_u, progress)
    inv_u = invert_arrivals(arr_u, psi_mp, theta_mp, newton_tol)
    info = {"steps": arr_u.steps, "seconds": arr_u.elapsed, "newton_iterations": inv_u.iterations,
            "newton_residual": inv_u.residual, "spectral_tail": inv_u.spectral_tail,
            "order": order, "tol": tol, "R2_init": float(R2_init), "trajectories": n_psi * n_theta}
    if stable == "reversibility":
        jm = (-np.arange(n_psi)) % n_psi
        km = (-np.arange(n_theta)) % n_theta
        F1s = inv_u.F1[jm][:, km]
        F2s = inv_u.F2[jm][:, km]
    else:
        ck_s = checkpoint + ".stable.npz" if checkpoint else None
        arr_s = seed_arrivals(params, n_psi, n_theta, "stable", order, tol, R2_init, precision, ck_s, progress)
        inv_s = invert_arrivals(arr_s, psi_mp, theta_mp, newton_tol)
        F1s, F2s = inv_s.F1, inv_s.F2
        info["steps"] += arr_s.steps
        info["seconds"] += arr_s.elapsed
        info["trajectories"] *= 2
        info["newton_iterations"] = max(info["newton_iterations"], inv_s.iterations)
        info["newton_residual"] = max(info["newton_residual"], inv_s.residual)
        info["spectral_tail"] = max(info["spectral_tail"], inv_s.spectral_tail)
    return NumericSplittingGrid(params.nu, params.eps, np.array(psi_t), np.array(theta_t),
                                inv_u.F1, inv_u.F2, F1s, F2s, precision, stable, info)


# --------------------------------------------------------------------------
# direct shooting of single nodes


@dataclass(frozen=True)
class ShotNode:
    manifold: str
    seed_psi: mpmath.mpf
    seed_theta: mpmath.mpf
    section: State4
    F1: mpmath.mpf
    F2: mpmath.mpf
    iterations: int
    residual: float


def _section_coords(hit_state: State4, gam) -> tuple:
    with mpmath.workdps(WORK_DPS):
        return mpmath.atan2(hit_state.y2, hit_state.y1), hit_state.theta0 + gam * hit_state.t


def shoot_node(params: PerturbationParams, psi_target, theta_target, manifold: str = "unstable",
               guess: tuple | None = None, order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL,
               R2_init=DEFAULT_R2, precision: str = "extended", fd_step: float = 1e-12,
               residual_tol: float | None = None) -> ShotNode:
    """Newton shooting of one mesh node: find seed angles whose section image has
    the prescribed (arrival angle, forcing phase).  Finite-difference Jacobian."""
    seed_fn = seed_unstable if manifold == "unstable" else seed_stable
    direction = "forward" if manifold == "unstable" else "backward"
    gam = gamma_mp(params)
    if residual_tol is None:
        residual_tol = 1e-28 if precision == "extended" else 1e-13
    with mpmath.workdps(WORK_DPS):
        pt, qt = mpmath.mpf(psi_target), mpmath.mpf(theta_target)

        def image(u, w):
            hit = to_section(seed_fn(u, w, params, R2_init), params, direction, order, tol,
                             precision=precision)
            a, b = _section_coords(hit.state, gam)
            return hit, _wrap(a - pt), _wrap(b - qt)

        if guess is None:
            hit0 = to_section(seed_fn(0, 0, params, R2_init), params, direction, order, tol,
                              precision=precision)
            t0 = hit0.state.t
            guess = (_wrap(pt - t0), _wrap(qt - gam * t0))
        u, w = mpmath.mpf(guess[0]), mpmath.mpf(guess[1])
        h = mpmath.mpf(fd_step)
        for it in range(1, MAX_NEWTON + 1):
            hit, r1, r2 = image(u, w)
            res = max(abs(float(r1)), abs(float(r2)))
            if res < residual_tol:
                x = hit.state
                return ShotNode(manifold, u, w, x, x.G1, x.G2, it, res)
            _, a1, b1 = image(u + h, w)
            _, a2, b2 = image(u, w + h)
            j11, j21 = (a1 - r1) / h, (b1 - r2) / h
            j12, j22 = (a2 - r1) / h, (b2 - r2) / h
            det = j11 * j22 - j12 * j21
            u -= (j22 * r1 - j12 * r2) / det
            w -= (j11 * r2 - j21 * r1) / det
    raise NewtonError(f"shooting residual {res:.3e} after {MAX_NEWTON} iterations")


# --------------------------------------------------------------------------
# analysis of grids


def dominant_mode(values: np.ndarray) -> tuple[int, int]:
    """Harmonic (m1, m2) of the largest Fourier coefficient of a grid, in the
    convention sin(m1 psi - m2 theta) with m1 > 0, or m1 = 0 and m2 > 0."""
    V = np.fft.fft2(np.asarray(values, dtype=float))
    N, M = V.shape
    mag = np.abs(V)
    mag[0, 0] = 0.0
    p, q = np.unravel_index(int(np.argmax(mag)), mag.shape)
    fp = p if p <= N // 2 else p - N
    fq = q if q <= M // 2 else q - M
    m1, m2 = fp, -fq
    if m1 < 0 or (m1 == 0 and m2 < 0):
        m1, m2 = -m1, -m2
    return int(m1), int(m2)


def grid_sup(values: np.ndarray, upsample: int = 4) -> float:
    """sup |values| using band-limited upsampling of the periodic grid."""
    V = np.asarray(values, dtype=float)
    N, M = V.shape
    S = np.fft.fft2(V)
    big = np.zeros((N * upsample, M * upsample), dtype=complex)
    hN, hM = N // 2, M // 2
    big[:hN, :hM] = S[:hN, :hM]
    big[:hN, -hM:] = S[:hN, -hM:]
    big[-hN:, :hM] = S[-hN:, :hM]
    big[-hN:, -hM:] = S[-hN:, -hM:]
    fine = np.fft.ifft2(big).real * upsample * upsample
    return float(max(np.abs(fine).max(), np.abs(V).max()))


@dataclass(frozen=True)
class ComparisonRow:
    component: int
    log_sup_numeric: float
    log_sup_series: float
    scaled_numeric: float  # sqrt(nu) * log(sup|dF| / eps)
    scaled_series: float
    gap: float
    mode_numeric: tuple
    mode_series: tuple


@dataclass(frozen=True)
class MelnikovComparison:
    nu: float
    eps: float
    rows: tuple

    def row(self, component: int) -> ComparisonRow:
        return self.rows[component - 1]

    @property
    def max_gap(self) -> float:
        return max(abs(r.gap) for r in self.rows)


def compare_melnikov(params: PerturbationParams, grid: NumericSplittingGrid,
                     series1: SplittingSeries | None = None,
                     series2: SplittingSeries | None = None) -> MelnikovComparison:
    """Sup-amplitude comparison of the numeric grid against the first-order series."""
    if grid.nu != params.nu or grid.eps != params.eps:
        raise ValueError("grid and params differ")
    series = {1: series1 or build_series(params, 1), 2: series2 or build_series(params, 2)}
    rows = []
    sq = math.sqrt(params.nu)
    for comp in (1, 2):
        s = series[comp]
        if s.params.nu != params.nu:
            raise ValueError("series and params differ")
        ln = math.log(grid_sup(grid.dF(comp)))
        # log sup of eps * sum; log_amplitude_sup excludes eps
        ls = log_amplitude_sup(s) + math.log(params.eps)
        le = math.log(params.eps)
        rows.append(ComparisonRow(comp, ln, ls, sq * (ln - le), sq * (ls - le), sq * (ln - ls),
                                  dominant_mode(grid.dF(comp)), dominant(s)))
    return MelnikovComparison(params.nu, params.eps, tuple(rows))
