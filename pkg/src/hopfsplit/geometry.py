"""Nodal lines of the splitting functions, their changes with ν, and the splitting volume."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .melnikov import PerturbationParams, SplittingSeries, build_series, dominant

TWO_PI = 2 * math.pi


class DegenerateFieldError(ValueError):
    pass


@dataclass
class NodalLineSet:
    component: int
    polylines: list[np.ndarray]  # each (k, 2) array of (psi0, theta0), unwrapped
    nu: float
    closed: list[bool] = field(default_factory=list)

    def windings(self) -> list[tuple[int, int]]:
        """Homology class (turns in ψ0, turns in θ0) of every closed chain."""
        out = []
        for line, cl in zip(self.polylines, self.closed):
            if not cl:
                continue
            delta = line[-1] - line[0]
            out.append((int(round(delta[0] / TWO_PI)), int(round(delta[1] / TWO_PI))))
        return out

    def signature(self) -> tuple:
        """Isotopy-invariant summary: counts of chains per primitive class, up to orientation."""
        counts: Counter = Counter()
        for a, b in self.windings():
            if (a, b) < (0, 0) or (a == 0 and b < 0):
                a, b = -a, -b
            g = math.gcd(a, b)
            key = (a // g, b // g, g) if g else (0, 0, 0)
            counts[key] += 1
        return tuple(sorted(counts.items()))

    def mode_label(self) -> tuple[int, int] | None:
        """Harmonic (m1, m2) whose zero set has this topology, if it is a single family.

        sin(m1 ψ0 - m2 θ0) vanishes on 2·gcd(m1, m2) closed curves of class
        (m2, m1)/gcd, so the family and its chain count determine the label.
        """
        sig = self.signature()
        if len(sig) != 1:
            return None
        (p, q, g), count = sig[0]
        if (p, q) == (0, 0) or (g * count) % 2:
            return None
        k = g * count // 2
        m1, m2 = k * q, k * p
        if m1 < 0 or (m1 == 0 and m2 < 0):
            m1, m2 = -m1, -m2
        return m1, m2

    def wrapped(self) -> list[np.ndarray]:
        return [np.mod(p, TWO_PI) for p in self.polylines]


def sample_series(series: SplittingSeries, resolution: int, offset: float = 0.5) -> np.ndarray:
    """Scaled series values on a resolution² grid, nodes at (k + offset)·2π/resolution."""
    ang = (np.arange(resolution) + offset) * TWO_PI / resolution
    P, T = np.meshgrid(ang, ang, indexing="ij")
    return series.evaluate_scaled(P, T)


def _edge_point(v0, v1, p0, p1):
    t = v0 / (v0 - v1)
    return p0 + t * (p1 - p0)


def marching_squares(values: np.ndarray, offset: float = 0.0) -> tuple[list[np.ndarray], list[bool]]:
    """Zero contours of a doubly periodic sampled field.

    values[i, j] sits at (ψ, θ) = ((i + offset)h, (j + offset)h) with
    h = 2π/n.  Returns unwrapped polylines and whether each one closes.
    """
    values = np.asarray(values, dtype=float)
    n1, n2 = values.shape
    h1, h2 = TWO_PI / n1, TWO_PI / n2
    pos = values > 0

    def vertex(i, j):
        return np.array([(i + offset) * h1, (j + offset) * h2])

    # edge keys: ('h', i, j) joins (i,j)-(i+1,j); ('v', i, j) joins (i,j)-(i,j+1)
    points: dict[tuple, np.ndarray] = {}

    def crossing(key):
        if key in points:
            return key
        kind, i, j = key
        i1, j1 = (i + 1, j) if kind == "h" else (i, j + 1)
        v0, v1 = values[i % n1, j % n2], values[i1 % n1, j1 % n2]
        points[key] = _edge_point(v0, v1, vertex(i, j), vertex(i1, j1))
        return key

    links: dict[tuple, list[tuple]] = {}

    def link(a, b, shift_b):
        # shift_b: translation to add to b's point when walking from a to b
        links.setdefault(a, []).append((b, shift_b))
        links.setdefault(b, []).append((a, -shift_b))

    for i in range(n1):
        for j in range(n2):
            c = [pos[i, j], pos[(i + 1) % n1, j], pos[(i + 1) % n1, (j + 1) % n2], pos[i, (j + 1) % n2]]
            if all(c) or not any(c):
                continue
            # cell edges in order: bottom (h,i,j), right (v,i+1,j), top (h,i,j+1), left (v,i,j)
            raw = [("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)]
            cut = [k for k in range(4) if c[k] != c[(k + 1) % 4]]
            canon, shifts = [], []
            for k in cut:
                kind, a, b = raw[k]
                key = (kind, a % n1, b % n2)
                crossing(key)
                canon.append(key)
                shifts.append(np.array([(a - a % n1) * h1, (b - b % n2) * h2]))
            if len(cut) == 2:
                pairs = [(0, 1)]
            else:
                vc = 0.25 * (values[i, j] + values[(i + 1) % n1, j] + values[(i + 1) % n1, (j + 1) % n2]
                             + values[i, (j + 1) % n2])
                # saddle cell: join the edges that keep the centre's sign region connected
                pairs = [(0, 1), (2, 3)] if (vc > 0) != c[1] else [(0, 3), (1, 2)]
            for a, b in pairs:
                link(canon[a], canon[b], shifts[b] - shifts[a])

    polylines, closed = [], []
    seen: set = set()
    for start in links:
        if start in seen:
            continue
        chain_start = start
        seen.add(start)
        coords = [points[start].copy()]
        prev, cur, offset_vec = None, start, np.zeros(2)
        is_closed = False
        while True:
            options = [(k, s) for k, s in links[cur] if k != prev]
            if prev is not None and len(links[cur]) == 2 and links[cur][0][0] == links[cur][1][0]:
                # both links lead to the same edge (two-cell loop)
                options = [links[cur][1] if links[cur][0][0] == prev else links[cur][0]]
            if not options:
                break
            k, s = options[0]
            offset_vec = offset_vec + s
            if k == chain_start:
                coords.append(points[k] + offset_vec)
                is_closed = True
                break
            if k in seen:
                break
            seen.add(k)
            coords.append(points[k] + offset_vec)
            prev, cur = cur, k
        polylines.append(np.array(coords))
        closed.append(is_closed)
    return polylines, closed


def nodal_lines(field_or_series, component: int | None = None, resolution: int = 256,
                nu: float | None = None) -> NodalLineSet:
    """Zero curves on the torus of a SplittingSeries or of a sampled periodic grid."""
    if isinstance(field_or_series, SplittingSeries):
        values = sample_series(field_or_series, resolution)
        offset = 0.5
        component = field_or_series.component if component is None else component
        nu = field_or_series.params.nu if nu is None else nu
    else:
        values = np.asarray(field_or_series, dtype=float)
        offset = 0.0
    if not np.any(values):
        raise DegenerateFieldError("identically-zero field")
    lines, closed = marching_squares(values, offset)
    return NodalLineSet(component or 0, lines, float("nan") if nu is None else nu, closed)


# --------------------------------------------------------------------------
# changes with ν


@dataclass(frozen=True)
class TopologyChange:
    log2_nu_above: float
    log2_nu_below: float
    old: object
    new: object

    @property
    def nu1(self) -> float:
        return 2.0**self.log2_nu_above

    @property
    def nu2(self) -> float:
        return 2.0**self.log2_nu_below


def _classifier(criterion: str, component: int, params: PerturbationParams,
                resolution: int) -> Callable[[float], object]:
    def label(x):
        s = build_series(params.with_nu(2.0**x), component)
        if criterion == "dominant":
            return dominant(s)
        if criterion == "nodal":
            nl = nodal_lines(s, resolution=resolution)
            return nl.mode_label() or nl.signature()
        raise ValueError(f"unknown criterion {criterion!r}")

    return label


def topology_change_scan(params_range: tuple[float, float], component: int,
                         log2_step: float = 1e-3, params: PerturbationParams | None = None,
                         criterion: str = "nodal", coarse_step: float = 0.02,
                         resolution: int = 128, keep_transients: bool = False) -> list[TopologyChange]:
    """Brackets [ν1, ν2] one log2 step wide where the label of the series changes.

    ``params_range`` holds the log2 ν end points.  A coarse pass locates the
    changes, which are then bisected down to the fine grid of width
    ``log2_step`` anchored at the upper end of the range.

    ``criterion="nodal"`` labels each ν by the homology of the nodal lines,
    read back as the harmonic that has that zero set; ``"dominant"`` uses the
    largest term.  The two differ near crossings where a third harmonic is
    large enough to keep the old topology alive after the amplitudes cross.
    """
    params = params or PerturbationParams(0.5)
    if criterion not in ("dominant", "nodal"):
        raise ValueError(f"unknown criterion {criterion!r}")
    hi, lo = max(params_range), min(params_range)
    label = _classifier(criterion, component, params, resolution)
    nsteps = int(round((hi - lo) / log2_step))
    stride = max(1, int(round(coarse_step / log2_step)))
    cache: dict[int, object] = {}

    def lab(k):
        if k not in cache:
            cache[k] = label(hi - k * log2_step)
        return cache[k]

    out: list[TopologyChange] = []
    marks = list(range(0, nsteps, stride)) + [nsteps]
    for a, b in zip(marks, marks[1:]):
        if lab(a) == lab(b):
            continue
        # isolate every change inside [a, b] by recursive bisection
        stack = [(a, b)]
        found = []
        while stack:
            u, v = stack.pop()
            if lab(u) == lab(v):
                continue
            if v - u == 1:
                found.append(u)
                continue
            m = (u + v) // 2
            stack.append((m, v))
            stack.append((u, m))
        for u in sorted(found):
            out.append(TopologyChange(round(hi - u * log2_step, 12), round(hi - (u + 1) * log2_step, 12),
                                      lab(u), lab(u + 1)))
    return out if keep_transients else _merge_transients(out, lab(0))


def _is_mode(label) -> bool:
    return isinstance(label, tuple) and len(label) == 2 and all(isinstance(v, int) for v in label)


def _merge_transients(changes: list[TopologyChange], first) -> list[TopologyChange]:
    # short-lived mixed topologies (extra contractible islands) between two
    # single-family states are folded into one change, bracketed where the
    # new family appears
    merged = []
    current = first
    for ch in changes:
        if not _is_mode(ch.new) or ch.new == current:
            continue
        merged.append(TopologyChange(ch.log2_nu_above, ch.log2_nu_below, current, ch.new))
        current = ch.new
    return merged


# --------------------------------------------------------------------------
# splitting volume


@dataclass(frozen=True)
class VolumeSample:
    nu: float
    V: float
    a1: float
    a2: float
    b1: float
    b2: float
    log_abs_V: float = math.nan
    sign: int = 0


def _partials(series: SplittingSeries, psi0: float, theta0: float) -> tuple[float, float, float]:
    """(ψ-derivative, θ-derivative, common log scale) of the series divided by eps·e^scale."""
    m1, m2, w = series.scaled_coefficients()
    cosv = np.cos(m1 * psi0 - m2 * theta0)
    return float(np.sum(w * m1 * cosv)), float(-np.sum(w * m2 * cosv)), series.log_max


def _newton_common_zero(s1, s2, x0=(0.0, 0.0), tol=1e-14, max_iter=50):
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        f = np.array([float(s1.evaluate_scaled(*x)), float(s2.evaluate_scaled(*x))])
        if np.max(np.abs(f)) < tol:
            return x
        a1, b1, _ = _partials(s1, *x)
        a2, b2, _ = _partials(s2, *x)
        J = np.array([[a1, b1], [a2, b2]])
        x = x - np.linalg.solve(J, f)
    raise RuntimeError("Newton failed to locate a homoclinic point")


def splitting_volume(series1: SplittingSeries, series2: SplittingSeries,
                     psi0: float = 0.0, theta0: float = 0.0) -> VolumeSample:
    """V = a1 b2 - b1 a2 from the term-by-term derivatives at a common zero."""
    f1 = float(series1.evaluate_scaled(psi0, theta0))
    f2 = float(series2.evaluate_scaled(psi0, theta0))
    if max(abs(f1), abs(f2)) > 1e-12:
        psi0, theta0 = _newton_common_zero(series1, series2, (psi0, theta0))
    a1s, b1s, l1 = _partials(series1, psi0, theta0)
    a2s, b2s, l2 = _partials(series2, psi0, theta0)
    det_scaled = a1s * b2s - b1s * a2s
    eps1, eps2 = series1.params.eps, series2.params.eps
    log_scale = l1 + l2 + math.log(eps1) + math.log(eps2)
    sign = int(np.sign(det_scaled))
    log_abs = math.log(abs(det_scaled)) + log_scale if det_scaled else -math.inf
    s1, s2 = eps1 * math.exp(l1), eps2 * math.exp(l2)
    a1, b1, a2, b2 = a1s * s1, b1s * s1, a2s * s2, b2s * s2
    # rescaling after the determinant keeps exact cancellations exact
    return VolumeSample(series1.params.nu, det_scaled * (s1 * s2), a1, a2, b1, b2, log_abs, sign)


SIGN_CONVENTIONS = ("signed", "abs_s")


def _apply_convention(series: SplittingSeries, convention: str) -> SplittingSeries:
    if convention == "signed" or series.component == 1:
        return series
    if convention == "abs_s":
        # every second-component term written with |s|, i.e. one common sign
        return replace(series, terms=[replace(t, sign=-1) for t in series.terms])
    raise ValueError(f"unknown sign convention {convention!r}")


def volume_at(log2_nu: float, params: PerturbationParams | None = None,
              sign_convention: str = "signed") -> VolumeSample:
    params = (params or PerturbationParams(0.5)).with_nu(2.0**log2_nu)
    s1 = build_series(params, 1)
    s2 = _apply_convention(build_series(params, 2), sign_convention)
    return splitting_volume(s1, s2)


def volume_scan(log2_nu: Sequence[float], params: PerturbationParams | None = None,
                sign_convention: str = "signed") -> list[VolumeSample]:
    """V along a list of log2 ν values.

    ``sign_convention="abs_s"`` gives every second-component harmonic the
    same sign, as if each small divisor s were replaced by |s|.  With the
    true signs, sign(s) alternates between consecutive approximants.
    """
    return [volume_at(x, params, sign_convention) for x in log2_nu]


def volume_sign_changes(samples: Sequence[VolumeSample]) -> list[tuple[float, float]]:
    out = []
    for a, b in zip(samples, samples[1:]):
        if a.sign and b.sign and a.sign != b.sign:
            out.append((math.log2(a.nu), math.log2(b.nu)))
    return out


@dataclass(frozen=True)
class VolumeFeatures:
    zeros: list[float]  # log2 ν of sign changes
    minima: list[float]  # log2 ν of local minima of √ν log|V|, zeros excluded


def volume_features(lo: float, hi: float, params: PerturbationParams | None = None,
                    sign_convention: str = "signed", step: float = 0.01,
                    tol: float = 1e-4) -> VolumeFeatures:
    """Sign changes and interior minima of the scaled log|V| over [lo, hi] in log2 ν."""
    xs = np.arange(hi, lo - step / 2, -step)
    samples = volume_scan(xs, params, sign_convention)
    zeros = []
    for k in range(len(xs) - 1):
        if samples[k].sign * samples[k + 1].sign < 0:
            a, b, sa = xs[k], xs[k + 1], samples[k].sign
            while a - b > tol:
                m = (a + b) / 2
                if volume_at(m, params, sign_convention).sign == sa:
                    a = m
                else:
                    b = m
            zeros.append((a + b) / 2)

    def scaled(x):
        v = volume_at(x, params, sign_convention)
        return math.sqrt(2.0**x) * v.log_abs_V

    vals = [math.sqrt(s.nu) * s.log_abs_V for s in samples]
    minima = []
    for k in range(1, len(xs) - 1):
        if vals[k] < vals[k - 1] and vals[k] < vals[k + 1]:
            if any(abs(z - xs[k]) < 2 * step for z in zeros):
                continue
            res = minimize_scalar(scaled, bracket=(xs[k + 1], xs[k], xs[k - 1]), tol=1e-8)
            minima.append(float(res.x))
    return VolumeFeatures(zeros, minima)
