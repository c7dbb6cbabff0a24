"""Trigonometric interpolation on an equispaced torus grid in double-double."""

from __future__ import annotations

import mpmath
import numba
import numpy as np

from .dd import WORK_DPS, dd_add, dd_fma_acc, dd_mul, dd_mul_d, quick_two_sum, to_dd


def unit_roots(n: int) -> tuple[np.ndarray, np.ndarray]:
    """cos and sin of 2*pi*j/n, j < n, as double-double arrays."""
    with mpmath.workdps(WORK_DPS):
        ang = [2 * mpmath.pi * j / n for j in range(n)]
        c = np.array([to_dd(mpmath.cos(a)) for a in ang])
        s = np.array([to_dd(mpmath.sin(a)) for a in ang])
    return c, s


@numba.njit
def _dft2(V, cN, sN, cM, sM):
    """C[p, q] = mean over the grid of V * exp(-i (p psi_j + q theta_k)).

    Returns real and imaginary parts, each (N, M, 2).
    """
    N, M = V.shape[0], V.shape[1]
    Gr = np.zeros((N, M, 2))
    Gi = np.zeros((N, M, 2))
    for j in range(N):
        for q in range(M):
            rh = rl = ih = il = 0.0
            for k in range(M):
                r = (q * k) % M
                rh, rl = dd_fma_acc(rh, rl, V[j, k, 0], V[j, k, 1], cM[r, 0], cM[r, 1])
                ih, il = dd_fma_acc(ih, il, -V[j, k, 0], -V[j, k, 1], sM[r, 0], sM[r, 1])
            Gr[j, q, 0], Gr[j, q, 1] = quick_two_sum(rh, rl)
            Gi[j, q, 0], Gi[j, q, 1] = quick_two_sum(ih, il)
    Cr = np.zeros((N, M, 2))
    Ci = np.zeros((N, M, 2))
    scale = 1.0 / (N * M)
    for p in range(N):
        for q in range(M):
            rh = rl = ih = il = 0.0
            for j in range(N):
                r = (p * j) % N
                # (Gr + i Gi)(c - i s)
                rh, rl = dd_fma_acc(rh, rl, Gr[j, q, 0], Gr[j, q, 1], cN[r, 0], cN[r, 1])
                rh, rl = dd_fma_acc(rh, rl, Gi[j, q, 0], Gi[j, q, 1], sN[r, 0], sN[r, 1])
                ih, il = dd_fma_acc(ih, il, Gi[j, q, 0], Gi[j, q, 1], cN[r, 0], cN[r, 1])
                ih, il = dd_fma_acc(ih, il, -Gr[j, q, 0], -Gr[j, q, 1], sN[r, 0], sN[r, 1])
            rh, rl = quick_two_sum(rh, rl)
            ih, il = quick_two_sum(ih, il)
            Cr[p, q, 0], Cr[p, q, 1] = dd_mul_d(rh, rl, scale)
            Ci[p, q, 0], Ci[p, q, 1] = dd_mul_d(ih, il, scale)
    return Cr, Ci


@numba.njit(inline="always")
def _cmul(ar, al_, ai, ail, br, bl, bi, bil):
    rr_h, rr_l = dd_mul(ar, al_, br, bl)
    ii_h, ii_l = dd_mul(ai, ail, bi, bil)
    ri_h, ri_l = dd_mul(ar, al_, bi, bil)
    ir_h, ir_l = dd_mul(ai, ail, br, bl)
    re = dd_add(rr_h, rr_l, -ii_h, -ii_l)
    im = dd_add(ri_h, ri_l, ir_h, ir_l)
    return re[0], re[1], im[0], im[1]


@numba.njit
def _powers(c, s, n, out):
    """out[idx] = exp(i f theta) for the signed frequency f of index idx (Nyquist left zero)."""
    half = n // 2
    out[:] = 0.0
    out[0, 0, 0] = 1.0
    rh, rl, ih, il = 1.0, 0.0, 0.0, 0.0
    for f in range(1, half):
        rh, rl, ih, il = _cmul(rh, rl, ih, il, c[0], c[1], s[0], s[1])
        out[f, 0, 0], out[f, 0, 1] = rh, rl
        out[f, 1, 0], out[f, 1, 1] = ih, il
        out[n - f, 0, 0], out[n - f, 0, 1] = rh, rl
        out[n - f, 1, 0], out[n - f, 1, 1] = -ih, -il


@numba.njit
def _evaluate(Cr, Ci, cu, su, cw, sw, val, du, dw):
    """Interpolant value (double-double) and partial derivatives (double) at points."""
    N, M = Cr.shape[0], Cr.shape[1]
    Eu = np.zeros((N, 2, 2))
    Ew = np.zeros((M, 2, 2))
    for i in range(cu.shape[0]):
        _powers(cu[i], su[i], N, Eu)
        _powers(cw[i], sw[i], M, Ew)
        vh = vl = 0.0
        dsum_u = 0.0
        dsum_w = 0.0
        for p in range(N):
            fp = p if p < N // 2 else p - N
            if 2 * p == N:
                continue
            gr_h = gr_l = gi_h = gi_l = 0.0
            hr = 0.0
            hi = 0.0
            for q in range(M):
                if 2 * q == M:
                    continue
                fq = q if q < M // 2 else q - M
                # (Cr + i Ci)(Er + i Ei)
                gr_h, gr_l = dd_fma_acc(gr_h, gr_l, Cr[p, q, 0], Cr[p, q, 1], Ew[q, 0, 0], Ew[q, 0, 1])
                gr_h, gr_l = dd_fma_acc(gr_h, gr_l, -Ci[p, q, 0], -Ci[p, q, 1], Ew[q, 1, 0], Ew[q, 1, 1])
                gi_h, gi_l = dd_fma_acc(gi_h, gi_l, Cr[p, q, 0], Cr[p, q, 1], Ew[q, 1, 0], Ew[q, 1, 1])
                gi_h, gi_l = dd_fma_acc(gi_h, gi_l, Ci[p, q, 0], Ci[p, q, 1], Ew[q, 0, 0], Ew[q, 0, 1])
                er = Cr[p, q, 0] * Ew[q, 0, 0] - Ci[p, q, 0] * Ew[q, 1, 0]
                ei = Cr[p, q, 0] * Ew[q, 1, 0] + Ci[p, q, 0] * Ew[q, 0, 0]
                # d/dw multiplies by i fq
                hr += -fq * ei
                hi += fq * er
            gr_h, gr_l = quick_two_sum(gr_h, gr_l)
            gi_h, gi_l = quick_two_sum(gi_h, gi_l)
            # real part of G * Eu[p]
            vh, vl = dd_fma_acc(vh, vl, gr_h, gr_l, Eu[p, 0, 0], Eu[p, 0, 1])
            vh, vl = dd_fma_acc(vh, vl, -gi_h, -gi_l, Eu[p, 1, 0], Eu[p, 1, 1])
            re_g_e = gr_h * Eu[p, 0, 0] - gi_h * Eu[p, 1, 0]
            im_g_e = gr_h * Eu[p, 1, 0] + gi_h * Eu[p, 0, 0]
            dsum_u += -fp * im_g_e
            dsum_w += hr * Eu[p, 0, 0] - hi * Eu[p, 1, 0]
        val[i, 0], val[i, 1] = quick_two_sum(vh, vl)
        du[i] = dsum_u
        dw[i] = dsum_w


class TorusInterpolant:
    """Trigonometric interpolant of samples V[j, k] at (2 pi j/N, 2 pi k/M).

    Nyquist modes are dropped, so the samples are reproduced up to the size
    of those modes (negligible for the analytic fields used here).
    """

    def __init__(self, values_dd: np.ndarray, roots=None):
        V = np.ascontiguousarray(values_dd, dtype=np.float64)
        if V.ndim != 3 or V.shape[2] != 2:
            raise ValueError("expected an (N, M, 2) double-double array")
        N, M = V.shape[:2]
        if roots is None:
            cN, sN = unit_roots(N)
            cM, sM = (cN, sN) if M == N else unit_roots(M)
        else:
            cN, sN, cM, sM = roots
        self.shape = (N, M)
        self.Cr, self.Ci = _dft2(V, cN, sN, cM, sM)

    def tail(self, frac: float = 0.375) -> float:
        """Largest coefficient modulus with |p| >= frac*N or |q| >= frac*M."""
        N, M = self.shape
        fp = np.abs(np.fft.fftfreq(N, 1.0 / N))
        fq = np.abs(np.fft.fftfreq(M, 1.0 / M))
        mask = (fp[:, None] >= frac * N) | (fq[None, :] >= frac * M)
        mag = np.hypot(self.Cr[..., 0], self.Ci[..., 0])
        return float(mag[mask].max()) if mask.any() else 0.0

    def __call__(self, cu, su, cw, sw):
        """Evaluate at points given by cos/sin of both angles (double-double arrays)."""
        n = cu.shape[0]
        val = np.zeros((n, 2))
        du = np.zeros(n)
        dw = np.zeros(n)
        _evaluate(self.Cr, self.Ci, np.ascontiguousarray(cu), np.ascontiguousarray(su),
                  np.ascontiguousarray(cw), np.ascontiguousarray(sw), val, du, dw)
        return val, du, dw
