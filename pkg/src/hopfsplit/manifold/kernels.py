"""Numba kernels: Taylor jets of the forced vector field, stepping and section events.

State vector layout (each entry a double-double pair):
``0 x1, 1 x2, 2 y1, 3 y2, 4 cos(theta), 5 sin(theta)``.  The forcing phase is
carried through its cosine and sine so no transcendental functions are needed
inside the kernels.  Parameter vector: ``nu, eps, c, d, gamma``.
"""

from __future__ import annotations

from types import SimpleNamespace

import numba
import numpy as np

from .dd import Precision, get_precision, quick_two_sum

NVAR = 6

# integrate_to_section status codes
OK = 0
TIME_LIMIT = 1
STEP_UNDERFLOW = 2
GRAZING = 3
EVENT_NEWTON = 4
STATUS_TEXT = {
    OK: "ok",
    TIME_LIMIT: "no section crossing before t_max",
    STEP_UNDERFLOW: "step size underflow (stiffness)",
    GRAZING: "grazing or non-maximal section crossing",
    EVENT_NEWTON: "event Newton iteration did not converge",
}

MIN_STEP = 1e-20

_CACHE: dict[str, SimpleNamespace] = {}


def kernels(precision: "str | Precision" = "extended") -> SimpleNamespace:
    prec = get_precision(precision)
    if prec.name not in _CACHE:
        _CACHE[prec.name] = _make_kernels(prec)
    return _CACHE[prec.name]


def _make_kernels(prec: Precision) -> SimpleNamespace:
    add, sub, mul, mul_d, div, fma = prec.add, prec.sub, prec.mul, prec.mul_d, prec.div, prec.fma_acc
    event_tol = 1e-28 if prec.name == "extended" else 1e-15

    @numba.njit(inline="always")
    def conv(a, b, k):
        """k-th coefficient of the product of two jets."""
        h = 0.0
        lo = 0.0
        for j in range(k + 1):
            h, lo = fma(h, lo, a[j, 0], a[j, 1], b[k - j, 0], b[k - j, 1])
        return quick_two_sum(h, lo)

    @numba.njit(inline="always")
    def conv2(a, b, c, e, k):
        """k-th coefficient of a*b + c*e."""
        h = 0.0
        lo = 0.0
        for j in range(k + 1):
            h, lo = fma(h, lo, a[j, 0], a[j, 1], b[k - j, 0], b[k - j, 1])
            h, lo = fma(h, lo, c[j, 0], c[j, 1], e[k - j, 0], e[k - j, 1])
        return quick_two_sum(h, lo)

    @numba.njit(inline="always")
    def recip(a, r, k, base_h, base_l):
        """k-th coefficient of 1/(base - a) given r = previous coefficients."""
        h = 1.0 if k == 0 else 0.0
        lo = 0.0
        for j in range(1, k + 1):
            h, lo = fma(h, lo, a[j, 0], a[j, 1], r[k - j, 0], r[k - j, 1])
        h, lo = quick_two_sum(h, lo)
        return div(h, lo, base_h, base_l)

    @numba.njit
    def jet(X0, P, order, J, W):
        """Fill J[var, k] with the Taylor coefficients of the solution, k = 0..order.

        W is scratch space of shape (11, order + 1, 2).
        """
        nu_h, nu_l = P[0, 0], P[0, 1]
        ep_h, ep_l = P[1, 0], P[1, 1]
        c_h, c_l = P[2, 0], P[2, 1]
        d_h, d_l = P[3, 0], P[3, 1]
        g_h, g_l = P[4, 0], P[4, 1]
        for v in range(NVAR):
            J[v, 0, 0] = X0[v, 0]
            J[v, 0, 1] = X0[v, 1]
        x1 = J[0]
        x2 = J[1]
        y1 = J[2]
        y2 = J[3]
        C = J[4]
        S = J[5]
        rm = W[0]
        A = W[1]
        B = W[2]
        u = W[3]
        z = W[4]
        p2 = W[5]
        p4 = W[6]
        p4u = W[7]
        gp = W[8]
        f = W[9]
        fg = W[10]
        dmy_h, dmy_l = sub(d_h, d_l, y1[0, 0], y1[0, 1])
        cmc_h, cmc_l = sub(c_h, c_l, C[0, 0], C[0, 1])
        for k in range(order):
            h, lo = conv2(y1, y1, y2, y2, k)
            if k == 0:
                h, lo = add(h, lo, -1.0, 0.0)
            rm[k, 0] = h
            rm[k, 1] = lo
            A[k, 0], A[k, 1] = conv(rm, y1, k)
            B[k, 0], B[k, 1] = conv(rm, y2, k)
            u[k, 0], u[k, 1] = recip(y1, u, k, dmy_h, dmy_l)
            h, lo = mul(d_h, d_l, u[k, 0], u[k, 1])
            if k == 0:
                h, lo = add(h, lo, 4.0, 0.0)
            z[k, 0] = h
            z[k, 1] = lo
            p2[k, 0], p2[k, 1] = conv(y1, y1, k)
            p4[k, 0], p4[k, 1] = conv(p2, p2, k)
            p4u[k, 0], p4u[k, 1] = conv(p4, u, k)
            gp[k, 0], gp[k, 1] = conv(p4u, z, k)
            f[k, 0], f[k, 1] = recip(C, f, k, cmc_h, cmc_l)
            fg[k, 0], fg[k, 1] = conv(f, gp, k)

            kk = k + 1.0
            # x1' = -x2 + nu*A - eps*f*g'
            h, lo = mul(nu_h, nu_l, A[k, 0], A[k, 1])
            h, lo = sub(h, lo, x2[k, 0], x2[k, 1])
            t_h, t_l = mul(ep_h, ep_l, fg[k, 0], fg[k, 1])
            h, lo = sub(h, lo, t_h, t_l)
            x1[k + 1, 0], x1[k + 1, 1] = div(h, lo, kk, 0.0)
            # x2' = x1 + nu*B
            h, lo = mul(nu_h, nu_l, B[k, 0], B[k, 1])
            h, lo = add(h, lo, x1[k, 0], x1[k, 1])
            x2[k + 1, 0], x2[k + 1, 1] = div(h, lo, kk, 0.0)
            # y1' = -y2 - nu*x1
            h, lo = mul(nu_h, nu_l, x1[k, 0], x1[k, 1])
            h, lo = add(h, lo, y2[k, 0], y2[k, 1])
            y1[k + 1, 0], y1[k + 1, 1] = div(-h, -lo, kk, 0.0)
            # y2' = y1 - nu*x2
            h, lo = mul(nu_h, nu_l, x2[k, 0], x2[k, 1])
            h, lo = sub(y1[k, 0], y1[k, 1], h, lo)
            y2[k + 1, 0], y2[k + 1, 1] = div(h, lo, kk, 0.0)
            # cos' = -gamma sin, sin' = gamma cos
            h, lo = mul(g_h, g_l, S[k, 0], S[k, 1])
            C[k + 1, 0], C[k + 1, 1] = div(-h, -lo, kk, 0.0)
            h, lo = mul(g_h, g_l, C[k, 0], C[k, 1])
            S[k + 1, 0], S[k + 1, 1] = div(h, lo, kk, 0.0)

    @numba.njit
    def step_size(J, order, tol, h_max):
        scale = 0.0
        for v in range(4):
            scale = max(scale, abs(J[v, 0, 0]))
        if scale == 0.0:
            scale = 1.0
        h = h_max
        for k in (order - 1, order):
            rho = 0.0
            for v in range(4):
                rho = max(rho, abs(J[v, k, 0]) / scale)
            for v in range(4, NVAR):
                rho = max(rho, abs(J[v, k, 0]))
            if rho > 0.0:
                h = min(h, (tol / rho) ** (1.0 / k))
        return h

    @numba.njit(inline="always")
    def horner_d(J, v, order, h):
        a_h = J[v, order, 0]
        a_l = J[v, order, 1]
        for k in range(order - 1, -1, -1):
            a_h, a_l = mul_d(a_h, a_l, h)
            a_h, a_l = add(a_h, a_l, J[v, k, 0], J[v, k, 1])
        return a_h, a_l

    @numba.njit(inline="always")
    def horner(c, order, th, tl):
        a_h = c[order, 0]
        a_l = c[order, 1]
        for k in range(order - 1, -1, -1):
            a_h, a_l = mul(a_h, a_l, th, tl)
            a_h, a_l = add(a_h, a_l, c[k, 0], c[k, 1])
        return a_h, a_l

    @numba.njit(inline="always")
    def horner_deriv(c, order, th, tl):
        a_h = c[order, 0] * order
        a_l = c[order, 1] * order
        for k in range(order - 1, 0, -1):
            a_h, a_l = mul(a_h, a_l, th, tl)
            b_h, b_l = mul_d(c[k, 0], c[k, 1], float(k))
            a_h, a_l = add(a_h, a_l, b_h, b_l)
        return a_h, a_l

    @numba.njit
    def taylor_step(X, t, P, order, tol, direction, h_max, J, W):
        """Advance X, t in place by one step; returns the signed step."""
        jet(X, P, order, J, W)
        h = step_size(J, order, tol, h_max) * direction
        for v in range(NVAR):
            X[v, 0], X[v, 1] = horner_d(J, v, order, h)
        t[0], t[1] = add(t[0], t[1], h, 0.0)
        return h

    @numba.njit
    def integrate_for(X, t, P, order, tol, duration, h_max):
        """Integrate over a signed duration (last step clipped).  Returns steps."""
        J = np.zeros((NVAR, order + 1, 2))
        W = np.zeros((11, order + 1, 2))
        direction = 1.0 if duration >= 0 else -1.0
        # remaining time is kept as a double-double so the clipped last step
        # lands on t + duration to full precision
        rem_h, rem_l = abs(duration), 0.0
        n = 0
        while rem_h > 0.0:
            jet(X, P, order, J, W)
            h = step_size(J, order, tol, h_max)
            if h < MIN_STEP:
                return -1
            if h >= rem_h:
                th, tl = rem_h * direction, rem_l * direction
                for v in range(NVAR):
                    X[v, 0], X[v, 1] = horner(J[v], order, th, tl)
                t[0], t[1] = add(t[0], t[1], th, tl)
                return n + 1
            hs = h * direction
            for v in range(NVAR):
                X[v, 0], X[v, 1] = horner_d(J, v, order, hs)
            t[0], t[1] = add(t[0], t[1], hs, 0.0)
            rem_h, rem_l = sub(rem_h, rem_l, h, 0.0)
            n += 1
        return n

    @numba.njit
    def event_jet(J, order, E):
        x1 = J[0]
        x2 = J[1]
        y1 = J[2]
        y2 = J[3]
        for k in range(order + 1):
            E[k, 0], E[k, 1] = conv2(x1, y1, x2, y2, k)

    @numba.njit
    def to_section(X, t, P, order, tol, direction, t_max, h_max, out_stats):
        """Integrate until x1*y1 + x2*y2 = 0 with |y| maximal.

        X and t are updated in place.  out_stats receives
        (steps, event residual, event slope).  Returns a status code.
        """
        J = np.zeros((NVAR, order + 1, 2))
        W = np.zeros((11, order + 1, 2))
        E = np.zeros((order + 1, 2))
        elapsed = 0.0
        n = 0
        while True:
            jet(X, P, order, J, W)
            h = step_size(J, order, tol, h_max)
            if h < MIN_STEP:
                out_stats[0] = n
                return STEP_UNDERFLOW
            hs = h * direction
            event_jet(J, order, E)
            s0 = E[0, 0]
            s1, _ = horner(E, order, hs, 0.0)
            if s0 == 0.0:
                crossed = n > 0
            else:
                crossed = s1 == 0.0 or (s0 < 0.0) != (s1 < 0.0)
            if crossed:
                # Newton on the event polynomial
                if s0 == 0.0:
                    th, tl = 0.0, 0.0
                else:
                    th, tl = hs * s0 / (s0 - s1), 0.0
                res = 1.0
                conv_ok = False
                for it in range(60):
                    eh, el = horner(E, order, th, tl)
                    dh, dl = horner_deriv(E, order, th, tl)
                    res = abs(eh)
                    if res < event_tol:
                        conv_ok = True
                        break
                    qh, ql = div(eh, el, dh, dl)
                    th, tl = sub(th, tl, qh, ql)
                if not conv_ok:
                    eh, el = horner(E, order, th, tl)
                    res = abs(eh)
                    conv_ok = res < event_tol
                dh, dl = horner_deriv(E, order, th, tl)
                out_stats[0] = n + 1
                out_stats[1] = res
                out_stats[2] = dh
                for v in range(NVAR):
                    X[v, 0], X[v, 1] = horner(J[v], order, th, tl)
                t[0], t[1] = add(t[0], t[1], th, tl)
                if not conv_ok:
                    return EVENT_NEWTON
                # maximum of |y|^2 requires the event function to increase
                if dh <= 1e-12:
                    return GRAZING
                return OK
            for v in range(NVAR):
                X[v, 0], X[v, 1] = horner_d(J, v, order, hs)
            t[0], t[1] = add(t[0], t[1], hs, 0.0)
            elapsed += h
            n += 1
            if elapsed > t_max:
                out_stats[0] = n
                return TIME_LIMIT

    @numba.njit
    def section_batch(X, T, P, order, tol, direction, t_max, h_max, status, stats):
        for i in range(X.shape[0]):
            status[i] = to_section(X[i], T[i], P, order, tol, direction, t_max, h_max, stats[i])

    return SimpleNamespace(
        precision=prec,
        jet=jet,
        step_size=step_size,
        taylor_step=taylor_step,
        integrate_for=integrate_for,
        event_jet=event_jet,
        to_section=to_section,
        section_batch=section_batch,
    )
