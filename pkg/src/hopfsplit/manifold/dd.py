"""Double-double arithmetic (about 32 significant digits) for numba kernels.

A value is a pair ``(hi, lo)`` of float64 with ``|lo| <= ulp(hi)/2``.
Arrays of such values carry a trailing axis of length 2.  Each arithmetic
policy (``EXTENDED`` or ``DOUBLE``) exposes the same primitive set so the
integrator kernels can be generated once per policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numba
import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


@numba.njit(inline="always")
def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@numba.njit(inline="always")
def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@numba.njit(inline="always")
def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@numba.njit(inline="always")
def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@numba.njit(inline="always")
def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e += t
    s, e = quick_two_sum(s, e)
    e += f
    return quick_two_sum(s, e)


@numba.njit(inline="always")
def dd_sub(ah, al, bh, bl):
    return dd_add(ah, al, -bh, -bl)


@numba.njit(inline="always")
def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e += ah * bl + al * bh
    return quick_two_sum(p, e)


@numba.njit(inline="always")
def dd_mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    e += al * b
    return quick_two_sum(p, e)


@numba.njit(inline="always")
def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul_d(bh, bl, q1)
    rh, rl = dd_sub(ah, al, ph, pl)
    q2 = rh / bh
    ph, pl = dd_mul_d(bh, bl, q2)
    rh, rl = dd_sub(rh, rl, ph, pl)
    q3 = rh / bh
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add(q1, q2, q3, 0.0)


@numba.njit(inline="always")
def dd_fma_acc(acc_h, acc_l, ah, al, bh, bl):
    """acc + a*b with the error terms folded into the low word (sloppy sum)."""
    p, e = two_prod(ah, bh)
    e += ah * bl + al * bh
    s, t = two_sum(acc_h, p)
    return s, acc_l + t + e


# plain-double counterparts with the same signatures


@numba.njit(inline="always")
def d_add(ah, al, bh, bl):
    return ah + bh, 0.0


@numba.njit(inline="always")
def d_sub(ah, al, bh, bl):
    return ah - bh, 0.0


@numba.njit(inline="always")
def d_mul(ah, al, bh, bl):
    return ah * bh, 0.0


@numba.njit(inline="always")
def d_mul_d(ah, al, b):
    return ah * b, 0.0


@numba.njit(inline="always")
def d_div(ah, al, bh, bl):
    return ah / bh, 0.0


@numba.njit(inline="always")
def d_fma_acc(acc_h, acc_l, ah, al, bh, bl):
    return acc_h + ah * bh, 0.0


@numba.njit(inline="always")
def renorm(h, l):
    return quick_two_sum(h, l)


@dataclass(frozen=True)
class Precision:
    name: str
    digits: int
    add: object
    sub: object
    mul: object
    mul_d: object
    div: object
    fma_acc: object


EXTENDED = Precision("extended", 32, dd_add, dd_sub, dd_mul, dd_mul_d, dd_div, dd_fma_acc)
DOUBLE = Precision("double", 16, d_add, d_sub, d_mul, d_mul_d, d_div, d_fma_acc)
PRECISIONS = {"extended": EXTENDED, "double": DOUBLE}


def get_precision(p: "str | Precision") -> Precision:
    if isinstance(p, Precision):
        return p
    try:
        return PRECISIONS[p]
    except KeyError:
        raise ValueError(f"unknown precision {p!r}; choose from {sorted(PRECISIONS)}") from None


# --------------------------------------------------------------------------
# conversions (Python side)

WORK_DPS = 40


def to_dd(x) -> tuple[float, float]:
    """Nearest double-double to a number given as float, str, int or mpf."""
    with mpmath.workdps(WORK_DPS):
        v = mpmath.mpf(x)
        hi = float(v)
        lo = float(v - hi)
    return hi, lo


def from_dd(pair) -> mpmath.mpf:
    with mpmath.workdps(WORK_DPS):
        return mpmath.mpf(float(pair[0])) + mpmath.mpf(float(pair[1]))


def dd_array(values) -> np.ndarray:
    """Array of shape (n, 2) from an iterable of numbers."""
    return np.array([to_dd(v) for v in values], dtype=np.float64).reshape(-1, 2)


def dd_to_mpf_array(arr: np.ndarray) -> list:
    flat = np.asarray(arr).reshape(-1, 2)
    return [from_dd(p) for p in flat]
