"""Independent reference computations shared by several test modules."""

import cmath
import math

from scipy.integrate import quad


def shifted_contour(s: float, nu: float, n: int, odd: bool) -> float:
    """∫ e^{ist} h(t) dt along a line Im t = κ below the first pole of sech.

    Moving the line trades the e^{-sπ/2ν} cancellation of real-axis
    quadrature against the growth of sech^n near the pole.
    """
    x = s * math.pi / (2 * nu)
    k = min(0.8, x / (x + n)) * math.pi / (2 * nu)

    def f(tau):
        z = tau + 1j * k
        v = cmath.exp(1j * s * z) * cmath.cosh(nu * z) ** -n
        return v * cmath.sinh(nu * z) if odd else v

    T = (40 + 30 * n) / (n * nu)
    part = (lambda x: f(x).imag) if odd else (lambda x: f(x).real)
    return quad(part, -T, T, limit=2000, points=[0], epsabs=0, epsrel=1e-13)[0]
