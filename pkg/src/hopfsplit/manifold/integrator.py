"""Extended-precision Taylor integration of the forced system and section events."""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from ..melnikov import PerturbationParams
from . import kernels as _k
from .dd import WORK_DPS, from_dd, to_dd

DEFAULT_ORDER = 20
DEFAULT_TOL = 1e-30
DEFAULT_R2 = 1e-12


class IntegrationError(RuntimeError):
    """A trajectory could not be completed (see ``status``)."""

    def __init__(self, status: int, detail: str = ""):
        self.status = status
        msg = _k.STATUS_TEXT.get(status, f"status {status}")
        super().__init__(f"{msg}{': ' + detail if detail else ''}")


class StiffnessError(IntegrationError):
    pass


class SectionError(IntegrationError):
    pass


def _mp(x) -> mpmath.mpf:
    # floats go through their shortest repr so 1e-3 means one thousandth
    if isinstance(x, float):
        return mpmath.mpf(repr(x))
    return mpmath.mpf(x)


@dataclass(frozen=True)
class State4:
    """Phase-space point of the forced system at time ``t``.

    The forcing angle at time ``t`` is ``theta0 + gamma * t``.
    """

    x1: mpmath.mpf
    x2: mpmath.mpf
    y1: mpmath.mpf
    y2: mpmath.mpf
    t: mpmath.mpf = mpmath.mpf(0)
    theta0: mpmath.mpf = mpmath.mpf(0)

    def __post_init__(self):
        for name in ("x1", "x2", "y1", "y2", "t", "theta0"):
            v = getattr(self, name)
            if not mpmath.isfinite(v):
                raise ValueError(f"{name} is not finite")

    @property
    def G1(self) -> mpmath.mpf:
        with mpmath.workdps(WORK_DPS):
            return self.x1 * self.y2 - self.x2 * self.y1

    @property
    def G2(self) -> mpmath.mpf:
        with mpmath.workdps(WORK_DPS):
            g3 = (self.y1**2 + self.y2**2) / 2
            return (self.x1**2 + self.x2**2) / 2 - g3 + g3**2

    @property
    def radius2(self) -> mpmath.mpf:
        """y1^2 + y2^2."""
        with mpmath.workdps(WORK_DPS):
            return self.y1**2 + self.y2**2

    def theta(self, gamma) -> mpmath.mpf:
        with mpmath.workdps(WORK_DPS):
            return self.theta0 + gamma * self.t


def gamma_mp(params: PerturbationParams) -> mpmath.mpf:
    return +params.gamma.value(WORK_DPS)


def param_vector(params: PerturbationParams) -> np.ndarray:
    """Kernel parameter array (nu, eps, c, d, gamma) as double-double pairs."""
    with mpmath.workdps(WORK_DPS):
        vals = [_mp(params.nu), _mp(params.eps), _mp(params.c), _mp(params.d), gamma_mp(params)]
        return np.array([to_dd(v) for v in vals], dtype=np.float64)


def state_to_array(state: State4, params: PerturbationParams) -> tuple[np.ndarray, np.ndarray]:
    with mpmath.workdps(WORK_DPS):
        th = state.theta(gamma_mp(params))
        vals = [state.x1, state.x2, state.y1, state.y2, mpmath.cos(th), mpmath.sin(th)]
        X = np.array([to_dd(v) for v in vals], dtype=np.float64)
    return X, np.array(to_dd(state.t), dtype=np.float64)


def array_to_state(X: np.ndarray, t: np.ndarray, theta0) -> State4:
    return State4(from_dd(X[0]), from_dd(X[1]), from_dd(X[2]), from_dd(X[3]), from_dd(t), _mp(theta0))


def vector_field(state: State4, params: PerturbationParams, precision: str = "extended") -> State4:
    """Time derivative of the state (returned as a State4 with ``t`` = 1).

    Evaluated by the same jet kernel the integrator uses (first-order jet).
    """
    _check_pole(state, params)
    K = _k.kernels(precision)
    X, _ = state_to_array(state, params)
    J = np.zeros((_k.NVAR, 2, 2))
    W = np.zeros((11, 2, 2))
    K.jet(X, param_vector(params), 1, J, W)
    d = [from_dd(J[v, 1]) for v in range(4)]
    return State4(d[0], d[1], d[2], d[3], mpmath.mpf(1), mpmath.mpf(0))


def _check_pole(state: State4, params: PerturbationParams):
    if state.y1 == params.d:
        raise ValueError("y1 = d is a pole of the perturbation")


def _check_order(order: int, tol: float):
    if order < 8:
        raise ValueError("Taylor order must be at least 8")
    if not tol > 0:
        raise ValueError("tolerance must be positive")


def taylor_step(state: State4, params: PerturbationParams, order: int = DEFAULT_ORDER,
                tol: float = DEFAULT_TOL, direction: int = 1, h_max: float = 1.0,
                precision: str = "extended") -> tuple[State4, float]:
    """One adaptive Taylor step; ``direction=-1`` steps backward in time."""
    _check_order(order, tol)
    _check_pole(state, params)
    K = _k.kernels(precision)
    X, t = state_to_array(state, params)
    J = np.zeros((_k.NVAR, order + 1, 2))
    W = np.zeros((11, order + 1, 2))
    h = K.taylor_step(X, t, param_vector(params), order, tol, float(np.sign(direction) or 1), h_max, J, W)
    if abs(h) < _k.MIN_STEP:
        raise StiffnessError(_k.STEP_UNDERFLOW, f"h = {h:g}")
    return array_to_state(X, t, state.theta0), h


def integrate(state: State4, params: PerturbationParams, duration: float, order: int = DEFAULT_ORDER,
              tol: float = DEFAULT_TOL, h_max: float = 1.0, precision: str = "extended") -> State4:
    """Integrate over a signed time span."""
    _check_order(order, tol)
    K = _k.kernels(precision)
    X, t = state_to_array(state, params)
    n = K.integrate_for(X, t, param_vector(params), order, tol, float(duration), h_max)
    if n < 0:
        raise StiffnessError(_k.STEP_UNDERFLOW)
    return array_to_state(X, t, state.theta0)


def _seed(psi0, theta0, R2_init, x_sign) -> State4:
    with mpmath.workdps(WORK_DPS):
        R2 = _mp(R2_init)
        R1 = R2 * mpmath.sqrt(1 - R2**2 / 2)
        c, s = mpmath.cos(_mp(psi0)), mpmath.sin(_mp(psi0))
        return State4(x_sign * R1 * c, x_sign * R1 * s, R2 * c, R2 * s, mpmath.mpf(0), _mp(theta0))


def seed_unstable(psi0, theta0, params: PerturbationParams | None = None,
                  R2_init=DEFAULT_R2) -> State4:
    """Point of the local unstable manifold at |y| = R2_init.

    Uses the unperturbed separatrix, where x = -R1 (cos, sin) on the branch
    leaving the origin; the perturbation is O(eps R2^4) there.
    """
    return _seed(psi0, theta0, R2_init, -1)


def seed_stable(psi0, theta0, params: PerturbationParams | None = None,
                R2_init=DEFAULT_R2) -> State4:
    """Mirror image (x -> -x) of the unstable seed, on the local stable manifold."""
    return _seed(psi0, theta0, R2_init, +1)


@dataclass(frozen=True)
class SectionHit:
    state: State4
    steps: int
    event_residual: float
    event_slope: float


def default_t_max(params: PerturbationParams, R2_init=DEFAULT_R2) -> float:
    # unperturbed flight time is acosh(sqrt2/R2)/nu; allow generous slack
    return 2.0 * float(mpmath.acosh(mpmath.sqrt(2) / _mp(R2_init))) / params.nu + 200.0


def to_section(state: State4, params: PerturbationParams, direction: str = "forward",
               order: int = DEFAULT_ORDER, tol: float = DEFAULT_TOL, t_max: float | None = None,
               h_max: float = 1.0, precision: str = "extended") -> SectionHit:
    """Follow the orbit to the first maximum of y1^2 + y2^2."""
    _check_order(order, tol)
    sgn = {"forward": 1.0, "backward": -1.0}.get(direction)
    if sgn is None:
        raise ValueError("direction must be 'forward' or 'backward'")
    if t_max is None:
        t_max = default_t_max(params)
    K = _k.kernels(precision)
    X, t = state_to_array(state, params)
    stats = np.zeros(3)
    status = K.to_section(X, t, param_vector(params), order, tol, sgn, float(t_max), h_max, stats)
    if status == _k.STEP_UNDERFLOW:
        raise StiffnessError(status)
    if status != _k.OK:
        raise SectionError(status)
    return SectionHit(array_to_state(X, t, state.theta0), int(stats[0]), float(stats[1]), float(stats[2]))
