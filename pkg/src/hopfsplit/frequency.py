"""Continued-fraction machinery for the forcing frequency.

Quotients are always produced by exact integer arithmetic.  Real-valued
quantities (the frequency itself, the small divisors N - gamma*D and the
constants c_s) are evaluated with mpmath at a working precision chosen from
the size of the denominators involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import mpmath as mp

DEFAULT_DPS = 64


class RationalFrequencyError(ValueError):
    pass


# --------------------------------------------------------------------------
# frequency representations


@dataclass(frozen=True)
class QuadraticSurd:
    """The number (a + b*sqrt(D)) / c with integer a, b, c and D > 0."""

    a: int
    b: int
    c: int
    D: int

    def __post_init__(self):
        if self.c == 0:
            raise ValueError("zero denominator")
        if self.D <= 0:
            raise ValueError("D must be positive")

    @classmethod
    def from_ratio(cls, p: int, q: int, r: int, s: int, D: int) -> "QuadraticSurd":
        """(p + q√D) / (r + s√D), rationalised."""
        den = r * r - s * s * D
        if den == 0:
            raise ValueError("degenerate ratio")
        return cls._from_fraction_parts(
            Fraction(p * r - q * s * D, den), Fraction(q * r - p * s, den), D
        )

    @classmethod
    def _from_fraction_parts(cls, x: Fraction, y: Fraction, D: int) -> "QuadraticSurd":
        c = math.lcm(x.denominator, y.denominator)
        a, b = int(x * c), int(y * c)
        g = math.gcd(math.gcd(a, b), c)
        if c < 0:
            g = -g
        return cls(a // g, b // g, c // g, D)

    def mobius(self, p: int, q: int, r: int, s: int) -> "QuadraticSurd":
        """Exact value of (p*x + q) / (r*x + s) at x = self."""
        x0, x1 = Fraction(self.a, self.c), Fraction(self.b, self.c)
        n0, n1 = p * x0 + q, p * x1
        d0, d1 = r * x0 + s, r * x1
        den = d0 * d0 - d1 * d1 * self.D
        if den == 0:
            raise ValueError("degenerate Mobius image")
        return self._from_fraction_parts(
            (n0 * d0 - n1 * d1 * self.D) / den, (n1 * d0 - n0 * d1) / den, self.D
        )

    def is_rational(self) -> bool:
        r = math.isqrt(self.D)
        return self.b == 0 or r * r == self.D

    def value(self, dps: int = DEFAULT_DPS) -> mp.mpf:
        with mp.workdps(dps):
            return (mp.mpf(self.a) + self.b * mp.sqrt(self.D)) / self.c

    def _states(self) -> Iterator[tuple[int, int, int]]:
        """Yield (q, P, Q) with the complete quotient (P + √E)/Q before q."""
        a, b, c = self.a, self.b, self.c
        if b < 0:
            a, b, c = -a, -b, -c
        E = b * b * self.D
        P, Q = a * abs(c), c * abs(c)
        E *= c * c
        root = math.isqrt(E)
        while True:
            if Q > 0:
                q = (P + root) // Q
            else:
                q = -((P + root) // (-Q)) - 1
            yield q, P, Q
            P = q * Q - P
            Q = (E - P * P) // Q


@dataclass(frozen=True)
class ExplicitQuotients:
    """Quotients given by a finite prefix followed by a generating rule.

    ``rule(j)`` returns q_j for every j >= len(prefix).
    """

    prefix: tuple[int, ...]
    rule: Callable[[int], int]
    description: str = ""

    def quotient(self, j: int) -> int:
        if j < len(self.prefix):
            return self.prefix[j]
        return self.rule(j)


class Frequency:
    """Forcing frequency backed by an exact quotient source."""

    def __init__(self, kind: QuadraticSurd | ExplicitQuotients, name: str = ""):
        if isinstance(kind, QuadraticSurd) and kind.is_rational():
            raise RationalFrequencyError("rational frequency")
        self.kind = kind
        self.name = name or repr(kind)
        self.cached_quotients: list[int] = []
        self._period: tuple[int, int] | None = None
        self._values: dict[int, mp.mpf] = {}

    def __repr__(self):
        return f"Frequency({self.name})"

    @property
    def is_surd(self) -> bool:
        return isinstance(self.kind, QuadraticSurd)

    def quotients(self, count: int) -> list[int]:
        if count < 1:
            raise ValueError("count must be >= 1")
        if len(self.cached_quotients) < count:
            if self.is_surd:
                self._fill_surd(count)
            else:
                kind = self.kind
                self.cached_quotients.extend(
                    kind.quotient(j) for j in range(len(self.cached_quotients), count)
                )
        return self.cached_quotients[:count]

    def _fill_surd(self, count: int) -> None:
        seen: dict[tuple[int, int], int] = {}
        out = []
        for j, (q, P, Q) in enumerate(self.kind._states()):
            if self._period is None and j >= 1:
                key = (P, Q)
                if key in seen:
                    start = seen[key]
                    self._period = (start, j - start)
                else:
                    seen[key] = j
            out.append(q)
            if len(out) >= count and self._period is not None:
                break
        self.cached_quotients = out

    def period(self) -> tuple[int, int] | None:
        """(first periodic index, period length) for surds, else None."""
        if not self.is_surd:
            return None
        if self._period is None:
            self.quotients(max(8, len(self.cached_quotients) + 1))
        return self._period

    def value(self, dps: int = DEFAULT_DPS) -> mp.mpf:
        if dps in self._values:
            return self._values[dps]
        if self.is_surd:
            v = self.kind.value(dps)
        else:
            v = _value_from_quotients(self, dps)
        self._values[dps] = v
        return v

    def __float__(self):
        return float(self.value(30))


def _value_from_quotients(freq: Frequency, dps: int) -> mp.mpf:
    # a convergent whose denominator squared exceeds 10^(dps+10)
    target = 10 ** (dps + 10)
    n_prev, n, d_prev, d = 1, 0, 0, 1
    j = 0
    while d * d < target or j < 12:
        j += 1
        q = freq.quotients(j + 1)[j]
        n_prev, n = n, q * n + n_prev
        d_prev, d = d, q * d + d_prev
    q0 = freq.quotients(1)[0]
    with mp.workdps(dps):
        return mp.mpf(q0) + mp.mpf(n) / d


# --------------------------------------------------------------------------
# named frequencies


def golden() -> Frequency:
    return Frequency(QuadraticSurd(-1, 1, 2, 5), "golden")


def _case_surd(num_root: int, shift: int, scale: int) -> QuadraticSurd:
    # 1 + b with b = (sqrt(num_root) - shift) / scale
    one_plus_b = QuadraticSurd(scale - shift, 1, scale, num_root)
    return one_plus_b.mobius(55, 34, 89, 55)


def case1() -> Frequency:
    return Frequency(_case_surd(122, 10, 11), "case1")


def case2() -> Frequency:
    return Frequency(_case_surd(140, 10, 20), "case2")


def case3() -> Frequency:
    prefix = (0,) + (1,) * 10
    return Frequency(ExplicitQuotients(prefix, lambda j: j - 9, "ten ones then 2,3,4,..."), "case3")


def gamma1() -> Frequency:
    return Frequency(ExplicitQuotients((0,), lambda j: j, "1,2,3,4,..."), "gamma1")


def _e_minus_2_rule(j: int) -> int:
    return 2 * (j + 1) // 3 if j % 3 == 2 else 1


def e_minus_2() -> Frequency:
    return Frequency(ExplicitQuotients((0,), _e_minus_2_rule, "e-2"), "e-minus-2")


NAMED = {
    "golden": golden,
    "case0": golden,
    "case1": case1,
    "case2": case2,
    "case3": case3,
    "gamma1": gamma1,
    "e-minus-2": e_minus_2,
}


def parse_frequency(text: str) -> Frequency:
    """Parse a frequency description.

    Accepted forms: a name from ``NAMED``; ``surd:a,b,c,D`` for
    (a + b√D)/c; ``quotients:q0,q1,...`` optionally followed by
    ``+periodic:b1,b2,...`` (repeat the block forever) or
    ``+arith:start,step`` (q continues start, start+step, ...).
    """
    text = text.strip()
    if text in NAMED:
        return NAMED[text]()
    if text.startswith("surd:"):
        parts = [int(v) for v in text[5:].split(",")]
        if len(parts) != 4:
            raise ValueError("surd needs a,b,c,D")
        return Frequency(QuadraticSurd(*parts), text)
    if text.startswith("quotients:"):
        body = text[len("quotients:"):]
        head, _, tail = body.partition("+")
        prefix = tuple(int(v) for v in head.split(",") if v.strip())
        if not prefix:
            raise ValueError("empty quotient prefix")
        if not tail:
            raise RationalFrequencyError("rational frequency")
        kind, _, args = tail.partition(":")
        vals = [int(v) for v in args.split(",") if v.strip()]
        n0 = len(prefix)
        if kind == "periodic" and vals:
            block = tuple(vals)
            rule = lambda j, b=block, n0=n0: b[(j - n0) % len(b)]
        elif kind == "arith" and len(vals) == 2:
            rule = lambda j, a=vals[0], st=vals[1], n0=n0: a + st * (j - n0)
        else:
            raise ValueError(f"unknown quotient rule {tail!r}")
        if any(q < 1 for q in prefix[1:]):
            raise ValueError("quotients after q0 must be >= 1")
        return Frequency(ExplicitQuotients(prefix, rule, tail), text)
    raise ValueError(f"unknown frequency {text!r}")


# --------------------------------------------------------------------------
# approximants


@dataclass(frozen=True)
class Approximant:
    n: int
    N: int
    D: int
    s_signed: mp.mpf = field(compare=False)
    c_s: mp.mpf = field(compare=False)

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.N, self.D)


def cfe_quotients(freq: Frequency, count: int) -> list[int]:
    return list(freq.quotients(count))


def _numerators_denominators(qs: Sequence[int]) -> tuple[list[int], list[int]]:
    N, D = [], []
    n_pp, n_p, d_pp, d_p = 0, 1, 1, 0  # N_{-2}, N_{-1}, D_{-2}, D_{-1}
    for q in qs:
        n = q * n_p + n_pp
        d = q * d_p + d_pp
        N.append(n)
        D.append(d)
        n_pp, n_p, d_pp, d_p = n_p, n, d_p, d
    return N, D


def working_dps(max_denominator: int) -> int:
    return max(DEFAULT_DPS, 2 * len(str(max_denominator)) + 40)


def best_approximants(freq: Frequency, count: int, dps: int | None = None) -> list[Approximant]:
    """Approximants of orders 0..count-1 with exact N, D."""
    qs = freq.quotients(count)
    N, D = _numerators_denominators(qs)
    dps = dps or working_dps(D[-1])
    gamma = freq.value(dps)
    out = []
    with mp.workdps(dps):
        for n in range(count):
            s = N[n] - gamma * D[n]
            cs = 1 / (N[n] * abs(s)) if N[n] else mp.inf
            out.append(Approximant(n, N[n], D[n], s, cs))
    return out


def complete_quotient(freq: Frequency, index: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """[q_index; q_index+1, ...] evaluated to ``dps`` digits."""
    # convergents of the tail until the denominator resolves dps digits
    target = 10 ** (dps + 5)
    n_pp, n_p, d_pp, d_p = 0, 1, 1, 0
    j = index
    while True:
        q = freq.quotients(j + 1)[j]
        n_pp, n_p = n_p, q * n_p + n_pp
        d_pp, d_p = d_p, q * d_p + d_pp
        j += 1
        if d_p * d_p > target and j - index > 3:
            break
    with mp.workdps(dps):
        return mp.mpf(n_p) / d_p


def q_plus_minus(freq: Frequency, n: int, dps: int = DEFAULT_DPS) -> tuple[mp.mpf, mp.mpf]:
    """(q_{+,n}, q_{-,n}) = ([q_{n+1}; q_{n+2}, ...], [q_n; q_{n-1}, ..., q_1])."""
    if n < 1:
        raise ValueError("n must be >= 1")
    qs = freq.quotients(n + 1)
    _, D = _numerators_denominators(qs)
    qp = complete_quotient(freq, n + 1, dps)
    D_prev = D[n - 1] if n >= 1 else 0
    with mp.workdps(dps):
        qm = mp.mpf(D[n]) / D_prev if D_prev else mp.inf
    return qp, qm


def c_s_hat(freq: Frequency, n: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """q_{+,n} + 1/q_{-,n}, which equals 1/(D_n |D_n γ - N_n|)."""
    qp, qm = q_plus_minus(freq, n, dps)
    with mp.workdps(dps):
        return qp + 1 / qm


def c_s_estimate(freq: Frequency, n: int, dps: int = DEFAULT_DPS) -> mp.mpf:
    """(q_{+,n} + 1/q_{-,n}) / γ, accurate to relative O(D_n^-2)."""
    with mp.workdps(dps):
        return c_s_hat(freq, n, dps) / freq.value(dps)


def c_s_limits(freq: Frequency, horizon: int = 60, tol: float = 1e-8) -> list[float]:
    """Limits of c_{s,n} along the residue classes n mod p.

    Entry r of the returned list is the limit over n ≡ r (mod p), where p is
    the period of the eventually periodic quotient sequence.
    """
    per = freq.period()
    if per is None:
        raise ValueError("limits undefined; use c_s per approximant")
    _, p = per
    apx = best_approximants(freq, horizon + 1)
    limits: list[float] = []
    for r in range(p):
        idx = [n for n in range(1, horizon + 1) if n % p == r]
        if len(idx) < 2:
            raise ValueError("horizon too short for the period")
        last, prev = apx[idx[-1]].c_s, apx[idx[-2]].c_s
        if abs(last - prev) > tol * abs(last):
            raise ValueError(f"c_s not converged on residue {r} at horizon {horizon}")
        limits.append(float(last))
    return limits


# --------------------------------------------------------------------------
# Diophantine profile


def phi_qlogq(q: mp.mpf) -> mp.mpf:
    """q log q / log log q."""
    lq = mp.log(q)
    return q * lq / mp.log(lq)


PHI_FUNCTIONS: dict[str, Callable[[mp.mpf], mp.mpf]] = {"qlogq_loglogq": phi_qlogq}


@dataclass
class DiophantineProfile:
    values: list[tuple[int, float]]
    argmin: int
    minimum: float


def diophantine_profile(
    freq: Frequency,
    phi: str | Callable[[mp.mpf], mp.mpf] = "qlogq_loglogq",
    n_range: range | Sequence[int] = range(2, 101),
) -> DiophantineProfile:
    """Π_n = φ(D_n)·|D_n γ − N_n| over ``n_range``."""
    fn = PHI_FUNCTIONS[phi] if isinstance(phi, str) else phi
    ns = list(n_range)
    apx = best_approximants(freq, max(ns) + 1)
    out = []
    for n in ns:
        a = apx[n]
        if a.D < 3:
            raise ValueError(f"D_{n} = {a.D} too small for φ")
        with mp.workdps(working_dps(a.D)):
            out.append((n, float(fn(mp.mpf(a.D)) * abs(a.s_signed))))
    n_min, v_min = min(out, key=lambda t: t[1])
    return DiophantineProfile(out, n_min, v_min)


# --------------------------------------------------------------------------
# visible / hidden approximants


@dataclass
class DominanceReport:
    approximants: list[Approximant]
    visible: list[tuple[Approximant, tuple[float, float]]]
    hidden: list[Approximant]
    crossings: list[tuple[int, int, float]]
    rho: float
    scale: float  # nu_hat = scale * nu


def default_rho(c: float = 5.0, d: float = 7.0) -> tuple[float, float]:
    """Spatial and temporal exponential decay rates of the harmonics.

    With these defaults rho1 + rho2/γ is the constant K of the prefactor.
    """
    return math.log(d) + math.log(2) / 2 - 1, math.log(c + math.sqrt(c * c - 1))


def dominance_function(a: Approximant, freq: Frequency, nu_hat: float) -> float:
    """T_n(ν̂) = N_n + 1/(ν̂ N_n ĉ_{s,n})."""
    c_hat = 1 / (a.D * abs(a.s_signed))
    return float(a.N + 1 / (nu_hat * a.N * c_hat))


def dominance_analysis(
    freq: Frequency,
    rho1: float | None = None,
    rho2: float | None = None,
    nu_range: tuple[float, float] = (2.0**-34, 2.0**-10),
    max_order: int = 40,
    min_order: int = 1,
) -> DominanceReport:
    """Lower envelope of the T_n over approximant orders min_order..max_order.

    ``nu_range`` is in the physical ν; the envelope is built in the scaled
    variable ν̂ = ν ρ / (C γ) with C = π/2.  Visible approximants are those
    minimising T_n somewhere inside the range.
    """
    d_rho = default_rho()
    rho1 = d_rho[0] if rho1 is None else rho1
    rho2 = d_rho[1] if rho2 is None else rho2
    if rho1 <= 0 or rho2 <= 0:
        raise ValueError("rho1, rho2 must be positive")
    nu_lo, nu_hi = sorted(nu_range)
    if not (0 < nu_lo < nu_hi < 1):
        raise ValueError("nu_range must lie in (0,1)")
    gamma = float(freq.value(30))
    rho = rho1 + rho2 / gamma
    scale = rho / (math.pi / 2 * gamma)
    apx = [a for a in best_approximants(freq, max_order + 1) if a.n >= min_order and a.N > 0]
    # slope b_n = 1/(N_n ĉ_n) in T_n = N_n + b_n / ν̂
    with mp.workdps(working_dps(apx[-1].D)):
        slopes = [a.D * abs(a.s_signed) / a.N for a in apx]
    # envelope as ν̂ decreases: start from the smallest N, jump to the
    # candidate whose crossing with the current one is the largest
    crossings = []
    chain: list[tuple[int, float]] = []  # (index into apx, upper end in ν̂)
    cur, upper = 0, math.inf
    while True:
        best_j, best_nu = None, -math.inf
        for j in range(cur + 1, len(apx)):
            dn = apx[j].N - apx[cur].N
            if dn == 0:
                # same numerator: the smaller slope wins for every ν̂
                if slopes[j] >= slopes[cur]:
                    continue
                nu_ij = math.inf
            else:
                nu_ij = float((slopes[cur] - slopes[j]) / dn)
            if nu_ij > best_nu or (nu_ij == best_nu and best_j is not None and apx[j].N < apx[best_j].N):
                best_j, best_nu = j, nu_ij
        chain.append((cur, upper))
        if best_j is None:
            break
        crossings.append((apx[cur].n, apx[best_j].n, best_nu))
        cur, upper = best_j, best_nu
    lo_hat, hi_hat = nu_lo * scale, nu_hi * scale
    # the final member of the chain dominates down to 0 only because nothing
    # beyond max_order was considered
    uncovered_top = chain[-1][1]
    if lo_hat < uncovered_top:
        raise ValueError(
            f"max_order {max_order} too small: nu below {uncovered_top / scale:.6g} uncovered"
        )
    visible = []
    vis_idx = set()
    for k, (idx, up) in enumerate(chain):
        low = chain[k + 1][1] if k + 1 < len(chain) else 0.0
        a, b = max(low, lo_hat), min(up, hi_hat)
        if a < b:
            visible.append((apx[idx], (a / scale, b / scale)))
            vis_idx.add(idx)
    if visible:
        first, last = min(vis_idx), max(vis_idx)
        hidden = [apx[i] for i in range(first, last + 1) if i not in vis_idx]
    else:
        hidden = []
    return DominanceReport(apx, visible, hidden, crossings, rho, scale)
