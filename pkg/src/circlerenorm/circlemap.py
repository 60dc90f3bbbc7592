"""Analytic multicritical circle maps: evaluation, rotation numbers, signatures.

A map model is an ordered composition of basic trig units.  The unit of
criticality d (odd) has lift u(x) = b_d(x) + theta with

    b_d(x) = x + sum_{k=1}^{m} alpha_k sin(2 pi k x),   m = (d-1)/2,

the closed-form antiderivative of sin^(d-1)(pi t)/kappa_d.  Units are entire,
degree-one lifts whose derivative vanishes exactly at the integers to order
d-1, so every model is an analytic circle homeomorphism with odd-order
critical points and a marked critical point at 0.

Rotation numbers are never compared as floats: digits come from the
closest-return combinatorics of the marked orbit (records on either side of
the marked point, grouped into one-sided blocks whose final times are the
return times q_n), which turns every digit decision into integer arithmetic.
"""

from __future__ import annotations

import bisect as _bisect
import warnings
from dataclasses import dataclass, field

import mpmath
from mpmath import mp, mpf

from . import numerics
from .errors import (
    CriticalCollisionWarning,
    PreconditionError,
    PrecisionExhausted,
    RationalLock,
)
from .numerics import (
    ContinuedFraction,
    Scalar,
    eps,
    format_scalar,
    taylor_compose,
    taylor_invert,
    taylor_mul,
    taylor_to_jet,
    to_scalar,
)

_TWO_PI_CACHE = {}
_UNIT_COEFF_CACHE = {}


def _two_pi():
    c = _TWO_PI_CACHE.get(mp.prec)
    if c is None:
        c = 2 * mp.pi
        _TWO_PI_CACHE[mp.prec] = c
    return c


def _unit_coeffs(d: int):
    """Sine coefficients alpha_1..alpha_m of b_d at the working precision."""
    key = (d, mp.prec)
    coeffs = _UNIT_COEFF_CACHE.get(key)
    if coeffs is None:
        m = (d - 1) // 2
        central = mpmath.binomial(2 * m, m)
        coeffs = tuple(
            (-1) ** k * mpmath.binomial(2 * m, m - k) / (central * k * mp.pi)
            for k in range(1, m + 1)
        )
        _UNIT_COEFF_CACHE[key] = coeffs
    return coeffs


@dataclass(frozen=True)
class Jet:
    """Value and derivatives of a lift at a point; index 0 is the value."""

    derivatives: tuple

    @property
    def value(self):
        return self.derivatives[0]

    def derivative(self, k: int = 1):
        return self.derivatives[k]

    @property
    def order(self) -> int:
        return len(self.derivatives) - 1


@dataclass(frozen=True)
class BasicUnit:
    """One composition unit: odd criticality d >= 3 and twist theta in [0, 1)."""

    d: int
    theta: Scalar

    def __post_init__(self):
        if self.d < 3 or self.d % 2 == 0:
            raise PreconditionError("criticality must be an odd integer >= 3")
        object.__setattr__(self, "theta", to_scalar(self.theta))

    def value(self, x):
        acc = x + self.theta
        for k, a in enumerate(self._coeffs(), start=1):
            acc += a * mpmath.sinpi(2 * k * x)
        return acc

    def _coeffs(self):
        return _unit_coeffs(self.d)

    def taylor(self, y0, order: int):
        """Taylor coefficients of the unit lift around y0."""
        coeffs = [self.value(y0)] + [mpf(0)] * order
        if order >= 1:
            two_pi = _two_pi()
            for k, a in enumerate(self._coeffs(), start=1):
                s = mpmath.sinpi(2 * k * y0)
                c = mpmath.cospi(2 * k * y0)
                w = two_pi * k
                # j-th derivative of a*sin(2 pi k y): a * w^j * sin(w y + j pi/2)
                deriv_cycle = (s, c, -s, -c)
                wj = mpf(1)
                for j in range(1, order + 1):
                    wj *= w
                    coeffs[j] += a * wj * deriv_cycle[j % 4] / mpmath.factorial(j)
            coeffs[1] += 1
        return coeffs


@dataclass(frozen=True)
class MapModel:
    """An analytic multicritical circle map as an ordered unit composition.

    ``units[0]`` is applied first; the lift is f = u_{N-1} o ... o u_0 and has
    a critical point at 0 because unit 0 is critical at the integers.
    """

    units: tuple
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if not self.units:
            raise PreconditionError("a map model needs at least one unit")

    @classmethod
    def from_spec(cls, spec) -> "MapModel":
        """Build from (d, theta) pairs, e.g. [(3, '0.25'), (3, '0.1')]."""
        return cls(tuple(BasicUnit(d, to_scalar(t)) for d, t in spec))

    @property
    def criticality_template(self):
        return tuple(u.d for u in self.units)

    def with_twist(self, index: int, theta) -> "MapModel":
        units = list(self.units)
        units[index] = BasicUnit(units[index].d, to_scalar(theta))
        return MapModel(tuple(units))

    def with_last_twist(self, theta) -> "MapModel":
        return self.with_twist(len(self.units) - 1, theta)

    # -- evaluation ---------------------------------------------------------

    def lift(self, x):
        for u in self.units:
            x = u.value(x)
        return x

    def lift_jet(self, x, order: int) -> Jet:
        return evaluate(self, x, order)

    def derivative(self, x):
        return evaluate(self, x, 1).derivative()

    def partial_lift(self, x, count: int):
        """Apply only the first ``count`` units."""
        for u in self.units[:count]:
            x = u.value(x)
        return x

    def inverse_lift(self, y):
        """x with lift(x) = y, by bisection on the monotone lift."""
        y = to_scalar(y)
        lo, hi = y - 2, y + 2
        while self.lift(lo) > y:
            lo -= 1
        while self.lift(hi) < y:
            hi += 1
        for _ in range(mp.prec + 10):
            mid = (lo + hi) / 2
            if mid <= lo or mid >= hi:
                break
            if self.lift(mid) > y:
                hi = mid
            else:
                lo = mid
        return (lo + hi) / 2

    # -- structure ----------------------------------------------------------

    def critical_points(self):
        return critical_points(self)

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        return "\n".join(
            f"d={u.d} theta={format_scalar(u.theta)}" for u in self.units
        ) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MapModel":
        units = []
        for line in text.strip().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = dict(part.split("=", 1) for part in line.split())
            units.append(BasicUnit(int(fields["d"]), numerics.parse_scalar(fields["theta"])))
        return cls(tuple(units))


def evaluate(model: MapModel, x, order: int = 0) -> Jet:
    """Jet of the model lift at x (real or complex), derivatives to ``order``."""
    if order > 10:
        raise PreconditionError("jet order is capped at 10")
    coeffs = [x, mpf(1)][: order + 1]
    coeffs += [mpf(0)] * (order + 1 - len(coeffs))
    for u in model.units:
        outer = u.taylor(coeffs[0], order)
        inner = [mpf(0)] + coeffs[1:]
        coeffs = taylor_compose(outer, inner, order)
    return Jet(tuple(taylor_to_jet(coeffs)))


def critical_points(model: MapModel, merge_tol=None):
    """Ordered critical points [(c_j, d_j)] of the lift's period, c_0 = 0 first.

    The critical set is the union over units j of the preimages of the
    integers under the partial composition u_{j-1} o ... o u_0; preimages are
    located by bisection.  Coincident points merge with multiplied
    criticality and a non-fatal CriticalCollisionWarning.
    """
    key = ("crit", mp.prec)
    cached = model._cache.get(key)
    if cached is not None:
        return list(cached)
    if merge_tol is None:
        merge_tol = mpmath.ldexp(eps(), 20)
    raw = [(mpf(0), model.units[0].d)]
    for j in range(1, len(model.units)):
        p0 = model.partial_lift(mpf(0), j)
        target = mpmath.ceil(p0)
        if target == p0:
            x = mpf(0)
        else:
            lo, hi = mpf(0), mpf(1)
            for _ in range(mp.prec + 10):
                mid = (lo + hi) / 2
                if mid <= lo or mid >= hi:
                    break
                if model.partial_lift(mid, j) > target:
                    hi = mid
                else:
                    lo = mid
            x = (lo + hi) / 2
        if x >= 1:
            x -= 1
        raw.append((x, model.units[j].d))
    raw.sort(key=lambda cd: cd[0])
    merged = []
    collided = False
    for c, d in raw:
        if merged and abs(c - merged[-1][0]) <= merge_tol:
            merged[-1] = (merged[-1][0], merged[-1][1] * d)
            collided = True
        elif merged and abs((c - 1) - merged[0][0]) <= merge_tol:
            # wrap-around coincidence with the marked point
            merged[0] = (merged[0][0], merged[0][1] * d)
            collided = True
        else:
            merged.append((c, d))
    if collided:
        warnings.warn("coincident critical points merged (criticality multiplied)",
                      CriticalCollisionWarning, stacklevel=2)
    model._cache[key] = tuple(merged)
    return merged


# ---------------------------------------------------------------------------
# conjugated maps (experiment fixtures with identical signatures)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticDiffeo:
    """Entire circle diffeo psi(x) = x + sum a_k sin(2 pi k x)/(2 pi k), psi(0)=0.

    ``amplitudes`` maps the frequency k to a_k; monotonicity needs
    sum |a_k| < 1.
    """

    amplitudes: tuple  # ((k, a_k), ...)

    def __post_init__(self):
        amps = tuple(sorted((int(k), to_scalar(a)) for k, a in dict(self.amplitudes).items()))
        object.__setattr__(self, "amplitudes", amps)
        if sum(abs(a) for _, a in amps) >= 1:
            raise PreconditionError("diffeo amplitudes must satisfy sum |a_k| < 1")

    def value(self, x):
        acc = x
        two_pi = _two_pi()
        for k, a in self.amplitudes:
            acc += a * mpmath.sinpi(2 * k * x) / (two_pi * k)
        return acc

    def derivative(self, x):
        acc = mpf(1)
        for k, a in self.amplitudes:
            acc += a * mpmath.cospi(2 * k * x)
        return acc

    def taylor(self, y0, order: int):
        coeffs = [self.value(y0)] + [mpf(0)] * order
        if order >= 1:
            coeffs[1] = self.derivative(y0)
            two_pi = _two_pi()
            for k, a in self.amplitudes:
                s = mpmath.sinpi(2 * k * y0)
                c = mpmath.cospi(2 * k * y0)
                w = two_pi * k
                deriv_cycle = (s, c, -s, -c)
                wj = w
                for j in range(2, order + 1):
                    wj *= w
                    coeffs[j] += (a / (two_pi * k)) * wj * deriv_cycle[j % 4] / mpmath.factorial(j)
        return coeffs

    def inverse(self, y):
        """w with psi(w) = y (Newton with a bisection fallback)."""
        y = to_scalar(y)
        w = y
        tol = 4 * eps() * max(mpf(1), abs(y))
        for _ in range(80):
            delta = (self.value(w) - y) / self.derivative(w)
            w -= delta
            if abs(delta) <= tol:
                return w
        spread = sum(abs(a) / (_two_pi() * k) for k, a in self.amplitudes) + eps()
        lo, hi = y - spread, y + spread
        for _ in range(mp.prec + 10):
            mid = (lo + hi) / 2
            if mid <= lo or mid >= hi:
                break
            if self.value(mid) > y:
                hi = mid
            else:
                lo = mid
        return (lo + hi) / 2


class ConjugatedCircleMap:
    """g = psi o f o psi^{-1}: same signature as f, different realization."""

    def __init__(self, base: MapModel, psi: AnalyticDiffeo):
        self.base = base
        self.psi = psi

    def lift(self, x):
        w = self.psi.inverse(x)
        return self.psi.value(self.base.lift(w))

    def lift_jet(self, x, order: int) -> Jet:
        w = self.psi.inverse(x)
        if order == 0:
            return Jet((self.psi.value(self.base.lift(w)),))
        psi_t = self.psi.taylor(w, order)
        # Taylor of psi^{-1} at x as an offset series (constant term 0)
        inv_shift = taylor_invert([mpf(0)] + list(psi_t[1:]), order)
        f_t = self.base.lift_jet(w, order)
        f_coeffs = [d / mpmath.factorial(j) for j, d in enumerate(f_t.derivatives)]
        mid = taylor_compose(f_coeffs, inv_shift, order)
        outer = self.psi.taylor(mid[0], order)
        total = taylor_compose(outer, [mpf(0)] + mid[1:], order)
        return Jet(tuple(taylor_to_jet(total)))

    def derivative(self, x):
        return self.lift_jet(x, 1).derivative()

    def critical_points(self):
        pts = []
        for c, d in critical_points(self.base):
            y = self.psi.value(c)
            y -= mpmath.floor(y)
            pts.append((y, d))
        pts.sort(key=lambda cd: cd[0])
        return pts


# ---------------------------------------------------------------------------
# closest-return tracking
# ---------------------------------------------------------------------------

def circle_step(map_like, start=None):
    """Step function on circle positions relative to the marked point.

    ``start`` moves the marked point away from 0 (positions are then orbit
    offsets from ``start``); the default marked point is 0.
    """
    if start is None:
        def step(t):
            y = map_like.lift(t)
            return y - mpmath.floor(y)
        return step
    start = to_scalar(start)

    def step(s):
        y = map_like.lift(s + start) - start
        return y - mpmath.floor(y)

    return step


class ReturnTracker:
    """Record the closest returns of the marked orbit on each side of 0.

    Orbit positions s_k in (0, 1) improve the right neighbor when they land
    in (0, nbr_r) and the left neighbor when they land in (nbr_l, 1).  Record
    times grouped into maximal same-side blocks end exactly at the return
    times q_n, and the block sizes reproduce the continued-fraction digits;
    both facts are cross-checked in integer arithmetic on every block close.
    """

    STALL_FACTOR = 200

    def __init__(self, step, *, keep_orbit: bool = False, max_steps: int = 500_000):
        self.step = step
        self.keep_orbit = keep_orbit
        self.max_steps = max_steps
        self.time = 0
        self.position = mpf(0)
        self.nbr_r = mpf(1)
        self.nbr_l = mpf(0)
        self.qs = []          # closed-block final times (the q_n)
        self.digits = []      # r_0, r_1, ... as blocks close
        self.orbit = [mpf(0)] if keep_orbit else None
        self._block_side = None
        self._block_last = 0
        self._block_size = 0
        self._last_record_time = 0
        self._lock_tol = mpmath.ldexp(eps(), 14)
        self._floor_tol = mpmath.ldexp(eps(), 24)

    # -- internals ----------------------------------------------------------

    def _close_block(self):
        self.qs.append(self._block_last)
        j = len(self.qs) - 1
        if j >= 1:
            q_j, q_j1 = self.qs[j], self.qs[j - 1]
            q_j2 = self.qs[j - 2] if j >= 2 else 0
            num = q_j - q_j2
            digit, rem = divmod(num, q_j1)
            if rem != 0 or digit < 1 or digit != self._block_size:
                raise PrecisionExhausted(
                    "closest-return combinatorics inconsistent "
                    f"(q={self.qs}, block size {self._block_size})")
            self.digits.append(digit)

    def _record(self, side):
        if side == self._block_side:
            self._block_last = self.time
            self._block_size += 1
        else:
            if self._block_side is not None:
                self._close_block()
            self._block_side = side
            self._block_last = self.time
            self._block_size = 1
        self._last_record_time = self.time

    def advance(self):
        """One orbit step; processes records and raises on lock or exhaustion."""
        if self.time >= self.max_steps:
            raise PrecisionExhausted(
                f"orbit budget of {self.max_steps} steps exceeded")
        t = self.step(self.position)
        self.time += 1
        self.position = t
        if self.orbit is not None:
            self.orbit.append(t)
        if t <= self._lock_tol or 1 - t <= self._lock_tol:
            raise RationalLock(
                f"orbit returned to the marked point at time {self.time}",
                digits=self.digits)
        if self.time == 1:
            self.nbr_r = t
            self.nbr_l = t
            self._record("R")
            self._record("L")
            return
        if t < self.nbr_r:
            self.nbr_r = t
            self._record("R")
        elif t > self.nbr_l:
            self.nbr_l = t
            self._record("L")
        else:
            budget = self.STALL_FACTOR * max(self.qs[-1] if self.qs else 1, 1) + 1000
            if self.time - self._last_record_time > budget:
                raise RationalLock(
                    f"no closest return for {budget} steps (mode-locked orbit)",
                    digits=self.digits)
            return
        if self.nbr_r + (1 - self.nbr_l) <= self._floor_tol:
            raise PrecisionExhausted(
                "closest-return gap fell below the precision floor")

    def run_until_digits(self, count: int):
        while len(self.digits) < count:
            self.advance()

    def next_digit(self) -> int:
        seen = len(self.digits)
        while len(self.digits) == seen:
            self.advance()
        return self.digits[seen]

    def run_until_time(self, steps: int):
        while self.time < steps:
            self.advance()


def rotation_digits(map_like, depth: int, *, start=None,
                    max_steps: int = 500_000) -> ContinuedFraction:
    """First ``depth`` continued-fraction digits of the rotation number.

    Digits come from counting returns to shrinking one-sided neighborhoods
    of the marked point; no floating comparison of rotation-number estimates
    is involved.  Raises RationalLock for (numerically) periodic orbits and
    PrecisionExhausted when orbit separations fall below the precision floor.
    """
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    tracker = ReturnTracker(circle_step(map_like, start), max_steps=max_steps)
    tracker.run_until_digits(depth)
    return ContinuedFraction(tuple(tracker.digits[:depth]))


def return_times(map_like, iters: int):
    """Closed return times q_n observed within ``iters`` orbit steps."""
    tracker = ReturnTracker(circle_step(map_like), max_steps=iters + 1)
    tracker.run_until_time(iters)
    return list(tracker.qs)


def _orbit_with_scale(map_like, iters: int):
    tracker = ReturnTracker(circle_step(map_like), keep_orbit=True,
                            max_steps=iters + 1)
    tracker.run_until_time(iters)
    if not tracker.qs:
        raise PrecisionExhausted("no return time closed within the orbit budget")
    return tracker.orbit, tracker.qs[-1]


def measure_cdf(model, x, iters: int) -> Scalar:
    """Invariant measure of [0, x): Birkhoff count sampled at a return time.

    Evaluates (1/q_m) #{k < q_m : f^k(0) in [0, x)} at the largest closed
    return time q_m <= iters; the discrepancy is O(1/q_m) for bounded type.
    """
    x = to_scalar(x)
    if not (0 <= x <= 1):
        raise PreconditionError("measure_cdf needs x in [0, 1]")
    orbit, q_m = _orbit_with_scale(model, iters)
    count = sum(1 for k in range(q_m) if orbit[k] < x)
    return mpf(count) / q_m


def measure_scale(model, iters: int) -> int:
    """The return time q_m that measure_cdf would sample at (error bound 1/q_m)."""
    _, q_m = _orbit_with_scale(model, iters)
    return q_m


@dataclass(frozen=True)
class Signature:
    """(rho; N; d_0..d_{N-1}; delta_0..delta_{N-1}) with sum(delta) = 1."""

    rho: ContinuedFraction
    criticalities: tuple
    deltas: tuple
    delta_error_bound: Scalar = None
    normalization_defect: Scalar = None

    @property
    def N(self) -> int:
        return len(self.criticalities)

    @property
    def total_criticality(self) -> int:
        out = 1
        for d in self.criticalities:
            out *= d
        return out

    def describe(self) -> str:
        deltas = ", ".join(mpmath.nstr(d, 8) for d in self.deltas)
        return (f"rho=[{','.join(str(r) for r in self.rho.digits)}] "
                f"N={self.N} d={self.criticalities} deltas=({deltas})")


def signature(model, depth: int, iters: int) -> Signature:
    """Assemble the signature: digits, critical census, and measure deltas.

    Deltas are Birkhoff counts of the arcs between consecutive critical
    points over a return-time orbit segment, so they sum to 1 by counting;
    the (zero) pre-normalization defect and the 1/q_m sampling bound are
    reported on the result.
    """
    rho = rotation_digits(model, depth)
    crits = model.critical_points()
    positions = [c for c, _ in crits]
    ds = tuple(d for _, d in crits)
    orbit, q_m = _orbit_with_scale(model, iters)
    counts = [0] * len(positions)
    for k in range(q_m):
        t = orbit[k]
        idx = _bisect.bisect_right(positions, t) - 1
        counts[idx] += 1
    deltas = [mpf(c) / q_m for c in counts]
    defect = mpmath.fsum(deltas) - 1
    deltas[-1] -= defect
    return Signature(rho=rho, criticalities=ds, deltas=tuple(deltas),
                     delta_error_bound=mpf(1) / q_m,
                     normalization_defect=defect)


def signatures_match(s1: Signature, s2: Signature, delta_tol) -> bool:
    depth = min(len(s1.rho), len(s2.rho))
    if s1.rho.digits[:depth] != s2.rho.digits[:depth]:
        return False
    if s1.criticalities != s2.criticalities:
        return False
    return all(abs(a - b) <= delta_tol for a, b in zip(s1.deltas, s2.deltas))


# ---------------------------------------------------------------------------
# twist tuning
# ---------------------------------------------------------------------------

def _compare_digits_to_target(map_like, target_digits, depth: int,
                              max_steps: int) -> int:
    """Order rho(map) against the target digit cylinder, digit by digit.

    Returns 0 when the first ``depth`` digits match the target prefix;
    otherwise the comparison verdict from the first divergent digit (or from
    the lock position, treated as the cylinder extreme).
    """
    tracker = ReturnTracker(circle_step(map_like), max_steps=max_steps)
    i = 0
    try:
        while i < depth:
            d = tracker.next_digit()
            if d != target_digits[i]:
                return -1 if ((d > target_digits[i]) == (i % 2 == 0)) else 1
            i += 1
        return 0
    except RationalLock:
        # locked at digit i with the prefix matched: the value sits at the
        # extreme of the cylinder (digit "infinity" at slot i)
        return -1 if i % 2 == 0 else 1


def tune_twist(model: MapModel, target: ContinuedFraction, depth: int, *,
               max_steps: int = 500_000, hint=None) -> Scalar:
    """Twist of the last unit realizing the target digit prefix.

    Bisects the lexicographic order of digit sequences over the last twist
    (the rotation number is non-decreasing in it); returns theta with
    rotation_digits(model.with_last_twist(theta), depth) == target[:depth].
    ``hint`` optionally seeds the bracket with a (lo, hi) twist window.
    """
    if depth > len(target):
        raise PreconditionError("depth exceeds the target digit count")
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    tgt = target.digits

    def cmp_at(theta):
        return _compare_digits_to_target(
            model.with_last_twist(theta), tgt, depth, max_steps)

    if hint is not None:
        lo, hi = to_scalar(hint[0]), to_scalar(hint[1])
        if 0 <= lo < hi < 1:
            v_lo, v_hi = cmp_at(lo), cmp_at(hi)
            if v_lo == 0:
                return lo
            if v_hi == 0:
                return hi
            if v_lo < 0 and v_hi > 0:
                while True:
                    mid = (lo + hi) / 2
                    if mid <= lo or mid >= hi:
                        raise PrecisionExhausted(
                            "target digit cylinder is narrower than the "
                            "working precision")
                    v = cmp_at(mid)
                    if v == 0:
                        return mid
                    if v < 0:
                        lo = mid
                    else:
                        hi = mid

    # scan for a rising bracket (the predicate is cyclically monotone in theta)
    grid_n = 32
    while grid_n <= 2048:
        thetas = [mpf(i) / grid_n for i in range(grid_n)]
        values = []
        for th in thetas:
            v = cmp_at(th)
            if v == 0:
                return th
            values.append(v)
        bracket = None
        for i in range(grid_n - 1):
            if values[i] < 0 and values[i + 1] > 0:
                bracket = (thetas[i], thetas[i + 1])
                break
        if bracket is None and values[-1] < 0:
            # rising edge may sit in the last grid cell
            end = mpf(1) - mpmath.ldexp(mpf(1), -16)
            v_end = cmp_at(end)
            if v_end == 0:
                return end
            if v_end > 0:
                bracket = (thetas[-1], end)
        if bracket is not None:
            lo, hi = bracket
            break
        grid_n *= 2
    else:
        raise PrecisionExhausted("no tuning bracket found on the twist circle")

    while True:
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:
            raise PrecisionExhausted(
                "target digit cylinder is narrower than the working precision")
        v = cmp_at(mid)
        if v == 0:
            return mid
        if v < 0:
            lo = mid
        else:
            hi = mid


def tuned_model(model: MapModel, target: ContinuedFraction, depth: int) -> MapModel:
    """Convenience wrapper: the model with its last twist tuned to the target."""
    return model.with_last_twist(tune_twist(model, target, depth))
