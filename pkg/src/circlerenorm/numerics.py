"""Precision-generic scalar arithmetic and small numerical kernels.

Everything downstream works with mpmath floats at one of three working
precisions (bits): standard (53, plain double), extended (106, the
double-double width, ~31 digits), high (212, ~63 digits).  The precision is
a runtime configuration of the whole pipeline; ``use_precision`` or the
``working_precision`` context manager set it.

The module also houses continued fractions, monotone bisection, two-point
Hermite (osculating) interpolation, log-linear decay fitting, and the small
truncated-Taylor-series kernels used for jet propagation.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mp, mpf

from .errors import (
    DegenerateInterval,
    EmptyExpansion,
    NonPositiveData,
    NoSignChange,
    PreconditionError,
    PrecisionExhausted,
)

Scalar = mpmath.mpf

PRECISION_BITS = {
    "standard": 53,
    "extended": 106,
    "high": 212,
}

_ALIASES = {"std": "standard", "ext": "extended", "hi": "high", "high": "high",
            "standard": "standard", "extended": "extended"}

DEFAULT_PRECISION = "extended"


def resolve_precision(level: str) -> str:
    try:
        return _ALIASES[level.lower()]
    except KeyError:
        raise PreconditionError(f"unknown precision level {level!r}") from None


def use_precision(level: str = DEFAULT_PRECISION) -> None:
    """Set the working precision for the whole pipeline."""
    mp.prec = PRECISION_BITS[resolve_precision(level)]


@contextmanager
def working_precision(level: str):
    """Temporarily switch the working precision."""
    old = mp.prec
    mp.prec = PRECISION_BITS[resolve_precision(level)]
    try:
        yield mp
    finally:
        mp.prec = old


# default the pipeline to extended; callers may override at any time
use_precision(DEFAULT_PRECISION)


def eps() -> Scalar:
    """Unit roundoff at the current precision."""
    return mp.eps


def to_scalar(v) -> Scalar:
    """Convert to an mpf at the working precision (strings preferred for decimals)."""
    if isinstance(v, mpmath.mpf):
        return v
    return mpf(v)


def format_scalar(x) -> str:
    """Decimal form with enough digits for an exact mpf round-trip."""
    return mpmath.nstr(x, mp.dps + 5)


def parse_scalar(s: str) -> Scalar:
    return mpf(s.strip())


# ---------------------------------------------------------------------------
# continued fractions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuedFraction:
    """A finite block of continued-fraction digits.

    ``exhausted`` means the expansion terminated (the underlying number is
    the exact rational ``[digits]``); otherwise the digits are the prefix of
    a longer (possibly infinite) expansion.
    """

    digits: tuple = ()
    exhausted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if any(d < 1 for d in self.digits):
            raise PreconditionError("continued-fraction digits must be >= 1")

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    @classmethod
    def constant(cls, digit: int, depth: int) -> "ContinuedFraction":
        return cls((digit,) * depth)

    @classmethod
    def golden(cls, depth: int) -> "ContinuedFraction":
        return cls.constant(1, depth)

    def value(self) -> Scalar:
        """The rational value of the digit block, as a working-precision scalar."""
        if not self.digits:
            raise EmptyExpansion("no digits")
        p, q = self.convergents()[-1]
        return mpf(p) / q

    def convergents(self):
        return convergents(self)

    def bounds(self):
        """Exact rational bounds for every number whose expansion starts here.

        Returns a ``(lo, hi)`` pair of ``Fraction``.  For an exhausted
        expansion both bounds equal the exact value.
        """
        if not self.digits:
            raise EmptyExpansion("no digits")
        conv = convergents(self)
        p, q = conv[-1]
        end = Fraction(p, q)
        if self.exhausted:
            return end, end
        # the other end of the cylinder is [d_0, ..., d_{k-1}, d_k + 1]
        bumped = ContinuedFraction(self.digits[:-1] + (self.digits[-1] + 1,))
        p2, q2 = convergents(bumped)[-1]
        other = Fraction(p2, q2)
        return (end, other) if end < other else (other, end)


def cf_expand(x, depth: int) -> ContinuedFraction:
    """First ``depth`` continued-fraction digits of x in (0, 1).

    Each digit is accepted only if it is stable under a +-10*eps perturbation
    of the remainder; an unstable digit raises PrecisionExhausted.  A
    remainder indistinguishable from zero (or from an exact reciprocal)
    terminates the expansion with ``exhausted`` set.
    """
    x = to_scalar(x)
    if not (0 < x < 1):
        raise PreconditionError("cf_expand requires 0 < x < 1")
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    guard = 10 * eps()
    digits = []
    rem = x
    exhausted = False
    while len(digits) < depth:
        if rem <= guard:
            exhausted = True
            break
        inv = 1 / rem
        near = mpmath.nint(inv)
        if near >= 1 and abs(inv - near) <= guard * max(mpf(1), inv * inv):
            # remainder is an exact reciprocal to working precision
            digits.append(int(near))
            exhausted = True
            break
        d_lo = int(mpmath.floor(1 / (rem + guard)))
        d_hi = int(mpmath.floor(1 / (rem - guard)))
        if d_lo != d_hi:
            raise PrecisionExhausted(
                f"digit {len(digits)} of the expansion is unreliable at this precision")
        digits.append(d_lo)
        rem = inv - d_lo
    return ContinuedFraction(tuple(digits), exhausted)


def convergents(cf: ContinuedFraction):
    """Coprime (p_n, q_n) pairs for the digit block, starting from (0, 1)."""
    if not cf.digits:
        raise EmptyExpansion("convergents of an empty expansion")
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    out = [(0, 1)]
    for r in cf.digits:
        p, p_prev = r * p + p_prev, p
        q, q_prev = r * q + q_prev, q
        out.append((p, q))
    return out


def gauss_shift(cf: ContinuedFraction) -> ContinuedFraction:
    """Drop the leading digit (the Gauss map on digit sequences)."""
    if not cf.digits:
        raise EmptyExpansion("gauss_shift of an empty expansion")
    tail = cf.digits[1:]
    return ContinuedFraction(tail, exhausted=cf.exhausted or not tail)


def compare_expansions(observed: ContinuedFraction, target: ContinuedFraction) -> int:
    """Order the number behind ``observed`` against the ``target`` cylinder.

    Returns -1 / +1 when every number with the observed prefix lies below /
    above the target cylinder, and 0 when the observed digits match the full
    target prefix.  An observed expansion that terminates early is treated as
    the extreme point of its cylinder (digit "infinity" at the next slot),
    which is how locked orbits compare against irrational targets.
    """
    o, t = observed.digits, target.digits
    for i in range(min(len(o), len(t))):
        if o[i] != t[i]:
            # a larger digit at an even index means a smaller number
            return -1 if ((o[i] > t[i]) == (i % 2 == 0)) else 1
    if len(o) >= len(t):
        return 0
    i = len(o)
    return -1 if i % 2 == 0 else 1


# ---------------------------------------------------------------------------
# monotone bisection
# ---------------------------------------------------------------------------

def bisect_monotone(f, lo, hi, tol, max_iter: int = 20000):
    """Bisect a monotone function (sign change) or predicate (False/True flip).

    Returns the bracket midpoint once the bracket width is <= tol, or once
    the bracket stops shrinking at the precision floor.  The final bracket
    always contains the sign change.
    """
    lo, hi = to_scalar(lo), to_scalar(hi)
    if not hi > lo:
        raise PreconditionError("bisect_monotone requires lo < hi")
    flo, fhi = f(lo), f(hi)
    if isinstance(flo, bool):
        if flo == fhi:
            raise NoSignChange("predicate does not flip between endpoints")
        hi_true = fhi

        def _side(v):
            return v if hi_true else (not v)
    else:
        if flo == 0:
            return lo
        if fhi == 0:
            return hi
        if (flo > 0) == (fhi > 0):
            raise NoSignChange("endpoints agree in sign")
        hi_pos = fhi > 0

        def _side(v):
            return (v > 0) == hi_pos
    tol = to_scalar(tol)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:  # precision floor
            break
        if _side(f(mid)):
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# truncated Taylor-series kernels (jets as coefficient lists)
# ---------------------------------------------------------------------------

def taylor_mul(a, b, order: int):
    out = [mpf(0)] * (order + 1)
    for i, ai in enumerate(a[: order + 1]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: order + 1 - i]):
            out[i + j] += ai * bj
    return out


def taylor_compose(outer, inner, order: int):
    """Coefficients of outer(inner(h)) mod h^(order+1); inner[0] must be 0."""
    if inner[0] != 0:
        raise PreconditionError("taylor_compose needs inner constant term 0")
    out = [mpf(0)] * (order + 1)
    out[0] = outer[0]
    power = [mpf(1)] + [mpf(0)] * order  # inner^k
    for k in range(1, min(len(outer), order + 1)):
        power = taylor_mul(power, inner, order)
        ck = outer[k]
        if ck == 0:
            continue
        for i in range(k, order + 1):
            out[i] += ck * power[i]
    return out


def taylor_pow(a, alpha, order: int):
    """Coefficients of a(h)^alpha for a[0] > 0 and real alpha."""
    a0 = a[0]
    if not a0 > 0:
        raise PreconditionError("taylor_pow needs a positive constant term")
    alpha = to_scalar(alpha)
    b = [mpf(0)] * (order + 1)
    b[0] = a0 ** alpha
    for n in range(1, order + 1):
        acc = mpf(0)
        for k in range(1, n + 1):
            ak = a[k] if k < len(a) else mpf(0)
            if ak == 0:
                continue
            acc += ((alpha + 1) * k - n) * ak * b[n - k]
        b[n] = acc / (n * a0)
    return b


def taylor_invert(a, order: int):
    """Compositional inverse g with a(g(h)) = h; needs a[0] = 0, a[1] != 0."""
    if a[0] != 0 or a[1] == 0:
        raise PreconditionError("taylor_invert needs a[0] = 0 and a[1] != 0")
    g = [mpf(0)] * (order + 1)
    g[1] = 1 / a[1]
    for n in range(2, order + 1):
        comp = taylor_compose(list(a[: n + 1]), g, n)
        g[n] = -comp[n] / a[1]
    return g


def jet_to_taylor(jet):
    """Derivative list [f, f', f'', ...] -> Taylor coefficients."""
    return [d / mpmath.factorial(k) for k, d in enumerate(jet)]


def taylor_to_jet(coeffs):
    return [c * mpmath.factorial(k) for k, c in enumerate(coeffs)]


def fd_derivative(f, x, order: int, scale=1):
    """Central finite-difference estimate of f^(order)(x).

    Spacing follows the accuracy/cancellation balance h = u^(1/(order+2))
    times ``scale``.  Uses a symmetric (2m+1)-point polynomial fit.
    """
    if order == 0:
        return f(x)
    x = to_scalar(x)
    h = (eps() ** (mpf(1) / (order + 2))) * to_scalar(scale)
    m = order // 2 + 1
    ks = list(range(-m, m + 1))
    n = len(ks)
    # fit in the normalized variable t = (x_i - x)/h for conditioning
    A = mpmath.matrix(n, n)
    rhs = mpmath.matrix(n, 1)
    for i, k in enumerate(ks):
        rhs[i] = f(x + k * h)
        p = mpf(1)
        for j in range(n):
            A[i, j] = p
            p *= k
    coeffs = mpmath.lu_solve(A, rhs)
    return coeffs[order] * mpmath.factorial(order) / h ** order


# ---------------------------------------------------------------------------
# two-point Hermite (osculating) interpolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolynomialJetPair:
    """Endpoint jets (value and derivatives through order D) to interpolate.

    Jets are derivative lists [f(x), f'(x), ..., f^(D)(x)].  The nominal
    degree budget of the fit is 2D+2; one spare degree of freedom is left
    at zero, so the interpolant has degree <= 2D+1.
    """

    x_left: Scalar
    left_jet: tuple
    x_right: Scalar
    right_jet: tuple

    def __post_init__(self):
        object.__setattr__(self, "left_jet", tuple(self.left_jet))
        object.__setattr__(self, "right_jet", tuple(self.right_jet))
        if len(self.left_jet) != len(self.right_jet):
            raise PreconditionError("endpoint jets must have the same order")
        if not self.left_jet:
            raise PreconditionError("jets must contain at least the value")

    @property
    def order(self) -> int:
        return len(self.left_jet) - 1

    @property
    def degree(self) -> int:
        return 2 * self.order + 2


class HermitePolynomial:
    """Newton-form interpolant on repeated nodes (numerically stable form).

    ``monomial_coefficients`` expands to the power basis when the raw
    coefficients are wanted; evaluation and jets stay in Newton form.
    """

    def __init__(self, nodes, newton_coeffs):
        self.nodes = tuple(nodes)
        self.newton_coeffs = tuple(newton_coeffs)

    @property
    def degree(self) -> int:
        return len(self.newton_coeffs) - 1

    def __call__(self, x):
        acc = self.newton_coeffs[-1]
        for i in range(len(self.newton_coeffs) - 2, -1, -1):
            acc = acc * (x - self.nodes[i]) + self.newton_coeffs[i]
        return acc

    def derivative(self, x):
        return self.jet(x, 1)[1]

    def jet(self, x, order: int):
        """Derivative list [p(x), p'(x), ..., p^(order)(x)] via Taylor Horner."""
        acc = [self.newton_coeffs[-1]] + [mpf(0)] * order
        for i in range(len(self.newton_coeffs) - 2, -1, -1):
            lin = [x - self.nodes[i], mpf(1)] + [mpf(0)] * max(0, order - 1)
            acc = taylor_mul(acc, lin[: order + 1], order)
            acc[0] += self.newton_coeffs[i]
        return taylor_to_jet(acc)

    def monomial_coefficients(self):
        coeffs = [self.newton_coeffs[-1]]
        for i in range(len(self.newton_coeffs) - 2, -1, -1):
            # multiply by (x - node_i), then add c_i
            coeffs = [mpf(0)] + coeffs
            node = self.nodes[i]
            for j in range(len(coeffs) - 1):
                coeffs[j] -= node * coeffs[j + 1]
            coeffs[0] += self.newton_coeffs[i]
        return coeffs


def hermite_fit(jets: PolynomialJetPair) -> HermitePolynomial:
    """Unique polynomial of degree <= 2D+1 matching both endpoint jets."""
    xl, xr = to_scalar(jets.x_left), to_scalar(jets.x_right)
    if abs(xr - xl) <= 100 * eps() * max(mpf(1), abs(xl), abs(xr)):
        raise DegenerateInterval("interpolation interval below precision floor")
    D = jets.order
    k = D + 1
    nodes = (xl,) * k + (xr,) * k
    vals = [to_scalar(v) for v in jets.left_jet] + [to_scalar(v) for v in jets.right_jet]
    # divided-difference table with repeated nodes; column 0 holds f(z_i)
    n = 2 * k
    col = [vals[0] if i < k else vals[k] for i in range(n)]
    coeffs = [col[0]]
    prev = col
    for j in range(1, n):
        cur = [mpf(0)] * (n - j)
        for i in range(n - j):
            if nodes[i + j] == nodes[i]:
                # repeated node: f^(j)(z_i) / j!
                base = vals[j] if i < k - j else vals[k + j]
                cur[i] = base / mpmath.factorial(j)
            else:
                cur[i] = (prev[i + 1] - prev[i]) / (nodes[i + j] - nodes[i])
        coeffs.append(cur[0])
        prev = cur
    return HermitePolynomial(nodes, coeffs)


# ---------------------------------------------------------------------------
# decay-rate regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through (n, log d): d_n ~ C * lambda^n.

    ``log_lambda < 0`` certifies empirical geometric decay; the residual
    (max absolute deviation of the log data from the line) is always
    reported alongside, never hidden.
    """

    log_c: Scalar
    log_lambda: Scalar
    residual: Scalar

    @property
    def decays(self) -> bool:
        return self.log_lambda < 0


def linear_fit(xs, ys):
    """Unweighted least squares; returns (slope, intercept, max_abs_residual)."""
    n = len(xs)
    if n < 2:
        raise PreconditionError("linear_fit needs at least two points")
    xs = [to_scalar(x) for x in xs]
    ys = [to_scalar(y) for y in ys]
    xbar = mpmath.fsum(xs) / n
    ybar = mpmath.fsum(ys) / n
    sxx = mpmath.fsum((x - xbar) ** 2 for x in xs)
    if sxx == 0:
        raise PreconditionError("linear_fit needs distinct abscissae")
    sxy = mpmath.fsum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    resid = max(abs(y - (intercept + slope * x)) for x, y in zip(xs, ys))
    return slope, intercept, resid


def fit_decay(series) -> DecayFit:
    """Fit log d against n for a series of (n, d) with all d > 0."""
    pts = [(int(n), to_scalar(d)) for n, d in series]
    if len(pts) < 3:
        raise PreconditionError("fit_decay needs at least three points")
    if any(d <= 0 for _, d in pts):
        raise NonPositiveData("fit_decay requires d > 0")
    xs = [mpf(n) for n, _ in pts]
    ys = [mpmath.log(d) for _, d in pts]
    slope, intercept, resid = linear_fit(xs, ys)
    return DecayFit(log_c=intercept, log_lambda=slope, residual=resid)
