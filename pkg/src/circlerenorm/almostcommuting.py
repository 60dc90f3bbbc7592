"""Almost commuting pairs: osculating-polynomial branches, perturbations,
and commutator decay under renormalization.

An almost commuting pair commutes at 0 to a finite order k: the commutator
eta o xi - xi o eta vanishes there together with its derivatives through
order k-1.  Two constructions are provided: replacing every composition
factor of a map-induced pair by a two-point osculating polynomial (critical
factors keep an exact odd-power core), and perturbing one branch of a true
pair by an analytic bump that vanishes to high order at both interval ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mp, mpf

from . import circlemap as cm
from . import pairs as pr
from .errors import (
    CriticalCrowding,
    MonotonicityBroken,
    NonRenormalizable,
    PreconditionError,
)
from .numerics import (
    PolynomialJetPair,
    Scalar,
    eps,
    fd_derivative,
    hermite_fit,
    jet_to_taylor,
    taylor_pow,
    to_scalar,
)


class AlmostCommutingPair(pr.CommutingPair):
    """A commuting pair whose commutation at 0 holds to finite order only.

    ``order`` records the construction's commutation order (the commutator
    vanishes at 0 with derivatives through order-1).
    """

    def __init__(self, eta, xi, *, order: int, source=None, level_hint=None):
        super().__init__(eta, xi, source=source, level_hint=level_hint)
        self.order = order


# ---------------------------------------------------------------------------
# polynomial branches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyFactor:
    """One composition factor: a polynomial, or const + p1(x)^m around a
    critical point (the odd-power core is kept exact)."""

    lo: Scalar
    hi: Scalar
    poly: object               # HermitePolynomial (p1 for the critical form)
    power: int = 1             # m = 1 marks a plain polynomial factor
    const: Scalar = None

    def value(self, x):
        if self.power == 1:
            return self.poly(x)
        return self.const + self.poly(x) ** self.power

    def derivative(self, x):
        j = self.poly.jet(x, 1)
        if self.power == 1:
            return j[1]
        return self.power * j[0] ** (self.power - 1) * j[1]


class PolynomialBranch:
    """A branch rebuilt as a chain of polynomial composition factors."""

    def __init__(self, factors):
        self.factors = tuple(factors)

    def value(self, x):
        for f in self.factors:
            x = f.value(x)
        return x

    def derivative(self, x):
        d = mpf(1)
        for f in self.factors:
            d *= f.derivative(x)
            x = f.value(x)
        return d


def _critical_candidates(model, lo, hi):
    out = []
    for c, d in model.critical_points():
        k = mpmath.ceil(lo - c)
        while c + k <= hi:
            out.append((c + k, d))
            k += 1
    return out


def _root_jet_at_critical(model, y_star, m, order):
    """Jet of psi = (f - f(y*))^(1/m) at the critical point itself."""
    full = cm.evaluate(model, y_star, order + m)
    taylor = jet_to_taylor(full.derivatives)
    series = taylor[m: m + order + 1]  # Delta / (x - y*)^m
    if series[0] <= 0:
        raise PreconditionError("critical core has non-positive leading term")
    root = taylor_pow(series, mpf(1) / m, order)
    # psi = (x - y*) * root: shift-multiply by one power of (x - y*)
    coeffs = [mpf(0)] + root[:order]
    return [c * mpmath.factorial(j) for j, c in enumerate(coeffs[: order + 1])]


def _psi_jet(model, y_star, m, x, order):
    """Jet of psi(x) = sgn(x - y*) |f(x) - f(y*)|^(1/m) at a regular x."""
    if x == y_star:
        return _root_jet_at_critical(model, y_star, m, order)
    f_jet = cm.evaluate(model, x, order)
    f_star = model.lift(y_star)
    delta = list(jet_to_taylor(f_jet.derivatives))
    delta[0] -= f_star
    if x > y_star:
        root = taylor_pow(delta, mpf(1) / m, order)
    else:
        root = [-c for c in taylor_pow([-c for c in delta], mpf(1) / m, order)]
    return [c * mpmath.factorial(j) for j, c in enumerate(root)]


def _osculate_factor(model, letter, lo, hi, D):
    """Polynomial stand-in for one f (or f-1) application on [lo, hi]."""
    shift = mpf(1) if letter == "E" else mpf(0)
    crits = _critical_candidates(model, lo, hi)
    if len(crits) > 1:
        raise CriticalCrowding(
            f"factor interval [{mpmath.nstr(lo, 8)}, {mpmath.nstr(hi, 8)}] "
            f"holds {len(crits)} critical points; deepen the level")
    if not crits:
        jl = cm.evaluate(model, lo, D).derivatives
        jr = cm.evaluate(model, hi, D).derivatives
        jl = (jl[0] - shift,) + tuple(jl[1:])
        jr = (jr[0] - shift,) + tuple(jr[1:])
        poly = hermite_fit(PolynomialJetPair(lo, jl, hi, jr))
        return PolyFactor(lo, hi, poly)
    y_star, m = crits[0]
    jl = _psi_jet(model, y_star, m, lo, D)
    jr = _psi_jet(model, y_star, m, hi, D)
    p1 = hermite_fit(PolynomialJetPair(lo, tuple(jl), hi, tuple(jr)))
    const = model.lift(y_star) - shift
    return PolyFactor(lo, hi, p1, power=m, const=const)


def _osculate_branch(branch: pr.Branch, model, D: int) -> PolynomialBranch:
    ends = sorted((mpf(0), branch.endpoint * branch.scale))
    factors = []
    lo, hi = ends
    for letter in branch.word:
        factors.append(_osculate_factor(model, letter, lo, hi, D))
        lo = branch.system.apply(letter, lo)
        hi = branch.system.apply(letter, hi)
        if lo > hi:
            lo, hi = hi, lo
    return PolynomialBranch(factors)


def osculate_pair(pair: pr.CommutingPair, level: int, D: int) -> AlmostCommutingPair:
    """Replace every composition factor by an osculating polynomial.

    Diffeomorphic factors become degree <= 2D+1 Hermite interpolants of the
    endpoint jets; factors containing a critical point keep the exact odd
    power (x-a)^m conjugated by an osculated local root.  The resulting pair
    is rescaled so xi(0) = 1.
    """
    if not isinstance(pair.eta.system, pr.MapWordSystem):
        raise PreconditionError("osculation needs a map-induced pair")
    if pair.level_hint is not None and pair.level_hint != level:
        raise PreconditionError(
            f"pair was built at level {pair.level_hint}, not {level}")
    if D < 3:
        raise PreconditionError("osculation order D must be >= 3")
    model = pair.eta.system.map
    eta_chain = _osculate_branch(pair.eta, model, D)
    xi_chain = _osculate_branch(pair.xi, model, D)
    system = pr.CallablePairSystem(eta_chain.value, xi_chain.value,
                                   eta_chain.derivative, xi_chain.derivative)
    scale = xi_chain.value(mpf(0))
    eta = pr.Branch(system, "E", scale)
    xi = pr.Branch(system, "X", scale)
    return AlmostCommutingPair(eta, xi, order=D, source=pair.source,
                               level_hint=level)


# ---------------------------------------------------------------------------
# analytic perturbations
# ---------------------------------------------------------------------------

def perturb_to_almost_commuting(pair: pr.CommutingPair, eps_size,
                                k: int = 3) -> AlmostCommutingPair:
    """xi + eps * bump, with the bump vanishing to order k at 0 and eta(0).

    The bump (x(x - b))^k is normalized to sup 1 on I_xi, so the commutator
    scale tracks eps; the construction works on the normalized pair and
    keeps commutation order exactly k at 0.
    """
    eps_size = to_scalar(eps_size)
    base = pair.normalized()
    if not eps_size < mpf("0.1") * abs(base.a):
        raise PreconditionError("perturbation must satisfy eps < 0.1*|xi(0)|")
    b = base.b
    norm = (b * b / 4) ** k

    def bump(x):
        return (x * (x - b)) ** k / norm

    def bump_d(x):
        return k * (x * (x - b)) ** (k - 1) * (2 * x - b) / norm

    eta_val = base.eta.value
    xi_val = base.xi.value
    eta_d = base.eta.derivative
    xi_d = base.xi.derivative

    def xi_new(x):
        return xi_val(x) + eps_size * bump(x)

    def xi_new_d(x):
        return xi_d(x) + eps_size * bump_d(x)

    # value ordering on a grid: robust against the legitimate critical
    # point at 0 where the derivative vanishes
    lo, hi = sorted((mpf(0), b))
    samples = [xi_new(lo + (hi - lo) * mpf(i) / 64) for i in range(65)]
    for i in range(64):
        if not samples[i] < samples[i + 1]:
            raise MonotonicityBroken(
                "perturbed xi stopped being increasing on its interval")
    system = pr.CallablePairSystem(eta_val, xi_new, eta_d, xi_new_d)
    return AlmostCommutingPair(pr.Branch(system, "E", mpf(1)),
                               pr.Branch(system, "X", mpf(1)),
                               order=k, source=pair.source,
                               level_hint=pair.level_hint)


def commutation_order(pair, max_order: int = 6, scale=None) -> int:
    """Smallest j with a nonvanishing j-th commutator derivative at 0.

    Central finite differences at spacing u^(1/(order+2)); a derivative is
    accepted as nonzero only above the roundoff amplification of its
    stencil.  Returns max_order + 1 when everything through max_order
    vanishes.
    """
    if scale is None:
        scale = min(abs(pair.a), abs(pair.b)) / 4

    def comm(x):
        return pr.commutator_value(pair, x)

    for j in range(max_order + 1):
        val = fd_derivative(comm, mpf(0), j, scale=scale)
        h = (eps() ** (mpf(1) / (j + 2))) * to_scalar(scale)
        noise = mpf(10) ** 6 * eps() / h ** j
        if abs(val) > noise:
            return j
    return max_order + 1


# ---------------------------------------------------------------------------
# decay series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecaySeries:
    """Commutator norms along the renormalization orbit."""

    points: tuple          # ((m, norm), ...)
    truncated: bool = False

    def norms(self):
        return [n for _, n in self.points]

    def to_csv(self) -> str:
        from .numerics import format_scalar
        lines = ["m,norm"]
        for m, n in self.points:
            lines.append(f"{m},{format_scalar(n)}")
        return "\n".join(lines) + "\n"


def commutator_decay_series(pair, m_max: int, radius,
                            samples: int = 64) -> DecaySeries:
    """Renormalize m_max times, recording the commutator norm each step.

    Each recorded norm is taken on the pair rescaled so its dynamical
    interval [eta(0), xi(0)] has length exactly 2 (the same frame the C0
    metric normalizes to), which keeps the sampling disk comparable across
    levels; heights are recomputed at every step.  A NonRenormalizable
    failure truncates the series and sets the flag instead of discarding
    the data.
    """
    radius = to_scalar(radius)
    current = pair.normalized()
    points = []
    truncated = False
    for m in range(m_max + 1):
        framed = current.rescaled(2 / (current.a - current.b))
        points.append((m, pr.commutator_norm(framed, radius, samples)))
        if m == m_max:
            break
        try:
            current = pr.renormalize(current)
        except NonRenormalizable:
            truncated = True
            break
    return DecaySeries(tuple(points), truncated)


def rotation_correction_offset(pair, target: "cm.ContinuedFraction",
                               depth: int, span=None) -> Scalar:
    """Additive chart offset b making the glued map's digits hit the target.

    Realizes the monotone-family correction g_b = f + b (mod 1) by bisection
    on the glued circle map.
    """
    from .circlemap import _compare_digits_to_target
    glued = pr.glue(pair)
    if span is None:
        span = mpf("0.25")

    class _Shifted:
        def __init__(self, offset):
            self.g = glued.with_offset(offset)

        def lift(self, x):
            return self.g.lift(x)

    def cmp_at(offset):
        return _compare_digits_to_target(_Shifted(offset), target.digits,
                                         depth, 500_000)

    lo, hi = -span, span
    v_lo, v_hi = cmp_at(lo), cmp_at(hi)
    if v_lo == 0:
        return lo
    if v_hi == 0:
        return hi
    if not (v_lo < 0 < v_hi):
        raise PreconditionError("correction span does not bracket the target")
    while True:
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:
            raise PreconditionError(
                "target cylinder narrower than working precision")
        v = cmp_at(mid)
        if v == 0:
            return mid
        if v < 0:
            lo = mid
        else:
            hi = mid
