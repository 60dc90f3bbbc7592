"""Commuting pairs: heights, renormalization, the C0 metric, gluing, commutators.

Branches are lazy composition words over two base letters plus one linear
conjugation factor, never truncated series: evaluating a branch replays the
literal word.  For pairs induced from a circle map the letters are
'X': x -> f(x) and 'E': x -> f(x) - 1, so a branch word of length m with p
letters 'E' evaluates f^m - p exactly; renormalization grows words by
concatenation, which keeps commutation of map-induced pairs exact down to
roundoff.

All linear rescalings (the A(x) = x/eta(0) of renormalization) are carried
as a single conjugation factor: branch(x) = W(c*x)/c.  The normalized
C0 distance is computed purely from base-coordinate quantities, in which the
conjugation factor cancels algebraically, so the metric is invariant under
x -> lambda*x exactly, not approximately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
from mpmath import mp, mpf

from . import circlemap as cm
from .errors import (
    BoundaryHit,
    CriticalGluePoint,
    DepthUnavailable,
    EvaluationOverflow,
    NonRenormalizable,
    PreconditionError,
)
from .numerics import ContinuedFraction, Scalar, eps, format_scalar, to_scalar

INFINITE_HEIGHT = math.inf


def cached_rotation_digits(map_like, depth: int) -> ContinuedFraction:
    """rotation_digits with a per-map cache keyed by working precision."""
    cache = getattr(map_like, "_cache", None)
    if cache is None:
        try:
            map_like._cache = cache = {}
        except AttributeError:
            return cm.rotation_digits(map_like, depth)
    key = ("digits", mp.prec)
    cf = cache.get(key)
    if cf is None or len(cf) < depth:
        cf = cm.rotation_digits(map_like, depth)
        cache[key] = cf
    return ContinuedFraction(cf.digits[:depth])


# ---------------------------------------------------------------------------
# letter systems
# ---------------------------------------------------------------------------

class MapWordSystem:
    """Letters over a circle-map lift: 'X' applies f, 'E' applies f - 1."""

    kind = "map"

    def __init__(self, map_like):
        self.map = map_like

    def apply(self, letter: str, z):
        y = self.map.lift(z)
        return y - 1 if letter == "E" else y

    def apply_with_derivative(self, letter: str, z):
        jet = self.map.lift_jet(z, 1)
        y = jet.value
        return (y - 1 if letter == "E" else y), jet.derivative()


class CallablePairSystem:
    """Letters bound to two explicit functions (constructed/perturbed pairs).

    'E' applies the eta-base, 'X' the xi-base.  ``eta_d``/``xi_d`` supply
    derivatives when jet information is needed.
    """

    kind = "callable"

    def __init__(self, eta_fn, xi_fn, eta_d=None, xi_d=None):
        self.eta_fn = eta_fn
        self.xi_fn = xi_fn
        self.eta_d = eta_d
        self.xi_d = xi_d

    def apply(self, letter: str, z):
        return self.eta_fn(z) if letter == "E" else self.xi_fn(z)

    def apply_with_derivative(self, letter: str, z):
        if letter == "E":
            if self.eta_d is None:
                raise PreconditionError("eta derivative not available")
            return self.eta_fn(z), self.eta_d(z)
        if self.xi_d is None:
            raise PreconditionError("xi derivative not available")
        return self.xi_fn(z), self.xi_d(z)


# ---------------------------------------------------------------------------
# branches and pairs
# ---------------------------------------------------------------------------

_IM_CAP = mpf(2)


class Branch:
    """One branch: composition word conjugated by x -> x/scale.

    ``word`` is applied leftmost-first; the branch value is W(scale*x)/scale.
    ``endpoint`` is the non-zero end of the branch's domain interval.
    """

    __slots__ = ("system", "word", "scale", "endpoint")

    def __init__(self, system, word: str, scale, endpoint=None):
        self.system = system
        self.word = word
        self.scale = to_scalar(scale)
        self.endpoint = endpoint

    def __len__(self):
        return len(self.word)

    def base_value(self, y):
        """Apply the word in base coordinates (no conjugation)."""
        for letter in self.word:
            y = self.system.apply(letter, y)
        return y

    def base_value_checked(self, y):
        """Base-coordinate evaluation with the complex safety guard."""
        for letter in self.word:
            y = self.system.apply(letter, y)
            if isinstance(y, mpmath.mpc):
                if not mpmath.isfinite(y) or abs(y.imag) > _IM_CAP:
                    raise EvaluationOverflow(
                        "intermediate image left the safety strip")
        return y

    def value(self, x):
        return self.base_value(self.scale * x) / self.scale

    def value_checked(self, x):
        return self.base_value_checked(self.scale * x) / self.scale

    def value_and_derivative(self, x):
        y = self.scale * x
        dy = mpf(1)
        for letter in self.word:
            y, d = self.system.apply_with_derivative(letter, y)
            dy *= d
        return y / self.scale, dy

    def derivative(self, x):
        return self.value_and_derivative(x)[1]

    def prefix_value(self, y, count: int):
        """Base-coordinate value of the first ``count`` letters."""
        for letter in self.word[:count]:
            y = self.system.apply(letter, y)
        return y


class CommutingPair:
    """An ordered pair (eta, xi) on abutting intervals around 0.

    Endpoints a = xi(0) and b = eta(0) satisfy a*b < 0; eta lives on the
    interval [0, a] and xi on [0, b].  Pairs are immutable: every operation
    returns a new pair.
    """

    def __init__(self, eta: Branch, xi: Branch, *, level_hint=None,
                 source=None):
        if eta.scale != xi.scale:
            raise PreconditionError("pair branches must share one rescaling")
        self.eta = eta
        self.xi = xi
        # base-coordinate endpoint values; the conjugation factor divides out
        self.alpha_base = xi.base_value(mpf(0))
        self.beta_base = eta.base_value(mpf(0))
        self.a = self.alpha_base / xi.scale
        self.b = self.beta_base / eta.scale
        if not (self.a * self.b < 0):
            raise PreconditionError(
                f"pair endpoints must straddle 0 (a={self.a}, b={self.b})")
        eta.endpoint = self.a
        xi.endpoint = self.b
        self.level_hint = level_hint
        self.source = source

    # -- geometry -------------------------------------------------------

    @property
    def scale(self):
        return self.eta.scale

    @property
    def ratio(self):
        """The scale-free endpoint ratio xi(0)/eta(0) in base coordinates."""
        return self.alpha_base / self.beta_base

    def rescaled(self, lam) -> "CommutingPair":
        """The pair conjugated by x -> lam * x."""
        lam = to_scalar(lam)
        if lam == 0:
            raise PreconditionError("rescaling factor must be nonzero")
        return CommutingPair(
            Branch(self.eta.system, self.eta.word, self.eta.scale / lam),
            Branch(self.xi.system, self.xi.word, self.xi.scale / lam),
            level_hint=self.level_hint, source=self.source)

    def normalized(self) -> "CommutingPair":
        """Rescaled so that xi(0) = 1 (the paper's normalized representative)."""
        return self.rescaled(1 / self.a)

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        lines = []
        src = self.source
        if src is not None and hasattr(src, "to_text"):
            lines.append("[model]")
            lines.extend(src.to_text().strip().splitlines())
        lines.append(f"[eta] scale={format_scalar(self.eta.scale)} word={self.eta.word}")
        lines.append(f"[xi] scale={format_scalar(self.xi.scale)} word={self.xi.word}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CommutingPair":
        from .numerics import parse_scalar
        model_lines, branch_spec = [], {}
        section = None
        for line in text.strip().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("[model]"):
                section = "model"
                continue
            if line.startswith("[eta]") or line.startswith("[xi]"):
                name = "eta" if line.startswith("[eta]") else "xi"
                fields = dict(part.split("=", 1) for part in line.split()[1:])
                branch_spec[name] = (parse_scalar(fields["scale"]), fields["word"])
                continue
            if section == "model":
                model_lines.append(line)
        if not model_lines:
            raise PreconditionError("pair text lacks a [model] section")
        model = cm.MapModel.from_text("\n".join(model_lines))
        system = MapWordSystem(model)
        eta_scale, eta_word = branch_spec["eta"]
        xi_scale, xi_word = branch_spec["xi"]
        return cls(Branch(system, eta_word, eta_scale),
                   Branch(system, xi_word, xi_scale), source=model)


def pair_from_map(model, n: int, digits: ContinuedFraction | None = None) -> CommutingPair:
    """The pair of return branches (f^{q_{n+1}}, f^{q_n}) on the lift near 0.

    Branch words are built by the renormalization recursion, so the word of
    eta has length q_{n+1} with p_{n+1} occurrences of 'E' and the word of xi
    has length q_n with p_n occurrences.
    """
    if digits is None:
        digits = cached_rotation_digits(model, n + 2)
    if len(digits) < n + 2:
        raise DepthUnavailable(
            f"need rotation digits to depth {n + 2}, have {len(digits)}")
    r = digits.digits
    system = MapWordSystem(model)
    w_xi = "X"
    w_eta = "X" * (r[0] - 1) + "E"
    for j in range(1, n + 1):
        w_eta, w_xi = w_xi + w_eta * r[j], w_eta
    return CommutingPair(Branch(system, w_eta, mpf(1)),
                         Branch(system, w_xi, mpf(1)),
                         level_hint=n, source=model)


# ---------------------------------------------------------------------------
# height and renormalization
# ---------------------------------------------------------------------------

def _height_and_landing(pair: CommutingPair, max_iter: int):
    """(height, eta^height(xi(0))) or (INFINITE_HEIGHT, None)."""
    if max_iter < 1:
        raise PreconditionError("max_iter must be >= 1")
    scale_ref = max(abs(pair.a), abs(pair.b))
    boundary_tol = mpmath.ldexp(eps(), 16) * scale_ref
    stall_tol = mpmath.ldexp(eps(), 4) * scale_ref
    positive = pair.a > 0
    y = pair.a
    prev = y
    for j in range(1, max_iter + 1):
        y = pair.eta.value(y)
        if abs(y) <= boundary_tol:
            raise BoundaryHit(
                f"eta^{j}(xi(0)) lands on 0 to working precision")
        if (y > 0) != positive:
            if j == 1:
                raise NonRenormalizable(
                    "eta(xi(0)) already crossed 0: pair axioms violated")
            return j - 1, prev
        if abs(y - prev) <= stall_tol:
            return INFINITE_HEIGHT, None
        prev = y
    return INFINITE_HEIGHT, None


def height(pair: CommutingPair, max_iter: int = 10000):
    """Number of eta-iterates of xi(0) before the orbit crosses 0.

    Returns INFINITE_HEIGHT (math.inf) when no crossing occurs within
    ``max_iter`` (eta has a fixed point).  Raises BoundaryHit when an iterate
    lands on 0 to working precision.
    """
    h, _ = _height_and_landing(pair, max_iter)
    return h


def renormalize(pair: CommutingPair, max_iter: int = 10000) -> CommutingPair:
    """(eta^a o xi, eta) on the shrunk intervals, rescaled by x/eta(0).

    Branch words grow by concatenation; the rescaling multiplies the
    carried conjugation factor, so the result stays exactly representable.
    """
    try:
        h, landing = _height_and_landing(pair, max_iter)
    except BoundaryHit as exc:
        raise NonRenormalizable(str(exc)) from exc
    if h is INFINITE_HEIGHT or not isinstance(h, int):
        raise NonRenormalizable("pair has infinite height")
    new_scale_eta = pair.eta.scale * pair.b
    new_scale_xi = pair.xi.scale * pair.b
    new_eta = Branch(pair.eta.system, pair.xi.word + pair.eta.word * h,
                     new_scale_eta)
    new_xi = Branch(pair.eta.system, pair.eta.word, new_scale_xi)
    hint = None if pair.level_hint is None else pair.level_hint + 1
    return CommutingPair(new_eta, new_xi, level_hint=hint, source=pair.source)


def pair_rotation_digits(pair: CommutingPair, depth: int,
                         max_iter: int = 10000) -> ContinuedFraction:
    """Digits r_j = height of the j-th renormalization of the pair."""
    digits = []
    current = pair
    for _ in range(depth):
        h = height(current, max_iter)
        if h is INFINITE_HEIGHT or not isinstance(h, int):
            raise NonRenormalizable(
                "pair stopped being renormalizable at depth "
                f"{len(digits)}")
        digits.append(h)
        if len(digits) < depth:
            current = renormalize(current, max_iter)
    return ContinuedFraction(tuple(digits))


# ---------------------------------------------------------------------------
# the normalized C0 distance
# ---------------------------------------------------------------------------

def _normalized_eval(pair: CommutingPair, u):
    """A o zeta o A^{-1} at u in [-1,1]\\{0}, computed scale-free.

    A is the Moebius map with A(eta(0)) = -1, A(0) = 0, A(xi(0)) = 1; in
    base coordinates the conjugation factor cancels from both A and the
    branch, which is what makes the metric exactly invariant under linear
    rescalings.
    """
    alpha = pair.alpha_base
    beta = pair.beta_base
    branch = pair.eta if u > 0 else pair.xi
    s, d = alpha + beta, alpha - beta
    y = 2 * alpha * beta * u / (s * u - d)
    z = branch.base_value(y)
    return z * d / (s * z - 2 * alpha * beta)


def dist_c0(p1: CommutingPair, p2: CommutingPair, grid_size: int = 64) -> Scalar:
    """Normalized C0 distance on a symmetric grid of 2*grid_size points.

    The value is the maximum of the endpoint-ratio difference and the sup of
    the normalized-branch difference over u = +-i/grid_size, i = 1..grid_size
    (the origin itself is excluded from the grid).
    """
    if grid_size < 1:
        raise PreconditionError("grid_size must be >= 1")
    worst = abs(p1.ratio - p2.ratio)
    for i in range(1, grid_size + 1):
        u = mpf(i) / grid_size
        for point in (u, -u):
            delta = abs(_normalized_eval(p1, point) - _normalized_eval(p2, point))
            if delta > worst:
                worst = delta
    return worst


# ---------------------------------------------------------------------------
# commutator
# ---------------------------------------------------------------------------

def commutator_value(pair, z):
    """eta(xi(z)) - xi(eta(z)) at z, in pair coordinates."""
    return (pair.eta.value_checked(pair.xi.value_checked(z))
            - pair.xi.value_checked(pair.eta.value_checked(z)))


def commutator_norm(pair, radius, samples: int = 64) -> Scalar:
    """Max of |[zeta]| over equispaced points on the circle |z| = radius.

    Boundary sampling suffices for the analytic commutator on the disk by
    the maximum principle.
    """
    radius = to_scalar(radius)
    if samples < 1:
        raise PreconditionError("samples must be >= 1")
    worst = mpf(0)
    for k in range(samples):
        angle = mpf(2 * k) / samples
        z = radius * mpmath.mpc(mpmath.cospi(angle), mpmath.sinpi(angle))
        val = abs(commutator_value(pair, z))
        if val > worst:
            worst = val
    return worst


# ---------------------------------------------------------------------------
# gluing
# ---------------------------------------------------------------------------

class GluedCircleMap:
    """The circle map on [x, xi(x)] with endpoints identified through xi.

    The affine chart sends the seam interval to [0, 1); its orientation is
    chosen so that the glued rotation digits reproduce the pair's height
    digits.  ``offset`` adds a rigid rotation in chart coordinates (the
    rotation-correction knob).
    """

    def __init__(self, pair: CommutingPair, x, offset=0):
        self.pair = pair
        self.x_hat = to_scalar(x)
        self.seam_end = pair.xi.value(self.x_hat)
        self.reversed = pair.a > 0
        self.length = abs(self.seam_end - self.x_hat)
        self.offset = to_scalar(offset)
        self.marked = self.chart(mpf(0))
        self._cache = {}

    def with_offset(self, offset) -> "GluedCircleMap":
        return GluedCircleMap(self.pair, self.x_hat, offset)

    def chart(self, y):
        # seam_end is the right end of the interval when a > 0 (reversing
        # chart) and the left end when a < 0 (increasing chart)
        if self.reversed:
            return (self.seam_end - y) / self.length
        return (y - self.seam_end) / self.length

    def chart_inverse(self, t):
        if self.reversed:
            return self.seam_end - t * self.length
        return self.seam_end + t * self.length

    def _interval_value(self, y):
        """The three-case first-return map in pair coordinates."""
        pair = self.pair
        on_xi_side = (y < 0) if pair.a > 0 else (y > 0)
        if on_xi_side:
            return pair.eta.value(pair.xi.value(y))
        z = pair.eta.value(y)
        outside = (z < self.x_hat) if pair.a > 0 else (z > self.x_hat)
        if outside:
            z = pair.xi.value(z)
        return z

    def circle_value(self, t):
        """Image of t in [0, 1) chart coordinates."""
        y = self.chart_inverse(t)
        out = self.chart(self._interval_value(y)) + self.offset
        return out - mpmath.floor(out)

    def lift(self, x):
        """Monotone degree-one lift of the chart-coordinate circle map."""
        base = mpmath.floor(x)
        t = x - base
        v = self.circle_value(t)
        v0 = self._cache.get(("v0", mp.prec))
        if v0 is None:
            v0 = self.circle_value(mpf(0))
            self._cache[("v0", mp.prec)] = v0
        if v < v0:
            v += 1
        return v + base

    def critical_points(self):
        return glued_critical_points(self)


def glue(pair: CommutingPair, x=None) -> GluedCircleMap:
    """Glue the pair into a circle map; x defaults to the midpoint of I_xi."""
    if x is None:
        x = pair.b / 2
    x = to_scalar(x)
    inside = (pair.b < x < 0) if pair.b < 0 else (0 < x < pair.b)
    if not inside:
        raise PreconditionError("glue point must lie strictly inside I_xi")
    d = pair.xi.derivative(x)
    if abs(d) <= mpmath.ldexp(mpf(1), -(mp.prec // 2)):
        raise CriticalGluePoint("xi is critical at the glue point")
    return GluedCircleMap(pair, x)


def _piece_critical_points(pair, word, lo, hi, crit_base, exclude):
    """Pullbacks of base critical points through word prefixes on [lo, hi].

    ``exclude`` lists pair-coordinate endpoints owned by a neighboring piece
    (so shared circle points are counted exactly once).
    """
    system = pair.eta.system
    if system.kind != "map":
        raise PreconditionError(
            "structural critical census needs a map-induced pair")
    scale = pair.scale
    skip_tol = mpmath.ldexp(eps(), 20) * max(abs(pair.a), abs(pair.b), mpf(1))
    out = []
    base_lo, base_hi = sorted((scale * lo, scale * hi))
    for i in range(len(word)):
        u = _word_prefix_value(system, word, i, base_lo)
        v = _word_prefix_value(system, word, i, base_hi)
        if u > v:
            u, v = v, u
        for c, d in crit_base:
            k = mpmath.ceil(u - c)
            while c + k <= v:
                target = c + k
                y = _invert_word_prefix(system, word, i, target,
                                        base_lo, base_hi) / scale
                if not any(abs(y - e) <= skip_tol for e in exclude):
                    out.append((y, d))
                k += 1
    return out


def _word_prefix_value(system, word, count, y):
    for letter in word[:count]:
        y = system.apply(letter, y)
    return y


def _invert_word_prefix(system, word, count, target, lo, hi):
    for _ in range(mp.prec + 10):
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:
            break
        if _word_prefix_value(system, word, count, mid) > target:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def glued_critical_points(glued: GluedCircleMap):
    """Chart-coordinate critical points [(t_j, d_j)] of the glued map.

    Enumerated structurally: a point is critical exactly when some prefix of
    the piecewise composition word sends it to a critical point of the base
    map, so candidates are pullbacks of the base critical set along word
    prefixes, merged (orders multiplied) when they coincide.
    """
    pair = glued.pair
    model = pair.eta.system.map
    crit_base = model.critical_points()
    x_hat, end = glued.x_hat, glued.seam_end
    pieces = []
    # xi-side piece (eta o xi); 0 is owned by the eta side and the seam
    # point by the eta-side endpoint xi(x_hat)
    pieces.append((pair.xi.word + pair.eta.word, x_hat, mpf(0),
                   (mpf(0), x_hat)))
    # eta-side piece, split where the eta-image leaves the seam interval
    eta_lo, eta_hi = (mpf(0), end) if pair.a > 0 else (end, mpf(0))
    z_lo, z_hi = pair.eta.value(eta_lo), pair.eta.value(eta_hi)
    if min(z_lo, z_hi) < x_hat < max(z_lo, z_hi):
        lo, hi = eta_lo, eta_hi
        rising = z_hi > z_lo
        for _ in range(mp.prec + 10):
            mid = (lo + hi) / 2
            if mid <= lo or mid >= hi:
                break
            if (pair.eta.value(mid) > x_hat) == rising:
                hi = mid
            else:
                lo = mid
        y_star = (lo + hi) / 2
        with_xi = pair.eta.word + pair.xi.word
        if pair.a > 0:
            pieces.append((with_xi, mpf(0), y_star, ()))
            pieces.append((pair.eta.word, y_star, end, (y_star,)))
        else:
            pieces.append((with_xi, y_star, mpf(0), ()))
            pieces.append((pair.eta.word, end, y_star, (y_star,)))
    else:
        needs_xi = (min(z_lo, z_hi) < x_hat) if pair.a > 0 \
            else (max(z_lo, z_hi) > x_hat)
        word = pair.eta.word + pair.xi.word if needs_xi else pair.eta.word
        pieces.append((word, eta_lo, eta_hi, ()))
    found = []
    for word, lo, hi, exclude in pieces:
        found.extend(_piece_critical_points(pair, word, lo, hi, crit_base,
                                            exclude))
    # to chart coordinates, relative ordering from the marked point
    tol = mpmath.ldexp(eps(), 24)
    pts = []
    for y, d in found:
        t = glued.chart(y)
        rel = t - glued.marked
        rel -= mpmath.floor(rel)
        pts.append([rel, d])
    pts.sort(key=lambda rd: rd[0])
    merged = []
    for rel, d in pts:
        if merged and (rel - merged[-1][0]) <= tol:
            merged[-1][1] *= d
        elif merged and (1 - rel + merged[0][0]) <= tol:
            merged[0][1] *= d
        else:
            merged.append([rel, d])
    return [(rel, d) for rel, d in merged]


def pair_signature(pair: CommutingPair, depth: int = 8, iters: int = 500,
                   glue_point=None) -> cm.Signature:
    """Signature of the glued circle map (digits, critical census, deltas)."""
    glued = glue(pair, glue_point)
    rho = cm.rotation_digits(glued, depth, start=glued.marked)
    crits = glued_critical_points(glued)
    positions = [rel for rel, _ in crits]
    ds = tuple(d for _, d in crits)
    tracker = cm.ReturnTracker(cm.circle_step(glued, start=glued.marked),
                               keep_orbit=True, max_steps=iters + 1)
    tracker.run_until_time(iters)
    if not tracker.qs:
        raise DepthUnavailable("no return time closed within the orbit budget")
    q_m = tracker.qs[-1]
    import bisect as _bisect
    counts = [0] * len(positions)
    for k in range(q_m):
        t = tracker.orbit[k]
        idx = _bisect.bisect_right(positions, t) - 1
        counts[idx] += 1
    deltas = [mpf(c) / q_m for c in counts]
    defect = mpmath.fsum(deltas) - 1
    deltas[-1] -= defect
    return cm.Signature(rho=rho, criticalities=ds, deltas=tuple(deltas),
                        delta_error_bound=mpf(1) / q_m,
                        normalization_defect=defect)
