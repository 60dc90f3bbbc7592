"""Solve for twist parameters realizing a prescribed signature.

The last twist is always re-solved innermost so the assembled model keeps
the target rotation number; the remaining twists are found by
coordinate-wise bisection of the measured deltas, with a coarse-grid
refinement fallback when the empirical monotonicity breaks.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mpf

from . import circlemap as cm
from .errors import (
    DegenerateSignature,
    PreconditionError,
    TargetUnreachable,
)
from .numerics import ContinuedFraction, Scalar, convergents, to_scalar

GRID_POINTS = 16
REFINE_ROUNDS = 3


@dataclass(frozen=True)
class SignatureTarget:
    """Desired signature: digit prefix, criticalities, interior deltas."""

    rho: ContinuedFraction
    criticalities: tuple
    deltas: tuple
    tolerance: Scalar

    def __post_init__(self):
        object.__setattr__(self, "criticalities", tuple(int(d) for d in self.criticalities))
        object.__setattr__(self, "deltas", tuple(to_scalar(d) for d in self.deltas))
        object.__setattr__(self, "tolerance", to_scalar(self.tolerance))
        if len(self.deltas) != len(self.criticalities):
            raise PreconditionError("deltas and criticalities must have equal length")
        if abs(mpmath.fsum(self.deltas) - 1) > mpf("1e-12"):
            raise PreconditionError("target deltas must sum to 1")
        if self.tolerance <= 0:
            raise PreconditionError("tolerance must be positive")

    @property
    def N(self) -> int:
        return len(self.criticalities)


def _measurement_iters(target: SignatureTarget) -> int:
    """Orbit budget so the Birkhoff sampling error 1/q_m < tolerance/4."""
    needed = 4 / target.tolerance
    conv = convergents(target.rho)
    for _, q in conv:
        if q > needed:
            # margin so the block containing q closes within the budget
            return 3 * q
    raise PreconditionError(
        "target rho depth too shallow for the requested tolerance "
        f"(largest q {conv[-1][1]}, need > {mpmath.nstr(needed, 6)})")


class _DeltaProbe:
    """Measured deltas of the assembled model as a function of outer twists."""

    def __init__(self, target: SignatureTarget, template, depth: int):
        self.target = target
        self.template = tuple(template)
        self.depth = depth
        self.iters = _measurement_iters(target)
        self.hint = None

    def assemble(self, outer_twists):
        spec = [(d, th) for d, th in zip(self.template, outer_twists)]
        spec.append((self.template[-1], mpf(0)))
        model = cm.MapModel(tuple(cm.BasicUnit(d, t) for d, t in spec))
        theta_last = cm.tune_twist(model, self.target.rho, self.depth,
                                   hint=self.hint)
        width = mpf("0.08")
        self.hint = (max(mpf(0), theta_last - width),
                     min(mpf(1) - mpf("1e-6"), theta_last + width))
        return model.with_last_twist(theta_last)

    def signature_of(self, outer_twists, iters=None):
        model = self.assemble(outer_twists)
        return model, cm.signature(model, min(self.depth, 8),
                                   iters or self.iters)


def solve_signature(target: SignatureTarget, unit_template) -> list:
    """Twists theta_0..theta_{N-1} whose model realizes the target signature.

    The returned list includes the innermost-solved last twist.  Raises
    DegenerateSignature when the target touches the simplex boundary and
    TargetUnreachable when grid refinement stalls above tolerance.
    """
    template = tuple(int(d) for d in unit_template)
    if template != target.criticalities:
        raise PreconditionError(
            "unit template must match the target criticalities")
    n = target.N
    if n > 3:
        raise PreconditionError("N <= 3 supported at desk scale")
    if any(d < target.tolerance for d in target.deltas):
        raise DegenerateSignature(
            "target deltas touch the simplex boundary at this tolerance")
    depth = len(target.rho)
    if n == 1:
        model = cm.MapModel.from_spec([(template[0], "0.5")])
        theta = cm.tune_twist(model, target.rho, depth)
        return [theta]
    probe = _DeltaProbe(target, template, depth)
    outer = [mpf("0.5")] * (n - 1)
    sweeps = 1 if n == 2 else REFINE_ROUNDS
    for _ in range(sweeps):
        for axis in range(n - 1):
            outer[axis] = _solve_axis(probe, outer, axis)
    model, sig = probe.signature_of(outer)
    errs = [abs(a - b) for a, b in zip(sig.deltas, target.deltas)]
    if max(errs) > target.tolerance:
        raise TargetUnreachable(
            f"solver stalled with delta errors {[mpmath.nstr(e, 5) for e in errs]}")
    return list(outer) + [model.units[-1].theta]


def _solve_axis(probe: _DeltaProbe, outer, axis: int):
    """Bisection of delta_axis in theta_axis, with grid fallback."""
    target_val = probe.target.deltas[axis]
    tol = probe.target.tolerance

    def measured(theta):
        pt = list(outer)
        pt[axis] = theta
        _, sig = probe.signature_of(pt)
        if sig.N != probe.target.N:
            # critical points collided at this twist; poison the sample
            return None
        return sig.deltas[axis]

    lo_edge, hi_edge = mpf(1) / 64, 1 - mpf(1) / 64
    grid = [lo_edge + (hi_edge - lo_edge) * mpf(i) / (GRID_POINTS - 1)
            for i in range(GRID_POINTS)]
    for _ in range(REFINE_ROUNDS):
        values = []
        for th in grid:
            v = measured(th)
            values.append(v)
            if v is not None and abs(v - target_val) <= tol / 2:
                return th
        bracket = None
        for i in range(len(grid) - 1):
            v1, v2 = values[i], values[i + 1]
            if v1 is None or v2 is None:
                continue
            if (v1 - target_val) * (v2 - target_val) <= 0:
                bracket = (grid[i], grid[i + 1], v1, v2)
                break
        if bracket is not None:
            return _bisect_axis(measured, bracket, target_val, tol)
        # no sign change: refine around the best sample
        best = min((i for i, v in enumerate(values) if v is not None),
                   key=lambda i: abs(values[i] - target_val), default=None)
        if best is None:
            raise TargetUnreachable("every grid sample hit a degenerate model")
        lo = grid[max(0, best - 1)]
        hi = grid[min(len(grid) - 1, best + 1)]
        grid = [lo + (hi - lo) * mpf(i) / (GRID_POINTS - 1)
                for i in range(GRID_POINTS)]
    raise TargetUnreachable(
        f"grid refinement stalled above tolerance on axis {axis}")


def _bisect_axis(measured, bracket, target_val, tol):
    lo, hi, v_lo, v_hi = bracket
    rising = v_hi >= v_lo
    for _ in range(80):
        mid = (lo + hi) / 2
        if mid <= lo or mid >= hi:
            break
        v = measured(mid)
        if v is None:
            # nudge off the degenerate point
            mid += (hi - lo) / 7
            v = measured(mid)
            if v is None:
                break
        if abs(v - target_val) <= tol / 2:
            return mid
        if (v > target_val) == rising:
            hi = mid
        else:
            lo = mid
    raise TargetUnreachable("axis bisection stalled above tolerance")
