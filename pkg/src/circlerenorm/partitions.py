"""Dynamical partitions, bounded-geometry statistics, and the rigidity defect.

The n-th partition tiles the circle by the orbit segments of the two return
intervals: q_{n+1} images of I_n and q_n images of I_{n+1}.  Atoms are the
gaps between the first q_n + q_{n+1} orbit points of the marked point, and
every atom label is recovered from pure index arithmetic on its endpoints
(the endpoint indices of an atom differ by exactly q_n or q_{n+1}), which is
cross-checked during construction.
"""

from __future__ import annotations

import bisect as _bisect
from dataclasses import dataclass

import mpmath
from mpmath import mpf

from . import circlemap as cm
from .errors import (
    CombinatorialMismatch,
    DepthUnavailable,
    PreconditionError,
    PrecisionExhausted,
)
from .numerics import Scalar, convergents, eps, format_scalar
from .pairs import cached_rotation_digits

ORBIT_LONG = "In"     # images of I_n (q_{n+1} of them)
ORBIT_SHORT = "In+1"  # images of I_{n+1} (q_n of them)


@dataclass(frozen=True)
class Atom:
    """One partition interval [left, left + length), with its orbit label."""

    orbit: str
    index: int
    left: Scalar
    length: Scalar

    @property
    def right(self):
        return self.left + self.length


class Partition:
    """The n-th dynamical partition, atoms in circular order from 0."""

    def __init__(self, model, level: int, atoms):
        self.model = model
        self.level = level
        self.atoms = list(atoms)

    def __len__(self):
        return len(self.atoms)

    def total_length(self):
        return mpmath.fsum(a.length for a in self.atoms)

    def labels(self):
        return [(a.orbit, a.index) for a in self.atoms]

    def atom_at_zero(self, orbit: str = ORBIT_LONG) -> Atom:
        for a in self.atoms:
            if a.orbit == orbit and a.index == 0:
                return a
        raise PreconditionError(f"no {orbit} atom with index 0")

    def to_csv(self) -> str:
        lines = ["level,orbit,index,left,length"]
        for a in self.atoms:
            lines.append(f"{self.level},{a.orbit},{a.index},"
                         f"{format_scalar(a.left)},{format_scalar(a.length)}")
        return "\n".join(lines) + "\n"


def build_partition(model, n: int, digits=None) -> Partition:
    """Partition atoms {f^k(I_n)} and {f^k(I_{n+1})}, circularly sorted.

    Needs rotation digits to depth n+2.  Construction checks that every
    adjacent endpoint-index difference is exactly q_n or q_{n+1} and that no
    two endpoints merge at working precision; violations surface as
    PrecisionExhausted.
    """
    if n < 0:
        raise PreconditionError("partition level must be >= 0")
    if digits is None:
        digits = cached_rotation_digits(model, n + 2)
    if len(digits) < n + 2:
        raise DepthUnavailable(
            f"need rotation digits to depth {n + 2}, have {len(digits)}")
    conv = convergents(digits)
    q_n, q_n1 = conv[n][1], conv[n + 1][1]
    total = q_n + q_n1
    pts = [mpf(0)]
    t = mpf(0)
    for _ in range(total - 1):
        y = model.lift(t)
        t = y - mpmath.floor(y)
        pts.append(t)
    order = sorted(range(total), key=lambda k: pts[k])
    merge_tol = 10 * eps()
    atoms = []
    for pos in range(total):
        k1 = order[pos]
        k2 = order[(pos + 1) % total]
        left = pts[k1]
        right = pts[k2] if pos + 1 < total else mpf(1)
        length = right - left
        if length <= merge_tol:
            raise PrecisionExhausted(
                f"partition endpoints merged at level {n} (gap {length})")
        diff = abs(k1 - k2)
        if diff == q_n:
            atoms.append(Atom(ORBIT_LONG, min(k1, k2), left, length))
        elif diff == q_n1:
            atoms.append(Atom(ORBIT_SHORT, min(k1, k2), left, length))
        else:
            raise PrecisionExhausted(
                f"atom endpoints {k1},{k2} differ by {diff}, "
                f"expected {q_n} or {q_n1}")
    return Partition(model, n, atoms)


@dataclass(frozen=True)
class GeometryStats:
    """Bounded-geometry statistics of one partition level."""

    max_adjacent_ratio: Scalar
    min_child_parent_ratio: Scalar
    level: int


def geometry_report(p: Partition, coarser: Partition | None = None) -> GeometryStats:
    """Adjacent-atom ratios within p and child/parent ratios against level-1.

    ``coarser`` defaults to the partition one level up, rebuilt from the
    model; at level 0 the child/parent ratio degenerates to 1.
    """
    worst_adjacent = mpf(1)
    m = len(p.atoms)
    for i in range(m):
        a, b = p.atoms[i].length, p.atoms[(i + 1) % m].length
        r = a / b if a > b else b / a
        if r > worst_adjacent:
            worst_adjacent = r
    if p.level == 0:
        return GeometryStats(worst_adjacent, mpf(1), p.level)
    if coarser is None:
        coarser = build_partition(p.model, p.level - 1)
    if coarser.level != p.level - 1:
        raise PreconditionError("coarser partition must be one level up")
    tol = mpmath.ldexp(eps(), 24)
    lefts = [a.left for a in coarser.atoms]
    worst_child = mpf(1)
    for child in p.atoms:
        idx = _bisect.bisect_right(lefts, child.left + tol) - 1
        parent = coarser.atoms[idx]
        if child.right > parent.right + tol * max(mpf(1), mpf(len(p.atoms))):
            raise PrecisionExhausted(
                f"level {p.level} atom not contained in a level {p.level - 1} atom")
        r = child.length / parent.length
        if r < worst_child:
            worst_child = r
    return GeometryStats(worst_adjacent, worst_child, p.level)


def ratio_defect(f, g, n: int) -> Scalar:
    """Max over adjacent atoms of | |I|/|J| - |h(I)|/|h(J)| |.

    h is the combinatorial conjugacy matching equally-labeled atoms of the
    two level-n partitions; equal rotation digits to depth n+2 are required
    and the label sequences must agree atom by atom.
    """
    df = cached_rotation_digits(f, n + 2)
    dg = cached_rotation_digits(g, n + 2)
    if df.digits[: n + 2] != dg.digits[: n + 2]:
        raise CombinatorialMismatch(
            f"rotation digits differ at depth {n + 2}: {df.digits} vs {dg.digits}")
    pf = build_partition(f, n, digits=df)
    pg = build_partition(g, n, digits=dg)
    if pf.labels() != pg.labels():
        raise CombinatorialMismatch(
            f"partition label sequences differ at level {n}")
    m = len(pf.atoms)
    worst = mpf(0)
    for i in range(m):
        j = (i + 1) % m
        rf = pf.atoms[i].length / pf.atoms[j].length
        rg = pg.atoms[i].length / pg.atoms[j].length
        d = abs(rf - rg)
        if d > worst:
            worst = d
    return worst


def conjugacy_derivative_estimate(f, g, n: int) -> Scalar:
    """|h(I_n)|/|I_n| for the matched atoms at the marked point.

    The sequence over n estimates the conjugacy derivative at 0.
    """
    pf = build_partition(f, n)
    pg = build_partition(g, n)
    return pg.atom_at_zero().length / pf.atom_at_zero().length
