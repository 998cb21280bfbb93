"""The semiconjugacy from angle multiplication on the interval set to
multiplication by d on the circle.

Finite stages C_n of the construction carry d^n marked angles that the
map Pi sends order-preservingly onto the d^n-adic rationals.  Fibers,
gap dynamics, and a box-counting dimension estimate are all read off
the exact interval ladder.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .angles import Angle, ArcSet, frac_part
from .equipot import IntervalSystem, _membership
from .errors import (FixedAngleNotInI, LevelConstructionFailed, OutsideI)


@dataclass(frozen=True)
class PiLevel:
    n: int
    elements: list   # [(angle, pi)] sorted by position from theta0


@dataclass
class PiTable:
    D: int
    k: int
    d: int
    theta0: Fraction
    levels: list
    systems: list    # the interval ladder the table was built on

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def level(self, n: int) -> PiLevel:
        return self.levels[n]

    def to_json(self) -> dict:
        return {
            "schema": "rayatlas/pitable/1",
            "D": self.D, "k": self.k, "d": self.d,
            "theta0": {"num": self.theta0.numerator,
                       "den": self.theta0.denominator},
            "levels": [
                {"n": lv.n,
                 "elements": [[{"num": a.numerator, "den": a.denominator},
                               {"num": p.numerator, "den": p.denominator}]
                              for a, p in lv.elements]}
                for lv in self.levels],
        }


def _exact_pairs(sys: IntervalSystem) -> list:
    if sys.exact is None:
        raise LevelConstructionFailed(
            "the interval ladder must carry exact endpoints; rational crash "
            "labels were unavailable for this polynomial")
    return sys.exact


def _in_system(sys: IntervalSystem, x: Fraction) -> bool:
    return _membership(_exact_pairs(sys), x, Fraction(1)) is not None


class _ArcIndex:
    """Sorted-start lookup over exact closed arcs, wrap aware."""

    def __init__(self, sys: IntervalSystem):
        self.pairs = sorted(_exact_pairs(sys))
        self.starts = [a for a, _ln in self.pairs]

    def __contains__(self, x: Fraction) -> bool:
        x = x % 1
        i = bisect_right(self.starts, x) - 1
        if i >= 0:
            a, ln = self.pairs[i]
            if x <= a + ln:
                return True
        a, ln = self.pairs[-1]
        return a <= x + 1 <= a + ln


def build_pi_table(ladder: list, depth: Optional[int] = None) -> PiTable:
    """Marked-angle table of the semiconjugacy, one level per ladder rung.

    The base point is the smallest fixed angle of multiplication by D^k
    that survives in the deepest interval system; each level pulls the
    previous one back through the d admissible preimage branches.
    """
    if depth is None:
        depth = len(ladder) - 1
    if depth >= len(ladder):
        raise LevelConstructionFailed(
            f"ladder holds {len(ladder)} levels, requested depth {depth}")
    base = ladder[0]
    D, k, d = base.D, base.k, base.d
    m = D ** k

    theta0 = None
    deep = _ArcIndex(ladder[depth])
    for j in range(m - 1):
        cand = Fraction(j, m - 1)
        if cand in deep:
            theta0 = cand
            break
    if theta0 is None:
        raise FixedAngleNotInI(
            "no fixed angle of the return multiplication lies in the "
            "interval system")

    def pos(x: Fraction) -> Fraction:
        return (x - theta0) % 1

    levels = [PiLevel(0, [(theta0, Fraction(0))])]
    for n in range(1, depth + 1):
        index = _ArcIndex(ladder[n])
        angles = set()
        for c, _p in levels[-1].elements:
            for j in range(m):
                pre = (c + j) / m % 1
                if pre in index:
                    angles.add(pre)
        if len(angles) != d ** n:
            raise LevelConstructionFailed(
                f"level {n}: found {len(angles)} marked angles, "
                f"expected {d ** n}")
        ordered = sorted(angles, key=pos)
        elements = [(a, Fraction(i, d ** n)) for i, a in enumerate(ordered)]
        # the assignment must intertwine multiplication exactly
        lookup = dict(levels[-1].elements)
        for a, p in elements:
            img = (a * m) % 1
            if lookup.get(img) != (p * d) % 1:
                raise LevelConstructionFailed(
                    f"level {n}: ordering breaks the functional equation "
                    f"at angle {a}")
        levels.append(PiLevel(n, elements))
    return PiTable(D, k, d, theta0, levels, list(ladder))


def _as_fraction(theta) -> Fraction:
    if isinstance(theta, Angle):
        if theta.exact is not None:
            return theta.exact % 1
        return Fraction(theta.value) % 1
    return Fraction(theta) % 1


def evaluate_pi(table: PiTable, theta, strict: bool = False) -> Angle:
    """Pi at one angle, bracketed by the deepest marked level.

    Pi is constant across each gap, so every angle gets a value; with
    strict=True an angle strictly inside a gap of the deepest system is
    refused instead.
    """
    t = _as_fraction(theta)
    lv = table.levels[-1]
    n = lv.n
    if strict and not _in_system(table.systems[n], t):
        raise OutsideI(f"angle {t} lies in a gap of the deepest level")

    def pos(x: Fraction) -> Fraction:
        return (x - table.theta0) % 1

    p_t = pos(t)
    lo = None
    for a, p in lv.elements:
        if pos(a) <= p_t:
            lo = p
        else:
            break
    if lo is None:          # below the first element: wraps to the top
        lo = lv.elements[-1][1] - 1
    for a, p in lv.elements:
        if pos(a) == p_t:
            return Angle.of(p)
    width = Fraction(1, table.d ** n)
    mid = (lo + width / 2) % 1
    return Angle.approx(float(mid), float(width) / 2.0)


@dataclass(frozen=True)
class FiberResult:
    tau: Fraction
    points: list             # Angle entries, exact where snapped
    split: bool              # endpoints did not coalesce
    resolved: bool           # all limits snapped to exact rationals


def _circ_dist(x, y) -> Fraction:
    d = abs(Fraction(x) - Fraction(y)) % 1
    return min(d, 1 - d)


def _bracket_seqs(table: PiTable, t: Fraction):
    """Per level: nearest marked angles strictly below and above t in Pi
    value, plus any exact hit."""
    exact_pt = None
    lefts, rights = [], []
    for lv in table.levels:
        below, above = None, None
        for a, p in lv.elements:
            if p == t:
                exact_pt = a
            if p < t and (below is None or p > below[1]):
                below = (a, p)
            if p > t and (above is None or p < above[1]):
                above = (a, p)
        if below is None:    # wrap: the largest pi is the left neighbour
            below = lv.elements[-1]
        if above is None:
            above = lv.elements[0]
        lefts.append(below[0])
        rights.append(above[0])
    return lefts, rights, exact_pt


def _stride_snap(seq: list, m: int, c: int) -> Optional[Fraction]:
    """Limit of a tail satisfying x_{n+c} = (x_n + J)/m^c exactly."""
    if len(seq) < 2 * c + 1:
        return None
    if seq[-1] == seq[-1 - c] == seq[-1 - 2 * c]:
        return seq[-1] % 1
    mc = m ** c
    j1 = seq[-1] * mc - seq[-1 - c]
    j2 = seq[-1 - c] * mc - seq[-1 - 2 * c]
    if j1.denominator != 1 or j1 != j2:
        return None
    lim = Fraction(j1, mc - 1)
    if abs(seq[-1] - lim) < abs(seq[-1 - 2 * c] - lim) or seq[-1] == lim:
        return lim % 1
    return None


def _resolve_limit(table: PiTable, t: Fraction, side: int, chain: list,
                   memo: dict) -> Optional[Fraction]:
    """Exact limit of one bracketing sequence of the fiber over t.

    The limit is a branch preimage of the limit over d*t; the orbit of
    t under multiplication by d is eventually periodic and a stride
    snap closes the cycle.
    """
    key = (t, side)
    if key in memo:
        return memo[key]
    m = table.D ** table.k
    d = table.d
    lefts, rights, _hit = _bracket_seqs(table, t)
    seq = lefts if side == 0 else rights

    result = None
    if t in chain:
        c = len(chain) - chain.index(t)
        result = _stride_snap(seq, m, c)
    elif len(chain) < 64:
        t_img = (d * t) % 1
        parent = _resolve_limit(table, t_img, side, chain + [t], memo)
        if parent is not None:
            j = round(m * float(seq[-1]) - float(parent))
            cand = ((parent + j) / m) % 1
            # brackets may stall for a level before refining, so ask for
            # monotone approach with strict progress across the window
            win = [_circ_dist(x, cand) for x in seq[-4:]]
            mono = all(b <= a for a, b in zip(win, win[1:]))
            if win[-1] == 0 or (mono and win[-1] < win[0]):
                result = cand
    memo[key] = result
    return result


def fiber(table: PiTable, tau, max_card: Optional[int] = None) -> FiberResult:
    """All angles the semiconjugacy sends to tau.

    The fiber collects any marked angle hitting tau exactly plus the
    limits of marked angles bracketing tau from either side.  A
    bracketing sequence that merely creeps up to a point already found
    contributes nothing new.
    """
    t = _as_fraction(tau)
    m = table.D ** table.k
    lefts, rights, exact_pt = _bracket_seqs(table, t)

    pts = []
    resolved = True
    if exact_pt is not None:
        pts.append(Angle.of(exact_pt))
    memo = {}
    loose = []
    for side, seq in ((0, lefts), (1, rights)):
        lim = _resolve_limit(table, t, side, [], memo)
        if lim is not None:
            if all(p.exact != lim for p in pts):
                pts.append(Angle.of(lim))
            continue
        loose.append(seq)
    if len(loose) == 2 and _circ_dist(loose[0][-1],
                                      loose[1][-1]) < Fraction(1, 1000):
        # both brackets pinch one unmarked point
        a, b = float(loose[0][-1]), float(loose[1][-1])
        if abs(a - b) > 0.5:
            b += 1.0 if b < a else -1.0
        pts.append(Angle.approx(frac_part((a + b) / 2),
                                abs(a - b) / 2 + 1e-15))
        resolved = False
    else:
        for seq in loose:
            err = float(_circ_dist(seq[-1], seq[-2]))
            pts.append(Angle.approx(float(seq[-1]), err))
            resolved = False

    uniq = []
    for p in sorted(pts, key=lambda a: a.value):
        if not uniq or abs(uniq[-1].value - p.value) > 1e-12:
            uniq.append(p)
    if len(uniq) > 1 and abs((uniq[0].value + 1) - uniq[-1].value) < 1e-12:
        uniq.pop()
    split = len(uniq) > 1
    if max_card is not None and len(uniq) > max_card:
        resolved = False
    return FiberResult(t, uniq, split, resolved)


# ---------------------------------------------------------------------------
# Gap dynamics


@dataclass(frozen=True)
class GapRecord:
    a: Fraction
    b: Fraction
    level: int
    length: Fraction
    taut: bool
    multiplicity: int
    crash_potential: float
    orbit_class: str
    steps: int


def classify_gaps(ladder: list, depth: int = 20) -> list:
    """Dynamical classification of every gap of every ladder level.

    A taut gap departs an integer amount of material and collapses to a
    point.  Other gaps are followed forward until they merge into a
    taut gap, revisit themselves, or exhaust the step budget.
    """
    gap_index = {}
    records = []
    all_gaps = []
    for n, sys in enumerate(ladder):
        pairs = _exact_pairs(sys)
        for g in sys.gaps:
            a = g.a.exact
            b = g.b.exact
            if a is None or b is None:
                raise LevelConstructionFailed(
                    "gap endpoints must be exact for classification")
            a, b = a % 1, b % 1
            gap_index[(a, b)] = (n, g)
            all_gaps.append((n, a, b, g))

    m = ladder[0].D ** ladder[0].k
    for n, a, b, g in all_gaps:
        length = (b - a) % 1
        t = length * m
        taut = t.denominator == 1 and t >= 1
        mult = int(t) if taut else int(t.numerator // t.denominator)
        if taut:
            records.append(GapRecord(a, b, n, length, True, mult,
                                     g.crash_potential, "taut", 0))
            continue
        cls, steps = "unresolved", depth
        ca, cb = a, b
        seen = {(ca, cb)}
        for step in range(1, depth + 1):
            ca, cb = (ca * m) % 1, (cb * m) % 1
            if (ca, cb) in gap_index:
                tn, tg = gap_index[(ca, cb)]
                tl = (cb - ca) % 1 * m
                if tl.denominator == 1 and tl >= 1:
                    cls, steps = "to_taut", step
                    break
            if (ca, cb) == (a, b):
                cls, steps = "periodic", step
                break
            if (ca, cb) in seen:
                cls, steps = "preperiodic_to_periodic", step
                break
            seen.add((ca, cb))
        records.append(GapRecord(a, b, n, length, False, mult,
                                 g.crash_potential, cls, steps))
    return records


def taut_multiplicity_sum(ladder: list) -> int:
    """Total departing multiplicity over the top-level gaps."""
    base = ladder[0]
    m = base.D ** base.k
    total = 0
    for g in base.gaps:
        length = (g.b.exact - g.a.exact) % 1
        t = length * m
        if t.denominator == 1:
            total += int(t)
    return total


def cantor_arcs(ladder: list, n: Optional[int] = None) -> ArcSet:
    """Float view of the deepest (or requested) interval level."""
    sys = ladder[-1 if n is None else n]
    from .angles import Arc
    return ArcSet([Arc(float(a), float(ln)) for a, ln in _exact_pairs(sys)])


def box_dimension_estimate(ladder: list, levels=range(2, 9)) -> float:
    """Least-squares slope of log(component count) vs log(1/size)."""
    xs, ys = [], []
    for n in levels:
        pairs = _exact_pairs(ladder[n])
        count = len(pairs)
        size = max(float(ln) for _a, ln in pairs)
        xs.append(math.log(1.0 / size))
        ys.append(math.log(count))
    xb = sum(xs) / len(xs)
    yb = sum(ys) / len(ys)
    num = sum((x - xb) * (y - yb) for x, y in zip(xs, ys))
    den = sum((x - xb) ** 2 for x in xs)
    return num / den


def uniqueness_check(table: PiTable) -> list:
    """Rotational freedom of the semiconjugacy: the d-1 valid offsets.

    Adding j/(d-1) to Pi conjugates the same pair of maps; any other
    constant breaks the functional equation.  Every offset is verified
    on the table before being reported.
    """
    d = table.d
    if d < 2:
        return [Fraction(0)]
    offsets = []
    lookup_all = [dict(lv.elements) for lv in table.levels]
    m = table.D ** table.k
    for j in range(d - 1):
        o = Fraction(j, d - 1)
        ok = True
        for n in range(1, len(table.levels)):
            for a, p in table.levels[n].elements:
                img_pi = lookup_all[n - 1][(a * m) % 1]
                if (d * (p + o)) % 1 != (img_pi + o) % 1:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            offsets.append(o)
    return offsets


def semiconjugacy_summary(table: PiTable, fiber_depth: int = 6) -> dict:
    """One-stop report of the construction's measurable facts."""
    d = table.d
    gaps = classify_gaps(table.systems)
    fibers = []
    worst = 1
    for i in range(d ** 2):
        fr = fiber(table, Fraction(i, d ** 2))
        worst = max(worst, len(fr.points))
        fibers.append({
            "tau": {"num": fr.tau.numerator, "den": fr.tau.denominator},
            "points": [p.to_json() for p in fr.points],
            "split": fr.split,
            "resolved": fr.resolved,
        })
    return {
        "schema": "rayatlas/semiconj/1",
        "theta0": {"num": table.theta0.numerator,
                   "den": table.theta0.denominator},
        "depth": table.depth,
        "degree": d,
        "taut_multiplicity_sum": taut_multiplicity_sum(table.systems),
        "box_dimension": box_dimension_estimate(table.systems)
        if table.depth >= 8 else None,
        "uniqueness_offsets": [
            {"num": o.numerator, "den": o.denominator}
            for o in uniqueness_check(table)],
        "max_fiber_cardinality": worst,
        "fibers": fibers,
        "gap_classes": {
            cls: sum(1 for r in gaps if r.orbit_class == cls)
            for cls in ("taut", "to_taut", "periodic",
                        "preperiodic_to_periodic", "unresolved")},
    }
