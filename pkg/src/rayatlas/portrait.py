"""Orbit portraits: rational ray angles co-landing on a repelling cycle.

Everything here is exact arithmetic on fractions of a turn.  A portrait
records, for each point of the cycle, the angles of the rays landing
there; sectors are the complementary arcs at each point, pushed around
by the angle map.  Weights, sector cycles, essential/ghost/minimal
classification and the attachment bookkeeping for escaping critical
points follow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import InconsistentPortrait

SMOOTH, PLUS, MINUS = "smooth", "plus", "minus"
_SIDES = {SMOOTH, PLUS, MINUS}


def _rat(x) -> Fraction:
    if isinstance(x, float):
        raise ValueError("portrait angles must be rational, got a float")
    return Fraction(x) % 1


@dataclass(frozen=True)
class OrbitPortrait:
    D: int
    k: int
    lambda_sets: tuple        # per orbit point, sorted tuple of Fractions
    turn_sides: dict          # angle -> smooth | plus | minus
    rotation: Fraction        # combinatorial rotation of the return map
    ray_period: int           # common period of all angles under return

    @property
    def orbit_length(self) -> int:
        return len(self.lambda_sets)

    @property
    def cycles_per_point(self) -> int:
        return len(self.lambda_sets[0])

    def side(self, angle: Fraction) -> str:
        return self.turn_sides.get(angle, SMOOTH)

    def to_json(self) -> dict:
        return {
            "schema": "rayatlas/portrait/1",
            "D": self.D,
            "k": self.k,
            "lambda_sets": [
                [{"num": a.numerator, "den": a.denominator} for a in lam]
                for lam in self.lambda_sets],
            "turn_sides": [
                [self.side(a) for a in lam] for lam in self.lambda_sets],
            "rotation": {"num": self.rotation.numerator,
                         "den": self.rotation.denominator},
            "ray_period": self.ray_period,
        }


def _cyclic_gap_index(sorted_angles, x: Fraction) -> int:
    """Index i such that x lies in the arc from angle i to angle i+1."""
    n = len(sorted_angles)
    for i in range(n):
        a = sorted_angles[i]
        b = sorted_angles[(i + 1) % n]
        if (x - a) % 1 < (b - a) % 1:
            return i
    raise InconsistentPortrait(f"angle {x} coincides with a portrait angle")


def build_portrait(D: int, k: int, lambda_sets, turn_sides=None
                   ) -> OrbitPortrait:
    """Validate raw angle data into a portrait.

    Checks: the angle map sends each set onto the next, the return map
    acts on the first set as a rigid rotation, all angles share one
    period, and the co-landing chords are pairwise unlinked.
    """
    sets = []
    for lam in lambda_sets:
        angles = sorted({_rat(a) for a in lam})
        if len(angles) != len(lam):
            raise InconsistentPortrait("repeated angle in a landing set")
        sets.append(tuple(angles))
    n = len(sets)
    if n == 0 or any(len(s) == 0 for s in sets):
        raise InconsistentPortrait("empty landing set")
    if len({len(s) for s in sets}) != 1:
        raise InconsistentPortrait("landing sets differ in size")
    if n % k != 0:
        raise InconsistentPortrait(
            f"orbit length {n} is not a multiple of the component period {k}")

    for i in range(n):
        img = {(a * D) % 1 for a in sets[i]}
        if img != set(sets[(i + 1) % n]):
            raise InconsistentPortrait(
                f"multiplication by {D} does not map set {i} onto set "
                f"{(i + 1) % n}")

    # unlinked chords: each other set falls in a single complementary arc
    for i in range(n):
        for j in range(n):
            if i == j or len(sets[i]) < 2:
                continue
            gaps = {_cyclic_gap_index(sets[i], x) for x in sets[j]}
            if len(gaps) != 1:
                raise InconsistentPortrait(
                    f"rays of points {i} and {j} are linked")

    m = D ** n
    base = sets[0]
    ret = [(a * m) % 1 for a in base]
    try:
        perm = [base.index(x) for x in ret]
    except ValueError:
        raise InconsistentPortrait("return map does not preserve the "
                                   "first landing set")
    q = len(base)
    shift = {(perm[i] - i) % q for i in range(q)}
    if len(shift) != 1:
        raise InconsistentPortrait("return map is not a rotation on the "
                                   "landing set")
    p = shift.pop()
    rotation = Fraction(p, q) if p else Fraction(0)

    period = None
    for a in base:
        t, x = 1, (a * m) % 1
        while x != a:
            x = (x * m) % 1
            t += 1
            if t > 4096:
                raise InconsistentPortrait(f"angle {a} not periodic")
        if period is None:
            period = t
        elif period != t:
            raise InconsistentPortrait("angles have different periods")

    side_map = {}
    if turn_sides is not None:
        flat = list(turn_sides)
        if flat and isinstance(flat[0], (list, tuple)):
            if [len(row) for row in flat] != [len(s) for s in sets]:
                raise InconsistentPortrait("turn side table shape mismatch")
            for row, lam in zip(flat, sets):
                for side, a in zip(row, lam):
                    if side not in _SIDES:
                        raise InconsistentPortrait(f"unknown side {side!r}")
                    if side != SMOOTH:
                        side_map[a] = side
        else:
            raise InconsistentPortrait("turn sides must be given per set")

    return OrbitPortrait(D, k, tuple(sets), side_map, rotation, period)


# ---------------------------------------------------------------------------
# Sectors


@dataclass(frozen=True)
class Sector:
    base_index: int
    a: Fraction
    b: Fraction
    length: Fraction
    weight: int
    kind: Optional[str]       # essential | ghost | None when unannotated
    minimal: bool

    @property
    def key(self):
        return (self.base_index, self.a)

    def to_json(self) -> dict:
        return {
            "base": self.base_index,
            "a": {"num": self.a.numerator, "den": self.a.denominator},
            "b": {"num": self.b.numerator, "den": self.b.denominator},
            "length": {"num": self.length.numerator,
                       "den": self.length.denominator},
            "weight": self.weight,
            "kind": self.kind,
            "minimal": self.minimal,
        }


@dataclass
class SectorAnalysis:
    sectors: list
    sigma: dict               # sector key -> sector key
    cycles: list              # list of lists of sector keys
    by_key: dict = field(default_factory=dict)

    def sector(self, key) -> Sector:
        return self.by_key[key]

    def cycle_of(self, key) -> list:
        for cyc in self.cycles:
            if key in cyc:
                return cyc
        raise KeyError(key)

    def to_json(self) -> dict:
        return {
            "schema": "rayatlas/sectors/1",
            "sectors": [s.to_json() for s in self.sectors],
            "cycles": [[[k[0], {"num": k[1].numerator,
                                "den": k[1].denominator}] for k in cyc]
                       for cyc in self.cycles],
        }


def sectors_of(portrait: OrbitPortrait, essential=None) -> SectorAnalysis:
    """All sectors with lengths, weights, the sector map and its cycles.

    essential, when given, lists (base_index, start_angle) pairs naming
    the sector at each orbit point that holds the bounded component;
    the rest are ghosts.  The annotation must pick exactly one sector
    per point and be closed under the sector map.
    """
    D = portrait.D
    n = portrait.orbit_length
    raw = []
    for i, lam in enumerate(portrait.lambda_sets):
        q = len(lam)
        for j in range(q):
            a, b = lam[j], lam[(j + 1) % q]
            length = (b - a) % 1 if q > 1 else Fraction(1)
            w = int(D * length)
            if D * length == w and q > 1:
                raise InconsistentPortrait(
                    f"sector ({i}, {a}, {b}) has integer stretch factor")
            raw.append((i, a, b, length, w))

    keys = {(i, a) for i, a, _b, _l, _w in raw}
    sigma = {}
    for i, a, b, _l, _w in raw:
        img = ((i + 1) % n, (a * D) % 1)
        if img not in keys:
            raise InconsistentPortrait(
                f"image of sector ({i}, {a}) is not a sector")
        sigma[(i, a)] = img
    for i, a, b, length, w in raw:
        ia, ib = (a * D) % 1, (b * D) % 1
        jb = portrait.lambda_sets[(i + 1) % n]
        qn = len(jb)
        nxt = jb[(jb.index(ia) + 1) % qn]
        if qn > 1 and nxt != ib:
            raise InconsistentPortrait(
                f"sector ({i}, {a}, {b}) maps across an angle of the "
                f"next landing set")
        if qn > 1 and ((ib - ia) % 1) != D * length - w:
            raise InconsistentPortrait(
                f"sector ({i}, {a}) image length mismatch")

    seen = set()
    cycles = []
    for key in sorted(keys):
        if key in seen:
            continue
        cyc, cur = [], key
        while cur not in seen:
            seen.add(cur)
            cyc.append(cur)
            cur = sigma[cur]
        if cur in cyc:
            cycles.append(cyc[cyc.index(cur):])

    ess = set()
    if essential is not None:
        ess = {(int(i), _rat(a)) for i, a in essential}
        if not ess <= keys:
            raise InconsistentPortrait("essential annotation names a "
                                       "sector that does not exist")
        per_base = [sum(1 for i, _a in ess if i == b) for b in range(n)]
        if per_base != [1] * n:
            raise InconsistentPortrait("exactly one essential sector per "
                                       "orbit point is required")
        for key in ess:
            if sigma[key] not in ess:
                raise InconsistentPortrait("the sector map must preserve "
                                           "the essential family")

    sectors = []
    by_key = {}
    for i, a, b, length, w in raw:
        kind = None
        if essential is not None:
            kind = "essential" if (i, a) in ess else "ghost"
        contains_orbit = False
        for j, lam in enumerate(portrait.lambda_sets):
            if j == i:
                continue
            if all((x - a) % 1 < length for x in lam):
                contains_orbit = True
                break
        minimal = (kind == "ghost") and not contains_orbit
        rec = Sector(i, a, b, length, w, kind, minimal)
        sectors.append(rec)
        by_key[rec.key] = rec

    per_base = {}
    for s in sectors:
        per_base[s.base_index] = per_base.get(s.base_index, 0) + s.weight
    if len(portrait.lambda_sets[0]) > 1:
        for i, total in per_base.items():
            if total != D - 1:
                raise InconsistentPortrait(
                    f"weights at orbit point {i} sum to {total}, "
                    f"expected {D - 1}")

    return SectorAnalysis(sectors, sigma, cycles, by_key)


def ghost_sector_cycles(analysis: SectorAnalysis) -> list:
    """Cycles of the sector map consisting entirely of ghost sectors."""
    out = []
    for cyc in analysis.cycles:
        kinds = {analysis.sector(k).kind for k in cyc}
        if kinds == {"ghost"}:
            out.append(cyc)
    return out


# ---------------------------------------------------------------------------
# Attachment of escaping critical points


@dataclass(frozen=True)
class CriticalMarker:
    """Combinatorial position of one escaping critical point.

    rays lists the portrait angles whose broken rays pass through the
    point; interior names a sector key when the point sits inside one.
    The critical value inherits attachment through the sector map.
    """
    rays: tuple = ()
    interior: Optional[tuple] = None
    value_interior: Optional[tuple] = None
    label: str = ""


@dataclass
class AttachmentReport:
    point_attached: dict      # label -> list of sector keys
    value_attached: dict      # label -> list of sector keys
    n1: int
    ambiguous: list


def attachments(portrait: OrbitPortrait, analysis: SectorAnalysis,
                criticals) -> AttachmentReport:
    """Attach critical points and values to sectors by boundary rules.

    A point on a sector's starting ray counts when that ray is the
    minus limit; on the ending ray, when it is the plus limit.  The
    value of an attached point is attached to the image sector.  n1
    counts critical values attached to minimal ghost sectors.
    """
    pts, vals, amb = {}, {}, []
    for idx, cm in enumerate(criticals):
        label = cm.label or f"critical-{idx}"
        rays = {_rat(r) for r in cm.rays}
        for r in rays:
            if portrait.side(r) == SMOOTH:
                amb.append((label, f"ray {r} is smooth but carries a "
                            "critical point"))
        attached = []
        for s in analysis.sectors:
            hit = (cm.interior is not None and s.key == tuple(cm.interior))
            if s.a in rays and portrait.side(s.a) == MINUS:
                hit = True
            if s.b in rays and portrait.side(s.b) == PLUS:
                hit = True
            if hit:
                attached.append(s.key)
        pts[label] = attached
        vattached = [analysis.sigma[k] for k in attached]
        if cm.value_interior is not None:
            vi = tuple(cm.value_interior)
            if vi not in vattached:
                vattached.append(vi)
        vals[label] = vattached

    n1 = 0
    for label, keys in vals.items():
        minimal_hits = [k for k in keys
                        if analysis.sector(k).minimal]
        if len(minimal_hits) > 1:
            amb.append((label, "value attached to several minimal ghost "
                        "sectors"))
        if minimal_hits:
            n1 += 1
    return AttachmentReport(pts, vals, n1, amb)


# ---------------------------------------------------------------------------
# Counting lemmas


def audit_counts(portrait: OrbitPortrait, analysis: SectorAnalysis,
                 n1: int, n2: int, d: int,
                 fiber_card: Optional[int] = None) -> dict:
    """Check the counting inequalities tying sectors to the degree drop.

    Each check reports both sides; the ghost-cycle bound is strict when
    the bounded component has period one.
    """
    D = portrait.D
    checks = {}

    checks["escaping_budget"] = {
        "lhs": n1 + n2, "rhs": D - d, "ok": n1 + n2 <= D - d,
        "note": "critical values attached or loose vs degree drop"}

    annotated = all(s.kind is not None for s in analysis.sectors)
    if annotated:
        m_cycles = len(ghost_sector_cycles(analysis))
        strict = portrait.k == 1
        ok = m_cycles < n1 + 1 if strict else m_cycles <= n1 + 1
        checks["ghost_cycles"] = {
            "lhs": m_cycles, "rhs": n1 + 1, "ok": ok,
            "strict": strict,
            "note": "cycles of ghost sectors vs attached values"}

    if fiber_card is not None:
        checks["fiber_cardinality"] = {
            "lhs": fiber_card, "rhs": n1 + 2, "ok": fiber_card <= n1 + 2,
            "note": "points of one fiber vs attached values"}

    fed = True
    details = []
    for cyc in analysis.cycles:
        shortest = min(cyc, key=lambda k: analysis.sector(k).length)
        pre = [k for k in cyc if analysis.sigma[k] == shortest]
        w = analysis.sector(pre[0]).weight if pre else 0
        details.append({"cycle": len(cyc),
                        "shortest_length": str(
                            analysis.sector(shortest).length),
                        "feeding_weight": w})
        if w < 1:
            fed = False
    checks["shortest_sector_fed"] = {
        "ok": fed, "cycles": details,
        "note": "each sector cycle funnels at least one critical point "
                "into its shortest member"}

    checks["ok"] = all(c["ok"] for c in checks.values()
                       if isinstance(c, dict))
    return checks


# ---------------------------------------------------------------------------
# JSON interface


def _angle_from_json(doc) -> Fraction:
    return Fraction(int(doc["num"]), int(doc["den"])) % 1


def load_portrait(doc: dict) -> OrbitPortrait:
    """Portrait from its JSON form; sides default to smooth."""
    lams = [[_angle_from_json(a) for a in lam]
            for lam in doc["lambda_sets"]]
    sides = doc.get("turn_sides")
    return build_portrait(int(doc["D"]), int(doc["k"]), lams, sides)


def load_essential(doc: dict):
    """Optional essential-sector annotation from the same JSON document."""
    if "essential" not in doc:
        return None
    return [(int(i), _angle_from_json(a)) for i, a in doc["essential"]]


def load_criticals(doc: dict):
    """Optional critical-point markers from the same JSON document."""
    out = []
    for cm in doc.get("criticals", []):
        interior = cm.get("interior")
        vinterior = cm.get("value_interior")
        out.append(CriticalMarker(
            rays=tuple(_angle_from_json(a) for a in cm.get("rays", [])),
            interior=(int(interior[0]), _angle_from_json(interior[1]))
            if interior else None,
            value_interior=(int(vinterior[0]), _angle_from_json(vinterior[1]))
            if vinterior else None,
            label=cm.get("label", "")))
    return out
