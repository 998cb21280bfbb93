"""Equipotential curves and the angular interval systems they carve out.

A closed level curve of the potential around a bounded component is
walked with a predictor-corrector scheme.  Reading the field-line angle
along the curve yields the visible angle intervals E_s; their closure
I_s, together with the gaps and the potentials at which the bounding ray
pairs merge, is the combinatorial backbone consumed by the
semiconjugacy construction.

Two routes produce interval systems.  The numeric route traces the
actual plane curve.  The ladder route pulls the top-level system back
through angle multiplication; when every crash angle snaps to its
rational label the ladder is exact down to any depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from .angles import Angle, Arc, ArcSet, cyc_delta, cyc_dist, frac_part
from .errors import (CurveNotClosed, MismatchBeyondTolerance,
                     NoPolynomialLikeRestriction, RayatlasError, SeedEscapes)
from .poly import Polynomial, escaping_criticals, external_angle, green
from .rays import (DEFAULT_CONTROL, StepControl, _grid, _trace_smooth,
                   crash_potential, critical_ray_data)


@dataclass(frozen=True)
class ComponentSeed:
    """Marker for a bounded periodic component: a point inside it."""

    marker: complex
    k: int = 1


@dataclass(frozen=True)
class GapInfo:
    a: Angle
    b: Angle
    crash_potential: float

    def to_json(self) -> dict:
        return {"a": self.a.to_json(), "b": self.b.to_json(),
                "crash_s": self.crash_potential}


@dataclass
class IntervalSystem:
    """Angle intervals I_s at one potential, with annotated gaps.

    ``exact`` carries Fraction endpoint pairs parallel to ``arcs`` when
    the system was built by the rational ladder.
    """

    s: float
    arcs: ArcSet
    gaps: list
    k: int
    d: int
    D: int = 0
    exact: Optional[list] = None
    root_points: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "schema": "rayatlas/intervals/1",
            "s": self.s,
            "arcs": [[a.start, frac_part(a.start + a.length) if a.length else a.start]
                     for a in self.arcs.arcs],
            "gaps": [g.to_json() for g in self.gaps],
            "k": self.k,
            "d": self.d,
            "D": self.D,
        }
        if self.root_points:
            out["roots"] = [
                {"z": [r.location.real, r.location.imag],
                 "before": r.theta_before, "after": r.theta_after,
                 "err": r.err} for r in self.root_points]
        return out


# ---------------------------------------------------------------------------
# Level-curve tracing


@dataclass(frozen=True)
class RootPoint:
    """Point on the level curve where a merged ray pair enters."""

    location: complex
    theta_before: float
    theta_after: float
    err: float = 0.0


@dataclass(frozen=True)
class ReadoutCut:
    """Discontinuity of the raw angle readout along the curve.

    The escape-argument readout is continuous except on the stretch
    shadowed by an escaping critical point, where it carries a branch
    jump of exactly 1/D.  One cut appears per visible gap, so the count
    is meaningful, but the jump values sit inside the gap rather than at
    its edges.
    """

    location: complex
    theta_before: float
    theta_after: float
    position: int          # index into the curve polyline


@dataclass
class EquipotentialCurve:
    s: float
    points: list
    angles: list           # raw readout at each point, None if unreadable
    cuts: list
    closed: bool


def _seed_is_bounded(P: Polynomial, seed: ComponentSeed, n: int = 300) -> bool:
    z = complex(seed.marker)
    R = P.escape_radius
    for _ in range(n):
        if abs(z) > R:
            return False
        z = P.iterate(z, seed.k)
    return True


def _march_to_level(P: Polynomial, z0: complex, s: float) -> complex:
    """First G = s point on the horizontal ray from z0."""
    step = 0.1 * (1.0 + abs(z0))
    lo = z0
    t = step
    while green(P, z0 + t, want_derivative=False).value < s:
        t *= 2.0
        if t > 1e6:
            raise CurveNotClosed("no level crossing found from the marker")
    lo_t = t / 2.0 if t > step else 0.0
    hi_t = t
    for _ in range(80):
        mid = 0.5 * (lo_t + hi_t)
        if green(P, z0 + mid, want_derivative=False).value < s:
            lo_t = mid
        else:
            hi_t = mid
    return z0 + 0.5 * (lo_t + hi_t)


def _project(P: Polynomial, z: complex, s: float, iters: int = 6) -> Optional[complex]:
    """Pull z onto the level set G = s along the gradient."""
    for _ in range(iters):
        gv = green(P, z)
        if not gv.escaped or gv.gradient is None:
            return None
        g = gv.gradient
        n2 = g.real * g.real + g.imag * g.imag
        if n2 == 0.0:
            return None
        corr = (gv.value - s) / n2
        z = z - corr * g
        if abs(corr) * math.sqrt(n2) < 1e-13 * max(1.0, s):
            return z
    gv = green(P, z, want_derivative=False)
    if abs(gv.value - s) < 1e-9 * max(1.0, s):
        return z
    return None


def equipotential_trace(P: Polynomial, seed: ComponentSeed, s: float,
                        step_scale: float = 0.01,
                        max_steps: int = 200000,
                        read_angles: bool = True) -> EquipotentialCurve:
    """Walk the closed level curve G = s around the seed's component.

    The predictor follows the rotated gradient counterclockwise, the
    corrector restores the potential.  The raw escape-argument readout
    at each accepted point is stored along with the branch cuts it
    exhibits behind escaping criticals; unreadable points come back as
    None.
    """
    if s <= 0:
        raise ValueError("potential must be positive")
    if not _seed_is_bounded(P, seed):
        raise SeedEscapes("marker orbit escapes; not a bounded component")
    z0 = _march_to_level(P, complex(seed.marker), s)
    pts = [z0]
    h0 = step_scale * (1.0 + abs(z0 - seed.marker))
    h = h0
    h_min = h0 * 1e-6
    z = z0
    arclen = 0.0
    closed = False
    for _ in range(max_steps):
        gv = green(P, z)
        if gv.gradient is None or not gv.escaped:
            raise CurveNotClosed("lost the gradient along the curve")
        g = gv.gradient
        tan = 1j * g / abs(g)
        cand = None
        while h >= h_min:
            cand = _project(P, z + h * tan, s)
            if cand is not None and abs(cand - z) < 3.0 * h:
                disp = cand - z
                if abs(disp) > 0:
                    # deviation from the local tangent measures the turn
                    # accrued over this step; it vanishes with h
                    cosang = (disp.real * tan.real +
                              disp.imag * tan.imag) / abs(disp)
                    if cosang > 0.98:
                        break
            h *= 0.5
            cand = None
        if cand is None:
            raise CurveNotClosed("step collapsed on the level curve")
        arclen += abs(cand - z)
        z = cand
        pts.append(z)
        if h < h0:
            h *= 1.3
        if len(pts) > 8 and abs(z - z0) < 1.5 * h and arclen > 10 * h0:
            closed = True
            break
    if not closed:
        raise CurveNotClosed("did not return to the start point")

    angles = []
    if read_angles:
        for p in pts:
            try:
                angles.append(external_angle(P, p).value)
            except Exception:
                angles.append(None)
    cuts = _locate_cuts(P, pts, angles, s) if read_angles else []
    return EquipotentialCurve(s, pts, angles, cuts, True)


def _gap_jump(prev: float, cur: float) -> float:
    """Forward angle increment walking counterclockwise."""
    return frac_part(cur - prev)


def _locate_cuts(P: Polynomial, pts: list, angles: list, s: float) -> list:
    """Find curve positions where the raw readout jumps."""
    n = len(pts)
    deltas = []
    for i in range(n - 1):
        a, b = angles[i], angles[i + 1]
        if a is None or b is None:
            continue
        deltas.append(_gap_jump(a, b))
    if not deltas:
        return []
    med = sorted(deltas)[len(deltas) // 2]
    floor = max(10.0 * med, 1e-7)
    cuts = []
    i = 0
    while i < n - 1:
        a, b = angles[i], angles[i + 1]
        j = i + 1
        # extend over unreadable stretches
        while b is None and j < n - 1:
            j += 1
            b = angles[j]
        if a is None or b is None:
            i = j
            continue
        if _gap_jump(a, b) > floor:
            cut = _refine_cut(P, pts[i], pts[j], s, a, b)
            cuts.append(ReadoutCut(cut[0], cut[1], cut[2], i))
            i = j
            continue
        i += 1 if j == i + 1 else (j - i)
    return cuts


def _refine_cut(P: Polynomial, za: complex, zb: complex, s: float,
                ta: float, tb: float):
    """Bisect along the curve chord for the readout discontinuity."""
    for _ in range(52):
        zm = _project(P, 0.5 * (za + zb), s)
        if zm is None:
            break
        try:
            tm = external_angle(P, zm).value
        except Exception:
            zb = zm
            continue
        if _gap_jump(ta, tm) < _gap_jump(tm, tb):
            za, ta = zm, tm
        else:
            zb, tb = zm, tm
        if abs(za - zb) < 1e-12 * (1.0 + abs(za)):
            break
    return 0.5 * (za + zb), ta, tb


def _escaping_weight(P: Polynomial) -> int:
    return sum(c.multiplicity for c in escaping_criticals(P))


def polynomial_like_degree(P: Polynomial, k: int = 1) -> int:
    """Degree of the restriction around the bounded component.

    For a period-1 component this is D minus the escaping critical
    multiplicity.  Longer periods depend on which criticals the cycle
    swallows, so the caller must supply the degree explicitly.
    """
    if k != 1:
        raise ValueError("degree is only derivable for period 1; pass d")
    return P.degree - _escaping_weight(P)


def _ray_point(P: Polynomial, theta: float, s: float,
               ctrl: StepControl) -> Optional[complex]:
    """Endpoint of the smooth ray descended to potential s, or None.

    Snapping is disabled so that angles arbitrarily close to a crash
    angle still trace their genuine smooth ray; only rays that actually
    collapse onto a critical structure return None.
    """
    probe = replace(ctrl, angle_snap=0.0, s_min=s)
    try:
        samples = _trace_smooth(P, frac_part(theta), _grid(probe, s), probe)
    except RayatlasError:
        return None
    return samples[-1][1]


def _segment_distance(z: complex, a: complex, b: complex) -> float:
    ab = b - a
    den = ab.real * ab.real + ab.imag * ab.imag
    if den == 0.0:
        return abs(z - a)
    t = ((z - a).real * ab.real + (z - a).imag * ab.imag) / den
    t = min(1.0, max(0.0, t))
    return abs(z - (a + t * ab))


def _curve_distance(pts: list, z: complex) -> float:
    best = math.inf
    n = len(pts)
    for i in range(n):
        d = _segment_distance(z, pts[i], pts[(i + 1) % n])
        if d < best:
            best = d
    return best


def extract_interval_system(P: Polynomial, seed: ComponentSeed, s: float,
                            d: Optional[int] = None,
                            ctrl: StepControl = DEFAULT_CONTROL,
                            step_scale: float = 0.01,
                            grid: int = 512,
                            edge_tol: float = 1e-8) -> IntervalSystem:
    """Numeric route: trace the curve, then find which angles reach it.

    An angle belongs to the system when its smooth ray, descended to
    potential s, ends on the traced curve; rays through the visible gaps
    end on other components of the level set, far away.  Arc edges are
    bisection-refined and become the root points of the curve.
    """
    curve = equipotential_trace(P, seed, s, step_scale=step_scale,
                                read_angles=False)
    if d is None:
        d = polynomial_like_degree(P, seed.k)
    pts = curve.points
    seg = sorted(abs(b - a) for a, b in zip(pts, pts[1:]))
    thresh = 2.0 * seg[len(seg) // 2]

    member = []
    for j in range(grid):
        p = _ray_point(P, j / grid, s, ctrl)
        member.append(p is not None and _curve_distance(pts, p) < thresh)
    if all(member):
        return IntervalSystem(s, ArcSet.full_circle(), [], seed.k, d,
                              P.degree)
    if not any(member):
        raise CurveNotClosed("no angle reaches the traced curve; the "
                             "membership threshold is implausible")

    def _refine(inside: float, outside: float) -> tuple:
        lo, hi = inside, outside
        while cyc_dist(lo, hi) > edge_tol:
            d = cyc_delta(lo, hi)
            if d > 0.5:
                d -= 1.0
            mid = frac_part(lo + d / 2.0)
            p = _ray_point(P, mid, s, ctrl)
            if p is not None and _curve_distance(pts, p) < thresh:
                lo = mid
            else:
                hi = mid
        return lo, hi

    edges = []   # (angle_inside, angle_outside, entering) per transition
    for j in range(grid):
        nxt = (j + 1) % grid
        if member[j] and not member[nxt]:
            ins, out = _refine(j / grid, nxt / grid)
            edges.append((ins, out, False))
        elif not member[j] and member[nxt]:
            ins, out = _refine(nxt / grid, j / grid)
            edges.append((ins, out, True))

    arcs = []
    gaps = []
    roots = []
    enters = [e for e in edges if e[2]]
    leaves = [e for e in edges if not e[2]]
    if len(enters) != len(leaves):
        raise CurveNotClosed("unbalanced arc transitions in the scan")
    for e_in in enters:
        # walk to the next departure counterclockwise
        best, bd = None, None
        for e_out in leaves:
            fwd = frac_part(e_out[0] - e_in[0])
            if bd is None or fwd < bd:
                best, bd = e_out, fwd
        arcs.append((e_in[0], frac_part(best[0] - e_in[0])))
    arcs.sort()
    for (a0, ln), (b0, _ln2) in zip(arcs, arcs[1:] + arcs[:1]):
        end = frac_part(a0 + ln)
        ga = Angle.approx(end, edge_tol)
        gb = Angle.approx(b0, edge_tol)
        pot = crash_potential(P, end, ctrl=ctrl) or \
            crash_potential(P, b0, ctrl=ctrl)
        gaps.append(GapInfo(ga, gb, pot))
        loc = _ray_point(P, end, s, ctrl)
        if loc is None:
            loc = _ray_point(P, b0, s, ctrl)
        if loc is not None:
            proj = _project(P, loc, s)
            roots.append(RootPoint(proj if proj is not None else loc,
                                   end, b0, edge_tol))
    arc_set = ArcSet([Arc(a, ln) for a, ln in arcs])
    return IntervalSystem(s, arc_set, gaps, seed.k, d, P.degree,
                          root_points=roots)


# ---------------------------------------------------------------------------
# Crash pairs and their rational labels


def crash_pair_table(P: Polynomial, ctrl: StepControl = DEFAULT_CONTROL) -> list:
    """Measured level-0 crash data per escaping critical point."""
    out = []
    for crit, t_img, angles in critical_ray_data(P):
        if not crit.escaping:
            continue
        out.append({
            "critical": crit,
            "angles": sorted(angles),
            "image_angle": t_img,
            "potential": crit.potential,
        })
    return out


def _rational_candidates(D: int, k: int, depth: int = 6):
    base = D ** k - 1
    dens = []
    q = base
    for _ in range(depth + 1):
        dens.append(q)
        q *= D
    return dens


def rational_crash_pairs(P: Polynomial, k: int = 1,
                         ctrl: StepControl = DEFAULT_CONTROL,
                         snap: Optional[float] = None) -> Optional[list]:
    """Snap each crash pair to its exact rational label, or None.

    The image angle is matched to a fraction with denominator dividing
    D^j (D^k - 1); each crash angle must then lie within the capture
    radius of the induced exact preimage.  Polynomials whose crash
    angles are genuinely irrational fail the snap and fall back to the
    measured table.
    """
    D = P.degree
    if snap is None:
        snap = ctrl.angle_snap
    rows = []
    for row in crash_pair_table(P, ctrl):
        t_img = row["image_angle"]
        best = None
        for den in _rational_candidates(D, k):
            num = round(t_img * den)
            cand = Fraction(num % den, den)
            dist = cyc_dist(t_img, float(cand))
            if dist <= max(snap * D, 0.02) and (best is None or dist < best[1]):
                best = (cand, dist)
                break  # smallest denominator family wins
        if best is None:
            return None
        img = best[0]
        exact_angles = []
        for a in row["angles"]:
            j = round(D * a - float(img))
            cand = (img + j) / D
            cand = Fraction(cand.numerator % cand.denominator, cand.denominator)
            if cyc_dist(a, float(cand)) > snap:
                return None
            exact_angles.append(cand)
        rows.append({
            "critical": row["critical"],
            "angles": sorted(exact_angles),
            "image_angle": img,
            "potential": row["potential"],
        })
    return rows or None


# ---------------------------------------------------------------------------
# Exact arc arithmetic on (start, length) pairs; values may be Fraction
# or float, wrap via start + length > 1


def _norm_pairs(pairs):
    out = []
    for a, ln in pairs:
        if ln <= 0:
            continue
        a = a % 1
        out.append((a, ln))
    out.sort()
    return out


def _pair_complement(pairs, one):
    """Gaps of a disjoint sorted arc list."""
    if not pairs:
        return [(one * 0, one)]
    gaps = []
    for (a, ln), (b, _lb) in zip(pairs, pairs[1:] + [(pairs[0][0] + one, 0)]):
        end = a + ln
        if b > end:
            gaps.append((end % 1, b - end))
    return gaps


def _pair_isect(A, B, one):
    """Intersection of two disjoint arc lists, dropping point overlaps."""
    out = []
    for a, la in A:
        for b, lb in B:
            for shift in (-one, one * 0, one):
                lo = max(a, b + shift)
                hi = min(a + la, b + shift + lb)
                if hi > lo:
                    out.append((lo % 1, hi - lo))
    return _norm_pairs(out)


def _pair_preimages(pairs, m, one):
    out = []
    for a, ln in pairs:
        for j in range(m):
            out.append(((a + j * one) / m % 1, ln / m))
    return _norm_pairs(out)


def _to_arcset(pairs) -> ArcSet:
    return ArcSet([Arc(float(a), float(ln)) for a, ln in pairs])


# ---------------------------------------------------------------------------
# The interval-system ladder


def interval_ladder(P: Polynomial, k: int = 1, d: Optional[int] = None,
                    n_max: int = 10, s0: Optional[float] = None,
                    ctrl: StepControl = DEFAULT_CONTROL) -> list:
    """Interval systems at s_n = s0 D^{-nk}, s0 = 0.9 min crash potential.

    Exact Fraction endpoints whenever the crash pairs carry rational
    labels; measured floats otherwise.  Level n removes every wake copy
    of generation <= n that is visible in the level-0 system.
    """
    D = P.degree
    if d is None:
        d = polynomial_like_degree(P, k)
    pairs = rational_crash_pairs(P, k, ctrl)
    if pairs is not None:
        one = Fraction(1)
    else:
        one = 1.0
        pairs = crash_pair_table(P, ctrl)
    if not pairs:
        # connected case: every level is the full circle
        if s0 is None:
            raise NoPolynomialLikeRestriction(
                "no escaping critical points; supply s0 for the degenerate "
                "full-circle ladder")
        return [IntervalSystem(s0 / D ** (n * k), ArcSet.full_circle(), [],
                               k, d, D, exact=[(Fraction(0), Fraction(1))])
                for n in range(n_max + 1)]
    s_pair = min(row["potential"] for row in pairs)
    if s0 is None:
        s0 = 0.9 * s_pair

    # base wakes: for an escaping critical of local order nu the wake is
    # the arc between its extreme crash angles of length (nu-1)/D
    wakes = []
    edge_pot = {}
    for row in pairs:
        angs = row["angles"]
        nu = row["critical"].order
        lo, hi = angs[0], angs[-1]
        ln = (hi - lo) % 1
        target = (one * (nu - 1)) / D
        if abs(float(ln - target)) > 0.02:
            lo, hi = hi, lo
            ln = (hi - lo) % 1
        wakes.append((lo % 1, ln))
        for a in angs:
            edge_pot[a % 1] = row["potential"]
    wakes = _norm_pairs(wakes)

    base = _pair_complement(wakes, one)
    systems = []
    cur = base
    for n in range(n_max + 1):
        s_n = s0 / D ** (n * k)
        gap_pairs = _pair_complement(cur, one)
        gaps = []
        for a, ln in gap_pairs:
            b = (a + ln) % 1
            pa = _edge_potential(edge_pot, a, n, D, k, s_pair)
            pb = _edge_potential(edge_pot, b, n, D, k, s_pair)
            pot = min(x for x in (pa, pb) if x is not None) \
                if (pa is not None or pb is not None) else s_pair
            ga = Angle.of(a) if isinstance(a, Fraction) else Angle.approx(float(a), 1e-9)
            gb = Angle.of(b) if isinstance(b, Fraction) else Angle.approx(float(b), 1e-9)
            gaps.append(GapInfo(ga, gb, pot))
        systems.append(IntervalSystem(
            s_n, _to_arcset(cur), gaps, k, d, D,
            exact=cur if one == Fraction(1) else None))
        if n == n_max:
            break
        pre = _pair_preimages(cur, D ** k, one)
        cur = _pair_isect(pre, base, one)
        # record potentials of freshly created edges (wake copies one
        # generation deeper)
        gen_pot = s_pair / D ** ((n + 1) * k)
        for a, ln in cur:
            for endpoint in (a, (a + ln) % 1):
                edge_pot.setdefault(endpoint, gen_pot)
    return systems


def _edge_potential(edge_pot, x, n, D, k, s_pair):
    if x in edge_pot:
        return edge_pot[x]
    # float route: nearest recorded edge
    best, bd = None, None
    for e, p in edge_pot.items():
        dd = cyc_dist(float(e), float(x))
        if bd is None or dd < bd:
            best, bd = p, dd
    if bd is not None and bd < 1e-6:
        return best
    return None


# ---------------------------------------------------------------------------
# Pushforward consistency


def pushforward_check(sys_s: IntervalSystem, sys_image: IntervalSystem,
                      tol: float = 1e-9) -> dict:
    """Verify that angle multiplication carries I_s onto I_{D^k s}.

    Endpoint-into-interior events (a collapsing taut gap maps its
    endpoints inside an image arc) are logged, not failed.  A genuine
    coverage defect beyond tol raises MismatchBeyondTolerance.
    """
    m = sys_s.D ** sys_s.k
    exact = sys_s.exact is not None and sys_image.exact is not None
    if exact:
        src = [(a % 1, ln) for a, ln in sys_s.exact]
        dst = [(a % 1, ln) for a, ln in sys_image.exact]
        one = Fraction(1)
    else:
        src = [(a.start, a.length) for a in sys_s.arcs.arcs]
        dst = [(a.start, a.length) for a in sys_image.arcs.arcs]
        one = 1.0
    images = [((a * m) % 1, ln * m) for a, ln in src]

    events = []
    defect = one * 0
    for (a, ln), (ia, il) in zip(src, images):
        if il >= 1:
            continue  # arc maps over the whole circle
        covered = sum(hi - lo
                      for b, bl in dst
                      for shift in (-one, one * 0, one)
                      for lo, hi in [(max(ia, b + shift),
                                      min(ia + il, b + shift + bl))]
                      if hi > lo)
        defect = max(defect, il - covered)
        for endpoint in (ia, (ia + il) % 1):
            for b, bl in dst:
                for shift in (-one, one * 0, one):
                    margin = min(endpoint - (b + shift),
                                 b + shift + bl - endpoint)
                    if margin > tol:
                        events.append({
                            "kind": "endpoint-into-interior",
                            "angle": float(endpoint),
                            "margin": float(margin),
                        })
    # reverse coverage: every target arc must be hit by image material
    back = one * 0
    for b, bl in dst:
        cov = one * 0
        for ia, il in images:
            if il >= 1:
                cov = bl
                break
            cov += sum(hi - lo
                       for shift in (-one, one * 0, one)
                       for lo, hi in [(max(ia + shift, b),
                                       min(ia + shift + il, b + bl))]
                       if hi > lo)
        back = max(back, bl - cov)
    report = {"ok": defect <= tol and back <= tol,
              "forward_defect": defect,
              "reverse_defect": back,
              "events": events}
    if not report["ok"]:
        raise MismatchBeyondTolerance(
            "pushforward defect %.3e exceeds %.1e"
            % (float(max(defect, back)), tol))
    return report




# ---------------------------------------------------------------------------
# Polynomial-like range


@dataclass(frozen=True)
class SStar:
    value: float
    degenerate: bool
    iterations: int


def estimate_s_star(P: Polynomial, seed: Optional[ComponentSeed] = None,
                    s_cap: Optional[float] = None,
                    rel: float = 0.01) -> SStar:
    """Largest potential whose sublevel set still restricts to degree d.

    Found by bisection on "no escaping critical sits strictly below s".
    Connected polynomials have no such restriction: with s_cap supplied
    the cap is returned flagged degenerate, otherwise this raises.
    """
    esc = escaping_criticals(P)
    if not esc:
        if s_cap is not None:
            return SStar(s_cap, True, 0)
        raise NoPolynomialLikeRestriction(
            "every critical point is bounded; configure s_cap for the "
            "degenerate connected case")
    lo = 0.0
    hi = 2.0 * max(c.potential for c in esc)
    it = 0
    while hi - lo > rel * max(hi, 1e-300) and it < 200:
        mid = 0.5 * (lo + hi)
        if all(c.potential >= mid for c in esc):
            lo = mid
        else:
            hi = mid
        it += 1
    return SStar(lo, False, it)


# ---------------------------------------------------------------------------
# The induced circle map


def build_gs(sys: IntervalSystem, sys_image: IntervalSystem, theta0):
    """Piecewise-affine model of the return map read through I_s.

    In the normalized arc-length coordinate psi of I_s the map has
    slope D^k on material landing back in I_s and plateaus over the
    gaps; the result is a continuous monotone circle map of degree d.
    psi(theta0) = 0.  sys_image is consulted only as a sanity check
    that arc images stay inside the next system.
    """
    from .angles import PiecewiseAffineCircleMap

    m = sys.D ** sys.k
    t0 = _as_frac_or_float(theta0)
    if sys.exact is not None and not isinstance(t0, Fraction):
        t0 = Fraction(t0)     # floats convert exactly
    if sys.arcs.is_full:
        # degenerate connected case: the model is multiplication itself
        one = Fraction(1) if isinstance(t0, Fraction) else 1.0
        off = (t0 * m - t0) % 1
        return PiecewiseAffineCircleMap([one * 0, one], [off, off + m])

    pairs = sys.exact if sys.exact is not None else [
        (a.start, a.length) for a in sys.arcs.arcs]
    one = Fraction(1) if sys.exact is not None else 1.0
    eps = 0 if sys.exact is not None else 1e-9
    total = sum(ln for _a, ln in pairs)

    # walk order: rotate the arc list so the walk starts at theta0,
    # splitting its arc there if theta0 is interior
    start_idx = None
    offset = None
    for i, (a, ln) in enumerate(pairs):
        for shift in (-one, one * 0, one):
            t = t0 + shift
            if a - eps <= t <= a + ln + eps:
                start_idx = i
                offset = min(max(t - a, one * 0), ln)
                break
        if start_idx is not None:
            break
    if start_idx is None:
        raise ValueError("theta0 must belong to the interval system")

    walk = []
    first_a, first_ln = pairs[start_idx]
    if offset < first_ln:
        walk.append((first_a + offset, first_ln - offset))
    for j in range(1, len(pairs)):
        walk.append(pairs[(start_idx + j) % len(pairs)])
    if offset > 0:
        walk.append((first_a, offset))

    # cut every arc at preimages of all arc endpoints so each piece
    # maps entirely into one arc or one gap
    cuts = set()
    for a, ln in pairs:
        for e in (a, a + ln):
            for j in range(m):
                cuts.add(((e + j) / m) % 1)
    pieces = []
    for a, ln in walk:
        local = {a, a + ln}
        for c in cuts:
            for shift in (-one, one * 0, one):
                cc = c + shift
                if a < cc < a + ln:
                    local.add(cc)
        srt = sorted(local)
        pieces.extend(zip(srt, srt[1:]))

    # everything below works in the rotated coordinate psi - psi(theta0)
    acc0 = one * 0
    for j in range(start_idx):
        acc0 += pairs[j][1]
    psi_t0 = (acc0 + offset) / total

    xs = [one * 0]
    ys = []
    y0 = (_image_coordinate(pairs, total, (t0 * m) % 1, one, eps) - psi_t0) % 1
    lift = y0
    acc = one * 0
    for x0, x1 in pieces:
        mid = ((x0 + x1) / 2 * m) % 1
        inside = _membership(pairs, mid, one, eps) is not None
        rise = (x1 - x0) * m / total if inside else one * 0
        if ys == []:
            ys.append(lift)
        acc = acc + (x1 - x0) / total
        lift = lift + rise
        xs.append(acc)
        ys.append(lift)
    xs[-1] = one * 1
    ys[-1] = ys[0] + sys.d   # exact closure; float drift is below 1e-9
    if sys_image is not None and not sys_image.arcs.is_full:
        # every rising piece must push its material into the image system
        for x0, x1 in pieces:
            mid = ((x0 + x1) / 2 * m) % 1
            if _membership(pairs, mid, one, eps) is None:
                continue
            img0 = float((x0 * m) % 1)
            img_len = float((x1 - x0) * m)
            covered = sys_image.arcs.overlap_length(img0, img_len)
            if img_len - covered > 1e-9:
                raise MismatchBeyondTolerance(
                    "arc material maps outside the image system")
    return PiecewiseAffineCircleMap(xs, ys)


def _as_frac_or_float(theta):
    if isinstance(theta, Angle):
        return theta.exact if theta.exact is not None else theta.value
    return theta


def _membership(pairs, x, one, eps=0):
    x = x % 1
    for a, ln in pairs:
        for shift in (-one, one * 0, one):
            xx = x + shift
            if a - eps <= xx <= a + ln + eps:
                return a, xx - a
    return None


def _image_coordinate(pairs, total, y, one, eps=0):
    """Normalized coordinate of y, retracting gap points to the gap end."""
    hit = _membership(pairs, y, one, eps)
    acc = one * 0
    if hit is not None:
        for a, ln in pairs:
            if a == hit[0]:
                off = min(max(hit[1], one * 0), ln)
                return (acc + off) / total
            acc += ln
    # y sits in a gap: collapse onto the preceding arc end
    y = y % 1
    best, bdist, acc = None, None, one * 0
    for a, ln in pairs:
        end = (a + ln) % 1
        dist = (y - end) % 1
        if bdist is None or dist < bdist:
            bdist = dist
            best = (acc + ln) / total
        acc += ln
    return best % 1
