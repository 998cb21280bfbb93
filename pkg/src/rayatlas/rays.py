"""Tracing external field lines of the escape-rate potential.

A smooth ray is followed in the potential parametrization: predictor along
the gradient, corrector by Newton against a reference point placed far out
on the image ray, so every accepted sample satisfies both G(z) = s and the
angle constraint.  One-sided broken rays at generic captured angles are
computed as limits of smooth rays at shrinking angular offsets, accepted
when two successive offsets agree in sup norm away from the pinch
potentials.  At a fixed captured angle the ray is self-similar: each
stretch below a crash is the preimage of the stretch above it, so the
trace is assembled by pulling whole blocks of samples back through the
polynomial, turning to the chosen side at every critical point met.  The
crash cascade then sits at exactly geometric potentials and its
accumulation point gives the landing.

Angles are captured to the nearest computed crash angle within a small
tolerance (``angle_snap``).  Published example coefficients are truncated
to a few decimals, which perturbs every crash angle by more than machine
precision; capturing restores the intended combinatorics while changing
the traced angle by less than the coefficients' own uncertainty.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .angles import Angle, cyc_dist, frac_part
from .errors import (AngleUnresolved, BisectionFailed, SideRequired,
                     StepCollapse)
from .poly import (CriticalPoint, GreenValue, Polynomial, bottcher_log,
                   critical_points, escaping_criticals, green, preimages,
                   refine_precritical)

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class StepControl:
    """Tuning knobs for ray tracing; defaults work for the bundled examples."""

    s_start: float = 10.0
    grid_ratio: float = 2.0 ** 0.125
    s_min: float = 1e-8
    deep_potential: float = 8.0       # corrector reference lives above this
    max_halvings: int = 48
    corrector_iters: int = 8
    accept_tol: float = 1e-6          # sup-norm agreement between offsets
    offset0: float = 1e-3
    max_offsets: int = 30
    angle_snap: float = 5e-3          # angular capture radius for crashes
    snap_levels: int = 24
    landing_window: int = 32
    landing_tol: float = 1e-5


DEFAULT_CONTROL = StepControl()


@dataclass(frozen=True)
class CrashEvent:
    """A ray hitting a critical point of the potential."""

    potential: float
    location: complex
    order: int
    turn: str                         # "right" (plus side) or "left"

    def to_json(self) -> dict:
        return {"s": self.potential, "z": [self.location.real, self.location.imag],
                "order": self.order, "turn": self.turn}


@dataclass
class RayTrace:
    angle: Angle
    side: str                         # smooth | plus | minus
    samples: list                     # [(s, z)] strictly decreasing in s
    crashes: list
    terminal_potential: float
    landing: Optional[complex] = None

    def point_at(self, s: float) -> complex:
        """Sample nearest to potential s (log-space nearest)."""
        best = min(self.samples, key=lambda p: abs(math.log(p[0] / s)))
        return best[1]

    def to_json(self) -> dict:
        return {
            "schema": "rayatlas/trace/1",
            "angle": self.angle.to_json(),
            "side": self.side,
            "samples": [[s, z.real, z.imag] for s, z in self.samples],
            "crashes": [c.to_json() for c in self.crashes],
            "terminal_potential": self.terminal_potential,
            "landing": None if self.landing is None
                       else [self.landing.real, self.landing.imag],
        }

    @staticmethod
    def from_json(obj) -> "RayTrace":
        landing = obj.get("landing")
        return RayTrace(
            angle=Angle.from_json(obj["angle"]),
            side=obj["side"],
            samples=[(s, complex(re, im)) for s, re, im in obj["samples"]],
            crashes=[CrashEvent(c["s"], complex(*c["z"]), c["order"], c["turn"])
                     for c in obj["crashes"]],
            terminal_potential=obj["terminal_potential"],
            landing=None if landing is None else complex(*landing),
        )


# ---------------------------------------------------------------------------
# Crash-angle bookkeeping


_CRASH_TABLE: dict[str, list] = {}


def critical_ray_data(P: Polynomial) -> list:
    """Per escaping critical point: (critical, angle of the ray through its
    image, angles of the field lines crashing into it).

    The crash angles are found among the D preimages of the image-ray
    angle; only order-many of those field lines descend into the critical
    point itself, the rest pass through cocritical points where the
    gradient stays healthy.  A truncated trace separates the two cases by
    distance.
    """
    key = P.hash_key()
    if key not in _CRASH_TABLE:
        from .poly import external_angle
        probe = replace(DEFAULT_CONTROL, angle_snap=0.0)
        rows = []
        for c in escaping_criticals(P):
            t_img = external_angle(P, P(c.location)).value
            cands = sorted(frac_part((t_img + j) / P.degree)
                           for j in range(P.degree))
            grid = _grid(probe, c.potential * 1.05)
            scored = sorted(
                (abs(_trace_smooth(P, cand, grid, probe)[-1][1] - c.location),
                 cand)
                for cand in cands)
            keep = sorted(cand for _d, cand in scored[:c.order])
            rows.append((c, t_img, keep))
        _CRASH_TABLE[key] = rows
    return _CRASH_TABLE[key]


@dataclass(frozen=True)
class _SnapHit:
    level: int                        # forward steps to reach the critical hit
    critical: CriticalPoint
    candidate: float                  # crash angle at the critical level
    snapped: float                    # adjusted angle at level 0


def _snap_angle(P: Polynomial, theta: float, ctrl: StepControl
                ) -> Optional[_SnapHit]:
    """Detect that theta is within the capture radius of a crash angle.

    Checks forward images: theta is captured at level m when D^m theta lands
    within angle_snap of a candidate crash angle of an escaping critical
    point whose implied pinch potential is still above s_min.  The smallest
    m (highest pinch) wins.
    """
    D = P.degree
    t = frac_part(theta)
    for m in range(ctrl.snap_levels):
        best = None
        for crit, _t_img, cands in critical_ray_data(P):
            if crit.potential / D ** m < ctrl.s_min:
                continue
            for cand in cands:
                d = frac_part(t - cand + 0.5) - 0.5
                if abs(d) < ctrl.angle_snap and \
                        (best is None or abs(d) < abs(best[0])):
                    best = (d, crit, cand)
        if best is not None:
            d, crit, cand = best
            return _SnapHit(m, crit, cand, frac_part(theta - d / D ** m))
        t = frac_part(D * t)
    return None


def _nearest_candidate(P: Polynomial, ang_val: float):
    """(distance, critical, crash angle) closest to the given angle."""
    best = None
    for crit, _t_img, cands in critical_ray_data(P):
        for cand in cands:
            d = cyc_dist(ang_val, cand)
            if best is None or d < best[0]:
                best = (d, crit, cand)
    return best


def _chain_radius(ctrl: StepControl) -> float:
    """Capture radius for the polynomial's own crash-angle orbit.

    Truncated coefficients shift the whole crash-angle family, so the
    image of a measured crash angle misses the family by a multiple of
    the underlying detuning.  The internal radius is therefore looser
    than the user-facing one, still far below the candidate spacing.
    """
    return min(10.0 * ctrl.angle_snap, 0.05)


def _pinch_schedule(P: Polynomial, hit: _SnapHit, ctrl: StepControl) -> list:
    """Pinch potentials along the broken ray at hit.snapped.

    Level hit.level is exact by construction; each deeper level persists
    while the image angle is again a crash angle up to the internal
    radius, which for an eventually fixed angle never fails.
    """
    D = P.degree
    out = [(hit.level, hit.critical)]
    radius = _chain_radius(ctrl)
    ang = frac_part(D * hit.candidate)          # angle of the image ray
    level = hit.level + 1
    while hit.critical.potential / D ** level >= ctrl.s_min:
        best = _nearest_candidate(P, ang)
        if best is None or best[0] >= radius:
            break
        out.append((level, best[1]))
        ang = frac_part(D * best[2])
        level += 1
    return out


def _polish_fixed(P: Polynomial, z0: complex) -> complex:
    """Newton refinement of a fixed point of P; returns z0 on failure."""
    z = z0
    for _ in range(60):
        w, dw = P.eval_with_derivative(z)
        den = dw - 1.0
        if abs(den) < 1e-9:
            return z0
        step = (w - z) / den
        z -= step
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    return z if abs(z - z0) < 0.05 * (1.0 + abs(z0)) else z0


def _pull_block(P: Polynomial, block: list, guide: complex) -> list:
    """Preimage of a sample block along one inverse branch.

    Walks the block from the top down, picking for each sample the
    preimage nearest the running guide; the caller seeds the guide on the
    wanted side of the branch point.
    """
    out = []
    g = guide
    for s, z in block:
        w = min(preimages(P, z), key=lambda u: abs(u - g))
        out.append((s / P.degree, w))
        g = w
    return out


def _assemble_periodic_broken(P: Polynomial, hit: _SnapHit, side: str,
                              s_min: float, ctrl: StepControl):
    """Broken ray at a fixed captured angle, built by block pullback.

    The stretch above the first crash is a genuine field line.  Below it
    the ray is self-similar: the stretch over [s/D, s] is a preimage of
    the stretch over [s, Ds], entered along the descending separatrix on
    the turn side.  Assembling the trace this way keeps G(z) = s exact at
    every sample and places the crash cascade at the exact geometric
    potentials, whose accumulation point is the landing.
    """
    D = P.degree
    om = hit.critical.location
    s1 = hit.critical.potential
    order = hit.critical.order
    turn = "right" if side == "plus" else "left"
    # immediate right/left of the incoming direction between separatrices
    rot = cmath.exp(complex(0.0, (-math.pi if side == "plus" else math.pi)
                            / order))

    grid = _grid(ctrl, s1)
    if grid[0] <= D * s1 or len(grid) < 4:
        raise StepCollapse("crash sits too close to the start height",
                           potential=s1, point=om)
    upper = _trace_smooth(P, hit.snapped, grid[:-1], ctrl)
    d_in = om - upper[-1][1]
    samples = list(upper)
    samples.append((s1, om))
    crashes = [CrashEvent(s1, om, order, turn)]

    block = [(s, z) for s, z in upper if s <= D * s1 * (1 + 1e-12)]
    if len(block) < 2:
        raise StepCollapse("no sample block above the crash",
                           potential=s1, point=om)

    c_prev, din = om, d_in
    while crashes[-1].potential / D >= s_min * (1 - 1e-9):
        guide = c_prev + 0.5 * abs(din) * rot * (din / abs(din))
        nb = _pull_block(P, block, guide)
        c_new = min(preimages(P, c_prev), key=lambda u: abs(u - nb[-1][1]))
        p_new = crashes[-1].potential / D
        crashes.append(CrashEvent(p_new, c_new, order, turn))
        for s, z in nb:
            if s < samples[-1][0]:
                samples.append((s, z))
        samples.append((p_new, c_new))
        din = c_new - nb[-1][1]
        c_prev = c_new
        block = nb

    # partial block below the last crash, down to the floor
    guide = c_prev + 0.5 * abs(din) * rot * (din / abs(din))
    for s, z in block:
        if s / D < s_min:
            break
        w = min(preimages(P, z), key=lambda u: abs(u - guide))
        guide = w
        if s / D < samples[-1][0]:
            samples.append((s / D, w))

    # landing: extend the cascade beyond the floor and take its limit;
    # trend prediction keeps the branch while steps are healthy, nearest
    # point selection takes over once they reach float noise
    w3 = crashes[-3].location if len(crashes) >= 3 else crashes[-2].location
    w2, w1 = crashes[-2].location, crashes[-1].location
    for _ in range(400):
        d1, d0 = w1 - w2, w2 - w3
        if abs(d1) < 1e-14 * max(1.0, abs(w1)):
            break
        pred = w1
        if abs(d1) > 1e-10 and abs(d0) > 1e-13:
            pred = w1 + d1 * (d1 / d0)
        nxt = min(preimages(P, w1), key=lambda u: abs(u - pred))
        w3, w2, w1 = w2, w1, nxt
    landing = _polish_fixed(P, w1)
    return samples, crashes, landing


# ---------------------------------------------------------------------------
# Smooth tracing


def _deep_seed(P: Polynomial, s: float, theta: float) -> complex:
    """Point with potential s and angle theta, for s in the deep region.

    Newton on the principal log of the coordinate at infinity; for s around
    deep_potential the correction terms are tiny and three steps suffice.
    """
    target = complex(s, _TWO_PI * theta)
    z = cmath.exp(target)
    for _ in range(6):
        f = bottcher_log(P, z) - target
        # the log coordinate is defined up to 2 pi i; compare on the branch
        # nearest the current point
        f -= complex(0.0, _TWO_PI * round(f.imag / _TWO_PI))
        # d/dz of the log coordinate is the potential's log-derivative,
        # which is 1/z to leading order out here
        gv = green(P, z)
        ell = gv.log_derivative if gv.log_derivative else 1.0 / z
        step = f / ell
        z -= step
        if abs(step) < 1e-13 * abs(z):
            break
    return z


def _grid(ctrl: StepControl, s_min: float) -> list:
    out = [ctrl.s_start]
    while out[-1] > s_min:
        out.append(out[-1] / ctrl.grid_ratio)
    out[-1] = s_min
    return out


def _corrector(P: Polynomial, z_guess: complex, s: float, theta: float,
               ctrl: StepControl) -> Optional[complex]:
    """Newton-solve for the ray point at potential s and angle theta,
    using a reference point on the deep part of the image ray."""
    D = P.degree
    m = 0
    while s * D ** m < ctrl.deep_potential:
        m += 1
    w_ref = _deep_seed(P, s * D ** m, frac_part(theta * D ** m))
    z = z_guess
    last = math.inf
    for _ in range(ctrl.corrector_iters):
        w, dw = P.iterate_with_derivative(z, m)
        if dw == 0:
            return None
        step = (w - w_ref) / dw
        z -= step
        last = abs(step)
        if last < 1e-13 * max(1.0, abs(z)):
            break
    # convergence is judged in z-space: the forward residual saturates at
    # the conditioning floor D^m ulp long before z stops improving
    return z if last < 1e-9 * max(1.0, abs(z)) else None


def _advance(P: Polynomial, z: complex, s_from: float, s_to: float,
             theta: float, ctrl: StepControl) -> complex:
    """March one grid interval with multiplicative step adaptation.

    The log-potential step doubles after success and halves after a
    rejected corrector; rejection means Newton failed or moved far from
    the predictor (branch-jump risk near a pinch)."""
    s = s_from
    h_full = math.log(s_from / s_to)
    h = h_full
    h_min = h_full / 2.0 ** ctrl.max_halvings
    budget = 40 * 2 ** 12
    while s > s_to * (1 + 1e-12):
        budget -= 1
        if budget <= 0 or h < h_min:
            raise StepCollapse("adaptive step underflow",
                               potential=s, point=z)
        sub = max(s_to, s * math.exp(-h))
        gv = green(P, z)
        grad = gv.gradient
        if grad is None or abs(grad) == 0.0:
            raise StepCollapse("gradient vanished during descent",
                               potential=s, point=z)
        ds = sub - s
        z_pred = z + ds * grad / abs(grad) ** 2
        z_new = _corrector(P, z_pred, sub, theta, ctrl)
        step_scale = max(abs(z_pred - z), 1e-9 * (1.0 + abs(z)))
        if z_new is not None and abs(z_new - z_pred) <= 0.5 * step_scale:
            z = z_new
            s = sub
            h = min(2.0 * h, h_full)
        else:
            h *= 0.5
    return z


def _trace_smooth(P: Polynomial, theta: float, grid: list,
                  ctrl: StepControl) -> list:
    """Samples of the smooth ray at theta on the given potential grid."""
    z = _deep_seed(P, grid[0], theta)
    samples = [(grid[0], z)]
    for s_next in grid[1:]:
        z = _advance(P, z, samples[-1][0], s_next, theta, ctrl)
        samples.append((s_next, z))
    return samples


# ---------------------------------------------------------------------------
# Broken rays: one-sided limits


def _sup_distance(a: list, b: list, excluded: set) -> float:
    worst = 0.0
    for (sa, za), (sb, zb) in zip(a, b):
        if sa in excluded:
            continue
        worst = max(worst, abs(za - zb))
    return worst


def _excluded_potentials(grid: list, pinches: list) -> set:
    """Grid potentials within one grid interval of a pinch potential."""
    out = set()
    for p, _crit in pinches:
        for i, s in enumerate(grid):
            lo = grid[i + 1] if i + 1 < len(grid) else 0.0
            hi = grid[i - 1] if i > 0 else math.inf
            if lo < p < hi:
                out.add(s)
    return out


def _trace_broken(P: Polynomial, theta0: float, hit: Optional[_SnapHit],
                  side: str, s_min: float, ctrl: StepControl):
    """Limit of smooth rays R_{theta0 +/- eps}; returns (samples, crashes,
    accepted_eps)."""
    D = P.degree
    sign = 1.0 if side == "plus" else -1.0
    grid = _grid(ctrl, s_min)
    schedule = []
    if hit is not None:
        schedule = [(hit.critical.potential / D ** lvl, crit)
                    for lvl, crit in _pinch_schedule(P, hit, ctrl)]
        schedule = [(p, c) for p, c in schedule if p >= s_min]
    excluded = _excluded_potentials(grid, schedule)

    prev = None
    accepted = None
    eps = ctrl.offset0
    for _ in range(ctrl.max_offsets):
        cur = _trace_smooth(P, frac_part(theta0 + sign * eps), grid, ctrl)
        if prev is not None:
            d = _sup_distance(prev[1], cur, excluded)
            if d < ctrl.accept_tol:
                accepted = (eps, cur)
                break
        prev = (eps, cur)
        eps /= 2.0
    if accepted is None:
        raise StepCollapse(
            f"one-sided limit not settled after {ctrl.max_offsets} offsets",
            potential=s_min)

    eps_acc, samples = accepted
    # pin the pinch samples: the limit value there is the precritical point
    crashes = []
    turn = "right" if side == "plus" else "left"
    out = list(samples)
    for p, crit in schedule:
        lvl = round(math.log(crit.potential / p) / math.log(D))
        near = min(out, key=lambda sz: abs(math.log(sz[0] / p)))
        loc = refine_precritical(P, near[1], crit, lvl)
        if loc is None:
            continue
        crashes.append(CrashEvent(p, loc, crit.multiplicity + 1, turn))
        out = [(s, z) for s, z in out if abs(s - p) > 1e-18]
        out.append((p, loc))
    out.sort(key=lambda sz: -sz[0])
    crashes.sort(key=lambda c: -c.potential)
    return out, crashes, eps_acc


# ---------------------------------------------------------------------------
# Public operations


def _cascade_limit(crashes: list, tol: float) -> Optional[complex]:
    """Geometric extrapolation of a long crash cascade, or None.

    The cascade accumulates at the landing point; two successive Aitken
    accelerations agreeing within tol certify convergence.
    """
    if len(crashes) < 4:
        return None
    locs = [c.location for c in crashes]

    def aitken(a, b, c):
        den = c - 2 * b + a
        if abs(den) < 1e-18 * max(1.0, abs(c)):
            return c
        return c - (c - b) ** 2 / den

    acc = aitken(*locs[-3:])
    prev = aitken(*locs[-4:-1])
    if abs(acc - prev) < tol:
        return acc
    return None


def _landing(samples: list, ctrl: StepControl) -> Optional[complex]:
    window = samples[-ctrl.landing_window:]
    if len(window) < 3:
        return None
    pts = [z for _s, z in window]
    diam = max(abs(p - q) for p in pts for q in pts)
    if diam >= ctrl.landing_tol:
        return None
    # Aitken extrapolation of the geometric tail sharpens the limit
    z0, z1, z2 = pts[-3], pts[-2], pts[-1]
    denom = z2 - 2 * z1 + z0
    if abs(denom) > 1e-18 * max(1.0, abs(z2)):
        acc = z2 - (z2 - z1) ** 2 / denom
        if abs(acc - z2) < diam:
            return acc
    return z2


def trace_ray(P: Polynomial, theta, side: str = "smooth",
              s_min: Optional[float] = None,
              ctrl: StepControl = DEFAULT_CONTROL) -> RayTrace:
    """Trace the ray at the given angle down to s_min.

    side="smooth" follows the literal field line and refuses to pass a
    crash (SideRequired).  side="plus"/"minus" computes the one-sided
    broken ray as a limit of offset smooth rays.
    """
    ang = theta if isinstance(theta, Angle) else Angle.of(theta)
    t = ang.value
    if s_min is not None:
        ctrl = replace(ctrl, s_min=s_min)
    s_min = ctrl.s_min
    hit = _snap_angle(P, t, ctrl)

    if side == "smooth":
        if hit is not None and abs(hit.snapped - t) < 1e-11:
            raise SideRequired(
                "angle is a crash angle; choose side plus or minus",
                potential=hit.critical.potential / P.degree ** hit.level)
        samples = _trace_smooth(P, t, _grid(ctrl, s_min), ctrl)
        trace = RayTrace(ang, side, samples, [], s_min)
        trace.landing = _landing(trace.samples, ctrl)
    elif side in ("plus", "minus"):
        fixed_hit = False
        if hit is not None and hit.level == 0:
            img = frac_part(P.degree * hit.candidate)
            near = _nearest_candidate(P, img)
            fixed_hit = (near is not None and near[2] == hit.candidate
                         and near[0] < _chain_radius(ctrl))
        if fixed_hit:
            # captured by a fixed crash angle: self-similar assembly with
            # the full crash cascade, accumulating at the landing
            samples, crashes, landing = _assemble_periodic_broken(
                P, hit, side, s_min, ctrl)
            trace = RayTrace(ang, side, samples, crashes, s_min, landing)
        else:
            base = hit.snapped if hit is not None else t
            samples, crashes, _eps = _trace_broken(P, base, hit, side,
                                                   s_min, ctrl)
            trace = RayTrace(ang, side, samples, crashes, s_min)
            landing = _cascade_limit(crashes, ctrl.landing_tol)
            trace.landing = landing if landing is not None \
                else _landing(trace.samples, ctrl)
    else:
        raise ValueError(f"unknown side {side!r}")
    return trace


def crash_potential(P: Polynomial, theta, s_min: Optional[float] = None,
                    ctrl: StepControl = DEFAULT_CONTROL) -> float:
    """First potential at which the ray at theta hits a critical point of
    the potential; 0.0 if it reaches the s_min floor smoothly."""
    ang = theta if isinstance(theta, Angle) else Angle.of(theta)
    if s_min is None:
        s_min = ctrl.s_min
    hit = _snap_angle(P, ang.value, replace(ctrl, s_min=s_min))
    if hit is None:
        return 0.0
    return hit.critical.potential / P.degree ** hit.level


def _side_of(trace_tail: list, target: complex) -> float:
    """Sign of the target's position relative to the last trace segment
    (positive = left of the descent direction)."""
    (s0, z0), (s1, z1) = trace_tail[-2], trace_tail[-1]
    v = z1 - z0
    w = target - z1
    return v.real * w.imag - v.imag * w.real


def crash_angles(P: Polynomial, omega: CriticalPoint,
                 resolution: float = 1e-9,
                 ctrl: StepControl = DEFAULT_CONTROL) -> list:
    """Angles of all field lines crashing into the escaping critical omega.

    Independent of the capture table: traces rays truncated just above the
    critical potential and bisects on which side of omega they pass.  The
    count is bounded by the order of the critical point.
    """
    if not omega.escaping:
        raise ValueError("crash angles are defined for escaping criticals")
    D = P.degree
    probe = replace(ctrl, angle_snap=0.0)

    found = []
    for delta_frac in (0.05,):
        s_stop = omega.potential * (1 + delta_frac)
        grid = _grid(probe, s_stop)

        def tail(th):
            return _trace_smooth(P, frac_part(th), grid, probe)

        # coarse scan: distance of the truncated ray to omega
        n_scan = 4 * D * 16
        thetas = [i / n_scan for i in range(n_scan)]
        dists = []
        for th in thetas:
            tr = tail(th)
            dists.append(abs(tr[-1][1] - omega.location))
        # local minima of the scan locate candidate crash angles
        for i, th in enumerate(thetas):
            dm, d0, dp = (dists[(i - 1) % n_scan], dists[i],
                          dists[(i + 1) % n_scan])
            if not (d0 <= dm and d0 <= dp):
                continue
            if d0 > 0.5 * abs(omega.location + 1e-9):
                continue
            lo, hi = th - 1.0 / n_scan, th + 1.0 / n_scan
            s_lo = _side_of(tail(lo), omega.location)
            s_hi = _side_of(tail(hi), omega.location)
            if s_lo * s_hi > 0:
                continue
            while hi - lo > resolution:
                mid = 0.5 * (lo + hi)
                if _side_of(tail(mid), omega.location) * s_lo > 0:
                    lo = mid
                else:
                    hi = mid
            mid = frac_part(0.5 * (lo + hi))
            # confirm the refined ray really reaches omega
            d_final = abs(tail(mid)[-1][1] - omega.location)
            if d_final < 0.2 * max(1.0, abs(omega.location)):
                found.append(Angle.approx(mid, hi - lo))
    if not found:
        raise BisectionFailed("no side change brackets a crash angle")
    found.sort(key=lambda a: a.value)
    dedup = [found[0]]
    for a in found[1:]:
        if abs(frac_part(a.value - dedup[-1].value + 0.5) - 0.5) > 10 * resolution:
            dedup.append(a)
    if len(dedup) > omega.order:
        raise BisectionFailed(
            f"found {len(dedup)} crash angles, order allows {omega.order}")
    return dedup


def landing_point(trace: RayTrace, window: int = 32,
                  tol: float = 1e-5) -> Optional[complex]:
    """Landing estimate on an existing trace.

    A long crash cascade accumulates at the landing, so its tail is
    extrapolated geometrically; smooth tails use a Cauchy window.
    """
    acc = _cascade_limit(trace.crashes, tol)
    if acc is not None:
        return acc
    ctrl = replace(DEFAULT_CONTROL, landing_window=window, landing_tol=tol)
    return _landing(trace.samples, ctrl)
