"""Wake-collection models that force fixed rays to co-land.

A model fixes degrees 2 <= d < D and a base index j, then hangs D - d
wakes on the consecutive fixed angles theta_{j+1}, ..., theta_{j+D-d},
where theta_i = i / (D-1) with the subscript read modulo D - 1.  Each
wake opens to the left or to the right of its angle; its far endpoint
theta' = theta -+ 1/D satisfies t -> Dt (theta') = theta exactly, so a
polynomial realizing the model has both boundary rays of the wake
crashing into one escaping critical point.  The wakes then exhaust the
angle gaps between D - d + 1 consecutive fixed angles, which forces
those angles into a single fiber of the circle semiconjugacy and their
rays to co-land at one fixed point on the component boundary.

Everything on the model side is exact rational arithmetic.  The bridge
back to a traced polynomial is verify_against_polynomial.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .angles import Angle, cyc_dist, frac_part
from .errors import InvalidChoices, RayatlasError, VerificationFailed
from .poly import Polynomial, escaping_criticals, green
from .rays import DEFAULT_CONTROL, StepControl, landing_point, trace_ray
from .equipot import (ComponentSeed, crash_pair_table, interval_ladder,
                      rational_crash_pairs)
from .semiconj import build_pi_table, fiber

SIDES = ("left", "right")


def _fr(a: Fraction) -> dict:
    return {"num": a.numerator, "den": a.denominator}


def _fixed(D: int, i: int) -> Fraction:
    return Fraction(i % (D - 1), D - 1)


@dataclass(frozen=True)
class SurgeryModel:
    """A validated wake collection.

    wakes pairs up each wake angle with its far endpoint, in the order
    of the choices.  base is the fixed-angle index opening the run of
    D - d wake-covered gaps; the predicted fiber is the D - d + 1
    consecutive fixed angles bounding that run.
    """

    D: int
    d: int
    j: int
    choices: tuple           # "left" / "right" per wake angle
    wakes: tuple             # (theta, theta') exact pairs
    predicted_fiber: tuple   # sorted fixed angles forced to co-land
    base: int

    def fixed_angle(self, i: int) -> Fraction:
        return _fixed(self.D, i)

    def wake_at(self, i: int):
        """(theta, theta', side) of the wake at fixed-angle index i."""
        m = self.D - 1
        for t, side in enumerate(self.choices, start=1):
            if (self.j + t) % m == i % m:
                return self.wakes[t - 1] + (side,)
        raise ValueError(f"no wake at fixed-angle index {i}")

    @property
    def free_arc(self) -> tuple:
        """Endpoints of the wakeless arc where the bounded component
        attaches; runs from the last fiber angle back to the first."""
        return (_fixed(self.D, self.base + self.D - self.d),
                _fixed(self.D, self.base))

    def to_json(self) -> dict:
        return {
            "schema": "rayatlas/surgery/1",
            "D": self.D,
            "d": self.d,
            "j": self.j,
            "choices": list(self.choices),
            "wakes": [[_fr(t), _fr(p)] for t, p in self.wakes],
            "predicted_fiber": [_fr(a) for a in self.predicted_fiber],
            "base": self.base,
        }


def build_model(D: int, d: int, j: int, choices) -> SurgeryModel:
    """Validate a side choice per wake angle and assemble the model.

    Two exact constraints: the closed wakes must be pairwise disjoint
    (a right wake followed by a left one at the next angle always
    collides, since 2/D exceeds the angle spacing 1/(D-1)), and the
    covered gaps must form one consecutive run, so that a single arc of
    D - d fixed-angle gaps contains every wake.
    """
    if not 2 <= d < D:
        raise InvalidChoices(f"need 2 <= d < D, got d={d}, D={D}")
    choices = tuple(choices)
    if len(choices) != D - d:
        raise InvalidChoices(
            f"need one side per wake angle: {D - d} choices, "
            f"got {len(choices)}")
    for c in choices:
        if c not in SIDES:
            raise InvalidChoices(f"side must be 'left' or 'right', got {c!r}")

    m = D - 1
    width = Fraction(1, D)
    wakes = []
    starts = []      # closure start of each wake, for the overlap scan
    covered = []     # gap index ]theta_g, theta_{g+1}[ holding each wake
    for t, side in enumerate(choices, start=1):
        theta = _fixed(D, j + t)
        if side == "left":
            prime = frac_part(theta - width)
            starts.append(prime)
            covered.append((j + t - 1) % m)
        else:
            prime = frac_part(theta + width)
            starts.append(theta)
            covered.append((j + t) % m)
        wakes.append((theta, prime))

    # closed arcs of equal width intersect iff their starts are within
    # one width of each other around the circle
    for a in range(len(wakes)):
        for b in range(a + 1, len(wakes)):
            if (starts[b] - starts[a]) % 1 <= width \
                    or (starts[a] - starts[b]) % 1 <= width:
                raise InvalidChoices(
                    "closures of the wakes at {} and {} intersect".format(
                        wakes[a][0], wakes[b][0]))

    occupied = set(covered)
    run_starts = [g for g in occupied if (g - 1) % m not in occupied]
    if len(run_starts) != 1:
        raise InvalidChoices(
            "wakes cover {} separated gap runs; no arc of {} consecutive "
            "fixed-angle gaps contains them all".format(
                len(run_starts), D - d))
    base = run_starts[0]

    fiber_angles = sorted(_fixed(D, base + t) for t in range(D - d + 1))
    return SurgeryModel(D, d, j, choices, tuple(wakes),
                        tuple(fiber_angles), base)


def load_model(obj: dict) -> SurgeryModel:
    """Model from its JSON form; only D, d, j, choices are read."""
    return build_model(int(obj["D"]), int(obj["d"]), int(obj["j"]),
                       obj["choices"])


def enumerate_choices(D: int, d: int) -> dict:
    """Every valid side pattern, with the count cross-checked.

    Valid patterns are exactly the runs of lefts followed by rights,
    one per possible split, which for d = 2 numbers D - d + 1.  The
    count is enumerated, not assumed; callers see a mismatch flag
    instead of an exception when the expectation fails.
    """
    valid = []
    for seq in product(SIDES, repeat=D - d):
        try:
            build_model(D, d, 0, seq)
        except InvalidChoices:
            continue
        valid.append(seq)
    expected = D - d + 1
    return {"patterns": valid, "count": len(valid),
            "expected": expected, "matches": len(valid) == expected}


def isolated_points(model: SurgeryModel) -> tuple:
    """Fiber members isolated in the angle set: the fiber minus the two
    angles adjacent to the wakeless arc.  Empty below cardinality 3."""
    if model.D - model.d + 1 < 3:
        return ()
    ends = set(model.free_arc)
    return tuple(a for a in model.predicted_fiber if a not in ends)


def wake_exhaustion(model: SurgeryModel, i: int, n_max: int = 50) -> list:
    """Exact angles alpha_n marching across the gap next to wake i.

    alpha_n = theta_i +- (1/D + ... + 1/D^n) with the sign of the wake's
    side, so t -> Dt maps alpha_n to alpha_{n-1} and the sequence
    converges to the neighboring fixed angle theta_{i +- 1}.  The rays
    at these angles are successively pulled into the wake, which is why
    the open gap between the two fixed angles misses the angle set.
    """
    theta, _prime, side = model.wake_at(i)
    sign = 1 if side == "right" else -1
    out = []
    alpha = theta
    term = Fraction(1, model.D)
    for _ in range(n_max):
        alpha = alpha + sign * term
        term /= model.D
        out.append(Angle.of(frac_part(alpha)))
    return out


def _crash_pair_check(model: SurgeryModel, P: Polynomial,
                      ctrl: StepControl, angle_tol: float) -> dict:
    rows = rational_crash_pairs(P, k=1, ctrl=ctrl)
    matched = []
    if rows is not None:
        have = [tuple(r["angles"]) for r in rows]
        for theta, prime in model.wakes:
            matched.append(tuple(sorted((theta, prime))) in have)
        measured = [[_fr(a) for a in r["angles"]] for r in rows]
        exact = True
    else:
        rows_f = crash_pair_table(P, ctrl)
        for theta, prime in model.wakes:
            want = sorted((float(theta), float(prime)))
            matched.append(any(
                len(r["angles"]) == 2
                and max(cyc_dist(a, w) for a, w
                        in zip(sorted(r["angles"]), want)) <= angle_tol
                for r in rows_f))
        measured = [[float(a) for a in r["angles"]] for r in rows_f]
        exact = False
    return {"ok": all(matched) and len(matched) == len(model.wakes),
            "matched": matched, "exact": exact, "measured": measured}


def _co_landing_check(model: SurgeryModel, P: Polynomial, s_min: float,
                      ctrl: StepControl, co_tol: float) -> tuple:
    # the ray away from a wake survives: minus side of a right wake,
    # plus side of a left one; wakeless fiber angles stay smooth
    sides = {}
    for (theta, _prime), side in zip(model.wakes, model.choices):
        sides[theta] = "minus" if side == "right" else "plus"
    landings = {}
    failures = {}
    for a in model.predicted_fiber:
        side = sides.get(a, "smooth")
        try:
            tr = trace_ray(P, Angle.of(a), side=side, s_min=s_min, ctrl=ctrl)
            z = tr.landing if tr.landing is not None else landing_point(tr)
        except RayatlasError as exc:
            failures[str(a)] = f"{type(exc).__name__}: {exc}"
            continue
        if z is None:
            failures[str(a)] = "no landing estimate"
        else:
            landings[a] = z
    pts = list(landings.values())
    spread = max((abs(p - q) for p in pts for q in pts), default=0.0)
    beta = sum(pts) / len(pts) if pts else None
    return {"ok": not failures and len(pts) == len(model.predicted_fiber)
            and spread <= co_tol,
            "spread": spread,
            "sides": {str(a): sides.get(a, "smooth")
                      for a in model.predicted_fiber},
            "landing": None if beta is None else [beta.real, beta.imag],
            "failures": failures}, beta


def _fiber_check(model: SurgeryModel, P: Polynomial, depth: int,
                 ctrl: StepControl) -> dict:
    try:
        ladder = interval_ladder(P, k=1, d=model.d, n_max=depth, ctrl=ctrl)
        table = build_pi_table(ladder)
    except RayatlasError as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
    predicted = list(model.predicted_fiber)
    tried = []
    for i in range(model.d - 1):
        # the fiber over a fixed value of t -> dt is the only place a
        # set of fixed angles can land
        tau = Fraction(i, model.d - 1)
        fr = fiber(table, tau)
        got = sorted(a.exact for a in fr.points if a.exact is not None)
        tried.append({"tau": _fr(tau), "resolved": fr.resolved,
                      "computed": [_fr(a) for a in got]})
        if fr.resolved and len(got) == len(fr.points) and got == predicted:
            return {"ok": True, "tau": _fr(tau),
                    "computed": [_fr(a) for a in got]}
    return {"ok": False, "predicted": [_fr(a) for a in predicted],
            "tried": tried}


def verify_against_polynomial(model: SurgeryModel, P: Polynomial,
                              seed: ComponentSeed = None, *,
                              co_tol: float = 1e-4, fix_tol: float = 1e-5,
                              angle_tol: float = 5e-3, s_min: float = 1e-12,
                              ladder_depth: int = 8,
                              ctrl: StepControl = DEFAULT_CONTROL) -> dict:
    """Check that a traced polynomial realizes the model.

    Four properties: the escaping critical points are simple and number
    D - d; each wake's angle pair is the crash pair of one of them; the
    rays at the predicted fiber co-land at a common fixed point; the
    circle semiconjugacy built from the polynomial returns exactly the
    predicted fiber.  A seed marking the bounded component is optional
    and only adds a boundedness sanity check; the main checks derive
    everything from P.

    Returns the report; raises VerificationFailed carrying the same
    report when any check fails.
    """
    if P.degree != model.D:
        raise VerificationFailed(
            f"degree mismatch: model D={model.D}, polynomial {P.degree}",
            report={"ok": False})

    checks = {}
    crits = escaping_criticals(P)
    simple = all(c.multiplicity == 1 for c in crits)
    checks["escaping_criticals"] = {
        "ok": len(crits) == model.D - model.d and simple,
        "count": len(crits), "expected": model.D - model.d,
        "all_simple": simple}

    checks["crash_pairs"] = _crash_pair_check(model, P, ctrl, angle_tol)

    checks["co_landing"], beta = _co_landing_check(
        model, P, s_min, ctrl, co_tol)
    if beta is None:
        checks["fixed_point"] = {"ok": False, "residual": None}
    else:
        residual = abs(P(beta) - beta)
        checks["fixed_point"] = {"ok": residual <= fix_tol,
                                 "residual": residual}

    checks["semiconjugacy_fiber"] = _fiber_check(model, P, ladder_depth, ctrl)

    if seed is not None:
        gv = green(P, seed.marker, want_derivative=False)
        checks["seed_bounded"] = {"ok": not gv.escaped,
                                  "potential": gv.value}

    report = {
        "schema": "rayatlas/surgery-verify/1",
        "model": model.to_json(),
        "isolated_points": [_fr(a) for a in isolated_points(model)],
        "checks": checks,
        "ok": all(c["ok"] for c in checks.values()),
    }
    if not report["ok"]:
        failing = sorted(n for n, c in checks.items() if not c["ok"])
        raise VerificationFailed(
            "model not realized; failing checks: " + ", ".join(failing),
            report=report)
    return report
