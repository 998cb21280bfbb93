"""Monic polynomials, escape-rate potential, and the coordinate at infinity.

The escape-rate potential G is computed by iterating to the escape region
and telescoping the correction terms, which converges double-exponentially
once the orbit escapes.  Its complex log-derivative (whose conjugate is the
gradient of G) is accumulated alongside through the multiplicative cocycle,
so no large intermediate derivatives ever appear.
"""

from __future__ import annotations

import cmath
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .angles import Angle, frac_part
from .errors import OutsideDomain, AngleUnresolved, RootSolverDiverged

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Polynomial:
    """A monic polynomial stored constant-first.

    ``scale`` records the linear conjugacy applied by the loader when a
    non-monic input was rescaled to monic form.
    """

    coeffs: tuple
    scale: complex = 1.0 + 0.0j

    def __post_init__(self):
        if len(self.coeffs) < 3:
            raise ValueError("degree must be at least 2")
        if abs(self.coeffs[-1] - 1.0) > 1e-12:
            raise ValueError("polynomial must be monic; use load_polynomial")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z: complex) -> complex:
        acc = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def eval_with_derivative(self, z: complex) -> tuple[complex, complex]:
        p = 0.0 + 0.0j
        dp = 0.0 + 0.0j
        for c in reversed(self.coeffs):
            dp = dp * z + p
            p = p * z + c
        return p, dp

    def derivative_coeffs(self) -> tuple:
        return tuple(k * c for k, c in enumerate(self.coeffs) if k > 0)

    def iterate(self, z: complex, n: int) -> complex:
        for _ in range(n):
            z = self(z)
        return z

    def iterate_with_derivative(self, z: complex, n: int) -> tuple[complex, complex]:
        """(P^n(z), d/dz P^n(z)) by the chain rule."""
        d = 1.0 + 0.0j
        for _ in range(n):
            p, dp = self.eval_with_derivative(z)
            d *= dp
            z = p
        return z, d

    @property
    def coefficient_bound(self) -> float:
        return sum(abs(c) for c in self.coeffs[:-1])

    @property
    def escape_radius(self) -> float:
        return max(2.0, 1.0 + self.coefficient_bound)

    @property
    def anchor_radius(self) -> float:
        """Radius beyond which P(w)/w^D stays within 1/4 of 1."""
        return max(16.0, 4.0 * (1.0 + self.coefficient_bound))

    def tail_ratio(self, w: complex) -> complex:
        """P(w)/w^D computed as a polynomial in 1/w (safe for huge w)."""
        u = 1.0 / w
        acc = 0.0 + 0.0j
        for c in self.coeffs[:-1]:
            acc = acc * u + c
        return 1.0 + acc * u

    def hash_key(self) -> str:
        payload = ",".join(f"{c.real!r}/{c.imag!r}" for c in self.coeffs)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "schema": "rayatlas/polynomial/1",
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
        }


def load_polynomial(obj) -> Polynomial:
    """Build a Polynomial from JSON data, rescaling to monic if needed.

    A non-monic input with leading coefficient ``a`` is conjugated by the
    linear map w = lam*z with lam^(D-1) = a, which preserves the dynamics;
    the factor is recorded in ``scale``.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    raw = [complex(re, im) for re, im in obj["coeffs"]]
    while raw and abs(raw[-1]) == 0.0:
        raw.pop()
    if len(raw) < 3:
        raise ValueError("degree must be at least 2")
    lead = raw[-1]
    if abs(lead - 1.0) <= 1e-12:
        return Polynomial(tuple(raw[:-1]) + (1.0 + 0.0j,))
    d = len(raw) - 1
    lam = lead ** (1.0 / (d - 1))
    conj = [c * lam ** (1 - k) for k, c in enumerate(raw)]
    conj[-1] = 1.0 + 0.0j
    return Polynomial(tuple(conj), scale=lam)


# ---------------------------------------------------------------------------
# Root finding (simultaneous iteration, no deflation)


def solve_roots(coeffs: Sequence[complex], residual: float = 1e-12,
                max_iter: int = 600) -> list[complex]:
    """All roots of a polynomial (constant-first coefficients).

    Durand-Kerner style simultaneous fixed-point iteration.  The residual
    target is relative to the coefficient scale.
    """
    cs = [complex(c) for c in coeffs]
    while cs and abs(cs[-1]) == 0.0:
        cs.pop()
    n = len(cs) - 1
    if n < 1:
        return []
    lead = cs[-1]
    cs = [c / lead for c in cs]

    def val(z):
        acc = 0j
        for c in reversed(cs):
            acc = acc * z + c
        return acc

    r = 1.0 + max(abs(c) for c in cs[:-1]) if n >= 1 else 1.0
    roots = [r * (0.4 + 0.9j) ** k for k in range(n)]
    scale = max(1.0, max(abs(c) for c in cs))
    for _ in range(max_iter):
        moved = 0.0
        for i in range(n):
            zi = roots[i]
            denom = 1.0 + 0.0j
            for j in range(n):
                if j != i:
                    denom *= zi - roots[j]
            if denom == 0:
                denom = 1e-30
            step = val(zi) / denom
            roots[i] = zi - step
            moved = max(moved, abs(step))
        if moved < residual * scale:
            break
    else:
        worst = max(abs(val(z)) for z in roots)
        if worst > 1e-6 * scale:
            raise RootSolverDiverged(f"residual {worst:.3e} after {max_iter} iters")
    return roots


def cluster_points(points: Sequence[complex], tol: float = 1e-8
                   ) -> list[tuple[complex, int]]:
    """Group near-coincident points; returns (centroid, multiplicity) pairs."""
    remaining = list(points)
    clusters = []
    while remaining:
        seed = remaining.pop()
        members = [seed]
        changed = True
        while changed:
            changed = False
            for p in list(remaining):
                if any(abs(p - m) <= tol for m in members):
                    members.append(p)
                    remaining.remove(p)
                    changed = True
        centroid = sum(members) / len(members)
        clusters.append((centroid, len(members)))
    clusters.sort(key=lambda cm: (cm[0].real, cm[0].imag))
    return clusters


# ---------------------------------------------------------------------------
# Escape-rate potential


@dataclass(frozen=True)
class GreenValue:
    """Escape-rate potential at a point.

    ``log_derivative`` is the complex number whose conjugate is the
    gradient of the potential; None when it could not be tracked (orbit
    passing exactly through zero).  ``undecided`` marks a bounded-looking
    orbit that only ran into the iteration cap.
    """

    value: float
    log_derivative: Optional[complex]
    escaped: bool
    undecided: bool
    iterations: int

    @property
    def gradient(self) -> Optional[complex]:
        return None if self.log_derivative is None else self.log_derivative.conjugate()

    @property
    def gradient_norm(self) -> float:
        return 0.0 if self.log_derivative is None else abs(self.log_derivative)


def green(P: Polynomial, z: complex, eps: float = 1e-12,
          max_iter: int = 10000, want_derivative: bool = True) -> GreenValue:
    """Potential G(z), log-derivative, and escape classification."""
    D = P.degree
    R = P.escape_radius
    w = complex(z)
    ell = None
    if want_derivative:
        ell = None if w == 0 else 1.0 / w
    n = 0
    # iterate until escape (or give up)
    while abs(w) <= R:
        if n >= max_iter:
            return GreenValue(0.0, None, False, True, n)
        p, dp = P.eval_with_derivative(w)
        if p == w:
            # exact fixed orbit point: boundedness certified, not merely
            # undecided within the iteration budget
            return GreenValue(0.0, None, False, False, n + 1)
        if want_derivative and ell is not None:
            ell = ell * dp * w / (D * p) if (p != 0 and w != 0) else None
        w = p
        n += 1
        if not (abs(w.real) < 1e300 and abs(w.imag) < 1e300):
            break
    # escaped at step n with |w| > R: telescope the corrections
    g = math.log(abs(w)) / D ** n
    scale = D ** n
    extra = 0
    while extra < 200:
        if abs(w) > 1e100:
            break
        q = P.tail_ratio(w)
        p, dp = P.eval_with_derivative(w)
        corr = math.log(abs(q)) / (scale * D)
        g += corr
        if want_derivative and ell is not None:
            ell = ell * dp * w / (D * p) if (p != 0 and w != 0) else None
        w = p
        scale *= D
        extra += 1
        if abs(corr) < eps * max(g, 1e-30) and extra >= 2:
            break
    return GreenValue(g, ell, True, False, n + extra)


def critical_potential(P: Polynomial) -> float:
    """Largest potential among critical points (0 if none escape)."""
    return max((c.potential for c in critical_points(P)), default=0.0)


@dataclass(frozen=True)
class CriticalPoint:
    location: complex
    multiplicity: int
    escaping: bool
    potential: float

    @property
    def order(self) -> int:
        """Order as a critical point of the potential: ascending and
        descending separatrix count at the point."""
        return self.multiplicity + 1


_CRIT_CACHE: dict[str, list] = {}


def critical_points(P: Polynomial, cluster_tol: float = 1e-8) -> list[CriticalPoint]:
    """Critical points of P with escape classification, cached per polynomial."""
    key = P.hash_key()
    if key in _CRIT_CACHE:
        return _CRIT_CACHE[key]
    roots = solve_roots(P.derivative_coeffs())
    out = []
    for loc, mult in cluster_points(roots, cluster_tol):
        gv = green(P, loc, want_derivative=False)
        out.append(CriticalPoint(loc, mult, gv.escaped, gv.value if gv.escaped else 0.0))
    out.sort(key=lambda c: (-c.potential, c.location.real, c.location.imag))
    _CRIT_CACHE[key] = out
    return out


def escaping_criticals(P: Polynomial) -> list[CriticalPoint]:
    return [c for c in critical_points(P) if c.escaping]


def preimages(P: Polynomial, w: complex) -> list[complex]:
    """All solutions of P(z) = w."""
    shifted = list(P.coeffs)
    shifted[0] = shifted[0] - w
    return solve_roots(shifted)


def refine_precritical(P: Polynomial, z0: complex, c: CriticalPoint,
                       level: int, newton_iters: int = 60) -> Optional[complex]:
    """Polish z0 toward the solution of P^level(z) = c.location.

    Returns None if Newton fails to converge to a nearby solution.
    """
    z = complex(z0)
    target = c.location
    for _ in range(newton_iters):
        w, dw = P.iterate_with_derivative(z, level)
        if dw == 0:
            return None
        step = (w - target) / dw
        z -= step
        if abs(step) < 1e-13 * max(1.0, abs(z)):
            return z
    return z if abs(P.iterate(z, level) - target) < 1e-9 else None


# ---------------------------------------------------------------------------
# Conformal coordinate at infinity


def _orbit_to_anchor(P: Polynomial, z: complex, max_steps: int = 20000):
    """Forward orbit until the anchor radius; raises OutsideDomain if the
    point does not escape."""
    R = P.anchor_radius
    w = complex(z)
    orbit = [w]
    for _ in range(max_steps):
        if abs(w) > R:
            return orbit
        w = P(w)
        orbit.append(w)
    raise OutsideDomain("point does not reach the escape region")


def bottcher_log(P: Polynomial, z: complex, eps: float = 1e-14) -> complex:
    """Principal-branch value of log B(z) = G(z) + 2 pi i Theta(z).

    Only reliable deep in the escape region (all orbit points beyond the
    anchor radius); used as the branch anchor for external_angle.
    """
    if abs(z) <= P.anchor_radius:
        raise OutsideDomain("bottcher_log needs |z| beyond the anchor radius")
    D = P.degree
    w = complex(z)
    acc = cmath.log(w)
    scale = D
    for _ in range(200):
        q = P.tail_ratio(w)
        term = cmath.log(q) / scale
        acc += term
        if abs(term) < eps:
            break
        if abs(w) > 1e100:
            break
        w = P(w)
        scale *= D
    return acc


def bottcher(P: Polynomial, z: complex, eps: float = 1e-12) -> complex:
    """Conformal coordinate near infinity, tangent to the identity.

    Defined where the potential exceeds the largest critical potential;
    raises OutsideDomain otherwise.
    """
    gv = green(P, z, eps=eps, want_derivative=False)
    if not gv.escaped or gv.value <= critical_potential(P) * (1.0 + 1e-9):
        raise OutsideDomain("point is not above every critical potential")
    theta = external_angle(P, z)
    return cmath.exp(complex(gv.value, _TWO_PI * theta.value))


def external_angle(P: Polynomial, z: complex, ambiguity: float = 0.35) -> Angle:
    """Angle of the field line through an escaping point z.

    Walks the orbit into the deep escape region, reads the angle there
    from the principal product, then pulls back one degree-D root at a
    time, choosing the branch nearest a locally computed estimate.  If an
    estimate falls near the midpoint between two branches the choice is
    unsafe and AngleUnresolved is raised.
    """
    D = P.degree
    orbit = _orbit_to_anchor(P, z)
    m = len(orbit) - 1
    # factor logs: log(P(w_n)/w_n^D) for each orbit point, principal branch
    fact = []
    w = orbit[-1]
    deep = [w]
    for _ in range(64):
        if abs(w) > 1e100:
            break
        w = P(w)
        deep.append(w)
    full = orbit[:-1] + deep
    flogs = [cmath.log(P.tail_ratio(u)) for u in full]
    args = [cmath.phase(u) for u in full]

    def estimate(n: int) -> float:
        total = args[n]
        scale = D
        for i in range(n, len(flogs)):
            total += flogs[i].imag / scale
            if scale > 1e18:
                break
            scale *= D
        return frac_part(total / _TWO_PI)

    theta = estimate(m)  # exact at the anchor: no factor can cross the cut
    for n in range(m - 1, -1, -1):
        est = estimate(n)
        base = frac_part((theta) / D)
        best, best_d = None, None
        for j in range(D):
            cand = frac_part(base + j / D)
            d = abs(frac_part(cand - est + 0.5) - 0.5)
            if best_d is None or d < best_d:
                best, best_d = cand, d
        if best_d > ambiguity / D:
            raise AngleUnresolved(
                f"pullback level {n}: estimate {est:.6f} is {best_d:.3e} from "
                f"the nearest branch (limit {ambiguity / D:.3e})"
            )
        theta = best
    return Angle.approx(theta, 1e-11 + 1e-9 * 0.5 ** 40)
