"""Circle arithmetic: angles mod 1, arc systems, piecewise affine maps.

Angles live on the circle R/Z.  Exact angles are stored as Fractions so
that repeated multiplication by an integer stays exact at any depth;
measured angles carry an error bound that propagates through arithmetic.
Arc systems represent finite unions of disjoint closed arcs, the basic
shape of the angle set of a bounded component read off an equipotential
curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .errors import AmbiguousOrder

Rational = Union[int, Fraction]


def frac_part(x):
    """Representative of x mod 1 in [0, 1).  Works for float and Fraction."""
    if isinstance(x, Fraction):
        return x - (x.numerator // x.denominator)
    return x - _floor_float(x)


def _floor_float(x: float) -> float:
    import math

    return math.floor(x)


def cyc_delta(a: float, b: float) -> float:
    """Counterclockwise distance from a to b, in [0, 1)."""
    return frac_part(float(b) - float(a))


def cyc_dist(a: float, b: float) -> float:
    """Shortest circular distance between a and b, in [0, 1/2]."""
    d = cyc_delta(a, b)
    return min(d, 1.0 - d)


def in_open_arc(x, a, b) -> bool:
    """Exact test: does x lie in the open arc from a counterclockwise to b?

    All three arguments should be Fractions (or ints).  The arc ]a, b[ is
    traversed counterclockwise; if a == b it is empty.
    """
    span = frac_part(b - a)
    if span == 0:
        return False
    return 0 < frac_part(x - a) < span


@dataclass(frozen=True)
class Angle:
    """A point of R/Z, either exact (Fraction) or measured (value + err).

    Exact angles have err == 0 and carry their Fraction in ``exact``.
    Arithmetic on exact angles stays exact; any operation that mixes in a
    measured angle produces a measured result with a propagated bound.
    """

    value: float
    err: float = 0.0
    exact: Fraction | None = None

    @staticmethod
    def rational(num: int, den: int = 1) -> "Angle":
        f = frac_part(Fraction(num, den))
        return Angle(float(f), 0.0, f)

    @staticmethod
    def of(x) -> "Angle":
        if isinstance(x, Angle):
            return x
        if isinstance(x, (int, Fraction)):
            f = frac_part(Fraction(x))
            return Angle(float(f), 0.0, f)
        return Angle(frac_part(float(x)), 0.0, None)

    @staticmethod
    def approx(value: float, err: float) -> "Angle":
        return Angle(frac_part(value), float(err), None)

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def times(self, m: int) -> "Angle":
        """Image under the angle m-fold covering t -> m t (mod 1)."""
        if self.exact is not None:
            f = frac_part(self.exact * m)
            return Angle(float(f), 0.0, f)
        return Angle(frac_part(self.value * m), self.err * abs(m), None)

    def plus(self, other) -> "Angle":
        o = Angle.of(other)
        if self.exact is not None and o.exact is not None:
            f = frac_part(self.exact + o.exact)
            return Angle(float(f), 0.0, f)
        return Angle(frac_part(self.value + o.value), self.err + o.err, None)

    def minus(self, other) -> "Angle":
        o = Angle.of(other)
        if self.exact is not None and o.exact is not None:
            f = frac_part(self.exact - o.exact)
            return Angle(float(f), 0.0, f)
        return Angle(frac_part(self.value - o.value), self.err + o.err, None)

    def dist(self, other) -> float:
        return cyc_dist(self.value, Angle.of(other).value)

    def same(self, other, tol: float = 0.0) -> bool:
        o = Angle.of(other)
        if self.exact is not None and o.exact is not None:
            return self.exact == o.exact
        return self.dist(o) <= self.err + o.err + tol

    def __lt__(self, other) -> bool:
        """Order by the representative in [0, 1), error-aware.

        Raises AmbiguousOrder when the uncertainty intervals overlap and
        the angles are not both exact.
        """
        o = Angle.of(other)
        if self.exact is not None and o.exact is not None:
            return self.exact < o.exact
        if abs(self.value - o.value) <= self.err + o.err:
            raise AmbiguousOrder(
                f"angles {self.value}+-{self.err} and {o.value}+-{o.err} overlap"
            )
        return self.value < o.value

    def to_json(self) -> dict:
        if self.exact is not None:
            return {"num": self.exact.numerator, "den": self.exact.denominator}
        return {"value": self.value, "err": self.err}

    @staticmethod
    def from_json(obj: dict) -> "Angle":
        if "num" in obj:
            return Angle.rational(int(obj["num"]), int(obj.get("den", 1)))
        return Angle.approx(float(obj["value"]), float(obj.get("err", 0.0)))

    def __repr__(self) -> str:
        if self.exact is not None:
            return f"Angle({self.exact})"
        return f"Angle({self.value:.12g}+-{self.err:.2g})"


def multiply_angle(theta, m: int):
    """theta -> m*theta mod 1, preserving exactness of the input."""
    if isinstance(theta, Angle):
        return theta.times(m)
    if isinstance(theta, (int, Fraction)):
        return frac_part(Fraction(theta) * m)
    return frac_part(float(theta) * m)


def angle_preimages(theta, m: int) -> list:
    """The m preimages of theta under t -> m t, in increasing order."""
    if isinstance(theta, Angle):
        if theta.exact is not None:
            return [Angle.of(x) for x in angle_preimages(theta.exact, m)]
        base = theta.value / m
        return [Angle.approx(base + j / m, theta.err / m) for j in range(m)]
    if isinstance(theta, (int, Fraction)):
        f = frac_part(Fraction(theta))
        return [frac_part(Fraction(f.numerator + j * f.denominator,
                                   f.denominator * m)) for j in range(m)]
    base = frac_part(float(theta)) / m
    return [frac_part(base + j / m) for j in range(m)]


def fixed_angles(m: int) -> list[Fraction]:
    """Fixed points of t -> m t on the circle: j/(m-1) for 0 <= j < m-1."""
    if m < 2:
        raise ValueError("need a degree >= 2 covering")
    return [Fraction(j, m - 1) for j in range(m - 1)]


def periodic_angles(m: int, period: int) -> list[Fraction]:
    """All angles fixed by the period-fold iterate of t -> m t."""
    return [Fraction(j, m ** period - 1) for j in range(m ** period - 1)]


# ---------------------------------------------------------------------------
# Arc systems


@dataclass(frozen=True)
class Arc:
    """Closed arc from ``start`` counterclockwise over ``length``.

    Point arcs (length 0) are allowed; length 1 is the full circle.
    Endpoint uncertainties are tracked separately for each end.
    """

    start: float
    length: float
    err_start: float = 0.0
    err_end: float = 0.0

    @property
    def end(self) -> float:
        return frac_part(self.start + self.length)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        lo = -(tol + self.err_start)
        hi = self.length + tol + self.err_end
        if self.length + 2 * tol + self.err_start + self.err_end >= 1.0:
            return True
        d = cyc_delta(self.start, x)
        if d > 0.5 + self.length / 2:
            d -= 1.0  # treat points just clockwise of start as negative
        return lo <= d <= hi


class ArcSet:
    """Disjoint closed arcs on the circle, cyclically ordered.

    The complement is a matching list of open gaps; ``gaps()`` returns them
    in the same cyclic order, gap i following arc i.
    """

    def __init__(self, arcs: Sequence[Arc]):
        if not arcs:
            raise ValueError("an arc system needs at least one arc")
        full = [a for a in arcs if a.length >= 1.0]
        if full:
            if len(arcs) != 1:
                raise ValueError("full circle must be the only arc")
            object.__setattr__(self, "_arcs", [Arc(0.0, 1.0)])
        else:
            ordered = sorted(arcs, key=lambda a: frac_part(a.start))
            for i, a in enumerate(ordered):
                b = ordered[(i + 1) % len(ordered)]
                gap = cyc_delta(frac_part(a.start + a.length), b.start)
                if len(ordered) > 1 and gap <= 0.0:
                    raise ValueError("arcs overlap or touch out of order")
            object.__setattr__(self, "_arcs", ordered)
        self._arcs: list[Arc]

    @staticmethod
    def from_pairs(pairs: Iterable[tuple], errs=None) -> "ArcSet":
        arcs = []
        pairs = list(pairs)
        for i, (a, b) in enumerate(pairs):
            a = float(a)
            b = float(b)
            length = b - a if b - a >= 0 else cyc_delta(a, b)
            if length > 1.0:
                raise ValueError("arc longer than the circle")
            ea, eb = (errs[i] if errs else (0.0, 0.0))
            arcs.append(Arc(frac_part(a), length, ea, eb))
        return ArcSet(arcs)

    @staticmethod
    def full_circle() -> "ArcSet":
        return ArcSet([Arc(0.0, 1.0)])

    @property
    def is_full(self) -> bool:
        return len(self._arcs) == 1 and self._arcs[0].length >= 1.0

    @property
    def arcs(self) -> list[Arc]:
        return list(self._arcs)

    def __len__(self) -> int:
        return len(self._arcs)

    def total_length(self) -> float:
        return min(1.0, sum(a.length for a in self._arcs))

    def max_component_length(self) -> float:
        return max(a.length for a in self._arcs)

    def gaps(self) -> list[tuple[float, float]]:
        """Open complementary arcs as (start, end) pairs, gap i after arc i."""
        if self.is_full:
            return []
        out = []
        n = len(self._arcs)
        for i, a in enumerate(self._arcs):
            b = self._arcs[(i + 1) % n]
            out.append((a.end, b.start))
        if n == 1:
            a = self._arcs[0]
            out = [(a.end, a.start)]
        return out

    def contains(self, x, tol: float = 0.0) -> bool:
        if self.is_full:
            return True
        x = float(x) if not isinstance(x, Angle) else x.value
        return any(a.contains(x, tol) for a in self._arcs)

    def classify(self, x, tol: float = 0.0):
        """Locate x relative to the system.

        Returns (status, index, margin) where status is "in" or "gap",
        index points into arcs() or gaps() respectively, and margin is the
        distance to the nearest boundary (how safely classified x is).
        """
        if self.is_full:
            return ("in", 0, 0.5)
        x = float(x) if not isinstance(x, Angle) else x.value
        for i, a in enumerate(self._arcs):
            d = cyc_delta(a.start, x)
            if d <= a.length:
                return ("in", i, min(d, a.length - d))
        for i, (g0, g1) in enumerate(self.gaps()):
            d = cyc_delta(g0, x)
            span = cyc_delta(g0, g1)
            if d < span:
                return ("gap", i, min(d, span - d))
        # numerical sliver: snap to the nearest arc endpoint
        best, bi = None, 0
        for i, a in enumerate(self._arcs):
            for p in (a.start, a.end):
                d = cyc_dist(p, x)
                if best is None or d < best:
                    best, bi = d, i
        return ("in", bi, 0.0)

    def preimage_branches(self, m: int) -> list[list[Arc]]:
        """For each arc, its m preimage arcs under t -> m t (branch order)."""
        out = []
        for a in self._arcs:
            branches = []
            for j in range(m):
                branches.append(
                    Arc(
                        frac_part((a.start + j) / m),
                        a.length / m,
                        a.err_start / m,
                        a.err_end / m,
                    )
                )
            out.append(branches)
        return out

    def overlap_length(self, start: float, length: float) -> float:
        """Length of the intersection with the arc (start, start+length)."""
        if self.is_full:
            return length
        q0 = frac_part(start)
        q1 = q0 + length
        total = 0.0
        for a in self._arcs:
            for shift in (-1.0, 0.0, 1.0):
                lo = max(a.start + shift, q0)
                hi = min(a.start + shift + a.length, q1)
                if hi > lo:
                    total += hi - lo
        return min(total, length)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"[{a.start:.6f},{frac_part(a.start + a.length):.6f}]" for a in self._arcs
        )
        return f"ArcSet({parts})"


# ---------------------------------------------------------------------------
# Piecewise affine circle maps


class PiecewiseAffineCircleMap:
    """Monotone piecewise affine degree-deg circle map, stored as a lift.

    ``xs`` are breakpoints with xs[0] == 0 and xs[-1] == 1; ``ys`` are the
    lift values at the breakpoints, with ys[-1] == ys[0] + deg.  Entries
    may be floats or Fractions (not mixed).  The map on the circle is the
    lift reduced mod 1.
    """

    def __init__(self, xs: Sequence, ys: Sequence):
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("need matching breakpoint and value lists")
        if xs[0] != 0 or xs[-1] != 1:
            raise ValueError("breakpoints must start at 0 and end at 1")
        for a, b in zip(xs, xs[1:]):
            if not b > a:
                raise ValueError("breakpoints must strictly increase")
        for a, b in zip(ys, ys[1:]):
            if b < a:
                raise ValueError("lift must be nondecreasing")
        deg = ys[-1] - ys[0]
        if isinstance(deg, Fraction):
            if deg.denominator != 1:
                raise ValueError("degree must be an integer")
            deg = int(deg)
        else:
            if abs(deg - round(deg)) > 1e-9:
                raise ValueError("degree must be an integer")
            deg = int(round(deg))
        if deg < 1:
            raise ValueError("degree must be at least 1")
        self.xs = list(xs)
        self.ys = list(ys)
        self.degree = deg

    def slopes(self) -> list:
        return [
            (y1 - y0) / (x1 - x0)
            for (x0, x1, y0, y1) in zip(self.xs, self.xs[1:], self.ys, self.ys[1:])
        ]

    def lift(self, t):
        """Value of the lift at t (any real, using the degree to unwind)."""
        k = t - frac_part(t)
        x = frac_part(t)
        ys, xs = self.ys, self.xs
        # binary search for the segment containing x
        lo, hi = 0, len(xs) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if xs[mid] <= x:
                lo = mid
            else:
                hi = mid
        x0, x1, y0, y1 = xs[lo], xs[hi], ys[lo], ys[hi]
        val = y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        return val + k * self.degree

    def __call__(self, t):
        return frac_part(self.lift(t))

    def fixed_points(self) -> list[tuple]:
        """All circle fixed points with their one-sided slopes.

        Returns a list of (t, slope_left, slope_right) with t in [0, 1).
        Plateau intervals of fixed points are reported by their endpoints.
        """
        out = []
        seen = []
        xs, ys = self.xs, self.ys
        slopes = self.slopes()
        n = len(slopes)
        for i in range(n):
            x0, x1 = xs[i], xs[i + 1]
            y0, y1 = ys[i], ys[i + 1]
            s = slopes[i]
            # solve y0 + s (t-x0) - t = j on [x0, x1]
            t_lo = y0 - x0
            t_hi = y1 - x1
            lo, hi = min(t_lo, t_hi), max(t_lo, t_hi)
            exact = isinstance(x0, Fraction) and isinstance(y0, Fraction)
            tol = 0 if exact else 1e-11
            j = _ceil_val(lo)
            while j <= hi:
                if s == 1:
                    j += 1
                    continue  # whole segment fixed only if t_lo == j; skip
                t = (j - y0 + s * x0) / (s - 1)
                if x0 - tol <= t <= x1 + tol:
                    # snap float roots onto shared breakpoints so the
                    # one-sided slopes come from the right pieces
                    at_left = t <= x0 + tol
                    at_right = t >= x1 - tol
                    tt = frac_part(x0 if at_left else (x1 if at_right else t))
                    sl = self._slope_before(i) if at_left else s
                    sr = self._slope_after(i) if at_right else s
                    if not any(abs(float(tt) - float(u)) < 1e-9 or
                               abs(abs(float(tt) - float(u)) - 1.0) < 1e-9
                               for u in seen):
                        seen.append(tt)
                        out.append((tt, sl, sr))
                j += 1
        out.sort(key=lambda r: float(r[0]))
        return out

    def _slope_before(self, i: int):
        s = self.slopes()
        return s[(i - 1) % len(s)]

    def _slope_after(self, i: int):
        s = self.slopes()
        return s[(i + 1) % len(s)]

    def semi_repelling_fixed_points(self) -> list:
        """Fixed points repelling from at least one side."""
        out = []
        for t, sl, sr in self.fixed_points():
            if float(sl) > 1.0 or float(sr) > 1.0:
                out.append(t)
        return out


def _ceil_val(x):
    if isinstance(x, Fraction):
        return -((-x.numerator) // x.denominator)
    import math

    return math.ceil(x - 1e-15)
