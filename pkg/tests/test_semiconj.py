"""Semiconjugacy construction: marked levels, fibers, gap dynamics."""

import math
import random
from fractions import Fraction

import pytest

from rayatlas.angles import Arc, ArcSet, frac_part
from rayatlas.equipot import IntervalSystem, interval_ladder
from rayatlas.errors import (FixedAngleNotInI, LevelConstructionFailed,
                             OutsideI)
from rayatlas.poly import Polynomial
from rayatlas.semiconj import (box_dimension_estimate, build_pi_table,
                               classify_gaps, evaluate_pi, fiber,
                               semiconjugacy_summary, taut_multiplicity_sum,
                               uniqueness_check)

F = Fraction


@pytest.fixture(scope="module")
def cubic_ladder(cubic):
    return interval_ladder(cubic, n_max=10)


@pytest.fixture(scope="module")
def quartic_ladder(quartic):
    return interval_ladder(quartic, n_max=10)


@pytest.fixture(scope="module")
def cubic_table(cubic_ladder):
    return build_pi_table(cubic_ladder)


@pytest.fixture(scope="module")
def quartic_table(quartic_ladder):
    return build_pi_table(quartic_ladder)


class TestTable:
    def test_base_point_is_zero(self, cubic_table, quartic_table):
        assert cubic_table.theta0 == 0
        assert quartic_table.theta0 == 0

    def test_level_cardinalities(self, cubic_table, quartic_table):
        for tab in (cubic_table, quartic_table):
            for n, lv in enumerate(tab.levels):
                assert len(lv.elements) == tab.d ** n

    def test_order_preserving_onto_grid(self, cubic_table):
        lv = cubic_table.levels[6]
        pis = [p for _a, p in lv.elements]
        assert pis == [F(i, 64) for i in range(64)]
        positions = [(a - cubic_table.theta0) % 1 for a, _p in lv.elements]
        assert positions == sorted(positions)

    def test_functional_equation_exact(self, cubic_table, quartic_table):
        for tab in (cubic_table, quartic_table):
            m = tab.D ** tab.k
            below = dict(tab.levels[-2].elements)
            for a, p in tab.levels[-1].elements:
                assert below[(a * m) % 1] == (tab.d * p) % 1

    def test_levels_nested(self, cubic_table):
        for shallow, deep in zip(cubic_table.levels, cubic_table.levels[1:]):
            sa = {a for a, _p in shallow.elements}
            da = {a for a, _p in deep.elements}
            assert sa <= da

    def test_connected_case_is_identity(self, zsq):
        lad = interval_ladder(zsq, s0=0.5, n_max=6)
        tab = build_pi_table(lad)
        for n, lv in enumerate(tab.levels):
            assert lv.elements == [(F(i, 2 ** n), F(i, 2 ** n))
                                   for i in range(2 ** n)]

    def test_depth_beyond_ladder_rejected(self, cubic_ladder):
        with pytest.raises(LevelConstructionFailed):
            build_pi_table(cubic_ladder, depth=len(cubic_ladder))

    def test_no_surviving_fixed_angle(self):
        arcs = ArcSet([Arc(0.1, 0.1)])
        sys = IntervalSystem(s=0.1, arcs=arcs, gaps=[], k=1, d=2, D=3,
                             exact=[(F(1, 10), F(1, 10))])
        with pytest.raises(FixedAngleNotInI):
            build_pi_table([sys, sys, sys])

    def test_json_shape(self, cubic_table):
        doc = cubic_table.to_json()
        assert doc["schema"] == "rayatlas/pitable/1"
        assert doc["theta0"] == {"num": 0, "den": 1}
        assert len(doc["levels"]) == cubic_table.depth + 1
        first = doc["levels"][1]["elements"][0]
        assert set(first[0]) == {"num", "den"}


class TestEvaluate:
    def test_exact_on_marked_angles(self, cubic_table):
        assert evaluate_pi(cubic_table, F(2, 3)).exact == F(1, 2)
        assert evaluate_pi(cubic_table, F(5, 9)).exact == F(1, 4)

    def test_bracket_error_bound(self, cubic_table):
        v = evaluate_pi(cubic_table, 0.55)
        assert v.err <= 0.5 / 2 ** 10 + 1e-15

    def test_constant_across_major_gap(self, cubic_table):
        v = evaluate_pi(cubic_table, 0.3)
        assert min(v.value, 1 - v.value) <= 2.0 / 2 ** 10

    def test_strict_refuses_gap_interior(self, cubic_table):
        with pytest.raises(OutsideI):
            evaluate_pi(cubic_table, 0.3, strict=True)
        assert evaluate_pi(cubic_table, F(2, 3), strict=True).exact == F(1, 2)

    def test_intertwines_multiplication(self, cubic_table, cubic_ladder):
        rng = random.Random(11)
        pairs = cubic_ladder[10].exact
        tol = 2.0 / 2 ** 10
        for _ in range(40):
            a, ln = pairs[rng.randrange(len(pairs))]
            t = float(a) + rng.random() * float(ln)
            lhs = evaluate_pi(cubic_table, frac_part(3 * t)).value
            rhs = frac_part(2 * evaluate_pi(cubic_table, t).value)
            diff = abs(lhs - rhs) % 1.0
            assert min(diff, 1 - diff) <= tol


class TestFiber:
    def test_base_fiber_cubic(self, cubic_table):
        f = fiber(cubic_table, 0)
        assert [p.exact for p in f.points] == [F(0), F(1, 2)]
        assert f.split and f.resolved

    def test_base_fiber_quartic(self, quartic_table):
        f = fiber(quartic_table, 0)
        assert [p.exact for p in f.points] == [F(0), F(1, 3), F(2, 3)]
        assert f.split and f.resolved

    def test_gap_chain_fibers(self, cubic_table):
        assert [p.exact for p in fiber(cubic_table, F(1, 2)).points] == \
            [F(2, 3), F(5, 6)]
        assert [p.exact for p in fiber(cubic_table, F(1, 4)).points] == \
            [F(5, 9), F(11, 18)]

    def test_widest_fiber_quartic(self, quartic_table):
        f = fiber(quartic_table, F(1, 2))
        assert [p.exact for p in f.points] == [F(5, 12), F(1, 2), F(7, 12)]

    def test_periodic_tau_gives_periodic_angle(self, cubic_table):
        f = fiber(cubic_table, F(1, 3))
        assert [p.exact for p in f.points] == [F(5, 8)]
        # 5/8 has period two under tripling, matching the period of 1/3
        # under doubling
        assert (F(5, 8) * 9) % 1 == F(5, 8)

    def test_equivariance_under_return_map(self, cubic_table, quartic_table):
        for tab in (cubic_table, quartic_table):
            m = tab.D ** tab.k
            for num in range(tab.d ** 3):
                tau = F(num, tab.d ** 3)
                src = fiber(tab, tau)
                dst = fiber(tab, (tau * tab.d) % 1)
                assert src.resolved and dst.resolved
                img = {(p.exact * m) % 1 for p in src.points}
                assert img <= {p.exact for p in dst.points}

    def test_cardinality_bound(self, cubic_table, quartic_table):
        for tab in (cubic_table, quartic_table):
            cap = tab.D ** tab.k - tab.d + 1
            for num in range(tab.d ** 5):
                f = fiber(tab, F(num, tab.d ** 5))
                assert f.resolved
                assert 1 <= len(f.points) <= cap

    def test_points_lie_in_interval_system(self, cubic_table):
        from rayatlas.semiconj import _ArcIndex
        deep = _ArcIndex(cubic_table.systems[-1])
        for num in range(16):
            for p in fiber(cubic_table, F(num, 16)).points:
                assert p.exact in deep

    def test_connected_case_fibers_are_points(self, zsq):
        tab = build_pi_table(interval_ladder(zsq, s0=0.5, n_max=6))
        for num in range(8):
            f = fiber(tab, F(num, 8))
            assert [p.exact for p in f.points] == [F(num, 8)]
            assert not f.split

    def test_float_input(self, cubic_table):
        f = fiber(cubic_table, 0.25)
        assert [p.exact for p in f.points] == [F(5, 9), F(11, 18)]


class TestGaps:
    def test_record_totals(self, cubic_ladder, quartic_ladder):
        recs = classify_gaps(cubic_ladder)
        assert len(recs) == 2 ** 11 - 1
        recs4 = classify_gaps(quartic_ladder)
        assert len(recs4) == 2 * (2 ** 11 - 1)

    def test_taut_gaps_are_the_top_wakes(self, cubic_ladder, quartic_ladder):
        taut = [r for r in classify_gaps(cubic_ladder) if r.taut]
        assert len(taut) == 1
        assert taut[0].level == 0 and taut[0].multiplicity == 1
        assert taut[0].length == F(1, 3)
        taut4 = [r for r in classify_gaps(quartic_ladder) if r.taut]
        assert len(taut4) == 2
        assert all(r.level == 0 and r.multiplicity == 1 for r in taut4)

    def test_departing_multiplicity_sum(self, cubic_ladder, quartic_ladder,
                                        zsq):
        assert taut_multiplicity_sum(cubic_ladder) == 1
        assert taut_multiplicity_sum(quartic_ladder) == 2
        assert taut_multiplicity_sum(interval_ladder(zsq, s0=0.5,
                                                     n_max=4)) == 0

    def test_every_minor_gap_reaches_a_taut_gap(self, cubic_ladder):
        for r in classify_gaps(cubic_ladder):
            if not r.taut:
                assert r.orbit_class == "to_taut"
                assert r.steps == r.level

    def test_no_unresolved(self, quartic_ladder):
        assert all(r.orbit_class != "unresolved"
                   for r in classify_gaps(quartic_ladder))


class TestDimension:
    def test_cubic_matches_scaling_exponent(self, cubic_ladder):
        dim = box_dimension_estimate(cubic_ladder)
        assert abs(dim - math.log(2) / math.log(3)) < 1e-9

    def test_quartic_matches_scaling_exponent(self, quartic_ladder):
        dim = box_dimension_estimate(quartic_ladder)
        assert abs(dim - 0.5) < 1e-9

    def test_within_theoretical_bound(self, cubic_ladder, quartic_ladder):
        for lad in (cubic_ladder, quartic_ladder):
            base = lad[0]
            bound = math.log(base.d) / (base.k * math.log(base.D))
            assert box_dimension_estimate(lad) <= bound + 0.05


class TestUniqueness:
    def test_degree_two_forces_trivial_offset(self, cubic_table,
                                              quartic_table):
        assert uniqueness_check(cubic_table) == [F(0)]
        assert uniqueness_check(quartic_table) == [F(0)]

    def test_degree_three_has_half_turn(self):
        cube = Polynomial((0.0, 0.0, 0.0, 1.0))
        tab = build_pi_table(interval_ladder(cube, s0=0.5, n_max=5))
        assert uniqueness_check(tab) == [F(0), F(1, 2)]


class TestSummary:
    def test_fields_and_bounds(self, cubic_table):
        doc = semiconjugacy_summary(cubic_table)
        assert doc["schema"] == "rayatlas/semiconj/1"
        assert doc["taut_multiplicity_sum"] == 1
        assert doc["max_fiber_cardinality"] <= 2
        assert doc["uniqueness_offsets"] == [{"num": 0, "den": 1}]
        assert doc["gap_classes"]["unresolved"] == 0
        assert abs(doc["box_dimension"] - math.log(2) / math.log(3)) < 1e-9

    def test_deterministic(self, quartic_table):
        assert semiconjugacy_summary(quartic_table) == \
            semiconjugacy_summary(quartic_table)
