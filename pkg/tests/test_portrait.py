"""Portrait combinatorics on exact rational angle data."""

from fractions import Fraction

import pytest

from rayatlas.errors import InconsistentPortrait
from rayatlas.portrait import (CriticalMarker, attachments, audit_counts,
                               build_portrait, ghost_sector_cycles,
                               load_criticals, load_essential, load_portrait,
                               sectors_of)

F = Fraction

PERIOD3_LAMS = [[F(2, 26), F(10, 26), F(19, 26)],
                [F(4, 26), F(5, 26), F(6, 26)],
                [F(12, 26), F(15, 26), F(18, 26)]]
PERIOD3_SIDES = [["smooth", "smooth", "plus"],
                 ["smooth", "plus", "smooth"],
                 ["smooth", "plus", "smooth"]]
PERIOD3_ESSENTIAL = [(0, F(19, 26)), (1, F(5, 26)), (2, F(15, 26))]


@pytest.fixture(scope="module")
def period3():
    return build_portrait(3, 3, PERIOD3_LAMS, PERIOD3_SIDES)


@pytest.fixture(scope="module")
def period3_sectors(period3):
    return sectors_of(period3, essential=PERIOD3_ESSENTIAL)


@pytest.fixture(scope="module")
def fixed_pair():
    # degree 3, a fixed point carrying two fixed rays
    return build_portrait(3, 1, [[F(0), F(1, 2)]])


class TestBuild:
    def test_period3_accepted(self, period3):
        assert period3.orbit_length == 3
        assert period3.rotation == 0
        assert period3.ray_period == 1

    def test_fixed_pair_accepted(self, fixed_pair):
        assert fixed_pair.rotation == 0
        assert fixed_pair.ray_period == 1

    def test_degree4_triple(self):
        pt = build_portrait(4, 1, [[F(0), F(1, 3), F(2, 3)]])
        assert pt.rotation == 0
        assert len(pt.lambda_sets[0]) == 3

    def test_rejects_broken_bijection(self):
        with pytest.raises(InconsistentPortrait):
            build_portrait(3, 3, [[F(2, 26)], [F(7, 26)], [F(12, 26)]])

    def test_rejects_linked_chords(self):
        with pytest.raises(InconsistentPortrait, match="linked"):
            build_portrait(4, 2, [[F(1, 5), F(3, 5)], [F(2, 5), F(4, 5)]])

    def test_rejects_non_rotation(self):
        with pytest.raises(InconsistentPortrait):
            build_portrait(3, 1, [[F(0), F(1, 8), F(3, 8)]])

    def test_rejects_float_angles(self):
        with pytest.raises(ValueError, match="rational"):
            build_portrait(3, 1, [[0.5, F(0)]])

    def test_rejects_orbit_not_multiple_of_period(self):
        with pytest.raises(InconsistentPortrait, match="multiple"):
            build_portrait(3, 2, PERIOD3_LAMS)

    def test_nontrivial_rotation(self):
        # doubling on 1/3 <-> 2/3 swaps the pair: rotation one half
        pt = build_portrait(2, 1, [[F(1, 3), F(2, 3)]])
        assert pt.rotation == F(1, 2)
        assert pt.ray_period == 2


class TestSectors:
    def test_count_and_lengths(self, period3_sectors):
        assert len(period3_sectors.sectors) == 9
        lengths = sorted(s.length for s in period3_sectors.sectors)
        assert lengths == sorted([F(8, 26), F(9, 26), F(9, 26),
                                  F(1, 26), F(1, 26), F(24, 26),
                                  F(3, 26), F(3, 26), F(20, 26)])

    def test_weights_sum_to_degree_minus_one(self, period3_sectors):
        per_base = {}
        for s in period3_sectors.sectors:
            per_base[s.base_index] = per_base.get(s.base_index, 0) + s.weight
        assert per_base == {0: 2, 1: 2, 2: 2}

    def test_stretch_identity(self, period3_sectors):
        an = period3_sectors
        for s in an.sectors:
            img = an.sector(an.sigma[s.key])
            assert img.length == 3 * s.length - s.weight

    def test_kinds(self, period3_sectors):
        ess = {s.key for s in period3_sectors.sectors
               if s.kind == "essential"}
        assert ess == {(0, F(19, 26)), (1, F(5, 26)), (2, F(15, 26))}
        assert sum(1 for s in period3_sectors.sectors
                   if s.kind == "ghost") == 6

    def test_minimal_sectors(self, period3_sectors):
        mins = {s.key for s in period3_sectors.sectors if s.minimal}
        assert mins == {(1, F(4, 26)), (2, F(12, 26))}

    def test_cycle_structure(self, period3_sectors):
        profiles = sorted(
            tuple(sorted(period3_sectors.sector(k).length for k in cyc))
            for cyc in period3_sectors.cycles)
        assert profiles == [
            (F(1, 26), F(3, 26), F(9, 26)),
            (F(1, 26), F(3, 26), F(9, 26)),
            (F(8, 26), F(20, 26), F(24, 26))]

    def test_ghost_cycle_count(self, period3_sectors):
        assert len(ghost_sector_cycles(period3_sectors)) == 2

    def test_fixed_pair_sectors(self, fixed_pair):
        an = sectors_of(fixed_pair)
        assert [s.length for s in an.sectors] == [F(1, 2), F(1, 2)]
        assert [s.weight for s in an.sectors] == [1, 1]
        assert len(an.cycles) == 2

    def test_degree4_triple_sectors(self):
        an = sectors_of(build_portrait(4, 1, [[F(0), F(1, 3), F(2, 3)]]))
        assert [s.weight for s in an.sectors] == [1, 1, 1]
        assert all(len(c) == 1 for c in an.cycles)

    def test_essential_annotation_must_be_closed(self, period3):
        bad = [(0, F(2, 26)), (1, F(5, 26)), (2, F(15, 26))]
        with pytest.raises(InconsistentPortrait, match="preserve"):
            sectors_of(period3, essential=bad)

    def test_essential_annotation_one_per_point(self, period3):
        bad = [(0, F(19, 26)), (0, F(2, 26)), (1, F(5, 26))]
        with pytest.raises(InconsistentPortrait, match="one essential"):
            sectors_of(period3, essential=bad)

    def test_unannotated_kinds_are_open(self, period3):
        an = sectors_of(period3)
        assert all(s.kind is None for s in an.sectors)
        assert not any(s.minimal for s in an.sectors)


class TestAttachment:
    def test_point_attached_by_plus_rule(self, period3, period3_sectors):
        rep = attachments(period3, period3_sectors,
                          [CriticalMarker(rays=(F(19, 26),), label="w")])
        assert rep.point_attached["w"] == [(0, F(10, 26))]
        assert rep.value_attached["w"] == [(1, F(4, 26))]
        assert rep.n1 == 1
        assert rep.ambiguous == []

    def test_value_lands_in_minimal_ghost(self, period3, period3_sectors):
        rep = attachments(period3, period3_sectors,
                          [CriticalMarker(rays=(F(19, 26),))])
        key = rep.value_attached["critical-0"][0]
        assert period3_sectors.sector(key).minimal

    def test_minus_rule_attaches_forward_sector(self, period3,
                                                period3_sectors):
        flipped = build_portrait(3, 3, PERIOD3_LAMS,
                                 [["smooth", "smooth", "minus"],
                                  ["smooth", "minus", "smooth"],
                                  ["smooth", "minus", "smooth"]])
        an = sectors_of(flipped, essential=PERIOD3_ESSENTIAL)
        rep = attachments(flipped, an,
                          [CriticalMarker(rays=(F(19, 26),))])
        assert rep.point_attached["critical-0"] == [(0, F(19, 26))]

    def test_smooth_ray_marker_is_flagged(self, period3, period3_sectors):
        rep = attachments(period3, period3_sectors,
                          [CriticalMarker(rays=(F(2, 26),))])
        assert rep.point_attached["critical-0"] == []
        assert rep.ambiguous

    def test_interior_annotation(self, period3, period3_sectors):
        cm = CriticalMarker(interior=(0, F(2, 26)))
        rep = attachments(period3, period3_sectors, [cm])
        assert rep.point_attached["critical-0"] == [(0, F(2, 26))]
        assert rep.value_attached["critical-0"] == [(1, F(6, 26))]
        assert rep.n1 == 0


class TestAudit:
    def test_worked_example_passes(self, period3, period3_sectors):
        rep = audit_counts(period3, period3_sectors, n1=1, n2=0, d=2)
        assert rep["ok"]
        assert rep["escaping_budget"] == {
            "lhs": 1, "rhs": 1, "ok": True,
            "note": "critical values attached or loose vs degree drop"}
        assert rep["ghost_cycles"]["lhs"] == 2
        assert not rep["ghost_cycles"]["strict"]

    def test_undercounted_attachments_fail(self, period3, period3_sectors):
        rep = audit_counts(period3, period3_sectors, n1=0, n2=0, d=2)
        assert not rep["ghost_cycles"]["ok"]
        assert not rep["ok"]

    def test_strict_bound_at_period_one(self, fixed_pair):
        an = sectors_of(fixed_pair, essential=[(0, F(0))])
        rep = audit_counts(fixed_pair, an, n1=1, n2=0, d=2,
                           fiber_card=2)
        assert rep["ghost_cycles"]["strict"]
        assert rep["ghost_cycles"]["ok"]          # 1 < 2
        assert rep["fiber_cardinality"]["ok"]     # 2 <= 3
        assert rep["ok"]

    def test_budget_overflow_rejected(self, fixed_pair):
        an = sectors_of(fixed_pair)
        rep = audit_counts(fixed_pair, an, n1=2, n2=0, d=2)
        assert not rep["escaping_budget"]["ok"]

    def test_shortest_sector_fed(self, period3_sectors):
        rep = audit_counts(
            build_portrait(3, 3, PERIOD3_LAMS, PERIOD3_SIDES),
            period3_sectors, n1=1, n2=0, d=2)
        feeds = rep["shortest_sector_fed"]
        assert feeds["ok"]
        assert sorted(c["feeding_weight"] for c in feeds["cycles"]) == \
            [1, 1, 2]


class TestJson:
    def test_round_trip(self, period3):
        doc = period3.to_json()
        again = load_portrait(doc)
        assert again.lambda_sets == period3.lambda_sets
        assert again.turn_sides == period3.turn_sides
        assert again.rotation == period3.rotation

    def test_annotation_loaders(self):
        doc = {
            "D": 3, "k": 3,
            "lambda_sets": [[{"num": a.numerator, "den": a.denominator}
                             for a in lam] for lam in
                            [sorted(map(F, map(str, ("2/26", "10/26",
                                                     "19/26")))),
                             sorted(map(F, map(str, ("4/26", "5/26",
                                                     "6/26")))),
                             sorted(map(F, map(str, ("12/26", "15/26",
                                                     "18/26"))))]],
            "turn_sides": PERIOD3_SIDES,
            "essential": [[0, {"num": 19, "den": 26}],
                          [1, {"num": 5, "den": 26}],
                          [2, {"num": 15, "den": 26}]],
            "criticals": [{"rays": [{"num": 19, "den": 26}],
                           "label": "w"}],
        }
        pt = load_portrait(doc)
        ess = load_essential(doc)
        crit = load_criticals(doc)
        an = sectors_of(pt, essential=ess)
        rep = attachments(pt, an, crit)
        assert rep.n1 == 1
