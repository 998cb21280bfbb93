import cmath
import json
import math

import pytest

from rayatlas.errors import OutsideDomain, RootSolverDiverged
from rayatlas.poly import (Polynomial, bottcher, bottcher_log, cluster_points,
                           critical_points, critical_potential,
                           escaping_criticals, external_angle, green,
                           load_polynomial, preimages, refine_precritical,
                           solve_roots)

# independently derived reference data for the two figure polynomials
CUBIC_OMEGA = -0.21086000000000002 + 1.28348j          # -2a/3
CUBIC_S1 = 0.018520167104355376
CUBIC_BETA = 0.2992166578334199 + 0.6297619008148998j  # root of P(z)=z
QUARTIC_OMEGA_UP = 0.6181725 + 0.8337146425844348j     # (-3a+sqrt(9a^2-32c))/8
QUARTIC_S1 = 0.040449381618421328
QUARTIC_BETA = 0.666715354342863


class TestConstruction:
    def test_monic_normalization_records_scale(self):
        # 2z^2 + 4z: conjugating to monic form divides out the lead
        P = load_polynomial({"coeffs": [[0, 0], [4, 0], [2, 0]]})
        assert P.degree == 2
        assert P.coeffs[-1] == 1.0
        assert P.scale != 1.0

    def test_load_from_json_text(self, tmp_path):
        f = tmp_path / "p.json"
        f.write_text(json.dumps(
            {"coeffs": [[0, 0], [0, 0], [0.31629, -1.92522], [1, 0]]}))
        P = load_polynomial(json.loads(f.read_text()))
        assert P.degree == 3
        assert P(1.0) == pytest.approx(1.0 + 0.31629 - 1.92522j)

    def test_nonmonic_rejects_degree_zero(self):
        with pytest.raises(ValueError):
            Polynomial((1.0,))

    def test_escape_radius_bound(self, cubic):
        R = cubic.escape_radius
        assert R >= 2.0
        assert R >= 1.0  # definitely safe: |z|>R implies strict growth
        z = R * 1.01
        assert abs(cubic(z)) > abs(z)


class TestRoots:
    def test_solve_quartic_exact_roots(self):
        # (z-1)(z+1)(z-2i)(z+2i) = z^4 -z^2 +4z^2 ... build directly
        roots = [1.0, -1.0, 2j, -2j]
        coeffs = [1.0]
        for r in roots:
            coeffs = ([0.0] + coeffs[:])  # multiply by z
            for i in range(len(coeffs) - 1):
                coeffs[i] -= r * ([0.0] + coeffs[1:] + [0.0])[i + 1] * 0
            # simpler: polynomial multiply (z - r)
        # direct expansion instead
        def expand(rs):
            cs = [1.0 + 0j]
            for r in rs:
                cs = [0j] + cs
                cs = [c - r * cs[i + 1] if i + 1 < len(cs) else c
                      for i, c in enumerate(cs[:-1])] + [cs[-1]]
            return cs
        cs = expand(roots)
        found = solve_roots(cs)
        for r in roots:
            assert min(abs(r - f) for f in found) < 1e-10

    def test_residual_quality(self, cubic):
        # critical points of the cubic: derivative roots
        dcs = cubic.derivative_coeffs()
        for r in solve_roots(dcs):
            v = sum(c * r ** k for k, c in enumerate(dcs))
            assert abs(v) < 1e-10

    def test_cluster_points_merges_multiplicity(self):
        pts = [0.5, 0.5 + 1e-12, 2.0]
        cl = cluster_points(pts, tol=1e-8)
        assert sorted(m for _z, m in cl) == [1, 2]


class TestGreen:
    def test_functional_equation(self, cubic):
        for z in (3.0 + 0.2j, -1.5 + 2.2j, 0.9 - 2.0j):
            g1 = green(cubic, z).value
            g2 = green(cubic, cubic(z)).value
            if g1 > 0:
                assert g2 == pytest.approx(3 * g1, rel=1e-9)

    def test_asymptotic_log_modulus(self, quartic):
        R = 10.0 * (1.0 + quartic.coefficient_bound)
        for k in range(8):
            z = (R * 1.5) * cmath.exp(2j * math.pi * k / 8)
            g = green(quartic, z).value
            assert abs(g - math.log(abs(z))) < 0.1

    def test_interior_point_zero(self, cubic):
        gv = green(cubic, 0.0)
        assert not gv.escaped
        assert gv.value == 0.0
        assert not gv.undecided

    def test_gradient_matches_finite_difference(self, cubic):
        z = 1.7 - 1.1j
        gv = green(cubic, z)
        h = 1e-7
        gx = (green(cubic, z + h).value - green(cubic, z - h).value) / (2 * h)
        gy = (green(cubic, z + 1j * h).value - green(cubic, z - 1j * h).value) / (2 * h)
        assert gv.gradient.real == pytest.approx(gx, abs=1e-5)
        assert gv.gradient.imag == pytest.approx(gy, abs=1e-5)

    def test_zsq_closed_form(self, zsq):
        for z in (1.5 + 0.5j, -2.0 + 0.1j, 0.3 + 1.4j):
            assert green(zsq, z).value == pytest.approx(
                math.log(abs(z)), abs=1e-12)


class TestCriticals:
    def test_cubic_critical_set(self, cubic):
        crits = critical_points(cubic)
        assert len(crits) == 2
        esc = [c for c in crits if c.escaping]
        assert len(esc) == 1
        assert esc[0].location == pytest.approx(CUBIC_OMEGA)
        assert esc[0].potential == pytest.approx(CUBIC_S1, rel=1e-12)
        assert esc[0].order == 2
        bounded = [c for c in crits if not c.escaping]
        assert abs(bounded[0].location) < 1e-12

    def test_quartic_conjugate_pair(self, quartic):
        esc = escaping_criticals(quartic)
        assert len(esc) == 2
        a, b = sorted(esc, key=lambda c: c.location.imag)
        assert a.location == pytest.approx(b.location.conjugate())
        assert a.potential == pytest.approx(QUARTIC_S1, rel=1e-12)
        assert b.location == pytest.approx(QUARTIC_OMEGA_UP)

    def test_critical_potential_is_max(self, quartic):
        assert critical_potential(quartic) == pytest.approx(QUARTIC_S1)

    def test_naive_escape_rate_oracle(self, cubic):
        # log|P^n(omega)| / D^n stabilizes to the same potential
        z = CUBIC_OMEGA
        n = 0
        while abs(z) < 1e90:
            z = cubic(z)
            n += 1
        assert math.log(abs(z)) / 3 ** n == pytest.approx(CUBIC_S1, rel=1e-10)


class TestBottcher:
    def test_modulus_equals_exp_green(self, cubic):
        for z in (3.0 + 1.0j, -2.5 - 2.0j, 5.0):
            gv = green(cubic, z).value
            assert abs(bottcher(cubic, z)) == pytest.approx(
                math.exp(gv), rel=1e-6)

    def test_conjugacy_relation(self, quartic):
        smax = critical_potential(quartic)
        z = 4.0 + 1.0j
        assert green(quartic, z).value > 2 * smax
        lhs = bottcher(quartic, quartic(z))
        rhs = bottcher(quartic, z) ** 4
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_tangent_to_identity(self, cubic):
        z = 1e6 * cmath.exp(0.7j)
        assert bottcher(cubic, z) / z == pytest.approx(1.0, abs=1e-4)

    def test_outside_domain_raises(self, cubic):
        with pytest.raises(OutsideDomain):
            bottcher(cubic, 0.05 + 0.05j)

    def test_zsq_identity(self, zsq):
        z = 2.2 + 1.3j
        assert bottcher(zsq, z) == pytest.approx(z, rel=1e-9)


class TestExternalAngle:
    def test_zsq_reads_argument(self, zsq):
        for k in range(7):
            z = 3.0 * cmath.exp(2j * math.pi * (k / 7.0))
            th = external_angle(zsq, z)
            assert th.value == pytest.approx(k / 7.0, abs=1e-12)

    def test_pushforward_multiplies_angle(self, cubic):
        z = 1.2 + 1.9j
        assert green(cubic, z).escaped
        t0 = external_angle(cubic, z).value
        t1 = external_angle(cubic, cubic(z)).value
        assert (3 * t0 - t1) % 1.0 == pytest.approx(0.0, abs=1e-9) or \
               (3 * t0 - t1) % 1.0 == pytest.approx(1.0, abs=1e-9)

    def test_angle_error_is_small(self, quartic):
        th = external_angle(quartic, 2.0 + 2.0j)
        assert th.err < 1e-8


class TestPreimages:
    def test_preimages_are_roots(self, cubic):
        w = 1.0 + 1.0j
        pre = preimages(cubic, w)
        assert len(pre) == 3
        for z in pre:
            assert cubic(z) == pytest.approx(w, abs=1e-9)

    def test_refine_precritical(self, cubic):
        c = [x for x in critical_points(cubic) if x.escaping][0]
        rough = [z for z in preimages(cubic, c.location)
                 if abs(cubic(z) - c.location) < 1e-8]
        z = refine_precritical(cubic, rough[0] + 1e-6, c, level=1)
        assert cubic(z) == pytest.approx(c.location, abs=1e-11)
