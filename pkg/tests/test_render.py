from fractions import Fraction

import numpy as np
import pytest

from rayatlas.angles import Angle
from rayatlas.equipot import ComponentSeed
from rayatlas.render import (BROKEN_COLOR, INTERIOR, MARKER_COLOR, RAY_COLOR,
                             Frame, draw_marker, draw_polyline, read_ppm,
                             render_escape, render_figure, write_ppm)

BETA = 0.2992166578334199 + 0.6297619008148998j
OMEGA1 = -0.21086 + 1.28348j


class TestFrame:
    def test_center_maps_to_middle(self):
        # pixel-center convention: the frame center falls between the
        # two middle pixels
        fr = Frame(0.25 + 0.55j, 3.0, 200, 100)
        col, row = fr.to_pixel(0.25 + 0.55j)
        assert col == pytest.approx(99.5)
        assert row == pytest.approx(49.5)

    def test_height_follows_aspect(self):
        fr = Frame(0j, 4.0, 200, 100)
        assert fr.height == pytest.approx(2.0)

    def test_rows_grow_downward(self):
        fr = Frame(0j, 4.0, 100, 100)
        _, row_hi = fr.to_pixel(1j)
        _, row_lo = fr.to_pixel(-1j)
        assert row_hi < row_lo

    def test_grid_matches_to_pixel(self):
        fr = Frame(0.5 - 0.25j, 2.0, 8, 6)
        Z = fr.grid()
        assert Z.shape == (6, 8)
        col, row = fr.to_pixel(Z[2, 5])
        assert col == pytest.approx(5.0)
        assert row == pytest.approx(2.0)


class TestEscape:
    def test_interior_and_exterior_shades(self, zsq):
        fr = Frame(0j, 4.0, 64, 64)
        img = render_escape(zsq, fr, max_iter=60)
        assert img.shape == (64, 64, 3)
        assert img.dtype == np.uint8
        col, row = fr.to_pixel(0j)
        assert tuple(img[int(row), int(col)]) == INTERIOR
        col, row = fr.to_pixel(1.9 + 0j)
        assert tuple(img[int(row), int(col)]) != INTERIOR

    def test_deterministic(self, cubic):
        fr = Frame(0.25 + 0.55j, 3.2, 48, 48)
        a = render_escape(cubic, fr, max_iter=50)
        b = render_escape(cubic, fr, max_iter=50)
        assert np.array_equal(a, b)


class TestDrawing:
    def test_polyline_paints_segment(self):
        fr = Frame(0j, 4.0, 64, 64)
        img = np.zeros((64, 64, 3), dtype=np.uint8)
        draw_polyline(img, fr, [-1.0 + 0j, 1.0 + 0j], RAY_COLOR)
        col, row = fr.to_pixel(0j)
        assert tuple(img[int(round(row)), int(round(col))]) == RAY_COLOR

    def test_polyline_clips_offscreen_ends(self):
        fr = Frame(0j, 4.0, 32, 32)
        img = np.zeros((32, 32, 3), dtype=np.uint8)
        draw_polyline(img, fr, [3 + 3j, -3 - 3j], MARKER_COLOR)
        col, row = fr.to_pixel(0j)
        assert tuple(img[int(round(row)), int(round(col))]) == MARKER_COLOR
        # and nothing out of bounds was touched: shape intact, no crash
        assert img.shape == (32, 32, 3)

    def test_marker_is_filled_square(self):
        fr = Frame(0j, 4.0, 32, 32)
        img = np.zeros((32, 32, 3), dtype=np.uint8)
        draw_marker(img, fr, 0j, MARKER_COLOR, 2)
        col, row = fr.to_pixel(0j)
        c, r = int(round(col)), int(round(row))
        patch = img[r - 2:r + 3, c - 2:c + 3]
        assert np.all(patch == np.array(MARKER_COLOR, dtype=np.uint8))


class TestPPM:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        img = rng.integers(0, 256, size=(10, 14, 3), dtype=np.uint8)
        path = tmp_path / "img.ppm"
        write_ppm(path, img)
        back = read_ppm(path)
        assert np.array_equal(img, back)

    def test_header(self, tmp_path):
        img = np.zeros((3, 5, 3), dtype=np.uint8)
        path = tmp_path / "img.ppm"
        write_ppm(path, img)
        head = path.read_bytes()[:20]
        assert head.startswith(b"P6\n5 3\n255\n")

    def test_rejects_other_maxval(self, tmp_path):
        path = tmp_path / "odd.ppm"
        path.write_bytes(b"P6\n1 1\n15\n\x00\x00\x00")
        with pytest.raises(ValueError):
            read_ppm(path)


class TestFigure:
    def test_overlays_and_landmarks(self, cubic):
        fr = Frame(0.2 + 0.55j, 3.4, 180, 180)
        img = render_figure(
            cubic, fr,
            rays=[(Angle.of(Fraction(0)), "smooth"),
                  (Angle.of(Fraction(1, 2)), "plus")],
            seed=ComponentSeed(0.05 + 0.5j),
            s_min=2e-5, max_iter=60)
        # both ray colors present
        assert np.any(np.all(img == RAY_COLOR, axis=-1))
        assert np.any(np.all(img == BROKEN_COLOR, axis=-1))
        # the co-landing point and the escaping critical carry markers
        for z in (BETA, OMEGA1):
            col, row = fr.to_pixel(z)
            assert tuple(img[int(round(row)), int(round(col))]) == MARKER_COLOR

    def test_deterministic_bytes(self, cubic, tmp_path):
        fr = Frame(0.2 + 0.55j, 3.4, 60, 60)
        args = dict(rays=[(Angle.of(Fraction(0)), "smooth")],
                    s_min=1e-4, max_iter=40)
        p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        write_ppm(p1, render_figure(cubic, fr, **args))
        write_ppm(p2, render_figure(cubic, fr, **args))
        assert p1.read_bytes() == p2.read_bytes()
