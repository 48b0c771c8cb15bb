"""Dot-plot rendering, resizing, composition, and PGM round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnadot.bppm import Bppm
from rnadot.imaging import (
    GrayImage,
    bppm_to_image,
    compose_pair,
    quantize,
    read_pgm,
    resize_bilinear,
    write_pgm,
)


def rand_image(rng, side: int) -> GrayImage:
    return GrayImage(side=side, pixels=rng.random((side, side)))


class TestGrayImage:
    def test_rejects_bad_shape_or_range(self):
        with pytest.raises(ValueError):
            GrayImage(side=3, pixels=np.zeros((2, 3)))
        with pytest.raises(ValueError):
            GrayImage(side=2, pixels=np.full((2, 2), 1.5))
        with pytest.raises(ValueError):
            GrayImage(side=0, pixels=np.zeros((0, 0)))


class TestDotPlot:
    def test_single_entry_mirrored(self):
        p = np.zeros((5, 5))
        p[0, 4] = 0.9924
        img = bppm_to_image(Bppm(n=5, p=p))
        assert img.pixels[0, 4] == 0.9924
        assert img.pixels[4, 0] == 0.9924
        assert img.pixels.sum() == 2 * 0.9924

    def test_zero_matrix_gives_zero_image(self):
        img = bppm_to_image(Bppm(n=4, p=np.zeros((4, 4))))
        assert np.all(img.pixels == 0.0)

    def test_symmetric_with_zero_diagonal(self):
        rng = np.random.default_rng(0)
        p = np.triu(rng.random((8, 8)) * 0.2, k=1)
        img = bppm_to_image(Bppm(n=8, p=p))
        assert np.array_equal(img.pixels, img.pixels.T)
        assert np.all(np.diag(img.pixels) == 0.0)

    def test_sqrt_mode(self):
        p = np.zeros((5, 5))
        p[0, 4] = 0.25
        img = bppm_to_image(Bppm(n=5, p=p), use_sqrt=True)
        assert img.pixels[0, 4] == 0.5


class TestResize:
    def test_identity_at_same_side(self):
        rng = np.random.default_rng(1)
        img = rand_image(rng, 9)
        out = resize_bilinear(img, 9)
        assert np.array_equal(out.pixels, img.pixels)

    def test_constant_stays_constant(self):
        img = GrayImage(side=3, pixels=np.full((3, 3), 0.4))
        for target in (1, 2, 5, 8):
            out = resize_bilinear(img, target)
            assert np.allclose(out.pixels, 0.4, atol=1e-15)

    def test_matches_scalar_reimplementation(self):
        # independent per-pixel evaluation of the half-pixel-center formula
        src = GrayImage(side=2, pixels=np.array([[0.0, 1.0], [0.0, 1.0]]))
        out = resize_bilinear(src, 4)

        def scalar(row, col):
            vals = src.pixels

            def axis(d, size_src, size_dst):
                s = (d + 0.5) * (size_src / size_dst) - 0.5
                s = min(max(s, 0.0), size_src - 1.0)
                lo = int(np.floor(s))
                hi = min(lo + 1, size_src - 1)
                return lo, hi, s - lo

            ylo, yhi, fy = axis(row, 2, 4)
            xlo, xhi, fx = axis(col, 2, 4)
            return (
                (1 - fy) * (1 - fx) * vals[ylo, xlo]
                + (1 - fy) * fx * vals[ylo, xhi]
                + fy * (1 - fx) * vals[yhi, xlo]
                + fy * fx * vals[yhi, xhi]
            )

        for r in range(4):
            for c in range(4):
                assert out.pixels[r, c] == pytest.approx(scalar(r, c), abs=1e-12)

    def test_scalar_agreement_on_random_sizes(self):
        rng = np.random.default_rng(2)
        for src_side, dst_side in [(3, 7), (5, 4), (6, 13)]:
            img = rand_image(rng, src_side)
            out = resize_bilinear(img, dst_side)
            d = rng.integers(dst_side, size=2)
            row, col = int(d[0]), int(d[1])

            def axis(d_, n_src, n_dst):
                s = (d_ + 0.5) * (n_src / n_dst) - 0.5
                s = min(max(s, 0.0), n_src - 1.0)
                lo = int(np.floor(s))
                return lo, min(lo + 1, n_src - 1), s - lo

            ylo, yhi, fy = axis(row, src_side, dst_side)
            xlo, xhi, fx = axis(col, src_side, dst_side)
            v = img.pixels
            expect = (
                (1 - fy) * (1 - fx) * v[ylo, xlo]
                + (1 - fy) * fx * v[ylo, xhi]
                + fy * (1 - fx) * v[yhi, xlo]
                + fy * fx * v[yhi, xhi]
            )
            assert out.pixels[row, col] == pytest.approx(expect, abs=1e-12)

    @given(side=st.integers(1, 12), target=st.integers(1, 20), data=st.data())
    @settings(max_examples=60, deadline=None)
    def test_output_within_input_range(self, side, target, data):
        seed = data.draw(st.integers(0, 2**32 - 1))
        img = rand_image(np.random.default_rng(seed), side)
        out = resize_bilinear(img, target)
        assert out.pixels.min() >= img.pixels.min() - 1e-12
        assert out.pixels.max() <= img.pixels.max() + 1e-12

    def test_rejects_bad_target(self):
        img = GrayImage(side=2, pixels=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            resize_bilinear(img, 0)


class TestCompose:
    def test_constant_halves(self):
        a = GrayImage(side=3, pixels=np.full((3, 3), 0.25))
        b = GrayImage(side=3, pixels=np.full((3, 3), 0.75))
        out = compose_pair(a, b)
        expect = np.array(
            [
                [0.0, 0.25, 0.25],
                [0.75, 0.0, 0.25],
                [0.75, 0.75, 0.0],
            ]
        )
        assert np.array_equal(out.pixels, expect)

    def test_self_composition_zeroes_diagonal(self):
        rng = np.random.default_rng(3)
        sym = rng.random((5, 5))
        sym = (sym + sym.T) / 2
        x = GrayImage(side=5, pixels=sym)
        out = compose_pair(x, x)
        expect = sym.copy()
        np.fill_diagonal(expect, 0.0)
        assert np.array_equal(out.pixels, expect)

    def test_triangles_reconstruct_inputs(self):
        rng = np.random.default_rng(4)
        a, b = rand_image(rng, 6), rand_image(rng, 6)
        out = compose_pair(a, b)
        upper = np.triu_indices(6, k=1)
        lower = np.tril_indices(6, k=-1)
        assert np.array_equal(out.pixels[upper], a.pixels[upper])
        assert np.array_equal(out.pixels[lower], b.pixels[lower])

    def test_swap_equals_transpose_for_symmetric_inputs(self):
        rng = np.random.default_rng(5)
        mk = lambda: (lambda m: GrayImage(side=5, pixels=(m + m.T) / 2))(
            rng.random((5, 5))
        )
        a, b = mk(), mk()
        ab = compose_pair(a, b)
        ba = compose_pair(b, a)
        assert np.array_equal(ab.pixels.T, ba.pixels)

    def test_side_mismatch(self):
        a = GrayImage(side=2, pixels=np.zeros((2, 2)))
        b = GrayImage(side=3, pixels=np.zeros((3, 3)))
        with pytest.raises(ValueError, match="mismatch"):
            compose_pair(a, b)


class TestPgm:
    def test_one_pixel_full_intensity(self):
        img = GrayImage(side=1, pixels=np.array([[1.0]]))
        assert write_pgm(img) == b"P5\n1 1\n255\n\xff"

    def test_half_rounds_away_from_zero(self):
        assert quantize(np.array([0.5]))[0] == 128
        img = GrayImage(side=1, pixels=np.array([[0.5]]))
        assert write_pgm(img)[-1] == 128

    def test_write_read_write_fixed_point(self):
        rng = np.random.default_rng(6)
        img = rand_image(rng, 13)
        first = write_pgm(img)
        second = write_pgm(read_pgm(first))
        assert first == second

    def test_read_inverts_quantization(self):
        img = GrayImage(side=2, pixels=np.array([[0.0, 1.0], [0.5, 0.2]]))
        back = read_pgm(write_pgm(img))
        assert np.array_equal(back.pixels, quantize(img.pixels) / 255.0)

    def test_rejects_malformed_streams(self):
        good = write_pgm(GrayImage(side=2, pixels=np.zeros((2, 2))))
        with pytest.raises(ValueError, match="P5"):
            read_pgm(b"P2\n2 2\n255\n    ")
        with pytest.raises(ValueError, match="maxval"):
            read_pgm(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(ValueError, match="payload"):
            read_pgm(good[:-1])
        with pytest.raises(ValueError, match="dimension"):
            read_pgm(b"P5\nx y\n255\n")
        with pytest.raises(ValueError, match="square"):
            read_pgm(b"P5\n2 3\n255\n" + b"\x00" * 6)
