import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jndprefilter.errors import DimensionError, IoError, ParseError, TilingError
from jndprefilter.image import (
    PlanarImage,
    assemble_patches,
    chroma_shape,
    constant_image,
    crop_patches,
    round_half_away,
)
from jndprefilter.io import encode_y4m, load_image, save_image


def random_image(rng, h, w, chroma=True):
    y = rng.integers(0, 256, (h, w), dtype=np.uint8)
    if not chroma:
        return PlanarImage(y)
    ch, cw = chroma_shape(h, w)
    return PlanarImage(y, rng.integers(0, 256, (ch, cw), dtype=np.uint8),
                       rng.integers(0, 256, (ch, cw), dtype=np.uint8))


def reference_y4m(width, height, y, cb, cr):
    # written independently of the package writer
    return (b"YUV4MPEG2 W%d H%d F30:1 C420\n" % (width, height)
            + b"FRAME\n" + bytes(y) + bytes(cb) + bytes(cr))


class TestPlanarImage:
    def test_chroma_must_match_geometry(self):
        with pytest.raises(DimensionError):
            PlanarImage(np.zeros((16, 16), np.uint8), np.zeros((4, 4), np.uint8), np.zeros((4, 4), np.uint8))

    def test_y_only_has_no_chroma(self):
        img = PlanarImage(np.zeros((8, 8), np.uint8))
        assert img.subsampling == "Y-only" and img.cb is None

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            PlanarImage(np.full((8, 8), 300))

    def test_planes_are_read_only(self):
        img = constant_image(16, 16)
        with pytest.raises(ValueError):
            img.y[0, 0] = 1

    def test_padding_replicates_edges(self):
        y = np.arange(100, dtype=np.uint8).reshape(10, 10)
        img = PlanarImage(y)
        p = img.padded(8)
        assert p.y.shape == (16, 16)
        assert np.array_equal(p.y[10:, :10], np.repeat(y[-1:, :], 6, axis=0))
        assert p.cropped(10, 10).equals(img)

    def test_round_half_away(self):
        assert list(round_half_away([0.5, 1.5, -0.5, -1.5, 2.49])) == [1, 2, -1, -2, 2]


class TestLoad:
    def test_pgm_bytes(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
        img = load_image(path)
        assert img.subsampling == "Y-only"
        assert img.y.tolist() == [[0, 128], [255, 64]]

    def test_pgm_with_comment(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([7, 9]))
        assert load_image(path).y.tolist() == [[7, 9]]

    def test_i420_constant(self, tmp_path):
        path = tmp_path / "a.yuv"
        path.write_bytes(bytes([128]) * (256 + 2 * 64))
        img = load_image(path, width=16, height=16)
        assert np.all(img.y == 128) and np.all(img.cb == 128) and np.all(img.cr == 128)

    def test_y4m_reference_file(self, tmp_path, rng):
        y = rng.integers(0, 256, 64 * 64, dtype=np.uint8)
        cb = rng.integers(0, 256, 32 * 32, dtype=np.uint8)
        cr = rng.integers(0, 256, 32 * 32, dtype=np.uint8)
        data = reference_y4m(64, 64, y, cb, cr)
        assert len(data) - data.index(b"FRAME\n") - 6 == 6144
        path = tmp_path / "a.y4m"
        path.write_bytes(data)
        img = load_image(path)
        assert (img.width, img.height, img.subsampling) == (64, 64, "4:2:0")
        assert np.array_equal(img.y.ravel(), y) and np.array_equal(img.cr.ravel(), cr)
        assert encode_y4m(img) == data

    def test_y4m_frame_index(self, tmp_path, rng):
        a, b = random_image(rng, 16, 16), random_image(rng, 16, 16)
        data = encode_y4m(a) + encode_y4m(b).split(b"\n", 1)[1]
        path = tmp_path / "two.y4m"
        path.write_bytes(data)
        assert load_image(path, frame=1).equals(b)
        with pytest.raises(DimensionError):
            load_image(path, frame=2)

    @pytest.mark.parametrize("data", [b"P6\n2 2\n255\n1234", b"P5\n2\n", b"P5\n2 x\n255\n12"])
    def test_malformed_pgm(self, tmp_path, data):
        path = tmp_path / "bad.pgm"
        path.write_bytes(data)
        with pytest.raises(ParseError):
            load_image(path)

    def test_pgm_size_mismatch(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(DimensionError):
            load_image(path)

    def test_i420_size_mismatch(self, tmp_path):
        path = tmp_path / "a.yuv"
        path.write_bytes(bytes(100))
        with pytest.raises(DimensionError):
            load_image(path, width=16, height=16)

    def test_y4m_bad_header(self, tmp_path):
        path = tmp_path / "a.y4m"
        path.write_bytes(b"YUV4MPEG2 W16 C420\nFRAME\n")
        with pytest.raises(ParseError):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_image(tmp_path / "nope.pgm")


class TestSave:
    @pytest.mark.parametrize("fmt,ext,chroma", [("pgm", ".pgm", False), ("i420", ".yuv", True), ("y4m", ".y4m", True)])
    def test_round_trip_random(self, tmp_path, rng, fmt, ext, chroma):
        img = random_image(rng, 64, 64, chroma)
        path = tmp_path / ("x" + ext)
        save_image(img, path)
        back = load_image(path, width=64, height=64)
        assert back.equals(img)

    def test_file_round_trip_is_byte_identical(self, tmp_path, corpus):
        for i, img in enumerate(corpus[:5]):
            first = tmp_path / f"{i}.y4m"
            second = tmp_path / f"{i}b.y4m"
            save_image(img, first)
            save_image(load_image(first), second)
            assert first.read_bytes() == second.read_bytes()

    def test_y_only_as_i420_fails(self, tmp_path):
        with pytest.raises(DimensionError):
            save_image(PlanarImage(np.zeros((8, 8), np.uint8)), tmp_path / "a.yuv")

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(IoError):
            save_image(constant_image(8, 8), tmp_path / "missing" / "a.y4m")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1))
    def test_odd_sizes_round_trip(self, w, h, seed):
        import tempfile, os

        img = random_image(np.random.default_rng(seed), h, w)
        with tempfile.TemporaryDirectory() as d:
            for ext in (".y4m", ".yuv"):
                p = os.path.join(d, "a" + ext)
                save_image(img, p)
                assert load_image(p, width=w, height=h).equals(img)


class TestPatches:
    def test_two_patches(self):
        patches = crop_patches(constant_image(64, 128), 64)
        assert [o for o, _ in patches] == [(0, 0), (64, 0)]

    def test_single_patch_is_whole_plane(self, rng):
        img = random_image(rng, 64, 64)
        (origin, patch), = crop_patches(img)
        assert origin == (0, 0) and np.array_equal(patch, img.y)

    def test_448x256_geometry(self):
        assert len(crop_patches(constant_image(256, 448))) == 28

    def test_non_multiple_is_padded(self):
        assert len(crop_patches(constant_image(100, 130))) == 2 * 3

    def test_crop_assemble_identity(self, rng):
        img = random_image(rng, 128, 192)
        assert np.array_equal(assemble_patches(crop_patches(img), (128, 192)), img.y)

    def test_order_independent(self, rng):
        img = random_image(rng, 128, 128)
        patches = crop_patches(img)
        shuffled = [patches[i] for i in rng.permutation(len(patches))]
        assert np.array_equal(assemble_patches(shuffled, (128, 128)), img.y)

    def test_zero_patch_changes_only_its_region(self, rng):
        img = random_image(rng, 128, 128)
        patches = crop_patches(img)
        patches[3] = (patches[3][0], np.zeros((64, 64), np.uint8))
        out = assemble_patches(patches, (128, 128))
        differs = out != img.y
        outside = np.ones_like(differs)
        outside[64:128, 64:128] = False
        assert not differs[outside].any()
        assert np.all(out[64:, 64:] == 0)

    def test_gap_and_overlap(self, rng):
        patches = crop_patches(random_image(rng, 128, 128))
        with pytest.raises(TilingError):
            assemble_patches(patches[:-1], (128, 128))
        with pytest.raises(TilingError):
            assemble_patches(patches + patches[:1], (128, 128))
