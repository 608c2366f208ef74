import json
import re
import warnings

import numpy as np
import pytest

from obx import io
from obx.codec import encode_rpn_grids
from obx.evaluation import Detection
from obx.geometry import OrientedBox, Quad


def normalise_ws(text):
    return "".join(" ".join(line.split()) + "\n" for line in text.splitlines() if line.strip())


class TestAnnotations:
    def test_empty(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("")
        assert io.parse_annotations(p) == []

    def test_single_line(self, tmp_path):
        p = tmp_path / "img7.txt"
        p.write_text("0 0 4 0 4 2 0 2 plane 0\n")
        (a,) = io.parse_annotations(p)
        assert a.image_id == "img7" and a.class_id == 0 and not a.difficult
        assert set(a.quad.vertices) == {(0, 0), (4, 0), (4, 2), (0, 2)}

    def test_headers(self, tmp_path):
        p = tmp_path / "h.txt"
        p.write_text("imagesource:GoogleEarth\ngsd:0.146\n0 0 4 0 4 2 0 2 ship 1\n")
        af = io.read_annotation_file(p)
        assert af.headers == {"imagesource": "GoogleEarth", "gsd": "0.146"}
        assert af.annotations[0].difficult

    @pytest.mark.parametrize("line,msg", [
        ("0 0 4 0 4 2 0 plane 0", "expected 10 fields"),
        ("0 0 4 0 4 x 0 2 plane 0", "non-numeric"),
        ("0 0 4 0 4 2 0 2 plane 3", "difficult"),
        ("0 0 1 1 2 2 3 3 plane 0", "zero area"),
    ])
    def test_errors_carry_line(self, tmp_path, line, msg):
        p = tmp_path / "bad.txt"
        p.write_text("0 0 4 0 4 2 0 2 plane 0\n" + line + "\n")
        with pytest.raises(io.DataFormatError, match=r"bad\.txt:2") as exc:
            io.parse_annotations(p)
        assert re.search(msg, str(exc.value), re.I)

    def test_unknown_class_warns(self, tmp_path):
        p = tmp_path / "u.txt"
        p.write_text("0 0 4 0 4 2 0 2 zeppelin 0\n")
        names = io.ClassNames()
        with pytest.warns(UserWarning, match="zeppelin"):
            (a,) = io.parse_annotations(p, names)
        assert names.name_of(a.class_id) == "zeppelin"

    def test_roundtrip_corpus(self, fixtures_dir, tmp_path):
        names = io.ClassNames()
        for src in sorted((fixtures_dir / "corpus" / "ann").glob("*.txt")):
            af = io.read_annotation_file(src, names)
            out = tmp_path / src.name
            io.write_annotation_file(out, af, names)
            assert normalise_ws(out.read_text()) == normalise_ws(src.read_text())

    def test_class_sets(self):
        assert len(io.DOTA_V1_CLASSES) == 15
        assert len(io.DOTA_V15_CLASSES) == 16 and io.DOTA_V15_CLASSES[-1] == "container-crane"


class TestFloats:
    @pytest.mark.parametrize("v,s", [(1.0, "1"), (0.1, "0.1"), (-0.0, "0"), (2.5e-7, "2.5e-07"), (123.456, "123.456")])
    def test_fmt(self, v, s):
        assert io.fmt_float(v) == s

    def test_shortest_roundtrip(self):
        rng = np.random.default_rng(0)
        for v in rng.normal(size=200) * 1e3:
            assert float(io.fmt_float(v)) == v


class TestDetections:
    def test_roundtrip_and_sorted(self, tmp_path):
        names = io.ClassNames()
        q = Quad.from_flat([0, 0, 4, 0, 4, 2, 0, 2])
        dets = [Detection("b", 0, 0.5, q), Detection("a", 0, 0.9, q), Detection("a", 6, 0.7, q)]
        paths = io.write_detection_dir(dets, tmp_path, names)
        assert [p.name for p in paths] == ["Task1_plane.txt", "Task1_ship.txt"]
        assert (tmp_path / "Task1_plane.txt").read_text().splitlines()[0].startswith("a 0.9 ")
        back = io.read_detection_dir(tmp_path, names)
        assert sorted((d.image_id, d.class_id, d.score) for d in back) == sorted(
            (d.image_id, d.class_id, d.score) for d in dets)

    @pytest.mark.parametrize("line,msg", [("a 1.5 0 0 4 0 4 2 0 2", "outside"), ("a 0.5 0 0 4 0", "10 fields")])
    def test_errors(self, line, msg):
        with pytest.raises(io.DataFormatError, match=msg):
            io.parse_detection_lines(line, 0, "f.txt")


class TestGridArchive:
    def make(self):
        boxes = [(OrientedBox(300, 280, 250, 90, 2.0), "ship"), (OrientedBox(100, 100, 60, 50, 0.2), "plane")]
        return encode_rpn_grids(boxes, (512, 384))

    def test_roundtrip(self, tmp_path):
        grids = self.make()
        mpath = io.write_grid_archive(grids, tmp_path, "img", {"r1": 0.1})
        manifest, tensors = io.read_grid_archive(mpath)
        assert manifest["labels"] == ["ship", "plane"]
        assert manifest["total_bytes"] == (tmp_path / "img.bin").stat().st_size
        for k, g in grids.levels.items():
            assert np.array_equal(tensors[("class_state", k)][0], g.class_state)
            assert np.array_equal(tensors[("gt_index", k)][0], g.gt_index)
            assert np.allclose(tensors[("regression", k)], g.regression, atol=1e-6)
            assert manifest["tensors"][0]["channels"] == ["class_state"]

    def test_byte_stable(self, tmp_path):
        mpath = io.write_grid_archive(self.make(), tmp_path / "a", "img")
        manifest, tensors = io.read_grid_archive(mpath)
        m2 = io.write_archive_tensors(manifest, tensors, tmp_path / "b")
        for suffix in (".bin", ".json"):
            assert mpath.with_suffix(suffix).read_bytes() == m2.with_suffix(suffix).read_bytes()

    def test_truncated(self, tmp_path):
        mpath = io.write_grid_archive(self.make(), tmp_path, "img")
        blob = tmp_path / "img.bin"
        blob.write_bytes(blob.read_bytes()[:-4])
        with pytest.raises(io.DataFormatError, match="bytes"):
            io.read_grid_archive(mpath)

    def test_little_endian(self, tmp_path):
        mpath = io.write_grid_archive(self.make(), tmp_path, "img")
        manifest = json.loads(mpath.read_text())
        assert manifest["dtype"] == "<f4"


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "x.txt", "hello\n")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
