import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obx.evaluation import (
    APMetric, Annotation, Detection, OverlapMode, evaluate, merge_tiles, rotated_nms, tile_origins, voc_ap,
)
from obx.geometry import OrientedBox, Quad, box_to_quad

from oracles import brute_force_ap


def q(cx, cy, w=4, h=2, t=0.0):
    return box_to_quad(OrientedBox(cx, cy, w, h, t))


def three_det_fixture():
    anns = [Annotation("a", 0, q(0, 0)), Annotation("a", 0, q(100, 0))]
    dets = [Detection("a", 0, 0.9, q(0, 0)), Detection("a", 0, 0.8, q(300, 0)), Detection("a", 0, 0.7, q(100, 0))]
    return dets, anns


def random_dets(rng, n, images=3, classes=2):
    out = []
    for _ in range(n):
        b = OrientedBox(rng.uniform(0, 60), rng.uniform(0, 60), rng.uniform(4, 20), rng.uniform(2, 8),
                        rng.uniform(0, math.pi))
        out.append(Detection(f"i{rng.integers(images)}", int(rng.integers(classes)),
                             float(rng.uniform(0, 1)), box_to_quad(b)))
    return out


class TestNms:
    def test_single(self):
        d = [Detection("a", 0, 0.5, q(0, 0))]
        assert rotated_nms(d) == d

    def test_duplicate(self):
        d = [Detection("a", 0, 0.8, q(0, 0)), Detection("a", 0, 0.9, q(0, 0))]
        assert rotated_nms(d, 0.5) == [d[1]]

    def test_threshold(self):
        d = [Detection("a", 0, 0.9, q(0, 0)), Detection("a", 0, 0.8, q(1, 0))]
        assert rotated_nms(d, 0.5) == [d[0]]  # IoU 0.6 > 0.5
        assert rotated_nms(d, 0.7) == d

    def test_groups_by_class_and_image(self):
        d = [Detection("a", 0, 0.9, q(0, 0)), Detection("a", 1, 0.8, q(0, 0)), Detection("b", 0, 0.7, q(0, 0))]
        assert rotated_nms(d, 0.5) == d

    def test_poly_mode_agrees_on_rectangles(self):
        rng = np.random.default_rng(3)
        d = random_dets(rng, 40)
        assert rotated_nms(d, 0.3, OverlapMode.POLY) == rotated_nms(d, 0.3, OverlapMode.RECT)

    def test_idempotent_and_order_invariant(self, backend):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = random_dets(rng, int(rng.integers(0, 30)))
            once = rotated_nms(d, 0.3)
            assert rotated_nms(once, 0.3) == once
            perm = [d[i] for i in rng.permutation(len(d))]
            assert set(rotated_nms(perm, 0.3)) == set(once)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            rotated_nms([], 0.0)


class TestTiles:
    def test_origins(self):
        assert tile_origins(1024, 1024) == [(0, 0)]
        xs = sorted({x for x, _ in tile_origins(2000, 1024)})
        assert xs == [0, 256, 512, 768, 976]

    def test_merge(self):
        tile_a = ("img", (0, 0), [Detection("t0", 0, 0.9, q(500, 10))])
        tile_b = ("img", (256, 0), [Detection("t1", 0, 0.8, q(244, 10))])
        merged = merge_tiles([tile_a, tile_b])
        assert len(merged) == 1
        assert merged[0].image_id == "img" and merged[0].score == 0.9


class TestAp:
    def test_three_detection_fixture(self):
        dets, anns = three_det_fixture()
        cont = evaluate(dets, anns, metric=APMetric.CONTINUOUS)
        voc = evaluate(dets, anns, metric=APMetric.VOC07_11POINT)
        assert cont.ap[0] == pytest.approx(1 * 0.5 + (2 / 3) * 0.5, abs=1e-12)
        oracle = float(brute_force_ap([True, False, True], 2, "voc07"))
        assert oracle == pytest.approx(28 / 33, abs=1e-15)
        assert voc.ap[0] == pytest.approx(oracle, abs=1e-12)
        assert voc.mean_ap == pytest.approx(0.8485, abs=1e-4)

    def test_perfect_and_miss(self):
        anns = [Annotation("a", 0, q(0, 0))]
        assert evaluate([Detection("a", 0, 0.9, q(0, 0))], anns).ap[0] == 1.0
        # IoU of a (0,0) box with one shifted by 2.8 along x is 1.2 / 6.8 < 0.5
        assert evaluate([Detection("a", 0, 0.9, q(2.8, 0))], anns).ap[0] == 0.0

    def test_difficult_ignored(self):
        anns = [Annotation("a", 0, q(0, 0)), Annotation("a", 0, q(50, 0), difficult=True)]
        dets = [Detection("a", 0, 0.95, q(50, 0)), Detection("a", 0, 0.9, q(0, 0))]
        r = evaluate(dets, anns)
        assert r.num_positives[0] == 1 and r.ap[0] == 1.0

    def test_duplicate_is_fp(self):
        anns = [Annotation("a", 0, q(0, 0))]
        dets = [Detection("a", 0, 0.9, q(0, 0)), Detection("a", 0, 0.8, q(0, 0))]
        rec, prec = evaluate(dets, anns, metric=APMetric.CONTINUOUS).curves[0]
        assert prec.tolist() == [1.0, 0.5]

    def test_unknown_class_and_difficult_only(self):
        anns = [Annotation("a", 0, q(0, 0)), Annotation("a", 1, q(9, 9), difficult=True)]
        r = evaluate([Detection("a", 5, 0.9, q(0, 0))], anns)
        assert r.unknown_class_detections == 1
        assert r.ap[1] is None
        assert r.mean_ap == 0.0

    def test_report_formats(self):
        dets, anns = three_det_fixture()
        r = evaluate(dets, anns, class_names=["plane"])
        assert "plane" in r.format_table() and "overlap=rect" in r.format_table()
        assert r.to_json()["per_class"]["plane"]["num_positives"] == 2

    def test_voc_ap_direct(self):
        assert voc_ap(np.array([0.5, 0.5, 1.0]), np.array([1.0, 0.5, 2 / 3]), APMetric.CONTINUOUS) == pytest.approx(5 / 6)

    @given(st.lists(st.booleans(), min_size=1, max_size=25), st.integers(1, 30))
    @settings(max_examples=150)
    def test_against_brute_force(self, outcomes, extra):
        npos = max(sum(outcomes), 1) + extra % 3
        anns, dets = [], []
        for i in range(npos):
            anns.append(Annotation("img", 0, q(20.0 * i, 0)))
        tp_slots = iter(range(npos))
        for rank, hit in enumerate(outcomes):
            score = 1.0 - rank / 100
            if hit:
                dets.append(Detection("img", 0, score, q(20.0 * next(tp_slots), 0)))
            else:
                dets.append(Detection("img", 0, score, q(5000.0 + 20 * rank, 0)))
        for m, key in ((APMetric.VOC07_11POINT, "voc07"), (APMetric.CONTINUOUS, "cont")):
            got = evaluate(dets, anns, metric=m).ap[0]
            assert got == pytest.approx(float(brute_force_ap(outcomes, npos, key)), abs=1e-12)


class TestEvalProperties:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.anns = [Annotation(d.image_id, d.class_id, d.quad, bool(rng.random() < 0.1))
                     for d in random_dets(rng, 25)]
        jitter = []
        for a in self.anns:
            b = OrientedBox(*[v + rng.normal(0, 0.5) for v in (0, 0)], 1, 1, 0)
            jitter.append(Detection(a.image_id, a.class_id, float(rng.uniform()),
                                    Quad(tuple((x + b.cx, y + b.cy) for x, y in a.quad.vertices))))
        self.dets = jitter + random_dets(rng, 15)

    def test_bounds(self):
        r = evaluate(self.dets, self.anns)
        assert all(0 <= v <= 1 for v in r.ap.values() if v is not None)

    def test_order_invariance(self):
        rng = np.random.default_rng(0)
        base = evaluate(self.dets, self.anns)
        for _ in range(5):
            perm = [self.dets[i] for i in rng.permutation(len(self.dets))]
            assert evaluate(perm, self.anns).ap == base.ap

    def test_removing_fp_does_not_hurt(self):
        r = evaluate(self.dets, self.anns, metric=APMetric.CONTINUOUS)
        fps = self.dets[len(self.anns):]
        for fp in fps:
            rest = [d for d in self.dets if d is not fp]
            r2 = evaluate(rest, self.anns, metric=APMetric.CONTINUOUS)
            for c in r.ap:
                if r.ap[c] is not None:
                    assert r2.ap[c] >= r.ap[c] - 1e-12

    def test_class_permutation(self):
        swap = {0: 1, 1: 0}
        r = evaluate(self.dets, self.anns)
        anns = [Annotation(a.image_id, swap[a.class_id], a.quad, a.difficult) for a in self.anns]
        dets = [Detection(d.image_id, swap[d.class_id], d.score, d.quad) for d in self.dets]
        r2 = evaluate(dets, anns)
        assert r2.ap[0] == r.ap[1] and r2.ap[1] == r.ap[0]
        assert r2.mean_ap == pytest.approx(r.mean_ap, abs=1e-15)

    def test_poly_overlap_mode(self):
        r = evaluate(self.dets, self.anns, overlap=OverlapMode.POLY)
        assert r.overlap is OverlapMode.POLY
        assert r.mean_ap == pytest.approx(evaluate(self.dets, self.anns).mean_ap, abs=1e-9)
