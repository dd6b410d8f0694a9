import csv
import json
import random

import numpy as np
import pytest
from PIL import Image

from coloc import harness
from coloc.errors import (
    DimensionMismatch,
    EmptyResults,
    MalformedBoxesFile,
    MissingMap,
    NoGroundTruth,
)
from coloc.geometry import BoundingBox, iou
from coloc.harness import DatasetCase, corloc, merge_ground_truth


def case(cls, stem, gt=()):
    return DatasetCase(cls, stem, None, None, None, tuple(gt), 100, 100)


def box_with_iou(gt, target):
    """A box sharing gt's top-left corner whose IoU with gt is exactly ``target``."""
    # widen to the right: iou = w0 / (w0 + extra) for full-height overlap
    w0 = gt.width
    extra = round(w0 / target - w0)
    pred = BoundingBox(gt.t, gt.b, gt.l, gt.r + extra)
    assert iou(pred, gt) == pytest.approx(target)
    return pred


def make_layout(root, cls="cat", stems=("a", "b", "c"), size=(20, 16), boxes_text=None, skip=()):
    cdir = root / cls
    for sub in ("images", "saliency", "cosaliency"):
        (cdir / sub).mkdir(parents=True, exist_ok=True)
        for stem in stems:
            if (sub, stem) in skip:
                continue
            Image.fromarray(np.zeros(size[::-1], np.uint8)).save(cdir / sub / f"{stem}.png")
    if boxes_text is None:
        boxes_text = "".join(f"{s},2,8,3,9\n" for s in stems)
    (cdir / "boxes.csv").write_text(boxes_text)
    return cdir


class TestLoadDataset:
    def test_ordering(self, tmp_path):
        make_layout(tmp_path, stems=("c", "a", "b"))
        make_layout(tmp_path, cls="ant", stems=("z",))
        cases = harness.load_dataset(tmp_path)
        assert [c.case_id for c in cases] == ["ant/z", "cat/a", "cat/b", "cat/c"]
        assert cases[1].ground_truth == (BoundingBox(2, 8, 3, 9),)
        assert (cases[1].width, cases[1].height) == (20, 16)

    def test_missing_saliency(self, tmp_path):
        make_layout(tmp_path, skip={("saliency", "b")})
        with pytest.raises(MissingMap, match="cat/b"):
            harness.load_dataset(tmp_path)

    def test_bad_gt_line(self, tmp_path):
        make_layout(tmp_path, boxes_text="# header\na,2,8,3,9\nb,8,8,3,9\n")
        with pytest.raises(MalformedBoxesFile) as info:
            harness.load_dataset(tmp_path)
        assert info.value.line_no == 3

    def test_gt_outside_image(self, tmp_path):
        make_layout(tmp_path, boxes_text="a,2,30,3,9\n")
        with pytest.raises(MalformedBoxesFile):
            harness.load_dataset(tmp_path)

    def test_dimension_mismatch(self, tmp_path):
        cdir = make_layout(tmp_path)
        Image.fromarray(np.zeros((5, 5), np.uint8)).save(cdir / "cosaliency" / "a.png")
        with pytest.raises(DimensionMismatch):
            harness.load_dataset(tmp_path)

    def test_multi_instance_and_unlabeled(self, tmp_path):
        make_layout(tmp_path, boxes_text="a,1,3,1,3\na,6,9,6,9\n")
        cases = {c.stem: c for c in harness.load_dataset(tmp_path)}
        assert len(cases["a"].ground_truth) == 2
        assert cases["b"].ground_truth == ()

    def test_pgm_accepted(self, tmp_path):
        cdir = make_layout(tmp_path, stems=("a",))
        (cdir / "images" / "a.png").unlink()
        Image.fromarray(np.zeros((16, 20), np.uint8)).save(cdir / "images" / "a.pgm")
        (c,) = harness.load_dataset(tmp_path)
        assert c.image_path.suffix == ".pgm"


class TestMergeGroundTruth:
    def test_cases(self):
        a = BoundingBox(1, 4, 1, 4)
        assert merge_ground_truth([a]) == a
        assert merge_ground_truth([a, BoundingBox(10, 12, 20, 30)]) == BoundingBox(1, 12, 1, 30)
        with pytest.raises(NoGroundTruth):
            merge_ground_truth([])


class TestCorLoc:
    def test_threshold_is_inclusive(self):
        gt = BoundingBox(0, 9, 0, 9)
        results = [(case("x", str(i), [gt]), box_with_iou(gt, v)) for i, v in enumerate((0.625, 0.5, 0.4))]
        report = corloc(results)
        # hand count: 0.625 and 0.5 reach >= 0.5, 0.4 does not
        assert report.per_class["x"] == pytest.approx(200 / 3)
        assert round(report.per_class["x"], 2) == 66.67
        assert [r.hit for r in report.records] == [True, True, False]

    def test_perfect(self):
        gt = BoundingBox(3, 9, 2, 8)
        assert corloc([(case("x", "a", [gt]), gt)]).mean_corloc == 100.0

    def test_unweighted_class_mean(self):
        gt = BoundingBox(0, 9, 0, 9)
        far = BoundingBox(50, 60, 50, 60)
        results = [(case("a", "1", [gt]), gt)] + [(case("b", str(i), [gt]), far) for i in range(3)]
        report = corloc(results)
        assert report.per_class == {"a": 100.0, "b": 0.0}
        assert report.mean_corloc == 50.0
        assert report.micro_corloc == 25.0

    def test_merged_gt_used(self):
        parts = [BoundingBox(0, 4, 0, 4), BoundingBox(10, 19, 10, 19)]
        report = corloc([(case("a", "1", parts), BoundingBox(0, 19, 0, 19))])
        assert report.records[0].iou == 1.0

    def test_skips_unlabeled(self):
        gt = BoundingBox(0, 9, 0, 9)
        report = corloc([(case("a", "1", [gt]), gt), (case("a", "2"), gt)])
        assert report.skipped == 1 and len(report.records) == 1

    def test_empty(self):
        with pytest.raises(EmptyResults):
            corloc([])
        with pytest.raises(EmptyResults):
            corloc([(case("a", "1"), BoundingBox(0, 1, 0, 1))])

    def test_order_invariant_and_monotone(self):
        rng = random.Random(0)
        results = []
        for i in range(40):
            t, l = rng.randrange(0, 50), rng.randrange(0, 50)
            gt = BoundingBox(t, t + rng.randrange(5, 40), l, l + rng.randrange(5, 40))
            dt, dl = rng.randrange(-8, 9), rng.randrange(-8, 9)
            pred = BoundingBox(max(0, gt.t + dt), gt.b + 10, max(0, gt.l + dl), gt.r + 10)
            results.append((case(rng.choice("pqr"), str(i), [gt]), pred))
        base = corloc(results)
        shuffled = results[:]
        rng.shuffle(shuffled)
        assert corloc(shuffled).to_dict() == base.to_dict()
        prev = None
        for thr in (0.1, 0.3, 0.5, 0.7, 0.9):
            rep = corloc(results, thr)
            for r in rep.records:
                assert r.hit == (r.iou >= thr)
            if prev is not None:
                assert all(rep.per_class[c] <= prev.per_class[c] for c in rep.per_class)
            prev = rep


class TestReports:
    def _report(self):
        gt = BoundingBox(0, 9, 0, 9)
        results = [(case("x", str(i), [gt]), box_with_iou(gt, v)) for i, v in enumerate((0.625, 0.5, 0.4))]
        return corloc(results, provenance="baseline")

    def test_json_roundtrip(self, tmp_path):
        rep = self._report()
        harness.write_report(rep, tmp_path / "r.json", "json")
        back = harness.read_report(tmp_path / "r.json")
        assert back == rep.rounded(4)
        assert back.provenance == "baseline"
        assert json.loads((tmp_path / "r.json").read_text())["per_class"]["x"] == 66.6667

    def test_csv_rows(self, tmp_path):
        rep = self._report()
        harness.write_report(rep, tmp_path / "r.csv", "csv")
        rows = list(csv.reader((tmp_path / "r.csv").read_text().splitlines()))
        assert tuple(rows[0]) == harness.CSV_COLUMNS
        assert len(rows) == len(rep.records) + 1
        assert rows[2][10] == "0.5000" and rows[2][11] == "1"

    def test_empty_records(self, tmp_path):
        rep = harness.EvalReport(0.5, {}, {}, 0.0, 0.0)
        harness.write_report(rep, tmp_path / "e.csv", "csv")
        assert (tmp_path / "e.csv").read_text().splitlines() == [",".join(harness.CSV_COLUMNS)]
        harness.write_report(rep, tmp_path / "e.json", "json")
        assert harness.read_report(tmp_path / "e.json").records == []

    def test_table(self):
        text = harness.format_table(self._report())
        assert "Mean" in text and "66.67" in text


class TestOverlay:
    def test_draw_order_and_size(self, tmp_path):
        src = tmp_path / "img.png"
        Image.fromarray(np.full((30, 40), 100, np.uint8)).save(src)
        box = BoundingBox(5, 20, 5, 30)
        out = tmp_path / "o.png"
        harness.render_overlay(src, box, box, out)
        im = np.asarray(Image.open(out))
        assert im.shape == (30, 40, 3)
        assert tuple(im[5, 10]) == (0, 255, 0)  # green drawn last
        assert tuple(im[6, 10]) == (0, 255, 0)  # 2-pixel stroke
        assert tuple(im[7, 10]) == (100, 100, 100)

    def test_border_clipped(self, tmp_path):
        src = tmp_path / "img.png"
        Image.fromarray(np.full((30, 40), 100, np.uint8)).save(src)
        out = tmp_path / "o.png"
        harness.render_overlay(src, BoundingBox(0, 29, 0, 39), BoundingBox(10, 15, 10, 15), out)
        im = np.asarray(Image.open(out))
        assert im.shape == (30, 40, 3)
        assert tuple(im[0, 20]) == (255, 0, 0) and tuple(im[29, 20]) == (255, 0, 0)


class TestPredictionsFile:
    def test_roundtrip_and_agnostic(self, tmp_path):
        p = tmp_path / "p.csv"
        harness.write_predictions(p, [("cat", "a", BoundingBox(1, 5, 2, 6))])
        assert harness.read_predictions(p) == {("cat", "a"): BoundingBox(1, 5, 2, 6)}
        q = tmp_path / "q.csv"
        q.write_text("a,1,3,1,3\na,6,9,6,9\n")
        assert harness.read_predictions(q) == {(None, "a"): BoundingBox(1, 9, 1, 9)}

    def test_malformed(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,1,2\n")
        with pytest.raises(MalformedBoxesFile):
            harness.read_predictions(p)
