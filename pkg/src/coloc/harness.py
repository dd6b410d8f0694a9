"""Dataset ingestion, CorLoc evaluation, reports and overlays.

Dataset layout::

    root/<class>/images/<stem>.(png|pgm)
    root/<class>/saliency/<stem>.(png|pgm)
    root/<class>/cosaliency/<stem>.(png|pgm)
    root/<class>/boxes.csv        # stem,t,b,l,r per instance; '#' comments

Boxes are always serialized in (t, b, l, r) order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from PIL import Image, ImageDraw

from .errors import (
    ColocError,
    DimensionMismatch,
    EmptyResults,
    MalformedBoxesFile,
    MissingMap,
    NoGroundTruth,
    WriteFailure,
)
from .geometry import BoundingBox, iou, union_box
from .imagery import GrayMap, load_gray_map, raster_size

RASTER_SUFFIXES = (".png", ".pgm")
MAP_DIRS = ("images", "saliency", "cosaliency")
BOXES_FILE = "boxes.csv"
MANIFEST_FILE = "manifest.json"
CSV_COLUMNS = (
    "case_id", "class", "t", "b", "l", "r",
    "gt_t", "gt_b", "gt_l", "gt_r", "iou", "hit", "iters", "termination",
)
GT_COLOR = (255, 0, 0)
PRED_COLOR = (0, 255, 0)
STROKE = 2


@dataclass(frozen=True)
class DatasetCase:
    class_label: str
    stem: str
    image_path: Path
    saliency_path: Path | None
    cosaliency_path: Path | None
    ground_truth: tuple = ()
    width: int = 0
    height: int = 0

    @property
    def case_id(self) -> str:
        return f"{self.class_label}/{self.stem}"

    def load_maps(self) -> tuple[GrayMap, GrayMap, GrayMap]:
        """(image, saliency, co-saliency)"""
        maps = tuple(load_gray_map(p) for p in (self.image_path, self.saliency_path, self.cosaliency_path))
        if len({m.shape for m in maps}) != 1:
            raise DimensionMismatch(f"{self.case_id}: rasters differ in size")
        return maps


def _parse_box_fields(fields, path, line_no):
    try:
        t, b, l, r = (int(x) for x in fields)
    except ValueError:
        raise MalformedBoxesFile(path, line_no, f"non-integer coordinates {fields!r}") from None
    try:
        return BoundingBox(t, b, l, r)
    except ValueError as exc:
        raise MalformedBoxesFile(path, line_no, str(exc)) from None


def _data_lines(path):
    with open(path, newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line_no, [f.strip() for f in line.split(",")]


def read_boxes_file(path) -> dict[str, list[tuple[BoundingBox, int]]]:
    """Parse ``stem,t,b,l,r`` lines into ``{stem: [(box, line_no), ...]}``."""
    path = Path(path)
    out: dict[str, list] = {}
    for line_no, fields in _data_lines(path):
        if len(fields) != 5:
            raise MalformedBoxesFile(path, line_no, f"expected 5 fields, got {len(fields)}")
        out.setdefault(fields[0], []).append((_parse_box_fields(fields[1:], path, line_no), line_no))
    return out


def read_predictions(path) -> dict[tuple[str | None, str], BoundingBox]:
    """Parse a predictions file.

    Lines are ``class,stem,t,b,l,r`` or, for class-agnostic files such as a
    copied ``boxes.csv``, ``stem,t,b,l,r`` (keyed with class ``None``).
    Repeated keys are merged into their enclosing box.
    """
    path = Path(path)
    merged: dict = {}
    for line_no, fields in _data_lines(path):
        if len(fields) == 6:
            key, coords = (fields[0], fields[1]), fields[2:]
        elif len(fields) == 5:
            key, coords = (None, fields[0]), fields[1:]
        else:
            raise MalformedBoxesFile(path, line_no, f"expected 5 or 6 fields, got {len(fields)}")
        box = _parse_box_fields(coords, path, line_no)
        merged[key] = union_box([merged[key], box]) if key in merged else box
    return merged


def write_predictions(path, rows: Iterable[tuple[str, str, BoundingBox]]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("# class,stem,t,b,l,r\n")
            for cls, stem, box in rows:
                fh.write(",".join([cls, stem, *map(str, box.as_tuple())]) + "\n")
    except OSError as exc:
        raise WriteFailure(f"{path}: {exc}") from exc


def rasters_by_stem(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        return {}
    found = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in RASTER_SUFFIXES:
            found.setdefault(p.stem, p)
    return found


def discover_classes(root) -> list[str]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    return sorted(p.name for p in root.iterdir() if (p / "images").is_dir())


def _scan_class(root: Path, cls: str, require_maps: bool = True) -> list[DatasetCase]:
    cdir = root / cls
    images = rasters_by_stem(cdir / "images")
    sal = rasters_by_stem(cdir / "saliency")
    cosal = rasters_by_stem(cdir / "cosaliency")
    missing = []
    for stem in images:
        kinds = [k for k, found in (("saliency", sal), ("cosaliency", cosal)) if stem not in found]
        if kinds:
            missing.append((stem, "/".join(kinds)))
    if missing and require_maps:
        kinds = sorted({k for _, k in missing})
        raise MissingMap([f"{cls}/{s}" for s, _ in missing], "no " + ", ".join(kinds) + " file")

    gt_path = cdir / BOXES_FILE
    gt = read_boxes_file(gt_path) if gt_path.is_file() else {}
    cases = []
    for stem in sorted(images):
        paths = (images[stem], sal.get(stem), cosal.get(stem))
        sizes = {raster_size(p) for p in paths if p is not None}
        if len(sizes) != 1:
            raise DimensionMismatch(f"{cls}/{stem}: image and maps differ in size {sorted(sizes)}")
        (width, height), = sizes
        boxes = []
        for box, line_no in gt.get(stem, []):
            if not box.fits(width, height):
                raise MalformedBoxesFile(gt_path, line_no, f"box {box.as_tuple()} exceeds {width}x{height} image")
            boxes.append(box)
        cases.append(DatasetCase(cls, stem, *paths, tuple(boxes), width, height))
    return cases


def scan_dataset(root, require_maps: bool = True) -> tuple[list[DatasetCase], list[ColocError]]:
    """Load every class that validates; collect the per-class errors.

    With ``require_maps=False`` only images and ground truth are needed, and
    absent map paths are left as None.
    """
    root = Path(root)
    cases, errors = [], []
    for cls in discover_classes(root):
        try:
            cases.extend(_scan_class(root, cls, require_maps))
        except ColocError as exc:
            errors.append(exc)
    return cases, errors


def load_dataset(root) -> list[DatasetCase]:
    """All cases, ordered by class then stem.  Raises the first class error."""
    cases, errors = scan_dataset(root)
    if errors:
        raise errors[0]
    return cases


def group_by_class(cases: Iterable[DatasetCase]) -> dict[str, list[DatasetCase]]:
    groups: dict[str, list] = {}
    for case in cases:
        groups.setdefault(case.class_label, []).append(case)
    return {k: groups[k] for k in sorted(groups)}


def read_manifest(class_dir) -> dict:
    path = Path(class_dir) / MANIFEST_FILE
    if not path.is_file():
        return {}
    return json.loads(path.read_text())


def merge_ground_truth(boxes: Sequence[BoundingBox]) -> BoundingBox:
    """Single box enclosing every annotated instance."""
    if not boxes:
        raise NoGroundTruth("no ground-truth boxes to merge")
    return union_box(boxes)


@dataclass(frozen=True)
class ImageRecord:
    case_id: str
    class_label: str
    pred: BoundingBox
    gt: BoundingBox
    iou: float
    hit: bool
    iterations: int = 0
    termination: str = ""


@dataclass
class EvalReport:
    iou_threshold: float
    per_class: dict[str, float]
    class_sizes: dict[str, int]
    mean_corloc: float
    micro_corloc: float
    skipped: int = 0
    provenance: str = "external"
    records: list[ImageRecord] = field(default_factory=list)

    def __post_init__(self):
        for cls, value in self.per_class.items():
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"CorLoc for {cls} out of range: {value}")

    def to_dict(self, digits: int | None = None) -> dict:
        rnd = (lambda x: round(x, digits)) if digits is not None else (lambda x: x)
        return {
            "iou_threshold": rnd(self.iou_threshold),
            "provenance": self.provenance,
            "mean_corloc": rnd(self.mean_corloc),
            "micro_corloc": rnd(self.micro_corloc),
            "skipped": self.skipped,
            "per_class": {k: rnd(v) for k, v in self.per_class.items()},
            "class_sizes": dict(self.class_sizes),
            "records": [
                {
                    "case_id": r.case_id,
                    "class": r.class_label,
                    "pred": list(r.pred.as_tuple()),
                    "gt": list(r.gt.as_tuple()),
                    "iou": rnd(r.iou),
                    "hit": r.hit,
                    "iters": r.iterations,
                    "termination": r.termination,
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        records = [
            ImageRecord(
                case_id=r["case_id"],
                class_label=r["class"],
                pred=BoundingBox(*r["pred"]),
                gt=BoundingBox(*r["gt"]),
                iou=r["iou"],
                hit=r["hit"],
                iterations=r["iters"],
                termination=r["termination"],
            )
            for r in d["records"]
        ]
        return cls(
            iou_threshold=d["iou_threshold"],
            per_class=dict(d["per_class"]),
            class_sizes=dict(d["class_sizes"]),
            mean_corloc=d["mean_corloc"],
            micro_corloc=d["micro_corloc"],
            skipped=d["skipped"],
            provenance=d["provenance"],
            records=records,
        )

    def rounded(self, digits: int = 4) -> "EvalReport":
        return EvalReport.from_dict(self.to_dict(digits))


def corloc(
    results: Iterable[tuple[DatasetCase, BoundingBox]],
    iou_threshold: float = 0.5,
    traces: Mapping | None = None,
    provenance: str = "external",
) -> EvalReport:
    """Percentage of images whose box reaches ``iou_threshold`` against the merged GT.

    The headline mean is the unweighted mean over classes; ``micro_corloc``
    pools all images.  Cases without ground truth are counted in ``skipped``.
    ``traces`` optionally maps case ids to their IterationTrace.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    traces = traces or {}
    results = list(results)
    if not results:
        raise EmptyResults("no predictions to evaluate")
    records, skipped = [], 0
    for case, pred in results:
        if not case.ground_truth:
            skipped += 1
            continue
        gt = merge_ground_truth(case.ground_truth)
        score = iou(pred, gt)
        trace = traces.get(case.case_id)
        records.append(
            ImageRecord(
                case.case_id,
                case.class_label,
                pred,
                gt,
                score,
                score >= iou_threshold,
                len(trace) if trace is not None else 0,
                trace.termination.value if trace is not None and trace.termination else "",
            )
        )
    if not records:
        raise EmptyResults(f"all {skipped} predictions lack ground truth")
    records.sort(key=lambda r: (r.class_label, r.case_id))
    hits: dict[str, int] = {}
    sizes: dict[str, int] = {}
    for r in records:
        sizes[r.class_label] = sizes.get(r.class_label, 0) + 1
        hits[r.class_label] = hits.get(r.class_label, 0) + int(r.hit)
    per_class = {c: 100.0 * hits[c] / sizes[c] for c in sorted(sizes)}
    return EvalReport(
        iou_threshold=iou_threshold,
        per_class=per_class,
        class_sizes={c: sizes[c] for c in sorted(sizes)},
        mean_corloc=sum(per_class.values()) / len(per_class),
        micro_corloc=100.0 * sum(hits.values()) / len(records),
        skipped=skipped,
        provenance=provenance,
        records=records,
    )


def write_report(report: EvalReport, path, fmt: str = "json") -> None:
    """JSON holds the full nested report; CSV holds one row per image."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(json.dumps(report.to_dict(4), indent=2) + "\n")
        elif fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in report.records:
                    w.writerow(
                        [r.case_id, r.class_label, *r.pred.as_tuple(), *r.gt.as_tuple(),
                         f"{r.iou:.4f}", int(r.hit), r.iterations, r.termination]
                    )
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise WriteFailure(f"{path}: {exc}") from exc


def read_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text()))


def format_table(report: EvalReport) -> str:
    """Per-class CorLoc row followed by the class mean."""
    classes = list(report.per_class)
    header = ["Method", *classes, "Mean"]
    row = [report.provenance, *(f"{report.per_class[c]:.2f}" for c in classes), f"{report.mean_corloc:.2f}"]
    widths = [max(len(a), len(b)) for a, b in zip(header, row)]
    fmt = lambda cells: " | ".join(c.ljust(w) for c, w in zip(cells, widths))
    return "\n".join([fmt(header), "-+-".join("-" * w for w in widths), fmt(row)])


def render_overlay(image_path, gt: BoundingBox | None, pred: BoundingBox, out_path) -> None:
    """PNG copy of the image with GT in red and the prediction in green on top."""
    with Image.open(image_path) as im:
        canvas = im.convert("RGB")
    draw = ImageDraw.Draw(canvas)
    for box, color in ((gt, GT_COLOR), (pred, PRED_COLOR)):
        if box is not None:
            # PIL clips to the canvas and grows the stroke inward
            draw.rectangle([box.l, box.t, box.r, box.b], outline=color, width=STROKE)
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        canvas.save(out_path, format="PNG")
    except OSError as exc:
        raise WriteFailure(f"{out_path}: {exc}") from exc


def write_trace(trace, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(trace.to_lines()) + "\n")
    except OSError as exc:
        raise WriteFailure(f"{path}: {exc}") from exc

