"""Command-line entry point: ``coloc {run,eval,baseline,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import baseline, harness, synth
from .errors import ColocError, EmptyResults, NoGroundTruth, TooFewImages
from .imagery import DEFAULT_EDGE_THRESHOLD, load_gray_map, save_gray_map
from .solver import SolverConfig, colocalize_set

log = logging.getLogger("coloc")

MAP_SUFFIX = ".png"


@dataclass(frozen=True)
class RunConfig:
    root: Path
    out: Path
    solver: SolverConfig
    jobs: int = 1
    fmt: str = "json"
    render: bool = False
    provenance: str | None = None  # None: read from the class manifests
    iou_threshold: float = 0.5


def _detect_provenance(root: Path, classes) -> str:
    tags = {harness.read_manifest(root / c).get("provenance", "external") for c in classes}
    return "+".join(sorted(tags)) if tags else "external"


def cmd_run(cfg: RunConfig) -> int:
    """Co-localize every case and write predictions, traces and the report."""
    cases, errors = harness.scan_dataset(cfg.root)
    for err in errors:
        log.error("%s", err)
    groups = harness.group_by_class(cases)
    provenance = cfg.provenance or _detect_provenance(cfg.root, groups)

    predictions, results, traces = [], [], {}
    for cls, group in groups.items():
        loaded, usable = [], []
        for case in group:
            try:
                loaded.append(case.load_maps())
                usable.append(case)
            except (ColocError, OSError) as exc:
                errors.append(exc)
                log.error("%s: %s", case.case_id, exc)
        for case, res in zip(usable, colocalize_set(loaded, cfg.solver, cfg.jobs)):
            if not res.ok:
                errors.append(res.error)
                log.error("%s: %s", case.case_id, res.error)
                continue
            predictions.append((cls, case.stem, res.box))
            traces[case.case_id] = res.trace
            results.append((case, res.box))
            harness.write_trace(res.trace, cfg.out / "traces" / cls / f"{case.stem}.txt")
            if cfg.render:
                gt = harness.merge_ground_truth(case.ground_truth) if case.ground_truth else None
                harness.render_overlay(case.image_path, gt, res.box, cfg.out / "overlays" / cls / f"{case.stem}.png")

    harness.write_predictions(cfg.out / "predictions.csv", predictions)
    if any(case.ground_truth for case, _ in results):
        report = harness.corloc(results, cfg.iou_threshold, traces, provenance)
        harness.write_report(report, cfg.out / f"report.{cfg.fmt}", cfg.fmt)
        print(harness.format_table(report))
    if errors:
        (cfg.out / "errors.txt").write_text("".join(f"{e}\n" for e in errors))
        print(f"{len(errors)} error(s); see {cfg.out / 'errors.txt'}", file=sys.stderr)
        return 1
    return 0


def cmd_eval(predictions_path, root, iou_threshold=0.5, out=None, fmt="json") -> harness.EvalReport:
    """Recompute CorLoc from stored boxes, without re-running the solver."""
    preds = harness.read_predictions(predictions_path)
    cases, errors = harness.scan_dataset(root, require_maps=False)
    if errors:
        raise errors[0]
    if not preds:
        raise EmptyResults(f"{predictions_path}: no predictions")
    matched = []
    for case in cases:
        box = preds.get((case.class_label, case.stem), preds.get((None, case.stem)))
        if box is not None:
            matched.append((case, box))
    if not matched:
        raise EmptyResults("no prediction matches a dataset case")
    if not any(case.ground_truth for case, _ in matched):
        raise NoGroundTruth("none of the predicted cases has ground truth")
    provenance = _detect_provenance(Path(root), {c.class_label for c, _ in matched})
    report = harness.corloc(matched, iou_threshold, provenance=provenance)
    if out is not None:
        harness.write_report(report, Path(out) / f"eval_report.{fmt}", fmt)
    return report


def cmd_baseline(root) -> int:
    """Fill saliency/ and cosaliency/ with the classical stand-in maps."""
    root = Path(root)
    failures = 0
    for cls in harness.discover_classes(root):
        cdir = root / cls
        stems = harness.rasters_by_stem(cdir / "images")
        images = {stem: load_gray_map(p) for stem, p in stems.items()}
        sal = {stem: baseline.spectral_residual_saliency(im) for stem, im in images.items()}
        for stem, m in sal.items():
            save_gray_map(m, cdir / "saliency" / f"{stem}{MAP_SUFFIX}")
        errors = []
        order = sorted(images)
        try:
            cosal = baseline.fuse_cosaliency(
                [sal[s] for s in order], [baseline.histogram_signature(images[s]) for s in order]
            )
            for stem, m in zip(order, cosal):
                save_gray_map(m, cdir / "cosaliency" / f"{stem}{MAP_SUFFIX}")
        except TooFewImages as exc:
            errors.append(f"TooFewImages: {exc}")
            log.error("%s: %s", cls, exc)
        manifest = {
            "provenance": "baseline",
            "saliency": "spectral_residual",
            "cosaliency": "histogram_commonness",
            "errors": errors,
        }
        (cdir / harness.MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        failures += len(errors)
    return 1 if failures else 0


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        clamp_delta=args.clamp_delta,
        edge_threshold=args.edge_threshold,
    )


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--root", type=Path, help="dataset root directory")
    shared.add_argument("--out", type=Path, default=Path("coloc_out"), help="output directory")
    shared.add_argument("--epsilon", type=float, default=2.0, help="squared-L2 step tolerance")
    shared.add_argument("--max-iters", type=int, default=30)
    shared.add_argument("--edge-threshold", type=float, default=DEFAULT_EDGE_THRESHOLD)
    shared.add_argument("--clamp-delta", type=float, default=None, help="deviation ratio floor (default: half a pixel)")
    shared.add_argument("--iou-threshold", type=float, default=0.5)
    shared.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    shared.add_argument("--render", action="store_true", help="write GT/prediction overlays")
    shared.add_argument("--format", choices=("json", "csv"), default="json")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="coloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[shared], help="co-localize a dataset and evaluate")
    run.add_argument("--provenance", default=None, help="map provenance tag (default: from manifests)")
    ev = sub.add_parser("eval", parents=[shared], help="CorLoc of a predictions file")
    ev.add_argument("--predictions", type=Path, required=True)
    sub.add_parser("baseline", parents=[shared], help="generate classical saliency/co-saliency maps")
    sy = sub.add_parser("synth", parents=[shared], help="write a synthetic dataset to --out")
    sy.add_argument("--n", type=int, default=20, help="images per class")
    sy.add_argument("--size", type=int, default=128)
    sy.add_argument("--classes", type=int, default=3)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("run", "eval", "baseline") and args.root is None:
        parser.error(f"{args.command} needs --root")
    try:
        if args.command == "run":
            cfg = RunConfig(
                root=args.root,
                out=args.out,
                solver=_solver_config(args),
                jobs=args.jobs,
                fmt=args.format,
                render=args.render,
                provenance=args.provenance,
                iou_threshold=args.iou_threshold,
            )
            cfg.out.mkdir(parents=True, exist_ok=True)
            return cmd_run(cfg)
        if args.command == "eval":
            report = cmd_eval(args.predictions, args.root, args.iou_threshold, args.out, args.format)
            print(harness.format_table(report))
            return 0
        if args.command == "baseline":
            return cmd_baseline(args.root)
        synth.make_dataset(args.out, args.n, args.size, args.seed, args.classes)
        return 0
    except (ColocError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
