"""Batch command line: ``rdk score | rank | augment | fuse``.

Failures print a JSON error record to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone


from . import __version__
from .core import (
    TRACK_DEFAULTS,
    DepthMap,
    DisparityMap,
    EmptyCorpusError,
    InvalidInputError,
    RdkError,
    align_pair,
    disparity_to_depth,
    make_rng,
    sub_seed,
)
from .ensemble import (
    GatedParams,
    RoutingTable,
    gated_fuse,
    median_fuse,
    read_label_csv,
    routed_fuse,
    weighted_fuse,
)
from .io import DEPTH_EXTENSIONS, read_map_file, read_rgb_png, write_map_file, write_rgb_png
from .metrics import (
    METRIC_FIELDS,
    RANK_KEYS,
    LeaderboardEntry,
    MetricReport,
    aggregate,
    aggregate_pooled,
    rank_track,
    report_from_pair,
)
from .pipeline import PipelineConfig, RunManifest

EXIT_OK = 0
EXIT_ERROR = 2


class MissingFileError(RdkError, FileNotFoundError):
    pass


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("RDK_JOBS", "1")))
    except ValueError:
        return 1


def _map(fn, items, jobs: int):
    """Ordered map over items using a bounded thread pool."""
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _index_maps(directory: str) -> dict:
    """stem -> path for every supported map file in ``directory``."""
    if not os.path.isdir(directory):
        raise MissingFileError(f"not a directory: {directory}")
    out = {}
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in DEPTH_EXTENSIONS and stem not in out:
            out[stem] = os.path.join(directory, name)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- score


def load_depth(path: str, divisor: float) -> DepthMap:
    return DepthMap.from_array(read_map_file(path, divisor))


def load_prediction(path: str, kind: str, divisor: float, min_depth: float, max_depth: float) -> DepthMap:
    arr = read_map_file(path, divisor)
    if kind == "disparity":
        return disparity_to_depth(DisparityMap(arr), min_depth, max_depth)
    return DepthMap.from_array(arr)


def cmd_score(
    pred_dir: str,
    gt_dir: str,
    track: int = 1,
    *,
    median_scale: bool | None = None,
    min_depth: float | None = None,
    max_depth: float | None = None,
    divisor: float | None = None,
    pred_kind: str = "depth",
    aggregation: str = "mean",
    strict: bool = False,
    jobs: int = 1,
) -> dict:
    """Score every ground-truth map against the prediction with the same stem."""
    defaults = TRACK_DEFAULTS[track]
    assumptions = []
    if median_scale is None:
        median_scale = defaults.median_scale
        assumptions.append(f"median_scale={median_scale} is a track-{track} default")
    if min_depth is None:
        min_depth = defaults.min_depth
        assumptions.append(f"min_depth={min_depth} is a track-{track} default")
    if max_depth is None:
        max_depth = defaults.max_depth
        assumptions.append(f"max_depth={max_depth} is a track-{track} default")
    if divisor is None:
        divisor = defaults.divisor
    if pred_kind not in ("depth", "disparity"):
        raise InvalidInputError(f"unknown prediction kind {pred_kind!r}")

    gts = _index_maps(gt_dir)
    preds = _index_maps(pred_dir)
    if not gts:
        raise EmptyCorpusError(f"no ground-truth maps in {gt_dir}")
    missing = sorted(set(gts) - set(preds))
    if missing and strict:
        raise MissingFileError(f"missing predictions for: {', '.join(missing)}")
    names = sorted(set(gts) & set(preds))

    def score_one(name):
        try:
            gt = load_depth(gts[name], divisor)
            pred = load_prediction(preds[name], pred_kind, divisor, min_depth, max_depth)
            pair = align_pair(gt, pred, median_scale, min_depth, max_depth)
            return name, pair, None
        except RdkError as exc:
            if strict:
                raise
            return name, None, f"{type(exc).__name__}: {exc}"

    results = _map(score_one, names, jobs)
    failed = {n: err for n, _, err in results if err}
    pairs = {n: pair for n, pair, _ in results if pair is not None}
    if not pairs:
        raise EmptyCorpusError("no image could be scored")
    per_image = {n: report_from_pair(p) for n, p in pairs.items()}
    if aggregation == "mean":
        agg = aggregate(per_image.values())
    elif aggregation == "pooled":
        agg = aggregate_pooled(pairs.values())
    else:
        raise InvalidInputError(f"unknown aggregation {aggregation!r}")
    metric, _ = RANK_KEYS[track]
    return {
        "meta": {
            "tool_version": __version__,
            "track": track,
            "ranking_metric": metric,
            "median_scale": median_scale,
            "min_depth": min_depth,
            "max_depth": max_depth,
            "divisor": divisor,
            "pred_kind": pred_kind,
            "aggregation": "mean_of_images" if aggregation == "mean" else "pooled_pixels",
            "assumptions": assumptions,
        },
        "per_image": {n: r.to_dict() for n, r in sorted(per_image.items())},
        "aggregate": agg.to_dict(),
        "missing": missing,
        "unmatched_predictions": sorted(set(preds) - set(gts)),
        "failed": failed,
    }


# ---------------------------------------------------------------- rank


def read_score_csv(path: str) -> list[LeaderboardEntry]:
    entries = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            name = (row.get("name") or "").strip()
            values = {}
            for key in METRIC_FIELDS:
                raw = (row.get(key) or "").strip()
                values[key] = float(raw) if raw else math.nan
            values["n_pixels"] = int(row.get("n_pixels") or 0)
            entries.append(LeaderboardEntry(name, MetricReport(**values)))
    return entries


def read_report_entries(paths) -> list[LeaderboardEntry]:
    entries = []
    for path in paths:
        with open(path) as fh:
            data = json.load(fh)
        name = data.get("name") or os.path.splitext(os.path.basename(path))[0]
        report = data.get("aggregate", data)
        entries.append(LeaderboardEntry(name, MetricReport.from_dict(report)))
    return entries


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def cmd_rank(inputs, track: int = 1) -> str:
    """Leaderboard CSV ranked by the track's metric; ties annotated, not broken."""
    inputs = list(inputs)
    if not inputs:
        raise EmptyCorpusError("no inputs to rank")
    if len(inputs) == 1 and inputs[0].lower().endswith(".csv"):
        entries = read_score_csv(inputs[0])
    else:
        entries = read_report_entries(inputs)
    ranked = rank_track(entries, track)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "name", "key", "tie_group", "tied", *METRIC_FIELDS])
    for r in ranked:
        rep = r.entry.report
        writer.writerow(
            [r.rank, r.entry.name, _fmt(r.key), r.tie_group, int(r.tied)]
            + [_fmt(getattr(rep, f)) for f in METRIC_FIELDS]
        )
    return buf.getvalue()


# ---------------------------------------------------------------- augment


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def cmd_augment(
    in_dir: str, out_dir: str, pipeline: PipelineConfig, seed: int | None = None, jobs: int = 1
) -> RunManifest:
    """Run every PNG in ``in_dir`` through the pipeline; writes a manifest.json."""
    started = _now()
    if not os.path.isdir(in_dir):
        raise MissingFileError(f"not a directory: {in_dir}")
    master = pipeline.master_seed if seed is None else int(seed)
    if master != pipeline.master_seed:
        pipeline = PipelineConfig(pipeline.stages, master, pipeline.base_dir)
    names = sorted(n for n in os.listdir(in_dir) if n.lower().endswith(".png"))
    if not names:
        raise EmptyCorpusError(f"no PNG images in {in_dir}")
    os.makedirs(out_dir, exist_ok=True)

    def run(name):
        src = os.path.join(in_dir, name)
        dst = os.path.join(out_dir, name)
        seed_i = sub_seed(master, name)
        if not pipeline.stages:
            shutil.copyfile(src, dst)
        else:
            image = read_rgb_png(src)
            write_rgb_png(pipeline.apply(image, make_rng(seed_i), name), dst)
        return name, {"sub_seed": seed_i, "sha256": _sha256(dst)}

    files = dict(_map(run, names, jobs))
    manifest = RunManifest(pipeline.hash, master, files, started, _now())
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------- fuse


def cmd_fuse(
    input_dirs,
    out_dir: str,
    strategy: str,
    *,
    weights=None,
    gated: GatedParams | None = None,
    per_image_gate: bool = False,
    routing: RoutingTable | None = None,
    labels: dict | None = None,
    divisor: float = 256.0,
    out_format: str = "rdk",
    strict: bool = False,
    jobs: int = 1,
) -> dict:
    """Fuse same-named depth maps across prediction directories."""
    input_dirs = list(input_dirs)
    if not input_dirs:
        raise InvalidInputError("no input directories")
    if strategy == "gated" and len(input_dirs) != 2:
        raise InvalidInputError("gated fusion takes exactly two input directories")
    if strategy == "weighted" and weights is None:
        raise InvalidInputError("weighted fusion needs --weights")
    if strategy == "routed" and (routing is None or labels is None):
        raise InvalidInputError("routed fusion needs --routing and --labels")
    if strategy not in ("gated", "median", "weighted", "routed"):
        raise InvalidInputError(f"unknown strategy {strategy!r}")
    indexes = [_index_maps(d) for d in input_dirs]
    all_names = set().union(*indexes)
    common = sorted(set.intersection(*(set(i) for i in indexes)))
    missing = sorted(all_names - set(common))
    if missing and strict:
        raise MissingFileError(f"files absent from some inputs: {', '.join(missing)}")
    if not common:
        raise EmptyCorpusError("no file is present in every input directory")
    os.makedirs(out_dir, exist_ok=True)

    def fuse_one(name):
        maps = [load_depth(idx[name], divisor) for idx in indexes]
        if strategy == "gated":
            out = gated_fuse(maps[0], maps[1], gated, per_image=per_image_gate)
        elif strategy == "median":
            out = median_fuse(maps)
        elif strategy == "weighted":
            out = weighted_fuse(maps, weights)
        else:
            if name not in labels:
                raise InvalidInputError(f"no class label for {name}")
            out = routed_fuse(maps, labels[name], routing)
        path = os.path.join(out_dir, f"{name}.{out_format}")
        write_map_file(out, path, divisor)
        return name

    written = _map(fuse_one, common, jobs)
    return {"strategy": strategy, "written": written, "missing": missing}


# ---------------------------------------------------------------- argparse


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--jobs", type=int, default=_default_jobs(), help="worker threads (env RDK_JOBS)")
    p.add_argument("--strict", action="store_true", help="treat missing counterpart files as fatal")
    p.add_argument("--divisor", type=float, default=None, help="16-bit PNG depth divisor")
    p.add_argument("--min-depth", type=float, default=None)
    p.add_argument("--max-depth", type=float, default=None)
    p.add_argument(
        "--median-scale", action=argparse.BooleanOptionalAction, default=None,
        help="scale predictions by median(gt)/median(pred)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rdk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score predictions against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--track", type=int, choices=(1, 2), default=1)
    p.add_argument("--pred-kind", choices=("depth", "disparity"), default="depth")
    p.add_argument("--aggregation", choices=("mean", "pooled"), default="mean")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    _add_common(p)

    p = sub.add_parser("rank", help="rank scored submissions")
    p.add_argument("inputs", nargs="+", help="one CSV of scores, or report JSON files")
    p.add_argument("--track", type=int, choices=(1, 2), default=1)
    p.add_argument("--out", help="write the leaderboard CSV here instead of stdout")
    _add_common(p)

    p = sub.add_parser("augment", help="run an augmentation pipeline over a corpus")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--pipeline", required=True, help="pipeline config JSON")
    _add_common(p)

    p = sub.add_parser("fuse", help="fuse predictions from several models")
    p.add_argument("input_dirs", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--strategy", choices=("gated", "median", "weighted", "routed"), required=True)
    p.add_argument("--weights", help="comma-separated convex weights")
    p.add_argument("--alpha", type=float, default=2.0 / 3.0)
    p.add_argument("--beta", type=float, default=None, help="defaults to 1 - alpha")
    p.add_argument("--eta", type=float, default=0.45)
    p.add_argument("--per-image-gate", action="store_true")
    p.add_argument("--routing", help="routing table JSON (label -> weights)")
    p.add_argument("--labels", help="CSV of filename,class")
    p.add_argument("--format", dest="out_format", choices=("rdk", "png", "npy"), default="rdk")
    _add_common(p)
    return parser


def _write_text(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "score":
            report = cmd_score(
                args.pred_dir, args.gt_dir, args.track,
                median_scale=args.median_scale, min_depth=args.min_depth,
                max_depth=args.max_depth, divisor=args.divisor, pred_kind=args.pred_kind,
                aggregation=args.aggregation, strict=args.strict, jobs=args.jobs,
            )
            _write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
        elif args.command == "rank":
            _write_text(cmd_rank(args.inputs, args.track), args.out)
        elif args.command == "augment":
            manifest = cmd_augment(
                args.in_dir, args.out_dir, PipelineConfig.load(args.pipeline), args.seed, args.jobs
            )
            print(json.dumps({"config_hash": manifest.config_hash,
                              "corpus_digest": manifest.corpus_digest,
                              "files": len(manifest.files)}))
        elif args.command == "fuse":
            weights = None
            if args.weights:
                weights = [float(w) for w in args.weights.split(",")]
            beta = 1.0 - args.alpha if args.beta is None else args.beta
            result = cmd_fuse(
                args.input_dirs, args.out_dir, args.strategy, weights=weights,
                gated=GatedParams(args.alpha, beta, args.eta),
                per_image_gate=args.per_image_gate,
                routing=RoutingTable.from_json(args.routing) if args.routing else None,
                labels=read_label_csv(args.labels) if args.labels else None,
                divisor=args.divisor or 256.0, out_format=args.out_format,
                strict=args.strict, jobs=args.jobs,
            )
            print(json.dumps(result, sort_keys=True))
    except (RdkError, OSError, json.JSONDecodeError, KeyError) as exc:
        record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stderr.write(json.dumps(record) + "\n")
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
