"""Command-line interface: ``isacough {detect,evaluate,sweep,synth,summarize}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .audio_io import AudioError, load_audio, resample, save_audio
from .config import PipelineConfig, load_config
from .detection import detect, read_detections, write_detections
from .evaluation import load_annotations, match
from .summarizer import summarize
from .synthesis import SceneSpec, write_scene

logger = logging.getLogger("isacough")


class CliError(Exception):
    pass


# -- configuration -----------------------------------------------------------


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    cfg = cfg.updated(
        threshold_a=getattr(args, "threshold_a", None),
        rank=getattr(args, "rank", None),
    )
    restarts = getattr(args, "ica_restarts", None)
    if restarts:
        cfg = replace(cfg, ica=replace(cfg.ica, restarts=restarts, seed=getattr(args, "seed", None)))
    return cfg


def parse_a_range(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0 or parts[2] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad a-range {text!r}; expected start:step:stop")
        start, step, stop = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad a-range {text!r}") from None


def _candidates(args, cfg: PipelineConfig) -> list[int]:
    if getattr(args, "candidate", None):
        bad = [c for c in args.candidate if not 1 <= c <= cfg.n_candidates]
        if bad:
            raise CliError(f"--candidate must lie in 1..{cfg.n_candidates}, got {bad}")
        return sorted(set(args.candidate))
    return list(range(1, cfg.n_candidates + 1))


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- detect ------------------------------------------------------------------


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    src = Path(args.input)
    buf = resample(load_audio(src), cfg.sample_rate)
    result = detect(buf, cfg)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = src.stem
    for rank in _candidates(args, cfg):
        det = result.detections[rank - 1]
        header = {
            "source": str(src),
            "duration_s": result.duration_s,
            "candidate": rank,
            "threshold": det.threshold_used,
            "a": det.a,
            "config": cfg.to_dict(),
        }
        write_detections(out / f"{stem}.c{rank}.jsonl", [det], header)
        if not args.no_summary:
            audio, manifest = summarize(buf, det, cfg.clip_length_s, src)
            if len(audio):
                save_audio(audio, out / f"{stem}.c{rank}.summary.wav")
            manifest_dict = manifest.to_dict()
            manifest_dict["config"] = cfg.to_dict()
            _dump(manifest_dict, out / f"{stem}.c{rank}.summary.json")
        print(f"c{rank}: {len(det)} events (threshold {det.threshold_used:.4g})")
    _dump(result.diagnostics(), out / f"{stem}.diagnostics.json")
    return 0


# -- evaluate ----------------------------------------------------------------


def format_table(rows: list[dict], with_scene: bool = False) -> str:
    head = ("#  " if with_scene else "") + "c   r_TP (%)  R_FP (min^-1)  T (min)"
    lines = [head, "-" * len(head)]
    for r in rows:
        scene = f"{r.get('scene', ''):<3}" if with_scene else ""
        cand = r["candidate"] if r["candidate"] is not None else ""
        r_tp = "" if r["r_tp"] is None else f"{100 * r['r_tp']:.2f}"
        lines.append(
            f"{scene}{cand!s:<3} {r_tp:>8}  {r['r_fp_per_min']:>13.2f}  {r['summary_min']:>7.2f}"
        )
    return "\n".join(lines)


def evaluate_groups(groups, annotations, duration_s, cfg: PipelineConfig, det_window=None):
    rows = []
    for rank in sorted(groups):
        rep = match(groups[rank], annotations, cfg.rho_dtc, cfg.ref_window_s, duration_s,
                    det_window=det_window)
        rows.append({"candidate": rank, **rep.to_dict(cfg.clip_length_s)})
    return rows


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    header, groups = read_detections(args.detections)
    annotations = load_annotations(args.annotations)
    duration = args.duration or header.get("duration_s")
    if duration is None:
        if not annotations.items:
            raise CliError("signal duration unknown; pass --duration")
        duration = max(a.offset_s for a in annotations.items)
        logger.warning("no duration in detections header; using last annotation offset %.2f s", duration)
    if not groups:
        groups = {int(header.get("candidate", 1)): []}
    det_window = cfg.clip_length_s if args.clip_window_scoring else None
    rows = evaluate_groups(groups, annotations, duration, cfg, det_window)
    report = {"detections": str(args.detections), "annotations": str(args.annotations),
              "reports": rows, "config": cfg.to_dict()}
    print(format_table(rows))
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _dump(report, out / "report.json")
    return 0


# -- sweep -------------------------------------------------------------------


def find_scenes(scene_dir) -> list[tuple[Path, Path]]:
    scene_dir = Path(scene_dir)
    if not scene_dir.is_dir():
        raise CliError(f"scene directory {scene_dir} does not exist")
    pairs = []
    for wav in sorted(scene_dir.glob("*.wav")):
        csv_path = wav.with_suffix(".csv")
        if csv_path.is_file():
            pairs.append((wav, csv_path))
        else:
            logger.warning("skipping %s: no matching annotation CSV", wav.name)
    return pairs


def run_scene(wav: Path, csv_path: Path, cfg: PipelineConfig, a_values=(), det_window=None) -> dict:
    """Detect and evaluate one scene at the configured a and each extra a."""
    buf = resample(load_audio(wav), cfg.sample_rate)
    annotations = load_annotations(csv_path, buf.duration)
    result = detect(buf, cfg)

    def rows_for(dets, a):
        out = []
        for det in dets:
            rep = match(det, annotations, cfg.rho_dtc, cfg.ref_window_s, buf.duration,
                        det_window=det_window)
            out.append({"scene": wav.stem, "candidate": det.candidate_rank, "a": a,
                        **rep.to_dict(cfg.clip_length_s)})
        return out

    rows = rows_for(result.detections, cfg.threshold_a)
    sweep_rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for a in a_values:
            sweep_rows += rows_for(result.repick(a), a)
    return {"scene": wav.stem, "rows": rows, "threshold_sweep": sweep_rows,
            "kurtosis": result.kurtosis, "ica_converged": result.converged}


def _mean_row(rows: list[dict], scene="mean", candidate=None) -> dict:
    r_tp = [r["r_tp"] for r in rows if r["r_tp"] is not None]
    return {
        "scene": scene,
        "candidate": candidate,
        "a": rows[0]["a"] if rows else None,
        "r_tp": float(np.mean(r_tp)) if r_tp else None,
        "r_fp_per_min": float(np.mean([r["r_fp_per_min"] for r in rows])),
        "summary_min": float(np.mean([r["summary_min"] for r in rows])),
    }


def best_case(rows: list[dict]) -> list[dict]:
    """Per scene, the candidate with highest r_TP, then lowest R_FP, then lowest rank."""
    by_scene: dict[str, list[dict]] = {}
    for r in rows:
        by_scene.setdefault(r["scene"], []).append(r)
    best = []
    for scene, group in by_scene.items():
        best.append(min(group, key=lambda r: (-(r["r_tp"] or 0.0), r["r_fp_per_min"], r["candidate"])))
    return best


def summarize_sweep(results: list[dict], n_candidates: int) -> dict:
    rows = [r for res in results for r in res["rows"]]
    means = [
        _mean_row([r for r in rows if r["candidate"] == c], candidate=c)
        for c in range(1, n_candidates + 1)
        if any(r["candidate"] == c for r in rows)
    ]
    best = best_case(rows)
    return {"rows": rows, "candidate_means": means, "best_case": best,
            "best_case_mean": _mean_row(best) if best else None}


_CSV_FIELDS = ["scene", "candidate", "a", "n_tp", "n_fp", "n_fn", "n_annotations",
               "n_detections", "r_tp", "r_fp_per_min", "summary_min"]


def _write_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=_CSV_FIELDS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in _CSV_FIELDS})


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    scenes = find_scenes(args.scene_dir)
    if not scenes:
        raise CliError(f"no (wav, csv) scene pairs in {args.scene_dir}")
    a_values = args.a_range or []
    det_window = cfg.clip_length_s if args.clip_window_scoring else None

    results, failures = [], []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [(w, pool.submit(run_scene, w, c, cfg, a_values, det_window)) for w, c in scenes]
            for wav, fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:  # keep sweeping past a bad scene
                    failures.append((wav, exc))
    else:
        for wav, csv_path in scenes:
            try:
                results.append(run_scene(wav, csv_path, cfg, a_values, det_window))
            except Exception as exc:
                failures.append((wav, exc))
    for wav, exc in failures:
        print(f"error: scene {wav.name} failed: {exc}", file=sys.stderr)
    if not results:
        return 1

    summary = summarize_sweep(results, cfg.n_candidates)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(summary["rows"] + summary["candidate_means"], out / "sweep.csv")
    _write_csv(summary["best_case"] + [summary["best_case_mean"]], out / "best_case.csv")
    sweep_rows = [r for res in results for r in res["threshold_sweep"]]
    if a_values:
        _write_csv(sweep_rows, out / "threshold_sweep.csv")
    _dump({**summary, "threshold_sweep": sweep_rows,
           "failures": [{"scene": w.name, "error": str(e)} for w, e in failures],
           "config": cfg.to_dict()}, out / "sweep.json")

    print("Per-candidate means")
    print(format_table(summary["candidate_means"]))
    print("\nBest case per scene")
    print(format_table(summary["best_case"] + [{**summary["best_case_mean"], "scene": "mean"}],
                       with_scene=True))
    return 0


# -- synth / summarize -------------------------------------------------------


def cmd_synth(args) -> int:
    spec = SceneSpec.from_file(args.spec) if args.spec else SceneSpec()
    if args.seed is not None:
        spec = replace(spec, rng_seed=args.seed)
    if args.use_synth_bursts:
        spec = replace(spec, use_synth_bursts=True)
    cfg = resolve_config(args)
    out = Path(args.output_dir)
    for i in range(args.count):
        scene = replace(spec, rng_seed=spec.rng_seed + i)
        name = "scene" if args.count == 1 else f"scene_{i:02d}"
        wav, csv_path, echo = write_scene(scene, out, name)
        echo_data = json.loads(echo.read_text(encoding="utf-8"))
        echo_data["config"] = cfg.to_dict()
        _dump(echo_data, echo)
        print(f"wrote {wav}")
    return 0


def cmd_summarize(args) -> int:
    cfg = resolve_config(args)
    src = Path(args.input)
    buf = resample(load_audio(src), cfg.sample_rate)
    _, groups = read_detections(args.detections)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ranks = [c for c in _candidates(args, cfg) if c in groups] if args.candidate else sorted(groups)
    for rank in ranks:
        audio, manifest = summarize(buf, groups[rank], cfg.clip_length_s, src)
        if len(audio):
            save_audio(audio, out / f"{src.stem}.c{rank}.summary.wav")
        manifest_dict = manifest.to_dict()
        manifest_dict["config"] = cfg.to_dict()
        _dump(manifest_dict, out / f"{src.stem}.c{rank}.summary.json")
        print(f"c{rank}: {len(manifest.entries)} clips, {manifest.total_duration_s:.1f} s")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isacough", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (TOML or JSON)")
    common.add_argument("--threshold-a", type=float, help="peak threshold multiplier a")
    common.add_argument("--rank", type=int, help="number of singular triplets kept")
    common.add_argument("--ica-restarts", type=int, help="extra random-start ICA runs (uses --seed)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--output-dir", "-o", default=".", help="where outputs are written")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="detect candidate cough events")
    p.add_argument("input")
    p.add_argument("--candidate", type=int, action="append", help="only write this candidate (repeatable)")
    p.add_argument("--no-summary", action="store_true", help="skip summary WAV/manifest output")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", parents=[common], help="score detections against annotations")
    p.add_argument("detections")
    p.add_argument("annotations")
    p.add_argument("--duration", type=float, help="signal duration in seconds")
    p.add_argument("--clip-window-scoring", action="store_true",
                   help="use the summary clip length as the detection window")
    p.set_defaults(func=cmd_evaluate, output_dir=None)

    p = sub.add_parser("sweep", parents=[common], help="detect + evaluate a directory of scenes")
    p.add_argument("scene_dir")
    p.add_argument("--a-range", type=parse_a_range, help="extra thresholds, e.g. 4:0.5:8")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--clip-window-scoring", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", parents=[common], help="synthesize annotated test scenes")
    p.add_argument("spec", nargs="?", help="scene spec file (TOML or JSON)")
    p.add_argument("--use-synth-bursts", action="store_true",
                   help="use built-in synthetic sources instead of clip libraries")
    p.add_argument("--count", type=int, default=1, help="number of scenes (seeds seed..seed+count-1)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("summarize", parents=[common], help="build summaries from a detections file")
    p.add_argument("input")
    p.add_argument("detections")
    p.add_argument("--candidate", type=int, action="append")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CliError, AudioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
