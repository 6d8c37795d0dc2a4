"""Command line pipeline: synth, label, score/rank, eval, export-field."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from . import __version__
from .config import ConfigError, EngineConfig, load_config
from .evaluation import UndefinedMetric, auc, average_precision, labeled, precision_at_k, ranked
from .grid import write_field_csv
from .risk import RiskModel, aggregate, check_aggregator, frame_fields, scene_risk
from .scenario import (SYNTH_KINDS, Scene, TrackParseError, build_scenes, mixed_pack, natural_key,
                       parse_tracks, read_labels_csv, synth_pack, write_labels_csv, write_tracks_csv)
from .ssm import METRICS, frame_records, write_ssm_csv

log = logging.getLogger("riskscreen")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3, 4
RANKING_COLUMNS = ("rank", "scene_id", "score", "label") + METRICS


class InputError(Exception):
    """Missing or malformed input file."""


@contextmanager
def atomic_outputs(*paths: Path) -> Iterator[list[io.TextIOBase]]:
    """Open temp files next to each target; rename on success, delete on failure."""
    handles, temps = [], []
    try:
        for p in paths:
            p.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=p.parent)
            temps.append(tmp)
            handles.append(os.fdopen(fd, "w", newline=""))
        yield handles
        for h in handles:
            h.close()
        for tmp, p in zip(temps, paths):
            os.replace(tmp, p)
    except BaseException:
        for h in handles:
            h.close()
        for tmp in temps:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


# --- synth ------------------------------------------------------------------

def cmd_synth(cfg: EngineConfig, args) -> int:
    w = cfg.window
    seed = cfg.seed if args.seed is None else args.seed
    if args.hazardous is not None or args.safe is not None:
        scenes = mixed_pack(args.hazardous or 0, args.safe or 0, seed, w.T, w.F, w.dt)
    else:
        kinds = args.kinds.split(",") if args.kinds else list(SYNTH_KINDS)
        scenes = synth_pack(kinds, args.count, seed, w.T, w.F, w.dt)
    out = Path(args.out or cfg.output_dir)
    with atomic_outputs(out / "tracks.csv", out / "labels.csv") as (tracks_fh, labels_fh):
        write_tracks_csv(scenes, tracks_fh)
        write_labels_csv(scenes, labels_fh)
    log.info("wrote %d scenes to %s", len(scenes), out)
    return EXIT_OK


# --- label ------------------------------------------------------------------

def _label_scene(job: tuple[Scene, RiskModel, float]) -> tuple[str, str]:
    scene, model, pet_cell = job
    risk_lines = []
    for series in scene_risk(scene, model):
        for rec in series.records:
            risk_lines.append(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    buf = io.StringIO()
    write_ssm_csv(frame_records(scene, pet_cell), buf, header=False)
    return "".join(risk_lines), buf.getvalue()


def load_scenes(path: str, cfg: EngineConfig) -> list[Scene]:
    try:
        table = parse_tracks(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except TrackParseError as exc:
        raise InputError(f"{path}: {exc}") from None
    w = cfg.window
    return build_scenes(table, w.T, w.F, w.stride, cfg.drf.wheelbase)


def label_scenes(scenes: Sequence[Scene], cfg: EngineConfig, workers: int) -> Iterator[tuple[str, str]]:
    """Per-scene (risk JSONL, SSM CSV rows), in input order whatever the worker count."""
    jobs = [(s, cfg.model, cfg.ssm.pet_cell) for s in scenes]
    if workers <= 1 or len(jobs) <= 1:
        yield from map(_label_scene, jobs)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_label_scene, jobs, chunksize=max(1, len(jobs) // (4 * workers)))


def cmd_label(cfg: EngineConfig, args) -> int:
    scenes = load_scenes(args.tracks, cfg)
    out = Path(args.out or cfg.output_dir)
    workers = args.workers or cfg.workers
    with atomic_outputs(out / "risk.jsonl", out / "ssm.csv") as (risk_fh, ssm_fh):
        write_ssm_csv([], ssm_fh)
        for risk_text, ssm_text in label_scenes(scenes, cfg, workers):
            risk_fh.write(risk_text)
            ssm_fh.write(ssm_text)
    log.info("labeled %d scenes into %s", len(scenes), out)
    return EXIT_OK


# --- score / rank -----------------------------------------------------------

def read_risk_jsonl(path: Path) -> dict[str, dict[str, list[float]]]:
    """scene_id -> agent_id -> totals ordered by frame."""
    series: dict[str, dict[str, list[tuple[int, float]]]] = defaultdict(lambda: defaultdict(list))
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                series[rec["scene_id"]][rec["agent_id"]].append((int(rec["frame"]), float(rec["total"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{n}: bad risk record ({exc})") from None
    return {sid: {a: [v for _, v in sorted(vals)] for a, vals in agents.items()} for sid, agents in series.items()}


def read_ssm_scores(path: Path) -> dict[str, dict[str, float]]:
    """Scene-level maxima of each SSM column."""
    scores: dict[str, dict[str, float]] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        for row in reader:
            try:
                cur = scores.setdefault(row["scene_id"], dict.fromkeys(METRICS, 0.0))
                for m in METRICS:
                    cur[m] = max(cur[m], float(row[m]))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{reader.line_num}: bad SSM row ({exc})") from None
    return scores


def _label_for(labels: dict[str, int], scene_id: str) -> int | None:
    if scene_id in labels:
        return labels[scene_id]
    case = scene_id.rsplit("/", 1)[0]
    return labels.get(case)


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_score(cfg: EngineConfig, args) -> int:
    aggregator = args.aggregator or cfg.aggregator
    try:
        check_aggregator(aggregator)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    risk_path = Path(args.risk)
    series = read_risk_jsonl(risk_path)
    ssm_path = Path(args.ssm) if args.ssm else risk_path.with_name("ssm.csv")
    ssm = read_ssm_scores(ssm_path) if (args.ssm or ssm_path.exists()) else {}
    labels = _read_labels(args.labels) if args.labels else {}

    rows = []
    for sid, agents in series.items():
        ordered = [agents[a] for a in sorted(agents, key=natural_key)]
        score = aggregate(ordered, aggregator)
        if not math.isfinite(score):
            raise ValueError(f"scene {sid} has a non-finite score")
        rows.append((sid, score, _label_for(labels, sid), ssm.get(sid, dict.fromkeys(METRICS, 0.0))))
    by_rank = sorted(rows, key=lambda r: (-r[1], r[0]))
    rank_of = {r[0]: i for i, r in enumerate(by_rank, start=1)}
    out_rows = by_rank if args.sort else sorted(rows, key=lambda r: r[0])

    out = Path(args.out) if args.out else risk_path.with_name("ranking.csv")
    with atomic_outputs(out) as (fh,):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANKING_COLUMNS)
        for sid, score, label, base in out_rows:
            w.writerow([rank_of[sid], sid, _fmt(score), "" if label is None else label]
                       + [_fmt(base[m]) for m in METRICS])
    log.info("scored %d scenes into %s", len(rows), out)
    return EXIT_OK


# --- eval -------------------------------------------------------------------

def _read_labels(path: str) -> dict[str, int]:
    try:
        return read_labels_csv(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: bad labels file ({exc})") from None


def evaluate_ranking(rows: Sequence[dict], k_values: Sequence[int]) -> dict:
    """Report over a ranking table whose rows carry scene_id, label and score columns."""
    ids = [r["scene_id"] for r in rows]
    y = [int(r["label"]) for r in rows]
    n_pos = sum(y)
    report: dict = {"n": len(rows), "n_pos": n_pos, "n_neg": len(rows) - n_pos,
                    "k_values": list(k_values), "methods": {}, "warnings": []}
    columns = ["score"] + [m for m in METRICS if rows and m in rows[0]]
    for col in columns:
        name = "risk" if col == "score" else col
        scores = labeled(ids, [float(r[col]) for r in rows], y)
        entry: dict = {}
        for metric, fn in (("auc", auc), ("ap", average_precision)):
            try:
                entry[metric] = fn(scores)
            except UndefinedMetric as exc:
                entry[metric] = None
                msg = f"{name}: {metric} undefined ({exc})"
                if msg not in report["warnings"]:
                    report["warnings"].append(msg)
        for k in k_values:
            if 1 <= k <= len(scores):
                entry[f"p@{k}"] = precision_at_k(scores, k)
            else:
                entry[f"p@{k}"] = None
                msg = f"p@{k} undefined: only {len(scores)} scenes"
                if msg not in report["warnings"]:
                    report["warnings"].append(msg)
        report["methods"][name] = entry
    return report


def cmd_eval(cfg: EngineConfig, args) -> int:
    path = Path(args.ranking)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    labels = _read_labels(args.labels) if args.labels else {}
    for r in rows:
        if labels:
            lab = _label_for(labels, r["scene_id"])
            r["label"] = "" if lab is None else str(lab)
        if (r.get("label") or "").strip() == "":
            raise InputError(f"no label for scene {r['scene_id']}")
    k_values = [int(k) for k in args.k.split(",")] if args.k else list(cfg.eval.k_values)
    try:
        report = evaluate_ranking(rows, k_values)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: bad ranking row ({exc})") from None
    for w in report["warnings"]:
        log.warning(w)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with atomic_outputs(Path(args.out)) as (fh,):
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- export-field -----------------------------------------------------------

def cmd_export_field(cfg: EngineConfig, args) -> int:
    scenes = {s.scene_id: s for s in load_scenes(args.tracks, cfg)}
    scene = scenes.get(args.scene)
    if scene is None:
        raise InputError(f"unknown scene {args.scene!r}")
    if not 1 <= args.frame <= scene.F:
        raise InputError(f"frame {args.frame} outside 1..{scene.F}")
    frame = scene.future[args.frame - 1]
    try:
        ego = frame.get(args.agent)
    except KeyError:
        raise InputError(f"unknown agent {args.agent!r} in scene {args.scene!r}") from None
    obstacles = [s for s in frame.states if s.agent_id != ego.agent_id]
    drf, cost, fused = frame_fields(ego, obstacles, cfg.model)
    out = Path(args.out or cfg.output_dir)
    with atomic_outputs(out / "drf.csv", out / "cost.csv", out / "fused.csv") as handles:
        for f, fh in zip((drf, cost, fused.field), handles):
            write_field_csv(f, fh)
    log.info("exported fields for %s/%s frame %d (total %.6g)", args.scene, args.agent, args.frame, fused.total)
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskscreen", description="Risk-field labeling and scenario screening.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON config (default: $RISK_ENGINE_CONFIG or built-in defaults)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. cost.sigma_c=1.5 (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a labeled synthetic pack")
    s.add_argument("--kinds", help=f"comma-separated subset of {','.join(SYNTH_KINDS)}")
    s.add_argument("--count", type=int, default=3, help="scenes per kind")
    s.add_argument("--seed", type=int)
    s.add_argument("--hazardous", type=int, help="mixed pack: number of label-1 scenes")
    s.add_argument("--safe", type=int, help="mixed pack: number of label-0 scenes")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("label", help="compute risk records and SSM baselines")
    s.add_argument("tracks")
    s.add_argument("--out", help="output directory")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_label)

    for name in ("score", "rank"):
        s = sub.add_parser(name, help="scenario scores" + (" sorted by risk" if name == "rank" else ""))
        s.add_argument("risk", help="risk.jsonl from the label step")
        s.add_argument("--ssm", help="ssm.csv (default: next to risk.jsonl)")
        s.add_argument("--labels", help="labels CSV to attach")
        s.add_argument("--aggregator")
        s.add_argument("--out", help="ranking CSV (default: ranking.csv next to risk.jsonl)")
        if name == "score":
            s.add_argument("--sort", action="store_true", help="order rows by rank")
        s.set_defaults(func=cmd_score, sort=name == "rank")

    s = sub.add_parser("eval", help="AUC, AP and P@K for risk and each baseline")
    s.add_argument("ranking")
    s.add_argument("--labels")
    s.add_argument("--k", help="comma-separated K values")
    s.add_argument("--out", help="report JSON (default: stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("export-field", help="write DRF, cost and fused grids for one agent-frame")
    s.add_argument("tracks")
    s.add_argument("--scene", required=True)
    s.add_argument("--agent", required=True)
    s.add_argument("--frame", type=int, required=True, help="future frame index, 1..F")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_export_field)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except InputError as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except (ValueError, ArithmeticError, KeyError) as exc:
        log.error("compute error: %s", exc)
        return EXIT_COMPUTE
