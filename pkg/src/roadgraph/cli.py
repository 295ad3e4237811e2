"""Command line entry points.

World directory layout (produced by ``synth``, consumed by the rest):
image.png, gt.json, road_mask.png, int_mask.png, meta.json.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 run truncated by a step
guard.
"""
from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import click
import numpy as np
from PIL import Image, ImageDraw

from . import bridge as bridge_mod
from .config import ConfigError, RunConfig, dump_config, load_config
from .engine import (EngineConfig, run_detection, wrap_expert_as_policy)
from .graph import Point, RoadGraph
from .graphio import DataError, load_graph, save_graph, save_png, load_png
from .matching import (LossWeights, coord_loss, focal_loss, match_vertices,
                       total_loss, valid_loss)
from .metrics import MetricConfig, full_report
from .raster import Tile
from .sampling import run_expert_sampling
from .synth import render_synthetic_world

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRUNCATED = 3


class TruncatedRun(Exception):
    pass


@click.group()
def cli() -> None:
    """Road-graph detection engine and benchmark harness."""


# ---------------------------------------------------------------------------
# world files

def _write_world(seed: int, out_dir: Path, cfg: RunConfig) -> Path:
    world = render_synthetic_world(seed, cfg.synth.width, cfg.synth.height,
                                   cfg.synth.style)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_png(world.image.data, out_dir / "image.png")
    save_graph(world.graph, out_dir / "gt.json")
    save_png(world.road_mask.data, out_dir / "road_mask.png")
    save_png(world.intersection_mask.data, out_dir / "int_mask.png")
    meta = {"seed": seed, "width": cfg.synth.width, "height": cfg.synth.height,
            "style": cfg.synth.style}
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=1,
                                                  sort_keys=True))
    return out_dir


def _load_world(world_dir: Path):
    for name in ("image.png", "gt.json", "road_mask.png", "int_mask.png"):
        if not (world_dir / name).exists():
            raise DataError(f"{world_dir} is missing {name}")
    image = Tile(load_png(world_dir / "image.png"))
    gt = load_graph(world_dir / "gt.json")
    road = Tile(load_png(world_dir / "road_mask.png"))
    inter = Tile(load_png(world_dir / "int_mask.png"))
    return image, gt, road, inter


# ---------------------------------------------------------------------------
# synth

@cli.command()
@click.option("--seed", type=int, required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--style", type=click.Choice(["grid", "ring"]))
@click.option("--jobs", type=int, default=1, show_default=True)
def synth(seed: int, out_dir: Path, count: int,
          config_path: Optional[Path], style: Optional[str], jobs: int) -> None:
    """Generate synthetic worlds (world_000, world_001, ... under OUT_DIR)."""
    cfg = load_config(config_path)
    if style:
        cfg = RunConfig(expert=cfg.expert, engine=cfg.engine,
                        metrics=cfg.metrics, loss=cfg.loss,
                        synth=type(cfg.synth)(cfg.synth.width,
                                              cfg.synth.height, style))
    targets = [(seed + i, out_dir / f"world_{i:03d}") for i in range(count)]
    if jobs > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_write_world, [s for s, _ in targets],
                          [d for _, d in targets], [cfg] * count))
    else:
        for s, d in targets:
            _write_world(s, d, cfg)
    click.echo(f"wrote {count} world(s) under {out_dir}")


# ---------------------------------------------------------------------------
# labels

@cli.command()
@click.option("--world", "worlds", type=click.Path(path_type=Path),
              multiple=True, required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
def labels(worlds, config_path: Optional[Path], out: Path, seed: int,
           jobs: int) -> None:
    """Run the supervision expert over worlds and dump training samples."""
    cfg = load_config(config_path)
    tasks = [(Path(w), out if len(worlds) == 1 else out / Path(w).name,
              seed + i, cfg) for i, w in enumerate(worlds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_label_world, tasks))
    else:
        for t in tasks:
            _label_world(t)
    click.echo(f"labelled {len(tasks)} world(s)")


def _label_world(task) -> None:
    world_dir, out_dir, seed, cfg = task
    image, gt, road, inter = _load_world(world_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_expert_sampling(gt, image, (road, inter), cfg.expert,
                                 cfg.engine, seed)
    half = cfg.engine.roi_side / 2
    records = []
    for s in result.samples:
        crops = {}
        for field, tile in (("roi", s.roi), ("history", s.history),
                            ("road_label", s.road_label),
                            ("intersection_label", s.intersection_label)):
            if tile is None:
                continue
            name = f"{field}_{s.step:05d}.png"
            save_png(tile.data, out_dir / name)
            crops[field] = name
        offsets = [{"dx": max(-half, min(half, p.x)),
                    "dy": max(-half, min(half, p.y))}
                   for p in s.label_offsets]
        records.append({"step": s.step,
                        "center": {"x": s.center.x, "y": s.center.y},
                        "mode": s.mode.value, "labels": offsets,
                        "corrected": s.corrected,
                        "rotation_deg": s.rotation_deg, "crops": crops})
    doc = {"version": 1, "world": str(world_dir), "seed": seed,
           "roi_side": cfg.engine.roi_side, "samples": records}
    (out_dir / "samples.json").write_text(json.dumps(doc, indent=1,
                                                     sort_keys=True))


# ---------------------------------------------------------------------------
# detect

def _make_policy_and_segmenter(policy_name: str, gt: RoadGraph,
                               masks, cfg: RunConfig, seed: int):
    road, inter = masks
    local_segmenter = lambda _img: (road, inter)
    if policy_name == "oracle":
        return wrap_expert_as_policy(gt, cfg.expert), local_segmenter, None
    if policy_name == "noisy-oracle":
        policy = wrap_expert_as_policy(gt, cfg.expert,
                                       noise_sigma=cfg.expert.noise_sigma,
                                       seed=seed, force_correction=True)
        return policy, local_segmenter, None
    if policy_name.startswith("bridge:"):
        command = policy_name[len("bridge:"):].split()
        if not command:
            raise click.UsageError("bridge policy needs a client command")
        transport = bridge_mod.SubprocessTransport(command)
        extensions = {"tau": cfg.expert.tau, "tau_prime": cfg.expert.tau_prime}
        session = bridge_mod.serve_handshake(transport, cfg.engine, extensions)
        return (bridge_mod.remote_policy(session, cfg.engine),
                bridge_mod.remote_segmenter(session), session)
    raise click.UsageError(f"unknown policy {policy_name!r}")


def _detect_world(task) -> bool:
    world_dir, out_dir, policy_name, seed, cfg = task
    image, gt, road, inter = _load_world(world_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy, segmenter, session = _make_policy_and_segmenter(
        policy_name, gt, (road, inter), cfg, seed)
    try:
        result = run_detection(image, policy, segmenter, cfg.engine)
    finally:
        if session is not None:
            session.close()
    save_graph(result.graph, out_dir / "pred.json")
    meta = {"world": str(world_dir), "policy": policy_name, "seed": seed,
            "steps_total": result.steps_total, "truncated": result.truncated,
            "vertices": result.graph.num_vertices(),
            "edges": result.graph.num_edges()}
    (out_dir / "run.json").write_text(json.dumps(meta, indent=1,
                                                 sort_keys=True))
    return result.truncated


@cli.command()
@click.option("--world", "worlds", type=click.Path(path_type=Path),
              multiple=True, required=True)
@click.option("--policy", default="oracle", show_default=True,
              help="oracle | noisy-oracle | bridge:<client command>")
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
def detect(worlds, policy: str, config_path: Optional[Path], out: Path,
           seed: int, jobs: int) -> None:
    """Run the detection engine over worlds, writing pred.json + run.json."""
    cfg = load_config(config_path)
    tasks = [(Path(w), out if len(worlds) == 1 else out / Path(w).name,
              policy, seed + i, cfg) for i, w in enumerate(worlds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            truncated = list(pool.map(_detect_world, tasks))
    else:
        truncated = [_detect_world(t) for t in tasks]
    click.echo(f"detected over {len(tasks)} world(s)")
    if any(truncated):
        raise TruncatedRun


# ---------------------------------------------------------------------------
# eval

def _graph_dims(*graphs: RoadGraph) -> tuple[int, int]:
    xs = [p.x for g in graphs for p in g.vertices.values()]
    ys = [p.y for g in graphs for p in g.vertices.values()]
    if not xs:
        return 256, 256
    return (max(256, int(math.ceil(max(xs))) + 2),
            max(256, int(math.ceil(max(ys))) + 2))


def _format_table(report) -> str:
    # mirrors the usual benchmark table: one metric block per threshold
    lines = ["metric          delta  precision  recall     f1"]
    for name, block in (("pixel", report.pixel),
                        ("intersection", report.intersection)):
        for d in sorted(block):
            p, r, f = block[d]
            lines.append(f"{name:<15} {d:<6g} {p:<10.4f} {r:<10.4f} {f:.4f}")
    lines.append(f"apls            -      {report.apls:.4f}")
    return "\n".join(lines) + "\n"


@cli.command("eval")
@click.option("--gt", "gt_path", type=click.Path(path_type=Path), required=True)
@click.option("--pred", "pred_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--world", "world_dir", type=click.Path(path_type=Path),
              help="world directory, used for the raster dimensions")
def eval_cmd(gt_path: Path, pred_path: Path, out: Path,
             world_dir: Optional[Path]) -> None:
    """Score a predicted graph against ground truth."""
    gt = load_graph(gt_path)
    pred = load_graph(pred_path)
    if world_dir:
        meta = json.loads((Path(world_dir) / "meta.json").read_text())
        dims = (int(meta["width"]), int(meta["height"]))
    else:
        dims = _graph_dims(gt, pred)
    report = full_report(gt, pred, dims, MetricConfig())
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1,
                                                sort_keys=True))
    table = _format_table(report)
    (out / "report.txt").write_text(table)
    click.echo(table, nl=False)


# ---------------------------------------------------------------------------
# overlay

@cli.command()
@click.option("--image", "image_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--graph", "graph_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def overlay(image_path: Path, graph_path: Path, out: Path) -> None:
    """Draw a graph over an image for qualitative figures."""
    arr = load_png(image_path)
    g = load_graph(graph_path)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    img = Image.fromarray((arr * 255).astype(np.uint8))
    draw = ImageDraw.Draw(img)
    for eid in sorted(g.edges):
        pts = [(p.x, p.y) for p in g.edges[eid].polyline]
        draw.line(pts, fill=(255, 160, 0), width=2)
    for vid in sorted(g.vertices):
        p = g.vertices[vid]
        color = (255, 0, 0) if g.degree(vid) >= 3 else (0, 120, 255)
        draw.ellipse([p.x - 3, p.y - 3, p.x + 3, p.y + 3], outline=color,
                     width=2)
    img.save(out)
    click.echo(f"wrote {out}")


# ---------------------------------------------------------------------------
# audit-loss

@cli.command("audit-loss")
@click.option("--samples", "samples_path", type=click.Path(path_type=Path),
              required=True, help="samples.json from the labels command")
@click.option("--preds", "preds_path", type=click.Path(path_type=Path),
              required=True,
              help="JSON: {step: [{dx, dy, prob}, ...]} per sample")
@click.option("--out", type=click.Path(path_type=Path))
def audit_loss(samples_path: Path, preds_path: Path,
               out: Optional[Path]) -> None:
    """Recompute the training losses over recorded samples (trainer check)."""
    try:
        samples_doc = json.loads(samples_path.read_text())
        preds_doc = json.loads(preds_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(str(exc)) from exc

    sample_dir = samples_path.parent
    coord_vals, valid_vals, road_vals, inter_vals = [], [], [], []
    for rec in samples_doc.get("samples", []):
        preds = preds_doc.get(str(rec["step"]), [])
        label_pts = [Point(l["dx"], l["dy"]) for l in rec["labels"]]
        pred_pts = [Point(p["dx"], p["dy"]) for p in preds]
        probs = [float(p["prob"]) for p in preds]
        assignment = match_vertices(pred_pts, label_pts)
        matched = [0] * len(preds)
        for i, _ in assignment.pairs:
            matched[i] = 1
        coord_vals.append(coord_loss(pred_pts, label_pts, assignment))
        valid_vals.append(valid_loss(probs, matched) if probs else 0.0)
        crops = rec.get("crops", {})
        for key, sink in (("road_label", road_vals),
                          ("intersection_label", inter_vals)):
            if key in crops:
                mask = load_png(sample_dir / crops[key]) > 0.5
                # a blank predicted map stands in for the model output here
                sink.append(focal_loss(np.zeros_like(mask, dtype=np.float32)
                                       + 0.5, mask))

    def mean(vals):
        return float(np.mean(vals)) if vals else 0.0

    seg = (mean(road_vals), mean(inter_vals))
    summary = {
        "samples": len(samples_doc.get("samples", [])),
        "coord_loss": mean(coord_vals),
        "valid_loss": mean(valid_vals),
        "road_focal_loss": seg[0],
        "intersection_focal_loss": seg[1],
        "total_loss": total_loss(seg, mean(coord_vals), mean(valid_vals),
                                 LossWeights()),
    }
    text = json.dumps(summary, indent=1, sort_keys=True)
    if out:
        out.write_text(text)
    click.echo(text)


@cli.command("show-config")
@click.option("--config", "config_path", type=click.Path(path_type=Path))
def show_config(config_path: Optional[Path]) -> None:
    """Print the fully resolved configuration."""
    click.echo(dump_config(load_config(config_path)))


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (DataError, ConfigError, bridge_mod.ProtocolError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except TruncatedRun:
        click.echo("run truncated by a step guard", err=True)
        return EXIT_TRUNCATED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
