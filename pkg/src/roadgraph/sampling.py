"""Expert-driven training sample generation (supervised exploration).

Drives the detection engine with the ground-truth expert as policy while
injecting Gaussian positional noise into executed moves; every policy step
yields one training record: ROI crops, history raster, segmentation label
crops and the label vertex set. The closed loop doubles as the noise
robustness harness: the final history graph can be scored against the
ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import ndimage

from .engine import EngineConfig, ExpertOraclePolicy, run_detection
from .expert import ExpertConfig, ExpertLabel, LabelMode
from .graph import Point, RoadGraph
from .raster import Tile, crop_window


@dataclass
class TrainingSample:
    step: int
    center: Point
    mode: LabelMode
    label_offsets: tuple[Point, ...]   # relative to the ROI center
    corrected: bool
    rotation_deg: float = 0.0
    roi: Optional[Tile] = None
    history: Optional[Tile] = None
    road_label: Optional[Tile] = None
    intersection_label: Optional[Tile] = None


@dataclass
class SamplingResult:
    samples: list[TrainingSample]
    graph: RoadGraph        # simplified final history graph
    raw_graph: RoadGraph
    steps_total: int
    truncated: bool


def _rotate_tile(arr: np.ndarray, angle_deg: float) -> np.ndarray:
    out = ndimage.rotate(arr, angle_deg, reshape=False, order=1, mode="constant")
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _rotate_offset(p: Point, angle_deg: float) -> Point:
    # image coordinates: y grows downward, rotation stays the usual matrix
    a = math.radians(angle_deg)
    return Point(p.x * math.cos(a) - p.y * math.sin(a),
                 p.x * math.sin(a) + p.y * math.cos(a))


def run_expert_sampling(gt: RoadGraph, image: Tile,
                        masks: tuple[Tile, Tile], cfg: ExpertConfig,
                        engine_cfg: EngineConfig, seed: int,
                        force_correction: bool = True,
                        off_track_xi: Optional[float] = None,
                        record_crops: bool = True) -> SamplingResult:
    """Run one supervised exploration pass and collect all step records.

    ``gt`` must be simplified. Deterministic per seed. When
    ``record_crops`` is false only the light-weight per-step metadata is
    kept (used by the noise-robustness checks).
    """
    road_mask, intersection_mask = masks
    rng = np.random.default_rng(seed)
    samples: list[TrainingSample] = []
    side = engine_cfg.roi_side

    def recorder(request, label: ExpertLabel, executed, corrected: bool) -> None:
        center = request.center
        angle = 0.0
        if cfg.rotate_augment:
            angle = float(rng.integers(0, 4) * 90 + rng.uniform(0.0, 90.0))
        offsets = tuple(Point(v.x - center.x, v.y - center.y)
                        for v in label.vertices)
        sample = TrainingSample(step=len(samples), center=center,
                                mode=label.mode, label_offsets=offsets,
                                corrected=corrected, rotation_deg=angle)
        if record_crops:
            roi = request.roi_rgb.data
            hist = request.history_raster.data
            road = crop_window(road_mask.data, center, side)
            inter = crop_window(intersection_mask.data, center, side)
            if angle:
                roi, hist, road, inter = (_rotate_tile(a, angle)
                                          for a in (roi, hist, road, inter))
                # offsets rotate opposite to the image content
                sample.label_offsets = tuple(_rotate_offset(p, -angle)
                                             for p in offsets)
            sample.roi = Tile(roi)
            sample.history = Tile(hist)
            sample.road_label = Tile(road)
            sample.intersection_label = Tile(inter)
        samples.append(sample)

    policy = ExpertOraclePolicy(gt, cfg, noise_sigma=cfg.noise_sigma,
                                seed=int(rng.integers(0, 2**31 - 1)),
                                force_correction=force_correction,
                                off_track_xi=off_track_xi,
                                recorder=recorder)
    result = run_detection(image, policy,
                           lambda _img: (road_mask, intersection_mask),
                           engine_cfg)
    return SamplingResult(samples=samples, graph=result.graph,
                          raw_graph=result.raw_graph,
                          steps_total=result.steps_total,
                          truncated=result.truncated)


def sample_training_set(gt: RoadGraph, image: Tile,
                        masks: tuple[Tile, Tile], cfg: ExpertConfig,
                        seed: int,
                        engine_cfg: Optional[EngineConfig] = None
                        ) -> Iterator[TrainingSample]:
    """Stream training samples from one expert-supervised exploration."""
    result = run_expert_sampling(gt, image, masks, cfg,
                                 engine_cfg or EngineConfig(), seed)
    yield from result.samples
