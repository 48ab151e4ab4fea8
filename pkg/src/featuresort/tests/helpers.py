"""
Builders for detections, tracks and trajectories used across the tests.
"""
import numpy as np

from featuresort.association import spawn_track
from featuresort.config import TrackerConfig
from featuresort.structures import (BBox, COLOR_BINS, DIRECTION_BINS, STYLE_BINS, Detection, Trajectory,
                                    TrajectoryPoint, normalize_detection)
from featuresort.synth import observed_direction


def unit(dim, index):
    v = np.zeros(dim)
    v[index] = 1.0
    return v


def one_hot(bins, index, low=0.05, high=0.95):
    v = np.full(bins, low)
    v[index] = high
    return v


def make_detection(frame=1, box=(100.0, 100.0, 40.0, 100.0), conf=0.9, class_id=0, embedding=None,
                   color=None, style=None, direction=None, heading=0, dim=8):
    return normalize_detection(Detection(
        frame=frame,
        box=BBox(*box),
        conf=conf,
        class_id=class_id,
        embedding=unit(dim, 0) if embedding is None else np.asarray(embedding, dtype=float),
        color=one_hot(COLOR_BINS, 0) if color is None else np.asarray(color, dtype=float),
        style=one_hot(STYLE_BINS, 0) if style is None else np.asarray(style, dtype=float),
        direction=observed_direction(heading, 0.5) if direction is None else np.asarray(direction, dtype=float),
    ))


def random_detection(rng, frame=1, box=(100.0, 100.0, 40.0, 100.0), class_id=0, dim=8):
    return make_detection(
        frame=frame, box=box, conf=float(rng.uniform(0.5, 1.0)), class_id=class_id,
        embedding=rng.normal(size=dim),
        color=rng.uniform(size=COLOR_BINS),
        style=rng.uniform(size=STYLE_BINS),
        direction=rng.dirichlet(np.ones(DIRECTION_BINS)),
        dim=dim,
    )


def make_track(track_id, det, cfg=None, frame=1):
    return spawn_track(track_id, det, frame, cfg or TrackerConfig(embedding_dim=len(det.embedding)))


def make_trajectory(track_id, frames, boxes, class_id=0, bank=(), conf=1.0):
    points = [TrajectoryPoint(int(f), BBox(*b), conf) for f, b in zip(frames, boxes)]
    return Trajectory(track_id, class_id, points, [np.asarray(v, dtype=float) for v in bank])


def straight_trajectory(track_id, first, last, start=(100.0, 100.0), velocity=(1.0, 0.0), size=(40.0, 100.0),
                        class_id=0, bank=()):
    frames = list(range(first, last + 1))
    boxes = [(start[0] + velocity[0] * (f - first), start[1] + velocity[1] * (f - first)) + tuple(size)
             for f in frames]
    return make_trajectory(track_id, frames, boxes, class_id=class_id, bank=bank)
