"""
Domain types shared by every stage of the pipeline: boxes, detections,
live tracks and finished trajectories.
"""
import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DataError, DetectionError, InvalidBoxError, ZeroNormEmbeddingError

log = logging.getLogger(__name__)

EPS_PROB = 1e-7
COLOR_BINS = 10
STYLE_BINS = 20
DIRECTION_BINS = 72


@dataclass(frozen=True)
class BBox:
    """
    Axis-aligned box in pixels, (x, y) being the top-left corner.
    """
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvalidBoxError('box needs positive size, got w={} h={}'.format(self.w, self.h))

    @property
    def area(self):
        return self.w * self.h

    @property
    def center(self):
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def to_tlbr(self):
        return self.x, self.y, self.x + self.w, self.y + self.h

    def to_xyah(self):
        cx, cy = self.center
        return np.array([cx, cy, self.w / self.h, self.h], dtype=float)

    def as_array(self):
        return np.array([self.x, self.y, self.w, self.h], dtype=float)

    @classmethod
    def from_xyah(cls, xyah, min_size=1e-3):
        cx, cy, aspect, h = (float(v) for v in xyah[:4])
        h = max(h, min_size)
        w = max(aspect * h, min_size)
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)


def iou(a: BBox, b: BBox) -> float:
    if a == b:
        return 1.0

    ax1, ay1, ax2, ay2 = a.to_tlbr()
    bx1, by1, bx2, by2 = b.to_tlbr()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0

    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def iou_matrix(boxes_a, boxes_b):
    """
    Pairwise IoU between two (N, 4) and (M, 4) arrays of x, y, w, h rows.
    """
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))

    a_x2 = a[:, 0] + a[:, 2]
    a_y2 = a[:, 1] + a[:, 3]
    b_x2 = b[:, 0] + b[:, 2]
    b_y2 = b[:, 1] + b[:, 3]
    iw = np.minimum(a_x2[:, None], b_x2[None, :]) - np.maximum(a[:, 0][:, None], b[:, 0][None, :])
    ih = np.minimum(a_y2[:, None], b_y2[None, :]) - np.maximum(a[:, 1][:, None], b[:, 1][None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = a[:, 2] * a[:, 3]
    area_b = b[:, 2] * b[:, 3]
    union = area_a[:, None] + area_b[None, :] - inter
    return np.clip(inter / union, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Detection:
    frame: int
    box: BBox
    conf: float
    class_id: int
    embedding: np.ndarray
    color: np.ndarray
    style: np.ndarray
    direction: np.ndarray

    @property
    def embedding_dim(self):
        return len(self.embedding)


def normalize_detection(raw: Detection, eps_prob: float = EPS_PROB) -> Detection:
    """
    Bring a raw detection to the form every distance function expects:
    unit-norm embedding, direction summing to one and color/style entries
    kept strictly inside (0, 1) so their logarithms stay finite.
    """
    embedding = np.asarray(raw.embedding, dtype=float)
    color = np.asarray(raw.color, dtype=float)
    style = np.asarray(raw.style, dtype=float)
    direction = np.asarray(raw.direction, dtype=float)

    if embedding.ndim != 1 or embedding.size == 0:
        raise DetectionError('frame {}: embedding must be a non-empty vector'.format(raw.frame))
    if color.shape != (COLOR_BINS,) or style.shape != (STYLE_BINS,) or direction.shape != (DIRECTION_BINS,):
        raise DetectionError('frame {}: expected color/style/direction lengths {}/{}/{}, got {}/{}/{}'.format(
            raw.frame, COLOR_BINS, STYLE_BINS, DIRECTION_BINS, color.size, style.size, direction.size))

    norm = np.linalg.norm(embedding)
    if not norm > 0:
        raise ZeroNormEmbeddingError('frame {}: zero-norm embedding'.format(raw.frame))

    direction = np.clip(direction, 0.0, None)
    total = direction.sum()
    if total > 0:
        direction = direction / total
    else:
        direction = np.full(DIRECTION_BINS, 1.0 / DIRECTION_BINS)

    return dataclasses.replace(
        raw,
        conf=float(raw.conf),
        class_id=int(raw.class_id),
        embedding=embedding / norm,
        color=np.clip(color, eps_prob, 1.0 - eps_prob),
        style=np.clip(style, eps_prob, 1.0 - eps_prob),
        direction=direction,
    )


class TrackStatus(enum.Enum):
    TENTATIVE = 'Tentative'
    CONFIRMED = 'Confirmed'
    DELETED = 'Deleted'


class Track(object):
    """
    A live tracklet.

    Holds the Kalman state, the appearance bank (EMA embedding, color and
    style stacks, direction slot) and the lifecycle counters. ``history``
    records the filtered box for every frame the track was matched.
    """

    def __init__(self, track_id, class_id, kalman, bank, frame, conf):
        self.track_id = track_id
        self.class_id = class_id
        self.kalman = kalman
        self.bank = bank
        self.age_since_update = 0
        self.hits = 1
        self.status = TrackStatus.TENTATIVE
        self.history = []
        self.record(frame, conf)

    @property
    def box(self):
        return BBox.from_xyah(self.kalman.mean[:4])

    @property
    def is_confirmed(self):
        return self.status is TrackStatus.CONFIRMED

    @property
    def is_tentative(self):
        return self.status is TrackStatus.TENTATIVE

    @property
    def is_deleted(self):
        return self.status is TrackStatus.DELETED

    def record(self, frame, conf):
        self.history.append((frame, self.box, float(conf)))

    def to_trajectory(self, bank_size):
        snapshots = list(self.bank.ema_snapshots)
        if self.bank.ema is not None and (not snapshots or not np.array_equal(snapshots[-1], self.bank.ema)):
            snapshots.append(self.bank.ema)
        if len(snapshots) > bank_size:
            snapshots = snapshots[-bank_size:]

        points = [TrajectoryPoint(frame, box, conf) for frame, box, conf in self.history]
        return Trajectory(self.track_id, self.class_id, points, snapshots)

    def __repr__(self):
        return 'Track(id={}, class={}, status={}, hits={}, age={})'.format(
            self.track_id, self.class_id, self.status.value, self.hits, self.age_since_update)


@dataclass(frozen=True)
class TrajectoryPoint:
    frame: int
    box: BBox
    conf: float = 1.0
    interpolated: bool = False


@dataclass(eq=False)
class Trajectory:
    """
    A finished tracklet: per-frame boxes plus the embedding snapshots taken
    along it, which is what the offline linker compares.
    """
    track_id: int
    class_id: int
    points: List[TrajectoryPoint]
    embedding_bank: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        frames = [p.frame for p in self.points]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise DataError('trajectory {} frames must be strictly increasing'.format(self.track_id))

    @property
    def frames(self):
        return [p.frame for p in self.points]

    @property
    def first_frame(self):
        return self.points[0].frame

    @property
    def last_frame(self):
        return self.points[-1].frame

    @property
    def first_box(self):
        return self.points[0].box

    @property
    def last_box(self):
        return self.points[-1].box

    @property
    def conf_mean(self):
        observed = [p.conf for p in self.points if not p.interpolated]
        if not observed:
            return 0.0
        return float(np.mean(observed))

    def boxes_array(self):
        return np.array([p.box.as_array() for p in self.points], dtype=float).reshape(-1, 4)

    def __len__(self):
        return len(self.points)


def frame_range(trajectories) -> Optional[Tuple[int, int]]:
    frames = [p.frame for t in trajectories for p in t.points]
    if not frames:
        return None
    return min(frames), max(frames)
