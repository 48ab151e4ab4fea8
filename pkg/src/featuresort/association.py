"""
Per-frame data association.

Each (track, detection) pair of the same class gets a combined distance:
the weighted sum of motion, embedding, color and style distances, valid
only where the predicted box overlaps the detection (IoU gate) and the
detection's heading agrees with the track's (direction gate). Pairs that
fail a gate cost ``d_max + epsilon`` and are never kept by the solver.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ClassMismatchError
from .features import (FeatureBank, MAX_COSINE_DISTANCE, color_distance,
                       direction_distance, direction_template, edge_distance, stack_append,
                       style_distance)
from .kalman import center_distances, gating_distance, initiate, kalman_params, update
from .structures import EPS_PROB, Track, TrackStatus, iou, iou_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairCost:
    value: float
    admissible: bool
    iou: float
    direction: Optional[float]


@dataclass
class CostMatrix:
    """
    ``values[i][j]`` is the combined distance of ``track_ids[i]`` against
    detection ``det_indices[j]``; ``gate`` marks the admissible entries.
    ``iou`` and ``direction`` keep the gate inputs for the match log
    (direction is NaN where the track has no heading yet).
    """
    values: np.ndarray
    gate: np.ndarray
    track_ids: List[int]
    det_indices: List[int]
    iou: Optional[np.ndarray] = None
    direction: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, track_ids=(), det_indices=()):
        shape = (len(track_ids), len(det_indices))
        return cls(np.zeros(shape), np.zeros(shape, dtype=bool), list(track_ids), list(det_indices),
                   np.zeros(shape), np.full(shape, np.nan))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class MatchRecord:
    frame: int
    track_id: int
    det_index: int
    class_id: int
    iou: float
    direction: Optional[float]
    cost: float


@dataclass
class Assignment:
    matches: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_dets: List[int] = field(default_factory=list)
    # (track_id, det_index) -> (cost, iou, direction) for every kept match
    details: Dict[Tuple[int, int], Tuple[float, float, Optional[float]]] = field(default_factory=dict)

    def extend(self, other):
        self.matches.extend(other.matches)
        self.unmatched_tracks.extend(other.unmatched_tracks)
        self.unmatched_dets.extend(other.unmatched_dets)
        self.details.update(other.details)
        return self


def _feature_weights(cfg):
    return cfg.lambda_motion, cfg.lambda_edge, cfg.lambda_color, cfg.lambda_style


def _edge_active(bank: FeatureBank, cfg):
    if cfg.appearance == 'gallery':
        return bool(bank.gallery) or bank.ema is not None
    return bank.ema is not None


def pair_cost(track: Track, det, cfg) -> PairCost:
    """
    combined_cost with the gate inputs kept alongside.
    """
    if track.class_id != det.class_id:
        raise ClassMismatchError('track {} (class {}) compared with a class {} detection'.format(
            track.track_id, track.class_id, det.class_id))

    overlap = iou(track.box, det.box)
    direction = direction_distance(track.bank, det.direction, cfg.sigma_dir)
    rejected = cfg.d_max + cfg.epsilon

    if not overlap > cfg.iou_min:
        return PairCost(rejected, False, overlap, direction)
    if cfg.direction_gate and direction is not None and not direction < cfg.dir_max:
        return PairCost(rejected, False, overlap, direction)

    w_motion, w_edge, w_color, w_style = _feature_weights(cfg)
    total_weight = w_motion + w_edge + w_color + w_style

    value = w_motion * gating_distance(track.kalman, det.box.to_xyah(), cfg.frame_diagonal)
    active_weight = w_motion
    if _edge_active(track.bank, cfg):
        value += w_edge * edge_distance(track.bank, det.embedding, cfg.appearance)
        active_weight += w_edge
    color = color_distance(track.bank, det.color)
    if color is not None:
        value += w_color * color
        active_weight += w_color
    style = style_distance(track.bank, det.style)
    if style is not None:
        value += w_style * style
        active_weight += w_style

    if active_weight > 0:
        value *= total_weight / active_weight
    else:
        value = 0.0
    return PairCost(float(value), True, overlap, direction)


def combined_cost(track: Track, det, cfg) -> Tuple[float, bool]:
    cost = pair_cost(track, det, cfg)
    return cost.value, cost.admissible


def _stack_matrix(stacks, queries):
    distances = np.zeros((len(stacks), len(queries)))
    active = np.zeros(len(stacks), dtype=bool)
    queries = np.clip(np.asarray(queries, dtype=float), EPS_PROB, 1.0 - EPS_PROB)
    log_q = np.log(queries).T
    log_not_q = np.log1p(-queries).T
    for i, stack in enumerate(stacks):
        if stack:
            labels = np.clip(np.asarray(stack), 0.0, 1.0)
            distances[i] = (-(labels @ log_q + (1.0 - labels) @ log_not_q)).min(axis=0)
            active[i] = True
    return distances, active


def _edge_matrix(tracks, embeddings, cfg):
    distances = np.full((len(tracks), len(embeddings)), MAX_COSINE_DISTANCE)
    active = np.zeros(len(tracks), dtype=bool)
    for i, track in enumerate(tracks):
        bank = track.bank
        if cfg.appearance == 'gallery' and bank.gallery:
            gallery = np.asarray(bank.gallery)
            distances[i] = np.clip(1.0 - gallery @ embeddings.T, 0.0, MAX_COSINE_DISTANCE).min(axis=0)
            active[i] = True
        elif bank.ema is not None:
            distances[i] = np.clip(1.0 - embeddings @ bank.ema, 0.0, MAX_COSINE_DISTANCE)
            active[i] = True
    return distances, active


def build_cost_matrix(tracks: List[Track], dets, cfg, det_indices=None) -> CostMatrix:
    """
    Vectorised combined_cost over every pair. ``det_indices`` labels the
    columns (defaults to positions in ``dets``).
    """
    track_ids = [t.track_id for t in tracks]
    if det_indices is None:
        det_indices = list(range(len(dets)))
    if not tracks or not dets:
        return CostMatrix.empty(track_ids, det_indices)

    classes = {t.class_id for t in tracks} | {d.class_id for d in dets}
    if len(classes) > 1:
        raise ClassMismatchError('cost matrix mixes classes {}'.format(sorted(classes)))

    boxes = np.array([t.box.as_array() for t in tracks])
    det_boxes = np.array([d.box.as_array() for d in dets])
    overlap = iou_matrix(boxes, det_boxes)
    # identical boxes score exactly 1.0, as the scalar iou does
    overlap[np.all(boxes[:, None, :] == det_boxes[None, :, :], axis=2)] = 1.0

    means = np.array([t.kalman.mean for t in tracks])
    measurements = np.array([d.box.to_xyah() for d in dets])
    motion = center_distances(means, measurements, cfg.frame_diagonal)

    edge, edge_active = _edge_matrix(tracks, np.array([d.embedding for d in dets]), cfg)
    color, color_active = _stack_matrix([t.bank.colors for t in tracks], np.array([d.color for d in dets]))
    style, style_active = _stack_matrix([t.bank.styles for t in tracks], np.array([d.style for d in dets]))

    directions = np.array([d.direction for d in dets])
    direction = np.full((len(tracks), len(dets)), np.nan)
    for i, track in enumerate(tracks):
        if track.bank.direction_bin is not None:
            template = direction_template(track.bank.direction_bin, cfg.sigma_dir, directions.shape[1])
            residual = directions - template[None, :]
            direction[i] = np.sum(residual * residual, axis=1)

    w_motion, w_edge, w_color, w_style = _feature_weights(cfg)
    total_weight = w_motion + w_edge + w_color + w_style
    values = w_motion * motion
    values = values + (w_edge * edge) * edge_active[:, None]
    values = values + (w_color * color) * color_active[:, None]
    values = values + (w_style * style) * style_active[:, None]
    active_weight = (w_motion + w_edge * edge_active + w_color * color_active + w_style * style_active)[:, None]
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(active_weight > 0, values * (total_weight / active_weight), 0.0)

    gate = overlap > cfg.iou_min
    if cfg.direction_gate:
        gate &= np.isnan(direction) | (direction < cfg.dir_max)
    values = np.where(gate, values, cfg.d_max + cfg.epsilon)

    log.debug('Cost matrix %dx%d, %d admissible pairs', len(tracks), len(dets), int(gate.sum()))
    return CostMatrix(values, gate, track_ids, list(det_indices), overlap, direction)


def hungarian_solve(m: CostMatrix, reject_threshold: float) -> Assignment:
    """
    Minimum-cost assignment; pairs costing ``reject_threshold`` or more are
    split back into unmatched tracks and detections.
    """
    assignment = Assignment()
    rows, cols = (), ()
    if m.values.size:
        rows, cols = linear_sum_assignment(m.values)

    matched_rows = set()
    matched_cols = set()
    for r, c in zip(rows, cols):
        value = float(m.values[r, c])
        if value >= reject_threshold:
            continue
        track_id = m.track_ids[r]
        det_index = m.det_indices[c]
        assignment.matches.append((track_id, det_index))
        matched_rows.add(r)
        matched_cols.add(c)
        if m.iou is not None:
            direction = None
            if m.direction is not None and not np.isnan(m.direction[r, c]):
                direction = float(m.direction[r, c])
            assignment.details[(track_id, det_index)] = (value, float(m.iou[r, c]), direction)

    assignment.unmatched_tracks = [t for i, t in enumerate(m.track_ids) if i not in matched_rows]
    assignment.unmatched_dets = [d for j, d in enumerate(m.det_indices) if j not in matched_cols]
    return assignment


def matching_cascade(tracks: List[Track], dets, cfg, det_indices=None) -> Assignment:
    """
    Age-prioritized matching: tracks seen in the previous frame get first
    pick, then tracks missed once, and so on up to ``age_max``.
    """
    if det_indices is None:
        det_indices = list(range(len(dets)))
    position = {d: k for k, d in enumerate(det_indices)}
    remaining = list(det_indices)
    assignment = Assignment()

    levels = {}
    for track in tracks:
        levels.setdefault(track.age_since_update, []).append(track)

    for level in sorted(levels):
        if level > cfg.age_max:
            assignment.unmatched_tracks.extend(t.track_id for t in levels[level])
            continue
        if not remaining:
            assignment.unmatched_tracks.extend(t.track_id for t in levels[level])
            continue
        level_dets = [dets[position[d]] for d in remaining]
        solved = hungarian_solve(build_cost_matrix(levels[level], level_dets, cfg, remaining),
                                 cfg.reject_threshold)
        assignment.matches.extend(solved.matches)
        assignment.unmatched_tracks.extend(solved.unmatched_tracks)
        assignment.details.update(solved.details)
        remaining = solved.unmatched_dets

    assignment.unmatched_dets = remaining
    return assignment


def match_frame(tracks: List[Track], dets, cfg) -> Assignment:
    """
    Match each object class on its own. Detection indices in the result
    refer to positions in ``dets``.
    """
    classes = sorted({t.class_id for t in tracks} | {d.class_id for d in dets})
    assignment = Assignment()
    for class_id in classes:
        class_cfg = cfg.for_class(class_id)
        class_tracks = [t for t in tracks if t.class_id == class_id]
        class_indices = [j for j, d in enumerate(dets) if d.class_id == class_id]
        class_dets = [dets[j] for j in class_indices]

        if class_cfg.matching == 'cascade':
            solved = matching_cascade(class_tracks, class_dets, class_cfg, class_indices)
        else:
            matrix = build_cost_matrix(class_tracks, class_dets, class_cfg, class_indices)
            solved = hungarian_solve(matrix, class_cfg.reject_threshold)
        log.debug('Class %d: %d tracks, %d detections, %d matches',
                  class_id, len(class_tracks), len(class_dets), len(solved.matches))
        assignment.extend(solved)

    assignment.unmatched_dets.sort()
    return assignment


def spawn_track(track_id, det, frame, cfg) -> Track:
    params = kalman_params(cfg)
    bank = stack_append(FeatureBank.from_config(cfg), det, cfg.alpha)
    track = Track(track_id, det.class_id, initiate(det.box.to_xyah(), params), bank, frame, det.conf)
    if track.hits >= cfg.n_init:
        track.status = TrackStatus.CONFIRMED
    return track


def lifecycle_step(tracks: List[Track], assignment: Assignment, dets, frame, cfg, id_source,
                   diagnostics=None):
    """
    Apply one frame's assignment.

    Returns the surviving tracks (existing ones first, then the new ones in
    detection order) and the trajectories of confirmed tracks deleted this
    frame. ``id_source`` is an iterator of fresh track ids.
    """
    by_id = {t.track_id: t for t in tracks}
    finished = []

    for track_id, det_index in assignment.matches:
        track = by_id[track_id]
        det = dets[det_index]
        class_cfg = cfg.for_class(track.class_id)
        track.kalman = update(track.kalman, det.box.to_xyah(), det.conf, kalman_params(class_cfg),
                              nsa=class_cfg.nsa, diagnostics=diagnostics)
        track.bank = stack_append(track.bank, det, class_cfg.alpha)
        track.age_since_update = 0
        track.hits += 1
        if track.is_tentative and track.hits >= class_cfg.n_init:
            track.status = TrackStatus.CONFIRMED
            log.debug('Track %d confirmed at frame %d', track.track_id, frame)
        track.record(frame, det.conf)

    for track_id in assignment.unmatched_tracks:
        track = by_id[track_id]
        class_cfg = cfg.for_class(track.class_id)
        track.age_since_update += 1
        if track.is_tentative:
            track.status = TrackStatus.DELETED
        elif track.age_since_update > class_cfg.age_max:
            track.status = TrackStatus.DELETED
            finished.append(track.to_trajectory(class_cfg.bank_size))
            log.debug('Track %d finished at frame %d after %d misses', track.track_id, frame,
                      track.age_since_update)

    survivors = [t for t in tracks if not t.is_deleted]
    for det_index in sorted(assignment.unmatched_dets):
        det = dets[det_index]
        class_cfg = cfg.for_class(det.class_id)
        survivors.append(spawn_track(next(id_source), det, frame, class_cfg))

    return survivors, finished
