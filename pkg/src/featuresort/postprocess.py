"""
Offline refinement of finished trajectories.

Short gaps are filled by linear interpolation and every trajectory is then
smoothed with a Gaussian process over the frame index (fixed RBF kernel,
one independent process per box coordinate). Fragments of the same object
are joined by global linking: temporally disjoint, spatially close pairs
are matched on the cosine distance of their embedding banks.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel

from .config import GspConfig, LinkConfig
from .features import MAX_COSINE_DISTANCE
from .structures import BBox, Trajectory, TrajectoryPoint

log = logging.getLogger(__name__)

UNLINKABLE = MAX_COSINE_DISTANCE + 1.0


@dataclass(frozen=True)
class LinkRecord:
    earlier_id: int
    later_id: int
    gap: int
    spatial: float
    distance: float

    @property
    def similarity(self):
        return 1.0 - self.distance


def linear_fill(traj: Trajectory, max_gap: int) -> Trajectory:
    """
    Fill every internal run of at most ``max_gap`` missing frames by
    per-coordinate linear interpolation. Longer gaps are left open.
    """
    if len(traj) < 2:
        return traj

    points = [traj.points[0]]
    for prev, nxt in zip(traj.points, traj.points[1:]):
        missing = nxt.frame - prev.frame - 1
        if 0 < missing <= max_gap:
            start = prev.box.as_array()
            end = nxt.box.as_array()
            span = float(nxt.frame - prev.frame)
            for frame in range(prev.frame + 1, nxt.frame):
                weight = (frame - prev.frame) / span
                x, y, w, h = start + weight * (end - start)
                conf = prev.conf + weight * (nxt.conf - prev.conf)
                points.append(TrajectoryPoint(frame, BBox(x, y, w, h), conf, interpolated=True))
        points.append(nxt)

    return Trajectory(traj.track_id, traj.class_id, points, list(traj.embedding_bank))


def _regressor(cfg: GspConfig):
    kernel = ConstantKernel(cfg.signal_var, 'fixed') * RBF(cfg.length_scale, 'fixed')
    return GaussianProcessRegressor(kernel=kernel, alpha=cfg.noise_var, optimizer=None)


def gsp_predict(frames, values, query, cfg: GspConfig):
    """
    Posterior mean at ``query`` frames of a zero-mean process fitted to the
    mean-centered ``values`` (one column per coordinate) observed at
    ``frames``.
    """
    t = np.asarray(frames, dtype=float).reshape(-1, 1)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    mean = values.mean(axis=0)

    regressor = _regressor(cfg)
    regressor.fit(t, values - mean)
    predicted = regressor.predict(np.asarray(query, dtype=float).reshape(-1, 1))
    return np.asarray(predicted).reshape(-1, values.shape[1]) + mean


def gsp_smooth(traj: Trajectory, cfg: GspConfig) -> Trajectory:
    if len(traj) < 2:
        return traj

    frames = traj.frames
    try:
        smoothed = gsp_predict(frames, traj.boxes_array(), frames, cfg)
    except (np.linalg.LinAlgError, ValueError) as e:
        log.warning('GSP smoothing failed for trajectory %d, keeping it as is: %s', traj.track_id, e)
        return traj

    smoothed[:, 2:] = np.maximum(smoothed[:, 2:], cfg.min_size)
    points = [TrajectoryPoint(p.frame, BBox(*row), p.conf, p.interpolated) for p, row in zip(traj.points, smoothed)]
    return Trajectory(traj.track_id, traj.class_id, points, list(traj.embedding_bank))


def link_cost(a: Trajectory, b: Trajectory) -> float:
    """
    Smallest cosine distance between the two embedding banks, 2 when either
    bank is empty.
    """
    if not len(a.embedding_bank) or not len(b.embedding_bank):
        return MAX_COSINE_DISTANCE
    similarity = np.asarray(a.embedding_bank) @ np.asarray(b.embedding_bank).T
    return float(np.clip(1.0 - similarity, 0.0, MAX_COSINE_DISTANCE).min())


def center_gap(a: Trajectory, b: Trajectory) -> float:
    ax, ay = a.last_box.center
    bx, by = b.first_box.center
    return float(np.hypot(bx - ax, by - ay))


def link_admissible(a: Trajectory, b: Trajectory, cfg: LinkConfig) -> bool:
    if a.class_id != b.class_id:
        return False
    gap = b.first_frame - a.last_frame
    if not 0 < gap <= cfg.temporal_max:
        return False
    return center_gap(a, b) <= cfg.spatial_max


def subsample_bank(bank, size):
    """
    Keep ``size`` entries spread evenly over the bank, first and last
    included.
    """
    if len(bank) <= size:
        return list(bank)
    keep = np.unique(np.round(np.linspace(0, len(bank) - 1, size)).astype(int))
    return [bank[i] for i in keep]


def _merge_chain(chain, fill_gap, bank_size, gsp_cfg):
    head = chain[0]
    points = [p for traj in chain for p in traj.points]
    bank = [v for traj in chain for v in traj.embedding_bank]
    merged = Trajectory(head.track_id, head.class_id, points, subsample_bank(bank, bank_size))
    merged = linear_fill(merged, fill_gap)
    if gsp_cfg is not None:
        merged = gsp_smooth(merged, gsp_cfg)
    return merged


def _link_round(trajs, cfg, records):
    """
    One Hungarian pass over every admissible (earlier, later) pair of one
    class. Returns accepted (earlier, later) index pairs.
    """
    n = len(trajs)
    costs = np.full((n, n), UNLINKABLE)
    for i, a in enumerate(trajs):
        for j, b in enumerate(trajs):
            if i != j and link_admissible(a, b, cfg):
                costs[i, j] = link_cost(a, b)

    rows = np.flatnonzero((costs < UNLINKABLE).any(axis=1))
    cols = np.flatnonzero((costs < UNLINKABLE).any(axis=0))
    if not len(rows):
        return []

    accepted = []
    sub_rows, sub_cols = linear_sum_assignment(costs[np.ix_(rows, cols)])
    for r, c in zip(sub_rows, sub_cols):
        i, j = rows[r], cols[c]
        distance = costs[i, j]
        if distance >= UNLINKABLE or 1.0 - distance < cfg.accept_sim:
            continue
        a, b = trajs[i], trajs[j]
        records.append(LinkRecord(a.track_id, b.track_id, b.first_frame - a.last_frame, center_gap(a, b),
                                  float(distance)))
        accepted.append((i, j))
    return accepted


def _chains(n, accepted):
    successor = dict(accepted)
    has_predecessor = {j for _, j in accepted}
    chains = []
    for start in range(n):
        if start in has_predecessor:
            continue
        chain = [start]
        while chain[-1] in successor:
            chain.append(successor[chain[-1]])
        chains.append(chain)
    return chains


def global_link(trajs: List[Trajectory], cfg: LinkConfig, gsp_cfg: Optional[GspConfig] = None,
                fill_gap: Optional[int] = None, bank_size: int = 16,
                records: Optional[list] = None) -> List[Trajectory]:
    """
    Merge fragments of the same object until no admissible pair clears
    ``accept_sim``. A merged trajectory keeps the earlier fragment's id; its
    gaps are linearly filled (up to ``fill_gap`` frames, default the temporal
    gate) and smoothed when ``gsp_cfg`` is given. Accepted merges are
    appended to ``records``.
    """
    if records is None:
        records = []
    fill_gap = cfg.temporal_max if fill_gap is None else fill_gap

    by_class = {}
    for traj in trajs:
        by_class.setdefault(traj.class_id, []).append(traj)

    result = []
    for class_id in sorted(by_class):
        current = sorted(by_class[class_id], key=lambda t: t.track_id)
        while True:
            accepted = _link_round(current, cfg, records)
            if not accepted:
                break
            merged = []
            for chain in _chains(len(current), accepted):
                if len(chain) == 1:
                    merged.append(current[chain[0]])
                else:
                    merged.append(_merge_chain([current[i] for i in chain], fill_gap, bank_size, gsp_cfg))
                    log.debug('Linked trajectories %s into %d', [current[i].track_id for i in chain],
                              current[chain[0]].track_id)
            current = sorted(merged, key=lambda t: t.track_id)
        result.extend(current)

    return sorted(result, key=lambda t: t.track_id)


def postprocess(trajs: List[Trajectory], gsp_cfg: GspConfig, link_cfg: LinkConfig, bank_size: int = 16,
                records: Optional[list] = None) -> List[Trajectory]:
    """
    Global linking (fill only) followed by per-trajectory linear fill and
    GSP smoothing, each stage skipped when disabled.
    """
    result = list(trajs)
    if link_cfg.enabled:
        result = global_link(result, link_cfg, fill_gap=gsp_cfg.max_gap, bank_size=bank_size, records=records)
    if gsp_cfg.enabled:
        result = [gsp_smooth(linear_fill(t, gsp_cfg.max_gap), gsp_cfg) for t in result]
    log.info('Post-processing produced %d trajectories from %d', len(result), len(trajs))
    return result
