"""
Appearance side of association: the per-track feature bank and the
edge (embedding), color, style and direction distances computed from it.

Color and style distances are binary cross-entropies summed over the
attribute bins, taking the minimum over the track's stack of past
observations. Direction compares a detection's 72-bin heading
distribution against a circular Gaussian centered on the track's last
heading bin.
"""
import logging
from collections import deque
from functools import lru_cache
from typing import Optional

import numpy as np

from .structures import DIRECTION_BINS, EPS_PROB

log = logging.getLogger(__name__)

MAX_COSINE_DISTANCE = 2.0


class FeatureBank(object):
    """
    Appearance memory of one track.

    ``colors`` and ``styles`` are ring buffers of the last ``stack_len``
    observations. ``direction_bin`` only ever holds the latest heading.
    ``ema`` is the unit-norm moving average of the embeddings and
    ``ema_snapshots`` samples it every ``snapshot_period`` updates for the
    offline linker. ``gallery`` keeps raw embeddings for the gallery
    distance mode.
    """

    def __init__(self, stack_len=30, bank_size=16, snapshot_period=5, gallery_budget=100):
        self.stack_len = stack_len
        self.bank_size = bank_size
        self.snapshot_period = snapshot_period
        self.gallery_budget = gallery_budget
        self.colors = deque(maxlen=stack_len)
        self.styles = deque(maxlen=stack_len)
        self.direction_bin = None
        self.ema = None
        self.ema_snapshots = deque(maxlen=bank_size)
        self.gallery = deque(maxlen=gallery_budget)
        self.updates = 0

    @classmethod
    def from_config(cls, cfg):
        return cls(stack_len=cfg.stack_len, bank_size=cfg.bank_size,
                   snapshot_period=cfg.snapshot_period, gallery_budget=cfg.gallery_budget)

    def copy(self):
        other = FeatureBank(self.stack_len, self.bank_size, self.snapshot_period, self.gallery_budget)
        other.colors.extend(self.colors)
        other.styles.extend(self.styles)
        other.direction_bin = self.direction_bin
        other.ema = self.ema
        other.ema_snapshots.extend(self.ema_snapshots)
        other.gallery.extend(self.gallery)
        other.updates = self.updates
        return other


def cosine_distance(e, f) -> float:
    value = 1.0 - float(np.dot(e, f))
    return min(MAX_COSINE_DISTANCE, max(0.0, value))


def edge_distance(bank: FeatureBank, f, mode='ema') -> float:
    if mode == 'gallery' and bank.gallery:
        gallery = np.asarray(bank.gallery)
        return float(np.clip(1.0 - gallery @ f, 0.0, MAX_COSINE_DISTANCE).min())
    if bank.ema is None:
        return MAX_COSINE_DISTANCE
    return cosine_distance(bank.ema, f)


def ema_update(bank: FeatureBank, f, alpha: float) -> FeatureBank:
    updated = bank.copy()
    f = np.asarray(f, dtype=float)
    if updated.ema is None:
        ema = f.copy()
    else:
        blended = alpha * updated.ema + (1.0 - alpha) * f
        norm = np.linalg.norm(blended)
        # antipodal vectors at alpha=0.5 cancel out
        ema = blended / norm if norm > 0 else f.copy()

    updated.ema = ema
    updated.gallery.append(f)
    if updated.updates % updated.snapshot_period == 0:
        updated.ema_snapshots.append(ema)
    updated.updates += 1
    return updated


def ce_vector_distance(a, b, eps_prob: float = EPS_PROB) -> float:
    """
    Binary cross-entropy summed over bins, ``a`` on the label side and ``b``
    on the prediction side.
    """
    a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
    b = np.clip(np.asarray(b, dtype=float), eps_prob, 1.0 - eps_prob)
    return float(-np.sum(a * np.log(b) + (1.0 - a) * np.log1p(-b)))


def ce_matrix(labels, predictions, eps_prob: float = EPS_PROB):
    """
    ce_vector_distance for every (label row, prediction row) pair.
    """
    labels = np.clip(np.asarray(labels, dtype=float), 0.0, 1.0)
    predictions = np.clip(np.asarray(predictions, dtype=float), eps_prob, 1.0 - eps_prob)
    return -(labels @ np.log(predictions).T + (1.0 - labels) @ np.log1p(-predictions).T)


def _stack_distance(stack, query) -> Optional[float]:
    if not stack:
        return None
    return float(ce_matrix(np.asarray(stack), np.asarray(query)[None, :]).min())


def color_distance(bank: FeatureBank, c) -> Optional[float]:
    """
    Smallest cross-entropy between the stacked colors and ``c``; None when
    the stack is still empty.
    """
    return _stack_distance(bank.colors, c)


def style_distance(bank: FeatureBank, s) -> Optional[float]:
    return _stack_distance(bank.styles, s)


def circular_bin_distance(a, b, bins=DIRECTION_BINS):
    d = abs(int(a) - int(b)) % bins
    return min(d, bins - d)


def circular_gaussian(gtd: int, k: int, sigma: float, bins: int = DIRECTION_BINS) -> float:
    d = circular_bin_distance(gtd, k, bins)
    return float(np.exp(-float(d * d) / (2.0 * sigma * sigma)) / np.sqrt(2.0 * np.pi * sigma * sigma))


@lru_cache(maxsize=1024)
def _template(gtd, sigma, bins):
    template = np.array([circular_gaussian(gtd, k, sigma, bins) for k in range(bins)])
    template.setflags(write=False)
    return template


def direction_template(gtd: int, sigma: float, bins: int = DIRECTION_BINS):
    """
    Unnormalized circular Gaussian over the heading bins, peaked at ``gtd``.
    """
    return _template(int(gtd) % bins, float(sigma), int(bins))


def direction_distance(bank: FeatureBank, p, sigma: float) -> Optional[float]:
    """
    Sum of squared residuals between ``p`` and the template centered on the
    stored heading; None when the track has no heading yet.
    """
    if bank.direction_bin is None:
        return None
    residual = np.asarray(p, dtype=float) - direction_template(bank.direction_bin, sigma, len(p))
    return float(np.dot(residual, residual))


def stack_append(bank: FeatureBank, det, alpha: float) -> FeatureBank:
    updated = ema_update(bank, det.embedding, alpha)
    updated.colors.append(np.asarray(det.color, dtype=float))
    updated.styles.append(np.asarray(det.style, dtype=float))
    # np.argmax keeps the lowest index on ties
    updated.direction_bin = int(np.argmax(det.direction))
    return updated
