"""
Constant-velocity Kalman filter over (cx, cy, a, h) boxes with
confidence-adaptive (NSA) measurement noise.

The 8-dimensional state is

    cx, cy, a, h, vcx, vcy, va, vh

where (cx, cy) is the box center, a = w / h the aspect ratio and h the
height. Process and measurement noise scale with the box height.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

NDIM = 4
REGULARIZATION = 1e-9


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def copy(self):
        return KalmanState(self.mean.copy(), self.covariance.copy())


@dataclass(frozen=True)
class KalmanParams:
    dt: float = 1.0
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    std_aspect: float = 1e-2
    std_aspect_velocity: float = 1e-5
    std_aspect_measurement: float = 1e-1
    min_size: float = 1e-3

    @cached_property
    def motion_mat(self):
        G = np.eye(2 * NDIM)
        for i in range(NDIM):
            G[i, NDIM + i] = self.dt
        return G

    @cached_property
    def update_mat(self):
        return np.eye(NDIM, 2 * NDIM)

    def process_noise(self, mean):
        h = mean[3]
        std = [
            self.std_weight_position * h,
            self.std_weight_position * h,
            self.std_aspect,
            self.std_weight_position * h,
            self.std_weight_velocity * h,
            self.std_weight_velocity * h,
            self.std_aspect_velocity,
            self.std_weight_velocity * h,
        ]
        return np.diag(np.square(std))

    def measurement_noise(self, mean):
        h = mean[3]
        std = [
            self.std_weight_position * h,
            self.std_weight_position * h,
            self.std_aspect_measurement,
            self.std_weight_position * h,
        ]
        return np.diag(np.square(std))

    @classmethod
    def from_config(cls, cfg):
        return cls(std_weight_position=cfg.std_weight_position, std_weight_velocity=cfg.std_weight_velocity)


@lru_cache(maxsize=64)
def kalman_params(cfg) -> KalmanParams:
    return KalmanParams.from_config(cfg)


@dataclass
class KalmanDiagnostics:
    updates: int = 0
    regularized: int = 0
    clamped_conf: int = 0
    events: list = field(default_factory=list)


def initiate(measurement, params: KalmanParams) -> KalmanState:
    """
    Start a track from an unassociated (cx, cy, a, h) measurement with zero
    velocity.
    """
    measurement = np.asarray(measurement, dtype=float)
    mean = np.r_[measurement, np.zeros(NDIM)]
    h = measurement[3]
    std = [
        2 * params.std_weight_position * h,
        2 * params.std_weight_position * h,
        params.std_aspect,
        2 * params.std_weight_position * h,
        10 * params.std_weight_velocity * h,
        10 * params.std_weight_velocity * h,
        params.std_aspect_velocity,
        10 * params.std_weight_velocity * h,
    ]
    return KalmanState(mean, np.diag(np.square(std)))


def predict(state: KalmanState, params: KalmanParams) -> KalmanState:
    G = params.motion_mat
    mean = G @ state.mean
    covariance = np.linalg.multi_dot((G, state.covariance, G.T)) + params.process_noise(state.mean)
    return KalmanState(mean, covariance)


def nsa_noise(R, conf, diagnostics: Optional[KalmanDiagnostics] = None):
    """
    Scale the measurement noise by (1 - conf): confident detections pull the
    state harder.
    """
    conf = float(conf)
    if not 0.0 <= conf <= 1.0:
        log.warning('Detection confidence %.4f outside [0, 1]; clamping', conf)
        if diagnostics is not None:
            diagnostics.clamped_conf += 1
        conf = min(1.0, max(0.0, conf))
    return (1.0 - conf) * np.asarray(R, dtype=float)


def project(state: KalmanState, params: KalmanParams, R=None):
    H = params.update_mat
    projected_mean = H @ state.mean
    projected_cov = np.linalg.multi_dot((H, state.covariance, H.T))
    if R is not None:
        projected_cov = projected_cov + R
    return projected_mean, projected_cov


def update(state: KalmanState, z, conf: float, params: KalmanParams, nsa: bool = True,
           diagnostics: Optional[KalmanDiagnostics] = None) -> KalmanState:
    z = np.asarray(z, dtype=float)
    R = params.measurement_noise(state.mean)
    if nsa:
        R = nsa_noise(R, conf, diagnostics)
    projected_mean, S = project(state, params, R)

    H = params.update_mat
    PHt = state.covariance @ H.T
    try:
        factor = scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        log.warning('Innovation covariance is singular; adding %.0e * I', REGULARIZATION)
        if diagnostics is not None:
            diagnostics.regularized += 1
            diagnostics.events.append('regularized')
        factor = scipy.linalg.cho_factor(S + REGULARIZATION * np.eye(NDIM), lower=True, check_finite=False)

    gain = scipy.linalg.cho_solve(factor, PHt.T, check_finite=False).T
    innovation = z - projected_mean

    mean = state.mean + gain @ innovation
    covariance = (np.eye(2 * NDIM) - gain @ H) @ state.covariance
    covariance = 0.5 * (covariance + covariance.T)
    mean[3] = max(mean[3], params.min_size)
    mean[2] = max(mean[2], params.min_size)

    if diagnostics is not None:
        diagnostics.updates += 1
    return KalmanState(mean, covariance)


def gating_distance(state: KalmanState, z, frame_diagonal: float, dims: int = 2) -> float:
    """
    Euclidean distance between the predicted and measured box centers,
    divided by the frame diagonal. ``dims=4`` compares the full
    (cx, cy, a, h) projection instead.
    """
    z = np.asarray(z, dtype=float)
    delta = state.mean[:dims] - z[:dims]
    return float(np.sqrt(np.dot(delta, delta)) / frame_diagonal)


def center_distances(means, measurements, frame_diagonal):
    """
    Vectorised gating_distance between (T, 8) state means and (D, 4)
    measurements.
    """
    means = np.asarray(means, dtype=float).reshape(-1, 2 * NDIM)
    measurements = np.asarray(measurements, dtype=float).reshape(-1, NDIM)
    delta = means[:, None, :2] - measurements[None, :, :2]
    return np.sqrt(np.sum(delta * delta, axis=2)) / frame_diagonal
