import numpy as np
import pytest

from featuresort.kalman import (KalmanDiagnostics, KalmanParams, KalmanState, gating_distance, initiate,
                                nsa_noise, predict, update)

PARAMS = KalmanParams()


def dense_update(state, z, conf, params):
    """
    Textbook Kalman update with an explicit inverse.
    """
    H = params.update_mat
    R = (1.0 - conf) * params.measurement_noise(state.mean)
    S = H @ state.covariance @ H.T + R
    K = state.covariance @ H.T @ np.linalg.inv(S)
    mean = state.mean + K @ (z - H @ state.mean)
    covariance = (np.eye(8) - K @ H) @ state.covariance
    return mean, 0.5 * (covariance + covariance.T)


def test_update_matches_dense_oracle_over_many_cycles(rng):
    truth = np.array([500.0, 400.0, 0.4, 100.0])
    state = initiate(truth, PARAMS)
    for _ in range(1000):
        state = predict(state, PARAMS)
        truth = truth + np.r_[rng.normal(0, 1.0, size=2), 0.0, 0.0]
        z = truth + np.r_[rng.normal(0, 2.0, size=2), rng.normal(0, 0.01), rng.normal(0, 1.0)]
        conf = float(rng.uniform(0.0, 0.95))

        expected_mean, expected_cov = dense_update(state, z, conf, PARAMS)
        state = update(state, z, conf, PARAMS)

        assert np.allclose(state.mean, expected_mean, rtol=1e-9, atol=1e-9)
        assert np.allclose(state.covariance, expected_cov, rtol=1e-9, atol=1e-9)
        eigenvalues = np.linalg.eigvalsh(state.covariance)
        assert eigenvalues.min() >= -1e-9 * eigenvalues.max()


def test_full_confidence_lands_on_measurement():
    state = predict(initiate([100.0, 100.0, 0.5, 80.0], PARAMS), PARAMS)
    z = np.array([104.0, 97.0, 0.5, 82.0])
    updated = update(state, z, 1.0, PARAMS)
    assert np.allclose(PARAMS.update_mat @ updated.mean, z, rtol=0.0, atol=1e-8)


def test_huge_measurement_noise_keeps_prior():
    state = predict(initiate([100.0, 100.0, 0.5, 80.0], PARAMS), PARAMS)
    noisy = KalmanParams(std_weight_position=1e6, std_aspect_measurement=1e6)
    updated = update(state, [140.0, 60.0, 0.5, 120.0], 0.9, noisy, nsa=False)
    assert np.allclose(updated.mean, state.mean, rtol=1e-6, atol=1e-6)


def test_predict_without_process_noise():
    quiet = KalmanParams(std_weight_position=0.0, std_weight_velocity=0.0, std_aspect=0.0, std_aspect_velocity=0.0)
    state = KalmanState(np.array([10.0, 20.0, 0.5, 50.0, 1.0, -2.0, 0.0, 0.5]), np.diag(np.arange(1.0, 9.0)))
    predicted = predict(state, quiet)

    G = quiet.motion_mat
    assert predicted.mean == pytest.approx([11.0, 18.0, 0.5, 50.5, 1.0, -2.0, 0.0, 0.5])
    assert np.allclose(predicted.covariance, G @ state.covariance @ G.T)


def test_nsa_noise_examples():
    R = np.diag([4.0, 4.0, 0.01, 4.0])
    assert np.allclose(nsa_noise(R, 0.75), np.diag([1.0, 1.0, 0.0025, 1.0]))
    assert np.allclose(nsa_noise(R, 1.0), np.zeros((4, 4)))
    assert np.allclose(nsa_noise(R, 0.0), R)


def test_nsa_noise_clamps_out_of_range_conf():
    diagnostics = KalmanDiagnostics()
    R = np.diag([4.0, 4.0, 0.01, 4.0])
    assert np.allclose(nsa_noise(R, 1.2, diagnostics), np.zeros((4, 4)))
    assert np.allclose(nsa_noise(R, -0.5, diagnostics), R)
    assert diagnostics.clamped_conf == 2


def test_higher_confidence_pulls_harder():
    state = predict(initiate([100.0, 100.0, 0.5, 80.0], PARAMS), PARAMS)
    z = np.array([110.0, 95.0, 0.5, 80.0])
    distances = [np.linalg.norm(update(state, z, conf, PARAMS).mean[:2] - z[:2])
                 for conf in (0.0, 0.25, 0.5, 0.75, 0.95)]
    assert all(b <= a for a, b in zip(distances, distances[1:]))
    assert distances[-1] < distances[0]


def test_stationary_target_converges():
    truth = np.array([300.0, 200.0, 0.4, 100.0])
    state = initiate(truth + [5.0, -5.0, 0.0, 0.0], PARAMS)
    for _ in range(10):
        state = update(predict(state, PARAMS), truth, 0.9, PARAMS)
    assert np.linalg.norm(state.mean[:2] - truth[:2]) < 0.5


def test_singular_innovation_is_regularized():
    diagnostics = KalmanDiagnostics()
    state = KalmanState(np.array([10.0, 10.0, 0.5, 20.0, 0, 0, 0, 0]), np.zeros((8, 8)))
    updated = update(state, [11.0, 10.0, 0.5, 20.0], 1.0, PARAMS, diagnostics=diagnostics)
    assert diagnostics.regularized == 1
    assert np.all(np.isfinite(updated.mean))


def test_gating_distance_example():
    state = initiate([100.0, 100.0, 0.5, 50.0], PARAMS)
    assert gating_distance(state, [103.0, 104.0, 0.5, 50.0], 1000.0) == pytest.approx(0.005)
