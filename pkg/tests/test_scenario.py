import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simbf.config import SystemConfig, desk_config
from simbf.scenario import (
    build_geometry,
    correlation_matrix,
    generate_channels,
    path_loss,
    psd_sqrt,
    sample_channel,
    sample_users,
    user_angles,
)


def test_grid_pitch_and_reference_atom():
    cfg = SystemConfig()
    g = build_geometry(cfg)
    layer = g.layer_positions[0]
    assert layer.shape == (49, 3)
    np.testing.assert_allclose(layer[0], 0.0)
    np.testing.assert_allclose(layer[1] - layer[0], [0, 0, 0.00535], atol=1e-15)
    np.testing.assert_allclose(layer[7] - layer[0], [0.00535, 0, 0], atol=1e-15)
    assert np.all(layer[:, 1] == 0.0)


def test_layers_stack_along_y():
    cfg = SystemConfig(num_layers=4)
    g = build_geometry(cfg)
    gaps = np.diff(g.layer_positions[:, 0, 1])
    np.testing.assert_allclose(gaps, 5 * 0.0107 / 3)
    # every inter-layer distance is at least the spacing
    d = np.linalg.norm(g.layer_positions[1][:, None] - g.layer_positions[0][None], axis=-1)
    assert d.min() >= 5 * 0.0107 / 3 - 1e-15


def test_single_layer_geometry():
    g = build_geometry(SystemConfig(num_layers=1))
    assert g.layer_positions.shape == (1, 49, 3)
    assert np.all(g.layer_positions[0, :, 1] == 0.0)
    np.testing.assert_allclose(g.bs_antenna_positions[:, 1], -5 * 0.0107)


def test_bs_is_z_ula():
    g = build_geometry(SystemConfig())
    bs = g.bs_antenna_positions
    assert np.ptp(bs[:, 0]) == 0 and np.ptp(bs[:, 1]) == 0
    np.testing.assert_allclose(np.diff(bs[:, 2]), 0.00535)


def test_users_deterministic_and_inside_disk():
    cfg = SystemConfig(seed=5)
    a, _ = sample_users(cfg, np.random.default_rng(5))
    b, _ = sample_users(cfg, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert np.all(np.linalg.norm(a - np.array(cfg.cluster_center), axis=1) <= cfg.cluster_radius)


def test_users_uniform_over_disk():
    # mean distance from the centre of a uniform disk is 2R/3
    cfg = SystemConfig(num_users=4, num_antennas=4)
    rng = np.random.default_rng(0)
    pos = np.concatenate([sample_users(cfg, rng)[0] for _ in range(2500)])
    r = np.linalg.norm(pos - np.array(cfg.cluster_center), axis=1)
    assert r.mean() == pytest.approx(2 * 50 / 3, rel=0.01)
    # and the mean squared radius is R^2 / 2
    assert (r**2).mean() == pytest.approx(50**2 / 2, rel=0.02)


def test_angles_follow_position():
    az, pol = user_angles(np.array([[0.0, 60.0, 0.0], [10.0, 10.0, 0.0]]))
    np.testing.assert_allclose(az, [0.0, np.pi / 4])
    np.testing.assert_allclose(pol, [np.pi / 2, np.pi / 2])


def test_path_loss_values():
    cfg = SystemConfig()
    assert path_loss(cfg, 1.0) == pytest.approx(10 ** -2.805, rel=1e-12)
    assert path_loss(cfg, 1.0) == pytest.approx(1.5668e-3, rel=1e-4)
    assert path_loss(cfg, 2.0) / path_loss(cfg, 1.0) == pytest.approx(0.125)
    flat = SystemConfig(gain_bs_dbi=0.0)
    assert path_loss(flat, 1.0) == pytest.approx(10 ** -3.305, rel=1e-12)
    with pytest.raises(ValueError):
        path_loss(cfg, 0.0)


@given(st.floats(0.1, 500), st.floats(0.1, 500))
def test_path_loss_decreasing(d1, d2):
    cfg = SystemConfig()
    if d1 < d2:
        assert path_loss(cfg, d1) > path_loss(cfg, d2)


def test_path_loss_increasing_in_gain():
    assert path_loss(SystemConfig(gain_user_dbi=1.0), 10.0) > path_loss(SystemConfig(), 10.0)


def test_correlation_zero_azimuth_all_ones():
    np.testing.assert_allclose(correlation_matrix(0.0, 1.0, 5), np.ones((5, 5)))


@settings(max_examples=50, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(0, np.pi), st.integers(1, 25))
def test_correlation_structure(psi, phi, n):
    r = correlation_matrix(psi, phi, n)
    assert np.max(np.abs(r - r.conj().T)) < 1e-12
    assert np.all(np.diag(r) == 1.0)
    ev = np.linalg.eigvalsh(r)
    np.testing.assert_allclose(ev[-1], n, rtol=1e-10)
    assert np.all(np.abs(ev[:-1]) < 1e-9 * n)


def test_sample_channel_zero_gain():
    h = sample_channel(0.0, np.eye(4), np.random.default_rng(0))
    assert np.all(h == 0)


def test_sample_channel_white():
    h = sample_channel(1.0, np.eye(4), np.random.default_rng(0), size=100_000)
    cov = h.T @ h.conj() / len(h)
    np.testing.assert_allclose(np.diag(cov).real, 1.0, atol=0.02)
    assert np.max(np.abs(cov - np.diag(np.diag(cov)))) < 0.02


def test_sample_channel_covariance():
    r = correlation_matrix(0.4, 1.2, 6)
    beta = 2.5
    h = sample_channel(beta, r, np.random.default_rng(1), size=100_000)
    cov = h.T @ h.conj() / len(h)
    assert np.linalg.norm(cov - beta * r) / np.linalg.norm(beta * r) < 0.05


def test_rank_one_samples_stay_in_column_space():
    r = correlation_matrix(0.7, 1.1, 9)
    u = np.linalg.eigh(r)[1][:, -1:]
    h = sample_channel(1.0, r, np.random.default_rng(2), size=200)
    resid = h - (h @ u.conj()) @ u.T
    assert np.max(np.linalg.norm(resid, axis=1)) < 1e-9


def test_non_psd_rejected():
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_channels_bit_reproducible():
    cfg = desk_config(seed=11)
    a, b = generate_channels(cfg), generate_channels(cfg)
    for x, y in [(a.h, b.h), (a.w1, b.w1), (a.wl[0], b.wl[0])]:
        assert x.tobytes() == y.tobytes()
    assert all(link.distance > 0 and link.path_loss > 0 for link in a.links)
