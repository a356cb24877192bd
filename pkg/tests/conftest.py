import numpy as np
import pytest

from simbf.config import SystemConfig, desk_config
from simbf.scenario import generate_channels


def tiny_config(seed=0, **kw):
    """Two users, a 2x2 layer, one layer: small enough for brute force."""
    base = dict(
        num_antennas=2, num_users=2, meta_atoms=4, num_layers=1, p_max_dbm=10.0,
        admm_penalty=10.0, max_inner=500, max_outer=800, max_gm=800, seed=seed,
    )  # fmt: skip
    base.update(kw)
    return SystemConfig(**base)


@pytest.fixture
def desk():
    cfg = desk_config(seed=3, p_max_dbm=10.0)
    return cfg, generate_channels(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_phases(rng, channels):
    return rng.uniform(0.0, 2 * np.pi, (channels.num_layers, channels.num_atoms))


def random_power(rng, channels, full=False):
    d = np.abs(rng.standard_normal(channels.num_users)) + 1e-3
    scale = 1.0 if full else rng.uniform()
    return d * np.sqrt(channels.p_max * scale) / np.linalg.norm(d)
