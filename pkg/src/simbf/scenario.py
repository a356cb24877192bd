"""Geometry, user placement and seeded channel generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True)
class Geometry:
    bs_antenna_positions: np.ndarray  # (M, 3)
    layer_positions: np.ndarray  # (L, N, 3)
    user_positions: np.ndarray  # (K, 3)


@dataclass(frozen=True)
class UserLink:
    distance: float
    azimuth: float
    elevation: float
    path_loss: float


@dataclass(frozen=True)
class ChannelSet:
    """Everything a solver needs: transfer matrices, user channels and noise.

    ``h`` has one row per user; the received amplitude from antenna ``m`` at
    user ``k`` is ``h[k].conj() @ G @ w1[:, m]``.
    """

    w1: np.ndarray  # (N, M)
    wl: tuple  # L-1 arrays (N, N), layer 2..L
    h: np.ndarray  # (K, N)
    noise: np.ndarray  # (K,) watts
    p_max: float  # watts
    links: tuple = ()
    geometry: Geometry | None = None

    @property
    def num_users(self) -> int:
        return self.h.shape[0]

    @property
    def num_atoms(self) -> int:
        return self.h.shape[1]

    @property
    def num_layers(self) -> int:
        return len(self.wl) + 1


def _layer_grid(cfg: SystemConfig) -> np.ndarray:
    pitch = 0.5 * cfg.wavelength
    idx = np.arange(cfg.side) * pitch
    gx, gz = np.meshgrid(idx, idx, indexing="ij")
    # atom n = ix * side + iz; reference atom at the origin
    return np.stack([gx.ravel(), np.zeros(cfg.meta_atoms), gz.ravel()], axis=1)


def build_geometry(cfg: SystemConfig, user_positions=None) -> Geometry:
    """Place the BS array and the metasurface layers.

    Layers are parallel to the x-z plane and stacked along +y. The BS array
    is a z-oriented ULA centred on the aperture, one layer pitch behind
    layer 1 (``thickness`` behind it for a single layer).
    """
    cfg.validate()
    grid = _layer_grid(cfg)
    spacing = cfg.layer_spacing
    layers = np.stack([grid + np.array([0.0, l * spacing, 0.0]) for l in range(cfg.num_layers)])

    centre = 0.5 * (cfg.side - 1) * 0.5 * cfg.wavelength
    m = np.arange(cfg.num_antennas)
    z = centre + (m - 0.5 * (cfg.num_antennas - 1)) * 0.5 * cfg.wavelength
    bs = np.stack([np.full_like(z, centre), np.full_like(z, -spacing), z], axis=1)

    if user_positions is None:
        user_positions = np.empty((0, 3))
    return Geometry(bs, layers, np.asarray(user_positions, dtype=float))


def user_angles(positions):
    """Azimuth in the x-y plane measured from the +y boresight, and polar angle from +z.

    With this convention ``sin(azimuth) * sin(polar)`` is the direction
    cosine along the x axis of the surface.
    """
    p = np.atleast_2d(positions)
    azimuth = np.arctan2(p[:, 0], p[:, 1])
    polar = np.arctan2(np.hypot(p[:, 0], p[:, 1]), p[:, 2])
    return azimuth, polar


def sample_users(cfg: SystemConfig, rng: np.random.Generator):
    """Draw K users uniformly (by area) over the horizontal cluster disk.

    Returns ``(positions, (azimuth, polar))``.
    """
    k = cfg.num_users
    radius = cfg.cluster_radius * np.sqrt(rng.random(k))
    phi = 2.0 * np.pi * rng.random(k)
    cx, cy, cz = cfg.cluster_center
    pos = np.stack([cx + radius * np.cos(phi), cy + radius * np.sin(phi), np.full(k, cz)], axis=1)
    return pos, user_angles(pos)


def path_loss(cfg: SystemConfig, d):
    """Large-scale gain ``10**((G_bs + G_k - 33.05)/10) * d**(-alpha)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = 10.0 ** ((cfg.gain_bs_dbi + cfg.gain_user_dbi - 33.05) / 10.0) * d ** (-cfg.path_loss_exponent)
    return out if out.ndim else float(out)


def correlation_matrix(azimuth: float, elevation: float, n: int) -> np.ndarray:
    idx = np.arange(n)
    steer = np.exp(1j * np.pi * idx * np.sin(azimuth) * np.sin(elevation))
    r = np.outer(steer, steer.conj())
    np.fill_diagonal(r, 1.0)
    return r


def psd_sqrt(r: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Hermitian square root; eigenvalues within round-off of zero are zeroed.

    Zeroing (rather than only clipping negatives) keeps samples of a
    rank-deficient R inside its column space: sqrt of a 1e-15 round-off
    eigenvalue would otherwise leak ~3e-8 into the null space.
    """
    w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
    floor = tol * max(1.0, abs(w).max())
    if w.min() < -floor:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    return (v * np.sqrt(np.where(w > floor, w, 0.0))) @ v.conj().T


def sample_channel(beta: float, r: np.ndarray, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw h ~ CN(0, beta R). ``size`` adds leading sample dimensions."""
    n = r.shape[0]
    shape = (n,) if size is None else (*np.atleast_1d(size), n)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.sqrt(beta) * (w @ psd_sqrt(r).T)


def generate_channels(cfg: SystemConfig, rng: np.random.Generator | None = None) -> ChannelSet:
    """Build geometry, place users and draw all channels from one generator."""
    from .wavefield import bs_to_layer1, inter_layer_matrix

    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    pos, (az, el) = sample_users(cfg, rng)
    geom = build_geometry(cfg, pos)
    dist = np.linalg.norm(pos, axis=1)
    links = []
    h = np.empty((cfg.num_users, cfg.meta_atoms), dtype=complex)
    for k in range(cfg.num_users):
        beta = path_loss(cfg, dist[k])
        links.append(UserLink(float(dist[k]), float(az[k]), float(el[k]), beta))
        h[k] = sample_channel(beta, correlation_matrix(az[k], el[k], cfg.meta_atoms), rng)
    w1 = bs_to_layer1(geom, cfg.wavelength)
    wl = tuple(inter_layer_matrix(geom, l, cfg) for l in range(2, cfg.num_layers + 1))
    return ChannelSet(w1, wl, h, cfg.noise_powers, cfg.p_max, tuple(links), geom)

