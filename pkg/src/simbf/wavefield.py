"""Diffraction transfer matrices and the cascaded wave-domain beamformer."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def canonical(theta):
    """Wrap phases into [0, 2*pi)."""
    out = np.mod(theta, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True)
class LayerTransfers:
    w1: np.ndarray  # (N, M) BS -> layer 1
    wl: tuple  # (N, N) layer l-1 -> l, for l = 2..L

    @property
    def num_layers(self) -> int:
        return len(self.wl) + 1


def _pairwise(a, b):
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def inter_layer_matrix(geometry, l: int, cfg) -> np.ndarray:
    """Rayleigh-Sommerfeld transfer from layer ``l-1`` to layer ``l`` (1-based, l >= 2).

    Entry (n, n') couples atom n on layer l with atom n' on layer l-1.
    """
    num_layers = len(geometry.layer_positions)
    if num_layers < 2 or not 2 <= l <= num_layers:
        raise ValueError(f"layer index {l} out of range for {num_layers} layers")
    d = _pairwise(geometry.layer_positions[l - 1], geometry.layer_positions[l - 2])
    if np.any(d <= 0):
        raise ValueError("degenerate geometry: coincident meta-atoms")
    lam = cfg.wavelength
    amp = cfg.element_length * cfg.element_width * cfg.thickness / ((num_layers - 1) * d**2)
    return amp * (1.0 / (TWO_PI * d) - 1j / lam) * np.exp(1j * TWO_PI * d / lam)


def bs_to_layer1(geometry, wavelength: float) -> np.ndarray:
    """Near-field LoS response from each BS antenna (columns) to layer-1 atoms (rows)."""
    d = _pairwise(geometry.layer_positions[0], geometry.bs_antenna_positions)
    if np.any(d <= 0):
        raise ValueError("degenerate geometry: antenna on a meta-atom")
    return wavelength / (2.0 * TWO_PI * d) * np.exp(-1j * TWO_PI * d / wavelength)


def transfers_of(channels) -> LayerTransfers:
    return LayerTransfers(channels.w1, tuple(channels.wl))


def cascade(theta, transfers: LayerTransfers) -> np.ndarray:
    """G = Theta_L W_L ... Theta_2 W_2 Theta_1."""
    theta = np.atleast_2d(theta)
    if theta.shape[0] != transfers.num_layers:
        raise ValueError("phase matrix rows must equal the number of layers")
    g = np.diag(np.exp(1j * theta[0]))
    for l, w in enumerate(transfers.wl, start=1):
        g = np.exp(1j * theta[l])[:, None] * (w @ g)
    return g


@dataclass(frozen=True)
class PartialProducts:
    """Per-layer split ``G W_1 = U_l diag(e^{j theta_l}) V_l``.

    ``u[l]`` collects the layers above l (identity for the last layer) and
    ``v[l]`` everything below it including W_1, so ``v[0]`` is W_1 itself.
    """

    u: tuple
    v: tuple


def partial_products(theta, transfers: LayerTransfers) -> PartialProducts:
    theta = np.atleast_2d(theta)
    num_layers = transfers.num_layers
    n = transfers.w1.shape[0]
    phase = np.exp(1j * theta)
    v = [transfers.w1]
    for l in range(1, num_layers):
        v.append(transfers.wl[l - 1] @ (phase[l - 1][:, None] * v[-1]))
    u = [None] * num_layers
    u[-1] = np.eye(n, dtype=complex)
    for l in range(num_layers - 2, -1, -1):
        u[l] = u[l + 1] * phase[l + 1][None, :] @ transfers.wl[l]
    return PartialProducts(tuple(u), tuple(v))


def projected_partials(h, theta, transfers: LayerTransfers, layer: int, v_prev=None):
    """Row-projected factors for one layer: ``h^H U_l`` (K, N) and ``V_l`` (N, M).

    Cheaper than :func:`partial_products` because U_l is never formed. When
    sweeping layers in order, pass the previous layer's ``V`` as ``v_prev``
    so the phases updated in that layer are picked up.
    """
    theta = np.atleast_2d(theta)
    hu = h.conj()
    for l in range(transfers.num_layers - 1, layer, -1):
        hu = (hu * np.exp(1j * theta[l])) @ transfers.wl[l - 1]
    if layer == 0:
        v = transfers.w1
    elif v_prev is not None:
        v = transfers.wl[layer - 1] @ (np.exp(1j * theta[layer - 1])[:, None] * v_prev)
    else:
        v = transfers.w1
        for l in range(1, layer + 1):
            v = transfers.wl[l - 1] @ (np.exp(1j * theta[l - 1])[:, None] * v)
    return hu, v


_MAGIC = b"SIMBFMAT"


def dump_matrix(path, mat: np.ndarray):
    """Write a complex matrix as little-endian f64 re/im pairs after a 16-byte header."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.complex128))
    rows, cols = mat.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC[:8] + struct.pack("<II", rows, cols))
        fh.write(mat.astype("<c16").tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:8] != _MAGIC:
            raise ValueError("not a matrix dump")
        rows, cols = struct.unpack("<II", head[8:])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != rows * cols:
        raise ValueError("truncated matrix dump")
    return data.reshape(rows, cols).astype(np.complex128)
