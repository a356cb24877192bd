"""Per-atom block coordinate descent on the metasurface phases.

Both solvers minimise, one phase at a time, a quadratic of the products
``x_km = h_k^H G w_{1,m} rho_m``::

    F(x) = sum_km D_k |x_km|^2 - 2 Re(conj(C_km) x_km)

With every other phase fixed, x is affine in ``e^{j theta_{l,n}}`` and F
reduces to ``-2 Re(t e^{j theta}) + const``, minimised at ``theta = -arg t``.
"""

from __future__ import annotations

import numpy as np

from .wavefield import canonical, projected_partials


def layer_terms(hu: np.ndarray, v: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``a[n, k, m] = (h_k^H U_l)_n (V_l)_{n,m} rho_m``: x is sum_n a[n] e^{j theta_n}."""
    return hu.T[:, :, None] * (v * rho[None, :])[:, None, :]


def atom_coefficient(a: np.ndarray, x: np.ndarray, e_n: complex, n: int, d_weights, c_target) -> complex:
    """``t`` for atom n given the current products ``x`` and its phasor ``e_n``."""
    rest = x - a[n] * e_n
    return np.sum(np.conj(c_target - d_weights[:, None] * rest) * a[n])


def quadratic_value(x, d_weights, c_target) -> float:
    return float(np.sum(d_weights[:, None] * np.abs(x) ** 2) - 2.0 * np.real(np.sum(np.conj(c_target) * x)))


def sweep(theta, channels, rho, d_weights, c_target, transfers=None, check=False):
    """One pass over l = 1..L, n = 1..N. Returns the new (canonical) phases.

    U_l is built from the layers above l, which this pass has not touched
    yet, and V_l is carried forward from the layers already updated.
    With ``check`` the objective is asserted not to increase at any step.
    """
    from .wavefield import transfers_of

    transfers = transfers or transfers_of(channels)
    theta = np.array(np.atleast_2d(theta), dtype=float)
    rho = np.asarray(rho, dtype=float)
    d_weights = np.asarray(d_weights, dtype=float)
    num_layers, n_atoms = theta.shape
    v = None
    for l in range(num_layers):
        hu, v = projected_partials(channels.h, theta, transfers, l, v_prev=v)
        a = layer_terms(hu, v, rho)
        e = np.exp(1j * theta[l])
        x = np.tensordot(e, a, axes=(0, 0))
        prev = quadratic_value(x, d_weights, c_target) if check else None
        for n in range(n_atoms):
            rest = x - a[n] * e[n]
            t = np.sum(np.conj(c_target - d_weights[:, None] * rest) * a[n])
            if t != 0:
                th = -np.angle(t)
                theta[l, n] = th
                e[n] = np.exp(1j * th)
            x = rest + a[n] * e[n]
            if check:
                cur = quadratic_value(x, d_weights, c_target)
                assert cur <= prev + 1e-9 * max(1.0, abs(prev)), (cur, prev)
                prev = cur
    return canonical(theta)
