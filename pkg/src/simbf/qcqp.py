"""Single-constraint quadratic subproblems solved through one scalar dual.

Both solvers reduce their power and auxiliary-variable steps to problems
whose KKT point is an explicit function of one multiplier; the multiplier
is then found by bracketing and bisection.
"""

from __future__ import annotations

import numpy as np


class BracketError(RuntimeError):
    pass


def bisect_increasing(fn, n: int = 1, hi0: float = 1.0, xtol: float = 1e-8, max_double: int = 2000, max_iter: int = 400):
    """Vectorised root search of ``fn(lam) = 0`` on ``lam >= 0``, fn increasing.

    Each of the ``n`` components has its own bracket ``[0, hi]``; ``hi`` is
    doubled until ``fn(hi) >= 0``. Bisection continues until the relative
    bracket width drops below ``xtol`` or the bracket stops shrinking in
    floating point. Returns the upper (feasible) end.
    """
    lo = np.zeros(n)
    hi = np.full(n, float(hi0))
    for _ in range(max_double):
        bad = fn(hi) < 0
        if not bad.any():
            break
        lo = np.where(bad, hi, lo)
        hi = np.where(bad, 2.0 * hi, hi)
    else:
        raise BracketError(f"no sign change up to lambda = {hi.max():.3e}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        stuck = (mid <= lo) | (mid >= hi)
        if np.all(stuck | (hi - lo <= xtol * hi)):
            break
        neg = fn(mid) < 0
        lo = np.where(neg & ~stuck, mid, lo)
        hi = np.where(~neg & ~stuck, mid, hi)
    return hi


def ball_allocation(num, den, p_max: float, xtol: float = 1e-15):
    """Maximiser of ``sum_m 2 num_m x_m - den_m x_m^2`` over ``x >= 0, |x|^2 <= p_max``.

    The solution is ``max(0, num_m / (den_m + beta))`` with beta = 0 when that
    is already feasible, otherwise the beta > 0 that makes the budget tight.
    Returns ``(x, beta)``.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)

    def alloc(beta):
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(num > 0, num / (den + beta), 0.0)
        return x

    x0 = alloc(0.0)
    if np.all(np.isfinite(x0)) and np.sum(x0**2) <= p_max:
        return x0, 0.0
    pos = num > 0
    scale = np.sqrt(np.sum(num[pos] ** 2) / p_max)

    def excess(beta):
        # decreasing in beta, so negate for the increasing-root helper
        b = np.atleast_1d(beta)[0]
        return np.atleast_1d(p_max - np.sum(alloc(b) ** 2))

    hi0 = max(scale, np.finfo(float).tiny)
    beta = float(bisect_increasing(excess, 1, hi0=hi0, xtol=xtol)[0])
    return alloc(beta), beta


def project_rate_constraint(a, e, b12, b22, c, ln2=np.log(2.0), xtol: float = 1e-14):
    """Euclidean projection of ``(z, eta) = (a, e)`` onto each user's rate set.

    Row k of ``a`` is user k's copy of ``g_km rho_m``; the set is
    ``c_k - 2 Re(b12_k z_kk) - b22_k sum_m |z_km|^2 >= ln2 * eta_k``.
    Returns ``(z, eta, lam, f)`` where ``f`` is the constraint slack at the
    unprojected point and ``lam`` the multiplier (zero where ``f >= 0``).
    """
    a = np.asarray(a, dtype=complex)
    k = a.shape[0]
    diag = np.arange(k)
    akk = a[diag, diag]

    def slack_at(z, eta):
        zkk = z[diag, diag]
        return c - 2.0 * np.real(b12 * zkk) - b22 * (np.abs(z) ** 2).sum(axis=1) - ln2 * eta

    def point(lam, rows=slice(None)):
        lam = np.asarray(lam, dtype=float)
        denom = 1.0 + lam * b22[rows]
        z = a[rows] / denom[:, None]
        idx = np.arange(k)[rows]
        z[np.arange(len(idx)), idx] = (akk[rows] - lam * np.conj(b12[rows])) / denom
        return z, e[rows] - 0.5 * ln2 * lam

    f = slack_at(a, e)
    lam = np.zeros(k)
    z = a.copy()
    eta = np.array(e, dtype=float)
    active = np.flatnonzero(f < 0)
    if active.size:

        def fn(l):
            zz, ee = point(l, active)
            zkk = zz[np.arange(active.size), active]
            return (
                c[active]
                - 2.0 * np.real(b12[active] * zkk)
                - b22[active] * (np.abs(zz) ** 2).sum(axis=1)
                - ln2 * ee
            )

        # lam ~ |f| / (ln2^2 / 2) is the scale when only eta moves
        hi0 = float(np.max(-f[active])) / (0.5 * ln2 * ln2)
        lam_a = bisect_increasing(fn, active.size, hi0=max(hi0, 1e-300), xtol=xtol)
        za, ea = point(lam_a, active)
        z[active] = za
        eta[active] = ea
        lam[active] = lam_a
    return z, eta, lam, f
