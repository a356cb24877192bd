"""Brute-force and generic numerical references for the closed-form updates.

Nothing here is fast; everything is deterministic for a fixed seed, grid
or iteration cap. ``run_checks`` strings the comparisons together for the
``verify`` command.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize

from .rates import LN2, effective_from_phases, sinr_and_rates
from .wavefield import TWO_PI


@dataclass
class OracleResult:
    best_value: float
    best_point: Any
    samples_or_grid: int
    converged: bool = True


def grid_phase_oracle(objective: Callable[[float], float], grid_points: int = 3600) -> OracleResult:
    """Minimum of ``objective`` over ``grid_points`` equally spaced angles in [0, 2 pi)."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    grid = np.arange(grid_points) * (TWO_PI / grid_points)
    vals = np.array([objective(t) for t in grid], dtype=float)
    i = int(np.argmin(vals))  # first minimiser on ties
    return OracleResult(float(vals[i]), float(grid[i]), grid_points)


def project_ball(x, p_max: float, nonneg: bool = True) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, |x|^2 <= p_max}`` (orthant optional)."""
    x = np.maximum(x, 0.0) if nonneg else np.array(x, dtype=float)
    n = np.linalg.norm(x)
    r = np.sqrt(p_max)
    return x if n <= r else x * (r / n)


def qcqp1_oracle(
    quad: np.ndarray,
    lin: np.ndarray,
    p_max: float,
    nonneg: bool = True,
    max_iter: int = 100_000,
    tol: float = 1e-8,
) -> OracleResult:
    """Projected gradient for ``min x^T Q x - 2 lin^T x`` over the power ball.

    ``quad`` is a symmetric PSD matrix (or a vector, read as a diagonal).
    The step is 1 / Lipschitz constant; iteration stops once a step moves x
    by less than ``tol``. ``best_point`` is x; ``converged`` is False if the
    cap was hit first.
    """
    q = np.diag(quad) if np.ndim(quad) == 1 else np.asarray(quad, dtype=float)
    b = np.asarray(lin, dtype=float)
    lip = 2.0 * max(np.linalg.eigvalsh(q).max(), 1e-300)
    x = np.zeros_like(b)
    done = False
    for _ in range(max_iter):
        grad = 2.0 * (q @ x - b)
        nxt = project_ball(x - grad / lip, p_max, nonneg)
        step = np.linalg.norm(nxt - x)
        x = nxt
        if step <= tol * max(1.0, np.linalg.norm(x)):
            done = True
            break
    value = float(x @ q @ x - 2.0 * b @ x)
    return OracleResult(value, x, max_iter, done)


def qcqp1_kkt_residual(quad, lin, p_max: float, x, nonneg: bool = True) -> float:
    """``|x - P(x - grad)|``: zero exactly at a KKT point of the ball problem."""
    q = np.diag(quad) if np.ndim(quad) == 1 else np.asarray(quad, dtype=float)
    grad = 2.0 * (q @ x - np.asarray(lin, dtype=float))
    return float(np.linalg.norm(x - project_ball(x - grad, p_max, nonneg)))


def rate_set_projection_oracle(a_row: np.ndarray, e: float, k: int, b12: complex, b22: float, c: float) -> OracleResult:
    """Projection of one user's ``(z_k., eta_k)`` onto its rate set via SLSQP.

    Independent of the multiplier bisection: a general constrained solver on
    the 2K+1 real coordinates.
    """
    a_row = np.asarray(a_row, dtype=complex)
    m = a_row.size
    x0 = np.concatenate([a_row.real, a_row.imag, [e]])

    def unpack(x):
        return x[:m] + 1j * x[m : 2 * m], x[-1]

    def obj(x):
        return float(np.sum((x - x0) ** 2))

    def cons(x):
        z, eta = unpack(x)
        return c - 2.0 * np.real(b12 * z[k]) - b22 * np.sum(np.abs(z) ** 2) - LN2 * eta

    res = minimize(
        obj,
        x0,
        jac=lambda x: 2.0 * (x - x0),
        constraints=[{"type": "ineq", "fun": cons}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    z, eta = unpack(res.x)
    return OracleResult(float(res.fun), (z, float(eta)), int(res.nit), bool(res.success))


def finite_diff_grad(f: Callable[[np.ndarray], float], x, step=1e-6) -> np.ndarray:
    """Central differences; ``step`` may be a scalar or one step per coordinate."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(step, dtype=float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h.flat[i]
        g.flat[i] = (f(x + e) - f(x - e)) / (2.0 * h.flat[i])
    return g


OBJECTIVES = {"MR": "min_rate", "GMR": "gm_rate", "SR": "sum_rate"}


def random_search_oracle(channels, samples: int, objective: str = "MR", seed: int = 0) -> OracleResult:
    """Best of ``samples`` random feasible points.

    Each sample draws a full-power amplitude vector (uniform direction on the
    positive part of the sphere) followed by uniform phases, one sample at a
    time, so the first n samples are the same for any larger count.
    ``best_point`` is ``(rho, theta)`` in physical units.
    """
    attr = OBJECTIVES[objective]
    rng = np.random.default_rng(seed)
    k = channels.num_users
    best, point = -np.inf, None
    for _ in range(samples):
        d = np.abs(rng.standard_normal(k))
        rho = d * np.sqrt(channels.p_max) / np.linalg.norm(d)
        theta = rng.uniform(0.0, TWO_PI, size=(channels.num_layers, channels.num_atoms))
        val = getattr(sinr_and_rates(effective_from_phases(channels, theta), rho, channels.noise), attr)
        if val > best:
            best, point = val, (rho, theta)
    return OracleResult(float(best), point, samples)


# ---------------------------------------------------------------------------
# verify battery


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float


def _check(name, fn) -> Check:
    t = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failed check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return Check(name, bool(ok), detail, time.perf_counter() - t)


def _surrogate_bound(rng):
    from .config import desk_config
    from .rates import surrogate_coeffs, surrogate_rate
    from .scenario import generate_channels

    cfg = desk_config(seed=int(rng.integers(1 << 30)))
    ch = generate_channels(cfg)
    th = rng.uniform(0, TWO_PI, (ch.num_layers, ch.num_atoms))
    rho = np.full(ch.num_users, np.sqrt(ch.p_max / ch.num_users))
    eff = effective_from_phases(ch, th)
    co = surrogate_coeffs(eff, rho, ch.noise)
    tight = np.max(np.abs(surrogate_rate(co, eff, rho) - sinr_and_rates(eff, rho, ch.noise).rate))
    worst = -np.inf
    for _ in range(50):
        d = np.abs(rng.standard_normal(ch.num_users))
        r2 = d * np.sqrt(ch.p_max * rng.uniform()) / np.linalg.norm(d)
        e2 = effective_from_phases(ch, rng.uniform(0, TWO_PI, th.shape))
        worst = max(worst, np.max(surrogate_rate(co, e2, r2) - sinr_and_rates(e2, r2, ch.noise).rate))
    return tight <= 1e-9 and worst <= 1e-9, f"tightness {tight:.1e}, max(bound - rate) {worst:.1e}"


def _power_vs_oracle(rng):
    from .qcqp import ball_allocation

    gap = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 6))
        num = rng.standard_normal(k)
        den = rng.uniform(0.1, 2.0, k)
        p = rng.uniform(0.05, 2.0)
        x, _ = ball_allocation(num, den, p)
        ref = qcqp1_oracle(den, num, p)
        val = float(den @ x**2 - 2 * num @ x)
        gap = max(gap, val - ref.best_value)
    return gap <= 1e-6, f"closed form - oracle <= {gap:.1e}"


def _projection_vs_oracle(rng):
    from .qcqp import project_rate_constraint

    gap = 0.0
    for _ in range(10):
        k = 3
        a = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) * 0.5
        e = rng.uniform(0.5, 2.0, k)
        b12 = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        b11 = rng.uniform(1.0, 3.0, k)
        b22 = np.abs(b12) ** 2 / b11
        c = rng.uniform(0.0, 1.0, k)
        z, eta, _, _ = project_rate_constraint(a, e, b12, b22, c)
        for i in range(k):
            ref = rate_set_projection_oracle(a[i], e[i], i, b12[i], b22[i], c[i])
            val = np.sum(np.abs(z[i] - a[i]) ** 2) + (eta[i] - e[i]) ** 2
            gap = max(gap, val - ref.best_value)
    return gap <= 1e-6, f"closed form - SLSQP <= {gap:.1e}"


def _phase_vs_grid(rng):
    worst = -np.inf
    for _ in range(20):
        t = complex(rng.standard_normal(), rng.standard_normal())
        th = -np.angle(t)
        val = -2.0 * np.real(t * np.exp(1j * th))
        ref = grid_phase_oracle(lambda x: -2.0 * np.real(t * np.exp(1j * x)), 3600)
        worst = max(worst, val - ref.best_value)
    return worst <= 1e-12, f"closed form - grid min <= {worst:.1e}"


def _gm_gradient(rng):
    from .gmr_ao import gm_weights
    from .rates import geometric_mean

    worst = 0.0
    for _ in range(20):
        r = rng.uniform(0.1, 5.0, int(rng.integers(2, 7)))
        fd = finite_diff_grad(geometric_mean, r, 1e-6 * r)
        g = gm_weights(r).grad
        worst = max(worst, float(np.max(np.abs(fd - g) / np.abs(g))))
    return worst < 1e-5, f"max relative error {worst:.1e}"


def _tiny_instance(rng):
    from .config import SystemConfig
    from .gmr_ao import solve_gmr
    from .mr_admm import solve_mr
    from .scenario import generate_channels

    # a 2x2 layer: the atom count has to be a perfect square
    cfg = SystemConfig(
        num_antennas=2, num_users=2, meta_atoms=4, num_layers=1, p_max_dbm=10.0,
        admm_penalty=10.0, max_inner=500, max_outer=800, max_gm=800, seed=int(rng.integers(1 << 30)),
    )  # fmt: skip
    ch = generate_channels(cfg)
    mr = solve_mr(ch, cfg).report.min_rate
    ref = random_search_oracle(ch, 2000, "MR", seed=cfg.seed)
    return mr >= ref.best_value - 1e-3, f"MR {mr:.4f} vs random best {ref.best_value:.4f}"


def _power_model(rng):
    from .experiment import PowerModel, total_power

    sim = total_power(PowerModel(), 20.0, 4, 6, 100)
    db = total_power(PowerModel(), 20.0, 16, 0, 0)
    return round(sim, 1) == 20.1 and round(db, 1) == 26.1, f"SIM {sim:.4f} W, DB {db:.4f} W"


CHECKS = [
    ("power model totals", _power_model),
    ("rate bound below rate, tight at expansion", _surrogate_bound),
    ("power update vs projected gradient", _power_vs_oracle),
    ("z/eta projection vs SLSQP", _projection_vs_oracle),
    ("phase closed form vs 3600-point grid", _phase_vs_grid),
    ("geometric-mean gradient vs finite differences", _gm_gradient),
    ("MR on a tiny instance vs random search", _tiny_instance),
]


def run_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    return [_check(name, lambda fn=fn: fn(rng)) for name, fn in CHECKS]
