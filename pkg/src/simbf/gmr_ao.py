"""Geometric-mean-rate and sum-rate maximisation by alternating closed forms.

The geometric mean is linearised at the current rates, each rate is
replaced by its concave lower bound, and power and phases are updated in
turn. Fixing the weights to one and the offset to zero gives the sum-rate
variant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import phases
from .mr_admm import initial_point, normalise
from .qcqp import ball_allocation
from .rates import LN2, RateReport, effective_from_phases, geometric_mean, sinr_and_rates, surrogate_coeffs, surrogate_rate
from .wavefield import canonical, transfers_of

log = logging.getLogger(__name__)

MODES = ("GMR", "SR")


@dataclass(frozen=True)
class GmWeights:
    grad: np.ndarray
    value: float


def gm_weights(rates, mode: str = "GMR") -> GmWeights:
    """Gradient of the geometric mean at ``rates`` (all ones in SR mode)."""
    rates = np.asarray(rates, dtype=float)
    if mode == "SR":
        return GmWeights(np.ones_like(rates), 0.0)
    if mode != "GMR":
        raise ValueError(f"unknown mode {mode!r}")
    if np.any(rates <= 0):
        raise ValueError("geometric-mean weights need strictly positive rates; warm start with a sum-rate step")
    value = geometric_mean(rates)
    return GmWeights(value / (rates.size * rates), value)


def linearised_objective(weights: GmWeights, rates) -> float:
    """First-order model of the geometric mean, including its constant offset."""
    k = len(rates)
    return float(weights.grad @ np.asarray(rates) + (k - 1) / k * weights.value)


def update_rho_gm(weights: GmWeights, coeffs, eff: np.ndarray, p_max: float, rho_prev=None) -> np.ndarray:
    """Exact maximiser of the weighted rate bound over the power ball."""
    w = weights.grad
    num = -w * np.real(coeffs.b12 * np.diag(eff))
    den = (w * coeffs.b22) @ (np.abs(eff) ** 2)
    rho, _ = ball_allocation(num, den, p_max)
    return rho


def phase_weights(weights: GmWeights, coeffs):
    """``(D, C)`` such that the weighted bound is ``-F(x)/ln2 + const`` for the BCD sweep."""
    w = weights.grad
    d = w * coeffs.b22
    c = np.diag(-np.conj(w * coeffs.b12))
    return d, c


def atom_q(weights: GmWeights, coeffs, a: np.ndarray, x: np.ndarray, e_n: complex, n: int) -> complex:
    """Coefficient q with the per-atom objective ``-2 Re(q e^{j theta})``."""
    d, c = phase_weights(weights, coeffs)
    return -phases.atom_coefficient(a, x, e_n, n, d, c)


def update_phases_gm(weights: GmWeights, coeffs, rho, theta, channels, transfers=None, check=False):
    d, c = phase_weights(weights, coeffs)
    return phases.sweep(theta, channels, rho, d, c, transfers=transfers, check=check)


@dataclass
class GmrSolverReport:
    rho: np.ndarray
    theta: np.ndarray
    report: RateReport
    mode: str
    trace: list = field(default_factory=list)
    iterations: int = 0


def _step(mode, rates, eff, rho, theta, work, transfers):
    weights = gm_weights(rates, mode)
    coeffs = surrogate_coeffs(eff, rho, work.noise, strict=(mode == "GMR"))
    rho_new = update_rho_gm(weights, coeffs, eff, work.p_max)
    theta_new = update_phases_gm(weights, coeffs, rho_new, theta, work, transfers)
    eff_new = effective_from_phases(work, theta_new)
    return rho_new, theta_new, eff_new, weights, coeffs


def _blend(rho_old, theta_old, rho_new, theta_new, t: float):
    """Point a fraction ``t`` of the way from the old to the new iterate.

    Powers move along the segment (which stays inside the ball) and each
    phase along the shorter arc.
    """
    step = np.angle(np.exp(1j * (theta_new - theta_old)))
    return (1.0 - t) * rho_old + t * rho_new, canonical(theta_old + t * step)


def solve_gmr(channels, cfg, mode: str = "GMR", rng=None, rho0=None, theta0=None, trace_sink=None, min_step: float = 1e-4) -> GmrSolverReport:
    """Maximise the geometric mean (``mode='GMR'``) or the sum (``'SR'``) of rates.

    GMR mode starts with one sum-rate step so that every rate is positive.
    The full step maximises the linearised objective, which can overshoot
    the geometric mean itself; when it does, the step is halved back
    towards the previous point (down to ``min_step``) and the solver stops
    if no fraction improves.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    work, amp = normalise(channels)
    transfers = transfers_of(work)
    r0, t0 = initial_point(work, rng)
    rho = r0 if rho0 is None else np.asarray(rho0, dtype=float) / amp
    theta = t0 if theta0 is None else canonical(np.asarray(theta0, dtype=float))
    eff = effective_from_phases(work, theta)
    rep = sinr_and_rates(eff, rho, work.noise)

    out = GmrSolverReport(rho * amp, theta, rep, mode)
    if mode == "GMR":
        rho, theta, eff, _, _ = _step("SR", rep.rate, eff, rho, theta, work, transfers)
        rep = sinr_and_rates(eff, rho, work.noise)
        if np.any(rep.rate <= 0):
            raise ValueError("sum-rate warm start left a user at zero rate")

    def objective(r):
        return r.gm_rate if mode == "GMR" else r.sum_rate

    prev = objective(rep)
    rec = {"iteration": 0, "objective": prev, "rates": [float(x) for x in rep.rate]}
    out.trace.append(rec)
    if trace_sink:
        trace_sink(rec)
    k = len(rho)
    for i in range(1, cfg.max_gm + 1):
        rho_new, theta_new, eff_new, weights, coeffs = _step(mode, rep.rate, eff, rho, theta, work, transfers)
        new_rep = sinr_and_rates(eff_new, rho_new, work.noise)
        step = 1.0
        if mode == "GMR":
            while objective(new_rep) < prev and step > min_step:
                step *= 0.5
                rho_new, theta_new = _blend(rho, theta, rho_new, theta_new, 0.5)
                eff_new = effective_from_phases(work, theta_new)
                new_rep = sinr_and_rates(eff_new, rho_new, work.noise)
            if objective(new_rep) < prev:
                log.debug("GMR iteration %d: no improving step, stopping", i)
                break
        bound = float(weights.grad @ surrogate_rate(coeffs, eff_new, rho_new))
        rho, theta, eff, rep = rho_new, theta_new, eff_new, new_rep
        cur = objective(rep)
        offset = (k - 1) / k * weights.value
        rec = {
            "iteration": i,
            "objective": cur,
            "surrogate_start": float(weights.grad @ out.trace[-1]["rates"]) + offset,
            "surrogate": bound + offset,
            "step": step,
            "rates": [float(x) for x in rep.rate],
        }
        out.trace.append(rec)
        if trace_sink:
            trace_sink(rec)
        out.iterations = i
        if abs(cur - prev) <= cfg.tol_gm * max(abs(cur), np.finfo(float).tiny):
            break
        prev = cur
    out.rho, out.theta, out.report = rho * amp, theta, rep
    return out
