"""Max-min rate: outer minorize-refresh loop around a consensus ADMM.

Each outer round linearises every user's rate at the current point and
solves ``max gamma s.t. rate_lower_bound_k >= gamma`` with an ADMM that
splits the products ``z_km = h_k^H G w_m rho_m`` and the per-user copies
``eta_k = gamma``. The five block updates (z/eta, rho, phases, gamma,
scaled duals) all have closed forms up to a scalar bisection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import phases
from .qcqp import ball_allocation, project_rate_constraint
from .rates import (
    LN2,
    RateReport,
    SurrogateCoeffs,
    effective_from_phases,
    sinr_and_rates,
    surrogate_coeffs,
)
from .wavefield import TWO_PI, canonical, transfers_of

log = logging.getLogger(__name__)


@dataclass
class AdmmState:
    z: np.ndarray  # (K, K) complex
    eta: np.ndarray  # (K,)
    gamma: float
    z_dual: np.ndarray  # (K, K) complex, scaled
    eta_dual: np.ndarray  # (K,), scaled
    rho: np.ndarray  # (K,) amplitudes
    theta: np.ndarray  # (L, N)
    eff: np.ndarray  # (K, K) effective channel at theta

    @classmethod
    def start(cls, channels, rho, theta, gamma):
        k = channels.num_users
        eff = effective_from_phases(channels, theta)
        return cls(
            z=eff * rho[None, :],
            eta=np.full(k, float(gamma)),
            gamma=float(gamma),
            z_dual=np.zeros((k, k), dtype=complex),
            eta_dual=np.zeros(k),
            rho=np.asarray(rho, dtype=float),
            theta=canonical(np.asarray(theta, dtype=float)),
            eff=eff,
        )


@dataclass
class MrSolverReport:
    rho: np.ndarray
    theta: np.ndarray
    report: RateReport
    outer_trace: list = field(default_factory=list)  # dicts: iteration, gamma, min_rate, inner
    inner_traces: list = field(default_factory=list)  # per outer: list of dicts
    outer_iterations: int = 0
    inner_iterations: int = 0
    rejected: int = 0
    consensus_residual: float = 0.0


def update_z_eta(state: AdmmState, coeffs: SurrogateCoeffs):
    """Closed-form z/eta block: a projection onto each user's rate set.

    Where the unconstrained minimiser already satisfies the rate
    constraint it is returned unchanged; otherwise the multiplier that makes
    the constraint tight is found by bisection.
    """
    a = state.eff * state.rho[None, :] - state.z_dual
    e = state.gamma - state.eta_dual
    z, eta, lam, _ = project_rate_constraint(a, e, coeffs.b12, coeffs.b22, coeffs.c)
    return z, eta, lam


def feasibility_switch(state: AdmmState, coeffs: SurrogateCoeffs) -> np.ndarray:
    a = state.eff * state.rho[None, :] - state.z_dual
    akk = np.diag(a)
    return (
        coeffs.c
        - 2.0 * np.real(coeffs.b12 * akk)
        - coeffs.b22 * (np.abs(a) ** 2).sum(axis=1)
        - LN2 * (state.gamma - state.eta_dual)
    )


def update_rho(state: AdmmState, p_max: float) -> np.ndarray:
    """Least-squares fit of ``g_km rho_m`` to ``z + z_dual`` over the power ball."""
    y = state.z + state.z_dual
    g = state.eff
    num = np.real(np.sum(g.conj() * y, axis=0))
    den = np.sum(np.abs(g) ** 2, axis=0)
    rho, _ = ball_allocation(num, den, p_max)
    return rho


def update_phases_bcd(state: AdmmState, channels, transfers=None, check=False) -> np.ndarray:
    """One BCD pass over all LN phases minimising ``sum |z + z_dual - g rho|^2``."""
    k = channels.num_users
    return phases.sweep(
        state.theta, channels, state.rho, np.ones(k), state.z + state.z_dual, transfers=transfers, check=check
    )


def update_gamma(eta, eta_dual, penalty: float) -> float:
    """Maximiser of ``gamma - penalty/2 * sum (eta + eta_dual - gamma)^2``."""
    eta = np.asarray(eta, dtype=float)
    return float((np.sum(eta + eta_dual) * penalty + 1.0) / (penalty * eta.size))


def update_duals(state: AdmmState):
    z_dual = state.z_dual + state.z - state.eff * state.rho[None, :]
    eta_dual = state.eta_dual + state.eta - state.gamma
    return z_dual, eta_dual


def consensus_residual(state: AdmmState) -> float:
    """``max |z - g rho| / ||z||_F``."""
    r = np.abs(state.z - state.eff * state.rho[None, :]).max()
    return float(r / max(np.linalg.norm(state.z), np.finfo(float).tiny))


def admm_step(state: AdmmState, coeffs: SurrogateCoeffs, channels, penalty: float, transfers=None):
    """One five-block cycle, in place."""
    state.z, state.eta, _ = update_z_eta(state, coeffs)
    state.rho = update_rho(state, channels.p_max)
    state.theta = update_phases_bcd(state, channels, transfers)
    state.eff = effective_from_phases(channels, state.theta)
    state.gamma = update_gamma(state.eta, state.eta_dual, penalty)
    state.z_dual, state.eta_dual = update_duals(state)
    return state


def inner_admm(
    state: AdmmState, coeffs: SurrogateCoeffs, channels, penalty: float, tol: float, max_iter: int, transfers=None, res_tol=None
):
    """Run ADMM cycles until the relative change of min(eta) is within ``tol``.

    With ``res_tol`` the loop additionally waits until both consensus
    residuals are below it (relative), so a momentary plateau of min(eta)
    far from consensus does not end the loop.
    """
    trace = []
    prev = None
    for j in range(max_iter):
        admm_step(state, coeffs, channels, penalty, transfers)
        cur = float(state.eta.min())
        trace.append(
            {
                "j": j + 1,
                "min_eta": cur,
                "gamma": state.gamma,
                "residual": consensus_residual(state),
                "eta_residual": float(np.abs(state.eta - state.gamma).max()),
            }
        )
        if prev is not None and abs(cur - prev) <= tol * max(abs(cur), np.finfo(float).tiny):
            rec = trace[-1]
            if res_tol is None or (rec["residual"] <= res_tol and rec["eta_residual"] <= res_tol * max(abs(cur), 1e-12)):
                break
        prev = cur
    return state, trace


def normalise(channels):
    """Rescale so every user's noise is 1 and the power budget is 1.

    SINRs are unchanged; returns the scaled channel set and the factor that
    maps normalised amplitudes back to sqrt-watts.
    """
    from dataclasses import replace

    scale = np.sqrt(channels.p_max / channels.noise)
    return (
        replace(channels, h=channels.h * scale[:, None], noise=np.ones_like(channels.noise), p_max=1.0),
        float(np.sqrt(channels.p_max)),
    )


def initial_point(channels, rng):
    k = channels.num_users
    rho = np.full(k, np.sqrt(channels.p_max / k))
    theta = canonical(rng.uniform(0.0, TWO_PI, size=(channels.num_layers, channels.num_atoms)))
    return rho, theta


def solve_mr(channels, cfg, rng=None, rho0=None, theta0=None, trace_sink=None) -> MrSolverReport:
    """Maximise the minimum user rate.

    ``cfg`` supplies the penalty, thresholds and caps. Initial powers are
    uniform and initial phases uniform random unless given. If an inner
    loop ends at a point whose true minimum rate is below the expansion
    point's, the ADMM keeps iterating from where it stopped until it
    improves or the inner cap is spent; a round that never improves is
    discarded and the solve ends, so the outer trace never decreases.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    work, amp = normalise(channels)
    transfers = transfers_of(work)
    r0, t0 = initial_point(work, rng)
    rho = r0 if rho0 is None else np.asarray(rho0, dtype=float) / amp
    theta = t0 if theta0 is None else canonical(np.asarray(theta0, dtype=float))
    eff = effective_from_phases(work, theta)
    rep = sinr_and_rates(eff, rho, work.noise)
    out = MrSolverReport(rho * amp, theta, rep)
    out.outer_trace.append(
        {"iteration": 0, "gamma": rep.min_rate, "min_rate": rep.min_rate, "inner": 0, "residual": 0.0, "eta_residual": 0.0}
    )
    if trace_sink:
        trace_sink(out.outer_trace[-1])

    state = AdmmState.start(work, rho, theta, rep.min_rate)
    for i in range(1, cfg.max_outer + 1):
        coeffs = surrogate_coeffs(eff, rho, work.noise)
        # restart the primal copies from the expansion point; duals carry over
        state.rho, state.theta, state.eff = rho.copy(), theta.copy(), eff
        state.gamma = rep.min_rate
        itrace = []
        while len(itrace) < cfg.max_inner:
            state, part = inner_admm(
                state, coeffs, work, cfg.admm_penalty, cfg.tol_inner, cfg.max_inner - len(itrace), transfers, cfg.tol_consensus
            )
            itrace += part
            new_rep = sinr_and_rates(state.eff, state.rho, work.noise)
            if new_rep.min_rate >= rep.min_rate:
                break
        for j, rec in enumerate(itrace, 1):
            rec["j"] = j
        out.inner_traces.append(itrace)
        out.inner_iterations += len(itrace)
        if new_rep.min_rate < rep.min_rate:
            out.rejected += 1
            log.debug("outer %d: min rate fell %.6g -> %.6g, keeping previous point", i, rep.min_rate, new_rep.min_rate)
            break
        growth = (new_rep.min_rate - rep.min_rate) / max(new_rep.min_rate, np.finfo(float).tiny)
        rho, theta, eff, rep = state.rho.copy(), state.theta.copy(), state.eff, new_rep
        out.outer_iterations = i
        out.consensus_residual = consensus_residual(state)
        rec = {
            "iteration": i,
            "gamma": state.gamma,
            "min_rate": rep.min_rate,
            "inner": len(itrace),
            "residual": itrace[-1]["residual"],
            "eta_residual": itrace[-1]["eta_residual"],
        }
        out.outer_trace.append(rec)
        if trace_sink:
            trace_sink(rec)
        if growth <= cfg.tol_outer:
            break
    out.rho, out.theta, out.report = rho * amp, theta, rep
    return out
