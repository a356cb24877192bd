"""SINR, rates, fairness metrics and the concave rate lower bound."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .wavefield import cascade, transfers_of

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
STDDEV_DISPLAY_FLOOR = 1e-3


def effective_channel(channels, g: np.ndarray) -> np.ndarray:
    """``eff[k, m] = h_k^H G w_{1,m}``."""
    return channels.h.conj() @ g @ channels.w1


def effective_from_phases(channels, theta) -> np.ndarray:
    return effective_channel(channels, cascade(theta, transfers_of(channels)))


def sinr(eff: np.ndarray, rho: np.ndarray, noise) -> np.ndarray:
    power = np.abs(eff * rho[None, :]) ** 2
    signal = np.diag(power)
    return signal / (power.sum(axis=1) - signal + noise)


@dataclass
class RateReport:
    sinr: np.ndarray
    rate: np.ndarray
    min_rate: float
    sum_rate: float
    gm_rate: float
    rate_stddev: float
    min_max_ratio: float

    CSV_COLUMNS = ("min_rate", "sum_rate", "gm_rate", "rate_stddev", "min_max_ratio", "rates")

    def csv_row(self) -> list[str]:
        """Column order follows ``CSV_COLUMNS``; per-user rates joined by ';'."""
        nums = [self.min_rate, self.sum_rate, self.gm_rate, self.rate_stddev, self.min_max_ratio]
        return [repr(float(x)) for x in nums] + [";".join(repr(float(r)) for r in self.rate)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sinr"] = [float(x) for x in self.sinr]
        d["rate"] = [float(x) for x in self.rate]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def fairness_metrics(rates) -> tuple[float, float]:
    """Population standard deviation and min/max ratio (1 for all-zero rates)."""
    rates = np.asarray(rates, dtype=float)
    hi = rates.max()
    ratio = 1.0 if hi <= 0 else float(rates.min() / hi)
    return float(np.std(rates)), ratio


def geometric_mean(rates) -> float:
    rates = np.asarray(rates, dtype=float)
    if np.any(rates <= 0):
        return 0.0
    return float(np.exp(np.mean(np.log(rates))))


def rate_report(rates, sinr_values=None) -> RateReport:
    rates = np.asarray(rates, dtype=float)
    std, ratio = fairness_metrics(rates)
    if sinr_values is None:
        sinr_values = np.expm1(rates * LN2)
    return RateReport(
        np.asarray(sinr_values, dtype=float),
        rates,
        float(rates.min()),
        float(rates.sum()),
        geometric_mean(rates),
        std,
        ratio,
    )


def sinr_and_rates(eff: np.ndarray, rho: np.ndarray, noise) -> RateReport:
    s = sinr(eff, np.asarray(rho, dtype=float), noise)
    return rate_report(np.log2(1.0 + s), s)


@dataclass(frozen=True)
class SurrogateCoeffs:
    b11: np.ndarray  # (K,) real
    b12: np.ndarray  # (K,) complex
    b22: np.ndarray  # (K,) real
    c: np.ndarray  # (K,) real, nats


def surrogate_coeffs(eff: np.ndarray, rho: np.ndarray, noise, strict: bool = True) -> SurrogateCoeffs:
    """Coefficients of the minorizer of each user's rate at ``(eff, rho)``.

    With a = g_kk rho_k and s = total received power + noise the closed forms
    are b11 = 1 + SINR, b12 = -SINR / a = -conj(a) / (s - |a|^2) and
    b22 = |b12|^2 / b11. ``strict`` rejects expansion points with a zero
    direct link; otherwise the limit b12 = b22 = 0 is used there.
    """
    rho = np.asarray(rho, dtype=float)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), rho.shape)
    x = eff * rho[None, :]
    a = np.diag(x).copy()
    if strict and np.any(a == 0):
        raise ValueError("expansion point has a zero direct link; start from strictly positive powers")
    total = (np.abs(x) ** 2).sum(axis=1) + noise
    interf = total - np.abs(a) ** 2
    gamma = np.abs(a) ** 2 / interf
    b11 = 1.0 + gamma
    b12 = -a.conj() / interf
    b22 = np.abs(b12) ** 2 / b11
    cond = total / interf
    if np.any(cond > 1e12):
        log.warning("near-singular 2x2 rate matrix (condition ~%.1e)", cond.max())
    # ln(1 + SINR) + Tr(B A) - b11 - sigma^2 b22, with Tr(B A) = 1 at the expansion point
    c = np.log1p(gamma) + 1.0 - b11 - noise * b22
    return SurrogateCoeffs(b11, b12, b22, c)


def surrogate_rate(coeffs: SurrogateCoeffs, eff: np.ndarray, rho) -> np.ndarray:
    """Lower bound on each user's rate (bits/s/Hz), evaluated at ``(eff, rho)``."""
    x = eff * np.asarray(rho, dtype=float)[None, :]
    lin = np.real(coeffs.b12 * np.diag(x))
    quad = (np.abs(x) ** 2).sum(axis=1)
    return (coeffs.c - 2.0 * lin - coeffs.b22 * quad) / LN2


def surrogate_from_z(coeffs: SurrogateCoeffs, z: np.ndarray) -> np.ndarray:
    """Same bound with the products ``g_km rho_m`` replaced by free copies ``z``."""
    lin = np.real(coeffs.b12 * np.diag(z))
    return (coeffs.c - 2.0 * lin - coeffs.b22 * (np.abs(z) ** 2).sum(axis=1)) / LN2


def explicit_b_matrix(eff: np.ndarray, rho, noise, k: int) -> np.ndarray:
    """Reference construction of B_k by inverting the 2x2 matrix A_k directly."""
    x = eff * np.asarray(rho, dtype=float)[None, :]
    a = x[k, k]
    s = float((np.abs(x[k]) ** 2).sum() + np.broadcast_to(noise, (eff.shape[0],))[k])
    mat = np.array([[1.0, np.conj(a)], [a, s]], dtype=complex)
    inv = np.linalg.inv(mat)
    p = np.array([1.0, 0.0])
    col = inv @ p
    return np.outer(col, p @ inv) / (p @ inv @ p)
