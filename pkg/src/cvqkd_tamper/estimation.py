"""Channel parameter estimation from quadratures and LO transmittance moments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlockedChannelError, DegenerateInputError, EstimationFailureError, InvalidInputError
from .params import FiniteSizeConfig, LinkConfig


@dataclass(frozen=True)
class QuadratureBatch:
    """Paired quadratures of the parameter-estimation symbols, in shot-noise units."""

    x_alice: np.ndarray
    x_bob: np.ndarray
    N0: float = 1.0
    v_el: float = 0.0
    eta: float = 1.0

    def __post_init__(self) -> None:
        xa = np.asarray(self.x_alice, dtype=float)
        xb = np.asarray(self.x_bob, dtype=float)
        if xa.shape != xb.shape or xa.ndim != 1 or xa.size < 2:
            raise InvalidInputError("x_alice and x_bob must be 1-D of equal length > 1")
        if self.N0 <= 0 or self.v_el < 0 or not 0 < self.eta <= 1:
            raise InvalidInputError("need N0 > 0, v_el >= 0 and eta in (0, 1]")
        object.__setattr__(self, "x_alice", xa)
        object.__setattr__(self, "x_bob", xb)

    @property
    def m(self) -> int:
        return self.x_alice.size


@dataclass(frozen=True)
class EstimatedChannel:
    t_hat: float
    sigma_R_sq: float
    T_hat: float
    xi_hat: float


def estimate_t(batch: QuadratureBatch) -> float:
    """Least-squares slope of x_bob on x_alice, i.e. sqrt(eta) * E[sqrt T]."""
    denom = float(np.dot(batch.x_alice, batch.x_alice))
    if denom <= 0.0:
        raise DegenerateInputError("x_alice is identically zero")
    return float(np.dot(batch.x_alice, batch.x_bob)) / denom


def estimate_noise(batch: QuadratureBatch, t_hat: float) -> float:
    """Mean squared residual of the linear model."""
    resid = batch.x_bob - t_hat * batch.x_alice
    return float(np.mean(resid * resid))


def estimate_channel(batch: QuadratureBatch) -> EstimatedChannel:
    """Regression route: transmittance from the slope, excess noise from the residual."""
    t_hat = estimate_t(batch)
    s2 = estimate_noise(batch, t_hat)
    T_hat = t_hat * t_hat / batch.eta
    if T_hat <= 0.0:
        raise BlockedChannelError("estimated transmittance is zero")
    xi_hat = (s2 - batch.v_el - batch.N0) / (batch.eta * T_hat)
    return EstimatedChannel(t_hat, s2, T_hat, xi_hat)


def estimate_mean_transmittance(batch: QuadratureBatch, V_A: float, xi: float) -> float:
    """E[T] from Bob's second moment, given separately known V_A and xi."""
    ex2 = float(np.mean(batch.x_bob * batch.x_bob))
    return (ex2 - batch.N0 - batch.v_el) / (batch.eta * V_A * batch.N0 + batch.eta * xi)


def simulate_quadratures(T_values: np.ndarray, V_A: float, xi: float, eta: float, v_el: float,
                         rng: np.random.Generator, N0: float = 1.0) -> QuadratureBatch:
    """Synthetic estimation data ``x_B = sqrt(eta T_i) x_A + z_i``.

    One quadrature per symbol; ``T_values`` gives the transmittance of each
    symbol and the noise variance is ``N0 + v_el + eta T_i xi``.
    """
    T_values = np.asarray(T_values, dtype=float)
    xa = rng.normal(0.0, math.sqrt(V_A * N0), size=T_values.size)
    noise = rng.normal(0.0, 1.0, size=T_values.size) * np.sqrt(N0 + v_el + eta * T_values * xi)
    xb = np.sqrt(eta * T_values) * xa + noise
    return QuadratureBatch(xa, xb, N0=N0, v_el=v_el, eta=eta)


def attacked_estimators(E_sqrtT: float, E_T: float, V_A: float, xi: float) -> tuple[float, float]:
    """Transmittance and excess noise Bob infers from a fluctuating channel.

    ``T_hat = E[sqrt T]**2`` and the spread of sqrt(T) shows up as extra
    excess noise ``(E[T]/T_hat)(V_A + xi) - V_A``.
    """
    if E_sqrtT <= 0.0:
        raise BlockedChannelError("E[sqrt T] = 0: the channel is fully blocked")
    T_hat = E_sqrtT * E_sqrtT
    return T_hat, E_T / T_hat * (V_A + xi) - V_A


def w_factor(eps_pe: float) -> float:
    """Confidence multiplier ``sqrt(2) * erfinv(1 - eps_pe)``.

    Solved as ``erfc(w / sqrt(2)) = eps_pe`` by bisection on ``math.erfc``,
    which keeps full relative accuracy deep in the tail.
    """
    if not 0.0 < eps_pe <= 1.0:
        raise InvalidInputError(f"eps_pe must be in (0, 1], got {eps_pe}")
    if eps_pe == 1.0:
        return 0.0
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.erfc(mid / math.sqrt(2.0)) > eps_pe:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def worst_case_params(T: float, xi: float, cfg: FiniteSizeConfig, sys: LinkConfig,
                      V_A: float | None = None) -> tuple[float, float]:
    """Pessimistic ``(T_wc, xi_wc)`` after estimating from ``cfg.m`` symbols."""
    V_A = sys.V_A if V_A is None else V_A
    if T <= 0.0:
        raise EstimationFailureError("transmittance must be positive")
    w = w_factor(cfg.eps_pe)
    V0 = cfg.V0
    s_t = 2.0 * T / math.sqrt(V0 * cfg.m) * math.sqrt(cfg.c_pe + (xi + (V0 + sys.v_el) / (sys.eta * T)) / V_A)
    t_wc = T - w * s_t
    if t_wc <= 0.0:
        raise EstimationFailureError(f"worst-case transmittance {t_wc:.3g} <= 0; block too small (m={cfg.m:g})")
    s_xi = math.sqrt(2.0 / (V0 * cfg.m)) * (sys.eta * T + V0 + sys.v_el) / (sys.eta * t_wc)
    return t_wc, T / t_wc * xi + w * s_xi


def mixture_moments(f_attack: float, p: float, g: float, T0: float) -> tuple[float, float]:
    """``(E[sqrt T], E[T])`` when the attack acts on a fraction ``f_attack`` of the block."""
    if not 0.0 <= f_attack <= 1.0:
        raise InvalidInputError(f"f_attack must be in [0, 1], got {f_attack}")
    e_sqrt = f_attack * p * math.sqrt(g * T0) + (1.0 - f_attack) * math.sqrt(T0)
    e_t = f_attack * p * g * T0 + (1.0 - f_attack) * T0
    return e_sqrt, e_t


def weighted_params(f_attack: float, p: float, g: float, T0: float, V_A: float, xi: float) -> tuple[float, float]:
    """Estimates from a block where a fraction ``f_attack`` was attacked."""
    return attacked_estimators(*mixture_moments(f_attack, p, g, T0), V_A, xi)
