"""Fiber transmittance, channel-amplification gain and the attacked T distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .params import AttackConfig

DEFAULT_LOSS_DB_PER_KM = 0.2
ULTRA_LOW_LOSS_DB_PER_KM = 0.15


@dataclass(frozen=True)
class FiberSegment:
    loss_db_per_km: float
    length_km: float

    def __post_init__(self) -> None:
        if self.loss_db_per_km < 0 or self.length_km < 0:
            raise InvalidInputError(
                f"fiber loss and length must be >= 0, got {self.loss_db_per_km} dB/km, {self.length_km} km"
            )


@dataclass(frozen=True)
class TransmittanceSamples:
    """Monte-Carlo transmittance draws with the seed that produced them."""

    values: np.ndarray
    seed: int

    @property
    def count(self) -> int:
        return int(self.values.size)


def transmittance(segment: FiberSegment) -> float:
    """Power transmission ``10**(-loss*length/10)`` of a fiber segment."""
    return 10.0 ** (-segment.loss_db_per_km * segment.length_km / 10.0)


def amplification_gain(L: float, L_prime: float, d_eve_km: float) -> float:
    """Gain from swapping ``d_eve_km`` of fiber with loss ``L`` for fiber with loss ``L_prime``.

    ``L_prime > L`` is allowed and gives ``g < 1`` (a lossier patch).
    """
    if d_eve_km < 0:
        raise InvalidInputError(f"d_eve_km must be >= 0, got {d_eve_km}")
    if L < 0 or L_prime < 0:
        raise InvalidInputError("fiber losses must be >= 0")
    return 10.0 ** ((L - L_prime) * d_eve_km / 10.0)


def analytic_moments(cfg: AttackConfig, T0: float) -> tuple[float, float]:
    """Return ``(E[sqrt T], E[T])`` of the two-point attacked distribution."""
    if not 0 < T0 <= 1:
        raise InvalidInputError(f"T0 must be in (0, 1], got {T0}")
    return cfg.p * math.sqrt(cfg.g * T0), cfg.p * cfg.g * T0


def total_excess_noise(xi_b: float, sigma_rin_lo: float, V_A: float) -> float:
    """Baseline excess noise plus the LO relative-intensity-noise contribution."""
    if xi_b < 0 or sigma_rin_lo < 0 or V_A < 0:
        raise InvalidInputError("xi_b, sigma_rin_lo and V_A must be >= 0")
    return xi_b + (V_A + 1.0) / 4.0 * sigma_rin_lo


def truncated_normal(rng: np.random.Generator, mean: float, std: float, size: int,
                     lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Normal draws restricted to ``[lo, hi]`` by rejection.

    Draws are made in vectorised batches and rejected values are replaced
    from later batches, so the result depends only on the generator state.
    """
    if std == 0.0:
        return np.full(size, min(max(mean, lo), hi))
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        batch = rng.normal(mean, std, size=max(need + need // 8 + 16, 64))
        batch = batch[(batch >= lo) & (batch <= hi)][:need]
        out[filled:filled + batch.size] = batch
        filled += batch.size
    return out


def draw_transmittance(cfg: AttackConfig, n: int, rng: np.random.Generator,
                       loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> np.ndarray:
    """Raw draws ``b * g * T_eve * nu`` using ``rng``; see :func:`sample_transmittance`."""
    if n <= 0:
        raise InvalidInputError(f"sample count must be > 0, got {n}")
    t_eve = 10.0 ** (-loss_db_per_km * cfg.d_eve_km / 10.0)
    t_bob = 10.0 ** (-loss_db_per_km * cfg.d_bob_km / 10.0)
    passed = rng.random(n) < cfg.p
    nu = truncated_normal(rng, t_bob, cfg.sigma_rin_lo * t_bob, n)
    return np.clip(passed * (cfg.g * t_eve) * nu, 0.0, 1.0)


def sample_transmittance(cfg: AttackConfig, n: int, seed: int,
                         loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> TransmittanceSamples:
    """Monte-Carlo draws of the transmittance seen by the LO monitor.

    Each draw is ``b * g * T_eve * nu`` with ``b ~ Bernoulli(p)`` and ``nu``
    a normal centred on ``T_bob`` with relative spread ``sigma_rin_lo``,
    truncated to [0, 1].  Uses PCG64 seeded through ``SeedSequence(seed)``.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return TransmittanceSamples(draw_transmittance(cfg, n, rng, loss_db_per_km), seed)
