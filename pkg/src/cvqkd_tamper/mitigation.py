"""Key rates under channel tampering, with and without post-selection.

``K_attack`` is what Alice and Bob get when they estimate the channel from
the whole block.  ``K_ps`` bins the block by classifier tag and distils key
from each bin separately, so the attacked bin no longer drags the estimate
of the clean one.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import ULTRA_LOW_LOSS_DB_PER_KM, amplification_gain
from .errors import EstimationFailureError, InvalidInputError
from .estimation import attacked_estimators, mixture_moments
from .params import AttackConfig, AttackKind, FiniteSizeConfig, LinkConfig
from .security import best_modulation, key_rate, link_excess_noise

CSV_COLUMNS = ("d_eve_km", "sigma_rin_lo", "k0", "k_attack", "k_ps", "improvement", "v_a_opt", "flags",
               "k0_raw", "k_attack_raw", "k_ps_raw")

# flag bits
FLAG_K0_FAILED = 1
FLAG_ATTACK_FAILED = 2
FLAG_PS_BIN_FAILED = 4


@dataclass(frozen=True)
class Misclassification:
    """Tagging errors: ``fn`` of attacked blocks land in the clean bin, ``fp`` of clean blocks in the attacked bin."""

    fn: float = 0.0
    fp: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.fn <= 1.0 and 0.0 <= self.fp <= 1.0):
            raise InvalidInputError("misclassification rates must be in [0, 1]")

    @property
    def perfect(self) -> bool:
        return self.fn == 0.0 and self.fp == 0.0


PERFECT = Misclassification()


@dataclass(frozen=True)
class SweepGrid:
    """Axes and fixed parameters of an improvement map.

    ``cfg=None`` evaluates asymptotic key rates.
    """

    d_eve_values: Sequence[float]
    sigma_values: Sequence[float]
    sys: LinkConfig = field(default_factory=LinkConfig)
    cfg: FiniteSizeConfig | None = field(default_factory=FiniteSizeConfig)
    f_attack: float = 0.5
    kind: AttackKind = AttackKind.CA
    loss_prime_db_per_km: float = ULTRA_LOW_LOSS_DB_PER_KM
    misclassification: Misclassification = PERFECT

    def __post_init__(self) -> None:
        d = np.asarray(self.d_eve_values, dtype=float)
        s = np.asarray(self.sigma_values, dtype=float)
        if d.size == 0 or s.size == 0:
            raise InvalidInputError("grid axes must be non-empty")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(s) <= 0):
            raise InvalidInputError("grid axes must be strictly increasing")
        if d[0] < 0 or d[-1] > self.sys.total_length_km:
            raise InvalidInputError(f"d_eve must lie in [0, {self.sys.total_length_km}] km")
        if s[0] < 0:
            raise InvalidInputError("sigma_rin_lo must be >= 0")
        if not 0.0 <= self.f_attack <= 1.0:
            raise InvalidInputError("f_attack must be in [0, 1]")
        kind = AttackKind(self.kind)
        if kind not in (AttackKind.CA, AttackKind.CADOS):
            raise InvalidInputError("improvement maps cover the CA and CADoS attacks")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "d_eve_values", tuple(float(x) for x in d))
        object.__setattr__(self, "sigma_values", tuple(float(x) for x in s))

    @classmethod
    def linspace(cls, n_d: int = 50, n_sigma: int = 50, d_max: float = 40.0, sigma_max: float = 0.1,
                 **kw) -> "SweepGrid":
        return cls(tuple(np.linspace(0.0, d_max, n_d)), tuple(np.linspace(0.0, sigma_max, n_sigma)), **kw)

    def attack_at(self, d_eve_km: float) -> tuple[float, float]:
        """``(g, p)`` of the attack when Eve replaces ``d_eve_km`` of fiber."""
        g = amplification_gain(self.sys.loss_db_per_km, self.loss_prime_db_per_km, d_eve_km)
        p = 1.0 if self.kind is AttackKind.CA else 1.0 / math.sqrt(g)
        return g, p


@dataclass(frozen=True)
class MitigationResult:
    d_eve_km: float
    sigma_rin_lo: float
    k0_raw: float
    k_attack_raw: float
    k_ps_raw: float
    v_a_opt: float
    flags: int = 0

    @staticmethod
    def _clamp(x: float) -> float:
        return x if x > 0.0 else 0.0  # also maps NaN to 0

    @property
    def k0(self) -> float:
        return self._clamp(self.k0_raw)

    @property
    def k_attack(self) -> float:
        return self._clamp(self.k_attack_raw)

    @property
    def k_ps(self) -> float:
        return self._clamp(self.k_ps_raw)

    @property
    def improvement(self) -> float:
        return self.k_ps - self.k_attack

    @property
    def raw_improvement(self) -> float:
        return self.k_ps_raw - self.k_attack_raw

    def row(self) -> list[str]:
        vals = [self.d_eve_km, self.sigma_rin_lo, self.k0, self.k_attack, self.k_ps, self.improvement, self.v_a_opt]
        raw = [self.k0_raw, self.k_attack_raw, self.k_ps_raw]
        return [repr(float(v)) for v in vals] + [str(self.flags)] + [repr(float(v)) for v in raw]


# ---------------------------------------------------------------------------
# single operating point
# ---------------------------------------------------------------------------

def _bin_params(frac_attacked: float, p: float, g: float, T0: float, V_A: float, xi0: float) -> tuple[float, float]:
    if frac_attacked == 0.0:
        return T0, xi0
    if frac_attacked == 1.0:
        return p * p * g * T0, (V_A + xi0) / p - V_A
    return attacked_estimators(*mixture_moments(frac_attacked, p, g, T0), V_A, xi0)


def _rate(V_A: float, T: float, xi: float, sys: LinkConfig, cfg: FiniteSizeConfig | None,
          fraction: float) -> float:
    sub = None if cfg is None else (cfg if fraction == 1.0 else cfg.scaled(fraction))
    return key_rate(V_A, T, xi, sys, sub)


def _point(g: float, p: float, f: float, T0: float, xi0: float, V_A: float, sys: LinkConfig,
           cfg: FiniteSizeConfig | None, mis: Misclassification) -> tuple[float, float, int]:
    """Raw ``(K_attack, K_ps, flags)``; NaN marks a failed evaluation."""
    flags = 0
    T_hat, xi_hat = _bin_params(f, p, g, T0, V_A, xi0)
    k_att = key_rate(V_A, T_hat, xi_hat, sys, cfg) if T_hat > 0 else math.nan
    if math.isnan(k_att):
        flags |= FLAG_ATTACK_FAILED

    # bin weights and attacked share inside each bin
    w_clean = (1.0 - f) * (1.0 - mis.fp) + f * mis.fn
    w_att = 1.0 - w_clean
    k_ps = 0.0
    for weight, attacked in ((w_clean, f * mis.fn), (w_att, f * (1.0 - mis.fn))):
        if weight <= 0.0:
            continue
        share = min(max(attacked / weight, 0.0), 1.0)
        if mis.perfect:
            share = round(share)  # exactly 0 or 1 up to rounding
        T_b, xi_b = _bin_params(share, p, g, T0, V_A, xi0)
        k_b = _rate(V_A, T_b, xi_b, sys, cfg, weight) if T_b > 0 else math.nan
        if math.isnan(k_b):
            flags |= FLAG_PS_BIN_FAILED  # a bin that cannot be estimated yields no key
            continue
        k_ps += weight * k_b
    return k_att, k_ps, flags


def _unattacked(sys: LinkConfig, cfg: FiniteSizeConfig | None, V_A: float | None) -> tuple[float, float, float]:
    """``(V_A, K0, xi0)``; optimises V_A for the clean link when not given."""
    if V_A is None:
        V_A, k0 = best_modulation(sys.T0, sys, cfg)
    else:
        k0 = key_rate(V_A, sys.T0, link_excess_noise(sys, V_A), sys, cfg)
    return V_A, k0, link_excess_noise(sys, V_A)


def _checked(value: float, what: str) -> float:
    if math.isnan(value):
        raise EstimationFailureError(f"{what}: finite-size estimation failed")
    return value


def attacked_skr(attack: AttackConfig, sys: LinkConfig, cfg: FiniteSizeConfig | None,
                 V_A: float | None = None) -> float:
    """Signed key rate when the whole block is estimated together.

    ``V_A=None`` uses the modulation that is optimal for the clean link.
    The excess noise follows ``sys`` (including its RIN level).
    """
    V_A, _, xi0 = _unattacked(sys, cfg, V_A)
    k_att, _, _ = _point(attack.g, attack.p, attack.f_attack, sys.T0, xi0, V_A, sys, cfg, PERFECT)
    return _checked(k_att, "attacked key rate")


def post_selected_skr(attack: AttackConfig, sys: LinkConfig, cfg: FiniteSizeConfig | None,
                      V_A: float | None = None, misclassification: Misclassification = PERFECT) -> float:
    """Signed key rate after binning by classifier tag.

    Each bin is evaluated with its own share of ``N`` and ``m``.
    """
    V_A, _, xi0 = _unattacked(sys, cfg, V_A)
    _, k_ps, flags = _point(attack.g, attack.p, attack.f_attack, sys.T0, xi0, V_A, sys, cfg, misclassification)
    if flags & FLAG_PS_BIN_FAILED:
        raise EstimationFailureError("post-selected key rate: a bin failed finite-size estimation")
    return k_ps


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sigma_row(grid: SweepGrid, sigma: float) -> list[MitigationResult]:
    sys = grid.sys.with_(sigma_rin_lo=sigma)
    V_A, k0 = best_modulation(sys.T0, sys, grid.cfg)
    row_flags = 0 if math.isfinite(k0) else FLAG_K0_FAILED
    if not math.isfinite(k0):
        V_A = sys.V_A
        k0 = math.nan
    xi0 = link_excess_noise(sys, V_A)
    out = []
    for d in grid.d_eve_values:
        g, p = grid.attack_at(d)
        k_att, k_ps, flags = _point(g, p, grid.f_attack, sys.T0, xi0, V_A, sys, grid.cfg, grid.misclassification)
        out.append(MitigationResult(d, sigma, k0, k_att, k_ps, V_A, flags | row_flags))
    return out


def improvement_map(grid: SweepGrid, threads: int = 1) -> list[list[MitigationResult]]:
    """Results indexed ``[i_sigma][i_d_eve]``.

    V_A is optimised once per sigma for the clean link and reused for the
    attacked and post-selected rates.  Cells are independent, so the
    output does not depend on ``threads``.
    """
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: _sigma_row(grid, s), grid.sigma_values))
    return [_sigma_row(grid, s) for s in grid.sigma_values]


def small_block_study(grid: SweepGrid, N: float = 1e8, threads: int = 1) -> list[list[MitigationResult]]:
    """Improvement map with a small block (``m = N/10``)."""
    base = grid.cfg or FiniteSizeConfig()
    cfg = FiniteSizeConfig(**{**base.__dict__, "N": N, "m": N / 10.0})
    return improvement_map(SweepGrid(grid.d_eve_values, grid.sigma_values, grid.sys, cfg, grid.f_attack,
                                     grid.kind, grid.loss_prime_db_per_km, grid.misclassification), threads)


@dataclass(frozen=True)
class FrequencyCurve:
    f_values: np.ndarray
    k_attack_raw: np.ndarray
    k_ps_raw: np.ndarray
    k0: float
    v_a_opt: float
    flags: np.ndarray

    @property
    def k_attack(self) -> np.ndarray:
        return np.where(self.k_attack_raw > 0, self.k_attack_raw, 0.0)

    @property
    def k_ps(self) -> np.ndarray:
        return np.where(self.k_ps_raw > 0, self.k_ps_raw, 0.0)

    def zero_window(self) -> tuple[float, float] | None:
        """Smallest and largest f with zero (clamped) attacked key, or None."""
        zero = self.f_values[self.k_attack <= 0.0]
        return (float(zero.min()), float(zero.max())) if zero.size else None


def frequency_sweep(d_eve_km: float, sigma: float, f_values: Iterable[float],
                    sys: LinkConfig | None = None, cfg: FiniteSizeConfig | None = None,
                    kind: AttackKind = AttackKind.CA,
                    loss_prime_db_per_km: float = ULTRA_LOW_LOSS_DB_PER_KM) -> FrequencyCurve:
    """Attacked and post-selected key rates against the attack frequency at one grid point."""
    sys = (sys or LinkConfig()).with_(sigma_rin_lo=sigma)
    f = np.asarray(list(f_values), dtype=float)
    if f.size == 0:
        raise InvalidInputError("f_values must be non-empty")
    if np.any((f < 0) | (f > 1)):
        raise InvalidInputError("f_values must lie in [0, 1]")
    grid = SweepGrid((d_eve_km,), (sigma,), sys, cfg, 0.0, kind, loss_prime_db_per_km)
    g, p = grid.attack_at(d_eve_km)
    V_A, k0, xi0 = _unattacked(sys, cfg, None)
    ka, kp, fl = [], [], []
    for fa in f:
        a, b, c = _point(g, p, float(fa), sys.T0, xi0, V_A, sys, cfg, PERFECT)
        ka.append(a)
        kp.append(b)
        fl.append(c)
    return FrequencyCurve(f, np.array(ka), np.array(kp), k0, V_A, np.array(fl, dtype=np.int64))


def results_to_csv(rows: list[list[MitigationResult]], header_lines: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        for r in row:
            w.writerow(r.row())
    return buf.getvalue()


def frequency_to_csv(curve: FrequencyCurve, header_lines: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_attack", "k0", "k_attack", "k_ps", "k_attack_raw", "k_ps_raw", "v_a_opt", "flags"])
    for i, f in enumerate(curve.f_values):
        w.writerow([repr(float(f)), repr(max(curve.k0, 0.0)), repr(float(curve.k_attack[i])),
                    repr(float(curve.k_ps[i])), repr(float(curve.k_attack_raw[i])),
                    repr(float(curve.k_ps_raw[i])), repr(float(curve.v_a_opt)), str(int(curve.flags[i]))])
    return buf.getvalue()
