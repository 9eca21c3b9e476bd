"""Secret key rates of the coherent-state protocol with heterodyne detection.

The covariance-matrix functions (``build_covariance`` .. ``skr_asymptotic``)
work on the two-mode state with Bob's detector folded into the channel.
Key rates used for the attack studies go through :func:`key_rate`, whose
detector treatment is chosen by ``LinkConfig.detector_model``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import total_excess_noise
from .errors import EstimationFailureError, InvalidInputError, NumericalDomainError
from .estimation import w_factor, worst_case_params
from .params import FiniteSizeConfig, LinkConfig

PHYS_TOL = 1e-9


@dataclass(frozen=True)
class CovarianceState:
    """Entries of ``[[a I, c Z], [c Z, b I]]``."""

    a: float
    b: float
    c: float

    def matrix(self) -> np.ndarray:
        a, b, c = self.a, self.b, self.c
        return np.array([
            [a, 0, c, 0],
            [0, a, 0, -c],
            [c, 0, b, 0],
            [0, -c, 0, b],
        ], dtype=float)


@dataclass(frozen=True)
class SkrReport:
    I_AB: float
    chi_EB: float
    K_asymptotic: float
    K_finite: float | None
    lambdas: tuple[float, ...]
    T_wc: float | None = None
    xi_wc: float | None = None

    @property
    def K_asymptotic_clamped(self) -> float:
        return max(self.K_asymptotic, 0.0)

    @property
    def K_finite_clamped(self) -> float | None:
        return None if self.K_finite is None else max(self.K_finite, 0.0)


def build_covariance(V_A: float, T: float, xi: float, eta: float, v_el: float) -> CovarianceState:
    if V_A <= 0 or T < 0 or eta <= 0 or v_el < 0:
        raise InvalidInputError("need V_A > 0, T >= 0, eta > 0, v_el >= 0")
    a = V_A + 1.0
    b = eta * T * (V_A + xi) + 1.0 + v_el
    c = math.sqrt(eta * T * (V_A * V_A + 2.0 * V_A))
    if a * b - c * c < 1.0 - PHYS_TOL or b < 1.0 - PHYS_TOL:
        raise NumericalDomainError(f"unphysical covariance a={a}, b={b}, c={c}")
    return CovarianceState(a, b, c)


def entropy_G(x: float) -> float:
    """``(x+1) log2(x+1) - x log2 x``: entropy of a thermal state with mean photon number x."""
    if x < 0:
        raise InvalidInputError(f"G is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def _g_of_lambda(lam: float) -> float:
    return entropy_G(max(lam - 1.0, 0.0) / 2.0)


def symplectic_spectrum(cov: CovarianceState) -> tuple[float, float]:
    a, b, c = cov.a, cov.b, cov.c
    delta = a * a + b * b - 2.0 * c * c
    det = (a * b - c * c) ** 2
    disc = delta * delta - 4.0 * det
    if disc < -PHYS_TOL * max(1.0, delta * delta):
        raise NumericalDomainError(f"negative discriminant {disc}")
    root = math.sqrt(max(disc, 0.0))
    l1 = math.sqrt(0.5 * (delta + root))
    l2 = math.sqrt(max(0.5 * (delta - root), 0.0))
    if l2 < 1.0 - PHYS_TOL:
        raise NumericalDomainError(f"symplectic eigenvalue {l2} < 1")
    return l1, l2


def mutual_information(cov: CovarianceState) -> float:
    """Alice-Bob information for heterodyne detection at Bob."""
    v_cond = cov.b - cov.c * cov.c / (cov.a + 1.0)
    return math.log2((cov.b + 1.0) / (v_cond + 1.0))


def conditional_eigenvalue(cov: CovarianceState) -> float:
    """Symplectic eigenvalue of Alice's mode after Bob's heterodyne measurement."""
    return cov.a - cov.c * cov.c / (cov.b + 1.0)


def holevo_bound(cov: CovarianceState) -> float:
    """Eve's information on Bob's data, clamped at 0 from below."""
    l1, l2 = symplectic_spectrum(cov)
    l3 = conditional_eigenvalue(cov)
    if l3 < 1.0 - PHYS_TOL:
        raise NumericalDomainError(f"conditional eigenvalue {l3} < 1")
    chi = _g_of_lambda(l1) + _g_of_lambda(l2) - _g_of_lambda(l3)
    if chi < -PHYS_TOL:
        raise NumericalDomainError(f"negative Holevo information {chi}")
    return max(chi, 0.0)


def skr_asymptotic(cov: CovarianceState, beta: float) -> float:
    """``beta * I_AB - chi_EB``; may be negative."""
    return beta * mutual_information(cov) - holevo_bound(cov)


def trusted_detector_spectrum(V_A: float, T: float, xi: float, eta: float, v_el: float) -> tuple[float, ...]:
    """Symplectic eigenvalues (l1, l2, l3, l4) when Bob's detector is trusted.

    l1, l2 belong to the Alice-Bob state at the channel output; l3, l4 to
    the state Eve purifies after Bob's noisy heterodyne outcome.
    """
    if T <= 0:
        raise InvalidInputError("trusted-detector spectrum needs T > 0")
    V = V_A + 1.0
    chil = 1.0 / T - 1.0 + xi
    chih = (2.0 - eta + v_el) / eta
    chit = chil + chih / T
    A = V * V * (1.0 - 2.0 * T) + 2.0 * T + T * T * (V + chil) ** 2
    B = T * T * (V * chil + 1.0) ** 2
    r1 = math.sqrt(max(A * A - 4.0 * B, 0.0))
    sB = math.sqrt(B)
    den = (T * (V + chit)) ** 2
    C = (A * chih * chih + B + 1.0 + 2.0 * chih * (V * sB + T * (V + chil)) + 2.0 * T * (V * V - 1.0)) / den
    D = (V + sB * chih) ** 2 / den
    r2 = math.sqrt(max(C * C - 4.0 * D, 0.0))
    return (
        math.sqrt(0.5 * (A + r1)),
        math.sqrt(max(0.5 * (A - r1), 0.0)),
        math.sqrt(0.5 * (C + r2)),
        math.sqrt(max(0.5 * (C - r2), 0.0)),
    )


def finite_size_terms(cfg: FiniteSizeConfig) -> tuple[float, float]:
    """Return ``(delta_aep, theta)``."""
    d = cfg.d_alphabet
    delta_aep = 4.0 * math.log2(2.0 * math.sqrt(d) + 1.0) * math.sqrt(
        math.log2(18.0 / (cfg.p_ec ** 2 * cfg.eps_s ** 4))
    )
    theta = math.log2(cfg.p_ec * (1.0 - cfg.eps_s ** 2 / 3.0)) + 2.0 * math.log2(math.sqrt(2.0) * cfg.eps_h)
    return delta_aep, theta


def _kernel_args(sys: LinkConfig, cfg: FiniteSizeConfig | None) -> tuple:
    trusted = sys.detector_model == "trusted"
    base = (sys.eta, sys.v_el, sys.beta, trusted)
    if cfg is None:
        return base + (0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0)
    delta_aep, theta = finite_size_terms(cfg)
    return base + (cfg.N, cfg.m, w_factor(cfg.eps_pe), cfg.V0, cfg.c_pe, cfg.p_ec, delta_aep, theta)


def key_rate(V_A, T, xi, sys: LinkConfig, cfg: FiniteSizeConfig | None = None):
    """Raw (signed) key rate in bits/pulse, vectorised over ``V_A``, ``T``, ``xi``.

    ``cfg=None`` gives the asymptotic rate.  Finite-size failures are NaN;
    use :func:`skr_finite` for a checked scalar evaluation.
    """
    out = _kernels.kfinite(V_A, T, xi, *_kernel_args(sys, cfg))
    return float(out) if np.ndim(out) == 0 else out


def skr_finite(T: float, xi: float, sys: LinkConfig, cfg: FiniteSizeConfig, V_A: float | None = None) -> float:
    """Finite-size key rate evaluated at the worst-case channel parameters."""
    V_A = sys.V_A if V_A is None else V_A
    if cfg.n <= 0:
        raise InvalidInputError("no symbols left for the key (n <= 0)")
    worst_case_params(T, xi, cfg, sys, V_A=V_A)
    k = key_rate(V_A, T, xi, sys, cfg)
    if math.isnan(k):
        raise EstimationFailureError("finite-size estimation failed")
    return k


def skr_report(T: float, xi: float, sys: LinkConfig, cfg: FiniteSizeConfig | None = None,
               V_A: float | None = None) -> SkrReport:
    """Information terms and key rates at one operating point."""
    V_A = sys.V_A if V_A is None else V_A
    if sys.detector_model == "trusted":
        lams = trusted_detector_spectrum(V_A, T, xi, sys.eta, sys.v_el)
        chi = max(sum(_g_of_lambda(x) for x in lams[:2]) - sum(_g_of_lambda(x) for x in lams[2:]), 0.0)
        I_AB = mutual_information(build_covariance(V_A, T, xi, sys.eta, sys.v_el))
    else:
        cov = build_covariance(V_A, T, xi, sys.eta, sys.v_el)
        lams = symplectic_spectrum(cov) + (conditional_eigenvalue(cov),)
        chi = holevo_bound(cov)
        I_AB = mutual_information(cov)
    k_inf = sys.beta * I_AB - chi
    k_fin = t_wc = xi_wc = None
    if cfg is not None:
        t_wc, xi_wc = worst_case_params(T, xi, cfg, sys, V_A=V_A)
        k_fin = skr_finite(T, xi, sys, cfg, V_A=V_A)
    return SkrReport(I_AB, chi, k_inf, k_fin, tuple(lams), t_wc, xi_wc)


def optimize_modulation(T: float, sys: LinkConfig, cfg: FiniteSizeConfig | None,
                        V_A_range: tuple[float, float] = (1.0, 10.0), xi: float | None = None,
                        n_grid: int = 64, tol: float = 1e-4) -> tuple[float, float]:
    """Modulation variance maximising the key rate over ``V_A_range``.

    With ``xi=None`` the excess noise follows the link's RIN model and so
    grows with V_A; a given ``xi`` is held fixed.  Grid scan then golden
    section around the best grid point.  Returns ``(V_A_opt, K_opt)`` with
    ``K_opt`` clamped at 0; when nothing is positive the smallest maximiser
    of the raw rate is returned.
    """
    v, k = best_modulation(T, sys, cfg, V_A_range, xi=xi, n_grid=n_grid, tol=tol)
    return v, max(k, 0.0) if math.isfinite(k) else 0.0


def best_modulation(T: float, sys: LinkConfig, cfg: FiniteSizeConfig | None,
                    V_A_range: tuple[float, float] = (1.0, 10.0), xi: float | None = None,
                    n_grid: int = 64, tol: float = 1e-4) -> tuple[float, float]:
    """Like :func:`optimize_modulation` but returns the signed optimum (``-inf`` on failure)."""
    lo, hi = V_A_range
    if not 0 < lo < hi:
        raise InvalidInputError(f"invalid V_A range {V_A_range}")
    if xi is None:
        xi_b, sigma = sys.xi_b, sys.sigma_rin_lo
    else:
        xi_b, sigma = xi, 0.0
    return _kernels.optimize_va(T, xi_b, sigma, *_kernel_args(sys, cfg), lo, hi, n_grid, tol)


def link_excess_noise(sys: LinkConfig, V_A: float) -> float:
    """Excess noise of the unattacked link at modulation ``V_A``."""
    return total_excess_noise(sys.xi_b, sys.sigma_rin_lo, V_A)
