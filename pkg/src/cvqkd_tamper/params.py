"""Configuration records for the link, the finite-size analysis and the attack."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import InvalidInputError


class AttackKind(enum.IntEnum):
    """Channel classes, in the order used for one-hot labels."""

    NORMAL = 0
    CA = 1
    CADOS = 2
    DOS = 3

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "AttackKind":
        key = text.strip().replace("-", "").replace("_", "").upper()
        for kind in cls:
            if _LABELS[kind].upper().replace("-", "") == key or kind.name == key:
                return kind
        raise InvalidInputError(f"unknown attack kind {text!r}")


_LABELS = {
    AttackKind.NORMAL: "Normal",
    AttackKind.CA: "CA",
    AttackKind.CADOS: "CADoS",
    AttackKind.DOS: "DoS",
}


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidInputError(msg)


@dataclass(frozen=True)
class LinkConfig:
    """Fiber link and CV-QKD system parameters, variances in shot-noise units.

    ``detector_model`` selects how Bob's detector is treated when bounding
    Eve's information: ``"trusted"`` (efficiency and electronic noise are not
    attributed to Eve) or ``"untrusted"`` (both are folded into the channel).
    """

    beta: float = 0.9
    eta: float = 0.9
    v_el: float = 0.05
    N0: float = 1.0
    V_A: float = 2.8
    xi_b: float = 0.01
    sigma_rin_lo: float = 0.0
    loss_db_per_km: float = 0.2
    total_length_km: float = 40.0
    detector_model: str = "trusted"

    def __post_init__(self) -> None:
        _check(0 < self.beta <= 1, f"beta must be in (0, 1], got {self.beta}")
        _check(0 < self.eta <= 1, f"eta must be in (0, 1], got {self.eta}")
        _check(self.v_el >= 0, f"v_el must be >= 0, got {self.v_el}")
        _check(self.N0 > 0, f"N0 must be > 0, got {self.N0}")
        _check(self.V_A > 0, f"V_A must be > 0, got {self.V_A}")
        _check(self.xi_b >= 0, f"xi_b must be >= 0, got {self.xi_b}")
        _check(self.sigma_rin_lo >= 0, f"sigma_rin_lo must be >= 0, got {self.sigma_rin_lo}")
        _check(self.loss_db_per_km >= 0, "loss_db_per_km must be >= 0")
        _check(self.total_length_km >= 0, "total_length_km must be >= 0")
        _check(
            self.detector_model in ("trusted", "untrusted"),
            f"detector_model must be 'trusted' or 'untrusted', got {self.detector_model!r}",
        )

    @property
    def T0(self) -> float:
        """Unattacked transmittance of the whole link."""
        return 10.0 ** (-self.loss_db_per_km * self.total_length_km / 10.0)

    def with_(self, **changes) -> "LinkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class FiniteSizeConfig:
    """Block and security parameters for the finite-size key rate."""

    N: float = 1e12
    m: float | None = None
    eps_pe: float = 1e-9
    eps_cor: float = 1e-9
    eps_h: float = 1e-9
    eps_s: float = 1e-9
    p_ec: float = 0.99
    d_alphabet: int = 2**5
    V0: float = 2.0
    c_pe: float = 0.0

    def __post_init__(self) -> None:
        if self.m is None:
            object.__setattr__(self, "m", self.N / 10.0)
        _check(self.N > 0, f"N must be > 0, got {self.N}")
        _check(0 < self.m < self.N, f"need 0 < m < N, got m={self.m}, N={self.N}")
        for name in ("eps_pe", "eps_cor", "eps_h", "eps_s"):
            val = getattr(self, name)
            _check(0 < val <= 1, f"{name} must be in (0, 1], got {val}")
        _check(0 < self.p_ec <= 1, f"p_ec must be in (0, 1], got {self.p_ec}")
        _check(self.d_alphabet >= 2, "d_alphabet must be >= 2")
        _check(self.V0 > 0, "V0 must be > 0")
        _check(self.c_pe >= 0, "c_pe must be >= 0")

    @property
    def n(self) -> float:
        """Symbols left for key generation."""
        return self.N - self.m

    @property
    def epsilon(self) -> float:
        """Total secrecy parameter."""
        return 2 * self.p_ec * self.eps_pe + self.eps_cor + self.eps_h + self.eps_s

    def scaled(self, fraction: float) -> "FiniteSizeConfig":
        """Sub-block holding ``fraction`` of the symbols, same m/N ratio."""
        _check(0 < fraction <= 1, f"fraction must be in (0, 1], got {fraction}")
        return replace(self, N=self.N * fraction, m=self.m * fraction)


@dataclass(frozen=True)
class AttackConfig:
    """Channel-tampering attack on the first ``d_eve_km`` of the link.

    ``g`` is the transmittance gain of Eve's segment and ``p`` the
    probability that a pulse is let through.
    """

    kind: AttackKind = AttackKind.NORMAL
    g: float = 1.0
    p: float = 1.0
    d_eve_km: float = 0.0
    d_bob_km: float = 40.0
    f_attack: float = 1.0
    sigma_rin_lo: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AttackKind(self.kind))
        _check(self.g > 0, f"g must be > 0, got {self.g}")
        _check(0 <= self.p <= 1, f"p must be in [0, 1], got {self.p}")
        _check(self.d_eve_km >= 0 and self.d_bob_km >= 0, "distances must be >= 0")
        _check(0 <= self.f_attack <= 1, f"f_attack must be in [0, 1], got {self.f_attack}")
        _check(self.sigma_rin_lo >= 0, "sigma_rin_lo must be >= 0")
        tol = 1e-12
        if self.kind is AttackKind.NORMAL:
            _check(abs(self.p - 1) <= tol and abs(self.g - 1) <= tol, "Normal requires p = 1 and g = 1")
        elif self.kind is AttackKind.CA:
            _check(abs(self.p - 1) <= tol and self.g > 1, "CA requires p = 1 and g > 1")
        elif self.kind is AttackKind.CADOS:
            _check(self.g > 1, "CADoS requires g > 1")
        elif self.kind is AttackKind.DOS:
            _check(self.p < 1 and self.g <= 1 + tol, "DoS requires p < 1 and g <= 1")

    @property
    def total_length_km(self) -> float:
        return self.d_eve_km + self.d_bob_km

    @classmethod
    def ca(cls, g: float, **kw) -> "AttackConfig":
        return cls(kind=AttackKind.CA, g=g, p=1.0, **kw)

    @classmethod
    def ca_dos(cls, g: float, p: float | None = None, **kw) -> "AttackConfig":
        """Hybrid attack; ``p`` defaults to 1/sqrt(g), which keeps the mean estimate at T0."""
        return cls(kind=AttackKind.CADOS, g=g, p=1.0 / math.sqrt(g) if p is None else p, **kw)

    @classmethod
    def dos(cls, g: float, p: float, **kw) -> "AttackConfig":
        return cls(kind=AttackKind.DOS, g=g, p=p, **kw)

    @classmethod
    def normal(cls, **kw) -> "AttackConfig":
        return cls(kind=AttackKind.NORMAL, g=1.0, p=1.0, **kw)
