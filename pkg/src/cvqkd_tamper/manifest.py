"""Experiment manifests: INI configuration, figure presets and output provenance."""

from __future__ import annotations

import configparser
import hashlib
import importlib.resources
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import AttackScenario
from .errors import InvalidInputError
from .mitigation import Misclassification, SweepGrid
from .params import AttackConfig, AttackKind, FiniteSizeConfig, LinkConfig

# Overrides layered on top of the defaults by ``--figure``.
FIGURES: dict[str, dict[str, dict[str, str]]] = {
    "3a": {"dataset": {"d_eve_km": "10", "sigma_rin_lo": "0.01", "g_ca": "1.12", "p_cados": "0.94"}},
    "3b": {"dataset": {"d_eve_km": "10", "sigma_rin_lo": "0.1", "g_ca": "1.12", "p_cados": "0.94"}},
    "3c": {"dataset": {"d_eve_km": "1", "sigma_rin_lo": "0.01", "g_ca": "1.01", "p_cados": "0.99"}},
    "3d": {"dataset": {"d_eve_km": "1", "sigma_rin_lo": "0.1", "g_ca": "1.01", "p_cados": "0.99"}},
    "4": {"grid": {"kind": "CA"}},
    "5": {"frequency": {"kind": "CA", "d_eve_km": "39", "sigma_rin_lo": "0.098"}},
    "6": {"grid": {"kind": "CADoS"}},
    "appendix-d": {"grid": {"kind": "CA"}, "finite_size": {"N": "1e8", "m": ""}},
}

_SECTIONS = ("run", "link", "finite_size", "dataset", "grid", "frequency")


def _defaults_text() -> str:
    return importlib.resources.files("cvqkd_tamper").joinpath("data/defaults.ini").read_text()


@dataclass
class Manifest:
    """A fully resolved configuration plus where to write results."""

    parser: configparser.ConfigParser
    figure: str | None = None
    out_dir: Path = Path("out")
    threads: int = 1

    # -- loading ---------------------------------------------------------
    @classmethod
    def load(cls, config_path: str | Path | None = None, figure: str | None = None,
             seed: int | None = None, out_dir: str | Path | None = None, threads: int = 1) -> "Manifest":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
        parser.optionxform = str  # keep N vs n distinct
        parser.read_string(_defaults_text(), source="defaults.ini")
        user = None
        if config_path is not None:
            user = configparser.ConfigParser(interpolation=None)
            user.optionxform = str
            text = Path(config_path).read_text()  # OSError surfaces to the caller
            user.read_string(text, source=str(config_path))
            for sec in user.sections():
                if sec not in _SECTIONS:
                    raise InvalidInputError(f"unknown section [{sec}] in {config_path}")
            figure = figure or user.get("run", "figure", fallback=None)
        if figure is not None:
            if figure not in FIGURES:
                raise InvalidInputError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
            for sec, kv in FIGURES[figure].items():
                for k, v in kv.items():
                    parser.set(sec, k, v)
        if user is not None:
            for sec in user.sections():
                for k, v in user.items(sec):
                    if k != "figure" and not parser.has_option(sec, k):
                        raise InvalidInputError(f"unknown key {k!r} in [{sec}]")
                    parser.set(sec, k, v)
        if seed is not None:
            if seed < 0 or seed >= 2**64:
                raise InvalidInputError("seed must be an unsigned 64-bit integer")
            parser.set("run", "seed", str(seed))
        if threads < 1:
            raise InvalidInputError("threads must be >= 1")
        if parser.has_option("run", "figure"):
            parser.remove_option("run", "figure")
        return cls(parser, figure, Path(out_dir) if out_dir is not None else Path("out"), threads)

    # -- typed accessors ---------------------------------------------------
    def _float(self, sec: str, key: str) -> float:
        raw = self.parser.get(sec, key).strip()
        try:
            val = float(raw)
        except ValueError as exc:
            raise InvalidInputError(f"[{sec}] {key} = {raw!r} is not a number") from exc
        if not math.isfinite(val):
            raise InvalidInputError(f"[{sec}] {key} must be finite")
        return val

    def _opt_float(self, sec: str, key: str) -> float | None:
        return None if not self.parser.get(sec, key).strip() else self._float(sec, key)

    def _int(self, sec: str, key: str) -> int:
        val = self._float(sec, key)
        if val != int(val):
            raise InvalidInputError(f"[{sec}] {key} must be an integer")
        return int(val)

    def _bool(self, sec: str, key: str) -> bool:
        try:
            return self.parser.getboolean(sec, key)
        except ValueError as exc:
            raise InvalidInputError(f"[{sec}] {key} must be true or false") from exc

    @property
    def seed(self) -> int:
        s = self._int("run", "seed")
        if s < 0:
            raise InvalidInputError("seed must be >= 0")
        return s

    def link(self) -> LinkConfig:
        s = "link"
        return LinkConfig(
            beta=self._float(s, "beta"), eta=self._float(s, "eta"), v_el=self._float(s, "v_el"),
            N0=self._float(s, "N0"), V_A=self._float(s, "V_A"), xi_b=self._float(s, "xi_b"),
            sigma_rin_lo=self._float(s, "sigma_rin_lo"), loss_db_per_km=self._float(s, "loss_db_per_km"),
            total_length_km=self._float(s, "total_length_km"),
            detector_model=self.parser.get(s, "detector_model").strip(),
        )

    def finite_size(self) -> FiniteSizeConfig | None:
        s = "finite_size"
        if self._bool(s, "asymptotic"):
            return None
        return FiniteSizeConfig(
            N=self._float(s, "N"), m=self._opt_float(s, "m"), eps_pe=self._float(s, "eps_pe"),
            eps_cor=self._float(s, "eps_cor"), eps_h=self._float(s, "eps_h"), eps_s=self._float(s, "eps_s"),
            p_ec=self._float(s, "p_ec"), d_alphabet=self._int(s, "d_alphabet"), V0=self._float(s, "V0"),
            c_pe=self._float(s, "c_pe"),
        )

    def scenario(self) -> AttackScenario:
        s = "dataset"
        total = self._float("link", "total_length_km")
        d_eve = self._float(s, "d_eve_km")
        if not 0.0 <= d_eve <= total:
            raise InvalidInputError(f"[dataset] d_eve_km must be in [0, {total}]")
        sigma = self._float(s, "sigma_rin_lo")
        loss = self._float("link", "loss_db_per_km")
        name = self.figure or "custom"
        if self._bool(s, "identical"):
            return AttackScenario(name, (AttackConfig.normal(d_eve_km=d_eve, d_bob_km=total - d_eve,
                                                             sigma_rin_lo=sigma),) * 4, loss)
        return AttackScenario.build(
            name, total_km=total, d_eve_km=d_eve, sigma=sigma, g_ca=self._float(s, "g_ca"),
            g_cados=self._opt_float(s, "g_cados"), p_cados=self._float(s, "p_cados"),
            g_dos=self._float(s, "g_dos"), p_dos=self._float(s, "p_dos"), loss_db_per_km=loss,
        )

    def dataset_shape(self) -> dict:
        s = "dataset"
        return dict(m=self._int(s, "m"), n_samples=self._int(s, "n_samples"),
                    test_fraction=self._float(s, "test_fraction"))

    def tree_params(self) -> tuple[int, int]:
        return self._int("dataset", "max_depth"), self._int("dataset", "min_samples_leaf")

    def grid(self) -> SweepGrid:
        s = "grid"
        nd, ns = self._int(s, "d_eve_n"), self._int(s, "sigma_n")
        if nd < 1 or ns < 1:
            raise InvalidInputError("empty grid: set [grid] d_eve_n and sigma_n to at least 1")
        return SweepGrid(
            tuple(np.linspace(self._float(s, "d_eve_min"), self._float(s, "d_eve_max"), nd)),
            tuple(np.linspace(self._float(s, "sigma_min"), self._float(s, "sigma_max"), ns)),
            sys=self.link(), cfg=self.finite_size(), f_attack=self._float(s, "f_attack"),
            kind=AttackKind.parse(self.parser.get(s, "kind")),
            loss_prime_db_per_km=self._float(s, "loss_prime_db_per_km"),
            misclassification=Misclassification(self._float(s, "fn_rate"), self._float(s, "fp_rate")),
        )

    def frequency(self) -> dict:
        s = "frequency"
        n = self._int(s, "f_n")
        if n < 1:
            raise InvalidInputError("empty sweep: set [frequency] f_n to at least 1")
        return dict(
            d_eve_km=self._float(s, "d_eve_km"), sigma=self._float(s, "sigma_rin_lo"),
            f_values=np.linspace(self._float(s, "f_min"), self._float(s, "f_max"), n),
            kind=AttackKind.parse(self.parser.get(s, "kind")),
            loss_prime_db_per_km=self._float(s, "loss_prime_db_per_km"),
        )

    # -- provenance ---------------------------------------------------------
    def canonical(self) -> str:
        """Sorted ``section.key = value`` lines; the basis of :meth:`digest`."""
        lines = []
        for sec in sorted(self.parser.sections()):
            for k, v in sorted(self.parser.items(sec)):
                lines.append(f"{sec}.{k} = {v.strip()}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def header_lines(self) -> list[str]:
        return [f"manifest_sha256 = {self.digest()}", f"seed = {self.seed}"]

    def as_dict(self) -> dict:
        return {sec: dict(self.parser.items(sec)) for sec in self.parser.sections()}
