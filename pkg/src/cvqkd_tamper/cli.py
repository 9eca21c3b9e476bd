"""Command-line entry point: ``cvqkd-tamper {simulate,classify,sweep,frequency}``."""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .channel import draw_transmittance
from .classifier import CLASSES, evaluate, generate_dataset, train_tree
from .errors import InvalidInputError, NumericalDomainError
from .manifest import FIGURES, Manifest
from .mitigation import frequency_sweep, frequency_to_csv, improvement_map, results_to_csv

log = logging.getLogger("cvqkd_tamper")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _sidecar(man: Manifest, command: str, extra: dict) -> str:
    meta = {
        "command": command,
        "figure": man.figure,
        "seed": man.seed,
        "manifest_sha256": man.digest(),
        "config": man.as_dict(),
        "backend": _kernels.backend(),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    meta.update(extra)
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"


def cmd_simulate(man: Manifest) -> list[Path]:
    """Per-class transmittance draws (first window) and the feature datasets."""
    scen = man.scenario()
    shape = man.dataset_shape()
    split = generate_dataset(scen, man.seed, threads=man.threads, **shape)
    out = man.out_dir
    hdr = man.header_lines()

    buf = io.StringIO()
    for line in hdr:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "t"])
    sample_seeds = np.random.SeedSequence(man.seed).spawn(len(CLASSES) + 2)[-1].spawn(len(CLASSES))
    for kind, cfg, ss in zip(CLASSES, scen.configs, sample_seeds):
        rng = np.random.Generator(np.random.PCG64(ss))
        for t in draw_transmittance(cfg, shape["n_samples"], rng, scen.loss_db_per_km):
            w.writerow([kind.label, repr(float(t))])
    paths = [out / "samples.csv", out / "dataset_train.csv", out / "dataset_test.csv", out / "simulate.json"]
    _write(paths[0], buf.getvalue())
    _write(paths[1], split.train.to_csv(hdr))
    _write(paths[2], split.test.to_csv(hdr))
    _write(paths[3], _sidecar(man, "simulate", {"train_size": len(split.train), "test_size": len(split.test)}))
    return paths


def cmd_classify(man: Manifest) -> dict:
    split = generate_dataset(man.scenario(), man.seed, threads=man.threads, **man.dataset_shape())
    depth, leaf = man.tree_params()
    tree = train_tree(split.train, depth, leaf)
    cm = evaluate(tree, split.test)
    out = man.out_dir

    buf = io.StringIO()
    for line in man.header_lines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\predicted"] + [k.label for k in CLASSES] + ["precision", "recall"])
    prec, rec = cm.precision(), cm.recall()
    for i, k in enumerate(CLASSES):
        w.writerow([k.label] + [int(c) for c in cm.counts[i]] + [repr(float(prec[i])), repr(float(rec[i]))])
    _write(out / "confusion.csv", buf.getvalue())
    _write(out / "tree.txt", "\n".join(f"# {h}" for h in man.header_lines()) + "\n" + tree.dumps())

    dom = cm.dominant_confusion()
    report = {
        "accuracy": cm.accuracy,
        "counts": cm.counts.tolist(),
        "classes": [k.label for k in CLASSES],
        "precision": [float(x) for x in prec],
        "recall": [float(x) for x in rec],
        "dominant_confusion": None if dom is None else [dom[0].label, dom[1].label, dom[2]],
        "tree_nodes": tree.n_nodes,
        "tree_depth": tree.depth,
    }
    _write(out / "classify.json", _sidecar(man, "classify", report))
    return report


def cmd_sweep(man: Manifest) -> Path:
    grid = man.grid()
    rows = improvement_map(grid, threads=man.threads)
    name = {"4": "fig4", "6": "fig6", "appendix-d": "appendix_d"}.get(man.figure or "", "sweep")
    path = man.out_dir / f"{name}.csv"
    _write(path, results_to_csv(rows, man.header_lines()))
    cells = [r for row in rows for r in row]
    summary = {
        "d_eve_values": list(grid.d_eve_values),
        "sigma_values": list(grid.sigma_values),
        "layout": "row-major, sigma outer, d_eve inner",
        "max_improvement": max(r.improvement for r in cells),
        "cells_failed": sum(1 for r in cells if r.flags),
    }
    _write(path.with_suffix(".json"), _sidecar(man, "sweep", summary))
    return path


def cmd_frequency(man: Manifest) -> Path:
    fq = man.frequency()
    curve = frequency_sweep(fq["d_eve_km"], fq["sigma"], fq["f_values"], man.link(), man.finite_size(),
                            fq["kind"], fq["loss_prime_db_per_km"])
    path = man.out_dir / "frequency.csv"
    _write(path, frequency_to_csv(curve, man.header_lines()))
    _write(path.with_suffix(".json"), _sidecar(man, "frequency", {
        "k0": curve.k0, "v_a_opt": curve.v_a_opt, "zero_window": curve.zero_window(),
    }))
    return path


COMMANDS = {"simulate": cmd_simulate, "classify": cmd_classify, "sweep": cmd_sweep, "frequency": cmd_frequency}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cvqkd-tamper", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        sp.add_argument("--config", type=Path, help="INI file overriding the built-in defaults")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides [run] seed)")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--figure", choices=sorted(FIGURES), help="preset parameters for one figure")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        man = Manifest.load(args.config, args.figure, args.seed, args.out, args.threads)
        result = COMMANDS[args.command](man)
    except (InvalidInputError, configparser.Error) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        print("see `cvqkd-tamper <command> --help`", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDomainError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "classify":
        print(f"accuracy {result['accuracy']:.4f}")
    elif isinstance(result, Path):
        print(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
