import json

import pytest

from cvqkd_tamper import NumericalDomainError, cli
from cvqkd_tamper.classifier import LabeledDataset
from cvqkd_tamper.manifest import Manifest

SMALL_GRID = """
[grid]
d_eve_n = 4
sigma_n = 3
"""

SMALL_DATA = """
[dataset]
m = 100
n_samples = 200
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def numeric_lines(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_simulate_writes_datasets(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["simulate", "--figure", "3a", "--seed", "3", "--out", str(out),
                     "--config", str(write(tmp_path, "c.ini", SMALL_DATA))]) == 0
    train = LabeledDataset.from_csv((out / "dataset_train.csv").read_text())
    assert len(train) == 4 * 80
    head = (out / "samples.csv").read_text().splitlines()
    assert head[0].startswith("# manifest_sha256 = ") and head[1] == "# seed = 3"
    assert len(head) == 3 + 4 * 200
    meta = json.loads((out / "simulate.json").read_text())
    assert meta["seed"] == 3 and "timestamp" in meta and meta["figure"] == "3a"


def test_simulate_is_reproducible(tmp_path):
    cfg = str(write(tmp_path, "c.ini", SMALL_DATA))
    for d in ("a", "b"):
        assert cli.main(["simulate", "--seed", "9", "--out", str(tmp_path / d), "--config", cfg]) == 0
    for name in ("samples.csv", "dataset_train.csv", "dataset_test.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_classify_report(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["classify", "--figure", "3a", "--out", str(out), "--threads", "2"]) == 0
    report = json.loads((out / "classify.json").read_text())
    assert report["accuracy"] >= 0.995
    assert len(report["precision"]) == 4 and len(report["recall"]) == 4
    assert "accuracy" in capsys.readouterr().out
    assert (out / "tree.txt").read_text().count("cvqkd-tamper-tree v1") == 1
    rows = numeric_lines(out / "confusion.csv")
    assert rows[0].startswith("true\\predicted,Normal,CA,CADoS,DoS")


def test_classify_indistinguishable(tmp_path):
    cfg = write(tmp_path, "c.ini", "[dataset]\nidentical = true\n")
    assert cli.main(["classify", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    acc = json.loads((tmp_path / "classify.json").read_text())["accuracy"]
    assert 0.15 < acc < 0.35


def test_sweep_and_figure_names(tmp_path):
    cfg = str(write(tmp_path, "g.ini", SMALL_GRID))
    assert cli.main(["sweep", "--figure", "6", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert len(numeric_lines(tmp_path / "fig6.csv")) == 1 + 12
    meta = json.loads((tmp_path / "fig6.json").read_text())
    assert meta["config"]["grid"]["kind"] == "CADoS"
    assert cli.main(["sweep", "--figure", "appendix-d", "--config", cfg, "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "appendix_d.json").read_text())
    assert float(meta["config"]["finite_size"]["N"]) == 1e8


def test_frequency(tmp_path):
    cfg = write(tmp_path, "f.ini", "[frequency]\nf_n = 5\n")
    assert cli.main(["frequency", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = numeric_lines(tmp_path / "frequency.csv")
    assert len(rows) == 6
    f0 = rows[1].split(",")
    assert f0[0] == "0.0" and f0[1] == f0[2] == f0[3]


def test_manifest_hash(tmp_path):
    a = Manifest.load(figure="4", seed=1, out_dir=tmp_path / "x", threads=1)
    b = Manifest.load(figure="4", seed=1, out_dir=tmp_path / "y", threads=8)
    c = Manifest.load(figure="4", seed=2)
    d = Manifest.load(figure="6", seed=1)
    assert a.digest() == b.digest()
    assert len({a.digest(), c.digest(), d.digest()}) == 3


@pytest.mark.parametrize("argv_tail, text", [
    ([], "[grid]\nd_eve_n = 0\n"),
    ([], "[grid]\nbogus = 1\n"),
    ([], "[nowhere]\nx = 1\n"),
    ([], "[link]\neta = 1.5\n"),
    ([], "[grid]\nf_attack = abc\n"),
    (["--seed", "-4"], ""),
])
def test_invalid_configuration(tmp_path, capsys, argv_tail, text):
    cfg = write(tmp_path, "bad.ini", text)
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path)] + argv_tail) == 1
    assert "invalid configuration" in capsys.readouterr().err


def test_bad_arguments_exit_1():
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--figure", "99"])
    assert exc.value.code == 1


def test_io_failure(tmp_path):
    blocker = write(tmp_path, "file", "x")
    assert cli.main(["frequency", "--out", str(blocker / "sub"), "--config",
                     str(write(tmp_path, "f.ini", "[frequency]\nf_n = 2\n"))]) == 3
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.ini")]) == 3


def test_numerical_failure(tmp_path, monkeypatch):
    def boom(man):
        raise NumericalDomainError("negative discriminant")

    monkeypatch.setitem(cli.COMMANDS, "sweep", boom)
    assert cli.main(["sweep", "--out", str(tmp_path)]) == 2
