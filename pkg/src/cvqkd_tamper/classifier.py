"""Attack classification from local-oscillator transmittance statistics.

Each feature vector is ``(E[T], E[sqrt T])`` over a window of LO-derived
transmittance draws.  A CART tree with Gini impurity separates the four
channel classes.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels
from .channel import TransmittanceSamples, draw_transmittance
from .errors import InvalidInputError
from .params import AttackConfig, AttackKind

CLASSES: tuple[AttackKind, ...] = (AttackKind.NORMAL, AttackKind.CA, AttackKind.CADOS, AttackKind.DOS)
N_CLASSES = len(CLASSES)
FEATURE_NAMES = ("e_t", "e_sqrt_t")
TREE_FORMAT = "cvqkd-tamper-tree v1"


class FeatureVector(NamedTuple):
    e_t: float
    e_sqrt_t: float


def extract_features(samples: TransmittanceSamples | np.ndarray) -> FeatureVector:
    """Sample means of T and sqrt(T)."""
    values = samples.values if isinstance(samples, TransmittanceSamples) else np.asarray(samples, dtype=float)
    if values.size == 0:
        raise InvalidInputError("cannot extract features from an empty sample")
    if np.any(values < 0):
        raise InvalidInputError("transmittance samples must be >= 0")
    return FeatureVector(float(values.mean()), float(np.sqrt(values).mean()))


# ---------------------------------------------------------------------------
# scenarios and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackScenario:
    """One attack configuration per class, all on the same link."""

    name: str
    configs: tuple[AttackConfig, AttackConfig, AttackConfig, AttackConfig]
    loss_db_per_km: float = 0.2

    def __post_init__(self) -> None:
        if len(self.configs) != N_CLASSES:
            raise InvalidInputError(f"scenario needs {N_CLASSES} configs, got {len(self.configs)}")

    @classmethod
    def build(cls, name: str, *, total_km: float, d_eve_km: float, sigma: float,
              g_ca: float, p_cados: float, g_dos: float, p_dos: float, g_cados: float | None = None,
              loss_db_per_km: float = 0.2) -> "AttackScenario":
        kw = dict(d_eve_km=d_eve_km, d_bob_km=total_km - d_eve_km, sigma_rin_lo=sigma)
        return cls(name, (
            AttackConfig.normal(**kw),
            AttackConfig.ca(g_ca, **kw),
            AttackConfig.ca_dos(g_ca if g_cados is None else g_cados, p_cados, **kw),
            AttackConfig.dos(g_dos, p_dos, **kw),
        ), loss_db_per_km)

    @classmethod
    def identical(cls, cfg: AttackConfig, name: str = "identical") -> "AttackScenario":
        """All four classes drawn from the same channel; useful as a chance-level control."""
        return cls(name, (cfg, cfg, cfg, cfg))


def _preset(name: str, d_eve: float, sigma: float, g: float, p_cados: float) -> AttackScenario:
    return AttackScenario.build(name, total_km=40.0, d_eve_km=d_eve, sigma=sigma,
                                g_ca=g, p_cados=p_cados, g_dos=0.9, p_dos=0.9)


SCENARIOS: dict[str, AttackScenario] = {
    "3a": _preset("3a", 10.0, 0.01, 1.12, 0.94),
    "3b": _preset("3b", 10.0, 0.1, 1.12, 0.94),
    "3c": _preset("3c", 1.0, 0.01, 1.01, 0.99),
    "3d": _preset("3d", 1.0, 0.1, 1.01, 0.99),
}


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix ``(n, 2)`` with integer class labels (``AttackKind`` values)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.features, dtype=float).reshape(-1, 2)
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError("features and labels differ in length")
        if y.size and (y.min() < 0 or y.max() >= N_CLASSES):
            raise InvalidInputError("labels must be class codes 0..3")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return int(self.labels.size)

    def vectors(self) -> list[FeatureVector]:
        return [FeatureVector(float(a), float(b)) for a, b in self.features]

    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self), N_CLASSES), dtype=np.int8)
        out[np.arange(len(self)), self.labels] = 1
        return out

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=N_CLASSES)

    def to_csv(self, header_lines: Iterable[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["e_t", "e_sqrt_t", "label"])
        for (a, b), y in zip(self.features, self.labels):
            w.writerow([repr(float(a)), repr(float(b)), AttackKind(int(y)).label])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LabeledDataset":
        rows = [r for r in csv.reader(line for line in text.splitlines() if not line.startswith("#"))]
        if not rows or rows[0] != ["e_t", "e_sqrt_t", "label"]:
            raise InvalidInputError("dataset CSV must start with e_t,e_sqrt_t,label")
        body = rows[1:]
        X = np.array([[float(r[0]), float(r[1])] for r in body]).reshape(-1, 2)
        y = np.array([int(AttackKind.parse(r[2])) for r in body], dtype=np.int64)
        return cls(X, y)


@dataclass(frozen=True)
class DatasetSplit:
    train: LabeledDataset
    test: LabeledDataset
    seed: int


def _class_features(cfg: AttackConfig, m: int, n_samples: int, ss: np.random.SeedSequence,
                    loss: float) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(ss))
    T = draw_transmittance(cfg, m * n_samples, rng, loss).reshape(m, n_samples)
    e_t, e_s = _kernels.row_moments(T)
    return np.column_stack([e_t, e_s])


def generate_dataset(scenario: AttackScenario, seed: int, m: int = 800, n_samples: int = 1000,
                     test_fraction: float = 0.2, threads: int = 1) -> DatasetSplit:
    """Balanced features for the four classes with a stratified train/test split.

    Class ``k`` draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on ``threads``.
    """
    if m < 2 or n_samples < 1:
        raise InvalidInputError("need m >= 2 vectors and n_samples >= 1 draws per vector")
    if not 0.0 < test_fraction < 1.0:
        raise InvalidInputError("test_fraction must be in (0, 1)")
    children = np.random.SeedSequence(seed).spawn(N_CLASSES + 1)
    jobs = [(cfg, m, n_samples, children[k], scenario.loss_db_per_km) for k, cfg in enumerate(scenario.configs)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            feats = list(pool.map(lambda a: _class_features(*a), jobs))
        # pool.map preserves order
    else:
        feats = [_class_features(*a) for a in jobs]

    split_rng = np.random.Generator(np.random.PCG64(children[-1]))
    n_test = int(round(m * test_fraction))
    tr_X, tr_y, te_X, te_y = [], [], [], []
    for k, F in enumerate(feats):
        order = split_rng.permutation(m)
        te_X.append(F[order[:n_test]])
        tr_X.append(F[order[n_test:]])
        te_y.append(np.full(n_test, int(CLASSES[k])))
        tr_y.append(np.full(m - n_test, int(CLASSES[k])))

    def shuffled(Xs, ys):
        X, y = np.concatenate(Xs), np.concatenate(ys)
        perm = split_rng.permutation(y.size)
        return LabeledDataset(X[perm], y[perm])

    return DatasetSplit(shuffled(tr_X, tr_y), shuffled(te_X, te_y), seed)


# ---------------------------------------------------------------------------
# decision tree
# ---------------------------------------------------------------------------

@dataclass
class DecisionTree:
    """CART classifier on the two LO features.

    Nodes live in flat arrays; ``feature == -1`` marks a leaf.  A sample
    goes left when ``x[feature] <= threshold``.
    """

    max_depth: int = 8
    min_samples_leaf: int = 5
    feature: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    threshold: np.ndarray = field(default_factory=lambda: np.zeros(0))
    left: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    right: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    counts: np.ndarray = field(default_factory=lambda: np.zeros((0, N_CLASSES), dtype=np.int64))

    def __post_init__(self) -> None:
        if self.max_depth < 0 or self.min_samples_leaf < 1:
            raise InvalidInputError("need max_depth >= 0 and min_samples_leaf >= 1")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        if self.n_nodes == 0:
            return 0
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):  # children always follow parents
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if y.size == 0:
            raise InvalidInputError("cannot train on an empty set")
        feat, thr, lft, rgt, cnt = [], [], [], [], []

        def new_node(idx: np.ndarray) -> int:
            feat.append(-1)
            thr.append(0.0)
            lft.append(-1)
            rgt.append(-1)
            cnt.append(np.bincount(y[idx], minlength=N_CLASSES))
            return len(feat) - 1

        stack = [(new_node(np.arange(y.size)), np.arange(y.size), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if depth >= self.max_depth or np.count_nonzero(cnt[node]) <= 1:
                continue
            best = (np.inf, -1, 0.0, None)
            for j in range(X.shape[1]):
                order = idx[np.argsort(X[idx, j], kind="stable")]
                xs = X[order, j]
                score, pos = _kernels.gini_best_split(xs, y[order], N_CLASSES, self.min_samples_leaf)
                if pos >= 0 and score < best[0]:
                    best = (score, j, 0.5 * (xs[pos] + xs[pos + 1]), order)
            score, j, t, order = best
            if j < 0:
                continue
            # midpoint can round onto the upper value; keep the partition the kernel scored
            mask = X[order, j] <= t
            li, ri = order[mask], order[~mask]
            if li.size == 0 or ri.size == 0:
                continue
            feat[node], thr[node] = j, t
            lft[node] = new_node(li)
            rgt[node] = new_node(ri)
            stack.append((rgt[node], ri, depth + 1))
            stack.append((lft[node], li, depth + 1))

        self.feature = np.array(feat, dtype=np.int64)
        self.threshold = np.array(thr, dtype=float)
        self.left = np.array(lft, dtype=np.int64)
        self.right = np.array(rgt, dtype=np.int64)
        self.counts = np.array(cnt, dtype=np.int64).reshape(-1, N_CLASSES)
        return self

    def _leaf_of(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        if self.n_nodes == 0:
            raise InvalidInputError("tree is not trained")
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        return np.argmax(self.counts[self._leaf_of(X)], axis=1)

    def predict_one(self, fv: FeatureVector) -> AttackKind:
        if self.n_nodes == 0:
            raise InvalidInputError("tree is not trained")
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if fv[self.feature[i]] <= self.threshold[i] else self.right[i]
        return AttackKind(int(np.argmax(self.counts[i])))

    def dumps(self) -> str:
        lines = [
            f"# {TREE_FORMAT}",
            f"max_depth {self.max_depth}",
            f"min_samples_leaf {self.min_samples_leaf}",
            "classes " + ",".join(k.label for k in CLASSES),
            "node feature threshold left right counts",
        ]
        for i in range(self.n_nodes):
            lines.append(
                f"{i} {self.feature[i]} {float(self.threshold[i])!r} {self.left[i]} {self.right[i]} "
                + ",".join(str(int(c)) for c in self.counts[i])
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DecisionTree":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != f"# {TREE_FORMAT}":
            raise InvalidInputError("unrecognised tree format header")
        try:
            max_depth = int(lines[1].split()[1])
            min_leaf = int(lines[2].split()[1])
            rows = [ln.split() for ln in lines[5:]]
            tree = cls(max_depth, min_leaf)
            tree.feature = np.array([int(r[1]) for r in rows], dtype=np.int64)
            tree.threshold = np.array([float(r[2]) for r in rows])
            tree.left = np.array([int(r[3]) for r in rows], dtype=np.int64)
            tree.right = np.array([int(r[4]) for r in rows], dtype=np.int64)
            tree.counts = np.array([[int(c) for c in r[5].split(",")] for r in rows],
                                   dtype=np.int64).reshape(-1, N_CLASSES)
        except (IndexError, ValueError) as exc:
            raise InvalidInputError(f"malformed tree dump: {exc}") from exc
        return tree


def train_tree(train: LabeledDataset, max_depth: int = 8, min_samples_leaf: int = 5) -> DecisionTree:
    return DecisionTree(max_depth, min_samples_leaf).fit(train.features, train.labels)


def predict(model: DecisionTree, fv: FeatureVector) -> AttackKind:
    return model.predict_one(fv)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else math.nan

    def precision(self) -> np.ndarray:
        col = self.counts.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(col > 0, np.diag(self.counts) / col, np.nan)

    def recall(self) -> np.ndarray:
        row = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(row > 0, np.diag(self.counts) / row, np.nan)

    def dominant_confusion(self) -> tuple[AttackKind, AttackKind, int] | None:
        """Largest symmetric off-diagonal pair ``(a, b, count)``, or None if there are no errors."""
        sym = self.counts + self.counts.T
        np.fill_diagonal(sym, 0)
        if sym.max() == 0:
            return None
        a, b = np.unravel_index(int(np.argmax(sym)), sym.shape)
        a, b = sorted((int(a), int(b)))
        return AttackKind(a), AttackKind(b), int(sym[a, b])


def evaluate(model: DecisionTree, test: LabeledDataset) -> ConfusionMatrix:
    if len(test) == 0:
        raise InvalidInputError("empty test set")
    pred = model.predict(test.features)
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (test.labels, pred), 1)
    return ConfusionMatrix(counts)
