"""Selection-quality benchmark: classifiers trained on the selected samples.

For each run seed the dataset is split 50/50 into candidate and test sets,
every selector ranks the identical (standardized) candidate set, and for
each query budget m the labels of the top-m candidates are revealed to
train the classifiers.  Accuracy on the untouched test set measures how
representative the selection was.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .baselines import SelectorSpec, rank_candidates, register_selector
from .data import Dataset, SplitSpec, apply_standardization, split, standardize
from .errors import ConfigError, DataError
from .model import config_from_dict, default_encoder_dims, encode_features
from .rng import derive_seed
from .training import run_selection

CLASSIFIERS = ("linear_svm", "logistic_regression")


# ---------------------------------------------------------------------------
# Classifiers (deterministic, full batch, columns are samples)
# ---------------------------------------------------------------------------

def _augment(x: np.ndarray) -> np.ndarray:
    return np.vstack([x, np.ones((1, x.shape[1]))])


def _softmax_cols(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def train_logreg(x_train, y_train, x_test, y_test, reg: float = 1e-4,
                 max_iter: int = 5000, tol: float = 1e-6) -> float:
    """Multinomial softmax regression by full-batch gradient descent.

    Runs until the gradient norm drops below `tol` or `max_iter` sweeps,
    with a fixed 1/L step from the spectral norm of the design matrix.
    Returns test accuracy.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    classes = np.unique(y_train)
    if classes.size == 1:
        return float(np.mean(np.asarray(y_test) == classes[0]))
    xa = _augment(x_train)
    m = xa.shape[1]
    onehot = (y_train[None, :] == classes[:, None]).astype(np.float64)
    lips = 0.5 * np.linalg.norm(xa, 2) ** 2 / m + reg
    step = 1.0 / lips
    w = np.zeros((classes.size, xa.shape[0]))
    for _ in range(max_iter):
        p = _softmax_cols(w @ xa)
        grad = (p - onehot) @ xa.T / m + reg * w
        if np.linalg.norm(grad) < tol:
            break
        w -= step * grad
    pred = classes[np.argmax(w @ _augment(np.asarray(x_test, dtype=np.float64)), axis=0)]
    return float(np.mean(pred == np.asarray(y_test)))


def train_linear_svm(x_train, y_train, x_test, y_test, C: float = 100.0,
                     max_sweeps: int = 1000, tol: float = 1e-8) -> float:
    """One-vs-rest L1-hinge linear SVM by deterministic dual coordinate ascent.

    Each binary problem minimizes (1/2)||w||^2 + C * sum hinge in the dual
    (box-constrained QP), sweeping coordinates in a fixed cyclic order until
    the largest projected gradient falls below `tol`.  The bias rides along
    as an appended constant feature.  Returns test accuracy.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    classes = np.unique(y_train)
    if classes.size == 1:
        return float(np.mean(np.asarray(y_test) == classes[0]))
    xa = _augment(x_train)
    m = xa.shape[1]
    qii = np.sum(xa * xa, axis=0)  # >= 1 thanks to the bias feature
    weights = np.zeros((classes.size, xa.shape[0]))
    for ci, c in enumerate(classes):
        sign = np.where(y_train == c, 1.0, -1.0)
        alpha = np.zeros(m)
        w = np.zeros(xa.shape[0])
        for _ in range(max_sweeps):
            worst = 0.0
            for i in range(m):
                g = sign[i] * (w @ xa[:, i]) - 1.0
                pg = g
                if alpha[i] <= 0.0:
                    pg = min(g, 0.0)
                elif alpha[i] >= C:
                    pg = max(g, 0.0)
                if pg != 0.0:
                    worst = max(worst, abs(pg))
                    new = min(max(alpha[i] - g / qii[i], 0.0), C)
                    if new != alpha[i]:
                        w += (new - alpha[i]) * sign[i] * xa[:, i]
                        alpha[i] = new
            if worst < tol:
                break
        weights[ci] = w
    scores = weights @ _augment(np.asarray(x_test, dtype=np.float64))
    pred = classes[np.argmax(scores, axis=0)]
    return float(np.mean(pred == np.asarray(y_test)))


# ---------------------------------------------------------------------------
# Protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Protocol:
    """Evaluation protocol: budgets, repeated runs, classifiers."""

    budgets: tuple = tuple(range(25, 226, 25))
    runs: int = 5
    candidate_fraction: float = 0.5
    classifiers: tuple = CLASSIFIERS
    seeds: tuple | None = None
    svm_c: float = 100.0
    logreg_reg: float = 1e-4
    logreg_max_iter: int = 5000
    svm_sweeps: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        if not self.budgets or list(self.budgets) != sorted(self.budgets):
            raise ConfigError(f"budgets must be non-empty and ascending, got {self.budgets}")
        if self.budgets[0] < 1:
            raise ConfigError("budgets must be positive")
        for c in self.classifiers:
            if c not in CLASSIFIERS:
                raise ConfigError(f"unknown classifier {c!r}; expected subset of {CLASSIFIERS}")
        if self.seeds is None:
            object.__setattr__(self, "seeds", tuple(range(self.runs)))
        else:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if len(self.seeds) != self.runs:
            raise ConfigError(f"runs={self.runs} but {len(self.seeds)} seeds given")

    def classify(self, name: str, x_train, y_train, x_test, y_test) -> float:
        if name == "logistic_regression":
            return train_logreg(x_train, y_train, x_test, y_test,
                                reg=self.logreg_reg, max_iter=self.logreg_max_iter)
        return train_linear_svm(x_train, y_train, x_test, y_test,
                                C=self.svm_c, max_sweeps=self.svm_sweeps)


@dataclass
class EvalCell:
    selector: str
    classifier: str
    budget: int
    seed: int
    accuracy: float


class EvalReport:
    """Accuracy cells plus their per-budget means and grand means."""

    def __init__(self, cells: list):
        self.cells = list(cells)

    def __len__(self):
        return len(self.cells)

    def selectors(self) -> list:
        seen = {}
        for c in self.cells:
            seen.setdefault(c.selector, None)
        return list(seen)

    def classifiers(self) -> list:
        seen = {}
        for c in self.cells:
            seen.setdefault(c.classifier, None)
        return list(seen)

    def budgets(self) -> list:
        return sorted({c.budget for c in self.cells})

    def accuracies(self, selector: str, classifier: str, budget: int) -> list:
        return [c.accuracy for c in self.cells
                if c.selector == selector and c.classifier == classifier
                and c.budget == budget]

    def mean_accuracy(self, selector: str, classifier: str, budget: int) -> float:
        accs = self.accuracies(selector, classifier, budget)
        if not accs:
            raise KeyError(f"no cells for ({selector}, {classifier}, {budget})")
        return float(np.mean(accs))

    def grand_mean(self, selector: str, classifier: str) -> float:
        """Mean over budgets of per-budget means (the 'Average' column)."""
        means = [self.mean_accuracy(selector, classifier, b) for b in self.budgets()]
        return float(np.mean(means))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("selector,classifier,budget,seed,accuracy\n")
            for c in self.cells:
                fh.write(f"{c.selector},{c.classifier},{c.budget},{c.seed},{repr(c.accuracy)}\n")

    def save_means_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("selector,classifier,budget,mean_accuracy\n")
            for sel in self.selectors():
                for clf in self.classifiers():
                    for b in self.budgets():
                        fh.write(f"{sel},{clf},{b},{repr(self.mean_accuracy(sel, clf, b))}\n")

    def summary(self) -> dict:
        out = {}
        for sel in self.selectors():
            out[sel] = {}
            for clf in self.classifiers():
                out[sel][clf] = {
                    "budgets": {str(b): self.mean_accuracy(sel, clf, b)
                                for b in self.budgets()},
                    "average": self.grand_mean(sel, clf),
                }
        return out

    def save_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _allg_ranker_context(x: np.ndarray, spec: SelectorSpec, seed: int):
    """Train the ALLG pipeline on the candidate matrix and rank it.

    spec.params may carry model-config fields directly, or a prebuilt
    ModelConfig under "config"; either way the run seed is overridden by
    the derived per-(run, selector) seed.
    """
    opts = dict(spec.params)
    opts.pop("name", None)
    opts.pop("representation", None)
    cfg = opts.pop("config", None)
    if cfg is None:
        if "encoder_dims" not in opts:
            opts["encoder_dims"] = default_encoder_dims(x.shape[0])
        opts["seed"] = seed
        cfg = config_from_dict(opts)
    else:
        cfg = dataclasses.replace(cfg, seed=seed)
    result, params, _, _ = run_selection(x, cfg)
    return result.ranked_indices, params, cfg


register_selector("allg",
                  lambda x, spec, seed: _allg_ranker_context(x, spec, seed)[0])


def run_protocol(ds: Dataset, selectors: list, protocol: Protocol) -> EvalReport:
    """Run the full benchmark; returns one EvalReport over all cells.

    Selector randomness is derived per (run seed, selector label), so the
    cells of one selector are unaffected by adding another.
    """
    if ds.labels is None:
        raise DataError("evaluation protocol needs a labeled dataset")
    labels = {s.label for s in selectors}
    if len(labels) != len(selectors):
        raise ConfigError("selector labels must be unique; use params['name'] to disambiguate")
    cells = []
    for seed in protocol.seeds:
        cand, test, _ = split(ds, SplitSpec(protocol.candidate_fraction, seed))
        if protocol.budgets[-1] > cand.n_samples:
            raise ConfigError(
                f"largest budget {protocol.budgets[-1]} exceeds candidate size {cand.n_samples}"
            )
        cand_std, mu, sd = standardize(cand)
        test_std = apply_standardization(test, mu, sd)
        for spec in selectors:
            sel_seed = derive_seed(seed, f"selector:{spec.label}")
            latent_train = latent_test = None
            if spec.kind == "allg":
                ranking, params, cfg = _allg_ranker_context(cand_std.features, spec, sel_seed)
                if spec.params.get("representation", False):
                    latent_train = encode_features(params, cand_std.features, cfg)
                    latent_test = encode_features(params, test_std.features, cfg)
            else:
                spec_eff = spec
                if spec.kind == "dcs" and "rank" not in spec.params:
                    spec_eff = SelectorSpec(spec.kind, {**spec.params, "rank": ds.n_classes},
                                            seed=spec.seed)
                ranking = rank_candidates(cand_std.features, spec_eff, seed=sel_seed)
            for budget in protocol.budgets:
                chosen = sorted(ranking[:budget])
                y_train = cand.labels[chosen]
                if latent_train is not None:
                    x_train, x_test = latent_train[:, chosen], latent_test
                else:
                    x_train, x_test = cand_std.features[:, chosen], test_std.features
                for clf in protocol.classifiers:
                    acc = protocol.classify(clf, x_train, y_train, x_test, test.labels)
                    cells.append(EvalCell(spec.label, clf, budget, seed, acc))
    return EvalReport(cells)
