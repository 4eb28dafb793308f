"""Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

Solves the standard dual

    min_a  1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  sum(a_i y_i) = 0,

with Q_ij = y_i y_j K(x_i, x_j), by repeatedly optimizing the maximal
KKT-violating pair (ties broken toward the lowest index) until the duality
gap estimate m(a) - M(a) drops below the tolerance. Defaults mirror the
common library defaults: C=1.0, gamma="scale" = 1/(d * var(X)), tol=1e-3.

Kernel rows are cached with an LRU budget (``CAPLENS_CACHE`` environment
variable, in MiB) and recomputed beyond it, so training sets far larger than
memory-for-a-full-kernel-matrix remain feasible; desk-scale runs never hit
the budget.
"""

from __future__ import annotations

import math
import os
import struct
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotators.labels import Property
from .dataset import ClassificationDataset, FoldSplit
from .embeddings import EmbeddingMatrix, join
from .errors import CaplensError

_TAU = 1e-12
_DEFAULT_CACHE_MIB = 256


class TrainingError(CaplensError):
    pass


@dataclass
class SvmConfig:
    C: float = 1.0
    gamma: float | str = "scale"
    tolerance: float = 1e-3
    max_passes: int = 1_000_000

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise TrainingError(f"C must be positive, got {self.C}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise TrainingError(f"gamma must be a number or 'scale', got {self.gamma!r}")
        elif self.gamma <= 0:
            raise TrainingError(f"gamma must be positive, got {self.gamma}")


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # (m, d) float64
    dual_coef: np.ndarray        # (m,) float64, alpha_i * y_i
    bias: float
    gamma: float
    converged: bool = True
    n_iter: int = 0
    objective: float = 0.0


@dataclass
class CvResult:
    property: Property
    scope: str
    pretraining_tag: str
    fold_accuracies: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        # Population standard deviation over the folds.
        return float(np.std(self.fold_accuracies))


def gamma_scale(X: np.ndarray) -> float:
    """1 / (d * variance of all matrix entries), the library-default gamma."""
    X = np.asarray(X, dtype=np.float64)
    var = float(X.var())
    if var <= 0.0:
        raise TrainingError("gamma='scale' undefined: feature matrix has zero variance")
    return 1.0 / (X.shape[1] * var)


def rbf(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise TrainingError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def _cache_budget_rows(n: int) -> int:
    mib = float(os.environ.get("CAPLENS_CACHE", _DEFAULT_CACHE_MIB))
    rows = int(mib * 2**20 / (8 * max(n, 1)))
    return max(rows, 2)


class _KernelCache:
    """LRU cache of full kernel rows for the training matrix."""

    def __init__(self, X: np.ndarray, gamma: float) -> None:
        self.X = X
        self.gamma = gamma
        self.sq = np.einsum("ij,ij->i", X, X)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self._max_rows = _cache_budget_rows(X.shape[0])

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        d2 = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        np.maximum(d2, 0.0, out=d2)
        row = np.exp(-self.gamma * d2)
        self._rows[i] = row
        if len(self._rows) > self._max_rows:
            self._rows.popitem(last=False)
        return row


def train(
    X: np.ndarray, y: np.ndarray, config: SvmConfig | None = None, seed: int = 0
) -> SvmModel:
    """Train on rows of X with labels y in {-1, +1}.

    The solver itself is deterministic; ``seed`` is accepted for interface
    uniformity and recorded nowhere else. If ``max_passes`` is exhausted the
    best iterate is returned with ``converged=False`` and a warning.
    """
    config = config or SvmConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise TrainingError(f"need at least 2 training rows, got {n}")
    if y.shape != (n,):
        raise TrainingError(f"labels shape {y.shape} does not match {n} rows")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise TrainingError("labels must be -1 or +1")
    if (y > 0).all() or (y < 0).all():
        raise TrainingError("training data contains a single class")
    if not np.isfinite(X).all():
        raise TrainingError("non-finite feature values")

    gamma = gamma_scale(X) if config.gamma == "scale" else float(config.gamma)
    C = float(config.C)
    tol = float(config.tolerance)
    cache = _KernelCache(X, gamma)

    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of the dual objective at alpha = 0
    pos = y > 0

    converged = False
    iterations = 0
    for iterations in range(1, config.max_passes + 1):
        neg_yG = -y * G
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.where(up, neg_yG, -np.inf).argmax())
        j = int(np.where(low, neg_yG, np.inf).argmin())
        if neg_yG[i] - neg_yG[j] <= tol:
            converged = True
            break

        Ki = cache.row(i)
        Kj = cache.row(j)
        quad = Ki[i] + Kj[j] - 2.0 * Ki[j]
        if quad <= 0.0:
            quad = _TAU
        old_ai, old_aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = old_ai - old_aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = old_ai + old_aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        G += (y * y[i] * Ki) * dai + (y * y[j] * Kj) * daj
    if not converged:
        warnings.warn(
            f"SMO stopped after max_passes={config.max_passes} without "
            "reaching tolerance; returning best iterate",
            RuntimeWarning,
            stacklevel=2,
        )

    bias = _compute_bias(alpha, y, G, C)
    objective = 0.5 * (float(alpha @ G) - float(alpha.sum()))
    support = alpha > _TAU
    if not support.any():
        raise TrainingError("degenerate solution: no support vectors")
    return SvmModel(
        support_vectors=X[support].copy(),
        dual_coef=(alpha * y)[support],
        bias=bias,
        gamma=gamma,
        converged=converged,
        n_iter=iterations,
        objective=objective,
    )


def _compute_bias(alpha: np.ndarray, y: np.ndarray, G: np.ndarray, C: float) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
        return -rho
    upper = alpha >= C
    lower = alpha <= 0
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    ub = float(yG[ub_mask].min()) if ub_mask.any() else math.inf
    lb = float(yG[lb_mask].max()) if lb_mask.any() else -math.inf
    return -(ub + lb) / 2.0


def decision_values(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """Decision function for a batch of rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.support_vectors.shape[1]:
        raise TrainingError(
            f"dimension mismatch: expected (*, {model.support_vectors.shape[1]}), "
            f"got {X.shape}"
        )
    if model.support_vectors.shape[0] == 0:
        raise TrainingError("model has no support vectors")
    sv = model.support_vectors
    d2 = (
        np.einsum("ij,ij->i", X, X)[:, None]
        + np.einsum("ij,ij->i", sv, sv)[None, :]
        - 2.0 * (X @ sv.T)
    )
    np.maximum(d2, 0.0, out=d2)
    K = np.exp(-model.gamma * d2)
    return K @ model.dual_coef + model.bias


def predict(model: SvmModel, x: np.ndarray) -> tuple[bool, float]:
    """Label and decision value for one vector."""
    value = float(decision_values(model, np.asarray(x, dtype=np.float64)[None, :])[0])
    return value > 0, value


def _training_indices(
    y: np.ndarray, test: np.ndarray, subsample: int | None, seed: int, fold: int
) -> np.ndarray:
    indices = np.flatnonzero(~test)
    if subsample is None or len(indices) <= subsample:
        return indices
    # Stratified seeded cap: keep up to subsample/2 rows per class.
    rng = np.random.default_rng([seed, fold])
    kept = []
    per_class = subsample // 2
    for sign in (1.0, -1.0):
        members = indices[y[indices] == sign]
        take = min(per_class, len(members))
        kept.append(members[rng.choice(len(members), size=take, replace=False)])
    return np.sort(np.concatenate(kept))


def _fold_accuracy(
    X: np.ndarray,
    y: np.ndarray,
    test: np.ndarray,
    config: SvmConfig,
    fold: int = 0,
    subsample: int | None = None,
    subsample_seed: int = 0,
) -> float:
    train_idx = _training_indices(y, test, subsample, subsample_seed, fold)
    model = train(X[train_idx], y[train_idx], config)
    values = decision_values(model, X[test])
    predicted = np.where(values > 0, 1.0, -1.0)
    return 100.0 * float((predicted == y[test]).mean())


def cross_validate(
    dataset: ClassificationDataset,
    folds: FoldSplit,
    matrix: EmbeddingMatrix,
    config: SvmConfig | None = None,
    jobs: int = 1,
    subsample: int | None = None,
    subsample_seed: int = 0,
) -> CvResult:
    """Train-on-k-1 / test-on-1 accuracy per fold, in percent.

    Every dataset image must have an embedding row; missing ids are an
    error naming them. With ``jobs > 1`` folds train in separate processes;
    results are identical to a sequential run. ``subsample`` caps each
    fold's training split with a seeded stratified draw (disabled by
    default; intended for full-data runs).
    """
    config = config or SvmConfig()
    X, missing = join(dataset, matrix)
    if missing:
        raise CaplensError(
            f"{len(missing)} dataset images have no embedding: "
            + ", ".join(missing[:10])
            + ("..." if len(missing) > 10 else "")
        )
    X = X.astype(np.float64)
    y = np.array([1.0 if item.label else -1.0 for item in dataset.items])
    fold_of = np.array(
        [folds.assignments[item.image_id] for item in dataset.items]
    )
    tests = [fold_of == fold for fold in range(folds.k)]
    fold_ids = list(range(folds.k))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(jobs, folds.k)) as pool:
            accuracies = list(
                pool.map(_fold_accuracy, [X] * folds.k, [y] * folds.k, tests,
                         [config] * folds.k, fold_ids, [subsample] * folds.k,
                         [subsample_seed] * folds.k)
            )
    else:
        accuracies = [
            _fold_accuracy(X, y, test, config, fold, subsample, subsample_seed)
            for fold, test in zip(fold_ids, tests)
        ]
    return CvResult(
        property=dataset.property,
        scope=dataset.scope,
        pretraining_tag=matrix.pretraining_tag,
        fold_accuracies=accuracies,
    )


# --------------------------------------------------------------------------
# Model serialization
# --------------------------------------------------------------------------

_MODEL_MAGIC = b"CSVM"
_MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sHddQI")


def save_model(model: SvmModel, path: str | Path) -> None:
    with Path(path).open("wb") as fp:
        m, d = model.support_vectors.shape
        fp.write(
            _MODEL_HEADER.pack(
                _MODEL_MAGIC, _MODEL_VERSION, model.gamma, model.bias, m, d
            )
        )
        fp.write(model.dual_coef.astype("<f8").tobytes())
        fp.write(model.support_vectors.astype("<f8").tobytes())


def load_model(path: str | Path) -> SvmModel:
    with Path(path).open("rb") as fp:
        header = fp.read(_MODEL_HEADER.size)
        if len(header) != _MODEL_HEADER.size:
            raise CaplensError(f"{path}: truncated model header")
        magic, version, gamma, bias, m, d = _MODEL_HEADER.unpack(header)
        if magic != _MODEL_MAGIC:
            raise CaplensError(f"{path}: not a caplens model file")
        if version != _MODEL_VERSION:
            raise CaplensError(f"{path}: unsupported model version {version}")
        coef = np.frombuffer(fp.read(8 * m), dtype="<f8")
        rows = np.frombuffer(fp.read(8 * m * d), dtype="<f8").reshape(m, d)
        if coef.shape != (m,) or rows.shape != (m, d):
            raise CaplensError(f"{path}: truncated model payload")
    return SvmModel(
        support_vectors=rows.copy(),
        dual_coef=coef.copy(),
        bias=bias,
        gamma=gamma,
    )
