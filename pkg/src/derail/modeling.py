"""Standardization, leave-one-out evaluation, fusion and permutation importance."""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DerailError, FoldError, MissingGroup, RecordMismatch, TooFewRecords
from .svr import (
    DEFAULT_C,
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SvrModel,
    fit_svr,
    predict_svr,
)
from .tsfeat import CATALOG_VERSION, FeatureMatrix


@dataclass(frozen=True)
class SvrParams:
    C: float = DEFAULT_C
    epsilon: float = DEFAULT_EPSILON
    gamma: float | str = "scale"
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring fitted on training rows only.

    Non-finite cells are replaced by the column's training mean; columns
    with zero spread (or no finite values) are dropped.
    """

    means: np.ndarray
    stds: np.ndarray
    mask: np.ndarray  # retained columns

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        finite = np.isfinite(X)
        counts = finite.sum(axis=0)
        sums = np.where(finite, X, 0.0).sum(axis=0)
        finite_means = np.divide(sums, counts, out=np.zeros(X.shape[1]), where=counts > 0)
        filled = np.where(finite, X, finite_means)
        means = filled.mean(axis=0)
        stds = filled.std(axis=0)
        # spreads at rounding level of the mean count as constant
        mask = (counts > 0) & (stds > 1e-12 * np.maximum(1.0, np.abs(means)))
        return cls(means, np.where(mask, stds, 1.0), mask)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        filled = np.where(np.isfinite(X), X, self.means)
        return ((filled - self.means) / self.stds)[:, self.mask]


@dataclass(frozen=True)
class FittedModel:
    """An SVR plus the standardizer it was trained behind."""

    standardizer: Standardizer
    svr: SvrModel | None  # None when every column was dropped
    fallback: float = 0.0

    def predict(self, X) -> np.ndarray:
        Z = self.standardizer.transform(X)
        if self.svr is None:
            return np.full(Z.shape[0], self.fallback)
        return predict_svr(self.svr, Z)

    def to_json(self) -> str:
        svr = self.svr
        doc = {
            "catalog_version": CATALOG_VERSION,
            "beta": [] if svr is None else [float(b) for b in svr.beta],
            "bias": self.fallback if svr is None else svr.bias,
            "gamma": None if svr is None else svr.gamma,
            "C": None if svr is None else svr.C,
            "epsilon": None if svr is None else svr.epsilon,
            "standardizer": {
                "means": [float(v) for v in self.standardizer.means],
                "stds": [float(v) for v in self.standardizer.stds],
                "mask": [bool(v) for v in self.standardizer.mask],
            },
            "support_rows": [] if svr is None else [[float(v) for v in row] for row in svr.support_rows],
        }
        return json.dumps(doc, indent=2) + "\n"


def fit_model(X, y, params: SvrParams = SvrParams()) -> FittedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    st = Standardizer.fit(X)
    Z = st.transform(X)
    if Z.shape[1] == 0:
        return FittedModel(st, None, float(np.mean(y)))
    svr = fit_svr(Z, y, C=params.C, epsilon=params.epsilon, gamma=params.gamma,
                  tol=params.tol, max_iter=params.max_iter)
    return FittedModel(st, svr)


@dataclass(frozen=True)
class LoocvResult:
    ids: tuple[str, ...]
    predictions: np.ndarray
    n_folds: int
    grouped: bool

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.ids, (float(p) for p in self.predictions)))


def _folds(n: int, groups: Sequence[str] | None, grouped: bool) -> list[np.ndarray]:
    if grouped and groups is not None:
        order: OrderedDict[str, list[int]] = OrderedDict()
        for i, g in enumerate(groups):
            if g is None:
                raise MissingGroup(f"row {i} has no group id")
            order.setdefault(g, []).append(i)
        return [np.array(rows) for rows in order.values()]
    return [np.array([i]) for i in range(n)]


def _run_fold(X, y, held, params, k):
    train = np.setdiff1d(np.arange(len(y)), held)
    try:
        return fit_model(X[train], y[train], params).predict(X[held])
    except DerailError as exc:
        raise FoldError(k, exc) from exc


def loocv(
    X,
    y,
    ids: Sequence[str] | None = None,
    groups: Sequence[str] | None = None,
    params: SvrParams = SvrParams(),
    grouped: bool | None = None,
    n_jobs: int = 1,
) -> LoocvResult:
    """Leave-one-out predictions; with ``grouped`` every group is held out together.

    ``grouped`` defaults to True whenever group ids are supplied.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if ids is None:
        ids = [str(i) for i in range(n)]
    if grouped is None:
        grouped = groups is not None and any(g is not None for g in groups)
    folds = _folds(n, groups, grouped)
    if len(folds) < 3:
        raise TooFewRecords(f"need at least 3 folds, got {len(folds)}")

    if n_jobs == 1:
        outputs = [_run_fold(X, y, f, params, k) for k, f in enumerate(folds)]
    else:
        from joblib import Parallel, delayed

        outputs = Parallel(n_jobs=n_jobs)(delayed(_run_fold)(X, y, f, params, k) for k, f in enumerate(folds))
    preds = np.empty(n)
    for rows, out in zip(folds, outputs):
        preds[rows] = out
    return LoocvResult(tuple(ids), preds, len(folds), bool(grouped))


def fuse_early(blocks: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Concatenate feature blocks column-wise, aligned on the first block's ids."""
    if not blocks:
        raise ValueError("no feature blocks")
    ids = blocks[0].ids
    for b in blocks[1:]:
        if set(b.ids) != set(ids) or len(b.ids) != len(ids):
            missing = sorted(set(ids) ^ set(b.ids))
            raise RecordMismatch(f"record sets differ: {missing[:5]}")
    names = [n for b in blocks for n in b.names]
    if len(set(names)) != len(names):
        raise ValueError("duplicate feature names across blocks; prefix them by provenance")
    values = np.hstack([b.select(ids).values for b in blocks])
    return FeatureMatrix(ids, tuple(names), values)


def fuse_late(predictions: Sequence[Mapping[str, float]]) -> dict[str, float]:
    """Unweighted mean of member predictions per record."""
    if len(predictions) < 2:
        raise ValueError("late fusion needs at least two members")
    keys = list(predictions[0])
    for p in predictions[1:]:
        if set(p) != set(keys):
            raise RecordMismatch(f"record sets differ: {sorted(set(keys) ^ set(p))[:5]}")
    k = len(predictions)
    # exact rational mean: fusing k copies of one model reproduces it bit for bit
    return {rid: float(sum(Fraction(p[rid]) for p in predictions) / k) for rid in keys}


def participant_sum(values: Mapping[str, float], groups: Mapping[str, str | None]) -> dict[str, float]:
    """Sum per-segment values into per-participant totals (sorted by group id)."""
    totals: dict[str, list[float]] = {}
    for rid, v in values.items():
        g = groups.get(rid)
        if g is None:
            raise MissingGroup(f"record {rid} has no group id")
        totals.setdefault(g, []).append(v)
    return {g: math.fsum(totals[g]) for g in sorted(totals)}


@dataclass(frozen=True)
class Importance:
    name: str
    importance: float
    std: float


def _neg_mse(pred, y) -> float:
    return -float(np.mean((pred - y) ** 2))


def permutation_importance(
    model: FittedModel,
    X,
    y,
    names: Sequence[str] | None = None,
    n_repeats: int = 10,
    seed: int = 0,
) -> list[Importance]:
    """Drop in negative MSE when one column is shuffled, averaged over repeats.

    Returns every feature ranked by decreasing importance (ties keep column
    order). Column ``j`` draws its permutations from a stream keyed by
    ``(seed, j)``, so results do not depend on the other columns.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]
    baseline = _neg_mse(model.predict(X), y)
    out = []
    for j in range(X.shape[1]):
        rng = np.random.default_rng([seed, j])
        scores = []
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            scores.append(baseline - _neg_mse(model.predict(Xp), y))
        out.append(Importance(names[j], float(np.mean(scores)), float(np.std(scores))))
    order = sorted(range(len(out)), key=lambda j: (-out[j].importance, j))
    return [out[j] for j in order]
