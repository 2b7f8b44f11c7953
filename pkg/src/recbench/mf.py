"""Biased matrix factorization trained by regularized SGD with early stopping.

User vectors have coordinate 0 pinned to 1 and item vectors coordinate 1, so
item coordinate 0 and user coordinate 1 act as bias slots.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import DefaultPredictor, Predictor
from .dataset import RatingLog, SegmentModel
from .knn import SIM_EPS, SimilarityMatrix

USER_PINNED = 0
ITEM_PINNED = 1


class TrainingError(Exception):
    """Raised for unusable training inputs."""


@dataclass
class FactorModel:
    n_factors: int
    learning_rate: float
    regularization: float
    seed: int
    user_ids: list[str]
    item_ids: list[str]
    user_factors: np.ndarray  # (n_users, F), column USER_PINNED == 1
    item_factors: np.ndarray  # (n_items, F), column ITEM_PINNED == 1
    training_log: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.user_index = {u: n for n, u in enumerate(self.user_ids)}
        self.item_index = {i: n for n, i in enumerate(self.item_ids)}

    def raw_predict(self, user_id: str, item_id: str) -> float | None:
        u = self.user_index.get(user_id)
        i = self.item_index.get(item_id)
        if u is None or i is None:
            return None
        return float(self.user_factors[u] @ self.item_factors[i])

    def save(self, path: str | Path) -> None:
        meta = {
            "n_factors": self.n_factors,
            "learning_rate": self.learning_rate,
            "regularization": self.regularization,
            "seed": self.seed,
            "training_log": self.training_log,
        }
        np.savez(
            path,
            meta=json.dumps(meta, sort_keys=True),
            user_ids=np.array(self.user_ids),
            item_ids=np.array(self.item_ids),
            user_factors=self.user_factors,
            item_factors=self.item_factors,
        )

    @classmethod
    def load(cls, path: str | Path) -> "FactorModel":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["meta"]))
        return cls(
            n_factors=meta["n_factors"],
            learning_rate=meta["learning_rate"],
            regularization=meta["regularization"],
            seed=meta["seed"],
            user_ids=[str(u) for u in data["user_ids"]],
            item_ids=[str(i) for i in data["item_ids"]],
            user_factors=data["user_factors"],
            item_factors=data["item_factors"],
            training_log=meta["training_log"],
        )


def _rmse(p: np.ndarray, q: np.ndarray, uu: np.ndarray, ii: np.ndarray, rr: np.ndarray) -> float:
    pred = np.einsum("ij,ij->i", p[uu], q[ii])
    return float(np.sqrt(np.mean((rr - pred) ** 2)))


def sgd_epoch(
    p: np.ndarray,
    q: np.ndarray,
    uu: np.ndarray,
    ii: np.ndarray,
    rr: np.ndarray,
    order: np.ndarray,
    lr: float,
    reg: float,
) -> None:
    """One in-place SGD pass in the given order, skipping the pinned slots."""
    for n in order:
        u = uu[n]
        i = ii[n]
        pu = p[u]
        qi = q[i]
        err = rr[n] - pu @ qi
        pu_old = pu.copy()
        pu[1:] += lr * (err * qi[1:] - reg * pu[1:])
        qi[0] += lr * (err * pu_old[0] - reg * qi[0])
        qi[2:] += lr * (err * pu_old[2:] - reg * qi[2:])


def train_mf(
    train: list[RatingLog],
    n_factors: int = 16,
    seed: int = 0,
    budget_seconds: float = 90 * 60,
    validation_fraction: float = 0.015,
    learning_rate: float = 0.030,
    regularization: float = 0.008,
    max_epochs: int | None = None,
) -> FactorModel:
    """Train a biased factor model by seeded SGD with early stopping.

    Stops when the validation RMSE has increased three consecutive epochs or
    the wall-clock budget elapses, and returns the snapshot with the best
    validation RMSE seen.
    """
    if not train:
        raise TrainingError("empty train set")
    if n_factors < 3:
        raise TrainingError("n_factors must be >= 3 (two bias slots + one factor)")
    if not 0.0 < validation_fraction < 0.5:
        raise TrainingError("validation_fraction must be in (0, 0.5)")
    if budget_seconds <= 0:
        raise TrainingError("budget must be positive")

    user_ids = sorted({log.user_id for log in train})
    item_ids = sorted({log.item_id for log in train})
    u_index = {u: n for n, u in enumerate(user_ids)}
    i_index = {i: n for n, i in enumerate(item_ids)}
    uu = np.array([u_index[log.user_id] for log in train])
    ii = np.array([i_index[log.item_id] for log in train])
    rr = np.array([log.rating for log in train])

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(train))
    n_val = max(1, int(round(validation_fraction * len(train))))
    if len(train) - n_val < 1:
        raise TrainingError("validation split leaves no training logs")
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    uu_fit, ii_fit, rr_fit = uu[fit_idx], ii[fit_idx], rr[fit_idx]
    uu_val, ii_val, rr_val = uu[val_idx], ii[val_idx], rr[val_idx]

    p = rng.uniform(-0.01, 0.01, (len(user_ids), n_factors))
    q = rng.uniform(-0.01, 0.01, (len(item_ids), n_factors))
    p[:, USER_PINNED] = 1.0
    q[:, ITEM_PINNED] = 1.0

    started = time.monotonic()
    training_log: list[dict] = []
    best = (np.inf, p.copy(), q.copy())
    consecutive_increases = 0
    prev_val = np.inf
    epoch = 0
    while True:
        order = rng.permutation(len(fit_idx))
        sgd_epoch(p, q, uu_fit, ii_fit, rr_fit, order, learning_rate, regularization)
        val_rmse = _rmse(p, q, uu_val, ii_val, rr_val)
        elapsed = time.monotonic() - started
        training_log.append({"epoch": epoch, "val_rmse": val_rmse, "elapsed": elapsed})
        if val_rmse < best[0]:
            best = (val_rmse, p.copy(), q.copy())
        consecutive_increases = consecutive_increases + 1 if val_rmse > prev_val else 0
        prev_val = val_rmse
        epoch += 1
        if consecutive_increases >= 3 or elapsed >= budget_seconds:
            break
        if max_epochs is not None and epoch >= max_epochs:
            break

    _, p_best, q_best = best
    return FactorModel(
        n_factors=n_factors,
        learning_rate=learning_rate,
        regularization=regularization,
        seed=seed,
        user_ids=user_ids,
        item_ids=item_ids,
        user_factors=p_best,
        item_factors=q_best,
        training_log=training_log,
    )


def mf_item_similarity(
    model: FactorModel, k: int, include_pinned: bool = True
) -> SimilarityMatrix:
    """Pearson correlation between item factor vectors, top-K positive neighbors."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = model.item_factors
    if not include_pinned:
        m = np.delete(m, ITEM_PINNED, axis=1)
    centered = m - m.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    safe = norms > 1e-12
    unit = np.zeros_like(centered)
    unit[safe] = centered[safe] / norms[safe, None]
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(corr, 0.0)

    item_ids = model.item_ids  # sorted at training time, so ties break by id
    neighbors: dict[str, list[tuple[str, float]]] = {}
    for row, item_id in enumerate(item_ids):
        sims = corr[row]
        order = np.argsort(-sims, kind="stable")[:k]
        neighbors[item_id] = [
            (item_ids[col], float(sims[col])) for col in order if sims[col] > SIM_EPS
        ]
    return SimilarityMatrix(k, neighbors)


class MFPredictor(Predictor):
    """Dot-product prediction, clamped; unknown users or items fall back."""

    name = "mf"

    def __init__(
        self,
        model: FactorModel,
        stats: SegmentModel,
        r_min: float = 1.0,
        r_max: float = 5.0,
    ):
        self.model = model
        self.stats = stats
        self.r_min = r_min
        self.r_max = r_max
        self.fallback = DefaultPredictor(stats, r_min, r_max)
        self._catalog_cache: tuple[object, np.ndarray, np.ndarray] | None = None

    def predict(self, user_id: str, item_id: str) -> float:
        raw = self.model.raw_predict(user_id, item_id)
        if raw is None:
            return self.fallback.predict(user_id, item_id)
        return float(min(max(raw, self.r_min), self.r_max))

    def _catalog_arrays(self, item_ids) -> tuple[np.ndarray, np.ndarray]:
        if self._catalog_cache is not None and self._catalog_cache[0] is item_ids:
            return self._catalog_cache[1], self._catalog_cache[2]
        rows = np.array([self.model.item_index.get(i, -1) for i in item_ids])
        known = rows >= 0
        factors = np.zeros((len(item_ids), self.model.n_factors))
        factors[known] = self.model.item_factors[rows[known]]
        self._catalog_cache = (item_ids, factors, known)
        return factors, known

    def predict_many(self, user_id: str, item_ids) -> np.ndarray:
        u = self.model.user_index.get(user_id)
        fallback_scores = self.fallback.predict_many(user_id, item_ids)
        if u is None:
            return fallback_scores
        factors, known = self._catalog_arrays(item_ids)
        raw = factors @ self.model.user_factors[u]
        return np.where(known, np.clip(raw, self.r_min, self.r_max), fallback_scores)

    def item_similarity_matrix(self, k: int) -> SimilarityMatrix:
        return mf_item_similarity(self.model, k)

    def config(self) -> dict:
        return {
            "F": self.model.n_factors,
            "learning_rate": self.model.learning_rate,
            "regularization": self.model.regularization,
            "seed": self.model.seed,
        }
