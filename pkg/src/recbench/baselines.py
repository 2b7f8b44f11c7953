"""Predictor contract plus the default (mean-based) and random baselines."""

from __future__ import annotations

import hashlib

import numpy as np

from .dataset import SegmentModel


class Predictor:
    """Behavioral contract shared by all models.

    ``predict`` must return a value in [r_min, r_max] and be a pure function
    of the trained state. Models able to expose an item-item similarity
    matrix override ``item_similarity_matrix``; others return None and are
    skipped by the Explore evaluation.
    """

    name = "predictor"

    def predict(self, user_id: str, item_id: str) -> float:
        raise NotImplementedError

    def predict_many(self, user_id: str, item_ids) -> np.ndarray:
        return np.array([self.predict(user_id, i) for i in item_ids], dtype=float)

    def item_similarity_matrix(self, k: int):
        return None

    def config(self) -> dict:
        return {}


class DefaultPredictor(Predictor):
    """(item mean + user mean) / 2, with single-mean and global-mean fallbacks."""

    name = "default"

    def __init__(self, stats: SegmentModel, r_min: float = 1.0, r_max: float = 5.0):
        self.stats = stats
        self.r_min = r_min
        self.r_max = r_max
        self._catalog_cache: tuple[object, np.ndarray, np.ndarray] | None = None

    def predict(self, user_id: str, item_id: str) -> float:
        um = self.stats.user_means.get(user_id)
        im = self.stats.item_means.get(item_id)
        if um is not None and im is not None:
            value = (um + im) / 2.0
        elif um is not None:
            value = um
        elif im is not None:
            value = im
        else:
            value = self.stats.global_mean
        return float(min(max(value, self.r_min), self.r_max))

    def _item_vectors(self, item_ids) -> tuple[np.ndarray, np.ndarray]:
        # Item means and known-mask aligned to the caller's catalog; cached
        # against the catalog object itself (kept alive by the cache, so the
        # identity check cannot be fooled by id reuse).
        if self._catalog_cache is not None and self._catalog_cache[0] is item_ids:
            return self._catalog_cache[1], self._catalog_cache[2]
        means = np.array(
            [self.stats.item_means.get(i, self.stats.global_mean) for i in item_ids]
        )
        known = np.array([i in self.stats.item_means for i in item_ids])
        self._catalog_cache = (item_ids, means, known)
        return means, known

    def predict_many(self, user_id: str, item_ids) -> np.ndarray:
        means, known = self._item_vectors(item_ids)
        um = self.stats.user_means.get(user_id)
        if um is None:
            scores = np.where(known, means, self.stats.global_mean)
        else:
            scores = np.where(known, (means + um) / 2.0, um)
        return np.clip(scores, self.r_min, self.r_max)


class RandomPredictor(Predictor):
    """Uniform draw over the integer rating levels, deterministic per (seed, u, i)."""

    name = "random"

    def __init__(self, seed: int, r_min: float = 1.0, r_max: float = 5.0):
        self.seed = seed
        self.r_min = r_min
        self.r_max = r_max
        self.levels = np.arange(int(round(r_min)), int(round(r_max)) + 1, dtype=float)

    def predict(self, user_id: str, item_id: str) -> float:
        key = f"{self.seed}|{user_id}|{item_id}".encode()
        digest = hashlib.blake2b(key, digest_size=8).digest()
        return float(self.levels[int.from_bytes(digest, "big") % len(self.levels)])

    def predict_many(self, user_id: str, item_ids) -> np.ndarray:
        prefix = f"{self.seed}|{user_id}|".encode()
        n_levels = len(self.levels)
        idx = [
            int.from_bytes(hashlib.blake2b(prefix + i.encode(), digest_size=8).digest(), "big")
            % n_levels
            for i in item_ids
        ]
        return self.levels[idx]

    def config(self) -> dict:
        return {"seed": self.seed}
