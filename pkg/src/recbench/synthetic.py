"""Seeded synthetic rating datasets used as fixtures and benchmarks."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import RatingLog


def _user_id(n: int) -> str:
    return f"u{n:05d}"


def _item_id(n: int) -> str:
    return f"i{n:05d}"


def gen_uniform(
    n_users: int,
    n_items: int,
    density: float,
    seed: int,
    r_min: int = 1,
    r_max: int = 5,
) -> list[RatingLog]:
    """Each (user, item) pair rated with probability ``density``, uniform levels."""
    rng = np.random.default_rng(seed)
    picks = rng.random((n_users, n_items)) < density
    levels = rng.integers(r_min, r_max + 1, size=(n_users, n_items))
    return [
        RatingLog(_user_id(u), _item_id(i), float(levels[u, i]))
        for u, i in zip(*np.nonzero(picks))
    ]


def gen_planted_rank1(
    n_users: int,
    n_items: int,
    density: float,
    seed: int,
) -> list[RatingLog]:
    """Noise-free rank-1 structure: rating = clamp(round(a_u * b_i)) in [1, 5]."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(1.0, 2.2, n_users)
    b = rng.uniform(1.0, 2.2, n_items)
    picks = rng.random((n_users, n_items)) < density
    ratings = np.clip(np.round(np.outer(a, b)), 1.0, 5.0)
    return [
        RatingLog(_user_id(u), _item_id(i), float(ratings[u, i]))
        for u, i in zip(*np.nonzero(picks))
    ]


def planted_rank1_truth(n_users: int, n_items: int, density: float, seed: int):
    """The (a, b) vectors behind gen_planted_rank1, for oracle checks."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(1.0, 2.2, n_users)
    b = rng.uniform(1.0, 2.2, n_items)
    return a, b


def gen_clustered(
    n_users: int,
    n_items: int,
    n_groups: int,
    density: float,
    seed: int,
    noise: float = 0.0,
) -> list[RatingLog]:
    """Item groups with per-user group preferences.

    Every item in group g receives the user's group preference (an integer in
    [1, 5]), optionally jittered; with noise 0 the items of a group are
    rating-identical for every user. Group g holds the contiguous item range
    [g * n_items / n_groups, (g+1) * n_items / n_groups).
    """
    rng = np.random.default_rng(seed)
    prefs = rng.integers(1, 6, size=(n_users, n_groups)).astype(float)
    group_of = (np.arange(n_items) * n_groups) // n_items
    picks = rng.random((n_users, n_items)) < density
    logs = []
    for u, i in zip(*np.nonzero(picks)):
        rating = prefs[u, group_of[i]]
        if noise > 0.0:
            rating = float(np.clip(round(rating + rng.normal(0.0, noise)), 1, 5))
        logs.append(RatingLog(_user_id(u), _item_id(i), float(rating)))
    return logs


def item_group_of(n_items: int, n_groups: int) -> dict[str, int]:
    """Item id -> group index, matching gen_clustered's assignment."""
    group_of = (np.arange(n_items) * n_groups) // n_items
    return {_item_id(i): int(group_of[i]) for i in range(n_items)}


def write_csv(logs: list[RatingLog], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "item_id", "rating"])
        for log in logs:
            writer.writerow([log.user_id, log.item_id, repr(log.rating)])
