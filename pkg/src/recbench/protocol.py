"""Orchestration of the full offline evaluation.

Steps: score every test log (Decide), pairwise rank compatibility per user
(Compare), top-N generation with relevance and impact judgments (Discover),
and re-evaluation of a model's extracted similarity matrix through a KNN
predictor (Explore).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import Predictor
from .dataset import SegmentModel, SplitDataset, user_ratings_index
from .knn import KnnPredictor
from .metrics import (
    MetricTable,
    RecommendationOutcome,
    ScoredLog,
    aggregate_comp,
    aggregate_discover,
    aggregate_rmse,
    comp_user,
)


class EvaluationError(Exception):
    """Raised when a model fails on a (user, item) pair during evaluation."""


@dataclass
class ProtocolConfig:
    top_n: int = 10
    explore_k: int = 100
    exclude_seen: bool = True
    r_min: float = 1.0
    r_max: float = 5.0

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.explore_k < 1:
            raise ValueError("explore_k must be >= 1")


@dataclass
class CoreReport:
    """Decide / Compare / Discover tables for one predictor."""

    tables: list[MetricTable]
    ami_excluded: int
    timings: dict[str, float] = field(default_factory=dict)

    def table(self, metric: str) -> MetricTable:
        for t in self.tables:
            if t.metric == metric:
                return t
        raise KeyError(metric)


@dataclass
class EvaluationReport:
    model_name: str
    model_config: dict
    config: ProtocolConfig
    core: CoreReport
    explore: CoreReport | None


def _score_test(
    model: Predictor, data: SplitDataset, segments: SegmentModel
) -> list[ScoredLog]:
    by_user: dict[str, list] = {}
    for log in data.test:
        by_user.setdefault(log.user_id, []).append(log)
    scored: list[ScoredLog] = []
    for user_id in sorted(by_user):
        logs = by_user[user_id]
        item_ids = [log.item_id for log in logs]
        try:
            predictions = model.predict_many(user_id, item_ids)
        except Exception as exc:
            raise EvaluationError(
                f"model {model.name!r} failed on user {user_id!r}: {exc}"
            ) from exc
        for log, pred in zip(logs, predictions):
            scored.append(
                ScoredLog(
                    user_id=log.user_id,
                    item_id=log.item_id,
                    true_rating=log.rating,
                    predicted_rating=float(pred),
                    segment=segments.segment_of(log.user_id, log.item_id),
                )
            )
    return scored


def generate_top_n(
    model: Predictor,
    user_id: str,
    candidates,
    n: int,
    seen: frozenset | set = frozenset(),
) -> list[str]:
    """Top-N candidate items by predicted rating, ties by ascending item id.

    ``candidates`` must be sorted ascending; items in ``seen`` are skipped.
    """
    scores = model.predict_many(user_id, candidates)
    return _top_n_from_scores(candidates, scores, n, seen)


def _top_n_from_scores(candidates, scores: np.ndarray, n: int, seen) -> list[str]:
    if seen:
        scores = scores.copy()
        for pos, item_id in enumerate(candidates):
            if item_id in seen:
                scores[pos] = -np.inf
    order = np.argsort(-scores, kind="stable")
    picked = []
    for pos in order:
        if scores[pos] == -np.inf:
            continue
        picked.append(candidates[pos])
        if len(picked) == n:
            break
    return picked


def run_core(
    model: Predictor,
    data: SplitDataset,
    segments: SegmentModel,
    config: ProtocolConfig,
) -> CoreReport:
    """Evaluate Decide, Compare and Discover for one trained predictor."""
    timings: dict[str, float] = {}

    t0 = time.monotonic()
    scored = _score_test(model, data, segments)
    rmse_table = aggregate_rmse(scored)
    timings["decide"] = time.monotonic() - t0

    t0 = time.monotonic()
    scored_by_user: dict[str, list[ScoredLog]] = {}
    for s in scored:
        scored_by_user.setdefault(s.user_id, []).append(s)
    per_user_comp = {u: comp_user(lst) for u, lst in scored_by_user.items()}
    user_segment = {
        u: "Huser" if segments.is_heavy(u) else "Luser" for u in per_user_comp
    }
    comp_macro, comp_micro = aggregate_comp(per_user_comp, user_segment)
    timings["compare"] = time.monotonic() - t0

    t0 = time.monotonic()
    catalog = data.items  # sorted ascending, so stable sort breaks ties by id
    test_index = user_ratings_index(data.test)
    train_index = user_ratings_index(data.train)
    outcomes_by_user: dict[str, list[RecommendationOutcome]] = {}
    for user_id in data.users:
        seen = set(train_index.get(user_id, ())) if config.exclude_seen else set()
        try:
            scores = model.predict_many(user_id, catalog)
        except Exception as exc:
            raise EvaluationError(
                f"model {model.name!r} failed on user {user_id!r}: {exc}"
            ) from exc
        top = _top_n_from_scores(catalog, scores, config.top_n, seen)
        user_mean = segments.user_mean(user_id)
        test_ratings = test_index.get(user_id, {})
        outcomes = []
        for rank, item_id in enumerate(top, start=1):
            true_rating = test_ratings.get(item_id)
            outcomes.append(
                RecommendationOutcome(
                    user_id=user_id,
                    item_id=item_id,
                    rank=rank,
                    evaluable=true_rating is not None,
                    true_rating=true_rating,
                    user_mean=user_mean,
                    item_count=segments.item_count(item_id),
                    catalog_size=data.catalog_size,
                    segment=segments.segment_of(user_id, item_id),
                )
            )
        outcomes_by_user[user_id] = outcomes
    precision_table, ami_table, ami_excluded = aggregate_discover(outcomes_by_user)
    timings["discover"] = time.monotonic() - t0

    return CoreReport(
        tables=[rmse_table, comp_macro, comp_micro, precision_table, ami_table],
        ami_excluded=ami_excluded,
        timings=timings,
    )


def run_explore(
    model: Predictor,
    data: SplitDataset,
    segments: SegmentModel,
    config: ProtocolConfig,
) -> CoreReport | None:
    """Re-run the core evaluation through a KNN built on the model's similarities.

    Returns None for models without a similarity capability.
    """
    matrix = model.item_similarity_matrix(config.explore_k)
    if matrix is None:
        return None
    t0 = time.monotonic()
    emulated = KnnPredictor(
        matrix,
        segments,
        user_ratings_index(data.train),
        r_min=config.r_min,
        r_max=config.r_max,
    )
    report = run_core(emulated, data, segments, config)
    report.timings["similarity_extraction"] = time.monotonic() - t0
    return report


def evaluate(
    model: Predictor,
    data: SplitDataset,
    segments: SegmentModel,
    config: ProtocolConfig,
) -> EvaluationReport:
    """Full protocol: core evaluation plus the Explore re-evaluation."""
    core = run_core(model, data, segments, config)
    explore = run_explore(model, data, segments, config)
    return EvaluationReport(
        model_name=model.name,
        model_config=model.config(),
        config=config,
        core=core,
        explore=explore,
    )
