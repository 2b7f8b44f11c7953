"""Independent brute-force reference implementations used as test oracles.

Everything here is deliberately naive: direct enumeration of pairs, full
sorts, one model.predict call per (user, item). Nothing is shared with the
library's own computation paths.
"""

from __future__ import annotations

import math


def naive_rmse(pairs):
    """pairs: list of (true, predicted)."""
    if not pairs:
        return None
    return math.sqrt(sum((t - p) ** 2 for t, p in pairs) / len(pairs))


def naive_comp_pairs(pairs):
    """pairs: list of (true, predicted) for one user -> (compatible, counted)."""
    compatible = 0
    counted = 0
    for a in range(len(pairs)):
        for b in range(len(pairs)):
            if a >= b:
                continue
            ta, pa = pairs[a]
            tb, pb = pairs[b]
            if ta == tb:
                continue
            counted += 1
            true_sign = 1 if ta > tb else -1
            if pa > pb:
                pred_sign = 1
            elif pa < pb:
                pred_sign = -1
            else:
                pred_sign = 0
            if true_sign == pred_sign:
                compatible += 1
    return compatible, counted


def naive_precision(evaluable):
    """evaluable: list of (true_rating, user_mean)."""
    if not evaluable:
        return None
    relevant = [1 for r, mean in evaluable if r >= mean]
    return len(relevant) / len(evaluable)


def naive_ami(evaluable, catalog_size):
    """evaluable: list of (true_rating, user_mean, item_count); count 0 excluded."""
    usable = [(r, mean, c) for r, mean, c in evaluable if c > 0]
    if not usable:
        return None
    total = 0.0
    for r, mean, c in usable:
        if r > mean:
            s = 1
        elif r < mean:
            s = -1
        else:
            s = 0
        total += (1.0 / c) * s * catalog_size
    return total / len(usable)


def naive_macro(values):
    values = [v for v in values if v is not None]
    if not values:
        return None
    return sum(values) / len(values)


def naive_top_n(scores_by_item, n, seen=()):
    """Full sort by (-score, item_id) over unseen items."""
    ranked = sorted(
        ((item, score) for item, score in scores_by_item.items() if item not in seen),
        key=lambda t: (-t[1], t[0]),
    )
    return [item for item, _ in ranked[:n]]


def naive_segment(user_count, user_threshold, item_count, item_threshold):
    u = "H" if user_count > user_threshold else "L"
    i = "P" if item_count > item_threshold else "U"
    return f"{u}user{i}item"


def naive_core_report(model, data, segments, top_n, exclude_seen=True):
    """Recompute the full core evaluation with per-pair predict calls.

    Returns {metric: {segment: (value, support)}} matching the library's
    table layout.
    """
    train_by_user = {}
    for log in data.train:
        train_by_user.setdefault(log.user_id, set()).add(log.item_id)
    test_by_user = {}
    for log in data.test:
        test_by_user.setdefault(log.user_id, {})[log.item_id] = log.rating

    # Decide
    scored = []
    for log in data.test:
        pred = model.predict(log.user_id, log.item_id)
        seg = naive_segment(
            segments.user_counts.get(log.user_id, 0),
            segments.user_threshold,
            segments.item_counts.get(log.item_id, 0),
            segments.item_threshold,
        )
        scored.append((log.user_id, seg, log.rating, pred))
    segs = ("HuserPitem", "LuserPitem", "HuserUitem", "LuserUitem")
    rmse_cells = {"Global": (naive_rmse([(t, p) for _, _, t, p in scored]), len(scored))}
    for seg in segs:
        cell = [(t, p) for _, s, t, p in scored if s == seg]
        rmse_cells[seg] = (naive_rmse(cell), len(cell))

    # Compare
    per_user = {}
    for user_id in sorted({u for u, _, _, _ in scored}):
        pairs = [(t, p) for u, _, t, p in scored if u == user_id]
        per_user[user_id] = naive_comp_pairs(pairs)
    comp_macro_cells = {}
    comp_micro_cells = {}
    for seg in ("Global", "Huser", "Luser"):
        users = [
            u
            for u in per_user
            if seg == "Global"
            or ("H" if segments.user_counts.get(u, 0) > segments.user_threshold else "L")
            == seg[0]
        ]
        ratios = [per_user[u][0] / per_user[u][1] for u in users if per_user[u][1] > 0]
        pooled_c = sum(per_user[u][0] for u in users)
        pooled_n = sum(per_user[u][1] for u in users)
        comp_macro_cells[seg] = (naive_macro(ratios), len(ratios))
        comp_micro_cells[seg] = (
            (pooled_c / pooled_n, pooled_n) if pooled_n else (None, 0)
        )

    # Discover
    catalog = sorted({log.item_id for log in data.train + data.test})
    outcomes_by_user = {}
    for user_id in sorted({log.user_id for log in data.train + data.test}):
        seen = train_by_user.get(user_id, set()) if exclude_seen else set()
        scores = {i: model.predict(user_id, i) for i in catalog}
        top = naive_top_n(scores, top_n, seen)
        user_mean = segments.user_means.get(user_id, segments.global_mean)
        outcomes = []
        for item in top:
            true = test_by_user.get(user_id, {}).get(item)
            seg = naive_segment(
                segments.user_counts.get(user_id, 0),
                segments.user_threshold,
                segments.item_counts.get(item, 0),
                segments.item_threshold,
            )
            outcomes.append((item, true, user_mean, segments.item_counts.get(item, 0), seg))
        outcomes_by_user[user_id] = outcomes

    precision_cells = {}
    ami_cells = {}
    for seg in ("Global",) + segs:
        precisions = []
        amis = []
        p_support = 0
        a_support = 0
        for outcomes in outcomes_by_user.values():
            cell = [o for o in outcomes if seg == "Global" or o[4] == seg]
            evaluable = [(t, m) for _, t, m, _, _ in cell if t is not None]
            p = naive_precision(evaluable)
            if p is not None:
                precisions.append(p)
                p_support += len(evaluable)
            eval_counts = [(t, m, c) for _, t, m, c, _ in cell if t is not None]
            a = naive_ami(eval_counts, len(catalog))
            if a is not None:
                amis.append(a)
                a_support += len([1 for t, m, c in eval_counts if c > 0])
        precision_cells[seg] = (naive_macro(precisions), p_support) if precisions else (None, 0)
        ami_cells[seg] = (naive_macro(amis), a_support) if amis else (None, 0)

    return {
        "RMSE": rmse_cells,
        "COMP_macro": comp_macro_cells,
        "COMP_micro": comp_micro_cells,
        "Precision": precision_cells,
        "AMI": ami_cells,
    }
