"""Pure-Python implementations of the hot kernels.

These are the fallback twins of the compiled extension in ``_kernels.pyx``.
Arithmetic (operation order, guards) must stay line-for-line equivalent to
the Cython version so both backends produce bit-identical floats.
"""

from __future__ import annotations

from typing import Callable, Sequence

BACKEND = "python"


def nvs_grants(
    kinds: Sequence[int],
    reserves: Sequence[float],
    refs: Sequence[float],
    emas: Sequence[float],
    max_prbs: Sequence[int],
    budget: int,
    grid_size: int,
    alpha: float,
    rate_scale: float,
    quantum: int,
    eps: float,
) -> list[int]:
    """Grant PRB quanta to NVS slices by repeated highest-priority selection.

    kinds: 0 = rate-reserved slice, 1 = capacity-reserved slice.
    reserves: min rate in Mbps (rate) or grid share in (0,1] (capacity).
    refs: reference rate in Mbps (rate) or 1.0 (capacity); caps the
        provisional moving average for rate slices.
    max_prbs: per-slice demand ceiling in PRBs; a slice leaves the pool
        once its grant reaches it.
    rate_scale: Mbps contributed per granted PRB if fully used.

    Ties select the lowest index, so callers pass slices sorted by id.
    """
    n = len(kinds)
    granted = [0] * n
    prov = [0.0] * n
    for i in range(n):
        e = emas[i]
        if kinds[i] == 0 and e > refs[i]:
            e = refs[i]
        prov[i] = e

    remaining = budget
    while remaining > 0:
        best = -1
        best_p = 0.0
        for i in range(n):
            if granted[i] >= max_prbs[i]:
                continue
            d = prov[i]
            if d < eps:
                d = eps
            p = reserves[i] / d
            if best < 0 or p > best_p:
                best = i
                best_p = p
        if best < 0:
            break
        g = quantum
        if g > remaining:
            g = remaining
        room = max_prbs[best] - granted[best]
        if g > room:
            g = room
        granted[best] += g
        remaining -= g
        if kinds[best] == 0:
            pr = (1.0 - alpha) * emas[best] + alpha * (granted[best] * rate_scale)
            if pr > refs[best]:
                pr = refs[best]
            prov[best] = pr
        else:
            pr = (1.0 - alpha) * emas[best] + alpha * (granted[best] / grid_size)
            prov[best] = pr
    return granted


def make_margin_fn(
    features: Sequence[int],
    thresholds: Sequence[float],
    lefts: Sequence[int],
    rights: Sequence[int],
    values: Sequence[float],
    roots: Sequence[int],
    bias: float,
) -> Callable[[Sequence[float]], float]:
    """Build a raw-margin evaluator over a flattened tree ensemble.

    Node arrays are concatenated across trees; ``roots`` holds each tree's
    root index. A node with feature < 0 is a leaf. Traversal goes left iff
    x[feature] <= threshold. Margin = bias + sum of leaf values, trees in
    declaration order.
    """
    feat = list(features)
    thr = list(thresholds)
    left = list(lefts)
    right = list(rights)
    val = list(values)
    root_list = list(roots)

    def margin(x: Sequence[float]) -> float:
        m = bias
        for r in root_list:
            idx = r
            f = feat[idx]
            while f >= 0:
                if x[f] <= thr[idx]:
                    idx = left[idx]
                else:
                    idx = right[idx]
                f = feat[idx]
            m += val[idx]
        return m

    return margin


def make_margin_batch_fn(
    features: Sequence[int],
    thresholds: Sequence[float],
    lefts: Sequence[int],
    rights: Sequence[int],
    values: Sequence[float],
    roots: Sequence[int],
    bias: float,
) -> Callable[[Sequence[Sequence[float]]], list[float]]:
    margin = make_margin_fn(features, thresholds, lefts, rights, values, roots, bias)

    def margin_batch(rows: Sequence[Sequence[float]]) -> list[float]:
        return [margin(row) for row in rows]

    return margin_batch
