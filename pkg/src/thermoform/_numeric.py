"""Small numeric kernels shared across modules.

The reductions here sum in value-sorted order.  All reported quantities in
this toolkit are invariant under relabeling the alphabet; sorting before
reducing makes the floating-point results invariant too (a permutation of
the terms produces the bit-identical sum), which is what lets the conjugacy
checks assert equality at 1e-12 honestly.
"""

from __future__ import annotations

import math

import numpy as np


def sorted_sum(values) -> float:
    """Sum of a 1-D array, reduced in ascending value order."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        return 0.0
    return float(np.sum(np.sort(arr)))


def logsumexp_sorted(terms) -> float:
    """log(sum(exp(terms))) with a single max shift and sorted reduction.

    Returns -inf for an empty term list.
    """
    arr = np.asarray(terms, dtype=float).ravel()
    if arr.size == 0:
        return -math.inf
    m = float(np.max(arr))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.sort(np.exp(arr - m)))))


def format_sig12(x: float) -> str:
    """Fixed-point rendering with 12 significant digits, trailing zeros kept.

    log 2 renders as "0.693147180560"; values too large for a positional
    12-digit rendering fall back to repr.
    """
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return repr(x)
    if x == 0:
        return "0.000000000000"
    exp10 = math.floor(math.log10(abs(x)))
    decimals = 11 - exp10
    if decimals < 0 or decimals > 320:
        return repr(x)
    return f"{x:.{decimals}f}"


def strongly_connected(adjacency: np.ndarray) -> bool:
    """True when the 0/1 digraph is strongly connected."""
    a = np.asarray(adjacency) > 0
    k = a.shape[0]
    if k == 0:
        return False
    return _reaches_all(a, 0) and _reaches_all(a.T, 0)


def _reaches_all(a: np.ndarray, start: int) -> bool:
    k = a.shape[0]
    seen = np.zeros(k, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(a[u]):
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


def karp_max_cycle_mean(adjacency: np.ndarray, weights: np.ndarray):
    """Karp's dynamic program for the maximum cycle mean of a digraph.

    The edge u -> v carries weight weights[u] (weights live on source
    symbols throughout this toolkit).  Returns (mean, table, parents,
    best_v) where table[t][v] is the best t-edge walk weight ending at v and
    parents supports critical-cycle recovery; ties break toward the smallest
    state index.  Requires a strongly connected graph.
    """
    k = len(weights)
    neg = -math.inf
    edge_w = np.where(np.asarray(adjacency) > 0, np.asarray(weights, dtype=float)[:, None], neg)
    table = np.full((k + 1, k), neg)
    table[0] = 0.0
    parents = np.zeros((k + 1, k), dtype=int)
    for t in range(1, k + 1):
        cand = table[t - 1][:, None] + edge_w
        table[t] = cand.max(axis=0)
        parents[t] = cand.argmax(axis=0)
    quot = (table[k][None, :] - table[:k]) / (k - np.arange(k))[:, None]
    per_v = quot.min(axis=0)
    best_v = int(per_v.argmax())
    return float(per_v.max()), table, parents, best_v


def strongly_connected_components(adjacency: np.ndarray) -> list[list[int]]:
    """SCCs of a small digraph via pairwise reachability (k is tiny here)."""
    a = np.asarray(adjacency) > 0
    k = a.shape[0]
    reach = a.copy()
    for _ in range(k):
        reach = reach | (reach @ reach)
    comps: list[list[int]] = []
    assigned = [False] * k
    for u in range(k):
        if assigned[u]:
            continue
        comp = [v for v in range(k)
                if v == u or (reach[u, v] and reach[v, u])]
        for v in comp:
            assigned[v] = True
        comps.append(comp)
    return comps
