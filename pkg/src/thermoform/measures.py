"""Markov measures on an SFT and derivative-free search over them.

A MarkovMeasure is a row-stochastic matrix supported on the adjacency graph
together with its stationary vector; entropy and potential integrals have
closed forms, which makes the Markov class the working search space for all
variational principles in this toolkit (for locally constant potentials the
classical equilibria are Markov, so nothing is lost for the linear theory).

optimize_markov runs a seeded multi-start Nelder-Mead over row logits.  All
restarts march in lockstep as one batched simplex, so structured objectives
evaluate fully vectorized; results are reduced deterministically by
(value, parameter) order.  For structured objectives the system is first
relabeled to a canonical form, which makes the returned value exactly
invariant under symbol permutation of the inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._numeric import sorted_sum, strongly_connected
from .errors import (
    InadmissibleCycleError,
    NoConvergenceError,
    NonFiniteObjectiveError,
    RangeMismatchError,
    ReducibleSupportError,
)
from .sft import Cycle, LocallyConstantPotential, Sft

LOGIT_CLIP = 40.0


@dataclass(frozen=True)
class MarkovMeasure:
    """Shift-invariant Markov measure: stochastic matrix + stationary vector."""

    sft: Sft
    transition: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        self.transition.setflags(write=False)
        self.stationary.setflags(write=False)


def markov_measure(sft: Sft, transition, stationary=None) -> MarkovMeasure:
    """Validated constructor; computes the stationary vector when not given."""
    p = np.asarray(transition, dtype=float)
    k = sft.alphabet_size
    if p.shape != (k, k):
        raise ValueError(f"transition must be {k}x{k}")
    if ((p > 0) & (sft.adjacency == 0)).any():
        raise ValueError("transition support must be contained in adjacency")
    if np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
        raise ValueError("rows must sum to 1 within 1e-12")
    if stationary is None:
        stat = stationary_distribution(p, sft.adjacency)
    else:
        stat = np.asarray(stationary, dtype=float)
        if stat.shape != (k,) or stat.min() < -1e-12 or abs(stat.sum() - 1.0) > 1e-9:
            raise ValueError("stationary must be a probability vector")
        if np.abs(stat @ p - stat).max() > 1e-10:
            raise ValueError("stationary vector not invariant within 1e-10")
    return MarkovMeasure(sft, p.copy(), np.clip(stat, 0.0, None))


def stationary_distribution(transition, adjacency=None, tol: float = 1e-13,
                            maxiter: int = 500_000) -> np.ndarray:
    """Unique stationary vector of an irreducible-support stochastic matrix.

    Power iteration on (P + I)/2 (aperiodic, same fixed vector) from the
    uniform start, run to residual max|pi P - pi| <= 1e-13.
    """
    p = np.asarray(transition, dtype=float)
    k = p.shape[0]
    if adjacency is not None and ((p > 0) & (np.asarray(adjacency) == 0)).any():
        raise ValueError("transition support must be contained in adjacency")
    if np.abs(p.sum(axis=1) - 1.0).max() > 1e-12:
        raise ValueError("rows must sum to 1 within 1e-12")
    if not strongly_connected(p > 0):
        raise ReducibleSupportError("support graph not strongly connected")
    pi = np.full(k, 1.0 / k)
    for _ in range(maxiter):
        nxt = 0.5 * (pi @ p + pi)
        nxt = nxt / nxt.sum()
        if np.abs(nxt @ p - nxt).max() <= tol:
            return nxt
        pi = nxt
    raise NoConvergenceError(f"stationary iteration residual above {tol}")


def _stationary_solve(p: np.ndarray) -> np.ndarray:
    """Direct linear solve for the stationary vector (optimizer fast path)."""
    k = p.shape[0]
    a = p.T - np.eye(k)
    a[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def entropy(measure: MarkovMeasure) -> float:
    """Kolmogorov-Sinai entropy -sum_i pi_i sum_j P_ij log P_ij, in nats.

    0 log 0 := 0; the reduction is value-sorted so the result does not
    depend on symbol labels.
    """
    p = measure.transition
    pi = measure.stationary
    mask = p > 0
    terms = np.where(mask, pi[:, None] * p * np.log(np.where(mask, p, 1.0)), 0.0)
    return max(0.0, -sorted_sum(terms[mask]))


def integrate_potential(measure: MarkovMeasure, pot: LocallyConstantPotential) -> float:
    """Integral of a locally constant potential: sum over admissible r-words
    of Pr(word) * value(word)."""
    if not pot.sft.same_system(measure.sft):
        raise RangeMismatchError("potential lives on a different system")
    if pot.range == 1:
        return sorted_sum(measure.stationary * pot.table)
    probs = np.array([cylinder_mass(measure, w) for w in pot.words])
    return sorted_sum(probs * pot.table)


def cylinder_mass(measure: MarkovMeasure, word: Sequence[int]) -> float:
    """Measure of the cylinder of `word`: pi_{w0} prod P_{w_i w_{i+1}}."""
    w = tuple(word)
    mass = float(measure.stationary[w[0]])
    for a, b in zip(w, w[1:]):
        mass *= float(measure.transition[a, b])
    return mass


def cycle_measure(sft: Sft, cycle: Cycle) -> MarkovMeasure:
    """Periodic-orbit measure: deterministic motion along a simple cycle,
    uniform mass on its states; entropy 0.

    States off the cycle get an arbitrary deterministic row (first allowed
    successor) so the matrix is stochastic; they carry no mass.
    """
    states = cycle.states
    if len(set(states)) != len(states):
        raise InadmissibleCycleError("cycle_measure needs a simple cycle")
    a = sft.adjacency
    k = sft.alphabet_size
    p = np.zeros((k, k))
    for i, s in enumerate(states):
        t = states[(i + 1) % cycle.period]
        if not a[s, t]:
            raise InadmissibleCycleError(f"transition {s}->{t} forbidden")
        p[s, t] = 1.0
    for s in range(k):
        if s not in states:
            p[s, int(np.flatnonzero(a[s])[0])] = 1.0
    pi = np.zeros(k)
    for s in states:
        pi[s] = 1.0 / cycle.period
    return MarkovMeasure(sft, p, pi)


def random_markov_measure(sft: Sft, rng: np.random.Generator) -> MarkovMeasure:
    """Random fully supported Markov measure (test and property-suite helper)."""
    if not sft.irreducible:
        raise ReducibleSupportError("random measure needs an irreducible system")
    p = np.where(sft.adjacency > 0, rng.uniform(0.05, 1.0, sft.adjacency.shape), 0.0)
    p = p / p.sum(axis=1, keepdims=True)
    return MarkovMeasure(sft, p, _stationary_solve(p))


# ---------------------------------------------------------------------------
# Structured objectives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructuredObjective:
    """Objective of the form (w*h + F(integrals of tables)) / integral(denominator).

    tables is an (m, k) array of range-1 potential values; `functional`, when
    given, must expose __call__(vector) and ideally evaluate_batch((B, m)).
    functional=None means the plain sum of the m integrals.  denominator=None
    means no ratio.  Instances are also plain callables on MarkovMeasure, so
    they satisfy the generic objective contract.
    """

    tables: np.ndarray
    functional: object = None
    entropy_weight: float = 1.0
    denominator: np.ndarray | None = None
    label: str = ""

    def __call__(self, measure: MarkovMeasure) -> float:
        pi = measure.stationary
        h = entropy(measure)
        integrals = self.tables @ pi if self.tables.size else np.zeros(0)
        num = self.entropy_weight * h + self._apply(integrals)
        if self.denominator is None:
            return float(num)
        return float(num / sorted_sum(pi * self.denominator))

    def _apply(self, integrals: np.ndarray) -> float:
        if self.functional is None:
            return float(integrals.sum()) if integrals.size else 0.0
        return float(self.functional(integrals))

    def batch_values(self, pis: np.ndarray, hs: np.ndarray) -> np.ndarray:
        integrals = pis @ self.tables.T if self.tables.size else np.zeros((len(pis), 0))
        if self.functional is None:
            fvals = integrals.sum(axis=1) if integrals.size else np.zeros(len(pis))
        else:
            batch = getattr(self.functional, "evaluate_batch", None)
            if batch is not None:
                fvals = np.asarray(batch(integrals), dtype=float)
            else:
                fvals = np.array([float(self.functional(x)) for x in integrals])
        num = self.entropy_weight * hs + fvals
        if self.denominator is None:
            return num
        return num / (pis @ self.denominator)


def entropy_objective(sft: Sft) -> StructuredObjective:
    return StructuredObjective(np.zeros((0, sft.alphabet_size)), label="entropy")


# ---------------------------------------------------------------------------
# Multi-start Nelder-Mead over row logits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizationResult:
    measure: MarkovMeasure
    value: float
    residual: float
    iterations: int
    evaluations: int
    best_params: np.ndarray = field(repr=False, default=None)


class _LogitChart:
    """Maps unconstrained per-row logits to stochastic matrices on the graph.

    Each row with d allowed transitions contributes d-1 free parameters (the
    first allowed edge is pinned to logit 0); rows with a single successor
    contribute none.
    """

    def __init__(self, adjacency: np.ndarray):
        self.k = adjacency.shape[0]
        self.rows = []
        slot = 0
        for i in range(self.k):
            cols = np.flatnonzero(adjacency[i])
            self.rows.append((i, cols, slot))
            slot += max(len(cols) - 1, 0)
        self.n_params = slot

    def matrices(self, params: np.ndarray) -> np.ndarray:
        b = params.shape[0]
        p = np.zeros((b, self.k, self.k))
        z = np.clip(params, -LOGIT_CLIP, LOGIT_CLIP)
        for i, cols, slot in self.rows:
            d = len(cols)
            logits = np.zeros((b, d))
            if d > 1:
                logits[:, 1:] = z[:, slot:slot + d - 1]
            logits -= logits.max(axis=1, keepdims=True)
            w = np.exp(logits)
            p[:, i, cols] = w / w.sum(axis=1, keepdims=True)
        return p


def _stationary_batch(p: np.ndarray) -> np.ndarray:
    b, k, _ = p.shape
    a = np.transpose(p, (0, 2, 1)) - np.eye(k)
    a[:, -1, :] = 1.0
    rhs = np.zeros((b, k, 1))
    rhs[:, -1, 0] = 1.0
    pi = np.linalg.solve(a, rhs)[:, :, 0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum(axis=1, keepdims=True)


def _entropy_batch(p: np.ndarray, pi: np.ndarray, support: np.ndarray) -> np.ndarray:
    safe = np.where(support, p, 1.0)
    terms = np.where(support, p * np.log(safe), 0.0)
    return np.maximum(0.0, -np.einsum("bi,bij->b", pi, terms))


def _canonical_permutation(adjacency: np.ndarray, data: list[np.ndarray]):
    """Relabeling that minimizes (adjacency, data tables); None when k > 8.

    Canonicalizing before optimizing makes the search, including its seeded
    restarts, independent of how the caller labeled the symbols.
    """
    k = adjacency.shape[0]
    if k > 8:
        return None
    best_key, best_perm = None, None
    for perm in itertools.permutations(range(k)):
        inv = np.argsort(perm)
        adj2 = adjacency[np.ix_(inv, inv)]
        tabs2 = [t[..., inv] for t in data]
        key = (adj2.tobytes(), tuple(t.tobytes() for t in tabs2), perm)
        if best_key is None or key < best_key:
            best_key, best_perm = key, np.asarray(perm)
    return best_perm


def optimize_markov(sft: Sft, objective: Callable[[MarkovMeasure], float],
                    seed: int = 0, restarts: int = 20, max_iter: int = 2000,
                    xatol: float = 1e-9, fatol: float = 1e-9,
                    warm_starts: Sequence[np.ndarray] = ()) -> OptimizationResult:
    """Maximize an objective over Markov measures on the SFT.

    Deterministic given the seed: restart starting points come from a seeded
    generator, all restarts run lockstep, and the winner is chosen by value
    then lexicographic parameter order.  Raises NonFiniteObjectiveError when
    the objective produces NaN.
    """
    if not sft.irreducible:
        raise ReducibleSupportError("optimize_markov needs an irreducible system")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    structured = isinstance(objective, StructuredObjective)
    perm = None
    work_sft, work_obj = sft, objective
    if structured:
        data = [objective.tables]
        if objective.denominator is not None:
            data.append(objective.denominator)
        perm = _canonical_permutation(sft.adjacency, data)
        if perm is not None:
            work_sft, work_obj = _relabel_problem(sft, objective, perm)

    chart = _LogitChart(work_sft.adjacency)
    support = work_sft.adjacency > 0
    evals = [0]

    def batch_eval(params: np.ndarray) -> np.ndarray:
        evals[0] += len(params)
        p = chart.matrices(params)
        pi = _stationary_batch(p)
        if isinstance(work_obj, StructuredObjective):
            hs = _entropy_batch(p, pi, support)
            vals = work_obj.batch_values(pi, hs)
        else:
            vals = np.array([float(work_obj(MarkovMeasure(work_sft, p[r], pi[r])))
                             for r in range(len(params))])
        if np.isnan(vals).any():
            raise NonFiniteObjectiveError("objective returned NaN")
        return -vals

    if chart.n_params == 0:
        x = np.zeros((1, 0))
        value = -float(batch_eval(x)[0])
        p = chart.matrices(x)[0]
        measure = _finalize_measure(work_sft, p, sft, perm)
        return OptimizationResult(measure, value, 0.0, 0, evals[0], np.zeros(0))

    rng = np.random.default_rng(seed)
    starts = [np.zeros(chart.n_params)]
    if restarts > 1:
        starts.append(rng.uniform(-2.0, 2.0, (restarts - 1, chart.n_params)))
    for w in warm_starts:
        starts.append(np.asarray(w, dtype=float).reshape(1, -1))
    x0 = np.vstack([np.atleast_2d(s) for s in starts])

    best_x, best_f, spread, iters = _nelder_mead_batch(
        batch_eval, x0, max_iter=max_iter, xatol=xatol, fatol=fatol)
    order = np.lexsort(tuple(best_x[:, j] for j in range(best_x.shape[1] - 1, -1, -1))
                       + (best_f,))
    win = order[0]
    p = chart.matrices(best_x[win:win + 1])[0]
    measure = _finalize_measure(work_sft, p, sft, perm)
    return OptimizationResult(measure, -float(best_f[win]), float(spread[win]),
                              iters, evals[0], best_x[win].copy())


def _relabel_problem(sft: Sft, objective: StructuredObjective, perm: np.ndarray):
    inv = np.argsort(perm)
    adj = sft.adjacency[np.ix_(inv, inv)]
    from .sft import validate_sft

    new_sft = validate_sft(sft.alphabet_size, adj)
    new_obj = StructuredObjective(
        objective.tables[..., inv] if objective.tables.size else objective.tables,
        objective.functional, objective.entropy_weight,
        None if objective.denominator is None else objective.denominator[inv],
        objective.label)
    return new_sft, new_obj


def _finalize_measure(work_sft: Sft, p: np.ndarray, orig_sft: Sft, perm):
    p = p / p.sum(axis=1, keepdims=True)
    pi = _stationary_solve(p)
    if perm is None:
        return MarkovMeasure(orig_sft, p, pi)
    # original label i was relabeled to canonical label perm[i]
    k = orig_sft.alphabet_size
    p_orig = np.zeros_like(p)
    pi_orig = np.zeros_like(pi)
    for i in range(k):
        pi_orig[i] = pi[perm[i]]
        for j in range(k):
            p_orig[i, j] = p[perm[i], perm[j]]
    return MarkovMeasure(orig_sft, p_orig, pi_orig)


_ALPHA, _GAMMA, _RHO, _SIGMA = 1.0, 2.0, 0.5, 0.5


def _nelder_mead_batch(f, x0: np.ndarray, max_iter: int, xatol: float, fatol: float):
    """Lockstep Nelder-Mead over a batch of starting points; minimizes f.

    Standard reflect/expand/contract/shrink moves applied with boolean masks
    so every restart follows the classical algorithm exactly; converged
    restarts freeze.  Returns (best points, best values, spreads, iterations).
    """
    b, n = x0.shape
    simplex = np.repeat(x0[:, None, :], n + 1, axis=1)
    for j in range(n):
        simplex[:, j + 1, j] += 0.25
    fv = f(simplex.reshape(-1, n)).reshape(b, n + 1)

    it = 0
    for it in range(1, max_iter + 1):
        order = np.argsort(fv, axis=1, kind="stable")
        fv = np.take_along_axis(fv, order, axis=1)
        simplex = np.take_along_axis(simplex, order[:, :, None], axis=1)
        fspread = fv[:, -1] - fv[:, 0]
        xspread = np.max(np.abs(simplex - simplex[:, :1, :]), axis=(1, 2))
        active = ~((fspread <= fatol) & (xspread <= xatol))
        if not active.any():
            break

        centroid = simplex[:, :-1, :].mean(axis=1)
        worst = simplex[:, -1, :]
        xr = centroid + _ALPHA * (centroid - worst)
        xe = centroid + _GAMMA * (centroid - worst)
        xoc = centroid + _RHO * (xr - centroid)
        xic = centroid - _RHO * (centroid - worst)
        cand = np.stack([xr, xe, xoc, xic], axis=1)  # (b, 4, n)
        fc = f(cand.reshape(-1, n)).reshape(b, 4)
        fr, fe, foc, fic = fc[:, 0], fc[:, 1], fc[:, 2], fc[:, 3]

        new_vertex = worst.copy()
        new_f = fv[:, -1].copy()
        shrink = np.zeros(b, dtype=bool)

        expand_mask = fr < fv[:, 0]
        take_e = expand_mask & (fe < fr)
        take_r_exp = expand_mask & ~(fe < fr)
        reflect_mask = ~expand_mask & (fr < fv[:, -2])
        out_mask = ~expand_mask & ~reflect_mask & (fr < fv[:, -1])
        take_oc = out_mask & (foc <= fr)
        shrink |= out_mask & ~(foc <= fr)
        in_mask = ~expand_mask & ~reflect_mask & ~out_mask
        take_ic = in_mask & (fic < fv[:, -1])
        shrink |= in_mask & ~(fic < fv[:, -1])

        for mask, xx, ff in ((take_e, xe, fe), (take_r_exp, xr, fr),
                             (reflect_mask, xr, fr), (take_oc, xoc, foc),
                             (take_ic, xic, fic)):
            use = mask & active
            new_vertex[use] = xx[use]
            new_f[use] = ff[use]

        upd = active & ~shrink
        simplex[upd, -1, :] = new_vertex[upd]
        fv[upd, -1] = new_f[upd]

        sh = active & shrink
        if sh.any():
            best = simplex[sh, :1, :]
            shrunk = best + _SIGMA * (simplex[sh, 1:, :] - best)
            simplex[sh, 1:, :] = shrunk
            fv[sh, 1:] = f(shrunk.reshape(-1, n)).reshape(-1, n)

    order = np.argsort(fv, axis=1, kind="stable")
    fv = np.take_along_axis(fv, order, axis=1)
    simplex = np.take_along_axis(simplex, order[:, :, None], axis=1)
    return simplex[:, 0, :], fv[:, 0], fv[:, -1] - fv[:, 0], it
