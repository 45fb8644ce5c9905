"""Ergodic ratio optimization and freezing behavior of beta -> P_psi(beta phi).

Max^psi(phi), the largest value of int phi / int psi over invariant
measures, is computed parametrically: the maximum cycle mean of the edge
weights phi - lambda psi is zero exactly at lambda = Max, and cycle means
come from Karp's dynamic program.  The set of maximizing measures is
approximated by the subgraph of edges lying on maximum-ratio cycles; the
residual entropy h_inf is the induced entropy root on that subgraph.  The
sweep machinery compares P_psi(beta phi) against the freezing asymptote
beta Max + h_inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._numeric import karp_max_cycle_mean, strongly_connected_components
from .errors import EmptySubgraphError, NotIrreducibleError, RangeMismatchError
from .induced import InducedProblem, bowen_root, induced_equilibrium
from .measures import cylinder_mass, entropy, integrate_potential
from .sft import (
    Cycle,
    LocallyConstantPotential,
    Sft,
    common_range1,
    make_cycle,
    periodic_birkhoff,
    range1_potential,
    validate_sft,
)


@dataclass(frozen=True)
class CycleRatioResult:
    """Max^psi(phi) with a witnessing cycle and the critical subgraph."""

    value: float
    witness: Cycle
    subgraph_edges: frozenset


@dataclass(frozen=True)
class BetaSweep:
    betas: np.ndarray
    pressures: np.ndarray
    ratios: np.ndarray
    scaled_entropies: np.ndarray
    asymptote: tuple  # (Max, h_inf)
    gaps: np.ndarray


@dataclass(frozen=True)
class FreezingVerdict:
    kind: str  # frozen_at | asymptotic | indeterminate
    beta0: float | None = None


def _require_range1_pair(phi, psi):
    if phi.range != 1 or psi.range != 1:
        raise RangeMismatchError("range-1 potentials required; recode first")


def _critical_cycle(parents: np.ndarray, best_v: int) -> list[int]:
    k = parents.shape[1]
    walk = [best_v]
    v = best_v
    for t in range(k, 0, -1):
        v = int(parents[t][v])
        walk.append(v)
    walk.reverse()  # forward walk of k edges
    seen = {}
    for i, u in enumerate(walk):
        if u in seen:
            return walk[seen[u]:i]
        seen[u] = i
    raise AssertionError("walk of length k must repeat a state")


def max_cycle_ratio(sft: Sft, phi: LocallyConstantPotential,
                    psi: LocallyConstantPotential,
                    tol: float = 1e-10) -> CycleRatioResult:
    """Largest int phi / int psi over invariant measures, with witness.

    Bisection on lambda -> max cycle mean of (phi - lambda psi); the witness
    cycle is recovered from the Karp table at the root and the reported
    value is its exact periodic ratio.  subgraph_edges collects every edge
    lying on a cycle of maximal ratio (max-plus tight edges inside strongly
    connected components of the tight graph).
    """
    _require_range1_pair(phi, psi)
    if psi.min() <= 0:
        raise ValueError("psi must be strictly positive")
    if not sft.irreducible:
        raise NotIrreducibleError("max_cycle_ratio needs an irreducible system")
    a = sft.adjacency
    fvals = phi.table
    gvals = psi.table

    ratios = fvals / gvals
    lo, hi = float(ratios.min()), float(ratios.max())
    if hi - lo < tol:
        lam = hi
    else:
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            mean, _, _, _ = karp_max_cycle_mean(a, fvals - mid * gvals)
            if mean >= 0:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)

    _, _, parents, best_v = karp_max_cycle_mean(a, fvals - lam * gvals)
    states = _critical_cycle(parents, best_v)
    rot = min(range(len(states)), key=lambda i: (states[i], states[i:] + states[:i]))
    witness = make_cycle(sft, states[rot:] + states[:rot])
    exact = periodic_birkhoff(phi, witness) / periodic_birkhoff(psi, witness)

    edges = _critical_edges(a, fvals - exact * gvals)
    return CycleRatioResult(exact, witness, frozenset(edges))


def _critical_edges(adjacency: np.ndarray, w: np.ndarray, tol: float = 1e-9):
    """Edges on zero-mean cycles of a graph with max cycle mean zero.

    Max-plus value iteration gives potentials p with p(v) >= p(u) + w(u);
    tight edges (equality within tol) restricted to strongly connected
    components of the tight graph are exactly the critical edges.
    """
    k = len(w)
    p = np.zeros(k)
    neg = -math.inf
    edge_w = np.where(adjacency > 0, w[:, None], neg)
    for _ in range(k * k + 2 * k + 4):
        p = np.maximum(p, (p[:, None] + edge_w).max(axis=0))
    tight = np.zeros_like(adjacency)
    for u in range(k):
        for v in range(k):
            if adjacency[u, v] and p[u] + w[u] >= p[v] - tol:
                tight[u, v] = 1
    edges = set()
    for comp in strongly_connected_components(tight):
        comp_set = set(comp)
        for u in comp:
            for v in np.flatnonzero(tight[u]):
                if int(v) in comp_set and (len(comp) > 1 or tight[u, u]):
                    edges.add((u, int(v)))
    return edges


def h_infinity(sft: Sft, phi: LocallyConstantPotential,
               psi: LocallyConstantPotential,
               ratio_result: CycleRatioResult | None = None) -> float:
    """Residual scaled entropy sup{h/int psi} over ratio-maximizing measures.

    Computed as the induced entropy root P_sub(-s psi) = 0 on each strongly
    connected component of the critical subgraph, taking the largest; a
    single cycle gives 0.
    """
    _require_range1_pair(phi, psi)
    rr = ratio_result if ratio_result is not None else max_cycle_ratio(sft, phi, psi)
    if not rr.subgraph_edges:
        raise EmptySubgraphError("no critical edges; max_cycle_ratio tolerance failure")
    k = sft.alphabet_size
    sub = np.zeros((k, k), dtype=np.int8)
    for (u, v) in rr.subgraph_edges:
        sub[u, v] = 1
    best = 0.0
    for comp in strongly_connected_components(sub):
        comp = sorted(comp)
        internal = [(u, v) for (u, v) in rr.subgraph_edges
                    if u in comp and v in comp]
        if not internal:
            continue
        idx = {s: i for i, s in enumerate(comp)}
        adj = np.zeros((len(comp), len(comp)), dtype=np.int8)
        for (u, v) in internal:
            adj[idx[u], idx[v]] = 1
        if not (adj.sum(axis=1).all() and adj.sum(axis=0).all()):
            continue
        comp_sft = validate_sft(len(comp), adj)
        psi_sub = range1_potential(comp_sft, [psi.value((s,)) for s in comp])
        zero = range1_potential(comp_sft, np.zeros(len(comp)))
        root = bowen_root(InducedProblem(comp_sft, zero, psi_sub)).value
        best = max(best, root)
    return best


# ---------------------------------------------------------------------------
# Beta sweeps
# ---------------------------------------------------------------------------

def beta_sweep(sft: Sft, phi: LocallyConstantPotential,
               psi: LocallyConstantPotential,
               beta_grid: Sequence[float]) -> BetaSweep:
    """P_psi(beta phi) along a grid with equilibrium statistics and the
    freezing asymptote beta Max + h_inf."""
    betas = np.asarray(list(beta_grid), dtype=float)
    if (np.diff(betas) <= 0).any():
        raise ValueError("beta_grid must be strictly increasing")
    rec = common_range1(sft, [phi, psi])
    phi1, psi1 = rec.potentials
    rr = max_cycle_ratio(rec.sft, phi1, psi1)
    hinf = h_infinity(rec.sft, phi1, psi1, rr)

    pressures = np.empty_like(betas)
    ratios = np.empty_like(betas)
    scaled = np.empty_like(betas)
    for i, b in enumerate(betas):
        scaled_phi = LocallyConstantPotential(rec.sft, 1, phi1.words,
                                              b * phi1.table, f"{b} phi")
        problem = InducedProblem(rec.sft, scaled_phi, psi1)
        pressures[i] = bowen_root(problem).value
        mu = induced_equilibrium(problem)
        int_psi = integrate_potential(mu, psi1)
        ratios[i] = integrate_potential(mu, phi1) / int_psi
        scaled[i] = entropy(mu) / int_psi
    gaps = pressures - (betas * rr.value + hinf)
    return BetaSweep(betas, pressures, ratios, scaled, (rr.value, hinf), gaps)


def detect_freezing(sweep: BetaSweep, tol: float = 1e-7) -> FreezingVerdict:
    """Classify a sweep against the line beta Max + h_inf.

    frozen_at(beta0): gaps at most tol from beta0 on (beta0 the grid start
    when every gap is small).  asymptotic: gaps start above tol, decrease
    strictly while above tol, and decay by at least a factor 10 before the
    grid ends; fully supported Gibbs equilibria on mixing systems land here,
    since they never freeze at finite beta.  Everything else is
    indeterminate.  The asymptotic test runs first: once the decaying gap
    crosses tol at some grid point, the literal frozen rule would fire even
    though the gap never vanishes.
    """
    gaps = np.asarray(sweep.gaps, dtype=float)
    if len(gaps) < 6:
        raise ValueError("sweep must cover at least 6 grid points")
    betas = sweep.betas
    if np.all(gaps <= tol):
        return FreezingVerdict("frozen_at", float(betas[0]))

    above = np.flatnonzero(gaps > tol)
    prefix_contiguous = bool((above == np.arange(len(above))).all())
    if prefix_contiguous and gaps[0] > tol:
        seq = gaps[above]
        strictly_decreasing = bool((np.diff(seq) < 0).all())
        decayed = seq[-1] < gaps[0] / 10.0
        if strictly_decreasing and decayed:
            return FreezingVerdict("asymptotic")

    for j in range(1, len(gaps)):
        if gaps[j - 1] > tol and np.all(gaps[j:] <= tol):
            return FreezingVerdict("frozen_at", float(betas[j]))
    return FreezingVerdict("indeterminate")


# ---------------------------------------------------------------------------
# Zero-temperature limits and differentiability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroTemperatureReport:
    betas: np.ndarray
    words: tuple
    masses: np.ndarray          # (len(betas), len(words))
    mass_sup_diffs: np.ndarray  # consecutive sup-norm differences
    ratios: np.ndarray
    ratio_gaps: np.ndarray      # |ratio - Max| per beta
    max_ratio: float
    decay_constant: float       # max over earlier betas of beta * gap


def zero_temperature_limit(sft: Sft, phi: LocallyConstantPotential,
                           psi: LocallyConstantPotential,
                           beta_schedule: Sequence[float] = (1, 2, 4, 8, 16, 32, 64),
                           test_depth: int = 3) -> ZeroTemperatureReport:
    """Track equilibria of P_psi(beta phi) along an increasing schedule.

    Reports cylinder masses up to test_depth (a Cauchy diagnostic for the
    weak-* limit) and the ratio int phi / int psi against Max^psi(phi),
    whose gap must vanish in the limit.
    """
    betas = np.asarray(list(beta_schedule), dtype=float)
    if (np.diff(betas) <= 0).any():
        raise ValueError("beta_schedule must be increasing")
    if test_depth < 1:
        raise ValueError("test_depth must be >= 1")
    rec = common_range1(sft, [phi, psi])
    phi1, psi1 = rec.potentials
    rr = max_cycle_ratio(rec.sft, phi1, psi1)

    from .sft import enumerate_words

    words = tuple(enumerate_words(sft, test_depth))
    masses = np.zeros((len(betas), len(words)))
    ratios = np.empty(len(betas))
    for i, b in enumerate(betas):
        scaled_phi = LocallyConstantPotential(rec.sft, 1, phi1.words,
                                              b * phi1.table, f"{b} phi")
        mu = induced_equilibrium(InducedProblem(rec.sft, scaled_phi, psi1))
        ratios[i] = integrate_potential(mu, phi1) / integrate_potential(mu, psi1)
        for j, w in enumerate(words):
            masses[i, j] = _original_cylinder_mass(rec, mu, w)
    sup_diffs = np.abs(np.diff(masses, axis=0)).max(axis=1) if len(betas) > 1 \
        else np.zeros(0)
    gaps = np.abs(ratios - rr.value)
    decay_c = float(np.max(betas[:-1] * gaps[:-1])) if len(betas) > 1 else 0.0
    return ZeroTemperatureReport(betas, words, masses, sup_diffs, ratios, gaps,
                                 rr.value, decay_c)


def _original_cylinder_mass(rec, measure, word) -> float:
    """Mass of an original-alphabet cylinder under a measure on the recode."""
    m = rec.block_length
    if m == 1:
        return cylinder_mass(measure, word)
    if len(word) >= m:
        idx = {b: i for i, b in enumerate(rec.blocks)}
        path = tuple(idx[tuple(word[i:i + m])] for i in range(len(word) - m + 1))
        return cylinder_mass(measure, path)
    total = 0.0
    for i, b in enumerate(rec.blocks):
        if b[:len(word)] == tuple(word):
            total += float(measure.stationary[i])
    return total


@dataclass(frozen=True)
class DifferentiabilityReport:
    beta0: float
    fd_derivative: float
    equilibrium_ratio: float

    @property
    def difference(self) -> float:
        return abs(self.fd_derivative - self.equilibrium_ratio)


def differentiability_check(sft: Sft, phi: LocallyConstantPotential,
                            psi: LocallyConstantPotential, beta0: float,
                            h_step: float = 1e-4) -> DifferentiabilityReport:
    """Central difference of beta -> P_psi(beta phi) vs the equilibrium ratio.

    When the sweep is differentiable at beta0, every equilibrium state of
    beta0 phi has int phi / int psi equal to the derivative.
    """
    rec = common_range1(sft, [phi, psi])
    phi1, psi1 = rec.potentials

    def pressure(b: float) -> float:
        scaled = LocallyConstantPotential(rec.sft, 1, phi1.words, b * phi1.table, "")
        return bowen_root(InducedProblem(rec.sft, scaled, psi1)).value

    fd = (pressure(beta0 + h_step) - pressure(beta0 - h_step)) / (2 * h_step)
    scaled0 = LocallyConstantPotential(rec.sft, 1, phi1.words, beta0 * phi1.table, "")
    mu = induced_equilibrium(InducedProblem(rec.sft, scaled0, psi1))
    ratio = integrate_potential(mu, phi1) / integrate_potential(mu, psi1)
    return DifferentiabilityReport(beta0, fd, ratio)
