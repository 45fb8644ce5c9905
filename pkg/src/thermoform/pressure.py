"""Classical topological pressure on an SFT with locally constant potentials.

For a range-1 potential the pressure is log of the spectral radius of the
weighted transfer matrix M_ij = A_ij exp(phi(i)); this module computes it by
power iteration with Collatz-Wielandt enclosure, provides the definitional
finite-n cylinder-sum estimator, and builds the Gibbs (RPF) equilibrium
Markov measure from the Perron eigendata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numeric import karp_max_cycle_mean, logsumexp_sorted, sorted_sum
from .errors import NoConvergenceError, NotIrreducibleError, RangeMismatchError
from .measures import MarkovMeasure, markov_measure
from .sft import LocallyConstantPotential, Sft, common_range1, iter_grouped_sums

SPECTRAL_RELTOL = 1e-13
SPECTRAL_MAXITER = 200_000


@dataclass(frozen=True)
class PressureResult:
    """A computed pressure value plus convergence diagnostics."""

    value: float
    method: str  # spectral | cylinder | root | direct_induced | nonlinear_direct | variational
    iterations: int
    residual: float
    meta: dict = field(default_factory=dict)

    def with_method(self, method: str) -> "PressureResult":
        return PressureResult(self.value, method, self.iterations, self.residual,
                              dict(self.meta))


def _require_range1(pot: LocallyConstantPotential):
    if pot.range != 1:
        raise RangeMismatchError("range-1 potential required; recode first")


def perron_eigendata(weights: np.ndarray, reltol: float = SPECTRAL_RELTOL,
                     maxiter: int = SPECTRAL_MAXITER, need_vector: bool = False):
    """(rho, right eigenvector, iterations, enclosure gap) for a nonnegative
    irreducible matrix, via power iteration on weights + I.

    The +I shift makes the iteration aperiodic, so it converges for merely
    irreducible matrices (CYCLE2); the shift moves the spectral radius by
    exactly 1.  The Collatz-Wielandt ratios give a rigorous enclosure of the
    Perron root at every step.  Callers are expected to pre-scale so that
    rho(weights) is of order 1 (see spectral_pressure); when the eigenvalue
    ratio is too close to 1 for linear convergence (near-defective cases),
    the iteration falls back to repeated squaring, which converges doubly
    exponentially.
    """
    k = weights.shape[0]
    x = np.full(k, 1.0 / k)
    gap = math.inf
    check_at, last_gap = 500, math.inf
    for it in range(maxiter):
        y = np.array([sorted_sum(weights[i] * x) for i in range(k)]) + x
        ratios = y / x
        lam_min = float(np.min(ratios))
        lam_max = float(np.max(ratios))
        gap = lam_max - lam_min
        x = y / sorted_sum(y)
        if gap <= reltol * lam_max:
            lam = 0.5 * (lam_min + lam_max)
            return lam - 1.0, x, it + 1, gap
        if it + 1 == check_at:
            if gap > 0.1 * last_gap:  # projected to exceed maxiter: stalling
                return _perron_by_squaring(weights, reltol, need_vector, it + 1)
            last_gap = gap
            check_at += 500
    raise NoConvergenceError(f"power iteration gap {gap:.3e} after {maxiter} iterations")


def _perron_by_squaring(weights: np.ndarray, reltol: float, need_vector: bool,
                        iters_used: int):
    """Perron data by normalized repeated squaring of weights + I.

    log rho accumulates as sum 2^-(j+1) log nu_j over the squaring
    normalizers, so the error of the final Collatz enclosure is damped by
    2^-t; the eigenvector sharpens doubly exponentially, which rescues
    near-defective spectra where plain power iteration crawls.
    """
    k = weights.shape[0]
    b = weights + np.eye(k)
    acc = 0.0
    scale = 1.0
    ones = np.ones(k)
    for j in range(400):
        r = b @ ones
        y = b @ r
        ratios = y / r
        lam_min, lam_max = float(np.min(ratios)), float(np.max(ratios))
        gap = lam_max - lam_min
        needed = reltol if need_vector else min(reltol / scale, 0.25)
        if gap <= needed * lam_max:
            lam_log = acc + scale * math.log(0.5 * (lam_min + lam_max))
            lam = math.exp(lam_log)
            vec = r / sorted_sum(r)
            return lam - 1.0, vec, iters_used + 2 * j, gap * scale
        b2 = b @ b
        nu = float(b2.max())
        b = b2 / nu
        scale *= 0.5
        acc += scale * math.log(nu)
    raise NoConvergenceError("squaring fallback failed to localize the Perron root")


def tropical_pressure_shift(sft: Sft, table: np.ndarray) -> float:
    """Max cycle mean of the potential: the tropical log spectral radius.

    Brackets the pressure a priori (mcm <= P <= mcm + log k); used to scale
    the weight matrix so its Perron root lies in [1, k], which keeps the
    rho = rho(W + I) - 1 extraction free of cancellation no matter how
    skewed the potential is.
    """
    mean, _, _, _ = karp_max_cycle_mean(sft.adjacency, table)
    return mean


def spectral_pressure(sft: Sft, pot: LocallyConstantPotential) -> PressureResult:
    """P_top as log of the Perron root of A_ij exp(phi(i)).

    The table is shifted by its max cycle mean before exponentiating, so the
    scaled Perron root lies in [1, alphabet_size]: no overflow for desk-scale
    potentials and no cancellation when recovering it from the +I iteration.
    The shift is added back to the log.
    """
    if not sft.irreducible:
        raise NotIrreducibleError("spectral pressure needs an irreducible system")
    _require_range1(pot)
    if not pot.sft.same_system(sft):
        raise RangeMismatchError("potential lives on a different system")
    shift = tropical_pressure_shift(sft, pot.table)
    weights = sft.adjacency * np.exp(pot.table - shift)[:, None]
    rho, _, iters, gap = perron_eigendata(weights)
    return PressureResult(shift + math.log(rho), "spectral", iters, gap)


def cylinder_pressure_estimate(sft: Sft, pot: LocallyConstantPotential, n: int,
                               cap: int | None = None) -> PressureResult:
    """Definitional finite-n estimate (1/n) log sum over (n+r-1)-words of
    exp(S_n phi); exact for the given n.

    For range r > 1 the sum runs over (n+r-1)-words and the exponent still
    divides by n, so the estimate carries an O(r/n) edge effect that vanishes
    in the limit.
    """
    if n < pot.range:
        raise ValueError(f"n={n} below potential range {pot.range}")
    recoded = common_range1(sft, [pot])
    table = recoded.potentials[0].table
    groups = None
    for groups in iter_grouped_sums(recoded.sft, [table], n, cap=cap):
        pass
    terms = np.log(groups.counts.astype(float)) + groups.sums[:, 0]
    value = logsumexp_sorted(terms) / n
    return PressureResult(value, "cylinder", n, 0.0,
                          {"n": n, "groups": int(len(groups.counts)),
                           "words": int(groups.counts.sum())})


def rpf_equilibrium(sft: Sft, pot: LocallyConstantPotential) -> MarkovMeasure:
    """Gibbs Markov measure from the Ruelle-Perron-Frobenius eigendata.

    P_ij = M_ij r_j / (rho r_i) with right eigenvector r, stationary vector
    pi_i proportional to l_i r_i with left eigenvector l.  Satisfies the
    variational identity h + integral(phi) = log rho (tested, not assumed).
    Irreducibility suffices here: the +I power iteration handles periodic
    supports such as CYCLE2.
    """
    if not sft.irreducible:
        raise NotIrreducibleError("RPF construction needs an irreducible system")
    _require_range1(pot)
    shift = tropical_pressure_shift(sft, pot.table)
    weights = sft.adjacency * np.exp(pot.table - shift)[:, None]
    rho, right, _, _ = perron_eigendata(weights, need_vector=True)
    _, left, _, _ = perron_eigendata(weights.T, need_vector=True)
    transition = weights * right[None, :] / (rho * right[:, None])
    transition = transition * sft.adjacency
    transition = transition / transition.sum(axis=1, keepdims=True)
    stat = left * right
    stat = stat / sorted_sum(stat)
    return markov_measure(sft, transition, stationary=stat)
