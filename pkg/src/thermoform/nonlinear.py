"""Nonlinear topological pressure P^F and its induced version P_psi^F.

P^F(Phi) is the growth rate of sums exp[n F(S_n Phi / n)] over separated
sets; for linear F it collapses to classical pressure, and that collapse is
implemented literally (linear functionals route through the classical
cylinder estimator on the combined potential, so the two sides agree
bit-for-bit).  The induced quantity is computed as the root in beta of the
auxiliary pressure P^{G_beta}(Psi) with G_beta(a, b) = F(a) - beta b,
evaluated variationally over Markov measures; the definitional estimator
and the R-threshold scan are cross-checks of the same value.

All exponential sums use log-sum-exp with one max shift per length, since
n F can reach hundreds of nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._numeric import logsumexp_sorted
from .errors import (
    BracketFailureError,
    NonConvexError,
    NonPositiveScalingError,
    NotIrreducibleError,
)
from .induced import InducedProblem, bowen_root, direct_induced_estimate, iter_induced_terms
from .measures import MarkovMeasure, OptimizationResult, StructuredObjective, optimize_markov
from .pressure import PressureResult, cylinder_pressure_estimate
from .sft import (
    LocallyConstantPotential,
    Sft,
    common_range1,
    grouped_sums,
    higher_block_recode,
    iter_grouped_sums,
    linear_combination,
    permute_symbols,
)

OVERFLOW_EXPONENT = 700.0


@dataclass(frozen=True)
class NonlinearFunctional:
    """Evaluable F: R^d -> R with a convexity flag.

    kind is one of linear (c . x), quadratic (x Q x + c . x, convex iff Q is
    PSD, checked by eigenvalues), or custom (arbitrary evaluator with a
    caller-asserted flag).
    """

    dimension: int
    kind: str
    convex: bool
    coeffs: np.ndarray | None = None
    quad: np.ndarray | None = None
    fn: Callable | None = None
    label: str = ""

    def __call__(self, x) -> float:
        v = np.asarray(x, dtype=float).reshape(self.dimension)
        if self.kind == "linear":
            return float(self.coeffs @ v)
        if self.kind == "quadratic":
            return float(v @ self.quad @ v + self.coeffs @ v)
        return float(self.fn(v))

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.dimension)
        if self.kind == "linear":
            return xs @ self.coeffs
        if self.kind == "quadratic":
            return np.einsum("bi,ij,bj->b", xs, self.quad, xs) + xs @ self.coeffs
        return np.array([float(self.fn(x)) for x in xs])


def linear_functional(coeffs: Sequence[float], label: str = "") -> NonlinearFunctional:
    c = np.asarray(coeffs, dtype=float)
    return NonlinearFunctional(len(c), "linear", True, coeffs=c, label=label)


def quadratic_functional(quad, coeffs=None, label: str = "") -> NonlinearFunctional:
    q = np.asarray(quad, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("quadratic part must be a square matrix")
    if np.abs(q - q.T).max() > 1e-12:
        raise ValueError("quadratic part must be symmetric")
    d = q.shape[0]
    c = np.zeros(d) if coeffs is None else np.asarray(coeffs, dtype=float)
    convex = bool(np.linalg.eigvalsh(q).min() >= -1e-10)
    return NonlinearFunctional(d, "quadratic", convex, coeffs=c, quad=q, label=label)


def custom_functional(dimension: int, fn: Callable, convex: bool,
                      label: str = "") -> NonlinearFunctional:
    return NonlinearFunctional(dimension, "custom", convex, fn=fn, label=label)


def extend_for_scaling(f: NonlinearFunctional, beta: float) -> NonlinearFunctional:
    """G_beta(a, b) = F(a) - beta b on R^(d+1); convex whenever F is.

    Linear and quadratic kinds stay closed under the extension, so the
    batched optimizer keeps its fast path.
    """
    d = f.dimension
    if f.kind == "linear":
        return linear_functional(np.append(f.coeffs, -beta), label=f"G_beta[{f.label}]")
    if f.kind == "quadratic":
        q = np.zeros((d + 1, d + 1))
        q[:d, :d] = f.quad
        return NonlinearFunctional(d + 1, "quadratic", f.convex,
                                   coeffs=np.append(f.coeffs, -beta), quad=q,
                                   label=f"G_beta[{f.label}]")
    return custom_functional(d + 1, lambda v: f(v[:d]) - beta * v[d], f.convex,
                             label=f"G_beta[{f.label}]")


@dataclass(frozen=True)
class PotentialVector:
    """Phi = (phi_1, ..., phi_d) on a common system."""

    components: tuple

    def __post_init__(self):
        if not self.components:
            raise ValueError("need at least one component")
        base = self.components[0].sft
        for p in self.components[1:]:
            if not p.sft.same_system(base):
                raise ValueError("components must share the system")

    @property
    def sft(self) -> Sft:
        return self.components[0].sft

    @property
    def dimension(self) -> int:
        return len(self.components)

    def appended(self, pot: LocallyConstantPotential) -> "PotentialVector":
        return PotentialVector(self.components + (pot,))


def _combined_linear(phi: PotentialVector, coeffs: np.ndarray) -> LocallyConstantPotential:
    comps = list(phi.components)
    if len({p.range for p in comps}) > 1:
        rec = common_range1(phi.sft, comps)
        comps = list(rec.potentials)
    return linear_combination(coeffs, comps, label="linear collapse")


# ---------------------------------------------------------------------------
# Direct and variational pressure
# ---------------------------------------------------------------------------

def nonlinear_direct(sft: Sft, phi: PotentialVector, f: NonlinearFunctional,
                     n: int, cap: int | None = None) -> PressureResult:
    """(1/n) log sum over (n+r-1)-words of exp[n F(S_n Phi / n)].

    Linear F routes through the classical cylinder estimator on the combined
    potential sum(c_i phi_i): the collapse n F(S/n) = S is applied
    symbolically, so the two computations are the same floats.
    """
    if f.dimension != phi.dimension:
        raise ValueError("functional dimension must match the potential vector")
    if f.kind == "linear":
        combined = _combined_linear(phi, f.coeffs)
        res = cylinder_pressure_estimate(combined.sft, combined, n, cap=cap)
        out = res.with_method("nonlinear_direct")
        out.meta["linear_collapse"] = True
        return out
    rec = common_range1(sft, list(phi.components))
    groups = grouped_sums(rec.sft, [p.table for p in rec.potentials], n, cap=cap)
    fvals = f.evaluate_batch(groups.sums / n)
    exponents = n * fvals
    terms = np.log(groups.counts.astype(float)) + exponents
    value = logsumexp_sorted(terms) / n
    overflow = bool(np.abs(exponents).max(initial=0.0) > OVERFLOW_EXPONENT)
    return PressureResult(value, "nonlinear_direct", n, 0.0,
                          {"n": n, "groups": int(len(terms)), "overflow": overflow})


@dataclass(frozen=True)
class VariationalResult:
    measure: MarkovMeasure
    value: float
    optimization: OptimizationResult


def nonlinear_variational(sft: Sft, phi: PotentialVector, f: NonlinearFunctional,
                          seed: int = 0, restarts: int = 20, max_iter: int = 2000,
                          allow_nonconvex: bool = False,
                          warm_starts: Sequence[np.ndarray] = ()) -> VariationalResult:
    """sup over Markov measures of h + F(int Phi), a lower bound for P^F.

    The search runs on the (possibly higher-block recoded) system, where the
    classical equilibria are order-1 Markov; for convex F the supremum over
    all invariant measures is attained there, so the bound is tight.
    Non-convex F requires allow_nonconvex=True (heuristic mode).
    """
    if not f.convex and not allow_nonconvex:
        raise NonConvexError("F is not convex; pass allow_nonconvex=True for heuristic mode")
    if f.dimension != phi.dimension:
        raise ValueError("functional dimension must match the potential vector")
    rec = common_range1(sft, list(phi.components))
    tables = np.stack([p.table for p in rec.potentials])
    objective = StructuredObjective(tables, functional=f, label="h + F(int Phi)")
    res = optimize_markov(rec.sft, objective, seed=seed, restarts=restarts,
                          max_iter=max_iter, warm_starts=warm_starts)
    return VariationalResult(res.measure, res.value, res)


def g_beta_pressure(sft: Sft, phi: PotentialVector, psi: LocallyConstantPotential,
                    f: NonlinearFunctional, beta: float, method: str = "variational",
                    n: int | None = None, seed: int = 0, restarts: int = 20,
                    max_iter: int = 2000, allow_nonconvex: bool = False,
                    warm_starts: Sequence[np.ndarray] = (),
                    cap: int | None = None) -> PressureResult:
    """P^{G_beta}(Psi) for Psi = (Phi, psi), G_beta(a, b) = F(a) - beta b."""
    if psi.min() <= 0:
        raise NonPositiveScalingError("psi must be strictly positive")
    psi_vec = phi.appended(psi)
    g = extend_for_scaling(f, beta)
    if method == "direct":
        if n is None:
            raise ValueError("direct method needs n")
        res = nonlinear_direct(sft, psi_vec, g, n, cap=cap)
        res.meta["beta"] = beta
        return res
    if method != "variational":
        raise ValueError(f"unknown method {method!r}")
    var = nonlinear_variational(sft, psi_vec, g, seed=seed, restarts=restarts,
                                max_iter=max_iter, allow_nonconvex=allow_nonconvex,
                                warm_starts=warm_starts)
    return PressureResult(var.value, "variational", var.optimization.iterations,
                          var.optimization.residual,
                          {"beta": beta, "best_params": var.optimization.best_params})


# ---------------------------------------------------------------------------
# Nonlinear induced pressure
# ---------------------------------------------------------------------------

def nonlinear_induced_root(sft: Sft, phi: PotentialVector,
                           psi: LocallyConstantPotential, f: NonlinearFunctional,
                           seed: int = 0, ptol: float = 1e-6,
                           allow_nonconvex: bool = False, hull_n: int = 8,
                           restarts: int = 20, max_iter: int = 2000) -> PressureResult:
    """P_psi^F(Phi) = inf{beta : P^{G_beta}(Psi) <= 0} by bisection.

    The bracket uses F over the finite set of per-word Birkhoff averages at
    n = hull_n (a heuristic stand-in for the convex hull, widened by 1 and
    expanded geometrically if the signs disagree).  Interior bisection
    evaluations reuse the previous maximizer as a warm start with a reduced
    restart budget; the final value is re-evaluated at full budget and its
    residual |P^{G_beta*}| reported.
    """
    if psi.min() <= 0:
        raise NonPositiveScalingError("psi must be strictly positive")
    if not sft.irreducible:
        raise NotIrreducibleError("nonlinear_induced_root needs an irreducible system")
    if not f.convex and not allow_nonconvex:
        raise NonConvexError("F is not convex; pass allow_nonconvex=True for heuristic mode")

    rec = common_range1(sft, list(phi.components) + [psi])
    comp1 = PotentialVector(rec.potentials[:-1])
    psi1 = rec.potentials[-1]
    hull = grouped_sums(rec.sft, [p.table for p in comp1.components], hull_n)
    fvals = f.evaluate_batch(hull.sums / hull_n)
    m, big_m = psi.min(), psi.max()
    lo = float(fvals.min()) / big_m - 1.0
    hi = (math.log(sft.alphabet_size) + float(fvals.max())) / m + 1.0

    warm: list[np.ndarray] = []
    evals = [0]

    def pval(beta: float, full: bool) -> float:
        evals[0] += 1
        res = g_beta_pressure(rec.sft, comp1, psi1, f, beta, method="variational",
                              seed=seed, restarts=restarts if full else 2,
                              max_iter=max_iter if full else 800,
                              allow_nonconvex=allow_nonconvex,
                              warm_starts=tuple(warm))
        params = res.meta.get("best_params")
        if params is not None and params.size:
            warm.clear()
            warm.append(params)
        return res.value

    step = 1.0
    for _ in range(60):
        if pval(lo, True) >= 0:
            break
        lo -= step
        step *= 2.0
    else:
        raise BracketFailureError("no lower bracket for G_beta root")
    step = 1.0
    for _ in range(60):
        if pval(hi, True) <= 0:
            break
        hi += step
        step *= 2.0
    else:
        raise BracketFailureError("no upper bracket for G_beta root")

    bracket = (lo, hi)
    width = 1e-9 * max(1.0, abs(lo), abs(hi))
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if pval(mid, False) >= 0:
            lo = mid
        else:
            hi = mid
    beta_star = 0.5 * (lo + hi)
    residual = abs(pval(beta_star, True))
    if residual > ptol:
        raise BracketFailureError(
            f"|P^G_beta| = {residual:.3e} > {ptol} at the bisection root")
    meta = {"bracket": bracket, "g_beta_evaluations": evals[0]}
    if not f.convex:
        meta["warning"] = ("non-convex F: root hypotheses of the beta "
                           "characterization fail; value is heuristic")
    return PressureResult(beta_star, "root", evals[0], residual, meta)


def nonlinear_induced_direct(sft: Sft, phi: PotentialVector,
                             psi: LocallyConstantPotential, f: NonlinearFunctional,
                             T: float, q: int, cap: int | None = None) -> PressureResult:
    """(1/T) log of the definitional nonlinear sum over cylinders of X_n.

    Linear F collapses definitionally to the classical induced estimator on
    the combined potential, and is routed there (same floats).
    """
    if psi.min() <= 0:
        raise NonPositiveScalingError("psi must be strictly positive")
    if f.kind == "linear":
        combined = _combined_linear(phi, f.coeffs)
        if not combined.sft.same_system(sft):
            # components got recoded to a common range; recode psi alongside
            rec = common_range1(sft, list(phi.components) + [psi])
            combined = linear_combination(f.coeffs, rec.potentials[:-1])
            problem = InducedProblem(rec.sft, combined, rec.potentials[-1])
        else:
            problem = InducedProblem(sft, combined, psi)
        res = direct_induced_estimate(problem, T, q, cap=cap)
        out = res.with_method("direct_induced")
        out.meta["linear_collapse"] = True
        return out
    max_range = max([p.range for p in phi.components] + [psi.range])
    if q < max_range:
        raise ValueError(f"q={q} must be >= max potential range {max_range}")
    rec = common_range1(sft, list(phi.components) + [psi])
    d = phi.dimension

    def weight(groups, n):
        return n * f.evaluate_batch(groups.sums[:, :d] / n)

    terms = list(iter_induced_terms(rec, psi_index=d, T=T, q=q,
                                    logweight=weight, cap=cap))
    all_terms = np.concatenate(terms) if terms else np.zeros(0)
    value = logsumexp_sorted(all_terms) / T
    return PressureResult(value, "direct_induced", max(1, math.ceil(T / psi.min())), 0.0,
                          {"T": T, "q": q, "cylinders": int(sum(len(t) for t in terms))})


# ---------------------------------------------------------------------------
# R-threshold scan (finiteness characterization)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RThresholdScan:
    betas: np.ndarray
    log_increments: np.ndarray  # (len(betas), n_max)
    classifications: tuple      # 'growing' | 'decaying' per beta
    threshold: float | None

    def classification(self, i: int) -> str:
        return self.classifications[i]


def r_threshold_scan(sft: Sft, phi: PotentialVector, psi: LocallyConstantPotential,
                     f: NonlinearFunctional, beta_grid: Sequence[float], n_max: int,
                     cap: int | None = None) -> RThresholdScan:
    """Empirical finiteness threshold of the series behind the R criterion.

    The n-th increment sums exp[n F(S_n Phi / n) - beta S_n psi] over the
    depth-(n + r - 1) cylinders (the sets Y_n = {S_n psi > T} are realized
    by cylinders; every cylinder qualifies once n exceeds T / min psi, so
    the tail ratio of the increments decides finiteness).  Each beta is
    classified by the ratio of the last two increments; the reported
    threshold is the midpoint between the last growing and first decaying
    grid point.
    """
    if n_max > 24:
        raise ValueError("n_max capped at 24")
    if psi.min() <= 0:
        raise NonPositiveScalingError("psi must be strictly positive")
    betas = np.asarray(list(beta_grid), dtype=float)
    if len(betas) < 2 or (np.diff(betas) <= 0).any():
        raise ValueError("beta_grid must be sorted and have at least 2 points")
    rec = common_range1(sft, list(phi.components) + [psi])
    d = phi.dimension
    per_n = []
    for groups in iter_grouped_sums(rec.sft, [p.table for p in rec.potentials],
                                    n_max, cap=cap):
        n = groups.length
        base = n * f.evaluate_batch(groups.sums[:, :d] / n) \
            + np.log(groups.counts.astype(float))
        per_n.append((n, base, groups.sums[:, d].copy()))

    log_inc = np.empty((len(betas), n_max))
    for bi, beta in enumerate(betas):
        for n, base, spsi in per_n:
            log_inc[bi, n - 1] = logsumexp_sorted(base - beta * spsi)
    classes = tuple("growing" if log_inc[bi, -1] > log_inc[bi, -2] else "decaying"
                    for bi in range(len(betas)))
    threshold = None
    growing = [i for i, c in enumerate(classes) if c == "growing"]
    decaying = [i for i, c in enumerate(classes) if c == "decaying"]
    if growing and decaying and max(growing) < min(decaying):
        threshold = 0.5 * (betas[max(growing)] + betas[min(decaying)])
    return RThresholdScan(betas, log_inc, classes, threshold)


# ---------------------------------------------------------------------------
# Conjugacy invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConjugacyCase:
    name: str
    original: float
    transformed: float
    tolerance: float

    @property
    def difference(self) -> float:
        return abs(self.original - self.transformed)

    @property
    def passed(self) -> bool:
        return self.difference <= self.tolerance


@dataclass(frozen=True)
class ConjugacyReport:
    cases: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)


def conjugacy_invariance_check(sft: Sft, phi: PotentialVector,
                               psi: LocallyConstantPotential, f: NonlinearFunctional,
                               seed: int = 0, n: int = 8,
                               perm_tol: float = 1e-9, recode_tol: float = 1e-6,
                               root_seed: int = 0) -> ConjugacyReport:
    """Compare pressures before/after symbol permutation and 2-block recode.

    Permutation compares both the finite-n direct estimator and the induced
    root.  Recoding compares the root only: the finite-n direct estimator is
    a different cylinder family under recoding (O(1/n) window effects), so
    only limit quantities transport exactly.
    """
    rng = np.random.default_rng(seed)
    k = sft.alphabet_size
    perm = rng.permutation(k)
    if k > 1 and (perm == np.arange(k)).all():
        perm = np.roll(perm, 1)
    pots = list(phi.components) + [psi]
    sft_p, pots_p = permute_symbols(sft, pots, perm)
    phi_p = PotentialVector(tuple(pots_p[:-1]))
    psi_p = pots_p[-1]

    cases = []
    d0 = nonlinear_direct(sft, phi, f, n).value
    dp = nonlinear_direct(sft_p, phi_p, f, n).value
    cases.append(ConjugacyCase("permutation nonlinear_direct", d0, dp, perm_tol))
    r0 = nonlinear_induced_root(sft, phi, psi, f, seed=root_seed).value
    rp = nonlinear_induced_root(sft_p, phi_p, psi_p, f, seed=root_seed).value
    cases.append(ConjugacyCase("permutation nonlinear_induced_root", r0, rp, perm_tol))

    rec = higher_block_recode(sft, pots, 2)
    phi_r = PotentialVector(tuple(rec.potentials[:-1]))
    psi_r = rec.potentials[-1]
    rr = nonlinear_induced_root(rec.sft, phi_r, psi_r, f, seed=root_seed).value
    cases.append(ConjugacyCase("2-block recode nonlinear_induced_root", r0, rr, recode_tol))
    return ConjugacyReport(tuple(cases))
