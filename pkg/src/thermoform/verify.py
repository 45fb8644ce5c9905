"""Cross-module verification suite.

Each check exercises one invariant from the library's contracts on the
standard fixtures (FULL2, GOLDEN, CYCLE2) with seeded draws, and returns a
pass/fail row.  The CLI `verify` command runs everything and exits nonzero
on any failure; the tolerances are centrally defaulted here and can be
overridden per run (setting one to 0 is the documented way to fault-inject
and confirm the harness actually fails).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .freezing import beta_sweep, detect_freezing, h_infinity, max_cycle_ratio, \
    zero_temperature_limit
from .induced import InducedProblem, bowen_root, direct_induced_estimate, \
    directional_derivatives, induced_equilibrium, induced_property_suite
from .measures import StructuredObjective, entropy, integrate_potential, \
    optimize_markov, random_markov_measure
from .nonlinear import PotentialVector, linear_functional, nonlinear_direct, \
    nonlinear_variational, quadratic_functional
from .pressure import cylinder_pressure_estimate, rpf_equilibrium, spectral_pressure
from .sft import CYCLE2, FULL2, GOLDEN, Sft, constant_potential, count_words, \
    cylinder_birkhoff, enumerate_simple_cycles, enumerate_words, higher_block_recode, \
    linear_combination, periodic_birkhoff, permute_symbols, range1_potential
from .measures import cycle_measure


@dataclass(frozen=True)
class Tolerances:
    """Central tolerance table; every acceptance-facing bound lives here."""

    recode_agreement: float = 1e-9
    permutation_agreement: float = 1e-12
    gibbs_identity: float = 1e-8
    integrate_monotone: float = 1e-12
    optimizer_upper: float = 1e-6
    cycle_ratio_identity: float = 1e-12
    pressure_inequality: float = 1e-9
    root_consistency: float = 1e-10
    variational_below: float = 1e-4
    variational_above: float = 1e-6
    quotient_slack: float = 1e-6
    property_equality: float = 1e-8
    property_inequality: float = 1e-9
    linear_collapse: float = 0.0
    g_beta_monotone: float = 1e-8
    hull_bound: float = 1e-9
    karp_vs_brute: float = 1e-9
    sweep_convexity: float = 1e-8
    gap_nonnegative: float = 1e-7
    freezing_ratio: float = 1e-7
    zero_temp_floor: float = 1e-6

    def overridden(self, overrides: dict) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown tolerance names: {sorted(bad)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r.passed]


def _fixture_problems():
    return (
        ("FULL2", FULL2, range1_potential(FULL2, [1.0, 0.0]),
         range1_potential(FULL2, [1.0, 2.0])),
        ("GOLDEN", GOLDEN, range1_potential(GOLDEN, [0.5, -0.25]),
         range1_potential(GOLDEN, [1.0, 2.0])),
        ("CYCLE2", CYCLE2, range1_potential(CYCLE2, [2.0, 0.0]),
         range1_potential(CYCLE2, [1.0, 3.0])),
    )


def run_verification(seed: int = 0, tolerances: Tolerances | None = None,
                     draws: int = 20) -> VerificationReport:
    tol = tolerances or Tolerances()
    rows: list[CheckResult] = []
    rng = np.random.default_rng(seed)
    for check in (_check_word_counts, _check_telescoping, _check_recode_pressure,
                  _check_permutation_pressure, _check_gibbs_identity,
                  _check_integrate_monotone, _check_optimizer_upper,
                  _check_cycle_ratio_identity, _check_spectral_vs_cylinder,
                  _check_pressure_monotone_convex, _check_variational_lower,
                  _check_root_consistency, _check_direct_envelope,
                  _check_variational_agreement, _check_quotients,
                  _check_finiteness, _check_property_suites,
                  _check_linear_collapse, _check_g_beta_monotone,
                  _check_root_sandwich, _check_hull_bound,
                  _check_karp_vs_brute, _check_sweep_shape,
                  _check_freezing_crosscheck, _check_zero_temp):
        rows.extend(check(rng, tol, draws))
    return VerificationReport(tuple(rows))


# -- sft_core ---------------------------------------------------------------

def _check_word_counts(rng, tol, draws):
    rows = []
    for name, sft, _, _ in _fixture_problems():
        ok = all(len(enumerate_words(sft, n)) == count_words(sft, n)
                 for n in range(1, 13))
        rows.append(CheckResult(f"sft.word_count_formula[{name}]", ok,
                                "enumerate matches 1^T A^(n-1) 1 for n<=12"))
    return rows


def _check_telescoping(rng, tol, draws):
    rows = []
    for name, sft, phi, _ in _fixture_problems():
        worst = 0.0
        for _ in range(25):
            n = int(rng.integers(2, 9))
            word = _random_word(rng, sft, n + phi.range)
            lhs = cylinder_birkhoff(phi, word, n + 1)
            rhs = cylinder_birkhoff(phi, word[:-1], n) + phi.value(word[-phi.range:])
            worst = max(worst, abs(lhs - rhs))
        rows.append(CheckResult(f"sft.birkhoff_telescoping[{name}]",
                                worst <= 1e-12, f"worst |diff| = {worst:.2e}"))
    return rows


def _random_word(rng, sft: Sft, length: int):
    while True:
        s = int(rng.integers(0, sft.alphabet_size))
        word = [s]
        for _ in range(length - 1):
            succ = sft.successors(word[-1])
            word.append(int(succ[rng.integers(0, len(succ))]))
        return tuple(word)


def _check_recode_pressure(rng, tol, draws):
    rows = []
    for name, sft, _, _ in _fixture_problems():
        worst = 0.0
        for _ in range(draws):
            phi = range1_potential(sft, rng.uniform(-1, 1, sft.alphabet_size))
            p0 = spectral_pressure(sft, phi).value
            rec = higher_block_recode(sft, [phi], 2)
            p1 = spectral_pressure(rec.sft, rec.potentials[0]).value
            worst = max(worst, abs(p0 - p1))
        rows.append(CheckResult(f"sft.recode_pressure[{name}]",
                                worst <= tol.recode_agreement,
                                f"worst recode drift = {worst:.2e}"))
    return rows


def _check_permutation_pressure(rng, tol, draws):
    rows = []
    for name, sft, phi, _ in _fixture_problems():
        perm = [1, 0]
        sft_p, (phi_p,) = permute_symbols(sft, [phi], perm)
        diff = abs(spectral_pressure(sft, phi).value
                   - spectral_pressure(sft_p, phi_p).value)
        rows.append(CheckResult(f"sft.permutation_pressure[{name}]",
                                diff <= tol.permutation_agreement,
                                f"|diff| = {diff:.2e}"))
    return rows


# -- markov_measures ----------------------------------------------------------

def _check_gibbs_identity(rng, tol, draws):
    rows = []
    for name, sft, phi, _ in _fixture_problems():
        mu = rpf_equilibrium(sft, phi)
        lhs = entropy(mu) + integrate_potential(mu, phi)
        rhs = spectral_pressure(sft, phi).value
        diff = abs(lhs - rhs)
        rows.append(CheckResult(f"measures.gibbs_identity[{name}]",
                                diff <= tol.gibbs_identity, f"|h+int-P| = {diff:.2e}"))
    return rows


def _check_integrate_monotone(rng, tol, draws):
    rows = []
    for name, sft, _, _ in _fixture_problems():
        worst = 0.0
        for _ in range(draws):
            mu = random_markov_measure(sft, rng)
            lo = rng.uniform(-1, 1, sft.alphabet_size)
            hi = lo + rng.uniform(0, 1, sft.alphabet_size)
            worst = max(worst, integrate_potential(mu, range1_potential(sft, lo))
                        - integrate_potential(mu, range1_potential(sft, hi)))
        rows.append(CheckResult(f"measures.integrate_monotone[{name}]",
                                worst <= tol.integrate_monotone,
                                f"worst violation = {worst:.2e}"))
    return rows


def _check_optimizer_upper(rng, tol, draws):
    rows = []
    for name, sft, phi, _ in _fixture_problems():
        obj = StructuredObjective(phi.table[None, :])
        res = optimize_markov(sft, obj, seed=1, restarts=8, max_iter=800)
        bound = spectral_pressure(sft, phi).value
        excess = res.value - bound
        rows.append(CheckResult(f"measures.optimizer_upper_bound[{name}]",
                                excess <= tol.optimizer_upper,
                                f"value - pressure = {excess:.2e}"))
    return rows


def _check_cycle_ratio_identity(rng, tol, draws):
    rows = []
    for name, sft, phi, psi in _fixture_problems():
        worst = 0.0
        for cyc in enumerate_simple_cycles(sft, sft.alphabet_size):
            mu = cycle_measure(sft, cyc)
            lhs = integrate_potential(mu, phi) / integrate_potential(mu, psi)
            rhs = periodic_birkhoff(phi, cyc) / periodic_birkhoff(psi, cyc)
            worst = max(worst, abs(lhs - rhs))
        rows.append(CheckResult(f"measures.cycle_ratio_identity[{name}]",
                                worst <= tol.cycle_ratio_identity,
                                f"worst |diff| = {worst:.2e}"))
    return rows


# -- classical_pressure -------------------------------------------------------

def _check_spectral_vs_cylinder(rng, tol, draws):
    rows = []
    for name, sft, phi, _ in _fixture_problems():
        exact = spectral_pressure(sft, phi).value
        errs = [abs(cylinder_pressure_estimate(sft, phi, n).value - exact)
                for n in (4, 8, 16)]
        ok = errs[0] + 1e-15 >= errs[1] >= errs[2] - 1e-15
        c_fit = max(e * n for e, n in zip(errs, (4, 8, 16)))
        rows.append(CheckResult(f"classical.cylinder_error_decreasing[{name}]", ok,
                                f"errors at n=4,8,16: {errs[0]:.2e}, {errs[1]:.2e}, "
                                f"{errs[2]:.2e}; fitted C = {c_fit:.2f}"))
    return rows


def _check_pressure_monotone_convex(rng, tol, draws):
    rows = []
    for name, sft, _, _ in _fixture_problems():
        worst_mono, worst_conv = 0.0, 0.0
        for _ in range(10):
            a = rng.uniform(-1, 1, sft.alphabet_size)
            b = a + rng.uniform(0, 1, sft.alphabet_size)
            pa = spectral_pressure(sft, range1_potential(sft, a)).value
            pb = spectral_pressure(sft, range1_potential(sft, b)).value
            worst_mono = max(worst_mono, pa - pb)
            c = rng.uniform(-1, 1, sft.alphabet_size)
            t = float(rng.uniform(0, 1))
            pm = spectral_pressure(sft, range1_potential(sft, t * a + (1 - t) * c)).value
            pc = spectral_pressure(sft, range1_potential(sft, c)).value
            worst_conv = max(worst_conv, pm - (t * pa + (1 - t) * pc))
        ok = worst_mono <= tol.pressure_inequality and worst_conv <= tol.pressure_inequality
        rows.append(CheckResult(f"classical.monotone_convex[{name}]", ok,
                                f"monotone viol {worst_mono:.2e}, convex viol {worst_conv:.2e}"))
    return rows


def _check_variational_lower(rng, tol, draws):
    rows = []
    for name, sft, phi, _ in _fixture_problems():
        bound = spectral_pressure(sft, phi).value
        worst = 0.0
        for _ in range(50):
            mu = random_markov_measure(sft, rng)
            worst = max(worst, entropy(mu) + integrate_potential(mu, phi) - bound)
        rows.append(CheckResult(f"classical.variational_lower_bound[{name}]",
                                worst <= tol.pressure_inequality,
                                f"worst h+int-P = {worst:.2e}"))
    return rows


# -- induced_pressure ---------------------------------------------------------

def _check_root_consistency(rng, tol, draws):
    rows = []
    for name, sft, phi, psi in _fixture_problems():
        problem = InducedProblem(sft, phi, psi)
        beta = bowen_root(problem, fast_path=False).value
        residual = abs(spectral_pressure(
            sft, linear_combination([1.0, -beta], [phi, psi])).value)
        rows.append(CheckResult(f"induced.root_consistency[{name}]",
                                residual <= tol.root_consistency,
                                f"|P_top(phi - beta psi)| = {residual:.2e}"))
    return rows


def _check_direct_envelope(rng, tol, draws):
    name, sft, phi, psi = _fixture_problems()[0]
    problem = InducedProblem(sft, phi, psi)
    root = bowen_root(problem).value
    diffs = [abs(direct_induced_estimate(problem, t, 1).value - root)
             for t in (8, 12, 16, 20, 24)]
    ok = diffs[0] == max(diffs) and diffs[-1] == min(diffs)
    return [CheckResult("induced.direct_envelope[FULL2]", ok,
                        "|direct - root| at T=8..24: "
                        + ", ".join(f"{d:.3f}" for d in diffs))]


def _check_variational_agreement(rng, tol, draws):
    rows = []
    for name, sft, phi, psi in _fixture_problems():
        root = bowen_root(InducedProblem(sft, phi, psi)).value
        obj = StructuredObjective(phi.table[None, :], denominator=psi.table)
        res = optimize_markov(sft, obj, seed=0, restarts=20, max_iter=2000)
        ok = root - tol.variational_below <= res.value <= root + tol.variational_above
        rows.append(CheckResult(f"induced.variational_agreement[{name}]", ok,
                                f"ratio sup {res.value:.10f} vs root {root:.10f}"))
    return rows


def _check_quotients(rng, tol, draws):
    rows = []
    name, sft, phi, psi = _fixture_problems()[0]
    problem = InducedProblem(sft, phi, psi)
    for label, g in (("random", range1_potential(sft, rng.uniform(-1, 1, 2))),
                     ("psi", psi)):
        dd = directional_derivatives(problem, g)
        rights = [r for (_, r, _) in dd.table]
        mono = all(rights[i + 1] <= rights[i] + tol.quotient_slack
                   for i in range(len(rights) - 1))
        ok = dd.d_minus <= dd.d_plus + tol.quotient_slack and mono
        rows.append(CheckResult(f"induced.quotients[{label}]", ok,
                                f"d- = {dd.d_minus:.8f} <= d+ = {dd.d_plus:.8f}"))
    return rows


def _check_finiteness(rng, tol, draws):
    rows = []
    for name, sft, phi, psi in _fixture_problems():
        beta = bowen_root(InducedProblem(sft, phi, psi)).value
        rows.append(CheckResult(f"induced.finiteness[{name}]",
                                math.isfinite(beta), f"root = {beta:.6f}"))
    return rows


def _check_property_suites(rng, tol, draws):
    rows = []
    for name, sft, phi, psi in _fixture_problems():
        rep = induced_property_suite(InducedProblem(sft, phi, psi), seed=11,
                                     draws=draws, tol_eq=tol.property_equality,
                                     tol_ineq=tol.property_inequality)
        fails = rep.failures()
        rows.append(CheckResult(f"induced.property_suite[{name}]", rep.passed,
                                f"{len(rep.rows)} cases, {len(fails)} failures"))
    return rows


# -- nonlinear_pressure -------------------------------------------------------

def _check_linear_collapse(rng, tol, draws):
    rows = []
    for name, sft, phi, psi in _fixture_problems():
        vec = PotentialVector((phi, psi))
        coeffs = [0.7, -0.3]
        direct = nonlinear_direct(sft, vec, linear_functional(coeffs), 10).value
        classic = cylinder_pressure_estimate(
            sft, linear_combination(coeffs, [phi, psi]), 10).value
        diff = abs(direct - classic)
        rows.append(CheckResult(f"nonlinear.linear_collapse[{name}]",
                                diff <= tol.linear_collapse,
                                f"bitwise diff = {diff!r}"))
    return rows


def _check_g_beta_monotone(rng, tol, draws):
    from .nonlinear import g_beta_pressure

    rows = []
    for name, sft, phi, psi in _fixture_problems():
        vec = PotentialVector((phi,))
        f = quadratic_functional([[0.5]])
        m = psi.min()
        b1, b2 = 0.2, 0.9
        p1 = g_beta_pressure(sft, vec, psi, f, b1, seed=2, restarts=8, max_iter=800).value
        p2 = g_beta_pressure(sft, vec, psi, f, b2, seed=2, restarts=8, max_iter=800).value
        ok = p1 > p2 + m * (b2 - b1) - tol.g_beta_monotone
        rows.append(CheckResult(f"nonlinear.g_beta_strict_decrease[{name}]", ok,
                                f"P(b1) - P(b2) = {p1 - p2:.6f} >= m db = {m * (b2 - b1):.6f}"))
    return rows


def _check_root_sandwich(rng, tol, draws):
    from .nonlinear import nonlinear_induced_root

    rows = []
    for name, sft, phi, psi in _fixture_problems():
        vec = PotentialVector((phi,))
        f = quadratic_functional([[0.5]])
        root = nonlinear_induced_root(sft, vec, psi, f, seed=0).value
        obj = StructuredObjective(phi.table[None, :], functional=f,
                                  denominator=psi.table)
        ratio = optimize_markov(sft, obj, seed=0, restarts=20, max_iter=2000).value
        ok = root - tol.variational_below <= ratio <= root + tol.variational_above
        rows.append(CheckResult(f"nonlinear.root_sandwich[{name}]", ok,
                                f"ratio sup {ratio:.8f} vs root {root:.8f}"))
    return rows


def _check_hull_bound(rng, tol, draws):
    from .sft import grouped_sums

    rows = []
    for name, sft, phi, _ in _fixture_problems():
        vec = PotentialVector((phi,))
        f = quadratic_functional([[1.0]])
        htop = spectral_pressure(sft, constant_potential(sft, 0.0)).value
        groups = grouped_sums(sft, [phi.table], 8)
        fvals = f.evaluate_batch(groups.sums / 8)
        value = nonlinear_variational(sft, vec, f, seed=3, restarts=8).value
        lo = htop + float(fvals.min()) - tol.hull_bound
        hi = htop + float(fvals.max()) + tol.hull_bound
        ok = lo <= value <= hi
        rows.append(CheckResult(f"nonlinear.hull_bound[{name}]", ok,
                                f"{lo:.4f} <= P^F {value:.4f} <= {hi:.4f}"))
    return rows


# -- freezing -----------------------------------------------------------------

def _check_karp_vs_brute(rng, tol, draws):
    rows = []
    for name, sft, _, _ in _fixture_problems():
        worst = 0.0
        cycles = enumerate_simple_cycles(sft, sft.alphabet_size)
        for _ in range(50):
            phi = range1_potential(sft, rng.uniform(-2, 2, sft.alphabet_size))
            psi = range1_potential(sft, rng.uniform(0.2, 2.0, sft.alphabet_size))
            rr = max_cycle_ratio(sft, phi, psi)
            brute = max(periodic_birkhoff(phi, c) / periodic_birkhoff(psi, c)
                        for c in cycles)
            worst = max(worst, abs(rr.value - brute))
        rows.append(CheckResult(f"freezing.karp_vs_brute[{name}]",
                                worst <= tol.karp_vs_brute,
                                f"worst |diff| over 50 draws = {worst:.2e}"))
    return rows


def _check_sweep_shape(rng, tol, draws):
    rows = []
    grid = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
    for name, sft, phi, psi in _fixture_problems():
        sweep = beta_sweep(sft, phi, psi, grid)
        second = np.diff(sweep.pressures, 2)
        convex_ok = bool((second >= -tol.sweep_convexity).all())
        gaps_ok = bool((sweep.gaps >= -tol.gap_nonnegative).all())
        ratio_ok = bool((np.diff(sweep.ratios) >= -1e-8).all())
        ok = convex_ok and gaps_ok and ratio_ok
        rows.append(CheckResult(f"freezing.sweep_shape[{name}]", ok,
                                f"min 2nd diff {second.min():.2e}, min gap "
                                f"{sweep.gaps.min():.2e}"))
    return rows


def _check_freezing_crosscheck(rng, tol, draws):
    rows = []
    grid = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
    for name, sft, phi, psi in (("const", FULL2, constant_potential(FULL2, 0.7),
                                 constant_potential(FULL2, 1.0)),
                                ("CYCLE2", CYCLE2, range1_potential(CYCLE2, [2.0, 0.0]),
                                 range1_potential(CYCLE2, [1.0, 3.0]))):
        sweep = beta_sweep(sft, phi, psi, grid)
        verdict = detect_freezing(sweep)
        ok = verdict.kind == "frozen_at" and verdict.beta0 == grid[0]
        if ok and verdict.beta0 <= 1.0:
            mu = induced_equilibrium(InducedProblem(sft, phi, psi))
            ratio = integrate_potential(mu, phi) / integrate_potential(mu, psi)
            rr = max_cycle_ratio(sft, phi, psi)
            ok = abs(ratio - rr.value) <= tol.freezing_ratio
        rows.append(CheckResult(f"freezing.equivalence[{name}]", ok,
                                f"verdict {verdict.kind}@{verdict.beta0}"))
    return rows


def _check_zero_temp(rng, tol, draws):
    name, sft, phi, psi = _fixture_problems()[0]
    zt = zero_temperature_limit(sft, phi, psi)
    c = zt.decay_constant
    bound = max(tol.zero_temp_floor, c / zt.betas[-1])
    ok = zt.ratio_gaps[-1] <= bound
    return [CheckResult("freezing.zero_temp_corollary[FULL2]", ok,
                        f"final |ratio - Max| = {zt.ratio_gaps[-1]:.2e} <= "
                        f"max({tol.zero_temp_floor}, C/beta) with C = {c:.3f}")]
