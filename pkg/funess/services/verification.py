"""Verification suite: closed-form identities, oracle agreements and Monte Carlo law checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import pandas as pd

from funess.features import framework, kernels, statistics
from funess.features.matrix import ColumnStochasticMatrix
from funess.features.params import FunessParams, WalkParams
from funess.montecarlo import estimators
from funess.montecarlo.trajectory import Ensemble, sample_ensemble
from funess.randomwalk import lattice, walk

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-12
ORACLE_TOL = 1e-10
MASTER_TOL = 1e-8
LATTICE_RTOL = 1e-6
MEAN_ODE_RTOL = 1e-5
SIGMAS = 4.0
CMI_FLOOR = 0.01


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    skipped: bool = False
    detail: str = ""


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if not check.skipped)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.skipped and not check.passed]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "check": c.name,
                    "passed": c.passed,
                    "skipped": c.skipped,
                    "residual": c.residual,
                    "tolerance": c.tolerance,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
            columns=["check", "passed", "skipped", "residual", "tolerance", "detail"],
        )


def _max_z(estimate: np.ndarray, target: np.ndarray, stderr: np.ndarray) -> float:
    """Largest |estimate - target| / stderr; exact agreement counts as 0 when stderr is 0."""
    gap = np.abs(np.asarray(estimate) - np.asarray(target))
    stderr = np.asarray(stderr)
    z = np.where(stderr > 0, gap / np.where(stderr > 0, stderr, 1.0), np.where(gap <= IDENTITY_TOL, 0.0, np.inf))
    return float(np.max(z))


def _has_empty_state(s: float, p: FunessParams) -> bool:
    """True when some state has zero marginal probability at time s, so Lambda(t|s) has no Bayes weights."""
    return bool(np.any(kernels.lambda_initial(s - p.t0, p) @ p.q <= 0.0))


def faulty_kernel_family(p: FunessParams) -> framework.KernelFamily:
    """Kernels relaxing as exp(-alpha (t - s)^2): stochastic, identity at t = s, but not composable."""

    def kernel(l: int, t: float, s: float) -> ColumnStochasticMatrix:
        e = math.exp(-p.alpha * (t - s) ** 2)
        a, b = kernels.stationary_column(l, p)
        return ColumnStochasticMatrix(np.array([[a + b * e, a * (1.0 - e)], [b * (1.0 - e), b + a * e]]))

    return kernel


def random_params(rng: np.random.Generator) -> FunessParams:
    """Draw a parameter set uniformly over the admissible region k + r >= 1."""
    k = rng.uniform(0.0, 1.0)
    return FunessParams(
        k=k,
        r=rng.uniform(1.0 - k, 1.0),
        alpha=rng.uniform(0.1, 5.0),
        q1=rng.uniform(0.0, 1.0),
        t0=rng.uniform(-1.0, 1.0),
    )


class VerificationService:
    """Run every check for one parameter set and collect a :class:`VerificationReport`."""

    def __init__(
        self,
        params: FunessParams,
        lam: float = 1.0,
        seed: int = 0,
        n_trajectories: int = 20_000,
        workers: int = 1,
        quick: bool = False,
        inject_fault: bool = False,
        randomized_cases: int = 1000,
    ) -> None:
        self.params = params
        self.walk = WalkParams(base=params.replace(x1=1.0, x2=0.0, q1=1.0), lam=lam)
        self.seed = seed
        self.n_trajectories = n_trajectories
        self.workers = workers
        self.quick = quick
        self.inject_fault = inject_fault
        self.randomized_cases = randomized_cases
        self._ensemble: Optional[Ensemble] = None

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def run(self) -> VerificationReport:
        closed_form: List[Callable[[], CheckResult]] = [
            self.check_stochasticity,
            self.check_p_divisibility,
            self.check_composition,
            self.check_marginalization,
            self.check_markov_consistency,
            self.check_non_divisibility,
            self.check_master_equation,
            self.check_correlation_decay,
            self.check_cmi_oracle,
            self.check_markov_cmi,
            self.check_entropy_difference,
            self.check_walk_lattice,
            self.check_walk_mean_ode,
            self.check_transport_gap,
        ]
        monte_carlo: List[Callable[[], CheckResult]] = [
            self.check_mc_marginal_law,
            self.check_mc_conditioned_chain,
            self.check_mc_intermediate,
            self.check_mc_correlation,
            self.check_mc_cmi,
            self.check_mc_ergodicity,
            self.check_mc_walk_moments,
        ]
        report = VerificationReport()
        for check in closed_form:
            report.checks.append(self._guarded(check))
        for check in monte_carlo:
            if self.quick:
                report.checks.append(CheckResult(_check_name(check), True, 0.0, 0.0, skipped=True, detail="quick"))
            else:
                report.checks.append(self._guarded(check))
        logger.info(
            "Verification finished: %d checks, %d failed, %d skipped",
            len(report.checks),
            len(report.failures),
            sum(c.skipped for c in report.checks),
        )
        return report

    def _guarded(self, check: Callable[[], CheckResult]) -> CheckResult:
        try:
            result = check()
        except Exception as exc:  # a raising check is a failing check
            logger.exception("Check %s raised", _check_name(check))
            return CheckResult(_check_name(check), False, math.inf, 0.0, detail=f"{type(exc).__name__}: {exc}")
        level = logging.DEBUG if result.passed else logging.WARNING
        logger.log(level, "%s: residual=%.3e tolerance=%.3e", result.name, result.residual, result.tolerance)
        return result

    # closed-form identities

    def check_stochasticity(self) -> CheckResult:
        rng = self._rng()
        worst = 0.0
        for _ in range(self.randomized_cases // 10):
            p = random_params(rng)
            s = p.t0 + rng.uniform(0.0, 2.0)
            t = s + rng.uniform(0.0, 2.0)
            for mat in (
                kernels.memory_kernel(1, t - s, p),
                kernels.memory_kernel(2, t - s, p),
                kernels.lambda_initial(t - p.t0, p),
                kernels.gamma_divisor(t, s, p),
                kernels.intermediate_lambda(t, s, p),
            ):
                worst = max(worst, float(np.max(np.abs(mat.entries.sum(axis=0) - 1.0))))
        return CheckResult("stochasticity", worst <= IDENTITY_TOL, worst, IDENTITY_TOL)

    def check_p_divisibility(self) -> CheckResult:
        rng = self._rng()
        worst = 0.0
        for _ in range(self.randomized_cases):
            p = random_params(rng)
            s = p.t0 + rng.uniform(0.0, 2.0)
            t = s + rng.uniform(0.0, 2.0)
            composed = kernels.gamma_divisor(t, s, p) @ kernels.lambda_initial(s - p.t0, p)
            worst = max(worst, kernels.lambda_initial(t - p.t0, p).max_abs_diff(composed))
        return CheckResult("p_divisibility", worst <= IDENTITY_TOL, worst, IDENTITY_TOL)

    def check_composition(self) -> CheckResult:
        rng = self._rng()
        worst = 0.0
        for _ in range(self.randomized_cases):
            p = random_params(rng)
            process: framework.Process = p
            if self.inject_fault:
                process = framework.GeneralProcessSpec(p.values, p.q, faulty_kernel_family(p), p.t0)
            early = p.t0 + rng.uniform(0.0, 1.0)
            mid = early + rng.uniform(0.0, 1.0)
            late = mid + rng.uniform(0.0, 1.0)
            worst = max(worst, framework.check_composition(process, early, mid, late))
        detail = "faulty kernel injected" if self.inject_fault else ""
        return CheckResult("composition", worst <= IDENTITY_TOL, worst, IDENTITY_TOL, detail=detail)

    def check_marginalization(self) -> CheckResult:
        p = self.params
        times = [p.t0, p.t0 + 0.3 / p.alpha, p.t0 + 0.8 / p.alpha, p.t0 + 1.5 / p.alpha]
        worst = max(framework.marginalization_residual(times, p, drop) for drop in (1, 2))
        return CheckResult("marginalization", worst <= IDENTITY_TOL, worst, IDENTITY_TOL)

    def check_markov_consistency(self) -> CheckResult:
        markov = self.params.replace(r=1.0 - self.params.k)
        t0 = markov.t0
        report = framework.check_consistency(markov, t0 + 2.0 / markov.alpha, t0 + 1.0 / markov.alpha)
        residual = max(report.distance, report.intermediate_distance or 0.0)
        witness = framework.check_consistency(self.params, t0 + 2.0 / markov.alpha, t0 + 1.0 / markov.alpha)
        expected = self.params.markov_flag
        passed = report.consistent and residual <= IDENTITY_TOL and witness.consistent == expected
        return CheckResult("markov_consistency", passed, residual, IDENTITY_TOL)

    def check_non_divisibility(self) -> CheckResult:
        """Lambda(t|s) from the compact form against brute-force conditionals of the three-point joint."""
        p = self.params
        s, t = p.t0 + 1.0 / p.alpha, p.t0 + 2.0 / p.alpha
        if _has_empty_state(s, p):
            return CheckResult("non_divisibility", True, 0.0, 1e-6, skipped=True, detail="zero_marginal")
        compact = kernels.intermediate_lambda(t, s, p)
        brute = statistics.three_point_joint(t, s, p).transition()
        agreement = compact.max_abs_diff(brute)
        gap = (compact @ kernels.lambda_initial(s - p.t0, p)).max_abs_diff(kernels.lambda_initial(t - p.t0, p))
        detail = f"ck_gap={gap:.6g}"
        return CheckResult("non_divisibility", agreement <= 1e-6, agreement, 1e-6, detail=detail)

    def check_master_equation(self) -> CheckResult:
        p = self.params
        step = 1e-3 / p.alpha
        worst = 0.0
        for checkpoint in np.linspace(0.5, 5.0, 10) / p.alpha:
            numeric = kernels.propagate_master(p.q, p.t0 + checkpoint, step, p)
            exact = kernels.lambda_initial(checkpoint, p) @ p.q
            worst = max(worst, float(np.max(np.abs(numeric - exact))))
        return CheckResult("master_equation", worst <= MASTER_TOL, worst, MASTER_TOL)

    def check_correlation_decay(self) -> CheckResult:
        p = self.params
        delta = 0.5 / p.alpha
        worst = 0.0
        amplitude = statistics.stationary_correlation(0.0, p)
        if amplitude == 0.0:
            return CheckResult("correlation_decay", True, 0.0, IDENTITY_TOL, skipped=True, detail="zero_amplitude")
        for tau in np.linspace(0.0, 3.0, 7) / p.alpha:
            ratio = statistics.stationary_correlation(tau + delta, p) / statistics.stationary_correlation(tau, p)
            worst = max(worst, abs(ratio - math.exp(-p.alpha * delta)))
        return CheckResult("correlation_decay", worst <= IDENTITY_TOL, worst, IDENTITY_TOL)

    def _tau_grid(self) -> np.ndarray:
        return np.concatenate([np.linspace(0.0, 5.0, 21) / self.params.alpha, [math.inf]])

    def check_cmi_oracle(self) -> CheckResult:
        p = self.params
        worst = abs(statistics.conditional_mutual_information(0.0, p).cmi)
        for tau in self._tau_grid():
            closed = statistics.conditional_mutual_information(tau, p, method="closed_form").cmi
            brute = statistics.conditional_mutual_information(tau, p, method="brute_force").cmi
            worst = max(worst, abs(closed - brute))
        return CheckResult("cmi_oracle", worst <= ORACLE_TOL, worst, ORACLE_TOL)

    def check_markov_cmi(self) -> CheckResult:
        markov = self.params.replace(r=1.0 - self.params.k)
        worst = max(abs(statistics.conditional_mutual_information(tau, markov).cmi) for tau in self._tau_grid())
        return CheckResult("markov_cmi", worst <= IDENTITY_TOL, worst, IDENTITY_TOL)

    def check_entropy_difference(self) -> CheckResult:
        p = self.params
        worst = 0.0
        for tau in self._tau_grid():
            magnitude = abs(statistics.entropy_difference(tau, p))
            worst = max(worst, abs(magnitude - statistics.conditional_mutual_information(tau, p).cmi))
        return CheckResult("entropy_difference", worst <= ORACLE_TOL, worst, ORACLE_TOL)

    def check_walk_lattice(self) -> CheckResult:
        w = self.walk
        t = w.base.t0 + 4.0 / w.base.alpha
        dist = lattice.walk_distribution_oracle(t, w)
        moments = walk.walk_moments_analytic(t, w)
        worst = max(
            abs(dist.mean() - moments.mean) / max(abs(moments.mean), 1e-300),
            abs(dist.variance() - moments.variance) / max(abs(moments.variance), 1e-300),
        )
        return CheckResult("walk_lattice", worst <= LATTICE_RTOL, worst, LATTICE_RTOL)

    def check_walk_mean_ode(self) -> CheckResult:
        w = self.walk
        h = 1e-3 / w.base.alpha
        worst = 0.0
        for t in w.base.t0 + np.array([0.5, 1.0, 2.0]) / w.base.alpha:
            slope = (
                lattice.walk_distribution_oracle(t + h, w).mean() - lattice.walk_distribution_oracle(t - h, w).mean()
            ) / (2.0 * h)
            target = w.lam * walk.marginal_moment(t, w, order=1)
            worst = max(worst, abs(slope - target) / max(abs(target), 1e-300))
        return CheckResult("walk_mean_ode", worst <= MEAN_ODE_RTOL, worst, MEAN_ODE_RTOL)

    def check_transport_gap(self) -> CheckResult:
        w = self.walk
        base = w.base
        started_x1 = walk.effective_diffusion(WalkParams(base=base.replace(q1=1.0), lam=w.lam))
        started_x2 = walk.effective_diffusion(WalkParams(base=base.replace(q1=0.0), lam=w.lam))
        expected = 0.5 * w.lam * (base.k + base.r - 1.0) * (base.x1**2 - base.x2**2)
        residual = abs((started_x1 - started_x2) - expected)
        return CheckResult("transport_gap", residual <= IDENTITY_TOL, residual, IDENTITY_TOL)

    # Monte Carlo checks

    def _mc_ensemble(self) -> Ensemble:
        if self._ensemble is None:
            horizon = 30.0 / self.params.alpha
            self._ensemble = sample_ensemble(self.params, self.n_trajectories, horizon, self.seed, self.workers)
        return self._ensemble

    def check_mc_marginal_law(self) -> CheckResult:
        ens = self._mc_ensemble()
        p = self.params
        worst = 0.0
        for offset in np.array([0.1, 0.25, 0.5, 1.0, 2.0]) / p.alpha:
            estimate = estimators.estimate_occupation(ens, p.t0 + offset)
            target = float(kernels.marginal_x1(p.t0 + offset, p))
            worst = max(worst, _max_z(estimate.value, target, estimate.stderr))
        return CheckResult("mc_marginal_law", worst <= SIGMAS, worst, SIGMAS)

    def check_mc_conditioned_chain(self) -> CheckResult:
        ens = self._mc_ensemble()
        p = self.params
        s, t = p.t0 + 1.0 / p.alpha, p.t0 + 1.5 / p.alpha
        worst = 0.0
        for l in (1, 2):
            if not np.any(ens.initial_states == l):
                continue
            try:
                estimate = estimators.estimate_transition(ens, t, s, initial_state=l)
            except estimators.EmptyColumnError:
                continue
            worst = max(worst, _max_z(estimate.matrix.entries, kernels.memory_kernel(l, t - s, p).entries, estimate.stderr))
        return CheckResult("mc_conditioned_chain", worst <= SIGMAS, worst, SIGMAS)

    def check_mc_intermediate(self) -> CheckResult:
        ens = self._mc_ensemble()
        p = self.params
        s, t = p.t0 + 1.0 / p.alpha, p.t0 + 2.0 / p.alpha
        if _has_empty_state(s, p):
            return CheckResult("mc_intermediate", True, 0.0, SIGMAS, skipped=True, detail="zero_marginal")
        estimate = estimators.estimate_transition(ens, t, s)
        worst = _max_z(estimate.matrix.entries, kernels.intermediate_lambda(t, s, p).entries, estimate.stderr)
        return CheckResult("mc_intermediate", worst <= SIGMAS, worst, SIGMAS)

    def check_mc_correlation(self) -> CheckResult:
        ens = self._mc_ensemble()
        p = self.params
        s = p.t0 + estimators.BURN_IN_ALPHA / p.alpha
        tau = 1.0 / p.alpha
        estimate = estimators.estimate_correlation(ens, s + tau, s)
        z = _max_z(estimate.value, statistics.stationary_correlation(tau, p), estimate.stderr)
        return CheckResult("mc_correlation", z <= SIGMAS, z, SIGMAS)

    def check_mc_cmi(self) -> CheckResult:
        ens = self._mc_ensemble()
        p = self.params
        s = p.t0 + estimators.BURN_IN_ALPHA / p.alpha
        tau = 2.0 / p.alpha
        estimate, _ = estimators.estimate_cmi(ens, s, s + tau)
        target = statistics.conditional_mutual_information(tau, p).cmi
        tolerance = max(SIGMAS * estimate.stderr, CMI_FLOOR)
        gap = abs(estimate.value - target)
        return CheckResult("mc_cmi", gap <= tolerance, gap, tolerance)

    def check_mc_ergodicity(self) -> CheckResult:
        ens = self._mc_ensemble()
        p = self.params
        report = estimators.ergodicity_diagnostic(ens, window=estimators.MIN_WINDOW_ALPHA / p.alpha)
        targets = {1: p.k, 2: 1.0 - p.r}
        worst = 0.0
        for l, target in targets.items():
            group = report.group_occupation[l]
            if group.n:
                worst = max(worst, _max_z(group.value, target, group.stderr))
        final = report.final_occupation
        worst = max(worst, _max_z(final.value, float(kernels.marginal_x1(ens.end, p)), final.stderr))
        return CheckResult("mc_ergodicity", worst <= SIGMAS, worst, SIGMAS, detail=f"separation={report.separation:.4f}")

    def check_mc_walk_moments(self) -> CheckResult:
        w = self.walk
        t = w.base.t0 + 4.0 / w.base.alpha
        ens = walk.sample_walk_ensemble(
            w, max(self.n_trajectories, walk.MIN_WALK_SAMPLES), t - w.base.t0, [t], self.seed, self.workers, increments="marginal"
        )
        estimate = walk.estimate_walk_moments(ens, t)
        moments = walk.walk_moments_analytic(t, w)
        worst = max(
            _max_z(estimate.mean.value, moments.mean, estimate.mean.stderr),
            _max_z(estimate.variance.value, moments.variance, estimate.variance.stderr),
        )
        return CheckResult("mc_walk_moments", worst <= SIGMAS, worst, SIGMAS)


def _check_name(check: Callable[[], CheckResult]) -> str:
    return getattr(check, "__name__", "check").replace("check_", "", 1)
