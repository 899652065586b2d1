"""Empirical estimators over sampled ensembles, each reported with a standard error."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Tuple, Union

import numpy as np

from funess.features.matrix import ColumnStochasticMatrix
from funess.features.statistics import cmi_from_joint
from funess.features.validators import OutOfRangeError, ensure_ordered, ensure_state
from funess.montecarlo.trajectory import Ensemble, read_states, state_values

logger = logging.getLogger(__name__)

BURN_IN_ALPHA = 10.0
MIN_TRANSITION_SAMPLES = 100
MIN_CMI_SAMPLES = 10_000
SPARSE_CELL = 30
MIN_WINDOW_ALPHA = 20.0
WINDOW_TOL = 1e-12

INSUFFICIENT_BURN_IN = "insufficient_burn_in"
SPARSE_CELL_WARNING = "sparse_cell"
SMALL_SAMPLE = "small_sample"


class EmptyColumnError(ValueError):
    """Raised when no trajectory occupies the conditioning state."""


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n: int
    warnings: Tuple[str, ...] = ()

    def within(self, target: float, sigmas: float = 3.0, floor: float = 0.0) -> bool:
        """True when ``target`` lies inside ``sigmas`` standard errors (at least ``floor``)."""
        return abs(self.value - target) <= max(sigmas * self.stderr, floor)


@dataclass(frozen=True, eq=False)
class TransitionEstimate:
    matrix: ColumnStochasticMatrix
    stderr: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True, eq=False)
class TripleCounts:
    """n[l, k, j]: trajectories with X_t0 = x_l, X_s = x_k, X_t = x_j."""

    n: np.ndarray
    total: int = field(init=False)

    def __post_init__(self) -> None:
        counts = np.asarray(self.n, dtype=np.int64).reshape(2, 2, 2)
        if np.any(counts < 0):
            raise OutOfRangeError("out_of_range:counts:negative")
        object.__setattr__(self, "n", counts)
        object.__setattr__(self, "total", int(counts.sum()))

    @classmethod
    def from_states(cls, initial: np.ndarray, middle: np.ndarray, final: np.ndarray) -> "TripleCounts":
        cells = (np.asarray(initial) - 1) * 4 + (np.asarray(middle) - 1) * 2 + (np.asarray(final) - 1)
        return cls(np.bincount(cells.astype(np.intp), minlength=8))

    def merge(self, other: "TripleCounts") -> "TripleCounts":
        return TripleCounts(self.n + other.n)


@dataclass(frozen=True)
class ErgodicityReport:
    group_occupation: Dict[int, EstimateWithError]
    final_occupation: EstimateWithError
    window: float
    burn_in: float

    @property
    def separation(self) -> float:
        return self.group_occupation[1].value - self.group_occupation[2].value


def _burn_in_warnings(ensemble: Ensemble, s: float) -> Tuple[str, ...]:
    if s - ensemble.t0 < BURN_IN_ALPHA / ensemble.params.alpha:
        logger.warning("s - t0 = %.4g is below the %.4g burn-in", s - ensemble.t0, BURN_IN_ALPHA / ensemble.params.alpha)
        return (INSUFFICIENT_BURN_IN,)
    return ()


def estimate_occupation(ensemble: Ensemble, t: float) -> EstimateWithError:
    """Fraction of trajectories in x1 at time ``t`` with its binomial standard error."""
    in_x1 = read_states(ensemble, t) == 1
    p_hat = float(in_x1.mean())
    return EstimateWithError(value=p_hat, stderr=math.sqrt(p_hat * (1.0 - p_hat) / ensemble.n), n=ensemble.n)


def estimate_transition(
    ensemble: Ensemble, t: float, s: float, initial_state: Optional[int] = None
) -> TransitionEstimate:
    """Empirical p(x_j, t | x_k, s) from state pairs, optionally within one initial-state group."""

    ensure_ordered([("t0", ensemble.t0), ("s", s), ("t", t)])
    if ensemble.n < MIN_TRANSITION_SAMPLES:
        raise OutOfRangeError(f"out_of_range:n={ensemble.n}:>={MIN_TRANSITION_SAMPLES}")
    before = read_states(ensemble, s)
    after = read_states(ensemble, t)
    if initial_state is not None:
        mask = ensemble.initial_states == ensure_state(initial_state)
        before, after = before[mask], after[mask]

    counts = np.zeros((2, 2))
    np.add.at(counts, (after.astype(np.intp) - 1, before.astype(np.intp) - 1), 1.0)
    totals = counts.sum(axis=0)
    empty = np.flatnonzero(totals == 0)
    if empty.size:
        raise EmptyColumnError(f"empty_column:state={int(empty[0]) + 1}:s={s}")
    p_hat = counts / totals[np.newaxis, :]
    stderr = np.sqrt(p_hat * (1.0 - p_hat) / totals[np.newaxis, :])
    return TransitionEstimate(matrix=ColumnStochasticMatrix(p_hat), stderr=stderr, counts=counts)


def _group_covariance(later: np.ndarray, earlier: np.ndarray) -> Tuple[float, float]:
    """Sample covariance and its delta-method variance."""
    centred = (later - later.mean()) * (earlier - earlier.mean())
    value = float(centred.mean())
    influence = centred - value
    return value, float(np.mean(influence**2) / later.size)


def estimate_correlation(
    ensemble: Ensemble,
    t: float,
    s: float,
    conditioning: Union[int, Literal["averaged"]] = "averaged",
) -> EstimateWithError:
    """<X_t X_s | x0> - <X_t | x0><X_s | x0>, per initial state or averaged over the groups.

    The averaged form weights each group by its empirical share; its standard
    error includes the binomial fluctuation of the shares.
    """

    ensure_ordered([("t0", ensemble.t0), ("s", s), ("t", t)])
    warnings = _burn_in_warnings(ensemble, s)
    if ensemble.params.degenerate:
        return EstimateWithError(value=0.0, stderr=0.0, n=ensemble.n, warnings=warnings)

    later = state_values(ensemble, read_states(ensemble, t))
    earlier = state_values(ensemble, read_states(ensemble, s))
    groups: Dict[int, Tuple[float, float, int]] = {}
    for l in (1, 2):
        mask = ensemble.initial_states == l
        if mask.any():
            groups[l] = (*_group_covariance(later[mask], earlier[mask]), int(mask.sum()))

    if conditioning != "averaged":
        l = ensure_state(conditioning)
        if l not in groups:
            raise EmptyColumnError(f"empty_column:initial_state={l}")
        value, variance, size = groups[l]
        return EstimateWithError(value=value, stderr=math.sqrt(variance), n=size, warnings=warnings)

    shares = {l: size / ensemble.n for l, (_, _, size) in groups.items()}
    value = sum(shares[l] * groups[l][0] for l in groups)
    variance = sum(shares[l] ** 2 * groups[l][1] for l in groups)
    if len(groups) == 2:
        variance += (groups[1][0] - groups[2][0]) ** 2 * shares[1] * shares[2] / ensemble.n
    return EstimateWithError(value=value, stderr=math.sqrt(variance), n=ensemble.n, warnings=warnings)


def _support(probs: np.ndarray) -> int:
    return int(np.count_nonzero(probs))


def cmi_from_counts(counts: TripleCounts) -> EstimateWithError:
    """Miller-Madow corrected plug-in I(X_t; X_t0 | X_s), clamped at zero.

    The standard error is the delta-method value from the empirical information
    density; it vanishes when the plug-in estimate is exactly zero.
    """

    total = counts.total
    joint = counts.n / total
    pair_ts = joint.sum(axis=0)
    single_s = joint.sum(axis=(0, 2))
    pair_0s = joint.sum(axis=2)
    plug_in = cmi_from_joint(joint)
    correction = (_support(pair_ts) - _support(single_s) + _support(pair_0s) - _support(joint)) / (2.0 * total)
    value = max(0.0, plug_in + correction)

    occupied = joint > 0
    density = np.zeros_like(joint)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (joint * single_s[np.newaxis, :, np.newaxis]) / (pair_ts[np.newaxis, :, :] * pair_0s[:, :, np.newaxis])
    density[occupied] = np.log(ratio[occupied])
    second_moment = float(np.sum(joint[occupied] * density[occupied] ** 2))
    stderr = math.sqrt(max(0.0, second_moment - plug_in**2) / total)

    warnings: Tuple[str, ...] = ()
    if np.any(counts.n.sum(axis=2) < SPARSE_CELL):
        logger.warning("A conditioning cell holds fewer than %d trajectories", SPARSE_CELL)
        warnings = (SPARSE_CELL_WARNING,)
    return EstimateWithError(value=value, stderr=stderr, n=total, warnings=warnings)


def estimate_cmi(ensemble: Ensemble, s: float, t: float) -> Tuple[EstimateWithError, TripleCounts]:
    """Plug-in conditional mutual information in nats with Miller-Madow correction."""

    ensure_ordered([("t0", ensemble.t0), ("s", s), ("t", t)])
    counts = TripleCounts.from_states(ensemble.initial_states, read_states(ensemble, s), read_states(ensemble, t))
    estimate = cmi_from_counts(counts)
    warnings = estimate.warnings + _burn_in_warnings(ensemble, s)
    if ensemble.n < MIN_CMI_SAMPLES:
        logger.warning("CMI estimate from %d trajectories; at least %d recommended", ensemble.n, MIN_CMI_SAMPLES)
        warnings += (SMALL_SAMPLE,)
    return EstimateWithError(estimate.value, estimate.stderr, estimate.n, warnings), counts


def _time_in_x1(jump_times: np.ndarray, initial: int, start: float, stop: float) -> float:
    state_at_start = initial if np.searchsorted(jump_times, start, side="right") % 2 == 0 else 3 - initial
    inside = jump_times[(jump_times > start) & (jump_times < stop)]
    durations = np.diff(np.concatenate([[start], inside, [stop]]))
    return float(durations[0::2].sum() if state_at_start == 1 else durations[1::2].sum())


def ergodicity_diagnostic(ensemble: Ensemble, window: float, burn_in: Optional[float] = None) -> ErgodicityReport:
    """Per-trajectory time-averaged occupation of x1, grouped by initial state.

    Averages run over the last ``window`` of the horizon, which must start after
    ``burn_in`` (default 10/alpha). The ensemble occupation at the final time is
    reported alongside.
    """

    alpha = ensemble.params.alpha
    if window < MIN_WINDOW_ALPHA / alpha:
        raise OutOfRangeError(f"out_of_range:window={window}:>={MIN_WINDOW_ALPHA / alpha:.6g}")
    burn_in = BURN_IN_ALPHA / alpha if burn_in is None else burn_in
    start = ensemble.end - window
    if start < ensemble.t0 + burn_in - WINDOW_TOL * max(1.0, ensemble.horizon):
        raise OutOfRangeError(f"out_of_range:horizon={ensemble.horizon}:>={burn_in + window:.6g}")

    fractions = np.array(
        [
            _time_in_x1(ensemble.jump_times[lo:hi], int(initial), start, ensemble.end) / window
            for initial, lo, hi in zip(ensemble.initial_states, ensemble.offsets[:-1], ensemble.offsets[1:])
        ]
    )
    groups: Dict[int, EstimateWithError] = {}
    for l in (1, 2):
        members = fractions[ensemble.initial_states == l]
        if members.size:
            spread = float(members.std(ddof=1)) if members.size > 1 else 0.0
            groups[l] = EstimateWithError(float(members.mean()), spread / math.sqrt(members.size), int(members.size))
        else:
            groups[l] = EstimateWithError(float("nan"), float("nan"), 0)
    return ErgodicityReport(
        group_occupation=groups,
        final_occupation=estimate_occupation(ensemble, ensemble.end),
        window=window,
        burn_in=burn_in,
    )
