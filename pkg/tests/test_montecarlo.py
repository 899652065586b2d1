import math
import os
import sys

ROOT = os.path.dirname(os.path.dirname(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from funess.features import kernels, statistics
from funess.features.params import FunessParams
from funess.features.validators import OutOfRangeError, TimeOrderError
from funess.montecarlo import estimators
from funess.montecarlo.rng import chunk_streams, map_streams, stream_generator
from funess.montecarlo.trajectory import (
    Ensemble,
    OutOfWindowError,
    read_state,
    read_states,
    sample_ensemble,
    sample_trajectory,
)

SEED = 20240601


def build_params(**changes):
    return FunessParams(k=0.75, r=0.5, alpha=2.0, x1=1.0, x2=-1.0, q1=0.6).replace(**changes)


def test_stream_generator_is_keyed_by_seed_and_stream():
    a = stream_generator(7, 3).random(5)
    assert_array_equal(a, stream_generator(7, 3).random(5))
    assert not np.array_equal(a, stream_generator(7, 4).random(5))
    assert not np.array_equal(a, stream_generator(8, 3).random(5))
    with pytest.raises(OutOfRangeError):
        stream_generator(-1, 0)


def test_chunk_streams_cover_range_in_order():
    chunks = chunk_streams(10, 3)
    assert [i for chunk in chunks for i in chunk] == list(range(10))
    assert chunk_streams(2, 8) == [range(0, 1), range(1, 2)]
    assert map_streams(lambda chunk: [i * i for i in chunk], 7, workers=3) == [i * i for i in range(7)]


def test_sample_trajectory_alternates_and_is_reproducible():
    p = build_params()
    traj = sample_trajectory(p, 5.0, SEED, stream=11)
    again = sample_trajectory(p, 5.0, SEED, stream=11)
    assert traj.initial_state == again.initial_state
    assert_array_equal(traj.jump_times, again.jump_times)
    assert np.all(np.diff(traj.jump_times) > 0)
    assert np.all(traj.jump_times <= traj.end)
    assert np.all(traj.states[1:] != traj.states[:-1])
    assert read_state(traj, 0.0) == traj.initial_state


def test_read_state_is_right_continuous():
    p = build_params()
    for stream in range(100):
        traj = sample_trajectory(p, 5.0, SEED, stream)
        if traj.jump_times.size:
            break
    first = traj.jump_times[0]
    assert read_state(traj, first) == 3 - traj.initial_state
    assert read_state(traj, np.nextafter(first, 0.0)) == traj.initial_state
    with pytest.raises(OutOfWindowError):
        read_state(traj, 5.5)


def test_absorbing_state_never_jumps():
    # k = 1 makes x1 absorbing for paths that start there
    p = build_params(k=1.0, q1=1.0)
    traj = sample_trajectory(p, 10.0, SEED)
    assert traj.initial_state == 1
    assert traj.jump_times.size == 0


def test_ensemble_independent_of_worker_count():
    p = build_params()
    single = sample_ensemble(p, 300, 3.0, SEED, workers=1)
    pooled = sample_ensemble(p, 300, 3.0, SEED, workers=4)
    assert_array_equal(single.initial_states, pooled.initial_states)
    assert_array_equal(single.offsets, pooled.offsets)
    assert_array_equal(single.jump_times, pooled.jump_times)
    traj = single.trajectory(17)
    assert_array_equal(traj.jump_times, sample_trajectory(p, 3.0, SEED, 17).jump_times)


def test_read_states_matches_scalar_reads():
    p = build_params()
    ensemble = sample_ensemble(p, 200, 3.0, SEED)
    for t in (0.0, 0.4, 1.7, 3.0):
        expected = [read_state(ensemble.trajectory(i), t) for i in range(ensemble.n)]
        assert_array_equal(read_states(ensemble, t), expected)


def test_marginal_law_within_band():
    p = build_params()
    ensemble = sample_ensemble(p, 4000, 2.0, SEED)
    for t in (0.25, 1.0, 2.0):
        estimate = estimators.estimate_occupation(ensemble, t)
        assert estimate.within(float(kernels.marginal_x1(t, p)), sigmas=5.0)


def test_conditioned_and_intermediate_transitions():
    p = build_params()
    ensemble = sample_ensemble(p, 6000, 1.0, SEED)
    for l in (1, 2):
        estimate = estimators.estimate_transition(ensemble, 1.0, 0.5, initial_state=l)
        target = kernels.memory_kernel(l, 0.5, p).entries
        assert np.all(np.abs(estimate.matrix.entries - target) <= 5.0 * estimate.stderr + 1e-12)
    pooled = estimators.estimate_transition(ensemble, 1.0, 0.5)
    target = kernels.intermediate_lambda(1.0, 0.5, p).entries
    assert np.all(np.abs(pooled.matrix.entries - target) <= 5.0 * pooled.stderr + 1e-12)


def test_transition_requires_samples_and_order():
    p = build_params()
    small = sample_ensemble(p, 50, 1.0, SEED)
    with pytest.raises(OutOfRangeError):
        estimators.estimate_transition(small, 1.0, 0.5)
    ensemble = sample_ensemble(p, 200, 1.0, SEED)
    with pytest.raises(TimeOrderError):
        estimators.estimate_transition(ensemble, 0.5, 1.0)


def test_transition_empty_column():
    # with k = 1 and q1 = 1 nothing ever reaches x2
    p = build_params(k=1.0, q1=1.0)
    ensemble = sample_ensemble(p, 200, 1.0, SEED)
    with pytest.raises(estimators.EmptyColumnError):
        estimators.estimate_transition(ensemble, 1.0, 0.5)


def test_stationary_correlation_estimate():
    p = build_params()
    ensemble = sample_ensemble(p, 6000, 6.0, SEED)
    estimate = estimators.estimate_correlation(ensemble, 5.5, 5.0)
    assert estimate.warnings == ()
    assert estimate.within(statistics.stationary_correlation(0.5, p), sigmas=5.0)
    conditioned = estimators.estimate_correlation(ensemble, 5.0, 5.0, conditioning=1)
    assert conditioned.within(0.75, sigmas=5.0)


def test_correlation_flags_short_burn_in(caplog):
    p = build_params()
    ensemble = sample_ensemble(p, 200, 2.0, SEED)
    with caplog.at_level("WARNING"):
        estimate = estimators.estimate_correlation(ensemble, 1.5, 1.0)
    assert estimators.INSUFFICIENT_BURN_IN in estimate.warnings


def test_correlation_degenerate_values():
    p = build_params(x1=0.5, x2=0.5)
    ensemble = sample_ensemble(p, 100, 6.0, SEED)
    estimate = estimators.estimate_correlation(ensemble, 5.5, 5.0)
    assert estimate.value == 0.0
    assert estimate.stderr == 0.0


def test_triple_counts_merge():
    first = estimators.TripleCounts.from_states(np.array([1, 2]), np.array([1, 1]), np.array([2, 2]))
    second = estimators.TripleCounts.from_states(np.array([1]), np.array([1]), np.array([2]))
    merged = first.merge(second)
    assert merged.total == 3
    assert merged.n[0, 0, 1] == 2
    assert merged.n[1, 0, 1] == 1


def test_cmi_from_counts_of_independent_cells_is_clamped():
    counts = estimators.TripleCounts(np.full(8, 1000))
    estimate = estimators.cmi_from_counts(counts)
    assert estimate.value == 0.0
    assert estimate.warnings == ()


def test_cmi_estimate_matches_closed_form():
    p = build_params()
    ensemble = sample_ensemble(p, 20000, 6.0, SEED, workers=2)
    estimate, counts = estimators.estimate_cmi(ensemble, 5.0, 5.5)
    assert counts.total == 20000
    target = statistics.conditional_mutual_information(0.5, p).cmi
    assert abs(estimate.value - target) <= max(5.0 * estimate.stderr, 0.01)


def test_cmi_estimate_is_calibrated_on_markov_paths():
    # the corrected estimate of a zero CMI stays inside its reported error on average
    p = build_params(k=0.6, r=0.4)
    values, stderrs = [], []
    for repeat in range(50):
        ensemble = sample_ensemble(p, 1000, 1.0, SEED + repeat)
        estimate, _ = estimators.estimate_cmi(ensemble, 0.5, 1.0)
        values.append(estimate.value)
        stderrs.append(estimate.stderr)
    assert min(values) >= 0.0
    assert np.mean(values) <= 2.0 * np.mean(stderrs)


def test_standard_errors_shrink_with_sample_size():
    p = build_params()
    occupation = {}
    correlation = {}
    for n in (4000, 8000):
        ensembles = [sample_ensemble(p, n, 1.5, SEED + repeat) for repeat in range(4)]
        occupation[n] = np.mean([estimators.estimate_occupation(e, 1.0).stderr for e in ensembles])
        correlation[n] = np.mean([estimators.estimate_correlation(e, 1.5, 1.0).stderr for e in ensembles])
    for stderr in (occupation, correlation):
        assert stderr[8000] / stderr[4000] == pytest.approx(1.0 / math.sqrt(2.0), rel=0.1)


def test_cmi_estimate_warns_on_small_samples():
    p = build_params()
    ensemble = sample_ensemble(p, 500, 2.0, SEED)
    estimate, _ = estimators.estimate_cmi(ensemble, 1.0, 1.5)
    assert estimators.SMALL_SAMPLE in estimate.warnings
    assert estimators.INSUFFICIENT_BURN_IN in estimate.warnings


def test_ergodicity_diagnostic_separates_groups():
    p = build_params()
    ensemble = sample_ensemble(p, 400, 15.0, SEED)
    report = estimators.ergodicity_diagnostic(ensemble, window=10.0)
    assert report.burn_in == pytest.approx(5.0)
    assert report.group_occupation[1].within(0.75, sigmas=5.0)
    assert report.group_occupation[2].within(0.5, sigmas=5.0)
    assert report.separation > 0.15
    assert report.final_occupation.within(0.65, sigmas=5.0)


def test_ergodicity_diagnostic_markov_groups_agree():
    p = build_params(k=0.6, r=0.4)
    ensemble = sample_ensemble(p, 400, 15.0, SEED)
    report = estimators.ergodicity_diagnostic(ensemble, window=10.0)
    first, second = report.group_occupation[1], report.group_occupation[2]
    assert first.within(0.6, sigmas=5.0)
    assert second.within(0.6, sigmas=5.0)
    assert abs(report.separation) <= 5.0 * math.hypot(first.stderr, second.stderr)
    assert report.final_occupation.within(0.6, sigmas=5.0)


def test_ergodicity_diagnostic_window_limits():
    p = build_params()
    ensemble = sample_ensemble(p, 50, 12.0, SEED)
    with pytest.raises(OutOfRangeError):
        estimators.ergodicity_diagnostic(ensemble, window=5.0)
    with pytest.raises(OutOfRangeError):
        estimators.ergodicity_diagnostic(ensemble, window=10.0)


def test_empty_ensemble_rejected():
    with pytest.raises(OutOfRangeError):
        sample_ensemble(build_params(), 0, 1.0, SEED)
    assert Ensemble.from_trajectories(build_params(), 1.0, []).n == 0
    assert math.isclose(sample_ensemble(build_params(), 1, 1.0, SEED).end, 1.0)
