import math

import numpy as np
import pytest
from scipy import stats

from savanna_pdmp.core import IntensitySpec, ModelParams, figure_params, jump
from savanna_pdmp.errors import InvalidBound, TimeOutOfRange
from savanna_pdmp.flow import flow
from savanna_pdmp.pdmp import (
    RngStream,
    read_trajectory_csv,
    sample_jump_time,
    simulate,
    snapshot,
    trajectory_csv,
    write_trajectory_csv,
)


def survival_on_w0(t):
    # from (0, 0.2) with lambda = g, r_g = 0.5
    return np.exp(-2.0 * np.log(0.8 + 0.2 * np.exp(0.5 * t)))


def test_no_grass_no_fire(params):
    assert sample_jump_time(params, (0.5, 0.0), RngStream(1), t_max=1e6) is None
    assert sample_jump_time(params, (0.5, 0.0), RngStream(1), method="inversion", t_max=1e6) is None


def test_jump_time_survival_thinning(params):
    gen = np.random.default_rng(3)
    taus = np.array([sample_jump_time(params, (0.0, 0.2), gen) for _ in range(2000)])
    res = stats.kstest(taus, lambda t: 1.0 - survival_on_w0(t))
    assert res.pvalue > 0.01


def test_jump_time_survival_inversion(params):
    gen = np.random.default_rng(4)
    taus = np.array([sample_jump_time(params, (0.0, 0.2), gen, method="inversion") for _ in range(2000)])
    res = stats.kstest(taus, lambda t: 1.0 - survival_on_w0(t))
    assert res.pvalue > 0.01


def test_thinning_matches_inversion_interior(params):
    a = [sample_jump_time(params, (0.1, 0.2), RngStream(5, i)) for i in range(1500)]
    b = [sample_jump_time(params, (0.1, 0.2), RngStream(6, i), method="inversion") for i in range(1500)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_jump_time_deterministic_for_stream(params):
    a = sample_jump_time(params, (0.3, 0.4), RngStream(9, 2))
    b = sample_jump_time(params, (0.3, 0.4), RngStream(9, 2))
    assert a == b


def test_understated_bound_detected(params):
    p = figure_params()
    object.__setattr__(p, "lambda_sup", 0.01)
    with pytest.raises(InvalidBound):
        simulate(p, (0.1, 0.9), 2000.0, RngStream(1))


def test_sawtooth_trajectory(params):
    traj = simulate(params, (0.1, 0.2), 100.0, RngStream(2019))
    assert len(traj.events) > 10
    times = traj.fire_times
    assert np.all(np.diff(times) > 0)
    for ev in traj.events:
        assert ev.pre_state.w > ev.post_state.w
        assert ev.pre_state.g > ev.post_state.g
        assert ev.post_state == jump(params, ev.pre_state)


def test_segments_follow_flow(params):
    traj = simulate(params, (0.2, 0.6), 40.0, RngStream(8))
    for seg in traj.segments:
        ref = flow(params, seg.start_state, seg.end_time - seg.start_time).state
        assert abs(ref.w - seg.end_state.w) < 1e-8
        assert abs(ref.g - seg.end_state.g) < 1e-8


def test_grassless_start_goes_to_woodland(params):
    traj = simulate(params, (0.5, 0.0), 100.0, RngStream(1))
    assert traj.events == []
    assert abs(traj.final_state.w - 1.0) < 1e-6
    assert traj.final_state.g == 0.0


def test_origin_is_fixed(params):
    traj = simulate(params, (0.0, 0.0), 50.0, RngStream(1))
    assert traj.events == []
    assert tuple(traj.final_state) == (0.0, 0.0)


def test_tree_free_line_invariant(params):
    traj = simulate(params, (0.0, 0.3), 80.0, RngStream(12))
    assert len(traj.events) > 0
    assert all(seg.end_state.w == 0.0 for seg in traj.segments)
    assert all(0 < ev.post_state.g <= 1 for ev in traj.events)


def test_event_count_bounded_by_lambda_sup(params):
    counts = [len(simulate(params, (0.3, 0.5), 10.0, RngStream(77, i)).events) for i in range(300)]
    # the bound is 1, so E[count] <= 10
    assert np.mean(counts) <= params.lambda_sup * 10.0


def test_bitwise_reproducible(params):
    a = trajectory_csv(simulate(params, (0.1, 0.2), 60.0, RngStream(5, 1)), dt=0.5)
    b = trajectory_csv(simulate(params, (0.1, 0.2), 60.0, RngStream(5, 1)), dt=0.5)
    c = trajectory_csv(simulate(params, (0.1, 0.2), 60.0, RngStream(5, 2)), dt=0.5)
    assert a == b
    assert a != c


def test_inversion_method_runs(params):
    traj = simulate(params, (0.1, 0.2), 60.0, RngStream(3), method="inversion")
    assert len(traj.events) > 0


def test_periodic_mode(params):
    traj = simulate(params, (0.01, 0.2), 100.0, RngStream(0), fire_mode="periodic", tau_fixed=10.0)
    assert np.allclose(traj.fire_times, np.arange(1, 11) * 10.0)


def test_periodic_mode_skips_grassless(params):
    traj = simulate(params, (0.4, 0.0), 30.0, RngStream(0), fire_mode="periodic", tau_fixed=5.0)
    assert traj.events == []


def test_snapshot_right_continuous(params):
    traj = simulate(params, (0.1, 0.2), 50.0, RngStream(21))
    assert snapshot(traj, 0.0) == traj.initial
    ev = traj.events[0]
    assert snapshot(traj, ev.time) == ev.post_state
    mid = ev.time / 2
    ref = flow(params, traj.initial, mid).state
    assert snapshot(traj, mid) == ref
    assert snapshot(traj, 50.0) == traj.final_state


def test_snapshot_out_of_range(params):
    traj = simulate(params, (0.1, 0.2), 5.0, RngStream(1))
    with pytest.raises(TimeOutOfRange):
        snapshot(traj, 5.5)
    with pytest.raises(TimeOutOfRange):
        snapshot(traj, -1e-9)


def test_csv_round_trip(params, tmp_path):
    traj = simulate(params, (0.01, 0.2), 100.0, RngStream(4))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path, dt=1.0)
    t, w, g, events = read_trajectory_csv(path)
    assert events.count("fire_pre") == len(traj.events)
    assert events.count("fire_post") == len(traj.events)
    assert t[0] == 0.0 and t[-1] == 100.0
    assert np.all(np.diff(t) >= 0)
    posts = [i for i, e in enumerate(events) if e == "fire_post"]
    for i, ev in zip(posts, traj.events):
        assert (t[i], w[i], g[i]) == (ev.time, ev.post_state.w, ev.post_state.g)


def test_custom_intensity_simulates():
    spec = IntensitySpec.custom(lambda w, g: 2.0 * g * (1.0 + w) / 2.0, sup=2.0)
    p = ModelParams(0.25, 0.5, 0.4, 0.1, spec)
    traj = simulate(p, (0.3, 0.3), 20.0, RngStream(2))
    assert math.isfinite(traj.final_state.w)
