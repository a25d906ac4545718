"""
Tests for consensus, oscillation and cluster detection and Monte Carlo summaries.

Run with: pytest tests/
"""
import random

import numpy as np
import pytest

from app.models.models import Decision, ExperimentRecord, GroupKey, RoundRecord
from app.services.analysis import (
    convergence_frame,
    detect_clusters,
    detect_consensus,
    detect_oscillation,
    group_records,
    summarize,
    summary_frame,
    trajectory_frame,
)


def make_record(history, experiment: int = 0, group: GroupKey = None) -> ExperimentRecord:
    """Record from a list of state vectors: history[0] initial, history[t] after round t."""
    rounds = [
        RoundRecord(
            round=t,
            states_before=history[t],
            decisions=[Decision(agent=k, state=s, reasoning="") for k, s in enumerate(history[t + 1])],
            states_after=history[t + 1],
        )
        for t in range(len(history) - 1)
    ]
    return ExperimentRecord(
        experiment=experiment, seed=0, config_fingerprint="test", group=group,
        initial_states=history[0], rounds=rounds, final_states=history[-1],
    )


class TestDetectConsensus:
    """Test consensus detection."""

    def test_one_round(self):
        """Test states collapsing at round 1 report round 1 and the common value."""
        report = detect_consensus(make_record([[20.0, 80.0], [50.0, 50.0], [50.0, 50.0]]), 1e-6)
        assert report.consensus
        assert report.convergence_round == 1
        assert report.consensus_value == 50.0
        assert report.bias == 0.0

    def test_swap_never_converges(self):
        """Test a permanent two-agent swap has no consensus and full spread."""
        history = [[10.0, 90.0], [90.0, 10.0]] * 3
        report = detect_consensus(make_record(history), 1e-6)
        assert not report.consensus
        assert report.consensus_value is None
        assert report.convergence_round is None
        assert report.final_spread == 80.0

    def test_no_rounds(self):
        """Test equal initial states with no rounds converge at round 0."""
        report = detect_consensus(make_record([[30.0, 30.0]]), 1e-6)
        assert report.consensus
        assert report.convergence_round == 0

    def test_round_after_which_spread_stays(self):
        """Test a temporary dip below eps does not count."""
        history = [[0.0, 10.0], [5.0, 5.0], [0.0, 10.0], [4.0, 4.0], [4.0, 4.0]]
        assert detect_consensus(make_record(history), 1e-6).convergence_round == 3

    def test_bias(self):
        """Test bias is the final mean minus the initial mean."""
        report = detect_consensus(make_record([[20.0, 40.0], [35.0, 35.0]]), 1e-6)
        assert report.bias == 5.0

    def test_relabeling_invariant(self):
        """Test permuting agents leaves the report unchanged."""
        rng = np.random.default_rng(0)
        history = [list(rng.uniform(0, 100, 5))]
        for _ in range(12):
            prev = np.array(history[-1])
            history.append(list((prev + prev.mean()) / 2))
        perm = [3, 0, 4, 1, 2]
        permuted = [[h[p] for p in perm] for h in history]
        a = detect_consensus(make_record(history), 1.0)
        b = detect_consensus(make_record(permuted), 1.0)
        assert (a.consensus, a.convergence_round) == (b.consensus, b.convergence_round)
        assert a.consensus_value == pytest.approx(b.consensus_value, abs=1e-12)

    def test_eps_must_be_positive(self):
        """Test eps must be positive."""
        with pytest.raises(ValueError):
            detect_consensus(make_record([[1.0]]), 0.0)


class TestDetectOscillation:
    """Test period-2 detection."""

    def test_swap(self):
        """Test two agents swapping states are flagged."""
        history = [[10.0, 90.0], [90.0, 10.0]] * 5
        report = detect_oscillation(make_record(history), window=4)
        assert report.oscillating
        assert report.period == 2
        assert report.participants == [0, 1]

    def test_constant(self):
        """Test constant states are not oscillating."""
        report = detect_oscillation(make_record([[33.0, 66.0]] * 6), window=4)
        assert not report.oscillating
        assert report.period is None

    def test_converged(self):
        """Test a converged run is not oscillating."""
        report = detect_oscillation(make_record([[20.0, 80.0]] + [[50.0, 50.0]] * 5), window=4)
        assert not report.oscillating

    def test_too_short(self):
        """Test fewer than four states never flag."""
        report = detect_oscillation(make_record([[10.0, 90.0], [90.0, 10.0], [10.0, 90.0]]), window=8)
        assert not report.oscillating

    def test_window_longer_than_record(self):
        """Test a long window evaluates the states available."""
        report = detect_oscillation(make_record([[10.0, 90.0], [90.0, 10.0]] * 2), window=50)
        assert report.oscillating

    def test_partial_participants(self):
        """Test only the swapping agents are listed."""
        history = [[10.0, 90.0, 50.0], [90.0, 10.0, 50.0]] * 3
        assert detect_oscillation(make_record(history), window=6).participants == [0, 1]

    def test_tolerance(self):
        """Test noisy swaps need a tolerance to be flagged."""
        history = [[10.0, 90.0], [90.1, 9.9], [9.8, 90.2], [90.0, 10.0], [10.1, 89.9]]
        assert not detect_oscillation(make_record(history), window=4, tolerance=0.0).oscillating
        assert detect_oscillation(make_record(history), window=4, tolerance=0.5).oscillating

    def test_window_minimum(self):
        """Test windows shorter than four are rejected."""
        with pytest.raises(ValueError):
            detect_oscillation(make_record([[1.0]] * 5), window=3)


class TestDetectClusters:
    """Test gap clustering of final states."""

    def test_two_groups(self):
        """Test [10, 10, 10, 80, 80] splits into two clusters."""
        report = detect_clusters([10.0, 10.0, 10.0, 80.0, 80.0], eps=1e-6, gap=5.0)
        assert [(c.representative, c.members) for c in report.clusters] == [(10.0, [0, 1, 2]), (80.0, [3, 4])]

    def test_all_equal(self):
        """Test identical states form one cluster."""
        assert len(detect_clusters([42.0] * 6, eps=1e-6, gap=5.0).clusters) == 1

    def test_empty(self):
        """Test an empty state list gives an empty report."""
        assert detect_clusters([], eps=1e-6, gap=5.0).clusters == []

    def test_eps_below_gap(self):
        """Test eps must be below the gap."""
        with pytest.raises(ValueError):
            detect_clusters([1.0], eps=5.0, gap=5.0)

    def test_permutation_invariant(self):
        """Test k well-separated groups give k clusters in any input order."""
        states = [5.0] * 3 + [40.0] * 2 + [41.0] + [95.0] * 4
        for seed in range(10):
            shuffled = states[:]
            random.Random(seed).shuffle(shuffled)
            report = detect_clusters(shuffled, eps=2.0, gap=5.0)
            assert len(report.clusters) == 3
            assert sorted(m for c in report.clusters for m in c.members) == list(range(10))

    def test_two_dimensional(self):
        """Test 2-D states link by Euclidean distance."""
        states = [[0.0, 0.0], [1.0, 1.0], [50.0, 50.0], [50.0, 52.0], [0.0, 90.0]]
        report = detect_clusters(states, eps=3.0, gap=5.0)
        assert sorted(c.members for c in report.clusters) == [[0, 1], [2, 3], [4]]

    def test_adjacent_representatives_separated(self):
        """Test adjacent cluster representatives are at least the gap apart."""
        report = detect_clusters([1.0, 2.0, 9.0, 30.0, 31.0], eps=2.0, gap=5.0)
        reps = [c.representative for c in report.clusters]
        assert all(b - a >= 5.0 for a, b in zip(reps, reps[1:]))
        assert all(c.spread < 2.0 for c in report.clusters)


SCALE, SHIFT = 2.5, -7.0


def affine(value, a: float = SCALE, b: float = SHIFT):
    """Apply x -> a*x + b to every number in a nested state list."""
    if isinstance(value, list):
        return [affine(v, a, b) for v in value]
    return a * value + b


class TestAffineEquivariance:
    """Test the detectors commute with rescaling and shifting the state space."""

    CONVERGING = [[10.0, 30.0, 80.0], [40.0, 42.0, 45.0], [44.0, 44.2, 44.5], [44.3, 44.3, 44.3]]
    SWAPPING = [[10.0, 90.0, 50.0], [90.0, 10.0, 50.0]] * 3
    PLANAR = [[[0.0, 0.0], [10.0, 20.0]], [[4.0, 9.0], [6.0, 11.0]], [[5.0, 10.0], [5.0, 10.0]]]

    @pytest.mark.parametrize("history, eps", [(CONVERGING, 0.1), (SWAPPING, 1e-6), (PLANAR, 0.1)])
    def test_consensus(self, history, eps):
        """Test bias scales with the state space while consensus and its round do not change."""
        base = detect_consensus(make_record(history), eps)
        moved = detect_consensus(make_record(affine(history)), SCALE * eps)
        assert moved.consensus == base.consensus
        assert moved.convergence_round == base.convergence_round
        np.testing.assert_allclose(np.asarray(moved.bias), SCALE * np.asarray(base.bias), atol=1e-9)
        assert moved.final_spread == pytest.approx(SCALE * base.final_spread)
        if base.consensus:
            np.testing.assert_allclose(np.asarray(moved.consensus_value), affine(base.consensus_value), atol=1e-9)

    def test_oscillation(self):
        """Test the flagged agents and the period are unchanged."""
        base = detect_oscillation(make_record(self.SWAPPING), 4, 0.0)
        moved = detect_oscillation(make_record(affine(self.SWAPPING)), 4, 0.0)
        assert base.participants == moved.participants == [0, 1]
        assert moved.oscillating and moved.period == base.period == 2

    def test_clusters(self):
        """Test cluster membership is unchanged and representatives move with the states."""
        final = [10.0, 11.0, 40.0, 41.5]
        base = detect_clusters(final, 1.0, 5.0)
        moved = detect_clusters(affine(final), SCALE * 1.0, SCALE * 5.0)
        assert [c.members for c in moved.clusters] == [c.members for c in base.clusters] == [[0, 1], [2, 3]]
        for b, m in zip(base.clusters, moved.clusters):
            assert m.representative == pytest.approx(affine(b.representative))


class TestSummarize:
    """Test Monte Carlo summaries."""

    def test_single_record_variance_zero(self):
        """Test a one-record group has zero variance."""
        key = GroupKey(n_a=2, noise_profile="t0.0")
        out = summarize({key: [make_record([[20.0, 40.0], [31.0, 31.0]], group=key)]}, 1e-6)
        assert out[0].trials == 1
        assert out[0].var_bias == 0.0
        assert out[0].mean_bias == 1.0

    def test_matches_two_pass_variance(self):
        """Test variance agrees with a brute-force two-pass computation."""
        rng = np.random.default_rng(3)
        key = GroupKey(n_a=3, noise_profile="t0.7")
        records, biases = [], []
        for i in range(25):
            init = list(rng.uniform(0, 100, 3))
            final_value = float(np.mean(init) + rng.normal(0, 2))
            records.append(make_record([init, [final_value] * 3], experiment=i, group=key))
            biases.append(final_value - sum(init) / 3)
        out = summarize({key: records}, 0.5)[0]
        mean = sum(biases) / len(biases)
        var = sum((b - mean) ** 2 for b in biases) / len(biases)
        assert out.mean_bias == pytest.approx(mean, rel=1e-12)
        assert out.var_bias == pytest.approx(var, rel=1e-12)
        assert out.consensus_rate == 1.0
        assert out.mean_round == 1.0

    def test_ordering_and_rates(self):
        """Test groups come back sorted and count non-converged runs."""
        a = GroupKey(n_a=4, noise_profile="t0.0")
        b = GroupKey(n_a=2, noise_profile="t0.0")
        grouped = group_records([
            make_record([[0.0, 10.0, 20.0, 30.0], [15.0] * 4], group=a),
            make_record([[10.0, 90.0], [90.0, 10.0]], group=b),
            make_record([[10.0, 90.0], [50.0, 50.0]], group=b),
        ])
        out = summarize(grouped, 1e-6)
        assert [(s.n_a, s.trials) for s in out] == [(2, 2), (4, 1)]
        assert out[0].consensus_rate == 0.5
        assert out[0].mean_round == 1.0

    def test_empty_group_rejected(self):
        """Test an empty group is an error."""
        with pytest.raises(ValueError):
            summarize({GroupKey(n_a=2, noise_profile="t0.0"): []}, 1e-6)


class TestFrames:
    """Test tabular exports."""

    def test_trajectory_long_format(self):
        """Test one row per experiment, round and agent."""
        frame = trajectory_frame([make_record([[20.0, 80.0], [50.0, 50.0]])])
        assert list(frame.columns) == ["experiment", "round", "agent", "state"]
        assert frame["state"].tolist() == [20.0, 80.0, 50.0, 50.0]
        assert frame["round"].tolist() == [0, 0, 1, 1]

    def test_trajectory_2d(self):
        """Test 2-D runs add a state_y column."""
        frame = trajectory_frame([make_record([[[0.0, 1.0], [2.0, 3.0]]])])
        assert list(frame.columns) == ["experiment", "round", "agent", "state", "state_y"]

    def test_summary_columns(self):
        """Test summary table columns."""
        key = GroupKey(n_a=2, noise_profile="t0.0")
        frame = summary_frame(summarize({key: [make_record([[1.0, 1.0]], group=key)]}, 1e-6))
        assert list(frame.columns) == ["n_a", "noise_profile", "trials", "mean_bias", "var_bias",
                                       "consensus_rate", "mean_round"]

    def test_convergence_columns(self):
        """Test per-experiment convergence table."""
        record = make_record([[20.0, 80.0], [50.0, 50.0]])
        frame = convergence_frame([record], [detect_consensus(record, 1e-6)])
        assert list(frame.columns) == ["experiment", "consensus", "consensus_value", "convergence_round",
                                       "final_spread", "bias", "fallbacks"]
        assert frame.loc[0, "convergence_round"] == 1
