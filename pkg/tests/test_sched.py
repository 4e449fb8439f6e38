from types import SimpleNamespace

import numpy as np
import pytest

from fluidrank.engine import DiffusionParams, diffuse, init
from fluidrank.sched import (KINDS, DegreeScaledScheduler, GreedyScheduler,
                             RandomScheduler, RoundRobinScheduler,
                             ThresholdSweepScheduler, make_scheduler)

from conftest import random_graph


def fake_state(fluid):
    fluid = np.asarray(fluid, dtype=np.float64)
    return SimpleNamespace(fluid=fluid, signed=False,
                           fluid_magnitude=lambda: fluid)


def fake_graph(out_degree, in_degree=None):
    out = np.asarray(out_degree)
    inc = np.zeros_like(out) if in_degree is None else np.asarray(in_degree)
    return SimpleNamespace(n=out.size, out_degree=out, in_degree=inc)


class TestGreedy:
    def test_argmax(self):
        s = GreedyScheduler()
        assert s.next(fake_state([0.2, 0.5, 0.3]), fake_graph([1, 1, 1])) == 1

    def test_tie_breaks_low_index(self):
        s = GreedyScheduler()
        assert s.next(fake_state([0.4, 0.4]), fake_graph([1, 1])) == 0

    def test_scores_are_fluid(self):
        s = GreedyScheduler()
        state = fake_state([0.1, 0.7])
        assert np.array_equal(s.scores(state, fake_graph([1, 1])), [0.1, 0.7])

    def test_selection_at_least_mean_fluid(self):
        rng = np.random.default_rng(2)
        g = random_graph(rng, 40)
        params = DiffusionParams()
        state = init(g, params)
        s = GreedyScheduler()
        for _ in range(200):
            i = s.next(state, g)
            assert state.fluid[i] >= state.fluid.sum() / g.n - 1e-15
            diffuse(state, i)


class TestDegreeScaled:
    def test_in_and_out_weighting(self):
        s = DegreeScaledScheduler(use_in_degree=True)
        g = fake_graph(out_degree=[3, 0], in_degree=[0, 1])
        state = fake_state([0.4, 0.4])
        # scores 0.4/(1*4) = 0.1 and 0.4/(2*1) = 0.2
        assert s.next(state, g) == 1
        assert np.allclose(s.scores(state, g), [0.1, 0.2])

    def test_out_only_weighting(self):
        s = DegreeScaledScheduler(use_in_degree=False)
        g = fake_graph(out_degree=[1, 2])
        state = fake_state([0.6, 0.6])
        assert np.allclose(s.scores(state, g), [0.3, 0.2])
        assert s.next(state, g) == 0

    def test_scores_unchanged_by_empty_node(self):
        a = DegreeScaledScheduler(use_in_degree=True)
        b = DegreeScaledScheduler(use_in_degree=True)
        g1 = fake_graph(out_degree=[2, 5], in_degree=[1, 3])
        g2 = fake_graph(out_degree=[2, 5, 7], in_degree=[1, 3, 2])
        s1 = a.scores(fake_state([0.3, 0.2]), g1)
        s2 = b.scores(fake_state([0.3, 0.2, 0.0]), g2)
        assert np.allclose(s1, s2[:2])
        assert s2[2] == 0.0


class TestRoundRobin:
    def test_cycles(self):
        s = RoundRobinScheduler()
        g = fake_graph([1, 1, 1])
        state = fake_state([0.1, 0.1, 0.1])
        assert [s.next(state, g) for _ in range(7)] == [0, 1, 2, 0, 1, 2, 0]

    def test_uniform_scores(self):
        s = RoundRobinScheduler()
        assert np.allclose(s.scores(fake_state([1.0, 0.0]), fake_graph([1, 1])),
                           [0.5, 0.5])


class TestRandom:
    def test_seed_reproducible(self):
        g = fake_graph(np.ones(37, dtype=np.int64))
        state = fake_state(np.ones(37))
        a = RandomScheduler(seed=5)
        b = RandomScheduler(seed=5)
        seq_a = [a.next(state, g) for _ in range(500)]
        seq_b = [b.next(state, g) for _ in range(500)]
        assert seq_a == seq_b
        assert min(seq_a) >= 0 and max(seq_a) < 37

    def test_covers_all_nodes(self):
        g = fake_graph(np.ones(10, dtype=np.int64))
        state = fake_state(np.ones(10))
        s = RandomScheduler(seed=1)
        seen = {s.next(state, g) for _ in range(500)}
        assert seen == set(range(10))


class TestThresholdSweep:
    def test_selects_above_threshold_in_index_order(self):
        s = ThresholdSweepScheduler(decay=0.5)
        g = fake_graph([1, 1, 1, 1])
        state = fake_state([0.2, 0.8, 0.8, 0.1])
        picks = [s.next(state, g) for _ in range(2)]
        assert picks == [1, 2]  # only nodes at the initial max threshold

    def test_threshold_decays_when_pass_empty(self):
        s = ThresholdSweepScheduler(decay=0.5)
        g = fake_graph([1, 1])
        state = fake_state([0.3, 0.8])
        assert s.next(state, g) == 1
        state.fluid[1] = 0.0
        # 0.3 < 0.8 forces a decay to 0.4, then another to 0.2
        assert s.next(state, g) == 0
        assert s.threshold == pytest.approx(0.2)

    def test_selected_nodes_meet_threshold(self):
        rng = np.random.default_rng(6)
        g = random_graph(rng, 30)
        params = DiffusionParams()
        state = init(g, params)
        s = ThresholdSweepScheduler()
        last_threshold = np.inf
        for _ in range(300):
            i = s.next(state, g)
            if state.fluid[i] > 0:
                assert state.fluid[i] >= s.threshold
            assert s.threshold <= last_threshold
            last_threshold = s.threshold
            diffuse(state, i)

    def test_bad_decay(self):
        with pytest.raises(ValueError):
            ThresholdSweepScheduler(decay=1.0)


class TestFactory:
    @pytest.mark.parametrize("kind", KINDS)
    def test_known_kinds(self, kind):
        assert make_scheduler(kind).kind == kind

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_scheduler("fancy")

    @pytest.mark.parametrize("kind", ["max", "per", "sweep", "op", "op2"])
    def test_deterministic_sequences(self, kind):
        rng = np.random.default_rng(13)
        g = random_graph(rng, 25)
        params = DiffusionParams()

        def sequence():
            state = init(g, params)
            s = make_scheduler(kind)
            picks = []
            for _ in range(150):
                i = s.next(state, g)
                picks.append(i)
                diffuse(state, i)
            return picks

        assert sequence() == sequence()
