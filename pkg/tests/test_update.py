import numpy as np
import pytest

from fluidrank.engine import (DiffusionParams, ParamsMismatchError, init,
                              init_from_fluid, run)
from fluidrank.graph import GraphDelta, SparseGraph, apply_delta
from fluidrank.sched import GreedyScheduler
from fluidrank.update import SignedFluid, delta_fluid, resume, resume_state

from conftest import dense_transition, random_graph

D = 0.85


def converged_state(graph, params):
    state = init(graph, params)
    run(graph, params, GreedyScheduler(), state=state)
    return state


def random_single_edit(rng, graph):
    """One random edge flip that keeps the graph valid."""
    for _ in range(200):
        s, t = int(rng.integers(0, graph.n)), int(rng.integers(0, graph.n))
        if s == t:
            continue
        if graph.has_edge(s, t):
            return GraphDelta(added=[], removed=[(s, t)])
        return GraphDelta(added=[(s, t)], removed=[])
    raise AssertionError("could not build an edit")


class TestSignedFluid:
    def test_split_and_net(self):
        sf = SignedFluid.from_net(np.array([0.5, -0.2, 0.0]))
        assert np.array_equal(sf.pos, [0.5, 0.0, 0.0])
        assert np.array_equal(sf.neg, [0.0, 0.2, 0.0])
        assert np.array_equal(sf.net, [0.5, -0.2, 0.0])
        assert sf.l1() == pytest.approx(0.7)

    def test_parts_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            SignedFluid(pos=np.array([-1.0]), neg=np.array([0.0]))


class TestDeltaFluid:
    def test_identical_graphs_give_zero(self, two_cycle):
        h = np.array([0.4, 0.6])
        sf = delta_fluid(two_cycle, two_cycle, h, D)
        assert sf.l1() == 0.0

    def test_single_column_split(self):
        g = SparseGraph.from_edges(3, [0], [1])
        g2 = apply_delta(g, GraphDelta(added=[(0, 2)], removed=[]))
        h = np.array([0.3, 0.1, 0.2])
        sf = delta_fluid(g, g2, h, D)
        # column 0 moves half its weight from node 1 to node 2
        assert sf.pos[2] == pytest.approx(D * 0.3 / 2)
        assert sf.neg[1] == pytest.approx(D * 0.3 / 2)
        assert sf.pos[1] == sf.neg[2] == sf.pos[0] == sf.neg[0] == 0.0

    def test_mass_balanced_without_dangling(self):
        rng = np.random.default_rng(50)
        for _ in range(10):
            g = random_graph(rng, 30, dangling_frac=0.0)
            delta = random_single_edit(rng, g)
            g2 = apply_delta(g, delta)
            if g2.dangling_count:
                continue  # removing a sole edge can create dangling; skip those
            h = rng.random(g.n)
            sf = delta_fluid(g, g2, h, D)
            assert sf.pos.sum() == pytest.approx(sf.neg.sum(), abs=1e-12)

    def test_size_mismatch(self, two_cycle):
        other = SparseGraph.from_edges(3, [0], [1])
        with pytest.raises(ValueError):
            delta_fluid(two_cycle, other, np.zeros(2), D)


class TestResume:
    def test_noop_delta_returns_same_limit(self):
        rng = np.random.default_rng(51)
        g = random_graph(rng, 40)
        params = DiffusionParams()
        state = converged_state(g, params)
        before = state.history.copy()
        steps_before = state.elementary_steps
        rank, trace = resume(state, g, params, GreedyScheduler())
        assert np.array_equal(state.history, before)
        assert state.elementary_steps == steps_before
        assert np.allclose(rank, before / before.sum())

    def test_matches_fresh_run_small(self):
        g = SparseGraph.from_edges(3, [0, 1], [1, 2])
        params = DiffusionParams()
        state = converged_state(g, params)
        g2 = apply_delta(g, GraphDelta(added=[(2, 0)], removed=[]))
        rank, _ = resume(state, g2, params, GreedyScheduler())
        fresh, _ = run(g2, params, GreedyScheduler())
        assert np.abs(rank - fresh).sum() <= 2 * params.target_error

    def test_matches_dense_update_identity(self):
        rng = np.random.default_rng(52)
        params = DiffusionParams(target_error=1e-11)
        for _ in range(10):
            g = random_graph(rng, int(rng.integers(4, 20)))
            state = converged_state(g, params)
            h_old = state.history.copy()
            delta = random_single_edit(rng, g)
            g2 = apply_delta(g, delta)
            new_state, _ = resume_state(state, g2, params, GreedyScheduler())
            observed = new_state.history - h_old
            p_new = dense_transition(g2)
            p_old = dense_transition(g)
            expected = np.linalg.solve(np.eye(g.n) - D * p_new,
                                       D * (p_new - p_old) @ h_old)
            assert np.abs(observed - expected).max() < 1e-8

    def test_separate_and_joint_injection_agree(self):
        rng = np.random.default_rng(53)
        g = random_graph(rng, 25)
        params = DiffusionParams(target_error=1e-11)
        state = converged_state(g, params)
        delta = random_single_edit(rng, g)
        g2 = apply_delta(g, delta)
        injected = delta_fluid(g, g2, state.history, D)

        joint, _ = resume_state(state, g2, params, GreedyScheduler())

        pos_state = init_from_fluid(g2, params, state.fluid + injected.pos)
        run(g2, params, GreedyScheduler(), state=pos_state)
        neg_state = init_from_fluid(g2, params, injected.neg)
        run(g2, params, GreedyScheduler(), state=neg_state)
        separate = state.history + pos_state.history - neg_state.history

        assert np.abs(joint.history - separate).max() < 1e-8

    def test_params_mismatch_rejected(self):
        rng = np.random.default_rng(54)
        g = random_graph(rng, 10)
        state = converged_state(g, DiffusionParams())
        with pytest.raises(ParamsMismatchError):
            resume(state, g, DiffusionParams(damping=0.5), GreedyScheduler())

    def test_resume_cheaper_than_fresh(self):
        rng = np.random.default_rng(55)
        params = DiffusionParams()
        wins = trials = 0
        for _ in range(20):
            g = random_graph(rng, 80)
            state = converged_state(g, params)
            delta = random_single_edit(rng, g)
            g2 = apply_delta(g, delta)
            _, resumed_trace = resume(state, g2, params, GreedyScheduler())
            _, fresh_trace = run(g2, params, GreedyScheduler())
            trials += 1
            if resumed_trace.rows[-1].elementary_steps < fresh_trace.rows[-1].elementary_steps:
                wins += 1
        assert wins >= 0.9 * trials

    def test_agreement_on_batch_edits(self):
        rng = np.random.default_rng(56)
        params = DiffusionParams()
        g = random_graph(rng, 60)
        state = converged_state(g, params)
        g2 = g
        for _ in range(5):
            g2 = apply_delta(g2, random_single_edit(rng, g2))
        rank, _ = resume(state, g2, params, GreedyScheduler())
        fresh, _ = run(g2, params, GreedyScheduler())
        assert np.abs(rank - fresh).sum() <= 2 * params.target_error
