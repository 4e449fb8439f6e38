"""Reference solvers the diffusion engine is benchmarked against.

power_iterate is the classic dense-sweep iteration X <- d*P*X + (1-d)*V with
dangling mass folded back through the teleport vector; one iteration costs L
elementary steps (one per stored nonzero). The online ranker keeps per-node
cash constant in total (no damping), so it has no residual-based stopping rule
and converges only in the slow time-averaged sense; its accuracy is measured
against a precomputed reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import ConvergenceTrace


def power_iterate(graph, params, target_error=None, trace_every=1,
                  reference=None, max_iterations=1_000_000):
    """Power iteration with implicit dangling completion by the teleport vector.

    Stops when |X_n - X_{n-1}|_1 * d/(1-d) <= target_error (defaults to
    params.target_error). Returns (rank, trace); the iterate is renormalized
    every step, so |rank|_1 = 1.
    """
    params.validate(graph.n)
    d = params.damping
    if d >= 1.0:
        raise ValueError("power iteration requires damping < 1")
    if target_error is None:
        target_error = params.target_error
    v = params.teleport_vector(graph.n)
    matrix = graph.to_matrix()
    ref = None if reference is None else np.asarray(reference, dtype=np.float64)

    x = v.copy()
    trace = ConvergenceTrace()
    steps = 0
    length = graph.edge_count
    scale = d / (1.0 - d)
    for iteration in range(1, max_iterations + 1):
        y = d * (matrix @ x) + (1.0 - d) * v
        y += (1.0 - y.sum()) * v  # reinject dangling mass through the teleport
        diff = float(np.abs(y - x).sum())
        x = y
        steps += length
        if iteration % trace_every == 0 or diff * scale <= target_error:
            err = None if ref is None else float(np.abs(x - ref).sum())
            trace.append(steps, iteration, diff, diff * scale, err)
        if diff * scale <= target_error:
            break
    else:
        raise RuntimeError(f"no convergence within {max_iterations} iterations")
    return x, trace


@dataclass
class OnlineRankState:
    """Constant-total cash walker state.

    Cash absorbed at dangling nodes is redistributed uniformly; the uniform
    share is kept in a running pool scalar instead of touching every entry,
    with claimed[i] recording the pool level node i has already collected.
    """

    cash: np.ndarray
    credit: np.ndarray
    claimed: np.ndarray
    pool: float = 0.0
    steps: int = 0
    elementary_steps: int = 0

    def effective_cash(self):
        return self.cash + (self.pool - self.claimed) / self.cash.size

    def cash_total(self):
        n = self.cash.size
        return float(self.cash.sum() + (self.pool * n - self.claimed.sum()) / n)

    def rebase_pool(self):
        """Fold accrued pool shares into explicit cash and reset the pool.

        The pool only ever grows, and pool-minus-claimed differences lose
        precision once it dwarfs the unit cash mass; rebasing keeps the
        representation exact over arbitrarily long runs.
        """
        self.cash += (self.pool - self.claimed) / self.cash.size
        self.claimed[:] = 0.0
        self.pool = 0.0

    def estimate(self):
        """Current importance estimate: (credit + cash) renormalized."""
        raw = self.credit + self.effective_cash()
        return raw / raw.sum()

    # lets the shared schedulers treat cash as the quantity to drain
    @property
    def fluid(self):
        return self.effective_cash()

    def fluid_magnitude(self):
        return self.effective_cash()

    signed = False


def online_init(graph, params):
    """Initial state with cash spread as the teleport distribution."""
    v = params.teleport_vector(graph.n)
    return OnlineRankState(cash=v, credit=np.zeros(graph.n),
                           claimed=np.zeros(graph.n))


def online_step(state, i, graph):
    """Move all of node i's cash to its children (no damping).

    Dangling cash goes to the uniform pool, which every node (including i)
    draws from lazily. Total cash is conserved exactly up to rounding. A node
    with no effective cash is a no-op.
    """
    if not 0 <= i < graph.n:
        raise IndexError(f"node {i} out of range")
    n = graph.n
    sent = state.cash[i] + (state.pool - state.claimed[i]) / n
    if sent == 0.0:
        return state
    state.credit[i] += sent
    state.cash[i] = 0.0
    state.claimed[i] = state.pool
    kids = graph.children(i)
    if kids.size:
        state.cash[kids] += sent / kids.size
        state.elementary_steps += int(kids.size)
    else:
        state.pool += sent
        if state.pool > 128.0:
            state.rebase_pool()
    state.steps += 1
    return state


def online_error(state, reference):
    """L1 distance of the current estimate to a reference rank vector."""
    ref = np.asarray(reference, dtype=np.float64)
    if ref.shape != state.cash.shape:
        raise ValueError("reference length does not match state")
    return float(np.abs(state.estimate() - ref).sum())


def online_run(graph, params, scheduler, budget, reference=None,
               trace_every=None):
    """Drive online steps until the elementary-step budget is spent.

    Returns (estimate, trace). The trace residual column reports the constant
    cash total; there is no error bound to report.
    """
    state = online_init(graph, params)
    trace = ConvergenceTrace()
    trace_every = graph.n if trace_every is None else max(1, int(trace_every))
    ref = None if reference is None else np.asarray(reference, dtype=np.float64)

    def sample():
        err = None if ref is None else online_error(state, ref)
        trace.append(state.elementary_steps, state.steps,
                     state.cash_total(), None, err)

    sample()
    next_trace = state.steps + trace_every
    stall = 0
    stall_cap = 64 * graph.n
    while state.elementary_steps < budget and graph.edge_count > 0:
        i = scheduler.next(state, graph)
        before = state.elementary_steps
        online_step(state, i, graph)
        stall = stall + 1 if state.elementary_steps == before else 0
        if stall >= stall_cap:
            raise RuntimeError(
                f"{stall} selections without touching a link; scheduler starved")
        if state.steps >= next_trace:
            sample()
            next_trace = state.steps + trace_every
    if not trace.rows or trace.rows[-1].diffusions != state.steps:
        sample()
    return state.estimate(), trace
