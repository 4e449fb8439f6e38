"""Node-selection strategies for the diffusion loop.

Every strategy is fair (selects each node infinitely often in an infinite
run), which is all the convergence proof needs; the choice only affects how
fast the residual drains. Ties break toward the lowest index so that runs
are reproducible.
"""

from __future__ import annotations

import numpy as np

KINDS = ("max", "rand", "per", "sweep", "op", "op2")


class GreedyScheduler:
    """Always the node holding the most fluid (argmax, lowest index on ties)."""

    kind = "max"

    def next(self, state, graph):
        return int(np.argmax(state.fluid_magnitude()))

    def scores(self, state, graph):
        return state.fluid_magnitude().copy()


class RandomScheduler:
    """Uniform random node from a seeded generator; draws are chunked."""

    kind = "rand"

    def __init__(self, seed=0, chunk=4096):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._chunk = chunk
        self._buffer = None
        self._pos = 0

    def next(self, state, graph):
        if self._buffer is None or self._pos >= self._buffer.size:
            self._buffer = self._rng.integers(0, graph.n, self._chunk)
            self._pos = 0
        i = int(self._buffer[self._pos])
        self._pos += 1
        return i

    def scores(self, state, graph):
        return np.full(graph.n, 1.0 / graph.n)


class RoundRobinScheduler:
    """Cycles 0, 1, ..., N-1 periodically."""

    kind = "per"

    def __init__(self):
        self._count = 0

    def next(self, state, graph):
        i = self._count % graph.n
        self._count += 1
        return i

    def scores(self, state, graph):
        return np.full(graph.n, 1.0 / graph.n)


class ThresholdSweepScheduler:
    """Index-order passes over nodes holding at least a threshold of fluid.

    The threshold starts at the initial max fluid and is scaled down by the
    decay factor whenever a full pass selects nothing, approximating argmax
    without a per-step global scan of comparable cost in practice.
    """

    kind = "sweep"

    def __init__(self, decay=0.5):
        if not 0.0 < decay < 1.0:
            raise ValueError(f"decay must be in (0, 1), got {decay}")
        self.decay = decay
        self.threshold = None
        self._cursor = 0
        self._hits_in_pass = 0

    def next(self, state, graph):
        f = state.fluid_magnitude()
        if self.threshold is None:
            self.threshold = float(f.max())
        while True:
            tail = f[self._cursor:]
            if tail.size:
                hits = tail >= self.threshold
                if hits.any():
                    i = self._cursor + int(np.argmax(hits))
                    self._cursor = i + 1
                    self._hits_in_pass += 1
                    return i
            # pass exhausted
            if self._hits_in_pass == 0:
                peak = float(f.max())
                if peak <= 0.0:
                    # nothing to select anywhere; hand back an empty node and
                    # let the run loop decide (converged or starved)
                    self._cursor = 1 % graph.n
                    return 0
                self.threshold *= self.decay
            self._cursor = 0
            self._hits_in_pass = 0

    def scores(self, state, graph):
        return state.fluid_magnitude().copy()


class DegreeScaledScheduler:
    """Argmax of fluid divided by a static degree weight.

    With use_in_degree the weight is (in_degree+1)*(out_degree+1): out-degree
    approximates the cost of diffusing the node, in-degree the value of
    waiting for more fluid to aggregate before paying that cost. Without it
    the weight is just (out_degree+1).
    """

    def __init__(self, use_in_degree=True):
        self.use_in_degree = use_in_degree
        self.kind = "op" if use_in_degree else "op2"
        self._inv_weight = None
        self._graph = None

    def _weights(self, graph):
        if self._inv_weight is None or self._graph is not graph:
            w = (graph.out_degree + 1).astype(np.float64)
            if self.use_in_degree:
                w *= (graph.in_degree + 1)
            self._inv_weight = 1.0 / w
            self._graph = graph
        return self._inv_weight

    def next(self, state, graph):
        return int(np.argmax(state.fluid_magnitude() * self._weights(graph)))

    def scores(self, state, graph):
        return state.fluid_magnitude() * self._weights(graph)


def make_scheduler(kind, seed=0, sweep_decay=0.5):
    """Scheduler instance for a CLI kind token (one of KINDS)."""
    if kind == "max":
        return GreedyScheduler()
    if kind == "rand":
        return RandomScheduler(seed=seed)
    if kind == "per":
        return RoundRobinScheduler()
    if kind == "sweep":
        return ThresholdSweepScheduler(decay=sweep_decay)
    if kind == "op":
        return DegreeScaledScheduler(use_in_degree=True)
    if kind == "op2":
        return DegreeScaledScheduler(use_in_degree=False)
    raise ValueError(f"unknown scheduler kind {kind!r}; expected one of {KINDS}")
