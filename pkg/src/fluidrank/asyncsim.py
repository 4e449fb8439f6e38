"""Deterministic single-process simulation of distributed diffusion.

The fluid vector can be split arbitrarily and its pieces processed in any
fair order, each piece's mass bounding the error it still carries. Workers
own disjoint contiguous node ranges, diffuse greedily within their range, and
forward cross-range pushes as messages. The event loop is seeded, so any
interleaving can be replayed exactly; real threads, transports, and faults
are out of scope, but conservation can be audited at any quiesce point.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .engine import ConvergenceTrace


@dataclass
class FluidMessage:
    """One in-flight fluid share addressed to a node."""

    target: int
    amount: float
    epoch: int = 0


@dataclass
class WorkerPartition:
    """A worker owning the node range [lo, hi) with local fluid and history."""

    wid: int
    lo: int
    hi: int
    fluid: np.ndarray
    history: np.ndarray
    inbox: deque = field(default_factory=deque)

    @property
    def owned(self):
        return range(self.lo, self.hi)

    def pending_mass(self):
        return sum(abs(m.amount) for batch in self.inbox for m in batch)

    def runnable(self):
        return bool(self.inbox) or bool(np.any(self.fluid != 0.0))


def partition(graph, params, size):
    """Split nodes into contiguous ranges of the given size (last may be short).

    Each worker starts holding its slice of the initial fluid (1-d)*teleport.
    """
    if not 1 <= size <= graph.n:
        raise ValueError(f"partition size must be in [1, {graph.n}], got {size}")
    params.validate(graph.n)
    fluid0 = (1.0 - params.damping) * params.teleport_vector(graph.n)
    workers = []
    for wid, lo in enumerate(range(0, graph.n, size)):
        hi = min(lo + size, graph.n)
        workers.append(WorkerPartition(
            wid=wid, lo=lo, hi=hi,
            fluid=fluid0[lo:hi].copy(), history=np.zeros(hi - lo)))
    return workers


class AsyncSimulation:
    """Event loop driving workers under a seeded interleaving policy.

    policy 'fifo' activates workers round-robin; 'random' picks uniformly
    among runnable workers. Messages are delivered when their owner is
    activated (draining its whole inbox first), which models arbitrary
    delivery delays while keeping every run replayable from its seed.
    """

    def __init__(self, graph, params, partitions, policy="random", seed=0):
        if policy not in ("fifo", "random"):
            raise ValueError(f"unknown policy {policy!r}")
        params.validate(graph.n)
        self.graph = graph
        self.params = params
        self.workers = list(partitions)
        self.policy = policy
        self.rng = np.random.default_rng(seed)
        self.owner_of = np.zeros(graph.n, dtype=np.int64)
        for w in self.workers:
            self.owner_of[w.lo:w.hi] = w.wid
        self.residual = float(sum(np.abs(w.fluid).sum() for w in self.workers))
        self.diffusions = 0
        self.elementary_steps = 0
        self.events = 0
        self.log = []
        self._next_refresh = graph.n
        self._rr = 0

    # -- inspection ----------------------------------------------------

    def in_flight(self):
        """All messages currently sitting in inboxes."""
        return [m for w in self.workers for batch in w.inbox for m in batch]

    def exact_residual(self):
        total = sum(float(np.abs(w.fluid).sum()) for w in self.workers)
        return total + sum(abs(m.amount) for m in self.in_flight())

    def assembled(self):
        """Global (fluid, history) with in-flight mass folded into fluid."""
        fluid = np.zeros(self.graph.n)
        history = np.zeros(self.graph.n)
        for w in self.workers:
            fluid[w.lo:w.hi] = w.fluid
            history[w.lo:w.hi] = w.history
        for m in self.in_flight():
            fluid[m.target] += m.amount
        return fluid, history

    # -- stepping --------------------------------------------------------

    def runnable_workers(self):
        return [w.wid for w in self.workers if w.runnable()]

    def pick_worker(self):
        runnable = self.runnable_workers()
        if not runnable:
            return None
        if self.policy == "random":
            return runnable[int(self.rng.integers(0, len(runnable)))]
        for _ in range(len(self.workers)):
            wid = self._rr
            self._rr = (self._rr + 1) % len(self.workers)
            if self.workers[wid].runnable():
                return wid
        return None

    def activate(self, wid):
        """Deliver the worker's inbox, then diffuse its fullest owned node."""
        w = self.workers[wid]
        graph, d = self.graph, self.params.damping
        while w.inbox:
            batch = w.inbox.popleft()
            for m in batch:
                w.fluid[m.target - w.lo] += m.amount
                self.events += 1
                self.log.append((self.events, wid, "deliver", m.target, self.residual))
        local = int(np.argmax(np.abs(w.fluid)))
        sent = w.fluid[local]
        node = w.lo + local
        if sent == 0.0:
            self.events += 1
            self.log.append((self.events, wid, "idle", node, self.residual))
            return None
        w.fluid[local] = 0.0
        w.history[local] += sent
        lo, hi = graph.out_offsets[node], graph.out_offsets[node + 1]
        deg = hi - lo
        if deg:
            kids = graph.out_targets[lo:hi]
            push = sent * (d / deg)
            outgoing = {}
            for k in kids:
                owner = int(self.owner_of[k])
                if owner == wid:
                    w.fluid[k - w.lo] += push
                else:
                    outgoing.setdefault(owner, []).append(
                        FluidMessage(target=int(k), amount=push,
                                     epoch=self.diffusions))
            for owner, batch in outgoing.items():
                self.workers[owner].inbox.append(batch)
            self.residual -= abs(sent) * (1.0 - d)
            self.elementary_steps += int(deg)
        else:
            self.residual -= abs(sent)
        self.diffusions += 1
        if self.diffusions >= self._next_refresh:
            self.residual = self.exact_residual()
            self._next_refresh = self.diffusions + self.graph.n
        self.events += 1
        self.log.append((self.events, wid, "diffuse", node, self.residual))
        return node

    def run(self, max_events=None, trace_every=None):
        """Drive to convergence; returns (rank, trace).

        Aborts if no worker is runnable, or nothing progresses for a full
        no-progress window, while the residual still exceeds the target.
        """
        d = self.params.damping
        threshold = self.params.target_error * (1.0 - d)
        trace = ConvergenceTrace()
        trace_every = self.graph.n if trace_every is None else max(1, int(trace_every))
        next_trace = self.diffusions + trace_every

        def sample():
            bound = None if d >= 1.0 else self.residual / (1.0 - d)
            trace.append(self.elementary_steps, self.diffusions, self.residual, bound)

        sample()
        idle_streak = 0
        idle_cap = 64 * max(len(self.workers), 1)
        while True:
            if self.residual <= threshold:
                self.residual = self.exact_residual()
                if self.residual <= threshold:
                    break
            if max_events is not None and self.events >= max_events:
                break
            wid = self.pick_worker()
            if wid is None:
                self.residual = self.exact_residual()
                if self.residual <= threshold:
                    break
                raise RuntimeError(
                    f"no runnable worker while bound {self.residual / (1.0 - d):.3g} "
                    f"exceeds target {self.params.target_error:.3g}")
            before = self.diffusions
            self.activate(wid)
            idle_streak = idle_streak + 1 if self.diffusions == before else 0
            if idle_streak >= idle_cap:
                self.residual = self.exact_residual()
                if self.residual <= threshold:
                    break
                raise RuntimeError(
                    f"{idle_streak} activations without progress; "
                    "interleaving policy looks unfair")
            if self.diffusions >= next_trace:
                sample()
                next_trace = self.diffusions + trace_every

        self.residual = self.exact_residual()
        if not trace.rows or trace.rows[-1].diffusions != self.diffusions:
            sample()
        _, history = self.assembled()
        total = float(np.abs(history).sum())
        rank = history / total if total > 0.0 else history
        return rank, trace

    def write_log(self, sink):
        close = False
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            sink = open(sink, "w", encoding="utf-8", newline="")
            close = True
        try:
            sink.write("event,worker,kind,id,residual\n")
            for event, wid, kind, ident, residual in self.log:
                sink.write(f"{event},{wid},{kind},{ident},{residual:.17g}\n")
        finally:
            if close:
                sink.close()


def simulate(graph, params, partitions, policy="random", seed=0,
             max_events=None, trace_every=None):
    """Run one full simulated computation; returns (rank, simulation).

    The simulation object carries the step log and final state for auditing.
    """
    sim = AsyncSimulation(graph, params, partitions, policy=policy, seed=seed)
    rank, trace = sim.run(max_events=max_events, trace_every=trace_every)
    sim.trace = trace
    return rank, sim


def global_invariant_check(partitions, in_flight, graph, params):
    """Largest componentwise violation of the conservation identity.

    At any quiesce point (messages counted as fluid at their targets) the
    assembled state must satisfy history + fluid = fluid0 + d*P*history.
    """
    n = graph.n
    fluid = np.zeros(n)
    history = np.zeros(n)
    for w in partitions:
        fluid[w.lo:w.hi] += w.fluid
        history[w.lo:w.hi] += w.history
    for m in in_flight:
        fluid[m.target] += m.amount
    fluid0 = (1.0 - params.damping) * params.teleport_vector(n)
    src, dst = graph.edge_arrays()
    pushed = np.zeros(n)
    if src.size:
        np.add.at(pushed, dst, history[src] / graph.out_degree[src])
    lhs = history + fluid
    rhs = fluid0 + params.damping * pushed
    return float(np.abs(lhs - rhs).max())
