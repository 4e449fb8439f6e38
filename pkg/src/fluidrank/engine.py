"""Fluid-diffusion ranking engine.

One diffusion zeroes the fluid at a node, credits the node's history by the
amount removed, and pushes a damping-scaled share to each child. The residual
equals the total fluid mass left, and residual/(1-damping) bounds the L1
distance of the history vector to its limit exactly on dangling-free graphs
(it is an upper bound otherwise). Dangling nodes absorb their fluid outright,
so the stored matrix is never completed; the final history is renormalized
instead.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class StarvationError(RuntimeError):
    """A scheduler kept selecting empty nodes while fluid remained."""


class ParamsMismatchError(ValueError):
    """Two run phases were configured with incompatible parameters."""


@dataclass
class DiffusionParams:
    """Damping, teleport distribution, and stopping threshold.

    teleport=None means uniform 1/N. damping=1.0 is accepted only for
    diagnostic runs with an explicit step budget: without damping the
    residual-based stopping rule has no finite guarantee.
    """

    damping: float = 0.85
    teleport: np.ndarray | None = None
    target_error: float = 1e-8

    def validate(self, n=None):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.target_error <= 0.0:
            raise ValueError(f"target_error must be positive, got {self.target_error}")
        if self.teleport is not None:
            v = np.asarray(self.teleport, dtype=np.float64)
            if n is not None and v.shape != (n,):
                raise ValueError(f"teleport length {v.shape} does not match n={n}")
            if np.any(v < 0.0):
                raise ValueError("teleport vector has negative entries")
            if abs(v.sum() - 1.0) > 1e-12:
                raise ValueError(f"teleport vector sums to {v.sum()!r}, expected 1")

    def teleport_vector(self, n):
        if self.teleport is None:
            return np.full(n, 1.0 / n)
        v = np.asarray(self.teleport, dtype=np.float64)
        if v.shape != (n,):
            raise ValueError(f"teleport length {v.shape} does not match n={n}")
        return v.copy()

    def matches(self, other):
        same_v = (self.teleport is None and other.teleport is None) or (
            self.teleport is not None and other.teleport is not None
            and np.array_equal(self.teleport, other.teleport))
        return (self.damping == other.damping
                and self.target_error == other.target_error and same_v)


@dataclass
class TraceRow:
    elementary_steps: int
    diffusions: int
    residual: float
    bound: float | None
    true_error: float | None = None


class ConvergenceTrace:
    """Sampled convergence history, serializable as CSV."""

    FIELDS = ("elementary_steps", "diffusions", "residual", "bound", "true_error")

    def __init__(self):
        self.rows = []

    def append(self, elementary_steps, diffusions, residual, bound, true_error=None):
        self.rows.append(TraceRow(int(elementary_steps), int(diffusions),
                                  float(residual),
                                  None if bound is None else float(bound),
                                  true_error))

    def write_csv(self, sink):
        close = False
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            sink = open(sink, "w", encoding="utf-8", newline="")
            close = True
        try:
            writer = csv.writer(sink)
            writer.writerow(self.FIELDS)
            for r in self.rows:
                writer.writerow([
                    r.elementary_steps, r.diffusions,
                    f"{r.residual:.17g}",
                    "" if r.bound is None else f"{r.bound:.17g}",
                    "" if r.true_error is None else f"{r.true_error:.17g}",
                ])
        finally:
            if close:
                sink.close()

    def steps_to_error(self, threshold):
        """Elementary steps at the first sample with true_error <= threshold."""
        for r in self.rows:
            if r.true_error is not None and r.true_error <= threshold:
                return r.elementary_steps
        return None

    def __len__(self):
        return len(self.rows)


@dataclass
class DiffusionState:
    """Mutable per-run state: fluid, history, residual, and step counters.

    signed is set when the fluid can carry negative mass (incremental update
    runs); magnitudes are used for the residual and for scheduling then.
    """

    fluid: np.ndarray
    history: np.ndarray
    residual: float
    diffusions: int = 0
    elementary_steps: int = 0
    signed: bool = False
    graph: object = None
    params: DiffusionParams = None

    def fluid_magnitude(self):
        return np.abs(self.fluid) if self.signed else self.fluid

    def exact_residual(self):
        return float(np.abs(self.fluid).sum()) if self.signed else float(self.fluid.sum())


def init(graph, params):
    """Fresh state: fluid = (1-damping) * teleport, empty history.

    In the undamped diagnostic mode the scaling would zero the fluid, and any
    start vector is admissible there, so the teleport vector itself is used.
    """
    params.validate(graph.n)
    v = params.teleport_vector(graph.n)
    fluid = v if params.damping >= 1.0 else (1.0 - params.damping) * v
    return DiffusionState(fluid=fluid, history=np.zeros(graph.n),
                          residual=float(fluid.sum()), graph=graph, params=params)


def init_from_fluid(graph, params, fluid, history=None):
    """State seeded with an arbitrary (possibly signed) initial fluid."""
    params.validate(graph.n)
    fluid = np.asarray(fluid, dtype=np.float64).copy()
    if fluid.shape != (graph.n,):
        raise ValueError(f"fluid length {fluid.shape} does not match n={graph.n}")
    history = np.zeros(graph.n) if history is None else np.asarray(history, dtype=np.float64).copy()
    signed = bool(np.any(fluid < 0.0))
    residual = float(np.abs(fluid).sum()) if signed else float(fluid.sum())
    return DiffusionState(fluid=fluid, history=history, residual=residual,
                          signed=signed, graph=graph, params=params)


def diffuse(state, i, graph=None, params=None):
    """Diffuse node i once: absorb its fluid, push damped shares to children.

    A node holding no fluid is a no-op that costs nothing. Dangling nodes
    absorb their whole fluid (zero elementary steps, full residual drop);
    others keep the (1-damping) share of what was sent.
    """
    graph = state.graph if graph is None else graph
    params = state.params if params is None else params
    fluid = state.fluid
    sent = fluid[i]
    if sent == 0.0:
        return state
    fluid[i] = 0.0
    state.history[i] += sent
    lo, hi = graph.out_offsets[i], graph.out_offsets[i + 1]
    deg = hi - lo
    if deg:
        fluid[graph.out_targets[lo:hi]] += sent * (params.damping / deg)
        state.residual -= abs(sent) * (1.0 - params.damping)
        state.elementary_steps += int(deg)
    else:
        state.residual -= abs(sent)
    state.diffusions += 1
    return state


def error_bound(state, params=None):
    """Upper bound on the L1 distance of history to its limit.

    Exactly the distance on dangling-free graphs; an upper bound once dangling
    fluid has been absorbed. Unbounded in the undamped diagnostic mode.
    """
    params = state.params if params is None else params
    if params.damping >= 1.0:
        return math.inf
    return state.residual / (1.0 - params.damping)


def collect(state, i, graph=None, params=None):
    """Pull-style recompute of one history entry from its in-links.

    Sets history[i] = (1-damping)*teleport[i] + damping * sum over parents j of
    history[j]/out_degree(j). The converged history of a diffusion run is a
    fixed point of this update; provided for cross-validation against the
    push-produced history.
    """
    graph = state.graph if graph is None else graph
    params = state.params if params is None else params
    if not 0 <= i < graph.n:
        raise IndexError(f"node {i} out of range")
    v = params.teleport[i] if params.teleport is not None else 1.0 / graph.n
    parents = graph.parents(i)
    pulled = 0.0
    if parents.size:
        pulled = float((state.history[parents] / graph.out_degree[parents]).sum())
    state.history[i] = (1.0 - params.damping) * v + params.damping * pulled
    return state.history


def _normalized(x):
    total = float(np.abs(x).sum())
    return x / total if total > 0.0 else x.copy()


def run(graph, params, scheduler, trace_every=None, reference=None,
        max_diffusions=None, state=None):
    """Diffuse under a scheduler until residual/(1-damping) <= target_error.

    Returns (rank, trace) where rank is the history renormalized to sum one
    (a no-op up to target_error when the graph has no dangling nodes). The
    residual is maintained incrementally and re-derived from the fluid every
    N diffusions to cancel float drift. reference, when given, is a normalized
    rank vector used to record true L1 errors in the trace.

    With damping=1.0 (diagnostic mode) there is no residual guarantee and
    max_diffusions is required.
    """
    params.validate(graph.n)
    n = graph.n
    d = params.damping
    if d >= 1.0 and max_diffusions is None:
        raise ValueError("undamped diagnostic mode requires max_diffusions")
    if state is None:
        state = init(graph, params)
    threshold = params.target_error * (1.0 - d)
    trace = ConvergenceTrace()
    ref = None if reference is None else np.asarray(reference, dtype=np.float64)

    fluid = state.fluid
    trace_every = n if trace_every is None else max(1, int(trace_every))
    next_trace = state.diffusions + trace_every
    next_refresh = state.diffusions + n

    def sample():
        err = None
        if ref is not None:
            h1 = float(np.abs(state.history).sum())
            if h1 > 0.0:
                err = float(np.abs(state.history / h1 - ref).sum())
        bound = None if d >= 1.0 else state.residual / (1.0 - d)
        trace.append(state.elementary_steps, state.diffusions,
                     state.residual, bound, err)

    sample()

    # Starvation bookkeeping: distinct empty nodes seen since the last real
    # diffusion, tracked with an epoch-stamp array so resets are O(1).
    stamp = np.zeros(n, dtype=np.int64)
    epoch = 1
    distinct_empty = 0
    empty_streak = 0
    streak_cap = 64 * n

    while True:
        if state.residual <= threshold:
            state.residual = state.exact_residual()
            if state.residual <= threshold:
                break
        if max_diffusions is not None and state.diffusions >= max_diffusions:
            break

        i = scheduler.next(state, graph)
        sent = fluid[i]
        if sent == 0.0:
            empty_streak += 1
            if stamp[i] != epoch:
                stamp[i] = epoch
                distinct_empty += 1
            if distinct_empty >= n or empty_streak >= streak_cap:
                state.residual = state.exact_residual()
                if state.residual <= threshold:
                    break
                raise StarvationError(
                    f"scheduler made {empty_streak} empty selections covering "
                    f"{distinct_empty} nodes while bound "
                    f"{error_bound(state, params):.3g} exceeds target "
                    f"{params.target_error:.3g}")
            continue

        # inline diffusion step (hot loop)
        fluid[i] = 0.0
        state.history[i] += sent
        lo, hi = graph.out_offsets[i], graph.out_offsets[i + 1]
        deg = hi - lo
        if deg:
            fluid[graph.out_targets[lo:hi]] += sent * (d / deg)
            state.residual -= abs(sent) * (1.0 - d)
            state.elementary_steps += int(deg)
        else:
            state.residual -= abs(sent)
        state.diffusions += 1
        empty_streak = 0
        distinct_empty = 0
        epoch += 1

        if state.diffusions >= next_refresh:
            state.residual = state.exact_residual()
            next_refresh = state.diffusions + n
        if state.diffusions >= next_trace:
            sample()
            next_trace = state.diffusions + trace_every

    state.residual = state.exact_residual()
    if not trace.rows or trace.rows[-1].diffusions != state.diffusions:
        sample()
    return _normalized(state.history), trace
