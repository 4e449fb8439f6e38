"""Synthetic power-law link-graph generator.

Source and destination nodes of each link are drawn independently from
rank-weighted distributions proportional to 1/k^alpha. Each distribution's
node-to-weight assignment is shuffled by a number of random transpositions,
so heavy in-degree and heavy out-degree land on unrelated nodes and node
order carries no information a periodic scheduler could exploit. Realistic
web-graph structure is explicitly not the goal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph


class GenerationError(RuntimeError):
    """Could not realize the requested number of distinct links."""


@dataclass
class GenConfig:
    """Generator inputs; permutations defaults to the node count."""

    n: int
    links: int
    alpha: float
    permutations: int | None = None
    seed: int = 0

    def validate(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n}")
        if self.links < 1:
            raise ValueError(f"need at least 1 link, got {self.links}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.permutations is not None and self.permutations < 0:
            raise ValueError("permutations must be nonnegative")


@dataclass(frozen=True)
class GenReport:
    realized_links: int
    dangling: int
    isolated: int
    attempts: int
    seed: int


def _shuffled_power_weights(n, alpha, swaps, rng):
    ranks = np.arange(1, n + 1, dtype=np.float64)
    weights = ranks ** -alpha
    if swaps:
        pairs = rng.integers(0, n, size=(swaps, 2))
        for a, b in pairs:
            weights[a], weights[b] = weights[b], weights[a]
    cum = np.cumsum(weights / weights.sum())
    cum[-1] = 1.0  # guard against cumsum rounding below the sample range
    return cum


def generate(config, max_attempts=None):
    """Draw distinct links until the target count is reached.

    Self-loops and repeats are rejected; the attempt budget defaults to
    500x the target (plus a floor), after which the configuration is deemed
    infeasible. Returns (graph, report).
    """
    config.validate()
    n, target = config.n, config.links
    swaps = n if config.permutations is None else config.permutations
    if max_attempts is None:
        max_attempts = max(1_000_000, 500 * target)
    rng = np.random.default_rng(config.seed)
    cum_src = _shuffled_power_weights(n, config.alpha, swaps, rng)
    cum_dst = _shuffled_power_weights(n, config.alpha, swaps, rng)

    accepted = np.empty(0, dtype=np.int64)
    attempts = 0
    batch = max(1024, min(target * 2, 1 << 18))
    while accepted.size < target:
        if attempts >= max_attempts:
            raise GenerationError(
                f"only {accepted.size} of {target} distinct links after "
                f"{attempts} draws; distribution too concentrated for n={n}")
        take = min(batch, max_attempts - attempts)
        src = np.searchsorted(cum_src, rng.random(take), side="right")
        dst = np.searchsorted(cum_dst, rng.random(take), side="right")
        attempts += take
        keys = src.astype(np.int64) * n + dst
        keys = np.unique(keys[src != dst])
        fresh = keys[~np.isin(keys, accepted, assume_unique=True)]
        # only the final batch may overshoot; trim its surplus (batch-internal
        # order is arbitrary, so this introduces no cross-batch bias)
        need = target - accepted.size
        accepted = np.concatenate([accepted, fresh[:need]])

    graph = SparseGraph.from_edges(n, accepted // n, accepted % n)
    linked = np.zeros(n, dtype=bool)
    linked[accepted // n] = True
    linked[accepted % n] = True
    report = GenReport(realized_links=graph.edge_count,
                       dangling=graph.dangling_count,
                       isolated=int(n - linked.sum()),
                       attempts=attempts, seed=config.seed)
    return graph, report


def degree_report(graph):
    """Exact in/out degree histograms as {degree: node count} dicts."""
    out_hist = np.bincount(graph.out_degree)
    in_hist = np.bincount(graph.in_degree)
    return {
        "out": {int(d): int(c) for d, c in enumerate(out_hist) if c},
        "in": {int(d): int(c) for d, c in enumerate(in_hist) if c},
    }
