"""Sparse link-graph storage with uniform out-link weights, loaders, and edit deltas.

The graph is the column structure of a substochastic transition matrix: node j's
out-links are the nonzero entries of column j, each weighted 1/out_degree(j).
Columns of dangling nodes (no out-links) are stored empty; no completion vector
is ever materialized.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

MAX_NODE_ID = 2**63 - 1


class GraphFormatError(ValueError):
    """Raised for malformed or empty edge-list input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DeltaError(ValueError):
    """Raised when a delta does not match the graph it is applied to."""


@dataclass(frozen=True)
class LoadReport:
    """Loader statistics; edges_seen counts raw records before cleaning."""

    lines: int
    edges_seen: int
    duplicates_dropped: int
    self_loops_dropped: int


class SparseGraph:
    """Immutable adjacency of a column-substochastic matrix.

    Out-links are held in CSR layout over source nodes: the children of node j
    are ``out_targets[out_offsets[j]:out_offsets[j+1]]``, sorted ascending.
    Every stored column carries implied uniform weight 1/out_degree(j); columns
    of dangling nodes are empty.
    """

    def __init__(self, n, out_offsets, out_targets, original_ids=None,
                 labels=None, report=None):
        self.n = int(n)
        self.out_offsets = np.asarray(out_offsets, dtype=np.int64)
        self.out_targets = np.asarray(out_targets, dtype=np.int64)
        if self.out_offsets.shape != (self.n + 1,):
            raise ValueError("offset array must have length n+1")
        self.out_degree = np.diff(self.out_offsets)
        self.in_degree = np.bincount(self.out_targets, minlength=self.n).astype(np.int64)
        # original_ids[i] is the label node i carried in the input file
        self.original_ids = list(original_ids) if original_ids is not None else list(range(self.n))
        self.labels = dict(labels) if labels else {}
        self.report = report
        self._dangling = None
        self._matrix = None
        self._in_offsets = None
        self._in_sources = None
        self._id_index = None

    @classmethod
    def from_edges(cls, n, sources, targets, **kwargs):
        """Build a graph from parallel source/target arrays (must be clean).

        Edges must be duplicate-free and self-loop-free; use build_clean_edges
        first when that is not guaranteed.
        """
        n = int(n)
        src = np.asarray(sources, dtype=np.int64)
        dst = np.asarray(targets, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("sources and targets differ in length")
        if src.size:
            if src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(src == dst):
                raise ValueError("self-loop in edge arrays")
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
            key = src * n + dst
            if np.any(np.diff(key) == 0):
                raise ValueError("duplicate edge in edge arrays")
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(n, offsets, dst, **kwargs)

    # -- basic accessors ------------------------------------------------

    @property
    def edge_count(self):
        """Total stored links L."""
        return int(self.out_targets.size)

    def children(self, j):
        """Targets of node j's out-links (ascending, possibly empty view)."""
        return self.out_targets[self.out_offsets[j]:self.out_offsets[j + 1]]

    def column(self, j):
        """Column j of the transition matrix as [(child, weight), ...].

        Empty iff j is dangling; otherwise the uniform weights sum to one.
        """
        if not 0 <= j < self.n:
            raise IndexError(f"node {j} out of range for graph of size {self.n}")
        kids = self.children(j)
        if kids.size == 0:
            return []
        w = 1.0 / kids.size
        return [(int(i), w) for i in kids]

    def has_edge(self, src, dst):
        kids = self.children(src)
        pos = np.searchsorted(kids, dst)
        return pos < kids.size and kids[pos] == dst

    def is_dangling(self, j):
        return self.out_degree[j] == 0

    @property
    def dangling(self):
        """Indices of nodes with no out-links."""
        if self._dangling is None:
            self._dangling = np.flatnonzero(self.out_degree == 0)
        return self._dangling

    @property
    def dangling_count(self):
        return int(self.dangling.size)

    def edge_arrays(self):
        """All edges as (sources, targets) with sources repeated per degree."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree)
        return src, self.out_targets.copy()

    def index_of(self, original_id):
        """Dense index of a node given its original input id."""
        if self._id_index is None:
            self._id_index = {oid: i for i, oid in enumerate(self.original_ids)}
        try:
            return self._id_index[original_id]
        except KeyError:
            raise KeyError(f"unknown node id {original_id!r}") from None

    # -- derived structures ----------------------------------------------

    def to_matrix(self):
        """The stored substochastic matrix as scipy CSR (rows=targets, cols=sources)."""
        if self._matrix is None:
            src, dst = self.edge_arrays()
            deg = self.out_degree[src].astype(np.float64)
            self._matrix = sp.csr_matrix(
                (1.0 / deg, (dst, src)), shape=(self.n, self.n))
        return self._matrix

    def _reverse_csr(self):
        if self._in_offsets is None:
            src, dst = self.edge_arrays()
            order = np.lexsort((src, dst))
            self._in_sources = src[order]
            offsets = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(dst, minlength=self.n), out=offsets[1:])
            self._in_offsets = offsets
        return self._in_offsets, self._in_sources

    def parents(self, i):
        """Sources of node i's in-links."""
        offsets, sources = self._reverse_csr()
        return sources[offsets[i]:offsets[i + 1]]


def build_clean_edges(sources, targets):
    """Dedup and drop self-loops; returns (src, dst, duplicates, self_loops).

    Node ids must already be dense 0-based.
    """
    src = np.asarray(sources, dtype=np.int64)
    dst = np.asarray(targets, dtype=np.int64)
    loops = src == dst
    n_loops = int(loops.sum())
    if n_loops:
        src, dst = src[~loops], dst[~loops]
    if src.size == 0:
        return src, dst, 0, n_loops
    n = int(max(src.max(), dst.max())) + 1
    key = src * n + dst
    unique = np.unique(key)
    n_dups = int(key.size - unique.size)
    return unique // n, unique % n, n_dups, n_loops


def _parse_node_id(token, lineno):
    try:
        value = int(token)
    except ValueError:
        raise GraphFormatError(f"expected integer node id, got {token!r}", lineno)
    if value < 0:
        raise GraphFormatError(f"negative node id {value}", lineno)
    if value > MAX_NODE_ID:
        raise GraphFormatError(f"node id {value} overflows 64-bit range", lineno)
    return value


def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8"), True
    return source, False


def load_edge_list(source, format=None):
    """Load a graph from an edge-list text source.

    Two formats are supported and auto-detected unless forced:

    * ``pairs``: one ``src dst`` pair per line, whitespace separated; lines
      starting with ``#`` or ``%`` are comments.
    * ``prefixed``: ``n <id> [label...]`` lines declare nodes, ``e <src> <dst>``
      lines declare edges; labels are retained.

    Duplicate edges are collapsed, self-loops dropped, and node ids compacted
    to 0..N-1 in first-appearance order. Cleaning counts are attached to the
    returned graph as ``graph.report``.
    """
    if format not in (None, "auto", "pairs", "prefixed"):
        raise ValueError(f"unknown format {format!r}")
    stream, owned = _open_text(source)
    try:
        index = {}
        original = []
        labels = {}
        raw_src, raw_dst = [], []
        lines = 0
        detected = None if format in (None, "auto") else format

        def intern(node_id):
            idx = index.get(node_id)
            if idx is None:
                idx = len(original)
                index[node_id] = idx
                original.append(node_id)
            return idx

        for lineno, line in enumerate(stream, start=1):
            lines += 1
            stripped = line.strip()
            if not stripped or stripped[0] in "#%":
                continue
            tokens = stripped.split()
            if detected is None:
                detected = "prefixed" if tokens[0] in ("n", "e") else "pairs"
            if detected == "pairs":
                if len(tokens) != 2:
                    raise GraphFormatError(
                        f"expected 'src dst', got {stripped!r}", lineno)
                raw_src.append(intern(_parse_node_id(tokens[0], lineno)))
                raw_dst.append(intern(_parse_node_id(tokens[1], lineno)))
            elif tokens[0] == "n":
                if len(tokens) < 2:
                    raise GraphFormatError("node line needs an id", lineno)
                idx = intern(_parse_node_id(tokens[1], lineno))
                if len(tokens) > 2:
                    labels[idx] = " ".join(tokens[2:])
            elif tokens[0] == "e":
                if len(tokens) != 3:
                    raise GraphFormatError(
                        f"expected 'e src dst', got {stripped!r}", lineno)
                raw_src.append(intern(_parse_node_id(tokens[1], lineno)))
                raw_dst.append(intern(_parse_node_id(tokens[2], lineno)))
            else:
                raise GraphFormatError(
                    f"unknown record type {tokens[0]!r}", lineno)

        if not original:
            raise GraphFormatError("empty input: no nodes or edges found")
        src, dst, dups, loops = build_clean_edges(raw_src, raw_dst)
        report = LoadReport(lines=lines, edges_seen=len(raw_src),
                            duplicates_dropped=dups, self_loops_dropped=loops)
        return SparseGraph.from_edges(len(original), src, dst,
                                      original_ids=original, labels=labels,
                                      report=report)
    finally:
        if owned:
            stream.close()


def dump_edge_list(graph, sink):
    """Write the graph as plain 'src dst' pairs using original node ids.

    Isolated nodes (no in- or out-links) are not representable in this format.
    """
    stream, owned = (open(sink, "w", encoding="utf-8"), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        ids = graph.original_ids
        for j in range(graph.n):
            sj = ids[j]
            for i in graph.children(j):
                stream.write(f"{sj} {ids[i]}\n")
    finally:
        if owned:
            stream.close()


def canonical_bytes(graph):
    """Deterministic serialization of the edge structure, for hashing."""
    buf = io.StringIO()
    buf.write(f"{graph.n}\n")
    dump_edge_list(graph, buf)
    return buf.getvalue().encode("utf-8")


@dataclass
class GraphDelta:
    """Edge edits between two graph versions over the same node set."""

    added: list
    removed: list

    def __post_init__(self):
        self.added = [(int(s), int(t)) for s, t in self.added]
        self.removed = [(int(s), int(t)) for s, t in self.removed]
        overlap = set(self.added) & set(self.removed)
        if overlap:
            raise DeltaError(f"edges both added and removed: {sorted(overlap)}")

    def inverse(self):
        return GraphDelta(added=list(self.removed), removed=list(self.added))

    def __len__(self):
        return len(self.added) + len(self.removed)


def load_delta(source, graph=None):
    """Parse a delta file of '+ src dst' / '- src dst' lines.

    With a graph argument the node ids are original input ids and get mapped
    to dense indices; otherwise they are taken as dense indices directly.
    """
    stream, owned = _open_text(source)
    try:
        added, removed = [], []
        for lineno, line in enumerate(stream, start=1):
            stripped = line.strip()
            if not stripped or stripped[0] in "#%":
                continue
            tokens = stripped.split()
            if len(tokens) != 3 or tokens[0] not in "+-":
                raise GraphFormatError(
                    f"expected '+ src dst' or '- src dst', got {stripped!r}", lineno)
            s = _parse_node_id(tokens[1], lineno)
            t = _parse_node_id(tokens[2], lineno)
            if graph is not None:
                s, t = graph.index_of(s), graph.index_of(t)
            (added if tokens[0] == "+" else removed).append((s, t))
        return GraphDelta(added=added, removed=removed)
    finally:
        if owned:
            stream.close()


def apply_delta(graph, delta):
    """Apply edge edits, returning a new graph with degrees recomputed.

    Removals of absent edges and additions of present edges are rejected as a
    stale delta. Note a single edit at source j rescales all of column j.
    """
    for s, t in delta.removed:
        if not (0 <= s < graph.n and 0 <= t < graph.n):
            raise DeltaError(f"edge ({s},{t}) endpoint out of range")
        if not graph.has_edge(s, t):
            raise DeltaError(f"cannot remove nonexistent edge ({s},{t})")
    for s, t in delta.added:
        if not (0 <= s < graph.n and 0 <= t < graph.n):
            raise DeltaError(f"edge ({s},{t}) endpoint out of range")
        if s == t:
            raise DeltaError(f"cannot add self-loop ({s},{t})")
        if graph.has_edge(s, t):
            raise DeltaError(f"cannot add existing edge ({s},{t})")

    src, dst = graph.edge_arrays()
    if delta.removed:
        drop_keys = {s * graph.n + t for s, t in delta.removed}
        keep = ~np.isin(src * graph.n + dst, np.fromiter(drop_keys, dtype=np.int64))
        src, dst = src[keep], dst[keep]
    if delta.added:
        add = np.asarray(delta.added, dtype=np.int64)
        src = np.concatenate([src, add[:, 0]])
        dst = np.concatenate([dst, add[:, 1]])
    return SparseGraph.from_edges(graph.n, src, dst,
                                  original_ids=graph.original_ids,
                                  labels=graph.labels)


def delta_columns(graph, other):
    """Exact set of source nodes whose transition column differs."""
    if graph.n != other.n:
        raise ValueError(f"graph sizes differ: {graph.n} vs {other.n}")
    changed = []
    for j in range(graph.n):
        a, b = graph.children(j), other.children(j)
        if a.size != b.size or not np.array_equal(a, b):
            changed.append(j)
    return changed
