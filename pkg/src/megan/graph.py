"""Multi-view graph data model and file I/O.

A multi-view graph is a fixed node set 0..n-1 connected by k distinct
edge sets ("views"). Edges are undirected, stored once in canonical
(min, max) order, with no self-loops. The connectivity pattern of a node
pair is the length-k 0/1 vector of per-view edge indicators.

Edge file format: one edge per line, whitespace-separated
``view_id src_id dst_id``; ``#``-prefixed lines are comments; an optional
header line ``#nodes N #views K`` pins the node and view counts.
Label file format: ``node_id label_id`` per line, same comment rule.
"""

import re

import numpy as np

from .errors import (
    ArgumentError,
    BoundsError,
    CannotSampleError,
    EmptyGraphError,
    InvalidPairError,
    ParseError,
)

_HEADER_RE = re.compile(r"#\s*nodes\s+(\d+)\s+#\s*views\s+(\d+)\s*$")


class MultiViewGraph:
    """Immutable undirected multi-view graph on dense integer node ids."""

    def __init__(self, n, views, labels=None, label_count=None):
        views = tuple(frozenset((min(i, j), max(i, j)) for i, j in view) for view in views)
        if len(views) < 1:
            raise ArgumentError("a multi-view graph needs at least one view")
        for l, view in enumerate(views):
            for i, j in view:
                if i == j:
                    raise InvalidPairError(f"self-loop ({i},{i}) in view {l}")
                if not (0 <= i < n and 0 <= j < n):
                    raise BoundsError(f"edge ({i},{j}) in view {l} outside [0,{n})")
        union = sorted(set().union(*views))
        if not union:
            raise EmptyGraphError("union of views has no edge")
        if labels is not None:
            for node, lab in labels.items():
                if not (0 <= node < n):
                    raise BoundsError(f"labeled node {node} outside [0,{n})")
                if lab < 0:
                    raise BoundsError(f"negative label {lab} for node {node}")
            if label_count is None:
                label_count = 1 + max(labels.values())
        self.n = int(n)
        self.views = views
        self.labels = dict(labels) if labels is not None else None
        self.label_count = label_count
        self._union_set = frozenset(union)
        self._union_edges = np.array(union, dtype=np.int64)
        pat = np.zeros((len(union), len(views)), dtype=np.int64)
        pos = {e: r for r, e in enumerate(union)}
        for l, view in enumerate(views):
            for e in view:
                pat[pos[e], l] = 1
        self._union_patterns = pat
        self._union_keys = self._union_edges[:, 0] * np.int64(n) + self._union_edges[:, 1]
        self._union_edges.setflags(write=False)
        self._union_patterns.setflags(write=False)
        self._union_keys.setflags(write=False)

    @property
    def k(self):
        """Number of views."""
        return len(self.views)

    def union_edges(self):
        """(m, 2) array of union edges in canonical (min, max), lexicographic order."""
        return self._union_edges

    def union_patterns(self):
        """(m, k) 0/1 array of connectivity patterns aligned with union_edges()."""
        return self._union_patterns

    def has_any_edge(self, i, j):
        """True if (i, j) is connected in at least one view."""
        return (min(i, j), max(i, j)) in self._union_set

    def _pair_keys(self, anchors, partners):
        lo = np.minimum(anchors, partners).astype(np.int64)
        hi = np.maximum(anchors, partners).astype(np.int64)
        return lo * self.n + hi

    def __eq__(self, other):
        if not isinstance(other, MultiViewGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.views == other.views
            and self.labels == other.labels
            and self.label_count == other.label_count
        )

    def __repr__(self):
        m = len(self._union_set)
        return f"MultiViewGraph(n={self.n}, k={self.k}, union_edges={m})"


class NeighborIndex:
    """Per-node sorted union neighborhoods, stored in CSR form."""

    def __init__(self, graph):
        adj = [[] for _ in range(graph.n)]
        for i, j in graph.union_edges():
            adj[i].append(j)
            adj[j].append(i)
        counts = np.array([len(a) for a in adj], dtype=np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(counts)])
        self.indices = np.empty(int(self.indptr[-1]), dtype=np.int64)
        for i, a in enumerate(adj):
            a.sort()
            self.indices[self.indptr[i] : self.indptr[i + 1]] = a
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    def neighbors(self, i):
        """Sorted array of nodes adjacent to i in at least one view."""
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degree(self, i):
        return int(self.indptr[i + 1] - self.indptr[i])


def connectivity(graph, i, j):
    """Length-k 0/1 vector: bit l is 1 iff (i, j) is an edge of view l."""
    if i == j:
        raise InvalidPairError(f"connectivity undefined for ({i},{i})")
    if not (0 <= i < graph.n and 0 <= j < graph.n):
        raise BoundsError(f"pair ({i},{j}) outside [0,{graph.n})")
    key = (min(i, j), max(i, j))
    return np.array([1 if key in view else 0 for view in graph.views], dtype=np.int64)


def neighbor_union(graph):
    """Build the union-neighborhood index used for negative sampling."""
    return NeighborIndex(graph)


def are_union_edges(graph, anchors, partners):
    """Boolean array: is each (anchor, partner) connected in some view?"""
    keys = graph._pair_keys(np.asarray(anchors), np.asarray(partners))
    pos = np.searchsorted(graph._union_keys, keys)
    pos = np.minimum(pos, len(graph._union_keys) - 1)
    return graph._union_keys[pos] == keys


def patterns_for_pairs(graph, anchors, partners):
    """(B, k) connectivity patterns for pairs known to be union edges."""
    keys = graph._pair_keys(np.asarray(anchors), np.asarray(partners))
    pos = np.searchsorted(graph._union_keys, keys)
    pos = np.minimum(pos, len(graph._union_keys) - 1)
    if not (graph._union_keys[pos] == keys).all():
        raise InvalidPairError("pattern lookup on a pair that is not a union edge")
    return graph._union_patterns[pos]


def sample_positive_pairs(graph, count, rng):
    """Draw `count` pairs uniformly from the union edge set, canonical order."""
    if count <= 0:
        raise ArgumentError(f"count must be positive, got {count}")
    edges = graph.union_edges()
    rows = rng.integers(0, len(edges), size=count)
    return [(int(edges[r, 0]), int(edges[r, 1])) for r in rows]


def sample_nonedges(graph, count, rng, exclude=(), distinct=False):
    """Uniform pairs (i, j), i != j, absent from every view, by rejection.

    `exclude` lists extra canonical pairs to avoid; with `distinct` the
    returned pairs are all different. Raises CannotSampleError when the
    graph is too dense to find enough.
    """
    banned = {(min(i, j), max(i, j)) for i, j in exclude}
    filtered = bool(banned) or distinct
    out_a = np.empty(count, dtype=np.int64)
    out_p = np.empty(count, dtype=np.int64)
    seen = set()
    have = 0
    for _ in range(200):
        if have >= count:
            break
        need = count - have
        ci = rng.integers(0, graph.n, size=2 * need + 8)
        cj = rng.integers(0, graph.n, size=2 * need + 8)
        ok = ci != cj
        ci, cj = ci[ok], cj[ok]
        ok = ~are_union_edges(graph, ci, cj)
        ci, cj = ci[ok], cj[ok]
        if not filtered:
            take = min(need, len(ci))
            out_a[have : have + take] = ci[:take]
            out_p[have : have + take] = cj[:take]
            have += take
            continue
        for i, j in zip(ci, cj):
            key = (min(i, j), max(i, j))
            if key in banned or (distinct and key in seen):
                continue
            if distinct:
                seen.add(key)
            out_a[have] = i
            out_p[have] = j
            have += 1
            if have >= count:
                break
    if have < count:
        raise CannotSampleError("graph too dense to sample enough non-adjacent pairs")
    return out_a, out_p


def _parse_int(token, path, line_no, what):
    try:
        value = int(token)
    except ValueError:
        raise ParseError(path, line_no, f"{what} is not an integer: {token!r}") from None
    if value < 0:
        raise ParseError(path, line_no, f"{what} is negative: {value}")
    return value


def _resolve_node(token, id_map, path, line_no):
    if id_map is None:
        return _parse_int(token, path, line_no, "node id")
    if token not in id_map:
        raise ParseError(path, line_no, f"node id {token!r} not in id map")
    return id_map[token]


def _load_id_map(path):
    id_map = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected 'name numeric_id', got {line!r}")
            name, num = parts
            if name in id_map:
                raise ParseError(path, line_no, f"duplicate name {name!r}")
            id_map[name] = _parse_int(num, path, line_no, "numeric id")
    return id_map


def load_graph(edge_path, label_path=None, id_map_path=None):
    """Load a multi-view graph from an edge file and optional label file.

    Node counts default to 1 + the largest id seen, view counts to
    1 + the largest view id, unless a ``#nodes N #views K`` header pins
    them. Duplicate edges are deduplicated; self-loops are rejected.
    When ``id_map_path`` is given, node tokens in both files are strings
    resolved through that map.
    """
    id_map = _load_id_map(id_map_path) if id_map_path is not None else None
    declared_n = declared_k = None
    per_view = {}
    max_node = -1
    with open(edge_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER_RE.match(line)
                if m:
                    declared_n, declared_k = int(m.group(1)), int(m.group(2))
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(edge_path, line_no, f"expected 'view src dst', got {line!r}")
            view = _parse_int(parts[0], edge_path, line_no, "view id")
            src = _resolve_node(parts[1], id_map, edge_path, line_no)
            dst = _resolve_node(parts[2], id_map, edge_path, line_no)
            if src == dst:
                raise ParseError(edge_path, line_no, f"self-loop on node {src}")
            per_view.setdefault(view, set()).add((min(src, dst), max(src, dst)))
            max_node = max(max_node, src, dst)
    if not per_view:
        raise EmptyGraphError(f"no edges in {edge_path}")
    n = declared_n if declared_n is not None else max_node + 1
    k = declared_k if declared_k is not None else max(per_view) + 1
    if max_node >= n:
        raise BoundsError(f"edge references node {max_node} but graph declares {n} nodes")
    if max(per_view) >= k:
        raise BoundsError(f"edge references view {max(per_view)} but graph declares {k} views")
    views = [per_view.get(l, set()) for l in range(k)]

    labels = None
    if label_path is not None:
        labels = _parse_labels(label_path, id_map)
        for node in labels:
            if node >= n:
                raise BoundsError(f"label references node {node} but graph has {n} nodes")
    return MultiViewGraph(n, views, labels=labels)


def _parse_labels(label_path, id_map):
    labels = {}
    with open(label_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(label_path, line_no, f"expected 'node label', got {line!r}")
            node = _resolve_node(parts[0], id_map, label_path, line_no)
            lab = _parse_int(parts[1], label_path, line_no, "label id")
            if node in labels:
                raise ParseError(label_path, line_no, f"duplicate label for node {node}")
            labels[node] = lab
    return labels


def load_labels(label_path, id_map_path=None):
    """Load a node -> label map without an accompanying graph."""
    id_map = _load_id_map(id_map_path) if id_map_path is not None else None
    return _parse_labels(label_path, id_map)


def save_graph(graph, edge_path, label_path=None):
    """Write the graph in the edge/label file format, deterministically ordered."""
    with open(edge_path, "w", encoding="utf-8") as fh:
        fh.write(f"#nodes {graph.n} #views {graph.k}\n")
        for l, view in enumerate(graph.views):
            for i, j in sorted(view):
                fh.write(f"{l} {i} {j}\n")
    if label_path is not None and graph.labels is not None:
        with open(label_path, "w", encoding="utf-8") as fh:
            for node in sorted(graph.labels):
                fh.write(f"{node} {graph.labels[node]}\n")


def remove_edges(graph, view, edges):
    """New graph with the given edges deleted from one view; labels carried over."""
    if not (0 <= view < graph.k):
        raise BoundsError(f"view {view} outside [0,{graph.k})")
    drop = {(min(i, j), max(i, j)) for i, j in edges}
    views = [set(v) for v in graph.views]
    views[view] -= drop
    return MultiViewGraph(graph.n, views, labels=graph.labels, label_count=graph.label_count)


def single_view(graph, view):
    """Project onto one view as a k=1 graph; labels carried over."""
    if not (0 <= view < graph.k):
        raise BoundsError(f"view {view} outside [0,{graph.k})")
    return MultiViewGraph(
        graph.n, [set(graph.views[view])], labels=graph.labels, label_count=graph.label_count
    )
