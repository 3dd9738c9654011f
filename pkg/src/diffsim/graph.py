"""Static undirected graphs for the diffusion processes.

Graphs are immutable once built. Edges are stored canonically as sorted
``(u, v)`` pairs with ``u < v``; the CSR adjacency used by the simulation
kernels is derived lazily.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "GraphParseError",
    "GenerationError",
    "make_star",
    "make_clique",
    "make_random_regular",
    "embed_star",
    "load_edge_list",
    "save_edge_list",
    "parse_graph_spec",
]


class GraphError(ValueError):
    """Invalid graph construction arguments."""


class GraphParseError(GraphError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class GenerationError(RuntimeError):
    """Random graph generation ran out of retries."""


@dataclass(frozen=True)
class Graph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    labels: Optional[tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        n = self.vertex_count
        if n < 0:
            raise GraphError("vertex_count must be nonnegative")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for {n} vertices")
            if u > v:
                raise GraphError("edges must be canonical (u < v)")
            if (u, v) in seen:
                raise GraphError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        if self.labels is not None and len(self.labels) != n:
            raise GraphError("labels must have one entry per vertex")

    @classmethod
    def from_edges(
        cls,
        vertex_count: int,
        edges: Iterable[tuple[int, int]],
        labels: Optional[Sequence[str]] = None,
    ) -> "Graph":
        """Build a graph from edges in any orientation/order."""
        canon = []
        for u, v in edges:
            u, v = int(u), int(v)
            canon.append((u, v) if u < v else (v, u))
        if len(set(canon)) != len(canon):
            raise GraphError("duplicate edge")
        return cls(int(vertex_count), tuple(sorted(canon)),
                   None if labels is None else tuple(labels))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        arr = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        arr.flags.writeable = False
        return arr

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.vertex_count
        e = self.edge_array
        m = e.shape[0]
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        out = (indptr, dst[order].astype(np.int64), eid[order].astype(np.int64))
        for a in out:
            a.flags.writeable = False
        return out

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    @property
    def adj_edge(self) -> np.ndarray:
        """Edge id for every CSR adjacency slot."""
        return self._csr[2]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree(self, v: int) -> int:
        return int(self.degrees[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @cached_property
    def is_star(self) -> bool:
        """True if vertex 0 is adjacent to every other vertex and nothing else."""
        n = self.vertex_count
        return n >= 2 and self.edge_count == n - 1 and self.degree(0) == n - 1


def make_star(leaves: int) -> Graph:
    """Star with center 0 and leaves ``1..leaves``."""
    if leaves < 1:
        raise GraphError("a star requires at least one leaf")
    return Graph(leaves + 1, tuple((0, i) for i in range(1, leaves + 1)),
                 ("center",) + ("leaf",) * leaves)


def make_clique(n: int) -> Graph:
    if n < 1:
        raise GraphError("clique needs at least one vertex")
    return Graph(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)))


def _pair_stubs(n: int, d: int, rng: np.random.Generator) -> Optional[set]:
    # Pair stubs, keep legal pairs, re-shuffle only the leftovers.
    edges: set = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover: dict = defaultdict(int)
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover[a] += 1
                leftover[b] += 1
        if not leftover:
            break
        # give up if no legal pair remains among leftover stubs
        verts = sorted(leftover)
        if not any(
            a != b and (min(a, b), max(a, b)) not in edges
            for i, a in enumerate(verts) for b in verts[i:]
        ):
            return None
        stubs = np.array([v for v in verts for _ in range(leftover[v])], dtype=np.int64)
    return edges


def make_random_regular(n: int, d: int, seed: int, max_retries: int = 100) -> Graph:
    """Simple d-regular graph on n vertices by configuration-model pairing.

    Illegal pairs (self-loops, repeated edges) are rejected and their stubs
    re-paired; a stuck attempt restarts from scratch, up to ``max_retries``
    times. Deterministic for a fixed seed.

    For d > (n - 1) / 2 pairing rarely succeeds, so the sparse
    (n - 1 - d)-regular complement is drawn instead and complemented.
    """
    if n < 1 or d < 1:
        raise GraphError("n and d must be positive")
    if (n * d) % 2:
        raise GraphError("n * d must be even")
    if d >= n:
        raise GraphError("d must be smaller than n")
    dense = 2 * d > n - 1
    k = n - 1 - d if dense else d
    rng = np.random.default_rng(seed & 0xFFFF_FFFF_FFFF_FFFF)
    for _ in range(max_retries):
        edges = _pair_stubs(n, k, rng) if k else set()
        if edges is not None:
            if dense:
                edges = {(u, v) for u in range(n) for v in range(u + 1, n)} - edges
            return Graph(n, tuple(sorted(edges)))
    raise GenerationError(f"no simple {d}-regular graph on {n} vertices after {max_retries} tries")


def embed_star(star: Graph, host_edges: Sequence[tuple[int, int]], host_vertices: int) -> Graph:
    """Add ``host_vertices`` new vertices and ``host_edges`` around a star.

    Star vertex ids are kept; new vertices are numbered after them.
    """
    if host_vertices < 0:
        raise GraphError("host_vertices must be nonnegative")
    n = star.vertex_count + host_vertices
    edges = set(star.edges)
    for u, v in host_edges:
        u, v = int(u), int(v)
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range")
        key = (min(u, v), max(u, v))
        if key in edges:
            raise GraphError(f"duplicate edge {key}")
        edges.add(key)
    labels = None
    if star.labels is not None:
        labels = star.labels + ("host",) * host_vertices
    return Graph(n, tuple(sorted(edges)), labels)


def load_edge_list(text: str, vertex_count: Optional[int] = None) -> Graph:
    """Parse ``u v`` lines (0-based). ``#`` starts a comment line.

    Without ``vertex_count`` the graph has ``max id + 1`` vertices.
    """
    edges = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphParseError(lineno, f"expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(lineno, f"non-integer vertex id in {raw!r}") from None
        if u < 0 or v < 0 or (vertex_count is not None and max(u, v) >= vertex_count):
            raise GraphParseError(lineno, f"vertex id out of range in {raw!r}")
        if u == v:
            raise GraphParseError(lineno, f"self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError(lineno, f"duplicate edge {key}")
        seen.add(key)
        edges.append(key)
    if vertex_count is None:
        vertex_count = 1 + max((v for e in edges for v in e), default=-1)
    return Graph(vertex_count, tuple(sorted(edges)))


def save_edge_list(graph: Graph) -> str:
    return "".join(f"{u} {v}\n" for u, v in graph.edges)


def parse_graph_spec(spec: str, seed: int = 0) -> Graph:
    """Build a graph from ``star:<leaves>``, ``regular:<n>:<d>[:<seed>]``,
    ``clique:<n>`` or ``file:<path>``.

    ``regular`` without an explicit seed uses ``seed``.
    """
    kind, _, rest = spec.partition(":")
    try:
        if kind == "star":
            return make_star(int(rest))
        if kind == "clique":
            return make_clique(int(rest))
        if kind == "regular":
            parts = [int(p) for p in rest.split(":")]
            if len(parts) == 2:
                return make_random_regular(parts[0], parts[1], seed)
            if len(parts) == 3:
                return make_random_regular(parts[0], parts[1], parts[2])
        if kind == "file":
            return load_edge_list(Path(rest).read_text(encoding="utf-8"))
    except ValueError as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"bad graph spec {spec!r}: {exc}") from None
    raise GraphError(f"bad graph spec {spec!r}")
