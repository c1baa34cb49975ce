"""Radial-tree path queries and shared-path impedance accumulation.

After one O(n log n) preprocessing pass per model (:class:`PathIndex`), the
shared-path impedance between any two buses is a constant-time lookup: the
shared path in a radial tree is the source-to-LCA segment, so its impedance is
the cumulative source-path impedance of the LCA.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .feeder import CONFIGURATIONS, Edge, FeederModel, UnknownBus


def edge_matrix_for_config(edge, configuration: str) -> np.ndarray:
    """Impedance matrix seen by a load of the given configuration.

    ``edge`` may be an :class:`Edge` or a bare 3x3 matrix. Delta rows are
    cyclic differences ``z[q, p] - z[q, p+1]``.
    """
    z = edge.z_ohm if isinstance(edge, Edge) else np.asarray(edge, dtype=complex)
    if configuration == "star":
        return np.array(z, dtype=complex)
    if configuration == "delta":
        return z - np.roll(z, -1, axis=1)
    raise ValueError(f"configuration must be one of {CONFIGURATIONS}, got {configuration!r}")


@dataclass(frozen=True)
class SourcePath:
    bus: str
    edges: tuple[Edge, ...]

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class SharedPathImpedance:
    z: np.ndarray  # ohms
    configuration: str


class PathIndex:
    """Parent pointers, depths, cumulative impedances and an O(1) LCA table."""

    def __init__(self, model: FeederModel):
        self.model = model
        ids = model.bus_ids
        self.ids = ids
        self.pos = {b: i for i, b in enumerate(ids)}
        n = len(ids)

        adj = [[] for _ in range(n)]
        for e in model.edges:
            u, v = self.pos[e.from_bus], self.pos[e.to_bus]
            adj[u].append((v, e))
            adj[v].append((u, e))

        self.mask = np.array([b.mask for b in model.buses])
        self.parent = np.full(n, -1)
        self.parent_edge: list[Edge | None] = [None] * n
        self.depth = np.zeros(n, dtype=int)
        zbase = model.base.impedance
        # edge into each bus, restricted to carried phases, per-unit
        self.z_pu = np.zeros((n, 3, 3), dtype=complex)
        self.zcum_pu = np.zeros((n, 3, 3), dtype=complex)

        root = self.pos[model.source]
        self.root = root
        order = [root]
        seen = np.zeros(n, dtype=bool)
        seen[root] = True
        euler, first = [], np.zeros(n, dtype=int)
        # iterative DFS producing preorder plus an Euler tour
        stack = [(root, iter(adj[root]))]
        first[root] = 0
        euler.append(root)
        while stack:
            u, it = stack[-1]
            for v, e in it:
                if seen[v]:
                    continue
                seen[v] = True
                self.parent[v] = u
                self.parent_edge[v] = e
                self.depth[v] = self.depth[u] + 1
                carried = self.mask[u] & self.mask[v]
                self.z_pu[v] = e.z_ohm * np.outer(carried, carried) / zbase
                self.zcum_pu[v] = self.zcum_pu[u] + self.z_pu[v]
                first[v] = len(euler)
                euler.append(v)
                order.append(v)
                stack.append((v, iter(adj[v])))
                break
            else:
                stack.pop()
                if stack:
                    euler.append(stack[-1][0])
        self.order = np.array(order)
        self.first = first
        self.zcum_delta_pu = self.zcum_pu - np.roll(self.zcum_pu, -1, axis=2)

        tour = np.array(euler)
        levels = [tour]
        span = 1
        while 2 * span <= len(tour):
            prev = levels[-1]
            a, b = prev[:-span], prev[span:]
            levels.append(np.where(self.depth[a] <= self.depth[b], a, b))
            span *= 2
        self._sparse = [lvl.tolist() for lvl in levels]
        self._first = first.tolist()
        self._depth = self.depth.tolist()

    def index(self, bus_id: str) -> int:
        try:
            return self.pos[bus_id]
        except KeyError:
            raise UnknownBus(bus_id) from None

    def lca(self, u: int, v: int) -> int:
        lo, hi = self._first[u], self._first[v]
        if lo > hi:
            lo, hi = hi, lo
        k = (hi - lo + 1).bit_length() - 1
        row = self._sparse[k]
        x, y = row[lo], row[hi - (1 << k) + 1]
        return x if self._depth[x] <= self._depth[y] else y

    def shared_impedance_pu(self, obs: int, actor: int, configuration: str = "star") -> np.ndarray:
        m = self.lca(obs, actor)
        return self.zcum_delta_pu[m] if configuration == "delta" else self.zcum_pu[m]

    def path_edges(self, i: int) -> tuple[Edge, ...]:
        edges = []
        while self.parent[i] >= 0:
            edges.append(self.parent_edge[i])
            i = self.parent[i]
        return tuple(reversed(edges))

    def is_ancestor(self, anc: int, node: int) -> bool:
        return self.lca(anc, node) == anc


_INDEX_CACHE: "weakref.WeakKeyDictionary[FeederModel, PathIndex]" = weakref.WeakKeyDictionary()


def path_index(model: FeederModel) -> PathIndex:
    """Cached :class:`PathIndex` for a model (models are immutable)."""
    idx = _INDEX_CACHE.get(model)
    if idx is None:
        idx = _INDEX_CACHE[model] = PathIndex(model)
    return idx


def source_path(model: FeederModel, bus: str) -> SourcePath:
    idx = path_index(model)
    return SourcePath(bus, idx.path_edges(idx.index(bus)))


def shared_path(model: FeederModel, obs: str, actor: str) -> list[Edge]:
    """Edges common to both source paths, ordered from the source."""
    idx = path_index(model)
    o, a = idx.index(obs), idx.index(actor)
    return list(idx.path_edges(idx.lca(o, a)))


def shared_path_impedance(model: FeederModel, obs: str, actor: str,
                          configuration: str = "star") -> SharedPathImpedance:
    idx = path_index(model)
    z = idx.shared_impedance_pu(idx.index(obs), idx.index(actor), configuration)
    return SharedPathImpedance(z * model.base.impedance, configuration)
