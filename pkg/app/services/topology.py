"""Observation graphs between agents.

Entry (i, j) of a ConnectivityMatrix is True when agent i observes agent j's
state. The diagonal is always False: an agent's own state reaches it
separately, exactly as the prompts pass "your position" apart from the others.
"""
from __future__ import annotations

from typing import List, Optional, Sequence

import networkx as nx
import numpy as np

from app.core.errors import AgentIndexError, InvalidEdgeError, InvalidSizeError
from app.models.models import TopologySpec


class ConnectivityMatrix:
    """Immutable boolean n x n observation matrix."""

    __slots__ = ("_m",)

    def __init__(self, entries: np.ndarray):
        m = np.array(entries, dtype=bool, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidSizeError(f"connectivity matrix must be square, got shape {m.shape}")
        if m.shape[0] < 1:
            raise InvalidSizeError("connectivity matrix needs at least one agent")
        np.fill_diagonal(m, False)
        m.setflags(write=False)
        self._m = m

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int | bool]]) -> "ConnectivityMatrix":
        """Build from an explicit row-major 0/1 grid."""
        n = len(rows)
        if n == 0:
            raise InvalidSizeError("empty connectivity grid")
        for i, row in enumerate(rows):
            if len(row) != n:
                raise InvalidSizeError(f"row {i} has {len(row)} entries, expected {n}")
            for j, v in enumerate(row):
                if v not in (0, 1, True, False):
                    raise InvalidSizeError(f"entry ({i}, {j}) is {v!r}, expected 0 or 1")
                if i == j and v:
                    raise InvalidEdgeError(f"diagonal entry ({i}, {i}) must be 0")
        return cls(np.array(rows, dtype=bool))

    @property
    def n(self) -> int:
        return self._m.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._m

    def __getitem__(self, ij) -> bool:
        return bool(self._m[ij])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConnectivityMatrix) and np.array_equal(self._m, other._m)

    def __hash__(self) -> int:
        return hash(self._m.tobytes())

    def __repr__(self) -> str:
        rows = ["".join("1" if v else "0" for v in row) for row in self._m]
        return f"ConnectivityMatrix({'/'.join(rows)})"

    def neighbors(self, i: int) -> List[int]:
        """Observed agents of ``i`` in ascending index order."""
        _check_index(i, self.n)
        return [int(j) for j in np.flatnonzero(self._m[i])]

    def is_undirected(self) -> bool:
        return bool(np.array_equal(self._m, self._m.T))

    def to_rows(self) -> List[List[int]]:
        return self._m.astype(int).tolist()

    def to_digraph(self) -> nx.DiGraph:
        """Edges point from observer to observed (information flows against them)."""
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from((int(i), int(j)) for i, j in zip(*np.nonzero(self._m)))
        return g


def _check_size(n: int) -> None:
    if n < 1:
        raise InvalidSizeError(f"agent count must be >= 1, got {n}")


def _check_index(i: int, n: int, name: str = "index") -> None:
    if not 0 <= i < n:
        raise AgentIndexError(f"{name} {i} out of range for {n} agents")


def fully_connected(n: int) -> ConnectivityMatrix:
    _check_size(n)
    return ConnectivityMatrix(~np.eye(n, dtype=bool))


def leader_follower(n: int, leader: int) -> ConnectivityMatrix:
    _check_size(n)
    _check_index(leader, n, "leader")
    m = np.zeros((n, n), dtype=bool)
    m[:, leader] = True
    return ConnectivityMatrix(m)


def chain(n: int) -> ConnectivityMatrix:
    """Directed path: agent k+1 observes agent k."""
    _check_size(n)
    m = np.zeros((n, n), dtype=bool)
    for k in range(n - 1):
        m[k + 1, k] = True
    return ConnectivityMatrix(m)


def remove_edge(m: ConnectivityMatrix, i: int, j: int, symmetric: bool = False) -> ConnectivityMatrix:
    _check_index(i, m.n)
    _check_index(j, m.n)
    if i == j:
        raise InvalidEdgeError(f"cannot remove self edge ({i}, {j})")
    entries = m.entries.copy()
    entries[i, j] = False
    if symmetric:
        entries[j, i] = False
    return ConnectivityMatrix(entries)


def partial_three() -> ConnectivityMatrix:
    """Three agents, the second and third cannot exchange information directly."""
    return remove_edge(fully_connected(3), 1, 2, symmetric=True)


def has_rooted_spanning_path(m: ConnectivityMatrix) -> Optional[int]:
    """Lowest index r whose state can reach every agent through observation edges, else None."""
    g = m.to_digraph()
    for r in range(m.n):
        # agents that observe r directly or through intermediaries
        if len(nx.ancestors(g, r)) == m.n - 1:
            return r
    return None


def build_topology(spec: TopologySpec, n: int) -> ConnectivityMatrix:
    """Resolve a config-file topology description for ``n`` agents."""
    if spec.builder == "explicit":
        m = ConnectivityMatrix.from_rows(spec.matrix or [])
    elif spec.builder == "full":
        m = fully_connected(n)
    elif spec.builder == "leader_follower":
        m = leader_follower(n, spec.leader)
    elif spec.builder == "chain":
        m = chain(n)
    elif spec.builder == "partial":
        m = partial_three()
    else:  # pragma: no cover - guarded by the schema
        raise InvalidSizeError(f"unknown topology builder {spec.builder!r}")
    if m.n != n:
        raise InvalidSizeError(f"topology has {m.n} agents, expected {n}")
    for i, j in spec.removed_edges:
        m = remove_edge(m, i, j, symmetric=spec.symmetric)
    return m
