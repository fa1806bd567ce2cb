"""Directed neighbor graphs, flocking matrices and time-indexed schedules.

Vertices are agent labels (positive ints). ``neighbors[i]`` is the set
``N_i`` of agents whose data agent ``i`` receives, i.e. the tails of the
arcs entering ``i``. Every vertex is its own neighbor.
"""

import bisect
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import AssumptionViolation

__all__ = [
    "Digraph",
    "GraphSchedule",
    "is_strongly_connected",
    "flocking_matrix",
    "graph_at",
    "random_strongly_connected",
    "complete_graph",
]


class Digraph:
    """Self-arced directed graph given by neighbor sets."""

    __slots__ = ("_neighbors", "_vertices", "_hash")

    def __init__(self, neighbors):
        nb = {int(i): frozenset(int(s) for s in ns) for i, ns in dict(neighbors).items()}
        vertices = tuple(sorted(nb))
        vset = set(vertices)
        for i, ns in nb.items():
            if i not in ns:
                raise ValueError(f"vertex {i} is missing its self-arc")
            unknown = ns - vset
            if unknown:
                raise ValueError(f"vertex {i} lists unknown neighbors {sorted(unknown)}")
        self._neighbors = nb
        self._vertices = vertices
        self._hash = hash(tuple((i, tuple(sorted(nb[i]))) for i in vertices))

    @property
    def vertices(self):
        return self._vertices

    @property
    def m(self):
        return len(self._vertices)

    def neighbors(self, i):
        return self._neighbors[i]

    def arcs(self):
        """Set of ordered pairs ``(j, i)`` meaning ``j`` is a neighbor of ``i``."""
        return {(j, i) for i, ns in self._neighbors.items() for j in ns}

    def remove_vertex(self, v):
        return Digraph({i: ns - {v} for i, ns in self._neighbors.items() if i != v})

    def restrict(self, keep):
        keep = set(keep)
        return Digraph({i: ns & keep for i, ns in self._neighbors.items() if i in keep})

    def to_dict(self):
        return {str(i): sorted(self._neighbors[i]) for i in self._vertices}

    def __eq__(self, other):
        return isinstance(other, Digraph) and self._neighbors == other._neighbors

    def __hash__(self):
        return self._hash

    def __repr__(self):
        body = ", ".join(f"{i}: {sorted(self._neighbors[i])}" for i in self._vertices)
        return f"Digraph({{{body}}})"


def complete_graph(m, labels=None):
    labels = list(range(1, m + 1)) if labels is None else list(labels)
    return Digraph({i: labels for i in labels})


def _reach(start, succ):
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for u in succ[v]:
            if u not in seen:
                seen.add(u)
                todo.append(u)
    return seen


def is_strongly_connected(g):
    """Forward and backward BFS from one vertex must both reach everything."""
    if g.m == 0:
        return False
    # arc j -> i for j in N_i: successors of j are the i with j in N_i
    succ = {v: set() for v in g.vertices}
    pred = {v: set(g.neighbors(v)) for v in g.vertices}
    for i in g.vertices:
        for j in g.neighbors(i):
            succ[j].add(i)
    root = g.vertices[0]
    everything = set(g.vertices)
    return _reach(root, succ) == everything and _reach(root, pred) == everything


@lru_cache(maxsize=4096)
def _flocking_cached(g):
    index = {v: k for k, v in enumerate(g.vertices)}
    F = np.zeros((g.m, g.m))
    for i in g.vertices:
        ns = g.neighbors(i)
        for s in ns:
            F[index[i], index[s]] = 1.0 / len(ns)
    F.setflags(write=False)
    return F


def flocking_matrix(g):
    """Row-stochastic averaging matrix ``D^-1 A'`` of ``g``.

    Rows and columns follow ``g.vertices`` order.
    """
    return _flocking_cached(g).copy()


def random_strongly_connected(m, density=0.0, seed=None, labels=None):
    """Random self-arced strongly connected digraph.

    A random Hamiltonian cycle guarantees strong connectivity; every other
    arc is then added independently with probability ``density``.
    """
    if m < 2 and labels is None:
        raise ValueError("m must be at least 2")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    labels = list(range(1, m + 1)) if labels is None else sorted(labels)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    nb = {v: {v} for v in labels}
    if len(labels) == 1:
        return Digraph(nb)
    order = list(rng.permutation(labels))
    for a, b in zip(order, order[1:] + order[:1]):
        nb[int(b)].add(int(a))
    for i in labels:
        for j in labels:
            if j not in nb[i] and rng.random() < density:
                nb[i].add(j)
    return Digraph(nb)


@dataclass(frozen=True)
class GraphSchedule:
    """Time-indexed neighbor graphs plus agent dropout events.

    mode ``"static"``
        ``graphs = (g,)``.
    mode ``"piecewise"``
        ``graphs`` and ``switch_times`` of equal length, ``switch_times[0] == 0``;
        a graph is active on ``[s_k, s_{k+1})``.
    mode ``"generator"``
        a fresh random strongly connected graph on the surviving vertices
        every ``period`` time units, drawn from ``(seed, floor(t / period))``.

    ``dropouts`` holds ``(time, vertex)`` pairs; from ``time`` on the
    vertex and all its arcs are gone. ``policy`` is ``"error"`` (raise on
    a graph that is not strongly connected) or ``"warn"``.
    """

    mode: str = "static"
    graphs: tuple = ()
    switch_times: tuple = (0.0,)
    m: int = 0
    density: float = 0.0
    seed: int = 0
    period: float = 1.0
    dropouts: tuple = ()
    policy: str = "error"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("static", "piecewise", "generator"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.policy not in ("error", "warn"):
            raise ValueError(f"unknown connectivity policy {self.policy!r}")
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "switch_times", tuple(float(s) for s in self.switch_times))
        drops = tuple(sorted((float(t), int(v)) for t, v in self.dropouts))
        object.__setattr__(self, "dropouts", drops)
        if self.mode == "static" and len(self.graphs) != 1:
            raise ValueError("static schedule needs exactly one graph")
        if self.mode == "piecewise":
            if len(self.graphs) != len(self.switch_times) or not self.graphs:
                raise ValueError("piecewise schedule needs one switch time per graph")
            if self.switch_times[0] != 0.0 or list(self.switch_times) != sorted(self.switch_times):
                raise ValueError("switch times must start at 0 and increase")
        if self.mode == "generator":
            if self.m < 2 or self.period <= 0:
                raise ValueError("generator schedule needs m >= 2 and period > 0")
        else:
            object.__setattr__(self, "m", self.graphs[0].m)

    @classmethod
    def static(cls, graph, dropouts=(), policy="error"):
        return cls(mode="static", graphs=(graph,), dropouts=dropouts, policy=policy)

    @classmethod
    def piecewise(cls, switch_times, graphs, dropouts=(), policy="error"):
        return cls(mode="piecewise", graphs=tuple(graphs), switch_times=tuple(switch_times),
                   dropouts=dropouts, policy=policy)

    @classmethod
    def generator(cls, m, density=0.0, seed=0, period=1.0, dropouts=(), policy="error"):
        return cls(mode="generator", m=m, density=density, seed=seed, period=period,
                   dropouts=dropouts, policy=policy)

    @property
    def labels(self):
        if self.mode == "generator":
            return tuple(range(1, self.m + 1))
        return self.graphs[0].vertices

    def dropped_by(self, t):
        """Vertices removed at or before time ``t``."""
        return frozenset(v for td, v in self.dropouts if td <= t)

    def active_vertices(self, t):
        gone = self.dropped_by(t)
        return tuple(v for v in self.labels if v not in gone)

    def with_dropouts(self, dropouts):
        from dataclasses import replace
        return replace(self, dropouts=tuple(dropouts), _cache={})

    def _base_graph(self, t):
        if self.mode == "static":
            return self.graphs[0]
        if self.mode == "piecewise":
            k = bisect.bisect_right(self.switch_times, t) - 1
            return self.graphs[max(k, 0)]
        return None

    def graph_at(self, t):
        if t < 0:
            raise ValueError("t must be nonnegative")
        gone = self.dropped_by(t)
        if self.mode == "generator":
            index = int(np.floor(t / self.period + 1e-9))
            key = (index, gone)
        else:
            base = self._base_graph(t)
            key = (id(base), gone)
        g = self._cache.get(key)
        if g is None:
            if self.mode == "generator":
                rng = np.random.default_rng([self.seed, index])
                keep = [v for v in self.labels if v not in gone]
                g = random_strongly_connected(len(keep), self.density, rng, labels=keep)
            else:
                g = base.restrict([v for v in base.vertices if v not in gone])
            if not is_strongly_connected(g):
                msg = f"graph at t={t:g} is not strongly connected: {g!r}"
                if self.policy == "error":
                    raise AssumptionViolation("strong_connectivity", msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
            self._cache[key] = g
        return g


def graph_at(schedule, t):
    return schedule.graph_at(t)
