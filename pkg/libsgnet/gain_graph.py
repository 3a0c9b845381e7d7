"""Weighted digraph of a gain operator and its walk statistics.

Node i has an edge to node j with weight gamma_ij whenever gamma_ij > 0. Walk
statistics of length n are computed by n rounds of relaxation from all-ones
labels. With max relaxation this gives the largest product of weights over
walks of length n, with sum relaxation the largest sum of those products over
the walks leaving a node. For pure max and pure sum operators they equal
``||Gamma^n(1)||``.

Statistics range over walks, node sequences that may repeat nodes, not over
paths with distinct nodes.
"""

import dataclasses
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import networkx as nx

from .gain_operator import FiniteOperator, GainOperator, PeriodicOperator

__all__ = ["GainGraph", "WalkStatistics",
           "WalkCapError", "WindowError",
           "build_graph",
           "max_path_product", "sum_path_products", "enumerate_walks_oracle",
           "edge_list_lines"]

logger = logging.getLogger(__name__)

MAX_ORACLE_LENGTH = 8

Combine = Callable[[List[float]], float]


class WalkCapError(ValueError):
    """Graph or walk length too large for explicit enumeration."""


class WindowError(ArithmeticError):
    """A periodic statistic changed when the window was doubled."""


@dataclasses.dataclass(frozen=True, eq=False)
class GainGraph:
    """Digraph with an edge ``(i, j, gamma_ij)`` for every positive gain.

    Attributes:
        graph (nx.DiGraph): Nodes and weighted edges. Successors of a node
            are stored in row entry order.
        source (Optional[PeriodicOperator]): Operator of a periodic graph.
            `graph` then holds a finite window of it.
    """
    graph: nx.DiGraph
    source: Optional[PeriodicOperator] = None

    @property
    def is_periodic(self) -> bool:
        return self.source is not None

    @property
    def node_count(self) -> int:
        return self.graph.number_of_nodes()

    def edges(self) -> List[tuple]:
        """Edges as ``(from, to, weight)`` triples."""
        return [(u, v, w) for u, v, w in self.graph.edges(data="weight")]


@dataclasses.dataclass(frozen=True)
class WalkStatistics:
    """Walk statistics obtained by explicit enumeration.

    Attributes:
        max_product (float): Largest product of weights over all walks.
        per_node_sums (Dict[int, float]): Sum of the products of all walks
            leaving each node.
    """
    max_product: float
    per_node_sums: Dict[int, float]

    @property
    def max_sum(self) -> float:
        return max(self.per_node_sums.values(), default=0.0)


def _digraph(n: int, rows: Iterable[Sequence[tuple]]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(n))
    for i, entries in enumerate(rows):
        graph.add_weighted_edges_from((i, target, weight) for target, weight in entries)

    return graph


def _window(op: PeriodicOperator, length: int) -> nx.DiGraph:
    return _digraph(length, (op.absolute_row(i, length).entries for i in range(length)))


def _span(op: PeriodicOperator) -> int:
    return max(op.max_offset, -op.min_offset, 0)


def build_graph(op: GainOperator) -> GainGraph:
    """Graph of a gain operator.

    A periodic operator is materialized on a window of
    ``prefix + 2 * (period + span)`` nodes, where span is the largest offset
    magnitude, so that every edge pattern appears at least twice.
    """
    if isinstance(op, FiniteOperator):
        return GainGraph(_digraph(op.dimension, (row.entries for row in op.rows)))

    if not isinstance(op, PeriodicOperator):
        raise TypeError(f"not a gain operator: {op!r}")

    length = op.prefix_len + 2 * (op.period + _span(op))
    return GainGraph(_window(op, length), op)


def _relax(graph: nx.DiGraph, n: int, combine: Combine) -> Dict[int, float]:
    labels = {v: 1.0 for v in graph}
    for _ in range(n):
        labels = {v: combine([data["weight"] * labels[u] for u, data in graph.adj[v].items()])
                  for v in graph}

    return labels


def _max(terms: List[float]) -> float:
    return max(terms, default=0.0)


def _periodic_statistic(op: PeriodicOperator, n: int, combine: Combine, starts: int) -> float:
    length = starts + n * max(op.max_offset, 0)
    labels = _relax(_window(op, length), n, combine)
    return max((labels[i] for i in range(starts)), default=0.0)


def _walk_statistic(g: GainGraph, n: int, combine: Combine) -> float:
    if n < 1:
        raise ValueError("walk length must be at least 1")

    if not g.is_periodic:
        return max(_relax(g.graph, n, combine).values(), default=0.0)

    # starts past the boundary-affected range repeat with the period
    op = g.source
    starts = op.prefix_len + n * max(-op.min_offset, 0) + op.period
    value = _periodic_statistic(op, n, combine, starts)
    doubled = _periodic_statistic(op, n, combine, 2 * starts)
    if doubled != value and abs(doubled - value) > 1e-12 * max(abs(value), 1.0):
        raise WindowError(f"walk statistic changed from {value!r} to {doubled!r} on a doubled window")

    logger.debug("periodic walk statistic n=%d on %d starts: %r", n, starts, value)
    return value


def max_path_product(g: GainGraph, n: int) -> float:
    """Largest product of edge weights over all walks of length n.

    Raises:
        ValueError: If n < 1.
        WindowError: If a periodic window turns out to be too small.
    """
    return _walk_statistic(g, n, _max)


def sum_path_products(g: GainGraph, n: int) -> float:
    """Largest sum, over start nodes, of the weight products of the walks of length n leaving it.

    Raises:
        ValueError: If n < 1.
        WindowError: If a periodic window turns out to be too small.
    """
    return _walk_statistic(g, n, math.fsum)


def enumerate_walks_oracle(g: GainGraph, n: int, node_cap: int = 10) -> WalkStatistics:
    """Enumerate every walk of length n explicitly.

    Raises:
        ValueError: If n < 1.
        WalkCapError: If the graph has more than `node_cap` nodes or n > 8.
    """
    if n < 1:
        raise ValueError("walk length must be at least 1")
    if g.node_count > node_cap:
        raise WalkCapError(f"graph has {g.node_count} nodes, enumeration is capped at {node_cap}")
    if n > MAX_ORACLE_LENGTH:
        raise WalkCapError(f"walk length {n} exceeds enumeration cap {MAX_ORACLE_LENGTH}")

    adj = g.graph.adj

    def products(node: int, remaining: int) -> List[float]:
        if remaining == 0:
            return [1.0]

        return [data["weight"] * rest
                for succ, data in adj[node].items()
                for rest in products(succ, remaining - 1)]

    best = 0.0
    sums = {}
    for node in g.graph:
        walks = products(node, n)
        sums[node] = math.fsum(walks)
        best = max(best, max(walks, default=0.0))

    return WalkStatistics(best, sums)


def edge_list_lines(g: GainGraph) -> List[str]:
    """Edges as ``from to weight`` lines, weights in repr form."""
    return list(nx.generate_edgelist(g.graph, data=["weight"]))
