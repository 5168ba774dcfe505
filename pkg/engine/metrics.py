"""
SBS components per node: prevalence (term frequency), diversity (distinctiveness
centrality) and connectivity (weighted betweenness on inverse-weight distances).

The brute_force_* functions are slow, independent reference implementations
used by the test suite.
"""

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Union

import networkx as nx
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config import ConceptCluster, concept_node
from textprep import TokenStream

logger = logging.getLogger(__name__)

DISTANCE = "distance"
BRUTE_FORCE_MAX_NODES = 14


class ComponentScores(BaseModel):
    model_config = ConfigDict(frozen=True)

    node: str
    prevalence: int = Field(ge=0)
    diversity: float = Field(ge=0)
    connectivity: float = Field(ge=0)


def term_counts(streams: Iterable[TokenStream]) -> Counter:
    counts: Counter = Counter()
    for stream in streams:
        counts.update(stream.terms)
    return counts


def prevalence(streams: Iterable[TokenStream], node: Union[str, ConceptCluster]) -> int:
    """Token occurrences of a term, or the sum over a cluster's keywords"""
    counts = term_counts(streams)
    if isinstance(node, ConceptCluster):
        return sum(counts[k] for k in node.keywords)
    return counts[node]


def _distinctiveness_factor(n_nodes: int, degree: int) -> float:
    # neighbours linked to every other node (degree N-1) contribute log10(1) = 0
    return math.log10((n_nodes - 1) / degree)


def diversity(g: nx.Graph, node: str) -> float:
    """D(i) = sum_j w(i,j) * log10((N-1) / deg(j)) over the neighbours j of i"""
    n = g.number_of_nodes()
    if n < 2:
        return 0.0
    return float(sum(d["weight"] * _distinctiveness_factor(n, g.degree(j)) for j, d in g.adj[node].items()))


def diversity_all(g: nx.Graph) -> Dict[str, float]:
    return {node: diversity(g, node) for node in g.nodes}


def distance_graph(g: nx.Graph) -> nx.Graph:
    """Copy with exact inverse-weight distances so equal-length geodesics compare equal"""
    h = nx.Graph()
    h.add_nodes_from(g.nodes)
    h.add_edges_from(
        (u, v, {DISTANCE: Fraction(1) / Fraction(w)}) for u, v, w in g.edges(data="weight")
    )
    return h


def _chunks(nodes: List[str], workers: int) -> List[List[str]]:
    size = max(1, math.ceil(len(nodes) / workers))
    return [nodes[i:i + size] for i in range(0, len(nodes), size)]


def connectivity_all(g: nx.Graph, workers: int = 1) -> Dict[str, float]:
    """Unnormalized weighted betweenness (Brandes), each unordered pair counted once.

    Source nodes are split into ordered chunks; per-chunk dependency maps are
    summed in chunk order so the result does not depend on scheduling.
    """
    nodes = sorted(g.nodes)
    if g.number_of_edges() == 0:
        return dict.fromkeys(nodes, 0.0)
    h = distance_graph(g)

    def _partial(sources: List[str]) -> Dict[str, float]:
        return nx.betweenness_centrality_subset(h, sources=sources, targets=nodes, normalized=False, weight=DISTANCE)

    chunks = _chunks(nodes, workers)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_partial, chunks))
    else:
        partials = [_partial(chunk) for chunk in chunks]

    totals = dict.fromkeys(nodes, 0.0)
    for partial in partials:
        for node, value in partial.items():
            totals[node] += value
    return totals


def connectivity(g: nx.Graph, node: str) -> float:
    # a node needs two neighbours to lie strictly inside a path
    if g.degree(node) <= 1:
        return 0.0
    return connectivity_all(g)[node]


def brute_force_betweenness(g: nx.Graph) -> Dict[str, float]:
    """Enumerate every simple path between every node pair and count interior geodesic visits"""
    if g.number_of_nodes() > BRUTE_FORCE_MAX_NODES:
        raise ValueError(
            f"brute-force betweenness refuses graphs above {BRUTE_FORCE_MAX_NODES} nodes "
            f"(got {g.number_of_nodes()})"
        )
    result = dict.fromkeys(g.nodes, 0.0)
    for s, t in combinations(sorted(g.nodes), 2):
        best = None
        geodesics: List[Sequence[str]] = []
        for path in nx.all_simple_paths(g, s, t):
            length = sum(Fraction(1) / Fraction(g[u][v]["weight"]) for u, v in zip(path, path[1:]))
            if best is None or length < best:
                best, geodesics = length, [path]
            elif length == best:
                geodesics.append(path)
        if not geodesics:
            continue
        visits: Counter = Counter(v for path in geodesics for v in path[1:-1])
        for v, hits in visits.items():
            result[v] += hits / len(geodesics)
    return result


def brute_force_diversity(g: nx.Graph) -> Dict[str, float]:
    """Distinctiveness via the dense weight matrix, independent of diversity()"""
    nodes = list(g.nodes)
    if not nodes:
        return {}
    if len(nodes) < 2:
        return {nodes[0]: 0.0}
    weights = nx.to_numpy_array(g, nodelist=nodes, weight="weight")
    degrees = (weights > 0).sum(axis=1)
    factors = np.zeros(len(nodes))
    linked = degrees > 0
    factors[linked] = np.log10((len(nodes) - 1) / degrees[linked])
    scores = weights @ factors
    return {node: float(score) for node, score in zip(nodes, scores)}


def component_scores(
    streams: Sequence[TokenStream],
    g: nx.Graph,
    clusters: Sequence[ConceptCluster],
    workers: int = 1,
) -> Dict[str, ComponentScores]:
    """Raw components for every node of a merged group graph"""
    counts = term_counts(streams)
    concept_prevalence = {concept_node(c.orientation): sum(counts[k] for k in c.keywords) for c in clusters}
    div = diversity_all(g)
    conn = connectivity_all(g, workers=workers)
    scores = {}
    for node in sorted(g.nodes):
        scores[node] = ComponentScores(
            node=node,
            prevalence=concept_prevalence.get(node, counts[node]),
            diversity=max(div[node], 0.0),
            connectivity=max(conn[node], 0.0),
        )
    return scores


def export_components(rows: Mapping[str, Mapping[str, ComponentScores]], path: Path) -> None:
    """CSV (group, node, prevalence, diversity, connectivity), reals at 6 decimals"""
    records = [
        (group, s.node, s.prevalence, s.diversity, s.connectivity)
        for group, scores in rows.items()
        for s in scores.values()
    ]
    frame = pd.DataFrame(records, columns=["group", "node", "prevalence", "diversity", "connectivity"])
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
