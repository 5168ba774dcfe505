import logging
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, Sequence, Tuple

import networkx as nx
import pandas as pd

from config import OVERALL, ConceptCluster, GraphConfig, concept_node
from errors import ConfigError
from textprep import TokenStream

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]


def document_pairs(terms: Sequence[str], cfg: GraphConfig) -> Counter:
    """Co-occurring pairs of one document: positional distance <= window - 1, no self-pairs"""
    pairs: Counter = Counter()
    span = cfg.window - 1
    for i, left in enumerate(terms):
        for right in terms[i + 1:i + 1 + span]:
            if left == right:
                continue
            pairs[(left, right) if left < right else (right, left)] += 1
    if cfg.count_mode == "document":
        return Counter(dict.fromkeys(pairs, 1))
    return pairs


def build_graph(streams: Iterable[TokenStream], cfg: GraphConfig, group: str = OVERALL) -> nx.Graph:
    """Undirected word network; co-occurrence never crosses document boundaries"""
    weights: Counter = Counter()
    terms = set()
    for stream in streams:
        doc_terms = stream.terms
        terms.update(doc_terms)
        weights.update(document_pairs(doc_terms, cfg))

    g = nx.Graph(group=group)
    # sorted insertion keeps node/edge iteration order independent of document order
    g.add_nodes_from(sorted(terms), is_concept=False)
    g.add_weighted_edges_from((u, v, w) for (u, v), w in sorted(weights.items()))
    logger.debug(f"[{group}] built graph: {g.number_of_nodes()} nodes, {g.number_of_edges()} edges")
    return g


def prune(g: nx.Graph, cfg: GraphConfig) -> nx.Graph:
    """Drop edges lighter than prune_min_weight; isolated nodes stay (they still carry prevalence)"""
    pruned = nx.Graph(**g.graph)
    pruned.add_nodes_from(g.nodes(data=True))
    pruned.add_edges_from(
        (u, v, d) for u, v, d in g.edges(data=True) if d["weight"] >= cfg.prune_min_weight
    )
    dropped = g.number_of_edges() - pruned.number_of_edges()
    logger.debug(f"[{g.graph.get('group')}] pruned {dropped} edges below weight {cfg.prune_min_weight}")
    return pruned


def check_disjoint(clusters: Sequence[ConceptCluster]) -> Dict[str, str]:
    """Map keyword -> orientation; overlapping keyword sets are a configuration error"""
    owner: Dict[str, str] = {}
    for cluster in clusters:
        for keyword in cluster.keywords:
            if keyword in owner and owner[keyword] != cluster.orientation:
                raise ConfigError(
                    f"keyword '{keyword}' belongs to both '{owner[keyword]}' and '{cluster.orientation}'"
                )
            owner[keyword] = cluster.orientation
    return owner


def merge_clusters(g: nx.Graph, clusters: Sequence[ConceptCluster]) -> nx.Graph:
    """Replace each cluster's member nodes with one concept node, summing incident weights"""
    owner = {keyword: concept_node(name) for keyword, name in check_disjoint(clusters).items()}

    merged = nx.Graph(**g.graph)
    merged.add_nodes_from((n, d) for n, d in g.nodes(data=True) if n not in owner)
    # concept nodes exist even when none of their keywords occur
    for cluster in clusters:
        merged.add_node(concept_node(cluster.orientation), is_concept=True, orientation=cluster.orientation)

    weights: Counter = Counter()
    for u, v, w in g.edges(data="weight"):
        mu, mv = owner.get(u, u), owner.get(v, v)
        if mu == mv:
            continue
        weights[(mu, mv) if mu < mv else (mv, mu)] += w
    merged.add_weighted_edges_from((u, v, w) for (u, v), w in sorted(weights.items()))
    return merged


def total_weight(g: nx.Graph) -> int:
    return sum(w for _, _, w in g.edges(data="weight"))


def export_graph(g: nx.Graph, edges_path: Path, nodes_path: Path) -> None:
    """Edge list (source, target, weight) and node list (term, is_concept)"""
    edges = pd.DataFrame(
        sorted((min(u, v), max(u, v), int(w)) for u, v, w in g.edges(data="weight")),
        columns=["source", "target", "weight"],
    )
    nodes = pd.DataFrame(
        [(n, bool(d.get("is_concept", False))) for n, d in sorted(g.nodes(data=True))],
        columns=["term", "is_concept"],
    )
    edges.to_csv(edges_path, index=False, lineterminator="\n")
    nodes.to_csv(nodes_path, index=False, lineterminator="\n")
