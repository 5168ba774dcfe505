import logging
from typing import Dict, List, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import concept_node
from errors import ConfigError
from metrics import ComponentScores

logger = logging.getLogger(__name__)

COMPONENTS = ("prevalence", "diversity", "connectivity")


class SbsResult(BaseModel):
    """Importance of one orientation inside one group"""

    model_config = ConfigDict(frozen=True)

    group: str
    orientation: str
    prevalence: float
    diversity: float
    connectivity: float
    z_prevalence: float
    z_diversity: float
    z_connectivity: float
    sbs: float
    share_prevalence: float
    share_diversity: float
    share_connectivity: float
    share_sbs: float


def standardize(values: Mapping[str, float]) -> Dict[str, float]:
    """z = (v - mean) / sd with the population standard deviation; sd = 0 gives all zeros"""
    keys = list(values)
    if len(keys) < 2:
        logger.warning(f"Standardizing {len(keys)} value(s): z-scores set to 0")
        return dict.fromkeys(keys, 0.0)
    data = np.array([values[k] for k in keys], dtype=float)
    sd = data.std()
    if sd == 0:
        return dict.fromkeys(keys, 0.0)
    z = (data - data.mean()) / sd
    return {k: float(v) for k, v in zip(keys, z)}


def compose_sbs(z_p: float, z_d: float, z_c: float) -> float:
    """Equal-weight sum of the standardized components"""
    return z_p + z_d + z_c


def relative_shares(raw: Mapping[str, Mapping[str, float]]) -> Dict[str, Dict[str, float]]:
    """Per-component percentage shares over orientations; the SBS share is the mean of the three.

    `raw` maps orientation -> {prevalence, diversity, connectivity}. A component
    whose total is zero falls back to uniform shares.
    """
    orientations = list(raw)
    if not orientations:
        raise ConfigError("no orientations configured")

    shares: Dict[str, Dict[str, float]] = {o: {} for o in orientations}
    for component in COMPONENTS:
        total = sum(raw[o][component] for o in orientations)
        for o in orientations:
            if total > 0:
                shares[o][component] = raw[o][component] / total * 100.0
            else:
                shares[o][component] = 100.0 / len(orientations)
        if total <= 0:
            logger.warning(f"All orientations have zero {component}; using uniform shares")
    for o in orientations:
        shares[o]["sbs"] = sum(shares[o][c] for c in COMPONENTS) / len(COMPONENTS)
    return shares


def reconstruct_sbs_share(prevalence: float, diversity: float, connectivity: float) -> float:
    """Mean-of-component-shares rule used to rebuild published SBS shares"""
    return (prevalence + diversity + connectivity) / 3.0


def score_group(
    group: str,
    scores: Mapping[str, ComponentScores],
    orientations: Sequence[str],
) -> List[SbsResult]:
    """Standardize over every node of the group graph, then keep the orientation nodes"""
    if not orientations:
        raise ConfigError("no orientations configured")
    keys = {o: concept_node(o) for o in orientations}
    missing = [o for o in orientations if keys[o] not in scores]
    if missing:
        raise ValueError(f"[{group}] orientation nodes missing from graph: {missing}")

    z = {c: standardize({n: getattr(s, c) for n, s in scores.items()}) for c in COMPONENTS}
    raw = {o: {c: float(getattr(scores[keys[o]], c)) for c in COMPONENTS} for o in orientations}
    shares = relative_shares(raw)

    results = []
    for o in orientations:
        zp, zd, zc = (z[c][keys[o]] for c in COMPONENTS)
        results.append(
            SbsResult(
                group=group,
                orientation=o,
                prevalence=raw[o]["prevalence"],
                diversity=raw[o]["diversity"],
                connectivity=raw[o]["connectivity"],
                z_prevalence=zp,
                z_diversity=zd,
                z_connectivity=zc,
                sbs=compose_sbs(zp, zd, zc),
                share_prevalence=shares[o]["prevalence"],
                share_diversity=shares[o]["diversity"],
                share_connectivity=shares[o]["connectivity"],
                share_sbs=shares[o]["sbs"],
            )
        )
    return results


def rank_orientations(results: Sequence[SbsResult], group: str) -> List[SbsResult]:
    """Descending SBS share; ties broken alphabetically by orientation name"""
    selected = [r for r in results if r.group == group]
    return sorted(selected, key=lambda r: (-r.share_sbs, r.orientation))
