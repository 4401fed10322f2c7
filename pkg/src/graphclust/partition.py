"""Link selection and cluster extraction.

Every vertex may link to at most M neighbors that rank above it in
confidence; edges whose affinity falls below tau are cut first. The
weakly connected components of the resulting directed graph are the
clusters.

Confidence comparisons are lexicographic on (confidence, -vertex_id):
among vertices with exactly equal confidence the lower id ranks higher.
This keeps the link graph acyclic in all cases and lets plateaus of
bit-identical confidence (e.g. duplicated feature vectors) still form
clusters instead of fragmenting into singletons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LinkChoice:
    """Outgoing links of one vertex, best-ranked first."""

    source: int
    targets: np.ndarray
    scores: np.ndarray


@dataclass
class ClusterAssignment:
    """Dense cluster labels; cluster ids ordered by smallest member."""

    labels: np.ndarray
    num_clusters: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_clusters):
            raise ValueError("labels out of range for num_clusters")


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def choose_links(g, conf, preds=None, rho_set=None, m=1, tau=0.8):
    """Pick up to ``m`` link targets per vertex.

    Candidates are the vertex's directed neighbors that rank above it in
    confidence and whose raw affinity is at least ``tau``. Vertices in
    ``rho_set`` that have an entry in ``preds`` rank their candidates by
    predicted connectivity (ties by lower id); all others rank by raw
    affinity. Vertices with no surviving candidate emit no links.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [-1, 1], got {tau}")
    values = conf.values if hasattr(conf, "values") else np.asarray(conf)
    if values.shape[0] != g.n:
        raise ValueError(f"need {g.n} confidence values, got {values.shape[0]}")
    preds = preds or {}
    in_rho = np.zeros(g.n, dtype=bool)
    if rho_set is not None:
        in_rho[np.asarray(list(rho_set), dtype=np.int64)] = True
    links = []
    for i in range(g.n):
        ids, affs = g.neighbors(i)
        cv = values[ids]
        ranks_above = (cv > values[i]) | ((cv == values[i]) & (ids < i))
        mask = ranks_above & (affs >= tau)
        if not mask.any():
            continue
        cand_ids = ids[mask]
        if in_rho[i] and i in preds:
            p = preds[i]
            lookup = dict(zip(p.members.tolist(), p.scores.tolist()))
            scores = np.array([lookup.get(int(j), -np.inf) for j in cand_ids])
            order = np.lexsort((cand_ids, -scores))[:m]
            targets, scores = cand_ids[order], scores[order]
        else:
            # neighbor lists are already (affinity desc, id asc)
            targets = cand_ids[:m]
            scores = affs[mask][:m].astype(np.float64)
        links.append(LinkChoice(source=i, targets=targets.astype(np.int64),
                                scores=scores))
    return links


def extract_clusters(links, n):
    """Weakly connected components of the link graph via union-find."""
    uf = UnionFind(n)
    for lc in links:
        if lc.source < 0 or lc.source >= n:
            raise ValueError(f"link source {lc.source} out of range")
        for t in lc.targets:
            if t < 0 or t >= n:
                raise ValueError(f"link target {t} out of range")
            uf.union(lc.source, int(t))
    labels = np.empty(n, dtype=np.int64)
    remap = {}
    for i in range(n):
        root = uf.find(i)
        if root not in remap:
            remap[root] = len(remap)
        labels[i] = remap[root]
    return ClusterAssignment(labels=labels, num_clusters=len(remap))


def write_clusters(assignment, path):
    """One integer label per line; same format as ground-truth labels."""
    with open(path, "w") as fh:
        for lab in assignment.labels:
            fh.write(f"{int(lab)}\n")
