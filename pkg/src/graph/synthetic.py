from dataclasses import dataclass

import numpy as np
import torch

from src.errors import InfeasibleSpecError
from src.graph.graph import Graph


@dataclass(frozen=True)
class SyntheticSpec:
    num_nodes: int = 1000
    num_classes: int = 5
    target_homophily: float = 0.1
    avg_degree: float = 6.0
    feature_dim: int = 32
    class_center_separation: float = 3.0
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.target_homophily <= 1.0:
            raise InfeasibleSpecError(f'Target homophily must lie in [0, 1], got {self.target_homophily}')
        if self.num_nodes < 1 or self.num_classes < 1:
            raise InfeasibleSpecError('Need at least one node and one class')
        if self.num_classes > self.num_nodes:
            raise InfeasibleSpecError(f'{self.num_classes} classes cannot be spread over {self.num_nodes} nodes')
        if self.avg_degree <= 0:
            raise InfeasibleSpecError(f'Average degree must be positive, got {self.avg_degree}')
        if self.num_edges > self.num_nodes * (self.num_nodes - 1) // 2:
            raise InfeasibleSpecError(f'{self.num_edges} edges do not fit in a simple graph on {self.num_nodes} nodes')
        if self.feature_dim < self.num_classes:
            raise InfeasibleSpecError('Orthogonal class centers need feature_dim >= num_classes')
        if self.class_center_separation < 0 or self.noise_scale <= 0:
            raise InfeasibleSpecError('Separation must be non-negative and noise scale positive')

    @property
    def num_edges(self) -> int:
        return int(self.avg_degree * self.num_nodes / 2)


def _draw_edges(
        rng: np.random.Generator,
        members: list[np.ndarray],
        labels: np.ndarray,
        count: int,
        intra: bool,
        taken: set[tuple[int, int]],
) -> list[tuple[int, int]]:
    """Draws `count` new distinct edges of one pair type, resampling collisions."""
    num_nodes = labels.size
    edges = []
    while len(edges) < count:
        u = int(rng.integers(num_nodes))
        own = members[labels[u]]
        if intra:
            if own.size < 2:
                continue
            v = int(own[rng.integers(own.size)])
        else:
            if own.size == num_nodes:
                continue
            v = int(rng.integers(num_nodes))
            if labels[v] == labels[u]:
                continue
        pair = (min(u, v), max(u, v))
        if u == v or pair in taken:
            continue
        taken.add(pair)
        edges.append(pair)
    return edges


def generate_synthetic(spec: SyntheticSpec) -> Graph:
    """
    Random graph whose edges are intra-class with probability
    `target_homophily`, with features drawn around orthogonal class centers.
    """
    rng = np.random.default_rng(spec.seed)
    n, c = spec.num_nodes, spec.num_classes

    # Balanced uniform class assignment.
    labels = rng.permutation(np.arange(n) % c)
    members = [np.flatnonzero(labels == cls) for cls in range(c)]

    intra_pairs = sum(m.size * (m.size - 1) // 2 for m in members)
    inter_pairs = n * (n - 1) // 2 - intra_pairs
    num_intra = int(rng.binomial(spec.num_edges, spec.target_homophily))
    num_inter = spec.num_edges - num_intra
    if num_intra > intra_pairs or num_inter > inter_pairs:
        raise InfeasibleSpecError(
            f'Cannot place {num_intra} intra-class and {num_inter} inter-class edges '
            f'({intra_pairs} and {inter_pairs} pairs available)'
        )

    taken: set[tuple[int, int]] = set()
    edges = _draw_edges(rng, members, labels, num_intra, True, taken)
    edges += _draw_edges(rng, members, labels, num_inter, False, taken)

    basis, _ = np.linalg.qr(rng.standard_normal((spec.feature_dim, c)))
    centers = spec.class_center_separation * basis.T
    features = centers[labels] + rng.normal(0.0, spec.noise_scale, size=(n, spec.feature_dim))

    return Graph.from_edges(
        num_nodes=n,
        num_classes=c,
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        features=torch.from_numpy(features),
        labels=torch.from_numpy(labels.astype(np.int64)),
    )
