from dataclasses import dataclass

import numpy as np
import torch
from sklearn.metrics import accuracy_score
from sklearn.metrics.pairwise import cosine_similarity

from src.errors import DataError, EmptyMaskError


def accuracy(probs: torch.Tensor, labels: torch.Tensor, mask: torch.Tensor) -> float:
    """Fraction of masked nodes whose argmax prediction (ties to the lowest id) equals the label."""
    if not bool(mask.any()):
        raise EmptyMaskError('Accuracy over an empty mask is undefined')
    targets = labels[mask]
    if bool((targets < 0).any()):
        raise DataError('Every evaluated node must be labeled')
    predictions = probs.detach()[mask].argmax(dim=1)
    return float(accuracy_score(targets.numpy(), predictions.numpy()))


@dataclass
class SimilarityReport:
    intra_mean: float
    inter_mean: float
    intra_histogram: list[float]
    inter_histogram: list[float]
    bin_edges: list[float]
    excluded_zero_rows: int

    @property
    def gap(self) -> float:
        return self.intra_mean - self.inter_mean

    def to_dict(self) -> dict:
        return {
            'intra_mean': self.intra_mean,
            'inter_mean': self.inter_mean,
            'gap': self.gap,
            'intra_histogram': self.intra_histogram,
            'inter_histogram': self.inter_histogram,
            'bin_edges': self.bin_edges,
            'excluded_zero_rows': self.excluded_zero_rows,
        }


def representation_similarity(
        representations: torch.Tensor,
        labels: torch.Tensor,
        mask: torch.Tensor,
        bins: int = 20,
) -> SimilarityReport:
    """
    Mean cosine similarity over intra-class and inter-class node pairs in
    `mask`, with histograms normalized to fractions of pairs. All-zero rows
    have no direction and are left out.
    """
    rows = representations.detach()[mask].numpy()
    y = labels[mask].numpy()
    nonzero = np.linalg.norm(rows, axis=1) > 0
    excluded = int((~nonzero).sum())
    rows, y = rows[nonzero], y[nonzero]

    classes, sizes = np.unique(y[y >= 0], return_counts=True)
    if classes.size < 2 or (sizes >= 2).sum() < 1:
        raise DataError('Similarity analysis needs two or more classes and a class with two or more nodes')

    similarity = cosine_similarity(rows)
    first, second = np.triu_indices(y.size, k=1)
    labeled = (y[first] >= 0) & (y[second] >= 0)
    first, second = first[labeled], second[labeled]
    same = y[first] == y[second]
    pair_similarity = similarity[first, second]
    intra, inter = pair_similarity[same], pair_similarity[~same]

    edges = np.linspace(-1.0, 1.0, bins + 1)
    intra_hist, _ = np.histogram(np.clip(intra, -1.0, 1.0), bins=edges)
    inter_hist, _ = np.histogram(np.clip(inter, -1.0, 1.0), bins=edges)
    return SimilarityReport(
        intra_mean=float(intra.mean()),
        inter_mean=float(inter.mean()),
        intra_histogram=(intra_hist / max(intra.size, 1)).tolist(),
        inter_histogram=(inter_hist / max(inter.size, 1)).tolist(),
        bin_edges=edges.tolist(),
        excluded_zero_rows=excluded,
    )
