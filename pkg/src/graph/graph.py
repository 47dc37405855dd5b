import dataclasses
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import torch

from src.errors import GraphConsistencyError, InsufficientNodesError, UndefinedHomophilyError
from src.numerics.sparse import SparseMatrix
from src.util import DTYPE


class NodeMasks(NamedTuple):
    train: torch.Tensor
    val: torch.Tensor
    test: torch.Tensor


def build_adjacency(num_nodes: int, edges) -> tuple[SparseMatrix, int]:
    """
    Symmetric 0/1 CSR adjacency from an edge list.

    Directed pairs are symmetrized, duplicates collapse to one entry per
    direction and self-loops are dropped. Returns the adjacency and the
    number of self-loop records removed.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    self_loops = edges[:, 0] == edges[:, 1]
    edges = edges[~self_loops]
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    matrix = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(num_nodes, num_nodes)).tocsr()
    matrix.sum_duplicates()
    matrix.data[:] = 1.0
    return SparseMatrix.from_scipy(matrix), int(self_loops.sum())


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Undirected attributed graph with labels and train/val/test masks.

    Labels use -1 for unlabeled nodes. The adjacency stores no self-loops;
    layers add the self term themselves.
    """
    num_nodes: int
    num_classes: int
    adjacency: SparseMatrix
    features: torch.Tensor
    labels: torch.Tensor
    train_mask: torch.Tensor
    val_mask: torch.Tensor
    test_mask: torch.Tensor

    def __post_init__(self):
        if self.num_classes < 1:
            raise GraphConsistencyError('A graph needs at least one class')
        if self.adjacency.shape != (self.num_nodes, self.num_nodes):
            raise GraphConsistencyError(f'Adjacency shape {self.adjacency.shape} does not match {self.num_nodes} nodes')
        if self.features.dim() != 2 or self.features.shape[0] != self.num_nodes:
            raise GraphConsistencyError(
                f'Feature matrix has {self.features.shape[0] if self.features.dim() else 0} rows, expected {self.num_nodes}'
            )
        if not bool(torch.isfinite(self.features).all()):
            raise GraphConsistencyError('Features must be finite')
        if self.labels.shape != (self.num_nodes,):
            raise GraphConsistencyError(f'Expected {self.num_nodes} labels, got {tuple(self.labels.shape)}')
        if bool((self.labels >= self.num_classes).any()) or bool((self.labels < -1).any()):
            raise GraphConsistencyError(f'Label ids must lie in [0, {self.num_classes}) or be -1')

        adjacency = self.adjacency.to_scipy()
        if (adjacency != adjacency.T).nnz:
            raise GraphConsistencyError('Adjacency must be symmetric')
        if adjacency.diagonal().any():
            raise GraphConsistencyError('Adjacency must not store self-loops')

        masks = (self.train_mask, self.val_mask, self.test_mask)
        if any(mask.shape != (self.num_nodes,) or mask.dtype != torch.bool for mask in masks):
            raise GraphConsistencyError('Masks must be boolean arrays with one entry per node')
        if bool((masks[0] & masks[1]).any() | (masks[0] & masks[2]).any() | (masks[1] & masks[2]).any()):
            raise GraphConsistencyError('Train, val and test masks must be disjoint')
        if bool((self.labels[masks[0] | masks[1]] < 0).any()):
            raise GraphConsistencyError('Every train and val node must be labeled')

    @classmethod
    def from_edges(
            cls,
            num_nodes: int,
            num_classes: int,
            edges,
            features: torch.Tensor,
            labels: torch.Tensor | None = None,
            masks: NodeMasks | None = None,
    ) -> 'Graph':
        adjacency, _ = build_adjacency(num_nodes, edges)
        if labels is None:
            labels = torch.full((num_nodes,), -1, dtype=torch.long)
        if masks is None:
            empty = torch.zeros(num_nodes, dtype=torch.bool)
            masks = NodeMasks(empty, empty.clone(), empty.clone())
        return cls(
            num_nodes=num_nodes,
            num_classes=num_classes,
            adjacency=adjacency,
            features=features.to(DTYPE),
            labels=labels.to(torch.long),
            train_mask=masks.train,
            val_mask=masks.val,
            test_mask=masks.test,
        )

    @property
    def masks(self) -> NodeMasks:
        return NodeMasks(self.train_mask, self.val_mask, self.test_mask)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def is_fully_labeled(self) -> bool:
        return bool((self.labels >= 0).all())

    def with_masks(self, masks: NodeMasks) -> 'Graph':
        return dataclasses.replace(self, train_mask=masks.train, val_mask=masks.val, test_mask=masks.test)

    def with_labels(self, labels: torch.Tensor) -> 'Graph':
        return dataclasses.replace(self, labels=labels)

    def edge_pairs(self) -> tuple[torch.Tensor, torch.Tensor]:
        """Each undirected edge once, as (src, dst) with src < dst."""
        src, dst = self.adjacency.row_ids, self.adjacency.col_indices
        upper = src < dst
        return src[upper], dst[upper]

    def degrees(self) -> torch.Tensor:
        return self.adjacency.row_offsets[1:] - self.adjacency.row_offsets[:-1]


def homophily_ratio(graph: Graph, labels: torch.Tensor | None = None) -> float:
    """Fraction of undirected edges joining same-class endpoints."""
    labels = graph.labels if labels is None else labels
    if labels.shape != (graph.num_nodes,) or bool((labels < 0).any()):
        raise UndefinedHomophilyError('Homophily ratio needs a class id for every node')
    src, dst = graph.edge_pairs()
    if src.numel() == 0:
        raise UndefinedHomophilyError('Homophily ratio is undefined on a graph without edges')
    same = int((labels[src] == labels[dst]).sum())
    return same / src.numel()


def normalized_adjacency(graph: Graph) -> SparseMatrix:
    """D̃^(-1/2) (A + I) D̃^(-1/2) with D̃ = degree + 1."""
    with_loops = graph.adjacency.to_scipy() + sp.identity(graph.num_nodes, format='csr')
    inv_sqrt = sp.diags(1.0 / np.sqrt(np.asarray(with_loops.sum(axis=1)).ravel()))
    return SparseMatrix.from_scipy(inv_sqrt @ with_loops @ inv_sqrt)


def split_nodes(graph: Graph, train_per_class: int, val_count: int, seed: int) -> NodeMasks:
    """
    Samples `train_per_class` nodes of every class for training and
    `val_count` of the remaining labeled nodes for validation. The remaining
    labeled nodes form the test mask.
    """
    rng = np.random.default_rng(seed)
    labels = graph.labels.numpy()
    train = np.zeros(graph.num_nodes, dtype=bool)
    for cls in range(graph.num_classes):
        members = np.flatnonzero(labels == cls)
        if members.size < train_per_class:
            raise InsufficientNodesError(
                f'Class {cls} has {members.size} labeled nodes, {train_per_class} requested for training'
            )
        train[rng.permutation(members)[:train_per_class]] = True

    pool = np.flatnonzero((labels >= 0) & ~train)
    if pool.size < val_count:
        raise InsufficientNodesError(f'Only {pool.size} labeled nodes remain, {val_count} requested for validation')
    val = np.zeros(graph.num_nodes, dtype=bool)
    val[rng.permutation(pool)[:val_count]] = True
    test = (labels >= 0) & ~train & ~val
    return NodeMasks(torch.from_numpy(train), torch.from_numpy(val), torch.from_numpy(test))
