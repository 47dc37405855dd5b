from dataclasses import dataclass
from typing import Literal

import torch
from torch import nn

from src.errors import ShapeError
from src.graph.graph import Graph
from src.numerics.ops import dense_matmul, dropout_mask, relu, row_softmax
from src.util import DTYPE

LabeledNodes = Literal['train+val', 'train']


class PseudoLabelMlp(nn.Module):
    """One-hidden-layer MLP predicting a class for every node from its own features."""

    def __init__(self, in_features: int, num_classes: int, hidden: int = 64, dropout: float = 0.0):
        super().__init__()
        self.W1 = nn.Parameter(torch.empty(in_features, hidden, dtype=DTYPE))
        self.b1 = nn.Parameter(torch.zeros(1, hidden, dtype=DTYPE))
        self.W2 = nn.Parameter(torch.empty(hidden, num_classes, dtype=DTYPE))
        self.b2 = nn.Parameter(torch.zeros(1, num_classes, dtype=DTYPE))
        self._dropout = dropout
        self.reset_parameters()

    def reset_parameters(self):
        nn.init.xavier_uniform_(self.W1)
        nn.init.xavier_uniform_(self.W2)
        nn.init.zeros_(self.b1)
        nn.init.zeros_(self.b2)

    def forward(self, features: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
        if features.shape[1] != self.W1.shape[0]:
            raise ShapeError(f'Expected {self.W1.shape[0]} input features, got {features.shape[1]}')
        features = features * dropout_mask(features.shape, self._dropout, generator, self.training)
        hidden = relu(dense_matmul(features, self.W1) + self.b1)
        hidden = hidden * dropout_mask(hidden.shape, self._dropout, generator, self.training)
        return row_softmax(dense_matmul(hidden, self.W2) + self.b2)


def mlp_forward(features: torch.Tensor, params: PseudoLabelMlp) -> torch.Tensor:
    """row_softmax(relu(X·W1 + b1)·W2 + b2) without dropout."""
    was_training = params.training
    params.eval()
    try:
        return params(features)
    finally:
        params.train(was_training)


@dataclass(frozen=True, eq=False)
class LabelAssignment:
    """A class id for every node, flagged as ground truth or predicted."""
    classes: torch.Tensor
    is_ground_truth: torch.Tensor
    num_classes: int

    @property
    def num_nodes(self) -> int:
        return self.classes.shape[0]


def labeled_node_mask(graph: Graph, labeled_nodes: LabeledNodes = 'train+val') -> torch.Tensor:
    if labeled_nodes == 'train+val':
        return graph.train_mask | graph.val_mask
    if labeled_nodes == 'train':
        return graph.train_mask.clone()
    raise ValueError(f'Unknown labeled node set {labeled_nodes}')


def assign_labels(graph: Graph, probs: torch.Tensor, labeled_nodes: LabeledNodes = 'train+val') -> LabelAssignment:
    """
    Ground truth for the labeled nodes, argmax of `probs` elsewhere.

    Argmax ties resolve to the lowest class id.
    """
    if probs.shape != (graph.num_nodes, graph.num_classes):
        raise ShapeError(f'Expected probabilities of shape {(graph.num_nodes, graph.num_classes)}, got {tuple(probs.shape)}')
    labeled = labeled_node_mask(graph, labeled_nodes)
    predicted = probs.detach().argmax(dim=1)
    classes = torch.where(labeled, graph.labels, predicted)
    return LabelAssignment(classes=classes, is_ground_truth=labeled, num_classes=graph.num_classes)
