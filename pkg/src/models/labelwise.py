from dataclasses import dataclass, field
from typing import Literal

import torch
import torch.nn.functional as F
from torch import nn

from src.errors import ShapeError
from src.graph.graph import Graph
from src.models.mlp import LabelAssignment
from src.numerics.ops import dense_matmul, dropout_mask, maxpool_stack, relu, row_softmax
from src.numerics.sparse import SparseMatrix, sparse_dense_matmul
from src.util import DTYPE

EmptyClassFallback = Literal['zero', 'class-mean']


@dataclass(frozen=True, eq=False)
class ClassAdjacency:
    """
    One normalized operator per class.

    M_i[v, u] = 1 / sqrt(max(d_{v,i}, 1) * max(d_{u,i}, 1)) for every edge
    (v, u) whose endpoint u is assigned class i, where d_{x,i} counts the
    class-i neighbors of x.
    """
    operators: tuple[SparseMatrix, ...]
    neighbor_counts: torch.Tensor
    assignment: LabelAssignment

    @property
    def num_classes(self) -> int:
        return len(self.operators)

    @property
    def num_nodes(self) -> int:
        return self.neighbor_counts.shape[0]


def build_class_adjacency(graph: Graph, assignment: LabelAssignment) -> ClassAdjacency:
    if assignment.num_nodes != graph.num_nodes:
        raise ShapeError(f'Assignment covers {assignment.num_nodes} nodes, graph has {graph.num_nodes}')
    n, c = graph.num_nodes, assignment.num_classes
    src, dst = graph.adjacency.row_ids, graph.adjacency.col_indices
    neighbor_class = assignment.classes[dst]

    counts = torch.zeros(n, c, dtype=DTYPE)
    counts.index_put_((src, neighbor_class), torch.ones(src.numel(), dtype=DTYPE), accumulate=True)
    # d_{u,i} may be 0 when u has no class-i neighbors of its own.
    norm = counts[src, neighbor_class].clamp(min=1) * counts[dst, neighbor_class].clamp(min=1)
    values = norm.rsqrt()

    operators = []
    for cls in range(c):
        selected = neighbor_class == cls
        operators.append(SparseMatrix.from_coo(
            src[selected].numpy(),
            dst[selected].numpy(),
            values[selected].numpy(),
            shape=(n, n),
        ))
    return ClassAdjacency(operators=tuple(operators), neighbor_counts=counts, assignment=assignment)


@dataclass
class LayerActivations:
    z: list[torch.Tensor] = field(default_factory=list)
    aggregated: list[list[torch.Tensor]] = field(default_factory=list)
    hidden: list[torch.Tensor] = field(default_factory=list)
    pooled: torch.Tensor | None = None
    pool_source: torch.Tensor | None = None
    probs: torch.Tensor | None = None

    @property
    def last_hidden(self) -> torch.Tensor:
        return self.hidden[-1]


def labelwise_layer(
        h_in: torch.Tensor,
        weight: torch.Tensor,
        class_adj: ClassAdjacency,
        fallback: EmptyClassFallback = 'zero',
) -> tuple[torch.Tensor, torch.Tensor, list[torch.Tensor]]:
    """
    Z = H_in·Wᵀ, A_i = M_i·Z, H_out = relu([Z, A_1, ..., A_c]).

    Returns H_out together with Z and the per-class aggregates.
    """
    if h_in.shape[0] != class_adj.num_nodes:
        raise ShapeError(f'Layer input has {h_in.shape[0]} rows, class operators cover {class_adj.num_nodes} nodes')
    z = dense_matmul(h_in, weight.T)
    aggregated = [sparse_dense_matmul(operator, z) for operator in class_adj.operators]

    if fallback == 'class-mean':
        members = F.one_hot(class_adj.assignment.classes, class_adj.num_classes).to(DTYPE)
        class_mean = dense_matmul(members.T, z) / members.sum(dim=0).clamp(min=1).unsqueeze(1)
        empty = (class_adj.neighbor_counts == 0).to(DTYPE)
        aggregated = [
            a_i + empty[:, cls:cls + 1] * class_mean[cls]
            for cls, a_i in enumerate(aggregated)
        ]
    elif fallback != 'zero':
        raise ValueError(f'Unknown empty-class fallback {fallback}')

    return relu(torch.cat([z, *aggregated], dim=1)), z, aggregated


class LabelWiseLayer(nn.Module):
    def __init__(self, in_features: int, hidden: int, fallback: EmptyClassFallback = 'zero'):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(hidden, in_features, dtype=DTYPE))
        self._fallback = fallback
        nn.init.xavier_uniform_(self.weight)

    def forward(self, h_in: torch.Tensor, class_adj: ClassAdjacency):
        return labelwise_layer(h_in, self.weight, class_adj, self._fallback)


class LabelWiseGnn(nn.Module):
    """
    K label-wise layers, elementwise max-pooling over their outputs and a
    softmax classification head of width (c + 1)·p.
    """

    def __init__(
            self,
            in_features: int,
            num_classes: int,
            hidden: int = 64,
            num_layers: int = 2,
            dropout: float = 0.0,
            fallback: EmptyClassFallback = 'zero',
            head_bias: bool = True,
    ):
        super().__init__()
        if num_layers < 1:
            raise ValueError('A label-wise network needs at least one layer')
        width = (num_classes + 1) * hidden
        self.layers = nn.ModuleList(
            [LabelWiseLayer(in_features if k == 0 else width, hidden, fallback) for k in range(num_layers)]
        )
        self.W_C = nn.Parameter(torch.empty(num_classes, width, dtype=DTYPE))
        self.b_C = nn.Parameter(torch.zeros(1, num_classes, dtype=DTYPE)) if head_bias else None
        self._dropout = dropout
        nn.init.xavier_uniform_(self.W_C)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def forward(
            self,
            features: torch.Tensor,
            class_adj: ClassAdjacency,
            generator: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, LayerActivations]:
        activations = LayerActivations()
        h = features
        for layer in self.layers:
            h = h * dropout_mask(h.shape, self._dropout, generator, self.training)
            h, z, aggregated = layer(h, class_adj)
            activations.z.append(z)
            activations.aggregated.append(aggregated)
            activations.hidden.append(h)

        pooled, source = maxpool_stack(activations.hidden)
        pooled_in = pooled * dropout_mask(pooled.shape, self._dropout, generator, self.training)
        logits = dense_matmul(pooled_in, self.W_C.T)
        if self.b_C is not None:
            logits = logits + self.b_C
        probs = row_softmax(logits)

        activations.pooled, activations.pool_source, activations.probs = pooled, source, probs
        return probs, activations


def lwgnn_forward(graph: Graph, params: LabelWiseGnn, class_adj: ClassAdjacency) -> tuple[torch.Tensor, LayerActivations]:
    was_training = params.training
    params.eval()
    try:
        return params(graph.features, class_adj)
    finally:
        params.train(was_training)
