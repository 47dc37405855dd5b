import torch
from torch import nn

from src.errors import ShapeError
from src.numerics.ops import dense_matmul, dropout_mask, relu, row_softmax
from src.numerics.sparse import SparseMatrix, sparse_dense_matmul
from src.util import DTYPE


class Gcn(nn.Module):
    """
    Graph convolutional network over the symmetric normalized adjacency.

    With two layers: row_softmax(Â · relu(Â·X·W0) · W1). Weights carry no
    bias; dropout is applied to every layer input during training.
    """

    def __init__(self, in_features: int, num_classes: int, hidden: int = 64, num_layers: int = 2, dropout: float = 0.5):
        super().__init__()
        if num_layers < 1:
            raise ValueError('A GCN needs at least one layer')
        widths = [in_features] + [hidden] * (num_layers - 1) + [num_classes]
        for k in range(num_layers):
            self.register_parameter(f'W{k}', nn.Parameter(torch.empty(widths[k], widths[k + 1], dtype=DTYPE)))
        self._num_layers = num_layers
        self._dropout = dropout
        self.reset_parameters()

    def reset_parameters(self):
        for weight in self.weights():
            nn.init.xavier_uniform_(weight)

    @property
    def num_layers(self) -> int:
        return self._num_layers

    def weights(self) -> list[nn.Parameter]:
        return [getattr(self, f'W{k}') for k in range(self._num_layers)]

    def forward(
            self,
            a_hat: SparseMatrix,
            features: torch.Tensor,
            generator: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Returns class probabilities and the hidden representation after each non-final layer."""
        if a_hat.shape != (features.shape[0], features.shape[0]):
            raise ShapeError(f'Propagation matrix {a_hat.shape} does not match {features.shape[0]} nodes')
        hidden = []
        h = features
        for k, weight in enumerate(self.weights()):
            h = h * dropout_mask(h.shape, self._dropout, generator, self.training)
            h = sparse_dense_matmul(a_hat, dense_matmul(h, weight))
            if k < self._num_layers - 1:
                h = relu(h)
                hidden.append(h)
        return row_softmax(h), hidden


def gcn_forward(a_hat: SparseMatrix, features: torch.Tensor, params: Gcn) -> torch.Tensor:
    was_training = params.training
    params.eval()
    try:
        probs, _ = params(a_hat, features)
        return probs
    finally:
        params.train(was_training)
