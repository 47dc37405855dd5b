import torch
from torch import nn

from src.errors import ShapeError
from src.util import DTYPE


class SelectionWeights(nn.Module):
    """Learnable pair (phi1, phi2) whose softmax mixes the two branch predictions."""

    def __init__(self, phi1: float = 0.0, phi2: float = 0.0):
        super().__init__()
        self.phi = nn.Parameter(torch.tensor([phi1, phi2], dtype=DTYPE))

    @property
    def phi1(self) -> float:
        return float(self.phi.detach()[0])

    @property
    def phi2(self) -> float:
        return float(self.phi.detach()[1])

    def mixture(self) -> torch.Tensor:
        return torch.softmax(self.phi, dim=0)

    @property
    def weight_c(self) -> float:
        """Mixture weight of the label-wise branch."""
        return float(self.mixture().detach()[0])


def combine_predictions(
        y_c: torch.Tensor,
        y_g: torch.Tensor,
        weights: SelectionWeights | torch.Tensor,
) -> torch.Tensor:
    """
    w1·y_c + w2·y_g with (w1, w2) = softmax(phi1, phi2).

    `weights` may also be an already computed mixture, e.g. a detached one
    when the branch parameters are being updated with phi held fixed.
    """
    if y_c.shape != y_g.shape:
        raise ShapeError(f'Branch predictions differ in shape: {tuple(y_c.shape)} vs {tuple(y_g.shape)}')
    mixture = weights.mixture() if isinstance(weights, SelectionWeights) else weights
    if mixture.shape != (2,):
        raise ShapeError(f'Expected two mixture weights, got {tuple(mixture.shape)}')
    return mixture[0] * y_c + mixture[1] * y_g
