import torch

from src.errors import EmptyMaskError, ShapeError
from src.util import DTYPE

LOG_CLAMP = 1e-12


def dense_matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() != 2 or b.dim() != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f'Cannot multiply {tuple(a.shape)} by {tuple(b.shape)}')
    return a @ b


def relu(x: torch.Tensor) -> torch.Tensor:
    # Subgradient at exactly 0 is 0.
    return torch.relu(x)


def row_softmax(x: torch.Tensor) -> torch.Tensor:
    return torch.softmax(x, dim=1)


def masked_cross_entropy(probs: torch.Tensor, labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """
    Mean of -log p_v[y_v] over the masked nodes.

    Probabilities are clamped to [1e-12, 1] before the log since inputs may be
    mixtures of probability matrices rather than logits.
    """
    if probs.dim() != 2 or labels.shape[0] != probs.shape[0] or mask.shape[0] != probs.shape[0]:
        raise ShapeError(f'Mismatched probs {tuple(probs.shape)}, labels {tuple(labels.shape)}, mask {tuple(mask.shape)}')
    nodes = mask.nonzero(as_tuple=True)[0]
    if nodes.numel() == 0:
        raise EmptyMaskError('Cross entropy over an empty mask is undefined')
    targets = labels[nodes]
    if bool((targets < 0).any()) or bool((targets >= probs.shape[1]).any()):
        raise ShapeError('Masked nodes must carry a label in [0, c)')
    picked = probs[nodes, targets].clamp(min=LOG_CLAMP, max=1.0)
    return -picked.log().mean()


def maxpool_stack(h_list: list[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Elementwise maximum over K equally shaped matrices.

    Returns the pooled matrix and the index of the source matrix of every
    entry; ties go to the lowest index. Gradients reach only that source.
    """
    if not h_list:
        raise ShapeError('maxpool_stack needs at least one matrix')
    shape = h_list[0].shape
    if any(h.shape != shape for h in h_list):
        raise ShapeError(f'maxpool_stack needs identical shapes, got {[tuple(h.shape) for h in h_list]}')
    stacked = torch.stack(h_list, dim=0)
    # argmax returns the first maximal index.
    source = stacked.detach().argmax(dim=0)
    pooled = stacked.gather(0, source.unsqueeze(0)).squeeze(0)
    return pooled, source


def dropout_mask(
        shape: tuple[int, ...],
        rate: float,
        generator: torch.Generator | None = None,
        training: bool = True,
) -> torch.Tensor:
    """Inverted-dropout multiplier; all ones at evaluation time or when rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f'Dropout rate must lie in [0, 1), got {rate}')
    if not training or rate == 0.0:
        return torch.ones(shape, dtype=DTYPE)
    keep = torch.rand(shape, generator=generator, dtype=DTYPE) >= rate
    return keep.to(DTYPE) / (1.0 - rate)
