from collections import OrderedDict
from typing import Iterable, Literal, Mapping

import torch
from torch import nn, optim

OptimizerName = Literal['adam', 'sgd']

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class ParameterStore:
    """
    Named trainable matrices together with their gradients and optimizer state.

    Gradients live on the parameters themselves; first/second moments and the
    step counter live in the wrapped torch optimizer.
    """

    def __init__(
            self,
            params: Mapping[str, nn.Parameter] | Iterable[tuple[str, nn.Parameter]],
            lr: float = 0.01,
            optimizer: OptimizerName = 'adam',
            weight_decay: Mapping[str, float] | None = None,
    ):
        if lr < 0:
            raise ValueError(f'Learning rate must be non-negative, got {lr}')
        self._params = OrderedDict(params.items() if isinstance(params, Mapping) else params)
        self._optimizer_name = optimizer
        weight_decay = weight_decay or {}

        unknown = set(weight_decay) - set(self._params)
        if unknown:
            raise KeyError(f'Weight decay given for unknown parameters {sorted(unknown)}')

        groups = [
            {'params': [param], 'weight_decay': weight_decay.get(name, 0.0), 'name': name}
            for name, param in self._params.items()
        ]
        if optimizer == 'adam':
            self._optimizer = optim.Adam(groups, lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)
        elif optimizer == 'sgd':
            self._optimizer = optim.SGD(groups, lr=lr)
        else:
            raise ValueError(f'Unknown optimizer {optimizer}')

    @classmethod
    def from_module(cls, module: nn.Module, **kwargs) -> 'ParameterStore':
        return cls(module.named_parameters(), **kwargs)

    def __getitem__(self, name: str) -> nn.Parameter:
        return self._params[name]

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    @property
    def optimizer_name(self) -> OptimizerName:
        return self._optimizer_name

    def gradient(self, name: str) -> torch.Tensor:
        param = self._params[name]
        return param.grad if param.grad is not None else torch.zeros_like(param)

    def moments(self, name: str) -> tuple[torch.Tensor, torch.Tensor]:
        state = self._optimizer.state.get(self._params[name], {})
        zeros = torch.zeros_like(self._params[name])
        return state.get('exp_avg', zeros), state.get('exp_avg_sq', zeros)

    def step_count(self, name: str) -> int:
        step = self._optimizer.state.get(self._params[name], {}).get('step', 0)
        return int(step)

    def zero_grad(self):
        self._optimizer.zero_grad(set_to_none=False)

    def step(self, lr: float | None = None):
        """Applies the configured update, then zeroes every gradient."""
        if lr is not None:
            if lr < 0:
                raise ValueError(f'Learning rate must be non-negative, got {lr}')
            for group in self._optimizer.param_groups:
                group['lr'] = lr
        self._optimizer.step()
        self.zero_grad()

    def state_dict(self) -> dict:
        return self._optimizer.state_dict()


def adam_step(store: ParameterStore, lr: float) -> ParameterStore:
    if store.optimizer_name != 'adam':
        raise ValueError(f'adam_step called on a store configured for {store.optimizer_name}')
    store.step(lr=lr)
    return store
