import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any

from src.errors import ConfigError

_CHOICES = {
    'optimizer': ('adam', 'sgd'),
    'empty_class_fallback': ('zero', 'class-mean'),
    'labeled_nodes': ('train+val', 'train'),
    'pseudo_labeler': ('mlp', 'gcn'),
}


@dataclass(frozen=True)
class TrainConfig:
    # Bi-level loop
    lr_c: float = 0.01
    lr_g: float = 0.01
    lr_phi: float = 0.01
    inner_steps: int = 2
    max_outer: int = 300
    patience: int = 40
    selector_tol: float = 1e-3
    seed: int = 0
    optimizer: str = 'adam'

    # Label-wise branch
    layers: int = 2
    hidden: int = 64
    empty_class_fallback: str = 'zero'
    dropout_c: float = 0.5
    weight_decay_c: float = 5e-4

    # Homophilic branch
    gcn_layers: int = 2
    gcn_hidden: int = 64
    dropout_g: float = 0.5
    weight_decay_g: float = 5e-4

    # Pseudo-label predictor
    pseudo_labeler: str = 'mlp'
    labeled_nodes: str = 'train+val'
    lr_p: float = 0.01
    mlp_hidden: int = 64
    mlp_epochs: int = 500
    mlp_patience: int = 50
    mlp_dropout: float = 0.0
    mlp_weight_decay: float = 0.0

    def __post_init__(self):
        for name in ('lr_c', 'lr_g', 'lr_phi', 'lr_p'):
            if not getattr(self, name) > 0:
                raise ConfigError(f'{name} must be positive, got {getattr(self, name)}')
        for name in ('inner_steps', 'max_outer', 'patience', 'layers', 'hidden', 'gcn_layers', 'gcn_hidden',
                     'mlp_hidden', 'mlp_epochs', 'mlp_patience'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be at least 1, got {getattr(self, name)}')
        for name in ('dropout_c', 'dropout_g', 'mlp_dropout'):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f'{name} must lie in [0, 1), got {getattr(self, name)}')
        for name in ('weight_decay_c', 'weight_decay_g', 'mlp_weight_decay', 'selector_tol'):
            if getattr(self, name) < 0:
                raise ConfigError(f'{name} must be non-negative, got {getattr(self, name)}')
        for name, choices in _CHOICES.items():
            if getattr(self, name) not in choices:
                raise ConfigError(f'{name} must be one of {choices}, got {getattr(self, name)!r}')

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> 'TrainConfig':
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f'Unknown training options {sorted(unknown)}')
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def replace(self, **changes) -> 'TrainConfig':
        return dataclasses.replace(self, **changes)


@dataclass
class TrainReport:
    variant: str
    seed: int
    config: dict[str, Any]
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    accuracies: dict[str, dict[str, float]] = field(default_factory=dict)
    weight_c: float | None = None
    best_iteration: int = 0
    iterations: int = 0
    pseudo_label_accuracy: float | None = None
    wall_clock_seconds: float = 0.0

    def test_accuracy(self, model: str = 'combined') -> float:
        return self.accuracies[model]['test']

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def save(self, path: str):
        directory = os.path.dirname(path)
        if directory and not os.path.exists(directory):
            os.makedirs(directory)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> 'TrainReport':
        with open(path, 'r', encoding='utf-8') as f:
            return cls(**json.load(f))
