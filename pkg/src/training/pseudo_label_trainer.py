import torch
from torch import nn

from src.graph.graph import Graph
from src.models.mlp import PseudoLabelMlp
from src.numerics.ops import masked_cross_entropy
from src.numerics.optim import ParameterStore
from src.training.abstract_trainer import NodeClassifierTrainer
from src.training.config import TrainConfig


class PseudoLabelTrainer(NodeClassifierTrainer):
    """Trains the per-node MLP on the train mask; it is frozen afterwards."""

    def __init__(self, graph: Graph, config: TrainConfig, verbose: bool = False):
        super().__init__(
            graph=graph,
            config=config,
            max_iterations=config.mlp_epochs,
            patience=config.mlp_patience,
            verbose=verbose,
        )
        self.model = PseudoLabelMlp(
            in_features=graph.feature_dim,
            num_classes=graph.num_classes,
            hidden=config.mlp_hidden,
            dropout=config.mlp_dropout,
        )
        self._store = ParameterStore.from_module(
            self.model,
            lr=config.lr_p,
            optimizer=config.optimizer,
            weight_decay={name: config.mlp_weight_decay for name, _ in self.model.named_parameters()},
        )

    def modules(self) -> dict[str, nn.Module]:
        return {'f_p': self.model}

    def _iterate(self) -> float:
        probs = self.model(self._graph.features, self._generator)
        loss = masked_cross_entropy(probs, self._graph.labels, self._graph.train_mask)
        loss.backward()
        self._store.step()
        return loss.item()

    def _predict(self) -> torch.Tensor:
        return self.model(self._graph.features)


def train_pseudo_predictor(
        graph: Graph,
        epochs: int | None = None,
        lr: float | None = None,
        seed: int | None = None,
        config: TrainConfig | None = None,
        verbose: bool = False,
) -> PseudoLabelMlp:
    """Returns the MLP parameters with the best validation accuracy seen while training."""
    config = config or TrainConfig()
    overrides = {'mlp_epochs': epochs, 'lr_p': lr, 'seed': seed}
    config = config.replace(**{key: value for key, value in overrides.items() if value is not None})
    return PseudoLabelTrainer(graph, config, verbose=verbose).train().model
