from typing import Literal

import torch
from torch import nn

from src.graph.graph import Graph, normalized_adjacency
from src.models.gcn import Gcn
from src.models.labelwise import ClassAdjacency, LabelWiseGnn
from src.numerics.ops import masked_cross_entropy
from src.numerics.optim import ParameterStore
from src.training.abstract_trainer import NodeClassifierTrainer
from src.training.config import TrainConfig

Branch = Literal['labelwise', 'gcn']


def build_labelwise(graph: Graph, config: TrainConfig, num_layers: int | None = None) -> tuple[LabelWiseGnn, ParameterStore]:
    model = LabelWiseGnn(
        in_features=graph.feature_dim,
        num_classes=graph.num_classes,
        hidden=config.hidden,
        num_layers=num_layers or config.layers,
        dropout=config.dropout_c,
        fallback=config.empty_class_fallback,
    )
    store = ParameterStore.from_module(
        model,
        lr=config.lr_c,
        optimizer=config.optimizer,
        weight_decay={name: config.weight_decay_c for name, _ in model.named_parameters()},
    )
    return model, store


def build_gcn(graph: Graph, config: TrainConfig) -> tuple[Gcn, ParameterStore]:
    model = Gcn(
        in_features=graph.feature_dim,
        num_classes=graph.num_classes,
        hidden=config.gcn_hidden,
        num_layers=config.gcn_layers,
        dropout=config.dropout_g,
    )
    store = ParameterStore.from_module(
        model,
        lr=config.lr_g,
        optimizer=config.optimizer,
        weight_decay={'W0': config.weight_decay_g},
    )
    return model, store


class BranchTrainer(NodeClassifierTrainer):
    """Trains a single branch on its own cross entropy, with no selection weights."""

    def __init__(
            self,
            graph: Graph,
            config: TrainConfig,
            branch: Branch,
            class_adj: ClassAdjacency | None = None,
            verbose: bool = False,
    ):
        super().__init__(
            graph=graph,
            config=config,
            max_iterations=config.max_outer,
            patience=config.patience,
            verbose=verbose,
        )
        self._branch = branch
        self._class_adj = class_adj
        self._a_hat = None
        if branch == 'labelwise':
            if class_adj is None:
                raise ValueError('The label-wise branch needs class operators')
            self.model, self._store = build_labelwise(graph, config)
        elif branch == 'gcn':
            self._a_hat = normalized_adjacency(graph)
            self.model, self._store = build_gcn(graph, config)
        else:
            raise ValueError(f'Unknown branch {branch}')

    @property
    def a_hat(self):
        return self._a_hat

    def modules(self) -> dict[str, nn.Module]:
        return {'f_c' if self._branch == 'labelwise' else 'f_g': self.model}

    def _forward(self, generator: torch.Generator | None = None):
        if self._branch == 'labelwise':
            probs, activations = self.model(self._graph.features, self._class_adj, generator)
            return probs, activations.last_hidden
        probs, hidden = self.model(self._a_hat, self._graph.features, generator)
        return probs, hidden[-1] if hidden else probs

    def _iterate(self) -> float:
        loss = None
        for _ in range(self._config.inner_steps):
            probs, _ = self._forward(self._generator)
            loss = masked_cross_entropy(probs, self._graph.labels, self._graph.train_mask)
            loss.backward()
            self._store.step()
        return loss.item()

    def _predict(self) -> torch.Tensor:
        return self._forward()[0]

    @torch.no_grad()
    def representations(self) -> torch.Tensor:
        """Evaluation-mode output of the last hidden layer."""
        self._set_training(False)
        return self._forward()[1]
