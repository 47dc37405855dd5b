import torch
from torch import nn

from src.graph.graph import Graph, normalized_adjacency
from src.models.labelwise import ClassAdjacency
from src.models.selector import SelectionWeights, combine_predictions
from src.numerics.ops import masked_cross_entropy
from src.numerics.optim import ParameterStore
from src.training.abstract_trainer import NodeClassifierTrainer
from src.training.branch_trainer import build_gcn, build_labelwise
from src.training.config import TrainConfig


class BilevelTrainer(NodeClassifierTrainer):
    """
    Alternating optimization of the selection weights and both branches.

    One outer iteration first updates (phi1, phi2) on the validation loss of
    the combined prediction with the branch outputs held constant, then
    updates both branches for `inner_steps` steps on the training loss of the
    combined prediction with the mixture held fixed.

    Only the branches are rolled back to the best-validation-accuracy
    iteration; (phi1, phi2) keep their last value. The loop has converged
    once validation accuracy is stale for `patience` iterations and the
    weight of f_C moved less than `selector_tol` over those iterations.
    """

    def __init__(self, graph: Graph, config: TrainConfig, class_adj: ClassAdjacency, verbose: bool = False):
        super().__init__(
            graph=graph,
            config=config,
            max_iterations=config.max_outer,
            patience=config.patience,
            verbose=verbose,
        )
        self._class_adj = class_adj
        self._a_hat = normalized_adjacency(graph)
        self.f_c, self._c_store = build_labelwise(graph, config)
        self.f_g, self._g_store = build_gcn(graph, config)
        self.selector = SelectionWeights()
        self._phi_store = ParameterStore.from_module(self.selector, lr=config.lr_phi, optimizer=config.optimizer)
        self.weight_history: list[float] = []

    @property
    def a_hat(self):
        return self._a_hat

    def modules(self) -> dict[str, nn.Module]:
        return {'f_c': self.f_c, 'f_g': self.f_g, 'selector': self.selector}

    def _snapshot_modules(self) -> dict[str, nn.Module]:
        return {'f_c': self.f_c, 'f_g': self.f_g}

    def _converged(self, stale: int) -> bool:
        if not super()._converged(stale) or len(self.weight_history) <= self._patience:
            return False
        drift = abs(self.weight_history[-1] - self.weight_history[-1 - self._patience])
        return drift < self._config.selector_tol

    def _branch_predictions(self, generator: torch.Generator | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        y_c, _ = self.f_c(self._graph.features, self._class_adj, generator)
        y_g, _ = self.f_g(self._a_hat, self._graph.features, generator)
        return y_c, y_g

    def _update_selection(self) -> float:
        self._set_training(False)
        with torch.no_grad():
            y_c, y_g = self._branch_predictions()
        combined = combine_predictions(y_c, y_g, self.selector)
        val_loss = masked_cross_entropy(combined, self._graph.labels, self._graph.val_mask)
        val_loss.backward()
        self._phi_store.step()
        return val_loss.item()

    def _update_branches(self) -> float:
        self._set_training(True)
        mixture = self.selector.mixture().detach()
        loss = None
        for _ in range(self._config.inner_steps):
            y_c, y_g = self._branch_predictions(self._generator)
            loss = masked_cross_entropy(combine_predictions(y_c, y_g, mixture), self._graph.labels, self._graph.train_mask)
            loss.backward()
            self._c_store.step()
            self._g_store.step()
        return loss.item()

    def _iterate(self) -> float:
        self._update_selection()
        self.weight_history.append(self.selector.weight_c)
        return self._update_branches()

    def _predict(self) -> torch.Tensor:
        y_c, y_g = self._branch_predictions()
        return combine_predictions(y_c, y_g, self.selector)
