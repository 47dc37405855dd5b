import copy
import math
import os
import time
from abc import ABC, abstractmethod

import pandas as pd
import torch
from torch import nn

from src.errors import EmptyMaskError, NumericalAbortError
from src.evaluation import accuracy
from src.graph.graph import Graph
from src.numerics.ops import masked_cross_entropy
from src.training.config import TrainConfig
from src.util import create_dir_if_not_exist, format_elapsed, seed_everything


class NodeClassifierTrainer(ABC):
    """
    Full-batch training loop shared by every model in the package.

    Each iteration is defined by the subclass. After it the validation loss
    and accuracy are measured; training stops once validation accuracy has
    not improved for `patience` iterations and the snapshot with the best
    validation accuracy is restored. The earliest iteration wins ties.
    """

    def __init__(
            self,
            graph: Graph,
            config: TrainConfig,
            max_iterations: int,
            patience: int,
            verbose: bool = False,
            log_every: int = 10,
    ):
        if not bool(graph.train_mask.any()):
            raise EmptyMaskError('Training needs a non-empty train mask')
        if not bool(graph.val_mask.any()):
            raise EmptyMaskError('Training needs a non-empty validation mask')

        self._graph = graph
        self._config = config
        self._max_iterations = max_iterations
        self._patience = patience
        self._verbose = verbose
        self._log_every = log_every
        self._generator = seed_everything(config.seed)

        self.train_losses: list[float] = []
        self.val_losses: list[float] = []
        self.best_iteration = 0
        self.best_val_accuracy = 0.0

    @abstractmethod
    def modules(self) -> dict[str, nn.Module]:
        raise NotImplementedError('Must be implemented by child class')

    @abstractmethod
    def _iterate(self) -> float:
        """Runs one training iteration and returns its training loss."""
        raise NotImplementedError('Must be implemented by child class')

    @abstractmethod
    def _predict(self) -> torch.Tensor:
        raise NotImplementedError('Must be implemented by child class')

    def _set_training(self, mode: bool):
        for module in self.modules().values():
            module.train(mode)

    @torch.no_grad()
    def predict(self) -> torch.Tensor:
        """Evaluation-mode class probabilities for every node."""
        self._set_training(False)
        return self._predict()

    @property
    def iterations(self) -> int:
        return len(self.train_losses)

    def _snapshot_modules(self) -> dict[str, nn.Module]:
        """Modules rolled back to the best iteration once training stops."""
        return self.modules()

    def _snapshot(self) -> dict[str, dict]:
        return {name: copy.deepcopy(module.state_dict()) for name, module in self._snapshot_modules().items()}

    def _restore(self, snapshot: dict[str, dict]):
        for name, module in self._snapshot_modules().items():
            module.load_state_dict(snapshot[name])

    def _converged(self, stale: int) -> bool:
        return stale >= self._patience

    def _log(self, iteration: int, train_loss: float, val_loss: float, val_accuracy: float, start_time: float):
        print(
            f'Iteration {iteration + 1}/{self._max_iterations} - Train loss: {train_loss:.4f} - '
            f'Val loss: {val_loss:.4f} - Val acc: {val_accuracy:.4f} - '
            f'Time Taken {format_elapsed(time.time() - start_time)}min',
            flush=True,
        )

    def save_state(self, directory: str):
        create_dir_if_not_exist(directory)
        torch.save(
            {name: module.state_dict() for name, module in self.modules().items()},
            os.path.join(directory, 'models.pt'),
        )

    def save_losses(self, directory: str):
        create_dir_if_not_exist(directory)
        df = pd.DataFrame({'train_loss': self.train_losses, 'val_loss': self.val_losses})
        df.to_csv(os.path.join(directory, 'losses.csv'), index_label='iteration')

    def train(self) -> 'NodeClassifierTrainer':
        labels, val_mask = self._graph.labels, self._graph.val_mask
        if self._verbose:
            print(f'=== Starting Training ({type(self).__name__}) ===', flush=True)

        start = time.time()
        best_snapshot, stale = None, 0
        self.best_val_accuracy = -1.0
        for iteration in range(self._max_iterations):
            self._set_training(True)
            train_loss = self._iterate()
            probs = self.predict()
            val_loss = float(masked_cross_entropy(probs, labels, val_mask))
            if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                raise NumericalAbortError(
                    f'{type(self).__name__} produced a non-finite loss at iteration {iteration + 1} '
                    f'(train {train_loss}, val {val_loss})'
                )
            val_accuracy = accuracy(probs, labels, val_mask)
            self.train_losses.append(train_loss)
            self.val_losses.append(val_loss)

            if val_accuracy > self.best_val_accuracy:
                self.best_val_accuracy = val_accuracy
                self.best_iteration = iteration
                best_snapshot = self._snapshot()
                stale = 0
            else:
                stale += 1

            converged = self._converged(stale)
            if self._verbose and (iteration % self._log_every == 0 or converged):
                self._log(iteration, train_loss, val_loss, val_accuracy, start)
            if converged:
                break

        self._restore(best_snapshot)
        self._set_training(False)
        return self
