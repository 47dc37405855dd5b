import time
from dataclasses import dataclass, field
from typing import Literal

import torch
from torch import nn

from src.errors import ConfigError
from src.evaluation import accuracy
from src.graph.graph import Graph
from src.models.gcn import Gcn
from src.models.labelwise import ClassAdjacency, LabelWiseGnn, build_class_adjacency
from src.models.mlp import LabelAssignment, PseudoLabelMlp, assign_labels, mlp_forward
from src.models.selector import SelectionWeights, combine_predictions
from src.numerics.sparse import SparseMatrix
from src.training.abstract_trainer import NodeClassifierTrainer
from src.training.bilevel_trainer import BilevelTrainer
from src.training.branch_trainer import BranchTrainer
from src.training.config import TrainConfig, TrainReport
from src.training.pseudo_label_trainer import PseudoLabelTrainer

Variant = Literal['full', 'no-selector-fC-only', 'fG-only', 'mlp-only', 'gnn-pseudo-labels']
VARIANTS: tuple[str, ...] = ('full', 'no-selector-fC-only', 'fG-only', 'mlp-only', 'gnn-pseudo-labels')
VARIANT_ALIASES = {
    'lwgnn': 'full',
    'fc': 'no-selector-fC-only',
    'gcn': 'fG-only',
    'mlp': 'mlp-only',
    'lwgnn-p': 'gnn-pseudo-labels',
}


def resolve_variant(name: str) -> Variant:
    name = VARIANT_ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ConfigError(f'Unknown variant {name!r}; choose from {VARIANTS} or {tuple(VARIANT_ALIASES)}')
    return name


@dataclass
class TrainedModels:
    """Frozen models of one run plus the operators they were trained with."""
    class_adj: ClassAdjacency | None = None
    a_hat: SparseMatrix | None = None
    f_p: PseudoLabelMlp | None = None
    f_c: LabelWiseGnn | None = None
    f_g: Gcn | None = None
    selector: SelectionWeights | None = None

    def modules(self) -> dict[str, nn.Module]:
        named = {'f_p': self.f_p, 'f_c': self.f_c, 'f_g': self.f_g, 'selector': self.selector}
        return {name: module for name, module in named.items() if module is not None}

    @torch.no_grad()
    def branch_probabilities(self, graph: Graph) -> dict[str, torch.Tensor]:
        for module in self.modules().values():
            module.eval()
        probs = {}
        if self.f_p is not None:
            probs['f_p'] = mlp_forward(graph.features, self.f_p)
        if self.f_c is not None:
            probs['f_c'], _ = self.f_c(graph.features, self.class_adj)
        if self.f_g is not None:
            probs['f_g'], _ = self.f_g(self.a_hat, graph.features)
        return probs

    @torch.no_grad()
    def predict(self, graph: Graph) -> torch.Tensor:
        probs = self.branch_probabilities(graph)
        if self.selector is not None:
            return combine_predictions(probs['f_c'], probs['f_g'], self.selector)
        for name in ('f_c', 'f_g', 'f_p'):
            if name in probs:
                return probs[name]
        raise ValueError('No trained model to predict with')


@dataclass
class TrainResult:
    models: TrainedModels
    report: TrainReport
    assignment: LabelAssignment | None = None
    trainer: NodeClassifierTrainer | None = field(default=None, repr=False)

    @property
    def selector(self) -> SelectionWeights | None:
        return self.models.selector


def evaluate(models: TrainedModels, graph: Graph, mask: torch.Tensor) -> float:
    """Accuracy of the combined (or single-branch) prediction over `mask`."""
    return accuracy(models.predict(graph), graph.labels, mask)


def _split_accuracies(probs: torch.Tensor, graph: Graph) -> dict[str, float]:
    return {
        split: accuracy(probs, graph.labels, mask)
        for split, mask in zip(('train', 'val', 'test'), graph.masks)
        if bool(mask.any())
    }


def pseudo_label_assignment(graph: Graph, config: TrainConfig, verbose: bool = False) -> tuple[LabelAssignment, PseudoLabelMlp | None]:
    """Trains the configured pseudo-label predictor and merges its argmax with the known labels."""
    if config.pseudo_labeler == 'mlp':
        mlp = PseudoLabelTrainer(graph, config, verbose=verbose).train().model
        return assign_labels(graph, mlp_forward(graph.features, mlp), config.labeled_nodes), mlp
    trainer = BranchTrainer(graph, config, 'gcn', verbose=verbose).train()
    return assign_labels(graph, trainer.predict(), config.labeled_nodes), None


def _report(
        variant: str,
        graph: Graph,
        config: TrainConfig,
        models: TrainedModels,
        trainer: NodeClassifierTrainer,
        assignment: LabelAssignment | None,
        start: float,
) -> TrainReport:
    accuracies = {'combined': _split_accuracies(models.predict(graph), graph)}
    for name, probs in models.branch_probabilities(graph).items():
        accuracies[name] = _split_accuracies(probs, graph)

    pseudo_accuracy = None
    if assignment is not None and bool(graph.test_mask.any()):
        test = graph.test_mask
        pseudo_accuracy = float((assignment.classes[test] == graph.labels[test]).double().mean())

    return TrainReport(
        variant=variant,
        seed=config.seed,
        config=config.to_dict(),
        train_losses=list(trainer.train_losses),
        val_losses=list(trainer.val_losses),
        accuracies=accuracies,
        weight_c=models.selector.weight_c if models.selector is not None else None,
        best_iteration=trainer.best_iteration,
        iterations=trainer.iterations,
        pseudo_label_accuracy=pseudo_accuracy,
        wall_clock_seconds=time.time() - start,
    )


def train(graph: Graph, config: TrainConfig, verbose: bool = False, variant: str = 'full') -> TrainResult:
    """
    Trains the pseudo-label predictor, freezes the class operators built
    from its labels, then runs the alternating bi-level loop.
    """
    start = time.time()
    assignment, mlp = pseudo_label_assignment(graph, config, verbose=verbose)
    class_adj = build_class_adjacency(graph, assignment)
    trainer = BilevelTrainer(graph, config, class_adj, verbose=verbose).train()
    models = TrainedModels(
        class_adj=class_adj,
        a_hat=trainer.a_hat,
        f_p=mlp,
        f_c=trainer.f_c,
        f_g=trainer.f_g,
        selector=trainer.selector,
    )
    report = _report(variant, graph, config, models, trainer, assignment, start)
    return TrainResult(models=models, report=report, assignment=assignment, trainer=trainer)


def run_ablation(graph: Graph, config: TrainConfig, variant: str, verbose: bool = False) -> TrainResult:
    variant = resolve_variant(variant)
    start = time.time()

    if variant == 'full':
        return train(graph, config, verbose=verbose)
    if variant == 'gnn-pseudo-labels':
        return train(graph, config.replace(pseudo_labeler='gcn'), verbose=verbose, variant=variant)

    if variant == 'mlp-only':
        trainer = PseudoLabelTrainer(graph, config, verbose=verbose).train()
        models = TrainedModels(f_p=trainer.model)
        report = _report(variant, graph, config, models, trainer, None, start)
        return TrainResult(models=models, report=report, trainer=trainer)

    if variant == 'fG-only':
        trainer = BranchTrainer(graph, config, 'gcn', verbose=verbose).train()
        models = TrainedModels(a_hat=trainer.a_hat, f_g=trainer.model)
        report = _report(variant, graph, config, models, trainer, None, start)
        return TrainResult(models=models, report=report, trainer=trainer)

    assignment, mlp = pseudo_label_assignment(graph, config, verbose=verbose)
    class_adj = build_class_adjacency(graph, assignment)
    trainer = BranchTrainer(graph, config, 'labelwise', class_adj=class_adj, verbose=verbose).train()
    models = TrainedModels(class_adj=class_adj, f_p=mlp, f_c=trainer.model)
    report = _report(variant, graph, config, models, trainer, assignment, start)
    return TrainResult(models=models, report=report, assignment=assignment, trainer=trainer)
