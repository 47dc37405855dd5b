import math
import os

import pandas as pd
import pytest
import torch
from torch import nn

from conftest import make_graph
from src.errors import ConfigError, EmptyMaskError, NumericalAbortError
from src.graph.sources import SyntheticGraphSource
from src.graph.synthetic import SyntheticSpec
from src.models.labelwise import build_class_adjacency
from src.models.mlp import LabelAssignment
from src.training.abstract_trainer import NodeClassifierTrainer
from src.training.bilevel_trainer import BilevelTrainer
from src.training.config import TrainConfig, TrainReport
from src.training.pipeline import VARIANTS, evaluate, resolve_variant, run_ablation, train

FAST = TrainConfig(max_outer=15, patience=10, hidden=8, gcn_hidden=8, mlp_hidden=8, mlp_epochs=30, mlp_patience=10)


class _Counter(nn.Module):
    def __init__(self):
        super().__init__()
        self.value = nn.Parameter(torch.zeros(1, dtype=torch.float64))


class ScriptedTrainer(NodeClassifierTrainer):
    """Reports a scripted validation accuracy and confidence at every iteration."""

    def __init__(self, graph, script, patience, train_loss=1.0):
        super().__init__(graph, TrainConfig(), max_iterations=len(script), patience=patience)
        self.counter = _Counter()
        self._script = script
        self._train_loss = train_loss

    def modules(self):
        return {'counter': self.counter}

    def _iterate(self):
        with torch.no_grad():
            self.counter.value += 1
        return self._train_loss

    def _predict(self):
        accuracy, confidence = self._script[int(self.counter.value) - 1]
        probs = torch.tensor([[0.5, 0.5]] * 6, dtype=torch.float64)
        for rank, node in enumerate(range(2, 6)):
            correct = rank < round(accuracy * 4)
            probs[node] = torch.tensor([confidence, 1 - confidence] if correct else [0.1, 0.9])
        return probs


@pytest.fixture
def scripted_graph():
    return make_graph(6, 2, [(0, 1)], [0, 1, 0, 0, 0, 0], train=[0, 1], val=[2, 3, 4, 5])


def test_patience_and_best_snapshot(scripted_graph):
    script = [(0.25, 0.9), (0.5, 0.9), (0.5, 0.9), (0.25, 0.9), (1.0, 0.9)]
    trainer = ScriptedTrainer(scripted_graph, script, patience=2).train()
    assert trainer.iterations == 4
    assert trainer.best_iteration == 1
    assert trainer.best_val_accuracy == 0.5
    assert trainer.counter.value.item() == 2.0


def test_equal_accuracy_is_not_an_improvement(scripted_graph):
    script = [(0.5, 0.6), (0.5, 0.9), (0.5, 0.9)]
    trainer = ScriptedTrainer(scripted_graph, script, patience=1).train()
    assert trainer.best_iteration == 0
    assert trainer.iterations == 2
    assert trainer.counter.value.item() == 1.0


def test_non_finite_loss_aborts(scripted_graph):
    with pytest.raises(NumericalAbortError):
        ScriptedTrainer(scripted_graph, [(0.5, 0.9)], patience=1, train_loss=math.nan).train()


def test_empty_masks_are_rejected():
    graph = make_graph(3, 2, [(0, 1)], [0, 1, 0], train=[0, 1])
    with pytest.raises(EmptyMaskError):
        ScriptedTrainer(graph, [(0.5, 0.9)], patience=1)


def test_losses_and_state_are_saved(scripted_graph, tmp_path):
    trainer = ScriptedTrainer(scripted_graph, [(0.25, 0.9), (0.5, 0.9)], patience=5).train()
    trainer.save_losses(str(tmp_path))
    trainer.save_state(str(tmp_path))
    losses = pd.read_csv(tmp_path / 'losses.csv')
    assert list(losses.columns) == ['iteration', 'train_loss', 'val_loss']
    assert len(losses) == 2
    state = torch.load(tmp_path / 'models.pt')
    assert state['counter']['value'].item() == 2.0


@pytest.fixture(scope='module')
def small_graph():
    spec = SyntheticSpec(num_nodes=150, num_classes=3, target_homophily=0.2, feature_dim=8, class_center_separation=3.0)
    return SyntheticGraphSource(spec, train_per_class=10, val_count=30).load(split_seed=0)


def _truth_operators(graph):
    assignment = LabelAssignment(graph.labels, graph.train_mask | graph.val_mask, graph.num_classes)
    return build_class_adjacency(graph, assignment)


def test_selection_step_leaves_branches_fixed(small_graph):
    trainer = BilevelTrainer(small_graph, FAST, _truth_operators(small_graph))
    branches = [p.detach().clone() for p in list(trainer.f_c.parameters()) + list(trainer.f_g.parameters())]
    phi = trainer.selector.phi.detach().clone()
    trainer._update_selection()
    after = list(trainer.f_c.parameters()) + list(trainer.f_g.parameters())
    assert all(torch.equal(a, b) for a, b in zip(branches, after))
    assert not torch.equal(trainer.selector.phi.detach(), phi)


def test_branch_steps_leave_phi_fixed(small_graph):
    trainer = BilevelTrainer(small_graph, FAST, _truth_operators(small_graph))
    head = trainer.f_c.W_C.detach().clone()
    phi = trainer.selector.phi.detach().clone()
    trainer._update_branches()
    assert torch.equal(trainer.selector.phi.detach(), phi)
    assert not torch.equal(trainer.f_c.W_C.detach(), head)
    assert all(p.grad is None or not bool(p.grad.any()) for p in trainer.modules()['f_c'].parameters())


def test_restore_keeps_last_selection_weights(small_graph):
    trainer = BilevelTrainer(small_graph, FAST, _truth_operators(small_graph)).train()
    assert len(trainer.weight_history) == trainer.iterations
    assert trainer.selector.weight_c == trainer.weight_history[-1]
    assert set(trainer._snapshot()) == {'f_c', 'f_g'}


def test_convergence_waits_for_selection_weights(small_graph):
    trainer = BilevelTrainer(small_graph, FAST.replace(patience=2, selector_tol=0.01), _truth_operators(small_graph))
    trainer.weight_history = [0.5, 0.6, 0.7]
    assert not trainer._converged(2)
    trainer.weight_history = [0.7, 0.705, 0.704]
    assert trainer._converged(2)
    assert not trainer._converged(1)
    trainer.weight_history = [0.704]
    assert not trainer._converged(5)


def test_moving_selection_weights_run_to_the_cap(small_graph):
    config = FAST.replace(patience=1, selector_tol=0.0)
    trainer = BilevelTrainer(small_graph, config, _truth_operators(small_graph)).train()
    assert trainer.iterations == config.max_outer


def test_train_report(small_graph, tmp_path):
    result = train(small_graph, FAST)
    report = result.report
    assert report.variant == 'full'
    assert set(report.accuracies) == {'combined', 'f_p', 'f_c', 'f_g'}
    assert set(report.accuracies['combined']) == {'train', 'val', 'test'}
    assert 0.0 < report.weight_c < 1.0
    assert report.weight_c == result.selector.weight_c
    assert len(report.train_losses) == len(report.val_losses) == report.iterations
    assert report.iterations <= FAST.max_outer
    assert report.config == FAST.to_dict()
    assert 0.0 <= report.pseudo_label_accuracy <= 1.0
    assert evaluate(result.models, small_graph, small_graph.test_mask) == report.test_accuracy()

    path = str(tmp_path / 'report.json')
    report.save(path)
    assert TrainReport.load(path) == report


def test_training_is_deterministic(small_graph):
    first = train(small_graph, FAST.replace(seed=3)).report.to_dict()
    second = train(small_graph, FAST.replace(seed=3)).report.to_dict()
    first.pop('wall_clock_seconds')
    second.pop('wall_clock_seconds')
    assert first == second


@pytest.mark.parametrize('variant', VARIANTS)
def test_ablation_variants(small_graph, variant):
    report = run_ablation(small_graph, FAST, variant).report
    assert report.variant == variant
    assert 0.0 <= report.test_accuracy() <= 1.0
    if variant in ('full', 'gnn-pseudo-labels'):
        assert report.weight_c is not None
    else:
        assert report.weight_c is None
    if variant == 'mlp-only':
        assert set(report.accuracies) == {'combined', 'f_p'}
    if variant == 'fG-only':
        assert set(report.accuracies) == {'combined', 'f_g'}
    if variant == 'gnn-pseudo-labels':
        assert 'f_p' not in report.accuracies


def test_variant_aliases():
    assert resolve_variant('lwgnn') == 'full'
    assert resolve_variant('gcn') == 'fG-only'
    assert resolve_variant('mlp-only') == 'mlp-only'
    with pytest.raises(ConfigError):
        resolve_variant('gat')


@pytest.mark.parametrize('changes', [
    {'lr_c': 0.0},
    {'inner_steps': 0},
    {'dropout_g': 1.0},
    {'weight_decay_g': -1.0},
    {'optimizer': 'rmsprop'},
    {'empty_class_fallback': 'mean'},
    {'selector_tol': -1.0},
])
def test_invalid_config(changes):
    with pytest.raises(ConfigError):
        TrainConfig(**changes)


def test_config_from_dict():
    assert TrainConfig.from_dict({'layers': 3}).layers == 3
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({'depth': 3})
    assert TrainConfig.from_dict(FAST.to_dict()) == FAST
