import numpy as np
import pytest
import torch

from src.errors import ConfigError
from src.evaluation import accuracy, representation_similarity
from src.graph.sources import SyntheticGraphSource
from src.graph.synthetic import SyntheticSpec
from src.training.config import TrainConfig
from src.training.experiments import benchmark, depth_sweep, similarity_study
from src.training.pipeline import run_ablation


def _source(homophily: float) -> SyntheticGraphSource:
    return SyntheticGraphSource(SyntheticSpec(num_nodes=1000, num_classes=5, target_homophily=homophily))


def test_accuracy_examples():
    labels = torch.tensor([0, 1, 1, 0])
    mask = torch.ones(4, dtype=torch.bool)
    perfect = torch.nn.functional.one_hot(labels, 2).double()
    assert accuracy(perfect, labels, mask) == 1.0
    half = perfect.clone()
    half[0] = torch.tensor([0.0, 1.0], dtype=torch.float64)
    complement = 1 - half
    assert accuracy(half, labels, mask) == 0.75
    assert accuracy(complement, labels, mask) == 0.25


def test_uniform_predictor_accuracy():
    generator = torch.Generator().manual_seed(0)
    labels = torch.randint(0, 5, (5000,), generator=generator)
    probs = torch.rand(5000, 5, generator=generator, dtype=torch.float64)
    assert accuracy(probs, labels, torch.ones(5000, dtype=torch.bool)) == pytest.approx(0.2, abs=0.05)


def test_similarity_of_orthogonal_class_rows():
    representations = torch.tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 2.0], [0.0, 2.0], [0.0, 0.0]], dtype=torch.float64)
    labels = torch.tensor([0, 0, 1, 1, 1])
    report = representation_similarity(representations, labels, torch.ones(5, dtype=torch.bool), bins=4)
    assert report.intra_mean == pytest.approx(1.0)
    assert report.inter_mean == pytest.approx(0.0)
    assert report.excluded_zero_rows == 1
    assert sum(report.intra_histogram) == pytest.approx(1.0)
    assert len(report.bin_edges) == 5


def test_similarity_of_random_rows():
    generator = torch.Generator().manual_seed(0)
    representations = torch.randn(300, 16, generator=generator, dtype=torch.float64)
    labels = torch.randint(0, 3, (300,), generator=generator)
    report = representation_similarity(representations, labels, torch.ones(300, dtype=torch.bool))
    assert abs(report.gap) < 0.02


def test_experiment_argument_checks():
    config = TrainConfig()
    with pytest.raises(ConfigError):
        benchmark(_source(0.1), config, ['full'], seeds=0)
    with pytest.raises(ConfigError):
        depth_sweep(_source(0.1).load(split_seed=0), config, depths=[])


def test_single_depth_sweep():
    spec = SyntheticSpec(num_nodes=150, num_classes=3, target_homophily=0.2, feature_dim=8)
    graph = SyntheticGraphSource(spec, train_per_class=10, val_count=30).load(split_seed=0)
    config = TrainConfig(max_outer=10, hidden=8, gcn_hidden=8, mlp_hidden=8, mlp_epochs=20)
    table = depth_sweep(graph, config, depths=[2], seeds=1, progress=False)
    assert table['depth'].tolist() == [2, 2]
    assert table['model'].tolist() == ['f_c', 'gcn']


def _mean_test_accuracy(source, variant, seeds=5):
    scores, weights = [], []
    for seed in range(seeds):
        config = TrainConfig(seed=seed)
        report = run_ablation(source.load(split_seed=seed), config, variant).report
        scores.append(100 * report.test_accuracy())
        weights.append(report.weight_c)
    return float(np.mean(scores)), weights


@pytest.mark.slow
def test_heterophilic_graph_favors_labelwise_branch():
    source = _source(0.1)
    full, weights = _mean_test_accuracy(source, 'full')
    gcn, _ = _mean_test_accuracy(source, 'fG-only')
    assert full >= gcn + 10
    assert all(weight > 0.9 for weight in weights)


@pytest.mark.slow
def test_homophilic_graph_matches_gcn():
    source = _source(0.9)
    full, weights = _mean_test_accuracy(source, 'full')
    gcn, _ = _mean_test_accuracy(source, 'fG-only')
    assert abs(full - gcn) <= 2
    assert all(weight < 0.1 for weight in weights)


@pytest.mark.slow
def test_labelwise_representations_are_more_discriminative():
    study = similarity_study(_source(0.1).load(split_seed=0), TrainConfig())
    assert study['f_c'].gap >= 0.1
    assert study['gcn'].gap < study['f_c'].gap


@pytest.mark.slow
def test_depth_insensitivity():
    graph = _source(0.1).load(split_seed=0)
    table = depth_sweep(graph, TrainConfig(), depths=[2, 3, 4, 5, 6], seeds=3, progress=False)
    f_c = table[table['model'] == 'f_c'].set_index('depth')['mean']
    gcn = table[table['model'] == 'gcn'].set_index('depth')['mean']
    assert f_c.max() - f_c.min() <= 5
    assert gcn[2] - gcn[6] >= 5


@pytest.mark.slow
def test_benchmark_table():
    table = benchmark(_source(0.1), TrainConfig(), ['mlp', 'gcn', 'full'], seeds=2, progress=False)
    assert table['variant'].tolist() == ['mlp-only', 'fG-only', 'full']
    assert table['mean'].between(0, 100).all()
    assert np.isnan(table.loc[0, 'weight_c'])
