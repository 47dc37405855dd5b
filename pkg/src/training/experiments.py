import numpy as np
import pandas as pd
from tqdm import tqdm

from src.errors import ConfigError
from src.evaluation import SimilarityReport, accuracy, representation_similarity
from src.graph.graph import Graph, homophily_ratio
from src.graph.sources import GraphSource
from src.models.labelwise import build_class_adjacency
from src.training.branch_trainer import BranchTrainer
from src.training.config import TrainConfig
from src.training.pipeline import pseudo_label_assignment, resolve_variant, run_ablation


def _summarize(rows: list[dict], keys: list[str]) -> pd.DataFrame:
    """Mean and population std of test accuracy in percent, grouped by `keys`."""
    df = pd.DataFrame(rows)
    df['test_accuracy'] = df['test_accuracy'] * 100
    summary = df.groupby(keys, sort=False)['test_accuracy'].agg(
        mean='mean',
        std=lambda values: float(np.std(values)),
        runs='count',
    )
    return summary.reset_index()


def depth_sweep(
        graph: Graph,
        config: TrainConfig,
        depths: list[int],
        seeds: int = 3,
        progress: bool = True,
) -> pd.DataFrame:
    """
    Test accuracy of the label-wise branch alone and of a GCN alone for each
    depth, as mean and std over `seeds` initializations on the same split.
    """
    if not depths:
        raise ConfigError('depth_sweep needs at least one depth')
    if seeds < 1:
        raise ConfigError('depth_sweep needs at least one seed')

    rows = []
    runs = [(depth, offset) for depth in depths for offset in range(seeds)]
    for depth, offset in tqdm(runs, desc='Depth sweep', disable=not progress):
        run_config = config.replace(seed=config.seed + offset, layers=depth, gcn_layers=depth)
        assignment, _ = pseudo_label_assignment(graph, run_config)
        class_adj = build_class_adjacency(graph, assignment)
        labelwise = BranchTrainer(graph, run_config, 'labelwise', class_adj=class_adj).train()
        gcn = BranchTrainer(graph, run_config, 'gcn').train()
        for model, trainer in (('f_c', labelwise), ('gcn', gcn)):
            rows.append({
                'depth': depth,
                'model': model,
                'seed': run_config.seed,
                'test_accuracy': accuracy(trainer.predict(), graph.labels, graph.test_mask),
            })
    return _summarize(rows, ['depth', 'model'])


def similarity_study(graph: Graph, config: TrainConfig, bins: int = 20) -> dict[str, SimilarityReport | float]:
    """
    Cosine similarity of last-layer representations over test-node pairs,
    for the label-wise branch and for a GCN trained on the same split.
    """
    assignment, _ = pseudo_label_assignment(graph, config)
    class_adj = build_class_adjacency(graph, assignment)
    labelwise = BranchTrainer(graph, config, 'labelwise', class_adj=class_adj).train()
    gcn = BranchTrainer(graph, config, 'gcn').train()
    mask = graph.test_mask
    return {
        'homophily': homophily_ratio(graph) if graph.is_fully_labeled and graph.num_edges else float('nan'),
        'f_c': representation_similarity(labelwise.representations(), graph.labels, mask, bins=bins),
        'gcn': representation_similarity(gcn.representations(), graph.labels, mask, bins=bins),
    }


def benchmark(
        source: GraphSource,
        config: TrainConfig,
        variants: list[str],
        seeds: int,
        resplit: bool = True,
        progress: bool = True,
) -> pd.DataFrame:
    """
    Test accuracy per variant as mean and std over `seeds` runs. Run i uses
    seed config.seed + i for both the split (when resplitting) and the models.
    """
    if seeds < 1:
        raise ConfigError('Benchmarking needs at least one seed')
    variants = [resolve_variant(v) for v in variants]
    if not variants:
        raise ConfigError('Benchmarking needs at least one variant')

    rows = []
    for offset in tqdm(range(seeds), desc='Benchmark', disable=not progress):
        run_config = config.replace(seed=config.seed + offset)
        graph = source.load(split_seed=run_config.seed, resplit=resplit)
        for variant in variants:
            report = run_ablation(graph, run_config, variant).report
            rows.append({
                'variant': variant,
                'seed': run_config.seed,
                'test_accuracy': report.test_accuracy(),
                'weight_c': float('nan') if report.weight_c is None else report.weight_c,
            })

    summary = _summarize(rows, ['variant'])
    weights = pd.DataFrame(rows).groupby('variant', sort=False)['weight_c'].mean()
    summary['weight_c'] = summary['variant'].map(weights)
    return summary
