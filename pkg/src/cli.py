import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field

from src.errors import ConfigError, GradientMismatchError, LabelWiseError
from src.evaluation import SimilarityReport
from src.graph.graph import homophily_ratio
from src.graph.sources import GraphSource, JsonGraphSource, SyntheticGraphSource
from src.graph.synthetic import SyntheticSpec
from src.gradient_suite import run_gradient_suite
from src.training.config import TrainConfig
from src.training.experiments import benchmark, depth_sweep, similarity_study
from src.training.pipeline import resolve_variant, run_ablation
from src.util import create_dir_if_not_exist

# Flag name -> TrainConfig fields it sets.
_TRAIN_FLAGS = {
    'seed': ('seed',),
    'layers': ('layers',),
    'hidden': ('hidden',),
    'inner_steps': ('inner_steps',),
    'lr': ('lr_c', 'lr_g', 'lr_phi', 'lr_p'),
    'max_outer': ('max_outer',),
    'patience': ('patience',),
    'selector_tol': ('selector_tol',),
    'optimizer': ('optimizer',),
    'fallback': ('empty_class_fallback',),
    'gcn_layers': ('gcn_layers',),
    'labeled_nodes': ('labeled_nodes',),
    'pseudo_labeler': ('pseudo_labeler',),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    command: str
    train: TrainConfig = field(default_factory=TrainConfig)
    graph_path: str | None = None
    synthetic: SyntheticSpec | None = None
    out_dir: str = 'runs'
    report_format: str = 'json'
    train_per_class: int = 20
    val_count: int = 200

    def __post_init__(self):
        if (self.graph_path is None) == (self.synthetic is None):
            raise ConfigError('Give exactly one graph source: --graph PATH or --synthetic-h F')
        if self.report_format != 'json':
            raise ConfigError(f'Unsupported report format {self.report_format!r}')

    def source(self) -> GraphSource:
        if self.graph_path is not None:
            return JsonGraphSource(self.graph_path, self.train_per_class, self.val_count)
        return SyntheticGraphSource(self.synthetic, self.train_per_class, self.val_count)

    def to_dict(self) -> dict:
        return {
            'command': self.command,
            'graph_path': self.graph_path,
            'synthetic': dataclasses.asdict(self.synthetic) if self.synthetic is not None else None,
            'out_dir': self.out_dir,
            'report_format': self.report_format,
            'train_per_class': self.train_per_class,
            'val_count': self.val_count,
            'train': self.train.to_dict(),
        }


def _read_config_file(path: str) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            values = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f'Could not read config file {path}: {e}') from e
    # A report's config echo can be fed back in as is.
    for key in ('config', 'train'):
        if not isinstance(values, dict):
            raise ConfigError(f'Config file {path} must hold a JSON object of training options')
        values = values.get(key, values)
    if not isinstance(values, dict):
        raise ConfigError(f'Config file {path} must hold a JSON object of training options')
    return dict(values)


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Dataclass defaults, then the JSON config file, then explicit flags."""
    values = _read_config_file(args.config) if getattr(args, 'config', None) else {}
    for flag, names in _TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values.update({name: value for name in names})
    train_config = TrainConfig.from_dict(values)

    synthetic = None
    if getattr(args, 'synthetic_h', None) is not None:
        synthetic = SyntheticSpec(
            num_nodes=args.synthetic_n,
            num_classes=args.synthetic_c,
            target_homophily=args.synthetic_h,
            avg_degree=args.synthetic_degree,
            feature_dim=args.synthetic_dim,
            class_center_separation=args.synthetic_separation,
            noise_scale=args.synthetic_noise,
            seed=train_config.seed if args.synthetic_seed is None else args.synthetic_seed,
        )
    return RunConfig(
        command=args.command,
        train=train_config,
        graph_path=getattr(args, 'graph', None),
        synthetic=synthetic,
        out_dir=args.out,
        train_per_class=args.train_per_class,
        val_count=args.val_count,
    )


def _format_weight(weight: float | None) -> str:
    return 'n/a' if weight is None else f'{weight:.4f}'


def cmd_train(args: argparse.Namespace) -> int:
    run = resolve_run_config(args)
    graph = run.source().load(split_seed=run.train.seed)
    result = run_ablation(graph, run.train, args.variant, verbose=args.verbose)

    report = result.report
    report.config = run.to_dict()
    create_dir_if_not_exist(run.out_dir)
    report.save(os.path.join(run.out_dir, 'report.json'))
    result.trainer.save_losses(run.out_dir)
    result.trainer.save_state(run.out_dir)

    print(
        f'Variant: {report.variant} - Test acc: {report.test_accuracy():.4f} - '
        f'Weight f_C: {_format_weight(report.weight_c)} - Iterations: {report.iterations}',
        flush=True,
    )
    return 0


def cmd_homophily(args: argparse.Namespace) -> int:
    run = resolve_run_config(args)
    print(f'{homophily_ratio(run.source().read()):.4f}', flush=True)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    reports = run_gradient_suite(seeds=args.seeds, tol=args.tol, inject_fault=args.inject_fault, progress=args.verbose)
    failures = [report for report in reports if not report.passed]
    for report in failures:
        print(report.summary(), file=sys.stderr, flush=True)
    print(f'{len(reports) - len(failures)}/{len(reports)} gradient checks passed at tol {args.tol:g}', flush=True)
    if failures:
        raise GradientMismatchError(f'{len(failures)} gradient checks failed')
    return 0


def _parse_list(text: str, cast=str) -> list:
    try:
        return [cast(item.strip()) for item in text.split(',') if item.strip()]
    except ValueError as e:
        raise ConfigError(f'Could not parse list {text!r}: {e}') from e


def cmd_bench(args: argparse.Namespace) -> int:
    run = resolve_run_config(args)
    variants = [resolve_variant(v) for v in _parse_list(args.variants)]
    table = benchmark(
        run.source(),
        run.train,
        variants,
        seeds=args.seeds,
        resplit=not args.keep_splits,
        progress=args.verbose,
    )
    create_dir_if_not_exist(run.out_dir)
    table.to_csv(os.path.join(run.out_dir, 'bench.csv'), index=False)
    for row in table.itertuples(index=False):
        weight = '' if math.isnan(row.weight_c) else f' - Weight f_C: {row.weight_c:.3f}'
        print(f'{row.variant:<20} {row.mean:.1f} ± {row.std:.1f} ({row.runs} runs){weight}', flush=True)
    return 0


def cmd_depth(args: argparse.Namespace) -> int:
    run = resolve_run_config(args)
    graph = run.source().load(split_seed=run.train.seed)
    table = depth_sweep(graph, run.train, _parse_list(args.depths, int), seeds=args.seeds, progress=args.verbose)
    create_dir_if_not_exist(run.out_dir)
    table.to_csv(os.path.join(run.out_dir, 'depth.csv'), index=False)
    for row in table.itertuples(index=False):
        print(f'K={row.depth} {row.model:<4} {row.mean:.1f} ± {row.std:.1f}', flush=True)
    return 0


def cmd_similarity(args: argparse.Namespace) -> int:
    run = resolve_run_config(args)
    graph = run.source().load(split_seed=run.train.seed)
    study = similarity_study(graph, run.train, bins=args.bins)
    create_dir_if_not_exist(run.out_dir)
    document = {
        name: value.to_dict() if isinstance(value, SimilarityReport) else value
        for name, value in study.items()
    }
    document['config'] = run.to_dict()
    with open(os.path.join(run.out_dir, 'similarity.json'), 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
    for name in ('f_c', 'gcn'):
        report = study[name]
        print(
            f'{name:<4} intra {report.intra_mean:.4f} - inter {report.inter_mean:.4f} - gap {report.gap:.4f}',
            flush=True,
        )
    return 0


def _add_graph_args(parser: argparse.ArgumentParser):
    parser.add_argument('--graph', '-g', default=None, type=str, help='Graph file in edge-list-json format')
    parser.add_argument('--synthetic-h', default=None, type=float, help='Generate a synthetic graph with this homophily')
    parser.add_argument('--synthetic-n', default=1000, type=int, help='Synthetic graph node count')
    parser.add_argument('--synthetic-c', default=5, type=int, help='Synthetic graph class count')
    parser.add_argument('--synthetic-degree', default=6.0, type=float, help='Synthetic graph average degree')
    parser.add_argument('--synthetic-dim', default=32, type=int, help='Synthetic feature dimension')
    parser.add_argument('--synthetic-separation', default=SyntheticSpec.class_center_separation, type=float,
                        help='Distance scale of class centers')
    parser.add_argument('--synthetic-noise', default=1.0, type=float, help='Std of feature noise')
    parser.add_argument('--synthetic-seed', default=None, type=int, help='Generator seed (defaults to --seed)')
    parser.add_argument('--train-per-class', default=20, type=int, help='Train nodes per class when splitting')
    parser.add_argument('--val-count', default=200, type=int, help='Validation nodes when splitting')


def _add_train_args(parser: argparse.ArgumentParser):
    parser.add_argument('--config', '-c', default=None, type=str, help='JSON file with training options')
    parser.add_argument('--seed', '-s', default=None, type=int, help='Seed for splits, initialization and dropout')
    parser.add_argument('--layers', '-k', default=None, type=int, help='Label-wise message passing layers')
    parser.add_argument('--hidden', '-p', default=None, type=int, help='Transformed width of the label-wise branch')
    parser.add_argument('--inner-steps', '-t', default=None, type=int, help='Branch steps per outer iteration')
    parser.add_argument('--lr', default=None, type=float, help='Learning rate for every parameter group')
    parser.add_argument('--max-outer', default=None, type=int, help='Maximum outer iterations')
    parser.add_argument('--patience', default=None, type=int, help='Early stopping patience on validation accuracy')
    parser.add_argument('--selector-tol', default=None, type=float,
                        help='Largest f_C weight drift over the patience window that counts as converged')
    parser.add_argument('--optimizer', default=None, choices=['adam', 'sgd'])
    parser.add_argument('--fallback', default=None, choices=['zero', 'class-mean'], help='Empty-class aggregate')
    parser.add_argument('--gcn-layers', default=None, type=int, help='Depth of the homophilic branch')
    parser.add_argument('--labeled-nodes', default=None, choices=['train+val', 'train'])
    parser.add_argument('--pseudo-labeler', default=None, choices=['mlp', 'gcn'])
    parser.add_argument('--out', '-o', default='runs', type=str, help='Output directory')
    parser.add_argument('--verbose', '-v', action='store_true')


def get_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='python -m src.cli', description='Label-wise message passing node classification')
    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', help='Train one variant and write report.json')
    _add_graph_args(train)
    _add_train_args(train)
    train.add_argument('--variant', default='full', type=str, help='full, fc, gcn, mlp or lwgnn-p')
    train.set_defaults(handler=cmd_train)

    homophily = commands.add_parser('homophily', help='Print the edge homophily ratio')
    _add_graph_args(homophily)
    homophily.add_argument('--seed', '-s', default=None, type=int)
    homophily.add_argument('--out', '-o', default='runs', type=str)
    homophily.set_defaults(handler=cmd_homophily)

    gradcheck = commands.add_parser('gradcheck', help='Finite-difference gradient suite')
    gradcheck.add_argument('--seeds', default=20, type=int)
    gradcheck.add_argument('--tol', default=1e-4, type=float, help='Relative tolerance')
    gradcheck.add_argument('--inject-fault', action='store_true', help='Corrupt each analytic gradient')
    gradcheck.add_argument('--verbose', '-v', action='store_true')
    gradcheck.set_defaults(handler=cmd_gradcheck)

    bench = commands.add_parser('bench', help='Per-variant test accuracy over seeds')
    _add_graph_args(bench)
    _add_train_args(bench)
    bench.add_argument('--variants', default='mlp,gcn,fc,full', type=str, help='Comma separated variants')
    bench.add_argument('--seeds', '-n', default=10, type=int, help='Runs per variant')
    bench.add_argument('--keep-splits', action='store_true', help='Use the splits stored in the graph file')
    bench.set_defaults(handler=cmd_bench)

    depth = commands.add_parser('depth', help='Accuracy of f_C and GCN against depth')
    _add_graph_args(depth)
    _add_train_args(depth)
    depth.add_argument('--depths', default='2,3,4,5,6', type=str)
    depth.add_argument('--seeds', '-n', default=3, type=int)
    depth.set_defaults(handler=cmd_depth)

    similarity = commands.add_parser('similarity', help='Intra and inter class cosine similarity')
    _add_graph_args(similarity)
    _add_train_args(similarity)
    similarity.add_argument('--bins', default=20, type=int)
    similarity.set_defaults(handler=cmd_similarity)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = get_parser().parse_args(argv)
        return args.handler(args)
    except LabelWiseError as e:
        print(f'{type(e).__name__}: {e}', file=sys.stderr, flush=True)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
