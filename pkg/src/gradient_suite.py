"""
Finite-difference checks for every differentiable piece of the package.

Inputs are drawn per seed and redrawn while a ReLU input sits within
KINK_MARGIN of zero or two max-pool candidates are within KINK_MARGIN of each
other, since a central difference straddling a kink measures neither side.
"""
from typing import Callable, TypeVar

import torch
from tqdm import tqdm

from src.errors import NonSmoothInputError
from src.graph.graph import Graph, NodeMasks, normalized_adjacency
from src.models.gcn import Gcn
from src.models.labelwise import LabelWiseGnn, build_class_adjacency
from src.models.mlp import LabelAssignment, PseudoLabelMlp
from src.models.selector import SelectionWeights, combine_predictions
from src.numerics.gradcheck import GradCheckReport, grad_check
from src.numerics.ops import dense_matmul, masked_cross_entropy, maxpool_stack, relu, row_softmax
from src.numerics.optim import ParameterStore
from src.numerics.sparse import SparseMatrix, sparse_dense_matmul
from src.util import DTYPE

KINK_MARGIN = 1e-4
MAX_REDRAWS = 20
PHI_SUM_TOL = 1e-10

Check = Callable[[torch.Generator], tuple[Callable[[], torch.Tensor], ParameterStore]]
Drawn = TypeVar('Drawn')


def _normal(generator: torch.Generator, *shape: int) -> torch.Tensor:
    return torch.randn(*shape, generator=generator, dtype=DTYPE)


def _size(generator: torch.Generator, low: int, high: int) -> int:
    return int(torch.randint(low, high + 1, (1,), generator=generator))


def _params(**tensors: torch.Tensor) -> ParameterStore:
    return ParameterStore({name: torch.nn.Parameter(t) for name, t in tensors.items()})


def _kink_free(*pre_activations: torch.Tensor) -> bool:
    return all(bool((t.detach().abs() > KINK_MARGIN).all()) for t in pre_activations if t.numel())


def _tie_free(hidden: list[torch.Tensor], positive_only: bool = True) -> bool:
    if len(hidden) < 2:
        return True
    top = torch.stack([h.detach() for h in hidden]).topk(2, dim=0).values
    gap = top[0] - top[1]
    if positive_only:
        gap = gap[top[0] > 0]
    return bool((gap > KINK_MARGIN).all())


def _redraw(name: str, draw: Callable[[], Drawn], smooth: Callable[[Drawn], bool]) -> Drawn:
    for _ in range(MAX_REDRAWS):
        drawn = draw()
        if smooth(drawn):
            return drawn
    raise NonSmoothInputError(f'{name}: every one of {MAX_REDRAWS} draws sits within {KINK_MARGIN} of a kink')


def _randomize(module: torch.nn.Module, generator: torch.Generator):
    with torch.no_grad():
        for param in module.parameters():
            param.copy_(_normal(generator, *param.shape))


def _random_graph(generator: torch.Generator, max_nodes: int = 6, max_classes: int = 3) -> Graph:
    n = _size(generator, 3, max_nodes)
    c = _size(generator, 2, max_classes)
    d = _size(generator, 2, 5)
    pairs = torch.triu_indices(n, n, offset=1).T
    keep = torch.rand(pairs.shape[0], generator=generator) < 0.5
    labels = torch.randint(0, c, (n,), generator=generator)
    train = torch.rand(n, generator=generator) < 0.6
    train[0] = True
    empty = torch.zeros(n, dtype=torch.bool)
    return Graph.from_edges(n, c, pairs[keep], _normal(generator, n, d), labels, NodeMasks(train, empty, empty.clone()))


def _check_dense_matmul(generator):
    n, k, m = _size(generator, 1, 7), _size(generator, 1, 5), _size(generator, 1, 5)
    store = _params(a=_normal(generator, n, k), b=_normal(generator, k, m))
    upstream = _normal(generator, n, m)
    return lambda: (dense_matmul(store['a'], store['b']) * upstream).sum(), store


def _check_sparse_dense_matmul(generator):
    n, k, m = _size(generator, 1, 7), _size(generator, 1, 5), _size(generator, 1, 5)
    dense = _normal(generator, n, k) * (torch.rand(n, k, generator=generator) < 0.4)
    rows, cols = dense.nonzero(as_tuple=True)
    s = SparseMatrix.from_coo(rows.numpy(), cols.numpy(), dense[rows, cols].numpy(), shape=(n, k))
    store = _params(b=_normal(generator, k, m))
    upstream = _normal(generator, n, m)
    return lambda: (sparse_dense_matmul(s, store['b']) * upstream).sum(), store


def _check_relu(generator):
    x = _normal(generator, _size(generator, 1, 7), _size(generator, 1, 5))
    x = x.sign() * (x.abs() + 0.1)
    store = _params(x=x)
    upstream = _normal(generator, *x.shape)
    return lambda: (relu(store['x']) * upstream).sum(), store


def _check_row_softmax(generator):
    store = _params(x=_normal(generator, _size(generator, 1, 7), _size(generator, 1, 5)))
    upstream = _normal(generator, *store['x'].shape)
    return lambda: (row_softmax(store['x']) * upstream).sum(), store


def _check_masked_cross_entropy(generator):
    n, c = _size(generator, 1, 7), _size(generator, 2, 5)
    store = _params(logits=_normal(generator, n, c))
    labels = torch.randint(0, c, (n,), generator=generator)
    mask = torch.rand(n, generator=generator) < 0.6
    mask[0] = True
    return lambda: masked_cross_entropy(row_softmax(store['logits']), labels, mask), store


def _check_maxpool_stack(generator):
    k, n, m = _size(generator, 1, 3), _size(generator, 1, 7), _size(generator, 1, 5)
    tensors = _redraw(
        'maxpool_stack',
        lambda: {f'h{i}': _normal(generator, n, m) for i in range(k)},
        lambda drawn: _tie_free(list(drawn.values()), positive_only=False),
    )
    store = _params(**tensors)
    upstream = _normal(generator, n, m)
    return lambda: (maxpool_stack([store[name] for name in tensors])[0] * upstream).sum(), store


def _check_mlp(generator):
    graph = _random_graph(generator)
    model = PseudoLabelMlp(graph.feature_dim, graph.num_classes, hidden=4)

    def draw():
        _randomize(model, generator)
        with torch.no_grad():
            return dense_matmul(graph.features, model.W1) + model.b1

    _redraw('mlp', draw, _kink_free)
    model.eval()
    store = ParameterStore.from_module(model)
    return lambda: masked_cross_entropy(model(graph.features), graph.labels, graph.train_mask), store


def _labelwise_check(num_layers: int):
    def check(generator):
        graph = _random_graph(generator)
        model = LabelWiseGnn(graph.feature_dim, graph.num_classes, hidden=2, num_layers=num_layers)
        model.eval()

        def draw():
            classes = torch.randint(0, graph.num_classes, (graph.num_nodes,), generator=generator)
            assignment = LabelAssignment(classes, torch.zeros(graph.num_nodes, dtype=torch.bool), graph.num_classes)
            class_adj = build_class_adjacency(graph, assignment)
            _randomize(model, generator)
            with torch.no_grad():
                _, activations = model(graph.features, class_adj)
            pre = [torch.cat([z, *a], dim=1) for z, a in zip(activations.z, activations.aggregated)]
            # Exact zeros are rows without class-k neighbors; they stay zero under perturbation.
            return class_adj, [t[t != 0] for t in pre], activations.hidden

        class_adj, _, _ = _redraw(
            f'labelwise_k{num_layers}',
            draw,
            lambda drawn: _kink_free(*drawn[1]) and _tie_free(drawn[2]),
        )
        store = ParameterStore.from_module(model)
        return lambda: masked_cross_entropy(model(graph.features, class_adj)[0], graph.labels, graph.train_mask), store
    return check


def _check_gcn(generator):
    graph = _random_graph(generator)
    a_hat = normalized_adjacency(graph)
    model = Gcn(graph.feature_dim, graph.num_classes, hidden=3, dropout=0.0)
    model.eval()

    def draw():
        _randomize(model, generator)
        with torch.no_grad():
            return sparse_dense_matmul(a_hat, dense_matmul(graph.features, model.W0))

    _redraw('gcn', draw, _kink_free)
    store = ParameterStore.from_module(model)
    return lambda: masked_cross_entropy(model(a_hat, graph.features)[0], graph.labels, graph.train_mask), store


def _random_probs(generator: torch.Generator, n: int, c: int) -> torch.Tensor:
    return torch.softmax(_normal(generator, n, c), dim=1)


def _check_selection_weights(generator):
    n, c = _size(generator, 2, 7), _size(generator, 2, 5)
    y_c, y_g = _random_probs(generator, n, c), _random_probs(generator, n, c)
    labels = torch.randint(0, c, (n,), generator=generator)
    mask = torch.ones(n, dtype=torch.bool)
    selector = SelectionWeights(float(_normal(generator, 1)), float(_normal(generator, 1)))
    store = ParameterStore.from_module(selector)
    return lambda: masked_cross_entropy(combine_predictions(y_c, y_g, selector), labels, mask), store


CHECKS: dict[str, Check] = {
    'dense_matmul': _check_dense_matmul,
    'sparse_dense_matmul': _check_sparse_dense_matmul,
    'relu': _check_relu,
    'row_softmax': _check_row_softmax,
    'masked_cross_entropy': _check_masked_cross_entropy,
    'maxpool_stack': _check_maxpool_stack,
    'mlp': _check_mlp,
    'labelwise_k1': _labelwise_check(1),
    'labelwise_k2': _labelwise_check(2),
    'labelwise_k3': _labelwise_check(3),
    'gcn': _check_gcn,
    'selection_weights': _check_selection_weights,
}


def double_largest_gradient(gradients: dict[str, torch.Tensor]):
    """Fault injection: doubles the largest-magnitude entry of the first gradient."""
    first = next(iter(gradients.values())).view(-1)
    first[first.abs().argmax()] *= 2


def phi_gradient_sum(forward: Callable[[], torch.Tensor], store: ParameterStore) -> float:
    """|dL/dphi1 + dL/dphi2|, which vanishes because the mixture weights sum to one."""
    store.zero_grad()
    forward().backward()
    total = float(store.gradient('phi').sum())
    store.zero_grad()
    return abs(total)


def run_gradient_suite(
        seeds: int = 20,
        tol: float = 1e-4,
        inject_fault: bool = False,
        checks: list[str] | None = None,
        progress: bool = False,
) -> list[GradCheckReport]:
    names = checks or list(CHECKS)
    reports = []
    runs = [(name, seed) for name in names for seed in range(seeds)]
    for name, seed in tqdm(runs, desc='Gradient checks', disable=not progress):
        generator = torch.Generator().manual_seed(seed)
        forward, store = CHECKS[name](generator)
        reports.append(grad_check(
            forward,
            store,
            tol=tol,
            name=f'{name}[seed={seed}]',
            generator=generator,
            corrupt=double_largest_gradient if inject_fault else None,
        ))
        if name == 'selection_weights':
            total = phi_gradient_sum(forward, store)
            reports.append(GradCheckReport(
                name=f'phi_gradient_sum[seed={seed}]',
                passed=total <= PHI_SUM_TOL,
                tol=PHI_SUM_TOL,
                max_relative_error=total,
                worst_parameter='phi',
                worst_index=None,
                entries_checked=2,
            ))
    return reports
