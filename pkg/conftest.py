import json

import pytest
import torch

from src.graph.graph import Graph, NodeMasks


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: end-to-end training runs taking minutes')


def make_graph(num_nodes, num_classes, edges, labels, features=None, train=(), val=(), test=()):
    """Small hand-built graph; masks are given as node id lists."""
    if features is None:
        features = torch.eye(num_nodes, dtype=torch.float64)
    masks = []
    for ids in (train, val, test):
        mask = torch.zeros(num_nodes, dtype=torch.bool)
        mask[torch.tensor(list(ids), dtype=torch.long)] = True
        masks.append(mask)
    return Graph.from_edges(num_nodes, num_classes, edges, features, torch.tensor(labels), NodeMasks(*masks))


def permute_graph(graph, perm):
    """The same graph with old node perm[i] renumbered as node i."""
    perm = torch.as_tensor(perm)
    position = torch.empty_like(perm)
    position[perm] = torch.arange(perm.numel())
    src, dst = graph.edge_pairs()
    edges = torch.stack([position[src], position[dst]], dim=1).tolist()
    masks = NodeMasks(*(mask[perm] for mask in graph.masks))
    return Graph.from_edges(graph.num_nodes, graph.num_classes, edges, graph.features[perm], graph.labels[perm], masks)


def random_graph(rng, num_nodes, num_classes, feature_dim=3, edge_prob=0.4):
    pairs = [(u, v) for u in range(num_nodes) for v in range(u + 1, num_nodes) if rng.random() < edge_prob]
    labels = rng.integers(0, num_classes, size=num_nodes).tolist()
    features = torch.from_numpy(rng.standard_normal((num_nodes, feature_dim)))
    return make_graph(num_nodes, num_classes, pairs, labels, features=features)


@pytest.fixture
def triangle():
    return make_graph(3, 2, [(0, 1), (1, 2), (0, 2)], [0, 0, 0])


@pytest.fixture
def path_graph():
    # v1 - v2 - v3 - v4 - v5 with labels [0, 0, 1, 1, 0]
    return make_graph(5, 2, [(0, 1), (1, 2), (2, 3), (3, 4)], [0, 0, 1, 1, 0])


@pytest.fixture
def bipartite():
    # K2,2 between {0, 1} and {2, 3}
    return make_graph(4, 2, [(0, 2), (0, 3), (1, 2), (1, 3)], [0, 0, 1, 1])


@pytest.fixture
def write_graph_file(tmp_path):
    def write(document: dict, name: str = 'graph.json') -> str:
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return str(path)
    return write
