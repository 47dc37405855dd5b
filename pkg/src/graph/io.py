import json
import os
from typing import Literal

import numpy as np
import torch

from src.errors import GraphConsistencyError, GraphFormatError
from src.graph.graph import Graph, NodeMasks, build_adjacency
from src.util import DTYPE

GraphFormat = Literal['edge-list-json']
_MASK_KEYS = ('train_mask', 'val_mask', 'test_mask')


def _require_int(document: dict, key: str) -> int:
    value = document.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise GraphFormatError(f'Field "{key}" must be a non-negative integer')
    return value


def _parse_edges(raw, num_nodes: int) -> np.ndarray:
    if not isinstance(raw, list):
        raise GraphFormatError('Field "edges" must be an array of [src, dst] pairs')
    for position, pair in enumerate(raw):
        if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(node, int) and not isinstance(node, bool) for node in pair)
        ):
            raise GraphFormatError(f'Edge record {position} is not an integer [src, dst] pair: {pair!r}')
        if not all(0 <= node < num_nodes for node in pair):
            raise GraphConsistencyError(f'Edge record {position} references a node outside [0, {num_nodes})')
    return np.asarray(raw, dtype=np.int64).reshape(-1, 2)


def _parse_features(raw, num_nodes: int) -> torch.Tensor:
    if not isinstance(raw, list) or not all(isinstance(row, list) for row in raw):
        raise GraphFormatError('Field "features" must be an array of rows')
    if len(raw) != num_nodes:
        raise GraphConsistencyError(f'Feature matrix has {len(raw)} rows, expected {num_nodes}')
    widths = {len(row) for row in raw}
    if len(widths) > 1:
        raise GraphFormatError(f'Feature rows have differing widths {sorted(widths)}')
    try:
        features = np.asarray(raw, dtype=np.float64).reshape(num_nodes, widths.pop() if widths else 0)
    except (TypeError, ValueError) as e:
        raise GraphFormatError(f'Feature values must be numbers: {e}') from e
    return torch.from_numpy(features)


def _parse_labels(raw, num_nodes: int, num_classes: int) -> torch.Tensor:
    if raw is None:
        return torch.full((num_nodes,), -1, dtype=torch.long)
    if not isinstance(raw, list) or not all(isinstance(y, int) and not isinstance(y, bool) for y in raw):
        raise GraphFormatError('Field "labels" must be an array of integers')
    if len(raw) != num_nodes:
        raise GraphConsistencyError(f'Got {len(raw)} labels for {num_nodes} nodes')
    labels = torch.tensor(raw, dtype=torch.long)
    if bool((labels >= num_classes).any()) or bool((labels < -1).any()):
        raise GraphConsistencyError(f'Label ids must lie in [0, {num_classes}) or be -1')
    return labels


def _parse_masks(document: dict, num_nodes: int) -> NodeMasks:
    masks = []
    for key in _MASK_KEYS:
        mask = torch.zeros(num_nodes, dtype=torch.bool)
        ids = document.get(key, [])
        if not isinstance(ids, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) and 0 <= v < num_nodes for v in ids
        ):
            raise GraphFormatError(f'Field "{key}" must be an array of node ids in [0, {num_nodes})')
        mask[torch.tensor(ids, dtype=torch.long)] = True
        masks.append(mask)
    return NodeMasks(*masks)


def parse_graph_document(document: dict) -> tuple[Graph, int]:
    """Builds a Graph from a decoded edge-list-json document; also returns the dropped self-loop count."""
    if not isinstance(document, dict):
        raise GraphFormatError('Graph document must be a JSON object')
    num_nodes = _require_int(document, 'num_nodes')
    num_classes = _require_int(document, 'num_classes')
    edges = _parse_edges(document.get('edges'), num_nodes)
    features = _parse_features(document.get('features'), num_nodes)
    labels = _parse_labels(document.get('labels'), num_nodes, num_classes)
    masks = _parse_masks(document, num_nodes)

    adjacency, dropped = build_adjacency(num_nodes, edges)
    graph = Graph(
        num_nodes=num_nodes,
        num_classes=num_classes,
        adjacency=adjacency,
        features=features.to(DTYPE),
        labels=labels,
        train_mask=masks.train,
        val_mask=masks.val,
        test_mask=masks.test,
    )
    return graph, dropped


def load_graph(path: str, format: GraphFormat = 'edge-list-json') -> Graph:
    if format != 'edge-list-json':
        raise GraphFormatError(f'Unsupported graph format {format}')
    if not os.path.exists(path):
        raise GraphFormatError(f'Graph file {path} does not exist')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise GraphFormatError(f'Malformed graph file {path}: {e}') from e
    except OSError as e:
        raise GraphFormatError(f'Could not read graph file {path}: {e}') from e

    graph, dropped = parse_graph_document(document)
    if dropped:
        print(f'Warning: dropped {dropped} self-loop record(s) from {path}', flush=True)
    return graph


def graph_to_document(graph: Graph) -> dict:
    src, dst = graph.edge_pairs()
    return {
        'num_nodes': graph.num_nodes,
        'num_classes': graph.num_classes,
        'edges': torch.stack([src, dst], dim=1).tolist(),
        'features': graph.features.tolist(),
        'labels': graph.labels.tolist(),
        'train_mask': graph.train_mask.nonzero(as_tuple=True)[0].tolist(),
        'val_mask': graph.val_mask.nonzero(as_tuple=True)[0].tolist(),
        'test_mask': graph.test_mask.nonzero(as_tuple=True)[0].tolist(),
    }


def save_graph(graph: Graph, path: str):
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(graph_to_document(graph), f)
