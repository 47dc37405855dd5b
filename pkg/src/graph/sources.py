from abc import ABC, abstractmethod

from src.graph.graph import Graph, split_nodes
from src.graph.io import load_graph
from src.graph.synthetic import SyntheticSpec, generate_synthetic


class GraphSource(ABC):
    """Where a run's graph comes from; splits are applied when the graph carries none."""

    def __init__(self, train_per_class: int = 20, val_count: int = 200):
        self._train_per_class = train_per_class
        self._val_count = val_count

    @abstractmethod
    def _read(self) -> Graph:
        pass

    @abstractmethod
    def describe(self) -> dict:
        pass

    def read(self) -> Graph:
        """The graph as stored, without applying splits."""
        return self._read()

    def load(self, split_seed: int, resplit: bool = False) -> Graph:
        graph = self._read()
        if resplit or not bool(graph.train_mask.any()):
            graph = graph.with_masks(
                split_nodes(graph, self._train_per_class, self._val_count, seed=split_seed)
            )
        return graph


class JsonGraphSource(GraphSource):
    def __init__(self, path: str, train_per_class: int = 20, val_count: int = 200):
        super().__init__(train_per_class=train_per_class, val_count=val_count)
        self._path = path
        self._graph: Graph | None = None

    def _read(self) -> Graph:
        if self._graph is None:
            self._graph = load_graph(self._path)
        return self._graph

    def describe(self) -> dict:
        return {'graph_path': self._path}


class SyntheticGraphSource(GraphSource):
    def __init__(self, spec: SyntheticSpec, train_per_class: int = 20, val_count: int = 200):
        super().__init__(train_per_class=train_per_class, val_count=val_count)
        self._spec = spec
        self._graph: Graph | None = None

    def _read(self) -> Graph:
        if self._graph is None:
            self._graph = generate_synthetic(self._spec)
        return self._graph

    def describe(self) -> dict:
        return {'synthetic': vars(self._spec).copy()}
