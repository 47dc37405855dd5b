from src.graph.graph import Graph, NodeMasks, homophily_ratio, normalized_adjacency, split_nodes
from src.graph.io import load_graph, parse_graph_document, save_graph
from src.graph.sources import GraphSource, JsonGraphSource, SyntheticGraphSource
from src.graph.synthetic import SyntheticSpec, generate_synthetic
