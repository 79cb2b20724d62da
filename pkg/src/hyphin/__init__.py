"""Self-supervised hypergraph embeddings for heterogeneous graphs.

Pipeline: typed-graph ingestion, meta-path neighborhoods compiled into
hyperedges, a degree-normalized hypergraph operator, a two-view attention
encoder, dual contrastive/consistency self-supervision, seeded training
with early stopping, and a frozen-embedding evaluation bench.
"""

from .encoder import EncoderConfig, EncoderParams, forward, load_params, save_params
from .errors import HyphinError
from .evalbench import SyntheticSpec, clustering_nmi, linear_probe, synth_hin
from .hingraph import HeteroGraph, MetaPath, load_graph, metapath_neighbors, split_labels, write_graph
from .hypergraph import adjacency_from_hypergraph, build_hypergraph, normalized_adjacency
from .trainer import TrainConfig, build_pipeline, sweep, train

__version__ = "0.1.0"

__all__ = [
    "EncoderConfig",
    "EncoderParams",
    "HeteroGraph",
    "HyphinError",
    "MetaPath",
    "SyntheticSpec",
    "TrainConfig",
    "adjacency_from_hypergraph",
    "build_hypergraph",
    "build_pipeline",
    "clustering_nmi",
    "forward",
    "linear_probe",
    "load_graph",
    "load_params",
    "metapath_neighbors",
    "normalized_adjacency",
    "save_params",
    "split_labels",
    "sweep",
    "synth_hin",
    "train",
    "write_graph",
]
