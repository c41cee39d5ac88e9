"""Approximate distance sensitivity oracles for multiple edge failures.

The package builds a static data structure over an undirected graph that
answers s-t distance queries under a set of failed edges with bounded
multiplicative stretch, using space well below the quadratic cost of
storing all replacement distances.
"""

from __future__ import annotations

from .graphs import (
    EMPTY_FAILURE,
    INF,
    INF32,
    APSPTable,
    FailureSet,
    Graph,
    GraphFormatError,
    SPTreeWithLCA,
    SSSPResult,
    apsp,
    canonical_dijkstra,
    canonical_sssp,
    dump_dimacs,
    hop_bounded_dist,
    load_dimacs,
)
from .dso import (
    DSO,
    BallIndex,
    DenseMarker,
    DsoParams,
    QueryReport,
    SparseRecord,
    classify_ball,
    derive_dso_params,
    preprocess,
)
from .seeding import spawn_key, stream
from .serialize import (
    OracleFormatError,
    load_oracle,
    read_header,
    save_oracle,
)
from .tz import (
    DisconnectedError,
    LevelHierarchy,
    TZOracle,
    build_oracle_and_spanner,
    sample_hierarchy,
    spanner_mask_into,
)

__version__ = "0.1.0"

__all__ = [
    "APSPTable",
    "DisconnectedError",
    "EMPTY_FAILURE",
    "FailureSet",
    "Graph",
    "GraphFormatError",
    "INF",
    "INF32",
    "DSO",
    "BallIndex",
    "DenseMarker",
    "DsoParams",
    "QueryReport",
    "SparseRecord",
    "classify_ball",
    "derive_dso_params",
    "preprocess",
    "LevelHierarchy",
    "SPTreeWithLCA",
    "SSSPResult",
    "TZOracle",
    "apsp",
    "build_oracle_and_spanner",
    "canonical_dijkstra",
    "canonical_sssp",
    "dump_dimacs",
    "hop_bounded_dist",
    "load_dimacs",
    "load_oracle",
    "OracleFormatError",
    "read_header",
    "sample_hierarchy",
    "save_oracle",
    "spanner_mask_into",
    "spawn_key",
    "stream",
    "__version__",
]
