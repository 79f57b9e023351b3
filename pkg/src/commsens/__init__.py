"""Communicability sensitivity analysis for weighted directed networks.

The package measures how strongly a network's total communicability (the
weighted count of all walks, via the matrix exponential) and its Perron-based
surrogate react to changes of individual edge weights, exactly on small
graphs and through matrix-free Krylov estimators on large ones.
"""

from ._kernels import BACKEND
from .baselines import (compare_methods, edge_gtc, edge_tc,
                        hub_authority_scores, odd_hub_authority_scores,
                        svd_factors)
from .dense import (DENSE_LIMIT, SizeLimitError, exp0, expm,
                    total_communicability, total_sensitivity_exact,
                    total_sensitivity_scan)
from .golden import run_validation
from .graph import (AdjacencyMatrix, Direction, EdgeUpdateOperator,
                    GraphFormatError, PerturbedOperator, bundled_graph,
                    direction_candidates, is_strongly_connected,
                    parse_edge_list, parse_matrix_market, to_edge_list_text)
from .krylov import (ESTIMATORS, METHOD_NAMES, ConvergenceError,
                     EstimatorConfig, SeriousBreakdownError, arnoldi,
                     estimate_arnoldi_block, estimate_arnoldi_fd,
                     estimate_kkrs, estimate_lanczos_block,
                     estimate_lanczos_fd, lanczos_biorth, scan_estimated)
from .perron import (PerronError, PerronTriple, kappa_relation_report,
                     perron_communicability, perron_root_sensitivity,
                     perron_sensitivity, perron_triple, select_delta,
                     top_k_root_sensitivities)
from .results import ScanResult, SensitivityRecord, sort_records

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix", "BACKEND", "ConvergenceError", "DENSE_LIMIT",
    "Direction", "ESTIMATORS", "EdgeUpdateOperator", "EstimatorConfig",
    "GraphFormatError", "METHOD_NAMES", "PerronError", "PerronTriple",
    "PerturbedOperator", "ScanResult", "SensitivityRecord",
    "SeriousBreakdownError", "SizeLimitError", "arnoldi", "bundled_graph",
    "compare_methods", "direction_candidates", "edge_gtc", "edge_tc",
    "estimate_arnoldi_block", "estimate_arnoldi_fd", "estimate_kkrs",
    "estimate_lanczos_block", "estimate_lanczos_fd", "exp0", "expm",
    "hub_authority_scores", "is_strongly_connected", "kappa_relation_report",
    "lanczos_biorth", "odd_hub_authority_scores", "parse_edge_list",
    "parse_matrix_market", "perron_communicability",
    "perron_root_sensitivity", "perron_sensitivity", "perron_triple",
    "run_validation", "scan_estimated", "select_delta", "sort_records",
    "svd_factors", "to_edge_list_text", "top_k_root_sensitivities",
    "total_communicability", "total_sensitivity_exact",
    "total_sensitivity_scan", "__version__",
]
