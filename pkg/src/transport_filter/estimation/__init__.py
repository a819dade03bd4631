"""Sample-based map estimation and sparsity patterns."""

from transport_filter.estimation.fit import (
    ComponentFitReport,
    FitMethod,
    FitReport,
    MapParameterization,
    component_objective,
    fit_component,
    fit_map,
    fit_regression_path,
)
from transport_filter.estimation.sparsity import (
    SparsityPattern,
    UndirectedGraph,
    cycle_distance,
    distance_sparsity,
    graph_sparsity,
    line_distance,
    permutation_by_distance,
)

__all__ = [
    "ComponentFitReport",
    "FitMethod",
    "FitReport",
    "MapParameterization",
    "SparsityPattern",
    "UndirectedGraph",
    "component_objective",
    "cycle_distance",
    "distance_sparsity",
    "fit_component",
    "fit_map",
    "fit_regression_path",
    "graph_sparsity",
    "line_distance",
    "permutation_by_distance",
]
