"""Statistical, data-value-aware energy/area/latency model for
compute-in-memory accelerators.

The package splits evaluation into a mapping-invariant energy table
(statistical per-action energies from operand value distributions) and
closed-form access counts per mapping, plus a brute-force oracle that
re-derives both from first principles for verification.
"""

__version__ = "0.1.0"

from .archspec import (
    ArchError,
    ArchNode,
    ArchTree,
    Constraints,
    SpatialSpec,
    instances,
    parse_arch,
    resolve_attributes,
    serialize_arch,
    validate,
)
from .components import (
    ActionContext,
    ComponentError,
    ComponentModel,
    DEFAULT_REGISTRY,
    ModelRegistry,
    get_model,
    register_model,
)
from .engine import (
    EnergyTable,
    EngineError,
    EvalResult,
    LayerEvaluator,
    OracleResult,
    SearchResult,
    build_action_context,
    draw_tensors,
    evaluate,
    oracle_evaluate,
    precompute_energy_table,
    search,
    total_area,
)
from .mapping import (
    CountPlan,
    Loop,
    MapperConfig,
    Mapping,
    MappingError,
    MappingSpace,
    SlotTable,
    analyze_access_counts,
    build_count_plan,
    check_valid,
    enumerate_mappings,
    parse_mapping,
    serialize_mapping,
    utilization,
)
from .valuemodel import (
    EncodedPMF,
    Encoding,
    PhysicalMap,
    SliceScheme,
    ValueModelError,
    encode_pmf,
    encode_value,
    encode_value_companion,
    expected_moment,
    slice_level,
    slice_pmf,
    switching_rate,
)
from .workload import (
    EinsumSpec,
    ValuePMF,
    WorkloadError,
    WorkloadLayer,
    build_pmf,
    delta_pmf,
    mac_count,
    parse_workload,
    synth_pmf,
    two_point_pmf,
    uniform_pmf,
)

__all__ = [
    "__version__",
    "ActionContext",
    "ArchError",
    "ArchNode",
    "ArchTree",
    "ComponentError",
    "ComponentModel",
    "Constraints",
    "CountPlan",
    "DEFAULT_REGISTRY",
    "EinsumSpec",
    "EncodedPMF",
    "Encoding",
    "EnergyTable",
    "EngineError",
    "EvalResult",
    "LayerEvaluator",
    "Loop",
    "MapperConfig",
    "Mapping",
    "MappingError",
    "MappingSpace",
    "ModelRegistry",
    "OracleResult",
    "PhysicalMap",
    "SearchResult",
    "SliceScheme",
    "SlotTable",
    "SpatialSpec",
    "ValueModelError",
    "ValuePMF",
    "WorkloadError",
    "WorkloadLayer",
    "analyze_access_counts",
    "build_action_context",
    "build_count_plan",
    "build_pmf",
    "check_valid",
    "delta_pmf",
    "draw_tensors",
    "encode_pmf",
    "encode_value",
    "encode_value_companion",
    "enumerate_mappings",
    "evaluate",
    "expected_moment",
    "get_model",
    "instances",
    "mac_count",
    "oracle_evaluate",
    "parse_arch",
    "parse_mapping",
    "parse_workload",
    "precompute_energy_table",
    "register_model",
    "resolve_attributes",
    "search",
    "serialize_arch",
    "serialize_mapping",
    "slice_level",
    "slice_pmf",
    "switching_rate",
    "synth_pmf",
    "total_area",
    "two_point_pmf",
    "uniform_pmf",
    "utilization",
    "validate",
]
