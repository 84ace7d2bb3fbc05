"""Evaluation engine: energy tables, mapping evaluation, search, oracle.

The model separates what depends on data values from what depends on the
mapping.  Per-action energies are statistical expectations over the layer's
value distributions and are therefore identical for every mapping of a given
(architecture, layer) pair; they are computed once into an EnergyTable.
Access counts are closed-form products of loop bounds compiled once into a
CountPlan.  Evaluating one mapping then reduces to a few dozen multiplies,
which is what makes large mapping searches cheap.

The brute-force oracle takes the opposite route: it draws concrete tensor
values, walks every point of the loop nest, counts distinct access events
with seen-sets and prices value-dependent actions per event.  Its counts
must match the closed form exactly and its energy must converge to the
statistical value, which is the main correctness check of the whole model.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .archspec import (
    BYPASS,
    COALESCE,
    NO_COALESCE,
    TEMPORAL_REUSE,
    ArchTree,
    instances,
)
from .components import (
    ActionContext,
    ComponentError,
    ComponentModel,
    DEFAULT_REGISTRY,
    ModelRegistry,
)
from .mapping import (
    COMPUTE_TENSOR,
    CountPlan,
    Mapping,
    MapperConfig,
    MappingSpace,
    SlotTable,
    TEMPORAL,
    build_count_plan,
    check_valid,
)
from .valuemodel import Encoding, EncodedPMF, SliceScheme, encode_pmf, slice_pmf
from .workload import ROLES, WorkloadLayer, mac_count

DEFAULT_CLOCK_PERIOD = 1e-9

_ROLE_ATTR = {"Inputs": "input", "Weights": "weight", "Outputs": "output"}

# A defaulted (undeclared) distribution enumerates every representable
# value, so past this width the context omits it instead of building a
# 2^bits support.  Declared PMFs are never capped.
_DEFAULT_PMF_BITS_CAP = 16


class EngineError(ValueError):
    """Evaluation failed: inconsistent inputs or unsupported configuration."""


def _slice_scheme(bits: int, width) -> SliceScheme:
    if width is None:
        return SliceScheme((bits,))
    w = int(width)
    if w < 1 or w > bits:
        raise EngineError(f"slice width {w} outside [1, {bits}]")
    widths = [w] * (bits // w)
    if bits % w:
        widths.append(bits % w)
    return SliceScheme(tuple(widths))


def build_action_context(node, layer: WorkloadLayer) -> ActionContext:
    """Resolve the encoded, sliced operand statistics one node sees.

    Encodings and slice widths are datapath properties, so they come from
    node attributes (input_encoding, weight_slice_width, ...); bit widths
    come from the layer.  A role with no declared PMF and more than
    _DEFAULT_PMF_BITS_CAP bits gets no sliced statistics; a model that
    prices on such a role reports the missing distribution.
    """
    attrs = node.attributes
    bits: dict[str, int] = {}
    encodings: dict[str, Encoding] = {}
    schemes: dict[str, SliceScheme] = {}
    slices: dict[str, tuple] = {}
    companions: dict[str, tuple] = {}
    for role in ROLES:
        key = _ROLE_ATTR[role]
        b = layer.bits[role]
        kind = str(attrs.get(f"{key}_encoding", "twos_complement"))
        enc = Encoding(kind, b)
        scheme = _slice_scheme(b, attrs.get(f"{key}_slice_width"))
        bits[role] = b
        encodings[role] = enc
        schemes[role] = scheme
        if role not in layer.pmfs and b > _DEFAULT_PMF_BITS_CAP:
            continue
        encoded = encode_pmf(layer.pmf_for(role), enc)
        slices[role] = tuple(slice_pmf(encoded, scheme))
        if encoded.companion is not None:
            if kind == "differential":
                comp = EncodedPMF(
                    kind, b, encoded.companion.support, encoded.companion.probs
                )
                companions[role] = tuple(slice_pmf(comp, scheme))
            else:
                companions[role] = (encoded.companion,)
    return ActionContext(
        layer=layer.name,
        node=node.name,
        attributes=attrs,
        bits=bits,
        encodings=encodings,
        schemes=schemes,
        slices=slices,
        companions=companions,
    )


@dataclass
class EnergyTable:
    """Average per-action energies for one (architecture, layer) pair.

    Entries are keyed (node, action).  The table never sees a mapping, so
    the fingerprint is a direct way to assert mapping invariance.
    """

    layer: str
    entries: dict[tuple[str, str], float]
    fingerprint: str

    def unit(self, node: str, action: str) -> float:
        try:
            return self.entries[(node, action)]
        except KeyError:
            raise EngineError(
                f"energy table has no entry for action {action!r} at {node!r}"
            ) from None


def _table_fingerprint(layer_name: str, entries: dict) -> str:
    h = hashlib.sha256()
    h.update(layer_name.encode())
    for (node, action), e in sorted(entries.items()):
        h.update(f"{node}|{action}|{e!r}\n".encode())
    return h.hexdigest()


def precompute_energy_table(
    arch: ArchTree,
    layer: WorkloadLayer,
    registry: ModelRegistry | None = None,
    plan: CountPlan | None = None,
) -> EnergyTable:
    registry = registry or DEFAULT_REGISTRY
    if plan is None:
        _, plan = build_count_plan(arch, layer)
    contexts: dict[str, ActionContext] = {}
    entries: dict[tuple[str, str], float] = {}
    for e in plan.entries:
        key = (e.node, e.action)
        if key in entries:
            continue
        node = arch.node(e.node)
        if node.kind != "component":
            raise EngineError(
                f"container {node.name!r} carries reuse actions; give it a "
                "Component with a model class"
            )
        if node.name not in contexts:
            contexts[node.name] = build_action_context(node, layer)
        model = registry.get(node.klass)
        entries[key] = float(model.energy_per_action(e.action, contexts[node.name]))
    return EnergyTable(layer.name, entries, _table_fingerprint(layer.name, entries))


def total_area(arch: ArchTree, registry: ModelRegistry | None = None) -> float:
    registry = registry or DEFAULT_REGISTRY
    area = 0.0
    for node in arch.components():
        model = registry.get(node.klass)
        area += instances(arch, node.name) * model.area(node.attributes)
    return area


@dataclass(frozen=True)
class EvalResult:
    layer: str
    energy_j: float
    cycles: int
    latency_s: float
    utilization: float
    area_m2: float
    macs: int
    counts: dict[tuple[str, str, str], int]
    breakdown: dict[tuple[str, str], tuple[int, float, float]]

    @property
    def energy_per_mac_j(self) -> float:
        return self.energy_j / self.macs

    @property
    def edp_js(self) -> float:
        return self.energy_j * self.latency_s


class _FastState:
    """Vectorized per-mapping evaluation state.

    Every count is a product of bounds over a fixed slot subset; the subsets
    are stacked into one boolean matrix so a mapping evaluates with a single
    masked product plus a dot with the per-action unit energies.
    """

    def __init__(self, plan: CountPlan, table: EnergyTable, clock: float):
        subsets: dict[tuple[int, ...], int] = {}

        def sub_id(ids: tuple[int, ...]) -> int:
            if ids not in subsets:
                subsets[ids] = len(subsets)
            return subsets[ids]

        a_ids, b_ids, units = [], [], []
        for e in plan.entries:
            a_ids.append(sub_id(e.idx_a))
            b_ids.append(sub_id(e.idx_b) if e.mode == "diff" else -1)
            units.append(table.unit(e.node, e.action))
        self.cycles_sub = sub_id(plan.temporal_idx)
        self.util_sub = sub_id(plan.spatial_idx)
        n_slots = 1 + max((max(ids) for ids in subsets if ids), default=0)
        mask = np.zeros((len(subsets), n_slots), dtype=bool)
        for ids, k in subsets.items():
            for i in ids:
                mask[k, i] = True
        self.mask = mask
        self.n_slots = n_slots
        self.a = np.array(a_ids, dtype=np.int64)
        self.b = np.array(b_ids, dtype=np.int64)
        self.has_b = self.b >= 0
        self.units = np.array(units, dtype=np.float64)
        self.clock = clock
        self.capacity = plan.mesh_capacity

    def _products(self, bounds) -> np.ndarray:
        b = np.asarray(bounds, dtype=np.float64)
        if b.shape[0] < self.n_slots:
            raise EngineError("bounds vector shorter than the slot table")
        return np.where(self.mask, b[: self.n_slots][None, :], 1.0).prod(axis=1)

    def energy(self, bounds) -> float:
        p = self._products(bounds)
        counts = p[self.a] - np.where(self.has_b, p[self.b], 0.0)
        return float(counts @ self.units)

    def objective_value(self, bounds, objective: str) -> float:
        p = self._products(bounds)
        counts = p[self.a] - np.where(self.has_b, p[self.b], 0.0)
        energy = float(counts @ self.units)
        if objective == "energy":
            return energy
        latency = p[self.cycles_sub] * self.clock
        if objective == "latency":
            return latency
        if objective == "edp":
            return energy * latency
        raise EngineError(f"unknown objective {objective!r}")


class LayerEvaluator:
    """Bundles the compiled plan and energy table for one (arch, layer)."""

    def __init__(
        self,
        arch: ArchTree,
        layer: WorkloadLayer,
        registry: ModelRegistry | None = None,
    ):
        self.arch = arch
        self.layer = layer
        self.registry = registry or DEFAULT_REGISTRY
        self.slot_table, self.plan = build_count_plan(arch, layer)
        self.table = precompute_energy_table(arch, layer, self.registry, self.plan)
        self.area_m2 = total_area(arch, self.registry)
        self.clock = float(
            arch.leaf.attributes.get("clock_period", DEFAULT_CLOCK_PERIOD)
        )
        self.macs = mac_count(layer)
        self.fast = _FastState(self.plan, self.table, self.clock)

    def bounds_of(self, mapping: Mapping) -> list[int]:
        return self.slot_table.bounds_from_mapping(mapping)

    def energy_of_bounds(self, bounds) -> float:
        return self.fast.energy(bounds)

    def objective_value(self, bounds, objective: str) -> float:
        return self.fast.objective_value(bounds, objective)

    def evaluate(self, mapping: Mapping) -> EvalResult:
        bounds = self.bounds_of(mapping)
        counts = self.plan.counts(bounds)
        breakdown: dict[tuple[str, str], tuple[int, float, float]] = {}
        for (node, _tensor, action), c in sorted(counts.items()):
            unit = self.table.unit(node, action)
            prev = breakdown.get((node, action), (0, unit, 0.0))
            breakdown[(node, action)] = (prev[0] + c, unit, (prev[0] + c) * unit)
        energy = math.fsum(e for _, _, e in breakdown.values())
        cycles = self.plan.cycles(bounds)
        return EvalResult(
            layer=self.layer.name,
            energy_j=energy,
            cycles=cycles,
            latency_s=cycles * self.clock,
            utilization=self.plan.utilization(bounds),
            area_m2=self.area_m2,
            macs=self.macs,
            counts=counts,
            breakdown=breakdown,
        )


def evaluate(
    arch: ArchTree,
    layer: WorkloadLayer,
    mapping: Mapping,
    registry: ModelRegistry | None = None,
) -> EvalResult:
    return LayerEvaluator(arch, layer, registry).evaluate(mapping)


@dataclass
class SearchResult:
    layer: str
    index: int
    mapping: Mapping
    result: EvalResult
    evaluated: int
    valid: int
    space_total: int
    fingerprint: str


def _scan_indices(space: MappingSpace, fast: _FastState, objective: str, idxs):
    best = None
    valid = 0
    for i in idxs:
        bounds = space.bounds_at(i)
        if not space.bounds_ok(bounds):
            continue
        valid += 1
        val = fast.objective_value(bounds, objective)
        cand = (val, i)
        if best is None or cand < best:
            best = cand
    return best, valid


_WORKER: dict = {}


def _worker_init(space, fast, objective):
    _WORKER["space"] = space
    _WORKER["fast"] = fast
    _WORKER["objective"] = objective


def _worker_scan(idxs):
    return _scan_indices(_WORKER["space"], _WORKER["fast"], _WORKER["objective"], idxs)


def search(
    arch: ArchTree,
    layer: WorkloadLayer,
    config: MapperConfig,
    registry: ModelRegistry | None = None,
) -> SearchResult | None:
    """Deterministic random search over the exact-tiling mapping space.

    Ties on the objective break toward the lower enumeration index, and
    chunked parallel scans merge with the same rule, so the winner is
    independent of the worker count.
    """
    evaluator = LayerEvaluator(arch, layer, registry)
    space = MappingSpace(arch, layer)
    idxs = space.draw_indices(config.budget, config.seed)
    if not idxs:
        return None
    jobs = max(1, config.jobs)
    if jobs == 1 or len(idxs) < 64:
        best, valid = _scan_indices(space, evaluator.fast, config.objective, idxs)
    else:
        chunk = max(16, (len(idxs) + jobs * 8 - 1) // (jobs * 8))
        chunks = [idxs[i : i + chunk] for i in range(0, len(idxs), chunk)]
        best = None
        valid = 0
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_worker_init,
            initargs=(space, evaluator.fast, config.objective),
        ) as pool:
            for part_best, part_valid in pool.map(_worker_scan, chunks):
                valid += part_valid
                if part_best is not None and (best is None or part_best < best):
                    best = part_best
    if best is None:
        return None
    _, best_idx = best
    mapping = space.mapping_at(best_idx)
    return SearchResult(
        layer=layer.name,
        index=best_idx,
        mapping=mapping,
        result=evaluator.evaluate(mapping),
        evaluated=len(idxs),
        valid=valid,
        space_total=space.total,
        fingerprint=evaluator.table.fingerprint,
    )


def draw_tensors(layer: WorkloadLayer, seed: int) -> dict[str, np.ndarray]:
    """Seeded iid operand tensors shaped by each tensor's projection."""
    out: dict[str, np.ndarray] = {}
    sizes = layer.einsum.dim_sizes
    for offset, role in ((0, "Inputs"), (1, "Weights")):
        pmf = layer.pmf_for(role)
        shape = tuple(sizes[d] for d in layer.einsum.projection(role))
        n = int(np.prod(shape)) if shape else 1
        rng = np.random.default_rng([seed, offset])
        vals = rng.choice(np.array(pmf.support), size=n, p=np.array(pmf.probs))
        out[role] = vals.reshape(shape) if shape else vals
    return out


@dataclass
class OracleResult:
    layer: str
    energy_j: float
    counts: dict[tuple[str, str, str], int]
    macs: int
    cycles: int


class _CountStage:
    __slots__ = ("node", "tensor", "action", "pos", "pricer", "seen", "parts", "unit")

    def __init__(self, node, tensor, action, pos, pricer, unit):
        self.node = node
        self.tensor = tensor
        self.action = action
        self.pos = pos
        self.pricer = pricer
        self.unit = unit
        self.seen = set()
        self.parts = []


class _PairStage:
    __slots__ = (
        "node",
        "tensor",
        "pos_in",
        "pos_w",
        "seen_in",
        "seen_w",
        "writes",
        "updates",
        "unit_w",
        "unit_u",
    )

    def __init__(self, node, tensor, pos_in, pos_w, unit_w, unit_u):
        self.node = node
        self.tensor = tensor
        self.pos_in = pos_in
        self.pos_w = pos_w
        self.seen_in = set()
        self.seen_w = set()
        self.writes = 0
        self.updates = 0
        self.unit_w = unit_w
        self.unit_u = unit_u


def oracle_evaluate(
    arch: ArchTree,
    layer: WorkloadLayer,
    mapping: Mapping,
    seed: int = 0,
    registry: ModelRegistry | None = None,
    point_limit: int = 2_000_000,
) -> OracleResult:
    """Behavioral reference evaluation by full loop-nest enumeration.

    Every nest point is visited once.  Reuse is simulated with seen-sets:
    an access event fires only when its identifying key has not occurred
    before, where the key is the point's coordinates over the slots a
    component can distinguish (sibling multicast and wired reduction drop
    the collapsed mesh coordinates, tile refills drop the coordinates that
    iterate inside one tile).  Value-dependent components are priced per
    event from concrete drawn tensor values.
    """
    registry = registry or DEFAULT_REGISTRY
    diag = check_valid(arch, layer, mapping)
    if not diag.ok:
        raise EngineError("invalid mapping: " + "; ".join(diag.errors))
    if any("padded" in w for w in diag.warnings):
        raise EngineError("the oracle requires exact tiling, mapping is padded")

    table = SlotTable(arch, layer)
    bounds = table.bounds_from_mapping(mapping)
    n_points = 1
    for b in bounds:
        n_points *= b
    if n_points > point_limit:
        raise EngineError(
            f"loop nest has {n_points} points, above the oracle limit {point_limit}"
        )
    if n_points != mac_count(layer):
        raise EngineError("loop nest does not cover the layer exactly")

    nest_ids = [i for i, b in enumerate(bounds) if b > 1]
    pos_of = {sid: k for k, sid in enumerate(nest_ids)}
    ranges = [range(bounds[i]) for i in nest_ids]
    slots = table.slots
    nodes = arch.nodes
    leaf_i = len(nodes) - 1

    contexts = {n.name: build_action_context(n, layer) for n in arch.components()}
    models: dict[str, ComponentModel] = {
        n.name: registry.get(n.klass) for n in arch.components()
    }

    def unit_energy(node_name: str, action: str) -> float:
        return float(models[node_name].energy_per_action(action, contexts[node_name]))

    # concrete operand values, flattened with per-role strides
    tensors = draw_tensors(layer, seed)
    flat_vals = {r: [int(v) for v in np.ravel(tensors[r])] for r in tensors}
    role_dims = {r: layer.einsum.projection(r) for r in ROLES}
    sizes = layer.einsum.dim_sizes

    # per-dim coordinate folding: [(nest position, bound), ...] outer first
    dim_folds: dict[str, list[tuple[int, int]]] = {d: [] for d in sizes}
    for sid in nest_ids:
        dim_folds[slots[sid].dim].append((pos_of[sid], bounds[sid]))

    count_stages: list[_CountStage] = []
    pair_stages: list[_PairStage] = []

    def positions(ids) -> tuple[int, ...]:
        return tuple(sorted(pos_of[sid] for sid in ids if sid in pos_of))

    def compile_role(role: str) -> None:
        proj = set(role_dims[role])
        emitting = role == "Outputs"

        def rel(sid: int) -> bool:
            return slots[sid].dim in proj

        def is_spatial(sid: int) -> bool:
            return slots[sid].kind != TEMPORAL

        def tile_ids(t: int) -> frozenset[int]:
            keep = set()
            for sid in nest_ids:
                s = slots[sid]
                if is_spatial(sid) and s.node <= t:
                    keep.add(sid)
                elif not is_spatial(sid) and rel(sid) and s.node < t:
                    keep.add(sid)
            return frozenset(keep)

        def add_count(t: int, action: str, ids, per_value: bool):
            node = nodes[t]
            model = models[node.name]
            ctx = contexts[node.name]
            pricer = None
            if per_value and role in model.value_dependent_on:
                pricer = (model, ctx, role)
            count_stages.append(
                _CountStage(
                    node.name,
                    role,
                    action,
                    positions(ids),
                    pricer,
                    unit_energy(node.name, action),
                )
            )

        demand = frozenset(nest_ids)

        def visit(t: int) -> None:
            nonlocal demand
            node = nodes[t]
            d = node.directive(role)
            if d == BYPASS:
                return
            if d == NO_COALESCE:
                add_count(t, "convert", demand, per_value=True)
                return
            if d == COALESCE:
                verb = str(node.attributes.get("action_verb", "compute"))
                add_count(t, verb, demand, per_value=True)
                if emitting:
                    demand = tile_ids(t)
                else:
                    demand = frozenset(
                        sid
                        for sid in nest_ids
                        if (is_spatial(sid) and slots[sid].node <= t) or rel(sid)
                    )
                return
            # temporal reuse
            if emitting:
                rel_in = frozenset(sid for sid in demand if rel(sid))
                pair_stages.append(
                    _PairStage(
                        node.name,
                        role,
                        positions(demand),
                        positions(rel_in),
                        unit_energy(node.name, "write"),
                        unit_energy(node.name, "update"),
                    )
                )
            else:
                add_count(t, "read", demand, per_value=True)
                add_count(t, "fill", tile_ids(t), per_value=False)
            demand = tile_ids(t)

        if nodes[leaf_i].directive(role) == TEMPORAL_REUSE:
            if emitting:
                rel_all = frozenset(sid for sid in nest_ids if rel(sid))
                pair_stages.append(
                    _PairStage(
                        nodes[leaf_i].name,
                        role,
                        positions(frozenset(nest_ids)),
                        positions(rel_all),
                        unit_energy(nodes[leaf_i].name, "write"),
                        unit_energy(nodes[leaf_i].name, "update"),
                    )
                )
            else:
                add_count(leaf_i, "fill", tile_ids(leaf_i), per_value=False)
            demand = tile_ids(leaf_i)
        else:
            visit(leaf_i)

        for m in range(leaf_i, 0, -1):
            if nodes[m].reuses_spatially(role):
                demand = frozenset(
                    sid
                    for sid in demand
                    if not (slots[sid].node == m and is_spatial(sid) and not rel(sid))
                )
            visit(m - 1)

    for role in ROLES:
        compile_role(role)

    leaf = nodes[leaf_i]
    leaf_model = models[leaf.name]
    leaf_ctx = contexts[leaf.name]
    leaf_per_value = bool(leaf_model.value_dependent_on)
    leaf_unit = unit_energy(leaf.name, "compute")
    compute_parts: list[float] = []
    temporal_pos = tuple(
        pos_of[sid] for sid in nest_ids if slots[sid].kind == TEMPORAL
    )
    seen_cycles: set = set()

    in_dims = role_dims["Inputs"]
    w_dims = role_dims["Weights"]
    in_vals = flat_vals["Inputs"]
    w_vals = flat_vals["Weights"]

    def flat_index(dims_list, coords) -> int:
        f = 0
        for d in dims_list:
            f = f * sizes[d] + coords[d]
        return f

    coords: dict[str, int] = {}
    for idx in itertools.product(*ranges):
        for d, folds in dim_folds.items():
            c = 0
            for p, b in folds:
                c = c * b + idx[p]
            coords[d] = c
        vi = in_vals[flat_index(in_dims, coords)]
        vw = w_vals[flat_index(w_dims, coords)]
        point_vals = {"Inputs": vi, "Weights": vw}

        if leaf_per_value:
            compute_parts.append(
                leaf_model.oracle_energy("compute", leaf_ctx, point_vals)
            )
        seen_cycles.add(tuple(idx[p] for p in temporal_pos))

        for st in count_stages:
            key = tuple(idx[p] for p in st.pos)
            if key not in st.seen:
                st.seen.add(key)
                if st.pricer is not None:
                    model, ctx, role = st.pricer
                    vals = {role: point_vals[role]} if role in point_vals else {}
                    st.parts.append(model.oracle_energy(st.action, ctx, vals))
        for st in pair_stages:
            k = tuple(idx[p] for p in st.pos_in)
            if k in st.seen_in:
                continue
            st.seen_in.add(k)
            kw = tuple(idx[p] for p in st.pos_w)
            if kw in st.seen_w:
                st.updates += 1
            else:
                st.seen_w.add(kw)
                st.writes += 1

    counts: dict[tuple[str, str, str], int] = {
        (leaf.name, COMPUTE_TENSOR, "compute"): n_points
    }
    energy_terms: list[float] = []
    if leaf_per_value:
        energy_terms.append(math.fsum(compute_parts))
    else:
        energy_terms.append(n_points * leaf_unit)
    for st in count_stages:
        key = (st.node, st.tensor, st.action)
        counts[key] = counts.get(key, 0) + len(st.seen)
        if st.pricer is not None:
            energy_terms.append(math.fsum(st.parts))
        else:
            energy_terms.append(len(st.seen) * st.unit)
    for st in pair_stages:
        counts[(st.node, st.tensor, "write")] = (
            counts.get((st.node, st.tensor, "write"), 0) + st.writes
        )
        counts[(st.node, st.tensor, "update")] = (
            counts.get((st.node, st.tensor, "update"), 0) + st.updates
        )
        energy_terms.append(st.writes * st.unit_w + st.updates * st.unit_u)

    return OracleResult(
        layer=layer.name,
        energy_j=math.fsum(energy_terms),
        counts=counts,
        macs=n_points,
        cycles=len(seen_cycles),
    )
