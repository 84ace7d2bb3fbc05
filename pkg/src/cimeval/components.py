"""Per-component energy/area models and the model registry.

Models price one action (read, write, fill, update, convert, compute) from an
ActionContext that carries the node's resolved attributes and the encoded,
sliced operand PMFs.  Data-value-dependent models consume distributions only;
the same per-value kernels are reused by the brute-force oracle through
oracle_energy.

Registered classes: reram_cell, sram_cell, dac, adc, buffer, adder, wire
(router is an alias of wire).  register_model adds plug-ins keyed by the
architecture `class:` string.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from .valuemodel import (
    Encoding,
    PhysicalMap,
    SliceScheme,
    ValueModelError,
    encode_value,
    encode_value_companion,
    expected_moment,
    slice_level,
    switching_rate,
)
from .workload import ValuePMF

# Walden figure of merit, J per conversion step.
DEFAULT_ADC_FOM = 10e-15
# ADC area model coefficients: area = a0 + a1 * 2^B + a2 * f_s.
DEFAULT_ADC_A0 = 0.0
DEFAULT_ADC_A1 = 1e-10  # m^2 per quantization level
DEFAULT_ADC_A2 = 1e-17  # m^2 per Hz of sample rate


class ComponentError(ValueError):
    """Missing attribute, missing PMF or unpriceable action."""


@dataclass(frozen=True)
class ActionContext:
    """Everything a model may consult when pricing one action.

    slices[role] holds the encoded PMF of each bit slice (LSB-first);
    companions[role] holds the matching second-line slices for differential
    encoding (or the sign PMF for magnitude-only, as a single entry).
    """

    layer: str
    node: str
    attributes: dict
    bits: dict[str, int] = field(default_factory=dict)
    encodings: dict[str, Encoding] = field(default_factory=dict)
    schemes: dict[str, SliceScheme] = field(default_factory=dict)
    slices: dict[str, tuple[ValuePMF, ...]] = field(default_factory=dict)
    companions: dict[str, tuple[ValuePMF, ...]] = field(default_factory=dict)

    def attr(self, key: str, default=None):
        value = self.attributes.get(key, default)
        if value is None:
            raise ComponentError(
                f"node {self.node!r}: missing required attribute {key!r}"
            )
        return value

    def role_slices(self, role: str) -> tuple[ValuePMF, ...]:
        if role not in self.slices:
            raise ComponentError(
                f"node {self.node!r}: no {role} distribution in action context"
            )
        return self.slices[role]


def _slice_widths(ctx: ActionContext, role: str) -> tuple[int, ...]:
    scheme = ctx.schemes.get(role)
    if scheme is None:
        return (ctx.bits.get(role, 8),)
    return scheme.widths


def memcell_read_energy(ctx: ActionContext) -> float:
    """Average read energy of one cell access: G_avg * V_avg^2 * t_read.

    Input slices map to voltages, weight slices to conductances; slice
    averages follow from each slice being equally likely per access.  A
    differential weight line adds the companion population's conductance.
    """
    t_read = float(ctx.attr("t_read"))
    vdd = float(ctx.attributes.get("vdd", 1.0))
    g_min = float(ctx.attributes.get("g_min", 0.0))
    g_max = float(ctx.attr("g_max"))

    in_slices = ctx.role_slices("Inputs")
    in_widths = _slice_widths(ctx, "Inputs")
    v2 = 0.0
    for pmf, width in zip(in_slices, in_widths):
        vmap = PhysicalMap.voltage(vdd=vdd, levels=1 << width)
        v2 += expected_moment(pmf, vmap, power=2)
    in_comp = ctx.companions.get("Inputs")
    if in_comp and ctx.encodings.get("Inputs", Encoding("offset", 8)).kind == "differential":
        for pmf, width in zip(in_comp, in_widths):
            vmap = PhysicalMap.voltage(vdd=vdd, levels=1 << width)
            v2 += expected_moment(pmf, vmap, power=2)
    v2 /= len(in_slices)

    w_slices = ctx.role_slices("Weights")
    w_widths = _slice_widths(ctx, "Weights")
    g = 0.0
    for pmf, width in zip(w_slices, w_widths):
        gmap = PhysicalMap.conductance(g_min=g_min, g_max=g_max, levels=1 << width)
        g += expected_moment(pmf, gmap, power=1)
    w_comp = ctx.companions.get("Weights")
    if w_comp and ctx.encodings.get("Weights", Encoding("offset", 8)).kind == "differential":
        for pmf, width in zip(w_comp, w_widths):
            gmap = PhysicalMap.conductance(g_min=g_min, g_max=g_max, levels=1 << width)
            g += expected_moment(pmf, gmap, power=1)
    g /= len(w_slices)

    return g * v2 * t_read


def dac_convert_energy(ctx: ActionContext) -> float:
    """Average energy of one input conversion.

    model=value_proportional scales e_full_scale by E[level]/(levels-1);
    model=switching scales it by the mean fraction of set bits.
    """
    model = ctx.attributes.get("model", "value_proportional")
    e_fs = float(ctx.attr("e_full_scale"))
    slices = ctx.role_slices("Inputs")
    widths = _slice_widths(ctx, "Inputs")
    populations = [slices]
    comp = ctx.companions.get("Inputs")
    if comp and ctx.encodings.get("Inputs", Encoding("offset", 8)).kind == "differential":
        populations.append(comp)

    total = 0.0
    for pop in populations:
        for pmf, width in zip(pop, widths):
            if model == "value_proportional":
                levels = 1 << width
                total += pmf.mean() / (levels - 1) if levels > 1 else float(pmf.mean())
            elif model == "switching":
                total += switching_rate(pmf, width)
            else:
                raise ComponentError(f"node {ctx.node!r}: unknown DAC model {model!r}")
    return e_fs * total / len(slices)


def adc_convert_energy(attributes: dict, node: str = "adc") -> float:
    """Walden-style conversion energy: FOM * 2^resolution."""
    if "resolution" not in attributes:
        raise ComponentError(f"node {node!r}: missing required attribute 'resolution'")
    bits = int(attributes["resolution"])
    if bits <= 0:
        raise ComponentError(f"node {node!r}: ADC resolution must be positive")
    fom = float(attributes.get("fom", DEFAULT_ADC_FOM))
    return fom * (1 << bits)


def adc_area(attributes: dict, node: str = "adc") -> float:
    """ADC area: a0 + a1 * 2^resolution + a2 * sample_rate."""
    if "resolution" not in attributes:
        raise ComponentError(f"node {node!r}: missing required attribute 'resolution'")
    bits = int(attributes["resolution"])
    if bits <= 0:
        raise ComponentError(f"node {node!r}: ADC resolution must be positive")
    f_s = float(attributes.get("sample_rate", 0.0))
    if "sample_rate" in attributes and f_s <= 0:
        raise ComponentError(f"node {node!r}: sample_rate must be positive")
    a0 = float(attributes.get("adc_a0", DEFAULT_ADC_A0))
    a1 = float(attributes.get("adc_a1", DEFAULT_ADC_A1))
    a2 = float(attributes.get("adc_a2", DEFAULT_ADC_A2))
    return a0 + a1 * (1 << bits) + a2 * f_s


def buffer_access_energy(ctx: ActionContext) -> float:
    """Energy of one buffer access: e_per_bit * width."""
    return float(ctx.attr("e_per_bit")) * float(ctx.attr("width"))


def adder_energy(ctx: ActionContext) -> float:
    return float(ctx.attr("e_per_add"))


def wire_energy(ctx: ActionContext) -> float:
    return float(ctx.attr("e_per_bit")) * float(ctx.attr("width"))


class ComponentModel(ABC):
    """Energy/area model for one component class."""

    #: tensor roles whose concrete values change this model's energy
    value_dependent_on: frozenset[str] = frozenset()

    @abstractmethod
    def actions(self) -> frozenset[str]:
        """Action names this model can price."""

    @abstractmethod
    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        """Average energy in joules for one action."""

    def area(self, attributes: dict) -> float:
        """Area in m^2 of one instance."""
        return float(attributes.get("area", 0.0))

    def leakage_power(self, attributes: dict) -> float:
        """Static power in watts of one instance; defaults to zero."""
        return 0.0

    def oracle_energy(self, action: str, ctx: ActionContext, values: dict[str, int]) -> float:
        """Energy of one action given concrete operand values.

        Value-independent models fall back to the average.
        """
        return self.energy_per_action(action, ctx)

    def _unsupported(self, action: str, ctx: ActionContext):
        raise ComponentError(
            f"node {ctx.node!r}: model {type(self).__name__} cannot price {action!r}"
        )


def _mean_slice_quantity(value: int, ctx: ActionContext, role: str, per_slice) -> float:
    """Average per_slice(slice_level, width) over the slices of one value."""
    enc = ctx.encodings[role]
    widths = _slice_widths(ctx, role)
    scheme = ctx.schemes.get(role) or SliceScheme((enc.bits,))
    levels = [encode_value(int(value), enc)]
    if enc.kind == "differential":
        levels.append(encode_value_companion(int(value), enc))
    total = 0.0
    for lvl in levels:
        for s, width in zip(slice_level(lvl, scheme), widths):
            total += per_slice(s, width)
    return total / len(scheme.widths)


class MemoryCellModel(ComponentModel):
    """Resistive cell: analog MAC by driving a voltage across a conductance."""

    value_dependent_on = frozenset({"Inputs", "Weights"})

    def actions(self) -> frozenset[str]:
        return frozenset({"read", "compute", "write", "fill"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action in ("read", "compute"):
            return memcell_read_energy(ctx)
        if action in ("write", "fill"):
            return float(ctx.attributes.get("e_write", 0.0))
        self._unsupported(action, ctx)

    def oracle_energy(self, action: str, ctx: ActionContext, values: dict[str, int]) -> float:
        if action not in ("read", "compute"):
            return self.energy_per_action(action, ctx)
        if "Inputs" not in values or "Weights" not in values:
            return self.energy_per_action(action, ctx)
        t_read = float(ctx.attr("t_read"))
        vdd = float(ctx.attributes.get("vdd", 1.0))
        g_min = float(ctx.attributes.get("g_min", 0.0))
        g_max = float(ctx.attr("g_max"))
        v2 = _mean_slice_quantity(
            values["Inputs"],
            ctx,
            "Inputs",
            lambda lvl, w: PhysicalMap.voltage(vdd, 1 << w).value(lvl) ** 2,
        )
        g = _mean_slice_quantity(
            values["Weights"],
            ctx,
            "Weights",
            lambda lvl, w: PhysicalMap.conductance(g_min, g_max, 1 << w).value(lvl),
        )
        return g * v2 * t_read

    def area(self, attributes: dict) -> float:
        return float(attributes.get("cell_area", attributes.get("area", 0.0)))


class SramCellModel(ComponentModel):
    """Digital cell: fixed energy per MAC."""

    def actions(self) -> frozenset[str]:
        return frozenset({"read", "compute", "write", "fill"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action in ("read", "compute"):
            return float(ctx.attr("e_mac"))
        if action in ("write", "fill"):
            return float(ctx.attributes.get("e_write", 0.0))
        self._unsupported(action, ctx)

    def area(self, attributes: dict) -> float:
        return float(attributes.get("cell_area", attributes.get("area", 0.0)))


class DacModel(ComponentModel):
    value_dependent_on = frozenset({"Inputs"})

    def actions(self) -> frozenset[str]:
        return frozenset({"convert"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action == "convert":
            return dac_convert_energy(ctx)
        self._unsupported(action, ctx)

    def oracle_energy(self, action: str, ctx: ActionContext, values: dict[str, int]) -> float:
        if action != "convert" or "Inputs" not in values:
            return self.energy_per_action(action, ctx)
        model = ctx.attributes.get("model", "value_proportional")
        e_fs = float(ctx.attr("e_full_scale"))
        if model == "value_proportional":
            frac = _mean_slice_quantity(
                values["Inputs"],
                ctx,
                "Inputs",
                lambda lvl, w: lvl / ((1 << w) - 1) if w > 0 and (1 << w) > 1 else float(lvl),
            )
        elif model == "switching":
            frac = _mean_slice_quantity(
                values["Inputs"], ctx, "Inputs", lambda lvl, w: lvl.bit_count() / w
            )
        else:
            raise ComponentError(f"node {ctx.node!r}: unknown DAC model {model!r}")
        return e_fs * frac


class AdcModel(ComponentModel):
    def actions(self) -> frozenset[str]:
        return frozenset({"convert"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action == "convert":
            return adc_convert_energy(ctx.attributes, ctx.node)
        self._unsupported(action, ctx)

    def area(self, attributes: dict) -> float:
        return adc_area(attributes)


class BufferModel(ComponentModel):
    def actions(self) -> frozenset[str]:
        return frozenset({"read", "write", "fill", "update"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action in ("read", "write", "fill"):
            return buffer_access_energy(ctx)
        if action == "update":
            # read-modify-write
            return 2.0 * buffer_access_energy(ctx)
        self._unsupported(action, ctx)


class AdderModel(ComponentModel):
    def actions(self) -> frozenset[str]:
        return frozenset({"compute", "convert"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action in ("compute", "convert"):
            return adder_energy(ctx)
        self._unsupported(action, ctx)


class WireModel(ComponentModel):
    def actions(self) -> frozenset[str]:
        return frozenset({"read", "write", "fill", "update", "convert", "compute"})

    def energy_per_action(self, action: str, ctx: ActionContext) -> float:
        if action == "update":
            return 2.0 * wire_energy(ctx)
        return wire_energy(ctx)


class ModelRegistry:
    """Component models keyed by the architecture `class:` string."""

    def __init__(self):
        self._models: dict[str, ComponentModel] = {}

    def register(self, name: str, model: ComponentModel, override: bool = False) -> None:
        if name in self._models and not override:
            raise ComponentError(
                f"model class {name!r} already registered; pass override=True to replace"
            )
        self._models[name] = model

    def get(self, name: str) -> ComponentModel:
        try:
            return self._models[name]
        except KeyError:
            raise ComponentError(f"no model registered for class {name!r}") from None

    def known(self) -> tuple[str, ...]:
        return tuple(sorted(self._models))


def _default_registry() -> ModelRegistry:
    reg = ModelRegistry()
    reg.register("reram_cell", MemoryCellModel())
    reg.register("memory_cell", MemoryCellModel())
    reg.register("sram_cell", SramCellModel())
    reg.register("dac", DacModel())
    reg.register("adc", AdcModel())
    reg.register("buffer", BufferModel())
    reg.register("adder", AdderModel())
    reg.register("wire", WireModel())
    reg.register("router", WireModel())
    return reg


DEFAULT_REGISTRY = _default_registry()


def register_model(name: str, model: ComponentModel, override: bool = False) -> None:
    """Register a plug-in model in the shared default registry."""
    DEFAULT_REGISTRY.register(name, model, override=override)


def get_model(name: str) -> ComponentModel:
    return DEFAULT_REGISTRY.get(name)
