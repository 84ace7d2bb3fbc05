"""Extended-Einsum workload layers and operand value distributions.

A layer is an iteration space (named dims with integer sizes) plus a
projection of those dims onto the Inputs / Weights / Outputs tensors and a
value PMF per tensor.  The PMFs are the only data-dependent information the
statistical energy models consume; actual tensor contents are needed only by
the brute-force oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

ROLES = ("Inputs", "Weights", "Outputs")

# Tolerance on total probability mass.
PROB_TOL = 1e-9


class WorkloadError(ValueError):
    """Malformed workload document or inconsistent layer data."""


@dataclass(frozen=True)
class ValuePMF:
    """Discrete distribution over integer operand values.

    Support values are strictly increasing; probabilities are non-negative
    and sum to one within PROB_TOL.
    """

    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) == 0:
            raise WorkloadError("PMF needs at least one support value")
        if len(self.support) != len(self.probs):
            raise WorkloadError("PMF support and probability lengths differ")
        for v in self.support:
            if not isinstance(v, int):
                raise WorkloadError(f"PMF support must be integers, got {v!r}")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise WorkloadError("PMF support must be strictly increasing")
        if any(p < 0.0 for p in self.probs):
            raise WorkloadError("PMF probabilities must be non-negative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_TOL:
            raise WorkloadError(f"PMF probabilities sum to {total!r}, not 1")

    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.support, self.probs))

    @property
    def min_value(self) -> int:
        return self.support[0]

    @property
    def max_value(self) -> int:
        return self.support[-1]


def build_pmf(samples) -> ValuePMF:
    """Estimate a PMF from observed integer samples (e.g. a trace dump)."""
    arr = np.asarray(samples)
    if arr.size == 0:
        raise WorkloadError("cannot build a PMF from zero samples")
    if not np.issubdtype(arr.dtype, np.integer):
        if np.issubdtype(arr.dtype, np.floating) and np.all(arr == np.floor(arr)):
            arr = arr.astype(np.int64)
        else:
            raise WorkloadError("PMF samples must be integers")
    values, counts = np.unique(arr, return_counts=True)
    n = arr.size
    return ValuePMF(
        support=tuple(int(v) for v in values),
        probs=tuple(float(c) / n for c in counts),
    )


def uniform_pmf(lo: int, hi: int) -> ValuePMF:
    """Uniform over the inclusive integer range [lo, hi]."""
    if hi < lo:
        raise WorkloadError(f"empty uniform range [{lo}, {hi}]")
    n = hi - lo + 1
    return ValuePMF(tuple(range(lo, hi + 1)), tuple([1.0 / n] * n))


def delta_pmf(value: int) -> ValuePMF:
    return ValuePMF((int(value),), (1.0,))


def two_point_pmf(a: int, b: int, p_b: float) -> ValuePMF:
    """Mass 1-p_b at a and p_b at b."""
    if not 0.0 <= p_b <= 1.0:
        raise WorkloadError(f"two_point probability {p_b} outside [0, 1]")
    if a == b:
        return delta_pmf(a)
    lo, hi = (a, b) if a < b else (b, a)
    p_hi = p_b if hi == b else 1.0 - p_b
    return ValuePMF((lo, hi), (1.0 - p_hi, p_hi))


def synth_pmf(kind: str, params) -> ValuePMF:
    """Build a synthetic PMF: uniform(lo, hi), delta(v) or two_point(a, b, p)."""
    if kind == "uniform":
        lo, hi = params
        return uniform_pmf(int(lo), int(hi))
    if kind == "delta":
        value = params[0] if isinstance(params, (list, tuple)) else params
        return delta_pmf(int(value))
    if kind == "two_point":
        a, b, p = params
        return two_point_pmf(int(a), int(b), float(p))
    raise WorkloadError(f"unknown synthetic PMF kind {kind!r}")


@dataclass(frozen=True)
class EinsumSpec:
    """Iteration dims plus the dim subset each tensor is indexed by."""

    dims: tuple[tuple[str, int], ...]
    tensors: dict[str, tuple[str, ...]]

    def __post_init__(self):
        seen = set()
        for name, size in self.dims:
            if name in seen:
                raise WorkloadError(f"duplicate dim {name!r}")
            seen.add(name)
            if size < 1:
                raise WorkloadError(f"dim {name!r} has non-positive size {size}")
        for role in ROLES:
            if role not in self.tensors:
                raise WorkloadError(f"missing projection for {role}")
        for role, proj in self.tensors.items():
            if role not in ROLES:
                raise WorkloadError(f"unknown tensor role {role!r}")
            if len(set(proj)) != len(proj):
                raise WorkloadError(f"{role} projection repeats a dim")
            for d in proj:
                if d not in seen:
                    raise WorkloadError(f"{role} projects unknown dim {d!r}")
        used = set().union(*(self.tensors[r] for r in ROLES))
        unused = seen - used
        if unused:
            raise WorkloadError(f"dims {sorted(unused)} appear in no projection")
        operand_dims = set(self.tensors["Inputs"]) | set(self.tensors["Weights"])
        out = set(self.tensors["Outputs"])
        if not out <= operand_dims:
            raise WorkloadError("Outputs project dims absent from Inputs and Weights")
        if not self.reduction_dims:
            raise WorkloadError("layer has no reduction dim (Outputs cover every dim)")

    @property
    def dim_sizes(self) -> dict[str, int]:
        return dict(self.dims)

    @property
    def dim_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dims)

    @property
    def reduction_dims(self) -> tuple[str, ...]:
        out = set(self.tensors["Outputs"])
        return tuple(name for name, _ in self.dims if name not in out)

    def projection(self, role: str) -> tuple[str, ...]:
        return self.tensors[role]


@dataclass(frozen=True)
class WorkloadLayer:
    """One layer: an Einsum, per-tensor bit widths, signedness and PMFs."""

    name: str
    einsum: EinsumSpec
    bits: dict[str, int]
    pmfs: dict[str, ValuePMF] = field(default_factory=dict)
    signed: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        for role in ROLES:
            if role not in self.bits:
                raise WorkloadError(f"layer {self.name!r}: missing bit width for {role}")
            if self.bits[role] < 1:
                raise WorkloadError(f"layer {self.name!r}: {role} bit width must be >= 1")
        for role, pmf in self.pmfs.items():
            if role not in ROLES:
                raise WorkloadError(f"layer {self.name!r}: PMF for unknown role {role!r}")
            self._check_representable(role, pmf)
        # Outputs default to uniform over the bit-width range, so an explicit
        # PMF is only mandatory for the operand tensors.
        for role in ("Inputs", "Weights"):
            if role not in self.pmfs:
                raise WorkloadError(f"layer {self.name!r}: missing PMF for {role}")

    def _check_representable(self, role: str, pmf: ValuePMF) -> None:
        b = self.bits[role]
        if self.is_signed(role):
            lo, hi = -(1 << (b - 1)), (1 << (b - 1)) - 1
            if b == 1:
                # one signed bit carries the antipodal pair, as in
                # binary-bipolar layers
                lo, hi = -1, 1
        else:
            lo, hi = 0, (1 << b) - 1
        if pmf.min_value < lo or pmf.max_value > hi:
            raise WorkloadError(
                f"layer {self.name!r}: {role} support [{pmf.min_value}, {pmf.max_value}] "
                f"does not fit {b}-bit {'signed' if self.is_signed(role) else 'unsigned'} range"
            )

    def is_signed(self, role: str) -> bool:
        if role in self.signed:
            return self.signed[role]
        pmf = self.pmfs.get(role)
        return pmf is not None and pmf.min_value < 0

    def pmf_for(self, role: str) -> ValuePMF:
        """Declared PMF, or for Outputs a uniform default over the bit range."""
        if role in self.pmfs:
            return self.pmfs[role]
        if role == "Outputs":
            b = self.bits[role]
            if self.signed.get(role, True):
                return uniform_pmf(-(1 << (b - 1)), (1 << (b - 1)) - 1)
            return uniform_pmf(0, (1 << b) - 1)
        raise WorkloadError(f"layer {self.name!r}: no PMF for {role}")


def mac_count(layer: WorkloadLayer) -> int:
    """Total multiply-accumulate operations: the product of all dim sizes."""
    return math.prod(size for _, size in layer.einsum.dims)


def _parse_pmf_spec(spec, base_dir: Path | None) -> ValuePMF:
    if isinstance(spec, dict) and len(spec) == 1:
        kind, params = next(iter(spec.items()))
        if kind == "file":
            path = Path(params)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise WorkloadError(f"cannot read PMF file {path}: {exc}") from exc
            try:
                samples = [int(line) for line in text.split()]
            except ValueError as exc:
                raise WorkloadError(f"PMF file {path} has a non-integer entry") from exc
            return build_pmf(samples)
        if kind in ("uniform", "delta", "two_point"):
            return synth_pmf(kind, params)
        if kind == "table":
            return _pmf_from_table(params)
    if isinstance(spec, dict) and set(spec) == {"support", "probs"}:
        return _pmf_from_table(spec)
    raise WorkloadError(f"unrecognized PMF spec {spec!r}")


def _pmf_from_table(params) -> ValuePMF:
    try:
        support = tuple(int(v) for v in params["support"])
        probs = tuple(float(p) for p in params["probs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise WorkloadError(f"bad PMF table {params!r}") from exc
    order = sorted(range(len(support)), key=lambda i: support[i])
    return ValuePMF(
        tuple(support[i] for i in order),
        tuple(probs[i] for i in order),
    )


def parse_workload(text: str, base_dir: str | Path | None = None) -> list[WorkloadLayer]:
    """Parse a workload YAML document into layers.

    Relative PMF file paths are resolved against base_dir.
    """
    base = Path(base_dir) if base_dir is not None else None
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise WorkloadError(f"workload YAML error{where}: {exc.problem}") from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise WorkloadError("workload document must be a mapping with a 'layers' list")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise WorkloadError("'layers' must be a non-empty list")

    layers = []
    names = set()
    for i, raw in enumerate(raw_layers):
        if not isinstance(raw, dict):
            raise WorkloadError(f"layer #{i} is not a mapping")
        name = raw.get("name", f"layer{i}")
        if name in names:
            raise WorkloadError(f"duplicate layer name {name!r}")
        names.add(name)
        try:
            dims_raw = raw["dims"]
            proj_raw = raw["projections"]
            bits_raw = raw["bits"]
        except KeyError as exc:
            raise WorkloadError(f"layer {name!r}: missing key {exc.args[0]!r}") from exc
        if not isinstance(dims_raw, dict) or not dims_raw:
            raise WorkloadError(f"layer {name!r}: 'dims' must be a non-empty mapping")
        dims = tuple((str(d), int(s)) for d, s in dims_raw.items())
        tensors = {}
        if not isinstance(proj_raw, dict):
            raise WorkloadError(f"layer {name!r}: 'projections' must be a mapping")
        for role, proj in proj_raw.items():
            tensors[str(role)] = tuple(str(d) for d in (proj or ()))
        einsum = EinsumSpec(dims=dims, tensors=tensors)
        bits = {str(r): int(b) for r, b in bits_raw.items()}
        pmfs = {}
        for role, spec in (raw.get("pmf") or {}).items():
            pmfs[str(role)] = _parse_pmf_spec(spec, base)
        signed = {str(r): bool(s) for r, s in (raw.get("signed") or {}).items()}
        layers.append(
            WorkloadLayer(name=str(name), einsum=einsum, bits=bits, pmfs=pmfs, signed=signed)
        )
    return layers
