"""Run configuration: JSON schema, validation diagnostics and object builders.

A run is one JSON document.  Angles are in degrees, frequencies in GHz and
powers in dB.  ``inr_bar_rx_db`` accepts the string ``"-inf"`` (codebook
capacity reference) and ``channel.rician_kappa_db`` accepts ``"inf"``
(pure line-of-sight).
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import jsonschema

from .array import ArrayGeometry, CoverageGrid, SubcarrierGrid
from .design import Label
from .evaluate import UserPopulation
from .metrics import LinkBudget
from .quantize import QuantizationSpec
from .solver import SolverConfig

__all__ = ["ConfigError", "Diagnostic", "RunConfig", "SCHEMA", "validate_document", "load_config"]

SEED_ENV = "SQUINTBOOK_SEED"

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_array_schema = {
    "type": "object",
    "required": ["nx", "nz"],
    "additionalProperties": False,
    "properties": {"nx": _int_pos, "nz": _int_pos, "spacing_wavelengths": _pos},
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["carrier_freq_ghz", "arrays", "grid", "num_subcarriers", "sweep"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "carrier_freq_ghz": _pos,
        "num_subcarriers": {"type": "integer"},
        "arrays": {
            "type": "object",
            "required": ["tx", "rx"],
            "additionalProperties": False,
            "properties": {"tx": _array_schema, "rx": _array_schema, "separation_wavelengths": _pos},
        },
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rician_kappa_db": {"oneOf": [_number, {"const": "inf"}]},
                "path": {"type": "string"},
            },
        },
        "grid": {
            "type": "object",
            "required": ["az_min_deg", "az_max_deg", "az_step_deg", "el_min_deg", "el_max_deg", "el_step_deg"],
            "additionalProperties": False,
            "properties": {
                "az_min_deg": {"type": "number", "minimum": -180},
                "az_max_deg": {"type": "number", "exclusiveMaximum": 180},
                "az_step_deg": _pos,
                "el_min_deg": {"type": "number", "minimum": -90},
                "el_max_deg": {"type": "number", "maximum": 90},
                "el_step_deg": _pos,
            },
        },
        "quantization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "phase_bits": {"type": "integer", "minimum": 1, "maximum": 16},
                "amp_bits": {"type": "integer", "minimum": 0, "maximum": 16},
                "amp_step_db": _pos,
            },
        },
        "link": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snr_bar_tx_db": _number,
                "snr_bar_rx_db": _number,
                "inr_bar_rx_db": {"oneOf": [_number, {"const": "-inf"}]},
            },
        },
        "users": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "az_range_deg": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                "el_range_deg": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                "count": _int_pos,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "outer_rounds": _int_pos,
                "max_outer_iters": _int_pos,
                "max_inner_iters": _int_pos,
                "feasibility_tol": _pos,
                "kkt_tol": _pos,
            },
        },
        "sweep": {
            "type": "object",
            "required": ["bandwidths_ghz", "sigma2_db", "baselines"],
            "additionalProperties": False,
            "properties": {
                "bandwidths_ghz": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "sigma2_db": {"type": "array", "items": _number},
                "baselines": {
                    "type": "array",
                    "items": {"enum": [lb.value for lb in Label]},
                    "minItems": 1,
                    "uniqueItems": True,
                },
            },
        },
        "output_dir": {"type": "string"},
    },
}

DEFAULTS: dict[str, Any] = {
    "name": "run",
    "seed": 0,
    "channel": {"rician_kappa_db": 10.0},
    "quantization": {"phase_bits": 6, "amp_bits": 6, "amp_step_db": 0.5},
    "link": {"snr_bar_tx_db": 10.0, "snr_bar_rx_db": 10.0, "inr_bar_rx_db": 80.0},
    "users": {"az_range_deg": [-67.5, 67.5], "el_range_deg": [-37.5, 37.5], "count": 100},
    "solver": {"outer_rounds": 1},
    "output_dir": "out",
}


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.field}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _field_name(err: jsonschema.ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        # message is "'name' is a required property"
        missing = err.message.split("'")[1]
        path.append(missing)
    elif err.validator == "additionalProperties" and "'" in err.message:
        path.append(err.message.split("'")[1])
    return ".".join(path) or "<root>"


def _steps(lo: float, hi: float, step: float) -> tuple[int, bool]:
    span = (hi - lo) / step
    count = int(math.floor(span + 1e-9)) + 1
    return count, abs(span - round(span)) <= 1e-9


def validate_document(doc: Any) -> list[Diagnostic]:
    """Every schema violation and cross-field problem in ``doc``; empty when valid."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    diags = [Diagnostic("error", _field_name(e), e.message)
             for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))]
    if not isinstance(doc, dict):
        return diags

    k = doc.get("num_subcarriers")
    if isinstance(k, int) and k < 1:
        diags.append(Diagnostic("error", "num_subcarriers", f"must be >= 1, got {k}"))

    grid = doc.get("grid")
    if isinstance(grid, dict):
        counts, inexact = {}, []
        for axis in ("az", "el"):
            lo, hi, step = (grid.get(f"{axis}_min_deg"), grid.get(f"{axis}_max_deg"), grid.get(f"{axis}_step_deg"))
            if not all(isinstance(v, (int, float)) for v in (lo, hi, step)) or step <= 0:
                continue
            if hi < lo:
                diags.append(Diagnostic("error", f"grid.{axis}_max_deg", f"{hi} is below {axis}_min_deg {lo}"))
                continue
            counts[axis], exact = _steps(lo, hi, step)
            if not exact:
                inexact.append((axis, lo, hi, step))
        for axis, lo, hi, step in inexact:
            size = f"; grid is {counts['az']} x {counts['el']} = {counts['az'] * counts['el']} beams" \
                if len(counts) == 2 else ""
            last = lo + (counts[axis] - 1) * step
            diags.append(Diagnostic(
                "warning", f"grid.{axis}_step_deg",
                f"{step} does not divide [{lo}, {hi}]; last {axis} sample is {last:g}{size}"))

    users = doc.get("users", {})
    if isinstance(users, dict):
        for key in ("az_range_deg", "el_range_deg"):
            rng = users.get(key)
            if isinstance(rng, list) and len(rng) == 2 and all(isinstance(v, (int, float)) for v in rng) and rng[1] < rng[0]:
                diags.append(Diagnostic("error", f"users.{key}", "range is empty"))

    sweep = doc.get("sweep")
    if isinstance(sweep, dict):
        baselines = sweep.get("baselines") or []
        needs_budget = any(b != Label.CBF.value for b in baselines if isinstance(b, str))
        if needs_budget and isinstance(sweep.get("sigma2_db"), list) and not sweep["sigma2_db"]:
            diags.append(Diagnostic("error", "sweep.sigma2_db", "optimized baselines need at least one budget"))

    chan = doc.get("channel", {})
    if isinstance(chan, dict) and isinstance(chan.get("path"), str) and isinstance(sweep, dict):
        bws = sweep.get("bandwidths_ghz")
        if isinstance(bws, list) and len(bws) != 1:
            diags.append(Diagnostic("error", "channel.path",
                                    "an imported channel fixes the bandwidth; sweep.bandwidths_ghz must have one entry"))
    return diags


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with defaults filled in."""

    document: dict
    diagnostics: tuple[Diagnostic, ...] = field(default=())

    @classmethod
    def from_document(cls, doc: Any, seed_override: int | None = None) -> "RunConfig":
        diags = validate_document(doc)
        errors = [d for d in diags if d.level == "error"]
        if errors:
            raise ConfigError(errors)
        full = _merge(DEFAULTS, doc)
        if seed_override is not None:
            full["seed"] = int(seed_override)
        return cls(full, tuple(d for d in diags if d.level != "error"))

    # accessors --------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.document["seed"])

    @property
    def carrier_freq_hz(self) -> float:
        return float(self.document["carrier_freq_ghz"]) * 1e9

    @property
    def num_subcarriers(self) -> int:
        return int(self.document["num_subcarriers"])

    @property
    def bandwidths_hz(self) -> list[float]:
        return [float(b) * 1e9 for b in self.document["sweep"]["bandwidths_ghz"]]

    @property
    def sigma2_db(self) -> list[float]:
        return [float(s) for s in self.document["sweep"]["sigma2_db"]]

    @property
    def baselines(self) -> list[Label]:
        return [Label(b) for b in self.document["sweep"]["baselines"]]

    @property
    def separation_wavelengths(self) -> float:
        return float(self.document["arrays"].get("separation_wavelengths", 10.0))

    @property
    def kappa_db(self) -> float:
        return float(self.document["channel"].get("rician_kappa_db", 10.0))

    @property
    def channel_path(self) -> str | None:
        return self.document["channel"].get("path")

    @property
    def output_dir(self) -> str:
        return self.document["output_dir"]

    def geometry(self, side: str) -> ArrayGeometry:
        a = self.document["arrays"][side]
        return ArrayGeometry.planar(int(a["nx"]), int(a["nz"]), self.carrier_freq_hz,
                                    float(a.get("spacing_wavelengths", 0.5)))

    def coverage_grid(self) -> CoverageGrid:
        g = self.document["grid"]
        return CoverageGrid.from_ranges_deg(g["az_min_deg"], g["az_max_deg"], g["az_step_deg"],
                                            g["el_min_deg"], g["el_max_deg"], g["el_step_deg"])

    def subcarriers(self, bandwidth_hz: float) -> SubcarrierGrid:
        return SubcarrierGrid(self.carrier_freq_hz, bandwidth_hz, self.num_subcarriers)

    def quantization(self) -> QuantizationSpec:
        q = self.document["quantization"]
        return QuantizationSpec(int(q["phase_bits"]), int(q["amp_bits"]), float(q["amp_step_db"]))

    def link_budget(self) -> LinkBudget:
        lk = self.document["link"]
        return LinkBudget(float(lk["snr_bar_tx_db"]), float(lk["snr_bar_rx_db"]), float(lk["inr_bar_rx_db"]))

    def users(self) -> UserPopulation:
        u = self.document["users"]
        return UserPopulation(tuple(u["az_range_deg"]), tuple(u["el_range_deg"]), int(u["count"]),
                              int(u.get("seed", self.seed)))

    def solver(self) -> SolverConfig:
        s = {k: v for k, v in self.document["solver"].items() if k != "outer_rounds"}
        return SolverConfig(**s)

    @property
    def outer_rounds(self) -> int:
        return int(self.document["solver"].get("outer_rounds", 1))


def load_config(path: str | os.PathLike, use_env_seed: bool = True) -> RunConfig:
    """Parse and validate a config file; ``SQUINTBOOK_SEED`` overrides ``seed``."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([Diagnostic("error", "<document>", f"invalid JSON: {exc}")]) from exc
    seed = None
    if use_env_seed and os.environ.get(SEED_ENV, "").strip():
        raw = os.environ[SEED_ENV].strip()
        if not raw.isdigit():
            raise ConfigError([Diagnostic("error", SEED_ENV, f"must be a nonnegative integer, got {raw!r}")])
        seed = int(raw)
    return RunConfig.from_document(doc, seed)
