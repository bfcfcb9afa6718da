"""Codebook construction: the wideband full-duplex design and its baselines.

All designs share one alternating pipeline.  The receive codebook starts as
the quantized center-frequency steering matrix; each round then solves the
transmit subproblem with ``W`` fixed, projects onto the realizable set,
solves the receive subproblem with ``F`` fixed and projects again.  The
designs differ only in which subcarriers enter the objective and which
carry coverage constraints:

=================  ==================  ====================
label              objective           coverage constraints
=================  ==================  ====================
proposed           all K subcarriers   all K subcarriers
narrowband         center only         center only
narrowband_wb      all K subcarriers   center only
=================  ==================  ====================

CBF skips the optimization and quantizes the center-frequency steering
matrices directly.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .array import ArrayGeometry, CoverageGrid, Direction, SubcarrierGrid, steering_tensor
from .channel import ChannelTensor
from .quantize import QuantizationSpec, box_project, is_realizable, project_indices
from .solver import (
    CoverageConstraintSet,
    InfeasibleBudgetError,
    SolverConfig,
    build_quadratic_form,
    solve_subproblem,
    wideband_objective,
)

__all__ = [
    "Label",
    "Codebook",
    "DesignScenario",
    "RoundTrace",
    "design_cbf",
    "design_proposed",
    "design_narrowband",
    "design",
    "save_codebook",
    "load_codebook",
]


class Label(str, enum.Enum):
    PROPOSED = "proposed"
    CBF = "cbf"
    NARROWBAND = "narrowband"
    NARROWBAND_WB = "narrowband_wb"


@dataclass(frozen=True)
class Codebook:
    """``N x M`` weights whose column ``j`` serves ``grid.directions[j]``."""

    weights: np.ndarray
    grid: CoverageGrid
    spec: QuantizationSpec
    label: Label
    metadata: dict = field(default_factory=dict, compare=False)
    realizable: bool = True

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=complex)
        if w.ndim != 2 or w.shape[1] != len(self.grid):
            raise ValueError(f"weights {w.shape} do not match a grid of {len(self.grid)} directions")
        if self.realizable and not is_realizable(self.spec, w):
            raise ValueError("codebook entries are not in the realizable set")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "label", Label(self.label))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        return project_indices(self.spec, self.weights)


@dataclass(frozen=True)
class DesignScenario:
    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    tx_grid: CoverageGrid
    rx_grid: CoverageGrid
    subcarriers: SubcarrierGrid
    channel: ChannelTensor
    spec: QuantizationSpec
    sigma2_tx: float
    sigma2_rx: float
    outer_rounds: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        if self.channel.nt != self.tx_geom.num_elements or self.channel.nr != self.rx_geom.num_elements:
            raise ValueError("channel dimensions do not match the array geometries")
        if self.channel.num_subcarriers != self.subcarriers.num_subcarriers:
            raise ValueError("channel and subcarrier grid disagree on K")
        if self.sigma2_tx < 0 or self.sigma2_rx < 0:
            raise ValueError("coverage budgets must be >= 0")
        if self.outer_rounds < 1:
            raise ValueError("outer_rounds must be >= 1")

    @classmethod
    def with_budget_db(cls, sigma2_db: float, **kwargs) -> "DesignScenario":
        """Same budget on both sides, given in dB."""
        s = float(10.0 ** (sigma2_db / 10.0))
        return cls(sigma2_tx=s, sigma2_rx=s, **kwargs)

    @property
    def center_index(self) -> int:
        return self.subcarriers.center_index

    def steering_tx(self) -> np.ndarray:
        return steering_tensor(self.tx_geom, self.tx_grid, self.subcarriers.frequencies)

    def steering_rx(self) -> np.ndarray:
        return steering_tensor(self.rx_geom, self.rx_grid, self.subcarriers.frequencies)


@dataclass
class RoundTrace:
    round: int
    objective_relaxed_f: float  # after the F solve, before projecting F
    objective_projected_f: float
    objective_relaxed_w: float
    objective_projected_w: float
    violation_tx_relaxed: float
    violation_tx_projected: float
    violation_rx_relaxed: float
    violation_rx_projected: float
    converged_tx: bool
    converged_rx: bool
    iterations_tx: int
    iterations_rx: int


def _quantize(spec: QuantizationSpec, x: np.ndarray) -> np.ndarray:
    q, p = project_indices(spec, box_project(x))
    return spec.value(q, p)


def design_cbf(scenario: DesignScenario) -> tuple[Codebook, Codebook]:
    k0 = scenario.center_index
    f = _quantize(scenario.spec, scenario.steering_tx()[k0])
    w = _quantize(scenario.spec, scenario.steering_rx()[k0])
    return (Codebook(f, scenario.tx_grid, scenario.spec, Label.CBF),
            Codebook(w, scenario.rx_grid, scenario.spec, Label.CBF))


def _alternate(
    scenario: DesignScenario,
    label: Label,
    objective_subcarriers: Sequence[int] | None,
    constraint_subcarriers: Sequence[int] | None,
    project: bool,
) -> tuple[Codebook, Codebook, list[RoundTrace]]:
    spec = scenario.spec
    k0 = scenario.center_index
    a_tx = scenario.steering_tx()
    a_rx = scenario.steering_rx()
    cons_sel = slice(None) if constraint_subcarriers is None else list(constraint_subcarriers)
    cons_tx = CoverageConstraintSet(a_tx[cons_sel], scenario.sigma2_tx)
    cons_rx = CoverageConstraintSet(a_rx[cons_sel], scenario.sigma2_rx)
    h = scenario.channel

    w = _quantize(spec, a_rx[k0])
    f = box_project(_quantize(spec, a_tx[k0]))
    trace: list[RoundTrace] = []
    for rnd in range(1, scenario.outer_rounds + 1):
        form_f = build_quadratic_form(h, w, "for-F", objective_subcarriers)
        try:
            rep_f = solve_subproblem(form_f, cons_tx, scenario.solver, warm_start=box_project(f))
        except InfeasibleBudgetError as exc:
            raise InfeasibleBudgetError(f"{label.value} round {rnd}, transmit side: {exc}", exc.violation) from exc
        f_relaxed = rep_f.solution
        f = _quantize(spec, f_relaxed) if project else f_relaxed
        obj_f_rel = wideband_objective(h, f_relaxed, w)
        obj_f_proj = wideband_objective(h, f, w)

        form_w = build_quadratic_form(h, f, "for-W", objective_subcarriers)
        try:
            rep_w = solve_subproblem(form_w, cons_rx, scenario.solver, warm_start=box_project(w))
        except InfeasibleBudgetError as exc:
            raise InfeasibleBudgetError(f"{label.value} round {rnd}, receive side: {exc}", exc.violation) from exc
        w_relaxed = rep_w.solution
        w = _quantize(spec, w_relaxed) if project else w_relaxed

        trace.append(RoundTrace(
            round=rnd,
            objective_relaxed_f=obj_f_rel,
            objective_projected_f=obj_f_proj,
            objective_relaxed_w=wideband_objective(h, f, w_relaxed),
            objective_projected_w=wideband_objective(h, f, w),
            violation_tx_relaxed=rep_f.violation,
            violation_tx_projected=cons_tx.relative_violation(f),
            violation_rx_relaxed=rep_w.violation,
            violation_rx_projected=cons_rx.relative_violation(w),
            converged_tx=rep_f.converged,
            converged_rx=rep_w.converged,
            iterations_tx=rep_f.inner_iterations,
            iterations_rx=rep_w.inner_iterations,
        ))

    meta = {"sigma2_tx": scenario.sigma2_tx, "sigma2_rx": scenario.sigma2_rx,
            "outer_rounds": scenario.outer_rounds,
            "iterations": sum(t.iterations_tx + t.iterations_rx for t in trace)}
    return (Codebook(f, scenario.tx_grid, spec, label, dict(meta), realizable=project),
            Codebook(w, scenario.rx_grid, spec, label, dict(meta), realizable=project),
            trace)


def design_proposed(scenario: DesignScenario, project: bool = True) -> tuple[Codebook, Codebook, list[RoundTrace]]:
    """Wideband objective with coverage constrained on every subcarrier.

    ``project=False`` keeps the relaxed (unquantized) iterates; meant for
    analysis and tests only.
    """
    return _alternate(scenario, Label.PROPOSED, None, None, project)


def design_narrowband(scenario: DesignScenario, wide_objective: bool = False,
                      project: bool = True) -> tuple[Codebook, Codebook, list[RoundTrace]]:
    """Center-frequency coverage constraints; objective on the center
    subcarrier only, or on all subcarriers when ``wide_objective``."""
    k0 = [scenario.center_index]
    label = Label.NARROWBAND_WB if wide_objective else Label.NARROWBAND
    return _alternate(scenario, label, None if wide_objective else k0, k0, project)


def design(scenario: DesignScenario, label: Label | str) -> tuple[Codebook, Codebook]:
    """Dispatch by label; returns just the codebook pair."""
    label = Label(label)
    if label is Label.CBF:
        return design_cbf(scenario)
    if label is Label.PROPOSED:
        f, w, _ = design_proposed(scenario)
    else:
        f, w, _ = design_narrowband(scenario, wide_objective=label is Label.NARROWBAND_WB)
    return f, w


def codebook_to_dict(cb: Codebook) -> dict:
    q, p = cb.indices()
    return {
        "label": cb.label.value,
        "n": cb.n,
        "m": cb.m,
        "quantization": {"phase_bits": cb.spec.phase_bits, "amp_bits": cb.spec.amp_bits,
                         "amp_step_db": cb.spec.amp_step_db},
        "grid": [{"az_deg": round(az, 12), "el_deg": round(el, 12)}
                 for az, el in (d.degrees for d in cb.grid.directions)],
        "weights": [[{"q_amp": int(q[i, j]), "p_phase": int(p[i, j])} for j in range(cb.m)]
                    for i in range(cb.n)],
    }


def codebook_from_dict(data: dict) -> Codebook:
    try:
        quant = data["quantization"]
        spec = QuantizationSpec(int(quant["phase_bits"]), int(quant["amp_bits"]), float(quant["amp_step_db"]))
        grid = CoverageGrid(tuple(Direction(math.radians(g["az_deg"]), math.radians(g["el_deg"]))
                                  for g in data["grid"]))
        n, m = int(data["n"]), int(data["m"])
        q = np.array([[e["q_amp"] for e in row] for row in data["weights"]], dtype=int).reshape(n, m)
        p = np.array([[e["p_phase"] for e in row] for row in data["weights"]], dtype=int).reshape(n, m)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed codebook document: {exc}") from exc
    if q.min() < 0 or q.max() >= len(spec.amplitudes) or p.min() < 0 or p.max() >= len(spec.phases):
        raise ValueError("quantization index out of range")
    return Codebook(spec.value(q, p), grid, spec, Label(data["label"]))


def save_codebook(cb: Codebook, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(codebook_to_dict(cb), fh, separators=(",", ":"))
        fh.write("\n")


def load_codebook(path: str | os.PathLike) -> Codebook:
    with open(path) as fh:
        return codebook_from_dict(json.load(fh))
