"""Experiment orchestration: one point = benchmark x hardware x transform x
input, evaluated on all four criteria (code size, energy, ACET, WCET).

Transform specs are strings: ``none``, ``place:<strategy>``, ``compress:<P>``
or ``script:<file-or-shipped-name>``. Placement and compression need a
pre-run on the benchmark's profiling input: the trace feeds the placement
strategies, the execution counts feed the dictionary. Records carry no
timestamps, so re-running a point reproduces its report byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from . import bench, cfg, compress, spm, transform
from .energy import estimate_energy
from .errors import Mr32Error
from .hw import HardwareConfig
from .program import Program
from .sim import SimOptions, simulate
from .wcet import compute_wcet

SWEEP_CSV_HEADER = ["param", "code_size", "energy_pj", "acet_cycles", "wcet_cycles"]


@dataclass
class ExperimentPoint:
    benchmark: str  # shipped name or .masm path
    hw_name: str
    transform_spec: str
    input_id: str  # shipped input name or JSON path


@dataclass
class CriteriaRecord:
    point: ExperimentPoint
    code_size: int
    code_size_with_dictionary: int
    energy_pj: float
    energy_components: dict
    acet_cycles: int
    wcet_cycles: int | None
    wcet_skipped_reason: str | None
    counters: dict

    def to_dict(self) -> dict:
        return {
            "benchmark": self.point.benchmark,
            "hw": self.point.hw_name,
            "transform": self.point.transform_spec,
            "input": self.point.input_id,
            "code_size": self.code_size,
            "code_size_with_dictionary": self.code_size_with_dictionary,
            "energy_pj": self.energy_pj,
            "energy_components": self.energy_components,
            "acet_cycles": self.acet_cycles,
            "wcet_cycles": self.wcet_cycles,
            "wcet_skipped_reason": self.wcet_skipped_reason,
            "counters": self.counters,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


@dataclass
class PreparedPoint:
    program: Program
    placement: spm.PlacementMap | None
    layout: compress.CompressionLayout | None


def _profile_run(prog: Program, hw: HardwareConfig, input_data, record_trace: bool):
    return simulate(
        prog,
        hw,
        SimOptions(record_trace=record_trace, input_data=input_data),
    )


def prepare_point(
    prog: Program, hw: HardwareConfig, spec: str, profile_input: dict | None
) -> PreparedPoint:
    """Apply a transform spec; pre-runs use the profiling input."""
    if spec == "none":
        return PreparedPoint(prog, None, None)
    kind, _, arg = spec.partition(":")
    if kind == "place":
        if arg not in spm.STRATEGIES:
            raise Mr32Error(f"unknown placement strategy '{arg}'")
        if hw.spm is None:
            raise Mr32Error(f"transform '{spec}' needs hardware with an SPM")
        pre = _profile_run(prog, hw, profile_input, record_trace=True)
        pm = spm.build_placement(prog, pre.trace, arg, hw.spm.size)
        return PreparedPoint(prog, pm, None)
    if kind == "compress":
        p = int(arg)
        pre = _profile_run(prog, hw, profile_input, record_trace=False)
        layout = compress.build_layout(prog, pre, p)
        return PreparedPoint(prog, None, layout)
    if kind == "script":
        text = bench.script_text(arg)
        new_prog = transform.apply_script(prog, transform.parse_script(text))
        return PreparedPoint(new_prog, None, None)
    raise Mr32Error(f"cannot parse transform spec '{spec}'")


def run_point(point: ExperimentPoint) -> CriteriaRecord:
    prog = bench.load_program(point.benchmark)
    hw = bench.resolve_hw(point.hw_name)
    profile_input = bench.load_input(point.benchmark, bench.PROFILE_INPUT)
    input_data = bench.load_input(point.benchmark, point.input_id)

    prepared = prepare_point(prog, hw, point.transform_spec, profile_input)
    prog = prepared.program

    res = simulate(
        prog,
        hw,
        SimOptions(
            placement=prepared.placement,
            layout=prepared.layout,
            input_data=input_data,
        ),
    )
    energy = estimate_energy(res.counters, hw.energy)

    code_size = (
        prepared.layout.compressed_bytes if prepared.layout is not None else prog.text_size
    )
    with_dict = code_size + (
        prepared.layout.dictionary_bytes if prepared.layout is not None else 0
    )

    wcet_cycles = None
    reason = None
    try:
        rep = compute_wcet(prog, hw, placement=prepared.placement, layout=prepared.layout)
        wcet_cycles = rep.wcet
    except Mr32Error as e:
        reason = f"{e.stage}: {e}"

    return CriteriaRecord(
        point=point,
        code_size=code_size,
        code_size_with_dictionary=with_dict,
        energy_pj=energy.total_pj,
        energy_components=energy.to_dict()["components"],
        acet_cycles=res.cycles,
        wcet_cycles=wcet_cycles,
        wcet_skipped_reason=reason,
        counters=res.counters.to_dict(),
    )


def run_sweep(
    benchmark: str,
    hw_name: str,
    param: str,
    grid: list[str],
    input_id: str,
) -> tuple[list[CriteriaRecord], str]:
    """One record per grid point, plus the CSV series for plotting."""
    records = []
    for value in grid:
        if param == "P":
            spec = f"compress:{value}"
        elif param == "placement":
            spec = f"place:{value}" if value != "none" else "none"
        else:
            raise Mr32Error(f"unknown sweep parameter '{param}'")
        records.append(
            run_point(ExperimentPoint(benchmark, hw_name, spec, input_id))
        )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(SWEEP_CSV_HEADER)
    for value, rec in zip(grid, records):
        writer.writerow(
            [value, rec.code_size, rec.energy_pj, rec.acet_cycles, rec.wcet_cycles]
        )
    return records, buf.getvalue()
