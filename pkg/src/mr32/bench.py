"""Access to the shipped benchmark suite, its inputs, scripts and configs.

Benchmarks live as package data: ``bench/<name>.masm`` sources, per-benchmark
input vectors ``bench/inputs/<name>/<id>.json`` (the ``profile`` vector
drives pre-runs), transform scripts ``bench/scripts/*.xfs`` and the two
hardware preset files. Every resolver also accepts a filesystem path, so the
CLI works on user files and shipped content alike.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from . import asm, cfg
from .errors import Mr32Error
from .hw import resolve_hw  # re-exported for the orchestrator  # noqa: F401
from .program import Program

BENCHMARKS = ("adpcm_like", "compress_like", "helico_like", "skewed")
PROFILE_INPUT = "profile"
EVAL_INPUTS = ("in1", "in2", "in3")


def _bench_root():
    return resources.files("mr32") / "bench"


def source_path(name_or_path: str):
    p = Path(name_or_path)
    if p.suffix == ".masm" and p.exists():
        return p
    candidate = _bench_root() / f"{name_or_path}.masm"
    if candidate.is_file():
        return candidate
    raise Mr32Error(f"no benchmark or file '{name_or_path}'")


def load_source(name_or_path: str) -> str:
    return source_path(name_or_path).read_text()


def load_program(name_or_path: str) -> Program:
    prog = asm.assemble(load_source(name_or_path))
    cfg.build_cfg(prog)
    return prog


def load_input(benchmark: str, input_id: str | None) -> dict | None:
    if input_id in (None, "none"):
        return None
    p = Path(str(input_id))
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    bench_name = Path(benchmark).stem
    candidate = _bench_root() / "inputs" / bench_name / f"{input_id}.json"
    if candidate.is_file():
        return json.loads(candidate.read_text())
    raise Mr32Error(f"no input '{input_id}' for benchmark '{benchmark}'")


def input_ids(benchmark: str) -> list[str]:
    bench_name = Path(benchmark).stem
    d = _bench_root() / "inputs" / bench_name
    if not d.is_dir():
        return []
    return sorted(f.name[:-5] for f in d.iterdir() if f.name.endswith(".json"))


def script_text(name_or_path: str) -> str:
    p = Path(name_or_path)
    if p.suffix == ".xfs" and p.exists():
        return p.read_text()
    candidate = _bench_root() / "scripts" / f"{name_or_path}.xfs"
    if candidate.is_file():
        return candidate.read_text()
    raise Mr32Error(f"no transform script '{name_or_path}'")


def script_names() -> list[str]:
    d = _bench_root() / "scripts"
    return sorted(f.name[:-4] for f in d.iterdir() if f.name.endswith(".xfs"))
