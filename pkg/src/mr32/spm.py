"""Static SPM data-placement strategies driven by a recorded access trace.

Three strategies build a placement map over whole data symbols:
first-used (first-come first-served scan of the trace), small-size-first
(ascending size) and high-frequency (descending access count). All three
skip a symbol that no longer fits and keep scanning, so they stay mutually
comparable. The map is static for the whole run; re-routing happens in the
simulator and the WCET analysis, never by rewriting the program, so text
bytes are untouched by construction.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from . import isa
from .errors import Mr32Error
from .program import Program
from .sim import AccessTrace

STRATEGIES = ("first_used", "small_size_first", "high_frequency")

_NO_USE = float("inf")


@dataclass
class DataObject:
    name: str
    size: int
    first_use: float = _NO_USE  # trace index of first touching record
    access_count: int = 0


@dataclass
class PlacementMap:
    strategy: str
    spm_size: int
    symbols: set[str] = field(default_factory=set)
    trace_digest: str = ""
    occupancy: int = 0

    def save(self, path: str | Path) -> None:
        lines = [
            f"# strategy: {self.strategy}",
            f"# spm_size: {self.spm_size}",
            f"# trace_digest: {self.trace_digest}",
        ]
        lines += sorted(self.symbols)
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def load(path: str | Path) -> "PlacementMap":
        pm = PlacementMap(strategy="unknown", spm_size=0)
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                key = key.strip()
                value = value.strip()
                if key == "strategy":
                    pm.strategy = value
                elif key == "spm_size":
                    pm.spm_size = int(value)
                elif key == "trace_digest":
                    pm.trace_digest = value
            else:
                pm.symbols.add(line)
        return pm


def trace_digest(trace: AccessTrace) -> str:
    h = hashlib.sha256()
    for r in trace.records:
        h.update(f"{r.index},{r.kind},{r.address:x},{r.size},{r.symbol}\n".encode())
    return h.hexdigest()


def build_objects(prog: Program, trace: AccessTrace) -> list[DataObject]:
    """One object per data symbol, with counts from address-range membership.

    Records resolving to no symbol (and not to the stack) are aggregated
    under an "unknown" object that is never placeable.
    """
    objects = {s.name: DataObject(s.name, s.size) for s in prog.data_symbols}
    unknown = DataObject("unknown", 0)
    for r in trace.records:
        sym = prog.find_symbol(r.address)
        if sym is not None:
            obj = objects[sym.name]
        elif isa.STACK_BASE <= r.address < isa.STACK_TOP:
            continue
        else:
            obj = unknown
        obj.access_count += 1
        if obj.first_use is _NO_USE:
            obj.first_use = r.index
    out = list(objects.values())
    if unknown.access_count:
        out.append(unknown)
    return out


def _placeable(obj: DataObject) -> bool:
    return obj.name not in ("unknown", "stack") and obj.size > 0


def place_first_used(
    objects: list[DataObject], trace: AccessTrace, spm_size: int
) -> PlacementMap:
    """Scan the trace; place each object on first touch if it still fits."""
    by_name = {o.name: o for o in objects}
    pm = PlacementMap(
        strategy="first_used", spm_size=spm_size, trace_digest=trace_digest(trace)
    )
    free = spm_size
    seen: set[str] = set()
    for r in trace.records:
        obj = by_name.get(r.symbol)
        if obj is None or obj.name in seen or not _placeable(obj):
            continue
        seen.add(obj.name)
        if obj.size <= free:
            pm.symbols.add(obj.name)
            free -= obj.size
    pm.occupancy = spm_size - free
    return pm


def _greedy(order: list[DataObject], pm: PlacementMap) -> PlacementMap:
    free = pm.spm_size
    for obj in order:
        if _placeable(obj) and obj.size <= free:
            pm.symbols.add(obj.name)
            free -= obj.size
    pm.occupancy = pm.spm_size - free
    return pm


def place_small_first(objects: list[DataObject], spm_size: int) -> PlacementMap:
    """Ascending size; ties by first use then name."""
    order = sorted(objects, key=lambda o: (o.size, o.first_use, o.name))
    return _greedy(order, PlacementMap(strategy="small_size_first", spm_size=spm_size))


def place_high_frequency(objects: list[DataObject], spm_size: int) -> PlacementMap:
    """Descending access count; ties by smaller size then first use then name."""
    order = sorted(objects, key=lambda o: (-o.access_count, o.size, o.first_use, o.name))
    return _greedy(order, PlacementMap(strategy="high_frequency", spm_size=spm_size))


def build_placement(
    prog: Program, trace: AccessTrace, strategy: str, spm_size: int
) -> PlacementMap:
    objects = build_objects(prog, trace)
    if strategy == "first_used":
        return place_first_used(objects, trace, spm_size)
    if strategy == "small_size_first":
        pm = place_small_first(objects, spm_size)
    elif strategy == "high_frequency":
        pm = place_high_frequency(objects, spm_size)
    else:
        raise Mr32Error(f"unknown placement strategy '{strategy}'")
    pm.trace_digest = trace_digest(trace)
    return pm
