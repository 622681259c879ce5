"""Hardware configuration: pipeline, memory geometry/latency, energy table.

Configs load from a JSON file with sections ``pipeline``, ``icache``,
``dcache``, ``spm``, ``dram`` and ``energy.<component>.{read,write}`` (pJ per
access). Two presets mirror the shipped evaluation platform: ``config1``
(1KB 2-way I-cache, 1KB 2-way D-cache) and ``config2`` (same I-cache, 512B
D-cache plus 512B scratchpad). Omitted latency fields take the defaults
below; shipped miss penalties and DRAM latencies are workbench choices, not
measured values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

# Fixed pipeline redirect cost for any taken control transfer.
BRANCH_REDIRECT_CYCLES = 2

_DEFAULTS = {
    "pipeline": {
        "width": 2,
        "decompression_stage": True,
        "dict_latency": 1,
        "load_use_penalty": 1,
        "mul_latency": 3,
    },
    "cache": {"hit_latency": 1, "miss_penalty": 10},
    "spm": {"latency": 1},
    "dram": {"read_latency": 10, "write_latency": 10, "bus_width": 8},
}


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass
class CacheConfig:
    size: int
    assoc: int
    line: int
    hit_latency: int = 1
    miss_penalty: int = 10

    @property
    def sets(self) -> int:
        return self.size // (self.assoc * self.line)

    def validate(self, name: str) -> None:
        for label, v in (("size", self.size), ("assoc", self.assoc), ("line", self.line)):
            if not _is_pow2(v):
                raise ConfigError(f"{name}.{label} = {v} is not a power of two")
        if self.sets < 1 or self.sets * self.assoc * self.line != self.size:
            raise ConfigError(f"{name}: size != sets x assoc x line")
        if self.hit_latency < 1 or self.miss_penalty < 0:
            raise ConfigError(f"{name}: bad latency")


@dataclass
class SpmConfig:
    size: int
    latency: int = 1

    def validate(self) -> None:
        if self.size <= 0:
            raise ConfigError("spm.size must be > 0")
        if self.latency < 1:
            raise ConfigError("spm.latency must be >= 1")


@dataclass
class DramConfig:
    read_latency: int = 10
    write_latency: int = 10
    bus_width: int = 8

    def validate(self) -> None:
        if self.bus_width <= 0 or self.read_latency < 0 or self.write_latency < 0:
            raise ConfigError("bad dram parameters")


@dataclass
class PipelineConfig:
    width: int = 2
    decompression_stage: bool = True
    dict_latency: int = 1
    load_use_penalty: int = 1
    mul_latency: int = 3

    def validate(self) -> None:
        if self.width not in (1, 2):
            raise ConfigError("pipeline.width must be 1 or 2")
        if self.dict_latency < 0 or self.load_use_penalty < 0 or self.mul_latency < 1:
            raise ConfigError("bad pipeline parameters")


@dataclass
class EnergyTable:
    # pJ per access, keyed by component name, each {"read": x, "write": y}.
    entries: dict[str, dict[str, float]] = field(default_factory=dict)

    def read_cost(self, component: str) -> float:
        return self.entries[component]["read"]

    def write_cost(self, component: str) -> float:
        return self.entries[component]["write"]

    def validate(self, components: list[str]) -> None:
        for c in components:
            if c not in self.entries:
                raise ConfigError(f"energy table missing component '{c}'")
            for kind in ("read", "write"):
                if kind not in self.entries[c]:
                    raise ConfigError(f"energy.{c}.{kind} missing")
                if self.entries[c][kind] < 0:
                    raise ConfigError(f"energy.{c}.{kind} must be >= 0")


@dataclass
class HardwareConfig:
    name: str
    pipeline: PipelineConfig
    icache: CacheConfig
    dcache: CacheConfig | None
    spm: SpmConfig | None
    dram: DramConfig
    energy: EnergyTable

    def validate(self) -> None:
        self.pipeline.validate()
        self.icache.validate("icache")
        if self.dcache is None and self.spm is None:
            raise ConfigError("at least one of dcache/spm must be present")
        if self.dcache is not None:
            self.dcache.validate("dcache")
        if self.spm is not None:
            self.spm.validate()
        self.dram.validate()
        for cache in (self.icache, self.dcache):
            if cache is not None and cache.line % self.dram.bus_width:
                raise ConfigError("cache line must be a multiple of dram.bus_width")
        self.energy.validate(self.components())

    def components(self) -> list[str]:
        out = ["icache"]
        if self.dcache is not None:
            out.append("dcache")
        if self.spm is not None:
            out.append("spm")
        out.append("dram")
        return out

    def fill_accesses(self, cache: CacheConfig) -> int:
        """DRAM accesses needed to move one line (fill or writeback)."""
        return cache.line // self.dram.bus_width

    def miss_stall(self, cache: CacheConfig) -> int:
        """Stall cycles charged for one miss: penalty plus the line fill."""
        return cache.miss_penalty + self.dram.read_latency * self.fill_accesses(cache)

    def to_dict(self) -> dict:
        d: dict = {
            "pipeline": asdict(self.pipeline),
            "icache": asdict(self.icache),
            "dram": asdict(self.dram),
            "energy": {k: dict(v) for k, v in sorted(self.energy.entries.items())},
        }
        if self.dcache is not None:
            d["dcache"] = asdict(self.dcache)
        if self.spm is not None:
            d["spm"] = asdict(self.spm)
        return d


def _cache_from(d: dict, name: str) -> CacheConfig:
    try:
        cfg = CacheConfig(
            size=d["size"],
            assoc=d["assoc"],
            line=d["line"],
            hit_latency=d.get("hit_latency", _DEFAULTS["cache"]["hit_latency"]),
            miss_penalty=d.get("miss_penalty", _DEFAULTS["cache"]["miss_penalty"]),
        )
    except KeyError as e:
        raise ConfigError(f"{name}: missing field {e}") from None
    return cfg


def from_dict(d: dict, name: str = "custom") -> HardwareConfig:
    pd = {**_DEFAULTS["pipeline"], **d.get("pipeline", {})}
    dd = {**_DEFAULTS["dram"], **d.get("dram", {})}
    if "icache" not in d:
        raise ConfigError("config needs an icache section")
    spm = None
    if "spm" in d:
        spm = SpmConfig(
            size=d["spm"]["size"],
            latency=d["spm"].get("latency", _DEFAULTS["spm"]["latency"]),
        )
    hw = HardwareConfig(
        name=d.get("name", name),
        pipeline=PipelineConfig(**pd),
        icache=_cache_from(d["icache"], "icache"),
        dcache=_cache_from(d["dcache"], "dcache") if "dcache" in d else None,
        spm=spm,
        dram=DramConfig(**dd),
        energy=EnergyTable(entries={k: dict(v) for k, v in d.get("energy", {}).items()}),
    )
    hw.validate()
    return hw


def load_hw_config(path: str | Path) -> HardwareConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return from_dict(d, name=path.stem)


def save_hw_config(hw: HardwareConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(hw.to_dict(), indent=2, sort_keys=True) + "\n")


# -- shipped presets ---------------------------------------------------------

_ENERGY_COMMON = {
    "icache": {"read": 30, "write": 30},
    "dram": {"read": 400, "write": 400},
}


def config1() -> HardwareConfig:
    hw = HardwareConfig(
        name="config1",
        pipeline=PipelineConfig(),
        icache=CacheConfig(size=1024, assoc=2, line=16),
        dcache=CacheConfig(size=1024, assoc=2, line=16),
        spm=None,
        dram=DramConfig(),
        energy=EnergyTable(
            entries={**_ENERGY_COMMON, "dcache": {"read": 30, "write": 30}}
        ),
    )
    hw.validate()
    return hw


def config2() -> HardwareConfig:
    hw = HardwareConfig(
        name="config2",
        pipeline=PipelineConfig(),
        icache=CacheConfig(size=1024, assoc=2, line=16),
        dcache=CacheConfig(size=512, assoc=2, line=16),
        spm=SpmConfig(size=512, latency=1),
        dram=DramConfig(),
        energy=EnergyTable(
            entries={
                **_ENERGY_COMMON,
                "dcache": {"read": 22, "write": 22},
                "spm": {"read": 8, "write": 8},
            }
        ),
    )
    hw.validate()
    return hw


PRESETS = {"config1": config1, "config2": config2}


def resolve_hw(spec: str) -> HardwareConfig:
    """A preset name or a path to a JSON config file."""
    if spec in PRESETS:
        return PRESETS[spec]()
    return load_hw_config(spec)
