"""Energy estimation: counters x unit costs, summed over memory components.

Pure formula evaluation: E_component = N_read * E_read + N_write * E_write,
E_total = sum over the components present in the counters. Miss costs are
already reflected in the DRAM counters by the simulator, so nothing is
double-counted here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .hw import EnergyTable
from .sim import Counters


@dataclass
class ComponentEnergy:
    reads: int
    writes: int
    energy_pj: float


@dataclass
class EnergyReport:
    components: dict[str, ComponentEnergy] = field(default_factory=dict)
    total_pj: float = 0.0

    def breakdown(self) -> dict[str, float]:
        """Share of total per component (0..1); empty when total is zero."""
        if not self.total_pj:
            return {}
        return {k: v.energy_pj / self.total_pj for k, v in self.components.items()}

    def to_dict(self) -> dict:
        return {
            "total_pj": self.total_pj,
            "components": {
                k: {"reads": v.reads, "writes": v.writes, "energy_pj": v.energy_pj}
                for k, v in sorted(self.components.items())
            },
            "breakdown": {k: v for k, v in sorted(self.breakdown().items())},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


def estimate_energy(counters: Counters, table: EnergyTable) -> EnergyReport:
    report = EnergyReport()
    for component, (reads, writes) in counters.component_accesses().items():
        if component not in table.entries:
            raise ConfigError(f"counters reference '{component}' missing from energy table")
        e = reads * table.read_cost(component) + writes * table.write_cost(component)
        report.components[component] = ComponentEnergy(reads, writes, e)
        report.total_pj += e
    return report
