"""Worst-case basic-block timing.

The cost model is the simulator's, with worst-case choices substituted term
by term: the same static issue/pairing function, a full miss stall for every
NOT_CLASSIFIED access, zero extra for ALWAYS_HIT, zero here for PERSISTENT
(their misses are charged through the ILP's per-scope miss variables), the
dictionary stall per encoding word, and the taken-branch redirect whenever
the terminator can redirect. Every term is >= the simulator's corresponding
cost, which is what makes the end-to-end bound sound.
"""

from __future__ import annotations

from .. import compress, isa
from ..hw import BRANCH_REDIRECT_CYCLES, HardwareConfig
from ..isa import Kind, Opcode
from ..program import BasicBlock
from .cacheanalysis import NOT_CLASSIFIED, CacheClass
from ..sim import issue_cycles


def block_time(
    blk: BasicBlock,
    hw: HardwareConfig,
    iclass: dict[int, CacheClass],
    dclass: dict[int, CacheClass],
    routes: dict[int, str],
    layout=None,
) -> int:
    t = issue_cycles(blk.instrs, hw.pipeline)
    for faddr, covered in compress.fetch_units(blk, layout):
        cls = iclass.get(faddr)
        if cls is None or cls.kind == NOT_CLASSIFIED:
            t += hw.miss_stall(hw.icache)
        if covered > 1:
            t += hw.pipeline.dict_latency
    for ins in blk.instrs:
        if not ins.is_mem:
            continue
        route = routes.get(ins.address, "cache")
        if route == "spm":
            t += hw.spm.latency - 1
        elif route == "out":
            pass
        elif route == "dram":
            lat = hw.dram.read_latency if ins.opcode == Opcode.LW else hw.dram.write_latency
            t += max(lat - 1, 0)
        else:
            t += hw.dcache.hit_latency - 1
            cls = dclass.get(ins.address)
            if cls is None or cls.kind == NOT_CLASSIFIED:
                t += hw.miss_stall(hw.dcache)
    if blk.terminator.kind in (Kind.BRANCH, Kind.JUMP, Kind.CALL, Kind.RETURN):
        t += BRANCH_REDIRECT_CYCLES
    return t
