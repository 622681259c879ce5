"""Cycle-level simulation of a Program on a HardwareConfig.

Pipeline model (deliberately simple so the static block timing can mirror it
term for term): in-order, up to ``width`` instructions issue per cycle within
one basic block; the second slot is blocked by a register dependence, a
second memory op (one port) or a control-flow instruction (those always issue
alone). ``mul`` charges its extra latency statically, as does the load-use
bubble when the consumer directly follows the load. Taken control transfers
redirect the fetch for a fixed 2 cycles. Instruction fetch walks the
compressed address map when a compression layout is given: one I-cache access
per fetched 32-bit word, and each encoding word stalls for the dictionary
latency before expanding into its group members.

Data accesses route to the SPM when a placement map covers the address, else
to the D-cache (write-back, write-allocate) with DRAM fills and writebacks
counted per line. Stores into the output window bypass the hierarchy and are
recorded as program output. All timing-irrelevant state lives in one flat
word store, so emulated transforms can never change architectural results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import compress, isa
from .cache import EVICTED_DIRTY, HIT, CacheModel
from .errors import CycleLimitExceeded, MemoryFault, SimError
from .hw import BRANCH_REDIRECT_CYCLES, HardwareConfig, PipelineConfig
from .isa import Opcode
from .program import BasicBlock, EdgeKind, Program

STACK_RANGE = (isa.STACK_BASE, isa.STACK_TOP)
OUT_RANGE = (isa.OUT_BASE, isa.OUT_BASE + isa.OUT_SIZE)


@dataclass
class CacheCounters:
    reads: int = 0
    writes: int = 0
    hits: int = 0
    misses: int = 0
    read_misses_dirty: int = 0
    write_misses_dirty: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Counters:
    """The full counter set a run produces (feeds the energy model)."""

    icache: CacheCounters = field(default_factory=CacheCounters)
    dcache: CacheCounters | None = None
    spm_reads: int = 0
    spm_writes: int = 0
    spm_hits: int = 0
    spm_fails: int = 0
    dram_reads: int = 0
    dram_writes: int = 0
    executed: int = 0
    encoding_fetches: int = 0

    def component_accesses(self) -> dict[str, tuple[int, int]]:
        """(reads, writes) per memory component, for the energy formula."""
        out = {"icache": (self.icache.reads, self.icache.writes)}
        if self.dcache is not None:
            out["dcache"] = (self.dcache.reads, self.dcache.writes)
        if self.spm_reads or self.spm_writes or self.spm_hits or self.spm_fails:
            out["spm"] = (self.spm_reads, self.spm_writes)
        out["dram"] = (self.dram_reads, self.dram_writes)
        return out

    def to_dict(self) -> dict:
        d = {
            "icache": self.icache.to_dict(),
            "spm_reads": self.spm_reads,
            "spm_writes": self.spm_writes,
            "spm_hits": self.spm_hits,
            "spm_fails": self.spm_fails,
            "dram_reads": self.dram_reads,
            "dram_writes": self.dram_writes,
            "executed": self.executed,
            "encoding_fetches": self.encoding_fetches,
        }
        if self.dcache is not None:
            d["dcache"] = self.dcache.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "Counters":
        c = Counters(icache=CacheCounters(**d["icache"]))
        if "dcache" in d:
            c.dcache = CacheCounters(**d["dcache"])
        for k in (
            "spm_reads", "spm_writes", "spm_hits", "spm_fails",
            "dram_reads", "dram_writes", "executed", "encoding_fetches",
        ):
            setattr(c, k, d.get(k, 0))
        return c


@dataclass
class TraceRecord:
    index: int
    kind: str  # "R" or "W"
    address: int
    size: int
    symbol: str


class AccessTrace:
    """Ordered data-access records; one `index,kind,addr_hex,size,symbol` line each."""

    def __init__(self, records: list[TraceRecord] | None = None):
        self.records: list[TraceRecord] = records or []

    def append(self, kind: str, address: int, symbol: str) -> None:
        self.records.append(TraceRecord(len(self.records), kind, address, 4, symbol))

    def save(self, path: str | Path) -> None:
        lines = [
            f"{r.index},{r.kind},0x{r.address:x},{r.size},{r.symbol}"
            for r in self.records
        ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

    @staticmethod
    def load(path: str | Path) -> "AccessTrace":
        records = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            idx, kind, addr, size, symbol = line.split(",")
            records.append(TraceRecord(int(idx), kind, int(addr, 16), int(size), symbol))
        return AccessTrace(records)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class Instrumentation:
    block_counts: dict[int, int] = field(default_factory=dict)
    edge_counts: dict[int, int] = field(default_factory=dict)  # edge id -> count
    block_cycles: dict[int, int] = field(default_factory=dict)
    block_max_cycles: dict[int, int] = field(default_factory=dict)
    # site -> [hits, misses]; I-fetch sites keyed by fetch word address,
    # D sites keyed by instruction address (cache-routed accesses only).
    ifetch_outcomes: dict[int, list[int]] = field(default_factory=dict)
    dsite_outcomes: dict[int, list[int]] = field(default_factory=dict)


@dataclass
class SimResult:
    cycles: int
    counters: Counters
    registers: list[int]
    memory: dict[int, int]
    output: list[int]
    exec_counts: dict[int, int]
    trace: AccessTrace | None = None
    instr: Instrumentation | None = None

    def to_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "counters": self.counters.to_dict(),
            "registers": list(self.registers),
            "memory": {f"0x{a:x}": v for a, v in sorted(self.memory.items())},
            "output": list(self.output),
            "exec_counts": {f"0x{a:x}": n for a, n in sorted(self.exec_counts.items())},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


@dataclass
class SimOptions:
    placement: object | None = None  # anything with .symbols (or a plain set)
    layout: object | None = None  # compress.CompressionLayout
    record_trace: bool = False
    input_data: dict[str, list[int]] | None = None
    cycle_limit: int = 10_000_000
    instrument: bool = False


def placed_symbol_names(placement: object | None) -> set[str]:
    if placement is None:
        return set()
    if isinstance(placement, (set, frozenset)):
        return set(placement)
    return set(placement.symbols)


def issue_cycles(instrs: list, pipeline: PipelineConfig) -> int:
    """Static issue cost of a straight-line instruction sequence.

    Greedy dual-issue within the sequence; control flow issues alone; one
    memory port; RAW breaks a pair. mul and load-use costs are charged
    statically so simulation and block timing agree by construction.
    """
    n = len(instrs)
    cycles = 0
    i = 0
    while i < n:
        ins = instrs[i]
        if pipeline.width >= 2 and not ins.is_control and i + 1 < n:
            nxt = instrs[i + 1]
            pairable = (
                not nxt.is_control
                and not (ins.is_mem and nxt.is_mem)
                and not (ins.writes() & nxt.reads())
                and not (ins.writes() & nxt.writes())
            )
            if pairable:
                cycles += 1
                i += 2
                continue
        cycles += 1
        i += 1
    for k, ins in enumerate(instrs):
        if ins.opcode == Opcode.MUL:
            cycles += pipeline.mul_latency - 1
        if (
            ins.opcode == Opcode.LW
            and k + 1 < n
            and ins.rd in instrs[k + 1].reads()
        ):
            cycles += pipeline.load_use_penalty
    return cycles


class _Memory:
    """Flat word store plus region classification."""

    def __init__(self, prog: Program, input_data: dict[str, list[int]] | None):
        self.prog = prog
        self.words = prog.initial_memory()
        self.data_lo = prog.data_base
        self.data_hi = max(
            (s.base + s.size for s in prog.data_symbols), default=prog.data_base
        )
        if input_data:
            for name, words in input_data.items():
                sym = prog.symbol(name)
                if len(words) * isa.WORD_SIZE > sym.size:
                    raise SimError(f"input for '{name}' exceeds its size")
                for i, w in enumerate(words):
                    self.words[sym.base + i * isa.WORD_SIZE] = isa.to_u32(w)

    def region(self, addr: int) -> str:
        if self.data_lo <= addr < self.data_hi:
            return "data"
        if STACK_RANGE[0] <= addr < STACK_RANGE[1]:
            return "stack"
        if OUT_RANGE[0] <= addr < OUT_RANGE[1]:
            return "out"
        return "bad"

    def load(self, addr: int) -> int:
        return self.words.get(addr, 0)

    def store(self, addr: int, value: int) -> None:
        self.words[addr] = value


def simulate(prog: Program, hw: HardwareConfig, options: SimOptions | None = None) -> SimResult:
    opts = options or SimOptions()
    if not prog.blocks:
        raise SimError("program has no CFG; run build_cfg first")
    if opts.layout is not None and not hw.pipeline.decompression_stage:
        raise SimError("compression layout given but pipeline has no decompression stage")
    placed = placed_symbol_names(opts.placement)
    if placed and hw.spm is None:
        raise SimError("placement map given but hardware has no SPM")
    placed_ranges = []
    for name in placed:
        sym = prog.symbol(name)
        placed_ranges.append((sym.base, sym.base + sym.size))
    placed_ranges.sort()

    def in_spm(addr: int) -> bool:
        for lo, hi in placed_ranges:
            if lo <= addr < hi:
                return True
            if addr < lo:
                return False
        return False

    mem = _Memory(prog, opts.input_data)
    regs = [0] * isa.NUM_REGS
    icache = CacheModel(hw.icache)
    dcache = CacheModel(hw.dcache) if hw.dcache is not None else None
    counters = Counters(dcache=CacheCounters() if dcache is not None else None)
    output: list[int] = []
    out_words: dict[int, int] = {}
    trace = AccessTrace() if opts.record_trace else None
    exec_counts: dict[int, int] = {}
    inst = Instrumentation() if opts.instrument else None

    layout = opts.layout
    # Per-block static costs and fetch units, derived once.
    binfo: dict[int, tuple[int, list[tuple[int, int]]]] = {}
    for blk in prog.blocks:
        units = compress.fetch_units(blk, layout)
        binfo[blk.id] = (issue_cycles(blk.instrs, hw.pipeline), units)

    i_miss_stall = hw.miss_stall(hw.icache)
    i_fill = hw.fill_accesses(hw.icache)
    if dcache is not None:
        d_miss_stall = hw.miss_stall(hw.dcache)
        d_fill = hw.fill_accesses(hw.dcache)

    edge_lookup: dict[tuple[int, int, EdgeKind], int] = {
        (e.src, e.dst, e.kind): e.id for e in prog.edges
    }
    block_start = {blk.start: blk for blk in prog.blocks}

    def data_access(ins, addr: int, is_write: bool) -> int:
        """Route one data access; returns stall cycles beyond the issue slot."""
        if addr % isa.WORD_SIZE:
            raise MemoryFault(f"unaligned access 0x{addr:x} at 0x{ins.address:x}")
        region = mem.region(addr)
        if region == "bad":
            raise MemoryFault(f"access outside data/stack/out: 0x{addr:x} at 0x{ins.address:x}")
        if region == "out":
            return 0
        sym = prog.find_symbol(addr) if region == "data" else None
        if trace is not None:
            trace.append("W" if is_write else "R", addr, sym.name if sym else "stack")
        if in_spm(addr):
            counters.spm_hits += 1
            if is_write:
                counters.spm_writes += 1
            else:
                counters.spm_reads += 1
            return hw.spm.latency - 1
        if opts.placement is not None:
            counters.spm_fails += 1
        if dcache is None:
            if is_write:
                counters.dram_writes += 1
                return hw.dram.write_latency - 1
            counters.dram_reads += 1
            return hw.dram.read_latency - 1
        cc = counters.dcache
        if is_write:
            cc.writes += 1
        else:
            cc.reads += 1
        flags = dcache.access(addr, is_write)
        stall = hw.dcache.hit_latency - 1
        if flags & HIT:
            cc.hits += 1
            if inst is not None:
                inst.dsite_outcomes.setdefault(ins.address, [0, 0])[0] += 1
        else:
            cc.misses += 1
            counters.dram_reads += d_fill
            if flags & EVICTED_DIRTY:
                counters.dram_writes += d_fill
                if is_write:
                    cc.write_misses_dirty += 1
                else:
                    cc.read_misses_dirty += 1
            stall += d_miss_stall
            if inst is not None:
                inst.dsite_outcomes.setdefault(ins.address, [0, 0])[1] += 1
        return stall

    cur = prog.entry_function.blocks[0]
    cycles = 0
    halted = False
    while True:
        blk_issue, units = binfo[cur.id]
        c = blk_issue
        for faddr, n_covered in units:
            counters.icache.reads += 1
            flags = icache.access(faddr, False)
            if flags & HIT:
                counters.icache.hits += 1
                if inst is not None:
                    inst.ifetch_outcomes.setdefault(faddr, [0, 0])[0] += 1
            else:
                counters.icache.misses += 1
                counters.dram_reads += i_fill
                c += i_miss_stall
                if inst is not None:
                    inst.ifetch_outcomes.setdefault(faddr, [0, 0])[1] += 1
            if n_covered > 1:
                counters.encoding_fetches += 1
                c += hw.pipeline.dict_latency

        taken = False
        next_block: BasicBlock | None = None
        edge_kind: EdgeKind | None = None
        for ins in cur.instrs:
            counters.executed += 1
            exec_counts[ins.address] = exec_counts.get(ins.address, 0) + 1
            op = ins.opcode
            if op in isa.ALU_OPS:
                a, b = regs[ins.rs1], regs[ins.rs2]
                if op == Opcode.ADD:
                    v = a + b
                elif op == Opcode.SUB:
                    v = a - b
                elif op == Opcode.MUL:
                    v = a * b
                elif op == Opcode.AND:
                    v = a & b
                elif op == Opcode.OR:
                    v = a | b
                elif op == Opcode.XOR:
                    v = a ^ b
                elif op == Opcode.SLL:
                    v = a << (b & 31)
                else:
                    v = a >> (b & 31)
                if ins.rd:
                    regs[ins.rd] = isa.to_u32(v)
            elif op == Opcode.LI:
                if ins.rd:
                    regs[ins.rd] = isa.to_u32(ins.imm if ins.target else isa.sext16(ins.imm))
            elif op == Opcode.LW:
                addr = isa.to_u32(regs[ins.rs1] + ins.imm)
                c += data_access(ins, addr, False)
                value = out_words.get(addr, 0) if mem.region(addr) == "out" else mem.load(addr)
                if ins.rd:
                    regs[ins.rd] = value
            elif op == Opcode.SW:
                addr = isa.to_u32(regs[ins.rs1] + ins.imm)
                c += data_access(ins, addr, True)
                if mem.region(addr) == "out":
                    out_words[addr] = regs[ins.rs2]
                    output.append(regs[ins.rs2])
                else:
                    mem.store(addr, regs[ins.rs2])
            elif op in isa.BRANCH_OPS:
                a, b = regs[ins.rs1], regs[ins.rs2]
                if op == Opcode.BEQ:
                    taken = a == b
                elif op == Opcode.BNE:
                    taken = a != b
                elif op == Opcode.BLT:
                    taken = isa.to_s32(a) < isa.to_s32(b)
                else:
                    taken = isa.to_s32(a) >= isa.to_s32(b)
                if taken:
                    next_block = block_start[ins.imm * isa.WORD_SIZE]
                    edge_kind = EdgeKind.TAKEN
                else:
                    edge_kind = EdgeKind.FALLTHROUGH
            elif op == Opcode.J:
                taken = True
                next_block = block_start[ins.imm * isa.WORD_SIZE]
                edge_kind = EdgeKind.JUMP
            elif op == Opcode.JAL:
                taken = True
                regs[15] = ins.address + isa.WORD_SIZE
                next_block = block_start[ins.imm * isa.WORD_SIZE]
                edge_kind = EdgeKind.CALL
            elif op == Opcode.JR:
                taken = True
                ra = regs[ins.rs1]
                if ra not in block_start:
                    raise SimError(f"jr to 0x{ra:x}: not a block entry")
                next_block = block_start[ra]
                edge_kind = EdgeKind.RETURN
            elif op == Opcode.HALT:
                halted = True
            # NOP: nothing.

        if taken:
            c += BRANCH_REDIRECT_CYCLES
        cycles += c
        if inst is not None:
            inst.block_counts[cur.id] = inst.block_counts.get(cur.id, 0) + 1
            inst.block_cycles[cur.id] = inst.block_cycles.get(cur.id, 0) + c
            if c > inst.block_max_cycles.get(cur.id, 0):
                inst.block_max_cycles[cur.id] = c

        if halted:
            break
        if cycles > opts.cycle_limit:
            raise CycleLimitExceeded(f"cycle limit {opts.cycle_limit} exceeded")

        if next_block is None:
            # Fall-through (plain block end or untaken branch).
            nxt_addr = cur.instrs[-1].address + isa.WORD_SIZE
            if nxt_addr not in block_start:
                raise SimError(f"execution fell off the end at 0x{nxt_addr:x}")
            next_block = block_start[nxt_addr]
            if edge_kind is None:
                edge_kind = EdgeKind.FALLTHROUGH
        if inst is not None:
            eid = edge_lookup.get((cur.id, next_block.id, edge_kind))
            if eid is not None:
                inst.edge_counts[eid] = inst.edge_counts.get(eid, 0) + 1
        cur = next_block

    return SimResult(
        cycles=cycles,
        counters=counters,
        registers=list(regs),
        memory=dict(mem.words),
        output=output,
        exec_counts=exec_counts,
        trace=trace,
        instr=inst,
    )
