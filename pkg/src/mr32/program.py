"""Program representation: functions, basic blocks, data symbols, annotations.

A Program owns the instruction lists (one per function), the data segment
layout, flow facts (loop bounds keyed by header label) and a generic
annotation store that analyses hang results on. Instructions are addressed
densely from 0 in declaration order; re-running :meth:`Program.layout` after a
transform reassigns addresses, re-resolves symbolic operands and re-encodes
words.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import isa
from .isa import Instruction, Opcode
from .errors import AsmError


class EdgeKind(Enum):
    TAKEN = "taken"
    FALLTHROUGH = "fallthrough"
    JUMP = "jump"
    CALL = "call"
    RETURN = "return"
    # Summary edge call-block -> post-call block: used for intra-function
    # structure (dominators, loops), never for flow or cache analysis.
    CALLSKIP = "callskip"

    @property
    def is_real(self) -> bool:
        return self is not EdgeKind.CALLSKIP


@dataclass
class Edge:
    id: int
    src: int  # block id
    dst: int
    kind: EdgeKind


@dataclass
class BasicBlock:
    id: int
    func: str
    instrs: list[Instruction] = field(default_factory=list)
    succs: list[Edge] = field(default_factory=list)
    preds: list[Edge] = field(default_factory=list)

    @property
    def start(self) -> int:
        return self.instrs[0].address

    @property
    def terminator(self) -> Instruction:
        return self.instrs[-1]


@dataclass
class DataSymbol:
    name: str
    base: int
    size: int  # bytes
    init_words: list[int] = field(default_factory=list)

    def covers(self, addr: int) -> bool:
        return self.base <= addr < self.base + self.size


@dataclass
class FlowFact:
    label: str
    bound: int  # max iterations per loop entry, >= 1


@dataclass
class Function:
    name: str
    instrs: list[Instruction] = field(default_factory=list)
    blocks: list[BasicBlock] = field(default_factory=list)

    @property
    def entry_block(self) -> BasicBlock:
        return self.blocks[0]


class AnnotationMissing(KeyError):
    """Read of a never-written annotation key (distinct from a stored 0)."""


class Program:
    """An assembled MR32 program, optionally with its CFG built."""

    def __init__(self, data_base: int = isa.DATA_BASE_DEFAULT):
        self.functions: list[Function] = []
        self.data_symbols: list[DataSymbol] = []
        self.data_base = data_base
        self.flow_facts: dict[str, FlowFact] = {}
        self.labels: dict[str, tuple[str, int]] = {}  # label -> (func, index)
        self.blocks: list[BasicBlock] = []
        self.edges: list[Edge] = []
        self._annotations: dict[tuple[object, str], object] = {}
        self._addr_index: dict[int, Instruction] = {}
        self._block_of_addr: dict[int, BasicBlock] = {}
        self._symbols_sorted: list[DataSymbol] = []

    # -- iteration helpers ------------------------------------------------

    def instructions(self):
        for fn in self.functions:
            yield from fn.instrs

    def function(self, name: str) -> Function:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)

    @property
    def entry_function(self) -> Function:
        return self.functions[0]

    @property
    def text_size(self) -> int:
        return sum(len(fn.instrs) for fn in self.functions) * isa.WORD_SIZE

    def instr_at(self, addr: int) -> Instruction:
        return self._addr_index[addr]

    def block_at(self, addr: int) -> BasicBlock:
        return self._block_of_addr[addr]

    # -- layout ------------------------------------------------------------

    def layout(self) -> None:
        """Assign text addresses, lay out data, resolve symbols, encode words."""
        self.labels = {}
        addr = 0
        for fn in self.functions:
            if not fn.instrs:
                raise AsmError(f"function '{fn.name}' is empty")
            for idx, ins in enumerate(fn.instrs):
                ins.address = addr
                for lab in ins.labels:
                    if lab in self.labels:
                        raise AsmError(f"duplicate label '{lab}'")
                    self.labels[lab] = (fn.name, idx)
                addr += isa.WORD_SIZE
        if addr > self.data_base:
            raise AsmError(
                f"text ends at 0x{addr:x}, beyond the data base 0x{self.data_base:x}"
            )
        dbase = self.data_base
        for sym in self.data_symbols:
            sym.base = dbase
            dbase += sym.size
        self._symbols_sorted = sorted(self.data_symbols, key=lambda s: s.base)
        self._resolve()
        self._addr_index = {ins.address: ins for ins in self.instructions()}

    def label_address(self, label: str) -> int:
        if label in self.labels:
            fname, idx = self.labels[label]
            return self.function(fname).instrs[idx].address
        for sym in self.data_symbols:
            if sym.name == label:
                return sym.base
        raise AsmError(f"unresolved label '{label}'")

    def _resolve(self) -> None:
        for fn in self.functions:
            for ins in fn.instrs:
                if ins.target is not None:
                    tgt = self.label_address(ins.target)
                    if ins.opcode in isa.BRANCH_OPS or ins.opcode in (Opcode.J, Opcode.JAL):
                        ins.imm = tgt // isa.WORD_SIZE
                        if not 0 <= ins.imm <= 0xFFFF:
                            raise AsmError(f"branch target out of range: '{ins.target}'")
                    else:
                        # li symbol addresses must survive the 16-bit
                        # sign-extending decode unchanged.
                        ins.imm = tgt
                        if not 0 <= ins.imm <= 0x7FFF:
                            raise AsmError(f"immediate out of range for '{ins.target}'")
                ins.word = isa.encode(ins)

    # -- data symbols -------------------------------------------------------

    def find_symbol(self, addr: int) -> DataSymbol | None:
        import bisect

        syms = self._symbols_sorted
        i = bisect.bisect_right([s.base for s in syms], addr) - 1
        if i >= 0 and syms[i].covers(addr):
            return syms[i]
        return None

    def symbol(self, name: str) -> DataSymbol:
        for sym in self.data_symbols:
            if sym.name == name:
                return sym
        raise KeyError(name)

    def initial_memory(self) -> dict[int, int]:
        """Data segment image before any execution (word-addressed)."""
        mem: dict[int, int] = {}
        for sym in self.data_symbols:
            for i in range(sym.size // isa.WORD_SIZE):
                mem[sym.base + i * isa.WORD_SIZE] = (
                    sym.init_words[i] if i < len(sym.init_words) else 0
                )
        return mem

    # -- annotations ---------------------------------------------------------

    def annotate(self, entity: object, key: str, value: object) -> None:
        self._annotations[(entity, key)] = value

    def get_annotation(self, entity: object, key: str, default: object = AnnotationMissing):
        try:
            return self._annotations[(entity, key)]
        except KeyError:
            if default is AnnotationMissing:
                raise AnnotationMissing((entity, key)) from None
            return default

    def has_annotation(self, entity: object, key: str) -> bool:
        return (entity, key) in self._annotations

    def clear_annotations(self, key: str) -> None:
        for k in [k for k in self._annotations if k[1] == key]:
            del self._annotations[k]

    # -- copying --------------------------------------------------------------

    def clone(self) -> "Program":
        """Deep copy of functions/data/facts; CFG and annotations are not copied."""
        out = Program(data_base=self.data_base)
        for fn in self.functions:
            out.functions.append(Function(fn.name, [i.clone() for i in fn.instrs]))
        out.data_symbols = [
            DataSymbol(s.name, s.base, s.size, list(s.init_words)) for s in self.data_symbols
        ]
        out.flow_facts = {k: FlowFact(v.label, v.bound) for k, v in self.flow_facts.items()}
        out.layout()
        return out
