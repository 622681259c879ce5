"""MR32 instruction set: opcodes, encodings, operand fields.

MR32 is a small load/store ISA: 16 registers (r0 reads as zero and is never
a destination), fixed 32-bit instruction words, 4-byte instruction alignment,
no delay slots. Words are rendered big-endian, byte 0 being the opcode, so an
ESC3 escape word over dictionary indices (0, 1, 2) prints as ``f3 00 01 02``.

Word layout by format::

    bits 31..24   opcode
    bits 23..20   field A (rd, or rs2 for sw, or rs1 for branches/jr)
    bits 19..16   field B (rs1, or rs2 for branches)
    bits 15..12   field C (rs2, R-format only)
    bits 15..0    imm16   (I/B/J formats)

Branch and jump immediates hold the absolute target *word index*
(byte address / 4). ``li`` sign-extends its 16-bit immediate. Opcodes
0xF0-0xFF are reserved invalid: the assembler never emits them, which leaves
escape space for the compression layer's encoding instructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

NUM_REGS = 16
WORD_SIZE = 4

# Memory map (byte addresses). Text starts at 0; the data segment is laid out
# at a configurable base after text; the stack grows downward from STACK_TOP;
# stores to the output window are recorded as program output and bypass the
# memory hierarchy.
DATA_BASE_DEFAULT = 0x1000
STACK_BASE = 0x6000
STACK_TOP = 0x7000
OUT_BASE = 0x7F00
OUT_SIZE = 0x100

INVALID_OPCODE_MIN = 0xF0
ESC2_OPCODE = 0xF2
ESC3_OPCODE = 0xF3


class Opcode(IntEnum):
    NOP = 0x00
    HALT = 0x01
    ADD = 0x10
    SUB = 0x11
    MUL = 0x12
    AND = 0x13
    OR = 0x14
    XOR = 0x15
    SLL = 0x16
    SRL = 0x17
    LI = 0x20
    LW = 0x21
    SW = 0x22
    BEQ = 0x30
    BNE = 0x31
    BLT = 0x32
    BGE = 0x33
    J = 0x40
    JAL = 0x41
    JR = 0x42


class Kind(Enum):
    COMPUTE = "compute"
    LOAD = "load"
    STORE = "store"
    BRANCH = "branch"
    CALL = "call"
    RETURN = "return"
    JUMP = "jump"
    OTHER = "other"


ALU_OPS = {Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.AND, Opcode.OR, Opcode.XOR, Opcode.SLL, Opcode.SRL}
BRANCH_OPS = {Opcode.BEQ, Opcode.BNE, Opcode.BLT, Opcode.BGE}

KIND_OF = {
    Opcode.NOP: Kind.COMPUTE,
    Opcode.HALT: Kind.OTHER,
    Opcode.LI: Kind.COMPUTE,
    Opcode.LW: Kind.LOAD,
    Opcode.SW: Kind.STORE,
    Opcode.J: Kind.JUMP,
    Opcode.JAL: Kind.CALL,
    Opcode.JR: Kind.RETURN,
}
KIND_OF.update({op: Kind.COMPUTE for op in ALU_OPS})
KIND_OF.update({op: Kind.BRANCH for op in BRANCH_OPS})

CONTROL_KINDS = {Kind.BRANCH, Kind.CALL, Kind.RETURN, Kind.JUMP}
# Kinds the compression layer may place in an encoding group.
COMPRESSIBLE_KINDS = {Kind.COMPUTE, Kind.LOAD, Kind.STORE}


@dataclass
class Instruction:
    """One decoded MR32 instruction.

    ``target`` keeps the symbolic label/symbol operand from the source so that
    programs survive relayout (transform passes re-resolve it); ``imm`` is the
    resolved numeric immediate and ``word`` the resolved 32-bit encoding.
    """

    opcode: Opcode
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    target: str | None = None
    address: int = -1
    word: int = 0
    region: str | None = None  # "prologue" / "epilogue" source marker
    labels: list[str] = field(default_factory=list)  # labels defined here

    @property
    def kind(self) -> Kind:
        return KIND_OF[self.opcode]

    @property
    def is_control(self) -> bool:
        return self.kind in CONTROL_KINDS

    @property
    def is_mem(self) -> bool:
        return self.opcode in (Opcode.LW, Opcode.SW)

    def reads(self) -> set[int]:
        op = self.opcode
        if op in ALU_OPS:
            return {self.rs1, self.rs2}
        if op == Opcode.LW:
            return {self.rs1}
        if op == Opcode.SW:
            return {self.rs1, self.rs2}
        if op in BRANCH_OPS:
            return {self.rs1, self.rs2}
        if op == Opcode.JR:
            return {self.rs1}
        return set()

    def writes(self) -> set[int]:
        op = self.opcode
        if op in ALU_OPS or op in (Opcode.LI, Opcode.LW):
            return {self.rd}
        if op == Opcode.JAL:
            return {15}
        return set()

    def clone(self) -> "Instruction":
        return Instruction(
            opcode=self.opcode, rd=self.rd, rs1=self.rs1, rs2=self.rs2,
            imm=self.imm, target=self.target, address=self.address,
            word=self.word, region=self.region, labels=list(self.labels),
        )


def sext16(value: int) -> int:
    value &= 0xFFFF
    return value - 0x10000 if value & 0x8000 else value


def to_u32(value: int) -> int:
    return value & 0xFFFFFFFF


def to_s32(value: int) -> int:
    value &= 0xFFFFFFFF
    return value - 0x100000000 if value & 0x80000000 else value


def encode(instr: Instruction) -> int:
    """Compute the 32-bit word for an instruction with resolved operands."""
    op = instr.opcode
    w = int(op) << 24
    if op in ALU_OPS:
        return w | (instr.rd << 20) | (instr.rs1 << 16) | (instr.rs2 << 12)
    if op == Opcode.LI:
        return w | (instr.rd << 20) | (instr.imm & 0xFFFF)
    if op == Opcode.LW:
        return w | (instr.rd << 20) | (instr.rs1 << 16) | (instr.imm & 0xFFFF)
    if op == Opcode.SW:
        return w | (instr.rs2 << 20) | (instr.rs1 << 16) | (instr.imm & 0xFFFF)
    if op in BRANCH_OPS:
        return w | (instr.rs1 << 20) | (instr.rs2 << 16) | (instr.imm & 0xFFFF)
    if op in (Opcode.J, Opcode.JAL):
        return w | (instr.imm & 0xFFFF)
    if op == Opcode.JR:
        return w | (instr.rs1 << 20)
    return w  # NOP / HALT


def decode(word: int) -> Instruction:
    """Decode a 32-bit word back to an Instruction (numeric operands only)."""
    opc = (word >> 24) & 0xFF
    if opc >= INVALID_OPCODE_MIN:
        raise ValueError(f"reserved invalid opcode 0x{opc:02x}")
    op = Opcode(opc)
    a = (word >> 20) & 0xF
    b = (word >> 16) & 0xF
    c = (word >> 12) & 0xF
    imm = word & 0xFFFF
    ins = Instruction(opcode=op)
    if op in ALU_OPS:
        ins.rd, ins.rs1, ins.rs2 = a, b, c
    elif op == Opcode.LI:
        ins.rd, ins.imm = a, sext16(imm)
    elif op == Opcode.LW:
        ins.rd, ins.rs1, ins.imm = a, b, sext16(imm)
    elif op == Opcode.SW:
        ins.rs2, ins.rs1, ins.imm = a, b, sext16(imm)
    elif op in BRANCH_OPS:
        ins.rs1, ins.rs2, ins.imm = a, b, imm
    elif op in (Opcode.J, Opcode.JAL):
        ins.imm = imm
    elif op == Opcode.JR:
        ins.rs1 = a
    return ins


def word_bytes(word: int) -> bytes:
    return bytes(((word >> 24) & 0xFF, (word >> 16) & 0xFF, (word >> 8) & 0xFF, word & 0xFF))
