"""Two-pass assembler and canonical disassembler for MR32 assembly.

Grammar: one instruction or directive per line, ``;`` starts a comment.
Directives: ``.text``, ``.data``, ``.func NAME`` / ``.endfunc``, ``label:``,
``.word v,...``, ``.space N``, ``.loopbound LABEL N``, and
``.region prologue|epilogue`` / ``.endregion`` region markers used by the
transform passes. The disassembler emits a canonical form that re-assembles
to an identical program (round-trip stable); golden tests rely on it.
"""

from __future__ import annotations

import re

from . import isa
from .errors import AsmError
from .isa import Instruction, Opcode
from .program import DataSymbol, FlowFact, Function, Program

_REG_RE = re.compile(r"^r(\d{1,2})$")
_MEM_RE = re.compile(r"^(-?(?:0x[0-9a-fA-F]+|\d+))\((r\d{1,2})\)$")
_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")

_ALU_NAMES = {op.name.lower(): op for op in isa.ALU_OPS}
_BRANCH_NAMES = {op.name.lower(): op for op in isa.BRANCH_OPS}


def _parse_reg(tok: str, line_no: int) -> int:
    m = _REG_RE.match(tok)
    if not m or int(m.group(1)) >= isa.NUM_REGS:
        raise AsmError(f"line {line_no}: bad register '{tok}'")
    return int(m.group(1))


def _parse_int(tok: str, line_no: int) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise AsmError(f"line {line_no}: bad integer '{tok}'") from None


def _check_dest(rd: int, line_no: int) -> int:
    if rd == 0:
        raise AsmError(f"line {line_no}: r0 is never a destination")
    return rd


def assemble(source: str, data_base: int = isa.DATA_BASE_DEFAULT) -> Program:
    """Assemble MR32 source text into a laid-out Program (CFG not yet built)."""
    prog = Program(data_base=data_base)
    section = None
    func: Function | None = None
    pending_labels: list[str] = []
    region: str | None = None
    cur_sym: DataSymbol | None = None
    loopbounds: list[tuple[str, int, int]] = []  # label, bound, line
    seen_labels: set[str] = set()

    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue

        # Peel off any leading "label:" prefixes.
        while True:
            m = re.match(r"^([A-Za-z_][A-Za-z0-9_.]*)\s*:\s*(.*)$", line)
            if not m:
                break
            label = m.group(1)
            if label in seen_labels:
                raise AsmError(f"line {line_no}: duplicate label '{label}'")
            seen_labels.add(label)
            if section == ".data":
                cur_sym = DataSymbol(name=label, base=0, size=0)
                prog.data_symbols.append(cur_sym)
            else:
                pending_labels.append(label)
            line = m.group(2).strip()
        if not line:
            continue

        if line.startswith("."):
            parts = line.split()
            directive = parts[0]
            if directive == ".text":
                section = ".text"
            elif directive == ".data":
                section = ".data"
                cur_sym = None
            elif directive == ".func":
                if len(parts) != 2 or not _LABEL_RE.match(parts[1]):
                    raise AsmError(f"line {line_no}: .func needs a name")
                if func is not None:
                    raise AsmError(f"line {line_no}: nested .func")
                func = Function(name=parts[1])
                if parts[1] not in seen_labels:
                    seen_labels.add(parts[1])
                    pending_labels.append(parts[1])
            elif directive == ".endfunc":
                if func is None:
                    raise AsmError(f"line {line_no}: .endfunc outside .func")
                if pending_labels:
                    raise AsmError(f"line {line_no}: dangling label at .endfunc")
                if region is not None:
                    raise AsmError(f"line {line_no}: unterminated .region")
                prog.functions.append(func)
                func = None
            elif directive == ".region":
                if func is None or len(parts) != 2 or parts[1] not in ("prologue", "epilogue"):
                    raise AsmError(f"line {line_no}: .region prologue|epilogue inside .func")
                region = parts[1]
            elif directive == ".endregion":
                if region is None:
                    raise AsmError(f"line {line_no}: .endregion without .region")
                region = None
            elif directive == ".loopbound":
                if len(parts) != 3:
                    raise AsmError(f"line {line_no}: .loopbound LABEL N")
                bound = _parse_int(parts[2], line_no)
                if bound < 1:
                    raise AsmError(f"line {line_no}: loop bound must be >= 1")
                loopbounds.append((parts[1], bound, line_no))
            elif directive == ".word":
                if cur_sym is None:
                    raise AsmError(f"line {line_no}: .word outside a data symbol")
                vals = " ".join(parts[1:]).split(",")
                for v in vals:
                    cur_sym.init_words.append(isa.to_u32(_parse_int(v.strip(), line_no)))
                    cur_sym.size += isa.WORD_SIZE
            elif directive == ".space":
                if cur_sym is None:
                    raise AsmError(f"line {line_no}: .space outside a data symbol")
                n = _parse_int(parts[1], line_no)
                if n <= 0 or n % isa.WORD_SIZE:
                    raise AsmError(f"line {line_no}: .space size must be a positive multiple of 4")
                cur_sym.size += n
            else:
                raise AsmError(f"line {line_no}: unknown directive '{directive}'")
            continue

        if section != ".text" or func is None:
            raise AsmError(f"line {line_no}: instruction outside .text/.func")
        ins = _parse_instruction(line, line_no)
        ins.region = region
        ins.labels = pending_labels
        pending_labels = []
        func.instrs.append(ins)

    if func is not None:
        raise AsmError("missing .endfunc at end of file")
    if pending_labels:
        raise AsmError(f"dangling label '{pending_labels[0]}' at end of file")
    if not prog.functions:
        raise AsmError("no .func in source")
    for sym in prog.data_symbols:
        if sym.size == 0:
            raise AsmError(f"data symbol '{sym.name}' has no storage")

    for label, bound, line_no in loopbounds:
        if label not in seen_labels:
            raise AsmError(f"line {line_no}: .loopbound names unknown label '{label}'")
        prog.flow_facts[label] = FlowFact(label, bound)

    prog.layout()
    return prog


def _parse_instruction(line: str, line_no: int) -> Instruction:
    parts = line.split(None, 1)
    mnem = parts[0].lower()
    ops = [o.strip() for o in parts[1].split(",")] if len(parts) > 1 else []

    def arity(n: int):
        if len(ops) != n:
            raise AsmError(f"line {line_no}: '{mnem}' expects {n} operands")

    if mnem in _ALU_NAMES:
        arity(3)
        return Instruction(
            opcode=_ALU_NAMES[mnem],
            rd=_check_dest(_parse_reg(ops[0], line_no), line_no),
            rs1=_parse_reg(ops[1], line_no),
            rs2=_parse_reg(ops[2], line_no),
        )
    if mnem == "li":
        arity(2)
        rd = _check_dest(_parse_reg(ops[0], line_no), line_no)
        if _LABEL_RE.match(ops[1]) and not _REG_RE.match(ops[1]):
            return Instruction(opcode=Opcode.LI, rd=rd, target=ops[1])
        imm = _parse_int(ops[1], line_no)
        if not -0x8000 <= imm <= 0xFFFF:
            raise AsmError(f"line {line_no}: immediate out of range")
        return Instruction(opcode=Opcode.LI, rd=rd, imm=imm)
    if mnem in ("lw", "sw"):
        arity(2)
        m = _MEM_RE.match(ops[1].replace(" ", ""))
        if not m:
            raise AsmError(f"line {line_no}: expected OFFSET(rN), got '{ops[1]}'")
        off = _parse_int(m.group(1), line_no)
        if not -0x8000 <= off <= 0x7FFF:
            raise AsmError(f"line {line_no}: offset out of range")
        base = _parse_reg(m.group(2), line_no)
        if mnem == "lw":
            rd = _check_dest(_parse_reg(ops[0], line_no), line_no)
            return Instruction(opcode=Opcode.LW, rd=rd, rs1=base, imm=off)
        return Instruction(
            opcode=Opcode.SW, rs2=_parse_reg(ops[0], line_no), rs1=base, imm=off
        )
    if mnem in _BRANCH_NAMES:
        arity(3)
        if not _LABEL_RE.match(ops[2]):
            raise AsmError(f"line {line_no}: branch target must be a label")
        return Instruction(
            opcode=_BRANCH_NAMES[mnem],
            rs1=_parse_reg(ops[0], line_no),
            rs2=_parse_reg(ops[1], line_no),
            target=ops[2],
        )
    if mnem in ("j", "jal"):
        arity(1)
        if not _LABEL_RE.match(ops[0]):
            raise AsmError(f"line {line_no}: jump target must be a label")
        return Instruction(opcode=Opcode.J if mnem == "j" else Opcode.JAL, target=ops[0])
    if mnem == "jr":
        arity(1)
        return Instruction(opcode=Opcode.JR, rs1=_parse_reg(ops[0], line_no))
    if mnem == "nop":
        arity(0)
        return Instruction(opcode=Opcode.NOP)
    if mnem == "halt":
        arity(0)
        return Instruction(opcode=Opcode.HALT)
    raise AsmError(f"line {line_no}: unknown mnemonic '{mnem}'")


def format_instruction(ins: Instruction) -> str:
    """Canonical operand spelling for one instruction (no labels/indent)."""
    op = ins.opcode
    name = op.name.lower()
    if op in isa.ALU_OPS:
        return f"{name} r{ins.rd}, r{ins.rs1}, r{ins.rs2}"
    if op == Opcode.LI:
        tgt = ins.target if ins.target is not None else str(ins.imm)
        return f"li r{ins.rd}, {tgt}"
    if op == Opcode.LW:
        return f"lw r{ins.rd}, {ins.imm}(r{ins.rs1})"
    if op == Opcode.SW:
        return f"sw r{ins.rs2}, {ins.imm}(r{ins.rs1})"
    if op in isa.BRANCH_OPS:
        tgt = ins.target if ins.target is not None else str(ins.imm)
        return f"{name} r{ins.rs1}, r{ins.rs2}, {tgt}"
    if op in (Opcode.J, Opcode.JAL):
        tgt = ins.target if ins.target is not None else str(ins.imm)
        return f"{name} {tgt}"
    if op == Opcode.JR:
        return f"jr r{ins.rs1}"
    return name


def disassemble(prog: Program) -> str:
    """Canonical disassembly; re-assembling it reproduces the program."""
    out: list[str] = [".text"]
    for fn in prog.functions:
        out.append(f".func {fn.name}")
        region: str | None = None
        for ins in fn.instrs:
            if ins.region != region:
                if region is not None:
                    out.append(".endregion")
                if ins.region is not None:
                    out.append(f".region {ins.region}")
                region = ins.region
            for lab in ins.labels:
                if lab != fn.name:
                    out.append(f"{lab}:")
            out.append(f"    {format_instruction(ins)}")
        if region is not None:
            out.append(".endregion")
        out.append(".endfunc")
    facts = sorted(prog.flow_facts.values(), key=lambda f: prog.label_address(f.label))
    for fact in facts:
        out.append(f".loopbound {fact.label} {fact.bound}")
    if prog.data_symbols:
        out.append(".data")
        for sym in prog.data_symbols:
            n_init = len(sym.init_words)
            if n_init:
                words = ", ".join(str(w) for w in sym.init_words)
                out.append(f"{sym.name}: .word {words}")
                rest = sym.size - n_init * isa.WORD_SIZE
                if rest:
                    out.append(f"    .space {rest}")
            else:
                out.append(f"{sym.name}: .space {sym.size}")
    return "\n".join(out) + "\n"
