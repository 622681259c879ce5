"""Per-function constant propagation for data-access address resolution.

Register values live in a small lattice: unreached, Const(c), Sym(name, off)
with an optionally unknown offset, and Top. A symbol with unknown offset is
still useful: it decides SPM routing for the whole symbol even when the exact
cache line is unknown (array walks). Calls clobber every register except r0;
the program entry starts from the architectural all-zero register file, other
functions from Top. Arithmetic on constants mirrors the simulator bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import isa
from ..isa import Opcode
from ..program import EdgeKind, Program

TOP = ("top",)


def _const(c: int):
    return ("const", isa.to_u32(c))


def _sym(name: str, off: int | None):
    return ("sym", name, off)


def _join(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if a == b:
        return a
    if a[0] == "sym" and b[0] == "sym" and a[1] == b[1]:
        return _sym(a[1], None)
    return TOP


def _add(a, b, sub: bool = False):
    if a[0] == "const" and b[0] == "const":
        return _const(a[1] - b[1] if sub else a[1] + b[1])
    if a[0] == "sym" and b[0] == "const":
        if a[2] is None:
            return _sym(a[1], None)
        return _sym(a[1], a[2] - b[1] if sub else a[2] + b[1])
    if not sub and a[0] == "const" and b[0] == "sym":
        return _sym(b[1], None if b[2] is None else b[2] + a[1])
    return TOP


class _Regs:
    """One register state: tuple of lattice values, r0 pinned to zero."""

    @staticmethod
    def entry(zeroed: bool):
        base = _const(0) if zeroed else TOP
        vals = [base] * isa.NUM_REGS
        vals[0] = _const(0)
        return tuple(vals)

    @staticmethod
    def join(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return tuple(_join(x, y) for x, y in zip(a, b))

    @staticmethod
    def clobber_call(state):
        vals = [TOP] * isa.NUM_REGS
        vals[0] = _const(0)
        return tuple(vals)


def _transfer(state, ins, prog: Program):
    op = ins.opcode
    if op == Opcode.JAL:
        return _Regs.clobber_call(state)
    if op == Opcode.LI:
        if ins.target is not None and _is_data_symbol(prog, ins.target):
            v = _sym(ins.target, 0)
        elif ins.target is not None:
            v = _const(ins.imm)
        else:
            v = _const(isa.sext16(ins.imm))
        return _set(state, ins.rd, v)
    if op == Opcode.LW:
        return _set(state, ins.rd, TOP)
    if op in isa.ALU_OPS:
        a, b = state[ins.rs1], state[ins.rs2]
        if op == Opcode.ADD:
            v = _add(a, b)
        elif op == Opcode.SUB:
            v = _add(a, b, sub=True)
        elif a[0] == "const" and b[0] == "const":
            x, y = a[1], b[1]
            if op == Opcode.MUL:
                v = _const(x * y)
            elif op == Opcode.AND:
                v = _const(x & y)
            elif op == Opcode.OR:
                v = _const(x | y)
            elif op == Opcode.XOR:
                v = _const(x ^ y)
            elif op == Opcode.SLL:
                v = _const(x << (y & 31))
            else:
                v = _const(x >> (y & 31))
        else:
            v = TOP
        return _set(state, ins.rd, v)
    return state


def _set(state, rd, v):
    if rd == 0:
        return state
    out = list(state)
    out[rd] = v
    return tuple(out)


def _is_data_symbol(prog: Program, name: str) -> bool:
    return any(s.name == name for s in prog.data_symbols)


@dataclass
class SiteAddr:
    """Resolution of one load/store site."""

    resolved: bool
    address: int | None = None  # exact byte address when known
    symbol: str | None = None  # data symbol, or "stack" / "out"

    @staticmethod
    def unknown() -> "SiteAddr":
        return SiteAddr(resolved=False)


def resolve_data_sites(prog: Program) -> dict[int, SiteAddr]:
    """Map each lw/sw instruction address to its resolved target, if any."""
    out: dict[int, SiteAddr] = {}
    for fn in prog.functions:
        entry_state = _Regs.entry(zeroed=fn.name == prog.entry_function.name)
        states: dict[int, tuple | None] = {b.id: None for b in fn.blocks}
        states[fn.blocks[0].id] = entry_state
        work = [fn.blocks[0].id]
        while work:
            bid = work.pop(0)
            st = states[bid]
            if st is None:
                continue
            blk = prog.blocks[bid]
            for ins in blk.instrs:
                st = _transfer(st, ins, prog)
            for e in blk.succs:
                if e.kind in (EdgeKind.TAKEN, EdgeKind.FALLTHROUGH, EdgeKind.JUMP, EdgeKind.CALLSKIP):
                    merged = _Regs.join(states[e.dst], st)
                    if merged != states[e.dst]:
                        states[e.dst] = merged
                        if e.dst not in work:
                            work.append(e.dst)
        # Classification pass with the fixpoint states.
        for blk in fn.blocks:
            st = states[blk.id]
            if st is None:
                st = _Regs.entry(zeroed=False)  # unreachable: anything sound
            for ins in blk.instrs:
                if ins.is_mem:
                    out[ins.address] = _resolve_site(prog, st, ins)
                st = _transfer(st, ins, prog)
    return out


def _resolve_site(prog: Program, state, ins) -> SiteAddr:
    base = state[ins.rs1]
    if base[0] == "const":
        addr = isa.to_u32(base[1] + ins.imm)
        return _classify_addr(prog, addr)
    if base[0] == "sym":
        sym = prog.symbol(base[1])
        if base[2] is None:
            return SiteAddr(resolved=True, address=None, symbol=sym.name)
        addr = isa.to_u32(sym.base + base[2] + ins.imm)
        return _classify_addr(prog, addr)
    return SiteAddr.unknown()


def _classify_addr(prog: Program, addr: int) -> SiteAddr:
    sym = prog.find_symbol(addr)
    if sym is not None:
        return SiteAddr(resolved=True, address=addr, symbol=sym.name)
    if isa.STACK_BASE <= addr < isa.STACK_TOP:
        return SiteAddr(resolved=True, address=addr, symbol="stack")
    if isa.OUT_BASE <= addr < isa.OUT_BASE + isa.OUT_SIZE:
        return SiteAddr(resolved=True, address=addr, symbol="out")
    return SiteAddr.unknown()
