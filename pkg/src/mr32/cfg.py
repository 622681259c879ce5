"""CFG construction and loop structure for assembled programs.

Blocks partition each function's instructions at the usual leaders (function
entry, branch targets, fall-throughs after control flow). Edges span the whole
program: calls connect to the callee entry and returns connect back to every
post-call block of the callee's call sites. A CALLSKIP summary edge
(call block -> post-call block) carries the intra-function structure used for
dominators and natural loops; flow and cache analyses use real edges only.
``jr`` is return-only by convention, so the graph is always complete.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import isa
from .errors import AsmError
from .isa import Kind, Opcode
from .program import BasicBlock, Edge, EdgeKind, Program


def build_cfg(prog: Program) -> Program:
    """Populate prog.blocks/prog.edges (and per-block succ/pred lists)."""
    prog.blocks = []
    prog.edges = []
    entry_of: dict[str, BasicBlock] = {}
    block_at_addr: dict[int, BasicBlock] = {}

    for fn in prog.functions:
        leaders = {0}
        for idx, ins in enumerate(fn.instrs):
            if ins.is_control and idx + 1 < len(fn.instrs):
                leaders.add(idx + 1)
            if ins.opcode in isa.BRANCH_OPS or ins.opcode == Opcode.J:
                tf, ti = _resolve_code_target(prog, ins)
                if tf != fn.name:
                    raise AsmError(
                        f"branch at 0x{ins.address:x} targets '{ins.target}' outside {fn.name}"
                    )
                leaders.add(ti)
        fn.blocks = []
        for idx in sorted(leaders):
            blk = BasicBlock(id=len(prog.blocks), func=fn.name)
            prog.blocks.append(blk)
            fn.blocks.append(blk)
            block_at_addr[fn.instrs[idx].address] = blk
        bounds = sorted(leaders) + [len(fn.instrs)]
        for bi, blk in enumerate(fn.blocks):
            blk.instrs = fn.instrs[bounds[bi] : bounds[bi + 1]]
            for ins in blk.instrs[:-1]:
                if ins.is_control:
                    raise AsmError("control flow not at block end")  # unreachable
        entry_of[fn.name] = fn.blocks[0]

    def add_edge(src: BasicBlock, dst: BasicBlock, kind: EdgeKind) -> None:
        e = Edge(id=len(prog.edges), src=src.id, dst=dst.id, kind=kind)
        prog.edges.append(e)
        src.succs.append(e)
        dst.preds.append(e)

    # Collect call sites / return blocks first so RETURN edges can be added
    # in one deterministic pass.
    call_sites: dict[str, list[BasicBlock]] = {}  # callee -> post-call blocks
    return_blocks: dict[str, list[BasicBlock]] = {fn.name: [] for fn in prog.functions}

    for fn in prog.functions:
        for bi, blk in enumerate(fn.blocks):
            term = blk.terminator
            nxt = fn.blocks[bi + 1] if bi + 1 < len(fn.blocks) else None
            if term.opcode in isa.BRANCH_OPS:
                _, ti = _resolve_code_target(prog, term)
                add_edge(blk, block_at_addr[fn.instrs[ti].address], EdgeKind.TAKEN)
                if nxt is None:
                    raise AsmError(f"branch at 0x{term.address:x} falls off '{fn.name}'")
                add_edge(blk, nxt, EdgeKind.FALLTHROUGH)
            elif term.opcode == Opcode.J:
                _, ti = _resolve_code_target(prog, term)
                add_edge(blk, block_at_addr[fn.instrs[ti].address], EdgeKind.JUMP)
            elif term.opcode == Opcode.JAL:
                callee, ci = _resolve_code_target(prog, term)
                if ci != 0:
                    raise AsmError(
                        f"jal at 0x{term.address:x} targets the middle of '{callee}'"
                    )
                add_edge(blk, entry_of[callee], EdgeKind.CALL)
                if nxt is None:
                    raise AsmError(f"jal at 0x{term.address:x} has no post-call block")
                add_edge(blk, nxt, EdgeKind.CALLSKIP)
                call_sites.setdefault(callee, []).append(nxt)
            elif term.opcode == Opcode.JR:
                return_blocks[fn.name].append(blk)
            elif term.opcode == Opcode.HALT:
                pass  # program sink
            else:
                if nxt is not None:
                    add_edge(blk, nxt, EdgeKind.FALLTHROUGH)
                # else: function ends without control flow; only legal for a
                # halt-terminated program tail, checked by simulation.

    for callee, posts in call_sites.items():
        for ret_blk in return_blocks[callee]:
            for post in posts:
                add_edge(ret_blk, post, EdgeKind.RETURN)

    prog._block_of_addr = {
        ins.address: blk for blk in prog.blocks for ins in blk.instrs
    }
    return prog


def _resolve_code_target(prog: Program, ins) -> tuple[str, int]:
    if ins.target is None:
        raise AsmError(f"control instruction at 0x{ins.address:x} lacks a label target")
    if ins.target not in prog.labels:
        raise AsmError(f"'{ins.target}' does not name code")
    return prog.labels[ins.target]


# -- structure queries ------------------------------------------------------


def intra_succs(blk: BasicBlock) -> list[int]:
    """Successors for intra-function structure: CALLSKIP yes, CALL/RETURN no."""
    return [
        e.dst
        for e in blk.succs
        if e.kind in (EdgeKind.TAKEN, EdgeKind.FALLTHROUGH, EdgeKind.JUMP, EdgeKind.CALLSKIP)
    ]


def reachable_blocks(prog: Program) -> set[int]:
    """Blocks reachable from the program entry over real edges."""
    seen: set[int] = set()
    work = [prog.entry_function.blocks[0].id]
    while work:
        b = work.pop()
        if b in seen:
            continue
        seen.add(b)
        for e in prog.blocks[b].succs:
            if e.kind.is_real and e.dst not in seen:
                work.append(e.dst)
    return seen


def dominators(prog: Program, fn_name: str) -> dict[int, set[int]]:
    """Intra-function dominator sets (iterative dataflow, CALLSKIP view)."""
    fn = prog.function(fn_name)
    ids = [b.id for b in fn.blocks]
    entry = ids[0]
    preds: dict[int, list[int]] = {b: [] for b in ids}
    for b in ids:
        for s in intra_succs(prog.blocks[b]):
            preds[s].append(b)
    dom = {b: set(ids) for b in ids}
    dom[entry] = {entry}
    changed = True
    while changed:
        changed = False
        for b in ids:
            if b == entry:
                continue
            ps = [p for p in preds[b]]
            new = set(ids) if not ps else set.intersection(*(dom[p] for p in ps))
            new.add(b)
            if new != dom[b]:
                dom[b] = new
                changed = True
    return dom


@dataclass
class Loop:
    header: int  # block id
    body: set[int] = field(default_factory=set)  # includes header
    back_edges: list[Edge] = field(default_factory=list)
    func: str = ""

    @property
    def entry_edges(self) -> list[Edge]:
        return self._entry_edges

    def finalize(self, prog: Program) -> None:
        self._entry_edges = [
            e
            for e in prog.blocks[self.header].preds
            if e.kind.is_real and e.src not in self.body
        ]


def natural_loops(prog: Program) -> list[Loop]:
    """All intra-function natural loops, back edges merged per header.

    Raises AsmError on an irreducible cycle (a back edge whose header does not
    dominate its tail): the analyses here require reducible control flow.
    """
    loops: dict[int, Loop] = {}
    back_pairs: set[tuple[int, int]] = set()
    for fn in prog.functions:
        dom = dominators(prog, fn.name)
        for blk in fn.blocks:
            for e in blk.succs:
                if e.kind not in (EdgeKind.TAKEN, EdgeKind.FALLTHROUGH, EdgeKind.JUMP):
                    continue
                if e.dst in dom[blk.id]:  # tail -> header, header dom tail
                    loop = loops.setdefault(e.dst, Loop(header=e.dst, func=fn.name))
                    loop.back_edges.append(e)
                    loop.body |= _loop_body(prog, e.dst, blk.id)
                    back_pairs.add((e.src, e.dst))
        # Detect irreducibility: dropping the natural back edges must leave
        # the intra-function graph acyclic.
        _check_reducible(prog, fn, back_pairs)
    out = sorted(loops.values(), key=lambda lp: lp.header)
    for lp in out:
        lp.finalize(prog)
    return out


def _loop_body(prog: Program, header: int, tail: int) -> set[int]:
    body = {header, tail}
    work = [tail]
    while work:
        b = work.pop()
        if b == header:
            continue
        for e in prog.blocks[b].preds:
            if e.kind in (EdgeKind.TAKEN, EdgeKind.FALLTHROUGH, EdgeKind.JUMP, EdgeKind.CALLSKIP):
                if e.src not in body:
                    body.add(e.src)
                    work.append(e.src)
    return body


def _check_reducible(prog: Program, fn, back_pairs: set[tuple[int, int]]) -> None:
    color: dict[int, int] = {}

    def visit(b: int) -> None:
        color[b] = 1
        for s in intra_succs(prog.blocks[b]):
            if (b, s) in back_pairs:
                continue
            if color.get(s) == 1:
                raise AsmError(f"irreducible control flow in '{fn.name}'")
            if color.get(s, 0) == 0:
                visit(s)
        color[b] = 2

    if fn.blocks:
        visit(fn.blocks[0].id)


def loop_bound(prog: Program, loop: Loop) -> int | None:
    """Flow-fact bound for a loop, matched by the header's label."""
    header_addr = prog.blocks[loop.header].start
    for fact in prog.flow_facts.values():
        if prog.label_address(fact.label) == header_addr:
            return fact.bound
    return None


def callees_of(prog: Program, block_ids: set[int]) -> set[str]:
    """Functions transitively callable from the given blocks."""
    out: set[str] = set()
    work: list[str] = []
    for b in block_ids:
        for e in prog.blocks[b].succs:
            if e.kind == EdgeKind.CALL:
                name = prog.blocks[e.dst].func
                if name not in out:
                    out.add(name)
                    work.append(name)
    while work:
        fn = prog.function(work.pop())
        for blk in fn.blocks:
            for e in blk.succs:
                if e.kind == EdgeKind.CALL:
                    name = prog.blocks[e.dst].func
                    if name not in out:
                        out.add(name)
                        work.append(name)
    return out


def call_graph_is_acyclic(prog: Program) -> bool:
    calls: dict[str, set[str]] = {fn.name: set() for fn in prog.functions}
    for fn in prog.functions:
        for ins in fn.instrs:
            if ins.opcode == Opcode.JAL and ins.target is not None:
                callee_fn, _ = prog.labels[ins.target]
                calls[fn.name].add(callee_fn)
    color: dict[str, int] = {}

    def visit(f: str) -> bool:
        color[f] = 1
        for g in calls[f]:
            if color.get(g) == 1:
                return False
            if color.get(g, 0) == 0 and not visit(g):
                return False
        color[f] = 2
        return True

    return all(visit(fn.name) for fn in prog.functions if color.get(fn.name, 0) == 0)
