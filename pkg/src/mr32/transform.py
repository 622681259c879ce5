"""IR-level code transformations: function inlining and loop unrolling.

Both passes rewrite the instruction lists of a fresh Program copy, then relay
out addresses and rebuild the CFG. Inlining splices the callee body in place
of the ``jal``, drops instructions bracketed by ``.region prologue/epilogue``
markers (keeping them, with a warning, when the callee carries no markers),
rewrites returns into jumps to the post-call point and clones the callee's
flow facts under fresh labels. A clobber check rejects sites where the kept
body overwrites registers the caller still needs and the dropped regions did
not save.

Unrolling replicates a single-back-edge loop body ``factor`` times, removes
the intermediate back branches (fall-through) and divides the loop bound by
the factor. When the back branch is conditional, removing it assumes the loop
runs an exact multiple of ``factor`` iterations per entry, which holds for
the shipped counted loops; the simulator-equivalence suite enforces it.

Register conventions assumed by the liveness used in the clobber check:
r1-r3 carry arguments/results, r14 is the stack pointer (preserved), r15 the
link register. At a return, r1 and r14 are treated as live-out.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

from . import cfg as cfglib
from .errors import TransformError
from .isa import Instruction, Opcode
from .program import FlowFact, Function, Program

ARG_REGS = {1, 2, 3, 14}
RETURN_LIVE = {1, 14}


@dataclass
class InlineCmd:
    callee: str
    site: str  # "all" or "FUNC:INDEX"


@dataclass
class UnrollCmd:
    label: str
    factor: int


_INLINE_RE = re.compile(r"^inline\s+(\w+)\s+at\s+(all|\w+:\d+)$")
_UNROLL_RE = re.compile(r"^unroll\s+(\w+)\s+by\s+(\d+)$")


def parse_script(text: str) -> list[InlineCmd | UnrollCmd]:
    cmds: list[InlineCmd | UnrollCmd] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = _INLINE_RE.match(line)
        if m:
            cmds.append(InlineCmd(callee=m.group(1), site=m.group(2)))
            continue
        m = _UNROLL_RE.match(line)
        if m:
            cmds.append(UnrollCmd(label=m.group(1), factor=int(m.group(2))))
            continue
        raise TransformError(f"script line {line_no}: cannot parse '{line}'")
    return cmds


def apply_script(prog: Program, cmds: list[InlineCmd | UnrollCmd]) -> Program:
    out = prog
    for cmd in cmds:
        if isinstance(cmd, InlineCmd):
            out = inline_calls(out, cmd.callee, cmd.site)
        else:
            out = unroll_loop(out, cmd.label, cmd.factor)
    return out


# -- liveness ----------------------------------------------------------------


def _reads_for_liveness(ins: Instruction) -> set[int]:
    if ins.opcode == Opcode.JAL:
        return set(ARG_REGS)
    if ins.opcode == Opcode.JR:
        return {ins.rs1} | RETURN_LIVE
    return ins.reads()


def _writes_for_liveness(ins: Instruction) -> set[int]:
    if ins.opcode == Opcode.JAL:
        return {15}
    return ins.writes()


def _live_before(prog: Program, fn: Function) -> list[set[int]]:
    """Per-instruction live-in sets for one function (intra-function view)."""
    n = len(fn.instrs)
    index_of = {ins.address: i for i, ins in enumerate(fn.instrs)}
    succs: list[list[int]] = [[] for _ in range(n)]
    for i, ins in enumerate(fn.instrs):
        op = ins.opcode
        if op == Opcode.HALT:
            continue
        if op == Opcode.JR:
            continue  # exit, handled via live-out
        if op == Opcode.J:
            succs[i].append(index_of[prog.label_address(ins.target)])
            continue
        if i + 1 < n:
            succs[i].append(i + 1)
        if op in (Opcode.BEQ, Opcode.BNE, Opcode.BLT, Opcode.BGE):
            succs[i].append(index_of[prog.label_address(ins.target)])
    live: list[set[int]] = [set() for _ in range(n)]
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            ins = fn.instrs[i]
            out: set[int] = set()
            if ins.opcode == Opcode.JR:
                out = set(RETURN_LIVE)
            for s in succs[i]:
                out |= live[s]
            new = _reads_for_liveness(ins) | (out - _writes_for_liveness(ins))
            if new != live[i]:
                live[i] = new
                changed = True
    return live


# -- inlining ------------------------------------------------------------------


_fresh_counter = 0


def _fresh_suffix() -> str:
    global _fresh_counter
    _fresh_counter += 1
    return f"__i{_fresh_counter}"


def find_call_sites(prog: Program, callee: str) -> list[tuple[str, int]]:
    """(caller, instruction index) of every jal to the callee, program order."""
    sites = []
    for fn in prog.functions:
        for i, ins in enumerate(fn.instrs):
            if ins.opcode == Opcode.JAL and ins.target == callee:
                sites.append((fn.name, i))
    return sites


def inline_calls(prog: Program, callee: str, site: str) -> Program:
    if site == "all":
        out = prog
        while True:
            sites = find_call_sites(out, callee)
            if not sites:
                break
            out = _inline_one(out, callee, sites[0])
        return out
    fn_name, _, ordinal = site.partition(":")
    sites = [s for s in find_call_sites(prog, callee) if s[0] == fn_name]
    idx = int(ordinal)
    if idx >= len(sites):
        raise TransformError(
            f"'{fn_name}' has {len(sites)} call site(s) of '{callee}', index {idx} out of range"
        )
    return _inline_one(prog, callee, sites[idx])


def _inline_one(prog: Program, callee_name: str, site: tuple[str, int]) -> Program:
    out = prog.clone()
    cfglib.build_cfg(out)
    try:
        callee = out.function(callee_name)
    except KeyError:
        raise TransformError(f"no function '{callee_name}'") from None
    if callee_name in cfglib.callees_of(out, {b.id for b in callee.blocks}):
        raise TransformError(f"'{callee_name}' is recursive; refusing to inline")
    caller = out.function(site[0])
    call_idx = site[1]
    call_ins = caller.instrs[call_idx]
    if call_ins.opcode != Opcode.JAL or call_ins.target != callee_name:
        raise TransformError("call site does not match")  # stale site id
    if call_idx + 1 >= len(caller.instrs):
        raise TransformError("call site has no post-call instruction")

    has_markers = any(ins.region is not None for ins in callee.instrs)
    if not has_markers:
        warnings.warn(
            f"'{callee_name}' has no prologue/epilogue region markers; "
            "inlining keeps its full body",
            stacklevel=2,
        )
    kept = [ins for ins in callee.instrs if not (has_markers and ins.region is not None)]
    dropped = [ins for ins in callee.instrs if has_markers and ins.region is not None]
    if not kept:
        raise TransformError(f"'{callee_name}' body is empty after dropping regions")

    # Clobber check. The inlined site differs from the original call exactly
    # in the instructions that vanish: the dropped prologue/epilogue and the
    # jal itself. So the registers whose final values can change are those
    # written by dropped instructions, plus r15; none of them may be live at
    # the post-call point. (A body write to a live register is fine: the
    # original call exposed the same value.)
    live = _live_before(out, caller)[call_idx + 1]
    changed: set[int] = {15}
    for ins in dropped:
        changed |= ins.writes()
    bad = changed & live
    if bad:
        regs = ", ".join(f"r{r}" for r in sorted(bad))
        raise TransformError(
            f"inlining '{callee_name}' into '{site[0]}' clobbers live registers: {regs}"
        )

    suffix = _fresh_suffix()
    body_labels = {lab for ins in kept for lab in ins.labels}
    post_label = f"POST{suffix}"

    body: list[Instruction] = []
    for ins in kept:
        c = ins.clone()
        c.labels = [lab + suffix for lab in c.labels]
        c.region = None
        if c.target is not None and c.target in body_labels:
            c.target = c.target + suffix
        body.append(c)
    # Returns become jumps to the post-call point; a trailing return falls
    # through instead.
    rewritten: list[Instruction] = []
    for i, ins in enumerate(body):
        if ins.opcode == Opcode.JR:
            if i == len(body) - 1:
                if ins.labels:
                    # Keep the label: attach it to a jump that falls through.
                    rewritten.append(
                        Instruction(opcode=Opcode.J, target=post_label, labels=ins.labels)
                    )
                continue
            rewritten.append(
                Instruction(opcode=Opcode.J, target=post_label, labels=ins.labels)
            )
        else:
            rewritten.append(ins)
    body = rewritten

    # Labels on the call instruction move to the first spliced instruction.
    if call_ins.labels:
        body[0].labels = call_ins.labels + body[0].labels
    caller.instrs[call_idx + 1].labels = [post_label] + caller.instrs[call_idx + 1].labels
    caller.instrs[call_idx : call_idx + 1] = body

    # Clone flow facts of callee loops under the fresh labels.
    for label in list(out.flow_facts):
        if label in body_labels:
            fact = out.flow_facts[label]
            out.flow_facts[label + suffix] = FlowFact(label + suffix, fact.bound)

    out.layout()
    cfglib.build_cfg(out)
    return out


# -- unrolling -----------------------------------------------------------------


def unroll_loop(prog: Program, header_label: str, factor: int) -> Program:
    if factor < 1:
        raise TransformError("unroll factor must be >= 1")
    out = prog.clone()
    if factor == 1:
        return out
    cfglib.build_cfg(out)
    try:
        header_addr = out.label_address(header_label)
    except Exception:
        raise TransformError(f"no label '{header_label}'") from None

    loops = [
        lp
        for lp in cfglib.natural_loops(out)
        if out.blocks[lp.header].start == header_addr
    ]
    if not loops:
        raise TransformError(f"'{header_label}' is not a loop header")
    loop = loops[0]
    if len(loop.back_edges) != 1:
        raise TransformError(f"loop '{header_label}' has multiple back edges")
    fact = out.flow_facts.get(header_label)
    if fact is None:
        raise TransformError(f"loop '{header_label}' has no flow fact")
    if fact.bound % factor:
        raise TransformError(
            f"factor {factor} does not divide bound {fact.bound} of '{header_label}'"
        )

    fn = out.function(out.blocks[loop.header].func)
    body_blocks = sorted((out.blocks[b] for b in loop.body), key=lambda b: b.start)
    if body_blocks[0].id != loop.header:
        raise TransformError("loop header is not the first body block")
    index_of = {ins.address: i for i, ins in enumerate(fn.instrs)}
    lo = index_of[body_blocks[0].instrs[0].address]
    hi = index_of[body_blocks[-1].instrs[-1].address] + 1
    if hi - lo != sum(len(b.instrs) for b in body_blocks):
        raise TransformError("loop body is not contiguous")
    back = loop.back_edges[0]
    back_ins = out.blocks[back.src].terminator
    if back_ins.address != fn.instrs[hi - 1].address:
        raise TransformError("back edge is not the last loop instruction")

    seg = fn.instrs[lo:hi]
    seg_labels = {lab for ins in seg for lab in ins.labels}
    copies: list[list[Instruction]] = []
    for c in range(factor):
        clone_seg = []
        for k, ins in enumerate(seg):
            is_back = k == len(seg) - 1
            if is_back and c < factor - 1:
                # Intermediate back branch removed: fall through to next copy.
                if ins.labels:
                    raise TransformError("back-edge instruction carries a label")
                continue
            cc = ins.clone()
            if c > 0:
                cc.labels = [lab + f"__u{c}" for lab in cc.labels]
                if cc.target in seg_labels and not (is_back and cc.target == header_label):
                    cc.target = cc.target + f"__u{c}"
            clone_seg.append(cc)
        copies.append(clone_seg)

    new_seg = [ins for copy in copies for ins in copy]
    fn.instrs[lo:hi] = new_seg

    # Nested loop facts are cloned per copy; the unrolled loop's own bound
    # divides by the factor.
    for label in list(out.flow_facts):
        if label in seg_labels and label != header_label:
            for c in range(1, factor):
                nl = label + f"__u{c}"
                out.flow_facts[nl] = FlowFact(nl, out.flow_facts[label].bound)
    out.flow_facts[header_label] = FlowFact(header_label, fact.bound // factor)

    out.layout()
    cfglib.build_cfg(out)
    return out
