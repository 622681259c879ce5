"""IPET model construction and the end-to-end WCET driver.

The model is the classic implicit path enumeration ILP: per-block execution
counts x_b, per-edge flows x_e, and one miss variable m_a per PERSISTENT
access. A virtual entry edge fixed to 1 feeds the program entry block and a
virtual exit edge leaves every halt block; flow conservation then pins total
flow. Loop bounds constrain back-edge flow against loop-entry flow, and each
m_a is bounded by both its scope's entries and its block's count. The
objective maximizes sum(t_b * x_b) + sum(penalty_a * m_a).

Solving goes through an exact presolve: block variables are substituted by
their in-flows and chains of degree-(1,1) blocks collapse to a single edge
variable (pure variable identification), after which the reduced integer
program goes to the rational branch-and-bound solver. The literal model is
kept alongside for witness checking in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import cfg as cfglib
from ..errors import MissingFlowFact, WcetError
from ..hw import HardwareConfig
from ..isa import Opcode
from ..program import EdgeKind, Program
from ..sim import placed_symbol_names
from . import lp
from .addrres import resolve_data_sites
from .blocktime import block_time
from .cacheanalysis import (
    ALWAYS_HIT,
    NOT_CLASSIFIED,
    PERSISTENT,
    CacheClass,
    dcache_analysis,
    icache_analysis,
    ifetch_streams,
)

ENTRY_EDGE = "e_entry"


@dataclass
class PersVar:
    name: str
    penalty: int
    block: int  # block id of the access
    scope: int  # loop header block id


@dataclass
class IlpModel:
    variables: list[str]
    objective: dict[str, int]
    constraints: list[tuple[dict, str, object]]
    block_var: dict[int, str]
    edge_var: dict[int, str]
    entry_block: int
    exit_edges: dict[int, str]  # halt block -> virtual exit edge var
    in_edges: dict[int, list[str]] = field(default_factory=dict)
    out_edges: dict[int, list[str]] = field(default_factory=dict)
    bounds: list[tuple[int, list[str], list[str], int]] = field(default_factory=list)
    pers: list[PersVar] = field(default_factory=list)
    times: dict[int, int] = field(default_factory=dict)
    # Call/return pairing: flow into a callee from one site must flow back to
    # that site's continuation, else mismatched call/return circulation would
    # be unbounded.
    call_pairs: list[tuple[str, list[str]]] = field(default_factory=list)


def build_ipet(
    prog: Program,
    block_times: dict[int, int],
    pers_accesses: list[PersVar],
    loops: list[cfglib.Loop] | None = None,
) -> IlpModel:
    """Construct the literal IPET ILP over reachable blocks."""
    reach = cfglib.reachable_blocks(prog)
    entry = prog.entry_function.blocks[0].id
    if loops is None:
        loops = cfglib.natural_loops(prog)

    block_var = {b: f"b{b}" for b in sorted(reach)}
    edge_var = {
        e.id: f"e{e.id}"
        for e in prog.edges
        if e.kind.is_real and e.src in reach and e.dst in reach
    }
    exit_edges = {
        blk.id: f"x{blk.id}"
        for blk in prog.blocks
        if blk.id in reach and blk.terminator.opcode == Opcode.HALT
    }
    in_edges = {b: [] for b in reach}
    out_edges = {b: [] for b in reach}
    for e in prog.edges:
        if e.id in edge_var:
            out_edges[e.src].append(edge_var[e.id])
            in_edges[e.dst].append(edge_var[e.id])
    in_edges[entry].append(ENTRY_EDGE)
    for b, x in exit_edges.items():
        out_edges[b].append(x)

    variables = (
        [ENTRY_EDGE]
        + [block_var[b] for b in sorted(reach)]
        + [edge_var[i] for i in sorted(edge_var)]
        + [exit_edges[b] for b in sorted(exit_edges)]
        + [p.name for p in pers_accesses]
    )
    constraints: list[tuple[dict, str, object]] = [({ENTRY_EDGE: 1}, "=", 1)]
    for b in sorted(reach):
        constraints.append(
            ({**{v: 1 for v in in_edges[b]}, block_var[b]: -1}, "=", 0)
        )
        if out_edges[b]:
            constraints.append(
                ({**{v: 1 for v in out_edges[b]}, block_var[b]: -1}, "=", 0)
            )
        # A reachable block with no out edges (not halt) is a dead end the
        # simulator would fault on; leaving it unconstrained on the out side
        # would let flow vanish, so force it to zero.
        if not out_edges[b]:
            constraints.append(({block_var[b]: 1}, "=", 0))

    bounds: list[tuple[int, list[str], list[str], int]] = []
    for loop in loops:
        if loop.header not in reach:
            continue
        bound = cfglib.loop_bound(prog, loop)
        if bound is None:
            label = next(iter(prog.blocks[loop.header].instrs[0].labels), "?")
            raise MissingFlowFact(
                f"reachable loop at block {loop.header} ('{label}') has no flow fact"
            )
        back = [edge_var[e.id] for e in loop.back_edges if e.id in edge_var]
        entries = [edge_var[e.id] for e in loop.entry_edges if e.id in edge_var]
        if loop.header == entry:
            entries = entries + [ENTRY_EDGE]
        bounds.append((loop.header, back, entries, bound))
        row = {v: 1 for v in back}
        for v in entries:
            row[v] = row.get(v, 0) - bound
        constraints.append((row, "<=", 0))

    for p in pers_accesses:
        scope_loop = next(lp_ for lp_ in loops if lp_.header == p.scope)
        entries = [edge_var[e.id] for e in scope_loop.entry_edges if e.id in edge_var]
        if p.scope == entry:
            entries = entries + [ENTRY_EDGE]
        constraints.append(({**{v: 1 for v in entries}, p.name: -1}, ">=", 0))
        constraints.append(({p.name: 1, block_var[p.block]: -1}, "<=", 0))

    call_pairs: list[tuple[str, list[str]]] = []
    for e in prog.edges:
        if e.kind == EdgeKind.CALL and e.id in edge_var:
            post = next(
                (s.dst for s in prog.blocks[e.src].succs if s.kind == EdgeKind.CALLSKIP),
                None,
            )
            if post is None or post not in reach:
                continue
            rets = [
                edge_var[r.id]
                for r in prog.blocks[post].preds
                if r.kind == EdgeKind.RETURN and r.id in edge_var
            ]
            call_pairs.append((edge_var[e.id], rets))
            row = {edge_var[e.id]: 1}
            for v in rets:
                row[v] = row.get(v, 0) - 1
            constraints.append((row, "=", 0))

    objective = {block_var[b]: block_times[b] for b in sorted(reach)}
    for p in pers_accesses:
        objective[p.name] = p.penalty

    return IlpModel(
        variables=variables,
        objective=objective,
        constraints=constraints,
        block_var=block_var,
        edge_var=edge_var,
        entry_block=entry,
        exit_edges=exit_edges,
        in_edges=in_edges,
        out_edges=out_edges,
        bounds=bounds,
        pers=pers_accesses,
        times=dict(block_times),
        call_pairs=call_pairs,
    )


# -- exact presolve + solve ---------------------------------------------------


class _Union:
    """Union-find over edge variable names; "#1" is the constant one."""

    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, v: str) -> str:
        p = self.parent.get(v, v)
        if p == v:
            return v
        r = self.find(p)
        self.parent[v] = r
        return r

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # The constant always wins as representative.
        if ra == "#1":
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb


def solve_model(model: IlpModel) -> tuple[int, dict[str, int], int]:
    """Exact optimum of the IPET model: (wcet, variable values, bnb nodes)."""
    uf = _Union()
    uf.union(ENTRY_EDGE, "#1")
    # Collapse chains: a block with one in-edge and one out-edge carries the
    # same flow on both sides.
    for b, var in model.block_var.items():
        ins_, outs = model.in_edges[b], model.out_edges[b]
        if len(ins_) == 1 and len(outs) == 1:
            uf.union(ins_[0], outs[0])

    def expr(vars_: list[str], extra_const: int = 0) -> tuple[dict[str, int], int]:
        coeffs: dict[str, int] = {}
        const = extra_const
        for v in vars_:
            r = uf.find(v)
            if r == "#1":
                const += 1
            else:
                coeffs[r] = coeffs.get(r, 0) + 1
        return coeffs, const

    reduced_cons: list[tuple[dict, str, object]] = []
    objective: dict[str, int] = {}
    obj_const = 0
    for b, var in model.block_var.items():
        coeffs, const = expr(model.in_edges[b])
        t = model.times[b]
        obj_const += t * const
        for v, k in coeffs.items():
            objective[v] = objective.get(v, 0) + t * k
        outs, oconst = expr(model.out_edges[b])
        if not model.out_edges[b]:
            # Dead-end non-halt block: force its in-flow to zero.
            if coeffs or const:
                reduced_cons.append((coeffs, "=", -const))
            continue
        row = dict(coeffs)
        for v, k in outs.items():
            row[v] = row.get(v, 0) - k
        row = {v: k for v, k in row.items() if k}
        rhs = oconst - const
        if row or rhs:
            reduced_cons.append((row, "=", rhs))

    for header, back, entries, bound in model.bounds:
        bcoef, bconst = expr(back)
        ecoef, econst = expr(entries)
        row = dict(bcoef)
        for v, k in ecoef.items():
            row[v] = row.get(v, 0) - bound * k
        row = {v: k for v, k in row.items() if k}
        reduced_cons.append((row, "<=", bound * econst - bconst))

    for p in model.pers:
        objective[p.name] = objective.get(p.name, 0) + p.penalty
        bcoef, bconst = expr(model.in_edges[p.block])
        row = {p.name: 1}
        for v, k in bcoef.items():
            row[v] = row.get(v, 0) - k
        reduced_cons.append((row, "<=", bconst))
        scope_entries = next((e for h, _, e, _ in model.bounds if h == p.scope), None)
        if scope_entries is not None:
            ecoef, econst = expr(scope_entries)
            row = {p.name: 1}
            for v, k in ecoef.items():
                row[v] = row.get(v, 0) - k
            reduced_cons.append((row, "<=", econst))

    for call_var, rets in model.call_pairs:
        rcoef, rconst = expr(rets)
        ccoef, cconst = expr([call_var])
        row = dict(ccoef)
        for v, k in rcoef.items():
            row[v] = row.get(v, 0) - k
        row = {v: k for v, k in row.items() if k}
        rhs = rconst - cconst
        if row or rhs:
            reduced_cons.append((row, "=", rhs))

    var_names = sorted({v for row, _, _ in reduced_cons for v in row} | set(objective))
    res = lp.solve_ilp(var_names, objective, reduced_cons)
    wcet = res.objective + obj_const
    if wcet != int(wcet):
        raise WcetError("non-integer WCET objective")  # all inputs are integers

    values: dict[str, int] = {ENTRY_EDGE: 1}
    for eid, var in model.edge_var.items():
        r = uf.find(var)
        values[var] = 1 if r == "#1" else res.values.get(r, 0)
    for p in model.pers:
        values[p.name] = res.values.get(p.name, 0)
    for b, var in model.block_var.items():
        values[var] = sum(values.get(v, 1 if v == ENTRY_EDGE else 0) for v in model.in_edges[b])
    for b, var in model.exit_edges.items():
        values[var] = values[model.block_var[b]]
    return int(wcet), values, res.nodes


# -- end-to-end driver ---------------------------------------------------------


@dataclass
class WcetReport:
    wcet: int
    block_counts: dict[int, int]
    block_times: dict[int, int]
    class_stats: dict[str, dict[str, int]]
    config: dict
    solver_nodes: int
    iclass: dict[int, CacheClass] | None = None
    dclass: dict[int, CacheClass] | None = None
    routes: dict[int, str] | None = None
    model: IlpModel | None = None

    def to_dict(self) -> dict:
        return {
            "wcet_cycles": self.wcet,
            "block_counts": {str(k): v for k, v in sorted(self.block_counts.items())},
            "block_times": {str(k): v for k, v in sorted(self.block_times.items())},
            "classification": self.class_stats,
            "config": self.config,
            "solver_nodes": self.solver_nodes,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


def _stats(classes: dict[int, CacheClass]) -> dict[str, int]:
    out = {ALWAYS_HIT: 0, PERSISTENT: 0, NOT_CLASSIFIED: 0}
    for c in classes.values():
        out[c.kind] += 1
    return out


def compute_wcet(
    prog: Program,
    hw: HardwareConfig,
    placement=None,
    layout=None,
) -> WcetReport:
    """Static WCET: cache analyses -> block times -> IPET -> exact ILP."""
    if not prog.blocks:
        raise WcetError("program has no CFG; run build_cfg first")
    if not cfglib.call_graph_is_acyclic(prog):
        raise WcetError("recursive programs are not analyzable")
    placed = placed_symbol_names(placement)
    if placed and hw.spm is None:
        raise WcetError("placement map given but hardware has no SPM")
    if layout is not None and not hw.pipeline.decompression_stage:
        raise WcetError("compression layout given but pipeline has no decompression stage")

    loops = cfglib.natural_loops(prog)
    iclass = icache_analysis(prog, hw.icache, layout)
    sites = resolve_data_sites(prog)
    dclass, routes = dcache_analysis(prog, hw.dcache, placed, sites)

    reach = cfglib.reachable_blocks(prog)
    times = {}
    for blk in prog.blocks:
        if blk.id in reach:
            times[blk.id] = block_time(blk, hw, iclass, dclass, routes, layout)

    # Persistent accesses become ILP miss variables.
    pers: list[PersVar] = []
    istreams = ifetch_streams(prog, layout)
    i_pen = hw.miss_stall(hw.icache)
    d_pen = hw.miss_stall(hw.dcache) if hw.dcache is not None else 0
    for blk in prog.blocks:
        if blk.id not in reach:
            continue
        for _, faddr, key in istreams[blk.id]:
            cls = iclass.get(key)
            if cls is not None and cls.kind == PERSISTENT:
                pers.append(PersVar(f"mi_{key:x}", i_pen, blk.id, cls.scope))
        for ins in blk.instrs:
            if ins.is_mem and routes.get(ins.address) == "cache":
                cls = dclass.get(ins.address)
                if cls is not None and cls.kind == PERSISTENT:
                    pers.append(PersVar(f"md_{ins.address:x}", d_pen, blk.id, cls.scope))

    model = build_ipet(prog, times, pers, loops)
    wcet, values, nodes = solve_model(model)
    counts = {b: values[v] for b, v in model.block_var.items()}
    return WcetReport(
        wcet=wcet,
        block_counts=counts,
        block_times=times,
        class_stats={"icache": _stats(iclass), "dcache": _stats(dclass)},
        config={
            "hw": hw.name,
            "placement": sorted(placed) if placed else None,
            "compression": layout is not None,
        },
        solver_nodes=nodes,
        iclass=iclass,
        dclass=dclass,
        routes=routes,
        model=model,
    )
