"""Abstract-interpretation cache analysis: LRU must states plus persistence.

Must analysis runs to fixpoint over the whole-program graph (real edges,
calls and returns included), with the join keeping only lines present in all
predecessors at their maximal age; a line surviving the join is guaranteed
cached, so its access is ALWAYS_HIT. Unknown data accesses clear the state
(maximal damage).

Persistence uses the classic per-set criterion: within a loop's dynamic
extent (its blocks plus everything transitively callable from them), if a
cache set sees at most ``associativity`` distinct lines, each of those lines
can miss at most once per loop entry. Scopes are assigned outermost-first but
only to accesses in the loop's own function, which keeps the bound
``misses <= scope entries`` valid for callees shared between contexts.

The instruction stream and the data stream share this engine; they differ
only in how block access streams are extracted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import cfg as cfglib
from .. import compress
from ..errors import WcetError
from ..hw import CacheConfig
from ..program import EdgeKind, Program
from .addrres import SiteAddr

ALWAYS_HIT = "AH"
PERSISTENT = "PERS"
NOT_CLASSIFIED = "NC"

# Stream items: ("line", byte_addr, site_key) or ("unknown", site_key).
Stream = dict[int, list[tuple]]


@dataclass
class CacheClass:
    kind: str
    scope: int | None = None  # loop header block id for PERSISTENT


def ifetch_streams(prog: Program, layout) -> Stream:
    return {
        blk.id: [("line", faddr, faddr) for faddr, _ in compress.fetch_units(blk, layout)]
        for blk in prog.blocks
    }


def dcache_streams(
    prog: Program,
    placed: set[str],
    sites: dict[int, SiteAddr],
) -> tuple[Stream, dict[int, str]]:
    """Access stream per block plus the route of every memory site.

    Routes: "spm" (placed, fixed latency), "out" (output window, bypassed),
    "cache" (analyzed). SPM and output accesses are excluded from the stream
    entirely: they neither disturb nor consult the cache.
    """
    streams: Stream = {}
    routes: dict[int, str] = {}
    for blk in prog.blocks:
        items: list[tuple] = []
        for ins in blk.instrs:
            if not ins.is_mem:
                continue
            sa = sites[ins.address]
            if sa.resolved and sa.symbol == "out":
                routes[ins.address] = "out"
            elif sa.resolved and sa.symbol in placed:
                routes[ins.address] = "spm"
            elif sa.resolved and sa.address is not None:
                routes[ins.address] = "cache"
                items.append(("line", sa.address, ins.address))
            else:
                routes[ins.address] = "cache"
                items.append(("unknown", ins.address))
        streams[blk.id] = items
    return streams, routes


class _Must:
    """Per-set line->age maps; absence means possibly not cached."""

    def __init__(self, cfg: CacheConfig):
        self.sets = cfg.sets
        self.assoc = cfg.assoc
        self.shift = cfg.line.bit_length() - 1
        self.mask = cfg.sets - 1

    def empty(self) -> list[dict[int, int]]:
        return [{} for _ in range(self.sets)]

    def copy(self, st):
        return [dict(s) for s in st]

    def join(self, a, b):
        if a is None:
            return self.copy(b)
        out = []
        for sa, sb in zip(a, b):
            out.append({l: max(sa[l], sb[l]) for l in sa.keys() & sb.keys()})
        return out

    def line_set(self, addr: int) -> tuple[int, int]:
        line = addr >> self.shift
        return line, line & self.mask

    def access(self, st, addr: int) -> bool:
        """Apply one access; returns True when it is a guaranteed hit."""
        line, si = self.line_set(addr)
        s = st[si]
        old = s.get(line)
        if old is not None:
            for l, a in s.items():
                if a < old:
                    s[l] = a + 1
            s[line] = 0
            return True
        for l in list(s):
            a = s[l] + 1
            if a >= self.assoc:
                del s[l]
            else:
                s[l] = a
        s[line] = 0
        return False

    def clear(self, st) -> None:
        for s in st:
            s.clear()

    def equal(self, a, b) -> bool:
        return a is not None and b is not None and a == b


def must_analysis(
    prog: Program, cache_cfg: CacheConfig, streams: Stream
) -> dict[int, str]:
    """Fixpoint must analysis; classification AH / NC per site key."""
    dom = _Must(cache_cfg)
    entry = prog.entry_function.blocks[0].id
    in_states: dict[int, list | None] = {blk.id: None for blk in prog.blocks}
    in_states[entry] = dom.empty()
    work = [entry]
    pops = 0
    cap = 16 * len(prog.blocks) * (cache_cfg.assoc * cache_cfg.sets + 2) + 256
    while work:
        pops += 1
        if pops > cap:
            raise WcetError("must-analysis fixpoint exceeded its iteration cap")
        bid = work.pop(0)
        st = dom.copy(in_states[bid])
        for item in streams.get(bid, ()):
            if item[0] == "line":
                dom.access(st, item[1])
            else:
                dom.clear(st)
        for e in prog.blocks[bid].succs:
            if not e.kind.is_real:
                continue
            merged = dom.join(in_states[e.dst], st)
            if in_states[e.dst] is None or not dom.equal(in_states[e.dst], merged):
                in_states[e.dst] = merged
                if e.dst not in work:
                    work.append(e.dst)

    out: dict[int, str] = {}
    for blk in prog.blocks:
        st = in_states[blk.id]
        if st is None:
            for item in streams.get(blk.id, ()):
                out[item[-1]] = NOT_CLASSIFIED
            continue
        st = dom.copy(st)
        for item in streams.get(blk.id, ()):
            if item[0] == "line":
                hit = dom.access(st, item[1])
                out[item[2]] = ALWAYS_HIT if hit else NOT_CLASSIFIED
            else:
                out[item[1]] = NOT_CLASSIFIED
                dom.clear(st)
    return out


def persistence_scopes(
    prog: Program,
    cache_cfg: CacheConfig,
    streams: Stream,
    loops: list[cfglib.Loop],
) -> dict[int, int]:
    """site key -> loop header block id, outermost qualifying scope first."""
    dom = _Must(cache_cfg)
    scopes: dict[int, int] = {}
    for loop in sorted(loops, key=lambda L: (-len(L.body), L.header)):
        ext = set(loop.body)
        for callee in cfglib.callees_of(prog, loop.body):
            ext |= {b.id for b in prog.function(callee).blocks}
        lines_per_set: dict[int, set[int]] = {}
        ok = True
        for b in ext:
            for item in streams.get(b, ()):
                if item[0] == "unknown":
                    ok = False
                    break
                line, si = dom.line_set(item[1])
                lines_per_set.setdefault(si, set()).add(line)
            if not ok:
                break
        if not ok:
            continue
        good = {s for s, ls in lines_per_set.items() if len(ls) <= cache_cfg.assoc}
        for b in loop.body:
            for item in streams.get(b, ()):
                _, addr, key = item[0], item[1], item[-1]
                if dom.line_set(addr)[1] in good and key not in scopes:
                    scopes[key] = loop.header
    return scopes


def classify(
    prog: Program,
    cache_cfg: CacheConfig,
    streams: Stream,
    loops: list[cfglib.Loop],
) -> dict[int, CacheClass]:
    """AH beats PERSISTENT beats NOT_CLASSIFIED, per site key."""
    must = must_analysis(prog, cache_cfg, streams)
    pers = persistence_scopes(prog, cache_cfg, streams, loops)
    out: dict[int, CacheClass] = {}
    for key, kind in must.items():
        if kind == ALWAYS_HIT:
            out[key] = CacheClass(ALWAYS_HIT)
        elif key in pers:
            out[key] = CacheClass(PERSISTENT, scope=pers[key])
        else:
            out[key] = CacheClass(NOT_CLASSIFIED)
    return out


def icache_analysis(prog: Program, icache_cfg: CacheConfig, layout=None) -> dict[int, CacheClass]:
    """Classification for every fetched word (compressed addresses when given)."""
    loops = cfglib.natural_loops(prog)
    return classify(prog, icache_cfg, ifetch_streams(prog, layout), loops)


def dcache_analysis(
    prog: Program,
    dcache_cfg: CacheConfig | None,
    placed: set[str],
    sites: dict[int, SiteAddr],
) -> tuple[dict[int, CacheClass], dict[int, str]]:
    """Classification per load/store site plus each site's route."""
    streams, routes = dcache_streams(prog, placed, sites)
    if dcache_cfg is None:
        classes = {
            key: CacheClass(NOT_CLASSIFIED)
            for items in streams.values()
            for item in items
            for key in [item[-1]]
        }
        routes = {k: ("dram" if v == "cache" else v) for k, v in routes.items()}
        return classes, routes
    loops = cfglib.natural_loops(prog)
    return classify(prog, dcache_cfg, streams, loops), routes
