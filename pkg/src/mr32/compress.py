"""Dictionary-based code compression, emulated through address annotations.

The dictionary holds up to 256 distinct instruction words. A parameter P
splits its capacity: P% is filled with the most executed words, the rest with
the most statically repeated ones (a word that appears once in the code never
earns a static slot: storing it twice would grow the image). Groups of 2 or 3
consecutive dictionary words inside one basic block collapse into a single
32-bit encoding word, spelled with a reserved-invalid opcode (ESC2/ESC3) and
the 8-bit dictionary indexes. No binary is re-emitted: the layout assigns
each instruction the address it would have in the compressed image, and the
simulator and the WCET analysis walk those addresses instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import isa
from .errors import Mr32Error
from .isa import COMPRESSIBLE_KINDS, ESC2_OPCODE, ESC3_OPCODE
from .program import BasicBlock, Program

DICT_CAPACITY = 256


@dataclass
class DictEntry:
    word: int
    static_count: int
    dynamic_count: int
    source: str  # "dynamic" (P portion) or "static"


@dataclass
class Dictionary:
    entries: list[DictEntry] = field(default_factory=list)

    def __post_init__(self):
        self._index = {e.word: i for i, e in enumerate(self.entries)}

    def index_of(self, word: int) -> int | None:
        return self._index.get(word)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: int) -> bool:
        return word in self._index


@dataclass
class Group:
    block_id: int
    members: list[int]  # instruction addresses (original), consecutive
    indices: list[int]
    kind: str  # "ESC2" / "ESC3"


@dataclass
class CompressionLayout:
    dictionary: Dictionary
    groups: list[Group]
    addr_of: dict[int, int]  # original address -> compressed address
    original_bytes: int
    compressed_bytes: int

    def __post_init__(self):
        self.group_leader: dict[int, Group] = {g.members[0]: g for g in self.groups}
        self.groups_in_block: dict[int, list[Group]] = {}
        for g in self.groups:
            self.groups_in_block.setdefault(g.block_id, []).append(g)

    @property
    def dictionary_bytes(self) -> int:
        return len(self.dictionary) * isa.WORD_SIZE

    def save(self, path: str | Path) -> None:
        d = {
            "dictionary": [
                {
                    "word": f"0x{e.word:08x}",
                    "static": e.static_count,
                    "dynamic": e.dynamic_count,
                    "source": e.source,
                }
                for e in self.dictionary.entries
            ],
            "groups": [
                {
                    "block": g.block_id,
                    "members": [f"0x{a:x}" for a in g.members],
                    "indices": g.indices,
                    "kind": g.kind,
                }
                for g in self.groups
            ],
            "addresses": {f"0x{a:x}": f"0x{c:x}" for a, c in sorted(self.addr_of.items())},
            "original_bytes": self.original_bytes,
            "compressed_bytes": self.compressed_bytes,
        }
        Path(path).write_text(json.dumps(d, indent=1) + "\n")

    @staticmethod
    def load(path: str | Path) -> "CompressionLayout":
        d = json.loads(Path(path).read_text())
        dictionary = Dictionary(
            [
                DictEntry(int(e["word"], 16), e["static"], e["dynamic"], e["source"])
                for e in d["dictionary"]
            ]
        )
        groups = [
            Group(g["block"], [int(a, 16) for a in g["members"]], g["indices"], g["kind"])
            for g in d["groups"]
        ]
        addr_of = {int(a, 16): int(c, 16) for a, c in d["addresses"].items()}
        return CompressionLayout(
            dictionary, groups, addr_of, d["original_bytes"], d["compressed_bytes"]
        )


def fetch_units(block: BasicBlock, layout: CompressionLayout | None) -> list[tuple[int, int]]:
    """Fetch stream of a block: (fetch word address, instructions covered).

    This single derivation feeds both the simulator and the I-cache analysis,
    so the two can never disagree about which words a block fetches.
    """
    if layout is None:
        return [(ins.address, 1) for ins in block.instrs]
    units: list[tuple[int, int]] = []
    skip = 0
    for ins in block.instrs:
        if skip:
            skip -= 1
            continue
        g = layout.group_leader.get(ins.address)
        if g is not None:
            units.append((layout.addr_of[ins.address], len(g.members)))
            skip = len(g.members) - 1
        else:
            units.append((layout.addr_of[ins.address], 1))
    return units


def profile_counts(prog: Program, exec_counts) -> tuple[dict[int, int], dict[int, int]]:
    """Static and dynamic word histograms.

    ``exec_counts`` is a SimResult, or any mapping from instruction address to
    execution count, produced by simulating the same (uncompressed) program.
    """
    if hasattr(exec_counts, "exec_counts"):
        exec_counts = exec_counts.exec_counts
    static: dict[int, int] = {}
    dynamic: dict[int, int] = {}
    for ins in prog.instructions():
        static[ins.word] = static.get(ins.word, 0) + 1
        n = exec_counts.get(ins.address, 0)
        if n:
            dynamic[ins.word] = dynamic.get(ins.word, 0) + n
    return static, dynamic


def _compressible_word(word: int) -> bool:
    op = (word >> 24) & 0xFF
    if op >= isa.INVALID_OPCODE_MIN:
        return False
    return isa.KIND_OF[isa.Opcode(op)] in COMPRESSIBLE_KINDS


def dynamic_slots(p_percent: int, capacity: int = DICT_CAPACITY) -> int:
    """round(P/100 * capacity), half up."""
    return (p_percent * capacity * 2 + 100) // 200


def build_dictionary(
    static_hist: dict[int, int],
    dynamic_hist: dict[int, int],
    p_percent: int,
    capacity: int = DICT_CAPACITY,
) -> Dictionary:
    if not 0 <= p_percent <= 100:
        raise Mr32Error(f"P must be in 0..100, got {p_percent}")
    k = dynamic_slots(p_percent, capacity)
    entries: list[DictEntry] = []
    chosen: set[int] = set()

    dyn_candidates = [
        w
        for w, n in dynamic_hist.items()
        if n > 0 and _compressible_word(w)
    ]
    dyn_candidates.sort(key=lambda w: (-dynamic_hist[w], -static_hist.get(w, 0), w))
    for w in dyn_candidates[:k]:
        entries.append(DictEntry(w, static_hist.get(w, 0), dynamic_hist[w], "dynamic"))
        chosen.add(w)

    stat_candidates = [
        w
        for w, n in static_hist.items()
        if n >= 2 and w not in chosen and _compressible_word(w)
    ]
    stat_candidates.sort(key=lambda w: (-static_hist[w], -dynamic_hist.get(w, 0), w))
    for w in stat_candidates[: capacity - len(entries)]:
        entries.append(DictEntry(w, static_hist[w], dynamic_hist.get(w, 0), "static"))
        chosen.add(w)

    return Dictionary(entries)


def select_groups(prog: Program, dictionary: Dictionary) -> CompressionLayout:
    """Greedy left-to-right group selection and compressed address layout."""
    if not prog.blocks:
        raise Mr32Error("program has no CFG; run build_cfg first")
    groups: list[Group] = []
    grouped: dict[int, Group] = {}  # member address -> group
    for blk in prog.blocks:
        instrs = blk.instrs
        i = 0
        while i < len(instrs):
            run = []
            for j in range(i, min(i + 3, len(instrs))):
                ins = instrs[j]
                if ins.kind not in COMPRESSIBLE_KINDS or ins.word not in dictionary:
                    break
                run.append(ins)
            if len(run) >= 3:
                g = Group(
                    blk.id,
                    [r.address for r in run[:3]],
                    [dictionary.index_of(r.word) for r in run[:3]],
                    "ESC3",
                )
            elif len(run) == 2:
                g = Group(
                    blk.id,
                    [r.address for r in run],
                    [dictionary.index_of(r.word) for r in run],
                    "ESC2",
                )
            else:
                i += 1
                continue
            groups.append(g)
            for a in g.members:
                grouped[a] = g
            i += len(g.members)

    addr_of: dict[int, int] = {}
    caddr = 0
    n_instr = 0
    for fn in prog.functions:
        for ins in fn.instrs:
            n_instr += 1
            g = grouped.get(ins.address)
            if g is not None:
                if ins.address == g.members[0]:
                    g_caddr = caddr
                    caddr += isa.WORD_SIZE
                    for a in g.members:
                        addr_of[a] = g_caddr
                # non-leader members already mapped
            else:
                addr_of[ins.address] = caddr
                caddr += isa.WORD_SIZE

    original = n_instr * isa.WORD_SIZE
    return CompressionLayout(
        dictionary=dictionary,
        groups=groups,
        addr_of=addr_of,
        original_bytes=original,
        compressed_bytes=caddr,
    )


def encode_group(group: Group, dictionary: Dictionary) -> int:
    if any(i >= DICT_CAPACITY for i in group.indices):
        raise Mr32Error("dictionary index out of range")
    ids = group.indices
    if group.kind == "ESC3":
        return (ESC3_OPCODE << 24) | (ids[0] << 16) | (ids[1] << 8) | ids[2]
    return (ESC2_OPCODE << 24) | (ids[0] << 16) | (ids[1] << 8)


def decode_group(word: int, dictionary: Dictionary) -> list[int]:
    """Expand an encoding word back to its member instruction words."""
    op = (word >> 24) & 0xFF
    idxs = [(word >> 16) & 0xFF, (word >> 8) & 0xFF, word & 0xFF]
    if op == ESC3_OPCODE:
        take = idxs
    elif op == ESC2_OPCODE:
        take = idxs[:2]
    else:
        raise Mr32Error(f"not an encoding word: 0x{word:08x}")
    return [dictionary.entries[i].word for i in take]


@dataclass
class CompressionReport:
    original_bytes: int
    compressed_bytes: int
    ratio: float
    ratio_with_dictionary: float
    groups: int
    dictionary_entries: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compression_report(layout: CompressionLayout) -> CompressionReport:
    with_dict = layout.compressed_bytes + layout.dictionary_bytes
    return CompressionReport(
        original_bytes=layout.original_bytes,
        compressed_bytes=layout.compressed_bytes,
        ratio=layout.compressed_bytes / layout.original_bytes,
        ratio_with_dictionary=with_dict / layout.original_bytes,
        groups=len(layout.groups),
        dictionary_entries=len(layout.dictionary),
    )


def build_layout(prog: Program, exec_counts, p_percent: int) -> CompressionLayout:
    """profile -> dictionary -> groups, the usual pipeline."""
    static_hist, dynamic_hist = profile_counts(prog, exec_counts)
    dictionary = build_dictionary(static_hist, dynamic_hist, p_percent)
    layout = select_groups(prog, dictionary)
    annotate_layout(prog, layout)
    return layout


def annotate_layout(prog: Program, layout: CompressionLayout) -> None:
    """Record each instruction's compressed address in the annotation store."""
    for addr, caddr in layout.addr_of.items():
        prog.annotate(addr, "compressed_addr", caddr)
