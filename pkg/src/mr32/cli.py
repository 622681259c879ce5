"""Command-line interface for the workbench.

Verbs: asm, sim, trace, place, compress, transform, wcet, energy, run,
sweep. Every verb accepts --hw (a preset name like config1/config2 or a JSON
config path); PROGRAM arguments accept a shipped benchmark name or a .masm
path. Failures print a stage-named diagnostic and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, compress, spm, transform
from .asm import disassemble
from .energy import estimate_energy
from .errors import Mr32Error
from .experiment import ExperimentPoint, run_point, run_sweep
from .sim import AccessTrace, Counters, SimOptions, simulate
from .spm import PlacementMap
from .wcet import compute_wcet


def _add_common(sp: argparse.ArgumentParser, needs_hw: bool = True) -> None:
    sp.add_argument("--hw", default="config1", help="hardware preset name or config JSON path")
    sp.add_argument("-o", "--output", default=None, help="output file")


def _load_point_inputs(args) -> dict | None:
    return bench.load_input(args.program, args.input) if args.input else None


def _sim_options(args, prog) -> SimOptions:
    placement = PlacementMap.load(args.placement) if getattr(args, "placement", None) else None
    layout = (
        compress.CompressionLayout.load(args.compression)
        if getattr(args, "compression", None)
        else None
    )
    return SimOptions(
        placement=placement,
        layout=layout,
        input_data=bench.load_input(args.program, args.input),
        cycle_limit=args.cycle_limit,
    )


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mr32", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("asm", help="assemble and report program structure")
    p.add_argument("program")
    _add_common(p)

    for verb in ("sim", "trace"):
        p = sub.add_parser(verb, help="simulate" if verb == "sim" else "record a data-access trace")
        p.add_argument("program")
        p.add_argument("--input", default=None, help="input vector id or JSON path")
        p.add_argument("--placement", default=None, help="placement map file")
        p.add_argument("--compression", default=None, help="compression layout file")
        p.add_argument("--cycle-limit", type=int, default=10_000_000)
        _add_common(p)

    p = sub.add_parser("place", help="build an SPM placement map from a trace")
    p.add_argument("program")
    p.add_argument("--strategy", required=True, choices=spm.STRATEGIES)
    p.add_argument("--trace", required=True, help="trace file from the trace verb")
    _add_common(p)

    p = sub.add_parser("compress", help="build a dictionary compression layout")
    p.add_argument("program")
    p.add_argument("-P", type=int, required=True, help="percent of dictionary filled by execution counts")
    p.add_argument("--profile", default=None, help="sim report JSON with exec counts (else pre-run)")
    p.add_argument("--input", default=None, help="profiling input for the pre-run")
    _add_common(p)

    p = sub.add_parser("transform", help="apply a transform script, emit new assembly")
    p.add_argument("program")
    p.add_argument("--script", required=True, help="script file or shipped script name")
    _add_common(p)

    p = sub.add_parser("wcet", help="static worst-case execution time")
    p.add_argument("program")
    p.add_argument("--placement", default=None)
    p.add_argument("--compression", default=None)
    _add_common(p)

    p = sub.add_parser("energy", help="recompute an energy report from saved counters")
    p.add_argument("--counters", required=True, help="sim report JSON")
    _add_common(p)

    p = sub.add_parser("run", help="evaluate one experiment point on all criteria")
    p.add_argument("--bench", required=True)
    p.add_argument("--transform", default="none", help="none | place:S | compress:P | script:NAME")
    p.add_argument("--input", default="in1")
    _add_common(p)

    p = sub.add_parser("sweep", help="sweep a parameter grid, emit records and a CSV series")
    p.add_argument("--bench", required=True)
    p.add_argument("--param", default="P", choices=("P", "placement"))
    p.add_argument("--grid", default="0,25,50,75,100")
    p.add_argument("--input", default="in1")
    _add_common(p)

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except Mr32Error as e:
        print(f"{e.stage}: {e}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    verb = args.verb

    if verb == "asm":
        prog = bench.load_program(args.program)
        info = {
            "functions": [
                {"name": fn.name, "instructions": len(fn.instrs), "blocks": len(fn.blocks)}
                for fn in prog.functions
            ],
            "instructions": sum(len(fn.instrs) for fn in prog.functions),
            "blocks": len(prog.blocks),
            "edges": len(prog.edges),
            "text_bytes": prog.text_size,
            "data_symbols": {s.name: s.size for s in prog.data_symbols},
            "flow_facts": {f.label: f.bound for f in prog.flow_facts.values()},
        }
        _write(args.output, json.dumps(info, indent=1, sort_keys=True) + "\n")
        return 0

    if verb in ("sim", "trace"):
        prog = bench.load_program(args.program)
        hw = bench.resolve_hw(args.hw)
        opts = _sim_options(args, prog)
        opts.record_trace = verb == "trace"
        res = simulate(prog, hw, opts)
        if verb == "trace":
            if not args.output:
                raise Mr32Error("trace needs -o FILE")
            res.trace.save(args.output)
        else:
            report = res.to_dict()
            report["energy"] = estimate_energy(res.counters, hw.energy).to_dict()
            _write(args.output, json.dumps(report, indent=1, sort_keys=True) + "\n")
        return 0

    if verb == "place":
        prog = bench.load_program(args.program)
        hw = bench.resolve_hw(args.hw)
        if hw.spm is None:
            raise Mr32Error("placement needs hardware with an SPM")
        trace = AccessTrace.load(args.trace)
        pm = spm.build_placement(prog, trace, args.strategy, hw.spm.size)
        if not args.output:
            raise Mr32Error("place needs -o FILE")
        pm.save(args.output)
        return 0

    if verb == "compress":
        prog = bench.load_program(args.program)
        hw = bench.resolve_hw(args.hw)
        if args.profile:
            report = json.loads(Path(args.profile).read_text())
            exec_counts = {int(a, 16): n for a, n in report["exec_counts"].items()}
        else:
            pre = simulate(
                prog, hw, SimOptions(input_data=bench.load_input(args.program, args.input))
            )
            exec_counts = pre.exec_counts
        layout = compress.build_layout(prog, exec_counts, args.P)
        if not args.output:
            raise Mr32Error("compress needs -o FILE")
        layout.save(args.output)
        rep = compress.compression_report(layout)
        print(
            f"compressed {rep.original_bytes} -> {rep.compressed_bytes} bytes "
            f"(ratio {rep.ratio:.3f}, {rep.groups} groups, "
            f"{rep.dictionary_entries} dictionary entries)",
            file=sys.stderr,
        )
        return 0

    if verb == "transform":
        prog = bench.load_program(args.program)
        cmds = transform.parse_script(bench.script_text(args.script))
        out = transform.apply_script(prog, cmds)
        _write(args.output, disassemble(out))
        return 0

    if verb == "wcet":
        prog = bench.load_program(args.program)
        hw = bench.resolve_hw(args.hw)
        placement = PlacementMap.load(args.placement) if args.placement else None
        layout = compress.CompressionLayout.load(args.compression) if args.compression else None
        rep = compute_wcet(prog, hw, placement=placement, layout=layout)
        _write(args.output, json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")
        return 0

    if verb == "energy":
        hw = bench.resolve_hw(args.hw)
        report = json.loads(Path(args.counters).read_text())
        counters = Counters.from_dict(report["counters"] if "counters" in report else report)
        rep = estimate_energy(counters, hw.energy)
        _write(args.output, json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")
        return 0

    if verb == "run":
        rec = run_point(ExperimentPoint(args.bench, args.hw, args.transform, args.input))
        _write(args.output, json.dumps(rec.to_dict(), indent=1, sort_keys=True) + "\n")
        return 0

    if verb == "sweep":
        grid = [g.strip() for g in args.grid.split(",") if g.strip()]
        records, csv_text = run_sweep(args.bench, args.hw, args.param, grid, args.input)
        if args.output:
            outdir = Path(args.output)
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / "sweep.csv").write_text(csv_text)
            for value, rec in zip(grid, records):
                rec.save(outdir / f"point_{args.param}_{value}.json")
        else:
            sys.stdout.write(csv_text)
        return 0

    raise Mr32Error(f"unknown verb {verb}")


if __name__ == "__main__":
    sys.exit(main())
