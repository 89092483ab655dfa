"""
Command-line driver: compile, simulate, check and inspect.

Exit codes: 0 on success, 1 when the input is rejected (parse, type, compile, scenario or
coherence failures), 2 on usage errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from illum.core.config import configure_logging, settings
from illum.core.errors import IllumError
from illum.models.configuration import Configuration
from illum.models.runs import BroadcastLabel, ComputationalRun, DelayLabel, SymbolicRun, TxLabel
from illum.models.transaction import Blockchain
from illum.services import serialization
from illum.services.coherence import check_balance_preservation, check_coherence, parse_run
from illum.services.compiler import compile_unit
from illum.services.hellum_codegen import LoweredContract
from illum.services.hellum_parser import print_normal_form
from illum.services.illum_syntax import format_program
from illum.services.scenarios import load_contract, load_scenario, run_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _write(text: str, output: Optional[Path]):
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")
        logger.info(f"✅ Wrote {output}")


def _report_error(e: IllumError) -> int:
    sys.stderr.write(json.dumps(e.to_dict(), indent=settings.ARTIFACT_INDENT) + "\n")
    return EXIT_FAILURE


# Commands

def cmd_compile(args: argparse.Namespace) -> int:
    source = Path(args.input)
    if source.suffix not in (".hll", ".ill"):
        sys.stderr.write(f"compile: expected a .hll or .ill file, got {source}\n")
        return EXIT_USAGE
    contract = load_contract(source)
    lowered = contract if isinstance(contract, LoweredContract) else None
    program = lowered.program if lowered else contract

    if args.target == "nf":
        if lowered is None:
            sys.stderr.write("compile: --target nf needs a HeLLUM contract\n")
            return EXIT_USAGE
        _write("\n\n".join(print_normal_form(nf) for nf in lowered.normal_forms) + "\n", args.output)
    elif args.target == "illum":
        _write(format_program(program), args.output)
    else:
        root = args.root or (lowered.root if lowered else program.clauses[0].name)
        unit = compile_unit(root, program)
        artifact = {"root": unit.root, "reachable": list(unit.reachable), "script": unit.script}
        _write(serialization.dumps(artifact, kind="CompilationUnit"), args.output)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    path = Path(args.scenario)
    scenario = load_scenario(path)
    result = run_scenario(scenario, args.seed, base_dir=path.parent)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    serialization.save_run(result.symbolic, result.program, out_dir / "symbolic_run.json", result.maps)
    serialization.save_run(result.computational, result.program, out_dir / "computational_run.json")
    sys.stdout.write(json.dumps(result.summary(), indent=settings.ARTIFACT_INDENT) + "\n")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    rs, program, maps = serialization.load_run(args.symbolic)
    rc, _, _ = serialization.load_run(args.computational)
    if not isinstance(rs, SymbolicRun) or not isinstance(rc, ComputationalRun):
        sys.stderr.write("check: expected a symbolic and a computational run\n")
        return EXIT_USAGE
    coherence = check_coherence(rs, rc, maps, program)
    report = {"coherent": bool(coherence)}
    if not coherence:
        report["counterexample"] = coherence.to_dict()
    try:
        if maps is None:
            _, maps = parse_run(rc, program)
        balance = check_balance_preservation(rs, rc, maps)
        report["balance"] = {
            "ok": balance.ok,
            "violations": [{"term": v.term, "output": v.output, "reason": v.reason} for v in balance.violations],
        }
    except IllumError as e:
        report["balance"] = {"ok": False, "violations": [{"term": "-", "output": "-", "reason": e.message}]}
    sys.stdout.write(json.dumps(report, indent=settings.ARTIFACT_INDENT) + "\n")
    ok = report["coherent"] and report["balance"]["ok"]
    if ok:
        logger.info("✅ Runs are coherent and balance-preserving")
    else:
        logger.error("❌ Runs do not check")
    return EXIT_OK if ok else EXIT_FAILURE


def _describe_label(label) -> str:
    if isinstance(label, TxLabel):
        tx = label.tx
        return f"tx {tx.tx_id.hex()[:12]} inputs={len(tx.inputs)} outputs={len(tx.outputs)}"
    if isinstance(label, DelayLabel):
        return f"delay {label.delta}"
    if isinstance(label, BroadcastLabel):
        sender = label.sender if label.sender is not None else "adversary"
        return f"{sender} broadcasts {type(label.message).__name__}"
    return repr(label)


def render(obj) -> str:
    """Human-readable form of a loaded artifact"""
    if isinstance(obj, SymbolicRun):
        lines = [f"0. {obj.initial}"]
        for k, (act, g) in enumerate(zip(obj.actions, obj.configurations), start=1):
            lines.append(f"{k}. --{act.label}--> {g}")
        return "\n".join(lines)
    if isinstance(obj, ComputationalRun):
        header = f"seed {obj.seed}" if obj.seed is not None else "no seed"
        return "\n".join([header] + [f"{k}. {_describe_label(l)}" for k, l in enumerate(obj.labels, start=1)])
    if isinstance(obj, Blockchain):
        return "\n".join(
            f"t={e.time} {e.tx_id.hex()[:12]} inputs={len(e.tx.inputs)} outputs={len(e.tx.outputs)}"
            for e in obj.entries
        )
    if isinstance(obj, Configuration):
        return str(obj)
    return json.dumps(serialization.to_plain(obj), indent=settings.ARTIFACT_INDENT, sort_keys=True)


def cmd_inspect(args: argparse.Namespace) -> int:
    _write(render(serialization.load(args.artifact)) + "\n", None)
    return EXIT_OK


# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="illum", description="ILLUM and HeLLUM toolchain")
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    compile_ = commands.add_parser("compile", help="Lower a contract to clauses, scripts or normal forms")
    compile_.add_argument("input", help="A .hll or .ill file")
    compile_.add_argument("--target", choices=("illum", "script", "nf"), default="illum")
    compile_.add_argument("-o", "--output", type=Path, help="Output file (default: stdout)")
    compile_.add_argument("--root", help="Root clause for --target script")
    compile_.set_defaults(handler=cmd_compile)

    simulate = commands.add_parser("simulate", help="Replay a scenario at both levels")
    simulate.add_argument("scenario", help="Scenario JSON file")
    simulate.add_argument("--seed", type=int, required=True)
    simulate.add_argument("--out-dir", default=".", help="Where the run artifacts are written")
    simulate.set_defaults(handler=cmd_simulate)

    check = commands.add_parser("check", help="Check coherence and balance preservation of two runs")
    check.add_argument("symbolic", help="symbolic_run.json")
    check.add_argument("computational", help="computational_run.json")
    check.set_defaults(handler=cmd_check)

    inspect = commands.add_parser("inspect", help="Pretty-print a run, chain or configuration")
    inspect.add_argument("artifact")
    inspect.set_defaults(handler=cmd_inspect)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except IllumError as e:
        logger.error(f"❌ {args.command} failed: {e.code}: {e.message}")
        return _report_error(e)


if __name__ == "__main__":
    sys.exit(main())
