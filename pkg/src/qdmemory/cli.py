"""Command-line entry point: ``qdmem {simulate,analyze,sweep,reproduce-paper}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import formats, pipeline, reproduce
from .errors import FormatError, ParameterError, ScenarioError
from .scenario import load, reference_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("qdmemory")


def _scenario(args):
    sc = load(args.scenario) if args.scenario else reference_scenario()
    if args.seed is not None:
        sc = sc.with_run(seed=args.seed)
    return sc


def _taus(args, sc):
    if args.tau is None:
        return list(sc.run.tau_s)
    return [t for group in args.tau for t in group]


def _tau_list(text: str) -> list[float]:
    """Comma-separated storage times; an empty string means none."""
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    sweep = pipeline.parse_sweep(args.sweep_tau) if args.sweep_tau else None
    out = pipeline.run_simulate(sc, args.out, taus=_taus(args, sc), sweep=sweep)
    print(f"wrote {out / 'manifest.json'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    taus = pipeline.parse_sweep(args.sweep_tau)
    out = pipeline.run_simulate(sc, args.out, taus=[], sweep=taus)
    if not args.no_figures:
        from . import plotting

        rows = [[float(v) for v in line.split(",")] for line in (out / "sweep.csv").read_text().splitlines()[1:]]
        plotting.sweep_figure(rows, out / "sweep.png")
    print((out / "sweep.csv").read_text(), end="")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if not args.input and not (args.reference or args.storage or args.coincidences or args.trace):
        raise ParameterError("give a simulate output directory or at least one data file")
    t_chain = None
    if args.t_chain is not None:
        from .analysis import Measurement

        t_chain = Measurement(args.t_chain, args.t_chain_sigma)
    results = pipeline.run_analyze(
        args.input,
        args.out,
        reference=args.reference,
        storage=args.storage or (),
        coincidences=args.coincidences,
        trace=args.trace,
        fsr=args.fsr,
        t_chain=t_chain,
        figures=not args.no_figures,
    )
    for path, report in results:
        print(f"# {path}")
        print(report.to_table())
    return EXIT_OK


def cmd_reproduce(args) -> int:
    sc = _scenario(args)
    rows = reproduce.run_all(sc, only=args.only)
    print(reproduce.format_table(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        formats.write_table_csv(
            out / "reproduce.csv",
            ("criterion", "name", "target", "obtained", "tolerance", "seconds", "verdict"),
            [(r.key, r.name, r.target, r.obtained, r.tolerance, round(r.seconds, 3), r.verdict) for r in rows],
        )
    return EXIT_OK if all(r.verdict == "PASS" for r in rows) else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdmem", description="Quantum-dot photon storage simulator and analysis toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--scenario", help="scenario file (default: bundled reference scenario)")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--out", default=out_default, help="output directory")

    sp = sub.add_parser("simulate", help="write histograms, events, time tags and a manifest")
    common(sp, "sim_out")
    sp.add_argument("--tau", type=_tau_list, action="append",
                    help="storage time(s) in ns, comma separated; repeatable; '' for none")
    sp.add_argument("--sweep-tau", metavar="START:STOP:STEP", help="also sweep storage times (stop inclusive)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="efficiency versus storage time")
    common(sp, "sweep_out")
    sp.add_argument("--sweep-tau", metavar="START:STOP:STEP", default="5:20:1")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("analyze", help="fit data files and write a report")
    sp.add_argument("input", nargs="?", help="simulate output directory (uses its manifest)")
    sp.add_argument("--out", help="report directory (default: the input directory)")
    sp.add_argument("--reference", help="control-off histogram CSV")
    sp.add_argument("--storage", action="append", help="storage histogram CSV; repeatable")
    sp.add_argument("--coincidences", help="HBT coincidence CSV")
    sp.add_argument("--trace", help="Fabry-Perot scan CSV")
    sp.add_argument("--fsr", type=float, default=pipeline.FSR_GHZ, help="FPI free spectral range, GHz")
    sp.add_argument("--t-chain", type=float, help="memory-side transmission to divide out")
    sp.add_argument("--t-chain-sigma", type=float, default=0.0)
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("reproduce-paper", help="run every reproduction criterion and print the table")
    sp.add_argument("--scenario")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="also write reproduce.csv here")
    sp.add_argument("--only", action="append", help="run only the named criterion function")
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for prob in exc.problems:
            print(f"  - {prob}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParameterError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # remaining domain errors: unusable data or unsupported input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
