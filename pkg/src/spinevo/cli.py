"""Command-line interface.

Every GA setting can come from a flag, from a ``key=value`` config file given
with ``--config``, or from the built-in defaults, in that order of precedence.
Times are always t*Jmax.  Exit codes: 0 success, 1 bad input, 2 target fitness
not reached under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .engine import LOG_HEADER, GaConfig, run_ga
from .errors import SpinEvoError
from .fitness import FitnessParams
from .genome import Genome, parse_protocol, read_genomes, serialize
from .layout import emit_diagram
from .study import (
    alpha_scan_csv,
    compare_baseline,
    evaluate_genome,
    format_round_table,
    round_study,
    scan_alpha,
)

log = logging.getLogger("spinevo")

# settable keys and their types; "a" and "b" feed FitnessParams
CONFIG_KEYS = {
    "population": int,
    "generations": int,
    "seed": int,
    "a": float,
    "b": float,
    "alpha": float,
    "mu_initial": int,
    "mu_final": int,
    "window": str,
    "steps": int,
    "workers": int,
    "target_fitness": float,
    "elitism": int,
    "allow_negative": str,
}


class InputError(Exception):
    pass


def parse_window(text: str) -> tuple[float, float]:
    sep = ":" if ":" in text else ","
    try:
        lo, hi = (float(x) for x in text.split(sep))
    except ValueError:
        raise InputError(f"window must look like LO:HI, got {text!r}") from None
    return lo, hi


def _truthy(text: str) -> bool:
    return str(text).strip().lower() in {"1", "true", "yes", "on"}


def read_config_file(path: str | Path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split(";", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(args: argparse.Namespace) -> GaConfig:
    settings: dict = {}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            settings[key] = value
    try:
        kw = {}
        for key, value in settings.items():
            if key == "window":
                kw["window"] = parse_window(value) if isinstance(value, str) else value
            elif key == "allow_negative":
                kw["allow_negative"] = value if isinstance(value, bool) else _truthy(value)
            elif key in ("a", "b"):
                continue
            else:
                kw[key] = CONFIG_KEYS[key](value)
        params = FitnessParams(float(settings.get("a", 10.0)), float(settings.get("b", -0.001)))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return GaConfig(fitness_params=params, **kw)


def _load(path: str, index: int = 0) -> Genome:
    genomes = read_genomes(path)
    if not genomes:
        raise InputError(f"no genome in {path}")
    if not 0 <= index < len(genomes):
        raise InputError(f"{path} holds {len(genomes)} genomes; index {index} out of range")
    return genomes[index]


def _summary(rec) -> str:
    return f"{rec.f_max!r},{rec.t_f_jmax!r},{rec.score!r}"


# -- commands -----------------------------------------------------------------


def cmd_optimize(args) -> int:
    template = _load(args.genome, args.index)
    cfg = build_config(args)
    cfg.validate(template.width)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "generations.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)

        def on_generation(entry):
            writer.writerow(entry.csv_row())
            fh.flush()
            if not args.quiet:
                print(
                    f"gen {entry.generation:4d}  best {entry.best:8.4f}  avg {entry.average:8.4f}  "
                    f"worst {entry.worst:8.4f}  F {entry.best_f_max:.5f}",
                    file=sys.stderr,
                )

        result = run_ga(template, cfg, callback=on_generation)
    best = result.best
    (out / "best.genome").write_text(
        f"{serialize(best.genome)}\n; f_max,t_f_times_jmax,score\n; {_summary(best)}\n"
    )
    _, trace = evaluate_genome(best.genome, cfg.alpha, cfg.window, cfg.steps, cfg.fitness_params)
    (out / "trace.csv").write_text(trace.to_csv())
    print(serialize(best.genome))
    print("f_max,t_f_times_jmax,score")
    print(_summary(best))
    if args.strict and cfg.target_fitness is not None and best.score < cfg.target_fitness:
        print(f"target fitness {cfg.target_fitness} not reached", file=sys.stderr)
        return 2
    return 0


def cmd_evaluate(args) -> int:
    g = _load(args.genome, args.index)
    cfg = build_config(args)
    rec, trace = evaluate_genome(g, cfg.alpha, cfg.window, cfg.steps, cfg.fitness_params, args.at, args.refine)
    print(f"genome       {serialize(g)}")
    print(f"f_max        {rec.f_max:.6f}")
    print(f"t_f*jmax     {rec.t_f_jmax:.4f}")
    print(f"fitness      {rec.score:.4f}")
    if args.trace:
        Path(args.trace).write_text(trace.to_csv())
    return 0


def cmd_scan_alpha(args) -> int:
    g = _load(args.genome, args.index)
    lo, hi = parse_window(args.range)
    if args.steps < 1:
        raise InputError("steps must be >= 1")
    alphas = lo + np.arange(args.steps + 1) * ((hi - lo) / args.steps)
    text = alpha_scan_csv(alphas, scan_alpha(g, alphas))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_round_study(args) -> int:
    g = _load(args.genome, args.index)
    protocols = [parse_protocol(p) for p in args.protocol] if args.protocol else None
    rows = round_study(g, args.sf, protocols, args.alpha or 0.0)
    sys.stdout.write(format_round_table(rows, args.sf))
    return 0


def cmd_baseline(args) -> int:
    template = _load(args.genome, args.index)
    cfg = build_config(args)
    cfg.validate(template.width)
    report = compare_baseline(template, cfg, args.budget, args.threshold)
    sys.stdout.write(report.text())
    return 0


def cmd_draw(args) -> int:
    g = _load(args.genome, args.index)
    svg, dot = emit_diagram(g)
    prefix = Path(args.out)
    prefix.with_suffix(".dot").write_text(dot)
    if svg is None:
        print("genome has no layout hints; SVG skipped, DOT written", file=sys.stderr)
    else:
        prefix.with_suffix(".svg").write_text(svg)
    return 0


# -- argument parsing ---------------------------------------------------------


def _ga_flags(p: argparse.ArgumentParser, evolution: bool = True) -> None:
    g = p.add_argument_group("model and fitness")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--a", type=float, help="fidelity sharpness (default 10)")
    g.add_argument("--b", type=float, help="time penalty (default -0.001)")
    g.add_argument("--alpha", type=float, help="two-excitation interaction factor (default 0)")
    g.add_argument("--window", help="time window in t*Jmax, LO:HI (default 0:20)")
    g.add_argument("--steps", type=int, help="time increments in the window (default 100)")
    if not evolution:
        return
    e = p.add_argument_group("evolution")
    e.add_argument("--population", type=int)
    e.add_argument("--generations", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--mu-initial", dest="mu_initial", type=int)
    e.add_argument("--mu-final", dest="mu_final", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--target-fitness", dest="target_fitness", type=float)
    e.add_argument("--elitism", type=int)
    e.add_argument("--allow-negative", dest="allow_negative", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinevo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the genetic algorithm on a template genome")
    p.add_argument("genome")
    p.add_argument("--index", type=int, default=0, help="which genome in the file")
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--strict", action="store_true", help="exit 2 if --target-fitness is not reached")
    p.add_argument("--quiet", action="store_true")
    _ga_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="fidelity, arrival time and fitness of a genome")
    p.add_argument("genome")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--at", type=float, help="evaluate only at this t*Jmax")
    p.add_argument("--trace", help="write the fidelity trace CSV here")
    p.add_argument("--refine", action="store_true", help="polish the grid peak")
    _ga_flags(p, evolution=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scan-alpha", help="fidelity at the target time versus alpha")
    p.add_argument("genome")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--range", default="0:0.5", help="alpha range LO:HI")
    p.add_argument("--steps", type=int, default=50, help="alpha increments")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_scan_alpha)

    p = sub.add_parser("round-study", help="fidelity after rounding couplings to n significant figures")
    p.add_argument("genome")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--sf", type=int, nargs="+", required=True)
    p.add_argument("--protocol", action="append", help="extra <init|target> row (repeatable)")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_round_study)

    p = sub.add_parser("baseline", help="GA against random search on an equal budget")
    p.add_argument("genome")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.99)
    _ga_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("draw", help="SVG and DOT diagrams from layout hints")
    p.add_argument("genome")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", default="network", help="output path prefix")
    p.set_defaults(func=cmd_draw)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SpinEvoError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
