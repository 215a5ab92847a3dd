"""Command-line front end: simulate | fit | calibrate | bench | summarize.

Every command that writes files also writes a JSON manifest next to them.
Passing that manifest back with ``--manifest`` reruns the command with the
same resolved parameters and reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import bench as benchmod
from . import ingest
from . import rng as rngmod
from .abc import (
    BudgetExhausted,
    Dataset,
    PosteriorSample,
    PriorConfig,
    abc_rejection_multi,
    calibrate_tolerance,
    posterior_summaries,
    read_posterior_csv,
    simulate_dataset,
    summary_statistic,
    write_posterior_csv,
    write_summary_json,
)
from .urn import UrnError, make_urn

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_INGEST = 4
EXIT_BUDGET = 5
EXIT_IO = 6

THREADS_ENV = "WALLENIUS_ABC_THREADS"
# parameters that never change results; left out of manifests (--out is given on rerun)
_NOT_IN_MANIFEST = {"threads", "config", "manifest", "verbose", "func", "out"}
_INPUT_FILES = ("data", "ratings", "movies", "category_map", "priority_order", "lists")

log = logging.getLogger("wallenius_abc")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="plain-text key = value file supplying any flag")
    p.add_argument("--manifest", help="rerun with the parameters recorded in a manifest")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help=f"worker cap (default from ${THREADS_ENV}); never changes results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_data_inputs(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", help="frequency CSV")
    g.add_argument("--ratings", help="ratings CSV (user,item,rating[,timestamp])")
    g.add_argument("--threshold", type=float, default=3.5, help="minimum rating counted as a choice")
    g.add_argument("--movies", help="MovieLens movies.csv; genres resolved by the bundled priority order")
    g.add_argument("--lists", help="preference-list CSV (respondent,item)")
    g.add_argument("--category-map", help="category map CSV (item,category)")
    g.add_argument("--priority-order", help="category priority file, least general first")
    g.add_argument("--journals", action="store_true", help="use the bundled 124-journal category map")


def _add_prior(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=1.0, help="symmetric Dirichlet hyperparameter")
    p.add_argument("--alpha-reference", action="store_true", help="use alpha = 1/c")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wallenius-abc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset from a known urn")
    _add_common(p)
    p.add_argument("--m", type=_int_list, required=True, help="multiplicities, comma separated")
    p.add_argument("--omega", type=_float_list, required=True, help="weights, comma separated")
    p.add_argument("--k", type=int, help="number of respondents (with --n)")
    p.add_argument("--n", type=int, help="draw size per respondent (with --k)")
    p.add_argument("--n-list", type=_int_list, help="explicit draw sizes, one per respondent")
    p.add_argument("--categories", type=_str_list, help="category names, comma separated")
    p.add_argument("--out", required=True, help="output frequency CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="pilot run: tolerance as a quantile of prior-predictive distances")
    _add_common(p)
    _add_data_inputs(p)
    _add_prior(p)
    p.add_argument("--quantile", type=float, default=0.05)
    p.add_argument("--pilot-size", type=int, default=100_000)
    p.add_argument("--out", help="directory for calibration.json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="ABC rejection fit of the category weights")
    _add_common(p)
    _add_data_inputs(p)
    _add_prior(p)
    p.add_argument("--epsilon", type=float, action="append", help="tolerance; repeat to compare several")
    p.add_argument("--calibrate-quantile", type=float, help="choose the tolerance by a pilot run at this quantile")
    p.add_argument("--pilot-size", type=int, default=100_000)
    p.add_argument("-T", "--T", dest="T", type=int, default=1000, help="accepted draws per tolerance")
    p.add_argument("--max-attempts", type=int, help="proposal budget (default 1000*T)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="simulation study over c, k and urn configurations")
    _add_common(p)
    p.add_argument("--configs", type=_str_list, default=list(benchmod.CONFIGS))
    p.add_argument("--c", type=_int_list, default=list(benchmod.DEFAULT_C))
    p.add_argument("--k", type=_int_list, default=list(benchmod.DEFAULT_K))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("-T", "--T", dest="T", type=int, default=1000)
    p.add_argument("--quantile", type=float, default=0.05)
    p.add_argument("--pilot-size", type=int, default=100_000)
    p.add_argument("--uniform-m", type=int, default=5, help="balls per colour in the uniform configuration")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("summarize", help="summary report for a posterior CSV")
    _add_common(p)
    p.add_argument("--posterior", required=True)
    p.add_argument("--categories", type=_str_list)
    p.add_argument("--json", action="store_true", help="emit key-value JSON instead of a table")
    p.set_defaults(func=cmd_summarize)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _coerce(action: argparse.Action, value):
    """Turn a config/manifest value into what argparse would have produced."""
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if value is None:
        return None
    if isinstance(action, argparse._AppendAction):
        items = value if isinstance(value, list) else [v for v in str(value).split(",") if v.strip()]
        return [action.type(str(v).strip()) if action.type else v for v in items]
    if isinstance(value, list):
        return value
    return action.type(str(value).strip()) if action.type else value


def _read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    pre.add_argument("--manifest")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    supplied: dict = {}
    if known.manifest:
        manifest = json.loads(Path(known.manifest).read_text(encoding="utf-8"))
        if manifest.get("command") != command:
            parser.error(f"manifest is for {manifest.get('command')!r}, not {command!r}")
        supplied.update(manifest["params"])
    if known.config:
        supplied.update(_read_config(known.config))
    if supplied and command is not None:
        sub = _subparser(parser, command)
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(supplied) - set(actions))
        if unknown:
            parser.error(f"unknown option(s) in config: {', '.join(unknown)}")
        sub.set_defaults(**{k: _coerce(actions[k], v) for k, v in supplied.items()})
        for k in supplied:
            actions[k].required = False
    return parser.parse_args(argv)


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(args: argparse.Namespace, path) -> None:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_IN_MANIFEST and k != "command"}
    inputs = {}
    for key in _INPUT_FILES:
        value = getattr(args, key, None)
        if value:
            inputs[key] = {"path": value, "sha256": _digest(value)}
    manifest = {
        "command": args.command,
        "params": params,
        "seed": args.seed,
        "inputs": inputs,
        "version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_dataset(args: argparse.Namespace) -> Dataset:
    sources = [s for s in ("data", "ratings", "lists") if getattr(args, s, None)]
    if len(sources) != 1:
        raise ingest.IngestError("give exactly one of --data, --ratings or --lists")
    if args.data:
        return ingest.read_frequency_csv(args.data)
    if args.ratings:
        ignore: set[str] = set()
        if args.movies:
            cmap, ignore = ingest.load_movielens_movies(args.movies)
        elif args.category_map:
            cmap = ingest.load_category_map(args.category_map, args.priority_order)
        else:
            raise ingest.IngestError("--ratings needs --movies or --category-map")
        return ingest.ratings_to_frequencies(ingest.read_ratings_csv(args.ratings), cmap, args.threshold, ignore)
    if args.journals:
        cmap = ingest.journals_map()
    elif args.category_map:
        cmap = ingest.load_category_map(args.category_map, args.priority_order)
    else:
        raise ingest.IngestError("--lists needs --category-map or --journals")
    return ingest.preference_lists_to_frequencies(ingest.read_preference_lists(args.lists), cmap)


def _prior(args: argparse.Namespace, c: int) -> PriorConfig:
    return PriorConfig.reference(c) if args.alpha_reference else PriorConfig(args.alpha)


def cmd_simulate(args: argparse.Namespace) -> int:
    urn = make_urn(args.m, args.omega)
    if args.n_list:
        n_list = args.n_list
    elif args.k is not None and args.n is not None:
        n_list = [args.n] * args.k
    else:
        raise ValueError("give --k and --n, or --n-list")
    if max(n_list) > urn.N or min(n_list) < 1:
        raise UrnError(f"draw sizes must lie in [1, N={urn.N}]")
    if args.categories and len(args.categories) != urn.c:
        raise UrnError(f"{len(args.categories)} category names for {urn.c} categories")
    data = simulate_dataset(
        urn.m, urn.omega, n_list, rngmod.stream(args.seed, rngmod.DATA),
        tuple(args.categories) if args.categories else None,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ingest.write_frequency_csv(data, out)
    write_manifest(args, out.with_name(out.name + ".manifest.json"))
    print(f"wrote {data.k} respondents to {out}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    data = load_dataset(args)
    cal = calibrate_tolerance(data, _prior(args, data.c), args.pilot_size, args.quantile, args.seed, args.threads)
    report = {
        "epsilon": cal.epsilon,
        "quantile": cal.quantile,
        "pilot_size": int(cal.distances.size),
        "degenerate": cal.degenerate,
        "pilot_min": float(cal.distances.min()),
        "pilot_max": float(cal.distances.max()),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "calibration.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_manifest(args, out / "manifest.json")
    print(f"epsilon = {cal.epsilon:.6g} (quantile {cal.quantile} of {cal.distances.size} pilot distances)")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    data = load_dataset(args)
    prior = _prior(args, data.c)
    epsilons = list(args.epsilon or [])
    calibration = None
    if args.calibrate_quantile is not None:
        calibration = calibrate_tolerance(data, prior, args.pilot_size, args.calibrate_quantile, args.seed, args.threads)
        epsilons.append(calibration.epsilon)
    if not epsilons:
        raise ValueError("give --epsilon or --calibrate-quantile")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = abc_rejection_multi(data, prior, epsilons, args.T, args.max_attempts, args.seed, args.threads)
    summaries = [posterior_summaries(s) for s in samples]
    names = data.categories
    blocks = [
        f"k={data.k}  c={data.c}  m={data.m.tolist()}  alpha={prior.alpha:g}  seed={args.seed}",
        "observed summary: " + ", ".join(f"{v:.3f}" for v in summary_statistic(data)),
    ]
    if calibration is not None:
        blocks.append(f"calibrated epsilon {calibration.epsilon:.6g} at quantile {calibration.quantile} "
                      f"of {calibration.distances.size} pilot distances")
    for i, (s, summ) in enumerate(zip(samples, summaries), start=1):
        write_posterior_csv(s, out / f"posterior_{i}.csv")
        blocks.append(f"\n[{i}] posterior_{i}.csv\n" + summ.table(names))
    (out / "summary.txt").write_text("\n".join(blocks) + "\n", encoding="utf-8")
    extra = {"k": data.k, "m": data.m.tolist(), "alpha": prior.alpha, "seed": args.seed}
    if calibration is not None:
        extra["calibration"] = {"epsilon": calibration.epsilon, "quantile": calibration.quantile,
                                "pilot_size": int(calibration.distances.size)}
    write_summary_json(summaries, out / "summary.json", names, extra)
    write_manifest(args, out / "manifest.json")
    print("\n".join(blocks))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    base = benchmod.ScenarioConfig(
        c=2, k=1, replications=args.reps, quantile=args.quantile, T=args.T, seed=args.seed,
        pilot_size=args.pilot_size, uniform_m=args.uniform_m, alpha=args.alpha,
    )
    for tag in args.configs:
        if tag not in benchmod.CONFIGS:
            raise ValueError(f"unknown configuration {tag!r}")
    out = Path(args.out)
    results = benchmod.run_grid(base, args.configs, args.c, args.k, out, args.threads)
    write_manifest(args, out / "manifest.json")
    print(benchmod.format_tables(results), end="")
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    draws = read_posterior_csv(args.posterior)
    summ = posterior_summaries(PosteriorSample(draws, 0, None, args.seed))
    if args.json:
        print(json.dumps(summ.as_dict(args.categories), indent=2, sort_keys=True))
    else:
        print(summ.table(args.categories))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ingest.IngestError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UrnError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
