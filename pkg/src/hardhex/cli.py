"""Command-line entry point.

Exit codes: 0 on success, 1 when a verified property fails
(``verify-structure``, ``symmetry-check``), 2 on usage or input errors.

Every run writes its machine-readable outputs into ``--out`` (default
``runs/<subcommand>``) together with a ``manifest.json`` listing them.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import logging
import os
import sys

from . import __version__
from .config import ConfigError, parse_config, stable_config, stable_configs
from .lattice import COLORS, GridError, GridSpec, build_grid

log = logging.getLogger("hardhex")

MANIFEST_SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad user input detected after argument parsing."""


# -- manifest -----------------------------------------------------------------

class RunManifest:
    """Record of one CLI run, written atomically once the run ends."""

    def __init__(self, subcommand: str, params: dict, outdir: str):
        from .dynamics import RNG_ID

        self.subcommand = subcommand
        self.params = params
        self.outdir = outdir
        self.rng = RNG_ID
        self.started = _now()
        self.finished = None
        self.outputs = []
        self.exit_code = None

    def add(self, path: str) -> str:
        self.outputs.append(os.path.relpath(path, self.outdir))
        return path

    def write_json(self, name: str, doc) -> str:
        path = os.path.join(self.outdir, name)
        _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return self.add(path)

    def write_text(self, name: str, text: str) -> str:
        path = os.path.join(self.outdir, name)
        _atomic_write(path, text)
        return self.add(path)

    def to_dict(self) -> dict:
        return {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "subcommand": self.subcommand,
            "parameters": self.params,
            "version": __version__,
            "rng": self.rng,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
            "exit_code": self.exit_code,
        }

    def close(self, exit_code: int) -> str:
        self.finished = _now()
        self.exit_code = exit_code
        missing = [p for p in self.outputs if not os.path.exists(os.path.join(self.outdir, p))]
        if missing:
            raise RuntimeError(f"manifest lists missing outputs: {missing}")
        path = os.path.join(self.outdir, "manifest.json")
        _atomic_write(path, json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(x):
    try:
        import numpy as np

        if isinstance(x, np.generic):
            return x.item()
        if isinstance(x, np.ndarray):
            return x.tolist()
    except ImportError:  # pragma: no cover
        pass
    if isinstance(x, (set, tuple)):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


# -- config file --------------------------------------------------------------

def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file, UTF-8, ``#`` comments.  Keys map to option names."""
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_string("[root]\n" + fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config file {path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["root"].items()}


def _apply_config(sub: argparse.ArgumentParser, values: dict) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        act = actions.get(key)
        if act is None:
            raise UsageError(f"unknown config key {key!r}")
        if act.nargs in ("+", "*"):
            items = raw.replace(",", " ").split()
            defaults[key] = [act.type(x) if act.type else x for x in items]
        elif isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[key] = act.type(raw) if act.type else raw
            except ValueError as exc:
                raise UsageError(f"config key {key}: {exc}") from None
    sub.set_defaults(**defaults)


# -- argument parser ----------------------------------------------------------

def _grid_args(p, required=False):
    p.add_argument("--K", type=int, required=required, help="half the number of rows (K >= 2)")
    p.add_argument("--L", type=int, required=required, help="a third of the number of columns (L >= 1)")


GLOBAL_DEFAULTS = {"seed": 0, "out": None, "threads": 1, "config": None, "verbose": 0}


def _common_flags() -> argparse.ArgumentParser:
    # accepted before or after the subcommand; defaults are filled in after
    # parsing so a subparser never masks a value given to the main parser
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default runs/<subcommand>)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads for sampling")
    p.add_argument("--config", default=argparse.SUPPRESS, help="key=value file supplying option defaults")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    ap = argparse.ArgumentParser(prog="hardhex", parents=[common],
                                 description="Hard-core dynamics on triangular tori: "
                                             "landscape analysis, paths and simulation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sp = ap.add_subparsers(dest="command", metavar="COMMAND")
    sp.required = True

    p = sp.add_parser("enumerate", parents=[common], help="enumerate hard-core states")
    _grid_args(p)
    p.add_argument("--dump-grid", action="store_true", help="also write the grid geometry as JSON")

    p = sp.add_parser("verify-structure", parents=[common], help="exhaustive energy-landscape check")
    _grid_args(p)

    p = sp.add_parser("ref-path", parents=[common], help="reference path between stable configurations")
    _grid_args(p)
    p.add_argument("--from", dest="src", default="a", choices="abc")
    p.add_argument("--to", dest="dst", default="b", choices="abc")
    p.add_argument("--emit", default=None, help="file name for the path JSON (inside --out)")

    p = sp.add_parser("reduce", parents=[common], help="run an energy-reduction algorithm")
    _grid_args(p)
    p.add_argument("--input", required=True, help="configuration file (ASCII grid or hex literal)")
    p.add_argument("--mode", choices=("rows", "columns"), required=True)
    p.add_argument("--target", default="b", choices="abc")
    p.add_argument("--stripe", type=int, default=0, help="rows mode: index of the clear horizontal stripe")
    p.add_argument("--shift", type=int, default=None, help="columns mode: column shift d")

    p = sp.add_parser("simulate", parents=[common], help="sample hitting times")
    _grid_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--start", default="a", help="a, b, c or a configuration file")
    p.add_argument("--target", default="abc-minus-start",
                   help="letters of target stable configurations (e.g. b, bc) or abc-minus-start")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--cap", type=int, default=None, help="step cap per sample")

    p = sp.add_parser("symmetry-check", parents=[common], help="check tunneling-time symmetries")
    _grid_args(p)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--cap", type=int, default=None)

    p = sp.add_parser("spectrum", parents=[common], help="spectral gap of the transition matrix")
    _grid_args(p)
    p.add_argument("--beta", type=float, nargs="+", required=True)

    p = sp.add_parser("mix", parents=[common], help="exact mixing time")
    _grid_args(p)
    p.add_argument("--beta", type=float, nargs="+", required=True)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--cap", type=int, default=1 << 40)

    p = sp.add_parser("campaign", parents=[common], help="tunneling-time campaign over a beta sweep")
    _grid_args(p, required=False)
    p.add_argument("--betas", type=float, nargs="+", default=None)
    p.add_argument("--samples", type=int, default=2000, help="samples per beta")
    p.add_argument("--start", default="a", choices="abc")
    p.add_argument("--target", default="bc")
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--format", default="json", choices=("json", "csv", "markdown"))
    p.add_argument("--eps", type=float, default=None, help="also report probability windows of half-width eps")
    return ap


def _subparser(ap, name):
    for act in ap._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[name]
    raise KeyError(name)


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    cfg = read_config_file(args.config) if getattr(args, "config", None) else {}
    local = {k: v for k, v in cfg.items() if k not in GLOBAL_DEFAULTS}
    if local:
        _apply_config(_subparser(ap, args.command), local)
        args = ap.parse_args(argv)
    for key, default in GLOBAL_DEFAULTS.items():
        if hasattr(args, key):
            continue
        if key in cfg and key != "config":
            try:
                default = type(default)(cfg[key]) if default is not None else cfg[key]
            except ValueError as exc:
                raise UsageError(f"config key {key}: {exc}") from None
        setattr(args, key, default)
    return args


# -- commands -----------------------------------------------------------------

def _grid(args):
    if args.K is None or args.L is None:
        raise UsageError("grid size missing: give --K and --L (flags or config file)")
    return build_grid(GridSpec(args.K, args.L))


def _index(grid):
    from .landscape import enumerate_states

    return enumerate_states(grid)


def cmd_enumerate(args, man):
    import numpy as np

    g = _grid(args)
    idx = _index(g)
    E = idx.energy
    levels, counts = np.unique(E, return_counts=True)
    doc = {"K": g.K, "L": g.L, "N": g.N, "n_states": idx.size,
           "energy_histogram": {int(e): int(c) for e, c in zip(levels, counts)},
           "stable": [idx.config(i).to_hex() for i in idx.stable]}
    man.write_json("enumerate.json", doc)
    if args.dump_grid:
        man.write_text("grid.json", g.to_json(indent=2) + "\n")
    print(f"{idx.size} hard-core states on the {g.spec.rows}x{g.spec.cols} grid (N={g.N})")
    return EXIT_OK


def cmd_verify_structure(args, man):
    from .landscape import verify_structure

    g = _grid(args)
    rep = verify_structure(_index(g))
    man.write_json("structure.json", rep.to_dict())
    print(f"grid K={g.K} L={g.L}: {rep.n_states} states, Gamma = {rep.gamma_expected}")
    for k, v in rep.phi_pairs.items():
        print(f"  barrier {k}: {v}")
    print(f"  deepest valley outside {{a,b,c}}: {rep.max_depth_outside}")
    for clause, ok in rep.clauses.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {clause}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAILED


def _path_doc(path, grid):
    from .experiments import gamma

    E = path.energies()
    return {"K": grid.K, "L": grid.L, "gamma": gamma(grid),
            "states": [s.to_hex() for s in path.states], "energies": E,
            "height": max(E), "height_gap": max(E) - E[0],
            "stages": [{"start": s.start, "end": s.end, "case": s.case} for s in path.stages]}


def cmd_ref_path(args, man):
    from .reduction import reference_path, validate_path

    g = _grid(args)
    if args.src == args.dst:
        raise UsageError("--from and --to must differ")
    path = reference_path(g, args.src, args.dst)
    rep = validate_path(path)
    doc = _path_doc(path, g)
    doc["valid"] = rep.valid
    man.write_json(args.emit or "path.json", doc)
    print(f"reference path {args.src} -> {args.dst}: {len(path) - 1} moves, "
          f"height gap {doc['height_gap']} (Gamma = {doc['gamma']}), valid={rep.valid}")
    return EXIT_OK if rep.valid else EXIT_FAILED


def _read_config(grid, path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(grid, fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read configuration: {exc}") from None


def cmd_reduce(args, man):
    from .reduction import reduce_by_columns, reduce_by_rows, validate_path

    g = _grid(args)
    sigma = _read_config(g, args.input)
    if args.mode == "rows":
        path = reduce_by_rows(sigma, args.target, stripe=args.stripe)
    else:
        path = reduce_by_columns(sigma, args.target, shift=args.shift)
    doc = _path_doc(path, g)
    doc["valid"] = validate_path(path).valid
    man.write_json("path.json", doc)
    print(f"{args.mode} reduction to {args.target}: {len(path) - 1} moves, "
          f"energy {doc['energies'][0]} -> {doc['energies'][-1]}, height gap {doc['height_gap']}")
    return EXIT_OK


def _targets(grid, start, spec: str):
    stable = dict(zip("abc", stable_configs(grid)))
    if spec == "abc-minus-start":
        return [stable[x] for x in "abc" if stable[x].bits != start.bits]
    if not spec or set(spec) - set("abc"):
        raise UsageError(f"bad target {spec!r}")
    return [stable[x] for x in dict.fromkeys(spec)]


def cmd_simulate(args, man):
    import csv
    import io

    from .dynamics import DEFAULT_CAP, RNG_ID, DynamicsParams, run_batch

    g = _grid(args)
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    if args.start in ("a", "b", "c"):
        start = stable_config(g, args.start)
    else:
        start = _read_config(g, args.start)
    targets = _targets(g, start, args.target)
    try:
        params = DynamicsParams(args.beta, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    batch = run_batch(start, targets, params, args.samples, args.threads, args.cap or DEFAULT_CAP)
    names = {t.bits: COLORS[i].lower() for i, t in enumerate(stable_configs(g))}
    header = {"grid": {"K": g.K, "L": g.L}, "beta": args.beta, "seed": args.seed,
              "start": start.to_hex(), "targets": [t.to_hex() for t in targets],
              "rng": RNG_ID, "version": __version__}
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sample_id", "steps", "hit_state"))
    for i, s in enumerate(batch):
        w.writerow((i, s.steps, "" if s.truncated else names.get(targets[s.hit].bits, s.hit_state)))
    man.write_text("samples.csv", buf.getvalue())
    ok = [s.steps for s in batch if not s.truncated]
    mean = sum(ok) / len(ok) if ok else float("nan")
    print(f"{len(ok)} samples ({len(batch) - len(ok)} truncated), mean hitting time {mean:.6g}")
    return EXIT_OK


def cmd_symmetry_check(args, man):
    from .dynamics import DEFAULT_CAP
    from .landscape import ENUMERATION_LIMIT, exact_hitting_distribution
    from .symmetry import coupling_checks, verify_state_automorphism

    g = _grid(args)
    doc, ok = {"K": g.K, "L": g.L}, True
    if g.N <= ENUMERATION_LIMIT:
        idx = _index(g)
        auts = dict(zip(("ab", "ac", "bc"), g.axial_automorphisms()))
        doc["automorphisms"] = {k: verify_state_automorphism(idx, a) for k, a in auts.items()}
        a, b, c = stable_configs(g)
        dist = exact_hitting_distribution(idx, args.beta, a, [b, c]).tolist()
        doc["exact_hitting_distribution"] = dist
        exact_ok = all(doc["automorphisms"].values()) and abs(dist[0] - 0.5) <= 1e-10
        doc["exact_passed"] = exact_ok
        ok &= exact_ok
        for k, v in doc["automorphisms"].items():
            print(f"  [{'PASS' if v else 'FAIL'}] state map induced by xi_{k} is an automorphism")
        print(f"  [{'PASS' if abs(dist[0] - 0.5) <= 1e-10 else 'FAIL'}] exact hitting distribution "
              f"over {{b,c}}: ({dist[0]:.12f}, {dist[1]:.12f})")
    try:
        rep = coupling_checks(g, args.beta, args.samples, args.seed, args.threads,
                              args.cap or DEFAULT_CAP, args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc["coupling"] = rep.to_dict()
    ok &= rep.passed
    for clause, v in rep.clauses.items():
        print(f"  [{'PASS' if v else 'FAIL'}] {clause}")
    if rep.truncated:
        print(f"  [FAIL] {rep.truncated} truncated samples")
    doc["passed"] = bool(ok)
    man.write_json("symmetry.json", doc)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_spectrum(args, man):
    import math

    from .landscape import spectral_gap

    g = _grid(args)
    idx = _index(g)
    rows = []
    for beta in args.beta:
        rho = spectral_gap(idx, beta)
        rows.append({"beta": beta, "gap": rho,
                     "rate": -math.log(rho) / beta if beta > 0 else None})
        print(f"beta={beta:g}: spectral gap {rho:.6e}"
              + (f", -(1/beta) log gap = {rows[-1]['rate']:.4f}" if beta > 0 else ""))
    man.write_json("spectrum.json", {"K": g.K, "L": g.L, "n_states": idx.size, "results": rows})
    return EXIT_OK


def cmd_mix(args, man):
    import math

    from .landscape import mixing_time

    g = _grid(args)
    if not 0 < args.eps < 1:
        raise UsageError("--eps must lie in (0, 1)")
    idx = _index(g)
    rows = []
    for beta in args.beta:
        r = mixing_time(idx, beta, args.eps, args.cap)
        rows.append({"beta": beta, "t_mix": r.t_mix, "truncated": r.truncated,
                     "lower_bound": r.lower_bound, "tv": r.tv,
                     "rate": math.log(r.t_mix) / beta if beta > 0 and r.t_mix > 0 else None})
        flag = " (truncated)" if r.truncated else (" (lower bound)" if r.lower_bound else "")
        print(f"beta={beta:g}: t_mix({args.eps:g}) = {r.t_mix}{flag}")
    man.write_json("mix.json", {"K": g.K, "L": g.L, "eps": args.eps, "results": rows})
    return EXIT_OK


def cmd_campaign(args, man):
    from .dynamics import DEFAULT_CAP
    from .experiments import (CampaignSpec, emit_report, markdown_table,
                              probability_window_check, run_campaign)

    if args.K is None or args.L is None:
        raise UsageError("grid size missing: give --K and --L (flags or config file)")
    if not args.betas:
        raise UsageError("no betas given (--betas or 'betas' in the config file)")
    try:
        spec = CampaignSpec(GridSpec(args.K, args.L), tuple(args.betas), args.samples,
                            args.start, args.target, args.seed, args.cap or DEFAULT_CAP)
    except ValueError as exc:
        if isinstance(exc, GridError):
            raise
        raise UsageError(str(exc)) from None
    res = run_campaign(spec, args.threads)
    for p in emit_report(res, args.format, man.outdir):
        man.add(p)
    if args.eps is not None:
        if not args.eps > 0:
            raise UsageError("--eps must be positive")
        man.write_json("windows.json", probability_window_check(res, args.eps).to_dict())
    print(markdown_table(res), end="")
    return EXIT_OK


COMMANDS = {
    "enumerate": cmd_enumerate,
    "verify-structure": cmd_verify_structure,
    "ref-path": cmd_ref_path,
    "reduce": cmd_reduce,
    "simulate": cmd_simulate,
    "symmetry-check": cmd_symmetry_check,
    "spectrum": cmd_spectrum,
    "mix": cmd_mix,
    "campaign": cmd_campaign,
}


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def dispatch(argv=None) -> int:
    """Run one subcommand; return the exit code."""
    from .landscape import EnumerationLimitError
    from .reduction import PreconditionError

    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help/--version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"hardhex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("hardhex: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    outdir = args.out or os.path.join("runs", args.command)
    man = RunManifest(args.command, _params(args), outdir)
    try:
        os.makedirs(outdir, exist_ok=True)
        log.info("running %s, outputs in %s", args.command, outdir)
        code = COMMANDS[args.command](args, man)
    except (GridError, ConfigError, PreconditionError, EnumerationLimitError, UsageError) as exc:
        print(f"hardhex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"hardhex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    path = man.close(code)
    log.info("manifest written to %s", path)
    return code


def main(argv=None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
