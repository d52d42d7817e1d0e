"""Command-line interface.

Every JSON output carries a ``metadata`` block with the package version,
the seed, the constants and the resolved arguments, which is enough to
replay the run.  CSV outputs carry the same block on a leading ``#`` line.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .adversary import PriorUndefined, draw
from .checks import run_battery
from .model import NullSpec, SpecError, canonicalize, ingest_samples, load_spec, read_samples_csv, write_samples_csv
from .montecarlo import empirical_radius, estimate_type1, estimate_type2, resolve_workers
from .oracle import OracleTooLarge
from .rates import BracketError, fixed_point_bounds, minimax_rate
from .sampling import (
    binomial_to_poisson_subsample,
    poisson_to_bernoulli_stream,
    poissonize_binomial,
    poissonize_multinomial,
    sample_observations,
    solve_c,
    solve_c_bar,
)
from .statistics import effective_profile, run_test

DOMAIN_ERRORS = (SpecError, PriorUndefined, OracleTooLarge, BracketError, ValueError, OSError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    return [int(float(x)) for x in str(text).split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $MINITEST_THREADS or 1)")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--config", default=None, help="JSON file of defaults; CLI flags win")

    parser = _Parser(prog="minitest", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_, spec=True, n=True):
        p = sub.add_parser(name, help=help_, parents=[common])
        if spec:
            p.add_argument("--spec", required=False, default=None, help="NullSpec JSON file")
        if n:
            p.add_argument("--n", type=int, default=None)
        return p

    p = add("rate", "local minimax radius breakdown")
    p.add_argument("--tail-form", choices=["I", "A"], default="I")
    add("indices", "cut indices I, A, U")
    p = add("bounds-compare", "fixed-point sample-complexity bounds")
    p.add_argument("--C", type=float, default=2.0)
    p.add_argument("--c", type=float, default=1.0)
    p = add("sample", "draw observations from p (or --q)")
    p.add_argument("--q", default=None, help="JSON list or file with an alternative q")
    p = add("poissonize", "Poissonization and model conversions")
    p.add_argument("--mode", choices=["multinomial", "binomial", "poisson-to-bernoulli", "binomial-to-poisson"],
                   default=None)
    p.add_argument("--data", default=None, help="input counts/rows for the conversions")
    p = add("test", "run the aggregated test on a data file", n=False)
    p.add_argument("--data", default=None)
    p.add_argument("--n", type=int, default=None, help="sample size for a Binomial/Poisson histogram file")
    p.add_argument("--include-t2", action="store_true", default=None)
    p.add_argument("--nosplit", choices=["printed", "scaled"], default=None)
    p.add_argument("--no-strict", action="store_true", default=None)
    p = add("adversary", "draw an alternative from a lower-bound prior")
    p.add_argument("--kind", choices=["bulk", "tail", "single"], default=None)
    p.add_argument("--scale", type=float, default=1.0)
    p = add("simulate", "Monte Carlo type-I / type-II rates", n=False)
    p.add_argument("--n", type=_int_list, default=None, help="comma-separated sample sizes")
    p.add_argument("--kind", choices=["type1", "bulk", "tail", "single"], default="type1")
    p.add_argument("--scale", type=_float_list, default=[1.0], help="comma-separated prior scales")
    p.add_argument("--trials", type=int, default=1000)
    p = add("radius", "empirical critical radius by bisection over the prior scale")
    p.add_argument("--kind", choices=["bulk", "tail", "single"], default=None)
    p.add_argument("--target", type=float, default=None, help="type-II target (default: eta)")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--s-max", type=float, default=64.0)
    p.add_argument("--iterations", type=int, default=20)
    add("oracle-check", "cross-check closed forms against exact enumeration", spec=False, n=False)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with open(args.config) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{args.config}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise SpecError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    known = set(vars(args))
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config key(s): {sorted(unknown)}")
    # reparse with config values as defaults, so explicit flags still win
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub_action.choices[args.command].set_defaults(**cfg)
    parser.set_defaults(**cfg)
    return parser.parse_args(argv)


def _spec(args) -> NullSpec:
    if args.spec is None:
        raise UsageError("--spec is required")
    if isinstance(args.spec, dict):
        return NullSpec.from_dict(args.spec)
    return load_spec(args.spec)


def _need(args, name):
    v = getattr(args, name)
    if v is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return v


def _metadata(args, spec: Optional[NullSpec]) -> dict:
    resolved = {k: v for k, v in vars(args).items() if k not in ("out",)}
    meta = {"version": __version__, "command": args.command, "seed": args.seed, "args": resolved}
    if spec is not None:
        meta["spec"] = spec.to_dict()
        meta["constants"] = spec.constants.to_dict()
    return meta


def _emit_json(args, payload: dict, spec):
    payload = dict(payload)
    payload["metadata"] = _metadata(args, spec)
    text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    _write(args, text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write(args, text: str):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_vector(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        with open(text) as fh:
            d = json.load(fh)
        return d["q"] if isinstance(d, dict) else d


# ---------------------------------------------------------------- commands


def cmd_rate(args):
    spec = _spec(args)
    n = _need(args, "n")
    rb = minimax_rate(spec, n, tail_form=args.tail_form)
    prof = effective_profile(canonicalize(spec), n, l2_single=False)
    _emit_json(args, {"rate": rb.to_dict(), "profile": prof.to_dict()}, spec)


def cmd_indices(args):
    spec = _spec(args)
    prof = effective_profile(canonicalize(spec), _need(args, "n"), l2_single=False)
    _emit_json(args, {"profile": prof.to_dict()}, spec)


def cmd_bounds_compare(args):
    spec = _spec(args)
    if spec.model_kind.value != "multinomial":
        raise SpecError("bounds-compare needs a multinomial null")
    fb = fixed_point_bounds(canonicalize(spec).p_sorted, _need(args, "n"), args.C, args.c)
    _emit_json(args, {"bounds": fb.to_dict()}, spec)


def cmd_sample(args):
    spec = _spec(args)
    n = _need(args, "n")
    q = spec.p if args.q is None else np.asarray(_load_vector(args.q), dtype=float)
    if q.shape != spec.p.shape:
        raise SpecError(f"q has {q.size} coordinates, spec has N={spec.N}")
    X = sample_observations(spec.model_kind, q, n, np.random.default_rng(args.seed))
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(_metadata(args, spec), default=_json_default) + "\n")
    write_samples_csv(buf, X, spec.model_kind)
    _write(args, buf.getvalue())


def cmd_poissonize(args):
    spec = _spec(args)
    n = _need(args, "n")
    mode = args.mode or spec.model_kind.value
    rng = np.random.default_rng(args.seed)
    out = {"mode": mode}
    if mode == "multinomial":
        out["histogram"] = poissonize_multinomial(spec.p, n, rng).tolist()
    elif mode == "binomial":
        out["counts"] = poissonize_binomial(spec.p, n, rng).tolist()
    elif mode == "poisson-to-bernoulli":
        Y = np.asarray(_load_vector(_need(args, "data")))
        c = solve_c(n, spec.eta)
        conv = poisson_to_bernoulli_stream(Y, n, c, rng)
        out.update(c=c, ok=conv.ok, n_tilde=conv.n_tilde, reason=conv.reason,
                   rows=None if conv.rows is None else conv.rows.tolist())
    else:
        X = np.asarray(_load_vector(_need(args, "data")))
        c_bar = solve_c_bar(n, spec.eta)
        conv = binomial_to_poisson_subsample(X, n, c_bar, rng)
        out.update(c_bar=c_bar, ok=conv.ok, n_tilde=conv.n_tilde, reason=conv.reason,
                   counts=None if conv.rows is None else conv.rows[0].tolist())
    _emit_json(args, out, spec)


def cmd_test(args):
    spec = _spec(args)
    raw = read_samples_csv(_need(args, "data"), spec, n=args.n)
    canon = canonicalize(spec)
    sample = ingest_samples(raw, canon, rng=np.random.default_rng(args.seed))
    v = run_test(canon, sample, include_t2=bool(args.include_t2), nosplit=args.nosplit,
                 strict=not args.no_strict)
    _emit_json(args, {"verdict": v.to_dict(), "n": sample.n}, spec)


def cmd_adversary(args):
    spec = _spec(args)
    d = draw(_need(args, "kind"), spec, _need(args, "n"), np.random.default_rng(args.seed), scale=args.scale)
    _emit_json(args, {"draw": d.to_dict()}, spec)


SIM_COLUMNS = ["n", "N", "t", "eta", "kind", "scale", "trials", "rate", "ci_low", "ci_high", "seed"]


def cmd_simulate(args):
    spec = _spec(args)
    ns = _need(args, "n")
    workers = resolve_workers(args.threads)
    rows = []
    for n in ns:
        if args.kind == "type1":
            scales = [0.0]
        else:
            scales = args.scale
        for s in scales:
            if args.kind == "type1":
                rep = estimate_type1(spec, n, args.trials, args.seed, workers)
            else:
                rep = estimate_type2(spec, n, args.kind, s, args.trials, args.seed, workers)
            rows.append({"n": n, "N": spec.N, "t": spec.t, "eta": spec.eta, "kind": args.kind, "scale": s,
                         "trials": rep.trials, "rate": rep.rate, "ci_low": rep.ci_low, "ci_high": rep.ci_high,
                         "seed": args.seed})
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(_metadata(args, spec), default=_json_default) + "\n")
    w = csv.DictWriter(buf, fieldnames=SIM_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(args, buf.getvalue())


def cmd_radius(args):
    spec = _spec(args)
    n = _need(args, "n")
    target = spec.eta if args.target is None else args.target
    res = empirical_radius(spec, n, _need(args, "kind"), target, args.trials, args.seed,
                           s_max=args.s_max, iterations=args.iterations, workers=resolve_workers(args.threads))
    rate = minimax_rate(spec, n)
    out = res.to_dict()
    out.update(target=target, minimax_total=rate.total, ratio=res.separation / rate.total)
    _emit_json(args, {"radius": out}, spec)


def cmd_oracle_check(args):
    results = run_battery(args.seed)
    ok = all(r.passed for r in results)
    _emit_json(args, {"passed": ok, "checks": [r.to_dict() for r in results]}, None)
    return 0 if ok else 1


COMMANDS = {
    "rate": cmd_rate,
    "indices": cmd_indices,
    "bounds-compare": cmd_bounds_compare,
    "sample": cmd_sample,
    "poissonize": cmd_poissonize,
    "test": cmd_test,
    "adversary": cmd_adversary,
    "simulate": cmd_simulate,
    "radius": cmd_radius,
    "oracle-check": cmd_oracle_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        code = COMMANDS[args.command](args)
        return 0 if code is None else int(code)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except DOMAIN_ERRORS as exc:
        print(f"minitest: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
