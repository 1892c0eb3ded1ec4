"""Command-line entry point.

Exit codes: 0 success, 1 a violation was found (proof check, ratio sweep,
exhaustive check), 2 usage or input error. Structured results are JSON,
tables are CSV. Every output carries the tool version and the exact
experiment settings, and ``--experiment FILE`` replays those settings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .core import InvalidTrace, SwitchConfig, Trace, read_trace, validate_trace
from .oracle import BudgetExhausted, OptLimits, competitive_bound, offline_opt, ratio
from .policies import POLICIES, make_policy
from .proofcheck import POOLS, STRATEGIES, check_proof
from .simulator import differential, simulate
from .suites import exhaustive_suite
from .tracegen import KINDS, GenSpec, InvalidSpec, enumerate_traces, generate, generate_all

OUT_DIR_ENV = "SHAREDBUF_OUT_DIR"


class UsageError(Exception):
    pass


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(args, text: str, default_name: str, key: str = "out") -> None:
    out = getattr(args, key, None)
    if out is None and os.environ.get(OUT_DIR_ENV):
        out = Path(os.environ[OUT_DIR_ENV]) / default_name
    if out is None:
        sys.stdout.write(text)
    else:
        _atomic_write(Path(out), text)


def _provenance(args) -> dict:
    skip = {"func", "experiment"}
    settings = {k: v for k, v in vars(args).items() if k not in skip}
    return {"tool": "sharedbuf", "version": __version__, "experiment": settings}


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _sidecars(trace_path) -> list[Path]:
    p = Path(trace_path)
    return [p.with_suffix(".config.json"), p.parent / "config.json"]


def _switch_config(args, trace_path=None) -> SwitchConfig:
    path = getattr(args, "config", None)
    if path is None and (args.n is None or args.B is None) and trace_path is not None:
        # traces written by `gen` carry their switch size in a sidecar file
        path = next((c for c in _sidecars(trace_path) if c.is_file()), None)
    if path:
        try:
            cfg = SwitchConfig.from_json(path)
        except (OSError, KeyError, TypeError, ValueError) as e:
            raise UsageError(f"cannot read switch config {path}: {e}") from None
        return cfg
    if args.n is None or args.B is None:
        raise UsageError("switch size required: give --n and --B, or --config FILE")
    try:
        return SwitchConfig(args.n, args.B)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _load_trace(args) -> Trace:
    config = _switch_config(args, args.trace)
    try:
        trace = read_trace(args.trace, config)
    except FileNotFoundError:
        raise UsageError(f"trace file not found: {args.trace}") from None
    except InvalidTrace as e:
        raise UsageError(f"{args.trace}: {e}") from None
    report = validate_trace(trace)
    if not report.ok:
        raise UsageError(f"{args.trace}: invalid trace: " + "; ".join(report.violations))
    return trace


def _load_vector(path, m: int) -> list[bool]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read acceptance vector {path}: {e}") from None
    if isinstance(data, dict):
        data = data.get("optVector", data.get("vector"))
    if not isinstance(data, list) or len(data) != m:
        raise UsageError(f"acceptance vector must be a list of {m} booleans")
    return [bool(v) for v in data]


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = GenSpec(
        kind=args.kind, n=args.n, B=args.B, m=args.m, seed=args.seed, load=args.load,
        target=args.target, flood_slots=args.flood_slots, rate=args.rate, burst=args.burst,
        on_mean=args.on_mean, off_mean=args.off_mean, phase_slots=args.phase_slots,
        max_slots=args.max_slots,
    )
    try:
        spec.validate()
    except InvalidSpec as e:
        raise UsageError(str(e)) from None
    if spec.kind == "enumerate":
        if not args.out_dir:
            raise UsageError("--out-dir is required for --kind enumerate")
        out = Path(args.out_dir)
        count = 0
        for i, t in enumerate(generate_all(spec)):
            _atomic_write(out / f"trace_{i:06d}.csv", t.to_csv())
            count += 1
        _atomic_write(out / "config.json", _json(spec.config.to_dict()))
        _atomic_write(out / "manifest.json", _json({**_provenance(args), "spec": spec.to_dict(), "traces": count}))
        return 0
    _emit(args, generate(spec).to_csv(), "trace.csv")
    out = args.out or (os.environ.get(OUT_DIR_ENV) and Path(os.environ[OUT_DIR_ENV]) / "trace.csv")
    if out:
        _atomic_write(_sidecars(out)[0], _json(spec.config.to_dict()))
    return 0


def cmd_simulate(args) -> int:
    trace = _load_trace(args)
    policy = make_policy(args.policy, trace.config, alpha=args.alpha, theta=args.theta)
    res = simulate(trace, policy, record_timeline=bool(args.timeline))
    _emit(args, _json({**_provenance(args), **res.to_dict()}), "simulate.json")
    if args.timeline:
        _atomic_write(Path(args.timeline), res.timeline_csv())
    return 0


def _limits(args) -> OptLimits:
    return OptLimits(max_packets=args.max_packets, node_budget=args.node_budget)


def cmd_opt(args) -> int:
    trace = _load_trace(args)
    try:
        res = offline_opt(trace, limits=_limits(args))
        body = res.to_dict()
        code = 0
    except BudgetExhausted as e:
        body = {**e.result.to_dict(), "error": str(e)}
        code = 1
    _emit(args, _json({**_provenance(args), **body}), "opt.json")
    return code


def cmd_check_proof(args) -> int:
    trace = _load_trace(args)
    vector = _load_vector(args.opt_vector, len(trace)) if args.opt_vector else None
    try:
        ledger = check_proof(
            trace, opt_vector=vector, limits=_limits(args), strategy=args.strategy, pool=args.pool,
            fallback_heuristic=args.fallback_heuristic,
        )
    except BudgetExhausted as e:
        raise UsageError(f"oracle budget exhausted ({e}); pass --opt-vector or --fallback-heuristic") from None
    _emit(args, _json({**_provenance(args), **ledger.to_dict(detail=args.detail)}), "check-proof.json")
    clean = ledger.clean
    if not clean and args.dump:
        _atomic_write(Path(args.dump), ledger.event_dump_csv())
    return 0 if clean else 1


def cmd_differential(args) -> int:
    trace = _load_trace(args)
    rep = differential(trace)
    _emit(args, _json({**_provenance(args), **rep.to_dict()}), "differential.json")
    return 0


SWEEP_HEADER = ("trace", "policy", "opt", "alg", "ratio", "bound", "guardTriggers", "flagged")


def _sweep_traces(args):
    if args.traces is not None:
        if not args.traces:
            return
        paths = []
        for p in args.traces:
            p = Path(p)
            paths.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
        for p in paths:
            try:
                yield p.stem, read_trace(p, _switch_config(args, p))
            except (FileNotFoundError, InvalidTrace) as e:
                raise UsageError(f"{p}: {e}") from None
    elif args.enumerate:
        n, B, slots, packets = args.enumerate
        for i, t in enumerate(enumerate_traces(n, B, slots, packets)):
            yield f"enum{i:07d}", t


def cmd_ratio_sweep(args) -> int:
    if args.traces is None and not args.enumerate:
        raise UsageError("give --traces or --enumerate N B MAX_SLOTS MAX_PACKETS")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    flagged = 0
    for tid, trace in _sweep_traces(args):
        try:
            opt = offline_opt(trace, limits=_limits(args)).opt_count
        except BudgetExhausted as e:
            raise UsageError(f"trace {tid}: {e}") from None
        bound = competitive_bound(trace.config.n)
        for name in args.policies:
            res = simulate(trace, make_policy(name, trace.config, alpha=args.alpha, theta=args.theta))
            r = ratio(opt, res.throughput)
            flag = name == "modified-harmonic" and r > bound + 1e-9
            flagged += flag
            w.writerow([tid, name, opt, res.throughput, f"{r:.6f}", f"{bound:.6f}", res.guard_triggers, int(flag)])
    _emit(args, buf.getvalue(), "ratio-sweep.csv")
    if args.summary:
        _atomic_write(Path(args.summary), _json({**_provenance(args), "flagged": flagged}))
    return 1 if flagged else 0


def cmd_exhaustive(args) -> int:
    reports = exhaustive_suite(args.ns, args.Bs, args.max_slots, args.max_packets, workers=args.workers)
    body = {**_provenance(args), "results": [r.to_dict() for r in reports]}
    _emit(args, _json(body), "exhaustive.json")
    return 1 if any(r.violations for r in reports) else 0


# -- parser -------------------------------------------------------------------


def _add_switch(p, required_trace=True):
    if required_trace:
        p.add_argument("--trace", required=True, help="trace CSV with header slot,port")
    p.add_argument("--n", type=int, help="number of output ports")
    p.add_argument("--B", type=int, help="shared buffer capacity (packets)")
    p.add_argument("--config", help="JSON file with fields n and B")


def _add_limits(p):
    p.add_argument("--max-packets", type=int, default=24)
    p.add_argument("--node-budget", type=int, default=10**8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sharedbuf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sharedbuf {__version__}")
    parser.add_argument("--experiment", help="JSON settings file (as embedded in any output)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a trace")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--m", type=int, default=100, help="trace length (random kinds) / packets (enumerate)")
    p.add_argument("--seed", type=int)
    p.add_argument("--load", type=float, default=0.9)
    p.add_argument("--target", type=int, default=1)
    p.add_argument("--flood-slots", type=int, default=64)
    p.add_argument("--rate", type=int, default=2)
    p.add_argument("--burst", type=int)
    p.add_argument("--on-mean", type=float, default=4.0)
    p.add_argument("--off-mean", type=float, default=4.0)
    p.add_argument("--phase-slots", type=int)
    p.add_argument("--max-slots", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--out-dir", help="directory for enumerated traces")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="run one policy over a trace")
    _add_switch(p)
    p.add_argument("--policy", choices=sorted(POLICIES), default="modified-harmonic")
    p.add_argument("--alpha", type=float, default=None, help="Dynamic Threshold alpha (default 1)")
    p.add_argument("--theta", type=int, default=None, help="SMXQ per-queue cap (default ceil(B/sqrt(n)))")
    p.add_argument("--out")
    p.add_argument("--timeline", help="write the per-event CSV timeline here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("opt", help="exact offline optimum")
    _add_switch(p)
    _add_limits(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("check-proof", help="replay the competitiveness argument on a trace")
    _add_switch(p)
    _add_limits(p)
    p.add_argument("--opt-vector", help="JSON list of 0/1 (or an opt output) to use as OPT")
    p.add_argument("--strategy", choices=STRATEGIES, default="most-recent")
    p.add_argument("--pool", choices=POOLS, default="buffered")
    p.add_argument("--fallback-heuristic", action="store_true")
    p.add_argument("--detail", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out")
    p.add_argument("--dump", help="event-by-event CSV, written when a violation is found")
    p.set_defaults(func=cmd_check_proof)

    p = sub.add_parser("differential", help="compare the two Harmonic rules on a trace")
    _add_switch(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_differential)

    p = sub.add_parser("ratio-sweep", help="competitive ratios over a trace set")
    _add_switch(p, required_trace=False)
    p.add_argument("--traces", nargs="*", help="trace CSV files or directories")
    p.add_argument("--enumerate", nargs=4, type=int, metavar=("N", "B", "MAX_SLOTS", "MAX_PACKETS"))
    p.add_argument("--policies", nargs="+", choices=sorted(POLICIES),
                   default=["modified-harmonic", "harmonic", "dt", "smxq", "sharing", "partitioning"])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--theta", type=int, default=None)
    _add_limits(p)
    p.add_argument("--out")
    p.add_argument("--summary", help="JSON file with provenance and flagged-row count")
    p.set_defaults(func=cmd_ratio_sweep)

    p = sub.add_parser("exhaustive", help="bound check over every trace in a small box")
    p.add_argument("--ns", type=int, nargs="+", default=[2, 3])
    p.add_argument("--Bs", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--max-slots", type=int, default=4)
    p.add_argument("--max-packets", type=int, default=8)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exhaustive)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--experiment")
    known, _ = pre.parse_known_args(argv)
    if known.experiment:
        try:
            saved = json.loads(Path(known.experiment).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            print(f"sharedbuf: cannot read experiment file: {e}", file=sys.stderr)
            return 2
        settings = saved.get("experiment", saved)
        choices = parser._subparsers._group_actions[0].choices
        command = settings.get("command")
        if command not in choices:
            print("sharedbuf: experiment file names no known command", file=sys.stderr)
            return 2
        if not any(a in choices for a in argv):
            argv.append(command)
        sub = choices[command]
        for action in sub._actions:
            if action.dest in settings:
                action.required = False
        sub.set_defaults(**{k: v for k, v in settings.items() if k != "command"})
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"sharedbuf {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
