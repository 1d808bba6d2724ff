"""Command-line pipeline: synth -> extract -> recommend / evaluate.

Every output file starts with a comment line echoing the resolved
configuration, so a run is reproducible from the file alone.  Outputs are
written atomically (temp file + rename).  `--threads` controls worker
parallelism only and is deliberately left out of the config echo: results
are independent of it.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .charts import recall_chart_for_t
from .core import next_occurrence, parse_recordings, recordings_to_csv
from .evaluation import AlgoSpec, default_cuts, evaluate, run_algorithm
from .extraction import ExtractionConfig, read_events, run_pipeline, write_events
from .recommenders import recommend_topn
from .similarity import InteractionMatrix, Metric, build_item_graph, build_user_graph, write_graph_csv
from .synthgen import WorldConfig, generate, write_truth

_EVAL_ALGOS = ("mostpopular", "user-knn", "item-knn", "als", "random", "oracle")
_REC_ALGOS = ("mostpopular", "user-knn", "item-knn", "als", "random")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _echo(subcommand: str, pairs: list[tuple[str, object]]) -> str:
    body = " ".join(f"{k}={v}" for k, v in pairs)
    return f"pvrec {subcommand} {body}"


def _read_recordings(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"input file {path} does not exist")
    with open(path, encoding="utf-8", newline="") as handle:
        recordings, errors = parse_recordings(handle)
    if errors:
        for err in errors[:20]:
            print(f"pvrec: {path}: {err}", file=sys.stderr)
        raise ValueError(f"{len(errors)} malformed row(s) in {path}")
    return recordings


def _read_events(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"input file {path} does not exist")
    with open(path, encoding="utf-8", newline="") as handle:
        return read_events(handle)


def _int_list(raw: str) -> list[int]:
    try:
        return [int(tok) for tok in raw.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}")


def _add_extraction_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta-b", type=int, default=15, help="clustering start threshold, minutes")
    p.add_argument("--delta-f", type=int, default=15, help="clustering end threshold, minutes")
    p.add_argument("--collapse-b", type=int, default=15, help="collapsing start threshold, minutes")
    p.add_argument("--collapse-f", type=int, default=15, help="collapsing end threshold, minutes")
    p.add_argument("--batch-length", type=int, default=60, help="ingestion window, minutes")


def _add_algo_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=[m.value for m in Metric], default="dice")
    p.add_argument("--k", type=int, default=300, help="user-kNN neighborhood size")
    p.add_argument("--n-items", type=int, default=300, help="item-kNN neighborhood size")
    p.add_argument("--second-level", action="store_true",
                   help="pad short user neighborhoods with second-level neighbors")
    p.add_argument("--factors", type=int, default=100, help="ALS latent factor count")
    p.add_argument("--lambda", dest="lam", type=float, default=500.0, help="ALS regularization")
    p.add_argument("--alpha", type=float, default=40.0, help="ALS confidence slope")
    p.add_argument("--steps", type=int, default=15, help="ALS training sweeps")
    p.add_argument("--seed", type=int, default=0)


def _extraction_config(args) -> ExtractionConfig:
    return ExtractionConfig(args.delta_b, args.delta_f, args.collapse_b,
                            args.collapse_f, args.batch_length)


def _spec(args, algorithm: str) -> AlgoSpec:
    return AlgoSpec(
        algorithm=algorithm,
        metric=Metric.parse(args.metric),
        k=args.k,
        n_items=args.n_items,
        second_level=args.second_level,
        f=args.factors,
        lam=args.lam,
        alpha=args.alpha,
        steps=args.steps,
        seed=args.seed,
    )


def _cmd_synth(args) -> int:
    cfg = WorldConfig(
        seed=args.seed,
        channels=args.channels,
        programs=args.programs,
        users=args.users,
        communities=args.communities,
        affinity=args.affinity,
        noise=args.noise,
        jitter_sd=args.jitter_sd,
        span=(0, args.span_days * 1440),
    )
    world = generate(cfg)
    echo = _echo("synth", [
        ("seed", cfg.seed), ("channels", cfg.channels), ("programs", cfg.programs),
        ("users", cfg.users), ("communities", cfg.communities),
        ("affinity", cfg.affinity), ("noise", cfg.noise), ("jitter_sd", cfg.jitter_sd),
        ("span", f"{cfg.span[0]}..{cfg.span[1]}"), ("out", args.output),
    ])
    outdir = Path(args.output)
    _atomic_write(outdir / "recordings.csv", recordings_to_csv(world.recordings, echo))
    buf = io.StringIO()
    write_truth(buf, world.truth, echo)
    _atomic_write(outdir / "truth.csv", buf.getvalue())
    print(f"wrote {len(world.recordings)} recordings over {len(world.programs)} programs "
          f"to {outdir}", file=sys.stderr)
    return 0


def _cmd_extract(args) -> int:
    recordings = _read_recordings(Path(args.input))
    recordings = sorted(recordings, key=lambda r: (r.created_at, r.id))
    cfg = _extraction_config(args)
    events = run_pipeline(recordings, cfg)
    echo = _echo("extract", [
        ("input", args.input), ("delta_b", cfg.delta_b), ("delta_f", cfg.delta_f),
        ("collapse_b", cfg.collapse_b), ("collapse_f", cfg.collapse_f),
        ("batch_length", cfg.batch_length), ("out", args.output),
    ])
    buf = io.StringIO()
    write_events(buf, events, echo)
    _atomic_write(Path(args.output), buf.getvalue())
    print(f"extracted {len(events)} events from {len(recordings)} recordings", file=sys.stderr)
    return 0


def _cmd_recommend(args) -> int:
    events = _read_events(Path(args.input))
    matrix = InteractionMatrix.from_supporters(events)
    candidates = sorted(e.id for e in events if next_occurrence(e, args.t) is not None)
    spec = _spec(args, args.algo)
    scored = run_algorithm(spec, matrix, candidates)
    if args.dump_graph:
        graph = (build_user_graph(matrix, spec.metric, spec.k) if args.algo == "user-knn"
                 else build_item_graph(matrix, spec.metric))
        buf = io.StringIO()
        write_graph_csv(buf, graph, _echo("recommend", [("dump_graph", args.dump_graph)]))
        _atomic_write(Path(args.dump_graph), buf.getvalue())
    echo = _echo("recommend", [
        ("input", args.input), ("t", args.t), ("algo", args.algo),
        ("metric", args.metric), ("k", args.k), ("n_items", args.n_items),
        ("second_level", args.second_level), ("f", args.factors), ("lambda", args.lam),
        ("alpha", args.alpha), ("steps", args.steps), ("seed", args.seed), ("n", args.n),
        ("out", args.output),
    ])
    lines = [f"# {echo}", "user,rank,event,weight"]
    for user in matrix.users:
        top = recommend_topn(scored[user], args.n)
        weights = dict(scored[user].entries)
        for rank, eid in enumerate(top, start=1):
            lines.append(f"{user},{rank},{eid},{weights[eid]!r}")
    _atomic_write(Path(args.output), "\n".join(lines) + "\n")
    print(f"recommended top-{args.n} over {len(candidates)} active events "
          f"for {matrix.n_users} users", file=sys.stderr)
    return 0


def _cmd_evaluate(args) -> int:
    recordings = _read_recordings(Path(args.input))
    recordings = sorted(recordings, key=lambda r: (r.created_at, r.id))
    cfg = _extraction_config(args)
    events = run_pipeline(recordings, cfg)
    t_list = args.t if args.t else default_cuts(recordings)
    n_list = args.n
    algos = [a for a in args.algo.split(",") if a]
    for a in algos:
        if a not in _EVAL_ALGOS:
            raise ValueError(f"unknown algorithm {a!r}; valid: {', '.join(_EVAL_ALGOS)}")
    specs = [_spec(args, a) for a in algos]
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    report = evaluate(recordings, events, specs, t_list, n_list, threads=threads)
    echo = _echo("evaluate", [
        ("input", args.input), ("algo", ",".join(algos)),
        ("t", ",".join(str(t) for t in t_list)), ("n", ",".join(str(n) for n in n_list)),
        ("metric", args.metric), ("k", args.k), ("n_items", args.n_items),
        ("second_level", args.second_level), ("f", args.factors), ("lambda", args.lam),
        ("alpha", args.alpha), ("steps", args.steps), ("seed", args.seed),
        ("delta_b", cfg.delta_b), ("delta_f", cfg.delta_f),
        ("collapse_b", cfg.collapse_b), ("collapse_f", cfg.collapse_f),
        ("batch_length", cfg.batch_length), ("out", args.output),
    ])
    outdir = Path(args.output)
    buf = io.StringIO()
    report.write_csv(buf, echo)
    _atomic_write(outdir / "report.csv", buf.getvalue())
    for t in t_list:
        svg = recall_chart_for_t(report, t, f"recall vs n at t={t}")
        _atomic_write(outdir / f"recall_t{t}.svg", f"<!-- {echo} -->\n" + svg)
    svg = recall_chart_for_t(report, "overall", "recall vs n, overall")
    _atomic_write(outdir / "recall_overall.svg", f"<!-- {echo} -->\n" + svg)
    print(f"evaluated {len(specs)} algorithm(s) at {len(t_list)} cut(s); "
          f"report in {outdir}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvrec",
                                     description="PVR recording-log event extraction and top-n recommendation")
    parser.add_argument("--version", action="version", version=f"pvrec {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recordings dataset")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--users", type=int, default=2000)
    p.add_argument("--programs", type=int, default=500)
    p.add_argument("--channels", type=int, default=20)
    p.add_argument("--communities", type=int, default=10)
    p.add_argument("--affinity", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--jitter-sd", type=float, default=3.0)
    p.add_argument("--span-days", type=int, default=90)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("extract", help="turn a recordings CSV into an events CSV")
    p.add_argument("-i", "--input", required=True, help="recordings CSV")
    p.add_argument("-o", "--output", required=True, help="events CSV")
    _add_extraction_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("recommend", help="score active events for every user")
    p.add_argument("-i", "--input", required=True, help="events CSV")
    p.add_argument("-o", "--output", required=True, help="recommendations CSV")
    p.add_argument("--t", type=int, required=True, help="cut time, absolute minutes")
    p.add_argument("--algo", choices=_REC_ALGOS, required=True)
    p.add_argument("--n", type=int, default=10, help="list length per user")
    p.add_argument("--dump-graph", help="also dump the similarity graph CSV here")
    _add_algo_flags(p)
    p.set_defaults(func=_cmd_recommend)

    p = sub.add_parser("evaluate", help="time-sliced precision/recall evaluation")
    p.add_argument("-i", "--input", required=True, help="recordings CSV")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--algo", default="mostpopular,user-knn,item-knn,als,random,oracle",
                   help="comma-separated algorithms")
    p.add_argument("--t", type=_int_list, default=None,
                   help="comma-separated cut times (default: four cuts late in the span)")
    p.add_argument("--n", type=_int_list, default=[1, 2, 3, 5, 10, 15, 20, 25, 30],
                   help="comma-separated list lengths")
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (default: logical CPUs); results do not depend on it")
    _add_algo_flags(p)
    _add_extraction_flags(p)
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"pvrec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
