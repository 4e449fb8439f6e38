"""Command-line harness: rank graphs, generate scenarios, benchmark solvers.

Subcommands: rank, bench, generate, update, simulate. All outputs are
deterministic given the inputs and --seed; exit code 2 flags input or
configuration problems, 3 a solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys

import numpy as np

from . import asyncsim, baseline, engine, gen, sched, update
from .graph import (DeltaError, GraphFormatError, apply_delta, canonical_bytes,
                    dump_edge_list, load_delta, load_edge_list)

SNAPSHOT_VERSION = 1
ERROR_DECADES = [10.0 ** -k for k in range(1, 11)]

SOLVER_TOKENS = ("diffusion", "mat-iter", "opic") + sched.KINDS


class CliError(Exception):
    """Input or configuration problem; maps to exit code 2."""


def graph_hash(graph):
    return hashlib.sha256(canonical_bytes(graph)).hexdigest()


def save_state(path, graph, state):
    params = state.params
    teleport = params.teleport if params.teleport is not None else np.empty(0)
    np.savez(path, version=SNAPSHOT_VERSION, graph_hash=graph_hash(graph),
             fluid=state.fluid, history=state.history,
             residual=state.residual, diffusions=state.diffusions,
             elementary_steps=state.elementary_steps, signed=state.signed,
             damping=params.damping, target_error=params.target_error,
             teleport=np.asarray(teleport, dtype=np.float64))


def load_state(path, graph):
    try:
        data = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise CliError(f"cannot read state snapshot {path}: {exc}") from exc
    version = int(data["version"])
    if version != SNAPSHOT_VERSION:
        raise CliError(f"unsupported snapshot version {version}")
    if str(data["graph_hash"]) != graph_hash(graph):
        raise CliError("snapshot was taken against a different graph")
    teleport = data["teleport"]
    params = engine.DiffusionParams(
        damping=float(data["damping"]),
        teleport=None if teleport.size == 0 else teleport,
        target_error=float(data["target_error"]))
    state = engine.DiffusionState(
        fluid=data["fluid"].copy(), history=data["history"].copy(),
        residual=float(data["residual"]), diffusions=int(data["diffusions"]),
        elementary_steps=int(data["elementary_steps"]),
        signed=bool(data["signed"]), graph=graph, params=params)
    return state


def parse_gen_spec(spec, seed):
    """Parse 'n=...,l=...,alpha=...[,perms=...]' into a GenConfig."""
    fields = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise CliError(f"bad generator field {part!r} (expected key=value)")
        key, value = part.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        config = gen.GenConfig(
            n=int(fields.pop("n")),
            links=int(fields.pop("l")),
            alpha=float(fields.pop("alpha")),
            permutations=int(fields.pop("perms")) if "perms" in fields else None,
            seed=seed)
    except KeyError as exc:
        raise CliError(f"generator spec is missing {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise CliError(f"bad generator spec: {exc}") from exc
    if fields:
        raise CliError(f"unknown generator fields: {sorted(fields)}")
    return config


def obtain_graph(args):
    if getattr(args, "graph", None) and getattr(args, "gen", None):
        raise CliError("give either --graph or --gen, not both")
    if getattr(args, "graph", None):
        try:
            g = load_edge_list(args.graph, format=args.format)
        except OSError as exc:
            raise CliError(f"cannot read graph {args.graph}: {exc}") from exc
        return g
    if getattr(args, "gen", None):
        config = parse_gen_spec(args.gen, args.seed)
        g, _ = gen.generate(config)
        return g
    raise CliError("no graph given; use --graph PATH or --gen SPEC")


def build_params(args, n):
    teleport = None
    if args.teleport != "uniform":
        try:
            values = [float(line) for line in open(args.teleport, encoding="utf-8")
                      if line.strip()]
        except OSError as exc:
            raise CliError(f"cannot read teleport vector: {exc}") from exc
        teleport = np.asarray(values)
    params = engine.DiffusionParams(damping=args.damping, teleport=teleport,
                                    target_error=args.target_error)
    try:
        params.validate(n)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    return params


def write_rank_file(path, graph, rank):
    order = np.argsort(-rank, kind="stable")
    with open(path, "w", encoding="utf-8") as out:
        for i in order:
            out.write(f"{graph.original_ids[int(i)]}\t{rank[int(i)]:.12g}\n")


def default_online_budget(graph, params):
    # elementary steps a full-sweep solver would spend reaching target_error
    sweeps = max(1, math.ceil(math.log(params.target_error)
                              / math.log(params.damping)))
    return graph.edge_count * sweeps


def run_solver(token, graph, params, args, reference=None, trace_every=None):
    """Run one solver token; returns (rank, trace, label)."""
    if token in sched.KINDS or token == "diffusion":
        kind = args.scheduler if token == "diffusion" else token
        strategy = sched.make_scheduler(kind, seed=args.seed,
                                        sweep_decay=args.sweep_decay)
        rank, trace = engine.run(graph, params, strategy,
                                 trace_every=trace_every, reference=reference,
                                 max_diffusions=args.max_diffusions)
        return rank, trace, f"diffusion/{kind}"
    if token == "mat-iter":
        rank, trace = baseline.power_iterate(graph, params,
                                             trace_every=trace_every or 1,
                                             reference=reference)
        return rank, trace, "mat-iter"
    if token == "opic":
        budget = args.budget or default_online_budget(graph, params)
        strategy = sched.make_scheduler("rand", seed=args.seed)
        rank, trace = baseline.online_run(graph, params, strategy, budget,
                                          reference=reference,
                                          trace_every=trace_every)
        return rank, trace, "opic"
    raise CliError(f"unknown solver {token!r}; expected one of {SOLVER_TOKENS}")


def cmd_rank(args):
    graph = obtain_graph(args)
    params = build_params(args, graph.n)
    if args.solver in ("diffusion",) + sched.KINDS and args.save_state:
        kind = args.scheduler if args.solver == "diffusion" else args.solver
        strategy = sched.make_scheduler(kind, seed=args.seed,
                                        sweep_decay=args.sweep_decay)
        state = engine.init(graph, params)
        rank, trace = engine.run(graph, params, strategy, state=state,
                                 trace_every=args.trace_every,
                                 max_diffusions=args.max_diffusions)
        save_state(args.save_state, graph, state)
        label = f"diffusion/{kind}"
    else:
        if args.save_state:
            raise CliError("--save-state only applies to diffusion solvers")
        rank, trace, label = run_solver(args.solver, graph, params, args,
                                        trace_every=args.trace_every)
    if args.out:
        write_rank_file(args.out, graph, rank)
    if args.trace:
        trace.write_csv(args.trace)
    last = trace.rows[-1]
    bound = "n/a" if last.bound is None else f"{last.bound:.3e}"
    print(f"{label}: n={graph.n} links={graph.edge_count} "
          f"diffusions={last.diffusions} elementary_steps={last.elementary_steps} "
          f"bound={bound}")
    return 0


def cmd_bench(args):
    tokens = [t.strip() for t in args.solvers.split(",") if t.strip()]
    for t in tokens:
        if t not in SOLVER_TOKENS:
            raise CliError(f"unknown solver {t!r}; expected one of {SOLVER_TOKENS}")
    if len(tokens) < 2:
        raise CliError("bench needs at least 2 solvers")
    graph = obtain_graph(args)
    params = build_params(args, graph.n)

    tight = engine.DiffusionParams(damping=params.damping,
                                   teleport=params.teleport,
                                   target_error=params.target_error / 100.0)
    reference, _ = baseline.power_iterate(graph, tight, trace_every=10**9)

    if "opic" in tokens and not args.budget:
        # charge the online solver what the matrix iteration needed
        _, mi_trace = baseline.power_iterate(graph, params, trace_every=10**9)
        args.budget = mi_trace.rows[-1].elementary_steps

    results = []
    for token in tokens:
        rank, trace, label = run_solver(token, graph, params, args,
                                        reference=reference,
                                        trace_every=args.trace_every)
        trace.write_csv(f"{args.out}.{token}.trace.csv")
        results.append((token, label, rank, trace))

    with open(f"{args.out}.summary.csv", "w", encoding="utf-8") as out:
        decades = ",".join(f"steps_to_{d:.0e}" for d in ERROR_DECADES)
        out.write(f"solver,elementary_steps,final_true_error,{decades}\n")
        for token, label, rank, trace in results:
            last = trace.rows[-1]
            final_err = float(np.abs(rank - reference).sum())
            crossings = ",".join(
                str(trace.steps_to_error(d)) if trace.steps_to_error(d) is not None
                else "" for d in ERROR_DECADES)
            out.write(f"{label},{last.elementary_steps},{final_err:.17g},{crossings}\n")
    for token, label, rank, trace in results:
        err = float(np.abs(rank - reference).sum())
        print(f"{label}: elementary_steps={trace.rows[-1].elementary_steps} "
              f"true_error={err:.3e}")
    return 0


def cmd_generate(args):
    if not args.gen:
        raise CliError("generate needs --gen SPEC")
    config = parse_gen_spec(args.gen, args.seed)
    graph, report = gen.generate(config)
    with open(args.out, "w", encoding="utf-8") as out:
        out.write(f"# n={config.n} l={config.links} alpha={config.alpha} "
                  f"seed={config.seed}\n")
        out.write(f"# realized_links={report.realized_links} "
                  f"dangling={report.dangling} isolated={report.isolated}\n")
        dump_edge_list(graph, out)
    print(f"generated n={config.n} realized_links={report.realized_links} "
          f"dangling={report.dangling} isolated={report.isolated} "
          f"attempts={report.attempts} seed={report.seed}")
    return 0


def cmd_update(args):
    try:
        graph = load_edge_list(args.graph, format=args.format)
    except OSError as exc:
        raise CliError(f"cannot read graph {args.graph}: {exc}") from exc
    state = load_state(args.state, graph)
    params = state.params
    try:
        delta = load_delta(args.delta, graph=graph)
        new_graph = apply_delta(graph, delta)
    except (OSError, KeyError) as exc:
        raise CliError(f"bad delta: {exc}") from exc
    strategy = sched.make_scheduler(args.scheduler, seed=args.seed,
                                    sweep_decay=args.sweep_decay)
    rank, trace = update.resume(state, new_graph, params, strategy,
                                trace_every=args.trace_every)
    resumed_steps = trace.rows[-1].elementary_steps
    if args.out:
        write_rank_file(args.out, new_graph, rank)
    if args.trace:
        trace.write_csv(args.trace)
    print(f"resume: diffusions={trace.rows[-1].diffusions} "
          f"elementary_steps={resumed_steps}")
    if args.compare_fresh:
        fresh_sched = sched.make_scheduler(args.scheduler, seed=args.seed,
                                           sweep_decay=args.sweep_decay)
        fresh_rank, fresh_trace = engine.run(new_graph, params, fresh_sched)
        gap = float(np.abs(rank - fresh_rank).sum())
        print(f"fresh: elementary_steps={fresh_trace.rows[-1].elementary_steps} "
              f"agreement_l1={gap:.3e}")
    return 0


def cmd_simulate(args):
    graph = obtain_graph(args)
    params = build_params(args, graph.n)
    if args.workers < 1:
        raise CliError("--workers must be at least 1")
    size = max(1, math.ceil(graph.n / args.workers))
    partitions = asyncsim.partition(graph, params, size)
    rank, sim = asyncsim.simulate(graph, params, partitions,
                                  policy=args.policy, seed=args.seed)
    if args.out:
        write_rank_file(args.out, graph, rank)
    if args.log:
        sim.write_log(args.log)
    print(f"simulate: workers={len(partitions)} policy={args.policy} "
          f"events={sim.events} diffusions={sim.diffusions} "
          f"elementary_steps={sim.elementary_steps}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fluidrank",
        description="Fluid-diffusion PageRank toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", help="edge-list file to load")
    common.add_argument("--gen", metavar="SPEC",
                        help="generate a graph: n=...,l=...,alpha=...[,perms=...]")
    common.add_argument("--format", choices=("auto", "pairs", "prefixed"),
                        default="auto", help="edge-list format (default: auto)")
    common.add_argument("--damping", type=float, default=0.85)
    common.add_argument("--target-error", type=float, default=1e-8)
    common.add_argument("--teleport", default="uniform",
                        help="'uniform' or a file of per-node weights")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--trace", help="write convergence trace CSV here")
    common.add_argument("--trace-every", type=int, default=None,
                        help="trace sampling cadence in diffusions")
    common.add_argument("--scheduler", choices=sched.KINDS, default="max")
    common.add_argument("--sweep-decay", type=float, default=0.5)
    common.add_argument("--max-diffusions", type=int, default=None)
    common.add_argument("--budget", type=int, default=None,
                        help="elementary-step budget for the online solver")

    p_rank = sub.add_parser("rank", parents=[common],
                            help="compute ranks with one solver")
    p_rank.add_argument("--solver", choices=SOLVER_TOKENS, default="diffusion")
    p_rank.add_argument("--out", help="rank output file")
    p_rank.add_argument("--save-state", help="persist the solver state snapshot")
    p_rank.set_defaults(func=cmd_rank)

    p_bench = sub.add_parser("bench", parents=[common],
                             help="compare solvers against a tight reference")
    p_bench.add_argument("--solvers", required=True,
                         help="comma-separated solver tokens (at least 2)")
    p_bench.add_argument("--out", required=True,
                         help="output prefix for trace and summary CSVs")
    p_bench.set_defaults(func=cmd_bench)

    p_gen = sub.add_parser("generate", parents=[common],
                           help="write a synthetic power-law graph")
    p_gen.add_argument("--out", required=True, help="edge-list output file")
    p_gen.set_defaults(func=cmd_generate)

    p_upd = sub.add_parser("update", parents=[common],
                           help="resume a saved run against an edited graph")
    p_upd.add_argument("--state", required=True, help="snapshot from rank --save-state")
    p_upd.add_argument("--delta", required=True,
                       help="edit file: lines '+ src dst' / '- src dst'")
    p_upd.add_argument("--compare-fresh", action="store_true",
                       help="also solve from scratch and report agreement")
    p_upd.add_argument("--out", help="rank output file")
    p_upd.set_defaults(func=cmd_update)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="simulated distributed computation")
    p_sim.add_argument("--workers", type=int, default=4)
    p_sim.add_argument("--policy", choices=("fifo", "random"), default="random")
    p_sim.add_argument("--log", help="step-log CSV output")
    p_sim.add_argument("--out", help="rank output file")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, GraphFormatError, DeltaError, gen.GenerationError,
            engine.ParamsMismatchError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (engine.StarvationError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
