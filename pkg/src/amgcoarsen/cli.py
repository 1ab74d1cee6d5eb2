"""Command-line interface.

Subcommands: generate, train, coarsen, solve, bench, bound, scaling.
Exit codes: 0 success, 1 usage error, 2 partial failures, 3 fatal error.

A single --seed value feeds every random consumer through the split-stream
scheme in seeding.py, so runs with identical arguments produce byte-identical
CSV bodies (wall-clock timestamps appear only on '#' comment lines).
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import (backend, dqn, env, evaluate, greedy, lloyd, mesh, metrics,
               mmio, problems, seeding, tagcn, twogrid)
from .errors import AmgCoarsenError, InputError

BENCH_FIELDS = ["instance", "family", "n", "method", "theta", "f_fraction",
                "n_c", "grid_complexity", "rho", "ecf", "coarsen_seconds",
                "sweeps", "error"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _timestamp_comment():
    return f"# generated {datetime.now(timezone.utc).isoformat()}"


def _load_problem(args):
    """Resolve the problem source flags shared by coarsen/solve."""
    if args.matrix:
        return problems.load_matrix(args.matrix)
    if args.mesh:
        return problems.load_mesh_problem(args.mesh)
    if args.structured:
        nx, _, ny = args.structured.partition("x")
        return problems.fd_poisson_structured(int(nx), int(ny or nx))
    raise InputError("one of --matrix, --mesh or --structured is required")


def _load_net(args):
    if getattr(args, "weights", None):
        return tagcn.load_weights(args.weights)
    if getattr(args, "random_net", False):
        return tagcn.init_network(seeding.seed_for(args.seed, "net-init"))
    raise InputError("rl method needs --weights (or --random-net)")


def _splitting_from_state(state):
    return {"coarse": [int(i) for i in state.coarse_nodes()],
            "f_fraction": float(state.f.sum() / state.n)}


def _write_csv(path, fieldnames, rows, comment=True):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(_timestamp_comment() + "\n")
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(row)


# ---------------------------------------------------------------- generate

def cmd_generate(args):
    os.makedirs(args.out_dir, exist_ok=True)
    instances = []
    if args.family == "structured":
        sizes = [int(s) for s in args.sizes.split(",")]
        for s in sizes:
            problem = problems.fd_poisson_structured(s, s)
            name = f"structured-{s}x{s}"
            path = os.path.join(args.out_dir, name + ".mtx")
            mmio.write_matrix_market(path, problem.matrix)
            instances.append({"name": name, "family": "structured",
                              "matrix": os.path.abspath(path), "mesh": None,
                              "params": {"nx": s, "ny": s}})
    elif args.family == "different-size":
        targets = [int(s) for s in args.targets.split(",")]
        rng = seeding.stream(args.seed, "mesh")
        for t in targets:
            hi = max(t + 1, int(1.2 * t))
            m = mesh.random_convex_mesh(
                min(8, t), (t, hi), int(rng.integers(np.iinfo(np.int64).max)))
            problem = problems.fem_p1_laplacian(m)
            name = f"size-{t}"
            mesh_path = os.path.join(args.out_dir, name + ".mesh.json")
            mtx_path = os.path.join(args.out_dir, name + ".mtx")
            mesh.write_mesh(mesh_path, m)
            mmio.write_matrix_market(mtx_path, problem.matrix)
            instances.append({"name": name, "family": "different-size",
                              "matrix": os.path.abspath(mtx_path),
                              "mesh": os.path.abspath(mesh_path),
                              "params": {"target": t, "n": problem.matrix.n}})
    elif args.family == "aspect-ratio":
        aspects = [float(a) for a in args.aspects.split(",")]
        rng = seeding.stream(args.seed, "mesh")
        base = mesh.random_convex_mesh(
            8, (args.base_nodes, int(1.2 * args.base_nodes)),
            int(rng.integers(np.iinfo(np.int64).max)))
        for a in aspects:
            m = mesh.stretched_mesh(base, a)
            problem = problems.fem_p1_laplacian(m)
            name = f"aspect-{a:g}"
            mesh_path = os.path.join(args.out_dir, name + ".mesh.json")
            mtx_path = os.path.join(args.out_dir, name + ".mtx")
            mesh.write_mesh(mesh_path, m)
            mmio.write_matrix_market(mtx_path, problem.matrix)
            instances.append({"name": name, "family": "aspect-ratio",
                              "matrix": os.path.abspath(mtx_path),
                              "mesh": os.path.abspath(mesh_path),
                              "params": {"aspect": a, "n": problem.matrix.n}})
    elif args.family == "ingest":
        for path in sorted(args.inputs):
            name = os.path.splitext(os.path.basename(path))[0]
            entry = {"name": name, "family": "ingest", "matrix": None,
                     "mesh": None, "params": {}}
            if path.endswith(".mtx"):
                problems.load_matrix(path)  # validate early
                entry["matrix"] = os.path.abspath(path)
            else:
                problems.load_mesh_problem(path)
                entry["mesh"] = os.path.abspath(path)
            instances.append(entry)
    manifest = {"family": args.family, "instances": instances}
    manifest_path = os.path.join(args.out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(instances)} instances and {manifest_path}")
    return 0


# ------------------------------------------------------------------- train

def cmd_train(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    if args.episodes is not None:
        doc["episodes"] = args.episodes
    if args.seed is not None:
        doc["seed"] = args.seed
    doc.setdefault("out_dir", args.out_dir)
    cfg = dqn.config_from_dict(doc)
    os.makedirs(cfg.out_dir, exist_ok=True)

    def progress(episode, row):
        if args.log_every and (episode + 1) % args.log_every == 0:
            print(f"episode {episode + 1}/{cfg.episodes} "
                  f"payoff={row['payoff']:.0f} "
                  f"f_fraction={row['f_fraction']:.3f} "
                  f"eps={row['epsilon']:.3f}")

    net, log = dqn.train(cfg, progress=progress)
    log_path = os.path.join(cfg.out_dir, "training-log.csv")
    log.write_csv(log_path, comment=_timestamp_comment().lstrip("# "))
    print(f"weights: {os.path.join(cfg.out_dir, 'weights-final.agcw')}")
    print(f"log: {log_path}")
    return 0


# ----------------------------------------------------------------- coarsen

def _run_coarsen(problem, method, args):
    """Returns (state, stats_row, trace_record, decomposition)."""
    record = env.EpisodeRecord()
    decomposition = None
    if method == "greedy":
        t0 = time.perf_counter()
        state = greedy.greedy_coarsen(problem, args.theta, record=record)
        seconds = time.perf_counter() - t0
        stats = {"sweeps": "", "matvec_calls": 0, "matvec_ops": 0,
                 "seconds": seconds}
    else:
        net = _load_net(args)
        state, es = evaluate.evaluate_coarsen(
            net, problem, args.theta, mean_size=args.mean_size,
            cycles=args.cycles, seed=seeding.seed_for(args.seed, "lloyd"))
        stats = {"sweeps": es.sweeps, "matvec_calls": es.matvec_calls,
                 "matvec_ops": es.matvec_ops, "seconds": es.seconds}
        record = None
        decomposition = es.decomposition
    return state, stats, record, decomposition


def cmd_coarsen(args):
    problem = _load_problem(args)
    state, stats, record, decomposition = _run_coarsen(problem, args.method,
                                                       args)
    with open(args.out, "w") as fh:
        json.dump(_splitting_from_state(state), fh)
        fh.write("\n")
    if args.stats:
        row = {"n": problem.matrix.n, "method": args.method,
               "theta": args.theta,
               "n_c": int(state.n_coarse),
               "f_fraction": float(state.f.sum() / state.n), **stats}
        _write_csv(args.stats, list(row.keys()), [row])
    if args.trace and record is not None:
        env.write_episode_trace(args.trace, record)
    if args.aggregates and decomposition is not None:
        lloyd.write_decomposition(args.aggregates, decomposition)
    print(f"n={problem.matrix.n} n_c={state.n_coarse} "
          f"f_fraction={state.f.sum() / state.n:.4f}")
    return 0


# ------------------------------------------------------------------- solve

def cmd_solve(args):
    problem = _load_problem(args)
    a = problem.matrix
    if args.splitting:
        with open(args.splitting) as fh:
            doc = json.load(fh)
        coarse = np.asarray(doc["coarse"], dtype=np.int64)
        if coarse.size and (coarse.min() < 0 or coarse.max() >= a.n):
            raise InputError(
                f"splitting indexes nodes outside 0..{a.n - 1}")
        fine = np.ones(a.n, dtype=np.uint8)
        fine[coarse] = 0
    else:
        state = greedy.greedy_coarsen(problem, args.theta)
        fine = state.f
    h = twogrid.build_hierarchy(a, fine, n1=args.n1, n2=args.n2)
    rng = seeding.stream(args.seed, "convergence")
    if args.rhs == "random":
        b = rng.standard_normal(a.n)
    elif args.rhs == "ones":
        b = np.ones(a.n)
    else:
        b = np.zeros(a.n)
    res = twogrid.solve(h, b, delta=args.delta, max_iters=args.max_iters)
    if args.residuals:
        _write_csv(args.residuals, ["iteration", "residual"],
                   [{"iteration": i, "residual": r}
                    for i, r in enumerate(res.residuals)])
    print(f"converged={res.converged} iterations={res.iterations} "
          f"final_residual={res.residuals[-1]:.3e}")
    return 0 if res.converged else 2


# ------------------------------------------------------------------- bench

def _bench_one(entry, method, args):
    row = {"instance": entry["name"], "family": entry["family"],
           "method": method, "theta": args.theta, "error": ""}
    try:
        if entry.get("matrix"):
            problem = problems.load_matrix(entry["matrix"])
        elif entry.get("mesh"):
            problem = problems.load_mesh_problem(entry["mesh"])
        else:
            raise InputError("manifest entry has neither matrix nor mesh")
        problem.family_tag = entry["family"]
        row["n"] = problem.matrix.n
        state, stats, _, _ = _run_coarsen(problem, method, args)
        row["f_fraction"] = float(state.f.sum() / state.n)
        row["n_c"] = int(state.n_coarse)
        row["coarsen_seconds"] = stats["seconds"]
        row["sweeps"] = stats["sweeps"]
        h = twogrid.build_hierarchy(problem.matrix, state.f)
        rho = twogrid.measure_convergence_factor(
            h, trials=args.trials, cycles=args.cycles_rho,
            seed=seeding.seed_for(args.seed, "convergence"))
        row["grid_complexity"] = h.grid_complexity
        row["rho"] = rho
        row["ecf"] = metrics.effective_convergence_factor(
            rho, h.grid_complexity) if rho < 1 else rho
    except (AmgCoarsenError, OSError, ValueError, KeyError) as e:
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def _bench_job(payload):
    entry, method, argdict = payload
    if argdict.get("backend"):
        backend.set_backend(argdict["backend"])
    return _bench_one(entry, method, argparse.Namespace(**argdict))


def cmd_bench(args):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    methods = args.methods.split(",")
    jobs = [(entry, method) for entry in manifest["instances"]
            for method in methods]
    if args.workers > 1:
        argdict = vars(args).copy()
        argdict.pop("func", None)
        with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(
                _bench_job, [(e, m, argdict) for e, m in jobs]))
    else:
        rows = [_bench_one(entry, method, args) for entry, method in jobs]
    _write_csv(args.out, BENCH_FIELDS, rows)
    failures = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} runs, {failures} failures -> {args.out}")
    return 2 if failures else 0


# ------------------------------------------------------------------- bound

def cmd_bound(args):
    raw = metrics.structured_upper_bound(args.nx, args.ny)
    clamped = metrics.structured_upper_bound(args.nx, args.ny, clamp=True)
    if raw == clamped:
        print(f"{clamped:.6f}")
    else:
        print(f"{clamped:.6f} (raw {raw:.6f})")
    return 0


# ----------------------------------------------------------------- scaling

def cmd_scaling(args):
    net = _load_net(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = evaluate.measure_scaling(
        sizes, net, theta=args.theta, mean_size=args.mean_size,
        cycles=args.cycles, seed=seeding.seed_for(args.seed, "lloyd"))
    fields = ["n", "seconds", "seconds_per_node", "sweeps",
              "matvec_calls_per_sweep", "matvec_ops_per_sweep", "f_fraction"]
    _write_csv(args.out, fields, rows)
    for r in rows:
        print(f"n={r['n']:>9d} {r['seconds']:9.3f}s "
              f"{r['seconds_per_node']:.3e} s/node sweeps={r['sweeps']}")
    return 0


# -------------------------------------------------------------------- main

def build_parser():
    p = _Parser(prog="amgcoarsen",
                description="Learned coarse/fine splitting for two-level AMG")
    p.add_argument("--backend", choices=("python", "cython"),
                   help="force a kernel backend for this run")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a test-grid family + manifest")
    g.add_argument("family", choices=("structured", "different-size",
                                      "aspect-ratio", "ingest"))
    g.add_argument("--out-dir", required=True)
    g.add_argument("--sizes", default="8,16,32,64,128",
                   help="structured: comma list of square grid sides")
    g.add_argument("--targets", default="60,120,250,500,1000",
                   help="different-size: comma list of node counts")
    g.add_argument("--aspects", default="1,2,4,8",
                   help="aspect-ratio: comma list of x-stretch factors")
    g.add_argument("--base-nodes", type=int, default=400)
    g.add_argument("--inputs", nargs="*", default=[],
                   help="ingest: mesh JSON / MatrixMarket files")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the coarsening agent")
    t.add_argument("--config", help="JSON file of trainer settings")
    t.add_argument("--out-dir", default="training-out")
    t.add_argument("--episodes", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--log-every", type=int, default=100)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("coarsen", help="produce a C/F splitting")
    _add_problem_flags(c)
    c.add_argument("--method", choices=("rl", "greedy"), default="rl")
    c.add_argument("--weights")
    c.add_argument("--random-net", action="store_true",
                   help="use freshly initialized weights (rl smoke runs)")
    c.add_argument("--theta", type=float, default=0.56)
    c.add_argument("--mean-size", type=int, default=400)
    c.add_argument("--cycles", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="splitting JSON path")
    c.add_argument("--stats", help="stats CSV path")
    c.add_argument("--trace", help="episode trace JSONL (greedy only)")
    c.add_argument("--aggregates", help="subdomain decomposition JSON (rl only)")
    c.set_defaults(func=cmd_coarsen)

    s = sub.add_parser("solve", help="two-grid solve")
    _add_problem_flags(s)
    s.add_argument("--splitting", help="splitting JSON (default: greedy)")
    s.add_argument("--theta", type=float, default=0.56)
    s.add_argument("--rhs", choices=("random", "ones", "zero"),
                   default="random")
    s.add_argument("--delta", type=float, default=1e-8)
    s.add_argument("--max-iters", type=int, default=200)
    s.add_argument("--n1", type=int, default=1)
    s.add_argument("--n2", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--residuals", help="residual history CSV")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="coarsen + solve over a manifest")
    b.add_argument("--manifest", required=True)
    b.add_argument("--methods", default="rl,greedy")
    b.add_argument("--weights")
    b.add_argument("--random-net", action="store_true")
    b.add_argument("--theta", type=float, default=0.56)
    b.add_argument("--mean-size", type=int, default=400)
    b.add_argument("--cycles", type=int, default=1000)
    b.add_argument("--trials", type=int, default=3)
    b.add_argument("--cycles-rho", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("bound", help="structured-grid F-fraction bound")
    d.add_argument("nx", type=int)
    d.add_argument("ny", type=int)
    d.set_defaults(func=cmd_bound)

    sc = sub.add_parser("scaling", help="coarsening time vs grid size")
    sc.add_argument("--sizes", default="10000,100000")
    sc.add_argument("--weights")
    sc.add_argument("--random-net", action="store_true")
    sc.add_argument("--theta", type=float, default=0.56)
    sc.add_argument("--mean-size", type=int, default=400)
    sc.add_argument("--cycles", type=int, default=1000)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--out", required=True)
    sc.set_defaults(func=cmd_scaling)
    return p


def _add_problem_flags(parser):
    parser.add_argument("--matrix", help="MatrixMarket file")
    parser.add_argument("--mesh", help="mesh JSON file")
    parser.add_argument("--structured", metavar="NXxNY",
                        help="generate an FD grid, e.g. 32x32")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend:
        backend.set_backend(args.backend)
    try:
        return args.func(args)
    except (AmgCoarsenError, OSError, json.JSONDecodeError) as e:
        print(f"fatal: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
