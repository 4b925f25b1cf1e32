"""Command-line front end.

Every command prints its resolved configuration as a ``key=value`` line before doing any
work, then one or more ``key=value`` result lines. Exit status: 0 success, 1 failed
verification or numerical breakdown, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, bench
from .gcs import NumericalError
from .qubo import gen_ea_lattice, read_instance, write_instance
from .statevector import ResourceError, brute_force_min
from .verify import run_verification


THREADS_ENV = "GCSANNEAL_THREADS"


def _kv(**pairs) -> str:
    out = []
    for k, v in pairs.items():
        if isinstance(v, float):
            v = repr(v)
        elif isinstance(v, (list, tuple)):
            v = ",".join(map(str, v))
        out.append(f"{k}={v}")
    return " ".join(out)


def _emit(**pairs):
    print(_kv(**pairs), flush=True)


def _stamp(config: dict) -> str:
    return f"gcsanneal {__version__} digest={bench.config_digest(config)}"


def _shape(args) -> tuple[int, int, int]:
    if args.shape:
        return bench._shape(args.shape)
    return (args.l,) * 3


def cmd_generate(args) -> int:
    shape = _shape(args)
    if min(shape) < 2:
        raise ValueError(f"lattice side lengths must be >= 2, got {shape}")
    config = {"command": "generate", "shape": list(shape), "seed": args.seed, "boundary": args.boundary}
    out = Path(args.out or f"ea_{'x'.join(map(str, shape))}_s{args.seed}.qubo")
    _emit(**config, out=out)
    inst = gen_ea_lattice(shape, args.seed, args.boundary)
    write_instance(inst, out, comment=_stamp(config))
    _emit(n=inst.n, bonds=inst.nnz, path=out)
    return 0


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    overrides = {"learning_rate": args.lr, "init_scale": args.init_scale, "sparse_m": args.sparse_m,
                 "rescale": args.rescale, "beta_start": args.beta_start, "beta_end": args.beta_end}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    cfg = bench.method_config(args.method, args.nt, args.seed, overrides)
    config = {"command": "solve", "instance": str(args.instance), "method": args.method, **cfg.as_dict()}
    _emit(**{k: v for k, v in config.items() if v is not None})
    t0 = time.perf_counter()
    sol, timing = bench.solve(inst, args.method, cfg)
    wall = time.perf_counter() - t0
    result = {
        "tool": f"gcsanneal {__version__}",
        "digest": bench.config_digest(config),
        "config": config,
        "mode": "product_state" if args.method == "product" else args.method,
        "n": inst.n,
        "energy": sol.energy,
        "spins": sol.s.tolist(),
        "iterations": args.nt,
        "timing": timing,
    }
    out = Path(args.out or Path(args.instance).with_suffix(f".{args.method}.json"))
    out.write_text(json.dumps(result, indent=1) + "\n", encoding="utf-8")
    _emit(energy=sol.energy, iterations=args.nt, mode=result["mode"], wall_time=wall, path=out)
    return 0


def cmd_exact(args) -> int:
    inst = read_instance(args.instance)
    _emit(command="exact", instance=args.instance, n=inst.n)
    e0, sol = brute_force_min(inst)
    _emit(energy=e0, spins="".join("+" if v > 0 else "-" for v in sol.s))
    return 0


def cmd_verify(args) -> int:
    _emit(command="verify", n=args.n, trials=args.trials, seed=args.seed)
    report = run_verification(args.n, args.trials, args.seed)
    for line in report.lines():
        print(line)
    _emit(status="pass" if report.passed else "fail")
    return 0 if report.passed else 1


def cmd_bench(args) -> int:
    spec = bench.parse_spec(args.spec)
    threads = args.threads
    _emit(command="bench", spec=args.spec, threads=threads, digest=spec.digest, output=spec.output)
    records = bench.run_batch(spec, threads=threads)
    summary = bench.summarize(records, spec.digest)
    paths = bench.emit_report(summary, spec.output, bench.summarize_timing(records))
    _emit(records=len(records), groups=len(summary.rows), outputs=[str(p) for p in paths])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcsanneal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gcsanneal {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded Edwards-Anderson lattice instance")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--l", type=int, help="cube side length")
    g.add_argument("--shape", help="slab shape AxBxC, e.g. 2x3x4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boundary", choices=("periodic", "open"), default="periodic")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="anneal an instance file")
    p.add_argument("instance")
    p.add_argument("--method", choices=bench.METHODS, default="gcs")
    p.add_argument("--nt", type=int, default=1000, help="schedule steps (sweeps for sa)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float)
    p.add_argument("--init-scale", type=float)
    p.add_argument("--sparse-m", action="store_true", default=None)
    p.add_argument("--rescale", action="store_true", default=None)
    p.add_argument("--beta-start", type=float)
    p.add_argument("--beta-end", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="exhaustive ground state (N <= 25)")
    p.add_argument("instance")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("verify", help="check the analytical engine against the dense simulator")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a batch experiment from a key=value spec file")
    p.add_argument("spec")
    p.add_argument("--threads", type=int, default=bench.default_threads(),
                   help=f"parallel workers (default from ${THREADS_ENV}, else 1)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ResourceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
