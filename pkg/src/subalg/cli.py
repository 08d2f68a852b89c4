"""Command-line entry point: ``subalg {generate,verify,scale,experiment}``.

Exit codes: 0 success, 1 verification or convergence failure, 2 usage, I/O or
schema error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import generators as gen_mod
from .channels import AlgebraSpec, invariance_oracle, spanning_family
from .config import DEFAULT, SchemaError, SubalgError
from .experiment import ALGOS, DEFAULT_MAX_ITER, ExperimentConfig, cmd_experiment, initial_state, run_algo
from .isometry import verify_report
from .matcore import RngStream, loads_matrix, matrix_to_dict, unitarity_residual

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

FAMILIES = ("pattern", "diag-schrodinger", "blocks", "tensor-h", "tensor-s", "zero")


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SUBALG_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SUBALG_SEED must be an integer, got {env!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        if obj.dtype == object:
            return [_jsonable(x) for x in obj]
        if np.iscomplexobj(obj) and obj.ndim == 2:
            return matrix_to_dict(obj)
        if np.iscomplexobj(obj):
            return {"shape": list(obj.shape), "re": obj.real.ravel().tolist(), "im": obj.imag.ravel().tolist()}
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, AlgebraSpec):
        return obj.label()
    return obj


def _write_text(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


# -- generate -------------------------------------------------------------------

def _generate(args, seed: int):
    gen = RngStream(seed, 0).generator()
    fam = args.family
    if fam.startswith("fixture:"):
        name = fam.split(":", 1)[1]
        fx = gen_mod.fixtures()
        if name not in fx:
            raise UsageError(f"unknown fixture {name!r}; available: {', '.join(fx)}")
        f = fx[name]
        meta = {"n": f.n, "k": f.k, "fixture": name}
        witness = {"expected": [{"algebra": a, "picture": p, "invariant": v} for (a, p), v in f.expected.items()],
                   **f.extra}
        return f.u, meta, witness
    if fam not in FAMILIES:
        raise UsageError(f"unknown family {fam!r}")
    k = args.k
    if fam in ("pattern", "diag-schrodinger"):
        p = gen_mod.random_pattern(args.n, k, gen, canonical=args.canonical)
        if fam == "pattern":
            u, w = gen_mod.generate_pattern_unitary(p, gen, return_witness=True)
        else:
            u, w = gen_mod.generate_schrodinger_diag_unitary(p, gen, method=args.method, return_witness=True)
        return u, {"n": args.n, "k": k, "algebra": "diagonal"}, w
    if fam == "blocks":
        dims = args.dims or [2, 1]
        bp = gen_mod.random_block_pattern(dims, k, gen, picture=args.picture)
        u, w = gen_mod.generate_block_diag_unitary(bp, args.picture, gen, return_witness=True)
        alg = AlgebraSpec.blocks(dims)
        return u, {"n": alg.n, "k": k, "algebra": alg.label()}, w
    if fam in ("tensor-h", "tensor-s"):
        if fam == "tensor-h":
            u, w = gen_mod.generate_tensor_H(args.d, args.r, k, gen, return_witness=True)
        else:
            u, w = gen_mod.generate_tensor_S(args.d, args.r, k, gen, return_witness=True)
        alg = AlgebraSpec.tensor(args.d, args.r)
        return u, {"n": alg.n, "k": k, "algebra": alg.label()}, w
    u = gen_mod.generate_zero_block(args.d0, args.d1, k, gen)
    alg = AlgebraSpec.zero(args.d0, args.d1)
    return u, {"n": alg.n, "k": k, "algebra": alg.label()}, {}


def cmd_generate(args) -> int:
    seed = _seed(args)
    u, meta, witness = _generate(args, seed)
    meta = {"family": args.family, "seed": seed, **meta}
    doc = matrix_to_dict(u)
    doc["meta"] = meta
    _write_text(args.out, json.dumps(doc))
    wpath = args.witness
    if wpath is None and args.out not in (None, "-"):
        wpath = str(args.out) + ".witness.json"
    if wpath is not None and witness is not None:
        Path(wpath).write_text(json.dumps(_jsonable({"meta": meta, **witness})) + "\n")
    return EXIT_OK


# -- verify ---------------------------------------------------------------------

def _read_input(path: str):
    if path == "-":
        text = sys.stdin.read()
        where = "<stdin>"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        where = path
    try:
        u = loads_matrix(text)
    except SchemaError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    meta = json.loads(text).get("meta", {})
    return u, meta if isinstance(meta, dict) else {}


def _states(spec: str, k: int, seed: int):
    if spec == "canonical":
        return spanning_family(k)
    if spec.startswith("random:"):
        try:
            count = int(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad --states value {spec!r}") from None
        return spanning_family(k, RngStream(seed, 1).generator(), n_random=count)
    raise UsageError("--states must be 'canonical' or 'random:N'")


def cmd_verify(args) -> int:
    seed = _seed(args)
    expected = None
    if args.fixture:
        fx = gen_mod.fixtures()
        if args.fixture not in fx:
            raise UsageError(f"unknown fixture {args.fixture!r}; available: {', '.join(fx)}")
        f = fx[args.fixture]
        u, n, k = f.u, f.n, f.k
        if args.algebra:
            checks = [(AlgebraSpec.parse(args.algebra, n), args.picture)]
        else:
            checks = [(f.algebras[a], p) for (a, p) in f.expected]
            expected = [f.expected[key] for key in f.expected]
    else:
        if not args.input:
            raise UsageError("verify needs --in FILE (or '-') or --fixture NAME")
        u, meta = _read_input(args.input)
        if u.shape[0] != u.shape[1]:
            raise SchemaError(f"matrix must be square, got {u.shape[0]}x{u.shape[1]}")
        algebra = args.algebra or meta.get("algebra")
        n = args.n or (AlgebraSpec.parse(algebra).n if algebra and "=" in algebra else None) or meta.get("n")
        if not n:
            raise UsageError("cannot infer n; pass --n or an algebra with explicit sizes")
        if u.shape[0] % n:
            raise UsageError(f"matrix size {u.shape[0]} is not a multiple of n = {n}")
        k = u.shape[0] // n
        checks = [(AlgebraSpec.parse(algebra or "diagonal", n), args.picture)]

    family = _states(args.states, k, seed)
    report = verify_report(u, n, k, DEFAULT)
    report.update(n=n, k=k, gram_condition=family.gram_condition(), tol=args.tol)
    unitary_ok = report["unitary_residual"] <= DEFAULT.unitary
    rows = []
    ok = unitary_ok
    for idx, (alg, picture) in enumerate(checks):
        defect = invariance_oracle(u, alg, picture, family)
        row = {"algebra": alg.label(), "picture": picture, "defect": defect, "invariant": defect <= args.tol}
        if expected is not None:
            row["expected"] = expected[idx]
            row["matches_expected"] = row["invariant"] == expected[idx]
            ok = ok and row["matches_expected"]
        else:
            ok = ok and row["invariant"]
        rows.append(row)
    report["checks"] = rows
    report["defect"] = max(r["defect"] for r in rows)
    report["pass"] = bool(ok)
    _write_text(args.out, json.dumps(report, indent=2))
    if not unitary_ok:
        print(f"input is not unitary (residual {report['unitary_residual']:.3e})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# -- scale ----------------------------------------------------------------------

def cmd_scale(args) -> int:
    seed = _seed(args)
    k = args.n if (args.algo == "qls" and args.k is None) else (args.k or args.n)
    cfg = ExperimentConfig(args.algo, args.n, k, [args.eps], 1, seed,
                           args.max_iter or DEFAULT_MAX_ITER[args.algo])
    x0 = initial_state(cfg.algo, cfg.n, cfg.k, seed, 0)
    final, trace = run_algo(cfg.algo, x0, cfg.n, cfg.k, args.eps, cfg.max_iter)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "defect", "logF"])
            for t, d, f in trace.rows():
                w.writerow([t, repr(d), "" if f is None else repr(f)])
    out = {
        "algo": cfg.algo, "n": cfg.n, "k": cfg.k, "eps": args.eps, "seed": seed,
        "iterations": trace.iterations, "converged": trace.converged, "stalled": trace.stalled,
        "final_defect": float(trace.defect_history[-1]), "degenerate_polar": trace.degenerate_polar,
    }
    if trace.f_history is not None and len(trace.f_history):
        out["final_logF"] = float(trace.f_history[-1])
    print(json.dumps(out))
    if args.out:
        if cfg.algo == "unital":
            Path(args.out).write_text(json.dumps(matrix_to_dict(final)) + "\n")
        elif cfg.algo == "qls":
            Path(args.out).write_text(json.dumps(_jsonable({"vectors": final.vectors})) + "\n")
        else:
            Path(args.out).write_text(json.dumps(_jsonable({"blocks": final.blocks})) + "\n")
    return EXIT_OK if trace.converged else EXIT_FAIL


# -- experiment -----------------------------------------------------------------

def run_experiment(args) -> int:
    seed = _seed(args)
    k = args.k if args.k is not None else args.n
    cfg = ExperimentConfig(args.algo, args.n, k, args.eps_list, args.trials, seed, args.max_iter,
                           Path(args.out_dir), args.jobs)
    summary = cmd_experiment(cfg)
    print(json.dumps({
        "out_dir": str(cfg.out_dir),
        "convergence_rate": summary["convergence_rate"],
        "stalled_trials": summary["stalled_trials"],
        "wall_time_s": round(summary["wall_time_s"], 3),
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subalg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a structured unitary")
    g.add_argument("--family", required=True,
                   help=f"one of {', '.join(FAMILIES)} or fixture:NAME")
    g.add_argument("--n", type=int, default=2, help="system dimension (pattern families)")
    g.add_argument("--k", type=int, default=2, help="ancilla dimension")
    g.add_argument("--dims", type=_int_list, help="block sizes for --family blocks, e.g. 2,1")
    g.add_argument("--picture", choices=["H", "S"], default="H",
                   help="blocks family: H = unital-map invariance, S = channel invariance")
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--r", type=int, default=2)
    g.add_argument("--d0", type=int, default=1)
    g.add_argument("--d1", type=int, default=1)
    g.add_argument("--method", choices=["latin", "qls"], default="latin")
    g.add_argument("--canonical", action="store_true", help="use the shifted-identity pattern")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", default="-")
    g.add_argument("--witness", help="sidecar JSON path (default: OUT.witness.json)")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="check invariance of an algebra under the induced maps")
    v.add_argument("--in", dest="input", help="matrix JSON file, or - for stdin")
    v.add_argument("--fixture", help="verify a built-in example instead of a file")
    v.add_argument("--algebra", help="diagonal | blocks=d1,d2,... | tensor=d,r | zero=d0,d1 | full")
    v.add_argument("--picture", choices=["S", "T"], default="S",
                   help="S: unital map on the system, T: the channel")
    v.add_argument("--states", default="canonical", help="canonical | random:N")
    v.add_argument("--n", type=int)
    v.add_argument("--tol", type=float, default=DEFAULT.oracle)
    v.add_argument("--seed", type=int)
    v.add_argument("--out", default="-")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scale", help="run one Sinkhorn-type iteration from a random start")
    s.add_argument("--algo", choices=ALGOS, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--trace", help="CSV file for the per-iteration defect (and log F)")
    s.add_argument("--out", help="JSON file for the final state")
    s.set_defaults(func=cmd_scale)

    e = sub.add_parser("experiment", help="many seeded runs: histogram, eps sweep, summary")
    e.add_argument("--algo", choices=ALGOS, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--k", type=int)
    e.add_argument("--eps-list", type=_float_list, default=[1e-1, 1e-2, 1e-3, 1e-4])
    e.add_argument("--trials", type=int, default=1000)
    e.add_argument("--seed", type=int)
    e.add_argument("--max-iter", type=int)
    e.add_argument("--out-dir", default="experiment-out")
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=run_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SchemaError, ValueError, OSError) as exc:
        print(f"subalg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SubalgError as exc:
        print(f"subalg {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
