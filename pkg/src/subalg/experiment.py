"""Batch runs of the scaling iterations: iteration-count histograms and eps sweeps.

Every trial draws its input from its own ``RngStream(seed, trial)``, runs once
at the smallest requested eps with the full defect history kept, and reads off
the step count for each larger eps as the first crossing of that history.  All
eps values therefore describe one trajectory per trial.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import json
import math
import os
import subprocess
import time
from pathlib import Path

import numpy as np

from . import _kernels
from .matcore import RngStream, haar_unitary, matrix_to_dict
from .scaling import (
    random_block_psd,
    random_qls_grid,
    sinkhorn_blocks,
    sinkhorn_qls,
    sinkhorn_unital,
    steps_to_reach,
)

ALGOS = ("qls", "unital", "blocks")
DEFAULT_MAX_ITER = {"qls": 100_000, "unital": 100_000, "blocks": 1_000_000}
QUANTILES = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0)


@dataclasses.dataclass
class ExperimentConfig:
    algo: str
    n: int
    k: int
    eps_list: list
    trials: int
    seed: int
    max_iter: int | None = None
    out_dir: Path = Path("experiment-out")
    jobs: int = 1

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {', '.join(ALGOS)}, got {self.algo!r}")
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be positive")
        if self.algo == "qls" and self.k != self.n:
            raise ValueError("qls grids are n x n vectors in C^n; k must equal n")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.eps_list or any(not (e > 0) for e in self.eps_list):
            raise ValueError("eps_list must be non-empty and strictly positive")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.max_iter is None:
            self.max_iter = DEFAULT_MAX_ITER[self.algo]
        self.eps_list = sorted({float(e) for e in self.eps_list}, reverse=True)
        self.out_dir = Path(self.out_dir)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["out_dir"] = str(self.out_dir)
        return d


def initial_state(algo: str, n: int, k: int, seed: int, stream: int = 0):
    """Random starting point of trial ``stream``; shared with the ``scale`` command."""
    gen = RngStream(seed, stream).generator()
    if algo == "unital":
        return haar_unitary(n * k, gen)
    if algo == "qls":
        return random_qls_grid(n, gen)
    if algo == "blocks":
        return random_block_psd(n, k, gen)
    raise ValueError(f"unknown algo {algo!r}")


def run_algo(algo: str, x0, n: int, k: int, eps: float, max_iter: int):
    """Dispatch to the matching iteration; returns (final state, ScaleTrace)."""
    if algo == "unital":
        return sinkhorn_unital(x0, n, k, eps, max_iter)
    if algo == "qls":
        return sinkhorn_qls(x0, eps, max_iter)
    return sinkhorn_blocks(x0, eps, max_iter)


def _run_trial(args):
    algo, n, k, eps_list, seed, max_iter, trial = args
    x0 = initial_state(algo, n, k, seed, trial)
    final, trace = run_algo(algo, x0, n, k, min(eps_list), max_iter)
    steps = [steps_to_reach(trace.defect_history, e) for e in eps_list]
    stall = None
    if trace.stalled:
        stall = {
            "trial": trial,
            "iterations": trace.iterations,
            "final_defect": float(trace.defect_history[-1]),
            "matrix": matrix_to_dict(final),
        }
    return {
        "trial": trial,
        "steps": steps,
        "iterations": trace.iterations,
        "final_defect": float(trace.defect_history[-1]),
        "stall": stall,
    }


def _version() -> str:
    from . import __version__

    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt(x: float) -> str:
    return repr(float(x))


def _iter_results(cfg: ExperimentConfig):
    tasks = [(cfg.algo, cfg.n, cfg.k, cfg.eps_list, cfg.seed, cfg.max_iter, t) for t in range(cfg.trials)]
    if cfg.jobs == 1:
        yield from map(_run_trial, tasks)
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        # map keeps trial order regardless of completion order
        yield from pool.map(_run_trial, tasks, chunksize=max(1, cfg.trials // (8 * cfg.jobs)))


def cmd_experiment(cfg: ExperimentConfig) -> dict:
    """Write histogram.csv, eps_sweep.csv and summary.json into ``cfg.out_dir``.

    histogram.csv rows are flushed per trial, so an interrupted run leaves the
    completed trials on disk.  Wall time appears only in summary.json; the CSV
    files depend on the config alone.
    """
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    n_eps = len(cfg.eps_list)
    steps = np.full((cfg.trials, n_eps), -1, dtype=np.int64)
    stalls = []
    final_defects = np.empty(cfg.trials)
    with open(cfg.out_dir / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "eps", "iterations", "log10_iterations", "converged"])
        for res in _iter_results(cfg):
            t = res["trial"]
            final_defects[t] = res["final_defect"]
            if res["stall"] is not None:
                stalls.append(res["stall"])
            for e_idx, (eps, s) in enumerate(zip(cfg.eps_list, res["steps"])):
                converged = s is not None
                it = s if converged else res["iterations"]
                steps[t, e_idx] = s if converged else -1
                log_it = _fmt(math.log10(it)) if it > 0 else ""
                w.writerow([t, _fmt(eps), it, log_it, int(converged)])
            fh.flush()

    sweep = []
    with open(cfg.out_dir / "eps_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "trials", "converged", "convergence_rate", "mean_steps", "median_steps",
                    "mean_log10_steps"])
        for e_idx, eps in enumerate(cfg.eps_list):
            ok = steps[:, e_idx] >= 0
            s = steps[ok, e_idx].astype(float)
            row = {
                "eps": float(eps),
                "converged": int(ok.sum()),
                "convergence_rate": float(ok.mean()),
                "mean_steps": float(s.mean()) if s.size else float("nan"),
                "median_steps": float(np.median(s)) if s.size else float("nan"),
                "mean_log10_steps": float(np.log10(np.maximum(s, 1)).mean()) if s.size else float("nan"),
                "quantiles": {str(q): float(np.quantile(s, q)) for q in QUANTILES} if s.size else {},
            }
            sweep.append(row)
            w.writerow([_fmt(eps), cfg.trials, row["converged"], _fmt(row["convergence_rate"]),
                        _fmt(row["mean_steps"]), _fmt(row["median_steps"]), _fmt(row["mean_log10_steps"])])

    summary = {
        "config": cfg.as_dict(),
        "version": _version(),
        "backend": _kernels.BACKEND,
        "convergence_rate": sweep[-1]["convergence_rate"],
        "eps_sweep": sweep,
        "stalled_trials": len(stalls),
        "stalls": stalls,
        "max_final_defect": float(final_defects.max()),
        "wall_time_s": time.perf_counter() - t0,
        "cpu_count": os.cpu_count(),
    }
    with open(cfg.out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary
