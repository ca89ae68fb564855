"""Seeded experiment execution with CSV (and figure) outputs.

Determinism contract: every random object is drawn from
``numpy.random.default_rng`` seeded with ``[base_seed, trial_index, role]``
(roles: 0 ensemble, 1 ground truth, 2 acquisition noise), so reruns and
parallel runs produce byte-identical CSVs. Trials run in a thread pool
sized by the ``QPRKIT_THREADS`` environment variable.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import analysis as an
from ..crb import crb_result, input_snr_db, sigma_for_input_snr
from ..errors import ConfigError, QprError
from ..measurement import (
    gaussian_ensemble,
    gen_sparse,
    gen_two_sinusoid,
    gen_unit_sphere,
)
from ..metrics import mse_from_snr_db
from ..quantizer import (
    SATURATION_NARROW,
    SATURATION_WIDE,
    Quantizer,
    design_equiprobable,
    design_lloyd_max,
    precision,
    quantization_snr,
    save_quantizer,
    squared_precision,
)
from ..solvers import (
    NAMED_ALGORITHMS,
    QprProblem,
    make_problem,
    named_config,
    run_solver,
)
from ..specfun import chi2_1_inv_cdf
from .config import ExperimentConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_NUMERICAL = 3


def worker_count(n_tasks: int) -> int:
    env = os.environ.get("QPRKIT_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QPRKIT_THREADS must be an integer, got {env!r}") from exc
    else:
        cap = min(8, os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def design(kind: str, k: int, saturation: str = "wide") -> Quantizer:
    offset = SATURATION_WIDE if saturation == "wide" else SATURATION_NARROW
    if kind == "eq":
        return design_equiprobable(k, saturation_offset=offset)
    if kind == "lmq":
        return design_lloyd_max(k).quantizer
    raise ConfigError(f"unknown quantizer kind {kind!r}")


def _parse_algorithms(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Expand 'name' / 'name@kind' entries to (name, quantizer_kind) pairs."""
    out = []
    for entry in cfg.algorithms:
        entry = str(entry)
        name, _, kind = entry.partition("@")
        kind = kind or cfg.quantizer_kind
        if name not in NAMED_ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {name!r}; choose from {sorted(NAMED_ALGORITHMS)}"
            )
        if kind not in ("eq", "lmq"):
            raise ConfigError(f"unknown quantizer kind {kind!r} in {entry!r}")
        out.append((name, kind))
    return out


def _ground_truth(cfg: ExperimentConfig, trial: int):
    if cfg.truth == "two-sinusoid":
        return gen_two_sinusoid(cfg.n)
    if cfg.truth == "sparse":
        s = cfg.truth_sparsity or cfg.sparsity
        if s is None:
            raise ConfigError("sparse ground truth requires truth_sparsity")
        return gen_sparse(cfg.n, s, seed=[cfg.seed, trial, 1])
    return gen_unit_sphere(cfg.n, seed=[cfg.seed, trial, 1])


@dataclass
class TrialOutcome:
    algorithm: str
    kind: str
    trial: int
    snr_db: float
    upsilon: float
    n_iter_run: int
    failed: bool
    error: str = ""
    trace=None


def _run_one(cfg: ExperimentConfig, name: str, kind: str, q: Quantizer, trial: int):
    ens = gaussian_ensemble(cfg.m_resolved, cfg.n, seed=[cfg.seed, trial, 0])
    truth = _ground_truth(cfg, trial)
    problem = make_problem(ens, truth, q, sigma_xi=cfg.sigma_xi, seed=[cfg.seed, trial, 2])
    solver_cfg = named_config(
        name, sparsity=cfg.sparsity, n_iter=cfg.n_iter, early_stop=cfg.early_stop
    )
    try:
        trace = run_solver(problem, solver_cfg)
    except QprError as exc:
        return TrialOutcome(name, kind, trial, math.nan, math.nan, 0, True, str(exc))
    out = TrialOutcome(
        name, kind, trial, trace.final_snr_db(), float(trace.upsilon[-1]),
        trace.n_iter_run, False,
    )
    out.trace = trace
    return out


def _db_mean_std(values: np.ndarray) -> tuple[float, float, int]:
    """dB-domain mean/std excluding exact (+inf) reconstructions; the count
    of excluded exact hits is reported alongside."""
    finite = values[np.isfinite(values)]
    exact = int(np.sum(np.isposinf(values)))
    if finite.size == 0:
        return math.nan, math.nan, exact
    return float(np.mean(finite)), float(np.std(finite)), exact


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> int:
    """Multi-trial, multi-algorithm reconstruction experiment.

    Writes one trace CSV per (algorithm, trial), a mean-curve CSV per
    algorithm and ``aggregate.csv``; returns a process exit code (0 clean,
    2 when some trials failed and were recorded as such).
    """
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    algos = _parse_algorithms(cfg)
    quantizers = {kind: design(kind, cfg.k, cfg.saturation) for _, kind in set(algos)}
    tasks = [(name, kind, trial) for name, kind in algos for trial in range(cfg.n_trials)]

    def job(task):
        name, kind, trial = task
        return _run_one(cfg, name, kind, quantizers[kind], trial)

    with ThreadPoolExecutor(max_workers=worker_count(len(tasks))) as pool:
        outcomes = list(pool.map(job, tasks))

    failures = 0
    for oc in outcomes:
        if oc.failed:
            failures += 1
            continue
        oc.trace.write_csv(os.path.join(out, f"trace_{oc.algorithm}_{oc.kind}_t{oc.trial:03d}.csv"))

    agg_path = os.path.join(out, "aggregate.csv")
    with open(agg_path, "w", encoding="utf-8") as fh:
        fh.write("# final-SNR statistics use dB-domain averaging; exact (+inf dB) "
                 "reconstructions are excluded and counted in exact_hits\n")
        fh.write("algorithm,quantizer,k,n,m,n_trials,mean_final_snr_db,"
                 "std_final_snr_db,exact_hits,mean_final_upsilon,failures\n")
        for name, kind in algos:
            rows = [oc for oc in outcomes if oc.algorithm == name and oc.kind == kind]
            ok = [oc for oc in rows if not oc.failed]
            snrs = np.array([oc.snr_db for oc in ok], dtype=float)
            mean, std, exact = _db_mean_std(snrs) if ok else (math.nan, math.nan, 0)
            ups = float(np.mean([oc.upsilon for oc in ok])) if ok else math.nan
            fh.write(
                f"{name},{kind},{cfg.k},{cfg.n},{cfg.m_resolved},{cfg.n_trials},"
                f"{mean:.17g},{std:.17g},{exact},{ups:.17g},{len(rows) - len(ok)}\n"
            )

    for name, kind in algos:
        traces = [oc.trace for oc in outcomes
                  if oc.algorithm == name and oc.kind == kind and not oc.failed]
        if traces:
            _write_mean_curve(os.path.join(out, f"mean_trace_{name}_{kind}.csv"), traces)

    if cfg.plot:
        from . import plots

        plots.render_run(out, [f"{n}_{k}" for n, k in algos])
    return EXIT_PARTIAL if failures else EXIT_OK


def _write_mean_curve(path, traces) -> None:
    """Per-iteration mean curve; early-exit traces are padded with their
    final values (their estimate no longer changes once fully consistent)."""
    horizon = max(t.n_iter_run for t in traces)

    def padded(arr):
        return np.concatenate([arr, np.full(horizon - arr.size, arr[-1])])

    snr = np.stack([padded(t.snr_db) for t in traces])
    ups = np.stack([padded(t.upsilon) for t in traces])
    finite = np.where(np.isfinite(snr), snr, np.nan)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iter,mean_snr_db,std_snr_db,mean_upsilon\n")
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(finite, axis=0)
            std = np.nanstd(finite, axis=0)
        for i in range(horizon):
            fh.write(f"{i + 1},{mean[i]:.17g},{std[i]:.17g},{np.mean(ups[:, i]):.17g}\n")


def design_quant(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> int:
    """Design a quantizer, write its record and print a summary line."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    q = design(cfg.quantizer_kind, cfg.k, cfg.saturation)
    path = os.path.join(out, f"quantizer_{cfg.quantizer_kind}_{cfg.k}.txt")
    save_quantizer(q, path)
    rng = np.random.default_rng([cfg.seed, 0, 3])
    sample = rng.standard_normal(100_000) ** 2
    snr = quantization_snr(q, sample)
    print(
        f"quantizer {cfg.quantizer_kind} k={cfg.k}: precision={precision(q):.6g} "
        f"squared_precision={squared_precision(q):.6g} "
        f"tau_last={q.thresholds[-1]:.6g} snr_quant={snr:.4g} dB -> {path}"
    )
    if cfg.plot:
        from . import plots

        plots.render_quantizer(out, q, cfg.quantizer_kind)
    return EXIT_OK


def crb_sweep(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> int:
    """MSE-versus-bound curves over an input-SNR grid.

    For each grid point and ensemble, the noise level is solved from the
    realized measurements; both quantizer designs get a bound value, and
    each requested algorithm is run over ``n_noise`` acquisitions. MSE
    aggregation is linear (the bound constrains expected squared error).
    """
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    algos = _parse_algorithms(cfg)
    quantizers = {kind: design(kind, cfg.k, cfg.saturation) for kind in ("eq", "lmq")}
    truth = gen_two_sinusoid(cfg.n) if cfg.truth == "two-sinusoid" else _ground_truth(cfg, 0)

    bound_rows = []
    sweep_rows = []
    failures = 0
    for p_idx, target in enumerate(cfg.snr_grid):
        crbs = {"eq": [], "lmq": []}
        flags = {"eq": [], "lmq": []}
        mses = {a: [] for a in algos}
        for e_idx in range(cfg.n_ensembles):
            ens = gaussian_ensemble(cfg.m_resolved, cfg.n, seed=[cfg.seed, p_idx, e_idx, 0])
            sigma = sigma_for_input_snr(ens, truth.x, float(target))
            realized = input_snr_db(ens, truth.x, sigma)
            for kind in ("eq", "lmq"):
                res = crb_result(ens, truth.x, quantizers[kind], sigma)
                crbs[kind].append(res.crb_trace)
                flags[kind].append(res.rank_deficient)
                bound_rows.append(
                    f"{realized:.17g},{10 * math.log10(res.crb_trace):.17g},"
                    f"{kind},{cfg.k},{str(res.rank_deficient).lower()}"
                )
            for (name, kind) in algos:
                for j in range(cfg.n_noise):
                    problem = make_problem(
                        ens, truth, quantizers[kind], sigma_xi=sigma,
                        seed=[cfg.seed, p_idx, e_idx, 1 + j],
                    )
                    solver_cfg = named_config(
                        name, sparsity=cfg.sparsity, n_iter=cfg.n_iter,
                        early_stop=cfg.early_stop,
                    )
                    try:
                        trace = run_solver(problem, solver_cfg)
                        mses[(name, kind)].append(mse_from_snr_db(trace.final_snr_db()))
                    except QprError:
                        failures += 1
        row = {
            "input_snr_db": float(target),
            "crb_eq_db": 10 * math.log10(float(np.mean(crbs["eq"]))),
            "crb_eq_rank_deficient_frac": float(np.mean(flags["eq"])),
            "crb_lmq_db": 10 * math.log10(float(np.mean(crbs["lmq"]))),
            "crb_lmq_rank_deficient_frac": float(np.mean(flags["lmq"])),
        }
        for key in algos:
            vals = mses[key]
            row[f"mse_{key[0]}_{key[1]}_db"] = (
                10 * math.log10(float(np.mean(vals))) if vals else math.nan
            )
        sweep_rows.append(row)

    with open(os.path.join(out, "crb_bounds.csv"), "w", encoding="utf-8") as fh:
        fh.write("input_snr_db,crb_db,quantizer,k,rank_deficient\n")
        fh.write("\n".join(bound_rows) + "\n")
    sweep_path = os.path.join(out, "crb_sweep.csv")
    cols = list(sweep_rows[0].keys())
    with open(sweep_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in sweep_rows:
            fh.write(",".join(f"{row[c]:.17g}" if isinstance(row[c], float) else str(row[c])
                              for c in cols) + "\n")
    if cfg.plot:
        from . import plots

        plots.render_crb(out, sweep_rows, [f"mse_{n}_{k}_db" for n, k in algos])
    return EXIT_PARTIAL if failures else EXIT_OK


def analysis_tables(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> int:
    """Distinguishability bound tables and the noise-robustness table."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    tau = cfg.tau_penultimate if cfg.tau_penultimate is not None else chi2_1_inv_cdf(0.9)
    an.write_bounds_csv(
        os.path.join(out, "bounds_sweep.csv"),
        [float(d) for d in cfg.delta_grid],
        [float(r) for r in cfg.rho_grid],
        float(tau),
        cfg.eps,
    )
    # same table evaluated at a designed quantizer's (precision, tau_{k-1})
    q = design(cfg.quantizer_kind, cfg.k, cfg.saturation)
    with open(os.path.join(out, "bounds_quantizer.csv"), "w", encoding="utf-8") as fh:
        fh.write("delta,rho,pe1,pe2,pe_max,m_min\n")
        for rho in cfg.rho_grid:
            rep = an.collision_bound_for(q, float(rho), cfg.eps)
            m_min = "" if rep.m_min is None else str(rep.m_min)
            fh.write(
                f"{precision(q):.17g},{rho:.17g},{rep.same_cell:.17g},"
                f"{rep.saturation:.17g},{rep.pe_max:.17g},{m_min}\n"
            )
    robust_rows = []
    with open(os.path.join(out, "robustness.csv"), "w", encoding="utf-8") as fh:
        fh.write("k,sigma_xi_sq,p_hat,n_trials\n")
        for k in cfg.robust_k:
            qk = design_equiprobable(int(k))
            for s2 in cfg.sigma_sq_grid:
                p = an.noise_robustness_mc(qk, float(s2), cfg.robust_trials,
                                           seed=[cfg.seed, int(k), 4])
                robust_rows.append((int(k), float(s2), p))
                fh.write(f"{int(k)},{s2:.17g},{p:.17g},{cfg.robust_trials}\n")
    if cfg.plot:
        from . import plots

        plots.render_analysis(out, robust_rows)
    return EXIT_OK
