"""Rank-1 projected solvers for quantized phase retrieval.

Two projected-gradient loops operate on the lifted matrix variable: a plain
one and a Nesterov-accelerated one. Pairing each loop with a loss and an
initializer yields the named algorithms

    qpr    - plain loop,        consistency loss,  zero start
    qpr-a  - accelerated loop,  consistency loss,  zero start
    sqpr   / sqpr-a - same, plus per-iteration hard thresholding
    pl     - plain loop,        squared loss,      spectral start
    pl-a   - accelerated loop,  squared loss,      spectral start

plus an alternating sign / least-squares baseline (``altmin``). The
consistency-loss algorithms never read the encoding symbols, so relabeling
a codebook with identical thresholds cannot change their iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, ConvergenceError, DegenerateInputError, DomainError
from .measurement import MeasurementEnsemble, QuantizedObservation, intensities
from .metrics import consistency_index, reconstruction_snr
from .objective import (
    BinPartition,
    ConsistencyCost,
    LiftedEstimate,
    LineSearchGrid,
    SquaredCost,
    grid_line_search,
)
from .quantizer import encode

_EIGH_MAX_N = 512  # dense fallback ceiling for the eigensolver


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector orientation: first nonzero entry positive."""
    nz = np.flatnonzero(np.abs(v) > 1e-12 * max(1.0, float(np.abs(v).max())))
    if nz.size and v[nz[0]] < 0.0:
        return -v
    return v


def _power_top_eigpair(Y: np.ndarray, tol: float, max_iter: int, seed: int):
    """Top (algebraic) eigenpair by shifted power iteration.

    The shift by the infinity norm makes Y + shift*I PSD, so the dominant
    eigenvector of the shifted matrix belongs to the largest signed
    eigenvalue of Y. Returns (lam, v, residual, converged).
    """
    n = Y.shape[0]
    shift = float(np.abs(Y).sum(axis=1).max())
    if shift == 0.0:  # zero matrix: every unit vector is an eigenvector
        e = np.zeros(n)
        e[0] = 1.0
        return 0.0, e, 0.0, True
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = float(v @ Y @ v)
    for attempt in range(2):
        for _ in range(max_iter):
            w = Y @ v + shift * v
            nrm = float(np.linalg.norm(w))
            if nrm == 0.0:
                break  # v is in the kernel of the shifted matrix; restart
            v = w / nrm
            lam = float(v @ Y @ v)
            res = float(np.linalg.norm(Y @ v - lam * v))
            if res <= tol * max(1.0, abs(lam)):
                return lam, v, res, True
        # seeded restart once if the first start stagnated
        rng = np.random.default_rng(seed + attempt)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
    res = float(np.linalg.norm(Y @ v - lam * v))
    return lam, v, res, False


def top_eigpair(Y: np.ndarray, method: str = "auto", tol: float = 1e-10,
                max_iter: int = 5000, seed: int = 0):
    """Largest-eigenvalue pair of a symmetric matrix.

    ``method`` is one of ``auto`` (dense solver up to n=512, power iteration
    beyond), ``eigh`` or ``power``. Power iteration falls back to the dense
    solver when it stalls; if neither route converges a
    :class:`ConvergenceError` with the final residual is raised.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise DomainError(f"square matrix expected, got shape {Y.shape}")
    if not np.allclose(Y, Y.T, atol=1e-8 * max(1.0, float(np.abs(Y).max()))):
        raise DomainError("matrix must be symmetric")
    Y = 0.5 * (Y + Y.T)
    n = Y.shape[0]
    if method not in ("auto", "eigh", "power"):
        raise ConfigError(f"unknown eigensolver method {method!r}")
    use_eigh = method == "eigh" or (method == "auto" and n <= _EIGH_MAX_N)
    if not use_eigh:
        lam, v, res, ok = _power_top_eigpair(Y, tol, max_iter, seed)
        if ok:
            return lam, _fix_sign(v)
        if method == "power" or n > _EIGH_MAX_N:
            raise ConvergenceError(
                f"power iteration stalled (residual {res:.3e})", residual=res,
                iterations=max_iter,
            )
    w, V = np.linalg.eigh(Y)
    return float(w[-1]), _fix_sign(V[:, -1])


def rank1_project(Y: np.ndarray, method: str = "auto") -> LiftedEstimate:
    """Nearest PSD rank-1 matrix max(lam_max, 0) v v^T in Frobenius norm.

    Idempotent, and deterministic through the fixed eigenvector sign rule.
    """
    lam, v = top_eigpair(Y, method=method)
    return LiftedEstimate(max(lam, 0.0), v)


def hard_threshold(x: np.ndarray, s: int) -> np.ndarray:
    """Best s-sparse approximation: keep the s largest-magnitude entries
    (ties resolved to the lowest index), zero the rest."""
    x = np.asarray(x, dtype=float)
    if not 1 <= s <= x.size:
        raise ConfigError(f"sparsity must satisfy 1 <= s <= {x.size}, got {s}")
    if s == x.size:
        return x.copy()
    order = np.argsort(-np.abs(x), kind="stable")
    out = np.zeros_like(x)
    keep = order[:s]
    out[keep] = x[keep]
    return out


def spectral_init(ensemble: MeasurementEnsemble, y: np.ndarray) -> np.ndarray:
    """Unit top eigenvector of S = (1/m) sum_i y_i a_i a_i^T."""
    y = np.asarray(y, dtype=float)
    if y.shape != (ensemble.m,):
        raise DomainError(f"expected {ensemble.m} measurement values, got shape {y.shape}")
    if np.all(y == 0.0):
        raise DegenerateInputError("degenerate spectral matrix: all measurements are zero")
    S = ensemble.weighted_gram(y) / ensemble.m
    _, v = top_eigpair(S)
    return v


@dataclass(frozen=True)
class SolverConfig:
    """Algorithm selection and iteration controls."""

    algorithm: str = "apgd"  # pgd | apgd | altmin
    loss: str = "one_sided"  # one_sided | squared
    init: str = "zero"  # zero | spectral
    sparsity: Optional[int] = None  # s = n (or None) disables thresholding
    n_iter: int = 100
    grid: LineSearchGrid = field(default_factory=LineSearchGrid)
    early_stop: bool = True  # stop once the estimate explains every cell
    store_iterates: bool = False
    eig_method: str = "auto"

    def __post_init__(self):
        if self.algorithm not in ("pgd", "apgd", "altmin"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.loss not in ("one_sided", "squared"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.init not in ("zero", "spectral"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.n_iter < 1:
            raise ConfigError(f"n_iter must be >= 1, got {self.n_iter}")
        if self.sparsity is not None and self.sparsity < 1:
            raise ConfigError(f"sparsity must be >= 1, got {self.sparsity}")


NAMED_ALGORITHMS = {
    "qpr": dict(algorithm="pgd", loss="one_sided", init="zero"),
    "sqpr": dict(algorithm="pgd", loss="one_sided", init="zero"),
    "qpr-a": dict(algorithm="apgd", loss="one_sided", init="zero"),
    "sqpr-a": dict(algorithm="apgd", loss="one_sided", init="zero"),
    "pl": dict(algorithm="pgd", loss="squared", init="spectral"),
    "pl-a": dict(algorithm="apgd", loss="squared", init="spectral"),
    "altmin": dict(algorithm="altmin", loss="squared", init="spectral"),
}

_SPARSE_NAMES = ("sqpr", "sqpr-a")


def named_config(name: str, sparsity: Optional[int] = None, **overrides) -> SolverConfig:
    """SolverConfig for one of the published algorithm names."""
    if name not in NAMED_ALGORITHMS:
        raise ConfigError(f"unknown algorithm name {name!r}; choose from {sorted(NAMED_ALGORITHMS)}")
    if name in _SPARSE_NAMES and sparsity is None:
        raise ConfigError(f"{name} requires a sparsity level")
    kw = dict(NAMED_ALGORITHMS[name])
    kw.update(overrides)
    return SolverConfig(sparsity=sparsity if name in _SPARSE_NAMES else None, **kw)


@dataclass(frozen=True)
class QprProblem:
    """One reconstruction instance: ensemble, observation, optional truth."""

    ensemble: MeasurementEnsemble
    observation: QuantizedObservation
    x_star: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.observation.m != self.ensemble.m:
            raise DomainError("observation and ensemble disagree on m")
        if self.x_star is not None and np.asarray(self.x_star).shape != (self.ensemble.n,):
            raise DomainError("ground truth dimension does not match the ensemble")


@dataclass
class SolverTrace:
    """Per-iteration record of a solver run plus the final estimate."""

    algorithm: str
    cost: np.ndarray
    snr_db: np.ndarray
    upsilon: np.ndarray
    eta: np.ndarray
    beta: np.ndarray
    x_hat: np.ndarray
    converged_consistent: bool = False
    iterates: Optional[list] = None

    @property
    def n_iter_run(self) -> int:
        return self.cost.size

    def final_snr_db(self) -> float:
        return float(self.snr_db[-1])

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iter,cost,snr_db,upsilon,eta,beta\n")
            for i in range(self.n_iter_run):
                fh.write(
                    f"{i + 1},{self.cost[i]:.17g},{self.snr_db[i]:.17g},"
                    f"{self.upsilon[i]:.17g},{self.eta[i]:.17g},{self.beta[i]:.17g}\n"
                )


def _make_cost(problem: QprProblem, loss: str):
    part = BinPartition.from_observation(problem.observation.quantizer, problem.observation.bins)
    cls = ConsistencyCost if loss == "one_sided" else SquaredCost
    return cls(problem.ensemble, part)


def _initial_estimate(problem: QprProblem, cfg: SolverConfig) -> LiftedEstimate:
    n = problem.ensemble.n
    if cfg.init == "zero":
        e = np.zeros(n)
        e[0] = 1.0
        return LiftedEstimate(0.0, e)
    v = spectral_init(problem.ensemble, problem.observation.symbols)
    return LiftedEstimate(1.0, v)


def _metrics_for(problem: QprProblem, x: np.ndarray):
    ups = consistency_index(
        problem.ensemble, problem.observation.quantizer, x, problem.observation.bins
    )
    if problem.x_star is None:
        return math.nan, ups
    return reconstruction_snr(x, problem.x_star), ups


def _run_projected(problem: QprProblem, cfg: SolverConfig, accelerated: bool) -> SolverTrace:
    cost = _make_cost(problem, cfg.loss)
    ens = problem.ensemble
    n = ens.n
    s = cfg.sparsity
    if s is not None and s > n:
        raise ConfigError(f"sparsity {s} exceeds dimension {n}")
    est = _initial_estimate(problem, cfg)
    X = est.matrix()
    Y = X.copy()
    theta = 1.0
    rows = []
    iterates = [] if cfg.store_iterates else None
    label = cfg.algorithm + ("/" + cfg.loss)
    for t in range(cfg.n_iter):
        anchor = Y if accelerated else X
        G = cost.grad(anchor)
        if t == 0 and cfg.init == "zero" and not G.any():
            raise DegenerateInputError(
                "degenerate initialization: gradient vanishes at zero "
                "(every observed cell contains the origin)"
            )
        eta = grid_line_search(cost, anchor, G, cfg.grid)
        est = rank1_project(anchor - eta * G, method=cfg.eig_method)
        x = est.vector()
        if s is not None and s < n:
            x = hard_threshold(x, s)
            est = LiftedEstimate.from_vector(x)
        X_new = est.matrix()
        beta = 0.0
        if accelerated:
            theta_new = 2.0 / (1.0 + math.sqrt(1.0 + 4.0 / (theta * theta)))
            beta = theta_new * (1.0 / theta - 1.0)
            Y = X_new + beta * (X_new - X)
            theta = theta_new
        X = X_new
        snr, ups = _metrics_for(problem, x)
        rows.append((cost.value(est), snr, ups, eta, beta))
        if iterates is not None:
            iterates.append(x.copy())
        if cfg.early_stop and ups == 1.0:
            break
    cost_v, snr_v, ups_v, eta_v, beta_v = (np.array(col) for col in zip(*rows))
    return SolverTrace(
        algorithm=label,
        cost=cost_v,
        snr_db=snr_v,
        upsilon=ups_v,
        eta=eta_v,
        beta=beta_v,
        x_hat=x,
        converged_consistent=bool(ups_v[-1] == 1.0),
        iterates=iterates,
    )


def run_pgd(problem: QprProblem, cfg: SolverConfig) -> SolverTrace:
    """Plain projected gradient descent (loop of: gradient, exact grid line
    search, rank-1 projection, optional hard threshold)."""
    if cfg.algorithm != "pgd":
        raise ConfigError(f"run_pgd requires algorithm='pgd', got {cfg.algorithm!r}")
    return _run_projected(problem, cfg, accelerated=False)


def run_apgd(problem: QprProblem, cfg: SolverConfig) -> SolverTrace:
    """Accelerated variant: the gradient step leaves from the momentum point
    Y^t = X^t + beta^t (X^t - X^{t-1}) with the standard theta recursion
    theta^{t+1} = 2 (1 + sqrt(1 + 4/theta_t^2))^{-1}, theta^0 = 1."""
    if cfg.algorithm != "apgd":
        raise ConfigError(f"run_apgd requires algorithm='apgd', got {cfg.algorithm!r}")
    return _run_projected(problem, cfg, accelerated=True)


def run_altmin(problem: QprProblem, cfg: SolverConfig) -> SolverTrace:
    """Alternating minimization baseline on the encoded symbol values.

    From a spectral start, alternate the measurement-sign assignment
    sigma_i = sign(a_i^T x) with the dense least-squares solve
    min_x |diag(sigma) sqrt(y) - A x|_2.
    """
    if cfg.algorithm != "altmin":
        raise ConfigError(f"run_altmin requires algorithm='altmin', got {cfg.algorithm!r}")
    y = problem.observation.symbols
    if np.any(y < 0.0):
        raise DomainError("altmin requires nonnegative symbol values")
    ens = problem.ensemble
    root = np.sqrt(y)
    x = spectral_init(ens, y)
    rows = []
    iterates = [] if cfg.store_iterates else None
    for t in range(cfg.n_iter):
        signs = np.where(ens.projections(x) >= 0.0, 1.0, -1.0)
        target = signs * root
        x, _, rank, _ = np.linalg.lstsq(ens.rows, target, rcond=None)
        if rank < ens.n:
            raise ConvergenceError(
                f"rank-deficient least-squares system (rank {rank} < n={ens.n})",
                iterations=t,
            )
        residual = float(np.linalg.norm(ens.projections(x) - target) ** 2)
        snr, ups = _metrics_for(problem, x)
        rows.append((residual, snr, ups, 0.0, 0.0))
        if iterates is not None:
            iterates.append(x.copy())
    cost_v, snr_v, ups_v, eta_v, beta_v = (np.array(col) for col in zip(*rows))
    return SolverTrace(
        algorithm="altmin",
        cost=cost_v,
        snr_db=snr_v,
        upsilon=ups_v,
        eta=eta_v,
        beta=beta_v,
        x_hat=x,
        converged_consistent=bool(ups_v[-1] == 1.0),
        iterates=iterates,
    )


def run_solver(problem: QprProblem, cfg: SolverConfig) -> SolverTrace:
    """Dispatch on ``cfg.algorithm``."""
    if cfg.algorithm == "pgd":
        return run_pgd(problem, cfg)
    if cfg.algorithm == "apgd":
        return run_apgd(problem, cfg)
    return run_altmin(problem, cfg)


def make_problem(ensemble, x_star, q, sigma_xi=0.0, seed=None) -> QprProblem:
    """Acquire an observation of ``x_star`` and bundle it into a problem."""
    from .measurement import acquire

    x = x_star.x if hasattr(x_star, "x") else np.asarray(x_star, dtype=float)
    obs = acquire(ensemble, x, q, sigma_xi=sigma_xi, seed=seed)
    return QprProblem(ensemble, obs, x)
