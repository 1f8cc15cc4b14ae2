"""Seeded Monte-Carlo experiments: RIP probability, reconstruction sweeps,
distribution tables and the feature-matrix pipeline.

Every random draw comes from a generator seeded by
``SeedSequence([master_seed, stream, *keys])`` so a trial's outcome depends
only on its keys, never on execution order or the number of workers.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import _csv
from .decode import (
    RegularizerSpec,
    bound_efficient_inband,
    bound_efficient_outband,
    decompose_error,
    efficient_decode,
)
from .estimate import EstimationConfig, run_estimation
from .graph import (
    DEFAULT_P_IN,
    DEFAULT_P_OUT,
    Graph,
    Laplacian,
    build_laplacian,
    community_sizes,
    gen_binary_tree,
    gen_community,
    gen_cycle,
    gen_path,
    knn_graph,
    load_graph,
)
from .sample import (
    ReweightedOperator,
    draw_with_replacement,
    draw_without_replacement_uniform,
    measure,
)
from .signals import random_bandlimited
from .spectral import (
    SamplingDistribution,
    SpectralBasis,
    optimal_distribution,
    partial_eigendecomposition,
    rip_constants,
    uniform_distribution,
)

__all__ = [
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "build_graph",
    "rng_for",
    "rip_probability",
    "reconstruction_sweep",
    "distribution_table",
    "pipeline",
    "PipelineResult",
    "write_experiment_csv",
]

MODES = ("uniform", "optimal", "estimated")

# stream tags keep the different kinds of randomness independent
_DRAW, _ESTIMATE, _SIGNAL, _NOISE = 1, 2, 3, 4


def rng_for(seed: int, stream: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, keys)]))


def int_seed_for(seed: int, stream: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(stream), *map(int, keys)]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters shared by the Monte-Carlo subcommands.

    ``graph`` is ``cycle:N``, ``path:N``, ``tree:DEPTH``, ``community:T``
    (type 1..5), ``community:S1,S2,...`` or ``file:PATH``. List-valued
    fields are written comma-separated in config files.
    """

    graph: str = "community:5"
    graph_seed: int = 0
    p_in: float = DEFAULT_P_IN
    p_out: float = DEFAULT_P_OUT
    laplacian: str = "combinatorial"
    k: int = 10
    modes: tuple[str, ...] = ("uniform", "optimal", "estimated")
    m_values: tuple[int, ...] = (200,)
    trials: int = 100
    threshold: float = 0.995
    sigmas: tuple[float, ...] = (0.0, 1.5e-3, 3.7e-3, 8.8e-3, 2.1e-2, 5.0e-2)
    gammas: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
    powers: tuple[int, ...] = (1, 2, 4)
    num_signals: int = 10
    solver_tol: float = 1e-10
    max_iters: int = 5000
    est_num_signals: int = 0
    est_degree: int = 100
    est_precision: float = 0.01
    seed: int = 0
    output: str = ""
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("modes", "m_values", "sigmas", "gammas", "powers"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        bad = set(self.modes) - set(MODES)
        if bad:
            raise ValueError(f"unknown distribution mode(s) {sorted(bad)}; choose from {MODES}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.k < 1:
            raise ValueError("k must be positive")
        if any(m < 0 for m in self.m_values):
            raise ValueError("m values must be nonnegative")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("noise levels must be nonnegative")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gammas must be positive")
        if any(p < 1 for p in self.powers):
            raise ValueError("powers must be positive integers")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    # keys that do not influence results are left out of the provenance hash
    _NON_SEMANTIC = ("output", "workers")

    def canonical(self) -> str:
        parts = []
        for f in dataclasses.fields(self):
            if f.name in self._NON_SEMANTIC:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            parts.append(f"{f.name}={v}")
        return ";".join(parts)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def estimation(self, seed: int) -> EstimationConfig:
        return EstimationConfig(
            num_signals=self.est_num_signals or None,
            precision=self.est_precision,
            cheb_degree=self.est_degree,
            seed=seed,
        )

    def replace(self, **changes: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _convert(name: str, raw: str) -> Any:
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in fields:
        raise ValueError(f"unknown config key {name!r}")
    default = getattr(ExperimentConfig(), name)
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            elem = type(default[0])
            return tuple(elem(s) if elem is not int else int(float(s)) for s in items)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ValueError(f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_config_text(text: str, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment), then apply ``key=value`` overrides."""
    values: dict[str, Any] = {}
    lines = list(text.splitlines()) + list(overrides)
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = _convert(key, val)
    return ExperimentConfig(**values)


def load_config(path: str | os.PathLike | None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    text = ""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config_text(text, overrides)


def build_graph(spec: str, seed: int = 0, p_in: float = DEFAULT_P_IN, p_out: float = DEFAULT_P_OUT) -> Graph:
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if not arg:
        raise ValueError(f"graph spec {spec!r} needs a parameter, e.g. cycle:100")
    if kind == "cycle":
        return gen_cycle(int(arg))
    if kind == "path":
        return gen_path(int(arg))
    if kind == "tree":
        return gen_binary_tree(int(arg))
    if kind == "community":
        sizes = [int(s) for s in arg.split(",")]
        if len(sizes) == 1 and 1 <= sizes[0] <= 5:
            sizes = community_sizes(sizes[0])
        return gen_community(sizes, p_in, p_out, seed)
    if kind == "file":
        return load_graph(arg)
    raise ValueError(f"unknown graph kind {kind!r}")


@functools.lru_cache(maxsize=8)
def _setup_cached(graph: str, graph_seed: int, p_in: float, p_out: float, laplacian: str, k: int):
    g = build_graph(graph, graph_seed, p_in, p_out)
    L = build_laplacian(g, laplacian)
    return L, partial_eigendecomposition(L, k)


def _setup(cfg: ExperimentConfig) -> tuple[Laplacian, SpectralBasis]:
    return _setup_cached(cfg.graph, cfg.graph_seed, cfg.p_in, cfg.p_out, cfg.laplacian, cfg.k)


def _map(func, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# ---------------------------------------------------------------- RIP probability


def _estimated_distribution(cfg: ExperimentConfig, L, trial: int) -> tuple[SamplingDistribution, bool]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = run_estimation(L, cfg.k, cfg.estimation(int_seed_for(cfg.seed, _ESTIMATE, trial)))
    return res.distribution, res.converged


def _rip_trials(args: tuple[ExperimentConfig, str, int]) -> list[tuple[int, float]]:
    """Lower RIP constants of one trial index for every m (shared p, independent draws)."""
    cfg, mode, trial = args
    L, basis = _setup(cfg)
    converged = True
    if mode == "optimal":
        p = optimal_distribution(basis)
    elif mode == "uniform":
        p = uniform_distribution(basis.n)
    else:
        p, converged = _estimated_distribution(cfg, L, trial)
    out = []
    for m in cfg.m_values:
        omega = draw_with_replacement(p, m, rng_for(cfg.seed, _DRAW, MODES.index(mode), m, trial))
        lower, _ = rip_constants(basis, omega, p)
        out.append((m, lower, converged))
    return out


def rip_probability(cfg: ExperimentConfig) -> tuple[list[str], list[tuple]]:
    """Fraction of trials whose lower RIP constant is at most ``cfg.threshold``.

    In estimated mode the distribution is re-estimated for every trial; the
    trial's estimate is shared by all values of m. Non-converged estimates
    are kept and counted in the ``nonconverged`` column.
    """
    header = ["m", "distribution", "empirical_probability", "trials", "nonconverged"]
    rows = []
    for mode in sorted(cfg.modes):
        results = _map(_rip_trials, [(cfg, mode, t) for t in range(cfg.trials)], cfg.workers)
        for j, m in enumerate(cfg.m_values):
            lowers = np.array([r[j][1] for r in results])
            nonconv = sum(1 for r in results if not r[j][2])
            rows.append((m, mode, float(np.mean(lowers <= cfg.threshold)), cfg.trials, nonconv))
    rows.sort(key=lambda r: (r[1], r[0]))
    return header, rows


# ---------------------------------------------------------------- reconstruction sweep


def _recon_signal(args: tuple[ExperimentConfig, int]) -> list[tuple]:
    """All (gamma, power, sigma) reconstructions of one random signal.

    The sample set and the standard-normal noise draw are shared by all
    noise levels and the whole (gamma, power) grid; only the noise scale
    changes. Comparisons along the grid are then free of sampling noise.
    """
    cfg, s = args
    L, basis = _setup(cfg)
    m = cfg.m_values[0]
    x = random_bandlimited(basis, rng_for(cfg.seed, _SIGNAL, s))
    p, _ = _estimated_distribution(cfg, L, s)
    lk, lk1 = float(basis.eigenvalues[-1]), float(basis.lambda_next)
    omega = draw_with_replacement(p, m, rng_for(cfg.seed, _DRAW, s))
    op = ReweightedOperator(omega)
    m_max = op.operator_norm()
    delta, _ = rip_constants(basis, omega, p)
    out = []
    for sigma in cfg.sigmas:
        y = measure(x, omega, sigma, rng_for(cfg.seed, _NOISE, s))
        wn = float(np.linalg.norm(op.apply(y.values - x[omega.indices])))
        for gamma in cfg.gammas:
            for power in cfg.powers:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    res = efficient_decode(L, omega, y, RegularizerSpec(power, gamma), cfg.solver_tol, cfg.max_iters)
                err = decompose_error(basis, res.signal, x)
                violated = False
                if delta < 1:
                    b_in = bound_efficient_inband(delta, m, gamma, lk, lk1, power, m_max, wn, 1.0)
                    violated = err.inband > b_in * (1 + 1e-9)
                b_out = bound_efficient_outband(gamma, lk, lk1, power, wn, 1.0)
                violated = violated or err.outband > b_out * (1 + 1e-9)
                out.append((gamma, power, sigma, err.total, err.inband, err.outband, not res.ok, violated))
    return out


def reconstruction_sweep(cfg: ExperimentConfig) -> tuple[list[str], list[tuple]]:
    """Mean efficient-decoder errors over ``cfg.num_signals`` unit-norm signals.

    ``m`` is the first entry of ``cfg.m_values``; the sampling distribution
    is re-estimated for every signal.
    """
    header = [
        "gamma",
        "power",
        "sigma",
        "mean_total",
        "mean_inband",
        "mean_outband",
        "failures",
        "bound_violations",
    ]
    per_signal = _map(_recon_signal, [(cfg, s) for s in range(cfg.num_signals)], cfg.workers)
    acc: dict[tuple, list] = {}
    for rows in per_signal:
        for gamma, power, sigma, tot, inb, outb, fail, viol in rows:
            acc.setdefault((gamma, power, sigma), []).append((tot, inb, outb, fail, viol))
    rows = []
    for key in sorted(acc):
        vals = acc[key]
        arr = np.array([v[:3] for v in vals])
        mean = arr.mean(axis=0)
        rows.append((*key, float(mean[0]), float(mean[1]), float(mean[2]), sum(v[3] for v in vals), sum(v[4] for v in vals)))
    return header, rows


# ---------------------------------------------------------------- distribution table

EXACT_LIMIT = 2000


def distribution_table(cfg: ExperimentConfig, exact_limit: int = EXACT_LIMIT) -> tuple[list[str], list[tuple], list[str]]:
    """Per-node exact and estimated optimal probabilities.

    Returns ``(header, rows, notices)``. When ``n > exact_limit`` the exact
    column is left empty and a notice is returned.
    """
    g = build_graph(cfg.graph, cfg.graph_seed, cfg.p_in, cfg.p_out)
    L = build_laplacian(g, cfg.laplacian)
    notices = []
    p_exact = None
    if g.n <= exact_limit:
        p_exact = optimal_distribution(partial_eigendecomposition(L, cfg.k)).p
    else:
        notices.append(f"n={g.n} exceeds {exact_limit}; exact distribution omitted")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = run_estimation(L, cfg.k, cfg.estimation(int_seed_for(cfg.seed, _ESTIMATE, 0)))
    notices.extend(str(w.message) for w in caught)
    rows = [
        (i, float(p_exact[i]) if p_exact is not None else "", float(res.distribution.p[i]))
        for i in range(g.n)
    ]
    return ["node", "p_exact", "p_estimated"], rows, notices


# ---------------------------------------------------------------- feature pipeline


@dataclass
class PipelineResult:
    samples: Any
    reconstruction: np.ndarray
    snr_db: float
    effective_rate: float
    nominal_rate: float
    k: int
    diagnostics: dict = field(default_factory=dict)


class PipelineError(RuntimeError):
    """Failure in one stage of the feature pipeline; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def snr_db(x: np.ndarray, x_hat: np.ndarray) -> float:
    err = np.linalg.norm(x - x_hat)
    if err == 0:
        return math.inf
    return float(20.0 * math.log10(np.linalg.norm(x) / err))


def pipeline(
    features: np.ndarray,
    k_nn: int = 20,
    k: int | None = None,
    sampling_fraction: float = 0.15,
    gamma: float = 1.0,
    power: int = 1,
    seed: int = 0,
    mode: str = "estimated",
    sigma: float = 0.0,
    laplacian: str = "combinatorial",
    solver_tol: float = 1e-10,
    max_iters: int = 5000,
    est_degree: int = 100,
    replace: bool = True,
) -> PipelineResult:
    """Sample the columns of a feature matrix on its own k-NN graph and reconstruct them.

    ``m = round(sampling_fraction * n)`` nodes are drawn with replacement
    from the estimated optimal distribution (``mode="estimated"``) or the
    uniform one (``mode="uniform"``). ``replace=False`` is accepted in
    uniform mode only and draws ``m`` distinct nodes. Every feature
    dimension is treated as a graph signal and decoded separately with the
    regularized decoder.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if mode not in ("estimated", "uniform"):
        raise PipelineError("config", f"mode must be 'estimated' or 'uniform', got {mode!r}")
    if not replace and mode != "uniform":
        raise PipelineError("config", "sampling without replacement is only supported for uniform mode")
    if not 0 < sampling_fraction <= 1:
        raise PipelineError("config", "sampling fraction must lie in (0, 1]")
    n = X.shape[0]
    m = max(1, int(round(sampling_fraction * n)))
    if k is None:
        k = max(1, min(n - 1, int(round(m / 3))))
    try:
        g = knn_graph(X, k_nn)
        L = build_laplacian(g, laplacian)
    except Exception as exc:
        raise PipelineError("graph", str(exc)) from exc

    diag: dict[str, Any] = {"n": n, "m": m, "k": k, "mode": mode, "replace": replace}
    try:
        if mode == "estimated":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = run_estimation(L, k, EstimationConfig(seed=int_seed_for(seed, _ESTIMATE), cheb_degree=est_degree))
            diag.update({"lambda_k": res.lambda_k, "converged": res.converged})
            omega = draw_with_replacement(res.distribution, m, rng_for(seed, _DRAW))
        elif replace:
            omega = draw_with_replacement(uniform_distribution(n), m, rng_for(seed, _DRAW))
        else:
            omega = draw_without_replacement_uniform(n, m, rng_for(seed, _DRAW))
    except Exception as exc:
        raise PipelineError("sample", str(exc)) from exc

    X_hat = np.empty_like(X)
    reg = RegularizerSpec(power, gamma)
    failures = 0
    try:
        for j in range(X.shape[1]):
            y = measure(X[:, j], omega, sigma, rng_for(seed, _NOISE, j))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                r = efficient_decode(L, omega, y, reg, solver_tol, max_iters)
            failures += not r.ok
            X_hat[:, j] = r.signal
    except Exception as exc:
        raise PipelineError("decode", str(exc)) from exc
    diag["solver_failures"] = failures
    return PipelineResult(
        samples=omega,
        reconstruction=X_hat,
        snr_db=snr_db(X, X_hat),
        effective_rate=omega.effective_rate(),
        nominal_rate=m / n,
        k=k,
        diagnostics=diag,
    )


def write_experiment_csv(path: str | os.PathLike, cfg: ExperimentConfig, header, rows, notices: Sequence[str] = ()) -> None:
    """Tidy CSV with a provenance comment carrying the config hash."""
    comment = "\n".join([f"config-hash {cfg.config_hash()}", f"config {cfg.canonical()}", *notices])
    _csv.write_rows(path, header, rows, comment=comment)
