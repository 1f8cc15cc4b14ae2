"""Command-line interface: ``graphsampling <subcommand> ...``.

Every failure is reported as ``error [stage]: message`` on stderr with a
nonzero exit code, where ``stage`` names the step that failed.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
import warnings
from typing import Iterator, Sequence

import numpy as np
import scipy.io

from . import _csv
from .decode import RegularizerSpec, efficient_decode, save_reconstruction, standard_decode
from .estimate import EstimationConfig, run_estimation
from .experiments import (
    ExperimentConfig,
    PipelineError,
    build_graph,
    distribution_table,
    load_config,
    pipeline,
    reconstruction_sweep,
    rip_probability,
    write_experiment_csv,
)
from .graph import build_laplacian, gen_community, knn_graph, load_features, load_graph, save_graph
from .sample import (
    draw_with_replacement,
    draw_without_replacement_uniform,
    load_measurement,
    load_sample_set,
    measure,
    save_measurement,
    save_sample_set,
)
from .signals import load_signal, random_bandlimited, save_signal
from .spectral import (
    load_distribution,
    local_coherence,
    optimal_distribution,
    partial_eigendecomposition,
    save_distribution,
    uniform_distribution,
    weighted_coherence,
)


class CLIError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except CLIError:
        raise
    except PipelineError as exc:
        raise CLIError(exc.stage, str(exc).split("] ", 1)[-1]) from exc
    except Exception as exc:
        raise CLIError(name, f"{type(exc).__name__}: {exc}") from exc


def _laplacian(args):
    with stage("load-graph"):
        g = load_graph(args.graph)
    with stage("laplacian"):
        return build_laplacian(g, args.kind)


def _basis(args):
    L = _laplacian(args)
    with stage("eigendecomposition"):
        return L, partial_eigendecomposition(L, args.k)


# ---------------------------------------------------------------- subcommands


def cmd_generate(args) -> None:
    with stage("generate"):
        if args.type == "knn":
            if not args.features:
                raise ValueError("--features is required for knn graphs")
            g = knn_graph(load_features(args.features), args.k_nn)
        elif args.type == "community" and args.sizes:
            g = gen_community([int(s) for s in args.sizes.split(",")], args.p_in, args.p_out, args.seed)
        else:
            spec = {
                "path": f"path:{args.n}",
                "cycle": f"cycle:{args.n}",
                "tree": f"tree:{args.depth}",
                "community": f"community:{args.community_type}",
            }[args.type]
            g = build_graph(spec, args.seed, args.p_in, args.p_out)
    with stage("write"):
        save_graph(g, args.out)


def cmd_laplacian(args) -> None:
    L = _laplacian(args)
    with stage("write"):
        scipy.io.mmwrite(args.out, L.operator.tocoo(), symmetry="symmetric", precision=17)


def cmd_coherence(args) -> None:
    _, basis = _basis(args)
    with stage("coherence"):
        coh = local_coherence(basis)
        p_opt = optimal_distribution(basis)
        nu_unif = weighted_coherence(basis, uniform_distribution(basis.n))
        # min_i p*_i written as 1 / (alpha^2 n)
        alpha = 1.0 / math.sqrt(basis.n * float(p_opt.p.min()))
    with stage("write"):
        _csv.write_rows(
            args.out,
            ["node_index", "local_coherence", "p_optimal"],
            ((i, float(c), float(p)) for i, (c, p) in enumerate(zip(coh, p_opt.p))),
            comment=f"k={basis.k} nu2_uniform={nu_unif**2!r} alpha={alpha!r} lambda_k={float(basis.eigenvalues[-1])!r}",
        )
    print(f"nu^2 uniform = {nu_unif**2:.6g}, alpha = {alpha:.4g} (k = {basis.k})")


def cmd_dist(args) -> None:
    if args.compare:
        with stage("config"):
            cfg = ExperimentConfig(graph=f"file:{args.graph}", laplacian=args.kind, k=args.k, seed=args.seed)
        with stage("distribution"):
            header, rows, notices = distribution_table(cfg)
        for note in notices:
            print(f"notice: {note}", file=sys.stderr)
        with stage("write"):
            write_experiment_csv(args.out, cfg, header, rows, notices)
        return
    if args.mode == "uniform":
        with stage("load-graph"):
            n = load_graph(args.graph).n
        p = uniform_distribution(n)
    else:
        _, basis = _basis(args)
        with stage("distribution"):
            p = optimal_distribution(basis)
    with stage("write"):
        save_distribution(p, args.out, comment=f"mode={args.mode} k={args.k}")


def cmd_estimate_dist(args) -> None:
    L = _laplacian(args)
    with stage("config"):
        cfg = EstimationConfig(
            num_signals=args.num_signals,
            precision=args.precision,
            cheb_degree=args.degree,
            seed=args.seed,
            max_bisections=args.max_bisections,
            damping=args.damping,
        )
    with stage("estimate"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            res = run_estimation(L, args.k, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    with stage("write"):
        save_distribution(res.distribution, args.out, comment=f"estimated k={args.k} seed={args.seed}")
        diag = {**res.diagnostics(), "k": args.k, "seed": args.seed}
        with open(args.diagnostics or f"{args.out}.json", "w", encoding="utf-8") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True)
            fh.write("\n")


def cmd_signal(args) -> None:
    _, basis = _basis(args)
    with stage("signal"):
        x = random_bandlimited(basis, args.seed)
    with stage("write"):
        save_signal(x, args.out, comment=f"k={args.k} seed={args.seed}")


def cmd_sample(args) -> None:
    with stage("sample"):
        if args.without_replacement:
            if args.n is None:
                raise ValueError("--n is required with --without-replacement")
            omega = draw_without_replacement_uniform(args.n, args.m, args.seed)
        else:
            if not args.dist:
                raise ValueError("--dist is required when sampling with replacement")
            omega = draw_with_replacement(load_distribution(args.dist), args.m, args.seed)
    with stage("write"):
        save_sample_set(omega, args.out)


def cmd_measure(args) -> None:
    with stage("load"):
        x = load_signal(args.signal)
        omega = load_sample_set(args.samples)
        if omega.n != x.size:
            raise ValueError(f"sample set is for n={omega.n}, signal has {x.size} entries")
    with stage("measure"):
        y = measure(x, omega, args.sigma, args.seed)
    with stage("write"):
        save_measurement(y, args.out)


def cmd_decode(args) -> None:
    with stage("load"):
        y = load_measurement(args.measurements)
    if args.decoder == "standard":
        _, basis = _basis(args)
        with stage("decode"):
            res = standard_decode(basis, y.sample_set, y)
    else:
        L = _laplacian(args)
        with stage("decode"):
            reg = RegularizerSpec(args.power, args.gamma)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", RuntimeWarning)
                res = efficient_decode(L, y.sample_set, y, reg, args.tol, args.max_iters)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
    with stage("write"):
        save_reconstruction(
            res.signal,
            args.out,
            comment=f"decoder={args.decoder} ok={int(res.ok)} iterations={res.iterations} residual={res.residual!r}",
        )
    if not res.ok:
        print("warning: decoder flagged the result (rank deficiency or solver cap)", file=sys.stderr)


def _experiment_config(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    for key in ("seed", "trials", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"{key}={val}")
    with stage("config"):
        return load_config(args.config, overrides)


def cmd_rip_probability(args) -> None:
    cfg = _experiment_config(args)
    with stage("rip-probability"):
        header, rows = rip_probability(cfg)
    with stage("write"):
        write_experiment_csv(args.out, cfg, header, rows)


def cmd_recon_sweep(args) -> None:
    cfg = _experiment_config(args)
    with stage("recon-sweep"):
        header, rows = reconstruction_sweep(cfg)
    with stage("write"):
        write_experiment_csv(args.out, cfg, header, rows)


def cmd_pipeline(args) -> None:
    with stage("load-features"):
        X = load_features(args.features)
    with stage("pipeline"):
        res = pipeline(
            X,
            k_nn=args.k_nn,
            k=args.k,
            sampling_fraction=args.fraction,
            gamma=args.gamma,
            power=args.power,
            seed=args.seed,
            mode=args.mode,
            sigma=args.sigma,
            replace=not args.without_replacement,
        )
    import os

    with stage("write"):
        os.makedirs(args.out_dir, exist_ok=True)
        save_sample_set(res.samples, os.path.join(args.out_dir, "samples.csv"))
        ncol = res.reconstruction.shape[1]
        _csv.write_rows(
            os.path.join(args.out_dir, "reconstruction.csv"),
            ["node_index", *[f"f{j}" for j in range(ncol)]],
            ((i, *map(float, row)) for i, row in enumerate(res.reconstruction)),
        )
        report = {
            "snr_db": res.snr_db,
            "effective_rate": res.effective_rate,
            "nominal_rate": res.nominal_rate,
            "k": res.k,
            **res.diagnostics,
        }
        with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"SNR {res.snr_db:.2f} dB, effective sampling rate {res.effective_rate:.4f} (nominal {res.nominal_rate:.4f})")


# ---------------------------------------------------------------- parser


def _add_graph_args(p, k_required: bool = True) -> None:
    p.add_argument("--graph", required=True, help="Matrix Market adjacency file")
    p.add_argument("--kind", default="combinatorial", choices=["combinatorial", "normalized"])
    if k_required:
        p.add_argument("--k", type=int, required=True, help="band limit")


def _add_experiment_args(p) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphsampling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a built-in graph as Matrix Market")
    p.add_argument("--type", required=True, choices=["path", "cycle", "tree", "community", "knn"])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--community-type", type=int, default=5, help="1..5")
    p.add_argument("--sizes", help="comma-separated community sizes (overrides --community-type)")
    p.add_argument("--p-in", type=float, default=0.7)
    p.add_argument("--p-out", type=float, default=0.002)
    p.add_argument("--features", help="CSV feature matrix for knn graphs")
    p.add_argument("--k-nn", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("laplacian", help="write the Laplacian as Matrix Market")
    _add_graph_args(p, k_required=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser("coherence", help="local coherences and optimal probabilities")
    _add_graph_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("dist", help="exact optimal or uniform sampling distribution")
    _add_graph_args(p)
    p.add_argument("--mode", default="optimal", choices=["optimal", "uniform"])
    p.add_argument("--compare", action="store_true", help="emit node,p_exact,p_estimated instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("estimate-dist", help="estimate the optimal distribution without eigenvectors")
    _add_graph_args(p)
    p.add_argument("--num-signals", type=int, default=None)
    p.add_argument("--degree", type=int, default=100)
    p.add_argument("--precision", type=float, default=0.01)
    p.add_argument("--max-bisections", type=int, default=60)
    p.add_argument("--damping", default="jackson", choices=["jackson", "none"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--diagnostics", help="JSON sidecar path (default: OUT.json)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate_dist)

    p = sub.add_parser("signal", help="random unit-norm bandlimited signal")
    _add_graph_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_signal)

    p = sub.add_parser("sample", help="draw a sample set")
    p.add_argument("--dist", help="distribution CSV (node_index,probability)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--without-replacement", action="store_true", help="uniform m-subset; needs --n")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("measure", help="noisy measurements of a signal")
    p.add_argument("--signal", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("decode", help="reconstruct a signal from measurements")
    p.add_argument("--graph", required=True)
    p.add_argument("--kind", default="combinatorial", choices=["combinatorial", "normalized"])
    p.add_argument("--measurements", required=True)
    p.add_argument("--decoder", default="efficient", choices=["efficient", "standard"])
    p.add_argument("--k", type=int, help="band limit (standard decoder)")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("rip-probability", help="empirical P(lower RIP constant <= threshold)")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_rip_probability)

    p = sub.add_parser("recon-sweep", help="reconstruction errors over gamma, power and sigma")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_recon_sweep)

    p = sub.add_parser("pipeline", help="sample and reconstruct a feature matrix on its k-NN graph")
    p.add_argument("--features", required=True)
    p.add_argument("--k-nn", type=int, default=20)
    p.add_argument("--k", type=int, default=None, help="band limit (default: m/3)")
    p.add_argument("--fraction", type=float, default=0.15)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--mode", default="estimated", choices=["estimated", "uniform"])
    p.add_argument("--without-replacement", action="store_true", help="uniform mode only")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "decode" and args.decoder == "standard" and args.k is None:
        parser.error("--k is required for the standard decoder")
    try:
        args.func(args)
    except CLIError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
