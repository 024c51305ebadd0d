"""Command line entry point: ``simulate``, ``fit``, ``benchmark`` and ``diagnose``."""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .data import indicator_design, load_csv, write_csv
from .diagnostics import MIN_LENGTH, diagnose_traces
from .errors import (ConfigError, DataError, NoSamplesError, NumericError,
                     TraceTooShortError)
from .gibbs import FitConfig, fit, run_chain, summarize
from .priors import BetaPrior, MMSpec, NEGPrior, PriorSpec
from .rand_dists import rng_stream
from .simulation import STRUCTURES, make_structure, sel_loss, simulate_dataset

OUTPUT_ENV = "CHOLSHRINK_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


@dataclass
class RunConfig:
    input: Path | None = None
    output_dir: Path = Path(".")
    seed: int = 0
    n_iter: int = 20_000
    n_burnin: int = 10_000
    thin: int = 1
    n_chains: int = 1
    gamma_prior: str = "neg"
    mm_u: float = 0.1
    mm_v: float = 0.09
    structures: tuple[str, ...] = ("identity",)
    priors: tuple[str, ...] = ("neg", "mm")
    n_subjects: int = 200
    n_visits: int = 15
    n_responses: int = 2
    sigma2: float = 0.0
    replicates: int = 3
    jobs: int = 1
    log_transform: bool = False
    standardize: bool = False
    update_p0: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def q(self) -> int:
        return self.n_visits * self.n_responses

    def prior_spec(self, kind: str | None = None) -> PriorSpec:
        kind = kind or self.gamma_prior
        if kind == "neg":
            gamma = NEGPrior()
        elif kind == "mm":
            gamma = MMSpec(self.mm_u, self.mm_v)
        else:
            raise ConfigError(f"unknown gamma prior {kind!r}")
        return PriorSpec(beta=BetaPrior(update_p0=self.update_p0), gamma=gamma)

    def fit_config(self, kind: str | None = None, seed: int | None = None) -> FitConfig:
        return FitConfig(n_iter=self.n_iter, n_burnin=self.n_burnin, thin=self.thin,
                         n_chains=self.n_chains, seed=self.seed if seed is None else seed,
                         prior=self.prior_spec(kind))

    def out(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name


# --- subcommands -------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> dict[str, Path]:
    """Write ``truth.csv`` (the true Omega) and ``data.csv`` for one structure."""
    if len(cfg.structures) != 1:
        raise ConfigError("simulate takes exactly one structure")
    omega = make_structure(cfg.structures[0], cfg.q, seed=cfg.seed)
    data = simulate_dataset(omega, cfg.n_subjects, cfg.n_visits, cfg.n_responses,
                            cfg.sigma2, rng_stream(cfg.seed, 0))
    paths = {"truth": cfg.out("truth.csv"), "data": cfg.out("data.csv")}
    io.write_matrix_csv(paths["truth"], omega)
    write_csv(data, paths["data"])
    return paths


def _indicator_layout(data) -> int | None:
    """Number of visits if ``Z`` is the response-by-visit indicator design."""
    if data.N == 0:
        return None
    n_visits = int(data.visit.max())
    if data.H * n_visits != data.q:
        return None
    ind = indicator_design(data.response, data.visit, data.H, n_visits)
    return n_visits if np.array_equal(ind, data.Z) else None


def response_blocks(mat, n_responses: int, n_visits: int) -> dict[tuple[int, int], np.ndarray]:
    """Split a ``q x q`` matrix into ``n_visits``-sized blocks keyed by 1-based response pairs."""
    mat = np.asarray(mat)
    out = {}
    for h in range(n_responses):
        for k in range(n_responses):
            out[(h + 1, k + 1)] = mat[h * n_visits:(h + 1) * n_visits, k * n_visits:(k + 1) * n_visits]
    return out


def _chain_diagnostics(traces_by_chain) -> list[dict]:
    rows = []
    for c, traces in sorted(traces_by_chain.items()):
        usable = {k: v for k, v in traces.items() if v.shape[0] >= MIN_LENGTH}
        if len(usable) < len(traces):
            raise TraceTooShortError(f"chain {c}: fewer than {MIN_LENGTH} kept draws")
        for r in diagnose_traces(usable):
            r["chain"] = c
            rows.append(r)
    return rows


def cmd_fit(cfg: RunConfig) -> dict[str, Path]:
    if cfg.input is None:
        raise ConfigError("fit needs --input")
    data = load_csv(cfg.input, log_transform=cfg.log_transform, standardize=cfg.standardize)
    chains = fit(data, cfg.fit_config())
    summ = summarize(chains)
    paths = {
        "summary": cfg.out("summary.json"),
        "omega": cfg.out("omega_mean.csv"),
        "rho": cfg.out("rho_mean.csv"),
        "chain": cfg.out("chain.csv"),
        "diagnostics": cfg.out("diagnostics.csv"),
    }
    extra = {"gamma_prior": cfg.gamma_prior, "n_chains": cfg.n_chains, "q": data.q,
             "p": data.p, "n_subjects": data.n, "n_obs": data.N}
    n_visits = _indicator_layout(data)
    if n_visits is not None and data.H > 1:
        for (h, k), block in response_blocks(summ.rho_mean, data.H, n_visits).items():
            if h < k:
                key = f"rho_cross_{h}_{k}"
                paths[key] = cfg.out(f"{key}.csv")
                io.write_matrix_csv(paths[key], block)
        extra["block_layout"] = {"n_responses": data.H, "n_visits": n_visits}
    io.write_summary_json(paths["summary"], summ, extra)
    io.write_matrix_csv(paths["omega"], summ.omega_mean)
    io.write_matrix_csv(paths["rho"], summ.rho_mean)
    io.write_chain_csv(paths["chain"], chains)
    try:
        rows = _chain_diagnostics(io.read_chain_csv(paths["chain"]))
    except TraceTooShortError as exc:
        print(f"warning: diagnostics skipped: {exc}", file=sys.stderr)
        rows = []
    io.write_diagnostics_csv(paths["diagnostics"], rows)
    return paths


def benchmark_cell(cfg: RunConfig, s_idx: int, structure: str, replicate: int,
                   priors: tuple[str, ...]) -> list[dict]:
    """Simulate one dataset and fit every prior to it."""
    omega = make_structure(structure, cfg.q, seed=cfg.seed)
    data = simulate_dataset(omega, cfg.n_subjects, cfg.n_visits, cfg.n_responses,
                            cfg.sigma2, rng_stream(cfg.seed, (1, s_idx, replicate)))
    rows = []
    for p_idx, kind in enumerate(priors):
        fc = cfg.fit_config(kind)
        chains = [
            run_chain(data, fc, rng_stream(cfg.seed, (2, s_idx, replicate, p_idx, c)), chain_id=c)
            for c in range(fc.n_chains)
        ]
        est = summarize(chains).omega_mean
        rows.append({"structure": structure, "prior": kind, "replicate": replicate + 1,
                     "sel": sel_loss(est, omega)})
    return rows


def _cell(args):
    return benchmark_cell(*args)


def cmd_benchmark(cfg: RunConfig) -> dict[str, Path]:
    """Loss table over structures x priors x replicates."""
    if cfg.replicates < 1:
        raise ConfigError("need at least one replicate")
    for s in cfg.structures:
        make_structure(s, cfg.q, seed=cfg.seed)
    for kind in cfg.priors:
        cfg.prior_spec(kind)
    cells = [(cfg, STRUCTURES.index(s), s, r, tuple(cfg.priors))
             for s in cfg.structures for r in range(cfg.replicates)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]
    path = cfg.out("benchmark.csv")
    with open(path, "w", newline="") as fh:
        fh.write("structure,prior,replicate,sel\n")
        for rows in results:
            for r in rows:
                fh.write(f"{r['structure']},{r['prior']},{r['replicate']},{r['sel']:.17g}\n")
    return {"benchmark": path}


def cmd_diagnose(cfg: RunConfig) -> dict[str, Path]:
    if cfg.input is None:
        raise ConfigError("diagnose needs --input (a chain CSV)")
    rows = _chain_diagnostics(io.read_chain_csv(cfg.input))
    path = cfg.out("diagnostics.csv")
    io.write_diagnostics_csv(path, rows)
    return {"diagnostics": path}


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit,
            "benchmark": cmd_benchmark, "diagnose": cmd_diagnose}


# --- argument parsing --------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-dir", default=None,
                   help=f"output directory (default: ${OUTPUT_ENV} or the current directory)")
    p.add_argument("--seed", type=int, default=0)


def _sampler(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--burnin", type=int, default=10_000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--mm-u", type=float, default=0.1)
    p.add_argument("--mm-v", type=float, default=0.09)
    p.add_argument("--update-p0", action="store_true")


def _design(p: argparse.ArgumentParser, visits: int, responses: int) -> None:
    p.add_argument("--q", type=int, default=None,
                   help="number of random effects (visits x responses)")
    p.add_argument("--subjects", type=int, default=200)
    p.add_argument("--visits", type=int, default=None, help=f"default {visits}")
    p.add_argument("--responses", type=int, default=responses)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.set_defaults(default_visits=visits)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cholshrink", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a benchmark structure")
    _common(p)
    _design(p, visits=15, responses=2)
    p.add_argument("--structure", default="identity", choices=STRUCTURES)

    p = sub.add_parser("fit", help="run the Gibbs sampler on a long-format CSV")
    _common(p)
    _sampler(p)
    p.add_argument("--input", required=True)
    p.add_argument("--gamma-prior", choices=("neg", "mm"), default="neg")
    p.add_argument("--log-transform", action="store_true")
    p.add_argument("--standardize", action="store_true")

    p = sub.add_parser("benchmark", help="squared error losses over structures and priors")
    _common(p)
    _sampler(p)
    _design(p, visits=10, responses=1)
    p.add_argument("--structure", default="all",
                   help="comma-separated structures or 'all'")
    p.add_argument("--gamma-prior", default="neg,mm",
                   help="comma-separated subset of neg,mm")
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("diagnose", help="ESS and Geweke table for a chain CSV")
    _common(p)
    p.add_argument("--input", required=True)
    return ap


def _split(value: str, allowed, what: str) -> tuple[str, ...]:
    if value == "all":
        return tuple(allowed)
    items = tuple(v.strip() for v in value.split(",") if v.strip())
    bad = [v for v in items if v not in allowed]
    if bad or not items:
        raise ConfigError(f"unknown {what}: {bad or value!r}; choose from {tuple(allowed)}")
    return items


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    out = ns.output_dir or os.environ.get(OUTPUT_ENV) or "."
    cfg = RunConfig(output_dir=Path(out), seed=ns.seed)
    if getattr(ns, "input", None):
        cfg.input = Path(ns.input)
    if hasattr(ns, "iters"):
        cfg.n_iter, cfg.n_burnin, cfg.thin, cfg.n_chains = ns.iters, ns.burnin, ns.thin, ns.chains
        cfg.mm_u, cfg.mm_v, cfg.update_p0 = ns.mm_u, ns.mm_v, ns.update_p0
    if hasattr(ns, "subjects"):
        cfg.n_subjects, cfg.n_responses, cfg.sigma2 = ns.subjects, ns.responses, ns.sigma2
        if ns.responses < 1:
            raise ConfigError("--responses must be >= 1")
        if ns.visits is not None:
            cfg.n_visits = ns.visits
            if ns.q is not None and ns.q != ns.visits * ns.responses:
                raise ConfigError(f"--q {ns.q} != --visits {ns.visits} x --responses {ns.responses}")
        elif ns.q is not None:
            if ns.q % ns.responses:
                raise ConfigError(f"--q {ns.q} is not a multiple of --responses {ns.responses}")
            cfg.n_visits = ns.q // ns.responses
        else:
            cfg.n_visits = ns.default_visits
    if ns.command == "simulate":
        cfg.structures = (ns.structure,)
    elif ns.command == "benchmark":
        cfg.structures = _split(ns.structure, STRUCTURES, "structure")
        cfg.priors = _split(ns.gamma_prior, ("neg", "mm"), "gamma prior")
        cfg.replicates, cfg.jobs = ns.replicates, ns.jobs
    elif ns.command == "fit":
        cfg.gamma_prior = ns.gamma_prior
        cfg.log_transform, cfg.standardize = ns.log_transform, ns.standardize
    return cfg


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, NoSamplesError, TraceTooShortError, OSError)):
        return EXIT_DATA
    if isinstance(exc, (NumericError, np.linalg.LinAlgError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    raise exc


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            paths = COMMANDS[ns.command](cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = exit_code_for(exc)
        print(f"cholshrink {ns.command}: error: {exc}", file=sys.stderr)
        return code
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
