"""Command line entry point, experiment registry and configuration files.

    rmt-lab list
    rmt-lab run --experiment lsc --N 500 --seed 7 --out results/
    rmt-lab run --config cfg.json --param samples=10
    rmt-lab suite

The default output directory is ``$RMTLAB_OUT`` (else ``./rmtlab-out``).
"""

from __future__ import annotations

import argparse
import inspect
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from . import bandlab, dbm, gapstats, locallaw, loggas, spectral
from .report import _plain

SUITE_ID = "suite"


class ConfigError(ValueError):
    """Unknown experiment id or invalid parameter."""


@dataclass(frozen=True)
class Experiment:
    """Registry entry: one experiment id bound to one module operation."""

    id: str
    fn: object
    description: str
    anchor: str
    size_param: str | None = "N"

    @property
    def module(self) -> str:
        return self.fn.__module__

    def parameters(self) -> dict:
        sig = inspect.signature(self.fn)
        return {k: p.default for k, p in sig.parameters.items() if k not in ("seed", "threads")}

    def accepts_threads(self) -> bool:
        return "threads" in inspect.signature(self.fn).parameters


REGISTRY = {e.id: e for e in [
    Experiment("identities", locallaw.identities_experiment,
               "Stieltjes identity, Ward, Schur and resolvent expansion residuals",
               "resolvent identities"),
    Experiment("semicircle", spectral.semicircle_experiment,
               "Pooled GOE eigenvalue histogram against the semicircle density", "semicircle law"),
    Experiment("lsc", locallaw.lsc_scaling_experiment,
               "Scaling of |m_N - m| and Lambda with N eta and Pi at eta = N^-0.8",
               "local semicircle law", "N_list"),
    Experiment("rigidity", locallaw.rigidity_experiment,
               "Eigenvalue rigidity N|lambda_j - gamma_j| and counting-function error", "rigidity of eigenvalues"),
    Experiment("deloc", locallaw.delocalization_experiment,
               "Eigenvector sup-norm N||u||_inf^2 with a diagonal-matrix control", "eigenvector delocalization"),
    Experiment("flucavg", locallaw.fluctuation_averaging_experiment,
               "Fluctuation of [v] against single v_i over an eta sweep", "fluctuation averaging"),
    Experiment("surmise", gapstats.surmise_experiment,
               "2x2 and bulk GOE gaps against the Wigner surmise", "Wigner surmise"),
    Experiment("sine", gapstats.sine_experiment,
               "GUE two-point function against 1 - K(r)^2 with a Poisson control", "sine kernel"),
    Experiment("fourmoment", gapstats.law_comparison_experiment,
               "Bulk gaps of three-point versus Gaussian Wigner matrices", "four moment matching"),
    Experiment("dbm", dbm.relaxation_experiment,
               "Bulk gaps of a Bernoulli matrix under the Ornstein-Uhlenbeck flow versus GOE",
               "Dyson Brownian motion relaxation"),
    Experiment("dbm-n2", dbm.two_particle_experiment,
               "Two-particle SDE against the 2x2 matrix flow", "Dyson Brownian motion", None),
    Experiment("loggas-xval", loggas.cross_validation_experiment,
               "Tridiagonal versus Metropolis samples of the beta-ensemble", "beta-ensembles"),
    Experiment("loggas-oracle", loggas.small_n_oracle_experiment,
               "Both beta-ensemble samplers against the exact N = 1 and N = 2 laws", "beta-ensembles", None),
    Experiment("repulsion", loggas.level_repulsion_experiment,
               "Small-gap exponent of a conditioned Gaussian gas", "level repulsion"),
    Experiment("local-rigidity", loggas.local_rigidity_experiment,
               "Centre-particle tail and mean of a conditioned gas", "local equilibrium measure"),
    Experiment("gap-local", loggas.gap_universality_experiment,
               "Central gaps of two conditioned measures on a matched interval", "local gap universality"),
    Experiment("band", bandlab.figure1_report,
               "Band matrix diffusion profile T against Theta at eta = 5^-k", "diffusion profile", None),
]}


def list_experiments():
    """Catalog rows ``(id, description, anchor, module)``, plus the suite driver."""
    rows = [(e.id, e.description, e.anchor, e.module) for e in REGISTRY.values()]
    rows.append((SUITE_ID, "Full acceptance suite", "all", "rmtlab.acceptance"))
    return rows


def valid_ids():
    return list(REGISTRY) + [SUITE_ID]


def default_out() -> str:
    return os.environ.get("RMTLAB_OUT", "rmtlab-out")


@dataclass
class ExperimentConfig:
    """One experiment run.  ``params`` override the experiment's keyword defaults."""

    experiment: str = "semicircle"
    seed: int = 0
    threads: int = 1
    out: str | None = None
    params: dict = field(default_factory=dict)

    def validate(self):
        if self.experiment == SUITE_ID:
            return self
        if self.experiment not in REGISTRY:
            raise ConfigError(f"unknown experiment {self.experiment!r}; valid ids: {', '.join(valid_ids())}")
        allowed = REGISTRY[self.experiment].parameters()
        bad = sorted(set(self.params) - set(allowed))
        if bad:
            raise ConfigError(f"unknown parameter(s) {bad} for {self.experiment}; allowed: {sorted(allowed)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        return self

    def resolved_params(self) -> dict:
        """All keyword arguments of the experiment with overrides applied."""
        if self.experiment == SUITE_ID:
            return dict(self.params)
        p = REGISTRY[self.experiment].parameters()
        p.update(self.params)
        return p

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - {"experiment", "seed", "threads", "out", "params"}
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _kwargs(params: dict) -> dict:
    # JSON has no tuples or complex numbers
    out = {}
    for k, v in params.items():
        if isinstance(v, dict) and set(v) == {"re", "im"}:
            v = complex(v["re"], v["im"])
        out[k] = v
    return out


def run(cfg: ExperimentConfig, write: bool = True):
    """Execute one experiment; returns its report (a list of criterion results for the suite)."""
    cfg.validate()
    if cfg.experiment == SUITE_ID:
        from .acceptance import run_suite
        return run_suite(seed=cfg.seed, threads=cfg.threads, out=cfg.out, **cfg.params)
    exp = REGISTRY[cfg.experiment]
    kw = _kwargs(cfg.params)
    if exp.accepts_threads():
        kw["threads"] = cfg.threads
    rep = exp.fn(seed=cfg.seed, **kw)
    if write:
        rep.write(cfg.out or default_out())
    return rep


def _build_parser():
    ap = argparse.ArgumentParser(prog="rmt-lab", description="Random matrix experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list experiment ids")
    for name in ("run", "suite"):
        p = sub.add_parser(name, help="run one experiment" if name == "run" else "run the acceptance suite")
        if name == "run":
            p.add_argument("--experiment", help="experiment id (see `rmt-lab list`)")
            p.add_argument("--N", type=_parse_value, help="matrix size (or list) for the experiment")
            p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                           help="override a keyword parameter (VALUE parsed as JSON)")
        else:
            p.add_argument("--only", type=int, action="append", help="run only these criterion numbers")
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out", help="output directory (default $RMTLAB_OUT or ./rmtlab-out)")
    return ap


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.command == "suite":
        cfg.experiment = SUITE_ID
        if args.only:
            cfg.params = dict(cfg.params, only=args.only)
    elif args.experiment:
        cfg.experiment = args.experiment
    elif not args.config:
        raise ConfigError(f"--experiment or --config is required; valid ids: {', '.join(valid_ids())}")
    for attr in ("seed", "threads", "out"):
        if getattr(args, attr) is not None:
            setattr(cfg, attr, getattr(args, attr))
    if args.command == "run":
        params = dict(cfg.params)
        if args.N is not None:
            exp = REGISTRY.get(cfg.experiment)
            if exp is None or exp.size_param is None:
                raise ConfigError(f"--N is not supported by {cfg.experiment!r}")
            params[exp.size_param] = args.N
        for item in args.param:
            if "=" not in item:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = _parse_value(v)
        cfg.params = params
    return cfg.validate()


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list":
        for rid, desc, anchor, module in list_experiments():
            print(f"{rid:15s} {desc}  [{anchor}; {module}]")
        return 0
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    result = run(cfg)
    if cfg.experiment == SUITE_ID:
        return 0 if all(r.passed for r in result) else 1
    print(result.verdict())
    for c in result.checks:
        print("  " + c.line())
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
