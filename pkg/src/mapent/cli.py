"""Batch command-line front-end.

Commands: bec-analytic, map-bound, de-run, sample-graph, verify, table.
Outputs JSON by default (CSV for table / --csv); every randomized command is
deterministic given --seed.  Exit codes: 0 success, 1 bound violation or
verdict failure, 2 budget or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .channels import capacity, binary_entropy_inverse, parse_channel
from .degrees import DegreePair, parse_terms
from .density import bec_bp_threshold, de_iterate
from .ensembles import (EnsembleSpec, asymptotic_laws, design_rate,
                        multi_poisson_spec, poisson_spec, sample_graph,
                        standard_spec)
from .errors import (BudgetExceeded, IntegralityError, MapentError,
                     NoBadBranch, SpecParseError)
from .channels import symmetry_test, tanh_moments
from .trial_entropy import (McBoundConfig, ThresholdResult, bec_map_threshold,
                            bec_stationary_points, map_bound_general,
                            phi_bound_mc)

TABLE1_ROWS = [  # (l, k, eps_bp, eps_map) for rate-1/2 regular LDPC pairs
    (2, 4, 1.0 / 3.0, 1.0 / 3.0),
    (3, 6, 0.4294398, 0.4881508),
    (4, 8, 0.3834465, 0.4977409),
    (5, 10, 0.3415500, 0.4994859),
    (6, 12, 0.3074623, 0.4998757),
]

TABLE2_ROWS = [  # (k, l, p_map, shannon) regular LDPC over the BSC
    (4, 3, 0.2101, 0.2145018),
    (5, 3, 0.1384, 0.1461024),
    (6, 3, 0.1010, 0.1100279),
    (6, 4, 0.1726, 0.1739524),
]


@dataclass
class RunConfig:
    """Validated command configuration."""

    command: str
    family: str
    kind: str
    pair: Optional[DegreePair]
    gamma: Optional[float]
    channel_spec: Optional[str]
    n: int
    n_pop: int
    iters: int
    m_samples: Optional[int]
    seed: int
    seed_given: bool
    out: Optional[str]
    reproducible: bool
    csv: bool
    threads: int
    tol: float


def _build_config(args) -> RunConfig:
    pair = None
    if args.L or args.R:
        if not (args.L and args.R):
            raise SpecParseError("--L and --R must be given together")
        pair = DegreePair(parse_terms(args.L), parse_terms(args.R))
    kind = "standard"
    gamma = None
    if getattr(args, "poisson_gamma", None) is not None:
        kind, gamma = "poisson", args.poisson_gamma
        if pair is None:
            raise SpecParseError("--poisson-gamma needs --R (and --L is ignored)")
    if getattr(args, "multi_poisson_gamma", None) is not None:
        if kind != "standard":
            raise SpecParseError("choose one of --poisson-gamma / --multi-poisson-gamma")
        kind, gamma = "multi_poisson", args.multi_poisson_gamma
        if pair is None:
            raise SpecParseError("--multi-poisson-gamma needs --L and --R")
    seed_given = args.seed is not None
    if args.reproducible and not seed_given:
        raise SpecParseError("--reproducible requires an explicit --seed")
    seed = args.seed if seed_given else int.from_bytes(os.urandom(6), "big")
    if args.threads < 1:
        raise SpecParseError("--threads must be >= 1")
    return RunConfig(
        command=args.command, family=args.family, kind=kind, pair=pair,
        gamma=gamma, channel_spec=getattr(args, "channel", None),
        n=getattr(args, "n", 0), n_pop=getattr(args, "N", 100_000),
        iters=getattr(args, "T", 20_000), m_samples=getattr(args, "M", None),
        seed=seed, seed_given=seed_given, out=args.out,
        reproducible=args.reproducible, csv=getattr(args, "csv", False),
        threads=args.threads, tol=getattr(args, "tol", 5e-4))


def _laws(cfg: RunConfig):
    try:
        return asymptotic_laws(cfg.kind, cfg.family, cfg.pair, cfg.gamma)
    except ValueError as exc:
        raise SpecParseError(str(exc)) from exc


def _spec(cfg: RunConfig) -> EnsembleSpec:
    if cfg.n < 1:
        raise SpecParseError("this command needs --n >= 1")
    try:
        if cfg.kind == "standard":
            return standard_spec(cfg.n, cfg.pair, cfg.family)
        if cfg.kind == "poisson":
            return poisson_spec(cfg.n, cfg.gamma, cfg.pair.rho, cfg.family)
        return multi_poisson_spec(cfg.n, cfg.gamma, cfg.pair, cfg.family)
    except (ValueError, IntegralityError) as exc:
        raise SpecParseError(str(exc)) from exc


def _emit(cfg: RunConfig, payload: dict) -> None:
    payload = {"command": cfg.command, "seed": cfg.seed, **payload}
    if not cfg.reproducible:
        payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    print(text)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")


def cmd_bec_analytic(cfg: RunConfig, strict: bool) -> int:
    laws = _laws(cfg)
    pair_laws = (laws.var, laws.check)
    eps_bp = bec_bp_threshold(pair_laws, cfg.family)
    try:
        res = bec_map_threshold(pair_laws, cfg.family)
        eps_map = res.threshold
        bracket = list(res.bracket)
    except NoBadBranch:
        if strict:
            raise
        eps_map, bracket = eps_bp, [eps_bp, eps_bp]
    trace = [{"z": z, "psi": psi, "stable": stable}
             for z, psi, stable in bec_stationary_points(eps_map, pair_laws,
                                                         cfg.family)]
    _emit(cfg, {"eps_bp": eps_bp, "eps_map": eps_map,
                "eps_map_bracket": bracket, "stationary_points": trace})
    return 0


def _noise_of(channel_spec: str) -> float:
    return float(channel_spec.split(":", 1)[1])


def _channel_factory(channel_spec: str):
    kind = channel_spec.split(":", 1)[0].strip().lower()
    if kind not in ("bec", "bsc", "biawgn"):
        raise SpecParseError(f"map-bound needs a parametric channel, got {kind!r}")
    return lambda noise: parse_channel(f"{kind}:{noise}")


def cmd_map_bound(cfg: RunConfig, phi_only: bool, bracket, equil: int,
                  avg_evals: int) -> int:
    laws = _laws(cfg)
    channel = parse_channel(cfg.channel_spec)
    config = McBoundConfig(n_pop=cfg.n_pop, equil_iters=equil,
                           max_iters=cfg.iters, avg_evals=avg_evals,
                           m_samples=cfg.m_samples)
    if phi_only:
        rep = phi_bound_mc(channel, laws, cfg.seed, config)
        _emit(cfg, {"channel": cfg.channel_spec, **rep.to_json_dict()})
        return 0
    if bracket is None:
        r = design_rate_of_laws(laws)
        limit = _shannon_limit(cfg.channel_spec, r)
        bracket = (0.5 * limit, limit)
    checkpoint = (cfg.out + ".probes.jsonl") if cfg.out else None
    cache = _load_probe_cache(checkpoint)

    def on_probe(record):
        if checkpoint:
            with open(checkpoint, "a") as fh:
                fh.write(json.dumps(record, default=float) + "\n")

    res = map_bound_general(_channel_factory(cfg.channel_spec), laws, bracket,
                            cfg.seed, tol=cfg.tol, config=config,
                            on_probe=on_probe, probe_cache=cache)
    _emit(cfg, {"channel": cfg.channel_spec, **res.to_json_dict()})
    return 0


def design_rate_of_laws(laws) -> float:
    if laws.family == "ldpc":
        return 1.0 - laws.var.mean / laws.check.mean
    return laws.check.mean / laws.var.mean


def _shannon_limit(channel_spec: str, rate: float) -> float:
    kind = channel_spec.split(":", 1)[0].strip().lower()
    if kind == "bec":
        return 1.0 - rate
    if kind == "bsc":
        return binary_entropy_inverse(1.0 - rate)
    if kind == "biawgn":
        # sigma at which capacity equals the rate, by bisection
        lo, hi = 1e-3, 20.0
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            if capacity(parse_channel(f"biawgn:{mid}")) > rate:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    raise SpecParseError(f"no shannon limit rule for {kind!r}")


def _load_probe_cache(path: Optional[str]) -> dict:
    cache = {}
    if path and os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                cache[rec["noise"]] = rec
    return cache


def cmd_de_run(cfg: RunConfig, init: str) -> int:
    laws = _laws(cfg)
    channel = parse_channel(cfg.channel_spec)
    state = de_iterate(channel, laws, cfg.iters, cfg.n_pop, init, cfg.seed)
    sym = symmetry_test(state.v_pop)
    _emit(cfg, {
        "channel": cfg.channel_spec, "iterations": state.iteration,
        "v_zero_fraction": state.v_pop.zero_fraction(),
        "v_infinite_fraction": state.v_pop.infinite_fraction(),
        "u_zero_fraction": state.u_pop.zero_fraction(),
        "tanh_moments": list(tanh_moments(state.v_pop)),
        "symmetry_max_sigma": sym.max_sigma(),
    })
    return 0


def cmd_sample_graph(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    graph = sample_graph(spec, cfg.seed, retries=10)
    text = graph.to_json()
    print(text)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def cmd_verify(cfg: RunConfig, n_graphs: int, n_samples: int) -> int:
    from .decoding import verify_bound
    spec = _spec(cfg)
    channel = parse_channel(cfg.channel_spec)
    cmp = verify_bound(spec, channel, n_graphs, n_samples, cfg.seed)
    _emit(cfg, {
        "channel": cfg.channel_spec,
        "oracle_entropy": cmp.oracle.entropy,
        "oracle_stderr": cmp.oracle.entropy_se,
        "bound": cmp.bound, "bound_stderr": cmp.bound_se,
        "margin": cmp.margin, "margin_sigma": cmp.margin_sigma,
        "violated": cmp.violated,
    })
    return 1 if cmp.violated else 0


def cmd_table(cfg: RunConfig, which: str) -> int:
    lines = ["ensemble,quantity,computed,paper,delta"]
    if which == "table1":
        from .degrees import regular_pair
        for l, k, bp, mp in TABLE1_ROWS:
            pair = regular_pair(l, k)
            got_bp = bec_bp_threshold(pair, "ldpc")
            got_mp = bec_map_threshold(pair, "ldpc").threshold
            lines.append(f"({l}.{k}),eps_bp,{got_bp:.7f},{bp:.7f},{got_bp - bp:.2e}")
            lines.append(f"({l}.{k}),eps_map,{got_mp:.7f},{mp:.7f},{got_mp - mp:.2e}")
    elif which == "table2":
        # Monte Carlo rows; runtime is dominated by density evolution at
        # N = 1e5 and runs in tens of minutes total.
        from .degrees import regular_pair
        for k, l, p_map, _ in TABLE2_ROWS:
            pair = regular_pair(l, k)
            laws = asymptotic_laws("standard", "ldpc", pair)
            limit = _shannon_limit("bsc:0", design_rate_of_laws(laws))
            res = map_bound_general(_channel_factory("bsc:0"), laws,
                                    (0.5 * limit, limit), cfg.seed,
                                    tol=cfg.tol,
                                    config=McBoundConfig(n_pop=cfg.n_pop))
            got = res.threshold
            lines.append(f"({l}.{k}),p_map,{got:.5f},{p_map:.5f},{got - p_map:.2e}")
    else:
        raise SpecParseError(f"unknown table {which!r}")
    text = "\n".join(lines)
    print(text)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    return 0


def _add_common(p: argparse.ArgumentParser, needs_channel=False) -> None:
    p.add_argument("--L", help="variable degree law, e.g. '1@3' or '0.5@2,0.5@3'")
    p.add_argument("--R", help="check degree law, e.g. '1@6'")
    p.add_argument("--family", choices=["ldpc", "ldgm"], default="ldpc")
    p.add_argument("--poisson-gamma", type=float, dest="poisson_gamma")
    p.add_argument("--multi-poisson-gamma", type=float, dest="multi_poisson_gamma")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--reproducible", action="store_true")
    if needs_channel:
        p.add_argument("--channel", required=True,
                       help="bec:0.45 | bsc:0.11 | biawgn:0.8 | table:<path>")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mapent",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bec-analytic", help="closed-form BEC thresholds")
    _add_common(p)
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("map-bound", help="MC entropy bound / MAP threshold")
    _add_common(p, needs_channel=True)
    p.add_argument("--N", type=int, default=100_000, help="population size")
    p.add_argument("--T", type=int, default=20_000, help="max DE iterations")
    p.add_argument("--M", type=int, help="samples per phi evaluation")
    p.add_argument("--tol", type=float, default=5e-4)
    p.add_argument("--equil", type=int, default=1500)
    p.add_argument("--avg-evals", type=int, default=200, dest="avg_evals")
    p.add_argument("--bracket", type=float, nargs=2)
    p.add_argument("--phi-only", action="store_true", dest="phi_only")

    p = sub.add_parser("de-run", help="run density evolution, report moments")
    _add_common(p, needs_channel=True)
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--init", choices=["zero", "infinity"], default="zero")

    p = sub.add_parser("sample-graph", help="sample a Tanner graph as JSON")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("verify", help="exact oracle vs. bound on small graphs")
    _add_common(p, needs_channel=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graphs", type=int, default=100)
    p.add_argument("--samples", type=int, default=50,
                   help="channel outputs per graph (enumeration oracle)")

    p = sub.add_parser("table", help="reproduce the threshold tables as CSV")
    _add_common(p)
    p.add_argument("--which", choices=["table1", "table2"], required=True)
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=5e-4)
    p.add_argument("--csv", action="store_true", default=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if not cfg.seed_given and cfg.command != "table":
            print(f"# seed: {cfg.seed}", file=sys.stderr)
        if args.command == "bec-analytic":
            return cmd_bec_analytic(cfg, args.strict)
        if args.command == "map-bound":
            bracket = tuple(args.bracket) if args.bracket else None
            return cmd_map_bound(cfg, args.phi_only, bracket, args.equil,
                                 args.avg_evals)
        if args.command == "de-run":
            return cmd_de_run(cfg, args.init)
        if args.command == "sample-graph":
            return cmd_sample_graph(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.graphs, args.samples)
        if args.command == "table":
            return cmd_table(cfg, args.which)
        raise SpecParseError(f"unknown command {args.command!r}")
    except (SpecParseError, IntegralityError, BudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NoBadBranch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MapentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
