"""Experiment harness: seeded Monte-Carlo sweeps, rate/energy frontiers,
CSV and JSON emission, and the command-line entry point.

Determinism contract: instance i of a sweep uses the seed
base_seed XOR splitmix64(i), so results do not depend on worker
scheduling, and any run repeated with the same config and seed produces
byte-identical output files (the optional timing column is zeroed unless
explicitly requested, since wall time is not reproducible).
"""

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as chan
from . import closedform, oracle, programs, schemes, subsolver
from .errors import (ConfigError, InstanceInfeasible, SubsolverFailure,
                     UnsupportedConfiguration, WietError)

MASK64 = (1 << 64) - 1


def splitmix64(z):
    """One step of the splitmix64 sequence (used to decorrelate seeds)."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def instance_seed(base_seed, i):
    return (int(base_seed) ^ splitmix64(int(i))) & MASK64


@dataclass
class ExperimentConfig:
    schemes: list
    K: int = 2
    Nt: int = 4
    snr_db: float = 10.0
    eta_grid: list = field(default_factory=lambda: [1.0])
    e_grid: list = field(default_factory=lambda: [1.0])   # scalars or per-user lists
    num_channels: int = 500
    base_seed: int = 0
    threads: int = 1
    timing: bool = False
    weights: list = None
    scheme_opts: dict = field(default_factory=dict)

    def validate(self):
        for s in self.schemes:
            if s not in schemes.ALL_SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {s!r}")
        if not self.schemes:
            raise ConfigError("schemes: must list at least one scheme")
        if self.K < 2:
            raise ConfigError("K: must be >= 2")
        if self.Nt < 1:
            raise ConfigError("Nt: must be >= 1")
        if not self.eta_grid:
            raise ConfigError("eta_grid: must be nonempty")
        if any(not (e > 0) for e in self.eta_grid):
            raise ConfigError("eta_grid: entries must be positive")
        if not self.e_grid:
            raise ConfigError("e_grid: must be nonempty")
        if self.num_channels < 1:
            raise ConfigError("num_channels: must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")

    @classmethod
    def from_json(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        bad = [k for k in d if k not in known]
        if bad:
            raise ConfigError(f"{bad[0]}: unknown config field")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc
        cfg.validate()
        return cfg


@dataclass
class SweepRow:
    scheme: str
    eta: float
    E1: float
    E2: float
    feas_rate: float
    avg_rate: float
    avg_rate_feasible: float
    iters_mean: float
    seconds: float
    n_feasible: int = 0
    n_infeasible: int = 0
    n_failed: int = 0


CSV_HEADER = "scheme,eta,E1,E2,feas_rate,avg_rate,avg_rate_feasible,iters_mean,seconds"


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def rows_to_csv(rows):
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in (
            r.scheme, r.eta, r.E1, r.E2, r.feas_rate, r.avg_rate,
            r.avg_rate_feasible, r.iters_mean, r.seconds)))
    return "\n".join(lines) + "\n"


def _energy_vector(e_entry, K):
    if isinstance(e_entry, (int, float)):
        return np.full(K, float(e_entry))
    v = np.asarray(e_entry, dtype=float)
    if v.shape != (K,):
        raise ConfigError(f"e_grid: entry {e_entry!r} does not have {K} users")
    return v


def _scheme_options(cfg, scheme):
    opts = schemes.SchemeOptions()
    for key, val in cfg.scheme_opts.get(scheme, {}).items():
        if not hasattr(opts, key):
            raise ConfigError(f"scheme_opts.{scheme}.{key}: unknown option")
        setattr(opts, key, val)
    return opts


def _run_one(cfg, scheme, eta, E, i):
    """One (scheme, grid point, instance) cell; never raises on solver
    failures (they are counted instead)."""
    seed = instance_seed(cfg.base_seed, i)
    gen = chan.GenConfig(K=cfg.K, Nt=cfg.Nt, eta=eta, snr_db=cfg.snr_db, seed=seed)
    cs = chan.generate_instance(gen).with_requirements(E=E, w=cfg.weights)
    opts = _scheme_options(cfg, scheme)
    opts.seed = seed & 0x7FFFFFFF
    try:
        strat, ev = schemes.solve_scheme(cs, scheme, opts)
        return ("feasible" if ev.feasible else "infeasible",
                ev.weighted_sum_rate if ev.feasible else 0.0,
                strat.meta.get("iterations", 0))
    except InstanceInfeasible:
        return ("infeasible", 0.0, 0)
    except (SubsolverFailure, UnsupportedConfiguration, WietError) as exc:
        return ("failed", 0.0, 0)


def _run_cell(args):
    return _run_one(*args)


def _pool_map(fn, work, threads):
    if threads <= 1:
        return [fn(item) for item in work]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, work, chunksize=8))


def run_sweep(cfg: ExperimentConfig, out_path=None):
    """Full sweep over (eta, E) grid points and schemes.

    Infeasible and failed instances contribute zero rate to avg_rate;
    avg_rate_feasible averages the feasible ones only (nan when none).
    """
    cfg.validate()
    rows = []
    for eta in cfg.eta_grid:
        for e_entry in cfg.e_grid:
            E = _energy_vector(e_entry, cfg.K)
            for scheme in cfg.schemes:
                t0 = time.perf_counter()
                work = [(cfg, scheme, eta, E, i) for i in range(cfg.num_channels)]
                results = _pool_map(_run_cell, work, cfg.threads)
                elapsed = time.perf_counter() - t0
                n_feas = sum(1 for st, _, _ in results if st == "feasible")
                n_inf = sum(1 for st, _, _ in results if st == "infeasible")
                n_fail = sum(1 for st, _, _ in results if st == "failed")
                rates = [r for st, r, _ in results if st == "feasible"]
                iters = [it for st, _, it in results if st == "feasible"]
                rows.append(SweepRow(
                    scheme=scheme,
                    eta=float(eta),
                    E1=float(E[0]),
                    E2=float(E[1]) if cfg.K > 1 else float(E[0]),
                    feas_rate=n_feas / cfg.num_channels,
                    avg_rate=float(sum(rates)) / cfg.num_channels,
                    avg_rate_feasible=(float(np.mean(rates)) if rates else float("nan")),
                    iters_mean=(float(np.mean(iters)) if iters else 0.0),
                    seconds=(elapsed if cfg.timing else 0.0),
                    n_feasible=n_feas,
                    n_infeasible=n_inf,
                    n_failed=n_fail,
                ))
    if out_path:
        with open(out_path, "w") as f:
            f.write(rows_to_csv(rows))
    return rows


def rate_energy_region(cfg, mode="energy", e_values=None, weight_points=16,
                       fixed_E=(1.0, 1.0), out_path=None):
    """Frontier sweeps for the simultaneous scheme (two users).

    mode="energy": sweep a symmetric requirement over e_values, emitting
    (E, R1, R2, sum).  mode="weights": fix (E1, E2) and sweep the weight
    angle t with (w1, w2) = (cos^2 t, sin^2 t), emitting (t, R1, R2, sum).
    """
    cfg.validate()
    if cfg.K != 2:
        raise ConfigError("K: rate_energy_region is defined for K = 2")
    seed = instance_seed(cfg.base_seed, 0)
    gen = chan.GenConfig(K=2, Nt=cfg.Nt, eta=cfg.eta_grid[0], snr_db=cfg.snr_db, seed=seed)
    base = chan.generate_instance(gen)
    opts = _scheme_options(cfg, schemes.IDEAL)
    rows = []
    if mode == "energy":
        values = e_values if e_values is not None else [float(e) for e in cfg.e_grid]
        header = "E,R1,R2,sum"
        for e in values:
            cs = base.with_requirements(E=_energy_vector(e, 2))
            try:
                _, ev = schemes.solve_ideal(cs, opts)
                rows.append((float(e), float(ev.rate[0]), float(ev.rate[1]),
                             float(ev.weighted_sum_rate) if ev.feasible else 0.0))
            except InstanceInfeasible:
                rows.append((float(e), 0.0, 0.0, 0.0))
    elif mode == "weights":
        header = "t,R1,R2,sum"
        for t in np.linspace(0.0, math.pi / 2, weight_points):
            w = [max(math.cos(t) ** 2, 1e-6), max(math.sin(t) ** 2, 1e-6)]
            cs = base.with_requirements(E=np.asarray(fixed_E, dtype=float), w=w)
            try:
                _, ev = schemes.solve_ideal(cs, opts)
                rows.append((float(t), float(ev.rate[0]), float(ev.rate[1]),
                             float(ev.rate[0] + ev.rate[1]) if ev.feasible else 0.0))
            except InstanceInfeasible:
                rows.append((float(t), 0.0, 0.0, 0.0))
    else:
        raise ConfigError(f"mode: unknown region mode {mode!r}")
    text = header + "\n" + "\n".join(",".join(_fmt(v) for v in r) for r in rows) + "\n"
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    return rows, text


# --- verification battery ----------------------------------------------------

def run_verification(seed=0, n_instances=5, verbose=True):
    """Small cross-check suite: closed forms vs the embedded solver vs the
    brute-force oracles.  Returns the list of (name, ok) pairs."""
    checks = []

    def record(name, ok):
        checks.append((name, bool(ok)))
        if verbose:
            print(f"  {'PASS' if ok else 'FAIL'}  {name}")

    rng_seeds = [seed + j for j in range(n_instances)]

    ok = True
    for s in rng_seeds:
        cs = chan.generate_instance(chan.GenConfig(K=2, Nt=3, eta=2.0, seed=s))
        cs = cs.with_requirements(E=[1.0, 1.0])
        res = closedform.tdms_eh_minimize(cs)
        prog, _ = programs.eh_program(cs)
        rep = subsolver.solve_convex(prog)
        ok &= rep.status == subsolver.OPTIMAL
        ok &= abs(res.beta - rep.objective) <= 1e-5 * max(1.0, abs(res.beta))
    record("harvest-slot closed form vs embedded solver", ok)

    ok = True
    for s in rng_seeds:
        cs = chan.generate_instance(chan.GenConfig(K=2, Nt=3, eta=2.0, seed=s))
        cs = cs.with_requirements(E=[1.0, 1.0])
        res = closedform.tdms_eh_minimize(cs)
        grid = oracle.oracle_eh_dual_grid(cs, n=4000)
        ok &= abs(res.beta - grid) <= 1e-3 * max(1.0, abs(res.beta))
    record("harvest-slot bisection vs dual grid", ok)

    def slot_friendly(s):
        cs = chan.generate_instance(chan.GenConfig(K=2, Nt=2, eta=1.5, seed=s))
        # a quarter of each receiver's maximum service is always coverable
        E = [0.25 * sum(cs.P[k] * np.linalg.norm(cs.h[k, i]) ** 2 for k in range(2))
             for i in range(2)]
        return cs.with_requirements(E=E)

    ok = True
    for s in rng_seeds:
        cs = slot_friendly(s)
        lo, hi = chan.feasible_alpha_interval(cs)
        alpha = 0.5 * (lo + hi)
        res = closedform.tdma_slot_solve(cs, alpha, slot=1)
        prog, _ = programs.cc_slot_program(cs, alpha, slot=1)
        rep = subsolver.solve_convex(prog)
        closed_obj = res.y * float(np.real(cs.h[0, 0].conj() @ res.S[0] @ cs.h[0, 0]))
        ok &= rep.status == subsolver.OPTIMAL
        ok &= abs(closed_obj - rep.objective) <= 1e-5 * max(1.0, abs(closed_obj))
    record("decode-slot closed form vs embedded solver", ok)

    ok = True
    for s in rng_seeds:
        cs = slot_friendly(s)
        lo, hi = chan.feasible_alpha_interval(cs)
        ok &= closedform.concavity_probe(cs, 0.5 * (lo + hi), grid_size=64)
    record("decode-slot objective concavity probe", ok)

    ok = True
    for s in rng_seeds[:2]:
        cs = chan.generate_instance(chan.GenConfig(K=2, Nt=2, eta=2.0, seed=s))
        cs = cs.with_requirements(E=[0.3, 0.3])
        _, ev = schemes.solve_ideal(cs)
        val, _ = oracle.oracle_ideal_2user(cs, oracle.GridSpec(points_per_axis=48,
                                                               constraint_tolerance=5e-3 * 0.3))
        ok &= ev.weighted_sum_rate >= val - 0.05
    record("simultaneous scheme vs beamformer grid oracle", ok)

    cfg = ExperimentConfig(schemes=[schemes.TDMS, schemes.TDMA_D], K=2, Nt=2,
                           eta_grid=[2.0], e_grid=[0.5], num_channels=3,
                           base_seed=seed)
    a = rows_to_csv(run_sweep(cfg))
    b = rows_to_csv(run_sweep(cfg))
    record("sweep determinism (byte-identical repeat)", a == b)

    return checks


# --- CLI ----------------------------------------------------------------------

def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc


def _threads_from(args):
    env = os.environ.get("WIET_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"WIET_THREADS: not an integer: {env!r}") from exc
    return max(1, args.threads)


def cli_main(argv=None):
    """Entry point: returns the process exit code.

    0 success (including infeasible-but-solved instances), 1 verification
    failure, 2 configuration error.
    """
    parser = argparse.ArgumentParser(
        prog="wiet",
        description="Transmit design schemes for wireless information and energy transfer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance from a channel JSON file")
    p_solve.add_argument("--config", required=True, help="path to a channel-set JSON file")
    p_solve.add_argument("--scheme", default="ideal")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--threads", type=int, default=1)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep to CSV")
    p_sweep.add_argument("--config", required=True, help="path to an experiment JSON file")
    p_sweep.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_sweep.add_argument("--scheme", default=None, help="comma list overriding the config")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.add_argument("--timing", action="store_true",
                         help="emit wall time (breaks byte reproducibility)")

    p_region = sub.add_parser("region", help="rate/energy frontier table")
    p_region.add_argument("--config", required=True)
    p_region.add_argument("--mode", default="energy", choices=["energy", "weights"])
    p_region.add_argument("--seed", type=int, default=None)
    p_region.add_argument("--scheme", default=None)
    p_region.add_argument("--out", default=None)
    p_region.add_argument("--threads", type=int, default=1)

    p_verify = sub.add_parser("verify", help="run the oracle cross-check battery")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default=None)
    p_verify.add_argument("--threads", type=int, default=1)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        if args.command == "solve":
            cs = chan.channel_from_json(_load_json(args.config))
            if args.scheme not in schemes.ALL_SCHEMES:
                raise ConfigError(f"scheme: unknown scheme {args.scheme!r}")
            opts = schemes.SchemeOptions(seed=args.seed)
            try:
                strat, ev = schemes.solve_scheme(cs, args.scheme, opts)
                payload = {
                    "scheme": args.scheme,
                    "strategy": schemes.strategy_to_json(strat),
                    "evaluation": schemes.evaluation_to_json(ev),
                }
            except InstanceInfeasible as exc:
                payload = {
                    "scheme": args.scheme,
                    "strategy": None,
                    "evaluation": {
                        "rate": [0.0] * cs.K,
                        "weighted_sum_rate": 0.0,
                        "energy": [0.0] * cs.K,
                        "feasible": False,
                        "min_energy_slack": float("-inf"),
                    },
                    "reason": str(exc),
                }
            text = json.dumps(payload, indent=2, allow_nan=True, sort_keys=True)
            if args.out:
                with open(args.out, "w") as f:
                    f.write(text + "\n")
            else:
                print(text)
            return 0

        if args.command == "sweep":
            cfg = ExperimentConfig.from_json(_load_json(args.config))
            if args.seed is not None:
                cfg.base_seed = args.seed
            if args.scheme:
                cfg.schemes = args.scheme.split(",")
            cfg.threads = _threads_from(args)
            if args.timing:
                cfg.timing = True
            cfg.validate()
            rows = run_sweep(cfg, out_path=args.out)
            if not args.out:
                sys.stdout.write(rows_to_csv(rows))
            return 0

        if args.command == "region":
            cfg = ExperimentConfig.from_json(_load_json(args.config))
            if args.seed is not None:
                cfg.base_seed = args.seed
            cfg.threads = _threads_from(args)
            cfg.validate()
            _, text = rate_energy_region(cfg, mode=args.mode, out_path=args.out)
            if not args.out:
                sys.stdout.write(text)
            return 0

        if args.command == "verify":
            checks = run_verification(seed=args.seed)
            n_bad = sum(1 for _, ok in checks if not ok)
            print(f"{len(checks) - n_bad}/{len(checks)} checks passed")
            return 1 if n_bad else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
