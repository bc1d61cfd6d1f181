"""Experiment harness and command-line interface.

Each experiment writes one CSV (UTF-8, comma-separated, header row, '.'
decimal).  Rows are emitted in a deterministic order and flushed as they
complete, and every row is reproducible in isolation from (experiment,
scheme, seed, swept value, config).  Wall-clock timing is excluded from the
CSV unless requested, so repeated runs with identical flags are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import sys
import zlib
from dataclasses import dataclass, field

import numpy as np

from .channels import draw_instance
from .config import SystemConfig, load_config
from .driver import SCHEMES, InfeasibleAtInit, exhaustive_order, run_ao
from .rates import DecodingOrder
from .sca.ordering import decoding_order

EXPERIMENTS = ("convergence", "sweep_m", "sweep_si", "tradeoff", "sweep_loc",
               "sweep_users", "order_compare")

# experiment id -> (swept config field, default values)
SWEEP_PARAMS = {
    "sweep_m": ("n_elements", (10, 20, 30)),
    "sweep_si": ("rho_si", (1e-10, 1e-9, 1e-8)),
    "tradeoff": ("w_ul", (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 1e3)),
    "sweep_loc": ("ris_x", (3.0, 7.0, 11.0, 15.0, 20.0)),
    "sweep_users": ("n_users", (2, 3, 4)),
    "convergence": (None, (None,)),
    "order_compare": (None, (None,)),
}


@dataclass
class SweepSpec:
    experiment: str
    values: tuple
    schemes: tuple[str, ...]
    seeds: tuple[int, ...]
    out_path: str
    config: SystemConfig = field(default_factory=SystemConfig)
    include_timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.values or not self.seeds:
            raise ValueError("values and seeds must be non-empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")


def apply_swept(cfg: SystemConfig, experiment: str, value) -> SystemConfig:
    name, _ = SWEEP_PARAMS[experiment]
    if name is None:
        return cfg
    if name == "ris_x":
        return cfg.with_(ris_pos=(float(value), cfg.ris_pos[1], cfg.ris_pos[2]))
    if name == "n_users":
        return cfg.with_(n_ul=int(value), n_dl=int(value))
    if name == "n_elements":
        return cfg.with_(n_elements=int(value))
    return cfg.with_(**{name: float(value)})


def row_seed(experiment: str, scheme: str, seed: int, value) -> int:
    """Stable instance seed from the row coordinates."""
    key = f"{experiment}|{scheme}|{seed}|{value}".encode()
    return zlib.crc32(key) ^ (seed << 8)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def run_instance(cfg: SystemConfig, scheme: str, instance_seed: int,
                 order_rule: str = "heuristic"):
    """Channel draw, decoding order, and one full AO run."""
    cfg = cfg.with_(rng_seed=instance_seed)
    positions, chs = draw_instance(cfg, seed=instance_seed)
    if order_rule == "heuristic":
        order, _ = decoding_order(chs, cfg)
    elif order_rule == "identity":
        order = DecodingOrder.identity(cfg.n_dl)
    elif order_rule == "random":
        rng = np.random.default_rng(instance_seed + 0x0D3E)
        order = DecodingOrder.from_sequence(rng.permutation(cfg.n_dl))
    else:
        raise ValueError(f"unknown order rule {order_rule!r}")
    sol = run_ao(chs, cfg, order, scheme=scheme)
    return chs, order, sol


def run_sweep(spec: SweepSpec) -> str:
    """Execute the sweep, appending one CSV row per completed unit."""
    cfg0 = spec.config
    with open(spec.out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if spec.experiment == "convergence":
            header = ["experiment", "scheme", "seed", "iteration", "objective"]
        elif spec.experiment == "order_compare":
            header = ["experiment", "seed", "objective_heuristic",
                      "objective_random", "objective_exhaustive"]
        else:
            header = ["experiment", "scheme", "seed", "swept_name", "swept_value",
                      "ul_rate", "dl_rates", "dl_sum_rate", "objective",
                      "ao_iters", "feasible"]
        if spec.include_timing and spec.experiment not in ("order_compare",):
            header.append("wallclock_s")
        writer.writerow(header)
        fh.flush()

        if spec.experiment == "convergence":
            for scheme in spec.schemes:
                for seed in spec.seeds:
                    iseed = row_seed(spec.experiment, scheme, seed, None)
                    _, _, sol = run_instance(cfg0, scheme, iseed)
                    for it, obj in enumerate(sol.objective_trace):
                        row = [spec.experiment, scheme, seed, it, _fmt(obj)]
                        if spec.include_timing:
                            row.append(_fmt(sol.wallclock_s))
                        writer.writerow(row)
                    fh.flush()
            return spec.out_path

        if spec.experiment == "order_compare":
            for seed in spec.seeds:
                iseed = row_seed(spec.experiment, "proposed", seed, None)
                cfg = cfg0.with_(rng_seed=iseed)
                positions, chs = draw_instance(cfg, seed=iseed)
                order_h, _ = decoding_order(chs, cfg)
                obj_h = run_ao(chs, cfg, order_h).objective
                rng = np.random.default_rng(iseed + 0x0D3E)
                order_r = DecodingOrder.from_sequence(rng.permutation(cfg.n_dl))
                obj_r = run_ao(chs, cfg, order_r).objective
                _, table = exhaustive_order(chs, cfg)
                obj_e = max(table.values())
                writer.writerow([spec.experiment, seed, _fmt(obj_h), _fmt(obj_r),
                                 _fmt(obj_e)])
                fh.flush()
            return spec.out_path

        swept_name, _ = SWEEP_PARAMS[spec.experiment]
        for value in spec.values:
            cfg_v = apply_swept(cfg0, spec.experiment, value)
            for scheme in spec.schemes:
                for seed in spec.seeds:
                    iseed = row_seed(spec.experiment, scheme, seed, value)
                    try:
                        _, _, sol = run_instance(cfg_v, scheme, iseed)
                        row = [spec.experiment, scheme, seed, swept_name,
                               _fmt(value), _fmt(sol.report.ul_sum_rate),
                               ";".join(_fmt(r) for r in sol.report.dl_rate),
                               _fmt(sol.report.dl_sum_rate), _fmt(sol.objective),
                               sol.ao_iterations, sol.report.feasible]
                        if spec.include_timing:
                            row.append(_fmt(sol.wallclock_s))
                    except InfeasibleAtInit:
                        row = [spec.experiment, scheme, seed, swept_name,
                               _fmt(value), "", "", "", "", 0, False]
                        if spec.include_timing:
                            row.append("")
                    writer.writerow(row)
                    fh.flush()
    return spec.out_path


# ------------------------------------------------------------------ selftest

def selftest(verbose: bool = True) -> int:
    """Fast invariant corpus: identities, bound directions, tiny cone
    programs.  Returns the number of failed checks."""
    import numpy.random as npr

    from . import conic
    from .lifting import trace_pair_identity
    from .sca import bounds

    failures = 0

    def check(name, ok):
        nonlocal failures
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failures += 0 if ok else 1

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = (a + a.conj().T) / 2
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b = (b + b.conj().T) / 2
        lhs = trace_pair_identity(a, b)
        ref = float(np.real(np.trace(a @ b)))
        worst = max(worst, abs(lhs - ref) / max(1.0, abs(ref)))
    check(f"trace pair identity (worst rel err {worst:.2e})", worst <= 1e-10)

    s = rng.uniform(0.1, 10.0, 2000)
    i = rng.uniform(0.1, 10.0, 2000)
    s0 = rng.uniform(0.1, 10.0, 2000)
    i0 = rng.uniform(0.1, 10.0, 2000)
    lb = bounds.rate_lower_bound(s, i, s0, i0)
    direct = np.log2(1.0 + 1.0 / (s * i))
    check("rate lower bound direction", np.all(lb <= direct + 1e-12))
    touch = bounds.rate_lower_bound(s0, i0, s0, i0)
    check("rate bound touch point", np.max(np.abs(touch - np.log2(1 + 1/(s0*i0)))) <= 1e-10)

    a = rng.normal(0, 3, 2000); b2 = rng.normal(0, 3, 2000)
    a0 = rng.normal(0, 3, 2000); b0 = rng.normal(0, 3, 2000)
    check("bilinear lower bound", np.all(bounds.bilinear_lower_bound(a, b2, a0, b0) <= a*b2 + 1e-12))
    check("bilinear upper bound", np.all(bounds.bilinear_upper_bound(a, b2, a0, b0) >= a*b2 - 1e-12))

    p = conic.ConeProgram(c=[1.0], A=[[-1.0]], b=[-1.0], cones=[("nonneg", 1)])
    r = conic.solve(p)
    check("LP x>=1", r.status == "optimal" and abs(r.x[0] - 1) <= 1e-4)
    p = conic.ConeProgram(c=[1.0], A=[[-1.0], [0.0], [0.0]], b=[0.0, 3.0, 4.0],
                          cones=[("soc", 3)])
    r = conic.solve(p)
    check("SOC norm", r.status == "optimal" and abs(r.objective - 5) <= 1e-4)
    tr = conic.svec(np.eye(2))
    p = conic.ConeProgram(c=conic.svec(np.diag([1.0, 2.0])),
                          A=np.vstack([tr[None, :], -np.eye(3)]),
                          b=np.array([1.0, 0, 0, 0]),
                          cones=[("zero", 1), ("psd", 2)])
    r = conic.solve(p)
    check("SDP lambda_min", r.status == "optimal" and abs(r.objective - 1) <= 1e-4)
    return failures


# ----------------------------------------------------------------------- CLI

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starbc",
        description="STAR-RIS downlink-NOMA / uplink-backscatter experiment "
                    "harness.  Config keys mirror SystemConfig fields "
                    "(watts, meters, linear factors); dB/dBm convenience "
                    "keys: rho0_db, rho_si_db, kappa_bs_db, kappa_su_db, "
                    "sigma2_dl_dbm, sigma2_bs_dbm.")
    sub = parser.add_subparsers(dest="command", required=True)
    for exp in EXPERIMENTS:
        p = sub.add_parser(exp, help=f"run the {exp} experiment")
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file (keys mirror SystemConfig)")
        p.add_argument("--seed", type=int, default=None,
                       help="override rng_seed of the config")
        p.add_argument("--out", type=str, default=f"{exp}.csv",
                       help="output CSV path")
        p.add_argument("--schemes", type=str, default="proposed",
                       help=f"comma-separated subset of {','.join(SCHEMES)}")
        p.add_argument("--values", type=str, default=None,
                       help="comma-separated swept values")
        p.add_argument("--seeds", type=int, default=1,
                       help="number of seeds (0..n-1)")
        p.add_argument("--timing", action="store_true",
                       help="include wall-clock column (breaks byte-level "
                            "reproducibility)")
    sub.add_parser("selftest", help="run the fast invariant corpus")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1

    if args.command == "selftest":
        try:
            return 0 if selftest() == 0 else 2
        except Exception as exc:   # pragma: no cover - defensive
            print(f"selftest crashed: {exc}", file=sys.stderr)
            return 2

    try:
        cfg = load_config(args.config) if args.config else SystemConfig(
            n_ul=2, n_dl=2)   # desk-scale default: K = J = 2
        if args.seed is not None:
            cfg = cfg.with_(rng_seed=args.seed)
        _, defaults = SWEEP_PARAMS[args.command]
        if args.values is not None:
            values = tuple(float(v) for v in args.values.split(","))
        else:
            values = defaults
        spec = SweepSpec(
            experiment=args.command,
            values=values,
            schemes=tuple(args.schemes.split(",")),
            seeds=tuple(range(args.seeds)) if args.seeds > 1 else (cfg.rng_seed,),
            out_path=args.out,
            config=cfg,
            include_timing=args.timing,
        )
    except (ValueError, KeyError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1

    try:
        run_sweep(spec)
        return 0
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
