"""Acceptance suite: every criterion runs at its stated tolerance and prints
one [PASS]/[FAIL] line.  Heavy batches (alternating optimization at several
array sizes, order comparison against exhaustive search) are shared across
criteria through session fixtures."""

import time
import zlib

import numpy as np
import pytest

from starbc.bench import main as cli_main
from starbc.channels import draw_instance
from starbc.config import SystemConfig
from starbc.driver import exhaustive_order, run_ao
from starbc.lifting import (StarProfile, effective_ul_channel, lift_vector,
                            lifted_dl_matrices, lifted_ul_matrix,
                            trace_pair_identity)
from starbc.rates import DecodingOrder, ul_sum_rate, ul_to_dl_interference
from starbc.sca.bounds import (bilinear_lower_bound, bilinear_upper_bound,
                               rate_lower_bound, spectral_norm_tangent,
                               trace_product_lower_bound)
from starbc.sca.ordering import decoding_order
from starbc.sca.receive import _upsilon_si, optimal_receive, receive_quotient


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def _seed(*parts) -> int:
    return zlib.crc32("|".join(str(p) for p in parts).encode())


def _rand_profile(m, rng):
    beta = rng.uniform(0.05, 0.95, m)
    return StarProfile(
        u_t=np.sqrt(beta) * np.exp(1j * rng.uniform(0, 2 * np.pi, m)),
        u_r=np.sqrt(1 - beta) * np.exp(1j * rng.uniform(0, 2 * np.pi, m)))


def _rand_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


# --------------------------------------------------------------------------
# criterion 1: identity suite (< 10 s)
# --------------------------------------------------------------------------

def test_identity_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        a, b = _rand_hermitian(rng, n), _rand_hermitian(rng, n)
        ref = float(np.real(np.trace(a @ b)))
        worst = max(worst, abs(trace_pair_identity(a, b) - ref)
                    / max(1.0, abs(ref)))
    report("identity: trace pair (1000 Hermitian pairs)", worst <= 1e-10,
           f"worst rel err {worst:.2e}")

    from starbc.lifting import Beamformers
    worst_ul = worst_int = worst_chain = 0.0
    for trial in range(100):
        cfg = SystemConfig(n_antennas=3, n_elements=5, n_ul=2, n_dl=2,
                           rng_seed=_seed("ident", trial))
        _, chs = draw_instance(cfg)
        lrng = np.random.default_rng(trial)
        p = _rand_profile(5, lrng)
        w = lrng.standard_normal((2, 3)) + 1j * lrng.standard_normal((2, 3))
        w *= np.sqrt(cfg.p_max / np.sum(np.abs(w) ** 2))
        bf = Beamformers.from_vectors(w)
        z = lrng.standard_normal(3) + 1j * lrng.standard_normal(3)
        bf.z = z / np.linalg.norm(z)

        # uplink sum rate: magnitude form vs trace form
        num = den = 0.0
        zz = np.outer(bf.z, bf.z.conj())
        for k in range(2):
            h = effective_ul_channel(chs, p, k)
            hm = np.outer(h.conj(), h)
            for wj in bf.W:
                num += np.real(np.trace(wj @ hm.conj().T @ zz @ hm))
        for wj in bf.W:
            den += cfg.rho_si * np.real(np.trace(
                wj @ chs.h_si.conj().T @ zz @ chs.h_si))
        den += cfg.sigma2_bs * np.real(bf.z.conj() @ bf.z)
        trace_form = np.log2(1 + num / den)
        direct = ul_sum_rate(chs, p, bf, rho_si=cfg.rho_si,
                             sigma2_bs=cfg.sigma2_bs)
        worst_ul = max(worst_ul, abs(trace_form - direct) / abs(direct))

        # interference: direct form vs lifted form
        lift_t = lift_vector(p, "transmission")
        u_t_mat = np.outer(lift_t, lift_t.conj())
        u_tilde = np.concatenate([lift_vector(p, "reflection"), [1.0]])
        u_r_mat = np.outer(u_tilde, u_tilde.conj())
        w_sum = bf.W.sum(axis=0)
        for j in range(2):
            lifted = 0.0
            for k in range(2):
                _, q_kj = lifted_dl_matrices(chs, j, k)
                q_k = lifted_ul_matrix(chs, k)
                lifted += np.real(np.trace(np.outer(q_kj, q_kj.conj()) @ u_t_mat)) \
                    * np.real(np.trace(u_r_mat @ q_k @ w_sum @ q_k.conj().T))
            direct = ul_to_dl_interference(chs, p, bf, j)
            worst_int = max(worst_int, abs(lifted - direct) / max(direct, 1e-300))

        # lifted quadratic chain
        for k in range(2):
            q = lifted_ul_matrix(chs, k)
            lifted = np.real(np.trace(u_r_mat @ q @ zz @ q.conj().T))
            direct = abs(effective_ul_channel(chs, p, k) @ bf.z) ** 2
            worst_chain = max(worst_chain, abs(lifted - direct) / direct)
    report("identity: UL rate trace form == magnitude form (100 instances)",
           worst_ul <= 1e-8, f"worst rel err {worst_ul:.2e}")
    report("identity: interference direct == lifted (100 instances)",
           worst_int <= 1e-8, f"worst rel err {worst_int:.2e}")
    report("identity: lifted quadratic chain (100 instances)",
           worst_chain <= 1e-8, f"worst rel err {worst_chain:.2e}")
    report("identity suite runtime < 10 s", time.perf_counter() - t0 < 10.0,
           f"{time.perf_counter() - t0:.1f} s")


# --------------------------------------------------------------------------
# criterion 2: bound suite (< 30 s)
# --------------------------------------------------------------------------

def test_bound_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    n_samples = 10000

    s, i, s0, i0 = (rng.uniform(1e-3, 100, n_samples) for _ in range(4))
    touch = np.max(np.abs(rate_lower_bound(s0, i0, s0, i0)
                          - np.log2(1 + 1 / (s0 * i0))))
    viol = np.sum(rate_lower_bound(s, i, s0, i0) > np.log2(1 + 1 / (s * i)) + 1e-12)
    report("bounds: rate template touch (Eqs. 21/25/42)", touch <= 1e-10,
           f"max abs err {touch:.2e}")
    report("bounds: rate template direction (10^4 samples)", viol == 0,
           f"{viol} violations")

    a, b, a0, b0 = (rng.normal(0, 10, n_samples) for _ in range(4))
    lb = bilinear_lower_bound(a, b, a0, b0)
    ub = bilinear_upper_bound(a, b, a0, b0)
    touch_lb = np.max(np.abs(bilinear_lower_bound(a, b, a, b) - a * b))
    touch_ub = np.max(np.abs(bilinear_upper_bound(a, b, a, b) - a * b))
    report("bounds: bilinear touch points (Eqs. 36/43)",
           max(touch_lb, touch_ub) <= 1e-10,
           f"max {max(touch_lb, touch_ub):.2e}")
    report("bounds: bilinear directions (10^4 samples)",
           np.all(lb <= a * b + 1e-10) and np.all(ub >= a * b - 1e-10))

    worst_touch = 0.0
    viols = 0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        u = _rand_hermitian(rng, n)
        u = u @ u.conj().T
        u0 = _rand_hermitian(rng, n)
        u0 = u0 @ u0.conj().T
        tangent = spectral_norm_tangent(u, u0)
        nuc = float(np.sum(np.abs(np.linalg.eigvalsh(u))))
        spec = float(np.linalg.norm(u, 2))
        if nuc - tangent < nuc - spec - 1e-10:
            viols += 1
        worst_touch = max(worst_touch, abs(spectral_norm_tangent(u0, u0) -
                                           np.linalg.norm(u0, 2)) / max(1, spec))
    report("bounds: penalty linearization (Eq. 47, 10^3 pairs)",
           viols == 0 and worst_touch <= 1e-10,
           f"{viols} violations, touch {worst_touch:.2e}")

    worst_touch = 0.0
    viols = 0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        a_m, b_m = _rand_hermitian(rng, n), _rand_hermitian(rng, n)
        a0_m, b0_m = _rand_hermitian(rng, n), _rand_hermitian(rng, n)
        ref = float(np.real(np.trace(a_m @ b_m)))
        if trace_product_lower_bound(a_m, b_m, a0_m, b0_m) > ref + 1e-9:
            viols += 1
        worst_touch = max(worst_touch,
                          abs(trace_product_lower_bound(a_m, b_m, a_m, b_m) - ref)
                          / max(1.0, abs(ref)))
    report("bounds: combined-gain expansion (Eqs. 53-54, 10^3 pairs)",
           viols == 0 and worst_touch <= 1e-10,
           f"{viols} violations, touch {worst_touch:.2e}")
    report("bound suite runtime < 30 s", time.perf_counter() - t0 < 30.0,
           f"{time.perf_counter() - t0:.1f} s")


# --------------------------------------------------------------------------
# criterion 3: conic solver corpus (< 60 s)
# --------------------------------------------------------------------------

def test_conic_corpus():
    from starbc.conic import solve
    from test_conic import certified_corpus

    t0 = time.perf_counter()
    worst_obj = worst_res = 0.0
    for name, prog, opt in certified_corpus():
        res = solve(prog, tol=1e-6, max_iter=50000)
        assert res.status == "optimal", name
        worst_obj = max(worst_obj, abs(res.objective - opt))
        worst_res = max(worst_res, res.max_residual)
    dt = time.perf_counter() - t0
    report("conic: 20 certified instances, objective error <= 1e-4",
           worst_obj <= 1e-4, f"worst {worst_obj:.2e}")
    report("conic: residuals <= 1e-6", worst_res <= 1e-6, f"worst {worst_res:.2e}")
    report("conic corpus runtime < 60 s", dt < 60.0, f"{dt:.1f} s")


# --------------------------------------------------------------------------
# criterion 4: receive beamformer optimality
# --------------------------------------------------------------------------

def test_receive_beamformer_optimality():
    from starbc.lifting import Beamformers

    rng = np.random.default_rng(404)
    worst_margin = np.inf
    for trial in range(50):
        k = int(rng.integers(1, 5))
        j = int(rng.integers(1, 5))
        cfg = SystemConfig(n_antennas=3, n_elements=6, n_ul=k, n_dl=j,
                           rng_seed=_seed("recv", trial))
        _, chs = draw_instance(cfg)
        p = _rand_profile(6, rng)
        w = rng.standard_normal((j, 3)) + 1j * rng.standard_normal((j, 3))
        w *= np.sqrt(cfg.p_max / np.sum(np.abs(w) ** 2))
        bf = Beamformers.from_vectors(w)
        z_star = optimal_receive(chs, p, bf, cfg.sigma2_bs)
        best = receive_quotient(chs, p, bf, z_star, cfg.sigma2_bs)

        ups, si = _upsilon_si(chs, p, bf)
        zs = rng.standard_normal((10000, 3)) + 1j * rng.standard_normal((10000, 3))
        zs /= np.linalg.norm(zs, axis=1, keepdims=True)
        num = np.sum(np.abs(zs.conj() @ ups) ** 2, axis=1)
        den = np.real(np.einsum("bi,ij,bj->b", zs.conj(), si, zs)) \
            + cfg.sigma2_bs * np.sum(np.abs(zs) ** 2, axis=1)
        margin = best - np.max(num / den)
        worst_margin = min(worst_margin, margin / max(best, 1e-300))
    report("receive combiner beats 10^4 random combiners on 50 instances",
           worst_margin >= -1e-9, f"worst relative margin {worst_margin:.2e}")


# --------------------------------------------------------------------------
# heavy shared batches
# --------------------------------------------------------------------------

@pytest.fixture(scope="session")
def ao_batch():
    runs = []
    for m in (8, 20):
        for s in range(5):
            cfg = SystemConfig(n_antennas=3, n_elements=m, n_ul=2, n_dl=2,
                               rng_seed=_seed("ao", m, s))
            _, chs = draw_instance(cfg)
            order, _ = decoding_order(chs, cfg)
            t0 = time.perf_counter()
            sol = run_ao(chs, cfg, order)
            runs.append((m, s, sol, time.perf_counter() - t0))
    return runs


@pytest.fixture(scope="session")
def trend_batch():
    """Shared per-seed instances for every trend comparison."""
    out = {"m": {10: [], 20: [], 30: []}, "baseline": {}, "si": [],
           "tradeoff": [], "solutions": []}
    for scheme in ("cr_noma", "sr_noma_sdma", "sr_zf_noma"):
        out["baseline"][scheme] = []
    for s in range(10):
        for m in (10, 20, 30):
            cfg = SystemConfig(n_antennas=3, n_elements=m, n_ul=2, n_dl=2,
                               rng_seed=_seed("trend", m, s))
            _, chs = draw_instance(cfg)
            order, _ = decoding_order(chs, cfg)
            sol = run_ao(chs, cfg, order)
            out["m"][m].append(sol.objective)
            out["solutions"].append(sol)
            if m == 20:
                for scheme in out["baseline"]:
                    b = run_ao(chs, cfg, order, scheme=scheme)
                    out["baseline"][scheme].append(b.objective)
                    out["solutions"].append(b)
                hi = run_ao(chs, cfg.with_(rho_si=1e-8), order)
                out["si"].append((hi.objective, sol.objective))
                out["solutions"].append(hi)
                dl_only = run_ao(chs, cfg.with_(w_ul=0.0), order)
                out["tradeoff"].append((dl_only.report.dl_sum_rate,
                                        sol.report.dl_sum_rate))
                out["solutions"].append(dl_only)
    return out


# --------------------------------------------------------------------------
# criterion 5: AO convergence
# --------------------------------------------------------------------------

def test_ao_convergence(ao_batch):
    worst_step = 0.0
    worst_iters = 0
    worst_time = 0.0
    for m, s, sol, dt in ao_batch:
        trace = np.asarray(sol.block_trace)
        steps = np.diff(trace) / np.maximum(1.0, np.abs(trace[:-1]))
        worst_step = min(np.min(steps), worst_step) if steps.size else worst_step
        worst_iters = max(worst_iters, sol.ao_iterations)
        worst_time = max(worst_time, dt)
        tail = abs(sol.objective_trace[-1] - sol.objective_trace[-2]) \
            / max(1.0, abs(sol.objective_trace[-2]))
        assert tail < 1e-3 or sol.ao_iterations < 50
    report("AO: objective non-decreasing per step (tol 1e-4, 10 instances)",
           worst_step >= -1e-4, f"worst step {worst_step:.2e}")
    report("AO: converged within 50 outer iterations",
           worst_iters <= 50, f"max iterations {worst_iters}")
    report("AO: <= 5 minutes per instance", worst_time <= 300.0,
           f"slowest {worst_time:.0f} s")


# --------------------------------------------------------------------------
# criterion 6: rank-one guarantees
# --------------------------------------------------------------------------

def test_rank_one_guarantees(ao_batch, trend_batch):
    sols = [sol for _, _, sol, _ in ao_batch] + trend_batch["solutions"]
    worst_w = max(float(np.max(s.w_eig_ratios)) for s in sols
                  if s.w_eig_ratios is not None)
    worst_v = max(s.passive_violation for s in sols)
    report("rank-one: transmit eigenvalue ratios <= 1e-5 on all runs",
           worst_w <= 1e-5, f"worst {worst_w:.2e} over {len(sols)} runs")
    report("rank-one: passive violation <= 1e-7 at termination",
           worst_v <= 1e-7, f"worst {worst_v:.2e}")


# --------------------------------------------------------------------------
# criterion 7: trend reproduction
# --------------------------------------------------------------------------

def test_trend_reproduction(trend_batch):
    mean_m = {m: float(np.mean(v)) for m, v in trend_batch["m"].items()}
    prop20 = mean_m[20]
    for scheme, vals in trend_batch["baseline"].items():
        ok = prop20 >= float(np.mean(vals))
        report(f"trend: proposed >= {scheme} at M=20",
               ok, f"{prop20:.3f} vs {np.mean(vals):.3f}")
    report("trend: mean objective increasing over M in {10, 20, 30}",
           mean_m[10] <= mean_m[20] <= mean_m[30],
           f"{mean_m[10]:.3f} / {mean_m[20]:.3f} / {mean_m[30]:.3f}")
    hi = float(np.mean([a for a, _ in trend_batch["si"]]))
    lo = float(np.mean([b for _, b in trend_batch["si"]]))
    report("trend: stronger residual SI degrades the objective",
           hi <= lo, f"rho=1e-8: {hi:.3f} vs rho=1e-10: {lo:.3f}")
    per_seed = [a >= b - 1e-6 for a, b in trend_batch["tradeoff"]]
    report("trend: DL rate at w_ul=0 >= DL rate at w_ul=1 (per seed)",
           all(per_seed), f"{sum(per_seed)}/10 seeds")


# --------------------------------------------------------------------------
# criterion 8: decoding-order quality
# --------------------------------------------------------------------------

def test_decoding_order_quality():
    rng = np.random.default_rng(808)
    h_objs, r_objs, e_objs = [], [], []
    for s in range(10):
        cfg = SystemConfig(n_antennas=3, n_elements=8, n_ul=2, n_dl=3,
                           rng_seed=_seed("order", s))
        _, chs = draw_instance(cfg)
        order_h, _ = decoding_order(chs, cfg)
        h_objs.append(run_ao(chs, cfg, order_h).objective)
        order_r = DecodingOrder.from_sequence(rng.permutation(3))
        r_objs.append(run_ao(chs, cfg, order_r).objective)
        _, table = exhaustive_order(chs, cfg)
        e_objs.append(max(table.values()))
    h, r, e = (float(np.mean(v)) for v in (h_objs, r_objs, e_objs))
    report("order: heuristic >= 95% of exhaustive mean (J=3, K=2, 10 seeds)",
           h >= 0.95 * e, f"heuristic {h:.3f} vs exhaustive {e:.3f}")
    report("order: heuristic >= random-order mean", h >= r,
           f"heuristic {h:.3f} vs random {r:.3f}")


# --------------------------------------------------------------------------
# criterion 9: CLI determinism
# --------------------------------------------------------------------------

def test_cli_determinism(tmp_path):
    import json
    import os
    cfg_path = os.path.join(tmp_path, "cfg.json")
    json.dump({"n_antennas": 2, "n_elements": 4, "n_ul": 1, "n_dl": 1},
              open(cfg_path, "w"))
    outs = []
    for name in ("a.csv", "b.csv"):
        out = os.path.join(tmp_path, name)
        rc = cli_main(["sweep_m", "--config", cfg_path, "--values", "4,6",
                       "--out", out, "--seeds", "2"])
        assert rc == 0
        outs.append(open(out, "rb").read())
    report("CLI: repeated invocation produces byte-identical CSV",
           outs[0] == outs[1], f"{len(outs[0])} bytes")
