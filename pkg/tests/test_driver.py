import numpy as np
import pytest

from starbc.channels import draw_instance
from starbc.config import SystemConfig
from starbc.driver import (InfeasibleAtInit, Solution, cr_masks,
                           exhaustive_order, initialize, run_ao, run_baseline)
from starbc.rates import DecodingOrder, evaluate_solution


def _instance(seed=0, m=4, n=3, k=2, j=2, **kw):
    cfg = SystemConfig(n_antennas=n, n_elements=m, n_ul=k, n_dl=j,
                       rng_seed=seed, **kw)
    _, chs = draw_instance(cfg)
    return cfg, chs


def test_initialize_feasible_and_half_split():
    cfg, chs = _instance(seed=1)
    order = DecodingOrder.identity(cfg.n_dl)
    bf, lifted, profile = initialize(chs, cfg, order)
    # energy conservation is exact at the half split
    assert profile.energy_violation() <= 1e-12
    assert np.allclose(np.abs(profile.u_t) ** 2, 0.5)
    assert bf.total_power <= cfg.p_max + 1e-9
    rep = evaluate_solution(chs, profile, bf, bf.z, order, cfg)
    for key in ("power", "sic_power_order", "target_rate"):
        assert rep.flags[key].passed, key


def test_initialize_single_user_trivial():
    cfg, chs = _instance(seed=2, j=1, k=1)
    bf, _, profile = initialize(chs, cfg, DecodingOrder.identity(1))
    assert bf.total_power == pytest.approx(cfg.p_max, rel=1e-9)


def test_initialize_infeasible_raises():
    # an absurd target rate cannot be met by any initialization
    cfg, chs = _instance(seed=3, r_bar=60.0)
    with pytest.raises(InfeasibleAtInit):
        initialize(chs, cfg, DecodingOrder.identity(cfg.n_dl))


def test_run_ao_monotone_and_feasible():
    cfg, chs = _instance(seed=4, m=6)
    sol = run_ao(chs, cfg, DecodingOrder.identity(cfg.n_dl))
    trace = np.asarray(sol.block_trace)
    assert np.all(np.diff(trace) >= -1e-4 * np.maximum(1.0, np.abs(trace[:-1])))
    assert sol.objective_trace[0] <= sol.objective + 1e-9
    assert sol.report.feasible
    assert sol.ao_iterations <= cfg.max_ao_iters


def test_run_ao_fixed_point():
    # a converged solution does not move by more than the threshold when the
    # AO loop is applied once more
    cfg, chs = _instance(seed=5, m=4)
    order = DecodingOrder.identity(cfg.n_dl)
    sol = run_ao(chs, cfg, order)
    cfg2 = cfg.with_(max_ao_iters=1)
    from starbc.driver import _scheme_modes
    from starbc.sca.transmit import solve_transmit
    bf2, _ = solve_transmit(chs, sol.profile, sol.beamformers.z, order, cfg2,
                            sol.beamformers)
    rep = evaluate_solution(chs, sol.profile, bf2, sol.beamformers.z, order, cfg)
    frac = abs(rep.weighted_objective - sol.objective) / max(1.0, abs(sol.objective))
    assert frac < 10 * cfg.eps_converge


def test_baseline_cr_masks_exact():
    cfg, chs = _instance(seed=6, m=6)
    sol = run_baseline("cr_noma", chs, cfg, DecodingOrder.identity(cfg.n_dl))
    mask_t, mask_r = cr_masks(cfg.n_elements)
    assert np.allclose(np.abs(sol.profile.u_t) ** 2, mask_t, atol=1e-6)
    assert np.allclose(np.abs(sol.profile.u_r) ** 2, mask_r, atol=1e-6)
    assert sol.report.feasible


def test_baseline_zf_nulling_and_metadata():
    cfg, chs = _instance(seed=7, k=2, n=3)
    sol = run_baseline("sr_zf_noma", chs, cfg, DecodingOrder.identity(cfg.n_dl))
    assert sol.beamformers.z_multi is not None
    from starbc.lifting import effective_ul_channel
    h = np.array([effective_ul_channel(chs, sol.profile, k) for k in range(2)])
    for k in range(2):
        sig = abs(h[k] @ sol.beamformers.z_multi[k]) ** 2
        for kk in range(2):
            if kk != k:
                assert abs(h[kk] @ sol.beamformers.z_multi[k]) ** 2 <= 1e-8 * sig
    assert "zf_least_squares" not in sol.notes

    cfg4, chs4 = _instance(seed=8, k=4, n=3, j=1)
    sol4 = run_baseline("sr_zf_noma", chs4, cfg4, DecodingOrder.identity(1))
    assert "zf_least_squares" in sol4.notes


def test_baseline_sdma_equals_proposed_single_user():
    cfg, chs = _instance(seed=9, j=1, k=1, m=4)
    order = DecodingOrder.identity(1)
    a = run_ao(chs, cfg, order, scheme="proposed")
    b = run_baseline("sr_noma_sdma", chs, cfg, order)
    assert b.objective == pytest.approx(a.objective, rel=1e-6)


def test_unknown_scheme_rejected():
    cfg, chs = _instance(seed=10)
    with pytest.raises(ValueError):
        run_baseline("nope", chs, cfg, DecodingOrder.identity(cfg.n_dl))


def test_exhaustive_order_single_user():
    cfg, chs = _instance(seed=11, j=1, k=1, m=4)
    best, table = exhaustive_order(chs, cfg)
    assert len(table) == 1
    assert list(best.omega) == [0]


def test_exhaustive_order_contains_heuristic():
    cfg, chs = _instance(seed=12, j=2, k=1, m=4)
    from starbc.driver import heuristic_order
    order = heuristic_order(chs, cfg)
    obj_h = run_ao(chs, cfg, order).objective
    best, table = exhaustive_order(chs, cfg)
    lo, hi = min(table.values()), max(table.values())
    assert lo - 1e-9 <= obj_h <= hi + 1e-9
    assert len(table) == 2


def test_exhaustive_order_guard():
    cfg, chs = _instance(seed=13, j=2)
    chs.h_su_dl = np.vstack([chs.h_su_dl] * 3)[:5]
    with pytest.raises(ValueError):
        exhaustive_order(chs, cfg)


def test_tradeoff_direction_dl_rate():
    # removing the uplink from the objective cannot reduce the DL sum rate
    cfg, chs = _instance(seed=14, m=4)
    order = DecodingOrder.identity(cfg.n_dl)
    full = run_ao(chs, cfg, order)
    dl_only = run_ao(chs, cfg.with_(w_ul=0.0), order)
    assert dl_only.report.dl_sum_rate >= full.report.dl_sum_rate - 1e-6
