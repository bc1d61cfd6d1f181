import numpy as np
import pytest

from starbc.channels import ChannelSet, draw_instance
from starbc.config import SystemConfig
from starbc.lifting import (Beamformers, LiftedStar, StarProfile,
                            effective_dl_channel)
from starbc.rates import DecodingOrder, evaluate_solution
from starbc.sca.ordering import decoding_order
from starbc.sca.passive import solve_passive
from starbc.sca.receive import optimal_receive, receive_quotient, zf_combiners
from starbc.sca.transmit import WarmPointInfeasible, solve_transmit


def _instance(seed=0, m=6, n=3, k=2, j=2, **kw):
    cfg = SystemConfig(n_antennas=n, n_elements=m, n_ul=k, n_dl=j,
                       rng_seed=seed, **kw)
    _, chs = draw_instance(cfg)
    return cfg, chs


def _random_profile(m, rng):
    beta = rng.uniform(0.05, 0.95, m)
    return StarProfile(
        u_t=np.sqrt(beta) * np.exp(1j * rng.uniform(0, 2 * np.pi, m)),
        u_r=np.sqrt(1 - beta) * np.exp(1j * rng.uniform(0, 2 * np.pi, m)))


def _random_beams(cfg, rng):
    w = rng.standard_normal((cfg.n_dl, cfg.n_antennas)) \
        + 1j * rng.standard_normal((cfg.n_dl, cfg.n_antennas))
    w *= np.sqrt(cfg.p_max / np.sum(np.abs(w) ** 2))
    return Beamformers.from_vectors(w)


def _feasible_start(chs, cfg, order, dl_mode="noma"):
    from starbc.driver import initialize
    scheme = "proposed" if dl_mode == "noma" else "sr_noma_sdma"
    bf, lifted, profile = initialize(chs, cfg, order, scheme)
    return bf, lifted, profile


# ------------------------------------------------------------ receive combiner

def test_receive_single_dl_user_matches_closed_form():
    # J=1: Upsilon has one column and z* is parallel to lam^{-1} Upsilon
    cfg, chs = _instance(seed=1, j=1, k=2)
    rng = np.random.default_rng(2)
    p = _random_profile(cfg.n_elements, rng)
    bf = _random_beams(cfg, rng)
    z = optimal_receive(chs, p, bf, cfg.sigma2_bs)
    from starbc.lifting import effective_ul_channel
    ups = sum(np.outer(effective_ul_channel(chs, p, k).conj(),
                       effective_ul_channel(chs, p, k) @ bf.w.T)
              for k in range(cfg.n_ul))
    si = chs.h_si @ bf.W.sum(axis=0) @ chs.h_si.conj().T
    # lam^{-1} Upsilon evaluated through the SI spectrum (adding sigma^2 to
    # the pre-summed matrix would lose the noise floor to rounding)
    d, v = np.linalg.eigh(si)
    d = np.maximum(d, 0.0) + cfg.sigma2_bs
    ref = (v / d) @ (v.conj().T @ ups[:, 0])
    cos = abs(ref.conj() @ z) / (np.linalg.norm(ref) * np.linalg.norm(z))
    assert cos == pytest.approx(1.0, abs=1e-8)


def test_receive_no_si_reduces_to_principal_eigvec():
    cfg, chs = _instance(seed=3)
    chs.h_si[:] = 0
    rng = np.random.default_rng(4)
    p = _random_profile(cfg.n_elements, rng)
    bf = _random_beams(cfg, rng)
    z = optimal_receive(chs, p, bf, sigma2_bs=1.0)
    from starbc.lifting import effective_ul_channel
    ups = sum(np.outer(effective_ul_channel(chs, p, k).conj(),
                       effective_ul_channel(chs, p, k) @ bf.w.T)
              for k in range(cfg.n_ul))
    evec = np.linalg.eigh(ups @ ups.conj().T)[1][:, -1]
    cos = abs(evec.conj() @ z)
    assert cos == pytest.approx(1.0, abs=1e-9)


def test_receive_beats_random_search():
    for seed in range(5):
        cfg, chs = _instance(seed=20 + seed, k=2, j=2)
        rng = np.random.default_rng(seed)
        p = _random_profile(cfg.n_elements, rng)
        bf = _random_beams(cfg, rng)
        z_star = optimal_receive(chs, p, bf, cfg.sigma2_bs)
        best = receive_quotient(chs, p, bf, z_star, cfg.sigma2_bs)
        zr = rng.standard_normal((10000, cfg.n_antennas)) \
            + 1j * rng.standard_normal((10000, cfg.n_antennas))
        for z in zr:
            assert best >= receive_quotient(chs, p, bf, z, cfg.sigma2_bs) - 1e-9 * best


def test_zf_combiners_null_leakage():
    cfg, chs = _instance(seed=5, k=2, n=3)
    rng = np.random.default_rng(6)
    p = _random_profile(cfg.n_elements, rng)
    z = zf_combiners(chs, p)
    from starbc.lifting import effective_ul_channel
    h = np.array([effective_ul_channel(chs, p, k) for k in range(2)])
    for k in range(2):
        sig = abs(h[k] @ z[k]) ** 2
        for kk in range(2):
            if kk != k:
                assert abs(h[kk] @ z[k]) ** 2 <= 1e-8 * sig


# ---------------------------------------------------------- transmit SDP/SCA

def test_transmit_uses_full_power_without_rate_target():
    cfg, chs = _instance(seed=7, j=1, k=1, m=4)
    cfg = cfg.with_(r_bar=0.0)
    order = DecodingOrder.identity(1)
    bf, _, profile = _feasible_start(chs, cfg, order)
    bf2, info = solve_transmit(chs, profile, bf.z, order, cfg, bf)
    assert bf2.total_power == pytest.approx(cfg.p_max, rel=1e-3)
    # scaling oracle: shrinking the returned covariance lowers the objective
    rep = evaluate_solution(chs, profile, bf2, bf.z, order, cfg)
    for c in (0.5, 0.9):
        shrunk = Beamformers(W=c * bf2.W, w=np.sqrt(c) * bf2.w, z=bf2.z)
        rep_c = evaluate_solution(chs, profile, shrunk, bf2.z, order, cfg)
        assert rep_c.weighted_objective < rep.weighted_objective


def test_transmit_first_pass_ascends_from_warm_point():
    cfg, chs = _instance(seed=8)
    order = DecodingOrder.identity(cfg.n_dl)
    bf, _, profile = _feasible_start(chs, cfg, order)
    warm_obj = evaluate_solution(chs, profile, bf, bf.z, order, cfg).weighted_objective
    bf2, info = solve_transmit(chs, profile, bf.z, order, cfg, bf, max_passes=1)
    assert info.objective_trace[0] >= warm_obj - 1e-6 * max(1.0, abs(warm_obj))


def test_transmit_single_user_mrt_oracle():
    # N=2, J=1, K=0: optimal covariance is p_max * v v^H along the channel
    cfg = SystemConfig(n_antennas=2, n_elements=4, n_ul=1, n_dl=1,
                       rng_seed=9, r_bar=0.0)
    _, chs_full = draw_instance(cfg)
    chs = ChannelSet(g=np.zeros((0, 2), complex), f_bs=chs_full.f_bs,
                     h_su_ul=np.zeros((0, 4), complex),
                     h_su_dl=chs_full.h_su_dl, h_si=chs_full.h_si)
    order = DecodingOrder.identity(1)
    profile = StarProfile.even_split(4)
    h = effective_dl_channel(chs, profile, 0)
    v = h.conj() / np.linalg.norm(h)
    bf = Beamformers.from_vectors(np.sqrt(cfg.p_max)[None] * v[None, :] * 0.9)
    bf.z = np.array([1.0, 0.0], dtype=complex)
    bf2, _ = solve_transmit(chs, profile, bf.z, order, cfg, bf)
    w_ref = cfg.p_max * np.outer(v, v.conj())
    assert np.linalg.norm(bf2.W[0] - w_ref) / np.linalg.norm(w_ref) <= 1e-3


def test_transmit_rejects_infeasible_warm_point():
    cfg, chs = _instance(seed=10)
    order = DecodingOrder.identity(cfg.n_dl)
    rng = np.random.default_rng(11)
    w = rng.standard_normal((cfg.n_dl, 3)) + 1j * rng.standard_normal((cfg.n_dl, 3))
    w *= np.sqrt(10 * cfg.p_max / np.sum(np.abs(w) ** 2))  # power violation
    bf = Beamformers.from_vectors(w)
    bf.z = np.ones(3, complex) / np.sqrt(3)
    profile = StarProfile.even_split(cfg.n_elements)
    with pytest.raises(WarmPointInfeasible):
        solve_transmit(chs, profile, bf.z, order, cfg, bf)


def test_transmit_sca_objective_nondecreasing():
    cfg, chs = _instance(seed=12)
    order = DecodingOrder.identity(cfg.n_dl)
    bf, _, profile = _feasible_start(chs, cfg, order)
    _, info = solve_transmit(chs, profile, bf.z, order, cfg, bf)
    trace = np.asarray(info.objective_trace)
    assert np.all(np.diff(trace) >= -1e-5 * np.maximum(1.0, np.abs(trace[:-1])))


def test_transmit_rank_one_claim():
    for seed in (13, 14, 15):
        cfg, chs = _instance(seed=seed)
        order = DecodingOrder.identity(cfg.n_dl)
        bf, _, profile = _feasible_start(chs, cfg, order)
        _, info = solve_transmit(chs, profile, bf.z, order, cfg, bf)
        assert np.all(info.eig_ratios <= 1e-5)


# ------------------------------------------------------------- passive / SDR

def test_passive_warm_rank_one_has_zero_penalty():
    rng = np.random.default_rng(16)
    p = _random_profile(6, rng)
    lifted = LiftedStar.from_profile(p)
    assert lifted.rank_one_violation() <= 1e-9


def test_passive_invariants_at_termination():
    cfg, chs = _instance(seed=17, m=6)
    order = DecodingOrder.identity(cfg.n_dl)
    bf, lifted, profile = _feasible_start(chs, cfg, order)
    bf2, _ = solve_transmit(chs, profile, bf.z, order, cfg, bf)
    res = solve_passive(chs, bf2, bf.z, order, cfg, lifted)
    assert res.info.violation <= cfg.eps_violation
    assert res.lifted.diag_violation() <= 1e-6
    assert res.profile.energy_violation() <= 1e-9
    # extracted profile reproduces the lifted matrices
    relift = LiftedStar.from_profile(res.profile)
    err = np.linalg.norm(relift.u_t_mat - res.lifted.u_t_mat, "fro") \
        / max(np.linalg.norm(res.lifted.u_t_mat, "fro"), 1e-300)
    assert err <= 1e-3


def test_passive_prefers_reflection_for_ul_only_objective():
    # with no DL weight and one backscatter user, reflection should carry
    # at least as much average energy as transmission
    cfg, chs = _instance(seed=18, m=6, k=1, j=1, w_dl=0.0, r_bar=0.0)
    order = DecodingOrder.identity(1)
    bf, lifted, profile = _feasible_start(chs, cfg, order)
    bf2, _ = solve_transmit(chs, profile, bf.z, order, cfg, bf)
    res = solve_passive(chs, bf2, bf.z, order, cfg, lifted)
    mean_r = np.mean(np.abs(res.profile.u_r) ** 2)
    mean_t = np.mean(np.abs(res.profile.u_t) ** 2)
    assert mean_r >= mean_t - 1e-6


def test_passive_masked_amplitudes():
    from starbc.driver import cr_masks, initialize
    cfg, chs = _instance(seed=19, m=6)
    order = DecodingOrder.identity(cfg.n_dl)
    bf, lifted, profile = initialize(chs, cfg, order, scheme="cr_noma")
    bf2, _ = solve_transmit(chs, profile, bf.z, order, cfg, bf)
    masks = cr_masks(cfg.n_elements)
    res = solve_passive(chs, bf2, bf.z, order, cfg, lifted, masks=masks)
    assert np.allclose(np.abs(res.profile.u_t) ** 2, masks[0], atol=1e-6)
    assert np.allclose(np.abs(res.profile.u_r) ** 2, masks[1], atol=1e-6)


# ------------------------------------------------------------ decoding order

def test_order_single_user_identity():
    cfg, chs = _instance(seed=20, j=1, k=1, m=4)
    order, _ = decoding_order(chs, cfg)
    assert list(order.omega) == [0]


def test_order_scaled_channel_weaker_first():
    cfg, chs = _instance(seed=21, j=2, k=2, m=4)
    chs.h_su_dl[1] *= 10.0   # user 1 has the much stronger cascade
    order, info = decoding_order(chs, cfg)
    assert order.omega[0] < order.omega[1]
    assert info.gains[1] >= info.gains[0]


def test_order_rank_one_claims():
    # every returned W_j is numerically rank <= 1 (zero-power covariances
    # count as rank 0, which satisfies the claim trivially)
    for seed in range(4):
        cfg, chs = _instance(seed=30 + seed, j=2, k=2, m=4)
        _, info = decoding_order(chs, cfg)
        assert np.all(info.w_eig_ratios <= 1e-5)
