from __future__ import annotations

import numpy as np
import pytest

from taxgrasp.reward import (ADDITIVE, MULTIPLICATIVE, RewardBreakdown,
                             RewardConfig, approach_coefficients, composite,
                             hand_reward, mimic, mimic_grad_q, object_reward,
                             object_stability, penalty)


def cfg(**kw):
    return RewardConfig(**kw)


# -- hand reward --------------------------------------------------------------


def test_hand_reward_max_is_two():
    c = cfg()
    mask = np.array([True, True, False])
    r = hand_reward(np.zeros(3), np.zeros(3), mask, c)
    assert r == pytest.approx(2.0, abs=1e-12)


def test_hand_reward_log2_fixture():
    # frozen from the scalar oracle run: exp(-ln 2) + 1 = 1.5
    c = cfg(gamma_r=1.0)
    mask = np.array([True, False])
    r = hand_reward(np.array([np.log(2.0), 0, 0]), np.zeros(2), mask, c)
    assert r == pytest.approx(1.5, abs=1e-12)


def test_hand_reward_monotone_in_link_distance():
    c = cfg()
    mask = np.array([True, True])
    prev = hand_reward(np.zeros(3), np.array([0.0, 0.0]), mask, c)
    for d in np.linspace(0.01, 0.3, 12):
        cur = hand_reward(np.zeros(3), np.array([d, 0.0]), mask, c)
        assert cur < prev
        prev = cur


def test_hand_reward_requires_active_link():
    with pytest.raises(ValueError):
        hand_reward(np.zeros(3), np.zeros(3), np.zeros(3, dtype=bool), cfg())


def test_hand_reward_bounded():
    rng = np.random.default_rng(0)
    c = cfg()
    for _ in range(200):
        mask = rng.random(5) < 0.5
        if not mask.any():
            mask[0] = True
        r = hand_reward(rng.normal(size=3), np.abs(rng.normal(size=5)), mask, c)
        assert 0.0 < r <= 2.0


# -- approach coefficients ----------------------------------------------------


def test_approach_all_aligned_gives_one():
    d = np.array([1.0, 0, 0])
    a_dir, a_vel, a_act, a_h = approach_coefficients(
        d, d, np.zeros(3), np.zeros(3), np.zeros(27), np.zeros(27), cfg())
    assert (a_dir, a_vel, a_act, a_h) == (1.0, 1.0, 1.0, 1.0)


def test_approach_dir_unit_norm_fixture():
    # frozen from the scalar oracle run: exp(-1) = 0.36787944117144233
    c = cfg(gamma_dir=1.0)
    d1 = np.array([1.0, 0, 0])
    d2 = np.array([0.5, np.sqrt(3) / 2, 0])  # |d1 - d2| = 1
    a_dir, *_ = approach_coefficients(d1, d2, np.zeros(3), np.zeros(3),
                                      np.zeros(4), np.zeros(4), c)
    assert a_dir == pytest.approx(0.36787944117144233, abs=1e-12)


def test_approach_velocity_monotone():
    c = cfg()
    d = np.array([0, 1.0, 0])
    prev = 1.0
    for s in np.linspace(0.1, 3.0, 10):
        _, a_vel, _, _ = approach_coefficients(
            d, d, np.array([s, 0, 0]), np.zeros(3), np.zeros(4), np.zeros(4), c)
        assert a_vel <= prev
        prev = a_vel


def test_approach_rejects_non_unit_direction():
    with pytest.raises(ValueError):
        approach_coefficients(np.array([2.0, 0, 0]), np.array([1.0, 0, 0]),
                              np.zeros(3), np.zeros(3), np.zeros(4), np.zeros(4), cfg())


# -- object reward ------------------------------------------------------------


def test_object_reward_no_contacts_is_zero():
    c = cfg()
    L = 4
    r = object_reward(np.zeros(L), np.zeros(L), np.zeros((L, 3)),
                     np.tile([0, 0, 1.0], (L, 1)), np.ones(L, dtype=bool), c)
    assert r == 0.0


def test_object_reward_equation_fixture():
    # frozen from the scalar oracle run: 1*1 + 1*1 + 0 = 2.0
    c = cfg(lambda_d=1.0, lambda_c=1.0, lambda_i=0.0)
    mask = np.array([True, False])
    contact = np.array([1.0, 0.0])
    impulse = np.array([0.0, 0.0])
    n_t = np.array([[0, 0, 1.0], [0, 0, 0]])
    n_ref = np.array([[0, 0, 1.0], [0, 0, 1.0]])
    assert object_reward(contact, impulse, n_t, n_ref, mask, c) == pytest.approx(2.0, abs=1e-12)


def test_object_reward_resting_link_contact_ignored():
    c = cfg()
    mask = np.array([True, False])
    r = object_reward(np.array([0.0, 1.0]), np.array([0.0, 1.5]),
                      np.tile([0, 0, 1.0], (2, 1)), np.tile([0, 0, 1.0], (2, 1)),
                      mask, c)
    assert r == 0.0


def test_object_reward_impulse_cap():
    c = cfg(lambda_d=0.0, lambda_c=0.0, lambda_i=1.0, impulse_cap=2.0)
    mask = np.array([True])
    r = object_reward(np.array([1.0]), np.array([100.0]),
                      np.array([[0, 0, 1.0]]), np.array([[0, 0, 1.0]]), mask, c)
    assert r == pytest.approx(2.0)


# -- object stability ---------------------------------------------------------


def test_stability_static_object_is_one():
    a_vel, a_xy, a_obj = object_stability(np.zeros(3), np.zeros(3), np.zeros(2), cfg())
    assert (a_vel, a_xy, a_obj) == (1.0, 1.0, 1.0)


def test_stability_lateral_fixture():
    # frozen from the scalar oracle run: exp(-10 * 0.1) = exp(-1)
    _, a_xy, _ = object_stability(np.zeros(3), np.zeros(3), np.array([0.1, 0.0]),
                                  cfg(gamma_xy=10.0))
    assert a_xy == pytest.approx(0.36787944117144233, abs=1e-12)


def test_stability_product_bound():
    rng = np.random.default_rng(4)
    for _ in range(100):
        a_vel, a_xy, a_obj = object_stability(rng.normal(size=3), rng.normal(size=3),
                                              rng.normal(size=2), cfg())
        assert a_obj <= min(a_vel, a_xy) + 1e-15


# -- mimic ---------------------------------------------------------------------


def test_mimic_zero_at_reference():
    q = np.array([0.5, -0.2, 0.1, 0.0])
    loss, alpha = mimic(q, q, [0, 1], [2, 3], cfg())
    assert loss == 0.0 and alpha == 1.0


def test_mimic_margin_gating_exact():
    c = cfg(tau_act=0.1, tau_rest=0.2)
    q_ref = np.zeros(4)
    q = np.array([0.1, -0.1, 0.2, -0.2])  # all exactly at margins
    loss, alpha = mimic(q, q_ref, [0, 1], [2, 3], c)
    assert loss == 0.0
    assert alpha == 1.0


def test_mimic_equation_fixture():
    # frozen from the scalar oracle run: max(0.5-0.3,0)^2 / 4 = 0.01
    c = cfg(tau_act=0.3, tau_rest=0.3)
    q_ref = np.zeros(6)
    q = np.array([0.5, 0, 0, 0, 0, 0])
    loss, alpha = mimic(q, q_ref, [0, 1, 2, 3], [4, 5], c)
    assert loss == pytest.approx(0.01, abs=1e-12)
    assert alpha == pytest.approx(np.exp(-c.gamma_m * 0.01), abs=1e-12)


def test_mimic_requires_partition():
    with pytest.raises(ValueError):
        mimic(np.zeros(4), np.zeros(4), [0, 1], [1, 2, 3], cfg())
    with pytest.raises(ValueError):
        mimic(np.zeros(4), np.zeros(4), [], [0, 1, 2, 3], cfg())


def test_mimic_all_active_allowed():
    loss, alpha = mimic(np.array([0.4, 0.0]), np.zeros(2), [0, 1], [], cfg())
    assert loss > 0.0 and 0 < alpha < 1


# -- penalty -------------------------------------------------------------------


def test_penalty_no_contacts():
    L = 5
    assert penalty(np.zeros(L), np.zeros(L), np.zeros(L), np.zeros(L),
                   np.ones(L, dtype=bool), cfg()) == 0.0


def test_penalty_table_contact_fixture():
    # frozen from the scalar oracle run: 1.0 * 1 = 1.0
    c = cfg(lambda_un_c=1.0, lambda_un_i=0.0)
    mask = np.array([True, True])
    r = penalty(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]), np.zeros(2), mask, c)
    assert r == pytest.approx(1.0, abs=1e-12)


def test_penalty_resting_link_object_contact_fixture():
    # frozen from the scalar oracle run: (1 - 0) * 0.5 * 1 = 0.5
    c = cfg(lambda_c=0.5, lambda_i=0.0, lambda_un_c=0.0, lambda_un_i=0.0)
    mask = np.array([True, False])
    r = penalty(np.array([0.0, 1.0]), np.zeros(2), np.zeros(2), np.zeros(2), mask, c)
    assert r == pytest.approx(0.5, abs=1e-12)


def test_penalty_non_negative_random():
    rng = np.random.default_rng(6)
    c = cfg()
    for _ in range(200):
        L = 6
        r = penalty(rng.integers(0, 2, L), np.abs(rng.normal(size=L)),
                    rng.integers(0, 2, L), np.abs(rng.normal(size=L)),
                    rng.random(L) < 0.5, c)
        assert r >= 0.0


# -- composite -----------------------------------------------------------------


def test_composite_equation_fixture():
    # frozen from the scalar oracle run: 2*0.5 + 3*0.1 - 0.2 = 1.1
    b = RewardBreakdown(r_h=2.0, alpha_dir=0.5, alpha_vel_wrist=1.0, alpha_act=1.0,
                        r_o=3.0, alpha_vel_obj=0.2, alpha_xy=1.0, alpha_mimic=0.5,
                        r_pen=0.2)
    total = composite(b, cfg(mode=MULTIPLICATIVE))
    assert b.alpha_h == pytest.approx(0.5)
    assert b.alpha_o == pytest.approx(0.1)
    assert total == pytest.approx(1.1, abs=1e-12)


def test_composite_modes_agree_at_unity():
    b1 = RewardBreakdown(r_h=1.3, r_o=0.7)
    t_mult = composite(b1, cfg(mode=MULTIPLICATIVE))
    b2 = RewardBreakdown(r_h=1.3, r_o=0.7)
    t_add = composite(b2, cfg(mode=ADDITIVE, w_mimic=0.0))
    assert t_mult == pytest.approx(t_add) == pytest.approx(2.0)


def test_composite_mimic_limit_kills_object_term():
    c = cfg(mode=MULTIPLICATIVE)
    b = RewardBreakdown(r_h=0.0, r_o=5.0, l_mimic=100.0,
                        alpha_mimic=np.exp(-c.gamma_m * 100.0))
    total = composite(b, c)
    assert total == pytest.approx(0.0, abs=1e-100)


def test_additive_uses_w_mimic():
    c = cfg(mode=ADDITIVE, w_mimic=2.0)
    b = RewardBreakdown(r_h=1.0, r_o=1.0, alpha_mimic=0.5, r_pen=0.25)
    assert composite(b, c) == pytest.approx(1.0 + 1.0 + 1.0 - 0.25)


# -- reward-law randomized suite ------------------------------------------------


def random_parts(rng, c):
    L, D = 8, 6
    mask = rng.random(L) < 0.5
    if not mask.any():
        mask[0] = True
    d1 = rng.normal(size=3)
    d1 /= np.linalg.norm(d1)
    d2 = rng.normal(size=3)
    d2 /= np.linalg.norm(d2)
    b = RewardBreakdown()
    b.r_h = hand_reward(rng.normal(size=3) * 0.3, np.abs(rng.normal(size=L)), mask, c)
    b.alpha_dir, b.alpha_vel_wrist, b.alpha_act, b.alpha_h = approach_coefficients(
        d1, d2, rng.normal(size=3), rng.normal(size=3),
        rng.normal(size=27), rng.normal(size=27), c)
    contact = (rng.random(L) < 0.4).astype(float)
    impulse = np.abs(rng.normal(size=L)) * contact
    n_t = rng.normal(size=(L, 3))
    n_t /= np.linalg.norm(n_t, axis=1, keepdims=True)
    n_ref = rng.normal(size=(L, 3))
    n_ref /= np.linalg.norm(n_ref, axis=1, keepdims=True)
    b.r_o = object_reward(contact, impulse, n_t, n_ref, mask, c)
    b.alpha_vel_obj, b.alpha_xy, b.alpha_obj = object_stability(
        rng.normal(size=3) * 0.2, rng.normal(size=3), rng.normal(size=2) * 0.05, c)
    q = rng.normal(size=D)
    q_ref = rng.normal(size=D)
    b.l_mimic, b.alpha_mimic = mimic(q, q_ref, [0, 1, 2], [3, 4, 5], c)
    un_c = (rng.random(L) < 0.3).astype(float)
    b.r_pen = penalty(contact, impulse, un_c, np.abs(rng.normal(size=L)) * un_c, mask, c)
    return b, mask, contact, impulse, n_t, n_ref


def test_reward_laws_randomized():
    rng = np.random.default_rng(99)
    c = cfg()
    for _ in range(2000):
        b, mask, contact, impulse, n_t, n_ref = random_parts(rng, c)
        total = composite(b, c)
        for a in (b.alpha_dir, b.alpha_vel_wrist, b.alpha_act, b.alpha_h,
                  b.alpha_vel_obj, b.alpha_xy, b.alpha_obj, b.alpha_mimic, b.alpha_o):
            assert 0.0 < a <= 1.0
        assert b.r_pen >= 0.0
        assert b.l_mimic >= 0.0
        assert np.isfinite(total)
        # mask gating: perturbing resting-link contacts leaves r_o unchanged
        resting = ~mask
        if resting.any():
            contact2 = contact.copy()
            contact2[resting] = 1.0
            impulse2 = impulse.copy()
            impulse2[resting] += 1.0
            r_o2 = object_reward(contact2, impulse2, n_t, n_ref, mask, c)
            assert r_o2 == pytest.approx(b.r_o, abs=1e-12)
            pen2 = penalty(contact2, impulse2, np.zeros_like(contact),
                           np.zeros_like(impulse), mask, c)
            pen1 = penalty(contact, impulse, np.zeros_like(contact),
                           np.zeros_like(impulse), mask, c)
            assert pen2 >= pen1 - 1e-12


def test_monotone_attenuation_in_mimic_loss():
    c = cfg(mode=MULTIPLICATIVE)
    r_o = 2.5
    prev = np.inf
    for loss in np.linspace(0.0, 2.0, 15):
        term = r_o * np.exp(-c.gamma_m * loss)
        assert term < prev or loss == 0.0
        prev = term


def test_mimic_gradient_matches_central_differences():
    c = cfg()
    rng = np.random.default_rng(123)
    active, resting = [0, 1, 2], [3, 4, 5]
    for _ in range(50):
        q_ref = rng.normal(size=6) * 0.5
        q = q_ref + rng.normal(size=6) * 0.8
        # stay away from the margin kinks
        dev = np.abs(q - q_ref)
        margins = np.array([c.tau_act] * 3 + [c.tau_rest] * 3)
        if np.any(np.abs(dev - margins) < 1e-3):
            continue
        r_o, alpha_obj = 1.7, 0.8

        def total_of(qv):
            loss, a_m = mimic(qv, q_ref, active, resting, c)
            return r_o * alpha_obj * a_m

        grad = mimic_grad_q(q, q_ref, active, resting, r_o, alpha_obj, c)
        eps = 1e-6
        for j in range(6):
            qp, qm = q.copy(), q.copy()
            qp[j] += eps
            qm[j] -= eps
            fd = (total_of(qp) - total_of(qm)) / (2 * eps)
            assert grad[j] == pytest.approx(fd, abs=1e-5)
