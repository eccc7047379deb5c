"""Multiplicative composite grasp reward and the additive baseline.

Total reward:  r = r_hand * a_hand + r_object * a_object - r_penalty,
where every `a` coefficient is a product of exp(-rate * magnitude)
factors in (0, 1] that gate the task rewards instead of adding penalty
terms. The additive baseline replaces the gating with a weighted mimic
bonus: r = r_hand + r_object + w_mimic * a_mimic - r_penalty.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

MULTIPLICATIVE = "multiplicative"
ADDITIVE = "additive"


@dataclass
class RewardConfig:
    # approach decay rates
    gamma_r: float = 3.0        # wrist-to-object proximity
    gamma_l: float = 20.0       # per-link proximity
    gamma_dir: float = 2.0      # wrist alignment with target direction
    gamma_v: float = 0.5        # wrist velocity attenuation
    eta: float = 0.1            # angular-velocity weight inside gamma_v
    gamma_a: float = 5.0        # action smoothness
    # object interaction weights
    lambda_d: float = 0.5       # contact-normal alignment
    lambda_c: float = 1.0       # contact indicator
    lambda_i: float = 0.1       # contact impulse
    impulse_cap: float = 2.0    # N*s clip before weighting
    gamma_ov: float = 1.0       # object velocity attenuation
    eta_o: float = 0.1
    gamma_xy: float = 10.0      # lateral object displacement
    # taxonomy adherence
    gamma_m: float = 5.0
    tau_act: float = 0.1        # rad margin, engaged fingers
    tau_rest: float = 0.2       # rad margin, resting fingers
    # penalties
    lambda_un_c: float = 0.5    # unintended-contact indicator
    lambda_un_i: float = 0.1    # unintended-contact impulse
    # episode discount and reward mode
    gamma: float = 0.99
    mode: str = MULTIPLICATIVE
    w_mimic: float = 0.0        # additive mode only

    def validate(self) -> list[str]:
        errors = []
        rates = ["gamma_r", "gamma_l", "gamma_dir", "gamma_v", "eta", "gamma_a",
                 "lambda_d", "lambda_c", "lambda_i", "impulse_cap", "gamma_ov",
                 "eta_o", "gamma_xy", "gamma_m", "lambda_un_c", "lambda_un_i",
                 "tau_act", "tau_rest", "w_mimic"]
        for name in rates:
            if getattr(self, name) < 0:
                errors.append(f"reward.{name} must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            errors.append("reward.gamma must lie in (0, 1]")
        if self.mode not in (MULTIPLICATIVE, ADDITIVE):
            errors.append(f"reward.mode must be '{MULTIPLICATIVE}' or '{ADDITIVE}'")
        return errors

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "RewardConfig":
        return RewardConfig(**doc)


@dataclass
class RewardBreakdown:
    r_h: float = 0.0
    alpha_dir: float = 1.0
    alpha_vel_wrist: float = 1.0
    alpha_act: float = 1.0
    alpha_h: float = 1.0
    r_o: float = 0.0
    alpha_vel_obj: float = 1.0
    alpha_xy: float = 1.0
    alpha_obj: float = 1.0
    l_mimic: float = 0.0
    alpha_mimic: float = 1.0
    alpha_o: float = 1.0
    r_pen: float = 0.0
    total: float = 0.0

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}

    FIELDS = ("r_h", "alpha_dir", "alpha_vel_wrist", "alpha_act", "alpha_h",
              "r_o", "alpha_vel_obj", "alpha_xy", "alpha_obj", "l_mimic",
              "alpha_mimic", "alpha_o", "r_pen", "total")


# -- hand-centric approach terms --------------------------------------------


def hand_reward(x_rel, link_dist, mask, cfg: RewardConfig) -> float:
    """Approach reward: wrist proximity plus mean engaged-link proximity."""
    mask = np.asarray(mask, dtype=bool)
    n_active = int(mask.sum())
    if n_active < 1:
        raise ValueError("hand_reward needs at least one active link")
    link_dist = np.asarray(link_dist, dtype=float)
    prox = np.exp(-cfg.gamma_r * np.linalg.norm(x_rel))
    links = np.exp(-cfg.gamma_l * np.abs(link_dist[mask])).sum() / n_active
    return float(prox + links)


def approach_coefficients(d_wrist, d_target, v_wrist, w_wrist,
                          action_delta, prev_action_delta,
                          cfg: RewardConfig) -> tuple[float, float, float, float]:
    """Gating factors (alpha_dir, alpha_vel, alpha_act, alpha_h)."""
    d_wrist = np.asarray(d_wrist, dtype=float)
    d_target = np.asarray(d_target, dtype=float)
    for name, d in (("d_wrist", d_wrist), ("d_target", d_target)):
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError(f"{name} must be a unit vector")
    a_dir = float(np.exp(-cfg.gamma_dir * np.linalg.norm(d_wrist - d_target)))
    v2 = float(np.dot(v_wrist, v_wrist))
    w2 = float(np.dot(w_wrist, w_wrist))
    a_vel = float(np.exp(-cfg.gamma_v * (v2 + cfg.eta * w2)))
    da = np.asarray(action_delta, dtype=float) - np.asarray(prev_action_delta, dtype=float)
    a_act = float(np.exp(-cfg.gamma_a * float(np.dot(da, da))))
    return a_dir, a_vel, a_act, a_dir * a_vel * a_act


# -- object-centric grasp terms ----------------------------------------------


def object_reward(contact, impulse, contact_normal, template_normal_world,
                  mask, cfg: RewardConfig) -> float:
    """Engaged-link sum of normal alignment, contact status, and impulse.

    The alignment term only exists while a link is in contact; links
    outside the engagement mask contribute nothing here.
    """
    mask = np.asarray(mask, dtype=bool)
    contact = np.asarray(contact, dtype=float)
    impulse = np.clip(np.asarray(impulse, dtype=float), 0.0, cfg.impulse_cap)
    align = np.einsum("ij,ij->i", np.asarray(contact_normal, dtype=float),
                      np.asarray(template_normal_world, dtype=float))
    align = np.where(contact > 0, align, 0.0)
    per_link = cfg.lambda_d * align + cfg.lambda_c * contact + cfg.lambda_i * impulse
    return float(per_link[mask].sum())


def object_stability(v_obj, w_obj, xy_offset, cfg: RewardConfig) -> tuple[float, float, float]:
    """Gating factors (alpha_vel_obj, alpha_xy, alpha_obj)."""
    v2 = float(np.dot(v_obj, v_obj))
    w2 = float(np.dot(w_obj, w_obj))
    a_vel = float(np.exp(-cfg.gamma_ov * (v2 + cfg.eta_o * w2)))
    a_xy = float(np.exp(-cfg.gamma_xy * np.linalg.norm(xy_offset)))
    return a_vel, a_xy, a_vel * a_xy


def mimic(q, q_ref, active_joints, resting_joints, cfg: RewardConfig) -> tuple[float, float]:
    """Margin-tolerant squared joint deviation and its gating factor.

    Engaged-finger joints use the tight margin, resting-finger joints the
    loose one; deviations inside the margins cost exactly zero.
    """
    active_joints = np.asarray(active_joints, dtype=int)
    resting_joints = np.asarray(resting_joints, dtype=int)
    if len(active_joints) < 1:
        raise ValueError("mimic needs at least one active joint")
    overlap = np.intersect1d(active_joints, resting_joints)
    if len(overlap) or len(active_joints) + len(resting_joints) != len(q):
        raise ValueError("active/resting sets must partition the joints")
    dev = np.abs(np.asarray(q, dtype=float) - np.asarray(q_ref, dtype=float))
    act = np.maximum(dev[active_joints] - cfg.tau_act, 0.0)
    loss = float((act ** 2).sum() / len(active_joints))
    if len(resting_joints):
        rest = np.maximum(dev[resting_joints] - cfg.tau_rest, 0.0)
        loss += float((rest ** 2).sum() / len(resting_joints))
    return loss, float(np.exp(-cfg.gamma_m * loss))


def penalty(contact, impulse, unintended_contact, unintended_impulse,
            mask, cfg: RewardConfig) -> float:
    """Penalty for unintended contacts plus object contact on resting links."""
    mask = np.asarray(mask, dtype=float)
    contact = np.asarray(contact, dtype=float)
    impulse = np.clip(np.asarray(impulse, dtype=float), 0.0, cfg.impulse_cap)
    un_c = np.asarray(unintended_contact, dtype=float)
    un_i = np.clip(np.asarray(unintended_impulse, dtype=float), 0.0, cfg.impulse_cap)
    per_link = (cfg.lambda_un_c * un_c + cfg.lambda_un_i * un_i
                + (1.0 - mask) * (cfg.lambda_c * contact + cfg.lambda_i * impulse))
    return float(per_link.sum())


def composite(b: RewardBreakdown, cfg: RewardConfig) -> float:
    """Combine the parts under the configured mode and fill b.total."""
    b.alpha_h = b.alpha_dir * b.alpha_vel_wrist * b.alpha_act
    b.alpha_obj = b.alpha_vel_obj * b.alpha_xy
    b.alpha_o = b.alpha_obj * b.alpha_mimic
    if cfg.mode == MULTIPLICATIVE:
        b.total = b.r_h * b.alpha_h + b.r_o * b.alpha_o - b.r_pen
    else:
        b.total = b.r_h + b.r_o + cfg.w_mimic * b.alpha_mimic - b.r_pen
    return b.total


def mimic_grad_q(q, q_ref, active_joints, resting_joints, r_o: float,
                 alpha_obj: float, cfg: RewardConfig) -> np.ndarray:
    """d(total)/dq through the mimic gate, for gradient verification.

    Only the r_o * alpha_obj * alpha_mimic(q) path depends on q here.
    """
    q = np.asarray(q, dtype=float)
    dev = q - np.asarray(q_ref, dtype=float)
    loss, a_mimic = mimic(q, q_ref, active_joints, resting_joints, cfg)
    grad_loss = np.zeros_like(q)
    for joints, tau, n in ((active_joints, cfg.tau_act, len(active_joints)),
                           (resting_joints, cfg.tau_rest, max(len(resting_joints), 1))):
        for j in joints:
            over = abs(dev[j]) - tau
            if over > 0:
                grad_loss[j] = 2.0 * over * np.sign(dev[j]) / n
    return r_o * alpha_obj * a_mimic * (-cfg.gamma_m) * grad_loss
