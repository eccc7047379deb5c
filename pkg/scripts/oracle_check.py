#!/usr/bin/env python3
"""Standalone scalar recomputation of the worked reward/metric examples.

Pure stdlib, no package imports. Run this before touching the test
expectations: every value printed here is frozen into the test suite.
"""
import math


def check(name, got, want, tol=1e-12):
    ok = abs(got - want) <= tol
    print(f"{'ok ' if ok else 'FAIL'} {name}: {got!r} (expected {want!r})")
    return ok


def main():
    results = []

    # Composite total: r = r_h*a_h + r_o*a_o - r_pen
    total = 2.0 * 0.5 + 3.0 * 0.1 - 0.2
    results.append(check("composite", total, 1.1))

    # Object reward, one active link, perfect alignment + contact,
    # lambda_d = lambda_c = 1, impulse weight 0:
    r_o = 1.0 * (1.0 * 1.0 + 1.0 * 1.0 + 0.0 * 0.0)
    results.append(check("object_reward", r_o, 2.0))

    # Mimic loss: one active joint deviating 0.5 rad, margin 0.3,
    # N_act = 4, no resting deviation.
    l_mimic = (max(abs(0.5) - 0.3, 0.0) ** 2) / 4.0
    results.append(check("mimic_loss", l_mimic, 0.01))

    # Penalty: table contact on one link, lambda_un_c = 1, impulse weights 0.
    r_pen_table = 1.0 * 1.0 + 0.0
    results.append(check("penalty_table", r_pen_table, 1.0))

    # Penalty: object contact on a resting link, lambda_c = 0.5.
    r_pen_rest = (1.0 - 0.0) * (0.5 * 1.0 + 0.0)
    results.append(check("penalty_resting", r_pen_rest, 0.5))

    # Mean joint error: D = 20, one joint deviating 0.5 rad, tol 0.3.
    mje = sum(max(abs(d) - 0.3, 0.0) ** 2 for d in [0.5] + [0.0] * 19) / 20.0
    results.append(check("mje", mje, 0.002))

    # Hand reward: gamma_r = 1, |x_rel| = ln 2, active link distances 0.
    r_h = math.exp(-1.0 * math.log(2.0)) + 1.0
    results.append(check("hand_reward", r_h, 1.5))

    # Direction coefficient: gamma_dir = 1, |d_w - d_trgt| = 1.
    a_dir = math.exp(-1.0 * 1.0)
    results.append(check("alpha_dir", a_dir, math.exp(-1.0)))
    print(f"     alpha_dir value: {a_dir!r}")

    # Lateral coefficient: gamma_xy = 10, |x_xy| = 0.1.
    a_xy = math.exp(-10.0 * 0.1)
    results.append(check("alpha_xy", a_xy, math.exp(-1.0)))

    # Planar 2-link finger, lengths 0.04/0.03, both joints at 90 deg.
    t1, t2 = math.pi / 2, math.pi / 2
    tip_x = 0.04 * math.cos(t1) + 0.03 * math.cos(t1 + t2)
    tip_y = 0.04 * math.sin(t1) + 0.03 * math.sin(t1 + t2)
    results.append(check("fk_tip_x", tip_x, -0.03, tol=1e-15))
    results.append(check("fk_tip_y", tip_y, 0.04, tol=1e-15))

    # Table spread rows from the published success-rate fixture.
    fruit = [88.38, 88.55, 86.67, 86.14, 84.50, 82.75, 82.09, 84.81,
             63.71, 88.78, 81.53, 70.40, 83.97, 85.97, 77.55, 87.22]
    household = [76.71, 76.80, 78.65, 75.18, 75.68, 72.60, 72.00, 74.28,
                 66.53, 76.16, 71.07, 67.78, 73.22, 73.38, 70.66, 75.25]
    packed = [94.19, 94.31, 93.76, 93.13, 92.06, 90.56, 89.82, 91.96,
              79.46, 93.74, 89.01, 83.54, 90.71, 92.74, 87.33, 93.42]
    for name, col, want in [("spread_fruit", fruit, 25.07),
                            ("spread_household", household, 12.12),
                            ("spread_packed", packed, 14.85)]:
        spread = max(col) - min(col)
        results.append(check(name, round(spread, 2), want))

    # Free-fall drop over 0.5 s.
    drop = 0.5 * 9.81 * 0.5 ** 2
    results.append(check("free_fall_drop", drop, 1.22625))

    print()
    if all(results):
        print("all oracle values confirmed")
        return 0
    print("ORACLE MISMATCH")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
