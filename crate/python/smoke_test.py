"""Smoke test for the lefschetz_mq extension: build with `maturin develop` first."""

import math

import lefschetz_mq as lm


def main():
    f = lm.SelfMap("circle_power:3")
    r = lm.compute_lefschetz(f, resolution=2048)
    assert abs(r.integral + 2.0) < 1e-4, r
    assert r.oracle == -2

    g = lm.SelfMap("torus_linear:2,0,0,3", manifold="torus:6.283185307179586,6.283185307179586")
    assert g.lefschetz() == g.fixed_point_sum() == 2

    s = lm.SelfMap("suspension:2")
    r = lm.compute_lefschetz(s, resolution=256)
    assert abs(r.integral - 3.0) < 1e-2, r
    b = lm.bounds(s)
    assert (b.lefschetz, b.chi, b.cut_count, b.sgn_sum) == (3, 2, 1, 1)

    refl = lm.SelfMap("sphere_reflection:0,0,1")
    assert refl.fixed_point_sum() == 0
    y = refl.eval([0.6, 0.0, 0.8])
    assert math.isclose(y[2], -0.8) and math.isclose(y[0], 0.6)

    reps = lm.sweep_t(f, [0.5, 4.0], resolution=2048)
    assert all(abs(x.integral + 2.0) < 1e-4 for x in reps)

    assert abs(lm.fiber_integral([[0.0, 0.7], [-0.7, 0.0]]) - 1.0) < 1e-9

    try:
        lm.SelfMap("circle_power:x")
    except ValueError:
        pass
    else:
        raise AssertionError("bad descriptor accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
