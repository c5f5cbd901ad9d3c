import numpy as np
import pytest

from conjtamer import (
    InfiniteHyperbolicSet,
    NotCircle,
    build_diffeo,
    c1_refinement_ratio,
    detect_resilient,
    find_periodic_points,
    flatten_hyperbolic,
    identity,
    orbit_multiplier,
    rotation,
    rotation_number,
)
from conjtamer import Action, Presentation
from conjtamer.periodic import FlatteningMap, flatten_conjugate
from conjtamer.space import circle, interval

from helpers import (
    GOLDEN,
    conj_rotation_action,
    mobius_action,
    pingpong_action,
    rigid_rotations,
    wobble,
)

LOG2 = float(np.log(2.0))


# ---------------------------------------------------------------------------
# periodic points


def test_mobius_fixed_points_and_multipliers():
    orbits = find_periodic_points(mobius_action(1024).gens[0], 3)
    assert [(o.points, o.period) for o in orbits] == [((0.0,), 1), ((1.0,), 1)]
    assert orbits[0].multiplier == pytest.approx(0.5, abs=1e-9)
    assert orbits[1].multiplier == pytest.approx(2.0, abs=1e-9)
    assert not orbits[0].parabolic and not orbits[1].parabolic


def test_identity_like_powers_are_excluded():
    sp = circle(256)
    assert find_periodic_points(identity(sp), 2) == []
    # R_{1/3}: every point has period 3, so the inventory stays empty
    assert find_periodic_points(rotation(sp, 1.0 / 3.0), 4) == []


def test_irrational_rotation_has_no_periodic_points():
    assert find_periodic_points(conj_rotation_action(512).gens[0], 3) == []


def test_interior_fixed_points_of_circle_map():
    sp = circle(1024)
    f = build_diffeo("x + 0.03*sin(2*pi*x)", sp)
    orbits = find_periodic_points(f, 2)
    pts = sorted(p for o in orbits for p in o.points)
    assert pts == pytest.approx([0.0, 0.5], abs=1e-9)
    mults = {round(p, 6): o.multiplier for o in orbits for p in o.points}
    assert mults[0.0] == pytest.approx(1 + 0.06 * np.pi, abs=1e-6)
    assert mults[0.5] == pytest.approx(1 - 0.06 * np.pi, abs=1e-6)


def test_orbit_multiplier_chain_rule():
    f = mobius_action(512).gens[0]
    assert orbit_multiplier(f, 0.0, 1) == pytest.approx(0.5, abs=1e-12)
    assert orbit_multiplier(f, 1.0, 2) == pytest.approx(4.0, abs=1e-9)


# ---------------------------------------------------------------------------
# rotation numbers


def test_rotation_number_rigid():
    rho, err = rotation_number(rotation(circle(512), 0.25), iters=1000)
    assert rho == pytest.approx(0.25, abs=1e-12)
    assert err == pytest.approx(1e-3, abs=1e-12)


def test_rotation_number_with_fixed_point_is_zero():
    f = build_diffeo("x + 0.03*sin(2*pi*x)", circle(512))
    rho, err = rotation_number(f, iters=4096)
    assert abs(rho) <= err


def test_rotation_number_is_conjugation_invariant():
    g = conj_rotation_action(1024).gens[0]
    rho, _ = rotation_number(g, iters=10_000)
    assert rho == pytest.approx(GOLDEN, abs=1e-4)


def test_rotation_number_needs_circle():
    with pytest.raises(NotCircle):
        rotation_number(mobius_action(256).gens[0], iters=500)


# ---------------------------------------------------------------------------
# flattening


def test_flatten_mobius_with_delta():
    act = mobius_action(1024)
    flat, psi, report = flatten_hyperbolic(act, delta=0.1)
    assert report.alpha == pytest.approx(LOG2 / 0.1, abs=1e-12)
    assert report.flagged == (0.0, 1.0)
    assert report.log_multipliers_before[0.0] == pytest.approx(-LOG2, abs=1e-9)
    assert report.log_multipliers_after[0.0] == pytest.approx(-0.1, abs=1e-9)
    assert report.log_multipliers_after[1.0] == pytest.approx(0.1, abs=1e-9)


@pytest.mark.parametrize("alpha", [2.0, 4.0, 8.0])
def test_flattening_limit_law(alpha):
    # the tamed multiplier at 0 is (1/2)^(1/alpha), measured by differencing
    act = mobius_action(1024)
    flat, psi, report = flatten_hyperbolic(act, alpha=alpha)
    g = flat.gens[0]
    t = 1e-4
    measured = float(g.eval_lift(np.array([t]))[0]) / t
    assert measured == pytest.approx(2.0 ** (-1.0 / alpha), abs=1e-4)


def test_flatten_parabolic_only_returns_identity():
    act = conj_rotation_action(512)
    flat, psi, report = flatten_hyperbolic(act, delta=0.1)
    assert report.alpha == 1.0
    assert report.flagged == ()
    x = np.linspace(0, 1, 200)
    assert float(np.max(np.abs(psi.eval_lift(x) - x))) == 0.0
    assert flat is act


def test_flatten_cap():
    with pytest.raises(InfiniteHyperbolicSet):
        flatten_hyperbolic(mobius_action(512), delta=0.1, cap=1)


def test_flattened_map_is_c1_on_the_grid():
    act = mobius_action(4096)
    flat, _, _ = flatten_hyperbolic(act, delta=0.1)
    track = np.asarray(flat.gens[0].log_deriv.samples)
    assert np.all(np.isfinite(track))
    # refinement ratio near 2 certifies a continuous derivative
    assert 1.7 <= c1_refinement_ratio(flat.gens[0]) <= 2.3


def test_refinement_ratio_separates_smooth_from_corner():
    assert 1.9 <= c1_refinement_ratio(wobble(1024)) <= 2.05
    corner = pingpong_action(1024).gens[0]
    assert c1_refinement_ratio(corner) <= 1.2


def test_flatten_conjugate_fixes_flagged_points():
    act = mobius_action(512)
    psi = FlatteningMap(act.space, (0.0, 1.0), 4.0)
    g = flatten_conjugate(psi, act.gens[0])
    assert float(g(np.array([0.0]))[0]) == 0.0
    assert float(g(np.array([1.0]))[0]) == 1.0


# ---------------------------------------------------------------------------
# resilient detection


def test_pingpong_witness_found():
    w = detect_resilient(pingpong_action(4096), 2, 0.01)
    assert w is not None
    d = w.to_dict()
    assert d["word_f"] == "f" and d["word_g"] == "g"
    assert d["margin"] > 0.01
    # the defining chain x < f(x) < f(y) < g(x) < g(y) < y
    chain = d["chain"]
    assert chain == sorted(chain)
    assert len(chain) == 6
    assert d["x"] == chain[0] and d["y"] == chain[-1]


def test_rotations_have_no_witness():
    assert detect_resilient(rigid_rotations(1024), 4, 0.01) is None


def test_conjugated_rotation_has_no_witness():
    assert detect_resilient(conj_rotation_action(1024), 4, 0.01) is None


def test_single_generator_has_no_witness():
    assert detect_resilient(mobius_action(512), 2, 0.01) is None


def test_witness_is_deterministic():
    a = detect_resilient(pingpong_action(2048), 2, 0.01)
    b = detect_resilient(pingpong_action(2048), 2, 0.01)
    assert a.to_dict() == b.to_dict()


def test_hyperbolic_point_orbit_stays_finite_on_nilpotent_rotations():
    # Every bundled nilpotent example acts through rotations, so generators
    # have no hyperbolic periodic points and the finiteness dichotomy is
    # vacuous; assert the premise so a future example change is noticed.
    sp = circle(512)
    p = Presentation.heisenberg()
    act = Action(
        sp,
        p,
        {
            "a": rotation(sp, GOLDEN),
            "b": rotation(sp, 0.414214),
            "c": identity(sp),
        },
    )
    for g in act.gens:
        assert [o for o in find_periodic_points(g, 3) if not o.parabolic] == []
