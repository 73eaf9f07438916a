import math

import mpmath as mp
import numpy as np
import pytest

from fbmac.core import (
    DomainError,
    PowerPair,
    capacity,
    capacity_vector,
    dispersion,
    dispersion_matrix_shell,
    nats_to_bits,
)
from fbmac.gaussquad import q_inv_scalar, quantile_set_member
from fbmac.regions import (
    GallagerParams,
    RegionBoundary,
    SplitWeights,
    conjectured_sum_outer_boundary,
    cover_wyner_pentagon,
    gallager_boundary,
    gallager_individual_exponent,
    gallager_ray,
    gallager_sum_exponent,
    iid_gaussian_boundary,
    joint_outage_boundary,
    outage_splitting_boundary,
    p2p_second_order_rate,
    pentagon_ray,
    ray_angles,
    resolve_delta,
    second_order_ray,
    splitting_ray,
    su_outer_box,
    sumshell_hypothetical_boundary,
    tdma_boundary,
    tdma_point,
    tdma_ray,
)
from oracles import q_tail_inv

PP = PowerPair(1.0, 1.0)
FIG1 = dict(n=500, eps=1e-3)


# ---------------------------------------------------------------------------
# point-to-point rate
# ---------------------------------------------------------------------------


def test_p2p_rate_oracle_pipeline():
    # independent pipeline: mpmath bisection quantile and explicit formulas
    n, eps, p = 500, 1e-3, 1.0
    c = float(mp.log(2) / 2)
    v = 0.375
    expect = c - math.sqrt(v / n) * q_tail_inv(eps)
    got = p2p_second_order_rate(n, eps, p)
    assert got == pytest.approx(expect, abs=1e-9)
    assert nats_to_bits(got) == pytest.approx(0.377905, abs=5e-7)


def test_p2p_rate_zero_penalty_at_half():
    assert p2p_second_order_rate(500, 0.5, 2.0) == pytest.approx(capacity(2.0), abs=1e-12)


def test_p2p_rate_approaches_capacity():
    assert p2p_second_order_rate(10**12, 1e-3, 1.0) == pytest.approx(capacity(1.0), abs=1e-5)


def test_p2p_rate_clamps_at_zero():
    assert p2p_second_order_rate(2, 1e-9, 0.01) == 0.0


# ---------------------------------------------------------------------------
# trivariate quantile-set regions
# ---------------------------------------------------------------------------


def test_joint_region_contains_pentagon_corner_at_large_eps():
    # eps -> 1 expands the region past the asymptotic corner
    cv = capacity_vector(PP)
    corner = np.array([cv.c3 / 2.0, cv.c3 / 2.0, cv.c3])
    z = math.sqrt(500) * (cv.as_array() - corner)
    sigma = dispersion_matrix_shell(PP).entries
    assert quantile_set_member(0.999, sigma, z, samples=1 << 13, seed=0)
    assert not quantile_set_member(1e-3, sigma, z, samples=1 << 13, seed=0)


def test_joint_region_axis_limit():
    theta = ray_angles(512)[0]  # nearly along the r1 axis
    r = second_order_ray(theta=theta, pp=PP, kind="shell", samples=1 << 13, seed=0, **FIG1)
    r1 = r * math.cos(theta)
    assert r1 <= p2p_second_order_rate(FIG1["n"], FIG1["eps"], PP.p1) + 2e-3


def test_joint_symmetric_between_iid_and_sumshell():
    theta = math.pi / 4
    # holds at the reproduced-figure parameters and at a second design point
    for n, eps, pp in ((500, 1e-3, PP), (200, 0.05, PowerPair(4.0, 4.0))):
        r_joint = second_order_ray(n, eps, pp, theta, "shell", 1 << 13, 0)
        r_iid = second_order_ray(n, eps, pp, theta, "iid", 1 << 13, 0)
        r_ss = second_order_ray(n, eps, pp, theta, "sumshell", 1 << 13, 0)
        assert r_iid < r_joint < r_ss


def test_boundaries_monotone_and_nonnegative():
    for rb in (
        joint_outage_boundary(num_points=32, samples=1 << 11, seed=0, pp=PP, **FIG1),
        iid_gaussian_boundary(num_points=16, samples=1 << 11, seed=0, pp=PP, **FIG1),
        sumshell_hypothetical_boundary(num_points=16, samples=1 << 11, seed=0, pp=PP, **FIG1),
        outage_splitting_boundary(pp=PP, num_points=32, **FIG1),
        tdma_boundary(pp=PP, **FIG1),
        su_outer_box(pp=PP, **FIG1),
        conjectured_sum_outer_boundary(pp=PP, **FIG1),
        cover_wyner_pentagon(PP),
        gallager_boundary(GallagerParams(1.0, 500, 1e-3), PP, 32),
    ):
        pts = rb.points
        assert (pts >= 0.0).all()
        assert (np.diff(pts[:, 0]) >= -1e-12).all()
        assert (np.diff(pts[:, 1]) <= 1e-12).all()
    assert sumshell_hypothetical_boundary(
        num_points=16, samples=1 << 11, seed=0, pp=PP, **FIG1
    ).params["conjectured_outer"]


def test_asymmetric_power_orderings():
    # the containment chain holds off the symmetric point too
    pp = PowerPair(2.0, 0.5)
    n, eps = 400, 1e-2
    for theta in ray_angles(8):
        kw = dict(n=n, eps=eps, pp=pp, theta=theta, samples=1 << 12, seed=11)
        r_iid = second_order_ray(kind="iid", **kw)
        r_joint = second_order_ray(kind="shell", **kw)
        r_ss = second_order_ray(kind="sumshell", **kw)
        r_split = splitting_ray(n, eps, pp, theta)
        assert r_iid <= r_joint + 1e-4
        assert r_split <= r_joint + 1e-4
        assert r_joint <= r_ss + 1e-4
    rb = joint_outage_boundary(n, eps, pp, num_points=24, samples=1 << 11, seed=11)
    assert rb.points.shape == (24, 2)


def test_joint_converges_to_pentagon():
    n = 10**8
    cv = capacity_vector(PP)
    for theta in ray_angles(8):
        r = second_order_ray(n, 1e-3, PP, theta, "shell", samples=1 << 12, seed=1)
        assert abs(r - pentagon_ray(theta, cv.c1, cv.c2, cv.c3)) < 1e-3


def test_doubling_eps_enlarges_regions():
    for theta in ray_angles(8):
        a = second_order_ray(500, 1e-3, PP, theta, "shell", samples=1 << 12, seed=2)
        b = second_order_ray(500, 2e-3, PP, theta, "shell", samples=1 << 12, seed=2)
        assert b >= a - 1e-6
        assert splitting_ray(500, 2e-3, PP, theta) >= splitting_ray(500, 1e-3, PP, theta) - 1e-12


# ---------------------------------------------------------------------------
# outage splitting
# ---------------------------------------------------------------------------


def test_split_weights_validation():
    SplitWeights(0.2, 0.3, 0.5)
    with pytest.raises(DomainError):
        SplitWeights(0.2, 0.3, 0.6)
    with pytest.raises(DomainError):
        SplitWeights(-0.1, 0.6, 0.5)


def test_splitting_equal_weights_constraints():
    n, eps = 500, 1e-3
    v_sum = dispersion_matrix_shell(PP).entries[2, 2]
    assert v_sum == pytest.approx(0.555556, abs=5e-7)
    b3 = capacity(2.0) - math.sqrt(v_sum / n) * q_inv_scalar(eps / 3.0)
    # the equal-split sum constraint is attained by the simplex-grid union
    r_sym = splitting_ray(n, eps, PP, math.pi / 4, resolution=63)  # includes 21/63 = 1/3
    assert r_sym * math.sqrt(2.0) >= b3 - 1e-12


def test_splitting_contained_in_joint():
    rb = outage_splitting_boundary(pp=PP, num_points=20, **FIG1)
    sigma = dispersion_matrix_shell(PP).entries
    cv = capacity_vector(PP).as_array()
    for r1, r2 in rb.points:
        z = math.sqrt(FIG1["n"]) * (cv - np.array([r1, r2, r1 + r2]) + 2e-3)
        assert quantile_set_member(FIG1["eps"], sigma, z, samples=1 << 13, seed=3)


def test_splitting_resolution_validation():
    with pytest.raises(DomainError):
        outage_splitting_boundary(500, 1e-3, PP, lambda_grid_resolution=2)


def test_splitting_penalty_clamped_at_half():
    # split budgets past 1/2 earn no rate bonus: the union stays inside the
    # capacity pentagon even at large target error
    rb = outage_splitting_boundary(500, 0.9, PP, num_points=16)
    assert (rb.points[:, 0] + rb.points[:, 1]).max() <= capacity(2.0) + 1e-9
    assert rb.points[:, 0].max() <= capacity(1.0) + 1e-9


# ---------------------------------------------------------------------------
# i.i.d. Gaussian region
# ---------------------------------------------------------------------------


def test_resolve_delta():
    assert resolve_delta("zero", 500) == 0.0
    assert resolve_delta("n^-1/4", 500) == pytest.approx(0.2114743, abs=1e-6)
    assert resolve_delta(0.3, 500) == 0.3
    with pytest.raises(DomainError):
        resolve_delta(1.5, 500)


def test_iid_axis_penalty_larger_than_shell():
    # variance 0.5 vs 0.375 on the first coordinate means a larger axis penalty
    theta = ray_angles(256)[0]
    r_iid = second_order_ray(theta=theta, pp=PP, kind="iid", samples=1 << 12, seed=4, **FIG1)
    r_shell = second_order_ray(theta=theta, pp=PP, kind="shell", samples=1 << 12, seed=4, **FIG1)
    assert r_iid < r_shell


def test_iid_backoff_shrinks_region():
    for theta in ray_angles(8):
        full = second_order_ray(theta=theta, pp=PP, kind="iid", samples=1 << 12, seed=5, **FIG1)
        backed = second_order_ray(
            theta=theta, pp=PP, kind="iid", samples=1 << 12, seed=5, delta=500**-0.25, **FIG1
        )
        assert backed < full


def test_iid_rejects_delta_at_one():
    with pytest.raises(DomainError):
        iid_gaussian_boundary(500, 1e-3, PP, delta_rule=1.0, num_points=8)
    with pytest.raises(DomainError):
        second_order_ray(500, 1e-3, PP, 0.5, "iid", delta=1.0)


# ---------------------------------------------------------------------------
# error-exponent region
# ---------------------------------------------------------------------------


def test_individual_exponent_vanishes_at_capacity():
    for p in (0.1, 1.0, 10.0):
        val = gallager_individual_exponent(capacity(p), p)
        assert abs(val.value) < 1e-9
        assert not val.above_capacity
        flagged = gallager_individual_exponent(capacity(p) + 0.1, p)
        assert flagged.value == 0.0 and flagged.above_capacity


def test_individual_exponent_zero_rate_value():
    # independent high-precision evaluation of the tangent-line constant
    p = 1.0
    s_c = (2.0 + p + math.sqrt(4.0 + p * p)) / 4.0
    r_c = 0.5 * math.log(s_c)
    with mp.workdps(40):
        s = mp.mpf(s_c)
        alpha = (p * (s - 1) / 2) * (mp.sqrt(1 + 4 * s / (p * (s - 1))) - 1)
        e_high_rc = (p - alpha) / (2 * s) + mp.log(s - alpha) / 2
        expect = float(e_high_rc + mp.mpf(r_c))
    assert gallager_individual_exponent(0.0, p).value == pytest.approx(expect, abs=1e-12)


def test_individual_exponent_branch_continuity():
    for p in (0.1, 0.5, 1.0, 2.0, 10.0, 100.0):
        r_c = 0.5 * math.log((2.0 + p + math.sqrt(4.0 + p * p)) / 4.0)
        below = gallager_individual_exponent(r_c - 1e-9, p).value
        above = gallager_individual_exponent(r_c + 1e-9, p).value
        assert abs(below - above) < 1e-8


def test_sum_exponent_vanishes_at_capacity():
    for ps in (0.5, 2.0, 20.0):
        assert abs(gallager_sum_exponent(capacity(ps), ps).value) < 1e-9


def test_sum_exponent_branch_continuity():
    for ps in (0.5, 1.0, 2.0, 4.0, 10.0, 50.0):
        s_c = 0.5 * (1.0 + ps / 4.0 + math.sqrt(1.0 + ps / 2.0 + ps * ps / 4.0))
        r_c = 0.5 * math.log(s_c)
        below = gallager_sum_exponent(r_c - 1e-9, ps).value
        above = gallager_sum_exponent(r_c + 1e-9, ps).value
        assert abs(below - above) < 1e-6


def test_sum_exponent_monotone():
    for ps in (2.0, 10.0):
        grid = np.linspace(0.0, capacity(ps), 1000)
        vals = [gallager_sum_exponent(float(r), ps).value for r in grid]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_gallager_region_shrinks_with_larger_a():
    gp1 = GallagerParams(1.0, 500, 1e-3)
    gp2 = GallagerParams(2.0, 500, 1e-3)
    for theta in ray_angles(8):
        assert gallager_ray(gp2, PP, theta) <= gallager_ray(gp1, PP, theta) + 1e-9


def test_gallager_inside_joint_region():
    theta = math.pi / 4
    r_gal = gallager_ray(GallagerParams(1.0, 500, 1e-3), PP, theta)
    r_joint = second_order_ray(theta=theta, pp=PP, kind="shell", samples=1 << 13, seed=6, **FIG1)
    assert r_gal < r_joint


def test_gallager_converges_to_pentagon_at_1e6():
    # the criterion-size gap at n = 1e5 is ~1.2e-2; 5e-3 needs n ~ 1e6
    gp = GallagerParams(1.0, 10**6, 1e-3)
    cv = capacity_vector(PP)
    for theta in np.linspace(0.1, math.pi / 2 - 0.1, 5):
        gap = pentagon_ray(theta, cv.c1, cv.c2, cv.c3) - gallager_ray(gp, PP, float(theta))
        assert 0.0 < gap < 5e-3


def test_gallager_empty_region():
    gp = GallagerParams(1.0, 10, 1e-9)
    rb = gallager_boundary(gp, PP, 16)
    assert rb.empty and rb.points.shape == (0, 2)
    assert gallager_ray(gp, PP, 0.5) == 0.0


def test_gallager_params_validation():
    with pytest.raises(DomainError):
        GallagerParams(0.0, 500, 1e-3)
    with pytest.raises(DomainError):
        GallagerParams(1.0, 500, 2.0)


# ---------------------------------------------------------------------------
# TDMA
# ---------------------------------------------------------------------------


def test_tdma_full_share_recovers_single_user():
    n, eps = 500, 1e-3
    beta = 0.7
    r1, r2 = tdma_point(n, eps, PP, 1.0, beta)
    expect = capacity(1.0) - math.sqrt(dispersion(1.0) / n) * q_inv_scalar(beta * eps)
    assert r1 == pytest.approx(expect, rel=1e-6)
    assert r2 == pytest.approx(0.0, abs=1e-9)


def test_tdma_symmetric_point():
    # beta solving beta*eps = (1-beta)eps/(1-beta*eps) balances the two users
    eps = 1e-3
    beta = (1.0 - math.sqrt(1.0 - eps)) / eps
    r1, r2 = tdma_point(500, eps, PP, 0.5, beta)
    assert r1 == pytest.approx(r2, rel=1e-9)


def test_tdma_below_joint_sum_rate():
    rb = tdma_boundary(pp=PP, **FIG1)
    best_sum = float((rb.points[:, 0] + rb.points[:, 1]).max())
    r_joint = second_order_ray(theta=math.pi / 4, pp=PP, kind="shell", samples=1 << 13, seed=7, **FIG1)
    assert best_sum < r_joint * math.sqrt(2.0)
    # the ray view agrees with the envelope view at the symmetric angle
    assert tdma_ray(theta=math.pi / 4, pp=PP, **FIG1) * math.sqrt(2.0) == pytest.approx(
        best_sum, rel=0.02
    )


def test_tdma_grid_validation():
    with pytest.raises(DomainError):
        tdma_boundary(500, 1e-3, PP, alpha_grid=np.array([0.0, 0.5]), beta_grid=np.array([0.5]))


# ---------------------------------------------------------------------------
# outer boxes, pentagons, serialization units
# ---------------------------------------------------------------------------


def test_su_outer_box_values():
    rb = su_outer_box(pp=PP, **FIG1)
    edge = nats_to_bits(p2p_second_order_rate(FIG1["n"], FIG1["eps"], 1.0))
    assert edge == pytest.approx(0.377905, abs=5e-7)
    assert rb.points.shape == (3, 2)
    assert rb.in_units("bits").points[1, 0] == pytest.approx(edge, rel=1e-12)


def test_su_outer_box_half_eps_is_capacity_box():
    rb = su_outer_box(500, 0.5, PP)
    assert rb.points[1, 0] == pytest.approx(capacity(1.0), abs=1e-12)


def test_achievable_regions_inside_su_box():
    b1 = p2p_second_order_rate(FIG1["n"], FIG1["eps"], PP.p1)
    b2 = p2p_second_order_rate(FIG1["n"], FIG1["eps"], PP.p2)
    for rb in (
        joint_outage_boundary(num_points=16, samples=1 << 12, seed=8, pp=PP, **FIG1),
        outage_splitting_boundary(pp=PP, num_points=16, **FIG1),
        tdma_boundary(pp=PP, **FIG1),
    ):
        assert (rb.points[:, 0] <= b1 + 2e-3).all()
        assert (rb.points[:, 1] <= b2 + 2e-3).all()


def test_conjectured_outer_is_pentagon_shaped():
    rb = conjectured_sum_outer_boundary(pp=PP, **FIG1)
    assert rb.params["conjecture"] is True
    sums = rb.points[:, 0] + rb.points[:, 1]
    bs = capacity(2.0) - math.sqrt(dispersion(2.0) / 500) * q_inv_scalar(1e-3)
    assert sums.max() == pytest.approx(bs, rel=1e-9)


def test_cover_wyner_pentagon_corners():
    rb = cover_wyner_pentagon(PP)
    assert rb.points[:, 0].max() == pytest.approx(capacity(1.0), rel=1e-12)
    assert (rb.points[:, 0] + rb.points[:, 1]).max() == pytest.approx(capacity(2.0), rel=1e-12)


def test_region_boundary_validation():
    with pytest.raises(DomainError):
        RegionBoundary("joint", {}, np.array([[0.0, 1.0], [1.0, 2.0]]))  # r2 increases
    with pytest.raises(DomainError):
        RegionBoundary("nonsense", {}, np.array([[0.0, 1.0]]))
    with pytest.raises(DomainError):
        RegionBoundary("joint", {}, np.array([[-0.5, 1.0]]))
    empty = RegionBoundary("gallager", {}, np.empty((0, 2)), empty=True)
    assert empty.points.shape == (0, 2)


def test_units_round_trip():
    rb = su_outer_box(pp=PP, **FIG1)
    back = rb.in_units("bits").in_units("nats")
    assert np.allclose(back.points, rb.points, rtol=1e-15)
    with pytest.raises(DomainError):
        rb.in_units("furlongs")
