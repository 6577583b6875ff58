import numpy as np
import pytest

from reticulate import fixtures as fx
from reticulate.analysis import (
    BallMassProfile,
    DegenerateProfile,
    Infeasible,
    NotStationary,
    RadiusTooLarge,
    balance_report,
    ball_mass_profile,
    cantor_box_mass_profile,
    cantor_cdf,
    estimate_local_dimension,
    irreducible,
    maximality_check,
    monotonicity_check,
    stationary_weights,
    valency,
)
from reticulate.core import Edge, Mode, NetworkMedium, PeriodicNetwork, TorusPoint
from reticulate.topology import planarize


# -- balance ---------------------------------------------------------------


def test_balance_square_grid_node():
    rep = balance_report(fx.square_grid())
    assert rep.balanced
    assert rep.max_residual <= 1e-15


def test_balance_y_junction_center():
    rep = balance_report(fx.y_junction())
    # unit vectors at 120 degree spacing cancel at the hub
    assert rep.per_node[0].norm <= 1e-12
    assert not rep.balanced  # the three tips are unbalanced


def test_balance_t_junction():
    rep = balance_report(fx.t_junction())
    assert np.allclose(rep.per_node[0].residual, [0.0, 1.0], atol=1e-15)
    assert rep.max_residual == pytest.approx(1.0)
    assert not rep.balanced


def test_balance_linear_in_weights():
    med = fx.t_junction(weight=0.8)
    doubled = NetworkMedium(med.network.with_weights(2 * med.network.weights()), med.mode)
    r1 = balance_report(med)
    r2 = balance_report(doubled)
    for a, b in zip(r1.per_node, r2.per_node):
        assert np.array_equal(2.0 * a.residual, b.residual)


def test_balance_isotropic_note():
    rep = balance_report(fx.square_grid(mode=Mode.ISOTROPIC))
    assert rep.mode_note is not None
    assert rep.balanced


# -- maximality ---------------------------------------------------------------


def test_maximality_square_grid_tangential():
    mr = maximality_check(fx.square_grid())
    assert mr.is_maximal
    assert np.linalg.norm(mr.gap) <= 1e-12


def test_maximality_square_grid_isotropic():
    mr = maximality_check(fx.square_grid(mode=Mode.ISOTROPIC))
    assert not mr.is_maximal
    assert np.linalg.norm(mr.gap - np.eye(2)) <= 1e-12


def test_maximality_t_junction():
    mr = maximality_check(fx.t_junction())
    assert not mr.is_maximal
    assert mr.gap_norm > 1e-6


# -- stationary weights ----------------------------------------------------------


def test_stationary_weights_honeycomb_equal():
    sw = stationary_weights(fx.honeycomb().network, seed=4)
    assert not isinstance(sw, Infeasible)
    w = sw.weights()
    assert np.allclose(w, w[0], rtol=1e-9)
    assert balance_report(NetworkMedium(sw, Mode.TANGENTIAL)).balanced


def test_stationary_weights_square_grid_sample():
    sw = stationary_weights(fx.square_grid().network, seed=0)
    assert not isinstance(sw, Infeasible)
    rep = balance_report(NetworkMedium(sw, Mode.TANGENTIAL))
    assert rep.max_residual <= 1e-12
    assert np.all(sw.weights() > 0)


def test_stationary_weights_t_junction_infeasible():
    assert isinstance(stationary_weights(fx.t_junction().network, seed=0), Infeasible)


def test_stationary_weights_line_union():
    med = fx.random_line_union(3)
    net = planarize(med.network)
    sw = stationary_weights(net, seed=3)
    assert not isinstance(sw, Infeasible)
    assert balance_report(NetworkMedium(sw, Mode.TANGENTIAL)).balanced


# -- valency -------------------------------------------------------------------


def test_valency_square_grid():
    assert valency(fx.square_grid().network).max == 4


def test_valency_honeycomb():
    v = valency(fx.honeycomb().network)
    assert v.max == 3
    assert all(c == 3 for c in v.per_node)


def test_valency_empty():
    assert valency(PeriodicNetwork(2, [(0.1, 0.1)], [])).max == 0


# -- irreducibility ----------------------------------------------------------------


def test_irreducible_square_grid_reducible():
    r = irreducible(fx.square_grid().network)
    assert r.verdict == "reducible"
    assert r.witness == ((0,), (1,))
    assert r.checked_subsets == 4


def test_irreducible_honeycomb():
    r = irreducible(fx.honeycomb().network)
    assert r.verdict == "irreducible"


def test_irreducible_requires_balance():
    with pytest.raises(NotStationary):
        irreducible(fx.t_junction().network)


def test_irreducible_budget_unknown():
    r = irreducible(fx.diamond_pattern(7).network, budget_edges=16)
    assert r.verdict == "unknown"


def test_irreducible_invariant_under_reindex_and_scale():
    net = fx.honeycomb().network
    scaled = net.with_weights(3.7 * net.weights())
    assert irreducible(scaled).verdict == "irreducible"
    perm = [3, 1, 5, 0, 2, 4]
    reordered = PeriodicNetwork(2, [p.coords for p in net.nodes],
                                [net.edges[i] for i in perm])
    assert irreducible(reordered).verdict == "irreducible"
    grid = fx.square_grid().network
    grid2 = PeriodicNetwork(2, [p.coords for p in grid.nodes],
                            [grid.edges[1], grid.edges[0]])
    assert irreducible(grid2).verdict == "reducible"


# -- ball mass ------------------------------------------------------------------------


def test_ball_mass_line_through_center():
    a = 0.7
    prof = ball_mass_profile(fx.axis_loop(weight=a), (0.3, 0.0), np.linspace(0.02, 0.4, 12))
    assert np.allclose(prof.masses / prof.radii, 2 * a, atol=1e-12)


def test_ball_mass_offset_line_chords():
    d = 0.1
    prof = ball_mass_profile(fx.axis_loop(), (0.3, d), [0.05, 0.2, 0.3])
    expected = [0.0, 2 * np.sqrt(0.2**2 - d**2), 2 * np.sqrt(0.3**2 - d**2)]
    assert np.allclose(prof.masses, expected, atol=1e-12)


def test_ball_mass_y_junction_small_r():
    w = 1.3
    med = fx.y_junction(weight=w)
    prof = ball_mass_profile(med, (0.5, 0.5), [0.01, 0.05, 0.1])
    assert np.allclose(prof.masses, 3 * w * prof.radii, atol=1e-12)


def test_ball_mass_isotropic_trace_factor():
    med_t = fx.axis_loop()
    med_i = NetworkMedium(med_t.network, Mode.ISOTROPIC)
    r = [0.1, 0.2]
    mt = ball_mass_profile(med_t, (0.3, 0.0), r).masses
    mi = ball_mass_profile(med_i, (0.3, 0.0), r).masses
    assert np.allclose(mi, 2 * mt, atol=1e-14)


def test_ball_mass_radius_too_large():
    with pytest.raises(RadiusTooLarge):
        ball_mass_profile(fx.axis_loop(), (0.0, 0.0), [0.1, 0.5])


def test_ball_mass_nondecreasing():
    for seed in range(5):
        med = fx.random_network(seed)
        prof = ball_mass_profile(med, (0.5, 0.5), np.linspace(0.01, 0.45, 30))
        assert np.all(np.diff(prof.masses) >= -1e-15)


# -- monotonicity -----------------------------------------------------------------------


def test_monotonicity_square_grid_maximal():
    centers = [(0.0, 0.0), (0.37, 0.0), (0.0, 0.62)]
    res = monotonicity_check(fx.square_grid(), centers, np.linspace(0.008, 0.4, 50), 1.0)
    assert res.passed


def test_monotonicity_dead_end_fails():
    # center just past the stem tip: mass saturates while r keeps growing
    res = monotonicity_check(fx.t_junction(), [(0.5, 0.74)], np.linspace(0.008, 0.4, 50), 1.0)
    assert not res.passed
    assert res.worst_violation > 0


def test_monotonicity_alpha_zero_trivial():
    res = monotonicity_check(fx.t_junction(), [(0.5, 0.74), (0.5, 0.5)],
                             np.linspace(0.008, 0.4, 50), 0.0)
    assert res.passed


def test_single_line_equality_case():
    prof = ball_mass_profile(fx.axis_loop(weight=2.0), (0.11, 0.0), np.linspace(0.01, 0.4, 40))
    ratios = prof.masses / prof.radii
    assert np.max(np.abs(ratios - ratios[0])) <= 1e-12


# -- local dimension ----------------------------------------------------------------------


def test_dimension_straight_line():
    radii = [3.0**-j for j in range(8, 1, -1)]
    prof = ball_mass_profile(fx.axis_loop(), (0.3, 0.0), radii)
    est = estimate_local_dimension(prof)
    assert est.lower == pytest.approx(1.0, abs=0.01)
    assert est.upper == pytest.approx(1.0, abs=0.01)


def test_dimension_cantor_line_fixture():
    radii = [3.0**-j for j in range(8, 1, -1)]
    est = estimate_local_dimension(cantor_box_mass_profile(0.0, radii))
    target = 1.0 + np.log(2.0) / np.log(3.0)
    assert est.lower == pytest.approx(target, abs=0.05)
    assert est.upper == pytest.approx(target, abs=0.05)


def test_dimension_atom_fixture():
    radii = np.array([1e-4, 1e-3, 1e-2, 1e-1, 0.4])
    prof = BallMassProfile(center=TorusPoint((0.0, 0.0)), radii=radii,
                           masses=np.full(len(radii), 0.25))
    est = estimate_local_dimension(prof)
    assert est.lower == pytest.approx(0.0, abs=1e-12)
    assert est.upper == pytest.approx(0.0, abs=1e-12)


def test_dimension_preconditions():
    radii = np.array([0.01, 0.02, 0.04, 0.08])
    prof = BallMassProfile(TorusPoint((0, 0)), radii, np.zeros(4))
    with pytest.raises(ValueError):
        estimate_local_dimension(prof)  # spans < 2 decades
    radii = np.array([1e-4, 1e-3, 1e-2, 1e-1])
    prof = BallMassProfile(TorusPoint((0, 0)), radii, np.zeros(4))
    with pytest.raises(DegenerateProfile):
        estimate_local_dimension(prof)


def test_cantor_cdf_exact_values():
    assert cantor_cdf(1.0 / 3.0) == pytest.approx(0.5)
    assert cantor_cdf(1.0 / 9.0) == pytest.approx(0.25)
    assert cantor_cdf(0.5) == pytest.approx(0.5)
    for j in range(1, 12):
        assert cantor_cdf(3.0**-j) == pytest.approx(2.0**-j, rel=1e-12)


# -- quantified balanced <-> maximal equivalence -------------------------------------------


def test_balanced_iff_maximal_quantified():
    from reticulate.core import mass_tensor

    rng = np.random.default_rng(99)
    for seed in range(12):
        med = fx.random_line_union(seed)
        net = planarize(med.network)
        sw = stationary_weights(net, seed=seed)
        assert not isinstance(sw, Infeasible)
        m = NetworkMedium(sw, Mode.TANGENTIAL)
        mr = maximality_check(m)
        assert mr.gap_norm <= 1e-8 * np.linalg.norm(mass_tensor(m))
        # random reweighting breaks balance and opens a gap
        w = rng.uniform(0.1, 2.0, size=len(net.edges))
        m2 = NetworkMedium(net.with_weights(w), Mode.TANGENTIAL)
        rep = balance_report(m2)
        if rep.max_residual >= 1e-3:
            assert maximality_check(m2).gap_norm >= 1e-6


def test_dimension_bound_on_maximal_fixtures():
    # lower local dimension >= 1 at support points of maximal media
    radii = np.geomspace(2e-3, 0.3, 12)
    for med, center in [
        (fx.square_grid(), (0.25, 0.0)),
        (fx.honeycomb(), (0.25, 0.05)),
        (fx.diamond_pattern(3), (1.0 / 6.0, 0.5)),
    ]:
        prof = ball_mass_profile(med, center, radii)
        est = estimate_local_dimension(prof)
        assert est.lower >= 1.0 - 0.02
