import math

import numpy as np
import pytest

from radrelax.disc2d import (
    DiscField,
    angular_average,
    averaged_ray_energy_check,
    colinearity_defect,
    energy_2d,
    ray_profile,
    _cell_gradients,
)
from radrelax.potentials import Potential1D, ProblemSpec

from conftest import make_prototype_spec

N = 129
R = 1.0


def _cone(n=N, radius=R):
    return DiscField.from_function(
        lambda X, Y: radius - np.sqrt(X * X + Y * Y), n, radius)


def _tilted(n=N, radius=R):
    return DiscField.from_function(
        lambda X, Y: X * (radius - np.sqrt(X * X + Y * Y)), n, radius)


@pytest.fixture(scope="module")
def spec():
    return make_prototype_spec()


def test_zero_field_energy_is_disc_area(spec):
    # W(0) = 1 and G(0) = 0, so the energy reduces to the disc area
    e = energy_2d(DiscField.zeros(N, R), spec)
    assert abs(e - math.pi) <= 1e-3


def test_cone_energy_matches_radial_value(spec):
    e = energy_2d(_cone(), spec)
    assert abs(e + math.pi / 6.0) <= 0.02 * (math.pi / 6.0)


def test_offcenter_cone_envelope_gradient_term_is_zero():
    # unit cone at (0.5, 0) inside a radius-2 disc; every bilinear cell
    # gradient has norm at most 1, where the double-well envelope is flat
    spec0 = ProblemSpec(
        dimension=2, radius=2.0, p=4.0,
        W=Potential1D(kind="poly_in_t_squared", coefficients=(1.0, -2.0, 1.0)),
        G=Potential1D(kind="poly_in_t_squared", coefficients=(0.0,)))
    fld = DiscField.from_function(
        lambda X, Y: np.clip(1.0 - np.sqrt((X - 0.5) ** 2 + Y * Y), 0.0, None),
        N, 2.0)
    assert energy_2d(fld, spec0, use_envelope=True) == 0.0


def test_energy_2d_rejects_wrong_dimension_and_radius(spec):
    spec3 = ProblemSpec(dimension=3, radius=R, p=4.0, W=spec.W, G=spec.G,
                        shape_flag="G2")
    with pytest.raises(ValueError, match="dimension 2"):
        energy_2d(DiscField.zeros(N, R), spec3)
    with pytest.raises(ValueError, match="radius"):
        energy_2d(DiscField.zeros(N, 2.0), spec)


def test_ray_profile_cone_exact_on_axis():
    prof = ray_profile(_cone(), 0.0)
    assert np.abs(prof.u - (R - prof.grid.nodes)).max() <= 1e-14


def test_ray_profile_tilted_field():
    fld = _tilted()
    p0 = ray_profile(fld, 0.0)
    r = p0.grid.nodes
    assert np.abs(p0.u - r * (R - r)).max() <= 5.0 * fld.h ** 2
    p90 = ray_profile(fld, math.pi / 2.0)
    assert np.abs(p90.u).max() <= 1e-12


def test_ray_profiles_respect_grid_symmetry():
    fld = DiscField.random_smooth(N, R, seed=5)
    sym = DiscField(N, R, fld.values + fld.values[::-1, :])
    a = ray_profile(sym, math.pi / 3.0)
    b = ray_profile(sym, math.pi - math.pi / 3.0)
    assert np.abs(a.u - b.u).max() <= 1e-12


def test_ray_slopes_bounded_by_planar_gradient():
    fld = DiscField.random_smooth(N, R, seed=3)
    ux, uy, _, _, _ = _cell_gradients(fld)
    gmax = float(np.hypot(ux, uy).max())
    smax = max(float(np.abs(ray_profile(fld, 2.0 * math.pi * k / 16).slopes).max())
               for k in range(16))
    assert smax <= gmax + 5.0 * fld.h


def test_ray_average_radial_field_two_sided(spec):
    rep = averaged_ray_energy_check(_cone(), spec, n_thetas=64)
    assert rep.passes
    assert abs(rep.lhs - rep.rhs) <= 0.01
    assert float(np.ptp(rep.per_theta)) <= 0.01


def test_ray_average_tilted_field(spec):
    rep = averaged_ray_energy_check(_tilted(), spec, n_thetas=64)
    assert rep.passes
    assert abs(rep.lhs - rep.rhs) <= 0.01


def test_ray_average_random_fields_pass(spec):
    for seed in range(5):
        fld = DiscField.random_smooth(65, R, seed=seed)
        rep = averaged_ray_energy_check(fld, spec, n_thetas=32)
        assert rep.passes, seed
        assert rep.tol == 8.0 * fld.h


def test_ray_average_report_dict(spec):
    d = averaged_ray_energy_check(_cone(), spec, n_thetas=8).to_dict()
    assert sorted(d.keys()) == ["lhs", "passes", "per_theta_energies",
                                "rhs", "tol"]
    assert len(d["per_theta_energies"]) == 8


def test_ray_average_needs_a_ray(spec):
    with pytest.raises(ValueError, match="at least one"):
        averaged_ray_energy_check(_cone(), spec, n_thetas=0)


def test_colinearity_radial_field_small():
    fld = _cone()
    assert colinearity_defect(fld) <= 5.0 * fld.h


def test_colinearity_tilted_field_large():
    assert colinearity_defect(_tilted()) >= 0.5


def test_colinearity_zero_field():
    assert colinearity_defect(DiscField.zeros(N, R)) == 0.0


def test_colinearity_invariances():
    fld = _tilted()
    base = colinearity_defect(fld)
    shifted = fld.values.copy()
    shifted[fld.mask] += 3.7
    assert abs(colinearity_defect(DiscField(N, R, shifted)) - base) <= 1e-12
    assert abs(colinearity_defect(DiscField(N, R, np.rot90(fld.values)))
               - base) <= 1e-12


def test_angular_average_removes_defect():
    mix = DiscField.from_function(
        lambda X, Y: (1.0 + 0.8 * X) * (R - np.sqrt(X * X + Y * Y)), N, R)
    defects = []
    avg = angular_average(mix)
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        blend = DiscField(N, R, (1.0 - t) * mix.values + t * avg.values)
        defects.append(colinearity_defect(blend))
    assert all(b < a for a, b in zip(defects, defects[1:]))
    assert defects[-1] <= 5.0 * mix.h


def test_csv_round_trip(tmp_path):
    fld = DiscField.random_smooth(33, 1.5, seed=9)
    path = str(tmp_path / "field.csv")
    fld.to_csv(path)
    back = DiscField.from_csv(path)
    assert back.n == fld.n
    assert back.radius == fld.radius
    assert np.array_equal(back.values, fld.values)


def test_from_csv_errors(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("r,u,du\n0,0,0\n")
    with pytest.raises(ValueError, match="header"):
        DiscField.from_csv(str(bad_header))
    not_square = tmp_path / "b.csv"
    not_square.write_text("x,y,u\n0.0,0.0,1.0\n1.0,0.0,1.0\n")
    with pytest.raises(ValueError, match="square"):
        DiscField.from_csv(str(not_square))
    bad_value = tmp_path / "c.csv"
    bad_value.write_text("x,y,u\n0.0,0.0,oops\n")
    with pytest.raises(ValueError, match="line 2"):
        DiscField.from_csv(str(bad_value))


def test_grid_validation():
    with pytest.raises(ValueError, match="odd"):
        DiscField.zeros(64, R)
    with pytest.raises(ValueError, match="at least 33"):
        DiscField.zeros(17, R)
    with pytest.raises(ValueError, match="radius"):
        DiscField.zeros(33, 0.0)
    with pytest.raises(ValueError, match="shape"):
        DiscField(33, R, np.zeros((33, 34)))


def test_nodes_outside_disc_are_zeroed():
    fld = DiscField.from_function(lambda X, Y: np.ones_like(X), 33, R)
    assert np.all(fld.values[~fld.mask] == 0.0)
    assert np.all(fld.values[fld.mask] == 1.0)
    assert not fld.mask[0, 0]
