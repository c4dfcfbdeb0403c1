"""Interface profiles, measurement/sampling geometry, and mesh builders."""

import numpy as np
import pytest

from roughlsm import (
    HalfDiskInterface,
    InterfaceProfile,
    MeasurementLine,
    Medium,
    SamplingGrid,
    build_half_disk_mesh,
    build_mesh,
    cubic_bspline,
)
from roughlsm.errors import ConfigError, MeshBudgetError
from roughlsm.geometry import MAX_MESH_CELLS


# ---------------------------------------------------------------- profiles

def test_bspline_partition_values():
    # piecewise cubic with support (-2, 2), peak at 0
    assert cubic_bspline(np.asarray([-2.0, 2.0])) == pytest.approx([0.0, 0.0])
    assert cubic_bspline(np.asarray([0.0]))[0] == pytest.approx(2.0 / 3.0)
    x = np.linspace(-3, 3, 601)
    v = cubic_bspline(x)
    assert np.all(v >= 0.0)
    assert np.all(v[np.abs(x) >= 2.0] == 0.0)


@pytest.mark.parametrize(
    "kind,radius,sign",
    [
        ("bspline_f1", 2.0, +1),      # single bump above the plane
        ("gaussians_f2", 5.0, -1),    # two dips below the plane
        ("oscillatory_f3", 4.0, 0),   # changes sign
        ("composite_f6", 7.0, 0),     # bump plus dip
    ],
)
def test_builtin_profile_support_and_sign(kind, radius, sign):
    prof = InterfaceProfile.builtin(kind)
    assert prof.support_radius == radius
    x = np.linspace(-radius - 2, radius + 2, 2001)
    v = prof(x)
    assert np.all(v[np.abs(x) >= radius] == 0.0)
    lo, hi = prof.height_range()
    assert lo <= 0.0 <= hi
    if sign > 0:
        assert lo == 0.0 and hi > 0.0
    elif sign < 0:
        assert hi == 0.0 and lo < 0.0
    else:
        assert lo < 0.0 < hi


def test_flat_profile():
    prof = InterfaceProfile.flat()
    assert prof.support_radius == 0.0
    assert prof(3.7) == 0.0
    assert prof.height_range() == (0.0, 0.0)


def test_unknown_profile_rejected():
    with pytest.raises(ConfigError):
        InterfaceProfile.builtin("wedge")


def test_tabulated_profile_interpolates_and_vanishes_outside():
    x = np.asarray([-1.0, 0.0, 1.0])
    f = np.asarray([0.0, 0.4, 0.0])
    prof = InterfaceProfile.from_table(x, f)
    assert prof.kind == "tabulated"
    assert prof(0.5) == pytest.approx(0.2)
    assert prof(5.0) == 0.0
    assert prof.support_radius == 1.0


def test_tabulated_profile_validation():
    with pytest.raises(ConfigError):
        InterfaceProfile.from_table(np.asarray([0.0, 0.0]), np.asarray([0.0, 0.0]))
    with pytest.raises(ConfigError):
        InterfaceProfile.from_table(np.asarray([-1.0, 1.0]), np.asarray([0.2, 0.0]))


def test_tabulated_profile_from_file(tmp_path):
    path = tmp_path / "prof.txt"
    np.savetxt(path, np.column_stack([[-2.0, 0.0, 2.0], [0.0, -0.3, 0.0]]))
    prof = InterfaceProfile.from_table_file(path)
    assert prof(0.0) == pytest.approx(-0.3)


# ------------------------------------------------- measurement and sampling

def test_measurement_line_points():
    line = MeasurementLine(15.0, 0.55, 5)
    pts = line.points()
    assert pts.shape == (5, 2)
    assert pts[0] == pytest.approx([-15.0, 0.55])
    assert pts[-1] == pytest.approx([15.0, 0.55])
    assert np.all(np.diff(pts[:, 0]) > 0)


def test_measurement_line_validation():
    with pytest.raises(ConfigError):
        MeasurementLine(-1.0, 0.5, 5)
    with pytest.raises(ConfigError):
        MeasurementLine(15.0, 0.55, 1)


def test_sampling_grid_axes_and_shape():
    grid = SamplingGrid((-10, 10), (-1, 0.5), 0.5, 0.1)
    assert grid.xs().shape == (41,)
    assert grid.ys().shape == (16,)
    assert grid.shape == (16, 41)
    assert grid.xs()[0] == -10.0 and grid.xs()[-1] == 10.0
    assert grid.ys()[0] == -1.0 and grid.ys()[-1] == pytest.approx(0.5)


def test_sampling_grid_points_ordering():
    grid = SamplingGrid((0, 1), (0, 1), 0.5, 0.5)
    pts = grid.points()
    # row-major, x1 fastest; first row is the top of the image
    assert pts.shape == (9, 2)
    assert pts[0] == pytest.approx([0.0, 1.0])
    assert pts[1] == pytest.approx([0.5, 1.0])
    assert pts[-1] == pytest.approx([1.0, 0.0])


def test_sampling_grid_single_point_axis():
    grid = SamplingGrid((0.0, 0.1), (0.0, 0.1), 0.5, 0.5)
    assert grid.shape == (1, 1)
    assert grid.points().shape == (1, 2)


def test_sampling_grid_validation():
    with pytest.raises(ConfigError):
        SamplingGrid((1, 0), (0, 1), 0.5, 0.5)
    with pytest.raises(ConfigError):
        SamplingGrid((0, 1), (0, 1), -0.5, 0.5)


def test_half_disk_depth():
    gr = HalfDiskInterface(2.0)
    assert gr.depth(0.0) == pytest.approx(-2.0)
    assert gr.depth(2.0) == 0.0
    assert gr.depth(-5.0) == 0.0
    x = np.linspace(-3, 3, 121)
    d = gr.depth(x)
    assert np.all(d <= 0.0)
    with pytest.raises(ConfigError):
        HalfDiskInterface(-1.0)


# ---------------------------------------------------------------- meshing

def test_mesh_respects_sign_regions(desk_medium):
    prof = InterfaceProfile.builtin("composite_f6")  # bump and dip
    mesh = build_mesh(prof, desk_medium, 0.1)
    assert mesh.n_cells > 0
    eta = desk_medium.eta
    c2 = mesh.centers[:, 1]
    f = prof(mesh.centers[:, 0])
    above = c2 > 0
    assert np.all(mesh.contrasts[above] == -eta)
    assert np.all(mesh.contrasts[~above] == eta)
    # every center lies strictly between the plane and the curve
    assert np.all((c2 < f) == above)
    assert np.all(np.abs(c2) > 0)


def test_mesh_edges_on_lattice(desk_medium):
    mesh = build_mesh(InterfaceProfile.builtin("bspline_f1"), desk_medium, 0.125)
    # centers sit at half-integer multiples of h in both coordinates
    ratios = mesh.centers / 0.125 - 0.5
    assert np.allclose(ratios, np.round(ratios), atol=1e-12)


def test_mesh_area_converges_to_region_area(desk_medium):
    prof = InterfaceProfile.builtin("bspline_f1")
    x = np.linspace(-2, 2, 40001)
    region = float(np.trapezoid(prof(x), x))
    coarse = abs(build_mesh(prof, desk_medium, 0.05).total_area() - region)
    fine = abs(build_mesh(prof, desk_medium, 0.0125).total_area() - region)
    assert fine < coarse
    assert fine < 0.01 * region


def test_mesh_flat_profile_is_empty(desk_medium):
    with pytest.warns(UserWarning):
        mesh = build_mesh(InterfaceProfile.flat(), desk_medium, 0.1)
    assert mesh.n_cells == 0
    assert mesh.areas.shape == (0,)


def test_mesh_budget_guard(desk_medium):
    with pytest.raises(MeshBudgetError):
        build_mesh(InterfaceProfile.builtin("bspline_f1"), desk_medium, 1e-4)


def test_half_disk_mesh_contrast_and_budget(desk_medium):
    gr = HalfDiskInterface(2.0)
    mesh = build_half_disk_mesh(gr, desk_medium, 0.1)
    assert mesh.n_cells > 0
    assert np.all(mesh.contrasts == desk_medium.eta)
    assert np.all(mesh.centers[:, 1] < 0)
    assert np.all(np.hypot(mesh.centers[:, 0], mesh.centers[:, 1]) < 2.0)
    # area approaches pi r^2 / 2
    assert mesh.total_area() == pytest.approx(0.5 * np.pi * 4.0, rel=0.05)
    with pytest.raises(MeshBudgetError) as err:
        build_half_disk_mesh(HalfDiskInterface(50.0), desk_medium, 0.1)
    assert "largest feasible radius" in str(err.value)
    assert build_half_disk_mesh(HalfDiskInterface(0.0), desk_medium, 0.1).n_cells == 0


def test_mesh_count_budget_is_enforced():
    assert MAX_MESH_CELLS == 20_000


def test_medium_properties():
    m = Medium(1.0, 2.0)
    assert m.eta == pytest.approx(-3.0)
    assert m.wavelength2 == pytest.approx(np.pi)
    assert m.kappa_at(0.3) == 1.0
    assert m.kappa_at(0.0) == 1.0   # the plane itself counts as upper
    assert m.kappa_at(-0.3) == 2.0
    with pytest.raises(ConfigError):
        Medium(0.0, 2.0)
