import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallhom.microstructure import (
    CellGeometry,
    ConductivityField,
    MaskFormatError,
    PhaseMask,
    assemble_conductivity,
    build_checkerboard,
    build_cross_cell,
    build_fiber_cell_3d,
    build_laminate,
    build_triaxial_fiber_cell,
    cross_fraction,
    format_mask,
    parse_mask,
    read_mask,
    resolution_for,
    write_mask,
)
from hallhom.tensor_core import PerturbedPhase


def test_geometry_validation():
    with pytest.raises(ValueError):
        CellGeometry.unit(2, 3)
    with pytest.raises(ValueError):
        CellGeometry(4, (1.0,) * 4, 8)
    g = CellGeometry(2, (2.0, 1.0), 16)
    assert g.shape == (32, 16)
    np.testing.assert_allclose(g.spacing, [1 / 16, 1 / 16])
    assert g.volume == 2.0


@pytest.mark.parametrize(
    "t, ell, res, expected, tol",
    [(0.25, 1.0, 64, 0.75, 1e-12), (0.05, 2.0, 256, 0.145, 2 / 256), (0.5, 1.0, 32, 1.0, 0.0)],
)
def test_cross_fraction_examples(t, ell, res, expected, tol):
    mask = build_cross_cell(t, ell, res)
    assert abs(mask.fraction - expected) <= tol
    assert cross_fraction(t, ell) == pytest.approx(expected)


def test_cross_rejects_underresolved_bar():
    with pytest.raises(ValueError, match="too coarse"):
        build_cross_cell(0.05, 1.0, 16)
    with pytest.raises(ValueError):
        build_cross_cell(0.6, 1.0, 16)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.45), st.sampled_from([1.0, 1.5, 2.0]))
def test_cross_fraction_converges_with_resolution(t, ell):
    exact = cross_fraction(t, ell)
    errs = [abs(build_cross_cell(t, ell, res).fraction - exact) for res in (64, 512)]
    assert errs[1] <= 4 / 512 + 1e-12
    assert errs[0] <= 4 / 64 + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.5), st.integers(10, 60).map(lambda n: 2 * n))
def test_cross_symmetries(t, res):
    try:
        f = build_cross_cell(t, 1.0, res).flags
    except ValueError:
        return
    np.testing.assert_array_equal(f, f[::-1, :])
    np.testing.assert_array_equal(f, f[:, ::-1])
    np.testing.assert_array_equal(f, f.T)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 0.45))
def test_fiber_symmetries(r):
    f = build_fiber_cell_3d(r, 24).flags
    np.testing.assert_array_equal(f, f.transpose(1, 0, 2))
    np.testing.assert_array_equal(f, f[::-1])
    assert (f == f[:, :, :1]).all()
    tri = build_triaxial_fiber_cell(r, 24).flags
    for perm in [(1, 2, 0), (2, 0, 1), (1, 0, 2)]:
        np.testing.assert_array_equal(tri, tri.transpose(perm))


@pytest.mark.parametrize("r, res, tol", [(0.2, 64, 4 / 64), (0.49, 32, 4 / 32)])
def test_fiber_fraction_examples(r, res, tol):
    assert abs(build_fiber_cell_3d(r, res).fraction - np.pi * r * r) <= tol


def test_fiber_boundary_ties_go_to_phase_2():
    # on an 8-grid the center (0.1875, 0.0625) lies on the circle of this radius
    r = np.hypot(0.1875, 0.0625)
    mask = build_fiber_cell_3d(r, 8)
    assert mask.flags[5, 4, 0] and mask.flags[4, 5, 0] and mask.flags[2, 3, 0]
    assert mask.flags[:, :, 0].sum() == 4 + 8


def test_triaxial_fraction_bound():
    r = 0.1
    theta = build_triaxial_fiber_cell(r, 64).fraction
    assert 3 * np.pi * r * r - 16 * r**3 - 4 / 64 <= theta <= 3 * np.pi * r * r + 4 / 64


def test_fiber_fraction_approaches_disc_area():
    mask = build_fiber_cell_3d(0.25, 64)
    assert mask.fraction == pytest.approx(np.pi / 16, rel=0.02)
    with pytest.raises(ValueError):
        build_fiber_cell_3d(0.05, 16)


def test_laminate_and_checkerboard():
    lam = build_laminate(1, 0.5, 16)
    assert lam.flags[:8].all() and not lam.flags[8:].any()
    lam3 = build_laminate(3, 0.25, 8, dim=3)
    assert lam3.fraction == 0.25
    cb = build_checkerboard(8)
    assert cb.fraction == 0.5
    np.testing.assert_array_equal(cb.flags, ~cb.flags[::-1, :])
    with pytest.raises(ValueError):
        build_checkerboard(9)


def test_mask_is_read_only():
    mask = build_checkerboard(8)
    with pytest.raises(ValueError):
        mask.flags[0, 0] = True


def test_assemble_checks_dimension():
    mask = build_checkerboard(8)
    with pytest.raises(ValueError, match="scalar"):
        assemble_conductivity(mask, PerturbedPhase(1.0), PerturbedPhase(2.0), [0, 0, 1])
    f = assemble_conductivity(mask, PerturbedPhase(1.0, 1.0), PerturbedPhase(4.0), 1.0)
    assert f.tensors.shape == (64, 2, 2)
    assert f.contrast == pytest.approx(4.0, rel=0.2)
    assert f.coercivity == pytest.approx(1.0)
    assert not f.is_symmetric()
    np.testing.assert_array_equal(f.transpose().tensors, f.tensors.transpose(0, 2, 1))


def test_conductivity_requires_coercivity():
    g = CellGeometry.unit(2, 4)
    with pytest.raises(ValueError):
        ConductivityField.constant(g, np.diag([1.0, -1.0]))


def test_scalar_values_layout():
    mask = build_laminate(2, 0.5, 8)
    f = assemble_conductivity(mask, PerturbedPhase(1.0), PerturbedPhase(4.0), 0.0)
    v = f.scalar_values()
    np.testing.assert_array_equal(v, np.where(mask.flags, 4.0, 1.0))


# --- mask files ------------------------------------------------------------------


@pytest.mark.parametrize(
    "mask",
    [build_cross_cell(0.25, 1.0, 8), build_cross_cell(0.1, 2.0, 20), build_fiber_cell_3d(0.3, 8)],
    ids=["cross", "cross-ell2", "fiber"],
)
def test_mask_round_trip(mask, tmp_path):
    path = tmp_path / "m.txt"
    write_mask(mask, path)
    assert read_mask(path) == mask
    assert format_mask(parse_mask(format_mask(mask))) == format_mask(mask)


def test_mask_text_layout():
    text = format_mask(build_cross_cell(0.25, 1.0, 4))
    assert text == "HHOM-MASK v1\nd=2 nx=4 ny=4 ell=1.0\n0110\n1111\n1111\n0110\n"


@pytest.mark.parametrize(
    "text, line",
    [
        ("HHOM-MASK v2\nd=2 nx=4 ny=4 ell=1.0\n", 1),
        ("HHOM-MASK v1\nd=4 nx=4 ny=4 ell=1.0\n", 2),
        ("HHOM-MASK v1\nd=2 nx=4 ny=4 ell=1.0 color=red\n", 2),
        ("HHOM-MASK v1\nd=2 nx=4 ny=4 ell=1.0\n0110\n1111\n1121\n0110\n", 5),
        ("HHOM-MASK v1\nd=2 nx=4 ny=4 ell=1.0\n0110\n1111\n111\n0110\n", 5),
        ("HHOM-MASK v1\nd=2 nx=4 ny=4 ell=1.0\n0110\n1111\n", 5),
        ("HHOM-MASK v1\nd=2 nx=5 ny=4 ell=1.0\n01100\n11110\n11110\n01100\n", 2),
        ("HHOM-MASK v1\nd=2 nx=4 ny=4 ell=1.0\n0110\n1111\n1111\n0110", 6),
    ],
    ids=["magic", "dim4", "unknown-key", "bad-char", "short-row", "missing-rows", "nx-mismatch", "no-newline"],
)
def test_mask_parse_errors_report_line(text, line):
    with pytest.raises(MaskFormatError) as info:
        parse_mask(text)
    assert info.value.line == line


def test_resolution_for():
    assert resolution_for(0.1, 8) == 80
    assert resolution_for(0.2, 6, cap=16) == 16
    assert resolution_for(10.0, 1) == 4


def test_phase_mask_shape_check():
    with pytest.raises(ValueError):
        PhaseMask(CellGeometry.unit(2, 4), np.zeros((4, 5), dtype=bool))
