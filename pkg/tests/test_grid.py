import numpy as np
import pytest

from kompaneets.errors import InvalidMeshSpec, LengthMismatch, OutOfDomain
from kompaneets.grid import (
    CANONICAL_M,
    CANONICAL_R,
    Mesh,
    build_geometric_mesh,
    coarsen,
    interpolate,
    refine,
)


def test_three_cell_doubling():
    m = build_geometric_mesh(3, 7.0, 4.0)
    np.testing.assert_allclose(m.nodes, [0, 1, 3, 7], rtol=1e-12)
    np.testing.assert_allclose(m.spacings, [1, 2, 4], rtol=1e-12)
    assert m.ratio == pytest.approx(2.0, rel=1e-12)


def test_ratio_constant_and_sum_exact():
    m = build_geometric_mesh(100, 10.0, 0.5)
    dx = m.spacings
    assert np.max(np.abs(dx[1:] / dx[:-1] - m.ratio)) < 1e-12
    assert m.nodes[-1] == 10.0
    assert abs(dx.sum() - 10.0) < 1e-12 * 10.0
    assert m.spacings[-1] == pytest.approx(0.5, rel=1e-12)


def test_canonical_first_spacing(canon):
    assert canon.M == CANONICAL_M and canon.R == CANONICAL_R
    assert abs(canon.nodes[1] / 1.03e-7 - 1) < 0.02


def test_deterministic():
    a = build_geometric_mesh(500, 30.0, 0.2)
    b = build_geometric_mesh(500, 30.0, 0.2)
    assert a.nodes.tobytes() == b.nodes.tobytes()


@pytest.mark.parametrize("M,R,ls", [(2, 1.0, 0.5), (10, 1.0, 0.05), (10, 1.0, 1.5), (10, -1.0, 0.1),
                                    (10, 1.0, 0.0), (3.5, 1.0, 0.5)])
def test_invalid_specs(M, R, ls):
    with pytest.raises(InvalidMeshSpec):
        build_geometric_mesh(M, R, ls)


def test_nodes_read_only(small_mesh):
    with pytest.raises(ValueError):
        small_mesh.nodes[3] = 1.0


def test_mesh_rejects_bad_nodes():
    with pytest.raises(InvalidMeshSpec):
        Mesh(np.array([0.0, 2.0, 1.0]))
    with pytest.raises(InvalidMeshSpec):
        Mesh(np.array([0.1, 1.0]))


def test_interpolate_examples():
    m = build_geometric_mesh(3, 7.0, 4.0)
    assert interpolate(m, [0, 2, 2, 0], 2.0) == pytest.approx(2.0)
    assert interpolate(m, [0, 4, 0, 0], 2.0) == pytest.approx(2.0)
    for k, xk in enumerate(m.nodes):
        assert interpolate(m, [5, 6, 7, 8], xk) == 5 + k
    with pytest.raises(OutOfDomain):
        interpolate(m, [0, 0, 0, 0], 7.5)
    with pytest.raises(OutOfDomain):
        interpolate(m, [0, 0, 0, 0], -1e-9)
    with pytest.raises(LengthMismatch):
        interpolate(m, [0, 0, 0], 1.0)


def test_csv_round_trip(small_mesh):
    text = small_mesh.to_csv()
    assert text.splitlines()[0] == "index,x"
    again = Mesh.from_csv(text)
    assert again.nodes.tobytes() == small_mesh.nodes.tobytes()


def test_refine_is_nested(small_mesh):
    fine = refine(small_mesh)
    assert fine.M == 2 * small_mesh.M
    np.testing.assert_allclose(fine.nodes[::2], small_mesh.nodes, rtol=1e-9, atol=1e-15)
    back = coarsen(fine)
    np.testing.assert_allclose(back.nodes, small_mesh.nodes, rtol=1e-9, atol=1e-15)
