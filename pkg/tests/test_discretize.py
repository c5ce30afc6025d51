import math

import numpy as np
import pytest
import scipy.linalg as la

from landscape_counting.discretize import (DiscreteOperator, ScalarField, assemble, build_grid,
                                           laplacian_eigenvalues_1d, node_potential,
                                           restrict_interior)
from landscape_counting.potential import (DimensionError, NegativePotentialError,
                                          PolynomialPotential, SampledPotential, constant,
                                          harmonic, simon)


def test_grid_examples():
    g = build_grid(1, math.pi / 2, 1999)
    assert g.spacing == pytest.approx(math.pi / 2000, rel=1e-15)
    assert build_grid(2, 10.0, 255).spacing == 20 / 256
    with pytest.raises(ValueError):
        build_grid(1, 1.0, 2)


def test_node_layout():
    g = build_grid(2, 1.5, 5)
    h = g.spacing
    np.testing.assert_allclose(g.axis, -1.5 + h * np.arange(1, 6))
    c = g.coordinates()
    assert c.shape == (25, 2)
    # C order: last axis fastest
    np.testing.assert_allclose(c[1] - c[0], [0.0, h])
    np.testing.assert_allclose(c[5] - c[0], [h, 0.0])


def test_grid_guards():
    with pytest.raises(ValueError):
        build_grid(4, 1.0, 5)
    with pytest.raises(ValueError):
        build_grid(3, 1.0, 49)
    with pytest.raises(MemoryError):
        build_grid(2, 1.0, 1000, max_band_entries=1e6)
    with pytest.raises(ValueError):
        build_grid(1, 1.0, 10, margin_fraction=0.5)
    with pytest.raises(ValueError):
        build_grid(1, -1.0, 10)


def test_restrict_interior():
    g0 = build_grid(1, 1.0, 10)
    f = ScalarField(g0, np.arange(10.0))
    np.testing.assert_array_equal(restrict_interior(f), np.arange(10.0))
    g = build_grid(1, 1.0, 10, margin_fraction=0.2)
    np.testing.assert_array_equal(restrict_interior(ScalarField(g, np.arange(10.0))), np.arange(2, 8))
    g2 = build_grid(2, 1.0, 10, margin_fraction=0.2)
    assert restrict_interior(ScalarField(g2, np.zeros(100))).shape == (6, 6)


def test_field_stats_interior_by_default():
    g = build_grid(1, 1.0, 10, margin_fraction=0.2)
    f = ScalarField(g, np.arange(10.0))
    assert f.stats() == {"min": 2.0, "max": 7.0, "integral": pytest.approx(27 * g.spacing)}
    assert f.stats(full_box=True)["max"] == 9.0
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(3))


def test_stencil_1d():
    g = build_grid(1, 2.0, 3)  # h = 1
    a = assemble(None, g).to_dense()
    np.testing.assert_array_equal(a, [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])
    a4 = assemble(constant(4.0, 1), g).to_dense()
    np.testing.assert_array_equal(np.diag(a4), [6.0, 6.0, 6.0])


@pytest.mark.parametrize("d,n", [(1, 7), (2, 5), (3, 4)])
def test_stencil_structure(d, n):
    g = build_grid(d, 1.0, n)
    op = assemble(harmonic(d), g)
    a = op.to_dense()
    h = g.spacing
    assert np.array_equal(a, a.T)
    np.testing.assert_allclose(np.diag(a), 2 * d / h ** 2 + harmonic(d)(g.coordinates()))
    idx = np.indices(g.shape).reshape(d, -1).T
    dist = np.abs(idx[:, None, :] - idx[None, :, :]).sum(axis=-1)
    off = a - np.diag(np.diag(a))
    np.testing.assert_array_equal(off != 0, dist == 1)
    assert np.all(off[dist == 1] == -1 / h ** 2)
    assert op.bandwidth == n ** (d - 1)
    assert sorted(op.diagonals) == sorted({0} | {n ** (d - 1 - j) for j in range(d)})


def test_laplacian_eigenvalues_closed_form():
    for n, L in [(7, 1.0), (50, 3.0), (200, math.pi / 2)]:
        g = build_grid(1, L, n)
        ev = la.eigvalsh(assemble(None, g).to_dense())
        np.testing.assert_allclose(ev, laplacian_eigenvalues_1d(n, g.spacing), rtol=1e-10)


def test_ground_state_monotone_in_potential():
    for d, n in [(1, 40), (2, 12)]:
        g = build_grid(d, 2.0, n)
        free = la.eigvalsh(assemble(None, g).to_dense())[0]
        for p in (harmonic(d), constant(0.3, d)):
            assert la.eigvalsh(assemble(p, g).to_dense())[0] >= free
    g = build_grid(2, 2.0, 12)
    assert la.eigvalsh(assemble(simon(), g).to_dense())[0] >= la.eigvalsh(assemble(None, g).to_dense())[0]


def test_band_layouts_agree():
    g = build_grid(2, 1.0, 6)
    op = assemble(simon(), g)
    ab = op.lower_band()
    a = op.to_dense()
    for k in range(op.bandwidth + 1):
        np.testing.assert_array_equal(ab[k, : op.order - k], np.diagonal(a, -k))
    np.testing.assert_array_equal(DiscreteOperator.from_lower_band(ab).to_dense(), a)
    x = np.random.default_rng(0).normal(size=op.order)
    np.testing.assert_allclose(op.matvec(x), a @ x, rtol=1e-13)
    assert op.norm_inf() == pytest.approx(np.abs(a).sum(axis=1).max())


def test_operator_immutable():
    op = assemble(None, build_grid(1, 1.0, 5))
    with pytest.raises(ValueError):
        op.diagonals[0][0] = 1.0


def test_dimension_and_sign_errors():
    g = build_grid(2, 1.0, 5)
    with pytest.raises(DimensionError):
        assemble(harmonic(1), g)
    neg = SampledPotential.__new__(SampledPotential)
    neg.grid, neg.values, neg.dimension = g, -np.ones(g.num_nodes), 2
    with pytest.raises(NegativePotentialError):
        node_potential(neg, g)


def test_sampled_potential_on_own_grid():
    g = build_grid(2, 2.0, 9)
    vals = simon()(g.coordinates())
    np.testing.assert_array_equal(node_potential(SampledPotential(g, vals), g), vals)
