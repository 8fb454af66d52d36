import math

import numpy as np
import pytest
from scipy import linalg

from dampwave.errors import InvalidConfigError
from dampwave.grid import (
    Field,
    RegionSpec,
    apply_laplacian,
    build_grid,
    h1_inner,
    h1_seminorm_sq,
    l2_norm_sq,
    laplacian_eigenvalues,
    laplacian_matrix,
    region_indicator,
    sine_mode,
)


def test_build_grid_spacing_and_nodes():
    g = build_grid(1, 1.0)
    assert g.h == 0.5
    np.testing.assert_allclose(g.nodes, [0.5])

    g = build_grid(3, 1.0)
    assert g.h == 0.25
    np.testing.assert_allclose(g.nodes, [0.25, 0.5, 0.75])

    g = build_grid(199, 2.0)
    assert g.h == pytest.approx(0.01, rel=1e-15)
    assert g.h * (g.n_interior + 1) == pytest.approx(2.0, rel=1e-15)
    assert np.all((g.nodes > 0) & (g.nodes < 2.0))


@pytest.mark.parametrize("n, L", [(0, 1.0), (3, 0.0), (3, -1.0), (2.5, 1.0)])
def test_build_grid_rejects_bad_input(n, L):
    with pytest.raises(InvalidConfigError):
        build_grid(n, L)


def test_field_validates_shape_and_values(grid3):
    with pytest.raises(InvalidConfigError):
        Field(np.zeros(4), grid3)
    with pytest.raises(InvalidConfigError):
        Field(np.array([0.0, np.nan, 1.0]), grid3)
    f = Field(np.ones(3), grid3)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_laplacian_stencil(grid3):
    assert np.all(apply_laplacian(Field.zeros(grid3)).values == 0.0)
    out = apply_laplacian(Field(np.array([1.0, 0.0, 0.0]), grid3))
    np.testing.assert_allclose(out.values, np.array([-2.0, 1.0, 0.0]) / grid3.h ** 2)


def test_sine_mode_is_eigenvector(grid3):
    lam = laplacian_eigenvalues(grid3)
    assert lam[0] == pytest.approx(9.3726, abs=1e-4)
    for k in range(1, 4):
        f = Field(sine_mode(grid3, k), grid3)
        np.testing.assert_allclose(apply_laplacian(f).values, -lam[k - 1] * f.values, atol=1e-12)


def test_closed_form_eigenvalues_match_dense_eigensolve():
    g = build_grid(20, 1.0)
    dense = -laplacian_matrix(g).toarray()
    np.testing.assert_allclose(np.sort(linalg.eigvalsh(dense)), laplacian_eigenvalues(g), rtol=0, atol=1e-10)


def test_eigenvalues_converge_at_second_order():
    for n in (9, 19, 39, 79):
        g = build_grid(n, 1.0)
        lam = laplacian_eigenvalues(g)
        for k in (1, 2):
            assert abs(lam[k - 1] - (k * math.pi) ** 2) <= (k * math.pi) ** 4 / 12.0 * g.h ** 2 * 1.01


def test_norms_of_first_sine_mode():
    g = build_grid(199, 1.0)
    f = Field(sine_mode(g, 1), g)
    assert l2_norm_sq(f) == pytest.approx(0.5, abs=1e-4)
    assert h1_seminorm_sq(f) == pytest.approx(math.pi ** 2 / 2.0, abs=1e-2)
    assert l2_norm_sq(Field.zeros(g)) == 0.0
    assert h1_seminorm_sq(Field.zeros(g)) == 0.0


def test_summation_by_parts_and_poincare(rng):
    g = build_grid(31, 1.0)
    lam1 = laplacian_eigenvalues(g)[0]
    for _ in range(100):
        f = Field(rng.standard_normal(g.n_interior), g)
        sbp = g.h * float(np.dot(f.values, -apply_laplacian(f).values))
        assert sbp == pytest.approx(h1_seminorm_sq(f), rel=1e-12)
        assert h1_inner(f.values, f.values, g.h) == pytest.approx(h1_seminorm_sq(f), rel=1e-14)
        assert l2_norm_sq(f) <= h1_seminorm_sq(f) / lam1 * (1.0 + 1e-12)


def test_region_indicator_examples(grid3):
    np.testing.assert_array_equal(region_indicator(RegionSpec.of([(0, 1)]), grid3).values, [1, 1, 1])
    np.testing.assert_array_equal(region_indicator(RegionSpec.of([(0.4, 0.6)]), grid3).values, [0, 1, 0])
    with pytest.raises(InvalidConfigError):
        region_indicator(RegionSpec.of([(2, 3)]), grid3)
    with pytest.raises(InvalidConfigError):
        region_indicator(RegionSpec.of([(0.3, 0.4)]), grid3)


def test_region_spec_normalisation():
    assert RegionSpec.of([(0.3, 0.6), (0.1, 0.4)]).intervals == ((0.1, 0.6),)
    assert RegionSpec.of([(0.1, 0.2), (0.5, 0.7)]).intervals == ((0.1, 0.2), (0.5, 0.7))
    with pytest.raises(InvalidConfigError):
        RegionSpec.of([(0.5, 0.5)])
    with pytest.raises(InvalidConfigError):
        RegionSpec.of([])
