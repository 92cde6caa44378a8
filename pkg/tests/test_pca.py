import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arrayheal.pca import (
    DataMatrix, DegenerateColumnError, ModelMismatchError, NoResidualSpaceError,
    component_count, decompose, dumps, fit, loads, normalize_test, symmetric_eigh,
)


def ids(n):
    return tuple(f"U{k}" for k in range(n))


def random_matrix(rng, rows, n):
    mix = rng.normal(size=(n, n))
    return rng.normal(size=(rows, n)) @ mix + rng.normal(size=n) * 5


def eig2_oracle(a):
    tr, det = a[0, 0] + a[1, 1], a[0, 0] * a[1, 1] - a[0, 1] ** 2
    disc = math.sqrt(max(tr * tr / 4 - det, 0.0))
    return np.array([tr / 2 + disc, tr / 2 - disc])


def eig3_oracle(a):
    # closed-form roots of the characteristic cubic of a symmetric 3x3 matrix
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = np.trace(a) / 3
    p2 = sum((a[i, i] - q) ** 2 for i in range(3)) + 2 * p1
    p = math.sqrt(p2 / 6)
    if p == 0:
        return np.full(3, q)
    b = (a - q * np.eye(3)) / p
    r = np.clip(np.linalg.det(b) / 2, -1, 1)
    phi = math.acos(r) / 3
    l1 = q + 2 * p * math.cos(phi)
    l3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    return np.array([l1, 3 * q - l1 - l3, l3])


def null_vector(a, lam):
    m = a - lam * np.eye(a.shape[0])
    if a.shape[0] == 2:
        cands = [np.array([m[0, 1], -m[0, 0]]), np.array([m[1, 1], -m[1, 0]])]
    else:
        cands = [np.cross(m[i], m[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    v = max(cands, key=np.linalg.norm)
    return v / np.linalg.norm(v)


def gram_schmidt(cols):
    basis = []
    for c in cols.T:
        v = c.astype(float).copy()
        for b in basis:
            v -= (b @ v) * b
        basis.append(v / np.linalg.norm(v))
    return np.column_stack(basis)


def test_proportional_columns_leave_one_residual_direction():
    x = np.linspace(0, 1, 20)
    model = fit(DataMatrix(np.column_stack([x, 3 * x + 1]), "amplitude", ids(2)))
    assert model.eigenvalues == pytest.approx([2.0, 0.0], abs=1e-12)
    assert model.n_components == 1
    assert model.residual.shape == (2, 1)


def test_correlation_point_nine_gives_one_plus_minus_rho():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(50, 3)) - rng.normal(size=(50, 3)).mean(0))
    a, b = q[:, 1], q[:, 2]
    a, b = a - a.mean(), b - b.mean()
    b -= (a @ b) / (a @ a) * a
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    s = np.column_stack([a, 0.9 * a + math.sqrt(1 - 0.81) * b])
    model = fit(DataMatrix(s, "amplitude", ids(2)))
    assert model.eigenvalues == pytest.approx([1.9, 0.1], abs=1e-12)


def test_component_count_rules():
    w = [2.0, 0.6, 0.4]
    assert component_count(w, 0.85, "squared") == 1
    assert component_count(w, 0.85, "linear") == 2
    assert component_count([0, 0, 0], 0.85) == 3


def test_normalize_examples():
    s = DataMatrix([[1.0, 2.0], [3.0, 6.0], [2.0, 4.5]], "amplitude", ids(2))
    model = fit(s)
    mu_row = DataMatrix(np.vstack([model.mean, model.mean]), "amplitude", ids(2))
    assert np.allclose(normalize_test(mu_row, model), 0.0)
    z = normalize_test(s, model)
    assert np.allclose(z.mean(axis=0), 0.0)
    assert np.allclose(z.std(axis=0, ddof=1), 1.0)


def test_normalize_by_hand():
    s = DataMatrix([[1.0, 2.0], [3.0, 6.0]], "amplitude", ids(2))
    model = fit(s)
    x = DataMatrix([[2.0, 4.0], [3.0, 6.0]], "amplitude", ids(2))
    # mean (2, 4), sample std (sqrt 2, 2 sqrt 2)
    expect = [[0.0, 0.0], [1 / math.sqrt(2), 1 / math.sqrt(2)]]
    assert np.allclose(normalize_test(x, model), expect, atol=1e-15)


def test_phase_records_on_another_branch_are_aligned():
    rng = np.random.default_rng(2)
    s = DataMatrix(0.3 + rng.normal(0, 0.01, (30, 3)), "phase", ids(3))
    model = fit(s, max_components=2)
    x = s.values[:10]
    shifted = DataMatrix(x + 2 * math.pi * np.array([1, -2, 0]), "phase", ids(3))
    assert np.allclose(normalize_test(shifted, model),
                       normalize_test(DataMatrix(x, "phase", ids(3)), model))


def test_decompose_span_cases():
    rng = np.random.default_rng(3)
    model = fit(DataMatrix(random_matrix(rng, 40, 4), "amplitude", ids(4)), n_components=2)
    in_p = model.principal @ np.array([1.5, -0.7])
    in_r = model.residual @ np.array([0.2, 0.9])
    assert np.allclose(decompose(in_p, model).residual, 0.0, atol=1e-14)
    assert np.allclose(decompose(in_r, model).main, 0.0, atol=1e-14)


def test_residual_matches_gram_schmidt_projection():
    rng = np.random.default_rng(4)
    for n in range(2, 9):
        model = fit(DataMatrix(random_matrix(rng, 60, n), "amplitude", ids(n)))
        basis = gram_schmidt(model.principal)
        x = rng.normal(size=(5, n))
        expect = x - (x @ basis) @ basis.T
        assert np.allclose(decompose(x, model).residual, expect, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_orthogonal_energy_split(n, seed):
    rng = np.random.default_rng(seed)
    model = fit(DataMatrix(random_matrix(rng, 30, n), "amplitude", ids(n)), max_components=n - 1)
    x = rng.normal(size=(10, n)) * 3
    d = decompose(x, model)
    assert np.allclose(d.main + d.residual, x, atol=1e-10)
    energy = (x ** 2).sum(1)
    assert np.allclose((d.main ** 2).sum(1) + (d.residual ** 2).sum(1), energy, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_affine_rescaling_leaves_model_unchanged(n, seed):
    rng = np.random.default_rng(seed)
    s = random_matrix(rng, 40, n)
    scale = rng.uniform(0.1, 10, n) * rng.choice([-1, 1], n)
    a = fit(DataMatrix(s, "amplitude", ids(n)), max_components=n - 1)
    b = fit(DataMatrix(s * scale + rng.normal(size=n), "amplitude", ids(n)), max_components=n - 1)
    assert a.n_components == b.n_components
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-9)
    d = np.diag(np.sign(scale))
    pa, pb = a.principal, d @ b.principal
    assert np.allclose(pa @ pa.T, pb @ pb.T, atol=1e-7)


@pytest.mark.parametrize("n", [2, 3])
def test_eigenpairs_match_characteristic_polynomial(n):
    rng = np.random.default_rng(10 + n)
    for _ in range(200):
        s = random_matrix(rng, 25, n)
        z = np.corrcoef(s, rowvar=False)
        w, v = symmetric_eigh(z)
        oracle = eig2_oracle(z) if n == 2 else eig3_oracle(z)
        assert np.allclose(w, np.maximum(oracle, 0), atol=1e-8)
        for j in range(n):
            u = null_vector(z, oracle[j])
            assert abs(abs(u @ v[:, j]) - 1) < 1e-8


def test_eigenvector_sign_convention():
    rng = np.random.default_rng(6)
    z = np.corrcoef(random_matrix(rng, 30, 5), rowvar=False)
    w, v = symmetric_eigh(z)
    assert np.all(np.diff(w) <= 0)
    for j in range(5):
        assert v[np.argmax(np.abs(v[:, j])), j] > 0


def test_text_round_trip_is_exact():
    rng = np.random.default_rng(7)
    model = fit(DataMatrix(random_matrix(rng, 30, 4), "phase", ids(4)))
    back = loads(dumps(model))
    for name in ("mean", "std", "eigenvalues", "eigenvectors"):
        assert np.array_equal(getattr(model, name), getattr(back, name))
    assert (back.n_components, back.kappa, back.kind, back.unit_ids, back.variance_rule) == \
        (model.n_components, model.kappa, model.kind, model.unit_ids, model.variance_rule)


def test_errors():
    with pytest.raises(DegenerateColumnError):
        fit(DataMatrix([[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]], "amplitude", ids(2)))
    s = DataMatrix(np.random.default_rng(8).normal(size=(10, 3)), "amplitude", ids(3))
    with pytest.raises(NoResidualSpaceError):
        fit(s, n_components=3)
    with pytest.raises(ValueError):
        fit(s, kappa=1.0)
    model = fit(s)
    with pytest.raises(ModelMismatchError):
        normalize_test(DataMatrix(s.values, "phase", ids(3)), model)
    with pytest.raises(ModelMismatchError):
        decompose(np.zeros((1, 4)), model)
    with pytest.raises(ValueError):
        DataMatrix([[1.0, np.nan], [2.0, 3.0]], "amplitude", ids(2))
    with pytest.raises(ValueError):
        loads("kind amplitude\n")
