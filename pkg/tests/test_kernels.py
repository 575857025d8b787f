import numpy as np
import pytest

from conftest import random_vectors
from webprof.features import FeatureVector
from webprof.kernels import (KernelKind, KernelSpec, eval_kernel, gram_matrix,
                             parse_kernel_name)


def fv(*vals):
    return FeatureVector(len(vals), {i: v for i, v in enumerate(vals) if v})


class TestEvalKernel:
    def test_rbf_self_is_exactly_one(self):
        spec = KernelSpec(KernelKind.RBF, rbf_width_c=3.0)
        x = fv(1.0, 0.3, 0.0, 0.7)
        assert eval_kernel(spec, x, x) == 1.0

    def test_linear_hand_dot(self):
        x = fv(1.0, 1.0, 0.167, 0.667, 0.0)
        got = eval_kernel(KernelSpec(KernelKind.LINEAR), x, x)
        assert got == pytest.approx(1 + 1 + 0.167**2 + 0.667**2)
        assert got == pytest.approx(2.4728, abs=1e-4)

    def test_sigmoid_degenerate_constant(self):
        spec = KernelSpec(KernelKind.SIGMOID, sig_scale=0.0, sig_coef0=0.0)
        a, b = fv(1.0, 0.0), fv(0.0, 1.0)
        assert eval_kernel(spec, a, b) == 0.0
        assert eval_kernel(spec, a, a) == 0.0

    def test_polynomial_default_scale(self):
        # scale defaults to 1/dim, coef0 0, degree 3
        x = fv(1.0, 1.0, 1.0, 1.0)
        y = fv(1.0, 1.0, 1.0, 1.0)
        got = eval_kernel(KernelSpec(KernelKind.POLYNOMIAL), x, y)
        assert got == pytest.approx((4 / 4) ** 3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_kernel(KernelSpec(KernelKind.LINEAR), fv(1.0), fv(1.0, 0.0))

    def test_symmetry_all_kinds(self, rng):
        xs = random_vectors(rng, 6, 5)
        for kind in KernelKind:
            spec = KernelSpec(kind)
            for a in xs[:3]:
                for b in xs[3:]:
                    assert eval_kernel(spec, a, b) == pytest.approx(
                        eval_kernel(spec, b, a), abs=1e-15)

    def test_rbf_range(self, rng):
        spec = KernelSpec(KernelKind.RBF)
        xs = random_vectors(rng, 8, 6)
        for a in xs:
            for b in xs:
                v = eval_kernel(spec, a, b)
                assert 0.0 < v <= 1.0

    def test_linear_bilinearity_spot(self):
        # additivity in the second argument; operands kept inside [0, 1]
        u = fv(0.5, 0.0, 0.5)
        v = fv(0.25, 0.5, 0.0)
        w = fv(0.0, 0.25, 0.25)
        spec = KernelSpec(KernelKind.LINEAR)
        lhs = eval_kernel(spec, u, fv(0.25, 0.75, 0.25))  # v + w
        rhs = eval_kernel(spec, u, v) + eval_kernel(spec, u, w)
        assert lhs == pytest.approx(rhs, abs=1e-15)


class TestGram:
    def test_single_vector(self):
        x = fv(0.5, 0.5)
        G = gram_matrix(KernelSpec(KernelKind.LINEAR), [x])
        assert G.shape == (1, 1)
        assert G[0, 0] == pytest.approx(0.5)

    def test_rbf_unit_diagonal(self, rng):
        G = gram_matrix(KernelSpec(KernelKind.RBF), random_vectors(rng, 7, 5))
        np.testing.assert_array_equal(np.diag(G), np.ones(7))

    def test_symmetric_within_1e12(self, rng):
        for kind in KernelKind:
            G = gram_matrix(KernelSpec(kind), random_vectors(rng, 5, 6))
            assert np.abs(G - G.T).max() <= 1e-12

    def test_matches_eval_kernel(self, rng):
        xs = random_vectors(rng, 5, 4)
        for kind in KernelKind:
            spec = KernelSpec(kind)
            G = gram_matrix(spec, xs)
            for i in range(5):
                for j in range(5):
                    assert G[i, j] == pytest.approx(
                        eval_kernel(spec, xs[i], xs[j]), abs=1e-12)


class TestSpec:
    def test_resolve_rbf_default_width(self):
        spec = KernelSpec(KernelKind.RBF).resolve(10)
        assert spec.rbf_width_c == 5.0

    def test_resolve_keeps_explicit(self):
        spec = KernelSpec(KernelKind.RBF, rbf_width_c=2.0).resolve(10)
        assert spec.rbf_width_c == 2.0

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            KernelSpec(KernelKind.RBF, rbf_width_c=-1.0)

    def test_json_round_trip(self):
        for spec in (KernelSpec(KernelKind.RBF, rbf_width_c=1.5),
                     KernelSpec(KernelKind.POLYNOMIAL, poly_degree=2,
                                poly_coef0=0.5, poly_scale=0.1),
                     KernelSpec(KernelKind.SIGMOID, sig_scale=0.2, sig_coef0=-0.1),
                     KernelSpec(KernelKind.LINEAR)):
            assert KernelSpec.from_json_dict(spec.to_json_dict()) == spec

    def test_parse_names(self):
        assert parse_kernel_name("RBF") is KernelKind.RBF
        assert parse_kernel_name("polynomial") is KernelKind.POLYNOMIAL
        with pytest.raises(ValueError):
            parse_kernel_name("quantum")
