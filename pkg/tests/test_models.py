"""Built-in models, derived weights and drifts, model files."""

import math

import numpy as np
import pytest

from hypocert.errors import ModelFileError, NonpositiveWeight
from hypocert.geometry import batch_jet, bakry_emery_ricci, metric_jet
from hypocert.models import (
    builtin_classical,
    builtin_relativistic,
    drift_W,
    load_model_file,
    log_weight_field,
    normalization,
    weight_u,
)


class TestClassical:
    def test_drift_is_minus_p(self):
        model = builtin_classical(1)
        out = drift_W(model, np.array([2.0]))
        assert out.entries == pytest.approx([-2.0], abs=1e-12)

    def test_weight_at_origin(self):
        model = builtin_classical(2)
        assert weight_u(model, np.zeros(2)) == pytest.approx(1.0)

    def test_weight_value(self):
        model = builtin_classical(1)
        assert weight_u(model, np.array([3.0])) == pytest.approx(math.exp(-4.5))

    def test_bakry_emery_identity(self):
        model = builtin_classical(1)
        out = bakry_emery_ricci(model, np.array([[1.7], [-0.4], [0.0]]))
        assert np.array_equal(out.entries, np.ones((3, 1, 1)))

    def test_oracle_forms(self):
        model = builtin_classical(3)
        P = np.random.default_rng(0).normal(size=(5, 3))
        assert np.array_equal(model.oracle.form_A(P)[0], np.eye(3))
        assert np.all(model.oracle.form_B(P) == 0.0)
        assert np.all(model.oracle.form_C(P) == 0.0)
        assert np.all(model.oracle.form_R(P) == 0.0)


class TestRelativistic:
    def test_weight_at_origin(self):
        model = builtin_relativistic(4.0)
        assert weight_u(model, np.zeros(3)) == pytest.approx(math.exp(-4.0))

    def test_det_g_is_p0(self):
        model = builtin_relativistic(4.0)
        jet = metric_jet(model, np.array([0.0, 0.0, 2.0]))
        assert jet.sqrt_det**2 == pytest.approx(math.sqrt(5.0), rel=1e-12)

    def test_velocity_component(self):
        model = builtin_relativistic(4.0)
        P = np.array([[1.0, 0.0, 0.0]])
        assert model.v_fields[0].value(P)[0] == pytest.approx(1.0 / math.sqrt(2.0))
        assert model.v_fields[1].value(P)[0] == pytest.approx(0.0)

    def test_drift_vanishes_at_origin(self):
        model = builtin_relativistic(4.0)
        out = drift_W(model, np.zeros(3))
        assert np.allclose(out.entries, 0.0, atol=1e-12)

    def test_drift_closed_form(self):
        # log u = -theta p0 - (1/2) log p0, raised with g_inv = (I+pp)/p0
        theta = 4.0
        model = builtin_relativistic(theta)
        P = np.array([[1.0, 0.0, 0.0], [0.3, -0.7, 1.1]])
        p0 = np.sqrt(1.0 + np.sum(P * P, axis=1))
        dlogu = -(theta / p0 + 0.5 / p0**2)[:, None] * P
        ginv = (np.eye(3)[None] + P[:, :, None] * P[:, None, :]) / p0[:, None, None]
        expected = np.einsum("nij,nj->ni", ginv, dlogu)
        out = drift_W(model, P)
        assert np.allclose(out.entries, expected, rtol=1e-10, atol=1e-10)

    def test_log_weight_field_consistent(self):
        from hypocert.geometry import log_weight_values

        model = builtin_relativistic(2.5)
        P = np.random.default_rng(1).normal(size=(30, 3))
        field_vals = log_weight_field(model).value(P)
        direct, _ = log_weight_values(model, P)
        assert np.allclose(field_vals, direct, rtol=1e-12, atol=1e-12)

    def test_oracle_matches_engine(self):
        rng = np.random.default_rng(9)
        for theta in (0.5, 4.0):
            model = builtin_relativistic(theta)
            P = rng.normal(size=(200, 3))
            jet = batch_jet(model, P)
            assert np.allclose(jet.g, model.oracle.metric(P), rtol=1e-9, atol=1e-12)
            assert np.allclose(
                jet.g_inv, model.oracle.metric_inv(P), rtol=1e-9, atol=1e-12
            )
            assert np.allclose(
                jet.sqrt_det, model.oracle.sqrt_det(P), rtol=1e-10
            )
            bak = bakry_emery_ricci(model, P).entries
            assert np.allclose(bak, model.oracle.bakry(P), rtol=1e-6, atol=1e-9)

    def test_oracle_internal_identity(self):
        # Ric - Hess(log u) assembled from the two closed forms equals
        # the closed form for the Bakry-Emery tensor
        model = builtin_relativistic(1.5)
        P = np.random.default_rng(13).normal(size=(50, 3))
        combo = model.oracle.ricci(P) - model.oracle.hess_log_u(P)
        assert np.allclose(combo, model.oracle.bakry(P), rtol=1e-9, atol=1e-12)

    def test_dim_parameter(self):
        model = builtin_relativistic(4.0, dim=1)
        assert model.dim == 1 and model.oracle is None
        # 1D metric reduces to 1/p0
        P = np.array([[0.8]])
        g = model.metric_field.value(P)
        assert g[0, 0, 0] == pytest.approx(1.0 / math.sqrt(1.64), rel=1e-12)
        # weight u = e^{-theta p0} sqrt(p0)
        p0 = math.sqrt(1.64)
        assert weight_u(model, P)[0] == pytest.approx(
            math.exp(-4.0 * p0) * math.sqrt(p0), rel=1e-10
        )

    def test_invalid_theta(self):
        with pytest.raises(ValueError):
            builtin_relativistic(0.0)


class TestNormalization:
    def test_gaussian(self):
        model = builtin_classical(1)
        info = normalization(model)
        assert info["theta_norm"] == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-6)
        assert info["tail_fraction"] < 1e-10

    def test_cached(self):
        model = builtin_classical(2)
        a = normalization(model)
        b = normalization(model)
        assert a is b

    def test_heavy_tail_warns(self):
        model = builtin_relativistic(0.1, dim=1)
        with pytest.warns(UserWarning, match="tail"):
            normalization(model)

    def test_relativistic_cold_ok(self):
        import warnings

        model = builtin_relativistic(4.0, dim=1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            info = normalization(model)
        assert info["theta_norm"] > 0


class TestWeightErrors:
    def test_underflow_raises(self):
        from tests_support import expr_model_1d

        model = expr_model_1d(g11="1", E="1000*(1+p1^2)")
        with pytest.raises(NonpositiveWeight):
            weight_u(model, np.array([0.0]))


class TestModelFiles:
    def write(self, tmp_path, text):
        f = tmp_path / "model.ini"
        f.write_text(text)
        return f

    CLASSICAL_1D = """
[metric]
g11 = 1

[velocity]
v1 = p1

[energy]
E = p1^2/2
"""

    def test_load_classical_equivalent(self, tmp_path):
        model = load_model_file(self.write(tmp_path, self.CLASSICAL_1D))
        assert model.dim == 1
        ref = builtin_classical(1)
        P = np.linspace(-2, 2, 9)[:, None]
        assert np.allclose(
            drift_W(model, P).entries, drift_W(ref, P).entries, atol=1e-12
        )
        assert np.allclose(
            bakry_emery_ricci(model, P).entries,
            bakry_emery_ricci(ref, P).entries,
            atol=1e-12,
        )

    RELATIVISTIC_1D = """
[model]
theta = 4.0

[metric]
g11 = sqrt(1+p1^2) - p1^2/sqrt(1+p1^2)

[velocity]
v1 = p1/sqrt(1+p1^2)

[energy]
E = theta*sqrt(1+p1^2)
"""

    def test_load_relativistic_equivalent(self, tmp_path):
        model = load_model_file(self.write(tmp_path, self.RELATIVISTIC_1D))
        ref = builtin_relativistic(4.0, dim=1)
        P = np.linspace(-2, 2, 9)[:, None]
        assert np.allclose(
            model.metric_field.value(P), ref.metric_field.value(P), rtol=1e-12
        )
        assert np.allclose(
            drift_W(model, P).entries, drift_W(ref, P).entries, rtol=1e-9, atol=1e-11
        )

    def test_missing_section(self, tmp_path):
        with pytest.raises(ModelFileError, match="velocity"):
            load_model_file(self.write(tmp_path, "[metric]\ng11 = 1\n"))

    def test_missing_diagonal(self, tmp_path):
        text = "[metric]\ng12 = 0\n[velocity]\nv1 = p1\nv2 = p2\n[energy]\nE = 0\n"
        with pytest.raises(ModelFileError, match="diagonal"):
            load_model_file(self.write(tmp_path, text))

    def test_bad_metric_key(self, tmp_path):
        text = "[metric]\nq11 = 1\n[velocity]\nv1 = p1\n[energy]\nE = 0\n"
        with pytest.raises(ModelFileError, match="metric key"):
            load_model_file(self.write(tmp_path, text))

    def test_metric_key_outside_dim(self, tmp_path):
        text = "[metric]\ng11 = 1\ng22 = 1\n[velocity]\nv1 = p1\n[energy]\nE = 0\n"
        with pytest.raises(ModelFileError, match="outside"):
            load_model_file(self.write(tmp_path, text))

    def test_unset_theta(self, tmp_path):
        text = "[metric]\ng11 = 1\n[velocity]\nv1 = p1\n[energy]\nE = theta*p1^2\n"
        with pytest.raises(ModelFileError, match="theta"):
            load_model_file(self.write(tmp_path, text))

    def test_syntax_error_reported_with_key(self, tmp_path):
        text = "[metric]\ng11 = 1\n[velocity]\nv1 = p1*\n[energy]\nE = 0\n"
        with pytest.raises(ModelFileError, match=r"\[velocity\] v1"):
            load_model_file(self.write(tmp_path, text))

    def test_coordinate_beyond_dim(self, tmp_path):
        text = "[metric]\ng11 = 1\n[velocity]\nv1 = p1\n[energy]\nE = p2^2\n"
        with pytest.raises(ModelFileError):
            load_model_file(self.write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFileError):
            load_model_file(tmp_path / "nope.ini")

    def test_velocity_gap(self, tmp_path):
        text = "[metric]\ng11 = 1\n[velocity]\nv1 = p1\nv3 = p1\n[energy]\nE = 0\n"
        with pytest.raises(ModelFileError, match="velocity"):
            load_model_file(self.write(tmp_path, text))
