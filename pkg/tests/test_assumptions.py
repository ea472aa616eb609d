"""Bilinear forms, assumption scans, and log-Sobolev criteria."""

import math

import numpy as np
import pytest

from hypocert import assumptions as asm
from hypocert import geometry as geom
from hypocert.errors import DegenerateA, MetricError, NotIsotropic
from hypocert.expressions import parse_expr
from hypocert.fields import ExprMetricField, ExprScalarField
from hypocert.models import ModelSpec, builtin_classical, builtin_relativistic

from tests_support import expr_model_1d, rel_points


def small_grid(dim=3, radius=3.0, axis_points=5, quasi_points=64, seed=asm.DEFAULT_SEED):
    return asm.default_grid(dim, radius=radius, axis_points=axis_points,
                            quasi_points=quasi_points, seed=seed)


def rel_err(got, want):
    scale = max(np.max(np.abs(want)), 1e-300)
    return np.max(np.abs(got - want)) / scale


# ---------------------------------------------------------------------------
# Velocity bilinear forms


class TestFormsClassical:
    def test_identity_and_zero(self):
        for dim in (1, 2, 3):
            m = builtin_classical(dim)
            P = rel_points(40, dim=dim, seed=dim)
            F = asm.forms_on(m, P)
            eye = np.broadcast_to(np.eye(dim), (40, dim, dim))
            assert np.array_equal(F["A"], eye)
            assert np.max(np.abs(F["B"])) == 0.0
            assert np.max(np.abs(F["C"])) == 0.0
            assert np.max(np.abs(F["R"])) == 0.0

    def test_requested_kinds_only(self):
        m = builtin_classical(2)
        F = asm.forms_on(m, rel_points(5, dim=2), kinds=("A",))
        assert set(F) == {"A"}


class TestFormsRelativistic:
    @pytest.mark.parametrize("theta", [1.0, 4.0, 40.0])
    def test_matches_closed_forms(self, theta):
        m = builtin_relativistic(theta)
        orc = m.oracle
        P = rel_points(100, radius=3.0, seed=int(theta))
        F = asm.forms_on(m, P)
        assert rel_err(F["A"], orc.form_A(P)) < 1e-10
        assert rel_err(F["B"], orc.form_B(P)) < 1e-10
        assert rel_err(F["C"], orc.form_C(P)) < 1e-10
        assert rel_err(F["R"], orc.form_R(P)) < 1e-10

    def test_single_point_wrapper(self):
        m = builtin_relativistic(4.0)
        f = asm.form_A(m, [1.0, 0.0, 0.0])
        assert f.kind == "A"
        assert f.entries.shape == (3, 3)
        r2 = 2.0 ** 1.5
        want = np.diag([1.0 / (2.0 * r2), 1.0 / r2, 1.0 / r2])
        np.testing.assert_allclose(f.entries, want, atol=1e-14)

    def test_gram_forms_are_psd(self):
        m = builtin_relativistic(4.0)
        P = rel_points(60, radius=4.0, seed=2)
        F = asm.forms_on(m, P)
        for kind in ("A", "B", "C", "R"):
            eigs = np.linalg.eigvalsh(F[kind])
            assert eigs.min() > -1e-12

    def test_fd_route_agrees(self):
        m = builtin_relativistic(4.0)
        P = rel_points(20, radius=2.5, seed=3)
        Fa = asm.forms_on(m, P, scheme="analytic")
        Ff = asm.forms_on(m, P, scheme="fd")
        assert rel_err(Ff["A"], Fa["A"]) < 1e-6
        assert rel_err(Ff["C"], Fa["C"]) < 1e-6
        assert rel_err(Ff["R"], Fa["R"]) < 1e-6
        # B carries third derivatives; the stencil noise floor is higher.
        assert rel_err(Ff["B"], Fa["B"]) < 2e-4


class TestDifferentialIdentities:
    """Coordinate-free identities the forms machinery relies on."""

    def setup_method(self):
        self.m = builtin_relativistic(4.0)
        self.P = rel_points(20, radius=2.0, seed=9)
        self.jet = geom.batch_jet(self.m, self.P)
        vfs = self.m.v_fields
        self.f1, self.f2 = vfs[0], vfs[1]
        rng = np.random.default_rng(31)
        self.Y = rng.normal(size=self.P.shape)

    def _grad_pair(self, f):
        d = f.grad(self.P)
        h = f.hess(self.P)
        up = np.einsum("nij,nj->ni", self.jet.g_inv, d)
        dup = (
            np.einsum("nkij,nj->nki", self.jet.dg_inv, d)
            + np.einsum("nij,nkj->nki", self.jet.g_inv, h)
        )
        return d, h, up, dup

    def test_weighted_product_rule(self):
        # div(f Z) = g(grad f, Z) + f div Z
        jet = self.jet
        d1, _, _, _ = self._grad_pair(self.f1)
        _, _, Z, dZ = self._grad_pair(self.f2)
        fvals = self.f1.value(self.P)
        fZ = fvals[:, None] * Z
        dfZ = d1[:, :, None] * Z[:, None, :] + fvals[:, None, None] * dZ
        lhs = geom.divergence_vec_from_jet(jet, fZ, dfZ)
        rhs = (
            np.einsum("ni,ni->n", d1, Z)
            + fvals * geom.divergence_vec_from_jet(jet, Z, dZ)
        )
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-11)

    def test_gradient_tensor_divergence(self):
        # g(div(grad f1 x grad f2), Y) =
        #   Hess f1(grad f2, Y) + (lap f2) g(grad f1, Y)
        jet = self.jet
        d1, h1, u1, du1 = self._grad_pair(self.f1)
        d2, h2, u2, du2 = self._grad_pair(self.f2)
        T = u1[:, :, None] * u2[:, None, :]
        dT = du1[:, :, :, None] * u2[:, None, None, :] + \
            u1[:, None, :, None] * du2[:, :, None, :]
        div = geom.divergence_tensor2_from_jet(jet, T, dT)
        lhs = np.einsum("nij,ni,nj->n", jet.g, div, self.Y)
        H1 = geom.covariant_hessian_from_jet(jet, d1, h1)
        lap2 = geom.laplace_from_jet(jet, d2, h2)
        rhs = (
            np.einsum("nab,na,nb->n", H1, u2, self.Y)
            + lap2 * np.einsum("na,na->n", d1, self.Y)
        )
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-11)

    def test_hessian_divergence_vs_laplacian_gradient(self):
        # div Hess f = grad(lap f) + Ric . grad f, with both slots raised.
        m = builtin_relativistic(4.0)
        P = rel_points(10, radius=2.0, seed=13)
        jet = geom.batch_jet(m, P)
        f = m.v_fields[0]
        dv = np.stack([f.grad(P)], axis=1)
        hv = np.stack([f.hess(P)], axis=1)
        tv = np.stack([f.third(P)], axis=1)
        lhs = asm._div_hessians(jet, dv, hv, tv)[:, 0, :]

        def lap_at(Q):
            j = geom.batch_jet(m, Q)
            return geom.laplace_from_jet(j, f.grad(Q), f.hess(Q))

        h = 1e-3
        dlap = np.zeros_like(P)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            dlap[:, k] = (
                8 * (lap_at(P + e) - lap_at(P - e))
                - (lap_at(P + 2 * e) - lap_at(P - 2 * e))
            ) / (12 * h)
        ric = geom.ricci_from_jet(jet)
        rhs = np.einsum("nij,nj->ni", jet.g_inv, dlap) + np.einsum(
            "nij,njk,nk->ni", jet.g_inv, ric, np.einsum(
                "nij,nj->ni", jet.g_inv, f.grad(P))
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-7, atol=1e-9)


# ---------------------------------------------------------------------------
# Scan grids


class TestScanGrids:
    def test_default_grid_metadata(self):
        grid = asm.default_grid(2, radius=2.0, axis_points=5, quasi_points=20)
        assert grid.dim == 2
        assert grid.radius == 2.0
        assert grid.count > 20
        assert np.all(np.sum(grid.points**2, axis=1) <= 4.0 + 1e-12)
        assert "Halton" in grid.description

    def test_lattice_nesting(self):
        coarse = asm._lattice_ball(2, 2.0, 5)
        fine = asm._lattice_ball(2, 2.0, 9)
        fine_set = {tuple(np.round(p, 12)) for p in fine}
        assert all(tuple(np.round(p, 12)) in fine_set for p in coarse)

    def test_halton_prefix_superset(self):
        a = asm._halton_ball(2, 2.0, 50, seed=11)
        b = asm._halton_ball(2, 2.0, 100, seed=11)
        np.testing.assert_array_equal(a, b[:50])

    def test_dimension_mismatch_rejected(self):
        m = builtin_classical(3)
        with pytest.raises(ValueError, match="dimension"):
            asm.curvature_bounds(m, grid=small_grid(dim=2))

    def test_raw_point_array_accepted(self):
        m = builtin_classical(2)
        cb = asm.curvature_bounds(m, grid=rel_points(10, dim=2))
        assert cb.sigma1 == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Curvature bounds


class TestCurvatureBounds:
    def test_classical_exact(self):
        m = builtin_classical(3)
        cb = asm.curvature_bounds(m, small_grid())
        assert abs(cb.sigma1 - 1.0) < 1e-12
        assert abs(cb.sigma2 - 1.0) < 1e-12
        assert not cb.partial
        assert cb.shift == 0.0

    def test_relativistic_theta4(self):
        m = builtin_relativistic(4.0)
        cb = asm.curvature_bounds(m, small_grid())
        assert cb.sigma1 == pytest.approx(0.5, abs=1e-9)
        assert np.linalg.norm(cb.witnesses["min"].point) < 1e-12
        assert cb.sigma2 > cb.sigma1

    def test_relativistic_theta01_fails_with_witness(self):
        m = builtin_relativistic(0.1)
        cb = asm.curvature_bounds(m, small_grid())
        assert cb.sigma1 <= -3.0
        w = cb.witnesses["min"]
        assert w.value == cb.sigma1
        assert "sigma1@" in str(w)

    def test_matches_oracle_pencil_on_grid(self):
        grid = small_grid()
        m = builtin_relativistic(4.0)
        cb = asm.curvature_bounds(m, grid)
        orc = m.oracle
        eigs, _ = asm._gen_eigs(orc.bakry(grid.points), orc.metric(grid.points), 0.0)
        assert cb.sigma1 == pytest.approx(float(eigs[:, 0].min()), abs=1e-9)
        assert cb.sigma2 == pytest.approx(float(eigs[:, -1].max()), abs=1e-9)

    def test_refinement_monotone(self):
        m = builtin_relativistic(4.0)
        coarse = small_grid(axis_points=5, quasi_points=50, seed=11)
        fine = small_grid(axis_points=9, quasi_points=100, seed=11)
        a = asm.curvature_bounds(m, coarse)
        b = asm.curvature_bounds(m, fine)
        assert b.sigma1 <= a.sigma1 + 1e-12
        assert b.sigma2 >= a.sigma2 - 1e-12

    def test_degenerate_point_isolated(self):
        m = expr_model_1d("p1^2", "p1^2/2")
        pts = np.linspace(-2.0, 2.0, 5)[:, None]
        cb = asm.curvature_bounds(m, pts)
        assert cb.partial
        assert len(cb.failures) == 1
        assert abs(cb.failures[0][0][0]) < 1e-12


# ---------------------------------------------------------------------------
# Dominance constants


class TestDominanceConstants:
    def test_classical_zero(self):
        m = builtin_classical(3)
        dom = asm.dominance_constants(m, small_grid())
        assert dom.beta == 0.0
        assert dom.gamma == 0.0
        assert dom.omega == 0.0

    def test_relativistic_finite_positive(self):
        m = builtin_relativistic(4.0)
        dom = asm.dominance_constants(m, small_grid())
        for val in (dom.beta, dom.gamma, dom.omega):
            assert math.isfinite(val) and val > 0.0
        assert set(dom.witnesses) == {"beta", "gamma", "omega"}

    def test_beta_at_origin_matches_closed_form(self):
        # B(0) = (11/2)^2 delta and A(0) = delta, so the origin
        # contributes exactly 30.25 to the beta scan.
        m = builtin_relativistic(4.0)
        dom = asm.dominance_constants(m, small_grid())
        assert dom.beta == pytest.approx(30.25, abs=1e-8)
        assert np.linalg.norm(dom.witnesses["beta"].point) < 1e-12

    def test_refinement_monotone(self):
        m = builtin_relativistic(4.0)
        coarse = small_grid(axis_points=5, quasi_points=50, seed=11)
        fine = small_grid(axis_points=9, quasi_points=100, seed=11)
        a = asm.dominance_constants(m, coarse)
        b = asm.dominance_constants(m, fine)
        assert b.beta >= a.beta - 1e-12
        assert b.gamma >= a.gamma - 1e-12
        assert b.omega >= a.omega - 1e-12

    def test_degenerate_gram_raises(self):
        m = expr_model_1d("1", "p1^2/2", v1="2")
        with pytest.raises(DegenerateA):
            asm.dominance_constants(m, np.linspace(-1, 1, 5)[:, None])


# ---------------------------------------------------------------------------
# Hypoellipticity and growth


class TestHormander:
    def test_classical_exactly_one(self):
        m = builtin_classical(3)
        res = asm.hormander_check(m, small_grid())
        assert res.ok
        assert res.min_absdetF == pytest.approx(1.0, abs=1e-12)

    def test_relativistic_positive(self):
        m = builtin_relativistic(4.0)
        res = asm.hormander_check(m, small_grid())
        assert res.ok
        assert 0.0 < res.min_absdetF < 1.0
        # det F = p0^-4 pointwise; the witness must satisfy it.
        p0sq = 1.0 + np.sum(res.witness.point ** 2)
        assert res.min_absdetF == pytest.approx(p0sq ** -2, rel=1e-10)

    def test_constant_velocity_fails(self):
        m = expr_model_1d("1", "p1^2/2", v1="2")
        res = asm.hormander_check(m, np.linspace(-1, 1, 5)[:, None])
        assert not res.ok
        assert res.min_absdetF == 0.0


class TestGrowth:
    def test_classical_ok(self):
        m = builtin_classical(3)
        res = asm.growth_check(m)
        assert res.ok
        np.testing.assert_allclose(
            res.ratios, [1.0 / r**2 for r in res.radii], rtol=1e-12
        )

    def test_relativistic_ok(self):
        res = asm.growth_check(builtin_relativistic(4.0))
        assert res.ok

    def test_quartic_inverse_metric_fails(self):
        # g^11 = p^4 grows faster than |p|^2: the ratio increases.
        m = expr_model_1d("p1^-4", "p1^2/2")
        res = asm.growth_check(m)
        assert not res.ok

    def test_radii_validation(self):
        m = builtin_classical(1)
        with pytest.raises(ValueError, match="increasing"):
            asm.growth_check(m, radii=[1.0, 1.0, 2.0])
        with pytest.raises(ValueError, match="decade"):
            asm.growth_check(m, radii=[1.0, 2.0, 5.0])


# ---------------------------------------------------------------------------
# Log-Sobolev criteria


class TestWarpedRoute:
    def test_classical_unit_alpha(self):
        m = builtin_classical(3)
        wr = asm.logsob_warped(m, small_grid())
        assert wr.ok
        assert wr.kappa1 == pytest.approx(1.0, abs=1e-10)
        assert wr.kappa2 == 0.0
        assert wr.alpha == pytest.approx(1.0, abs=1e-10)

    def test_relativistic_not_isotropic(self):
        m = builtin_relativistic(4.0)
        with pytest.raises(NotIsotropic):
            asm.logsob_warped(m, small_grid())

    def test_flat_1d_against_direct_formulas(self):
        # v' = 1 - 0.4 p e^{-p^2} stays positive, so A = (v')^2 defines
        # an isotropic conformal factor with explicit derivatives.
        m = expr_model_1d("1", "p1^2/2", v1="p1 + 0.2*exp(-p1^2)")
        pts = np.linspace(-3.0, 3.0, 41)[:, None]
        wr = asm.logsob_warped(m, pts)

        p = pts[:, 0]
        w = 1.0 - 0.4 * p * np.exp(-p * p)
        wp = -0.4 * np.exp(-p * p) * (1.0 - 2.0 * p * p)
        wpp = 0.4 * np.exp(-p * p) * (6.0 * p - 4.0 * p**3)
        phi_p = 2.0 * wp / w
        phi_pp = 2.0 * (wpp * w - wp * wp) / (w * w)
        cond1 = 1.0 - 0.25 * phi_p**2
        scalar = -0.5 * (phi_pp - p * phi_p)
        assert wr.kappa1 == pytest.approx(float(cond1.min()), abs=1e-9)
        assert wr.kappa2 == pytest.approx(max(0.0, float(scalar.max())), abs=1e-9)
        if wr.ok:
            assert wr.alpha == pytest.approx(wr.kappa1 - wr.kappa2, abs=1e-12)

    def test_conformal_2d_accepted(self):
        # g = (1+|p|^2)^0.2 delta with v = p gives A = zeta^-2 delta.
        zeta_expr = "exp(0.1*log(1 + p1^2 + p2^2))"
        gexpr = parse_expr(f"({zeta_expr})^2")
        fields = {(0, 0): gexpr, (1, 1): gexpr}
        m = ModelSpec(
            name="conformal2d",
            dim=2,
            metric_field=ExprMetricField(fields, 2),
            v_fields=(
                ExprScalarField(parse_expr("p1"), 2),
                ExprScalarField(parse_expr("p2"), 2),
            ),
            energy_field=ExprScalarField(parse_expr("(p1^2 + p2^2)/2"), 2),
        )
        wr = asm.logsob_warped(m, small_grid(dim=2, radius=2.0, quasi_points=32))
        assert math.isfinite(wr.kappa1)
        assert wr.kappa2 >= 0.0


class TestProductRoute:
    @pytest.mark.parametrize("theta", [1.0, 4.0, 40.0])
    def test_blocks_match_closed_forms(self, theta):
        m = builtin_relativistic(theta)
        orc = m.oracle
        P = rel_points(60, radius=3.0, seed=int(theta) + 50)
        blocks = asm.product_metric_blocks(m, P)
        assert rel_err(blocks["G"][:, 3:, 3:], orc.G_xx(P)) < 1e-10
        assert rel_err(blocks["G"][:, :3, :3], orc.metric(P)) < 1e-10
        assert rel_err(blocks["ric_G"][:, :3, :3], orc.ricci_G_pp(P)) < 1e-10
        assert rel_err(blocks["ric_G"][:, 3:, 3:], orc.ricci_G_xx(P)) < 1e-10
        assert rel_err(blocks["hess_G_psi"][:, :3, :3], orc.hess_logU_pp(P)) < 1e-10
        assert rel_err(blocks["hess_G_psi"][:, 3:, 3:], orc.hess_logU_xx(P)) < 1e-10
        assert np.max(np.abs(blocks["ric_G"][:, :3, 3:])) < 1e-9
        assert np.max(np.abs(blocks["hess_G_psi"][:, :3, 3:])) < 1e-9

    def test_classical_alpha_zero(self):
        m = builtin_classical(3)
        pr = asm.logsob_product(m, small_grid())
        assert not pr.ok
        assert pr.alpha == pytest.approx(0.0, abs=1e-10)
        assert pr.offdiag_max < 1e-12

    def test_relativistic_obstructed_at_origin(self):
        # The x-block of Ric_G - Hess_G at p = 0 equals Ric_G alone and
        # its eigenvalue there is -11/2 whatever theta is, so the
        # criterion can never certify this model.
        for theta in (4.0, 400.0):
            m = builtin_relativistic(theta)
            pr = asm.logsob_product(m, small_grid())
            assert not pr.ok
            assert pr.alpha == pytest.approx(-5.5, abs=1e-9)
            assert np.linalg.norm(pr.witness.point) < 1e-12

    def test_pp_block_at_origin_matches_fiber_bound(self):
        # At p = 0 the momentum block of the criterion form reproduces
        # the fiber curvature bound theta - 3.5.
        theta = 7.0
        m = builtin_relativistic(theta)
        blocks = asm.product_metric_blocks(m, np.zeros((1, 3)))
        form = blocks["form"][0]
        np.testing.assert_allclose(
            np.diag(form)[:3], (theta - 3.5) * np.ones(3), atol=1e-10
        )
        np.testing.assert_allclose(
            np.diag(form)[3:], -5.5 * np.ones(3), atol=1e-10
        )

    def test_theta_threshold_scan_reports_none(self):
        grid = small_grid(axis_points=5, quasi_points=16)
        theta, res = asm.theta_threshold_scan(
            thetas=(4.0, 64.0), grid=grid
        )
        assert theta is None
        assert res is not None and not res.ok and res.alpha < 0.0


class TestGenEigHelpers:
    def test_no_shift_for_spd_base(self):
        rng = np.random.default_rng(0)
        Mf = rng.normal(size=(4, 3, 3))
        Mf = Mf + np.swapaxes(Mf, 1, 2)
        base = np.broadcast_to(np.eye(3), (4, 3, 3)).copy()
        eigs, shift = asm._gen_eigs(Mf, base, 0.0)
        assert shift == 0.0
        np.testing.assert_allclose(
            eigs, np.linalg.eigvalsh(Mf), atol=1e-12
        )

    def test_shift_recorded_on_failure(self):
        Mf = np.eye(2)[None]
        base = np.diag([1.0, -1e-18])[None]
        eigs, shift = asm._gen_eigs(Mf, base, 0.0)
        assert shift == asm.EIG_SHIFT
        assert np.all(np.isfinite(eigs))

    def test_scan_eval_bisection(self):
        P = np.arange(10.0)[:, None]

        def eval_fn(sub):
            if np.any(np.abs(sub[:, 0] - 4.0) < 0.5):
                raise MetricError("bad point")
            return sub[:, 0]

        good, bad = asm._scan_eval(P, 4, eval_fn)
        assert [i for i, _ in bad] == [4]
        covered = np.concatenate([idx for idx, _ in good])
        assert sorted(covered) == [0, 1, 2, 3, 5, 6, 7, 8, 9]


# ---------------------------------------------------------------------------
# Combined report


class TestCheckModel:
    def test_classical_report(self):
        m = builtin_classical(3)
        rep = asm.check_model(m, small_grid())
        assert rep.required_ok
        assert rep.passes == {
            "curvature": True, "positivity": True, "dominance": True,
            "hormander": True, "growth": True, "logsob": True,
        }
        assert rep.alpha == pytest.approx(1.0, abs=1e-10)
        assert rep.alpha_source == "warped"
        assert rep.sigma == pytest.approx(0.0, abs=1e-12)

    def test_relativistic_theta4_report(self):
        m = builtin_relativistic(4.0)
        rep = asm.check_model(m, small_grid())
        assert rep.required_ok
        assert rep.passes["curvature"]
        assert not rep.passes["logsob"]
        assert rep.alpha is None
        assert rep.alpha_source is None
        assert "inconclusive" in rep.alpha_note

    def test_relativistic_theta01_report(self):
        m = builtin_relativistic(0.1)
        rep = asm.check_model(m, small_grid())
        assert not rep.required_ok
        assert not rep.passes["curvature"]
        assert rep.sigma1 <= -3.0

    def test_manual_alpha(self):
        m = builtin_relativistic(4.0)
        rep = asm.check_model(m, small_grid(), alpha_manual=0.25)
        assert rep.alpha == 0.25
        assert rep.alpha_source == "manual"
        assert rep.passes["logsob"]

    def test_report_kv_keys_and_text(self):
        m = builtin_classical(3)
        rep = asm.check_model(m, small_grid())
        kv = asm.report_kv(rep)
        lines = dict(
            line.split(" = ", 1) for line in kv.strip().splitlines()
        )
        for key in ("sigma1", "sigma2", "sigma", "beta", "gamma", "omega",
                    "alpha", "alpha_source", "hormander_min", "growth_ok",
                    "grid_radius", "grid_points", "grid_seed", "required_ok",
                    "witnesses", "pass_curvature", "pass_logsob"):
            assert key in lines
        assert lines["required_ok"] == "true"
        assert float(lines["sigma1"]) == pytest.approx(1.0, abs=1e-12)
        text = asm.report_text(rep)
        assert "pass" in text and "sigma1" in text
