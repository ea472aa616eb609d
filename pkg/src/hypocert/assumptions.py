"""Grid scans that certify the decay hypotheses for a concrete model.

The checks fall into three groups:

* curvature and dominance scans producing the constants
  (sigma1, sigma2, beta, gamma, omega) as extremal generalized
  eigenvalues over a momentum grid;
* the hypoellipticity gate det(g) * |det(dv)| > 0 and the far-field
  growth gate max_ij |g^{ij}| / |p|^2 -> 0;
* two sufficient criteria for the log-Sobolev constant alpha: a warped
  route, available when the velocity Gram form is conformal to the
  identity, and a product-metric route that runs the curvature engine
  on the doubled phase-space metric.

All scans are pure reductions over grid points: evaluation order never
changes the result, and adding points can only widen [sigma1, sigma2]
and raise beta, gamma, omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import fields as _fields
from . import geometry as _geom
from .errors import DegenerateA, MetricError, NotIsotropic
from .errors import ExprDomainError
from .models import builtin_relativistic

__all__ = [
    "ScanGrid",
    "default_grid",
    "FormNxN",
    "Witness",
    "CurvatureBounds",
    "DominanceConstants",
    "HormanderResult",
    "GrowthResult",
    "WarpedResult",
    "ProductResult",
    "AssumptionReport",
    "form_A",
    "form_B",
    "form_C",
    "form_R",
    "forms_on",
    "curvature_bounds",
    "dominance_constants",
    "hormander_check",
    "growth_check",
    "logsob_warped",
    "logsob_product",
    "theta_threshold_scan",
    "check_model",
    "report_text",
    "report_kv",
]

DEFAULT_RADIUS = 10.0
DEFAULT_AXIS_POINTS = 41
DEFAULT_QUASI_POINTS = 2000
DEFAULT_SEED = 20240
# Diagonal regularization applied only when a Cholesky factorization of
# the right-hand form fails; recorded in every result that used it.
EIG_SHIFT = 1e-12
ISOTROPY_TOL = 1e-8


# ---------------------------------------------------------------------------
# Scan grids


@dataclass(frozen=True)
class ScanGrid:
    """A finite set of momentum points with provenance metadata."""

    points: np.ndarray  # (n, M)
    radius: float
    seed: int | None = None
    description: str = ""

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def _lattice_ball(dim, radius, axis_points):
    axes = [np.linspace(-radius, radius, axis_points)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[np.sum(pts**2, axis=1) <= radius**2]

def _halton_ball(dim, radius, count, seed):
    engine = qmc.Halton(d=dim, scramble=True, seed=seed)
    kept = []
    total = 0
    while total < count:
        raw = engine.random(max(4 * count, 256))
        pts = (2.0 * raw - 1.0) * radius
        pts = pts[np.sum(pts**2, axis=1) <= radius**2]
        kept.append(pts)
        total += pts.shape[0]
    return np.concatenate(kept, axis=0)[:count]


def default_grid(
    dim,
    radius=DEFAULT_RADIUS,
    axis_points=DEFAULT_AXIS_POINTS,
    quasi_points=DEFAULT_QUASI_POINTS,
    seed=DEFAULT_SEED,
):
    """Lattice-in-ball plus seeded Halton points, |p| <= radius.

    The Halton stream is a prefix sequence: the same seed with a larger
    quasi_points yields a superset, which keeps refined scans monotone.
    """
    lattice = _lattice_ball(dim, radius, axis_points)
    quasi = (
        _halton_ball(dim, radius, quasi_points, seed) if quasi_points else
        np.empty((0, dim))
    )
    pts = np.concatenate([lattice, quasi], axis=0)
    desc = (
        f"ball |p| <= {radius:g}, {axis_points} pts/axis lattice "
        f"({lattice.shape[0]} in ball) + {quasi_points} Halton (seed {seed})"
    )
    return ScanGrid(points=pts, radius=float(radius), seed=seed, description=desc)


def _grid_points(model, grid):
    if grid is None:
        grid = default_grid(model.dim)
    if isinstance(grid, ScanGrid):
        pts = grid.points
    else:
        pts, _ = _geom.as_batch(grid, model.dim)
        grid = ScanGrid(points=pts, radius=float(np.max(np.abs(pts), initial=0.0)))
    if pts.shape[1] != model.dim:
        raise ValueError(
            f"grid dimension {pts.shape[1]} != model dimension {model.dim}"
        )
    return grid, pts


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class Witness:
    """Grid point realizing an extremal scan value."""

    point: np.ndarray
    value: float
    label: str = ""

    def __str__(self):
        coords = ",".join(f"{x:.6g}" for x in np.atleast_1d(self.point))
        return f"{self.label or 'witness'}@({coords})={self.value:.6g}"


@dataclass(frozen=True)
class FormNxN:
    """One of the velocity bilinear forms evaluated on points.

    entries is (N, N) for a single point and (n, N, N) for a batch,
    with `at` holding the matching point array.
    """

    entries: np.ndarray
    kind: str  # "A" | "B" | "C" | "R"
    at: np.ndarray


@dataclass(frozen=True)
class CurvatureBounds:
    sigma1: float
    sigma2: float
    witnesses: dict
    partial: bool = False
    failures: tuple = ()
    shift: float = 0.0


@dataclass(frozen=True)
class DominanceConstants:
    beta: float
    gamma: float
    omega: float
    witnesses: dict
    shift: float = 0.0


@dataclass(frozen=True)
class HormanderResult:
    min_absdetF: float
    ok: bool
    witness: Witness


@dataclass(frozen=True)
class GrowthResult:
    ok: bool
    radii: tuple
    ratios: tuple


@dataclass(frozen=True)
class WarpedResult:
    kappa1: float
    kappa2: float
    alpha: float | None
    ok: bool
    witnesses: dict


@dataclass(frozen=True)
class ProductResult:
    alpha: float
    ok: bool
    witness: Witness
    offdiag_max: float
    shift: float = 0.0


# ---------------------------------------------------------------------------
# Shared evaluation helpers


def _view_scalar(f, scheme, h_scale):
    if scheme == "fd" or (scheme == "auto" and not getattr(f, "analytic", False)):
        if getattr(f, "analytic", False) or h_scale is not None:
            return _fields.fd_scalar_view(f, h_scale or _fields.DEFAULT_FD_SCALE)
    return f


def _v_bundle(model, P, scheme, h_scale, order):
    """Stack velocity derivatives: dv[n,I,a], hv[n,I,a,b], tv[n,I,k,a,b]."""
    vfs = [_view_scalar(f, scheme, h_scale) for f in model.v_fields]
    dv = np.stack([f.grad(P) for f in vfs], axis=1)
    hv = tv = None
    if order >= 2:
        hv = np.stack([f.hess(P) for f in vfs], axis=1)
    if order >= 3:
        tv = np.stack([f.third(P) for f in vfs], axis=1)
    return dv, hv, tv


def _energy_derivs(model, P, scheme, h_scale):
    ef = _view_scalar(model.energy_field, scheme, h_scale)
    return ef.grad(P), ef.hess(P)


def _chunks(n, size):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def _scan_eval(P, chunk, eval_fn):
    """Evaluate eval_fn on chunks, isolating failing points by bisection.

    Returns (list of (index_array, result), list of (index, message)).
    eval_fn receives an (m, M) slice and must be vectorized over it.
    """
    good, bad = [], []

    def attempt(idx):
        try:
            res = eval_fn(P[idx])
        except (MetricError, ExprDomainError, FloatingPointError,
                np.linalg.LinAlgError) as exc:
            if idx.size == 1:
                bad.append((int(idx[0]), str(exc)))
                return
            half = idx.size // 2
            attempt(idx[:half])
            attempt(idx[half:])
            return
        good.append((idx, res))

    for lo, hi in _chunks(P.shape[0], chunk):
        attempt(np.arange(lo, hi))
    return good, bad


def _gen_eigs(Mform, base, shift_used):
    """Eigenvalues of the pencil (Mform, base), base symmetric positive.

    Returns (eigs (n, M), shift) where shift is the diagonal load that
    was needed to factor base (0.0 when none).
    """
    base = 0.5 * (base + np.swapaxes(base, 1, 2))
    shift = 0.0
    try:
        L = np.linalg.cholesky(base)
    except np.linalg.LinAlgError:
        shift = max(shift_used, EIG_SHIFT)
        eye = np.eye(base.shape[1])
        L = np.linalg.cholesky(base + shift * eye)
    X = np.linalg.solve(L, Mform)
    Z = np.swapaxes(np.linalg.solve(L, np.swapaxes(X, 1, 2)), 1, 2)
    Z = 0.5 * (Z + np.swapaxes(Z, 1, 2))
    return np.linalg.eigvalsh(Z), shift


# ---------------------------------------------------------------------------
# Velocity bilinear forms


def _covariant_hessians(jet, dv, hv):
    """Covariant Hessians of every velocity component: (n, N, M, M)."""
    return hv - np.einsum("ncab,nIc->nIab", jet.christoffel, dv)


def _div_hessians(jet, dv, hv, tv):
    """div of the raised Hessian of each velocity component: (n, N, M)."""
    Hv = _covariant_hessians(jet, dv, hv)
    # d_k (Hess v)_ab = third - dGamma.dv - Gamma.hess
    dHv = (
        tv
        - np.einsum("nkcab,nIc->nIkab", jet.dchristoffel, dv)
        - np.einsum("ncab,nIkc->nIkab", jet.christoffel, hv)
    )
    gi = jet.g_inv
    H_up = np.einsum("nia,njb,nIab->nIij", gi, gi, Hv)
    dH_up = (
        np.einsum("nkia,njb,nIab->nIkij", jet.dg_inv, gi, Hv)
        + np.einsum("nia,nkjb,nIab->nIkij", gi, jet.dg_inv, Hv)
        + np.einsum("nia,njb,nIkab->nIkij", gi, gi, dHv)
    )
    G = jet.christoffel
    return (
        np.einsum("nIkik->nIi", dH_up)
        + np.einsum("nika,nIak->nIi", G, H_up)
        + np.einsum("nkka,nIia->nIi", G, H_up)
    )


def _symmetrize(F):
    return 0.5 * (F + np.swapaxes(F, -1, -2))


def forms_on(model, P, kinds=("A", "B", "C", "R"), scheme="auto", h_scale=None):
    """Evaluate the requested velocity forms on a point batch.

    Returns a dict kind -> (n, N, N) array.  B needs third velocity
    derivatives and second metric derivatives; A needs only first ones.
    """
    P = np.asarray(P, dtype=float)
    kinds = tuple(kinds)
    order = 3 if "B" in kinds else (2 if {"C", "R"} & set(kinds) else 1)
    second = "B" in kinds
    jet = _geom.batch_jet(model, P, scheme=scheme, h_scale=h_scale, second=second)
    dv, hv, tv = _v_bundle(model, P, scheme, h_scale, order)
    gi = jet.g_inv
    out = {}
    if "A" in kinds:
        out["A"] = _symmetrize(np.einsum("nab,nIa,nJb->nIJ", gi, dv, dv))
    if {"C", "R"} & set(kinds):
        Hv = _covariant_hessians(jet, dv, hv)
    if "C" in kinds:
        out["C"] = _symmetrize(
            np.einsum("nac,nbd,nIab,nJcd->nIJ", gi, gi, Hv, Hv)
        )
    if "R" in kinds:
        w_low = _geom.drift_oneform_from_jet(jet, _energy_derivs(model, P, scheme, h_scale)[0])
        w_up = np.einsum("nij,nj->ni", gi, w_low)
        K = np.einsum("nIab,nb->nIa", Hv, w_up)
        out["R"] = _symmetrize(np.einsum("nab,nIa,nJb->nIJ", gi, K, K))
    if "B" in kinds:
        divH = _div_hessians(jet, dv, hv, tv)
        out["B"] = _symmetrize(
            np.einsum("nij,nIi,nJj->nIJ", jet.g, divH, divH)
        )
    return out


def _form_single(model, p, kind, scheme, h_scale):
    P, single = _geom.as_batch(p, model.dim)
    F = forms_on(model, P, kinds=(kind,), scheme=scheme, h_scale=h_scale)[kind]
    if single:
        return FormNxN(entries=F[0], kind=kind, at=P[0])
    return FormNxN(entries=F, kind=kind, at=P)


def form_A(model, p, scheme="auto", h_scale=None):
    """Gram form of the velocity gradients, g(grad v^I, grad v^J)."""
    return _form_single(model, p, "A", scheme, h_scale)


def form_B(model, p, scheme="auto", h_scale=None):
    """Gram form of div(Hess v^I) in the metric g."""
    return _form_single(model, p, "B", scheme, h_scale)


def form_C(model, p, scheme="auto", h_scale=None):
    """Full contraction Hess v^I . Hess v^J with both slots raised."""
    return _form_single(model, p, "C", scheme, h_scale)


def form_R(model, p, scheme="auto", h_scale=None):
    """Gram form of K^I = Hess v^I contracted with the drift field."""
    return _form_single(model, p, "R", scheme, h_scale)


# ---------------------------------------------------------------------------
# Assumption scans


def curvature_bounds(model, grid=None, scheme="auto", h_scale=None, chunk=4096):
    """Extremal generalized eigenvalues of (Ric - Hess log u, g).

    Points where the metric or weight degenerates are recorded and
    skipped; the result is then flagged partial instead of aborting.
    """
    grid, P = _grid_points(model, grid)

    def eval_chunk(sub):
        jet = _geom.batch_jet(model, sub, scheme=scheme, h_scale=h_scale)
        grad_E, hess_E = _energy_derivs(model, sub, scheme, h_scale)
        ric = _geom.bakry_emery_from_jet(jet, grad_E, hess_E)
        eigs, shift = _gen_eigs(ric, jet.g, 0.0)
        return eigs, shift

    good, bad = _scan_eval(P, chunk, eval_chunk)
    if not good:
        raise MetricError("curvature scan failed at every grid point")
    sigma1 = math.inf
    sigma2 = -math.inf
    wmin = wmax = None
    shift = 0.0
    for idx, (eigs, sh) in good:
        shift = max(shift, sh)
        lo = eigs[:, 0]
        hi = eigs[:, -1]
        i = int(np.argmin(lo))
        j = int(np.argmax(hi))
        if lo[i] < sigma1:
            sigma1 = float(lo[i])
            wmin = Witness(P[idx[i]].copy(), sigma1, "sigma1")
        if hi[j] > sigma2:
            sigma2 = float(hi[j])
            wmax = Witness(P[idx[j]].copy(), sigma2, "sigma2")
    failures = tuple((P[i].copy(), msg) for i, msg in bad)
    return CurvatureBounds(
        sigma1=sigma1,
        sigma2=sigma2,
        witnesses={"min": wmin, "max": wmax},
        partial=bool(bad),
        failures=failures,
        shift=shift,
    )


def dominance_constants(model, grid=None, scheme="auto", h_scale=None, chunk=2048):
    """Smallest beta, gamma, omega with B <= beta A, C <= gamma A, R <= omega A.

    Each is the grid maximum of the largest generalized eigenvalue of
    the pencil (form, A).  A must be positive definite on the grid.
    """
    grid, P = _grid_points(model, grid)
    best = {"beta": -math.inf, "gamma": -math.inf, "omega": -math.inf}
    wit = {}
    shift = 0.0
    for lo, hi in _chunks(P.shape[0], chunk):
        sub = P[lo:hi]
        F = forms_on(model, sub, kinds=("A", "B", "C", "R"),
                     scheme=scheme, h_scale=h_scale)
        A = F["A"]
        amin = np.linalg.eigvalsh(A)[:, 0]
        k = int(np.argmin(amin))
        if amin[k] <= 0.0:
            raise DegenerateA(
                "velocity Gram form is not positive definite: smallest "
                f"eigenvalue {amin[k]:.3e} at p = {sub[k]}"
            )
        for name, kind in (("beta", "B"), ("gamma", "C"), ("omega", "R")):
            eigs, sh = _gen_eigs(F[kind], A, 0.0)
            shift = max(shift, sh)
            top = eigs[:, -1]
            j = int(np.argmax(top))
            if top[j] > best[name]:
                best[name] = float(top[j])
                wit[name] = Witness(sub[j].copy(), float(top[j]), name)
    # The forms are Gram matrices, so the true constants are >= 0; tiny
    # negative scan values are rounding noise.
    return DominanceConstants(
        beta=max(best["beta"], 0.0),
        gamma=max(best["gamma"], 0.0),
        omega=max(best["omega"], 0.0),
        witnesses=wit,
        shift=shift,
    )


def hormander_check(model, grid=None, scheme="auto", h_scale=None, chunk=8192):
    """min over the grid of det(g) * |det(d_a v^I)|; ok iff positive.

    Never raises: a vanishing or non-finite value is reported through
    the witness instead.
    """
    grid, P = _grid_points(model, grid)
    mf = _geom._resolve_metric(model, scheme, h_scale)
    best = math.inf
    wit = None
    for lo, hi in _chunks(P.shape[0], chunk):
        sub = P[lo:hi]
        try:
            g = mf.value(sub)
            dv, _, _ = _v_bundle(model, sub, scheme, h_scale, 1)
        except (ExprDomainError, FloatingPointError):
            return HormanderResult(0.0, False, Witness(sub[0].copy(), 0.0, "detF"))
        vals = np.linalg.det(g) * np.abs(np.linalg.det(dv))
        vals = np.where(np.isfinite(vals), vals, 0.0)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best = float(vals[j])
            wit = Witness(sub[j].copy(), best, "detF")
    return HormanderResult(min_absdetF=best, ok=best > 0.0, witness=wit)


def _sphere_directions(dim):
    dirs = list(np.eye(dim))
    for signs in np.ndindex(*(2,) * dim):
        v = np.array([1.0 if s == 0 else -1.0 for s in signs])
        dirs.append(v / math.sqrt(dim))
    return np.unique(np.round(np.array(dirs), 12), axis=0)


def growth_check(model, radii=None, scheme="auto", h_scale=None):
    """Check that max_ij |g^{ij}(p)| / |p|^2 decays along growing radii.

    Passes iff the ratio is non-increasing radius to radius and the last
    value is below a tenth of the first.  radii must be increasing and
    span at least one decade.
    """
    if radii is None:
        radii = np.geomspace(1.0, 100.0, 9)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 2 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be an increasing 1d sequence")
    if radii[-1] < 10.0 * radii[0]:
        raise ValueError("radii must span at least one decade")
    mf = _geom._resolve_metric(model, scheme, h_scale)
    dirs = _sphere_directions(model.dim)
    ratios = []
    for r in radii:
        try:
            g = mf.value(dirs * r)
            gi = np.linalg.inv(g)
        except (ExprDomainError, FloatingPointError, np.linalg.LinAlgError):
            return GrowthResult(ok=False, radii=tuple(radii), ratios=tuple(ratios))
        val = float(np.max(np.abs(gi))) / r**2
        if not math.isfinite(val):
            return GrowthResult(ok=False, radii=tuple(radii), ratios=tuple(ratios))
        ratios.append(val)
    ratios = np.array(ratios)
    monotone = bool(np.all(np.diff(ratios) <= 1e-9 * ratios[:-1] + 1e-300))
    ok = monotone and ratios[-1] < ratios[0] / 10.0
    return GrowthResult(ok=bool(ok), radii=tuple(radii), ratios=tuple(ratios))


# ---------------------------------------------------------------------------
# Log-Sobolev criteria


def _ginv_derivs(g, dg, d2g):
    gi = np.linalg.inv(g)
    gi = 0.5 * (gi + np.swapaxes(gi, 1, 2))
    dgi = -np.einsum("nka,nmab,nbl->nmkl", gi, dg, gi)
    d2gi = (
        np.einsum("nia,nlab,nbc,nkcd,ndj->nlkij", gi, dg, gi, dg, gi)
        + np.einsum("nia,nkab,nbc,nlcd,ndj->nlkij", gi, dg, gi, dg, gi)
        - np.einsum("nia,nlkab,nbj->nlkij", gi, d2g, gi)
    )
    return gi, dgi, d2gi


def _gram_derivs(gi, dgi, d2gi, dv, hv, tv):
    """A^{IJ} = g^{ab} d_a v^I d_b v^J with first and second p-derivatives."""
    A = np.einsum("nab,nIa,nJb->nIJ", gi, dv, dv)
    dA = (
        np.einsum("nkab,nIa,nJb->nkIJ", dgi, dv, dv)
        + np.einsum("nab,nIka,nJb->nkIJ", gi, hv, dv)
        + np.einsum("nab,nIa,nJkb->nkIJ", gi, dv, hv)
    )
    d2A = (
        np.einsum("nlkab,nIa,nJb->nlkIJ", d2gi, dv, dv)
        + np.einsum("nkab,nIla,nJb->nlkIJ", dgi, hv, dv)
        + np.einsum("nkab,nIa,nJlb->nlkIJ", dgi, dv, hv)
        + np.einsum("nlab,nIka,nJb->nlkIJ", dgi, hv, dv)
        + np.einsum("nab,nIlka,nJb->nlkIJ", gi, tv, dv)
        + np.einsum("nab,nIka,nJlb->nlkIJ", gi, hv, hv)
        + np.einsum("nlab,nIa,nJkb->nlkIJ", dgi, dv, hv)
        + np.einsum("nab,nIla,nJkb->nlkIJ", gi, hv, hv)
        + np.einsum("nab,nIa,nJlkb->nlkIJ", gi, dv, tv)
    )
    A = _symmetrize(A)
    return A, dA, d2A


def _log_u_coord_derivs(gi, dgi, dg, d2g, grad_E, hess_E):
    """Coordinate derivatives of log u = -E - log sqrt(det g)."""
    dlogsqrt = 0.5 * np.einsum("nij,nkij->nk", gi, dg)
    d2logsqrt = 0.5 * (
        np.einsum("nlij,nkij->nlk", dgi, dg)
        + np.einsum("nij,nlkij->nlk", gi, d2g)
    )
    dlogu = -(grad_E + dlogsqrt)
    d2logu = -(hess_E + d2logsqrt)
    return dlogu, d2logu


def logsob_warped(model, grid=None, scheme="auto", h_scale=None, chunk=4096):
    """Warped-route log-Sobolev criterion.

    Requires the velocity Gram form to be conformal to the identity,
    A^{IJ} = zeta(p)^{-2} delta^{IJ}.  Writing phi = log of the common
    diagonal value, the two scanned quantities are

        kappa1 = min gen-eig of (Ric - Hess log u - (N/4) dphi x dphi, g)
        kappa2 = max(0, max of -(Lap phi + <d log u, d phi>) / 2)

    and the criterion holds with alpha = kappa1 - kappa2 iff
    kappa1 > kappa2.
    """
    grid, P = _grid_points(model, grid)
    N = model.dim
    kappa1 = math.inf
    k2_raw = -math.inf
    w1 = w2 = None
    for lo, hi in _chunks(P.shape[0], chunk):
        sub = P[lo:hi]
        mf = _geom._resolve_metric(model, scheme, h_scale)
        g = mf.value(sub)
        dg = mf.grad(sub)
        d2g = mf.hess(sub)
        jet = _geom.jet_from_arrays(g, dg, d2g)
        dv, hv, tv = _v_bundle(model, sub, scheme, h_scale, 3)
        gi, dgi, d2gi = _ginv_derivs(g, dg, d2g)
        A, dA, d2A = _gram_derivs(gi, dgi, d2gi, dv, hv, tv)

        t = np.einsum("nII->n", A) / N
        dev = np.max(np.abs(A - t[:, None, None] * np.eye(N)), axis=(1, 2))
        rel = dev / np.maximum(np.abs(t), 1e-300)
        j = int(np.argmax(rel))
        if rel[j] > ISOTROPY_TOL:
            raise NotIsotropic(
                "velocity Gram form is not conformal to the identity: "
                f"relative deviation {rel[j]:.3e} at p = {sub[j]}"
            )
        if np.any(t <= 0.0):
            raise DegenerateA("velocity Gram form vanishes on the grid")

        dt = np.einsum("nkII->nk", dA) / N
        d2t = np.einsum("nlkII->nlk", d2A) / N
        dphi = dt / t[:, None]
        d2phi = d2t / t[:, None, None] - (
            dphi[:, :, None] * dphi[:, None, :]
        )

        grad_E, hess_E = _energy_derivs(model, sub, scheme, h_scale)
        ric = _geom.bakry_emery_from_jet(jet, grad_E, hess_E)
        cond1 = ric - 0.25 * N * dphi[:, :, None] * dphi[:, None, :]
        eigs, _ = _gen_eigs(cond1, jet.g, 0.0)
        lo_e = eigs[:, 0]
        i = int(np.argmin(lo_e))
        if lo_e[i] < kappa1:
            kappa1 = float(lo_e[i])
            w1 = Witness(sub[i].copy(), kappa1, "kappa1")

        dlogu, _ = _log_u_coord_derivs(gi, dgi, dg, d2g, grad_E, hess_E)
        lap_phi = _geom.laplace_from_jet(jet, dphi, d2phi)
        pair = np.einsum("nij,ni,nj->n", gi, dlogu, dphi)
        scalar = -0.5 * (lap_phi + pair)
        i = int(np.argmax(scalar))
        if scalar[i] > k2_raw:
            k2_raw = float(scalar[i])
            w2 = Witness(sub[i].copy(), k2_raw, "kappa2")
    kappa2 = max(0.0, k2_raw)
    ok = kappa1 > kappa2
    return WarpedResult(
        kappa1=kappa1,
        kappa2=kappa2,
        alpha=(kappa1 - kappa2) if ok else None,
        ok=bool(ok),
        witnesses={"kappa1": w1, "kappa2": w2},
    )


def product_metric_blocks(model, P, scheme="auto", h_scale=None):
    """Doubled-metric curvature data at momentum points P.

    Coordinates are ordered (p^1..p^M, x^1..x^N).  Returns a dict with
    the product metric G, Ric_G, Hess_G of the weight exponent
    log u + (1/2) log det A^{IJ}, and the combined form
    Ric_G - Hess_G used by the criterion.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    M = model.dim
    D = 2 * M
    mf = _geom._resolve_metric(model, scheme, h_scale)
    g = mf.value(P)
    dg = mf.grad(P)
    d2g = mf.hess(P)
    dv, hv, tv = _v_bundle(model, P, scheme, h_scale, 3)
    gi, dgi, d2gi = _ginv_derivs(g, dg, d2g)
    A, dA, d2A = _gram_derivs(gi, dgi, d2gi, dv, hv, tv)

    amin = np.linalg.eigvalsh(A)[:, 0]
    k = int(np.argmin(amin))
    if amin[k] <= 0.0:
        raise DegenerateA(
            "velocity Gram form is not positive definite: smallest "
            f"eigenvalue {amin[k]:.3e} at p = {P[k]}"
        )
    Alow = np.linalg.inv(A)
    Alow = _symmetrize(Alow)
    dAlow = -np.einsum("nIa,nkab,nbJ->nkIJ", Alow, dA, Alow)
    d2Alow = (
        np.einsum("nIa,nlab,nbc,nkcd,ndJ->nlkIJ", Alow, dA, Alow, dA, Alow)
        + np.einsum("nIa,nkab,nbc,nlcd,ndJ->nlkIJ", Alow, dA, Alow, dA, Alow)
        - np.einsum("nIa,nlkab,nbJ->nlkIJ", Alow, d2A, Alow)
    )

    G = np.zeros((n, D, D))
    G[:, :M, :M] = g
    G[:, M:, M:] = Alow
    dG = np.zeros((n, D, D, D))
    dG[:, :M, :M, :M] = dg
    dG[:, :M, M:, M:] = dAlow
    d2G = np.zeros((n, D, D, D, D))
    d2G[:, :M, :M, :M, :M] = d2g
    d2G[:, :M, :M, M:, M:] = d2Alow

    jet = _geom.jet_from_arrays(G, dG, d2G)
    ric_G = _geom.ricci_from_jet(jet)

    grad_E, hess_E = _energy_derivs(model, P, scheme, h_scale)
    dlogu, d2logu = _log_u_coord_derivs(gi, dgi, dg, d2g, grad_E, hess_E)
    # psi = log u + (1/2) log det A^{IJ}
    dpsi = dlogu + 0.5 * np.einsum("nIJ,nkJI->nk", Alow, dA)
    d2psi = d2logu + 0.5 * (
        np.einsum("nIJ,nlkJI->nlk", Alow, d2A)
        - np.einsum("nIa,nlab,nbJ,nkJI->nlk", Alow, dA, Alow, dA)
    )
    grad_big = np.zeros((n, D))
    grad_big[:, :M] = dpsi
    hess_big = np.zeros((n, D, D))
    hess_big[:, :M, :M] = d2psi
    hess_G = _geom.covariant_hessian_from_jet(jet, grad_big, hess_big)

    return {
        "G": G,
        "ric_G": ric_G,
        "hess_G_psi": hess_G,
        "form": ric_G - hess_G,
        "jet": jet,
    }


def logsob_product(model, grid=None, scheme="auto", h_scale=None, chunk=1024):
    """Product-route log-Sobolev criterion on the doubled metric.

    alpha is the grid minimum of the generalized eigenvalues of
    (Ric_G - Hess_G psi, G); the criterion holds iff alpha > 0.
    """
    grid, P = _grid_points(model, grid)
    M = model.dim
    alpha = math.inf
    wit = None
    offdiag = 0.0
    shift = 0.0
    for lo, hi in _chunks(P.shape[0], chunk):
        sub = P[lo:hi]
        blocks = product_metric_blocks(model, sub, scheme=scheme, h_scale=h_scale)
        eigs, sh = _gen_eigs(blocks["form"], blocks["G"], 0.0)
        shift = max(shift, sh)
        lo_e = eigs[:, 0]
        i = int(np.argmin(lo_e))
        if lo_e[i] < alpha:
            alpha = float(lo_e[i])
            wit = Witness(sub[i].copy(), alpha, "alpha")
        offdiag = max(offdiag, float(np.max(np.abs(blocks["ric_G"][:, :M, M:]))))
    return ProductResult(
        alpha=alpha,
        ok=alpha > 0.0,
        witness=wit,
        offdiag_max=offdiag,
        shift=shift,
    )


def theta_threshold_scan(thetas=(4.0, 8.0, 16.0, 32.0, 64.0, 128.0),
                         dim=3, grid=None, scheme="auto"):
    """Smallest scanned theta at which the product criterion certifies
    the relativistic model; a grid estimate, not a sharp threshold.

    Returns (theta or None, ProductResult of the last attempt).
    """
    res = None
    for theta in thetas:
        model = builtin_relativistic(theta, dim=dim)
        res = logsob_product(model, grid=grid, scheme=scheme)
        if res.ok:
            return float(theta), res
    return None, res


# ---------------------------------------------------------------------------
# Combined report


@dataclass
class AssumptionReport:
    """Outcome of every scan, plus the grid provenance.

    alpha is None when no criterion certified the log-Sobolev constant;
    that is recorded as inconclusive, not as a failure, because both
    routes are only sufficient conditions.
    """

    model_name: str
    theta: float | None
    sigma1: float
    sigma2: float
    beta: float
    gamma: float
    omega: float
    alpha: float | None
    alpha_source: str | None
    alpha_note: str
    hormander_min: float
    growth_ok: bool
    grid_radius: float
    grid_points: int
    grid_seed: int | None
    grid_description: str
    passes: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    partial: bool = False
    shift: float = 0.0

    @property
    def sigma(self):
        return self.sigma2 - self.sigma1

    @property
    def required_ok(self):
        """Assumption gates that certificate generation depends on.

        The log-Sobolev entry is advisory: a missing alpha blocks the
        final rate but does not falsify the model assumptions.
        """
        keys = ("curvature", "positivity", "dominance", "hormander", "growth")
        return all(self.passes.get(k, False) for k in keys)


def check_model(model, grid=None, scheme="auto", h_scale=None,
                radii=None, alpha_manual=None):
    """Run every assumption scan on one model and collect the report."""
    grid, _ = _grid_points(model, grid)
    passes = {}
    witnesses = {}
    partial = False
    shift = 0.0

    cb = curvature_bounds(model, grid, scheme=scheme, h_scale=h_scale)
    passes["curvature"] = cb.sigma1 >= 0.0 and not cb.partial
    witnesses["sigma1"] = cb.witnesses["min"]
    witnesses["sigma2"] = cb.witnesses["max"]
    partial = partial or cb.partial
    shift = max(shift, cb.shift)

    try:
        dom = dominance_constants(model, grid, scheme=scheme, h_scale=h_scale)
        beta, gamma, omega = dom.beta, dom.gamma, dom.omega
        passes["positivity"] = True
        passes["dominance"] = all(map(math.isfinite, (beta, gamma, omega)))
        witnesses.update(dom.witnesses)
        shift = max(shift, dom.shift)
    except DegenerateA as exc:
        beta = gamma = omega = math.nan
        passes["positivity"] = False
        passes["dominance"] = False
        witnesses["degenerate_A"] = Witness(np.array([]), math.nan, str(exc))

    hor = hormander_check(model, grid, scheme=scheme, h_scale=h_scale)
    passes["hormander"] = hor.ok
    witnesses["hormander"] = hor.witness

    gr = growth_check(model, radii=radii, scheme=scheme, h_scale=h_scale)
    passes["growth"] = gr.ok

    alpha = None
    source = None
    note = ""
    if alpha_manual is not None:
        alpha = float(alpha_manual)
        source = "manual"
        note = "alpha supplied by configuration"
    elif passes["positivity"]:
        try:
            wr = logsob_warped(model, grid, scheme=scheme, h_scale=h_scale)
            if wr.ok:
                alpha = wr.alpha
                source = "warped"
                note = (f"warped criterion: kappa1 = {wr.kappa1:.6g}, "
                        f"kappa2 = {wr.kappa2:.6g}")
            else:
                note = (f"warped criterion inconclusive: kappa1 = "
                        f"{wr.kappa1:.6g} <= kappa2 = {wr.kappa2:.6g}")
            witnesses["kappa1"] = wr.witnesses["kappa1"]
            witnesses["kappa2"] = wr.witnesses["kappa2"]
        except NotIsotropic:
            pr = logsob_product(model, grid, scheme=scheme, h_scale=h_scale)
            witnesses["alpha"] = pr.witness
            shift = max(shift, pr.shift)
            if pr.ok:
                alpha = pr.alpha
                source = "product"
                note = "product-metric criterion"
            else:
                note = (f"product-metric criterion inconclusive: "
                        f"min eigenvalue {pr.alpha:.6g} <= 0")
    else:
        note = "log-Sobolev criteria skipped: Gram form degenerate"
    passes["logsob"] = alpha is not None

    return AssumptionReport(
        model_name=model.name,
        theta=model.theta,
        sigma1=cb.sigma1,
        sigma2=cb.sigma2,
        beta=beta,
        gamma=gamma,
        omega=omega,
        alpha=alpha,
        alpha_source=source,
        alpha_note=note,
        hormander_min=hor.min_absdetF,
        growth_ok=gr.ok,
        grid_radius=grid.radius,
        grid_points=grid.count,
        grid_seed=grid.seed,
        grid_description=grid.description,
        passes=passes,
        witnesses=witnesses,
        partial=partial,
        shift=shift,
    )


def report_text(report):
    """Human-readable rendering of an assumption report."""
    lines = [
        f"model: {report.model_name}"
        + (f" (theta = {report.theta:g})" if report.theta is not None else ""),
        f"scan grid: {report.grid_description or report.grid_points}",
        "",
        f"curvature bounds   sigma1 = {report.sigma1:.8g}, "
        f"sigma2 = {report.sigma2:.8g}  "
        f"[{'pass' if report.passes.get('curvature') else 'FAIL'}]",
        f"dominance          beta = {report.beta:.8g}, "
        f"gamma = {report.gamma:.8g}, omega = {report.omega:.8g}  "
        f"[{'pass' if report.passes.get('dominance') else 'FAIL'}]",
        f"hypoellipticity    min det F = {report.hormander_min:.8g}  "
        f"[{'pass' if report.passes.get('hormander') else 'FAIL'}]",
        f"far-field growth   "
        f"[{'pass' if report.passes.get('growth') else 'FAIL'}]",
    ]
    if report.alpha is not None:
        lines.append(
            f"log-Sobolev        alpha = {report.alpha:.8g} "
            f"({report.alpha_source}); {report.alpha_note}"
        )
    else:
        lines.append(f"log-Sobolev        inconclusive; {report.alpha_note}")
    if report.partial:
        lines.append("warning: scan skipped points where the metric degenerated")
    if report.shift:
        lines.append(f"note: eigenvalue shift {report.shift:g} applied")
    wit = "; ".join(str(w) for w in report.witnesses.values() if w is not None)
    if wit:
        lines.append(f"witnesses: {wit}")
    return "\n".join(lines) + "\n"


def report_kv(report):
    """Machine-readable key-value rendering (one `key = value` per line)."""
    wit = "; ".join(str(w) for w in report.witnesses.values() if w is not None)
    items = [
        ("model", report.model_name),
        ("theta", "" if report.theta is None else repr(float(report.theta))),
        ("sigma1", repr(report.sigma1)),
        ("sigma2", repr(report.sigma2)),
        ("sigma", repr(report.sigma)),
        ("beta", repr(report.beta)),
        ("gamma", repr(report.gamma)),
        ("omega", repr(report.omega)),
        ("alpha", "" if report.alpha is None else repr(report.alpha)),
        ("alpha_source", report.alpha_source or ""),
        ("hormander_min", repr(report.hormander_min)),
        ("growth_ok", str(report.growth_ok).lower()),
        ("grid_radius", repr(report.grid_radius)),
        ("grid_points", str(report.grid_points)),
        ("grid_seed", "" if report.grid_seed is None else str(report.grid_seed)),
        ("shift", repr(report.shift)),
        ("partial", str(report.partial).lower()),
        ("required_ok", str(report.required_ok).lower()),
        ("witnesses", wit),
    ]
    for name, okflag in sorted(report.passes.items()):
        items.append((f"pass_{name}", str(bool(okflag)).lower()))
    return "\n".join(f"{k} = {v}" for k, v in items) + "\n"
