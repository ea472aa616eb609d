"""Riemannian tensor calculus on the momentum manifold (R^M, g).

Everything reduces to the metric 2-jet: g, its inverse, sqrt(det g),
first derivatives d_k g_ij, Christoffel symbols, and (when second
derivatives are available) d_l Gamma^k_ij.  From the jet the module
assembles Ricci curvature, covariant Hessians, gradients, divergences,
the Laplace-Beltrami operator, and the Bakry-Emery-Ricci tensor
Ric - Hess_p(log u) for the equilibrium weight u = e^-E / sqrt(det g).

Internals are batched: arrays carry a leading axis over n points and
contractions are einsum calls.  The public operations accept a single
point (PointP or shape (M,)) and return single-point tensors, or a
batch (n, M) and return batched tensors.

Index conventions, fixed once:
    dg[n, k, i, j]            = d_k g_ij
    d2g[n, l, k, i, j]        = d_l d_k g_ij
    christoffel[n, k, i, j]   = Gamma^k_ij
                              = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
    dchristoffel[n, l, k, i, j] = d_l Gamma^k_ij
    Ric_ij = d_k Gamma^k_ij - d_i Gamma^k_kj
             + Gamma^k_kl Gamma^l_ij - Gamma^k_il Gamma^l_kj
The Ricci sign makes the round sphere positively curved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields as _fields
from .errors import MetricError, NonpositiveWeight

__all__ = [
    "PointP",
    "MetricJet",
    "SymTensor2",
    "VecP",
    "metric_jet",
    "ricci",
    "covariant_hessian",
    "gradient_p",
    "divergence_vec",
    "divergence_tensor2",
    "laplace_beltrami",
    "bakry_emery_ricci",
    "jet_from_arrays",
    "ricci_from_jet",
    "covariant_hessian_from_jet",
    "hessian_log_sqrt_from_jet",
    "bakry_emery_from_jet",
    "divergence_tensor2_from_jet",
    "raise_sym2",
    "log_weight_values",
    "drift_oneform_from_jet",
]


@dataclass(frozen=True)
class PointP:
    """A point in momentum space, coordinates p^1..p^M."""

    coords: tuple

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not all(np.isfinite(coords)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def array(self):
        return np.asarray(self.coords, dtype=float)


@dataclass
class MetricJet:
    """Metric and its derivatives at one point or a batch of points.

    For a single point the arrays have the plain tensor shapes
    (M, M), (M, M, M), ...; for a batch they carry a leading axis n.
    dchristoffel is None when built without second derivatives.
    """

    g: np.ndarray
    g_inv: np.ndarray
    sqrt_det: np.ndarray
    dg: np.ndarray
    christoffel: np.ndarray
    dchristoffel: np.ndarray | None
    dg_inv: np.ndarray = None
    dlog_sqrt: np.ndarray = None


@dataclass
class SymTensor2:
    """Symmetric 2-tensor with a variance tag."""

    entries: np.ndarray
    variance: str  # "covariant" (0,2) or "contravariant" (2,0)


@dataclass
class VecP:
    """Vector or one-form entries with a variance tag."""

    entries: np.ndarray
    variance: str  # "vector" or "one-form"


# ---------------------------------------------------------------------------
# Point and field coercion


def as_batch(p, dim=None):
    """Coerce PointP / (M,) / (n, M) to ((n, M) array, was_single)."""
    if isinstance(p, PointP):
        arr = p.array[None, :]
        single = True
    else:
        arr = np.asarray(p, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
            single = True
        elif arr.ndim == 2:
            single = False
        else:
            raise ValueError(f"expected point shape (M,) or (n, M), got {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"point dimension {arr.shape[1]} != model dimension {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr, single


def _as_scalar_field(model, f, scheme="auto", h_scale=None):
    """Accept a field handle, a callable, or an expression string."""
    if isinstance(f, str):
        from .expressions import parse_expr

        f = _fields.ExprScalarField(
            parse_expr(f, max_coord_index=model.dim), model.dim, theta=model.theta
        )
    elif callable(f) and not hasattr(f, "grad"):
        f = _fields.FDScalarField(
            lambda P, fn=f: np.asarray(fn(P), dtype=float),
            model.dim,
            h_scale or _fields.DEFAULT_FD_SCALE,
        )
    if scheme == "fd" or (scheme == "auto" and not getattr(f, "analytic", False)):
        if getattr(f, "analytic", False) or h_scale is not None:
            f = _fields.fd_scalar_view(f, h_scale or _fields.DEFAULT_FD_SCALE)
    return f


def _resolve_metric(model, scheme, h_scale):
    mf = model.metric_field
    if scheme not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown derivative scheme {scheme!r}")
    if scheme == "analytic" and not mf.analytic:
        raise ValueError("model metric has no analytic derivatives")
    if scheme == "fd" or (scheme == "auto" and not mf.analytic):
        mf = _fields.fd_metric_view(mf, h_scale or _fields.DEFAULT_FD_SCALE)
    return mf


# ---------------------------------------------------------------------------
# Jet assembly


def jet_from_arrays(g, dg, d2g=None):
    """Build a batched MetricJet from raw derivative arrays.

    g: (n, M, M); dg[n, k, i, j] = d_k g_ij;
    d2g[n, l, k, i, j] = d_l d_k g_ij (optional).
    """
    g = np.asarray(g, dtype=float)
    n, m, _ = g.shape
    if not np.allclose(g, np.swapaxes(g, 1, 2), rtol=1e-8, atol=1e-10):
        raise MetricError("metric is not symmetric")
    gs = 0.5 * (g + np.swapaxes(g, 1, 2))
    try:
        chol = np.linalg.cholesky(gs)
    except np.linalg.LinAlgError as exc:
        raise MetricError(f"metric not positive definite: {exc}") from exc
    sqrt_det = np.prod(np.diagonal(chol, axis1=1, axis2=2), axis=1)
    g_inv = np.linalg.inv(gs)
    g_inv = 0.5 * (g_inv + np.swapaxes(g_inv, 1, 2))

    # T[n, i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    T = (
        dg
        + np.einsum("njil->nijl", dg)
        - np.einsum("nlij->nijl", dg)
    )
    christoffel = 0.5 * np.einsum("nkl,nijl->nkij", g_inv, T)
    dlog_sqrt = 0.5 * np.einsum("nij,nkij->nk", g_inv, dg)
    dg_inv = -np.einsum("nka,nmab,nbl->nmkl", g_inv, dg, g_inv)

    dchristoffel = None
    if d2g is not None:
        dT = (
            d2g
            + np.einsum("nmjil->nmijl", d2g)
            - np.einsum("nmlij->nmijl", d2g)
        )
        dchristoffel = 0.5 * (
            np.einsum("nmkl,nijl->nmkij", dg_inv, T)
            + np.einsum("nkl,nmijl->nmkij", g_inv, dT)
        )
    return MetricJet(
        g=gs,
        g_inv=g_inv,
        sqrt_det=sqrt_det,
        dg=dg,
        christoffel=christoffel,
        dchristoffel=dchristoffel,
        dg_inv=dg_inv,
        dlog_sqrt=dlog_sqrt,
    )


def batch_jet(model, P, scheme="auto", h_scale=None, second=True):
    """Metric jet on a batch of points P with shape (n, M)."""
    mf = _resolve_metric(model, scheme, h_scale)
    g = mf.value(P)
    dg = mf.grad(P)
    d2g = mf.hess(P) if second else None
    return jet_from_arrays(g, dg, d2g)


def _squeeze_jet(jet):
    return MetricJet(
        g=jet.g[0],
        g_inv=jet.g_inv[0],
        sqrt_det=float(jet.sqrt_det[0]),
        dg=jet.dg[0],
        christoffel=jet.christoffel[0],
        dchristoffel=None if jet.dchristoffel is None else jet.dchristoffel[0],
        dg_inv=jet.dg_inv[0],
        dlog_sqrt=jet.dlog_sqrt[0],
    )


def metric_jet(model, p, scheme="auto", h_scale=None, second=True):
    """Full metric jet at p (see MetricJet for the index conventions)."""
    P, single = as_batch(p, model.dim)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale, second=second)
    return _squeeze_jet(jet) if single else jet


# ---------------------------------------------------------------------------
# Curvature and derivative operators on jets


def ricci_from_jet(jet):
    dG = jet.dchristoffel
    if dG is None:
        raise MetricError("Ricci needs a jet with second derivatives")
    G = jet.christoffel
    ric = (
        np.einsum("nkkij->nij", dG)
        - np.einsum("nikkj->nij", dG)
        + np.einsum("nkkl,nlij->nij", G, G)
        - np.einsum("nkil,nlkj->nij", G, G)
    )
    return 0.5 * (ric + np.swapaxes(ric, 1, 2))


def covariant_hessian_from_jet(jet, grad_f, hess_f):
    """(Hess f)_ij = d_i d_j f - Gamma^k_ij d_k f."""
    return hess_f - np.einsum("nkij,nk->nij", jet.christoffel, grad_f)


def raise_sym2(jet, T):
    """Raise both slots: T^{ij} = g^{ik} g^{jl} T_kl."""
    return np.einsum("nik,njl,nkl->nij", jet.g_inv, jet.g_inv, T)


def gradient_from_jet(jet, grad_f):
    return np.einsum("nij,nj->ni", jet.g_inv, grad_f)


def laplace_from_jet(jet, grad_f, hess_f):
    """Divergence form: (1/sqrt g) d_i (sqrt g g^ij d_j f), expanded."""
    return (
        np.einsum("nij,nij->n", jet.g_inv, hess_f)
        + np.einsum("niij,nj->n", jet.dg_inv, grad_f)
        + np.einsum("ni,nij,nj->n", jet.dlog_sqrt, jet.g_inv, grad_f)
    )


def divergence_vec_from_jet(jet, Z, dZ):
    """div Z = d_i Z^i + Z^i d_i log sqrt(det g); dZ[n,k,i] = d_k Z^i."""
    return np.einsum("nii->n", dZ) + np.einsum("ni,ni->n", Z, jet.dlog_sqrt)


def divergence_tensor2_from_jet(jet, A, dA):
    """Contraction of nabla A in the derivative and second slot.

    (div A)^i = d_k A^{ik} + Gamma^i_{ka} A^{ak} + Gamma^k_{ka} A^{ia},
    with dA[n, k, i, j] = d_k A^{ij}.
    """
    G = jet.christoffel
    return (
        np.einsum("nkik->ni", dA)
        + np.einsum("nika,nak->ni", G, A)
        + np.einsum("nkka,nia->ni", G, A)
    )


def hessian_log_sqrt_from_jet(jet):
    """Covariant Hessian of log sqrt(det g).

    Uses d_j log sqrt(det g) = Gamma^k_{kj}, so only second metric
    derivatives enter.
    """
    if jet.dchristoffel is None:
        raise MetricError("needs a jet with second derivatives")
    H = np.einsum("nikkj->nij", jet.dchristoffel)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    return H - np.einsum("nkij,nk->nij", jet.christoffel, jet.dlog_sqrt)


def bakry_emery_from_jet(jet, grad_E, hess_E):
    """Ric - Hess(log u) with log u = -E - log sqrt(det g)."""
    ric = ricci_from_jet(jet)
    hess_log_u = -covariant_hessian_from_jet(jet, grad_E, hess_E)
    hess_log_u -= hessian_log_sqrt_from_jet(jet)
    return ric - hess_log_u


def drift_oneform_from_jet(jet, grad_E):
    """d(log u) = -(dE + d log sqrt(det g)); raise to get W."""
    return -(grad_E + jet.dlog_sqrt)


# ---------------------------------------------------------------------------
# Public operations (model, point)


def ricci(model, p, scheme="auto", h_scale=None):
    """Ricci curvature of the momentum metric at p."""
    P, single = as_batch(p, model.dim)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale)
    out = ricci_from_jet(jet)
    return SymTensor2(out[0] if single else out, "covariant")


def covariant_hessian(model, f, p, scheme="auto", h_scale=None):
    """Covariant Hessian of the scalar field f at p."""
    P, single = as_batch(p, model.dim)
    field = _as_scalar_field(model, f, scheme, h_scale)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale, second=False)
    out = covariant_hessian_from_jet(jet, field.grad(P), field.hess(P))
    return SymTensor2(out[0] if single else out, "covariant")


def gradient_p(model, f, p, scheme="auto", h_scale=None):
    """Gradient vector (df)^i = g^ij d_j f at p."""
    P, single = as_batch(p, model.dim)
    field = _as_scalar_field(model, f, scheme, h_scale)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale, second=False)
    out = gradient_from_jet(jet, field.grad(P))
    return VecP(out[0] if single else out, "vector")


def divergence_vec(model, Z, p, scheme="auto", h_scale=None):
    """Divergence of a vector field: (1/sqrt g) d_i(sqrt g Z^i)."""
    P, single = as_batch(p, model.dim)
    if callable(Z) and not hasattr(Z, "jacobian"):
        Z = _fields.FDVectorField(Z, model.dim, h_scale or _fields.DEFAULT_FD_SCALE)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale, second=False)
    out = divergence_vec_from_jet(jet, Z.value(P), Z.jacobian(P))
    return float(out[0]) if single else out


def divergence_tensor2(model, A, p, scheme="auto", h_scale=None):
    """Divergence of a (2,0)-tensor field, contracted in the second slot."""
    P, single = as_batch(p, model.dim)
    if callable(A) and not hasattr(A, "grad"):
        A = _fields.FDTensor2Field(A, model.dim, h_scale or _fields.DEFAULT_FD_SCALE)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale)
    out = divergence_tensor2_from_jet(jet, A.value(P), A.grad(P))
    return VecP(out[0] if single else out, "vector")


def laplace_beltrami(model, f, p, scheme="auto", h_scale=None):
    """Laplace-Beltrami operator applied to f at p."""
    P, single = as_batch(p, model.dim)
    field = _as_scalar_field(model, f, scheme, h_scale)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale, second=False)
    out = laplace_from_jet(jet, field.grad(P), field.hess(P))
    return float(out[0]) if single else out


def log_weight_values(model, P):
    """log u = -E - log sqrt(det g) on a batch, plus the jet used."""
    jet = batch_jet(model, P, second=False)
    E = model.energy_field.value(P)
    return -E - np.log(jet.sqrt_det), jet


def bakry_emery_ricci(model, p, scheme="auto", h_scale=None):
    """Bakry-Emery-Ricci tensor Ric - Hess(log u) at p."""
    P, single = as_batch(p, model.dim)
    jet = batch_jet(model, P, scheme=scheme, h_scale=h_scale)
    E = model.energy_field
    with np.errstate(over="ignore"):
        u = np.exp(-E.value(P)) / jet.sqrt_det
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        raise NonpositiveWeight(
            "equilibrium weight u = e^-E / sqrt(det g) is not positive"
        )
    if scheme == "fd" or (scheme == "auto" and not getattr(E, "analytic", False)):
        E = _fields.fd_scalar_view(E, h_scale or _fields.DEFAULT_FD_SCALE)
    out = bakry_emery_from_jet(jet, E.grad(P), E.hess(P))
    return SymTensor2(out[0] if single else out, "covariant")
