"""Conservative solver for the kinetic equation on the 1D torus x 1D momentum slab.

Discretizes dh/dt + v(p) dh/dx = Lh, where L is the weighted momentum
Laplacian Delta_p + g(d_p log u, d_p .), on [0,1) x [-P,P] with periodic
x and zero-flux momentum boundaries.  The momentum measure mu carries
the equilibrium weight u sqrt(det g), so constants are equilibria and L
is self-adjoint in the discrete mu inner product by construction.

Time stepping is Strang splitting: half-step upwind transport in x,
implicit diffusion in p, half-step transport.  Transport is conservative
and monotone under the CFL bound dt <= dx / max|v|; the implicit solve
is an M-matrix system, so positivity survives any dt.

Alongside the dynamics the module tracks the entropy functionals
(D, Ipp, Ixp, Ixx, the modified entropy, mass, L1 distance), fits
empirical decay rates, and evaluates both sides of the entropy
production identities term by term for verification.
"""

from dataclasses import dataclass, field
import math
import re

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from . import geometry
from .errors import (
    CFLViolation,
    InsufficientData,
    LinearSolveFailure,
    NonpositiveValues,
    NonpositiveWeight,
)
from .models import log_weight_field

__all__ = [
    "CSV_HEADER",
    "DiffusionOperator",
    "FunctionalSeries",
    "PhaseGrid",
    "State",
    "build_grid",
    "diffusion_matrix",
    "entropy_production_diagnostics",
    "fit_rate",
    "functionals",
    "initial_state",
    "run",
    "series_from_csv",
    "series_to_csv",
    "step",
]

CSV_HEADER = "t,D,Ipp,Ixp,Ixx,Emod,mass,l1_dist"

# Floor for log h in functional evaluation only, as a fraction of the
# mean density; the dynamics never see it.
H_FLOOR_FRAC = 1e-14


# ---------------------------------------------------------------------------
# Grid and state


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid: Nx periodic cells in x, Np momentum nodes on [-P, P].

    mu_weights holds the discrete momentum measure per node (weight
    u sqrt(det g) times the trapezoid cell length, normalized to total
    one).  tail_mass estimates the equilibrium mass beyond |p| = P that
    the truncation discards.
    """

    Nx: int
    Np: int
    P: float
    dx: float
    dp: float
    mu_weights: np.ndarray
    x_nodes: np.ndarray
    p_nodes: np.ndarray
    tail_mass: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False)


@dataclass
class State:
    """Density ratio h on the (Nx, Np) grid at time t."""

    h: np.ndarray
    t: float


@dataclass
class FunctionalSeries:
    """Aligned time series of the entropy functionals along one run."""

    times: np.ndarray
    D: np.ndarray
    Ipp: np.ndarray
    Ixp: np.ndarray
    Ixx: np.ndarray
    Emod: np.ndarray
    mass: np.ndarray
    l1_dist: np.ndarray
    decay_violations: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)


def _weight_profile(model, p):
    """u * sqrt(det g) at the 1D momentum points p, shape (k,)."""
    pts = np.asarray(p, dtype=float)[:, None]
    logu, jet = geometry.log_weight_values(model, pts)
    with np.errstate(over="ignore", under="ignore"):
        w = np.exp(logu) * jet.sqrt_det
    return w


def _require_1d(model):
    if model.dim != 1:
        raise ValueError(
            f"solver handles one momentum dimension, model has {model.dim}"
        )


def build_grid(model, Nx, Np, P):
    """Phase-space grid with the discrete equilibrium measure attached."""
    _require_1d(model)
    if Nx < 8 or Np < 8:
        raise ValueError("need at least 8 cells per direction")
    if not P > 0.0:
        raise ValueError("momentum truncation radius P must be positive")
    Nx, Np = int(Nx), int(Np)
    dx = 1.0 / Nx
    x_nodes = dx * np.arange(Nx)
    p_nodes = np.linspace(-P, P, Np)
    dp = p_nodes[1] - p_nodes[0]

    w = _weight_profile(model, p_nodes)
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise NonpositiveWeight(
            "equilibrium weight u sqrt(det g) must be positive on the grid"
        )
    trap = np.full(Np, dp)
    trap[0] = trap[-1] = 0.5 * dp
    raw = w * trap
    mu = raw / raw.sum()
    mu /= mu.sum()

    # Tail estimate: same integrand and spacing on the doubled slab.
    p_ext = np.linspace(-2.0 * P, 2.0 * P, 2 * Np - 1)
    with np.errstate(over="ignore", under="ignore"):
        w_ext = _weight_profile(model, p_ext)
    trap_ext = np.full(p_ext.size, dp)
    trap_ext[0] = trap_ext[-1] = 0.5 * dp
    ext = float(np.sum(np.where(np.isfinite(w_ext), w_ext, 0.0) * trap_ext))
    tail = max(0.0, (ext - raw.sum()) / ext) if ext > 0.0 else 0.0

    return PhaseGrid(
        Nx=Nx,
        Np=Np,
        P=float(P),
        dx=dx,
        dp=float(dp),
        mu_weights=mu,
        x_nodes=x_nodes,
        p_nodes=p_nodes,
        tail_mass=tail,
    )


# ---------------------------------------------------------------------------
# Node geometry (cached per model and grid)


@dataclass
class _NodeGeometry:
    """Per-momentum-node scalars of the 1D model used by the solver."""

    gpp: np.ndarray
    Gamma: np.ndarray
    dGamma: np.ndarray
    w_cov: np.ndarray
    ric_t: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    H_v: np.ndarray
    divH: np.ndarray
    vmax: float


def _node_geometry(model, grid):
    key = ("geom", model.name, model.theta, id(model))
    geo = grid._cache.get(key)
    if geo is not None:
        return geo
    pts = grid.p_nodes[:, None]
    jet = geometry.batch_jet(model, pts, second=True)
    gpp = jet.g_inv[:, 0, 0]
    Gamma = jet.christoffel[:, 0, 0, 0]
    dGamma = jet.dchristoffel[:, 0, 0, 0, 0]

    vf = model.v_fields[0]
    v = vf.value(pts)
    dv = vf.grad(pts)[:, 0]
    d2v = vf.hess(pts)[:, 0, 0]
    d3v = vf.third(pts)[:, 0, 0, 0]
    H_v = d2v - Gamma * dv
    # div of the raised Hessian of v; contraction of the derivative with
    # the second slot, reduced to a scalar in one dimension.
    divH = gpp**2 * (d3v - dGamma * dv - 3.0 * Gamma * d2v + 2.0 * Gamma**2 * dv)

    lw = log_weight_field(model)
    w_cov = lw.grad(pts)[:, 0]
    lu2 = lw.hess(pts)[:, 0, 0]
    # Ric vanishes on a 1-manifold, so the Bakry-Emery tensor is just
    # minus the covariant Hessian of log u.
    ric_t = -(lu2 - Gamma * w_cov)

    geo = _NodeGeometry(
        gpp=gpp,
        Gamma=Gamma,
        dGamma=dGamma,
        w_cov=w_cov,
        ric_t=ric_t,
        v=v,
        dv=dv,
        H_v=H_v,
        divH=divH,
        vmax=float(np.max(np.abs(v))),
    )
    grid._cache[key] = geo
    return geo


# ---------------------------------------------------------------------------
# Diffusion operator


@dataclass
class DiffusionOperator:
    """Tridiagonal momentum diffusion in mu-symmetric divergence form.

    Row i of the generator is (flux_i - flux_{i-1}) / weight_i with
    flux_i = off_i (h_{i+1} - h_i) and zero flux past both end nodes,
    so constants are exact fixed points and the bilinear form
    <f, L h>_mu is symmetric to round-off.
    """

    off: np.ndarray
    diag: np.ndarray
    weight: np.ndarray
    _factors: dict = field(default_factory=dict, repr=False)

    def apply(self, h):
        """L h for h with momentum on the last axis."""
        flux = self.off * (h[..., 1:] - h[..., :-1])
        out = np.zeros_like(h, dtype=float)
        out[..., :-1] += flux
        out[..., 1:] -= flux
        return out / self.weight

    def _factor(self, dt):
        fac = self._factors.get(dt)
        if fac is None:
            n = self.weight.size
            ab = np.zeros((2, n))
            ab[0, 1:] = -dt * self.off
            ab[1, :] = self.weight - dt * self.diag
            try:
                fac = cholesky_banded(ab)
            except np.linalg.LinAlgError as exc:
                raise LinearSolveFailure(
                    f"implicit diffusion factorization failed: {exc}"
                ) from exc
            self._factors[dt] = fac
        return fac

    def solve(self, h, dt):
        """One backward-Euler step (I - dt L)^-1 h, columns batched."""
        fac = self._factor(float(dt))
        rhs = (self.weight * h).T
        try:
            out = cho_solve_banded((fac, False), rhs)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveFailure(f"implicit diffusion solve failed: {exc}")
        return out.T


def diffusion_matrix(model, grid):
    """Build the discrete momentum generator matched to grid.mu_weights."""
    _require_1d(model)
    p = grid.p_nodes
    half = 0.5 * (p[:-1] + p[1:])
    w_half = _weight_profile(model, half)
    jet = geometry.batch_jet(model, half[:, None], second=False)
    gpp_half = jet.g_inv[:, 0, 0]

    # Scale the half-node conductances by the same normalization that
    # produced mu_weights, so generator and measure agree exactly.
    trap = np.full(grid.Np, grid.dp)
    trap[0] = trap[-1] = 0.5 * grid.dp
    norm = 1.0 / float(np.sum(_weight_profile(model, p) * trap))

    off = norm * w_half * gpp_half / grid.dp
    diag = np.zeros(grid.Np)
    diag[:-1] -= off
    diag[1:] -= off
    return DiffusionOperator(off=off, diag=diag, weight=grid.mu_weights.copy())


def _op(model, grid):
    key = ("diffusion", model.name, model.theta, id(model))
    op = grid._cache.get(key)
    if op is None:
        op = diffusion_matrix(model, grid)
        grid._cache[key] = op
    return op


# ---------------------------------------------------------------------------
# Time stepping


def _minmod(a, b):
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def _advect(h, nu, order2):
    """One upwind substep of dh/dt + v dh/dx = 0; nu = v dt / dx per column."""
    up = np.roll(h, 1, axis=0)
    dn = np.roll(h, -1, axis=0)
    if not order2:
        nup = np.maximum(nu, 0.0)
        nudn = np.minimum(nu, 0.0)
        return h - nup * (h - up) - nudn * (dn - h)
    # MUSCL reconstruction with a minmod limiter; monotone for |nu| <= 1/2.
    mm = _minmod(h - up, dn - h)
    right = np.where(nu > 0.0, h + 0.5 * mm, dn - 0.5 * np.roll(mm, -1, axis=0))
    left = np.roll(right, 1, axis=0)
    return h - nu * (right - left)


def cfl_limit(model, grid, order2=False):
    """Largest stable transport step, dx / max|v| (halved for order2)."""
    geo = _node_geometry(model, grid)
    limit = grid.dx / geo.vmax if geo.vmax > 0.0 else math.inf
    return 0.5 * limit if order2 else limit


def step(state, dt, model, grid, *, op=None, order2=False, with_diffusion=True):
    """One Strang-split step: half transport, implicit diffusion, half transport."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    geo = _node_geometry(model, grid)
    limit = cfl_limit(model, grid, order2)
    if dt > limit * (1.0 + 1e-12):
        raise CFLViolation(
            f"dt = {dt:.3e} exceeds the transport limit {limit:.3e}"
        )
    nu = geo.v * (0.5 * dt / grid.dx)
    h = _advect(state.h, nu, order2)
    if with_diffusion:
        h = _op(model, grid).solve(h, dt) if op is None else op.solve(h, dt)
    h = _advect(h, nu, order2)
    return State(h=h, t=state.t + dt)


# ---------------------------------------------------------------------------
# Initial data


def _coerce_data_expr(src):
    """Map the x/p spelling of initial data onto the 2D field grammar."""
    out = re.sub(r"\bpi\b", repr(math.pi), src)
    out = re.sub(r"\bx\b", "p1", out)
    return re.sub(r"\bp\b", "p2", out)


def initial_state(model, grid, data):
    """Build the normalized (unit-mass) initial state from data.

    data may be an (Nx, Np) array, a callable f(x, p) acting on
    meshgrids, or an expression in x and p using the field grammar.
    """
    if isinstance(data, str):
        from .expressions import evaluate, parse_expr

        ast = parse_expr(_coerce_data_expr(data), max_coord_index=2)
        X, Pm = np.meshgrid(grid.x_nodes, grid.p_nodes, indexing="ij")
        pts = np.column_stack([X.ravel(), Pm.ravel()])
        h = np.asarray(
            evaluate(ast, pts, theta=model.theta), dtype=float
        ).reshape(grid.Nx, grid.Np)
    elif callable(data):
        X, Pm = np.meshgrid(grid.x_nodes, grid.p_nodes, indexing="ij")
        h = np.asarray(data(X, Pm), dtype=float)
    else:
        h = np.array(data, dtype=float)
    if h.shape != (grid.Nx, grid.Np):
        raise ValueError(f"initial data shape {h.shape} != {(grid.Nx, grid.Np)}")
    if not np.all(np.isfinite(h)) or np.any(h < 0.0):
        raise ValueError("initial data must be finite and nonnegative")
    m = _mass(h, grid)
    if m <= 0.0:
        raise ValueError("initial data must carry positive mass")
    return State(h=h / m, t=0.0)


# ---------------------------------------------------------------------------
# Functionals


def _mass(h, grid):
    return float(np.sum(h * grid.mu_weights) * grid.dx)


def _ddx(h, dx):
    return (np.roll(h, -1, axis=0) - np.roll(h, 1, axis=0)) / (2.0 * dx)


def _ddp(h, dp):
    return np.gradient(h, dp, axis=1, edge_order=2)


def functionals(state, model, grid, certificate=None):
    """One row of entropy functionals for the current state.

    The entropy is measured relative to the equilibrium of the same
    mass, so a constant state scores zero in every column.  With a
    certificate the modified entropy combines the columns with its
    weights; without one Emod reduces to D.
    """
    geo = _node_geometry(model, grid)
    h = state.h
    w = grid.mu_weights * grid.dx
    m = float(np.sum(h * w))
    floor = H_FLOOR_FRAC * max(m, np.finfo(float).tiny)
    hf = np.maximum(h, floor)

    # Relative entropy through the pointwise-nonnegative integrand
    # m phi(e) with e = h/m - 1, phi(e) = (1+e) log1p(e) - e.  The
    # discarded linear part sums to zero by mass consistency, and in
    # this form every rounding error is multiplied by e, so D stays
    # accurate down to deviations near machine precision.  phi(-1) = 1
    # covers h = 0 exactly; this column needs no floor.
    e = h / m - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = (1.0 + e) * np.log1p(e) - e
    phi = np.where(h > 0.0, phi, 1.0)
    D = max(m * float(np.sum(phi * w)), 0.0)
    dhx = _ddx(h, grid.dx)
    dhp = _ddp(h, grid.dp)
    gpp = geo.gpp
    Ipp = float(np.sum(gpp * dhp**2 / hf * w))
    Ixx = float(np.sum(gpp * geo.dv**2 * dhx**2 / hf * w))
    Ixp = float(np.sum(gpp * geo.dv * dhx * dhp / hf * w))
    l1 = float(np.sum(np.abs(h - m) * w))
    if certificate is None:
        emod = D
    else:
        emod = (
            certificate.k * D
            + certificate.a * Ipp
            + 2.0 * certificate.b * Ixp
            + certificate.c * Ixx
        )
    return {
        "t": state.t,
        "D": D,
        "Ipp": Ipp,
        "Ixp": Ixp,
        "Ixx": Ixx,
        "Emod": emod,
        "mass": m,
        "l1_dist": l1,
    }


# ---------------------------------------------------------------------------
# Runs


def run(
    model,
    grid,
    h_in,
    tmax,
    sample_dt,
    certificate=None,
    *,
    dt=None,
    order2=False,
    decay_allowance=0.1,
):
    """Evolve h_in to tmax, sampling the functionals every sample_dt.

    When a certificate with a rate is supplied, each sample is checked
    against Emod(0) exp(-lambda t) with the exponent relaxed by
    decay_allowance; offending samples land in decay_violations.
    """
    if tmax <= 0.0 or sample_dt <= 0.0:
        raise ValueError("tmax and sample_dt must be positive")
    if dt is None:
        dt = min(sample_dt, 0.9 * cfl_limit(model, grid, order2))
    n_sub = max(1, round(sample_dt / dt))
    dt_eff = sample_dt / n_sub
    n_samples = max(1, round(tmax / sample_dt))

    state = initial_state(model, grid, h_in)
    op = _op(model, grid)
    rows = [functionals(state, model, grid, certificate)]
    try:
        for _ in range(n_samples):
            for _ in range(n_sub):
                state = step(
                    state, dt_eff, model, grid, op=op, order2=order2
                )
            rows.append(functionals(state, model, grid, certificate))
    except (CFLViolation, LinearSolveFailure) as exc:
        raise type(exc)(f"{exc} (at t = {state.t:.6g})") from exc

    series = FunctionalSeries(
        times=np.array([r["t"] for r in rows]),
        D=np.array([r["D"] for r in rows]),
        Ipp=np.array([r["Ipp"] for r in rows]),
        Ixp=np.array([r["Ixp"] for r in rows]),
        Ixx=np.array([r["Ixx"] for r in rows]),
        Emod=np.array([r["Emod"] for r in rows]),
        mass=np.array([r["mass"] for r in rows]),
        l1_dist=np.array([r["l1_dist"] for r in rows]),
        meta={"dt": dt_eff, "sample_dt": sample_dt, "order2": order2},
    )
    if certificate is not None and getattr(certificate, "lam", None):
        lam = certificate.lam
        series.meta["lambda"] = lam
        series.meta["decay_allowance"] = decay_allowance
        e0 = series.Emod[0]
        slack = 1e-12 * max(abs(e0), 1.0)
        for t, e in zip(series.times, series.Emod):
            bound = e0 * math.exp(-(1.0 - decay_allowance) * lam * t) + slack
            if e > bound:
                series.decay_violations.append((float(t), float(e / bound)))
    return series


def fit_rate(series, window=0.5, field="D"):
    """Exponential rate of a functional over the trailing window.

    Log-linear least squares on the last window fraction of samples;
    returns (lambda_emp, r2).  A constant positive series fits rate
    zero exactly.
    """
    if not 0.0 < window <= 1.0:
        raise ValueError("window must be a fraction in (0, 1]")
    t = np.asarray(series.times, dtype=float)
    y = np.asarray(getattr(series, field), dtype=float)
    k0 = int(math.ceil((1.0 - window) * len(t)))
    t, y = t[k0:], y[k0:]
    if len(t) < 10:
        raise InsufficientData(
            f"need at least 10 samples in the fit window, have {len(t)}"
        )
    if np.any(y <= 0.0):
        raise NonpositiveValues(
            "series has nonpositive values in the fit window"
        )
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(-slope), float(r2)


# ---------------------------------------------------------------------------
# Entropy production diagnostics


def entropy_production_diagnostics(state, model, grid, dt=None, *, order2=True):
    """Both sides of the entropy production identities on one state.

    The four d/dt rows compare a centered time difference (two half
    steps around the midpoint state) against the term-by-term quadrature
    of the curvature, Hessian, and W contractions.  The two Q rows
    compare the second-derivative quadratures of log h against the
    product-rule route through derivatives of h itself.  Residuals are
    relative and expected to shrink at first order under simultaneous
    (dt, dx, dp) refinement.  Defaults to the limited second-order
    transport: the first-order upwind dissipation otherwise dominates
    the time side whenever the state has strong spatial gradients.
    """
    geo = _node_geometry(model, grid)
    if dt is None:
        dt = min(0.5 * cfl_limit(model, grid, order2=False), 1.0)
    op = _op(model, grid)
    mid = step(state, 0.5 * dt, model, grid, op=op, order2=order2)
    plus = step(mid, 0.5 * dt, model, grid, op=op, order2=order2)

    f0 = functionals(state, model, grid)
    f2 = functionals(plus, model, grid)
    fm = functionals(mid, model, grid)

    h = mid.h
    w = grid.mu_weights * grid.dx
    m = fm["mass"]
    floor = H_FLOOR_FRAC * max(m, np.finfo(float).tiny)
    hf = np.maximum(h, floor)
    hb = np.log(hf)

    dhx = _ddx(h, grid.dx)
    dhp = _ddp(h, grid.dp)
    dbx = _ddx(hb, grid.dx)
    dbp = _ddp(hb, grid.dp)
    dbpx = _ddp(dbx, grid.dp)
    d2bp = _ddp(dbp, grid.dp)
    d2hp = _ddp(dhp, grid.dp)
    dhpx = _ddp(dhx, grid.dp)

    gpp = geo.gpp
    Hbar = d2bp - geo.Gamma * dbp
    omega = dbpx * geo.dv + dbx * geo.H_v

    def quad(f):
        return float(np.sum(f * w))

    Qpp = quad(h * (gpp * Hbar) ** 2)
    Qxp = quad(h * (gpp * omega) ** 2)

    rows = {}

    def row(name, lhs, rhs):
        scale = max(abs(lhs), abs(rhs), 1e-12)
        rows[name] = {
            "lhs": lhs,
            "rhs": rhs,
            "residual": abs(lhs - rhs) / scale,
        }

    row("dD", (f2["D"] - f0["D"]) / dt, -fm["Ipp"])

    rhs_ipp = (
        -2.0 * fm["Ixp"]
        - 2.0 * quad(h * geo.ric_t * (gpp * dbp) ** 2)
        - 2.0 * Qpp
    )
    row("dIpp", (f2["Ipp"] - f0["Ipp"]) / dt, rhs_ipp)

    rhs_ixp = (
        -fm["Ixx"]
        - quad(h * geo.ric_t * (gpp * geo.dv * dbx) * (gpp * dbp))
        - 2.0 * quad(h * gpp**2 * Hbar * omega)
        + quad(dbp * dhx * geo.divH)
        + 2.0 * quad(h * gpp**2 * Hbar * dbx * geo.H_v)
        + quad(dhx * gpp**2 * geo.H_v * geo.w_cov * dbp)
    )
    row("dIxp", (f2["Ixp"] - f0["Ixp"]) / dt, rhs_ixp)

    rhs_ixx = (
        -2.0 * Qxp
        + 2.0 * quad(geo.dv * dbx * dhx * geo.divH)
        + 4.0 * quad(h * gpp**2 * omega * dbx * geo.H_v)
        + 2.0 * quad(dhx * gpp**2 * geo.H_v * geo.w_cov * geo.dv * dbx)
    )
    row("dIxx", (f2["Ixx"] - f0["Ixx"]) / dt, rhs_ixx)

    # Product-rule routes: Hess h = h Hess(log h) + (dh x dh)/h and its
    # mixed-derivative analogue, evaluated through derivatives of h.
    Hh = d2hp - geo.Gamma * dhp
    row("Qpp_product", Qpp, quad(gpp**2 * Hbar * (Hh - dhp**2 / hf)))
    chi = dhpx * geo.dv + dhx * geo.H_v
    row("Qxp_product", Qxp, quad(gpp**2 * omega * (chi - dbx * dhp * geo.dv)))

    return rows


# ---------------------------------------------------------------------------
# CSV round trip


def series_to_csv(series, path):
    """Write the series with full round-trip decimal precision."""
    cols = ("times", "D", "Ipp", "Ixp", "Ixx", "Emod", "mass", "l1_dist")
    lines = [CSV_HEADER]
    for i in range(len(series)):
        lines.append(
            ",".join(repr(float(getattr(series, c)[i])) for c in cols)
        )
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def series_from_csv(path):
    """Read a series written by series_to_csv."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    data = np.array(
        [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
    ).reshape(-1, 8)
    return FunctionalSeries(
        times=data[:, 0],
        D=data[:, 1],
        Ipp=data[:, 2],
        Ixp=data[:, 3],
        Ixx=data[:, 4],
        Emod=data[:, 5],
        mass=data[:, 6],
        l1_dist=data[:, 7],
    )
