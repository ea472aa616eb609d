"""Model registry: built-in and user-defined kinetic models.

A model is the data (g, v, E) on momentum space: a Riemannian metric
g_ij, velocity components v^(1)..v^(N) transporting in x, and an energy
E defining the equilibrium weight u = e^-E / sqrt(det g).  The space
and momentum dimensions coincide (M = N).

Built-ins:

* classical(M):  g = identity, v^(I) = p^I, E = |p|^2 / 2.  The drift
  is W^i = -p^i and the Bakry-Emery-Ricci tensor is the identity.
* relativistic(theta): M = N = 3, g_ij = p0 (delta_ij - p_i p_j / p0^2)
  with p0 = sqrt(1 + |p|^2), v = p / p0, E = theta p0.  Ships with a
  closed-form oracle bundle (curvatures, bilinear forms, product-metric
  blocks) used to cross-check the generic tensor machinery.

User models come from plain-text config files with [metric], [velocity]
and [energy] sections whose values are expression strings; see
load_model_file.
"""

from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import (
    HypocertError,
    ModelFileError,
    NonpositiveWeight,
)
from .expressions import (
    Const,
    Coord,
    ExprAST,
    Theta,
    add,
    call,
    diff_expr,
    div,
    mul,
    neg,
    parse_expr,
    powx,
    sub,
    uses_theta,
)
from .fields import ExprMetricField, ExprScalarField

__all__ = [
    "ModelSpec",
    "builtin_classical",
    "builtin_relativistic",
    "weight_u",
    "drift_W",
    "log_weight_field",
    "normalization",
    "load_model_file",
    "parse_expr",
    "diff_expr",
    "ExprAST",
    "RelativisticOracle",
    "ClassicalOracle",
]


@dataclass(frozen=True)
class ModelSpec:
    """Immutable bundle of the fields defining one kinetic model.

    dim is both the momentum and spatial dimension (M = N).  theta is
    the optional temperature-like parameter bound into expressions.
    oracle, when present, provides closed-form reference values.
    """

    name: str
    dim: int
    metric_field: object
    v_fields: tuple
    energy_field: object
    theta: float | None = None
    oracle: object | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("model dimension must be >= 1")
        if len(self.v_fields) != self.dim:
            raise ValueError(
                f"need {self.dim} velocity components, got {len(self.v_fields)}"
            )


# ---------------------------------------------------------------------------
# Derived fields


def _det_ast(rows):
    """Determinant of a square matrix of ASTs by Laplace expansion."""
    m = len(rows)
    if m == 1:
        return rows[0][0]
    total = Const(0.0)
    for j in range(m):
        minor = [
            [rows[r][c] for c in range(m) if c != j] for r in range(1, m)
        ]
        term = mul(rows[0][j], _det_ast(minor))
        total = add(total, term) if j % 2 == 0 else sub(total, term)
    return total


def _metric_rows(metric_field):
    m = metric_field.dim
    zero = Const(0.0)
    return [
        [metric_field.entries.get((min(i, j), max(i, j)), zero) for j in range(m)]
        for i in range(m)
    ]


def log_weight_field(model):
    """Scalar field for log u = -E - (1/2) log det g.

    Uses an exact expression when both g and E are expression-backed;
    falls back to a finite-difference field otherwise.  The result is
    cached on the model.
    """
    cached = model._cache.get("log_weight")
    if cached is not None:
        return cached
    mf, ef = model.metric_field, model.energy_field
    if isinstance(mf, ExprMetricField) and isinstance(ef, ExprScalarField):
        det = _det_ast(_metric_rows(mf))
        ast = sub(neg(ef.ast), mul(Const(0.5), call("log", det)))
        out = ExprScalarField(ast, model.dim, theta=model.theta)
    else:
        from .fields import FDScalarField

        def value(P):
            logu, _ = geometry.log_weight_values(model, P)
            return logu

        out = FDScalarField(value, model.dim)
    model._cache["log_weight"] = out
    return out


def weight_u(model, p):
    """Equilibrium weight u = e^-E / sqrt(det g) at p (positive)."""
    P, single = geometry.as_batch(p, model.dim)
    logu, _ = geometry.log_weight_values(model, P)
    with np.errstate(over="ignore", under="ignore"):
        u = np.exp(logu)
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        raise NonpositiveWeight("weight u underflowed or is not positive")
    return float(u[0]) if single else u


def drift_W(model, p):
    """Drift vector W = grad_p log u (the unique choice preserving u)."""
    return geometry.gradient_p(model, log_weight_field(model), p)


# ---------------------------------------------------------------------------
# Built-in models


def builtin_classical(M):
    """Classical kinetic model: g = identity, v^(I) = p^I, E = |p|^2/2."""
    if M < 1:
        raise ValueError("dimension must be >= 1")
    entries = {(i, i): Const(1.0) for i in range(M)}
    metric = ExprMetricField(entries, M)
    v_fields = tuple(ExprScalarField(Coord(i + 1), M) for i in range(M))
    sq = Const(0.0)
    for i in range(M):
        sq = add(sq, powx(Coord(i + 1), Const(2.0)))
    energy = ExprScalarField(div(sq, Const(2.0)), M)
    return ModelSpec(
        name="classical",
        dim=M,
        metric_field=metric,
        v_fields=v_fields,
        energy_field=energy,
        oracle=ClassicalOracle(M),
    )


def _p0_ast(dim):
    sq = Const(1.0)
    for i in range(dim):
        sq = add(sq, powx(Coord(i + 1), Const(2.0)))
    return call("sqrt", sq)


def builtin_relativistic(theta, dim=3):
    """Relativistic kinetic model at inverse temperature theta.

    g_ij = p0 delta_ij - p_i p_j / p0, v^(I) = p^I / p0, E = theta p0,
    with p0 = sqrt(1 + |p|^2).  The default dimension 3 carries the
    closed-form oracle bundle; other dimensions give the same family
    without closed-form references (dim = 1 feeds the 1D solver).
    """
    theta = float(theta)
    if theta <= 0:
        raise ValueError("theta must be positive")
    p0 = _p0_ast(dim)
    entries = {}
    for i in range(dim):
        for j in range(i, dim):
            pij = mul(Coord(i + 1), Coord(j + 1))
            if i == j:
                entries[(i, j)] = sub(p0, div(pij, p0))
            else:
                entries[(i, j)] = neg(div(pij, p0))
    metric = ExprMetricField(entries, dim, theta=theta)
    v_fields = tuple(
        ExprScalarField(div(Coord(i + 1), p0), dim, theta=theta) for i in range(dim)
    )
    energy = ExprScalarField(mul(Theta(), p0), dim, theta=theta)
    oracle = RelativisticOracle(theta) if dim == 3 else None
    return ModelSpec(
        name=f"relativistic(theta={theta:g})" + ("" if dim == 3 else f", dim={dim}"),
        dim=dim,
        metric_field=metric,
        v_fields=v_fields,
        energy_field=energy,
        theta=theta,
        oracle=oracle,
    )


class ClassicalOracle:
    """Constant closed forms for the classical model."""

    def __init__(self, dim):
        self.dim = dim

    def _eye(self, P, scale=1.0):
        n = P.shape[0]
        return np.broadcast_to(scale * np.eye(self.dim), (n, self.dim, self.dim)).copy()

    def _zero(self, P):
        return np.zeros((P.shape[0], self.dim, self.dim))

    def metric(self, P):
        return self._eye(P)

    def ricci(self, P):
        return self._zero(P)

    def hess_log_u(self, P):
        return self._eye(P, -1.0)

    def bakry(self, P):
        return self._eye(P)

    def form_A(self, P):
        return self._eye(P)

    def form_B(self, P):
        return self._zero(P)

    def form_C(self, P):
        return self._zero(P)

    def form_R(self, P):
        return self._zero(P)


class RelativisticOracle:
    """Closed-form reference values for the 3D relativistic model.

    All methods take a batch P with shape (n, 3) and return batched
    tensors.  delta is the Euclidean identity, g the model metric, A
    the velocity-gradient form; x-block indices refer to the product
    metric G = A_IJ dx dx + g_ij dp dp used by the log-Sobolev
    criterion, with A_IJ the matrix inverse of A^IJ and
    U = u / sqrt(det A_IJ) = u / p0^(11/2).
    """

    def __init__(self, theta):
        self.theta = float(theta)
        self.dim = 3

    @staticmethod
    def p0(P):
        return np.sqrt(1.0 + np.sum(P * P, axis=1))

    def _parts(self, P):
        n = P.shape[0]
        p0 = self.p0(P)
        eye = np.broadcast_to(np.eye(3), (n, 3, 3))
        pp = P[:, :, None] * P[:, None, :]
        return p0, eye, pp

    def metric(self, P):
        p0, eye, pp = self._parts(P)
        return p0[:, None, None] * eye - pp / p0[:, None, None]

    def metric_inv(self, P):
        p0, eye, pp = self._parts(P)
        return (eye + pp) / p0[:, None, None]

    def sqrt_det(self, P):
        return np.sqrt(self.p0(P))

    def form_A(self, P):
        p0, eye, pp = self._parts(P)
        return (eye - pp / p0[:, None, None] ** 2) / p0[:, None, None] ** 3

    def form_A_lower_const(self, P):
        """A(xi, xi) >= |xi|^2 / p0^5."""
        return self.p0(P) ** -5

    def form_B(self, P):
        # Gram matrix of div Hess v^I; equals (11/2)^2 delta at p = 0.
        p0, eye, _ = self._parts(P)
        A = self.form_A(P)
        c_delta = -21.0 * (9 * p0**2 + 35) / (16 * p0**9)
        c_A = (225 * p0**4 + 399 * p0**2 + 784) / (16 * p0**6)
        return c_delta[:, None, None] * eye + c_A[:, None, None] * A

    def form_C(self, P):
        p0, eye, _ = self._parts(P)
        A = self.form_A(P)
        c_delta = 9.0 / (4 * p0**6)
        c_A = 9.0 * (2 * p0**2 - 3) / (4 * p0**3)
        return c_delta[:, None, None] * eye + c_A[:, None, None] * A

    def form_R(self, P):
        p0, eye, _ = self._parts(P)
        A = self.form_A(P)
        pref = (1 + 2 * self.theta * p0) ** 2 / (16 * p0**9)
        inner = (
            16 * (p0**2 - 1)[:, None, None] * eye
            + (p0**3 * (9 * p0**4 - 34 * p0**2 + 25))[:, None, None] * A
        )
        return pref[:, None, None] * inner

    def ricci(self, P):
        p0, eye, _ = self._parts(P)
        g = self.metric(P)
        return (
            3.0 * eye - ((4 + 15 * p0**2) / p0)[:, None, None] * g
        ) / (4 * p0**2)[:, None, None]

    def hess_log_u(self, P):
        p0, eye, _ = self._parts(P)
        g = self.metric(P)
        th = self.theta
        c_g = (3 + 3 * p0**2 + 2 * th * p0 * (1 + 3 * p0**2)) / p0
        return (
            (4 + 4 * th * p0)[:, None, None] * eye - c_g[:, None, None] * g
        ) / (4 * p0**2)[:, None, None]

    def bakry(self, P):
        p0, eye, _ = self._parts(P)
        g = self.metric(P)
        th = self.theta
        c_g = (6 * th * p0**3 - 12 * p0**2 + 2 * th * p0 - 1) / p0
        return (
            -(1 + 4 * th * p0)[:, None, None] * eye + c_g[:, None, None] * g
        ) / (4 * p0**2)[:, None, None]

    def bakry_lower_bracket(self, P):
        """Exact lower bound: bakry >= bracket * g pointwise."""
        p0 = self.p0(P)
        th = self.theta
        return (2 * th * p0**3 - 13 * p0**2 + 2 * th * p0 - 1) / (4 * p0**3)

    # -- product-metric blocks (x-block uses G_IJ = inverse of form_A)

    def G_xx(self, P):
        p0, eye, pp = self._parts(P)
        return p0[:, None, None] ** 3 * (eye + pp)

    def ricci_G_xx(self, P):
        p0, eye, _ = self._parts(P)
        G = self.G_xx(P)
        return (6.5 * p0**2)[:, None, None] * eye - (
            (19 * p0**2 - 7) / p0**3
        )[:, None, None] * G

    def ricci_G_pp(self, P):
        p0, eye, _ = self._parts(P)
        g = self.metric(P)
        return (1.5 / p0**2)[:, None, None] * eye - (
            (25 * p0**2 - 3) / (2 * p0**3)
        )[:, None, None] * g

    def hess_logU_xx(self, P):
        # x-block of the G-covariant Hessian of log U.  log U depends on p
        # only, so this block is pure connection: -Gamma^k_IJ d_k log U.
        # Vanishes at p = 0 where all first derivatives of G vanish.
        p0, eye, _ = self._parts(P)
        G = self.G_xx(P)
        pref = self.theta * p0 + 6.0
        inner = p0[:, None, None] ** 2 * eye - (
            (5 * p0**2 - 3) / (2 * p0**3)
        )[:, None, None] * G
        return pref[:, None, None] * inner

    def hess_logU_pp(self, P):
        # p-block equals the fiber Hessian of log U = -theta p0 - 6 log p0;
        # at p = 0 it reduces to -(theta + 6) delta.
        p0, eye, _ = self._parts(P)
        g = self.metric(P)
        th = self.theta
        return ((th * p0 + 12) / p0**2)[:, None, None] * eye - (
            (3 * th * p0**3 + 18 * p0**2 + th * p0 + 18) / (2 * p0**3)
        )[:, None, None] * g


# ---------------------------------------------------------------------------
# Normalization constant


def normalization(model, radius=12.0, points_per_axis=None, shells=6):
    """Normalization Theta with Theta^-1 = integral of e^-E over p.

    Computed once per model by trapezoid quadrature on the cube
    [-radius, radius]^M and cached.  A geometric continuation of the
    outermost shell masses estimates the truncated tail; a tail above
    1e-8 of the total triggers a warning, since then the cached Theta
    (and any measure built from it) undercounts.

    Returns a dict with keys theta_norm, total, tail_fraction, radius.
    """
    cached = model._cache.get("normalization")
    if cached is not None:
        return cached
    m = model.dim
    if points_per_axis is None:
        points_per_axis = {1: 4001, 2: 401, 3: 101, 4: 41}.get(m, 21)
    axis = np.linspace(-radius, radius, points_per_axis)
    w = np.full(points_per_axis, axis[1] - axis[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    grids = np.meshgrid(*([axis] * m), indexing="ij")
    P = np.stack([gr.ravel() for gr in grids], axis=1)
    weights = np.ones(P.shape[0])
    for k in range(m):
        wk = np.meshgrid(*([w] * m), indexing="ij")[k].ravel()
        weights *= wk

    total = 0.0
    shell_mass = np.zeros(shells)
    edges = np.linspace(0.0, radius, shells + 1)
    chunk = 262144
    for start in range(0, P.shape[0], chunk):
        block = P[start : start + chunk]
        wts = weights[start : start + chunk]
        with np.errstate(under="ignore"):
            dens = np.exp(-model.energy_field.value(block)) * wts
        total += float(np.sum(dens))
        rad = np.max(np.abs(block), axis=1)
        idx = np.clip(np.searchsorted(edges, rad, side="right") - 1, 0, shells - 1)
        np.add.at(shell_mass, idx, dens)

    if total <= 0.0 or not np.isfinite(total):
        raise NonpositiveWeight("normalization integral is not positive and finite")
    last, prev = shell_mass[-1], shell_mass[-2]
    if last <= 0.0:
        tail = 0.0
    elif last >= prev:
        tail = np.inf
    else:
        ratio = last / prev
        tail = last * ratio / (1.0 - ratio)
    tail_fraction = tail / (total + tail) if np.isfinite(tail) else 1.0
    if tail_fraction > 1e-8:
        warnings.warn(
            f"normalization tail estimate {tail_fraction:.2e} of total exceeds 1e-8; "
            f"increase the quadrature radius for model {model.name}",
            stacklevel=2,
        )
    info = {
        "theta_norm": 1.0 / total,
        "total": total,
        "tail_fraction": float(tail_fraction),
        "radius": radius,
    }
    model._cache["normalization"] = info
    return info


# ---------------------------------------------------------------------------
# Model files


def _require(config, section, path):
    if not config.has_section(section):
        raise ModelFileError(f"{path}: missing [{section}] section")
    return config[section]


def load_model_file(path):
    """Load a user model from a config file.

    Layout:

        [model]
        theta = 4.0            ; optional scalar, bound to 'theta'

        [metric]
        g11 = 1/p1^4           ; entries g{i}{j}, i <= j; missing
        g12 = 0                ; off-diagonal entries default to 0

        [velocity]
        v1 = p1                ; components v1..vN; N fixes the dimension

        [energy]
        E = p1^2/2

    All values are expression strings over p1..pM and theta.
    """
    config = configparser.ConfigParser(interpolation=None)
    config.optionxform = str
    read = config.read(path)
    if not read:
        raise ModelFileError(f"cannot read model file {path}")

    theta = None
    if config.has_section("model") and config.has_option("model", "theta"):
        try:
            theta = float(config.get("model", "theta"))
        except ValueError as exc:
            raise ModelFileError(f"{path}: theta is not a number") from exc

    velocity = _require(config, "velocity", path)
    dim = 0
    while config.has_option("velocity", f"v{dim + 1}"):
        dim += 1
    if dim == 0:
        raise ModelFileError(f"{path}: [velocity] must define v1 (then v2, ...)")
    extra = set(velocity) - {f"v{i + 1}" for i in range(dim)}
    if extra:
        raise ModelFileError(f"{path}: unexpected velocity keys {sorted(extra)}")

    def parse(section, key, src):
        try:
            return parse_expr(src, max_coord_index=dim)
        except HypocertError as exc:
            raise ModelFileError(f"{path}: [{section}] {key}: {exc}") from exc

    metric_sec = _require(config, "metric", path)
    entries = {}
    for key, src in metric_sec.items():
        if not (len(key) == 3 and key.startswith("g") and key[1:].isdigit()):
            raise ModelFileError(f"{path}: bad metric key {key!r} (want g{{i}}{{j}})")
        i, j = int(key[1]) - 1, int(key[2]) - 1
        if not (0 <= i < dim and 0 <= j < dim):
            raise ModelFileError(f"{path}: metric key {key!r} outside dimension {dim}")
        entries[(min(i, j), max(i, j))] = parse("metric", key, src)
    for i in range(dim):
        if (i, i) not in entries:
            raise ModelFileError(f"{path}: missing diagonal metric entry g{i+1}{i+1}")

    energy_sec = _require(config, "energy", path)
    if "E" not in energy_sec:
        raise ModelFileError(f"{path}: [energy] must define E")
    energy_ast = parse("energy", "E", energy_sec["E"])
    v_asts = [parse("velocity", f"v{i+1}", velocity[f"v{i+1}"]) for i in range(dim)]

    all_asts = [energy_ast] + v_asts + list(entries.values())
    if theta is None and any(uses_theta(a) for a in all_asts):
        raise ModelFileError(f"{path}: expressions use theta but [model] theta is unset")

    return ModelSpec(
        name=str(path),
        dim=dim,
        metric_field=ExprMetricField(entries, dim, theta=theta),
        v_fields=tuple(ExprScalarField(a, dim, theta=theta) for a in v_asts),
        energy_field=ExprScalarField(energy_ast, dim, theta=theta),
        theta=theta,
    )
