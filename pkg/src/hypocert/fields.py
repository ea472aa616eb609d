"""Field handles over momentum space.

A field handle evaluates a scalar, vector, metric, or 2-tensor quantity
and its derivatives on a batch of points P with shape (n, M).  Two
families exist:

* expression-backed fields differentiate symbolically (exact to round
  off); derivative ASTs are built lazily and cached, and symmetric
  derivative slots (Hessians, metric jets) are filled from a single
  representative AST so the returned arrays are symmetric exactly;
* finite-difference fields wrap a plain evaluation callable and use
  central differences with a per-point step h = h_scale * max(1, |p|).

All handles expose an `analytic` flag so callers can pick the best
available scheme.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import FDOrderError
from .expressions import diff_expr, evaluate

__all__ = [
    "ExprScalarField",
    "FDScalarField",
    "ExprMetricField",
    "FDMetricField",
    "ExprVectorField",
    "FDVectorField",
    "FDTensor2Field",
    "fd_scalar_view",
    "fd_metric_view",
    "DEFAULT_FD_SCALE",
]

DEFAULT_FD_SCALE = 1e-4


def _steps(P, h_scale):
    """Per-point FD step, relative to the point's Euclidean norm."""
    return h_scale * np.maximum(1.0, np.linalg.norm(P, axis=1))


def _shift(P, k, delta):
    Q = P.copy()
    Q[:, k] += delta
    return Q


class ExprScalarField:
    """Scalar field defined by an expression AST."""

    analytic = True

    def __init__(self, ast, dim, theta=None):
        self.ast = ast
        self.dim = dim
        self.theta = theta
        self._grad_asts = None
        self._hess_asts = None
        self._third_asts = None

    def _grads(self):
        if self._grad_asts is None:
            self._grad_asts = [diff_expr(self.ast, k + 1) for k in range(self.dim)]
        return self._grad_asts

    def _hessians(self):
        if self._hess_asts is None:
            grads = self._grads()
            self._hess_asts = {
                (i, j): diff_expr(grads[i], j + 1)
                for i in range(self.dim)
                for j in range(i, self.dim)
            }
        return self._hess_asts

    def _thirds(self):
        if self._third_asts is None:
            hess = self._hessians()
            self._third_asts = {
                (i, j, k): diff_expr(hess[(i, j)], k + 1)
                for i in range(self.dim)
                for j in range(i, self.dim)
                for k in range(j, self.dim)
            }
        return self._third_asts

    def value(self, P):
        return np.asarray(evaluate(self.ast, P, self.theta))

    def grad(self, P):
        n = P.shape[0]
        out = np.empty((n, self.dim))
        for k, ast in enumerate(self._grads()):
            out[:, k] = evaluate(ast, P, self.theta)
        return out

    def hess(self, P):
        n = P.shape[0]
        out = np.empty((n, self.dim, self.dim))
        for (i, j), ast in self._hessians().items():
            vals = evaluate(ast, P, self.theta)
            out[:, i, j] = vals
            out[:, j, i] = vals
        return out

    def third(self, P):
        n = P.shape[0]
        out = np.empty((n, self.dim, self.dim, self.dim))
        for (i, j, k), ast in self._thirds().items():
            vals = evaluate(ast, P, self.theta)
            for perm in set(itertools.permutations((i, j, k))):
                out[:, perm[0], perm[1], perm[2]] = vals
        return out

    def derivative(self, P, axes):
        """Evaluate an arbitrary mixed partial; axes are 0-based."""
        ast = self.ast
        for ax in axes:
            ast = diff_expr(ast, ax + 1)
        return np.asarray(evaluate(ast, P, self.theta))


class FDScalarField:
    """Scalar field given only by an evaluation callable fn(P) -> (n,)."""

    analytic = False

    def __init__(self, fn, dim, h_scale=DEFAULT_FD_SCALE):
        self.fn = fn
        self.dim = dim
        self.h_scale = h_scale

    def value(self, P):
        return np.asarray(self.fn(P), dtype=float)

    def grad(self, P):
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        out = np.empty((n, self.dim))
        for k in range(self.dim):
            out[:, k] = (
                self.value(_shift(P, k, h)) - self.value(_shift(P, k, -h))
            ) / (2.0 * h)
        return out

    def hess(self, P):
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        f0 = self.value(P)
        out = np.empty((n, self.dim, self.dim))
        for i in range(self.dim):
            out[:, i, i] = (
                self.value(_shift(P, i, h)) - 2.0 * f0 + self.value(_shift(P, i, -h))
            ) / (h * h)
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                pp = self.value(_shift(_shift(P, i, h), j, h))
                pm = self.value(_shift(_shift(P, i, h), j, -h))
                mp = self.value(_shift(_shift(P, i, -h), j, h))
                mm = self.value(_shift(_shift(P, i, -h), j, -h))
                val = (pp - pm - mp + mm) / (4.0 * h * h)
                out[:, i, j] = val
                out[:, j, i] = val
        return out

    def third(self, P):
        # Central difference of the Hessian; noisier than the lower
        # orders but only exercised when no analytic path exists.
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        out = np.empty((n, self.dim, self.dim, self.dim))
        for l in range(self.dim):
            hp = self.hess(_shift(P, l, h))
            hm = self.hess(_shift(P, l, -h))
            out[:, l] = (hp - hm) / (2.0 * h)[:, None, None]
        return out

    def derivative(self, P, axes):
        order = len(axes)
        if order == 0:
            return self.value(P)
        if order == 1:
            return self.grad(P)[:, axes[0]]
        if order == 2:
            return self.hess(P)[:, axes[0], axes[1]]
        if order == 3:
            return self.third(P)[:, axes[0], axes[1], axes[2]]
        raise FDOrderError(
            f"finite-difference stencils support derivative order <= 3, got {order}"
        )


class ExprMetricField:
    """Symmetric metric field g_ij from expression ASTs.

    entries maps 0-based (i, j) with i <= j to an AST; the lower
    triangle mirrors the same objects.
    """

    analytic = True

    def __init__(self, entries, dim, theta=None):
        self.dim = dim
        self.theta = theta
        self.entries = {}
        for (i, j), ast in entries.items():
            if i > j:
                i, j = j, i
            self.entries[(i, j)] = ast
        self._grad_asts = None
        self._hess_asts = None

    def _grads(self):
        if self._grad_asts is None:
            self._grad_asts = {
                (k, i, j): diff_expr(ast, k + 1)
                for (i, j), ast in self.entries.items()
                for k in range(self.dim)
            }
        return self._grad_asts

    def _hessians(self):
        if self._hess_asts is None:
            grads = self._grads()
            self._hess_asts = {
                (l, k, i, j): diff_expr(grads[(k, i, j)], l + 1)
                for (k, i, j) in grads
                for l in range(k, self.dim)
            }
        return self._hess_asts

    def value(self, P):
        n = P.shape[0]
        out = np.zeros((n, self.dim, self.dim))
        for (i, j), ast in self.entries.items():
            vals = evaluate(ast, P, self.theta)
            out[:, i, j] = vals
            if i != j:
                out[:, j, i] = vals
        return out

    def grad(self, P):
        """[n, k, i, j] = d_k g_ij."""
        n = P.shape[0]
        out = np.zeros((n, self.dim, self.dim, self.dim))
        for (k, i, j), ast in self._grads().items():
            vals = evaluate(ast, P, self.theta)
            out[:, k, i, j] = vals
            if i != j:
                out[:, k, j, i] = vals
        return out

    def hess(self, P):
        """[n, l, k, i, j] = d_l d_k g_ij."""
        n = P.shape[0]
        out = np.zeros((n, self.dim, self.dim, self.dim, self.dim))
        for (l, k, i, j), ast in self._hessians().items():
            vals = evaluate(ast, P, self.theta)
            for a, b in ((l, k), (k, l)):
                out[:, a, b, i, j] = vals
                if i != j:
                    out[:, a, b, j, i] = vals
        return out


class FDMetricField:
    """Metric field from an evaluation callable fn(P) -> (n, M, M)."""

    analytic = False

    def __init__(self, fn, dim, h_scale=DEFAULT_FD_SCALE):
        self.fn = fn
        self.dim = dim
        self.h_scale = h_scale

    def value(self, P):
        return np.asarray(self.fn(P), dtype=float)

    def grad(self, P):
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        out = np.empty((n, self.dim, self.dim, self.dim))
        for k in range(self.dim):
            out[:, k] = (self.value(_shift(P, k, h)) - self.value(_shift(P, k, -h))) / (
                2.0 * h
            )[:, None, None]
        return out

    def hess(self, P):
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        g0 = self.value(P)
        out = np.empty((n, self.dim, self.dim, self.dim, self.dim))
        for k in range(self.dim):
            out[:, k, k] = (
                self.value(_shift(P, k, h)) - 2.0 * g0 + self.value(_shift(P, k, -h))
            ) / (h * h)[:, None, None]
        for l in range(self.dim):
            for k in range(l + 1, self.dim):
                pp = self.value(_shift(_shift(P, l, h), k, h))
                pm = self.value(_shift(_shift(P, l, h), k, -h))
                mp = self.value(_shift(_shift(P, l, -h), k, h))
                mm = self.value(_shift(_shift(P, l, -h), k, -h))
                val = (pp - pm - mp + mm) / (4.0 * h * h)[:, None, None]
                out[:, l, k] = val
                out[:, k, l] = val
        return out


class ExprVectorField:
    """Vector field Z^i from one AST per component."""

    analytic = True

    def __init__(self, components, dim, theta=None):
        self.components = list(components)
        self.dim = dim
        self.theta = theta
        self._jac_asts = None

    def value(self, P):
        n = P.shape[0]
        out = np.empty((n, len(self.components)))
        for i, ast in enumerate(self.components):
            out[:, i] = evaluate(ast, P, self.theta)
        return out

    def jacobian(self, P):
        """[n, k, i] = d_k Z^i."""
        if self._jac_asts is None:
            self._jac_asts = [
                [diff_expr(ast, k + 1) for ast in self.components]
                for k in range(self.dim)
            ]
        n = P.shape[0]
        out = np.empty((n, self.dim, len(self.components)))
        for k, row in enumerate(self._jac_asts):
            for i, ast in enumerate(row):
                out[:, k, i] = evaluate(ast, P, self.theta)
        return out


class FDVectorField:
    """Vector field from a callable fn(P) -> (n, M)."""

    analytic = False

    def __init__(self, fn, dim, h_scale=DEFAULT_FD_SCALE):
        self.fn = fn
        self.dim = dim
        self.h_scale = h_scale

    def value(self, P):
        return np.asarray(self.fn(P), dtype=float)

    def jacobian(self, P):
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        out = np.empty((n, self.dim, self.dim))
        for k in range(self.dim):
            out[:, k] = (self.value(_shift(P, k, h)) - self.value(_shift(P, k, -h))) / (
                2.0 * h
            )[:, None]
        return out


class FDTensor2Field:
    """(2,0)-tensor field from a callable fn(P) -> (n, M, M)."""

    analytic = False

    def __init__(self, fn, dim, h_scale=DEFAULT_FD_SCALE):
        self.fn = fn
        self.dim = dim
        self.h_scale = h_scale

    def value(self, P):
        return np.asarray(self.fn(P), dtype=float)

    def grad(self, P):
        """[n, k, i, j] = d_k A^ij."""
        n = P.shape[0]
        h = _steps(P, self.h_scale)
        out = np.empty((n, self.dim, self.dim, self.dim))
        for k in range(self.dim):
            out[:, k] = (self.value(_shift(P, k, h)) - self.value(_shift(P, k, -h))) / (
                2.0 * h
            )[:, None, None]
        return out


def fd_scalar_view(field, h_scale=DEFAULT_FD_SCALE):
    """Wrap any scalar field so derivatives come from central FD."""
    return FDScalarField(field.value, field.dim, h_scale)


def fd_metric_view(field, h_scale=DEFAULT_FD_SCALE):
    """Wrap any metric field so derivatives come from central FD."""
    return FDMetricField(field.value, field.dim, h_scale)
