"""Quadrature-collapsed spline features for functional covariates.

Each subject's integral ``int X_i(s) B_k(s) ds`` (or ``int B_j(s) B_k(X_i(s)) ds``
for the additive model) is replaced by a weighted sum over that subject's own
grid, turning the functional model into an ordinary parametric AFT model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .basis import (
    SplineBasis,
    TensorBasis,
    basis_matrix,
    make_bspline_basis,
    make_penalty,
    make_tensor_penalty,
)
from .dataset import SurvivalDataset

QUADRATURE_KINDS = ("auto", "riemann", "trapezoid")

log = logging.getLogger(__name__)


class DesignError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    functional_block: np.ndarray
    scalar_block: np.ndarray
    penalty: np.ndarray
    column_centers: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.scalar_block.shape[0]

    @property
    def n_scalar(self) -> int:
        return self.scalar_block.shape[1]

    @property
    def n_functional(self) -> int:
        return self.functional_block.shape[1]

    @property
    def full(self) -> np.ndarray:
        """``[intercept, Z, C]``: the design matrix used for the linear predictor."""
        return np.hstack([self.scalar_block, self.functional_block])


def is_even_grid(grid, rtol: float = 1e-9) -> bool:
    h = np.diff(np.asarray(grid, dtype=float))
    return bool(np.all(np.abs(h - h.mean()) <= rtol * abs(h.mean())))


def quadrature_weights(grid, kind: str = "trapezoid") -> np.ndarray:
    """Per-point weights approximating ``int g(s) ds`` over a subject's grid.

    ``riemann`` gives ``1/p`` everywhere (intended for even grids on [0, 1]);
    ``trapezoid`` uses half-gaps at the ends; ``auto`` picks riemann only for
    even grids.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise DesignError("quadrature needs at least 2 grid points")
    if kind == "auto":
        kind = "riemann" if is_even_grid(grid) else "trapezoid"
    if kind == "riemann":
        return np.full(grid.size, 1.0 / grid.size)
    if kind == "trapezoid":
        h = np.diff(grid)
        w = np.empty(grid.size)
        w[0] = h[0] / 2
        w[-1] = h[-1] / 2
        w[1:-1] = (h[:-1] + h[1:]) / 2
        return w
    raise DesignError(f"unknown quadrature rule {kind!r}; expected one of {QUADRATURE_KINDS}")


def _scalar_block(data: SurvivalDataset) -> np.ndarray:
    return np.hstack([np.ones((data.n, 1)), data.scalar_matrix])


def _pad_penalty(D: np.ndarray, n_unpen: int) -> np.ndarray:
    k = D.shape[0]
    out = np.zeros((n_unpen + k, n_unpen + k))
    out[n_unpen:, n_unpen:] = D
    return out


def linear_features(data: SurvivalDataset, basis: SplineBasis, rule: str = "auto") -> np.ndarray:
    """``C_ik = sum_j q_ij X_i(s_ij) B_k(s_ij)``, one row per subject."""
    shared = data.shared_grid()
    if shared is not None:
        q = quadrature_weights(shared, rule)
        B = basis_matrix(basis, shared)
        X = np.vstack([s.values for s in data.subjects])
        return (X * q) @ B
    rows = []
    for sub in data.subjects:
        q = quadrature_weights(sub.grid, rule)
        rows.append((sub.values * q) @ basis_matrix(basis, sub.grid))
    return np.vstack(rows)


def build_linear_design(data: SurvivalDataset, basis: SplineBasis, rule: str = "auto") -> DesignMatrix:
    C = linear_features(data, basis, rule)
    Zb = _scalar_block(data)
    return DesignMatrix(C, Zb, _pad_penalty(make_penalty(basis.num_basis).matrix, Zb.shape[1]))


def make_x_basis(data: SurvivalDataset, K: int, degree: int = 3, expand: float = 0.01) -> SplineBasis:
    """Basis over the observed range of functional values, widened by ``expand`` per side."""
    lo = min(float(s.values.min()) for s in data.subjects)
    hi = max(float(s.values.max()) for s in data.subjects)
    width = hi - lo
    if width <= 0:
        width = max(abs(lo), 1.0)
    return make_bspline_basis((lo - expand * width, hi + expand * width), K, degree)


def additive_features(
    data: SurvivalDataset, tb: TensorBasis, rule: str = "auto", clamp_x: bool = False
) -> np.ndarray:
    """Uncentered tensor features ``sum_m q_im B_j(s_im) B_k(X_i(s_im))``.

    Values outside the x-basis range raise unless ``clamp_x`` is set, in which
    case they are clamped to the boundary.
    """
    xlo, xhi = tb.x_basis.domain
    n_out = 0
    for sub in data.subjects:
        outside = int(np.count_nonzero((sub.values < xlo) | (sub.values > xhi)))
        if outside and not clamp_x:
            raise DesignError(
                f"subject {sub.id}: functional values outside the x-basis range [{xlo:g}, {xhi:g}]"
            )
        n_out += outside
    if n_out:
        log.info("clamped %d functional value(s) into the x-basis range [%g, %g]", n_out, xlo, xhi)
    shared = data.shared_grid()
    if shared is not None:
        q = quadrature_weights(shared, rule)
        Bs = basis_matrix(tb.s_basis, shared) * q[:, None]
        X = np.clip(np.vstack([s.values for s in data.subjects]), xlo, xhi)
        Bx = basis_matrix(tb.x_basis, X.ravel()).reshape(X.shape[0], X.shape[1], -1)
        return np.einsum("mj,imk->ijk", Bs, Bx).reshape(X.shape[0], -1)
    rows = []
    for sub in data.subjects:
        q = quadrature_weights(sub.grid, rule)
        Bs = basis_matrix(tb.s_basis, sub.grid)
        Bx = basis_matrix(tb.x_basis, np.clip(sub.values, xlo, xhi))
        rows.append(((Bs * q[:, None]).T @ Bx).ravel())
    return np.vstack(rows)


def build_additive_design(
    data: SurvivalDataset,
    tb: TensorBasis,
    rule: str = "auto",
    centers: np.ndarray | None = None,
    clamp_x: bool = False,
) -> DesignMatrix:
    """Tensor design with columns centered by their means over subjects.

    Centering imposes the empirical mean-zero constraint on the fitted surface;
    the intercept absorbs the shift. Pass training ``centers`` for new data.
    """
    raw = additive_features(data, tb, rule, clamp_x)
    if centers is None:
        centers = raw.mean(axis=0)
    Zb = _scalar_block(data)
    D = _pad_penalty(make_tensor_penalty(tb).matrix, Zb.shape[1])
    return DesignMatrix(raw - centers, Zb, D, np.asarray(centers))
