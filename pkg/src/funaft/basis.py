"""B-spline bases, tensor-product bases and difference penalties."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# running count of evaluation points clamped into a basis domain
clamp_events = {"count": 0}


class BasisConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SplineBasis:
    degree: int
    num_basis: int
    knots: np.ndarray
    domain: tuple[float, float]

    def __call__(self, s) -> np.ndarray:
        return basis_matrix(self, s)

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.degree + 1 : self.num_basis]

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "num_basis": self.num_basis,
            "knots": self.knots.tolist(),
            "domain": list(self.domain),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplineBasis":
        return cls(int(d["degree"]), int(d["num_basis"]), np.asarray(d["knots"], float), tuple(d["domain"]))


@dataclass(frozen=True)
class TensorBasis:
    s_basis: SplineBasis
    x_basis: SplineBasis

    @property
    def num_basis(self) -> int:
        return self.s_basis.num_basis * self.x_basis.num_basis

    def __call__(self, s, x) -> np.ndarray:
        """Row-wise products: column ``j * K_X + k`` is ``B_j(s) B_k(x)``."""
        bs = basis_matrix(self.s_basis, s)
        bx = basis_matrix(self.x_basis, x)
        return (bs[:, :, None] * bx[:, None, :]).reshape(bs.shape[0], -1)


@dataclass(frozen=True, eq=False)
class PenaltyMatrix:
    matrix: np.ndarray
    null_space_dim: int
    # difference operator R with matrix = R'R; lets quad() vanish exactly on the null space
    factor: np.ndarray | None = None

    def quad(self, b) -> float:
        b = np.asarray(b, dtype=float)
        if self.factor is not None:
            r = self.factor @ b
            return float(r @ r)
        return float(b @ self.matrix @ b)


def make_bspline_basis(domain=(0.0, 1.0), K: int = 20, degree: int = 3) -> SplineBasis:
    """Clamped B-spline basis with ``K - degree - 1`` equally spaced interior knots."""
    lo, hi = map(float, domain)
    if not hi > lo:
        raise BasisConfigError(f"degenerate domain [{lo}, {hi}]")
    if degree < 0:
        raise BasisConfigError("degree must be nonnegative")
    if K < degree + 1:
        raise BasisConfigError(f"need K >= degree + 1 = {degree + 1}, got K = {K}")
    n_int = K - degree - 1
    interior = lo + (hi - lo) * np.arange(1, n_int + 1) / (n_int + 1)
    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    return SplineBasis(degree, K, knots, (lo, hi))


def basis_matrix(basis: SplineBasis, s) -> np.ndarray:
    """Evaluate all basis functions at the points ``s``; returns ``len(s) x K``.

    Points outside the domain are clamped to the boundary (and counted).
    Uses the triangular Cox-de Boor scheme on the ``degree + 1`` functions
    that are nonzero on each knot span.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float)).ravel()
    lo, hi = basis.domain
    outside = (s < lo) | (s > hi)
    n_out = int(outside.sum())
    if n_out:
        clamp_events["count"] += n_out
        log.warning("clamped %d evaluation point(s) into [%g, %g]", n_out, lo, hi)
        s = np.clip(s, lo, hi)

    t = basis.knots
    p = basis.degree
    K = basis.num_basis
    # span index i with t[i] <= s < t[i+1], restricted to p..K-1
    span = np.searchsorted(t, s, side="right") - 1
    span = np.clip(span, p, K - 1)

    m = s.size
    N = np.zeros((m, p + 1))
    N[:, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = s - t[span + 1 - j]
        right[:, j] = t[span + j] - s
        saved = np.zeros(m)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = np.divide(N[:, r], denom, out=np.zeros(m), where=denom != 0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved

    out = np.zeros((m, K))
    cols = span[:, None] - p + np.arange(p + 1)[None, :]
    np.put_along_axis(out, cols, N, axis=1)
    return out


def eval_basis(basis: SplineBasis, s: float) -> np.ndarray:
    return basis_matrix(basis, [s])[0]


def difference_matrix(K: int, order: int = 2) -> np.ndarray:
    return np.diff(np.eye(K), n=order, axis=0)


def make_penalty(K: int) -> PenaltyMatrix:
    """Second-order difference penalty ``D = Delta2' Delta2``."""
    if K < 3:
        raise BasisConfigError(f"second-difference penalty needs K >= 3, got {K}")
    d2 = difference_matrix(K, 2)
    return PenaltyMatrix(d2.T @ d2, 2, d2)


def make_tensor_penalty(tb: TensorBasis) -> PenaltyMatrix:
    """Kronecker-sum penalty ``D_S (x) I + I (x) D_X`` sharing one smoothing parameter."""
    ks, kx = tb.s_basis.num_basis, tb.x_basis.num_basis
    ps, px = make_penalty(ks), make_penalty(kx)
    D = np.kron(ps.matrix, np.eye(kx)) + np.kron(np.eye(ks), px.matrix)
    if D.shape != (ks * kx, ks * kx):
        raise AssertionError("tensor penalty dimension mismatch")
    R = np.vstack([np.kron(ps.factor, np.eye(kx)), np.kron(np.eye(ks), px.factor)])
    return PenaltyMatrix(D, 4, R)
