"""Sparse SPD solves, the two-level additive Schwarz preconditioner and PCG."""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sps
from scipy.sparse.linalg import LinearOperator, splu

from .errors import BreakdownError, InsufficientDataError, NoConvergenceError, NotPositiveDefiniteError

DENSE_LIMIT = 400


class SpdFactor:
    """Exact solver for a symmetric positive definite matrix.

    Small matrices use a dense Cholesky factorization. Larger ones use SuperLU
    with a symmetric minimum-degree ordering and diagonal pivoting only, which
    makes the factorization an ``LDL^T`` in disguise, so positive pivots
    certify definiteness.
    """

    def __init__(self, A):
        self.n = A.shape[0]
        self._dense = None
        self._lu = None
        if self.n == 0:
            return
        if self.n <= DENSE_LIMIT:
            M = A.toarray() if sps.issparse(A) else np.asarray(A, dtype=float)
            try:
                self._dense = sla.cho_factor(M, lower=True, check_finite=False)
            except sla.LinAlgError as exc:
                raise NotPositiveDefiniteError(str(exc)) from exc
            if not np.all(np.diag(self._dense[0]) > 0):
                raise NotPositiveDefiniteError("non-positive pivot in dense Cholesky")
            return
        A = sps.csc_matrix(A)
        try:
            lu = splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotPositiveDefiniteError(f"factorization failed: {exc}") from exc
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise NotPositiveDefiniteError("factorization needed off-diagonal pivoting")
        if not np.all(lu.U.diagonal() > 0):
            raise NotPositiveDefiniteError("non-positive pivot in sparse factorization")
        self._lu = lu

    @property
    def permutation(self):
        return None if self._lu is None else self._lu.perm_c

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        if self._dense is not None:
            return sla.cho_solve(self._dense, b, check_finite=False)
        return self._lu.solve(b)


def factorize_spd(A):
    return SpdFactor(A)


class SchwarzPreconditioner:
    """``M^{-1} r = R0^T A0^{-1} R0 r + sum_i R_i^T A_i^{-1} R_i r``.

    The local restrictions are never formed: each local block is extracted from
    ``A`` by the index set of the free dofs inside the overlapping subdomain.
    ``coarse_basis`` is the sparse ``R0^T`` (dofs x coarse dim) or ``None`` for
    the one-level method.
    """

    def __init__(self, A, interior_dofs, coarse_basis=None):
        self.A = sps.csr_matrix(A)
        self.n = self.A.shape[0]
        self.index_sets = [np.asarray(d, dtype=np.int64) for d in interior_dofs]
        for d in self.index_sets:
            if len(d) and (d.min() < 0 or d.max() >= self.n):
                raise IndexError("local index set outside the dof range")
        self.local = [factorize_spd(self.A[d][:, d]) if len(d) else None for d in self.index_sets]
        self.R0T = None
        self.A0 = None
        self.coarse = None
        if coarse_basis is not None and coarse_basis.shape[1] > 0:
            self.R0T = sps.csr_matrix(coarse_basis)
            A0 = (self.R0T.T @ (self.A @ self.R0T)).toarray()
            self.A0 = 0.5 * (A0 + A0.T)
            self.coarse = factorize_spd(self.A0)

    @property
    def coarse_dim(self):
        return 0 if self.R0T is None else self.R0T.shape[1]

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        z = np.zeros_like(r)
        if self.coarse is not None:
            z += self.R0T @ self.coarse.solve(self.R0T.T @ r)
        for d, fac in zip(self.index_sets, self.local):
            if fac is not None:
                z[d] += fac.solve(r[d])
        return z

    __call__ = apply

    def as_linear_operator(self):
        return LinearOperator((self.n, self.n), matvec=self.apply, dtype=float)


def build_preconditioner(A, overlap, coarse_basis=None):
    """Two-level preconditioner from :class:`OverlapSets` (or index lists) and ``R0^T``."""
    dofs = overlap.interior_dofs if hasattr(overlap, "interior_dofs") else overlap
    R0T = getattr(coarse_basis, "R0T", coarse_basis)
    return SchwarzPreconditioner(A, dofs, R0T)


@dataclass
class PcgResult:
    x: np.ndarray = field(repr=False)
    iterations: int
    residuals: list = field(repr=False)
    alphas: list = field(repr=False)
    betas: list = field(repr=False)
    converged: bool = True

    @property
    def kappa(self):
        if self.iterations == 0:
            return 1.0
        ev = lanczos_eigenvalues(self.alphas, self.betas)
        return float(ev[-1] / ev[0])

    def to_json(self):
        return json.dumps(
            {
                "iterations": self.iterations,
                "kappa": self.kappa,
                "converged": self.converged,
                "residuals": [float(v) for v in self.residuals],
            }
        )


def lanczos_tridiagonal(alphas, betas):
    """Diagonal and off-diagonal of the Lanczos matrix implied by CG coefficients."""
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)[: len(a) - 1]
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    return diag, off


def lanczos_eigenvalues(alphas, betas):
    diag, off = lanczos_tridiagonal(alphas, betas)
    if len(diag) == 1:
        return diag
    return sla.eigh_tridiagonal(diag, off, eigvals_only=True)


def estimate_condition(result):
    """``lambda_max / lambda_min`` of the Lanczos matrix of a PCG run."""
    if result.iterations < 2:
        raise InsufficientDataError("need at least 2 PCG iterations to estimate the condition number")
    return result.kappa


def pcg(A, b, M=None, tol=1e-6, max_iter=500):
    """Preconditioned conjugate gradients from a zero initial guess.

    Stops when ``||r_k|| / ||b|| <= tol`` (unpreconditioned 2-norm). Raises
    :class:`NoConvergenceError` after ``max_iter`` iterations, with the partial
    result attached as ``exc.result``.
    """
    b = np.asarray(b, dtype=float)
    matvec = A.dot if hasattr(A, "dot") else A
    prec = (lambda v: v) if M is None else M
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return PcgResult(x, 0, [0.0], [], [])
    r = b.copy()
    z = prec(r)
    p = z.copy()
    rz = r @ z
    residuals, alphas, betas = [1.0], [], []
    for k in range(1, max_iter + 1):
        Ap = matvec(p)
        pAp = p @ Ap
        if not pAp > 0:
            raise BreakdownError(f"p^T A p = {pAp:.3e} at iteration {k}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        alphas.append(alpha)
        res = np.linalg.norm(r) / bnorm
        residuals.append(res)
        if res <= tol:
            return PcgResult(x, k, residuals, alphas, betas)
        z = prec(r)
        rz_new = r @ z
        if not rz_new > 0:
            raise BreakdownError(f"r^T M r = {rz_new:.3e} at iteration {k}")
        beta = rz_new / rz
        betas.append(beta)
        p = z + beta * p
        rz = rz_new
    exc = NoConvergenceError(f"PCG did not reach {tol:g} in {max_iter} iterations (residual {res:.3e})")
    exc.result = PcgResult(x, max_iter, residuals, alphas, betas, converged=False)
    raise exc


def preconditioned_operator_dense(A, M):
    """Dense ``M^{-1} A`` built column by column (small problems only)."""
    A = sps.csr_matrix(A)
    n = A.shape[0]
    out = np.empty((n, n))
    I = np.eye(n)
    for j in range(n):
        out[:, j] = M(A @ I[:, j])
    return out


def export_matrix_market(A, path):
    if not sps.issparse(A):
        A = sps.csr_matrix(np.asarray(A))
    scipy.io.mmwrite(path, A, symmetry="symmetric")
