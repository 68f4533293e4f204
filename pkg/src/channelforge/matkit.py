"""Dense complex linear algebra used throughout the package.

Everything here is a thin, validated layer over :mod:`numpy.linalg`. The
conventions differ from numpy in one place: :func:`svd` returns the factors
in the order ``M = V @ diag(s) @ U`` so that ``U`` is the factor applied
first to a state.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class NumericError(RuntimeError):
    """A numerical routine failed to converge."""


class ContractError(ValueError):
    """An input violated a documented precondition."""


class NotPSDError(ContractError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


@dataclass(frozen=True)
class Tolerances:
    unitary: float = 1e-10
    hermitian: float = 1e-10
    psd_clamp: float = 1e-9
    trace: float = 1e-8
    trace_preserving: float = 1e-8
    admissible: float = 1e-8
    rank: float = 1e-12
    prune: float = 1e-12


TOL = Tolerances()
ROUNDOFF_RANK = 1e-14


def configure(**overrides) -> Tolerances:
    """Replace module-wide tolerance defaults. Returns the new record."""
    global TOL
    TOL = replace(TOL, **overrides)
    return TOL


def as_cmat(M) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ContractError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    return A


def dagger(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


def max_abs(M) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def is_unitary(U, tol: float | None = None) -> bool:
    tol = TOL.unitary if tol is None else tol
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return max_abs(dagger(U) @ U - np.eye(U.shape[0])) <= tol


def is_isometry(u, tol: float | None = None) -> bool:
    """True when ``u^dagger u = I`` (columns orthonormal); rows may exceed columns."""
    tol = TOL.unitary if tol is None else tol
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] < u.shape[1]:
        return False
    return max_abs(dagger(u) @ u - np.eye(u.shape[1])) <= tol


def is_hermitian(H, tol: float | None = None) -> bool:
    tol = TOL.hermitian if tol is None else tol
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        return False
    return max_abs(H - dagger(H)) <= tol


def is_psd(P, tol: float | None = None) -> bool:
    tol = TOL.psd_clamp if tol is None else tol
    if not is_hermitian(P, max(tol, TOL.hermitian)):
        return False
    P = np.asarray(P, dtype=complex)
    return float(np.linalg.eigvalsh(0.5 * (P + dagger(P)))[0]) >= -tol


def svd(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition ``M = V @ diag(s) @ U``.

    Singular values come back in descending order. Ties keep the order that
    LAPACK produced, which is deterministic for a given input.
    """
    M = as_cmat(M)
    try:
        V, s, U = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    order = np.argsort(-s, kind="stable")
    k = len(s)
    V = V.copy()
    U = U.copy()
    V[:, :k] = V[:, order]
    U[:k, :] = U[order, :]
    return V, s[order], U


def op_norm(M) -> float:
    """Largest singular value."""
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return 0.0
    try:
        return float(np.linalg.norm(M, 2))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc


def herm_eig(H, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvector columns of a Hermitian matrix."""
    H = as_cmat(H)
    if not is_hermitian(H, tol):
        raise ContractError("herm_eig requires a Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (H + dagger(H)))
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(P, clamp: float | None = None) -> np.ndarray:
    clamp = TOL.psd_clamp if clamp is None else clamp
    w, v = herm_eig(P, max(clamp, TOL.hermitian))
    if w[-1] < -clamp:
        raise NotPSDError(f"smallest eigenvalue {w[-1]:.3e} is below -{clamp:g}")
    # eigenvalues at roundoff level would otherwise leak in as sqrt(1e-16) ~ 1e-8
    floor = ROUNDOFF_RANK * max(float(np.max(np.abs(w))), 1.0)
    root = np.sqrt(np.where(w > floor, w, 0.0))
    return (v * root) @ dagger(v)


def _check_state(rho: np.ndarray, name: str) -> None:
    if rho.shape[0] != rho.shape[1]:
        raise ContractError(f"{name} must be square")
    if abs(np.trace(rho).real - 1.0) > TOL.trace:
        raise ContractError(f"{name} must have unit trace")


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))`` (not squared)."""
    rho = as_cmat(rho)
    sigma = as_cmat(sigma)
    if rho.shape != sigma.shape:
        raise ContractError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    _check_state(rho, "rho")
    _check_state(sigma, "sigma")
    if not is_psd(sigma):
        raise NotPSDError("sigma is not positive semidefinite")
    # Tr sqrt(sqrt(rho) sigma sqrt(rho)) is the trace norm of sqrt(rho) sqrt(sigma)
    return float(np.sum(np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x n unitary."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = G @ dagger(G)
    return rho / np.trace(rho).real
