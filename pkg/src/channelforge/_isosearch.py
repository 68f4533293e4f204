"""Search over Kraus decompositions ``B_i = sum_j u_ij A_j``.

The isometry ``u`` (n_out x k) is written as ``exp(iH) @ base`` with ``H``
Hermitian, so every real parameter vector maps to a valid decomposition.
Objectives are sums of spectral functions of ``B_i B_i^dagger``; the
gradient with respect to ``H`` is exact (Daleckii-Krein formula for the
derivative of the matrix exponential).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .matkit import dagger, random_unitary


def unpack_hermitian(x: np.ndarray, n: int) -> np.ndarray:
    H = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    H[np.diag_indices(n)] = x[:n]
    H[iu] = x[n:n + m] + 1j * x[n + m:]
    H[(iu[1], iu[0])] = x[n:n + m] - 1j * x[n + m:]
    return H


def pack_gradient(Y: np.ndarray, n: int) -> np.ndarray:
    """Real gradient of ``Re tr(Y dH)`` in the coordinates of :func:`unpack_hermitian`."""
    iu = np.triu_indices(n, 1)
    lo = (iu[1], iu[0])
    return np.concatenate([
        Y[np.diag_indices(n)].real,
        (Y[lo] + Y[iu]).real,
        Y[iu].imag - Y[lo].imag,
    ])


def exp_i_hermitian(H: np.ndarray):
    lam, V = np.linalg.eigh(H)
    e = np.exp(1j * lam)
    diff = lam[:, None] - lam[None, :]
    close = np.abs(diff) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(close, 1j * e[:, None], (e[:, None] - e[None, :]) / np.where(close, 1.0, diff))
    return (V * e) @ dagger(V), V, phi


class SpectralObjective:
    """Loss = sum_i f(B_i B_i^dagger) for a unitarily invariant f.

    ``evaluate`` returns the loss and, per operator, the Hermitian matrix
    ``P_i = f'(H_i)`` so that ``dLoss = sum_i Re tr(P_i dH_i)``.
    """

    def evaluate(self, w: np.ndarray, V: np.ndarray):
        raise NotImplementedError

    def exact(self, w: np.ndarray) -> float:
        raise NotImplementedError


class SoftMaxEigenvalue(SpectralObjective):
    """Log-sum-exp smoothing of sum_i lambda_max(H_i) at inverse temperature t."""

    def __init__(self, t: float):
        self.t = t

    def evaluate(self, w, V):
        top = w.max(axis=1)
        z = np.exp(self.t * (w - top[:, None]))
        total = z.sum(axis=1)
        value = np.sum(top + np.log(total) / self.t)
        weights = z / total[:, None]
        P = np.einsum("iak,ik,ibk->iab", V, weights, V.conj())
        return value, P

    def exact(self, w):
        return float(np.sum(w.max(axis=1)))


def loss_and_grad(x, A, base, objective):
    n = base.shape[0]
    H = unpack_hermitian(x, n)
    E, V, phi = exp_i_hermitian(H)
    u = E @ base
    B = np.einsum("ij,jab->iab", u, A)
    Hs = B @ dagger(B)
    w, W = np.linalg.eigh(Hs)
    value, P = objective.evaluate(w, W)
    G = 2 * np.einsum("jba,iba->ij", A.conj(), P @ B)
    N = dagger(V) @ base @ dagger(G) @ V
    Y = V @ (N * phi) @ dagger(V)
    return value, pack_gradient(Y, n)


def isometry_to_kraus(u, A):
    return np.einsum("ij,jab->iab", u, A)


def exact_value(u, A, objective) -> float:
    B = isometry_to_kraus(u, A)
    w = np.linalg.eigvalsh(B @ dagger(B))
    return objective.exact(w)


@dataclass
class RestartResult:
    index: int
    value: float
    u: np.ndarray
    evaluations: int
    history: list[float] = field(default_factory=list)


def initial_isometry(index: int, n_out: int, k: int, seed: int) -> np.ndarray:
    """Restart 0 is the input decomposition itself; later restarts are Haar random."""
    if index == 0:
        return np.eye(n_out, k, dtype=complex)
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    return random_unitary(n_out, rng)[:, :k]


def run_restart(A, u0, objectives, exact_objective, maxiter=2000, index=0):
    """Continuation over a sequence of smoothed objectives, rebasing after each stage."""
    n = u0.shape[0]
    base = u0
    best_u = u0
    best = exact_value(u0, A, exact_objective)
    history = [best]
    evals = 0
    per_stage = max(1, maxiter // max(1, len(objectives)))
    for obj in objectives:
        res = minimize(loss_and_grad, np.zeros(n * n), args=(A, base, obj), jac=True,
                       method="L-BFGS-B", options={"maxiter": per_stage, "ftol": 1e-15, "gtol": 1e-12})
        evals += res.nfev
        E, _, _ = exp_i_hermitian(unpack_hermitian(res.x, n))
        base = E @ base
        val = exact_value(base, A, exact_objective)
        history.append(val)
        if val < best:
            best, best_u = val, base
    return RestartResult(index, best, best_u, evals, history)
