"""Kraus and Choi representations of qudit channels.

The Choi state is ordered (channel output) x (reference), built on the
computational-basis maximally entangled state ``sum_i |ii> / sqrt(d)``.
With that ordering a Kraus operator ``A`` corresponds to the unnormalized
vector ``vec(A) / sqrt(d)`` where ``vec`` is row-major flattening.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import matkit
from .matkit import ContractError, NotPSDError, dagger, max_abs, op_norm


class ChannelFormatError(ValueError):
    """Malformed channel JSON."""


@dataclass(frozen=True)
class KrausSet:
    d: int
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(matkit.as_cmat(A) for A in self.operators)
        if not ops:
            raise ContractError("a Kraus set needs at least one operator")
        for A in ops:
            if A.shape != (self.d, self.d):
                raise ContractError(f"Kraus operator of shape {A.shape} in a d={self.d} set")
        object.__setattr__(self, "operators", ops)

    @classmethod
    def from_list(cls, ops: Iterable) -> "KrausSet":
        ops = [matkit.as_cmat(A) for A in ops]
        if not ops:
            raise ContractError("a Kraus set needs at least one operator")
        return cls(ops[0].shape[0], tuple(ops))

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    @property
    def stack(self) -> np.ndarray:
        return np.stack(self.operators)

    def unital_image(self) -> np.ndarray:
        """Lambda(I) = sum_i A_i A_i^dagger."""
        S = self.stack
        return np.einsum("iab,icb->ac", S, S.conj())


@dataclass(frozen=True)
class ChoiState:
    d: int
    matrix: np.ndarray

    def __post_init__(self):
        J = matkit.as_cmat(self.matrix)
        if J.shape != (self.d**2, self.d**2):
            raise ContractError(f"Choi matrix shape {J.shape} does not match d={self.d}")
        object.__setattr__(self, "matrix", J)

    def rank(self, tol: float | None = None) -> int:
        tol = matkit.TOL.rank if tol is None else tol
        return int(np.sum(np.linalg.eigvalsh(0.5 * (self.matrix + dagger(self.matrix))) > tol))

    def check(self) -> None:
        """Raise ContractError unless this is a valid Choi state of a channel."""
        J = self.matrix
        if not matkit.is_psd(J):
            raise NotPSDError("Choi matrix is not positive semidefinite")
        if abs(np.trace(J).real - 1) > matkit.TOL.trace:
            raise ContractError("Choi matrix does not have unit trace")
        red = partial_trace(J, self.d, keep="reference")
        if max_abs(red - np.eye(self.d) / self.d) > matkit.TOL.trace:
            raise ContractError("reference marginal is not I/d; the map is not trace preserving")


@dataclass(frozen=True)
class EnsembleDecomposition:
    weights: np.ndarray
    states: np.ndarray  # rows are normalized vectors in C^(d*d)

    def density(self) -> np.ndarray:
        S = self.states
        return np.einsum("i,ia,ib->ab", self.weights, S, S.conj())


@dataclass
class ValidationReport:
    tp_residual: float
    norms: list[float]
    passed: bool
    problems: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tp_residual": self.tp_residual,
            "norms": list(self.norms),
            "problems": list(self.problems),
        }


def validate(K: KrausSet) -> ValidationReport:
    S = K.stack
    completion = np.einsum("iba,ibc->ac", S.conj(), S)
    residual = max_abs(completion - np.eye(K.d))
    norms = [op_norm(A) for A in K]
    problems = []
    if residual > matkit.TOL.trace_preserving:
        problems.append(f"trace-preservation residual {residual:.3e}")
    for i, n in enumerate(norms):
        if n > 1 + matkit.TOL.admissible:
            problems.append(f"operator {i} has norm {n:.6f} > 1")
    return ValidationReport(residual, norms, not problems, problems)


def _require_valid(K: KrausSet) -> None:
    report = validate(K)
    if not report.passed:
        raise ContractError("invalid Kraus set: " + "; ".join(report.problems))


def partial_trace(J: np.ndarray, d: int, keep: str = "reference") -> np.ndarray:
    T = np.asarray(J).reshape(d, d, d, d)
    if keep == "reference":
        return np.einsum("aiaj->ij", T)
    if keep == "output":
        return np.einsum("aibi->ab", T)
    raise ValueError(f"keep must be 'reference' or 'output', not {keep!r}")


def kraus_to_choi(K: KrausSet) -> ChoiState:
    _require_valid(K)
    vecs = K.stack.reshape(len(K), -1)
    J = np.einsum("ia,ib->ab", vecs, vecs.conj()) / K.d
    return ChoiState(K.d, J)


def choi_to_kraus(J: ChoiState, rank_tol: float | None = None) -> KrausSet:
    rank_tol = matkit.TOL.rank if rank_tol is None else rank_tol
    w, v = matkit.herm_eig(J.matrix, max(matkit.TOL.hermitian, matkit.TOL.psd_clamp))
    if w[-1] < -matkit.TOL.psd_clamp:
        raise NotPSDError(f"Choi matrix has eigenvalue {w[-1]:.3e}")
    keep = w > rank_tol
    if not np.any(keep):
        raise ContractError("Choi matrix is numerically zero")
    d = J.d
    ops = [np.sqrt(d * lam) * v[:, k].reshape(d, d) for k, lam in enumerate(w) if keep[k]]
    return KrausSet(d, tuple(ops))


def kraus_to_ensemble(K: KrausSet) -> EnsembleDecomposition:
    vecs = K.stack.reshape(len(K), -1) / np.sqrt(K.d)
    weights = np.sum(np.abs(vecs) ** 2, axis=1).real
    nz = weights > matkit.TOL.prune
    vecs, weights = vecs[nz], weights[nz]
    return EnsembleDecomposition(weights, vecs / np.sqrt(weights)[:, None])


def ensemble_to_kraus(E: EnsembleDecomposition, d: int) -> KrausSet:
    ops = [np.sqrt(d * p) * psi.reshape(d, d) for p, psi in zip(E.weights, E.states)]
    return KrausSet(d, tuple(ops))


def mix_kraus(K: KrausSet, u) -> KrausSet:
    """B_i = sum_j u[i, j] A_j for an isometry u with len(K) columns."""
    u = matkit.as_cmat(u)
    if u.shape[1] != len(K):
        raise ContractError(f"mixing matrix has {u.shape[1]} columns for {len(K)} operators")
    if not matkit.is_isometry(u, 1e-9):
        raise ContractError("mixing matrix is not an isometry")
    B = np.einsum("ij,jab->iab", u, K.stack)
    return KrausSet(K.d, tuple(B))


def apply_channel(K: KrausSet, rho) -> np.ndarray:
    rho = matkit.as_cmat(rho)
    if rho.shape != (K.d, K.d):
        raise ContractError(f"state of shape {rho.shape} for a d={K.d} channel")
    S = K.stack
    return np.einsum("iab,bc,idc->ad", S, rho, S.conj())


def channel_distance(K1: KrausSet, K2: KrausSet) -> float:
    """Max-entry distance between Choi matrices (zero iff same channel)."""
    return max_abs(kraus_to_choi(K1).matrix - kraus_to_choi(K2).matrix)


def prune(ops: Iterable, tol: float | None = None) -> list[np.ndarray]:
    tol = matkit.TOL.prune if tol is None else tol
    return [A for A in ops if op_norm(A) >= tol]


def unitary_conjugate(K: KrausSet, U) -> KrausSet:
    """The channel rho -> U Lambda(U^dagger rho U) U^dagger."""
    U = matkit.as_cmat(U)
    if not matkit.is_unitary(U, 1e-9):
        raise ContractError("conjugating matrix is not unitary")
    return KrausSet(K.d, tuple(U @ A @ dagger(U) for A in K))


def max_entangled(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


# -- named channels ---------------------------------------------------------

def make_identity(d: int = 2) -> KrausSet:
    return KrausSet(d, (np.eye(d, dtype=complex),))


def make_amplitude_damping(eps: float) -> KrausSet:
    if not 0.0 <= eps <= 1.0:
        raise ContractError(f"damping parameter {eps} outside [0, 1]")
    A1 = np.array([[0, np.sqrt(eps)], [0, 0]], dtype=complex)
    A2 = np.array([[1, 0], [0, np.sqrt(1 - eps)]], dtype=complex)
    return KrausSet(2, tuple(prune([A1, A2])))


def constant_output_mix_choi(p: float, s: float) -> ChoiState:
    if not (0.0 <= p <= 1.0 and 0.0 <= s <= 1.0):
        raise ContractError(f"parameters p={p}, s={s} must lie in [0, 1]")
    phi = max_entangled(2)
    tau = np.diag([s, 1 - s]).astype(complex)
    J = (1 - p) * np.outer(phi, phi.conj()) + p * np.kron(tau, np.eye(2) / 2)
    return ChoiState(2, J)


def make_constant_output_mix(p: float, s: float) -> KrausSet:
    """rho -> (1-p) rho + p Tr(rho) tau with tau = diag(s, 1-s)."""
    K = choi_to_kraus(constant_output_mix_choi(p, s))
    return KrausSet(2, tuple(prune(K.operators)))


def make_pure_constant(d: int, k: int = 0) -> KrausSet:
    """rho -> Tr(rho) |k><k| on a qudit."""
    ops = []
    for j in range(d):
        A = np.zeros((d, d), dtype=complex)
        A[k, j] = 1
        ops.append(A)
    return KrausSet(d, tuple(ops))


def make_random_unitary_channel(pairs: Sequence[tuple[float, np.ndarray]]) -> KrausSet:
    if not pairs:
        raise ContractError("need at least one (weight, unitary) pair")
    q = np.array([float(w) for w, _ in pairs])
    if np.any(q < -1e-12) or abs(q.sum() - 1) > 1e-10:
        raise ContractError("weights do not form a probability distribution")
    ops = []
    for w, U in pairs:
        U = matkit.as_cmat(U)
        if not matkit.is_unitary(U, 1e-9):
            raise ContractError("random-unitary member is not unitary")
        ops.append(np.sqrt(max(w, 0.0)) * U)
    return KrausSet.from_list(prune(ops))


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def make_dephasing(q: float = 0.5) -> KrausSet:
    return make_random_unitary_channel([(1 - q, PAULI["I"]), (q, PAULI["Z"])])


def make_depolarizing(p: float) -> KrausSet:
    """Qubit depolarizing channel with Pauli weights (1-3p/4, p/4, p/4, p/4)."""
    if not 0.0 <= p <= 4 / 3:
        raise ContractError(f"depolarizing parameter {p} outside [0, 4/3]")
    w = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    return make_random_unitary_channel(list(zip(w, PAULI.values())))


def random_channel(d: int, n: int, rng: np.random.Generator) -> KrausSet:
    """Channel from a Haar-random Stinespring isometry with n Kraus operators."""
    W = matkit.random_unitary(d * n, rng)[:, :d]
    return KrausSet(d, tuple(W.reshape(n, d, d)))


# -- JSON -------------------------------------------------------------------

def cmat_to_json(M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def cmat_from_json(obj, where: str = "$") -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj or "im" not in obj:
        raise ChannelFormatError(f"{where}: expected an object with 're' and 'im'")
    try:
        re = np.array(obj["re"], dtype=float)
        im = np.array(obj["im"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChannelFormatError(f"{where}: non-numeric matrix entries ({exc})") from exc
    if re.ndim != 2 or re.shape != im.shape:
        raise ChannelFormatError(f"{where}: 're' and 'im' must be equal-shape 2-D arrays")
    return re + 1j * im


def channel_to_json(obj: KrausSet | ChoiState) -> dict:
    if isinstance(obj, KrausSet):
        return {"d": obj.d, "kraus": [cmat_to_json(A) for A in obj]}
    return {"d": obj.d, "choi": cmat_to_json(obj.matrix)}


def channel_from_json(data) -> KrausSet | ChoiState:
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ChannelFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ChannelFormatError("$: top level must be an object")
    if not isinstance(data.get("d"), int) or data["d"] < 1:
        raise ChannelFormatError("$.d: expected a positive integer")
    d = data["d"]
    if ("kraus" in data) == ("choi" in data):
        raise ChannelFormatError("$: exactly one of 'kraus' or 'choi' must be present")
    try:
        if "kraus" in data:
            ops = data["kraus"]
            if not isinstance(ops, list) or not ops:
                raise ChannelFormatError("$.kraus: expected a non-empty list")
            mats = [cmat_from_json(o, f"$.kraus[{i}]") for i, o in enumerate(ops)]
            return KrausSet(d, tuple(mats))
        return ChoiState(d, cmat_from_json(data["choi"], "$.choi"))
    except ContractError as exc:
        raise ChannelFormatError(str(exc)) from exc


def as_kraus(obj: KrausSet | ChoiState) -> KrausSet:
    if isinstance(obj, KrausSet):
        return obj
    obj.check()
    return choi_to_kraus(obj)
