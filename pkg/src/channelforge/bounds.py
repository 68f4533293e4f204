"""Bounds on the optimal success probability.

Three families are provided: the triangle-inequality bound from the image
of the identity, concurrence-based bounds for qubit channels, and bounds in
terms of the entanglement of assistance of the Choi state for any ``d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _isosearch as iso
from . import matkit
from .channels import ChoiState, KrausSet, kraus_to_choi
from .matkit import ContractError, op_norm
from .realization import RealizationPlan, run_restarts

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
YY = np.kron(SIGMA_Y, SIGMA_Y)
ORDER_TOL = 1e-6
FIDELITY_GAP_FLOOR = 1e-14


class InternalConsistencyError(RuntimeError):
    """A certified plan landed outside bounds that must contain it."""


def triangle_bound(K: KrausSet) -> float:
    return 1.0 / op_norm(K.unital_image())


def _two_qubit(rho) -> np.ndarray:
    rho = matkit.as_cmat(rho)
    if rho.shape != (4, 4):
        raise ContractError(f"expected a two-qubit (4x4) matrix, got {rho.shape}")
    return rho


def spin_flip(rho) -> np.ndarray:
    rho = _two_qubit(rho)
    return YY @ rho.conj() @ YY


def concurrence_pure(psi) -> float:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (4,):
        raise ContractError("expected a two-qubit state vector")
    flipped = YY @ psi.conj()
    return float(abs(np.vdot(flipped, psi)))


def concurrence_convex_roof(rho) -> float:
    """Wootters' closed form."""
    rho = _two_qubit(rho)
    lam = np.linalg.svd(matkit.psd_sqrt(rho) @ matkit.psd_sqrt(spin_flip(rho)), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_concave_roof(rho) -> float:
    rho = _two_qubit(rho)
    return matkit.fidelity(rho, spin_flip(rho))


def concurrence_bounds_psucc(J: ChoiState) -> tuple[float, float]:
    """(lower, upper) bounds on p_succ of a qubit channel from F(J, J~)."""
    if J.d != 2:
        raise ContractError("concurrence bounds apply to qubit channels only")
    F = min(concurrence_concave_roof(J.matrix), 1.0)
    gap = 1.0 - F * F
    # F carries ~1e-16 roundoff, which sqrt would inflate to ~1e-8 at F = 1
    if gap < FIDELITY_GAP_FLOOR:
        gap = 0.0
    return 1.0 / (1.0 + math.sqrt(gap)), 1.0 / (2.0 - F)


def geometric_entanglement_pure(psi, d: int | None = None) -> float:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    d = int(round(math.sqrt(psi.size))) if d is None else d
    s = np.linalg.svd(psi.reshape(d, -1), compute_uv=False)
    return float(1.0 - s[0] ** 2)


def eg_concave_roof_from_sigma(sigma: float, d: int) -> float:
    if not 1 - 1e-9 <= sigma <= d + 1e-9:
        raise ContractError(f"stochasticity {sigma} outside [1, {d}]")
    return 1.0 - sigma / d


def h_d(p: float, d: int) -> float:
    """Entropy of (p, (1-p)/(d-1), ..., (1-p)/(d-1)) in bits."""
    if d < 2:
        raise ContractError("h_d needs d >= 2")
    if not 1.0 / d - 1e-12 <= p <= 1.0 + 1e-12:
        raise ContractError(f"h_d argument {p} outside [1/d, 1]")
    p = min(max(p, 1.0 / d), 1.0)
    out = 0.0
    if p > 0:
        out -= p * math.log2(p)
    if p < 1:
        out -= (1 - p) * math.log2((1 - p) / (d - 1))
    return out


def h_d_inverse(y: float, d: int, tol: float = 1e-12) -> float:
    """Inverse of h_d on [1/d, 1] by bisection (h_d decreases there)."""
    top = math.log2(d)
    if not -1e-12 <= y <= top + 1e-12:
        raise ContractError(f"h_d inverse argument {y} outside [0, log2 d]")
    # h_d is flat at its maximum, so bisection there only resolves p to ~sqrt(eps)
    if y >= top - 1e-15:
        return 1.0 / d
    if y <= 0.0:
        return 1.0
    lo, hi = 1.0 / d, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h_d(mid, d) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class AverageReducedEntropy(iso.SpectralObjective):
    """Minus the ensemble-average reduced entropy (bits) of the pure states vec(B_i)/sqrt(d)."""

    def __init__(self, d: int):
        self.d = d

    def _terms(self, w):
        nu = np.clip(w, 0.0, None) / self.d
        p = nu.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1)), 0.0)
            nlogn = np.where(nu > 0, nu * np.log2(np.where(nu > 0, nu, 1)), 0.0)
        return nu, p, float(np.sum(nlogn) - np.sum(plogp))

    def evaluate(self, w, V):
        nu, p, value = self._terms(w)
        g = (np.log2(np.maximum(nu, 1e-30)) - np.log2(np.maximum(p, 1e-30))[:, None]) / self.d
        P = np.einsum("iak,ik,ibk->iab", V, g, V.conj())
        return value, P

    def exact(self, w):
        return self._terms(w)[2]


def assistance_estimate(J: ChoiState, restarts: int = 8, seed: int = 0, n_out: int | None = None,
                        maxiter: int = 500) -> float:
    """Lower estimate of the entanglement of assistance of J (bits).

    Ensembles are parameterized as isometric remixings of J's spectral
    decomposition. Restart ``k`` depends only on ``(seed, k)``, so adding
    restarts never lowers the estimate.
    """
    d = J.d
    w, v = matkit.herm_eig(J.matrix, 1e-9)
    keep = w > matkit.TOL.rank
    A = np.stack([np.sqrt(d * lam) * v[:, k].reshape(d, d) for k, lam in enumerate(w) if keep[k]])
    r = len(A)
    n_out = max(r, min(r * r, 16)) if n_out is None else n_out
    obj = AverageReducedEntropy(d)
    cap = math.log2(d)

    def job(index):
        u0 = iso.initial_isometry(index, n_out, r, seed)
        return iso.run_restart(A, u0, [obj], obj, maxiter, index)

    results = run_restarts(job, max(1, restarts), stop=lambda res: -res.value >= cap - 1e-12)
    return float(min(cap, max(-res.value for res in results)))


def assistance_bounds_psucc(Ea: float, d: int) -> tuple[float, float]:
    top = math.log2(d)
    if not -1e-12 <= Ea <= top + 1e-9:
        raise ContractError(f"entanglement of assistance {Ea} outside [0, log2 d]")
    Ea = min(max(Ea, 0.0), top)
    return 1.0 / (d * h_d_inverse(Ea, d)), 2.0 ** Ea / d


@dataclass
class BoundsReport:
    d: int
    p_succ: float
    certified: bool
    triangle_ub: float
    assistance_lb: float
    assistance_ub: float
    assistance_value: float
    concurrence_lb: float | None = None
    concurrence_ub: float | None = None
    extremal: tuple[float, float] = (0.5, 1.0)
    methods: dict = field(default_factory=dict)

    def lower_bounds(self) -> list[float]:
        out = [self.extremal[0], self.assistance_lb]
        if self.concurrence_lb is not None:
            out.append(self.concurrence_lb)
        return out

    def upper_bounds(self) -> list[float]:
        out = [self.extremal[1], self.triangle_ub]
        if self.concurrence_ub is not None:
            out.append(self.concurrence_ub)
        if self.methods.get("assistance_ub") == "exact":
            out.append(self.assistance_ub)
        return out

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "p_succ": self.p_succ,
            "certified_optimal": self.certified,
            "triangle_ub": self.triangle_ub,
            "concurrence_lb": self.concurrence_lb,
            "concurrence_ub": self.concurrence_ub,
            "assistance_value": self.assistance_value,
            "assistance_lb": self.assistance_lb,
            "assistance_ub": self.assistance_ub,
            "extremal": list(self.extremal),
            "methods": dict(self.methods),
        }


def full_report(K: KrausSet, plan: RealizationPlan, Ea: float | None = None,
                restarts: int = 8, seed: int = 0) -> BoundsReport:
    """All applicable bounds next to the plan's success probability.

    Pass ``Ea`` when the entanglement of assistance is known analytically;
    otherwise it is estimated from below and the resulting upper bound is
    tagged "estimate" (it may understate the true bound).
    """
    d = K.d
    J = kraus_to_choi(K)
    methods = {"p_succ": "exact" if plan.certified_optimal else "optimizer", "triangle_ub": "exact"}
    if Ea is None:
        Ea = assistance_estimate(J, restarts=restarts, seed=seed)
        methods["assistance_lb"] = methods["assistance_ub"] = "estimate"
    else:
        methods["assistance_lb"] = methods["assistance_ub"] = "exact"
    a_lb, a_ub = assistance_bounds_psucc(Ea, d)
    report = BoundsReport(d, plan.p_succ, plan.certified_optimal, triangle_bound(K), a_lb, a_ub, Ea,
                          extremal=(1.0 / d, 1.0), methods=methods)
    if d == 2:
        report.concurrence_lb, report.concurrence_ub = concurrence_bounds_psucc(J)
        methods["concurrence_lb"] = methods["concurrence_ub"] = "exact"
    if plan.certified_optimal:
        for lb in report.lower_bounds():
            if lb > plan.p_succ + ORDER_TOL:
                raise InternalConsistencyError(f"lower bound {lb} exceeds certified p_succ {plan.p_succ}")
        for ub in report.upper_bounds():
            if ub < plan.p_succ - ORDER_TOL:
                raise InternalConsistencyError(f"upper bound {ub} below certified p_succ {plan.p_succ}")
    return report
