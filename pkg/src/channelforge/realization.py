"""Optimal switching realization of a channel.

For a fixed Kraus decomposition the best achievable success probability is
``1 / sum_i ||A_i||^2``. :func:`minimize_stochasticity` searches over all
decompositions reachable by an isometric mixing of the given operators and
:func:`plan_channel` turns the winner into branch weights and rescaled
operators that can be compiled into optical networks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _isosearch as iso
from . import matkit
from .channels import KrausSet, _require_valid, apply_channel, cmat_from_json, cmat_to_json, kraus_to_choi, prune
from .matkit import ContractError, op_norm

DEFAULT_RESTARTS = 32
DEFAULT_MAXITER = 2000
N_OUT_CAP = 16
CERTIFY_TOL = 1e-6
# inverse temperatures of the log-sum-exp continuation
TEMPERATURES = (10.0, 1e2, 1e3, 1e4, 1e5)
# branches whose operator norm falls below this carry p_i < 1e-18 and are dropped
BRANCH_PRUNE = 1e-9


@dataclass
class RealizationPlan:
    d: int
    weights: np.ndarray
    operators: tuple[np.ndarray, ...]  # the rescaled operators, each of norm 1
    p_succ: float
    sigma: float
    certified_optimal: bool = False
    networks: list | None = None
    trace: OptimizerTrace | None = None

    @property
    def branches(self):
        return list(zip(self.weights, self.operators))

    def branch_kraus(self) -> np.ndarray:
        """sqrt(p_i) * A~_i, which equals sqrt(p_succ) * A_i."""
        return np.sqrt(self.weights)[:, None, None] * np.stack(self.operators)

    def postselected_map(self, rho) -> np.ndarray:
        S = self.branch_kraus()
        return np.einsum("iab,bc,idc->ad", S, np.asarray(rho, dtype=complex), S.conj())

    def to_json(self) -> dict:
        return {
            "p_succ": self.p_succ,
            "sigma": self.sigma,
            "certified_optimal": self.certified_optimal,
            "branches": [{"p": float(p), "kraus_tilde": cmat_to_json(A)} for p, A in self.branches],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RealizationPlan":
        ops = tuple(cmat_from_json(b["kraus_tilde"], f"$.branches[{i}].kraus_tilde")
                    for i, b in enumerate(data["branches"]))
        return cls(
            d=ops[0].shape[0],
            weights=np.array([float(b["p"]) for b in data["branches"]]),
            operators=ops,
            p_succ=float(data["p_succ"]),
            sigma=float(data["sigma"]),
            certified_optimal=bool(data["certified_optimal"]),
        )


@dataclass
class OptimizerTrace:
    n_out: int
    input_sigma: float
    floor: float
    restart_values: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)
    chosen: int = -1  # -1 means the input decomposition was kept

    def as_dict(self) -> dict:
        return {
            "n_out": self.n_out,
            "input_sigma": self.input_sigma,
            "floor": self.floor,
            "restart_values": list(self.restart_values),
            "evaluations": list(self.evaluations),
            "chosen": self.chosen,
        }


def stochasticity_of(K: KrausSet) -> float:
    return float(sum(op_norm(A) ** 2 for A in K))


def triangle_floor(K: KrausSet) -> float:
    """||Lambda(I)||, a lower bound on the stochasticity of any decomposition."""
    return op_norm(K.unital_image())


def psucc_fixed(K: KrausSet) -> tuple[float, RealizationPlan]:
    _require_valid(K)
    ops = prune(K.operators)
    norms = np.array([op_norm(A) for A in ops])
    sigma = float(np.sum(norms**2))
    weights = norms**2 / sigma
    tilde = tuple(A / n for A, n in zip(ops, norms))
    p_succ = 1.0 / sigma
    return p_succ, RealizationPlan(K.d, weights, tilde, p_succ, sigma)


def default_n_out(K: KrausSet, cap: int = N_OUT_CAP) -> int:
    r = kraus_to_choi(K).rank()
    return max(len(K), min(r * r, cap))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CHANNELFORGE_THREADS", "1")))
    except ValueError:
        return 1


def run_restarts(job, n_restarts: int, stop=None) -> list:
    """Evaluate ``job(index)`` for each restart index.

    Results come back in index order. With ``stop`` given, serial execution
    ends once ``stop(result)`` is true; the parallel path runs all restarts
    and truncates the list after the first stopping index so both paths
    return the same thing.
    """
    threads = worker_count()
    results = []
    if threads == 1:
        for i in range(n_restarts):
            results.append(job(i))
            if stop is not None and stop(results[-1]):
                break
        return results
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(job, range(n_restarts)))
    if stop is not None:
        for i, r in enumerate(results):
            if stop(r):
                return results[:i + 1]
    return results


def minimize_stochasticity(K: KrausSet, n_out: int | None = None, restarts: int = DEFAULT_RESTARTS,
                           seed: int = 0, maxiter: int = DEFAULT_MAXITER,
                           early_stop: bool = True) -> tuple[KrausSet, float, OptimizerTrace]:
    """Search isometric remixings of ``K`` for the smallest sum of squared norms.

    The first restart starts from the input decomposition, the others from
    Haar-random isometries seeded by ``(seed, restart_index)``. With
    ``early_stop`` the search ends as soon as a decomposition meets the
    triangle-inequality floor, which no decomposition can beat.
    """
    _require_valid(K)
    if n_out is None:
        n_out = default_n_out(K)
    if n_out < len(K):
        raise ContractError(f"n_out={n_out} is smaller than the {len(K)} input operators")
    A = K.stack
    k = len(K)
    input_sigma = stochasticity_of(K)
    floor = triangle_floor(K)
    trace = OptimizerTrace(n_out, input_sigma, floor)
    exact = iso.SoftMaxEigenvalue(1.0)
    stages = [iso.SoftMaxEigenvalue(t) for t in TEMPERATURES]

    def job(index):
        u0 = iso.initial_isometry(index, n_out, k, seed)
        return iso.run_restart(A, u0, stages, exact, maxiter, index)

    stop = (lambda r: r.value <= floor + 1e-10) if early_stop else None
    if early_stop and input_sigma <= floor + 1e-10:
        return K, input_sigma, trace
    results = run_restarts(job, max(1, restarts), stop)

    best_sigma, best_ops = input_sigma, K
    for r in results:
        trace.restart_values.append(r.value)
        trace.evaluations.append(r.evaluations)
        if r.value < best_sigma:
            B = iso.isometry_to_kraus(r.u, A)
            best_sigma, best_ops, trace.chosen = r.value, KrausSet(K.d, tuple(B)), r.index
    return best_ops, best_sigma, trace


def certify(sigma: float, K: KrausSet, tol: float = CERTIFY_TOL) -> bool:
    return abs(sigma - triangle_floor(K)) <= tol


def plan_channel(K: KrausSet, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                 n_out: int | None = None, maxiter: int = DEFAULT_MAXITER) -> RealizationPlan:
    best, sigma, trace = minimize_stochasticity(K, n_out=n_out, restarts=restarts, seed=seed, maxiter=maxiter)
    kept = KrausSet(K.d, tuple(prune(best.operators, BRANCH_PRUNE)))
    p_succ, plan = psucc_fixed(kept)
    plan.certified_optimal = certify(plan.sigma, K)
    plan.trace = trace
    return plan


def scheme_residual(plan: RealizationPlan, K: KrausSet) -> float:
    """Max deviation of sum_i p_i A~ rho A~^dag from p_succ Lambda(rho) over |j><k| inputs."""
    d = K.d
    worst = 0.0
    for j in range(d):
        for k in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[j, k] = 1
            diff = plan.postselected_map(E) - plan.p_succ * apply_channel(K, E)
            worst = max(worst, matkit.max_abs(diff))
    return worst
