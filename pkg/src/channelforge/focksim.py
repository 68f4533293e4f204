"""Single-photon simulation of compiled switching schemes.

A passive network conserves photon number, so a single input photon over
``m`` modes stays a length-``m`` amplitude vector. Postselecting vacuum on
the ancilla modes keeps the first ``d`` amplitudes.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import matkit
from .channels import cmat_to_json
from .matkit import ContractError
from .optics import OpticalNetwork, compile_kraus, network_unitary
from .realization import RealizationPlan, worker_count

BLOCK_SHOTS = 8192
INPUT_INDEPENDENCE_TOL = 1e-9


class PlanInconsistencyError(RuntimeError):
    """The compiled branches do not give an input-independent success probability."""


@dataclass
class SinglePhotonState:
    m: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape != (self.m,):
            raise ContractError(f"{self.amplitudes.size} amplitudes for {self.m} modes")

    @classmethod
    def logical(cls, psi, m: int) -> "SinglePhotonState":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        amps = np.zeros(m, dtype=complex)
        amps[:psi.size] = psi
        return cls(m, amps)

    @classmethod
    def basis(cls, i: int, m: int) -> "SinglePhotonState":
        amps = np.zeros(m, dtype=complex)
        amps[i] = 1
        return cls(m, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class SwitchOutcome:
    branch_index: int
    detected_vacuum: bool
    clicked_mode: int | None
    logical_state_if_success: np.ndarray | None


def evolve(net: OpticalNetwork, psi: SinglePhotonState) -> SinglePhotonState:
    if psi.m != net.m:
        raise ContractError(f"state over {psi.m} modes sent into a {net.m}-mode network")
    return SinglePhotonState(net.m, network_unitary(net) @ psi.amplitudes)


def postselect_vacuum(psi: SinglePhotonState, d: int) -> tuple[np.ndarray, float]:
    """Unnormalized logical amplitudes and the probability that no ancilla clicks."""
    if psi.m < d:
        raise ContractError("fewer modes than the encoding dimension")
    logical = psi.amplitudes[:d].copy()
    return logical, float(np.sum(np.abs(logical) ** 2))


def effective_kraus(net: OpticalNetwork, d: int | None = None) -> np.ndarray:
    d = net.encoding if d is None else d
    return network_unitary(net)[:d, :d]


def compile_plan(plan: RealizationPlan) -> RealizationPlan:
    if plan.networks is None:
        plan.networks = [compile_kraus(A, plan.d) for A in plan.operators]
    return plan


def effective_channel_choi(plan: RealizationPlan) -> tuple[np.ndarray, float]:
    """Choi matrix of the postselected, renormalized switched scheme and its success probability."""
    compile_plan(plan)
    d = plan.d
    B = np.stack([effective_kraus(net, d) for net in plan.networks])
    p = np.asarray(plan.weights)
    T = np.einsum("i,iba,ibc->ac", p, B.conj(), B)
    p_sim = float(np.trace(T).real / d)
    deviation = matkit.max_abs(T - p_sim * np.eye(d))
    if deviation > INPUT_INDEPENDENCE_TOL:
        raise PlanInconsistencyError(f"success probability varies with the input by {deviation:.3e}")
    vecs = np.sqrt(p)[:, None] * B.reshape(len(p), -1)
    J = np.einsum("ia,ib->ab", vecs, vecs.conj()) / d
    return J / p_sim, p_sim


@dataclass
class MonteCarloResult:
    p_hat: float
    rho_hat: np.ndarray
    stderr: float
    shots: int
    seed: int
    successes: int
    ancilla_clicks: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "stderr": self.stderr,
            "shots": self.shots,
            "seed": self.seed,
            "rho_hat": cmat_to_json(self.rho_hat),
        }


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _outcome_table(plan: RealizationPlan, rho_in):
    """Amplitude vectors for every (branch, input eigencomponent) pair."""
    compile_plan(plan)
    d = plan.d
    rho_in = matkit.as_cmat(rho_in)
    if rho_in.shape != (d, d):
        raise ContractError(f"input state of shape {rho_in.shape} for d={d}")
    q, vecs = matkit.herm_eig(rho_in, 1e-9)
    q = np.clip(q, 0.0, None)
    keep = q > 1e-15
    q, vecs = q[keep] / q[keep].sum(), vecs[:, keep]
    m = plan.networks[0].m
    amps = np.stack([network_unitary(net)[:, :d] @ vecs for net in plan.networks])  # (branch, m, comp)
    amps = np.transpose(amps, (0, 2, 1))
    probs = np.abs(amps) ** 2
    cdf = np.cumsum(probs, axis=2)
    cdf /= cdf[:, :, -1:]
    return q, amps, cdf, m


def sample_shot(plan: RealizationPlan, rho_in, rng: np.random.Generator) -> SwitchOutcome:
    q, amps, cdf, m = _outcome_table(plan, rho_in)
    i = int(rng.choice(len(plan.weights), p=plan.weights))
    k = int(rng.choice(len(q), p=q))
    loc = int(np.searchsorted(cdf[i, k], rng.random(), side="right"))
    if loc < plan.d:
        psi = amps[i, k, :plan.d]
        return SwitchOutcome(i, True, None, psi / np.linalg.norm(psi))
    return SwitchOutcome(i, False, loc, None)


def monte_carlo(plan: RealizationPlan, rho_in, shots: int, seed: int = 0) -> MonteCarloResult:
    """Sample the switched scheme with threshold detectors on every ancilla.

    Shots are processed in fixed blocks of ``BLOCK_SHOTS``; block ``b`` draws
    from its own Philox stream keyed by ``(seed, b)``, so the result does not
    depend on how blocks are spread over threads.
    """
    if shots < 1:
        raise ContractError("shots must be at least 1")
    d = plan.d
    q, amps, cdf, m = _outcome_table(plan, rho_in)
    n_b, n_c = amps.shape[:2]
    weights = np.asarray(plan.weights, dtype=float)
    weights = weights / weights.sum()

    joint = np.cumsum(np.outer(weights, q).ravel())
    joint /= joint[-1]
    flat_cdf = cdf.reshape(n_b * n_c, m)

    def block(b):
        size = min(BLOCK_SHOTS, shots - b * BLOCK_SHOTS)
        rng = _block_rng(seed, b)
        draws = rng.random((2, size))
        pair = np.minimum(np.searchsorted(joint, draws[0], side="right"), n_b * n_c - 1)
        loc = np.minimum(np.sum(draws[1][:, None] >= flat_cdf[pair], axis=1), m - 1)
        ok = loc < d
        counts = np.bincount(pair[ok], minlength=n_b * n_c)
        clicks = np.bincount(loc[~ok], minlength=m)
        return counts, clicks

    n_blocks = -(-shots // BLOCK_SHOTS)
    threads = worker_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]
    counts = np.sum([c for c, _ in parts], axis=0).reshape(n_b, n_c)
    clicks = np.sum([c for _, c in parts], axis=0)

    successes = int(counts.sum())
    p_hat = successes / shots
    rho_hat = np.zeros((d, d), dtype=complex)
    if successes:
        logical = amps[:, :, :d]
        norms = np.linalg.norm(logical, axis=2, keepdims=True)
        states = np.divide(logical, norms, out=np.zeros_like(logical), where=norms > 0)
        rho_hat = np.einsum("ik,ika,ikb->ab", counts, states, states.conj()) / successes
    stderr = float(np.sqrt(p_hat * (1 - p_hat) / shots))
    return MonteCarloResult(p_hat, rho_hat, stderr, shots, seed, successes,
                            {int(j): int(clicks[j]) for j in range(d, m) if clicks[j]})


def evolved_basis_weights(net: OpticalNetwork, d: int | None = None) -> np.ndarray:
    """For each logical basis input, (success probability, ancilla weight)."""
    d = net.encoding if d is None else d
    out = []
    for i in range(d):
        psi = evolve(net, SinglePhotonState.basis(i, net.m))
        _, ok = postselect_vacuum(psi, d)
        out.append((ok, float(np.sum(np.abs(psi.amplitudes[d:]) ** 2))))
    return np.array(out)
