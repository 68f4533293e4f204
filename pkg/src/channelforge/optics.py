"""Beamsplitter / phase-shifter networks and the Kraus-operator compiler.

Element matrices act on single-photon amplitude vectors. A beamsplitter on
modes (p, q) acts as::

    [[cos t, -exp(i f) sin t],
     [exp(-i f) sin t, cos t]]

and a phase shifter multiplies one mode by ``exp(i f)``. Elements are
applied in list order, so the network matrix is ``E_n ... E_2 E_1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matkit
from .matkit import ContractError, max_abs


class InadmissibleOperatorError(ContractError):
    """Operator norm above one: no passive network realizes it."""


ARCCOS_CLAMP = 1e-10


@dataclass(frozen=True)
class OpticalElement:
    kind: str  # "bs" or "ps"
    modes: tuple[int, ...]
    phi: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.kind == "bs" and (len(self.modes) != 2 or self.modes[0] == self.modes[1]):
            raise ContractError("a beamsplitter needs two distinct modes")
        if self.kind == "ps" and len(self.modes) != 1:
            raise ContractError("a phase shifter acts on exactly one mode")
        if self.kind not in ("bs", "ps"):
            raise ContractError(f"unknown element kind {self.kind!r}")

    def matrix(self) -> np.ndarray:
        if self.kind == "ps":
            return np.array([[np.exp(1j * self.phi)]])
        c, s = math.cos(self.theta), math.sin(self.theta)
        e = np.exp(1j * self.phi)
        return np.array([[c, -e * s], [np.conj(e) * s, c]])

    def to_json(self) -> dict:
        if self.kind == "ps":
            return {"kind": "ps", "mode": self.modes[0], "phi": self.phi}
        return {"kind": "bs", "modes": list(self.modes), "theta": self.theta, "phi": self.phi}

    @classmethod
    def from_json(cls, obj: dict) -> "OpticalElement":
        if obj["kind"] == "ps":
            return cls("ps", (int(obj["mode"]),), phi=float(obj["phi"]))
        return cls("bs", tuple(int(i) for i in obj["modes"]), phi=float(obj["phi"]), theta=float(obj["theta"]))


def beamsplitter(p: int, q: int, theta: float, phi: float = 0.0) -> OpticalElement:
    return OpticalElement("bs", (p, q), phi=float(phi), theta=float(theta))


def phaseshifter(mode: int, phi: float) -> OpticalElement:
    return OpticalElement("ps", (mode,), phi=float(phi))


@dataclass
class OpticalNetwork:
    m: int
    elements: list[OpticalElement] = field(default_factory=list)
    encoding: int | None = None

    def __post_init__(self):
        if self.encoding is None:
            self.encoding = self.m
        for el in self.elements:
            if max(el.modes) >= self.m or min(el.modes) < 0:
                raise ContractError(f"element on modes {el.modes} outside a {self.m}-mode network")

    @property
    def encoding_modes(self) -> range:
        return range(self.encoding)

    @property
    def ancilla_modes(self) -> range:
        return range(self.encoding, self.m)

    def beamsplitters(self) -> list[OpticalElement]:
        return [el for el in self.elements if el.kind == "bs"]

    def to_json(self) -> dict:
        return {"m": self.m, "encoding": self.encoding, "elements": [el.to_json() for el in self.elements]}

    @classmethod
    def from_json(cls, data: dict) -> "OpticalNetwork":
        return cls(int(data["m"]), [OpticalElement.from_json(e) for e in data["elements"]], int(data["encoding"]))


def apply_element(el: OpticalElement, X: np.ndarray) -> None:
    """Left-multiply ``X`` in place by the element embedded in ``X.shape[0]`` modes."""
    idx = list(el.modes)
    X[idx] = el.matrix() @ X[idx]


def network_unitary(net: OpticalNetwork) -> np.ndarray:
    U = np.eye(net.m, dtype=complex)
    for el in net.elements:
        apply_element(el, U)
    return U


def _reck_elements(U: np.ndarray, modes: list[int]) -> list[OpticalElement]:
    """Triangular nulling: U T_1^dag ... T_K^dag = D, hence U = D T_K ... T_1."""
    M = np.array(U, dtype=complex)
    n = M.shape[0]
    out = []
    for r in range(n - 1, 0, -1):
        for p in range(r):
            q = p + 1
            a, b = M[r, p], M[r, q]
            if abs(a) < 1e-300:
                theta, phi = 0.0, 0.0
            else:
                theta = math.atan2(abs(a), abs(b))
                phi = float(np.angle(b) - np.angle(a)) if abs(b) > 0 else float(-np.angle(a))
            c, s = math.cos(theta), math.sin(theta)
            e = np.exp(1j * phi)
            colp, colq = M[:, p].copy(), M[:, q].copy()
            M[:, p] = c * colp - np.conj(e) * s * colq
            M[:, q] = e * s * colp + c * colq
            M[r, p] = 0.0
            out.append(beamsplitter(modes[p], modes[q], theta, phi))
    for k in range(n):
        out.append(phaseshifter(modes[k], float(np.angle(M[k, k]))))
    return out


def reck_decompose(U, tol: float = 1e-9) -> OpticalNetwork:
    U = matkit.as_cmat(U)
    if not matkit.is_unitary(U, tol):
        raise ContractError("reck_decompose needs a unitary matrix")
    n = U.shape[0]
    return OpticalNetwork(n, _reck_elements(U, list(range(n))), n)


def attenuation_angles(s: np.ndarray) -> np.ndarray:
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    theta = np.arccos(s)
    theta[s >= 1 - ARCCOS_CLAMP] = 0.0
    return theta


def compile_kraus(A, d: int | None = None) -> OpticalNetwork:
    """Network on 2d modes whose vacuum-postselected encoding block equals A.

    Layout: mesh for U on the encoding, one beamsplitter between encoding
    mode i and ancilla d+i with cos(theta_i) = s_i, then the mesh for V.
    """
    A = matkit.as_cmat(A)
    d = A.shape[0] if d is None else d
    if A.shape != (d, d):
        raise ContractError(f"operator shape {A.shape} does not match d={d}")
    V, s, U = matkit.svd(A)
    if s[0] > 1 + matkit.TOL.admissible:
        raise InadmissibleOperatorError(f"operator norm {s[0]:.12f} exceeds 1; rescale it first")
    theta = attenuation_angles(s)
    enc = list(range(d))
    elements = _reck_elements(U, enc)
    elements += [beamsplitter(i, d + i, theta[i], 0.0) for i in range(d)]
    elements += _reck_elements(V, enc)
    return OpticalNetwork(2 * d, elements, d)


def encoding_block(net: OpticalNetwork) -> np.ndarray:
    d = net.encoding
    return network_unitary(net)[:d, :d]


def block_error(net: OpticalNetwork, A) -> float:
    return max_abs(encoding_block(net) - np.asarray(A))
