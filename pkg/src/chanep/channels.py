"""Single-qubit channel representations and conversions.

A channel is carried around as its 4x4 superoperator (a plain complex
``ndarray``) acting on the column-stacked density matrix
``(rho11, rho21, rho12, rho22)``.  The other forms are derived on demand:

* Kraus operators: ``S = sum_k conj(K_k) (x) K_k``
* affine Bloch form: ``A = M S M^-1`` with rows ``(1, r_x, r_y, r_z)``
* Choi matrix: ``J = sum_ij |i><j| (x) E(|i><j|)`` (input (x) output, trace 2)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from chanep.errors import ChannelError

DEFAULT_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

# vec(rho) -> (tr rho, r_x, r_y, r_z) with r_k = tr(rho sigma_k)
_M = np.array(
    [
        [1, 0, 0, 1],
        [0, 1, 1, 0],
        [0, -1j, 1j, 0],
        [1, 0, 0, -1],
    ],
    dtype=complex,
)
_M_INV = np.linalg.inv(_M)


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a 2x2 matrix into ``(rho11, rho21, rho12, rho22)``."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(2, 2, order="F")


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    return np.array(
        [
            (rho[0, 1] + rho[1, 0]).real,
            (1j * (rho[0, 1] - rho[1, 0])).real,
            (rho[0, 0] - rho[1, 1]).real,
        ]
    )


def density_from_bloch(r: Sequence[float]) -> np.ndarray:
    rx, ry, rz = r
    return 0.5 * (I2 + rx * SX + ry * SY + rz * SZ)


def validate_density(rho: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Return ``rho`` as a complex array, raising ChannelError if it is not a state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ChannelError(f"density matrix must be 2x2, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ChannelError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ChannelError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ChannelError("density matrix is not positive semidefinite")
    return rho


@dataclass(frozen=True)
class AffineBloch:
    """Affine action ``r -> distortion @ r + shift`` on the Bloch vector."""

    distortion: np.ndarray
    shift: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        E = np.array(self.distortion, dtype=float)
        s = np.array(self.shift, dtype=float)
        if E.shape != (3, 3) or s.shape != (3,):
            raise ChannelError("affine form needs a 3x3 distortion and a 3-vector shift")
        E.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "distortion", E)
        object.__setattr__(self, "shift", s)

    @property
    def matrix(self) -> np.ndarray:
        """The full 4x4 real matrix with first row ``(1, 0, 0, 0)``."""
        A = np.zeros((4, 4))
        A[0, 0] = 1.0
        A[1:, 0] = self.shift
        A[1:, 1:] = self.distortion
        return A

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self.distortion @ np.asarray(r, dtype=float) + self.shift


@dataclass(frozen=True)
class CPTPReport:
    is_cp: bool
    is_tp: bool
    min_choi_eigenvalue: float
    tp_residual: float

    @property
    def ok(self) -> bool:
        return self.is_cp and self.is_tp


def _as_superop(S) -> np.ndarray:
    S = np.asarray(S, dtype=complex)
    if S.shape != (4, 4):
        raise ChannelError(f"superoperator must be 4x4, got {S.shape}")
    return S


def kraus_to_superop(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Superoperator ``sum_k conj(K_k) (x) K_k`` of a Kraus set.

    :param kraus: non-empty sequence of 2x2 Kraus operators.
    :raises ChannelError: on an empty list or mis-shaped operators.
    """
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ChannelError("Kraus list is empty")
    if any(k.shape != (2, 2) for k in ops):
        raise ChannelError("Kraus operators must be 2x2")
    return sum(np.kron(k.conj(), k) for k in ops)


def superop_to_affine(S, tol: float = DEFAULT_TOL) -> AffineBloch:
    """Affine Bloch form of a trace-preserving, Hermiticity-preserving map.

    :raises ChannelError: if the map is not TP within ``tol`` or the result
        carries imaginary parts above 1e-9.
    """
    S = _as_superop(S)
    A = _M @ S @ _M_INV
    if np.max(np.abs(A[0] - np.array([1, 0, 0, 0]))) > tol:
        raise ChannelError("map is not trace preserving")
    if np.max(np.abs(A.imag)) > 1e-9:
        raise ChannelError("affine form is not real: map does not preserve Hermiticity")
    A = A.real
    return AffineBloch(A[1:, 1:], A[1:, 0])


def affine_to_superop(a: AffineBloch) -> np.ndarray:
    return _M_INV @ a.matrix @ _M


def distortion_of(S) -> np.ndarray:
    """Distortion matrix of a superoperator (or pass a 3x3 matrix through)."""
    if isinstance(S, AffineBloch):
        return S.distortion
    S = np.asarray(S)
    if S.shape == (3, 3):
        return S.astype(float)
    return superop_to_affine(S).distortion


def choi_of(S) -> np.ndarray:
    """Unnormalised Choi matrix (input (x) output), trace 2 for TP maps."""
    S = _as_superop(S)
    J = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            unit = np.zeros(4, dtype=complex)
            unit[i + 2 * j] = 1.0
            out = unvec(S @ unit)
            J[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = out
    return J


def superop_from_choi(J: np.ndarray) -> np.ndarray:
    J = np.asarray(J, dtype=complex)
    S = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            S[:, i + 2 * j] = vec(J[2 * i : 2 * i + 2, 2 * j : 2 * j + 2])
    return S


def partial_trace_output(J: np.ndarray) -> np.ndarray:
    """Trace out the output factor of a 4x4 Choi matrix."""
    return np.einsum("iaja->ij", np.asarray(J).reshape(2, 2, 2, 2))


def check_cptp(S, tol: float = DEFAULT_TOL) -> CPTPReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    J = choi_of(S)
    herm = 0.5 * (J + J.conj().T)
    min_eig = float(np.linalg.eigvalsh(herm).min())
    herm_err = float(np.max(np.abs(J - J.conj().T)))
    tp_res = float(np.max(np.abs(partial_trace_output(J) - I2)))
    return CPTPReport(
        is_cp=min_eig >= -tol and herm_err <= tol,
        is_tp=tp_res <= tol,
        min_choi_eigenvalue=min_eig,
        tp_residual=tp_res,
    )


def mix(channels: Sequence, weights: Sequence[float]) -> np.ndarray:
    """Convex combination of superoperators.

    Zero weights are allowed; negative weights and sums away from one are not.
    """
    channels = [_as_superop(c) for c in channels]
    w = np.asarray(weights, dtype=float)
    if not channels:
        raise ChannelError("cannot mix an empty list of channels")
    if len(channels) != len(w):
        raise ChannelError("channels and weights differ in length")
    if np.any(w < 0):
        raise ChannelError("negative mixing weight")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ChannelError(f"weights sum to {w.sum()!r}, not 1")
    return sum(wi * c for wi, c in zip(w, channels))


def interpolate(first, second, p: float) -> np.ndarray:
    """``(1 - p) * first + p * second``."""
    return mix([first, second], [1.0 - p, p])


def apply(S, rho: np.ndarray) -> np.ndarray:
    rho = validate_density(rho)
    return unvec(_as_superop(S) @ vec(rho))


# --- fixtures -----------------------------------------------------------

def sqrt_sigma_x() -> np.ndarray:
    """Principal square root of sigma_x (eigenvalues 1 and i)."""
    return 0.5 * (1 + 1j) * I2 + 0.5 * (1 - 1j) * SX


def kraus_e1() -> list[np.ndarray]:
    return [sqrt_sigma_x() / np.sqrt(2), SY / 2, SZ / 2]


def kraus_e2() -> list[np.ndarray]:
    return [I2 / 2, SX / 2, SY / np.sqrt(2)]


def rotation_matrix(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit ``axis`` by ``angle`` (right-handed)."""
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,):
        raise ChannelError("rotation axis must be a 3-vector")
    norm = np.linalg.norm(n)
    if abs(norm - 1.0) > 1e-9:
        raise ChannelError("rotation axis must be a unit vector")
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def rotation(axis: Sequence[float], angle: float) -> np.ndarray:
    return affine_to_superop(AffineBloch(rotation_matrix(axis, angle)))


def depolarizing(lam: float = 0.0) -> np.ndarray:
    """Depolarizing channel shrinking the Bloch ball by ``lam``; ``lam=0`` is complete."""
    return affine_to_superop(AffineBloch(lam * np.eye(3)))


def identity() -> np.ndarray:
    return np.eye(4, dtype=complex)


def reset() -> np.ndarray:
    """Reset to |0><0|."""
    return affine_to_superop(AffineBloch(np.zeros((3, 3)), [0.0, 0.0, 1.0]))


def e1() -> np.ndarray:
    return kraus_to_superop(kraus_e1())


def e2() -> np.ndarray:
    return kraus_to_superop(kraus_e2())


def e3() -> np.ndarray:
    return rotation(np.ones(3) / np.sqrt(3), -np.pi / 2)


_BUILTINS = {
    "E1": e1,
    "E2": e2,
    "E3": e3,
    "identity": identity,
    "reset": reset,
    "depolarizing": depolarizing,
    "rotation": rotation,
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin(name: str, *args, **kwargs) -> np.ndarray:
    """Look up a fixture by name; parameters are forwarded to the factory.

    >>> np.allclose(builtin("identity"), np.eye(4))
    True
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ChannelError(f"unknown fixture {name!r}; known: {', '.join(_BUILTINS)}") from None
    return factory(*args, **kwargs)


def random_cptp(seed) -> np.ndarray:
    """Channel from a random isometric dilation with a two-level ancilla."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    V, R = np.linalg.qr(G)
    V = V * (np.diag(R) / np.abs(np.diag(R)))  # fix the QR phase ambiguity
    # rows of V are indexed as 2*signal + ancilla
    return kraus_to_superop([V[[0, 2]], V[[1, 3]]])
