"""Signal + ancilla gate simulation and compilation of a qubit channel into
an equal-weight average of two one-ancilla circuits.

Qubit 0 is the signal, qubit 1 the ancilla, which starts in ``|0>``.
Two-qubit matrices act on ``signal (x) ancilla``, so basis index is
``2 * signal + ancilla``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from chanep import channels as ch
from chanep._kernels import template_residual
from chanep.errors import ChannelError, ConvergenceError

I2 = np.eye(2, dtype=complex)
SIGNAL, ANCILLA = 0, 1
_KINDS = ("u3", "ry", "cx")


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])


def ry(theta: float) -> np.ndarray:
    return u3(theta, 0.0, 0.0)


def cnot(control: int, target: int) -> np.ndarray:
    U = np.zeros((4, 4), dtype=complex)
    for b in range(4):
        bits = [b >> 1, b & 1]
        if bits[control]:
            bits[target] ^= 1
        U[2 * bits[0] + bits[1], b] = 1.0
    return U


@dataclass(frozen=True)
class Gate:
    """One gate; ``qubits`` is ``(target,)`` for u3/ry and ``(control, target)`` for cx."""

    kind: str
    qubits: tuple
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ChannelError(f"unknown gate kind {self.kind!r}")
        nq, na = {"u3": (1, 3), "ry": (1, 1), "cx": (2, 0)}[self.kind]
        if len(self.qubits) != nq or len(self.angles) != na:
            raise ChannelError(f"{self.kind} takes {nq} qubit(s) and {na} angle(s)")
        if any(q not in (SIGNAL, ANCILLA) for q in self.qubits):
            raise ChannelError(f"qubit index out of range in {self}")
        if self.kind == "cx" and self.qubits[0] == self.qubits[1]:
            raise ChannelError("cx control and target must differ")

    def matrix(self) -> np.ndarray:
        """4x4 action on signal (x) ancilla."""
        if self.kind == "cx":
            return cnot(*self.qubits)
        g = u3(*self.angles) if self.kind == "u3" else ry(*self.angles)
        return np.kron(g, I2) if self.qubits[0] == SIGNAL else np.kron(I2, g)

    def to_line(self) -> str:
        qs = " ".join(f"q{q}" for q in self.qubits)
        return " ".join([self.kind, qs] + [repr(float(a)) for a in self.angles])

    @classmethod
    def from_line(cls, line: str) -> "Gate":
        parts = line.split()
        if not parts or parts[0] not in _KINDS:
            raise ChannelError(f"cannot parse gate line {line!r}")
        kind = parts[0]
        nq = 2 if kind == "cx" else 1
        try:
            qubits = tuple(int(p[1:]) for p in parts[1:1 + nq] if p.startswith("q"))
            angles = tuple(float(p) for p in parts[1 + nq:])
        except ValueError:
            raise ChannelError(f"cannot parse gate line {line!r}") from None
        if len(qubits) != nq:
            raise ChannelError(f"cannot parse gate line {line!r}")
        return cls(kind, qubits, angles)


@dataclass
class Circuit:
    gates: list = field(default_factory=list)

    def unitary(self) -> np.ndarray:
        U = np.eye(4, dtype=complex)
        for g in self.gates:
            U = g.matrix() @ U
        return U

    def to_text(self) -> str:
        return "".join(g.to_line() + "\n" for g in self.gates)

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
        return cls([Gate.from_line(ln) for ln in lines if ln])

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Circuit":
        return cls.from_text(Path(path).read_text())


def simulate(c: Circuit, rho: np.ndarray) -> np.ndarray:
    """Signal state after ``U (rho (x) |0><0|) U^dagger`` with the ancilla traced out."""
    rho = ch.validate_density(rho)
    anc = np.array([[1, 0], [0, 0]], dtype=complex)
    U = c.unitary()
    out = (U @ np.kron(rho, anc) @ U.conj().T).reshape(2, 2, 2, 2)
    return np.einsum("iaja->ij", out)


def _kraus_of_unitary(U: np.ndarray) -> list[np.ndarray]:
    cols = U[:, [0, 2]]  # ancilla input fixed to |0>
    return [cols[[0, 2]], cols[[1, 3]]]


def induced_channel(c: Circuit) -> np.ndarray:
    """Superoperator assembled column by column from the circuit's action on the matrix units."""
    U = c.unitary()
    anc = np.array([[1, 0], [0, 0]], dtype=complex)
    S = np.zeros((4, 4), dtype=complex)
    for col in range(4):
        unit = np.zeros((2, 2), dtype=complex)
        unit[col % 2, col // 2] = 1.0  # column stacking
        out = (U @ np.kron(unit, anc) @ U.conj().T).reshape(2, 2, 2, 2)
        S[:, col] = ch.vec(np.einsum("iaja->ij", out))
    return S


# --- the two-circuit template -----------------------------------------------

N_ANGLES = 8


def template(x: Sequence[float]) -> Circuit:
    """U3 on signal, then Ry/CX(s->a)/Ry/CX(a->s) on the ancilla block, then U3 on signal.

    ``x = (theta1, phi1, lam1, alpha, beta, theta2, phi2, lam2)``.
    """
    x = [float(v) for v in x]
    if len(x) != N_ANGLES:
        raise ValueError(f"template takes {N_ANGLES} angles")
    return Circuit([
        Gate("u3", (SIGNAL,), tuple(x[0:3])),
        Gate("ry", (ANCILLA,), (x[3],)),
        Gate("cx", (SIGNAL, ANCILLA)),
        Gate("ry", (ANCILLA,), (x[4],)),
        Gate("cx", (ANCILLA, SIGNAL)),
        Gate("u3", (SIGNAL,), tuple(x[5:8])),
    ])


IDENTITY_ANGLES = (0.0, 0.0, 0.0, np.pi / 2, -np.pi / 2, 0.0, 0.0, 0.0)




@dataclass
class Decomposition:
    q1: Circuit
    q2: Circuit
    residual: float
    angles: np.ndarray  # (2, 8)
    restarts_used: int = 0

    def average(self) -> np.ndarray:
        return 0.5 * (induced_channel(self.q1) + induced_channel(self.q2))


def _residual_vec(S, paired):
    target = np.ascontiguousarray(S, dtype=np.complex128)
    return lambda x: template_residual(np.ascontiguousarray(x, dtype=np.float64), target, paired)


def _choi_rank(S, tol=1e-9) -> int:
    return int(np.sum(np.linalg.eigvalsh(ch.choi_of(S)) > tol))


def decompose(S, tol: float = 1e-8, restarts: int = 8, max_nfev: int = 2000, seed: int = 0) -> Decomposition:
    """Two template circuits whose induced channels average to ``S``.

    Channels with Choi rank at most two have a one-ancilla dilation, so a
    single circuit is tried first (``q1 = q2``).  Otherwise, or when that
    fails, both circuits' sixteen angles are fitted jointly.  Every solve is a
    least-squares fit of the superoperator residual from random starts.

    :raises ChannelError: ``S`` is not CPTP.
    :raises ConvergenceError: no start reached ``tol``; ``best`` holds the
        best Decomposition found.
    """
    S = np.asarray(S, dtype=complex)
    if not ch.check_cptp(S).ok:
        raise ChannelError("decomposition target is not CPTP")
    rng = np.random.default_rng(seed)
    best = None

    def consider(x, paired, k):
        nonlocal best
        # 2*pi shifts change each unitary by a global sign at most
        x = np.remainder(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
        ang = np.array([x, x]) if paired else np.array([x[:8], x[8:]])
        d = Decomposition(template(ang[0]), template(ang[1]), 0.0, ang, k)
        d.residual = verify_decomposition(S, d)["distance"]
        if best is None or d.residual < best.residual:
            best = d
        return d.residual <= tol

    if consider(np.array(IDENTITY_ANGLES), True, 0):
        return best
    modes = [True, False] if _choi_rank(S) <= 2 else [False]
    for paired in modes:
        f = _residual_vec(S, paired)
        n = N_ANGLES if paired else 2 * N_ANGLES
        for k in range(restarts):
            x0 = rng.uniform(-np.pi, np.pi, n)
            r = least_squares(f, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev, method="lm")
            if consider(r.x, paired, k + 1):
                return best
    raise ConvergenceError(f"decomposition residual {best.residual:.3e} above {tol:.1e}", best=best)


def verify_decomposition(S, d: Decomposition) -> dict:
    """Frobenius distance between ``S`` and the induced average, plus per-circuit CPTP checks."""
    a, b = induced_channel(d.q1), induced_channel(d.q2)
    dist = float(np.linalg.norm(0.5 * (a + b) - np.asarray(S, dtype=complex)))
    return {"distance": dist, "q1_cptp": ch.check_cptp(a).ok, "q2_cptp": ch.check_cptp(b).ok}
