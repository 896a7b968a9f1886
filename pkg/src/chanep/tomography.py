"""Synthetic Pauli-basis process tomography.

Six Pauli eigenstates are sent through the channel and each output is
measured in the X, Y and Z bases, giving 18 two-outcome settings.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chanep import channels as ch
from chanep._kernels import pgd_mle, project_cptp
from chanep.errors import ChannelError
from chanep.spectral import spectrum

_S2 = 1 / np.sqrt(2)
PREP_STATES = {
    "x+": np.array([_S2, _S2], dtype=complex),
    "x-": np.array([_S2, -_S2], dtype=complex),
    "y+": np.array([_S2, 1j * _S2], dtype=complex),
    "y-": np.array([_S2, -1j * _S2], dtype=complex),
    "z+": np.array([1, 0], dtype=complex),
    "z-": np.array([0, 1], dtype=complex),
}
PREPS = tuple(PREP_STATES)
BASES = ("X", "Y", "Z")
SETTINGS = tuple((prep, basis) for prep in PREPS for basis in BASES)
_PAULI = dict(zip(BASES, ch.PAULIS))
_AXIS = {"x": 0, "y": 1, "z": 2}


def prep_density(label: str) -> np.ndarray:
    psi = PREP_STATES[label]
    return np.outer(psi, psi.conj())


@dataclass
class CountsTable:
    """Outcome counts per (prep, basis): ``counts[(prep, basis)] = (n_plus, n_minus)``.

    ``shots`` is ``None`` for an exact-probability table, whose entries are
    the Born probabilities themselves.
    """

    counts: dict
    shots: int | None
    seed: int | None

    @property
    def exact(self) -> bool:
        return self.shots is None

    def frequencies(self) -> dict:
        out = {}
        for key in SETTINGS:
            if key not in self.counts:
                raise ChannelError(f"missing tomography setting {key[0]}/{key[1]}")
            n = np.asarray(self.counts[key], dtype=float)
            total = n.sum()
            if total <= 0:
                raise ChannelError(f"no counts for setting {key[0]}/{key[1]}")
            out[key] = n / total
        return out

    def to_json(self) -> dict:
        def conv(x):
            return int(x) if not self.exact else float(x)

        return {
            "shots": self.shots,
            "seed": self.seed,
            "exact": self.exact,
            "counts": {f"{p}/{b}": [conv(v) for v in self.counts[(p, b)]] for p, b in SETTINGS},
        }

    @classmethod
    def from_json(cls, data: dict) -> "CountsTable":
        counts = {}
        for key, value in data["counts"].items():
            prep, basis = key.split("/")
            counts[(prep, basis)] = tuple(value)
        missing = [f"{p}/{b}" for p, b in SETTINGS if (p, b) not in counts]
        if missing:
            raise ChannelError(f"counts table lacks settings: {', '.join(missing)}")
        shots = None if data.get("exact") else data.get("shots")
        return cls(counts, shots, data.get("seed"))


def born_probabilities(S) -> dict:
    """Exact ``(p_plus, p_minus)`` for each setting; rejects non-physical outputs."""
    aff = ch.superop_to_affine(S)
    out = {}
    for prep, basis in SETTINGS:
        sign = 1.0 if prep[1] == "+" else -1.0
        r_in = np.zeros(3)
        r_in[_AXIS[prep[0]]] = sign
        m = aff(r_in)[BASES.index(basis)]
        p_plus = 0.5 * (1.0 + m)
        if not -1e-12 <= p_plus <= 1.0 + 1e-12:
            raise ChannelError(f"outcome probability {p_plus!r} outside [0, 1]; channel is not CPTP")
        p_plus = min(max(p_plus, 0.0), 1.0)
        out[(prep, basis)] = (p_plus, 1.0 - p_plus)
    return out


def with_depolarizing_noise(S, strength: float) -> np.ndarray:
    """``(1 - strength) S + strength * (completely depolarizing)``."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError("noise strength must lie in [0, 1]")
    if strength == 0.0:
        return np.asarray(S, dtype=complex)
    return ch.mix([S, ch.depolarizing(0.0)], [1.0 - strength, strength])


def simulate_experiment(S, shots: int, seed: int, noise: float = 0.0) -> CountsTable:
    """Binomial shot counts for all 18 settings from one seeded generator."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = born_probabilities(with_depolarizing_noise(S, noise))
    rng = np.random.default_rng(seed)
    counts = {}
    for key in SETTINGS:
        n_plus = int(rng.binomial(shots, probs[key][0]))
        counts[key] = (n_plus, shots - n_plus)
    return CountsTable(counts, shots, seed)


def exact_table(S, noise: float = 0.0) -> CountsTable:
    """Infinite-shot table holding the Born probabilities."""
    return CountsTable(born_probabilities(with_depolarizing_noise(S, noise)), None, None)


def _expectations(t: CountsTable) -> dict:
    return {key: f[0] - f[1] for key, f in t.frequencies().items()}


def linear_inversion(t: CountsTable) -> np.ndarray:
    """Affine Bloch map assembled directly from the empirical expectations.

    May be non-CP for finite data.
    """
    m = _expectations(t)
    E = np.zeros((3, 3))
    shift = np.zeros(3)
    for axis, j in _AXIS.items():
        plus = np.array([m[(axis + "+", b)] for b in BASES])
        minus = np.array([m[(axis + "-", b)] for b in BASES])
        E[:, j] = 0.5 * (plus - minus)
        shift += 0.5 * (plus + minus) / 3.0
    return ch.affine_to_superop(ch.AffineBloch(E, shift))


def _effects(t: CountsTable) -> tuple[np.ndarray, np.ndarray]:
    freqs = t.frequencies()
    A, f = [], []
    for prep, basis in SETTINGS:
        rho_t = prep_density(prep).T
        for k, sign in enumerate((1.0, -1.0)):
            proj = 0.5 * (ch.I2 + sign * _PAULI[basis])
            A.append(np.kron(rho_t, proj))
            f.append(freqs[(prep, basis)][k])
    return np.ascontiguousarray(A, dtype=np.complex128), np.asarray(f, dtype=np.float64)


@dataclass
class Reconstruction:
    superop: np.ndarray
    choi: np.ndarray
    neg_log_likelihood: float
    iterations: int
    converged: bool
    objective_trace: np.ndarray

    @property
    def cptp(self) -> ch.CPTPReport:
        return ch.check_cptp(self.superop, 1e-9)


def neg_log_likelihood(t: CountsTable, S) -> float:
    """``-sum_k n_k log p_k`` with counts weighted per setting."""
    A, f = _effects(t)
    J = ch.choi_of(S)
    p = np.einsum("kab,ba->k", A, J).real
    weight = 1.0 if t.exact else float(t.shots)
    mask = f > 0
    if np.any(p[mask] <= 0):
        return float("inf")
    return float(-weight * np.sum(f[mask] * np.log(p[mask])))


def mle_cptp_fit(t: CountsTable, init=None, max_iter: int = 5000, rel_tol: float = 1e-10) -> Reconstruction:
    """Multinomial maximum likelihood over CPTP maps.

    :param init: starting superoperator; the completely depolarizing channel
        by default.  It is projected onto the CPTP set before use.
    """
    A, f = _effects(t)
    S0 = ch.depolarizing(0.0) if init is None else np.asarray(init, dtype=complex)
    J0 = project_cptp(np.ascontiguousarray(ch.choi_of(S0)))
    J, trace, iters, converged = pgd_mle(A, f, J0, max_iter, rel_tol)
    weight = 1.0 if t.exact else float(t.shots)
    S = ch.superop_from_choi(J)
    return Reconstruction(S, J, float(trace[-1] * weight), int(iters), bool(converged), trace * weight)


def _psd_sqrt(X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (X + X.conj().T))
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def process_fidelity(A, B) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))^2`` of the normalised Choi states."""
    ja = ch.choi_of(A)
    jb = ch.choi_of(B)
    ja = ja / np.trace(ja).real
    jb = jb / np.trace(jb).real
    s = _psd_sqrt(ja)
    w = np.linalg.eigvalsh(0.5 * (s @ jb @ s + (s @ jb @ s).conj().T))
    F = float(np.sum(np.sqrt(np.clip(w, 0, None))) ** 2)
    return min(max(F, 0.0), 1.0)


@dataclass
class PipelineResult:
    reconstruction: Reconstruction
    fidelity: float
    eigenvalues: np.ndarray
    table: CountsTable


def full_pipeline(S, shots: int | None, seed: int | None, noise: float = 0.0) -> PipelineResult:
    """Simulate data, fit a CPTP map by maximum likelihood, and read off its spectrum.

    ``shots=None`` uses exact probabilities.
    """
    if not ch.check_cptp(S).ok:
        raise ChannelError("pipeline input is not CPTP")
    t = exact_table(S, noise) if shots is None else simulate_experiment(S, shots, seed, noise)
    rec = mle_cptp_fit(t)
    fid = process_fidelity(rec.superop, S)
    eig = spectrum(rec.superop).eigenvalues
    return PipelineResult(rec, fid, eig, t)
