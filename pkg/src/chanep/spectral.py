"""Eigen-analysis of 3x3 distortion matrices.

Phases follow the real structure of the distortion matrix: all eigenvalues
real (K-exact), one real eigenvalue plus a conjugate pair (K-broken), or a
defective coalescence between the two (boundary).
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from chanep.channels import distortion_of
from chanep.errors import ConvergenceError, EigenSolverError, PreconditionError

PHASE_TOL = 1e-10
ORDER_TOL = 1e-8
# sine of the principal angle below which two eigenvectors count as coalesced
GAP_TOL = 1e-4
# eigenvalues of a defective cluster are only accurate to ~sqrt(eps); their mean is accurate to ~eps
CLUSTER_TOL = 8.0 * np.sqrt(np.finfo(float).eps)


class Phase(str, enum.Enum):
    K_EXACT = "KExact"
    K_BROKEN = "KBroken"
    BOUNDARY = "Boundary"

    def __str__(self):
        return self.value


class Kind(str, enum.Enum):
    EP = "EP"
    DP = "DP"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SpectrumReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray  # columns
    left_eigenvectors: np.ndarray  # columns, v^H E = lambda v^H
    rigidities: np.ndarray
    phase: Phase


@dataclass(frozen=True)
class EPRecord:
    """A located eigenvalue degeneracy.

    ``order`` is the size of the largest Jordan block of the coalesced
    eigenvalue, so it is 1 for a diabolic point; ``multiplicity`` counts the
    coalescing eigenvalues.
    """

    params: tuple
    coalesced_eigenvalue: complex
    order: int
    multiplicity: int
    min_rigidity: float
    eigenvector_gap: float
    kind: Kind
    eigenvector: np.ndarray
    bracket: tuple | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        lam = complex(self.coalesced_eigenvalue)
        out = {
            "params": [float(x) for x in self.params],
            "coalesced_eigenvalue": [lam.real, lam.imag],
            "order": int(self.order),
            "multiplicity": int(self.multiplicity),
            "min_rigidity": float(self.min_rigidity),
            "eigenvector_gap": float(self.eigenvector_gap),
            "kind": str(self.kind),
            "eigenvector": [[complex(z).real, complex(z).imag] for z in self.eigenvector],
        }
        if self.bracket is not None:
            out["bracket"] = [float(x) for x in self.bracket]
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def _scale(E: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(E, 2)))


def phase_rigidity(v_left: np.ndarray, v_right: np.ndarray) -> float:
    """``|vL^H vR| / (|vL| |vR|)`` for a left/right eigenvector pair.

    ``v_left`` is taken in the convention ``vL^H E = lambda vL^H``.
    """
    vl = np.asarray(v_left, dtype=complex)
    vr = np.asarray(v_right, dtype=complex)
    nl, nr = np.linalg.norm(vl), np.linalg.norm(vr)
    if nl == 0 or nr == 0:
        raise ValueError("phase rigidity of a zero vector")
    return float(min(1.0, abs(np.vdot(vl, vr)) / (nl * nr)))


def sine_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Sine of the angle between two complex vectors (0 when parallel)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    c = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.sqrt(max(0.0, 1.0 - min(1.0, c) ** 2)))


def _closest_pair(w: np.ndarray) -> tuple[int, int]:
    return min(itertools.combinations(range(len(w)), 2), key=lambda ij: abs(w[ij[0]] - w[ij[1]]))


def classify_phase(report: SpectrumReport, tol: float = PHASE_TOL) -> Phase:
    """Phase label of a spectrum.

    Boundary means some pair of eigenvalues sits within ``sqrt(tol)`` (the
    square-root splitting scale of a perturbed EP2) with eigenvectors
    parallel to within ``GAP_TOL``.  Otherwise the label counts eigenvalues
    with ``|Im| > tol * max(1, |E|)``.
    """
    thr = tol * _scale(report.matrix)
    w, vr = report.eigenvalues, report.right_eigenvectors
    for i, j in itertools.combinations(range(len(w)), 2):
        if abs(w[i] - w[j]) <= np.sqrt(thr) and sine_angle(vr[:, i], vr[:, j]) <= GAP_TOL:
            return Phase.BOUNDARY
    n_complex = int(np.sum(np.abs(w.imag) > thr))
    if n_complex == 0:
        return Phase.K_EXACT
    if n_complex == 2:
        return Phase.K_BROKEN
    return Phase.BOUNDARY


def spectrum(E, tol: float = PHASE_TOL) -> SpectrumReport:
    """Eigenvalues, left/right eigenvectors, rigidities and phase of ``E``.

    Eigenvalues are sorted by real part, then imaginary part.
    """
    E = distortion_of(E)
    if not np.all(np.isfinite(E)):
        raise EigenSolverError("distortion matrix has non-finite entries")
    try:
        w, vl, vr = scipy.linalg.eig(E, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(vl)) and np.all(np.isfinite(vr))):
        raise EigenSolverError("eigensolver returned non-finite values")
    norm_E = float(np.linalg.norm(E, 2))
    resid = np.linalg.norm(E @ vr - vr * w, axis=0)
    if np.any(resid > 1e-9 * max(norm_E, 1e-300)):
        raise EigenSolverError(f"eigenpair residual {resid.max():.3e} too large")
    w = _merge_defective_clusters(w, vr, _scale(E))
    order = np.lexsort((w.imag, w.real))
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    rig = np.array([phase_rigidity(vl[:, k], vr[:, k]) for k in range(3)])
    partial = SpectrumReport(E, w, vr, vl, rig, Phase.BOUNDARY)
    phase = classify_phase(partial, tol)
    return SpectrumReport(E, w, vr, vl, rig, phase)


def _merge_defective_clusters(w: np.ndarray, vr: np.ndarray, scale: float) -> np.ndarray:
    """Replace each numerically coincident, defective eigenvalue cluster by its mean.

    Near a Jordan block a backward-stable solver splits the eigenvalue by
    about ``sqrt(eps)``, while the cluster mean stays accurate to ``eps``.
    Members must also share an eigenvector, so a semisimple degeneracy
    keeps its computed values.
    """
    n = len(w)
    root = list(range(n))

    def find(i):
        while root[i] != i:
            i = root[i]
        return i

    for i, j in itertools.combinations(range(n), 2):
        if abs(w[i] - w[j]) <= CLUSTER_TOL * scale and sine_angle(vr[:, i], vr[:, j]) <= GAP_TOL:
            root[find(j)] = find(i)
    out = w.copy()
    for r in set(find(i) for i in range(n)):
        members = [i for i in range(n) if find(i) == r]
        if len(members) > 1:
            out[members] = np.mean(w[members])
    return out


def ep_order(E, lam: complex, tol: float = ORDER_TOL) -> int:
    """Largest Jordan block size of ``lam`` in ``E``.

    Ranks of powers of ``M = E - lam I`` come from singular values with
    threshold ``tol * max(1, |E|)**k``; the order is the smallest ``k`` with
    ``nullity(M^k)`` equal to the algebraic multiplicity ``nullity(M^n)``.
    """
    E = distortion_of(E).astype(complex)
    n = E.shape[0]
    scale = _scale(E)
    M = E - lam * np.eye(n)
    nullity = []
    P = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        P = P @ M
        sv = np.linalg.svd(P, compute_uv=False)
        nullity.append(int(np.sum(sv <= tol * scale**k)))
    if nullity[0] == 0:
        raise PreconditionError(f"{lam} is not an eigenvalue within tolerance")
    alg = nullity[-1]
    return next(k + 1 for k, nk in enumerate(nullity) if nk == alg)


def algebraic_multiplicity(E, lam: complex, tol: float = ORDER_TOL) -> int:
    E = distortion_of(E).astype(complex)
    n = E.shape[0]
    M = np.linalg.matrix_power(E - lam * np.eye(n), n)
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv <= tol * _scale(E) ** n))


def _coalesced_vector(E: np.ndarray, lam: complex, order: int, fallback: np.ndarray) -> np.ndarray:
    if order < 2:
        v = fallback
    else:
        M = E.astype(complex) - lam * np.eye(3)
        U, _, _ = np.linalg.svd(np.linalg.matrix_power(M, order - 1))
        v = U[:, 0]
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def characterize(E, params: Sequence[float], tol: float = ORDER_TOL, gap_tol: float = GAP_TOL,
                 bracket=None) -> EPRecord:
    """Describe the closest eigenvalue cluster of ``E`` as an EP or DP record."""
    rep = spectrum(E)
    w, vr = rep.eigenvalues, rep.right_eigenvectors
    i, j = _closest_pair(w)
    pair_gap = abs(w[i] - w[j])
    centre = 0.5 * (w[i] + w[j])
    radius = 2.0 * max(pair_gap, np.sqrt(tol * _scale(rep.matrix)))
    cluster = sorted({i, j} | {k for k in range(3) if abs(w[k] - centre) <= radius})
    lam = complex(np.mean(w[cluster]))
    if abs(lam.imag) <= PHASE_TOL * _scale(rep.matrix):
        lam = complex(lam.real, 0.0)
    try:
        order = ep_order(rep.matrix, lam, tol)
        mult = algebraic_multiplicity(rep.matrix, lam, tol)
    except PreconditionError:
        order, mult = 1, 1
    gap = min(sine_angle(vr[:, a], vr[:, b]) for a, b in itertools.combinations(cluster, 2))
    kind = Kind.EP if (gap <= gap_tol and order >= 2) else Kind.DP
    vec = _coalesced_vector(rep.matrix, lam, order, vr[:, cluster[0]])
    return EPRecord(
        params=tuple(float(x) for x in params),
        coalesced_eigenvalue=lam,
        order=order,
        multiplicity=max(mult, len(cluster)),
        min_rigidity=float(rep.rigidities[cluster].min()),
        eigenvector_gap=gap,
        kind=kind,
        eigenvector=vec,
        bracket=bracket,
        diagnostics={"pair_gap": float(pair_gap), "phase": str(rep.phase)},
    )


def phase_at(E, tol: float = PHASE_TOL) -> Phase:
    return spectrum(E, tol).phase


def _bisect_labels(label: Callable[[float], Phase], lo: float, hi: float, lab_lo: Phase, tol: float):
    """Shrink [lo, hi] while ``label(lo) == lab_lo`` and ``label(hi) != lab_lo``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if label(mid) == lab_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def locate_transition(label: Callable[[float], Phase], lo: float, hi: float, tol: float,
                      plateau_tol: float = 1e-6) -> tuple[float, float, float]:
    """Bisection on a phase label between two differently labelled ends.

    Returns ``(point, left, right)`` where ``[left, right]`` encloses the
    transition; a boundary band met on the way is bracketed on both sides
    and its centre returned.
    """
    lab_lo, lab_hi = label(lo), label(hi)
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        lab = label(mid)
        if lab is Phase.BOUNDARY and lab_lo is not Phase.BOUNDARY and lab_hi is not Phase.BOUNDARY:
            left, _ = _bisect_labels(label, a, mid, lab_lo, tol)
            _, right = _bisect_labels(lambda x: Phase.BOUNDARY if label(x) is not lab_hi else lab_hi,
                                      mid, b, Phase.BOUNDARY, tol)
            if right - left > plateau_tol:
                raise ConvergenceError(
                    f"boundary plateau of width {right - left:.3e} exceeds {plateau_tol:.1e}",
                    best=(left, right),
                )
            return 0.5 * (left + right), left, right
        if lab == lab_lo:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b), a, b


def _min_gap(E) -> float:
    w = np.linalg.eigvals(distortion_of(E))
    return min(abs(w[i] - w[j]) for i, j in itertools.combinations(range(3), 2))


def _crossing_search(dist: Callable[[float], np.ndarray], p_lo: float, p_hi: float, tol: float,
                     n_grid: int = 257):
    """Find an isolated eigenvalue crossing inside one phase, or None."""
    ps = np.linspace(p_lo, p_hi, n_grid)
    gaps = np.array([_min_gap(dist(p)) for p in ps])
    scale = max(1.0, max(np.linalg.norm(dist(p), 2) for p in (p_lo, p_hi)))
    floor = 1e-6 * scale
    if gaps[0] <= floor or gaps[-1] <= floor:
        return None
    k = int(np.argmin(gaps))
    a, b = ps[max(k - 1, 0)], ps[min(k + 1, n_grid - 1)]
    res = minimize_scalar(lambda p: _min_gap(dist(p)), bounds=(a, b), method="bounded",
                          options={"xatol": tol, "maxiter": 500})
    if res.fun > floor:
        return None
    return float(res.x)


def ep_locate_1d(family: Callable[[float], np.ndarray], p_lo: float = 0.0, p_hi: float = 1.0,
                 tol: float = 1e-12, phase_tol: float = PHASE_TOL) -> EPRecord:
    """Locate the phase transition of a one-parameter channel family.

    ``family(p)`` returns a superoperator or a 3x3 distortion matrix.  With
    different phases at the two ends the phase label is bisected down to
    ``tol``.  When both ends share a phase, an isolated eigenvalue crossing
    inside the interval is still reported (it comes back as a DP when the
    eigenvectors stay apart); with neither, PreconditionError is raised.
    """
    if not p_lo < p_hi:
        raise PreconditionError("empty parameter interval")

    def dist(p):
        return distortion_of(family(p))

    def label(p):
        return phase_at(dist(p), phase_tol)

    lab_lo, lab_hi = label(p_lo), label(p_hi)
    if Phase.BOUNDARY in (lab_lo, lab_hi):
        p = p_lo if lab_lo is Phase.BOUNDARY else p_hi
        return characterize(dist(p), (p,), bracket=(p, p))
    if lab_lo != lab_hi:
        p, left, right = locate_transition(label, p_lo, p_hi, tol)
        return characterize(dist(p), (p,), bracket=(left, right))
    p = _crossing_search(dist, p_lo, p_hi, tol)
    if p is None:
        raise PreconditionError("no phase change on interval")
    return characterize(dist(p), (p,), bracket=(p, p))


def track_branches(eigenvalues: np.ndarray) -> np.ndarray:
    """Reorder rows of an (n, 3) eigenvalue table into continuous branches.

    Each row is permuted to minimise the distance to the previous row.
    """
    w = np.array(eigenvalues, dtype=complex)
    perms = [list(p) for p in itertools.permutations(range(w.shape[1]))]
    for t in range(1, len(w)):
        prev = w[t - 1]
        best = min(perms, key=lambda p: np.sum(np.abs(w[t, p] - prev)))
        w[t] = w[t, best]
    return w
