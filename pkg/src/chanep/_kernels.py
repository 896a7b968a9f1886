"""Hot loops: batched cubic invariants and the CPTP maximum-likelihood solver.

Everything here is written in the numpy subset numba compiles, so the same
source runs jitted or, with ``CHANEP_PURE_NUMPY=1``, as ordinary numpy.
Choi matrices are 4x4, ordered input (x) output, trace 2.
"""
import numpy as np

from chanep._accel import HAVE_NUMBA, njit


# --- cubic invariants of 3x3 real matrices ------------------------------

@njit(cache=True)
def _charpoly3_loop(Es):
    n = Es.shape[0]
    out = np.empty((n, 3))
    for k in range(n):
        a = Es[k]
        tr = a[0, 0] + a[1, 1] + a[2, 2]
        minors = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
                  + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
                  + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        det = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
               - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
               + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
        out[k, 0] = -tr
        out[k, 1] = minors
        out[k, 2] = -det
    return out


def _charpoly3_numpy(Es):
    tr = np.trace(Es, axis1=1, axis2=2)
    tr2 = np.trace(Es @ Es, axis1=1, axis2=2)
    return np.stack([-tr, 0.5 * (tr * tr - tr2), -np.linalg.det(Es)], axis=1)


def charpoly3(Es: np.ndarray) -> np.ndarray:
    """Coefficients ``(b, c, d)`` of ``x^3 + b x^2 + c x + d`` for each matrix in a stack."""
    Es = np.ascontiguousarray(Es, dtype=np.float64).reshape(-1, 3, 3)
    if HAVE_NUMBA:
        return _charpoly3_loop(Es)
    return _charpoly3_numpy(Es)


def discriminant3(Es: np.ndarray) -> np.ndarray:
    """Cubic discriminant per matrix: > 0 three distinct real roots, < 0 a conjugate pair."""
    c = charpoly3(Es)
    b, cc, d = c[:, 0], c[:, 1], c[:, 2]
    return 18 * b * cc * d - 4 * b**3 * d + b * b * cc * cc - 4 * cc**3 - 27 * d * d


def depressed_invariants(Es: np.ndarray) -> np.ndarray:
    """``(P, Q)`` of the depressed cubic ``y^3 + P y + Q``; both vanish at a triple root."""
    c = charpoly3(Es)
    b, cc, d = c[:, 0], c[:, 1], c[:, 2]
    P = cc - b * b / 3.0
    Q = 2.0 * b**3 / 27.0 - b * cc / 3.0 + d
    return np.stack([P, Q], axis=1)


# --- CPTP maximum likelihood ------------------------------------------

@njit(cache=True)
def _ptrace_out(J):
    T = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            T[i, j] = J[2 * i, 2 * j] + J[2 * i + 1, 2 * j + 1]
    return T


@njit(cache=True)
def _lift_input(T):
    """``T (x) I2`` for a 2x2 ``T``."""
    X = np.zeros((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            X[2 * i, 2 * j] = T[i, j]
            X[2 * i + 1, 2 * j + 1] = T[i, j]
    return X


@njit(cache=True)
def _herm(X):
    return 0.5 * (X + X.conj().T)


@njit(cache=True)
def _proj_psd(X):
    w, V = np.linalg.eigh(_herm(X))
    w = np.maximum(w, 0.0)
    return _herm((V * w) @ V.conj().T)


@njit(cache=True)
def _proj_tp(X):
    T = _ptrace_out(X)
    T[0, 0] -= 1.0
    T[1, 1] -= 1.0
    return X - 0.5 * _lift_input(T)


@njit(cache=True)
def _tp_repair(J):
    """Congruence ``(T^-1/2 (x) I) J (T^-1/2 (x) I)`` making a PSD ``J`` exactly TP."""
    T = _herm(_ptrace_out(J))
    w, V = np.linalg.eigh(T)
    if w.min() <= 1e-14:
        # singular marginal: pull toward the completely depolarizing point first
        J = 0.999999 * J + 0.000001 * 0.5 * np.eye(4).astype(np.complex128)
        T = _herm(_ptrace_out(J))
        w, V = np.linalg.eigh(T)
    A = (V * (1.0 / np.sqrt(w))) @ V.conj().T
    L = _lift_input(A)
    return _herm(L @ J @ L.conj().T)


@njit(cache=True)
def project_cptp(X, max_alternations=100, tol=1e-12):
    """Dykstra alternation between the TP affine set and the PSD cone.

    The result is finished with a congruence that restores exact trace
    preservation without leaving the PSD cone, so it is always feasible.
    """
    y = _herm(X)
    p = np.zeros((4, 4), dtype=np.complex128)
    q = np.zeros((4, 4), dtype=np.complex128)
    for _ in range(max_alternations):
        a = _proj_tp(y + p)
        p = y + p - a
        b = _proj_psd(a + q)
        q = a + q - b
        move = np.sqrt(np.sum(np.abs(b - y) ** 2))
        y = b
        if move < tol:
            break
    return _tp_repair(_proj_psd(y))


@njit(cache=True)
def _probs(B, J):
    j = J.ravel()
    n = B.shape[0]
    p = np.empty(n)
    for k in range(n):
        s = 0.0 + 0.0j
        for m in range(16):
            s += B[k, m] * j[m]
        p[k] = s.real
    return p


@njit(cache=True)
def _nll(B, freqs, J):
    p = _probs(B, J)
    f = 0.0
    for k in range(p.shape[0]):
        if freqs[k] > 0.0:
            if p[k] <= 0.0:
                return np.inf
            f -= freqs[k] * np.log(p[k])
    return f


@njit(cache=True)
def _grad(A, B, freqs, J):
    p = _probs(B, J)
    G = np.zeros((4, 4), dtype=np.complex128)
    for k in range(p.shape[0]):
        if freqs[k] > 0.0:
            G -= (freqs[k] / p[k]) * A[k]
    return G


@njit(cache=True)
def pgd_mle(A, freqs, J0, max_iter=5000, rel_tol=1e-10, step=1.0, armijo=1e-4):
    """Projected gradient descent with Armijo backtracking on ``-sum f_k log tr(J A_k)``.

    :param A: (K, 4, 4) effect operators ``rho_prep^T (x) Pi_outcome``.
    :param freqs: (K,) observed relative frequencies.
    :param J0: feasible starting Choi matrix.
    :return: ``(J, objective_trace, iterations, converged)``.
    """
    K = A.shape[0]
    B = np.empty((K, 16), dtype=np.complex128)
    for k in range(K):
        B[k] = A[k].T.copy().ravel()
    J = J0.copy()
    f = _nll(B, freqs, J)
    trace = np.empty(max_iter + 1)
    trace[0] = f
    converged = False
    it = 0
    while it < max_iter:
        G = _grad(A, B, freqs, J)
        D = project_cptp(J - step * G) - J
        slope = np.sum(G.conj() * D).real
        if slope >= 0.0 or np.sqrt(np.sum(np.abs(D) ** 2)) < 1e-15:
            converged = True
            break
        beta = 1.0
        fn = _nll(B, freqs, J + beta * D)
        while fn > f + armijo * beta * slope and beta > 1e-20:
            beta *= 0.5
            fn = _nll(B, freqs, J + beta * D)
        if not fn <= f:
            converged = True
            break
        J = _herm(J + beta * D)
        it += 1
        trace[it] = fn
        rel = (f - fn) / max(abs(f), 1e-300)
        f = fn
        if rel <= rel_tol:
            converged = True
            break
    return J, trace[: it + 1].copy(), it, converged


# --- two-circuit template ---------------------------------------------------
# Fixed-order scalar loops: no BLAS and no vectorised reductions, so results do
# not depend on memory alignment and least-squares trajectories are repeatable.

@njit(cache=True)
def _u3(theta, phi, lam):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    g = np.empty((2, 2), dtype=np.complex128)
    g[0, 0] = c
    g[0, 1] = -np.exp(1j * lam) * s
    g[1, 0] = np.exp(1j * phi) * s
    g[1, 1] = np.exp(1j * (phi + lam)) * c
    return g


@njit(cache=True)
def _apply_1q(g, U, qubit):
    out = np.empty((4, 4), dtype=np.complex128)
    for s in range(2):
        for a in range(2):
            r = 2 * s + a
            for c in range(4):
                if qubit == 0:
                    out[r, c] = g[s, 0] * U[a, c] + g[s, 1] * U[2 + a, c]
                else:
                    out[r, c] = g[a, 0] * U[2 * s, c] + g[a, 1] * U[2 * s + 1, c]
    return out


@njit(cache=True)
def _swap_rows(U, i, j):
    out = U.copy()
    for c in range(4):
        out[i, c] = U[j, c]
        out[j, c] = U[i, c]
    return out


@njit(cache=True)
def template_superop(x):
    """Superoperator of the U3 / Ry-CX-Ry-CX / U3 template with the ancilla in ``|0>``.

    ``x = (theta1, phi1, lam1, alpha, beta, theta2, phi2, lam2)``.
    """
    U = np.zeros((4, 4), dtype=np.complex128)
    for k in range(4):
        U[k, k] = 1.0
    U = _apply_1q(_u3(x[0], x[1], x[2]), U, 0)
    U = _apply_1q(_u3(x[3], 0.0, 0.0), U, 1)
    U = _swap_rows(U, 2, 3)  # cx signal -> ancilla
    U = _apply_1q(_u3(x[4], 0.0, 0.0), U, 1)
    U = _swap_rows(U, 1, 3)  # cx ancilla -> signal
    U = _apply_1q(_u3(x[5], x[6], x[7]), U, 0)
    S = np.zeros((4, 4), dtype=np.complex128)
    for m in range(2):
        # Kraus operator K_m[i, j] = U[2 i + m, 2 j]
        for i in range(2):
            for j in range(2):
                kij = np.conj(U[2 * i + m, 2 * j])
                for k in range(2):
                    for l in range(2):
                        S[2 * i + k, 2 * j + l] += kij * U[2 * k + m, 2 * l]
    return S


@njit(cache=True)
def template_residual(x, target, paired):
    """Real and imaginary parts of ``average(template superops) - target``, flattened."""
    if paired:
        A = template_superop(x[:8])
    else:
        A = 0.5 * (template_superop(x[:8]) + template_superop(x[8:]))
    out = np.empty(32)
    for i in range(4):
        for j in range(4):
            d = A[i, j] - target[i, j]
            out[4 * i + j] = d.real
            out[16 + 4 * i + j] = d.imag
    return out
