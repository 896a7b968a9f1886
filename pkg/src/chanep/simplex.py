"""Three-channel interpolation: phase diagrams, EP lines and the EP3 search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, least_squares, minimize, minimize_scalar

from chanep import channels as ch
from chanep._kernels import depressed_invariants, discriminant3
from chanep.errors import ChannelError, ConvergenceError, PreconditionError
from chanep.spectral import (
    PHASE_TOL,
    EPRecord,
    Phase,
    characterize,
    ep_order,
    locate_transition,
    spectrum,
    track_branches,
)

CENTROID = (1 / 3, 1 / 3, 1 / 3)


def distortions(channels: Sequence, check: bool = True) -> np.ndarray:
    """Stack of the three distortion matrices, after a CPTP check."""
    if len(channels) != 3:
        raise PreconditionError("need exactly three channels")
    out = []
    for k, c in enumerate(channels):
        c = np.asarray(c)
        if c.shape == (3, 3):
            out.append(c.astype(float))
            continue
        if check and not ch.check_cptp(c).ok:
            raise ChannelError(f"channel {k + 1} is not CPTP")
        out.append(ch.distortion_of(c))
    return np.array(out)


def mixed_distortion(D: np.ndarray, a: Sequence[float]) -> np.ndarray:
    return np.tensordot(np.asarray(a, dtype=float), D, axes=1)


def validate_point(a: Sequence[float], strict: bool = False) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (3,) or abs(a.sum() - 1.0) > 1e-12:
        raise PreconditionError(f"{a} is not a barycentric point")
    if strict and np.any(a <= 0):
        raise PreconditionError(f"{a} is not strictly inside the simplex")
    if np.any(a < -1e-12):
        raise PreconditionError(f"{a} lies outside the simplex")
    return a


# --- EP3 ----------------------------------------------------------------

def triple_gap(E: np.ndarray) -> float:
    """Sum of squared pairwise eigenvalue distances; zero exactly at a triple root."""
    w = np.linalg.eigvals(E)
    return float(sum(abs(w[i] - w[j]) ** 2 for i, j in itertools.combinations(range(3), 2)))


def _bary(x) -> np.ndarray:
    return np.array([x[0], x[1], 1.0 - x[0] - x[1]])


def ep3_search(channels: Sequence, seed: Sequence[float] | None = None, max_iter: int = 2000,
               objective_tol: float = 1e-8, interior_margin: float = 1e-6) -> EPRecord:
    """Locate a triple coalescence of the interpolated distortion matrix.

    Starts from ``seed`` (the centroid by default) and, when that run ends
    on the boundary or at a lower-order coalescence, from a ring of interior
    seeds.  Raises ConvergenceError carrying the best iterate when no start
    yields an interior point of Jordan order 3.
    """
    D = distortions(channels)
    seeds = [np.asarray(CENTROID if seed is None else seed, dtype=float)]
    if seed is None:
        R = 6
        seeds += [np.array([i, j, R - i - j]) / R for i in range(1, R) for j in range(1, R - i)
                  if (i, j) != (2, 2)]
    best = None
    for s in seeds:
        try:
            return _ep3_from_seed(D, s, max_iter, objective_tol, interior_margin)
        except ConvergenceError as err:
            if best is None or err.best["objective"] < best["objective"]:
                best = err.best
            last = err
    raise ConvergenceError(str(last), best=best)


def _ep3_from_seed(D, seed, max_iter, objective_tol, interior_margin) -> EPRecord:
    """Nelder-Mead on the triple-gap objective over two free coordinates,
    then a least-squares polish of the depressed-cubic invariants."""
    seed = validate_point(seed, strict=True)

    def objective(x):
        a = _bary(x)
        if np.any(a < 0):
            return 1e3 * (1.0 + float(np.sum(np.clip(-a, 0, None))))
        return triple_gap(mixed_distortion(D, a))

    x0 = seed[:2]
    step = 0.5 * float(seed.min())
    simplex0 = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex0, "xatol": 1e-12, "fatol": 1e-16,
                            "maxiter": max_iter, "maxfev": 2 * max_iter})
    x = res.x

    def invariants(x):
        a = _bary(x)
        return depressed_invariants(mixed_distortion(D, a)[None])[0]

    pol = least_squares(invariants, x, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    if np.all(_bary(pol.x) > 0) and objective(pol.x) <= objective(x):
        x = pol.x
    a = _bary(x)
    best = {"point": a.tolist(), "objective": objective(x)}
    if np.any(a <= interior_margin):
        raise ConvergenceError("search left the simplex interior", best=best)
    E = mixed_distortion(D, a)
    if objective(x) > objective_tol:
        raise ConvergenceError(f"no triple coalescence found (objective {objective(x):.3e})", best=best)
    lam = np.trace(E) / 3.0
    try:
        order = ep_order(E, lam)
    except PreconditionError:
        order = 0
    if order != 3:
        raise ConvergenceError(f"triple eigenvalue has Jordan order {order}, not 3", best=best)
    rec = characterize(E, a)
    return EPRecord(
        params=tuple(a),
        coalesced_eigenvalue=complex(lam.real, 0.0),
        order=3,
        multiplicity=3,
        min_rigidity=rec.min_rigidity,
        eigenvector_gap=rec.eigenvector_gap,
        kind=rec.kind,
        eigenvector=rec.eigenvector,
        diagnostics={"objective": objective(x), "nelder_mead_iterations": int(res.nit)},
    )


# --- slices -------------------------------------------------------------

@dataclass
class SliceTable:
    coords: np.ndarray  # (n, 3) barycentric points
    params: np.ndarray  # (n,) swept coordinate
    eigenvalues: np.ndarray  # (n, 3), branch tracked
    phases: list


def _slice_points(fixed, sweep, ts):
    fi, fv = fixed
    si = sweep[0]
    if fi == si or not {fi, si} <= {0, 1, 2}:
        raise PreconditionError("fixed and swept coordinates must be two different indices in 0..2")
    oi = 3 - fi - si
    ts = np.asarray(ts, dtype=float)
    pts = np.zeros((len(ts), 3))
    pts[:, fi] = fv
    pts[:, si] = ts
    pts[:, oi] = 1.0 - fv - ts
    return pts


def _check_slice(fixed, sweep):
    fi, fv = fixed
    _, lo, hi, n = sweep
    if n < 2:
        raise PreconditionError("a slice needs at least two points")
    if not (0.0 <= fv <= 1.0) or lo < -1e-12 or hi > 1.0 - fv + 1e-12 or not lo < hi:
        raise PreconditionError(f"slice exits the simplex: fixed={fv}, sweep=[{lo}, {hi}]")


def slice_sweep(channels, fixed: tuple[int, float], sweep: tuple[int, float, float, int],
                tol: float = PHASE_TOL) -> SliceTable:
    """Eigenvalues and phases along a line of constant ``a[fixed[0]]``.

    ``sweep = (index, lo, hi, n)``; the third coordinate takes up the rest.
    """
    _check_slice(fixed, sweep)
    D = distortions(channels)
    ts = np.linspace(sweep[1], sweep[2], int(sweep[3]))
    pts = _slice_points(fixed, sweep, ts)
    reports = [spectrum(mixed_distortion(D, a), tol) for a in pts]
    w = track_branches(np.array([r.eigenvalues for r in reports]))
    return SliceTable(pts, ts, w, [r.phase for r in reports])


def slice_coalescences(channels, fixed: tuple[int, float], sweep: tuple[int, float, float, int],
                       merge_tol: float = 1e-3) -> list[EPRecord]:
    """Eigenvalue coalescences along a slice, from zeros of the cubic discriminant.

    Sign changes on the sweep grid are refined by Brent's method.  Local
    extrema of the discriminant that approach zero between grid points are
    refined too, so windows narrower than the grid are not missed.  Zeros
    closer than ``merge_tol`` are reported as one event with
    ``diagnostics["merged"]`` counting them.
    """
    _check_slice(fixed, sweep)
    D = distortions(channels)

    def disc(t):
        a = _slice_points(fixed, sweep, np.atleast_1d(t))
        return discriminant3(np.einsum("ni,ijk->njk", a, D))

    ts = np.linspace(sweep[1], sweep[2], int(sweep[3]))
    d = disc(ts)
    scale = max(float(np.max(np.abs(d))), 1e-300)
    f = lambda t: float(disc(t)[0])
    roots = []
    for k in range(len(ts) - 1):
        if d[k] == 0.0:
            roots.append(ts[k])
        elif d[k] * d[k + 1] < 0:
            roots.append(brentq(f, ts[k], ts[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if d[-1] == 0.0:
        roots.append(ts[-1])
    for k in range(1, len(ts) - 1):
        for sgn in (1.0, -1.0):
            # a same-signed local extremum that may dip through zero
            if sgn * d[k] < 0 and sgn * d[k] >= sgn * d[k - 1] and sgn * d[k] >= sgn * d[k + 1]:
                r = minimize_scalar(lambda t: -sgn * f(t), bounds=(ts[k - 1], ts[k + 1]),
                                    method="bounded", options={"xatol": 1e-14})
                t_ext, v_ext = float(r.x), f(float(r.x))
                if sgn * v_ext > 0:
                    roots.append(brentq(f, ts[k - 1], t_ext, xtol=1e-15))
                    roots.append(brentq(f, t_ext, ts[k + 1], xtol=1e-15))
                elif abs(v_ext) <= 1e-14 * scale:
                    roots.append(t_ext)
    roots = sorted(set(float(r) for r in roots))
    groups: list[list[float]] = []
    for r in roots:
        if groups and r - groups[-1][-1] <= merge_tol:
            groups[-1].append(r)
        else:
            groups.append([r])
    events = []
    for g in groups:
        recs = []
        for t in g:
            a = _slice_points(fixed, sweep, [t])[0]
            recs.append(characterize(mixed_distortion(D, a), a))
        k = max(range(len(g)), key=lambda i: (recs[i].order, -recs[i].eigenvector_gap))
        rec = recs[k]
        rec.diagnostics.update({"merged": len(g), "roots": g, "swept": g[k]})
        events.append(rec)
    return events


# --- phase diagram ------------------------------------------------------

@dataclass
class PhaseDiagram:
    resolution: int
    points: np.ndarray  # (N, 3)
    phases: list
    min_rigidity: np.ndarray
    boundary_points: np.ndarray  # (M, 3) refined transition points
    ep_lines: list = field(default_factory=list)  # list of (k, 3) arrays
    ep3: EPRecord | None = None
    wide_bands: list = field(default_factory=list)  # widths of boundary bands kept by centre

    def csv_rows(self):
        for a, ph, r in zip(self.points, self.phases, self.min_rigidity):
            yield (a[0], a[1], a[2], str(ph), r)

    def sidecar(self) -> dict:
        return {
            "resolution": self.resolution,
            "ep_lines": [line.tolist() for line in self.ep_lines],
            "boundary_points": self.boundary_points.tolist(),
            "ep3": None if self.ep3 is None else self.ep3.to_dict(),
            "wide_boundary_bands": self.wide_bands,
        }


def lattice(resolution: int) -> tuple[list[tuple[int, int]], np.ndarray]:
    idx = [(i, j) for j in range(resolution + 1) for i in range(resolution + 1 - j)]
    pts = np.array([[i, j, resolution - i - j] for i, j in idx], dtype=float) / resolution
    return idx, pts


def _triangles(R: int):
    for j in range(R):
        for i in range(R - j):
            yield (i, j), (i + 1, j), (i, j + 1)
            if i + j <= R - 2:
                yield (i + 1, j), (i, j + 1), (i + 1, j + 1)


def _polylines(segments: list[tuple]) -> list[list]:
    """Chain undirected segments between hashable nodes into ordered paths."""
    adj: dict = {}
    for u, v in segments:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen = set()
    lines = []
    starts = [n for n in adj if len(adj[n]) == 1] + list(adj)
    for s in starts:
        if s in seen:
            continue
        path = [s]
        seen.add(s)
        cur = s
        while True:
            nxt = [n for n in adj[cur] if n not in seen]
            if not nxt:
                break
            cur = nxt[0]
            seen.add(cur)
            path.append(cur)
        lines.append(path)
    return lines


def _free(a: np.ndarray) -> np.ndarray:
    return np.asarray(a)[..., :2]


def _extend_branch(D: np.ndarray, anchor: np.ndarray, ep3: np.ndarray, n_levels: int = 24) -> list[np.ndarray]:
    """Discriminant zeros tracing one branch from ``anchor`` down to the EP3.

    Levels run along the chord from the EP3 to the anchor.  On each level
    the zero nearest the chord is taken: near a cusp the branch through the
    anchor always lies closer to that chord than the opposite branch.
    """
    chord = _free(anchor) - _free(ep3)
    length = float(np.linalg.norm(chord))
    if length == 0:
        return []
    u = chord / length
    w = np.array([-u[1], u[0]])

    def disc_at(x):
        return float(discriminant3(mixed_distortion(D, _bary(x))[None])[0])

    out = []
    for s in length * np.geomspace(0.9, 1e-4, n_levels):
        base = _free(ep3) + s * u
        rs = np.linspace(-0.5 * s, 0.5 * s, 513)
        vals = np.array([disc_at(base + r * w) for r in rs])
        hits = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if len(hits) == 0:
            continue
        k = min(hits, key=lambda h: min(abs(rs[h]), abs(rs[h + 1])))
        r = brentq(lambda r: disc_at(base + r * w), rs[k], rs[k + 1], xtol=1e-15)
        a = _bary(base + r * w)
        if np.all(a >= 0):
            out.append(a)
    return out


def phase_diagram(channels, resolution: int = 200, tol: float = PHASE_TOL, refine_tol: float = 1e-8,
                  find_ep3: bool = True) -> PhaseDiagram:
    """Phase labels on the barycentric lattice ``a = k / resolution``.

    Lattice edges whose ends differ in being K-exact are bisected to
    ``refine_tol``; marching triangles chains the refined points into
    polylines.  When an EP3 is found, the line through it is split there
    into two branches, each traced onto the EP3 below grid resolution.
    """
    if resolution < 2:
        raise PreconditionError("resolution must be at least 2")
    D = distortions(channels)
    idx, pts = lattice(resolution)
    reports = [spectrum(mixed_distortion(D, a), tol) for a in pts]
    phases = [r.phase for r in reports]
    rig = np.array([float(r.rigidities.min()) for r in reports])
    where = {ij: n for n, ij in enumerate(idx)}
    exact = {ij: phases[n] is Phase.K_EXACT for ij, n in where.items()}

    def label(a):
        return spectrum(mixed_distortion(D, a), tol).phase

    cache: dict = {}
    wide: list = []

    def crossing(u, v):
        key = (u, v) if u < v else (v, u)
        if key not in cache:
            lo, hi = (u, v) if exact[u] else (v, u)
            a0, a1 = pts[where[lo]], pts[where[hi]]
            try:
                t, _, _ = locate_transition(lambda t: label(a0 + t * (a1 - a0)), 0.0, 1.0,
                                            tol=refine_tol * resolution,
                                            plateau_tol=1e-6 * resolution)
            except ConvergenceError as err:
                # wide boundary band, which happens next to the cusp: keep its centre
                left, right = err.best
                t = 0.5 * (left + right)
                wide.append(float((right - left) / resolution))
            cache[key] = a0 + t * (a1 - a0)
        return key

    segments = []
    for tri in _triangles(resolution):
        flags = [exact[v] for v in tri]
        if all(flags) or not any(flags):
            continue
        cut = [crossing(tri[i], tri[k]) for i, k in ((0, 1), (1, 2), (0, 2)) if flags[i] != flags[k]]
        segments.append((cut[0], cut[1]))
    lines = [np.array([cache[k] for k in path]) for path in _polylines(segments)]
    boundary = np.array([cache[k] for k in sorted(cache)]) if cache else np.zeros((0, 3))

    ep3 = None
    if find_ep3 and lines:
        seeds = [None]
        for line in lines:
            gaps = [triple_gap(mixed_distortion(D, a)) for a in line]
            seeds.extend(line[np.argsort(gaps)[:2]])
        for s in seeds:
            if s is not None and np.any(s <= 1e-9):
                continue
            try:
                ep3 = ep3_search(D, None if s is None else s / s.sum())
                break
            except ConvergenceError:
                continue
    if ep3 is not None:
        lines = _split_at_ep3(D, lines, np.array(ep3.params), resolution)
    return PhaseDiagram(resolution, pts, phases, rig, boundary, lines, ep3, wide_bands=wide)


def _split_at_ep3(D, lines, ep3, resolution, anchor_cells: float = 4.0):
    """Cut the line passing closest to the EP3 there and trace both halves onto it."""
    dists = [np.min(np.linalg.norm(line - ep3, axis=1)) for line in lines]
    n = int(np.argmin(dists))
    line = lines[n]
    k = int(np.argmin(np.linalg.norm(line - ep3, axis=1)))
    out = [l for i, l in enumerate(lines) if i != n]
    for half in (line[: k + 1], line[k:][::-1]):
        # anchor a few grid cells out, where the grid resolves the branch cleanly
        far = np.linalg.norm(half - ep3, axis=1) >= anchor_cells / resolution
        m = int(np.nonzero(far)[0][-1]) if far.any() else 0
        kept = half[: m + 1]
        ext = _extend_branch(D, kept[-1], ep3)
        pieces = [kept] + ([np.array(ext)] if ext else []) + [ep3[None]]
        merged = np.vstack(pieces)
        keep = np.r_[True, np.linalg.norm(np.diff(merged, axis=0), axis=1) > 1e-14]
        out.append(merged[keep])
    return out
