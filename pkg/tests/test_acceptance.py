"""End-to-end acceptance checks, one test per criterion, each at its stated tolerance."""
import json
import subprocess
import sys
import time

import numpy as np
import pytest
from conftest import closed_form_E, closed_form_eigs, match_error

from chanep import channels as ch
from chanep.circuits import decompose, verify_decomposition
from chanep.simplex import ep3_search, phase_diagram, slice_coalescences
from chanep.spectral import Kind, ep_locate_1d, ep_order, sine_angle, spectrum
from chanep.tomography import exact_table, full_pipeline, linear_inversion

EP3_RATIO = np.array([10, 2 * np.sqrt(13), 3 * np.sqrt(3)])
EP3 = EP3_RATIO / EP3_RATIO.sum()


def family(p):
    return ch.interpolate(ch.e1(), ch.e2(), p)


def test_closed_form_spectrum(criterion):
    t0 = time.perf_counter()
    errs = [match_error(spectrum(ch.distortion_of(family(p))).eigenvalues, closed_form_eigs(p))
            for p in np.linspace(0.0, 1.0, 101)]
    dt = time.perf_counter() - t0
    # the channel route and the hand-written matrix must agree as well
    hand = max(np.max(np.abs(ch.distortion_of(family(p)) - closed_form_E(p))) for p in np.linspace(0, 1, 101))
    ok = max(errs) <= 1e-10 and dt < 1.0 and hand <= 1e-12
    assert criterion(1, ok, f"max eigenvalue error {max(errs):.2e} (tol 1e-10), {dt:.3f} s")


def test_ep2_location(criterion):
    t0 = time.perf_counter()
    rec = ep_locate_1d(family)
    dt = time.perf_counter() - t0
    v = np.asarray(rec.eigenvector, dtype=complex)
    angle = np.arcsin(min(1.0, sine_angle(v, np.array([0.0, 1.0, 1.0]))))
    ok = (abs(rec.params[0] - 0.5) <= 1e-9 and rec.kind is Kind.EP and rec.order == 2
          and angle <= 1e-6 and dt < 1.0)
    assert criterion(2, ok, f"p={rec.params[0]:.12f} kind={rec.kind.value} order={rec.order} "
                            f"angle={angle:.1e} {dt:.3f} s")


def test_jordan_oracle(criterion):
    t0 = time.perf_counter()
    E = ch.distortion_of(family(0.5))
    k = ep_order(E, 0.0)
    rank1 = np.linalg.matrix_rank(E)
    sq = float(np.max(np.abs(E @ E)))
    dt = time.perf_counter() - t0
    ok = k == 2 and rank1 == 1 and sq <= 1e-15 and dt < 1.0
    assert criterion(3, ok, f"ep_order={k}, rank(E)={rank1}, max|E^2|={sq:.1e}, {dt:.3f} s")


def test_ep3_location(fixtures, criterion):
    t0 = time.perf_counter()
    rec = ep3_search(fixtures)
    dt = time.perf_counter() - t0
    a = np.asarray(rec.params)
    err = float(np.max(np.abs(a - EP3)))
    D = [ch.distortion_of(S) for S in fixtures]
    k = ep_order(sum(w * d for w, d in zip(a, D)), rec.coalesced_eigenvalue)
    ok = err <= 2e-3 and k == 3 and dt < 30.0
    assert criterion(4, ok, f"a=({a[0]:.6f}, {a[1]:.6f}, {a[2]:.6f}) err={err:.1e} order={k} {dt:.2f} s")


@pytest.fixture(scope="module")
def diagram():
    fx = [ch.e1(), ch.e2(), ch.e3()]
    t0 = time.perf_counter()
    pd = phase_diagram(fx, resolution=200)
    return pd, time.perf_counter() - t0


def test_phase_diagram(diagram, criterion):
    pd, dt = diagram
    p_c = ep_locate_1d(family).params[0]
    edge_pt = np.array([1.0 - p_c, p_c, 0.0])
    ends = [line[i] for line in pd.ep_lines for i in (0, -1)]
    edge = min(float(np.max(np.abs(e - edge_pt))) for e in ends)
    ep3 = np.asarray(pd.ep3.params) if pd.ep3 is not None else np.full(3, np.nan)
    meet = [min(float(np.max(np.abs(line[i] - ep3))) for i in (0, -1)) for line in pd.ep_lines]
    ok = len(pd.ep_lines) == 2 and edge <= 1e-6 and max(meet, default=1.0) <= 1e-9 and dt < 60.0
    assert criterion(5, ok, f"{len(pd.ep_lines)} EP lines, edge offset {edge:.1e}, "
                            f"line-to-EP3 gap {max(meet, default=np.nan):.1e}, {dt:.1f} s")


@pytest.mark.parametrize("a2, expected", [(0.362, 2), (0.282, 2), (0.322, 1)])
def test_fixed_a2_slices(fixtures, criterion, a2, expected):
    ev = slice_coalescences(fixtures, (1, a2), (0, 0.0, 1.0 - a2, 1001), merge_tol=1e-3)
    locs = [round(e.params[0], 6) for e in ev]
    if expected == 2:
        ok = (len(ev) == 2 and all(e.order == 2 and e.kind is Kind.EP for e in ev)
              and abs(ev[0].params[0] - ev[1].params[0]) > 1e-3)
    else:
        ok = len(ev) == 1 and ev[0].diagnostics.get("merged", 1) >= 1
    assert criterion(6, ok, f"a2={a2}: {len(ev)} coalescence(s) at a1={locs} (want {expected})")


def test_cptp_validation(fixtures, criterion):
    rng = np.random.default_rng(7)
    mats = list(fixtures) + [ch.mix(fixtures, w) for w in rng.dirichlet(np.ones(3), 50)]
    reps = [ch.check_cptp(S) for S in mats]
    worst = min(r.min_choi_eigenvalue for r in reps)
    ok = all(r.ok for r in reps) and worst >= -1e-10
    assert criterion(7, ok, f"{len(reps)} channels, min Choi eigenvalue {worst:.1e}")


def test_decomposition_round_trip(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        S = family(p)
        d = decompose(S)
        worst = max(worst, verify_decomposition(S, d)["distance"])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 60.0
    assert criterion(8, ok, f"max Frobenius residual {worst:.1e} (tol 1e-8), {dt:.2f} s")


def test_exact_tomography(criterion):
    err = max(float(np.max(np.abs(linear_inversion(exact_table(S)) - S)))
              for S in (ch.random_cptp(s) for s in range(50)))
    assert criterion(9, err <= 1e-10, f"max reconstruction error {err:.1e} over 50 channels")


@pytest.fixture(scope="module")
def statistical_runs():
    t0 = time.perf_counter()
    runs = {}
    for p in np.linspace(0.0, 1.0, 11):
        S = family(p)
        runs[float(p)] = [full_pipeline(S, shots=4096, seed=seed) for seed in range(20)]
    return runs, time.perf_counter() - t0


def test_statistical_tomography_fidelity(statistical_runs, criterion):
    runs, dt = statistical_runs
    fids = [r.fidelity for rs in runs.values() for r in rs]
    feasible = all(ch.check_cptp(r.reconstruction.superop).ok for rs in runs.values() for r in rs)
    ok = float(np.median(fids)) >= 0.99 and feasible and dt < 300.0
    assert criterion("10a", ok, f"median fidelity {np.median(fids):.4f}, all CPTP={feasible}, {dt:.1f} s")


def test_statistical_tomography_eigenvalues(statistical_runs, criterion):
    runs, _ = statistical_runs
    # per p, the median over seeds of the optimally paired eigenvalue error
    errs = {p: float(np.median([match_error(r.eigenvalues, closed_form_eigs(p)) for r in rs]))
            for p, rs in runs.items()}
    worst = max(errs, key=errs.get)
    ok = max(errs.values()) <= 0.05
    assert criterion("10b", ok, f"worst median eigenvalue error {errs[worst]:.3f} at p={worst:.1f} (tol 0.05)")


def test_unit_disk(criterion):
    worst = max(float(np.max(np.abs(np.linalg.eigvals(ch.distortion_of(ch.random_cptp(s))))))
                for s in range(1000))
    assert criterion(11, worst <= 1 + 1e-10, f"max |eigenvalue| {worst:.6f} over 1000 channels")


_COMMANDS = [
    ("channels", "show", "E3"),
    ("sweep", "--points", "11", "--tomography", "--shots", "200", "--seed", "9"),
    ("ep-find", "--pair", "E1,E2"),
    ("ep-find", "--triple", "E1,E2,E3"),
    ("phase-diagram", "--resolution", "20"),
    ("decompose", "interp:0.75", "--seed", "2"),
    ("qpt", "E2", "--shots", "300", "--seed", "4"),
]


def test_cli_determinism(tmp_path, criterion):
    differ = []
    for j, argv in enumerate(_COMMANDS):
        outs = []
        for k in range(2):
            out = tmp_path / f"cmd{j}" / f"run{k}"
            out.mkdir(parents=True)
            # relative --out: the resolved config is recorded in every header
            r = subprocess.run([sys.executable, "-m", "chanep.cli", *argv, "--out", "result"],
                               capture_output=True, cwd=out)
            files = sorted((p.relative_to(out).as_posix(), p.read_bytes())
                           for p in out.rglob("*") if p.is_file())
            outs.append((r.returncode, r.stdout, files))
        if outs[0] != outs[1] or outs[0][0] != 0:
            differ.append(" ".join(argv))
    ok = not differ
    assert criterion(12, ok, f"{len(_COMMANDS)} commands rerun, mismatches: {json.dumps(differ)}")
