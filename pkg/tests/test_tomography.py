import json

import numpy as np
import pytest

from chanep import channels as ch
from chanep.errors import ChannelError
from chanep.tomography import (
    SETTINGS,
    CountsTable,
    born_probabilities,
    exact_table,
    full_pipeline,
    linear_inversion,
    mle_cptp_fit,
    neg_log_likelihood,
    process_fidelity,
    simulate_experiment,
)


def test_eighteen_settings():
    assert len(SETTINGS) == 18 and len(set(SETTINGS)) == 18


def test_identity_z_plus_z_all_plus():
    t = simulate_experiment(ch.identity(), 500, 1)
    assert t.counts[("z+", "Z")] == (500, 0)


def test_e2_z_plus_probability():
    assert born_probabilities(ch.e2())[("z+", "Z")][0] == pytest.approx(0.25, abs=1e-15)


def test_counts_sum_to_shots():
    t = simulate_experiment(ch.e3(), 123, 4)
    assert all(sum(v) == 123 for v in t.counts.values())


def test_simulation_deterministic():
    a = simulate_experiment(ch.e1(), 1000, 7)
    b = simulate_experiment(ch.e1(), 1000, 7)
    assert a.counts == b.counts


def test_non_physical_rejected():
    bad = ch.affine_to_superop(ch.AffineBloch(2 * np.eye(3)))
    with pytest.raises(ChannelError):
        born_probabilities(bad)


def test_json_round_trip():
    t = simulate_experiment(ch.e2(), 64, 3)
    back = CountsTable.from_json(json.loads(json.dumps(t.to_json())))
    assert back.counts == t.counts and back.shots == 64 and back.seed == 3


def test_json_missing_setting():
    d = simulate_experiment(ch.e2(), 64, 3).to_json()
    del d["counts"]["x+/X"]
    with pytest.raises(ChannelError):
        CountsTable.from_json(d)


@pytest.mark.parametrize("S", [ch.e2(), ch.identity(), ch.e1(), ch.reset()])
def test_linear_inversion_exact(S):
    assert np.max(np.abs(linear_inversion(exact_table(S)) - S)) <= 1e-10


def test_linear_inversion_finite_shots_close():
    est = linear_inversion(simulate_experiment(ch.e2(), 20000, 0))
    assert np.max(np.abs(est - ch.e2())) < 0.05


def test_mle_exact_e2():
    rec = mle_cptp_fit(exact_table(ch.e2()))
    assert process_fidelity(rec.superop, ch.e2()) >= 1 - 1e-6
    assert rec.cptp.ok
    assert np.all(np.diff(rec.objective_trace) <= 1e-15)


def test_mle_feasible_at_ep():
    rec = mle_cptp_fit(simulate_experiment(ch.interpolate(ch.e1(), ch.e2(), 0.5), 4096, 11))
    assert rec.cptp.ok and rec.converged
    w = np.linalg.eigvalsh(rec.choi)
    assert w.min() >= -1e-9


def test_mle_pathological_table():
    counts = {k: (10, 0) for k in SETTINGS}
    rec = mle_cptp_fit(CountsTable(counts, 10, 0))
    assert np.all(np.isfinite(rec.superop)) and rec.cptp.ok


def test_nll_at_truth_below_depolarizing():
    t = simulate_experiment(ch.e1(), 2000, 2)
    assert neg_log_likelihood(t, ch.e1()) < neg_log_likelihood(t, ch.depolarizing(0.0))


def test_fidelity_self():
    assert process_fidelity(ch.e3(), ch.e3()) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_identity_vs_depolarizing():
    assert process_fidelity(ch.identity(), ch.depolarizing(0.0)) == pytest.approx(0.25, abs=1e-12)


def test_fidelity_linear_inversion_exact():
    assert process_fidelity(ch.e2(), linear_inversion(exact_table(ch.e2()))) >= 1 - 1e-9


def test_pipeline_exact_curves():
    for p in (0.0, 0.3, 0.8, 1.0):
        res = full_pipeline(ch.interpolate(ch.e1(), ch.e2(), p), None, None)
        lam = np.sqrt(complex(p / 2 - 0.25))
        assert np.min(np.abs(res.eigenvalues - lam)) < 1e-4
        assert res.fidelity > 1 - 1e-6


def test_pipeline_one_shot():
    res = full_pipeline(ch.identity(), 1, 0)
    assert res.reconstruction.cptp.ok


def test_pipeline_rejects_non_cp():
    with pytest.raises(ChannelError):
        full_pipeline(ch.affine_to_superop(ch.AffineBloch(np.diag([1.0, 1.0, -1.0]))), 10, 0)
