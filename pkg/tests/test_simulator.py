import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qcert.simulator as sim
from conftest import FIG1, HADAMARD, KET0, KET1, PLUS, haar, rstate, seeds
from qcert.config import ValidationError, tol
from qcert.linalg import Effect
from qcert.povm import PovmCertProblem, assemble_povm_strategy
from qcert.simulator import SimReport, brute_force_best_p2, exact_errors, run_protocol
from qcert.states import StateCertProblem, StateStrategy, optimal_state_measurement, p2_states
from qcert.unitary import UnitaryCertProblem, optimal_unitary_strategy

FIG1_P2 = (0.5 * math.sqrt(0.95) - math.sqrt(0.75) * math.sqrt(0.05)) ** 2
HAD_P2 = (math.sqrt(0.95) - math.sqrt(0.05)) ** 2 / 2


@pytest.fixture(scope="module")
def fig1():
    prob = UnitaryCertProblem(FIG1, 0.05)
    return prob, optimal_unitary_strategy(prob)


@pytest.fixture(scope="module")
def hadamard():
    prob = PovmCertProblem(HADAMARD, 0.05)
    return prob, assemble_povm_strategy(prob)


class TestExactErrors:
    def test_orthogonal_states(self):
        prob = StateCertProblem(KET0, KET1, 0.1)
        strat = StateStrategy(Effect(np.diag([1.0, 0.0])), 0.0, 0.0)
        assert exact_errors(prob, strat) == (0.0, 0.0)

    def test_fig1(self, fig1):
        p1, p2 = exact_errors(*fig1)
        assert p1 == pytest.approx(0.05, abs=tol().prob)
        assert p2 == pytest.approx(FIG1_P2, abs=tol().prob)

    def test_hadamard(self, hadamard):
        p1, p2 = exact_errors(*hadamard)
        assert p1 <= 0.05 + tol().prob
        assert p2 == pytest.approx(HAD_P2, abs=tol().prob)

    def test_dimension_mismatch(self):
        prob = StateCertProblem(KET0, KET1, 0.1)
        with pytest.raises(ValidationError):
            exact_errors(prob, StateStrategy(Effect(np.eye(3)), 0.0, 0.0))

    def test_strategy_type_checked(self, fig1):
        with pytest.raises(ValidationError):
            exact_errors(StateCertProblem(KET0, KET1, 0.1), fig1[1])

    @given(seeds, st.integers(2, 4), st.floats(0, 1))
    def test_state_oracle_agreement(self, seed, d, delta):
        prob = StateCertProblem(rstate(d, seed), rstate(d, seed + 1), delta, copies=1 + seed % 2)
        s = optimal_state_measurement(prob)
        p1, p2 = exact_errors(prob, s)
        assert p1 == pytest.approx(s.p1, abs=tol().prob)
        assert p2 == pytest.approx(s.p2, abs=tol().prob)

    @given(seeds, st.integers(2, 4), st.floats(0, 1))
    def test_unitary_oracle_agreement(self, seed, d, delta):
        prob = UnitaryCertProblem(haar(d, seed), delta)
        s = optimal_unitary_strategy(prob)
        p1, p2 = exact_errors(prob, s)
        assert p1 == pytest.approx(s.p1, abs=tol().prob)
        assert p2 == pytest.approx(s.p2, abs=tol().prob)

    @given(seeds, st.floats(0, 1))
    @settings(max_examples=15)
    def test_povm_oracle_agreement(self, seed, delta):
        prob = PovmCertProblem(haar(2, seed), delta)
        s = assemble_povm_strategy(prob)
        p1, p2 = exact_errors(prob, s)
        assert p1 == pytest.approx(s.p1, abs=tol().prob)
        assert p2 == pytest.approx(s.p2, abs=tol().prob)


class TestRunProtocol:
    def test_type_one_rate(self):
        prob = StateCertProblem(KET0, PLUS, 0.05)
        s = optimal_state_measurement(prob)
        r = run_protocol(prob, s, 10**6, 11, truth="h0")
        assert abs(r.empirical_p1 - 0.05) <= 4 * math.sqrt(0.05 * 0.95 / 10**6)
        assert r.empirical_p2 is None and r.ci_halfwidth_p2 is None

    def test_zero_error_under_h1(self):
        prob = StateCertProblem(KET0, KET1, 0.2)
        r = run_protocol(prob, optimal_state_measurement(prob), 100_000, 3, truth="h1")
        assert r.empirical_p2 == 0.0 and r.ci_halfwidth_p2 == 0.0

    def test_replay(self, hadamard):
        a = run_protocol(*hadamard, 50_000, 99)
        b = run_protocol(*hadamard, 50_000, 99)
        assert a == b
        assert json.dumps(a.to_json()) == json.dumps(b.to_json())

    def test_seed_matters(self, hadamard):
        assert run_protocol(*hadamard, 50_000, 1) != run_protocol(*hadamard, 50_000, 2)

    def test_chunking_invariance(self, hadamard, monkeypatch):
        whole = run_protocol(*hadamard, 10_001, 5)
        monkeypatch.setattr(sim, "_CHUNK", 64)
        assert run_protocol(*hadamard, 10_001, 5) == whole

    def test_prefix_consistency(self):
        # shot k draws from a fixed stream position, so a shorter run is a prefix
        shots = 4096
        a = sim._count_accepts(np.array([1.0]), np.array([0.3]), shots, 8, 1)
        b = sim._count_accepts(np.array([1.0]), np.array([0.3]), shots + 2, 8, 1)
        assert b - a in (0, 1, 2)

    def test_report_fields(self, fig1):
        r = run_protocol(*fig1, 1000, 2**64 - 1)
        obj = r.to_json()
        assert obj["generator"].startswith("numpy.random.Philox")
        assert obj["seed"] == 2**64 - 1
        assert obj["ci_halfwidth_p1"] == pytest.approx(4 * math.sqrt(r.empirical_p1 * (1 - r.empirical_p1) / 1000))

    @pytest.mark.parametrize("kwargs", [dict(shots=0, seed=1), dict(shots=10, seed=-1),
                                        dict(shots=10, seed=2**64), dict(shots=10, seed=1, truth="x")])
    def test_validation(self, fig1, kwargs):
        with pytest.raises(ValidationError):
            run_protocol(*fig1, **kwargs)

    def test_ci_soundness(self, fig1, hadamard):
        for inst in (fig1, hadamard):
            ok = sum(run_protocol(*inst, 100_000, seed).contains() for seed in range(100))
            assert ok >= 99

    def test_sim_report_contains(self):
        good = SimReport(0.1, 0.2, 100, 0.1, 0.2, 0.01, 0.01, 0)
        bad = SimReport(0.1, 0.2, 100, 0.1, 0.25, 0.01, 0.01, 0)
        assert good.contains() and not bad.contains()


class TestBruteForce:
    def test_orthogonal(self):
        assert brute_force_best_p2(KET0, KET1, 0.1) == pytest.approx(0, abs=1e-12)

    def test_half_overlap(self):
        v = brute_force_best_p2(KET0, PLUS, 0.05, 1e-4)
        assert 0 <= v - HAD_P2 < 1e-4

    def test_delta_one(self):
        assert brute_force_best_p2(rstate(2, 1), rstate(2, 2), 1.0) == 0.0

    def test_qubit_only(self):
        with pytest.raises(ValidationError):
            brute_force_best_p2(rstate(3, 1), rstate(3, 2), 0.1)

    def test_refinement_closes_gap(self):
        psi, phi = rstate(2, 5), rstate(2, 6)
        exact = p2_states(abs(np.vdot(psi, phi)), 0.2)
        coarse = brute_force_best_p2(psi, phi, 0.2, 1e-2) - exact
        fine = brute_force_best_p2(psi, phi, 0.2, 1e-5) - exact
        assert -1e-6 <= fine <= coarse
        assert fine < 1e-5

    @given(seeds, st.floats(0, 1))
    @settings(max_examples=30)
    def test_dominance(self, seed, delta):
        psi, phi = rstate(2, seed), rstate(2, seed + 1)
        v = brute_force_best_p2(psi, phi, delta, 1e-3)
        assert v >= p2_states(min(1.0, abs(np.vdot(psi, phi))), delta) - 1e-6
