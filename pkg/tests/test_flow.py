import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

import gaussfluct as gf
from gaussfluct.flow import GaussianPair, flow_scan, write_flow_csv
from gaussfluct._linalg import AccuracyError


class TestFlowPoint:
    def test_time_zero(self, chain_model):
        fp = gf.flow_point(chain_model, 0.0)
        eye = np.eye(chain_model.dim)
        assert np.abs(fp.propagator - eye).max() < 1e-14
        assert np.abs(fp.covariance_t - chain_model.covariance).max() < 1e-14
        assert np.abs(fp.relative_T).max() < 1e-12

    def test_toy_covariance_closed_form(self, toy_model, toy_oracle):
        # D_t = I + lam * P_{phi_t} with phi_t = e^{tL} phi
        t = 3.0
        fp = gf.flow_point(toy_model, t)
        phi_t = fp.propagator @ toy_oracle.phi
        expected = np.eye(toy_model.dim) + toy_oracle.lam * np.outer(phi_t, phi_t)
        assert np.abs(fp.covariance_t - expected).max() < 1e-12

    def test_group_law(self, chain_model):
        for s, t in [(1.0, 2.0), (-5.0, 3.0), (4.0, 4.0), (60.0, 40.0), (-50.0, 50.0)]:
            lhs = gf.flow_point(chain_model, s + t).propagator
            rhs = gf.flow_point(chain_model, s).propagator @ gf.flow_point(chain_model, t).propagator
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_covariance_consistency(self, chain_model):
        fp = gf.flow_point(chain_model, 7.0)
        rebuilt = fp.propagator @ chain_model.covariance @ fp.propagator.T
        scale = np.abs(fp.covariance_t).max()
        assert np.abs(fp.covariance_t - rebuilt).max() < 1e-10 * scale

    def test_logdet_term_vanishes_under_g4(self, toy_model, chain_model):
        for model, ts in ((toy_model, (1.0, 5.0, 15.0)), (chain_model, (1.0, 5.0, 12.0))):
            for t in ts:
                assert abs(gf.flow_point(model, t).logdet_term) <= 1e-8

    def test_horizon_refusal(self, chain_model):
        with pytest.raises(AccuracyError):
            gf.flow_point(chain_model, 1e5)


class TestCocycle:
    def test_degenerate_times(self, chain_model):
        assert gf.cocycle_defect(chain_model, 0.0, 3.0) <= 1e-13
        assert gf.cocycle_defect(chain_model, 3.0, 0.0) <= 1e-13

    @pytest.mark.parametrize("s,t", [(5.0, 5.0), (1.0, -5.0), (-5.0, 20.0)])
    def test_chain_defect_small(self, chain_model, s, t):
        assert gf.cocycle_defect(chain_model, s, t) <= 1e-10

    def test_toy_defect_small(self, toy_model):
        assert gf.cocycle_defect(toy_model, 5.0, 5.0) <= 1e-10


class TestLogDensity:
    def test_time_zero_is_zero(self, chain_model):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(chain_model.dim)
        assert gf.log_density(chain_model, 0.0, x) == pytest.approx(0.0, abs=1e-12)

    def test_origin_gives_logdet_term(self, chain_model):
        t = 4.0
        fp = gf.flow_point(chain_model, t)
        x = np.zeros(chain_model.dim)
        assert gf.log_density(chain_model, t, x) == pytest.approx(fp.logdet_term, abs=1e-15)

    def test_matches_reversed_time_integral(self, chain_model):
        # ell_t(x) = -(x, B_{-t} x) - t*tr(D sigma) via the sigma integral
        t = 6.0
        b = gf.sigma_integral_matrix(chain_model, -t, steps=256)
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.standard_normal(chain_model.dim)
            lhs = gf.log_density(chain_model, t, x)
            rhs = -float(x @ (b.matrix @ x)) - t * gf.sigma_matrix(chain_model).trace_D_sigma
            assert lhs == pytest.approx(rhs, abs=1e-6)


class TestMeanEntropyProduction:
    def test_time_zero(self, chain_model):
        assert gf.mean_entropy_production(chain_model, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_equilibrium_vanishes(self, equilibrium_chain):
        for t in (1.0, 5.0, 9.0):
            assert abs(gf.mean_entropy_production(equilibrium_chain, t)) < 1e-10

    def test_chain_approaches_oracle(self, chain_mid):
        # omega_t(sigma) oscillates toward omega_+ with a slowly decaying envelope
        model, oracle = chain_mid
        devs = [abs(gf.mean_entropy_production(model, t) - oracle.omega_plus_sigma)
                for t in (20.0, 40.0)]
        assert devs[1] < devs[0]
        assert devs[1] <= 0.10 * oracle.omega_plus_sigma


class TestRelativeEntropy:
    def test_equal_covariances(self):
        d = np.diag([1.0, 2.0, 3.0])
        assert gf.relative_entropy(GaussianPair(d1=d, d2=d)) == pytest.approx(0.0, abs=1e-14)

    def test_scalar_case_against_quadrature(self):
        # Ent(N(0,2) | N(0,1)) by direct integration of -E_nu[log dnu/domega]
        val = gf.relative_entropy(GaussianPair(d1=np.eye(1), d2=2.0 * np.eye(1)))

        def integrand(x):
            ell = norm.logpdf(x, scale=math.sqrt(2.0)) - norm.logpdf(x, scale=1.0)
            return -ell * norm.pdf(x, scale=math.sqrt(2.0))

        oracle, _ = quad(integrand, -20, 20)
        assert val == pytest.approx(oracle, abs=1e-9)
        assert val == pytest.approx(-0.5 + 0.5 * math.log(2.0), abs=1e-12)

    def test_nonpositive_for_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            a = rng.standard_normal((n, n))
            b = rng.standard_normal((n, n))
            d1 = a @ a.T + 0.1 * np.eye(n)
            d2 = b @ b.T + 0.1 * np.eye(n)
            val = gf.relative_entropy(GaussianPair(d1=d1, d2=d2))
            assert val <= 1e-10
            if np.abs(d1 - d2).max() > 1e-12:
                assert val < 0.0


class TestEntropyBalance:
    def test_time_zero(self, chain_model):
        assert gf.entropy_balance_defect(chain_model, 0.0, 16) == pytest.approx(0.0, abs=1e-12)

    def test_equilibrium(self, equilibrium_chain):
        assert gf.entropy_balance_defect(equilibrium_chain, 5.0, 32) < 1e-10

    def test_chain_small_defect(self, chain_model):
        assert gf.entropy_balance_defect(chain_model, 10.0, 200) <= 1e-6

    def test_halving_steps_converged(self, chain_model):
        d1 = gf.entropy_balance_defect(chain_model, 2.0, 512)
        d2 = gf.entropy_balance_defect(chain_model, 2.0, 1024)
        assert abs(d1 - d2) < 1e-8

    def test_odd_steps_rejected(self, chain_model):
        with pytest.raises(ValueError):
            gf.entropy_balance_defect(chain_model, 1.0, 33)


def test_logdet_term_derivative_matches_trace():
    # d/dt [0.5 logdet(I + D T_t)] at t=0 equals -tr(D sigma); visible only
    # away from time reversal, where the term is not identically zero
    rng = np.random.default_rng(21)
    n = 12
    a = rng.standard_normal((n, n))
    gen = a - a.T - 0.8 * np.eye(n) - 0.2 * (a @ a.T) / n
    b = rng.standard_normal((n, n))
    cov = b @ b.T + n * np.eye(n)
    model = gf.Model(dim=n, generator=gen, covariance=cov)
    tr_d_sigma = gf.sigma_matrix(model).trace_D_sigma
    assert abs(tr_d_sigma) > 1e-3
    h = 1e-5
    deriv = (gf.flow_point(model, h).logdet_term - gf.flow_point(model, -h).logdet_term) / (2 * h)
    assert deriv == pytest.approx(-tr_d_sigma, rel=1e-6)


def test_flow_scan_csv(tmp_path, chain_model):
    rows = flow_scan(chain_model, [0.0, 1.0, 2.0], quad_steps=32)
    path = tmp_path / "scan.csv"
    write_flow_csv(path, rows)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,trace_Dt,lambda_min_Dt,lambda_max_Dt,mean_sigma,ent_balance_defect"
    assert len(lines) == 4
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 0.0
    assert first[1] == pytest.approx(np.trace(chain_model.covariance))
