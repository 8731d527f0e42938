"""Tests for the statistical check layer.

Anchors used here:
  * Z_h has density h w^(h-1), so E[Z_h] = h/(1+h) and at h = 1 the
    exponential moment E[exp(Z)] equals e - 1.
  * the interval equilibrium second moment at beta = 1 is 5/9.
  * the rate of the cardioid density (1 + cos)/2pi at beta = 1, V = 0 is
    1/4 + (1 - log 2).
"""

import json
import math

import numpy as np
import pytest

from ggelab.cmv_core import NumericalError
from ggelab.equilibrium import GridDensity, minimize_interval, minimize_torus
from ggelab.ldp_lab import (CheckReport, FreeEnergyEstimate, RelationReport,
                            check_coupling_lemma, check_dos_relation,
                            check_exp_moment, check_free_energy_relation,
                            estimate_free_energy, rate_function_value)
from ggelab.potentials import Potential
from ggelab.sampling import McmcParams

COS = Potential("torus", cos=[0.0, 1.0])
CHEB1 = Potential("interval", cheb=[0.0, 0.3])


def torus_density(values_fn, m=2048):
    theta = -np.pi + (np.arange(m) + 0.5) * (2.0 * np.pi / m)
    vals = values_fn(theta)
    vals = vals / (vals.sum() * 2.0 * np.pi / m)
    return GridDensity("torus", theta, vals, np.full(m, 2.0 * np.pi / m))


class TestCouplingLemma:
    def test_bulk_zero_violations(self):
        rep = check_coupling_lemma(3.0, 0.5, 100000, rng=101)
        assert rep.passed
        assert rep.statistics["violations_alpha"] == 0
        assert rep.statistics["violations_rho"] == 0
        assert rep.statistics["violations_monotone"] == 0

    def test_increment_close_to_one(self):
        rep = check_coupling_lemma(3.0, 0.999, 20000, rng=102)
        assert rep.passed

    def test_small_nu(self):
        rep = check_coupling_lemma(2.0, 0.1, 20000, rng=103)
        assert rep.passed

    def test_explicit_monotone_pair(self):
        rep = check_coupling_lemma(3.0, 0.5, 30000, rng=104, h_values=(0.2, 0.7))
        assert rep.passed
        assert rep.parameters["h_values"] == [0.2, 0.7]

    def test_mean_of_bound_variable(self):
        # E[Z_h] = h/(1+h); sd(Z_0.5) = sqrt(1/5 - 1/9)
        rep = check_coupling_lemma(3.0, 0.5, 100000, rng=101)
        se = math.sqrt(0.5 / 2.5 - (1.0 / 3.0) ** 2) / math.sqrt(100000)
        assert abs(rep.statistics["mean_z"] - 1.0 / 3.0) < 4.0 * se

    def test_validation(self):
        with pytest.raises(ValueError):
            check_coupling_lemma(3.0, 0.5, 0)
        with pytest.raises(ValueError):
            check_coupling_lemma(3.0, 0.5, 100, h_values=(0.7, 0.2))

    def test_json_schema(self):
        rep = check_coupling_lemma(3.0, 0.3, 500, rng=9)
        doc = json.loads(rep.to_json())
        assert set(doc) == {"check", "parameters", "statistics", "pass", "warnings"}
        assert doc["check"] == "coupling_lemma"
        assert doc["pass"] is True


class TestExpMoment:
    def test_uniform_case_is_e_minus_one(self):
        rep = check_exp_moment((1.0,), 50000, rng=201)
        row = rep.statistics["rows"][0]
        assert row["exact"] == pytest.approx(math.e - 1.0, abs=1e-9)
        assert abs(row["z"]) <= 3.0

    def test_grid_with_uniform_bound(self):
        rep = check_exp_moment((0.01, 0.1, 0.5, 0.9), 50000, rng=202)
        assert rep.passed
        bound = rep.statistics["uniform_bound"]
        assert bound == max(r["exact"] for r in rep.statistics["rows"])
        assert bound < 2.0, f"uniform bound {bound} unexpectedly large"

    def test_exact_values_decrease_with_shrinking_h(self):
        rep = check_exp_moment((0.05, 0.3, 0.8), 5000, rng=203)
        exact = [r["exact"] for r in rep.statistics["rows"]]
        assert exact[0] < exact[1] < exact[2]

    def test_validation(self):
        with pytest.raises(ValueError):
            check_exp_moment((0.0,), 100)
        with pytest.raises(ValueError):
            check_exp_moment((1.2,), 100)
        with pytest.raises(ValueError):
            check_exp_moment((0.5,), 1)


class TestFreeEnergyEstimate:
    def test_zero_potential_all_kinds(self):
        for kind in ("al", "circular", "schur", "jacobi"):
            fe = estimate_free_energy(kind, None, 1.0)
            assert fe.value == 0.0 and fe.std_error == 0.0
            assert fe.method == "ThermoIntegration"

    def test_constant_potential_exact(self):
        fe = estimate_free_energy("al", Potential("torus", cos=[0.7]), 2.0)
        assert fe.value == 0.7 and fe.std_error == 0.0
        fe = estimate_free_energy("schur", Potential("interval", cheb=[-0.4]), 1.0)
        assert fe.value == -0.4 and fe.std_error == 0.0

    def test_grid_validation(self):
        with pytest.raises(ValueError, match="increasing"):
            estimate_free_energy("al", COS, 1.0, s_grid=(0.0, 0.5, 0.5, 1.0))
        with pytest.raises(ValueError, match="0 to 1"):
            estimate_free_energy("al", COS, 1.0, s_grid=(0.1, 1.0))
        with pytest.raises(ValueError, match="endpoints"):
            estimate_free_energy("al", COS, 1.0, s_grid=(1.0,))

    def test_domain_mismatch(self):
        with pytest.raises(ValueError, match="torus"):
            estimate_free_energy("al", CHEB1, 1.0)
        with pytest.raises(ValueError, match="interval"):
            estimate_free_energy("jacobi", COS, 1.0)

    def test_unknown_ensemble(self):
        with pytest.raises(ValueError, match="ensemble"):
            estimate_free_energy("toda", COS, 1.0)

    def test_negative_error_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            FreeEnergyEstimate(0.0, -1.0)
        with pytest.raises(ValueError, match="method"):
            FreeEnergyEstimate(0.0, 0.0, method="Jarzynski")

    def test_reproducible_under_seed(self):
        kw = dict(mcmc=McmcParams(sweeps=60), n=16, s_grid=(0.0, 0.5, 1.0))
        a = estimate_free_energy("al", COS, 1.0, rng=77, **kw)
        b = estimate_free_energy("al", COS, 1.0, rng=77, **kw)
        assert a.value == b.value and a.std_error == b.std_error

    def test_al_tilt_lowers_value(self):
        fe = estimate_free_energy("al", COS, 1.0, mcmc=McmcParams(sweeps=300),
                                  rng=11, n=64)
        assert fe.value < 0.0
        assert 0.0 < fe.std_error < 0.01
        assert fe.n_samples == 300 * len(fe.grid)

    def test_circular_matches_variational_value(self):
        # high-temperature scaling: MC at n = 32 against the minimized
        # functional; the finite-size allowance covers the 1/n bias
        eta = 0.2
        v = Potential("torus", cos=[0.0, 2.0 * eta])
        rho = minimize_torus(v, 1.0)
        from ggelab.equilibrium import free_energy_torus
        solver = free_energy_torus(rho, v, 1.0).total - math.log(2.0)
        assert solver == pytest.approx(-eta**2 / 2.0, abs=2.5 * eta**4)
        fe = estimate_free_energy("circular", v, 1.0,
                                  mcmc=McmcParams(sweeps=150), rng=17, n=32)
        assert abs(fe.value - solver) <= 3.0 * fe.std_error + 0.003

    def test_jacobi_runs(self):
        fe = estimate_free_energy("jacobi", CHEB1, 1.0,
                                  mcmc=McmcParams(sweeps=80), rng=14, n=16,
                                  s_grid=(0.0, 0.5, 1.0))
        assert fe.value < 0.0
        assert fe.std_error > 0.0

    def test_json_roundtrip(self):
        fe = estimate_free_energy("al", None, 1.0)
        doc = json.loads(fe.to_json())
        assert doc["check"] == "free_energy"
        assert doc["statistics"]["method"] == "ThermoIntegration"


class TestFreeEnergyRelation:
    def test_cos_potential_passes(self):
        rep = check_free_energy_relation(COS, 1.0, delta=0.1,
                                         mcmc=McmcParams(sweeps=500),
                                         rng=21, n=64)
        assert rep.passed, f"discrepancy {rep.statistics['discrepancy']}"
        assert rep.statistics["mc_value"] < 0.0
        assert rep.solver_residual >= 0.0
        assert rep.d_value == abs(rep.statistics["discrepancy"])

    def test_zero_potential_trivial(self):
        rep = check_free_energy_relation(None, 1.0, delta=0.1)
        assert rep.passed
        assert rep.d_value == 0.0

    def test_delta_validation(self):
        with pytest.raises(ValueError, match="delta"):
            check_free_energy_relation(COS, 1.0, delta=1.0)
        with pytest.raises(ValueError, match="delta"):
            check_free_energy_relation(COS, 1.0, delta=-0.1)
        with pytest.raises(ValueError, match="beta"):
            check_free_energy_relation(COS, 0.0)

    def test_halving_shrinks_quadratically(self):
        small = McmcParams(sweeps=50)
        r1 = check_free_energy_relation(COS, 1.0, delta=0.2, mcmc=small,
                                        rng=3, n=16)
        r2 = check_free_energy_relation(COS, 1.0, delta=0.1, mcmc=small,
                                        rng=4, n=16)
        g1 = r1.statistics["fd_value"] - r1.statistics["fd_value_half_delta"]
        g2 = r2.statistics["fd_value"] - r2.statistics["fd_value_half_delta"]
        ratio = g1 / g2
        assert 3.3 < ratio < 4.7, f"halving ratio {ratio} is not O(delta^2)"

    def test_json_schema(self):
        rep = check_free_energy_relation(None, 2.0, delta=0.5)
        doc = json.loads(rep.to_json())
        assert set(doc) == {"check", "parameters", "statistics", "pass", "warnings"}
        assert doc["check"] == "free_energy_relation"
        assert doc["statistics"]["d_value"] == 0.0


class TestDosRelation:
    def test_al_zero_potential_noise_floor(self):
        sweeps, n = 2000, 64
        rep = check_dos_relation("al", None, 1.0, n,
                                 mcmc=McmcParams(sweeps=sweeps), rng=31,
                                 threshold=3.0 / math.sqrt(sweeps * n))
        assert rep.passed, f"D = {rep.d_value} over {rep.threshold}"
        assert rep.solver_residual < 1e-10

    def test_al_tilted_moments(self):
        rep = check_dos_relation("al", COS, 1.0, 64,
                                 mcmc=McmcParams(sweeps=1500), rng=32)
        assert rep.passed
        zs = [row["z"] for row in rep.statistics["moments"]]
        assert max(abs(z) for z in zs) <= 3.0
        assert len(zs) == 8

    def test_al_asymmetric_potential(self):
        v = Potential("torus", cos=[0.0, 0.3], sin=[0.4])
        rep = check_dos_relation("al", v, 1.0, 64,
                                 mcmc=McmcParams(sweeps=1200), rng=7)
        assert rep.passed
        sin_targets = [row["target"] for row in rep.statistics["moments"]
                       if row["name"].startswith("sin")]
        assert max(abs(t) for t in sin_targets) > 0.01

    def test_schur_zero_potential(self):
        rep = check_dos_relation("schur", None, 1.0, 64,
                                 mcmc=McmcParams(sweeps=2000), rng=33)
        assert rep.passed
        row = rep.statistics["moments"][1]
        assert row["name"] == "x^2"
        # interval equilibrium second moment at beta = 1
        assert row["target"] == pytest.approx(5.0 / 9.0, abs=5e-4)

    def test_distance_shrinks_with_samples(self):
        d_small = check_dos_relation("al", None, 1.0, 64,
                                     mcmc=McmcParams(sweeps=400), rng=1).d_value
        d_large = check_dos_relation("al", None, 1.0, 64,
                                     mcmc=McmcParams(sweeps=6400), rng=101).d_value
        assert d_large < d_small
        ratio = d_small / d_large
        assert 2.0 < ratio < 8.0, f"scaling ratio {ratio} is far from 4"

    def test_threshold_semantics(self):
        rep = check_dos_relation("al", None, 1.0, 16,
                                 mcmc=McmcParams(sweeps=200), rng=41,
                                 threshold=1e-9)
        assert not rep.passed
        assert rep.d_value > rep.threshold

    def test_validation(self):
        with pytest.raises(ValueError, match="al and schur"):
            check_dos_relation("circular", None, 1.0, 16)
        with pytest.raises(ValueError, match="k_max"):
            check_dos_relation("al", None, 1.0, 16, k_max=2)
        with pytest.raises(ValueError, match="even"):
            check_dos_relation("al", None, 1.0, 15)
        with pytest.raises(ValueError, match="interval"):
            check_dos_relation("schur", COS, 1.0, 16)

    def test_json_schema(self):
        rep = check_dos_relation("al", None, 1.0, 16,
                                 mcmc=McmcParams(sweeps=100), rng=2)
        doc = json.loads(rep.to_json())
        assert set(doc) == {"check", "parameters", "statistics", "pass", "warnings"}
        assert doc["parameters"]["ensemble"] == "al"
        assert "d_value" in doc["statistics"]
        assert "solver_residual" in doc["statistics"]

    def test_negative_d_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            RelationReport("x", 1.0, None, -0.1, 10, None, 0.02, False, {}, {})


class TestRateFunction:
    def test_minimizer_gives_zero(self):
        rho = minimize_torus(COS, 1.0)
        assert rate_function_value(rho, COS, 1.0, side="circular") == 0.0

    def test_cardioid_value(self):
        # V = 0, beta = 1: rate = 1/4 + integral of log(2 pi rho) d mu
        card = torus_density(lambda th: 1.0 + np.cos(th))
        val = rate_function_value(card, None, 1.0)
        assert val == pytest.approx(0.25 + 1.0 - math.log(2.0), abs=1e-4)

    def test_uniform_pays_for_potential(self):
        unif = torus_density(lambda th: np.ones_like(th))
        assert rate_function_value(unif, COS, 1.0) > 0.01

    def test_midpoint_convexity(self):
        a = torus_density(lambda th: 1.0 + 0.8 * np.cos(th))
        b = torus_density(lambda th: 1.0 + 0.8 * np.cos(2.0 * th))
        mix = GridDensity("torus", a.nodes, 0.5 * (a.values + b.values),
                          a.weights)
        ra = rate_function_value(a, COS, 1.0)
        rb = rate_function_value(b, COS, 1.0)
        rm = rate_function_value(mix, COS, 1.0)
        assert rm <= 0.5 * (ra + rb) + 1e-12

    def test_interval_minimizer_gives_zero(self):
        rho = minimize_interval(CHEB1, 1.0)
        assert rate_function_value(rho, CHEB1, 1.0, side="jacobi") == 0.0

    def test_interval_cross_potential_positive(self):
        other = Potential("interval", cheb=[0.0, -0.6])
        rho = minimize_interval(other, 1.0)
        assert rate_function_value(rho, CHEB1, 1.0, side="jacobi") > 1e-4

    def test_validation(self):
        rho = minimize_torus(COS, 1.0)
        with pytest.raises(ValueError, match="interval"):
            rate_function_value(rho, CHEB1, 1.0, side="jacobi")
        with pytest.raises(ValueError, match="side"):
            rate_function_value(rho, COS, 1.0, side="coulomb")
        with pytest.raises(ValueError, match="beta"):
            rate_function_value(rho, COS, 0.0)
