import math

import numpy as np
import pytest
from scipy import special

from fas_keygen.channel import (
    SystemConfig,
    build_correlation,
    dbm_to_watts,
    iter_channel_batches,
    legitimate_budget,
    make_rng,
    path_loss,
    place_eve,
    sample_channels,
)
from fas_keygen.errors import ConfigError, DomainError


class TestCorrelation:
    def test_two_ports(self):
        corr = build_correlation(2, 0.5)
        assert corr.matrix[0, 1] == pytest.approx(special.j0(math.pi), abs=1e-12)
        assert corr.matrix[0, 1] == pytest.approx(-0.3042421776, abs=1e-9)

    def test_single_port(self):
        np.testing.assert_array_equal(build_correlation(1, 0.5).matrix, [[1.0]])

    def test_toeplitz_against_scipy(self):
        M, W = 32, 1.5
        corr = build_correlation(M, W)
        n = np.arange(M)
        ref = special.j0(2 * np.pi * np.abs(n[:, None] - n[None, :]) * W / (M - 1))
        np.testing.assert_allclose(corr.matrix, ref, atol=1e-10)
        np.testing.assert_array_equal(corr.matrix, corr.matrix.T)

    def test_lambda_max_decreases_with_aperture(self):
        lam = [build_correlation(32, W).lambda_max for W in (0.5, 1.0, 1.5, 2.0, 2.5)]
        assert all(a > b for a, b in zip(lam, lam[1:]))
        assert lam[0] == pytest.approx(21.8749, abs=1e-4)

    def test_read_only_and_cached(self):
        corr = build_correlation(8, 0.5)
        assert corr is build_correlation(8, 0.5)
        with pytest.raises(ValueError):
            corr.matrix[0, 0] = 2.0
        with pytest.raises(ValueError):
            corr.sqrt_factor[0, 0] = 2.0

    def test_restrict(self):
        corr = build_correlation(8, 0.5)
        sub = corr.restrict([1, 4, 6])
        np.testing.assert_array_equal(sub.matrix, corr.matrix[np.ix_([1, 4, 6], [1, 4, 6])])

    @pytest.mark.parametrize("M,W", [(0, 0.5), (4, 0.0), (4, -1.0), (2.5, 1.0)])
    def test_bad_arguments(self, M, W):
        with pytest.raises(DomainError):
            build_correlation(M, W)


class TestLinkBudget:
    def test_path_loss_value(self):
        assert path_loss(70, 1e-3, 2) == pytest.approx(1e-3 / 4900, rel=1e-15)

    def test_path_loss_rejects_short_links(self):
        with pytest.raises(DomainError):
            path_loss(0.5, 1e-3, 2)

    def test_iid_eve_mirrors_bob(self):
        cfg = SystemConfig(eve_mode="iid")
        budget = place_eve(cfg, None)
        assert budget.eve_pos == (-70.0, 0.0)
        assert budget.beta_ae == budget.beta_ab

    def test_correlated_eve_inside_disk(self):
        cfg = SystemConfig()
        rng = make_rng(5)
        for _ in range(500):
            b = place_eve(cfg, rng)
            assert math.dist(b.eve_pos, cfg.bob_pos) <= cfg.eve_disk_radius

    def test_correlated_eve_uniform_on_disk(self):
        # uniform on a disk => P(r <= R/2) = 1/4
        cfg = SystemConfig()
        rng = make_rng(6)
        radii = [math.dist(place_eve(cfg, rng).eve_pos, cfg.bob_pos) for _ in range(20000)]
        assert np.mean(np.array(radii) <= 5.0) == pytest.approx(0.25, abs=0.015)

    def test_budget_distances(self):
        b = legitimate_budget(SystemConfig(), (70.0, 10.0))
        assert b.d_ae == pytest.approx(math.hypot(70, 10))


class TestConfig:
    def test_table_defaults(self):
        cfg = SystemConfig()
        assert (cfg.M, cfg.N, cfg.W) == (32, 5, 0.5)
        assert cfg.P_A == pytest.approx(dbm_to_watts(20))
        assert cfg.sigma2 == pytest.approx(dbm_to_watts(-80))
        assert cfg.d_ab == 70.0
        assert cfg.gamma == pytest.approx(0.1 * math.sqrt(0.1 / 32))

    @pytest.mark.parametrize(
        "changes",
        [{"N": 40}, {"W": 0.0}, {"P_A": -1.0}, {"rho": 1.5}, {"eve_mode": "x"}, {"seed": -1}],
    )
    def test_invalid(self, changes):
        with pytest.raises(ConfigError):
            SystemConfig(**changes)


class TestSampling:
    def test_second_moments(self):
        corr = build_correlation(6, 0.5)
        budget = legitimate_budget(SystemConfig(), (75.0, 0.0))
        rho = 0.6
        draws = sample_channels(corr, budget, rho, 200_000, make_rng(1))
        emp_ab = draws.h_ab.T @ draws.h_ab.conj() / len(draws)
        emp_x = draws.h_ab.T @ draws.h_ae.conj() / len(draws)
        scale = np.max(corr.matrix)
        np.testing.assert_allclose(emp_ab / budget.beta_ab, corr.matrix, atol=0.01 * scale)
        cross = rho * math.sqrt(budget.beta_ab * budget.beta_ae) * corr.matrix
        np.testing.assert_allclose(emp_x, cross, atol=0.01 * math.sqrt(budget.beta_ab * budget.beta_ae))

    def test_deterministic(self):
        corr = build_correlation(4, 0.5)
        budget = legitimate_budget(SystemConfig(), (75.0, 0.0))
        a = sample_channels(corr, budget, 1.0, 10, make_rng(3))
        b = sample_channels(corr, budget, 1.0, 10, make_rng(3))
        np.testing.assert_array_equal(a.h_ab, b.h_ab)

    def test_batches_cover_count(self):
        corr = build_correlation(4, 0.5)
        budget = legitimate_budget(SystemConfig(), (75.0, 0.0))
        sizes = [len(d) for d in iter_channel_batches(corr, budget, 1.0, 25, 0, batch_size=10)]
        assert sizes == [10, 10, 5]
