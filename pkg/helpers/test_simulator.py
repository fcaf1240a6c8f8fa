import math
import os
import tempfile
import unittest
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
import pandas as pd
from scipy import stats

from background_models import UniformDensity
from catalog import Catalog, Region
from config import TOHOKU_PARAMS
from etas_kernels import EtasParams, omori_survival
from simulator import (
    SimulationError,
    SimulationSpec,
    forecast_summary,
    make_synthetic_phi,
    radial_offset,
    sample_omori_interval,
    save_branching,
    simulate_catalog,
    simulate_forecast,
    synthetic_region,
    _EventPool,
    _spawn_offspring,
)

TOHOKU = EtasParams(mu_bar=0.325, **TOHOKU_PARAMS)


class TestSamplingLaws(unittest.TestCase):
    def test_radial_offset(self):
        """Inverse-CDF radial draws follow the power-law distance distribution"""
        self.assertEqual(float(radial_offset(0.0, 0.5, 1.8)), 0.0)
        d, q = 0.5, 1.8
        rng = np.random.default_rng(0)
        r = radial_offset(rng.random(100000), d, q)
        cdf = lambda x: 1.0 - (d / (np.square(x) + d)) ** (q - 1.0)
        self.assertGreater(stats.kstest(r, cdf).pvalue, 0.01)

    def test_omori_interval(self):
        c, p, lower, upper = 0.05, 1.3, 0.5, 20.0
        rng = np.random.default_rng(1)
        z = sample_omori_interval(np.full(50000, lower), np.full(50000, upper), c, p, rng)
        self.assertTrue(np.all((z >= lower) & (z <= upper)))
        s_low, s_high = omori_survival(lower, c, p), omori_survival(upper, c, p)
        cdf = lambda x: (s_low - omori_survival(x, c, p)) / (s_low - s_high)
        self.assertGreater(stats.kstest(z, cdf).pvalue, 0.01)

    def test_omori_untruncated(self):
        rng = np.random.default_rng(2)
        z = sample_omori_interval(np.zeros(50000), np.full(50000, np.inf), 1.0, 2.0, rng)
        # median of the p=2, c=1 law is 1
        self.assertAlmostEqual(float(np.median(z)), 1.0, delta=0.05)


class TestSyntheticBackgrounds(unittest.TestCase):
    def test_phi1(self):
        phi = make_synthetic_phi('phi1')
        self.assertAlmostEqual(phi.evaluate(0.0, 0.0), 1.0 / (2.0 * math.pi))

    def test_phi2_symmetric(self):
        phi = make_synthetic_phi('phi2')
        self.assertAlmostEqual(phi.evaluate(-1.0, -1.0), phi.evaluate(1.0, 1.0))
        self.assertGreater(phi.evaluate(1.0, 1.0), phi.evaluate(0.0, 0.0))

    def test_phi3_regression(self):
        """Least squares on fault-line draws recovers slope 2 and intercept 1"""
        phi = make_synthetic_phi('phi3')
        draws = phi.sample(100000, np.random.default_rng(3))
        slope, intercept = np.polyfit(draws[:, 0], draws[:, 1], 1)
        self.assertAlmostEqual(slope, 2.0, delta=0.02)
        self.assertAlmostEqual(intercept, 1.0, delta=0.02)

    def test_unknown_name(self):
        with self.assertRaises(ValueError) as ctx:
            make_synthetic_phi('phi9')
        self.assertIn('phi1', str(ctx.exception))
        with self.assertRaises(ValueError):
            synthetic_region('phi9')


class TestSimulateCatalog(unittest.TestCase):
    def setUp(self):
        self.region = Region(-4.0, 4.0, -4.0, 4.0)

    def _spec(self, params, T=300.0, seed=None):
        return SimulationSpec(params=params, phi='phi1', region=self.region, T=T, M0=2.0, seed=seed)

    def test_poisson_counts_without_triggering(self):
        params = TOHOKU.replace(K_bar=0.0)
        rng = np.random.default_rng(4)
        counts = np.array([simulate_catalog(self._spec(params), rng).catalog.n for _ in range(500)])
        expected = params.mu_bar * 300.0
        self.assertAlmostEqual(counts.mean(), expected, delta=3.0 * math.sqrt(expected / 500))
        self.assertAlmostEqual(counts.var() / expected, 1.0, delta=0.2)

    def test_mean_count_matches_branching_ratio(self):
        """Expected size mu_bar T / (1 - n*) when the Omori tail is short"""
        params = EtasParams(mu_bar=0.325, K_bar=0.5, alpha=0.5, c=0.01, p=2.0, d=0.0159, q=1.531)
        rng = np.random.default_rng(5)
        counts = np.array([simulate_catalog(self._spec(params), rng).catalog.n for _ in range(300)])
        expected = params.mu_bar * 300.0 / (1.0 - params.branching_ratio())
        tolerance = 4.0 * counts.std(ddof=1) / math.sqrt(len(counts)) + 0.01 * expected
        self.assertAlmostEqual(counts.mean(), expected, delta=tolerance)

    def test_first_generation_counts(self):
        """Direct offspring of immigrants match their truncated Poisson means"""
        rng = np.random.default_rng(6)
        observed = expected = 0.0
        for _ in range(100):
            simulated = simulate_catalog(self._spec(TOHOKU), rng)
            catalog, parents = simulated.catalog, simulated.true_branching.parents
            immigrants = np.flatnonzero(parents == 0)
            observed += np.isin(parents - 1, immigrants).sum()
            expected += float(np.sum(TOHOKU.K_bar * np.exp(TOHOKU.alpha * (catalog.m[immigrants] - 2.0))
                                     * (1.0 - omori_survival(catalog.T - catalog.t[immigrants], TOHOKU.c, TOHOKU.p))))
        self.assertAlmostEqual(observed, expected, delta=3.0 * math.sqrt(expected))

    def test_structure(self):
        simulated = simulate_catalog(self._spec(TOHOKU, T=350.0, seed=7))
        catalog = simulated.catalog
        parents = simulated.true_branching.parents
        self.assertGreater(catalog.n, 100)
        self.assertTrue(np.all(np.diff(catalog.t) > 0))
        self.assertEqual(parents[0], 0)
        self.assertTrue(np.all(parents <= np.arange(catalog.n)))
        children = np.flatnonzero(parents > 0)
        self.assertTrue(np.all(simulated.generations[children] > simulated.generations[parents[children] - 1]))
        self.assertTrue(np.all(catalog.t <= 350.0))
        self.assertTrue(np.all(catalog.m >= 2.0))

    def test_magnitudes_follow_gutenberg_richter(self):
        simulated = simulate_catalog(self._spec(TOHOKU, seed=8))
        excess = simulated.catalog.m - 2.0
        self.assertAlmostEqual(excess.mean(), 1.0 / TOHOKU.beta_gr, delta=5.0 / (TOHOKU.beta_gr * math.sqrt(len(excess))))

    def test_deterministic_with_seed(self):
        a = simulate_catalog(self._spec(TOHOKU, seed=11)).catalog
        b = simulate_catalog(self._spec(TOHOKU, seed=11)).catalog
        np.testing.assert_array_equal(a.t, b.t)
        np.testing.assert_array_equal(a.x, b.x)

    def test_supercritical_rejected(self):
        with self.assertRaises(SimulationError):
            simulate_catalog(self._spec(TOHOKU.replace(K_bar=1.2), seed=0))

    def test_event_cap(self):
        with patch('simulator.MAX_EVENTS', 10):
            with self.assertRaises(SimulationError):
                simulate_catalog(self._spec(TOHOKU, seed=0))

    def test_save_branching(self):
        simulated = simulate_catalog(self._spec(TOHOKU, T=50.0, seed=12))
        with tempfile.TemporaryDirectory() as tmp:
            path = save_branching(simulated, os.path.join(tmp, 'branching.csv'))
            frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ['child_index', 'parent_index'])
        self.assertEqual(frame['child_index'].iloc[0], 1)
        np.testing.assert_array_equal(frame['parent_index'], simulated.true_branching.parents)

    def _spawn(self, t_bounds, omori_draw):
        pool = _EventPool()
        with patch('simulator.sample_omori_interval', side_effect=omori_draw):
            _spawn_offspring(pool, TOHOKU, 2.0, np.array([-1]), np.array([0.7]), np.array([6.0]), np.array([0.0]),
                             np.array([0.0]), lower=np.array([0.0]), upper=np.array([0.3]), t_bounds=t_bounds,
                             generation=1, rng=np.random.default_rng(0))
        return pool.arrays()['t']

    def test_child_times_clipped_to_window_end(self):
        """Parent time plus elapsed time never lands past the window end"""
        t = self._spawn((-np.inf, 1.0), lambda lower, upper, c, p, rng: upper + 1e-9)
        self.assertGreater(t.size, 0)
        self.assertTrue(np.all(t <= 1.0))

    def test_child_times_clipped_to_window_start(self):
        t = self._spawn((0.75, 1.0), lambda lower, upper, c, p, rng: lower)
        self.assertGreater(t.size, 0)
        self.assertTrue(np.all(t >= 0.75))


class TestForecast(unittest.TestCase):
    def setUp(self):
        self.region = Region(0.0, 10.0, 0.0, 10.0)
        self.phi = UniformDensity(self.region)
        self.empty = Catalog(t=[], m=[], x=[], y=[], T=10.0, M0=2.0, region=self.region)

    def _sample(self, **values):
        params = EtasParams(**{'mu_bar': 0.5, 'K_bar': 0.0, 'alpha': 1.0, 'c': 0.05, 'p': 1.2, 'd': 0.1, 'q': 1.5,
                               **values})
        return SimpleNamespace(params=params, phi=self.phi)

    def test_immigrants_only(self):
        rng = np.random.default_rng(0)
        sample = self._sample()
        counts = np.array([simulate_forecast(self.empty, sample, (10.0, 30.0), rng).n for _ in range(1000)])
        self.assertAlmostEqual(counts.mean(), 10.0, delta=3.0 * math.sqrt(10.0 / 1000))

    def test_direct_offspring_of_history(self):
        """Offspring of a large recent event follow K_bar exp(alpha dm) times the Omori mass in the horizon"""
        history = Catalog(t=[9.9], m=[4.0], x=[5.0], y=[5.0], T=10.0, M0=2.0, region=self.region)
        sample = self._sample(mu_bar=1e-12, K_bar=0.3)
        p = sample.params
        expected = p.K_bar * math.exp(2.0 * p.alpha) * float(
            omori_survival(0.1, p.c, p.p) - omori_survival(10.1, p.c, p.p))
        rng = np.random.default_rng(1)
        with patch('simulator._cascade'):
            counts = np.array([simulate_forecast(history, sample, (10.0, 20.0), rng).n for _ in range(2000)])
        self.assertAlmostEqual(counts.mean(), expected, delta=4.0 * math.sqrt(expected / 2000))

    def test_events_inside_horizon(self):
        history = Catalog(t=[9.0], m=[5.0], x=[5.0], y=[5.0], T=10.0, M0=2.0, region=self.region)
        continuation = simulate_forecast(history, self._sample(K_bar=0.3), (10.0, 15.0), np.random.default_rng(2))
        self.assertEqual(continuation.t_start, 10.0)
        self.assertEqual(continuation.T, 15.0)
        if continuation.n:
            self.assertTrue(np.all((continuation.t >= 10.0) & (continuation.t <= 15.0)))

    def test_zero_length_horizon(self):
        continuation = simulate_forecast(self.empty, self._sample(), (10.0, 10.0), np.random.default_rng(3))
        self.assertEqual(continuation.n, 0)

    def test_invalid_horizon(self):
        with self.assertRaises(SimulationError):
            simulate_forecast(self.empty, self._sample(), (5.0, 20.0), np.random.default_rng(0))
        with self.assertRaises(SimulationError):
            simulate_forecast(self.empty, self._sample(), (12.0, 11.0), np.random.default_rng(0))

    def test_probability_calibration(self):
        """P(at least one event) matches the Poisson average over posterior samples"""
        rng = np.random.default_rng(4)
        mu_values = rng.uniform(0.02, 0.2, 100)
        samples = [self._sample(mu_bar=mu) for mu in mu_values]
        summary = forecast_summary(self.empty, samples, (10.0, 20.0), thresholds=[2.0, 3.0], n_sims=100, rng=rng)
        probabilities = summary['probabilities']
        exact = 1.0 - float(np.mean(np.exp(-mu_values * 10.0)))
        row = probabilities[probabilities['threshold'] == 2.0].iloc[0]
        self.assertAlmostEqual(row['probability'], exact, delta=3.0 * math.sqrt(exact * (1 - exact) / 10000))
        self.assertTrue(np.all(np.diff(probabilities['probability']) <= 0))
        self.assertAlmostEqual(float(summary['counts']['frequency'].sum()), 1.0)
        self.assertEqual(len(summary['samples']), 10000)

    def test_zero_horizon_probability(self):
        summary = forecast_summary(self.empty, [self._sample()], (10.0, 10.0), thresholds=[2.0], n_sims=20,
                                   rng=np.random.default_rng(5))
        self.assertEqual(float(summary['probabilities']['probability'].iloc[0]), 0.0)


if __name__ == '__main__':
    unittest.main()
