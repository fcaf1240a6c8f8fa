import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import Mock

import numpy as np
import pandas as pd
from scipy import stats

from background_models import DPRealization, KDEDensity, UniformDensity
from catalog import Catalog, Region
from config import TOHOKU_PARAMS
from etas_kernels import PARAM_NAMES, BranchingVector, EtasParams, omori_density, spatial_density
from gibbs_sampler import (
    BranchingStats,
    PriorSpec,
    SamplerConfig,
    SamplerError,
    credible_intervals,
    estimate_beta,
    geweke_successive_conditional,
    load_chain,
    mh_update_c_p,
    mh_update_d_q,
    mh_update_K_alpha,
    run_chain,
    run_chains,
    sample_branching,
    sample_mu_bar,
)
from simulator import SimulationSpec, simulate_catalog

RUN_SLOW = bool(os.getenv('ETAS_RUN_SLOW'))
REGION = Region(-4.0, 4.0, -4.0, 4.0)


def small_catalog(T=60.0, seed=21, params=None):
    params = params or EtasParams(mu_bar=0.325, **TOHOKU_PARAMS)
    simulated = simulate_catalog(SimulationSpec(params=params, phi='phi1', region=REGION, T=T, M0=2.0, seed=seed))
    catalog = simulated.catalog
    return catalog.subset(REGION.contains(catalog.x, catalog.y))


def fixed_rng(step, u):
    rng = Mock()
    rng.normal.return_value = np.asarray(step, dtype=float)
    rng.random.return_value = u
    return rng


def grid_marginals(log_density, box_a, box_b, n=400):
    """Normalised marginals of a 2-D log density on an interior grid of the box"""
    grid_a = np.linspace(*box_a, n + 2)[1:-1]
    grid_b = np.linspace(*box_b, n + 2)[1:-1]
    A, B = np.meshgrid(grid_a, grid_b, indexing='ij')
    values = log_density(A, B)
    density = np.exp(values - np.max(values))
    density /= density.sum()
    return (grid_a, density.sum(axis=1)), (grid_b, density.sum(axis=0))


def assert_bins_within_3_sigma(testcase, draws, edges, expected, label, n_batches=20, floor=0.005):
    """Histogram frequencies within 3 batch-means standard errors of the expected bin masses"""
    observed = np.histogram(draws, bins=edges)[0] / len(draws)
    batches = np.array([np.histogram(batch, bins=edges)[0] / len(batch) for batch in np.array_split(draws, n_batches)])
    sigma = batches.std(axis=0, ddof=1) / math.sqrt(n_batches)
    for k, (obs, exp, s) in enumerate(zip(observed, expected, sigma)):
        testcase.assertLessEqual(abs(obs - exp), 3.0 * s + floor,
                                 f"{label} bin {k}: observed {obs:.4f}, expected {exp:.4f}, sigma {s:.4f}")


def check_mh_block(testcase, update, names, box, log_density, catalog, branching, params, n_steps, thin,
                   proposal_sd, seed):
    """Run one MH block on a frozen conditional and compare both marginals with the grid oracle"""
    prior = PriorSpec(**box)
    branching_stats = BranchingStats.build(catalog, branching)
    rng = np.random.default_rng(seed)
    warmup = n_steps // 20
    current = params
    draws = {name: [] for name in names}
    for step in range(n_steps):
        current, _ = update(current, branching, catalog, prior, rng, proposal_sd=proposal_sd, stats=branching_stats)
        if step >= warmup and step % thin == 0:
            for name in names:
                draws[name].append(getattr(current, name))
    for name, (grid, marginal) in zip(names, grid_marginals(log_density, box[names[0]], box[names[1]])):
        edges = np.linspace(*box[name], 9)
        expected = np.array([marginal[(grid >= lo) & (grid < hi)].sum() for lo, hi in zip(edges[:-1], edges[1:])])
        assert_bins_within_3_sigma(testcase, np.asarray(draws[name]), edges, expected, name)


def K_alpha_setup():
    """Frozen 8-event conditional for the (K_bar, alpha) block and its log density, zero outside stability"""
    region = Region(0.0, 10.0, 0.0, 10.0)
    rng = np.random.default_rng(8)
    catalog = Catalog(t=np.sort(rng.uniform(0, 50, 8)), m=2.0 + rng.exponential(0.43, 8),
                      x=rng.uniform(0, 10, 8), y=rng.uniform(0, 10, 8), T=50.0, M0=2.0, region=region)
    branching = BranchingVector([0, 1, 1, 0, 4, 1, 0, 5])
    params = EtasParams(mu_bar=0.2, K_bar=0.2, alpha=0.5, c=0.05, p=1.3, d=0.1, q=1.5)
    excess = catalog.m - catalog.M0
    counts = branching.offspring_counts()
    mass = 1.0 - (params.c / (catalog.T - catalog.t + params.c)) ** (params.p - 1.0)

    def log_density(K, A):
        value = (-K * np.sum(np.exp(A[..., None] * excess) * mass, axis=-1)
                 + counts.sum() * np.log(K) + A * float(np.sum(counts * excess)))
        stable = K * params.beta_gr / (params.beta_gr - A) < 1.0
        return np.where(stable, value, -np.inf)

    return catalog, branching, params, log_density


def prior_rank_pvalues(prior, draws, beta_gr, rng, n_bins, n_reference=99):
    """
    Chi-square p-value per parameter for the ranks of draws among fresh prior
    draws; ranks are uniform on 0..n_reference when draws follow the prior.
    """
    pvalues = {}
    references = [[prior.sample(rng, beta_gr) for _ in range(n_reference)] for _ in range(len(draws))]
    for name in PARAM_NAMES:
        ranks = np.array([sum(getattr(ref, name) < value for ref in refs)
                          for value, refs in zip(draws[name], references)])
        counts = np.bincount(ranks * n_bins // (n_reference + 1), minlength=n_bins)
        pvalues[name] = float(stats.chisquare(counts).pvalue)
    return pvalues


class TestBranchingUpdate(unittest.TestCase):
    def setUp(self):
        self.region = Region(0.0, 1.0, 0.0, 1.0)
        self.phi = UniformDensity(self.region)
        self.params = EtasParams(mu_bar=2.0, K_bar=0.5, alpha=1.0, c=0.05, p=1.3, d=0.02, q=1.8)

    def test_first_event_is_immigrant(self):
        catalog = Catalog(t=[1.0, 1.1], m=[4.0, 2.0], x=[0.5, 0.5], y=[0.5, 0.5], T=2.0, M0=2.0, region=self.region)
        rng = np.random.default_rng(0)
        for _ in range(50):
            self.assertEqual(sample_branching(catalog, self.params, self.phi, rng).parents[0], 0)

    def test_no_triggering_means_all_immigrants(self):
        catalog = Catalog(t=[1.0, 1.1], m=[4.0, 2.0], x=[0.5, 0.5], y=[0.5, 0.5], T=2.0, M0=2.0, region=self.region)
        branching = sample_branching(catalog, self.params.replace(K_bar=0.0), self.phi, np.random.default_rng(1))
        np.testing.assert_array_equal(branching.parents, [0, 0])

    def test_three_event_frequencies(self):
        """Empirical parent frequencies match the normalised intensity contributions"""
        catalog = Catalog(t=[1.0, 1.2, 1.5], m=[3.5, 2.8, 2.1], x=[0.3, 0.32, 0.6], y=[0.3, 0.31, 0.5], T=2.0,
                          M0=2.0, region=self.region)
        p = self.params

        def trigger(i, j):
            return (p.K_bar * math.exp(p.alpha * (catalog.m[j] - 2.0))
                    * float(omori_density(catalog.t[i] - catalog.t[j], p.c, p.p))
                    * float(spatial_density(catalog.x[i] - catalog.x[j], catalog.y[i] - catalog.y[j], p.d, p.q)))

        expected = {}
        for i in (1, 2):
            weights = np.array([p.mu_bar] + [trigger(i, j) for j in range(i)])
            expected[i] = weights / weights.sum()

        n_draws = 100000
        rng = np.random.default_rng(2)
        draws = np.array([sample_branching(catalog, p, self.phi, rng).parents for _ in range(n_draws)])
        for i in (1, 2):
            observed = np.bincount(draws[:, i], minlength=i + 1) / n_draws
            for k, prob in enumerate(expected[i]):
                self.assertAlmostEqual(observed[k], prob, delta=3.0 * math.sqrt(prob * (1 - prob) / n_draws) + 1e-4)

    def test_zero_intensity_raises(self):
        catalog = Catalog(t=[1.0], m=[3.0], x=[5.0], y=[5.0], T=2.0, M0=2.0, region=self.region)
        with self.assertRaises(SamplerError):
            sample_branching(catalog, self.params, self.phi, np.random.default_rng(0))


class TestConjugateUpdates(unittest.TestCase):
    def test_mu_bar_posterior(self):
        """mu_bar draws follow Gamma(a + |S0|, b + T)"""
        prior = PriorSpec()
        branching = BranchingVector([0] * 10 + [1] * 5)
        rng = np.random.default_rng(0)
        draws = [sample_mu_bar(branching, 100.0, prior, rng) for _ in range(20000)]
        law = stats.gamma(prior.mu_shape + 10, scale=1.0 / (prior.mu_rate + 100.0))
        self.assertGreater(stats.kstest(draws, law.cdf).pvalue, 0.01)

    def test_mu_bar_without_immigrants(self):
        prior = PriorSpec(mu_shape=2.0, mu_rate=1.0)
        rng = np.random.default_rng(1)
        draws = [sample_mu_bar(BranchingVector.all_immigrants(0), 9.0, prior, rng) for _ in range(20000)]
        self.assertAlmostEqual(float(np.mean(draws)), 2.0 / 10.0, delta=0.01)

    def test_estimate_beta(self):
        self.assertAlmostEqual(estimate_beta([3.0, 3.0, 3.0, 3.0], 2.0), 1.0)
        self.assertAlmostEqual(estimate_beta([], 2.0), 1.0)


class TestMetropolisBlocks(unittest.TestCase):
    def setUp(self):
        self.region = Region(0.0, 1.0, 0.0, 1.0)
        self.catalog = Catalog(t=[1.0, 1.5, 3.0], m=[3.0, 2.2, 2.5], x=[0.5, 0.5, 0.1], y=[0.5, 0.5, 0.9], T=5.0,
                               M0=2.0, region=self.region)
        self.branching = BranchingVector([0, 1, 0])
        self.params = EtasParams(mu_bar=1.0, K_bar=0.3, alpha=1.0, c=0.05, p=1.2, d=0.1, q=1.5)
        self.prior = PriorSpec()

    def test_out_of_box_proposal_rejected(self):
        prior = PriorSpec(K_bar=(0.29, 0.31))
        params, accepted = mh_update_K_alpha(self.params, self.branching, self.catalog, prior,
                                             fixed_rng([0.5, 0.0], 0.0001))
        self.assertFalse(accepted)
        self.assertEqual(params, self.params)

    def test_unstable_proposal_rejected(self):
        params, accepted = mh_update_K_alpha(self.params, self.branching, self.catalog, self.prior,
                                             fixed_rng([0.0, 1.5], 0.0001))
        self.assertFalse(accepted)
        self.assertEqual(params.alpha, 1.0)

    def test_p_below_one_rejected(self):
        params = self.params.replace(p=1.05)
        updated, accepted = mh_update_c_p(params, self.branching, self.catalog, self.prior, fixed_rng([0.0, -0.1], 0.0001))
        self.assertFalse(accepted)
        self.assertEqual(updated, params)

    def test_d_q_flat_without_offspring(self):
        """With no offspring the (d, q) target is flat, so every in-box proposal is accepted"""
        branching = BranchingVector.all_immigrants(3)
        updated, accepted = mh_update_d_q(self.params, branching, self.catalog, self.prior, fixed_rng([0.05, 0.3], 0.999))
        self.assertTrue(accepted)
        self.assertAlmostEqual(updated.d, 0.15)
        self.assertAlmostEqual(updated.q, 1.8)

    def test_d_q_uphill_always_accepted(self):
        # the offspring sits on its parent, so a smaller d raises the spatial density
        updated, accepted = mh_update_d_q(self.params, self.branching, self.catalog, self.prior,
                                          fixed_rng([-0.05, 0.0], 0.999))
        self.assertTrue(accepted)
        self.assertAlmostEqual(updated.d, 0.05)

    def test_mu_bar_untouched_by_blocks(self):
        rng = np.random.default_rng(0)
        params = self.params
        for update in (mh_update_K_alpha, mh_update_c_p, mh_update_d_q):
            params, _ = update(params, self.branching, self.catalog, self.prior, rng)
        self.assertEqual(params.mu_bar, self.params.mu_bar)
        self.assertTrue(self.prior.in_support(params))

    def _long_setup(self):
        rng = np.random.default_rng(4)
        n_off = 6
        t = np.concatenate([[0.5], 0.5 + np.sort(rng.uniform(0.1, 5.0, n_off))])
        angles = rng.uniform(0, 2 * math.pi, n_off)
        radii = np.array([0.05, 0.1, 0.2, 0.3, 0.5, 0.8])
        x = np.concatenate([[5.0], 5.0 + radii * np.cos(angles)])
        y = np.concatenate([[5.0], 5.0 + radii * np.sin(angles)])
        region = Region(0.0, 10.0, 0.0, 10.0)
        self.catalog_long = Catalog(t=t, m=np.full(n_off + 1, 2.5), x=x, y=y, T=10.0, M0=2.0, region=region)
        self.branching_long = BranchingVector([0] + [1] * n_off)

    def test_d_q_matches_grid_posterior(self):
        """Long-run (d, q) draws reproduce both grid-normalised marginals"""
        self._long_setup()
        cat = self.catalog_long
        children, parents = self.branching_long.offspring_pairs()
        r2 = (cat.x[children] - cat.x[parents]) ** 2 + (cat.y[children] - cat.y[parents]) ** 2

        def log_density(D, Q):
            value = np.zeros_like(D)
            for distance in r2:
                value += np.log(Q - 1.0) + (Q - 1.0) * np.log(D) - math.log(math.pi) - Q * np.log(distance + D)
            return value

        check_mh_block(self, mh_update_d_q, ('d', 'q'), {'d': (0.001, 1.0), 'q': (1.05, 3.0)}, log_density,
                       cat, self.branching_long, self.params, n_steps=200000, thin=20, proposal_sd=0.1, seed=3)

    def test_c_p_matches_grid_posterior(self):
        """Long-run (c, p) draws reproduce both grid-normalised marginals"""
        self._long_setup()
        cat = self.catalog_long
        children, parents = self.branching_long.offspring_pairs()
        elapsed = cat.t[children] - cat.t[parents]
        iota = np.exp(self.params.alpha * (cat.m - cat.M0))
        remaining = cat.T - cat.t

        def log_density(C, P):
            survival = (C[..., None] / (remaining + C[..., None])) ** (P[..., None] - 1.0)
            value = -self.params.K_bar * np.sum(iota * (1.0 - survival), axis=-1)
            for z in elapsed:
                value = value + np.log(P - 1.0) + (P - 1.0) * np.log(C) - P * np.log(z + C)
            return value

        check_mh_block(self, mh_update_c_p, ('c', 'p'), {'c': (0.001, 0.5), 'p': (1.05, 3.0)}, log_density,
                       cat, self.branching_long, self.params, n_steps=100000, thin=10, proposal_sd=0.1, seed=5)

    def test_K_alpha_matches_grid_posterior(self):
        catalog, branching, params, log_density = K_alpha_setup()
        check_mh_block(self, mh_update_K_alpha, ('K_bar', 'alpha'), {'K_bar': (0.01, 0.4), 'alpha': (0.01, 1.0)},
                       log_density, catalog, branching, params, n_steps=60000, thin=10, proposal_sd=0.05, seed=8)


class TestRunChain(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.catalog = small_catalog()

    def _config(self, background, **overrides):
        values = dict(n_samples=20, thinning=2, burn_in=10, branching_update_every=5, background=background,
                      show_progress=False, seed=3, crp_sweeps=1)
        values.update(overrides)
        return SamplerConfig(**values)

    def test_uniform_chain(self):
        chain = run_chain(self.catalog, self._config('uniform'))
        self.assertEqual(len(chain), 20)
        prior = PriorSpec()
        for sample in chain.samples:
            self.assertTrue(prior.in_support(sample.params))
            self.assertTrue(math.isfinite(sample.loglik_full))
            self.assertTrue(math.isfinite(sample.loglik_branched))
            self.assertEqual(sample.n_immigrants, sample.branching.n_immigrants)
        for block, (accepted, proposed) in chain.acceptance.items():
            self.assertEqual(proposed, 50)
            self.assertLessEqual(accepted, proposed)
        self.assertEqual(chain.immigrant_trace[0][0], 0)

    def test_deterministic_with_seed(self):
        a = run_chain(self.catalog, self._config('dp'))
        b = run_chain(self.catalog, self._config('dp'))
        for name in ('mu_bar', 'K_bar', 'alpha', 'd'):
            np.testing.assert_array_equal(a.param_array(name), b.param_array(name))
        np.testing.assert_array_equal(a.loglik, b.loglik)

    def test_dp_chain_has_realizations(self):
        chain = run_chain(self.catalog, self._config('dp'))
        for phi in chain.phis:
            self.assertIsInstance(phi, DPRealization)
            self.assertAlmostEqual(float(np.sum(phi.weights)), 1.0, places=9)
        self.assertEqual(chain.dp_frame()['sample_index'].nunique(), 20)

    def test_kde_chain(self):
        chain = run_chain(self.catalog, self._config('kde'))
        self.assertIsInstance(chain.phis[0], KDEDensity)
        self.assertIs(chain.phis[0], chain.phis[-1])

    def test_burn_in_default(self):
        config = SamplerConfig(n_samples=100, thinning=10, burn_in=None, background='uniform')
        # burn-in is 10% of the 1112 iterations in total
        self.assertEqual(config.resolved_burn_in, 112)
        self.assertEqual(config.total_iterations, 1112)
        self.assertEqual(SamplerConfig(n_samples=9, thinning=1, burn_in=None).resolved_burn_in, 1)
        self.assertEqual(SamplerConfig(n_samples=100, thinning=10, burn_in=0).resolved_burn_in, 0)

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            SamplerConfig(background='gp')
        with self.assertRaises(ValueError):
            SamplerConfig(thinning=0)

    def test_empty_catalog(self):
        empty = Catalog(t=[], m=[], x=[], y=[], T=1.0, M0=2.0, region=REGION)
        with self.assertRaises(SamplerError):
            run_chain(empty, self._config('uniform'))

    def test_independent_chains(self):
        chains = run_chains(self.catalog, self._config('uniform', n_samples=5), n_chains=2, workers=1)
        self.assertEqual(len(chains), 2)
        self.assertFalse(np.array_equal(chains[0].param_array('K_bar'), chains[1].param_array('K_bar')))

    def test_credible_intervals(self):
        chain = run_chain(self.catalog, self._config('uniform'))
        table = credible_intervals(chain)
        self.assertEqual(list(table.columns), ['mean', 'lower', 'upper'])
        self.assertTrue(np.all(table['lower'] <= table['upper']))
        self.assertIn('K_bar', table.index)


class TestChainFiles(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.catalog = small_catalog()

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _run(self, background):
        config = SamplerConfig(n_samples=6, thinning=1, burn_in=2, branching_update_every=2, background=background,
                               show_progress=False, seed=5, crp_sweeps=1)
        return run_chain(self.catalog, config)

    def test_dp_round_trip(self):
        chain = self._run('dp')
        directory = chain.save(Path(self.tmp.name) / 'dp')
        self.assertTrue((directory / 'dp_realizations.csv').exists())
        loaded = load_chain(directory, self.catalog)
        np.testing.assert_array_equal(loaded.param_array('K_bar'), chain.param_array('K_bar'))
        np.testing.assert_array_equal(loaded.loglik, chain.loglik)
        for original, restored in zip(chain.phis, loaded.phis):
            self.assertAlmostEqual(restored.evaluate(0.1, -0.2), original.evaluate(0.1, -0.2), places=12)
        self.assertEqual(loaded.acceptance, chain.acceptance)

    def test_kde_has_no_sidecar(self):
        chain = self._run('kde')
        directory = chain.save(Path(self.tmp.name) / 'kde')
        self.assertFalse((directory / 'dp_realizations.csv').exists())
        loaded = load_chain(directory, self.catalog)
        np.testing.assert_allclose(loaded.phis[0].bandwidth, chain.phis[0].bandwidth)

    def test_mismatched_catalog(self):
        chain = self._run('uniform')
        directory = chain.save(Path(self.tmp.name) / 'uniform')
        other = self.catalog.subset(np.arange(self.catalog.n) > 0)
        with self.assertRaises(SamplerError):
            load_chain(directory, other)

    def test_missing_files(self):
        with self.assertRaises(SamplerError):
            load_chain(Path(self.tmp.name) / 'nothing', self.catalog)


GEWEKE_PRIOR = PriorSpec(alpha=(0.1, 0.5), c=(0.01, 0.2), p=(1.1, 1.4), K_bar=(0.05, 0.3), d=(0.01, 0.2),
                         q=(1.5, 1.8), mu_shape=10.0, mu_rate=20.0)
GEWEKE_REGION = Region(0.0, 1.0, 0.0, 1.0)
# Bonferroni split of a 5% family-wise level over the seven parameters
RANK_LEVEL = 0.05 / len(PARAM_NAMES)


class TestSuccessiveConditional(unittest.TestCase):
    def _rank_pvalues(self, n_iterations, thin, n_bins, seed):
        rng = np.random.default_rng(seed)
        draws = geweke_successive_conditional(GEWEKE_PRIOR, GEWEKE_REGION, T=20.0, M0=2.0, beta_gr=math.log(10.0),
                                              n_iterations=n_iterations, rng=rng)
        self.assertEqual(list(draws.columns), list(PARAM_NAMES))
        self.assertTrue(all(GEWEKE_PRIOR.in_support(EtasParams(**row)) for row in draws.to_dict('records')))
        return prior_rank_pvalues(GEWEKE_PRIOR, draws.iloc[thin - 1::thin], math.log(10.0), rng, n_bins)

    def test_short_run_ranks_uniform(self):
        """Successive-conditional draws rank uniformly among prior draws"""
        for name, pvalue in self._rank_pvalues(n_iterations=2000, thin=20, n_bins=5, seed=7).items():
            self.assertGreater(pvalue, RANK_LEVEL, name)

    @unittest.skipUnless(RUN_SLOW, 'set ETAS_RUN_SLOW=1 to run long sampler checks')
    def test_long_run_ranks_uniform(self):
        for name, pvalue in self._rank_pvalues(n_iterations=20000, thin=20, n_bins=10, seed=17).items():
            self.assertGreater(pvalue, RANK_LEVEL, name)

    def test_rank_check_detects_wrong_law(self):
        """Draws pinned to the top of every box fail the rank check"""
        rng = np.random.default_rng(9)
        pinned = {name: [GEWEKE_PRIOR.bounds(name)[1] - 1e-6] * 100 for name in PARAM_NAMES[1:]}
        pinned['mu_bar'] = [2.0] * 100
        frame = pd.DataFrame(pinned)
        for name, pvalue in prior_rank_pvalues(GEWEKE_PRIOR, frame, math.log(10.0), rng, n_bins=5).items():
            self.assertLess(pvalue, RANK_LEVEL, name)


@unittest.skipUnless(RUN_SLOW, 'set ETAS_RUN_SLOW=1 to run long sampler checks')
class TestSamplerSlow(unittest.TestCase):
    def test_poisson_catalog_has_small_K_bar(self):
        """A catalog with no triggering drives K_bar towards zero"""
        params = EtasParams(mu_bar=1.0, K_bar=0.0, alpha=1.0, c=0.05, p=1.2, d=0.1, q=1.5)
        catalog = small_catalog(T=200.0, seed=31, params=params)
        config = SamplerConfig(n_samples=2000, thinning=2, burn_in=2000, branching_update_every=5,
                               background='uniform', show_progress=False, seed=1)
        chain = run_chain(catalog, config)
        self.assertGreaterEqual(float(np.mean(chain.param_array('K_bar') < 0.05)), 0.9)

    def test_K_alpha_matches_grid_posterior_long_run(self):
        catalog, branching, params, log_density = K_alpha_setup()
        check_mh_block(self, mh_update_K_alpha, ('K_bar', 'alpha'), {'K_bar': (0.01, 0.4), 'alpha': (0.01, 1.0)},
                       log_density, catalog, branching, params, n_steps=300000, thin=20, proposal_sd=0.05, seed=18)


if __name__ == '__main__':
    unittest.main()
