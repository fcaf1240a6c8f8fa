"""
Latent-branching Gibbs sampler for the spatio-temporal ETAS model.

Each iteration updates mu_bar (conjugate Gamma) and the pairs (K_bar, alpha),
(c, p), (d, q) by joint random-walk Metropolis-Hastings. Every
branching_update_every iterations the branching structure is redrawn exactly
and, for the DP model, the background density is resampled given the new
immigrant set.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from background_models import (
    BackgroundDensity,
    ClusterState,
    DPConfig,
    DPRealization,
    DP_FRAME_COLUMNS,
    KDEDensity,
    UniformDensity,
    crp_gibbs_sweep,
    default_background,
    sample_dp_realization,
    update_dp_hyperparams,
)
from catalog import Catalog, Region, catalog_signature
from config import BACKGROUND_MODELS, DEFAULT_DP, DEFAULT_PRIOR, DEFAULT_SAMPLER, MAX_WORKERS
from etas_kernels import (
    PARAM_NAMES,
    BranchingVector,
    EtasParams,
    branched_log_likelihood,
    log_likelihood,
    omori_log_density,
    omori_survival,
    spatial_log_density,
    triggering_contributions,
)

logger = logging.getLogger(__name__)

__all__ = [
    'BranchingVector', 'PriorSpec', 'SamplerConfig', 'PosteriorSample', 'Chain', 'SamplerError', 'GibbsSampler',
    'sample_branching', 'sample_mu_bar', 'mh_update_K_alpha', 'mh_update_c_p', 'mh_update_d_q',
    'run_chain', 'run_chains', 'estimate_beta', 'credible_intervals', 'load_chain',
    'geweke_successive_conditional',
]

MH_BLOCKS = ('K_alpha', 'c_p', 'd_q')


class SamplerError(RuntimeError):
    """Raised when the chain cannot be initialised or reaches an impossible state."""


@dataclass(frozen=True)
class PriorSpec:
    """Uniform boxes for the triggering parameters, Gamma(mu_shape, mu_rate) for mu_bar, and stability"""
    alpha: Tuple[float, float] = DEFAULT_PRIOR['alpha']
    c: Tuple[float, float] = DEFAULT_PRIOR['c']
    p: Tuple[float, float] = DEFAULT_PRIOR['p']
    K_bar: Tuple[float, float] = DEFAULT_PRIOR['K_bar']
    d: Tuple[float, float] = DEFAULT_PRIOR['d']
    q: Tuple[float, float] = DEFAULT_PRIOR['q']
    mu_shape: float = DEFAULT_PRIOR['mu_shape']
    mu_rate: float = DEFAULT_PRIOR['mu_rate']
    d_init: Tuple[float, float] = DEFAULT_PRIOR['d_init']
    q_init: Tuple[float, float] = DEFAULT_PRIOR['q_init']

    def bounds(self, name: str) -> Tuple[float, float]:
        return getattr(self, name)

    def contains(self, name: str, value: float) -> bool:
        low, high = self.bounds(name)
        return low < value < high

    def in_support(self, params: EtasParams) -> bool:
        """Inside every box and inside the stability region"""
        if not params.mu_bar > 0:
            return False
        if not all(self.contains(name, getattr(params, name)) for name in PARAM_NAMES[1:]):
            return False
        return params.is_stable()

    def _draw_box(self, name: str, rng: np.random.Generator, finite_only: bool) -> float:
        low, high = self.bounds(name)
        if math.isinf(high):
            if finite_only:
                raise SamplerError(f"prior for {name} is improper; give finite bounds to sample from it")
            low, high = self.bounds(f'{name}_init')
        return float(rng.uniform(low, high))

    def sample_triggering(self, rng: np.random.Generator, beta_gr: float, mu_bar: float,
                          max_attempts: int = DEFAULT_SAMPLER['max_init_attempts'],
                          finite_only: bool = False) -> EtasParams:
        """Rejection draw from the boxes intersected with the stability region"""
        for _ in range(max_attempts):
            params = EtasParams(
                mu_bar=mu_bar,
                K_bar=self._draw_box('K_bar', rng, finite_only),
                alpha=self._draw_box('alpha', rng, finite_only),
                c=self._draw_box('c', rng, finite_only),
                p=self._draw_box('p', rng, finite_only),
                d=self._draw_box('d', rng, finite_only),
                q=self._draw_box('q', rng, finite_only),
                beta_gr=beta_gr,
            )
            if self.in_support(params):
                return params
        raise SamplerError(f"no stable parameter set found in {max_attempts} prior draws (beta={beta_gr:.4f})")

    def sample(self, rng: np.random.Generator, beta_gr: float,
               max_attempts: int = DEFAULT_SAMPLER['max_init_attempts']) -> EtasParams:
        """Exact draw from the (proper) prior"""
        mu_bar = float(rng.gamma(self.mu_shape, 1.0 / self.mu_rate))
        return self.sample_triggering(rng, beta_gr, mu_bar, max_attempts, finite_only=True)


@dataclass
class SamplerConfig:
    n_samples: int = DEFAULT_SAMPLER['n_samples']
    thinning: int = DEFAULT_SAMPLER['thinning']
    burn_in: Optional[int] = DEFAULT_SAMPLER['burn_in']
    branching_update_every: int = DEFAULT_SAMPLER['branching_update_every']
    proposal_sd: float = DEFAULT_SAMPLER['proposal_sd']
    seed: Optional[int] = None
    background: str = 'dp'
    kde_bandwidth: Optional[np.ndarray] = None
    crp_sweeps: int = DEFAULT_SAMPLER['crp_sweeps']
    max_init_attempts: int = DEFAULT_SAMPLER['max_init_attempts']
    log_every: int = DEFAULT_SAMPLER['log_every']
    show_progress: bool = True

    def __post_init__(self):
        for name in ('n_samples', 'thinning', 'branching_update_every', 'crp_sweeps', 'max_init_attempts',
                     'log_every'):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError(f"burn_in must be non-negative, got {self.burn_in}")
        if not self.proposal_sd > 0:
            raise ValueError(f"proposal_sd must be positive, got {self.proposal_sd}")
        if self.background not in BACKGROUND_MODELS:
            raise ValueError(f"background must be one of {', '.join(BACKGROUND_MODELS)}, got '{self.background}'")

    @property
    def resolved_burn_in(self) -> int:
        """Explicit burn_in, or by default 10% of all pre-thinning iterations (burn-in included)"""
        if self.burn_in is None:
            return int(math.ceil(self.n_samples * self.thinning / 9.0))
        return int(self.burn_in)

    @property
    def total_iterations(self) -> int:
        return self.resolved_burn_in + self.n_samples * self.thinning

    def to_dict(self) -> Dict:
        values = asdict(self)
        if self.kde_bandwidth is not None:
            values['kde_bandwidth'] = np.asarray(self.kde_bandwidth).tolist()
        return values


@dataclass
class PosteriorSample:
    params: EtasParams
    branching: Optional[BranchingVector]
    phi: BackgroundDensity
    loglik_full: float
    loglik_branched: float
    n_immigrants: int
    iteration: int = -1


@dataclass
class Chain:
    """Retained posterior samples with run diagnostics"""
    samples: List[PosteriorSample]
    background: str
    beta_gr: float
    region: Region
    acceptance: Dict[str, List[int]] = field(default_factory=dict)
    immigrant_trace: List[Tuple[int, int]] = field(default_factory=list)
    meta: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def acceptance_rates(self) -> Dict[str, float]:
        return {block: (acc / prop if prop else math.nan) for block, (acc, prop) in self.acceptance.items()}

    @property
    def loglik(self) -> np.ndarray:
        return np.array([s.loglik_full for s in self.samples])

    def param_array(self, name: str) -> np.ndarray:
        return np.array([getattr(s.params, name) for s in self.samples])

    @property
    def phis(self) -> List[BackgroundDensity]:
        return [s.phi for s in self.samples]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for index, sample in enumerate(self.samples):
            row = {'sample_index': index}
            row.update({name: getattr(sample.params, name) for name in PARAM_NAMES})
            row.update({'n_immigrants': sample.n_immigrants, 'loglik_full': sample.loglik_full,
                        'loglik_branched': sample.loglik_branched})
            rows.append(row)
        columns = ['sample_index', *PARAM_NAMES, 'n_immigrants', 'loglik_full', 'loglik_branched']
        return pd.DataFrame(rows, columns=columns)

    def dp_frame(self) -> pd.DataFrame:
        frames = []
        for index, sample in enumerate(self.samples):
            if isinstance(sample.phi, DPRealization):
                frame = sample.phi.to_frame()
                frame.insert(0, 'sample_index', index)
                frames.append(frame)
        if not frames:
            return pd.DataFrame(columns=['sample_index', *DP_FRAME_COLUMNS])
        return pd.concat(frames, ignore_index=True)

    def save(self, directory: Union[str, Path]) -> Path:
        """Write chain.csv, dp_realizations.csv (DP only) and chain_meta.json"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(directory / 'chain.csv', index=False, float_format='%.17g')
        if self.background == 'dp':
            self.dp_frame().to_csv(directory / 'dp_realizations.csv', index=False, float_format='%.17g')
        meta = dict(self.meta)
        meta.update({
            'background': self.background,
            'beta_gr': self.beta_gr,
            'region': list(self.region.bounds),
            'acceptance_counts': self.acceptance,
            'acceptance_rates': self.acceptance_rates(),
            'immigrant_trace': [list(item) for item in self.immigrant_trace],
        })
        with open(directory / 'chain_meta.json', 'w') as f:
            json.dump(meta, f, indent=2, default=float)
        logger.info(f"Saved {len(self)} samples to {directory}")
        return directory


def estimate_beta(magnitudes, M0: float, prior_shape: float = 1.0, prior_rate: float = 1.0) -> float:
    """Posterior mean of the G-R rate under a Gamma(prior_shape, prior_rate) prior"""
    excess = np.asarray(magnitudes, dtype=float) - M0
    return float((prior_shape + excess.size) / (prior_rate + np.sum(excess)))


def branching_weights(catalog: Catalog, params: EtasParams, background_values: np.ndarray, i: int) -> np.ndarray:
    """Unnormalised weights of the background (entry 0) and of each earlier event as the parent of event i"""
    triggered = triggering_contributions(params, catalog.t[i], catalog.x[i], catalog.y[i],
                                         catalog.t[:i], catalog.m[:i], catalog.x[:i], catalog.y[:i], catalog.M0)
    return np.concatenate([[params.mu_bar * background_values[i]], triggered])


def sample_branching(catalog: Catalog, params: EtasParams, phi: BackgroundDensity, rng: np.random.Generator,
                     background_values: Optional[np.ndarray] = None) -> BranchingVector:
    """
    Draw every event's parent from its exact conditional: the background with
    weight mu_bar phi(x_i, y_i), an earlier event j with its triggering intensity.
    """
    if background_values is None:
        background_values = np.asarray(phi.evaluate(catalog.x, catalog.y), dtype=float).reshape(-1)
    parents = np.zeros(catalog.n, dtype=np.int64)
    uniforms = rng.random(catalog.n)
    for i in range(catalog.n):
        weights = branching_weights(catalog, params, background_values, i)
        total = float(np.sum(weights))
        if not (total > 0 and math.isfinite(total)):
            raise SamplerError(f"event {i} (t={catalog.t[i]:.6g}) has zero intensity from every source")
        probs = weights / total
        assert abs(float(np.sum(probs)) - 1.0) <= 1e-9
        parents[i] = min(int(np.searchsorted(np.cumsum(probs), uniforms[i], side='right')), i)
    return BranchingVector(parents)


def sample_mu_bar(branching: BranchingVector, T: float, prior: PriorSpec, rng: np.random.Generator) -> float:
    """Conjugate draw from Gamma(mu_shape + |S0|, mu_rate + T), shape-rate convention"""
    return float(rng.gamma(prior.mu_shape + branching.n_immigrants, 1.0 / (prior.mu_rate + T)))


@dataclass(frozen=True)
class BranchingStats:
    """Quantities of a fixed branching structure that the MH targets need"""
    excess: np.ndarray            # m_j - M0
    remaining: np.ndarray         # T - t_j
    offspring_counts: np.ndarray  # |S_j|
    elapsed: np.ndarray           # t_i - t_parent(i)
    dx: np.ndarray
    dy: np.ndarray

    @classmethod
    def build(cls, catalog: Catalog, branching: BranchingVector) -> 'BranchingStats':
        children, parents = branching.offspring_pairs()
        return cls(
            excess=catalog.m - catalog.M0,
            remaining=catalog.T - catalog.t,
            offspring_counts=branching.offspring_counts(),
            elapsed=catalog.t[children] - catalog.t[parents],
            dx=catalog.x[children] - catalog.x[parents],
            dy=catalog.y[children] - catalog.y[parents],
        )


def _log_target_K_alpha(K_bar: float, alpha: float, params: EtasParams, stats: BranchingStats) -> float:
    mass = 1.0 - omori_survival(stats.remaining, params.c, params.p)
    value = -K_bar * float(np.sum(np.exp(alpha * stats.excess) * mass))
    n_offspring = int(stats.offspring_counts.sum())
    if n_offspring:
        value += n_offspring * math.log(K_bar) + alpha * float(np.sum(stats.offspring_counts * stats.excess))
    return value


def _log_target_c_p(c: float, p: float, params: EtasParams, stats: BranchingStats) -> float:
    iota = np.exp(params.alpha * stats.excess)
    value = -params.K_bar * float(np.sum(iota * (1.0 - omori_survival(stats.remaining, c, p))))
    if stats.elapsed.size:
        value += float(np.sum(omori_log_density(stats.elapsed, c, p)))
    return value


def _log_target_d_q(d: float, q: float, params: EtasParams, stats: BranchingStats) -> float:
    if stats.dx.size == 0:
        return 0.0
    return float(np.sum(spatial_log_density(stats.dx, stats.dy, d, q)))


def _mh_pair(params: EtasParams, names: Tuple[str, str], log_target: Callable, in_support: Callable,
             stats: BranchingStats, proposal_sd: float, rng: np.random.Generator) -> Tuple[EtasParams, bool]:
    """One joint random-walk step on two parameters; proposals outside the support are rejected"""
    current = (getattr(params, names[0]), getattr(params, names[1]))
    step = rng.normal(0.0, proposal_sd, size=2)
    log_u = math.log(rng.random())
    proposal = (current[0] + step[0], current[1] + step[1])
    candidate = params.replace(**{names[0]: proposal[0], names[1]: proposal[1]})
    if not in_support(candidate):
        return params, False
    log_ratio = log_target(*proposal, params, stats) - log_target(*current, params, stats)
    if log_u < log_ratio:
        return candidate, True
    return params, False


def _stats_for(catalog: Catalog, branching: BranchingVector, stats: Optional[BranchingStats]) -> BranchingStats:
    return BranchingStats.build(catalog, branching) if stats is None else stats


def mh_update_K_alpha(params: EtasParams, branching: BranchingVector, catalog: Catalog, prior: PriorSpec,
                      rng: np.random.Generator, proposal_sd: float = DEFAULT_SAMPLER['proposal_sd'],
                      stats: Optional[BranchingStats] = None) -> Tuple[EtasParams, bool]:
    """Joint MH step on (K_bar, alpha); support includes the stability region"""
    return _mh_pair(
        params, ('K_bar', 'alpha'), _log_target_K_alpha,
        lambda cand: prior.contains('K_bar', cand.K_bar) and prior.contains('alpha', cand.alpha) and cand.is_stable(),
        _stats_for(catalog, branching, stats), proposal_sd, rng,
    )


def mh_update_c_p(params: EtasParams, branching: BranchingVector, catalog: Catalog, prior: PriorSpec,
                  rng: np.random.Generator, proposal_sd: float = DEFAULT_SAMPLER['proposal_sd'],
                  stats: Optional[BranchingStats] = None) -> Tuple[EtasParams, bool]:
    """Joint MH step on (c, p)"""
    return _mh_pair(
        params, ('c', 'p'), _log_target_c_p,
        lambda cand: prior.contains('c', cand.c) and prior.contains('p', cand.p),
        _stats_for(catalog, branching, stats), proposal_sd, rng,
    )


def mh_update_d_q(params: EtasParams, branching: BranchingVector, catalog: Catalog, prior: PriorSpec,
                  rng: np.random.Generator, proposal_sd: float = DEFAULT_SAMPLER['proposal_sd'],
                  stats: Optional[BranchingStats] = None) -> Tuple[EtasParams, bool]:
    """Joint MH step on (d, q)"""
    return _mh_pair(
        params, ('d', 'q'), _log_target_d_q,
        lambda cand: prior.contains('d', cand.d) and prior.contains('q', cand.q),
        _stats_for(catalog, branching, stats), proposal_sd, rng,
    )


class GibbsSampler:
    """Single-chain state machine for the blocked sampler"""

    def __init__(self, catalog: Catalog, config: SamplerConfig, prior: Optional[PriorSpec] = None,
                 dp_config: Optional[DPConfig] = None, rng: Optional[np.random.Generator] = None):
        if catalog.n == 0:
            raise SamplerError("cannot fit an empty catalog")
        self.catalog = catalog
        self.config = config
        self.prior = prior or PriorSpec()
        self.rng = np.random.default_rng(config.seed) if rng is None else rng
        self.beta_gr = estimate_beta(catalog.m, catalog.M0)
        self.points = catalog.points
        self.acceptance = {block: [0, 0] for block in MH_BLOCKS}
        self.immigrant_trace: List[Tuple[int, int]] = []

        self.dp_config = None
        # immigrants start in singleton clusters
        self.cluster_labels = np.full(catalog.n, -1, dtype=np.int64)
        if config.background == 'dp':
            self.dp_config = dp_config or DPConfig.for_points(
                self.points, chi=DEFAULT_DP['chi'], niw_rho=DEFAULT_DP['niw_rho'], niw_df=DEFAULT_DP['niw_df'],
                truncation_N=DEFAULT_DP['truncation_N'], update_hyperparams=DEFAULT_DP['update_hyperparams'])
            self.phi = sample_dp_realization(ClusterState.empty(), np.zeros((0, 2)), self.dp_config, self.rng)
        else:
            self.phi = default_background(config.background, self.points, catalog.region, config.kde_bandwidth)
        self.phi_values = np.asarray(self.phi.evaluate(catalog.x, catalog.y), dtype=float).reshape(-1)

        self._initialise_params()
        self.branching = BranchingVector.all_immigrants(catalog.n)
        self.stats = BranchingStats.build(catalog, self.branching)

    def _initialise_params(self):
        # mu_bar starts at half the empirical rate so the first branching draw splits the catalog
        mu_bar = self.catalog.n / (2.0 * self.catalog.length)
        self.params = self.prior.sample_triggering(self.rng, self.beta_gr, mu_bar, self.config.max_init_attempts)
        loglik = log_likelihood(self.catalog, self.params, self.phi)
        if not math.isfinite(loglik):
            raise SamplerError(f"initial log-likelihood is not finite ({loglik}) for {self.params}")
        logger.info(f"Initial state: {self._describe(self.params)}, beta={self.beta_gr:.4f}, loglik={loglik:.3f}")

    @staticmethod
    def _describe(params: EtasParams) -> str:
        return ', '.join(f"{name}={getattr(params, name):.4g}" for name in PARAM_NAMES)

    def update_branching_and_background(self, iteration: int):
        self.branching = sample_branching(self.catalog, self.params, self.phi, self.rng, self.phi_values)
        self.stats = BranchingStats.build(self.catalog, self.branching)
        self.immigrant_trace.append((iteration, self.branching.n_immigrants))
        if self.config.background != 'dp':
            return

        mask = self.branching.immigrant_mask
        immigrant_points = self.points[mask]
        state = ClusterState.from_labels(immigrant_points, self.cluster_labels[mask])
        for _ in range(self.config.crp_sweeps):
            state = crp_gibbs_sweep(state, immigrant_points, self.dp_config, self.rng)
        if self.dp_config.update_hyperparams:
            self.dp_config = update_dp_hyperparams(state, self.dp_config, self.rng)
        self.phi = sample_dp_realization(state, immigrant_points, self.dp_config, self.rng)
        self.phi_values = np.asarray(self.phi.evaluate(self.catalog.x, self.catalog.y), dtype=float).reshape(-1)
        self.cluster_labels[:] = -1
        self.cluster_labels[mask] = state.assignments

    def update_parameters(self):
        self.params = self.params.replace(
            mu_bar=sample_mu_bar(self.branching, self.catalog.length, self.prior, self.rng))
        sd = self.config.proposal_sd
        for block, update in zip(MH_BLOCKS, (mh_update_K_alpha, mh_update_c_p, mh_update_d_q)):
            self.params, accepted = update(self.params, self.branching, self.catalog, self.prior, self.rng,
                                           proposal_sd=sd, stats=self.stats)
            self.acceptance[block][0] += int(accepted)
            self.acceptance[block][1] += 1

    def step(self, iteration: int):
        if iteration % self.config.branching_update_every == 0:
            self.update_branching_and_background(iteration)
        self.update_parameters()

    def current_sample(self, iteration: int) -> PosteriorSample:
        return PosteriorSample(
            params=self.params,
            branching=self.branching,
            phi=self.phi,
            loglik_full=log_likelihood(self.catalog, self.params, self.phi),
            loglik_branched=branched_log_likelihood(self.catalog, self.params, self.phi, self.branching),
            n_immigrants=self.branching.n_immigrants,
            iteration=iteration,
        )

    def _log_progress(self, iteration: int):
        rates = ', '.join(f"{block}={acc / prop:.2f}" for block, (acc, prop) in self.acceptance.items() if prop)
        logger.info(f"iter {iteration}: immigrants={self.branching.n_immigrants}/{self.catalog.n}, "
                    f"{self._describe(self.params)}, acceptance {rates}")

    def run(self) -> 'Chain':
        burn_in = self.config.resolved_burn_in
        total = self.config.total_iterations
        samples = []
        for iteration in tqdm(range(total), desc=f"gibbs[{self.config.background}]",
                              disable=not self.config.show_progress):
            self.step(iteration)
            if iteration >= burn_in and (iteration - burn_in + 1) % self.config.thinning == 0:
                samples.append(self.current_sample(iteration))
            if (iteration + 1) % self.config.log_every == 0:
                self._log_progress(iteration + 1)

        chain = Chain(
            samples=samples,
            background=self.config.background,
            beta_gr=self.beta_gr,
            region=self.catalog.region,
            acceptance={block: list(counts) for block, counts in self.acceptance.items()},
            immigrant_trace=list(self.immigrant_trace),
            meta={
                'catalog_signature': catalog_signature(self.catalog),
                'burn_in': burn_in,
                'sampler_config': self.config.to_dict(),
                'kde_bandwidth': (self.phi.bandwidth.tolist() if isinstance(self.phi, KDEDensity) else None),
            },
        )
        rates = chain.acceptance_rates()
        logger.info(f"Chain finished: {len(samples)} samples, acceptance "
                    + ', '.join(f"{block}={rate:.3f}" for block, rate in rates.items()))
        return chain


def run_chain(catalog: Catalog, config: SamplerConfig, prior: Optional[PriorSpec] = None,
              dp_config: Optional[DPConfig] = None, rng: Optional[np.random.Generator] = None) -> Chain:
    """
    Run one chain of the blocked sampler

    Args:
        catalog: Non-empty catalog to fit
        config: Sampler settings (background variant included)
        prior: Prior specification (defaults when omitted)
        dp_config: DP settings (scale-adapted defaults when omitted)
        rng: Random generator (default: seeded from config.seed)

    Returns:
        Chain of config.n_samples posterior samples
    """
    return GibbsSampler(catalog, config, prior, dp_config, rng).run()


def _run_chain_worker(args) -> Chain:
    catalog, config, prior, dp_config, seed_sequence = args
    return run_chain(catalog, config, prior, dp_config, np.random.default_rng(seed_sequence))


def run_chains(catalog: Catalog, config: SamplerConfig, prior: Optional[PriorSpec] = None,
               dp_config: Optional[DPConfig] = None, n_chains: int = 1,
               workers: int = MAX_WORKERS) -> List[Chain]:
    """Independent chains on child streams of config.seed, in a process pool when workers > 1"""
    seeds = np.random.SeedSequence(config.seed).spawn(n_chains)
    jobs = [(catalog, config, prior, dp_config, seed) for seed in seeds]
    if workers <= 1 or n_chains == 1:
        return [_run_chain_worker(job) for job in jobs]
    logger.info(f"Running {n_chains} chains on {min(workers, n_chains)} workers")
    with ProcessPoolExecutor(max_workers=min(workers, n_chains)) as executor:
        return list(executor.map(_run_chain_worker, jobs))


def credible_intervals(chain: Chain, level: float = 0.95) -> pd.DataFrame:
    """Equal-tailed posterior intervals and means for every parameter"""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    rows = []
    for name in PARAM_NAMES:
        values = chain.param_array(name)
        rows.append({'param': name, 'mean': float(np.mean(values)),
                     'lower': float(np.quantile(values, tail)), 'upper': float(np.quantile(values, 1.0 - tail))})
    return pd.DataFrame(rows).set_index('param')


def load_chain(directory: Union[str, Path], catalog: Catalog) -> Chain:
    """
    Read a chain written by Chain.save. catalog must be the catalog it was
    fitted on; the KDE background is rebuilt from its points.
    """
    directory = Path(directory)
    try:
        with open(directory / 'chain_meta.json') as f:
            meta = json.load(f)
        frame = pd.read_csv(directory / 'chain.csv', float_precision='round_trip')
    except (OSError, ValueError) as e:
        raise SamplerError(f"could not read chain files in {directory}: {e}")

    signature = catalog_signature(catalog)
    if meta.get('catalog_signature') != signature:
        raise SamplerError(f"chain in {directory} was fitted on a different catalog "
                           f"({meta.get('catalog_signature')} vs {signature})")

    background = meta['background']
    beta_gr = float(meta['beta_gr'])
    region = Region(*meta['region'])
    if background == 'dp':
        dp = pd.read_csv(directory / 'dp_realizations.csv', float_precision='round_trip')
        groups = {int(index): group for index, group in dp.groupby('sample_index')}
        phis = [DPRealization.from_frame(groups[int(index)]) for index in frame['sample_index']]
    elif background == 'kde':
        shared = KDEDensity(catalog.points, np.asarray(meta['kde_bandwidth'], dtype=float))
        phis = [shared] * len(frame)
    else:
        shared = UniformDensity(region)
        phis = [shared] * len(frame)

    samples = []
    for (_, row), phi in zip(frame.iterrows(), phis):
        params = EtasParams(**{name: float(row[name]) for name in PARAM_NAMES}, beta_gr=beta_gr)
        samples.append(PosteriorSample(params=params, branching=None, phi=phi,
                                       loglik_full=float(row['loglik_full']),
                                       loglik_branched=float(row['loglik_branched']),
                                       n_immigrants=int(row['n_immigrants']), iteration=int(row['sample_index'])))
    trace = [tuple(item) for item in meta.pop('immigrant_trace', [])]
    acceptance = meta.pop('acceptance_counts', {})
    for key in ('background', 'beta_gr', 'region', 'acceptance_rates'):
        meta.pop(key, None)
    logger.info(f"Loaded {len(samples)} {background} samples from {directory}")
    return Chain(samples=samples, background=background, beta_gr=beta_gr, region=region,
                 acceptance=acceptance, immigrant_trace=trace, meta=meta)


def geweke_successive_conditional(prior: PriorSpec, region: Region, T: float, M0: float, beta_gr: float,
                                  n_iterations: int, rng: np.random.Generator,
                                  proposal_sd: float = DEFAULT_SAMPLER['proposal_sd']) -> pd.DataFrame:
    """
    Successive-conditional simulator: alternately regenerate a catalog (with
    its branching) from the current parameters and apply one blocked sweep
    with a uniform background. The parameter draws should follow the prior.

    Returns:
        DataFrame with one row of parameters per iteration
    """
    from simulator import SimulationSpec, simulate_catalog

    phi = UniformDensity(region)
    params = prior.sample(rng, beta_gr)
    rows = []
    for _ in range(n_iterations):
        simulated = simulate_catalog(SimulationSpec(params=params, phi=phi, region=region, T=T, M0=M0), rng=rng)
        catalog = simulated.catalog
        if catalog.n:
            branching = sample_branching(catalog, params, phi, rng)
        else:
            branching = BranchingVector.all_immigrants(0)
        stats = BranchingStats.build(catalog, branching)
        params = params.replace(mu_bar=sample_mu_bar(branching, catalog.length, prior, rng))
        for update in (mh_update_K_alpha, mh_update_c_p, mh_update_d_q):
            params, _ = update(params, branching, catalog, prior, rng, proposal_sd=proposal_sd, stats=stats)
        rows.append({name: getattr(params, name) for name in PARAM_NAMES})
    return pd.DataFrame(rows, columns=list(PARAM_NAMES))
