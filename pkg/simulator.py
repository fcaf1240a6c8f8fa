"""
Forward simulation of ETAS catalogs through the branching construction, and
posterior-predictive continuation of an observed catalog for forecasting.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import norm

from background_models import BackgroundDensity, GaussianMixtureDensity
from catalog import Catalog, Region
from config import PHI3_DEFAULTS, SYNTHETIC_PHI_NAMES, SYNTHETIC_REGIONS
from etas_kernels import BranchingVector, EtasParams, omori_survival

logger = logging.getLogger(__name__)

# Hard cap on the number of events in one simulation
MAX_EVENTS = 1_000_000


class SimulationError(RuntimeError):
    """Raised for supercritical parameters, runaway generation or invalid forecast horizons."""


class FaultLineDensity(BackgroundDensity):
    """x ~ Uniform(x_range), y = a + b x + eps with eps ~ N(0, sigma_eps^2)"""
    kind = 'fault'

    def __init__(self, a: float = PHI3_DEFAULTS['a'], b: float = PHI3_DEFAULTS['b'],
                 sigma_eps: float = PHI3_DEFAULTS['sigma_eps'], x_range: Tuple[float, float] = PHI3_DEFAULTS['x_range']):
        if not (sigma_eps > 0 and x_range[0] < x_range[1]):
            raise ValueError(f"invalid fault parameters sigma_eps={sigma_eps}, x_range={x_range}")
        self.a = a
        self.b = b
        self.sigma_eps = sigma_eps
        self.x_range = tuple(x_range)

    def evaluate(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        inside = (x >= self.x_range[0]) & (x <= self.x_range[1])
        width = self.x_range[1] - self.x_range[0]
        values = np.where(inside, norm.pdf(y, loc=self.a + self.b * x, scale=self.sigma_eps) / width, 0.0)
        return float(values) if values.ndim == 0 else values

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x = rng.uniform(self.x_range[0], self.x_range[1], n)
        return np.column_stack([x, self.a + self.b * x + rng.normal(0.0, self.sigma_eps, n)])


def make_synthetic_phi(name: str, **overrides) -> BackgroundDensity:
    """
    Synthetic background densities used by the simulation studies

    phi1 is a standard bivariate normal, phi2 an equal-weight mixture of two
    normals at (-1,-1) and (1,1) with per-axis sd 0.4, phi3 a noisy fault line.
    """
    if name == 'phi1':
        return GaussianMixtureDensity([1.0], [[0.0, 0.0]], [np.eye(2)])
    if name == 'phi2':
        sd = overrides.get('sd', 0.4)
        cov = np.eye(2) * sd ** 2
        return GaussianMixtureDensity([0.5, 0.5], [[-1.0, -1.0], [1.0, 1.0]], [cov, cov])
    if name == 'phi3':
        return FaultLineDensity(**overrides)
    raise ValueError(f"unknown synthetic density '{name}'; valid names are {', '.join(SYNTHETIC_PHI_NAMES)}")


def synthetic_region(name: str) -> Region:
    if name not in SYNTHETIC_REGIONS:
        raise ValueError(f"unknown synthetic density '{name}'; valid names are {', '.join(SYNTHETIC_PHI_NAMES)}")
    return Region(*SYNTHETIC_REGIONS[name])


@dataclass(frozen=True, eq=False)
class SimulationSpec:
    params: EtasParams
    phi: Union[BackgroundDensity, str]
    region: Region
    T: float
    M0: float
    seed: Optional[int] = None
    t_start: float = 0.0

    def __post_init__(self):
        if not self.T > self.t_start:
            raise ValueError(f"T must exceed the window start, got T={self.T}")
        self.params.validate()

    def resolved_phi(self) -> BackgroundDensity:
        if isinstance(self.phi, str):
            return make_synthetic_phi(self.phi)
        return self.phi


@dataclass(frozen=True, eq=False)
class SimulatedCatalog:
    catalog: Catalog
    true_branching: BranchingVector
    generations: np.ndarray


def sample_omori_interval(lower, upper, c: float, p: float, rng: np.random.Generator):
    """
    Inverse-CDF draw of Omori elapsed times restricted to (lower, upper]

    upper may be inf for the untruncated law.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    s_low = omori_survival(lower, c, p)
    s_high = np.where(np.isinf(upper), 0.0, omori_survival(np.where(np.isinf(upper), 0.0, upper), c, p))
    u = rng.random(np.broadcast(lower, upper).shape)
    s = s_low - u * (s_low - s_high)
    z = c * np.power(s, -1.0 / (p - 1.0)) - c
    return np.clip(z, lower, upper)


def radial_offset(u, d: float, q: float):
    """Inverse CDF of the power-law radial distance, P(R <= r) = 1 - (d / (r^2 + d))^(q-1)"""
    u = np.asarray(u, dtype=float)
    return np.sqrt(d * (np.power(1.0 - u, -1.0 / (q - 1.0)) - 1.0))


def _check_stable(params: EtasParams):
    if not params.is_stable():
        raise SimulationError(f"parameters are not subcritical: branching ratio {params.branching_ratio():.4f} "
                              f"(alpha={params.alpha}, beta={params.beta_gr}, K_bar={params.K_bar})")


class _EventPool:
    """Growing event table for one simulation, with parent and generation bookkeeping"""

    def __init__(self):
        self.columns = {name: [] for name in ('t', 'm', 'x', 'y', 'parent', 'generation')}
        self.size = 0

    def extend(self, t, m, x, y, parent, generation: int) -> np.ndarray:
        n = len(t)
        if self.size + n > MAX_EVENTS:
            raise SimulationError(f"simulation exceeded {MAX_EVENTS} events at generation {generation}; "
                                  f"the parameters are too close to criticality")
        for name, values in (('t', t), ('m', m), ('x', x), ('y', y), ('parent', parent)):
            self.columns[name].append(np.asarray(values))
        self.columns['generation'].append(np.full(n, generation, dtype=np.int64))
        indices = np.arange(self.size, self.size + n)
        self.size += n
        return indices

    def arrays(self) -> Dict[str, np.ndarray]:
        out = {}
        for name, chunks in self.columns.items():
            dtype = np.int64 if name in ('parent', 'generation') else float
            out[name] = np.concatenate(chunks).astype(dtype) if chunks else np.zeros(0, dtype=dtype)
        return out


def _magnitudes(n: int, params: EtasParams, M0: float, rng: np.random.Generator) -> np.ndarray:
    return M0 + rng.exponential(1.0 / params.beta_gr, n)


def _spawn_offspring(pool: _EventPool, params: EtasParams, M0: float, parents: np.ndarray, t_parent, m_parent,
                     x_parent, y_parent, lower, upper, t_bounds: Tuple[float, float], generation: int,
                     rng: np.random.Generator) -> np.ndarray:
    """
    Draw the direct offspring of the given events with elapsed times in (lower, upper].
    Child times are clipped to t_bounds, which parent time plus elapsed time can overshoot by rounding.
    """
    mass = omori_survival(lower, params.c, params.p) - omori_survival(upper, params.c, params.p)
    expected = params.K_bar * np.exp(params.alpha * (m_parent - M0)) * mass
    counts = rng.poisson(np.maximum(expected, 0.0))
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    if pool.size + total > MAX_EVENTS:
        raise SimulationError(f"simulation exceeded {MAX_EVENTS} events at generation {generation}; "
                              f"the parameters are too close to criticality")
    which = np.repeat(np.arange(len(parents)), counts)
    z = sample_omori_interval(np.asarray(lower)[which], np.asarray(upper)[which], params.c, params.p, rng)
    r = radial_offset(rng.random(total), params.d, params.q)
    angle = rng.uniform(0.0, 2.0 * math.pi, total)
    return pool.extend(
        t=np.clip(t_parent[which] + z, *t_bounds),
        m=_magnitudes(total, params, M0, rng),
        x=x_parent[which] + r * np.cos(angle),
        y=y_parent[which] + r * np.sin(angle),
        parent=parents[which],
        generation=generation,
    )


def _cascade(pool: _EventPool, params: EtasParams, M0: float, start: np.ndarray, horizon_end: float,
             first_generation: int, rng: np.random.Generator):
    """Recursively add offspring of the events at indices start until a generation is empty"""
    current = start
    generation = first_generation
    while current.size:
        cols = pool.arrays()
        t_parent = cols['t'][current]
        current = _spawn_offspring(
            pool, params, M0, current, t_parent, cols['m'][current], cols['x'][current], cols['y'][current],
            lower=np.zeros(current.size), upper=horizon_end - t_parent, t_bounds=(-np.inf, horizon_end),
            generation=generation, rng=rng,
        )
        if current.size:
            logger.debug(f"Generation {generation}: {current.size} events")
        generation += 1


def _sorted_output(cols: Dict[str, np.ndarray], T: float, M0: float, region: Region, t_start: float):
    """Order events by (time, generation) and remap parent indices to 1-based positions"""
    order = np.lexsort((cols['generation'], cols['t']))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    old_parents = cols['parent'][order]
    parents = np.where(old_parents < 0, 0, rank[np.maximum(old_parents, 0)] + 1)
    catalog = Catalog.from_arrays(cols['t'][order], cols['m'][order], cols['x'][order], cols['y'][order],
                                  T=T, M0=M0, region=region, t_start=t_start)
    return catalog, BranchingVector(parents), cols['generation'][order]


def simulate_catalog(spec: SimulationSpec, rng: Optional[np.random.Generator] = None) -> SimulatedCatalog:
    """
    Simulate an ETAS catalog on [t_start, T] through the branching construction

    Immigrants are a homogeneous Poisson process in time with locations from
    phi. Every event spawns a Poisson number of direct offspring whose times
    follow the Omori law truncated at T and whose offsets follow the
    power-law radial law. Offspring outside the region are kept.

    Args:
        spec: Simulation specification
        rng: Random generator (default: seeded from spec.seed)

    Returns:
        SimulatedCatalog with the true branching structure
    """
    params = spec.params
    _check_stable(params)
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    phi = spec.resolved_phi()
    length = spec.T - spec.t_start

    pool = _EventPool()
    n_immigrants = int(rng.poisson(params.mu_bar * length))
    locations = phi.sample(n_immigrants, rng)
    immigrants = pool.extend(
        t=rng.uniform(spec.t_start, spec.T, n_immigrants),
        m=_magnitudes(n_immigrants, params, spec.M0, rng),
        x=locations[:, 0], y=locations[:, 1],
        parent=np.full(n_immigrants, -1, dtype=np.int64),
        generation=0,
    )
    _cascade(pool, params, spec.M0, immigrants, spec.T, first_generation=1, rng=rng)

    catalog, branching, generations = _sorted_output(pool.arrays(), spec.T, spec.M0, spec.region, spec.t_start)
    logger.info(f"Simulated {catalog.n} events ({n_immigrants} immigrants, "
                f"{int(generations.max()) if catalog.n else 0} generations) on [{spec.t_start}, {spec.T}]")
    return SimulatedCatalog(catalog=catalog, true_branching=branching, generations=generations)


def simulate_forecast(history: Catalog, sample, horizon: Tuple[float, float], rng: np.random.Generator) -> Catalog:
    """
    Simulate one continuation of history on the horizon [T, U] under one posterior sample

    Combines the offspring of historical events falling in (T, U], new
    immigrants on [T, U] and the full offspring cascade inside the horizon.

    Args:
        history: Observed catalog, ending at or before T
        sample: Posterior sample exposing params and phi
        horizon: (T, U) with T >= history.T and U >= T
        rng: Random generator

    Returns:
        Catalog of the simulated events observed on [T, U]
    """
    start, end = float(horizon[0]), float(horizon[1])
    if start < history.T:
        raise SimulationError(f"forecast horizon starts at {start}, before the history ends at {history.T}")
    if end < start:
        raise SimulationError(f"forecast horizon end {end} precedes its start {start}")
    params = sample.params
    _check_stable(params)

    pool = _EventPool()
    if end > start:
        if history.n and params.K_bar > 0:
            direct = _spawn_offspring(
                pool, params, history.M0, np.full(history.n, -1, dtype=np.int64),
                history.t, history.m, history.x, history.y,
                lower=start - history.t, upper=end - history.t, t_bounds=(start, end),
                generation=1, rng=rng,
            )
        else:
            direct = np.zeros(0, dtype=np.int64)
        n_immigrants = int(rng.poisson(params.mu_bar * (end - start)))
        locations = sample.phi.sample(n_immigrants, rng)
        immigrants = pool.extend(
            t=rng.uniform(start, end, n_immigrants),
            m=_magnitudes(n_immigrants, params, history.M0, rng),
            x=locations[:, 0], y=locations[:, 1],
            parent=np.full(n_immigrants, -1, dtype=np.int64),
            generation=0,
        )
        _cascade(pool, params, history.M0, np.concatenate([direct, immigrants]), end, first_generation=2, rng=rng)

    catalog, _, _ = _sorted_output(pool.arrays(), end, history.M0, history.region, start)
    return catalog


def forecast_summary(history: Catalog, samples: Sequence, horizon: Tuple[float, float],
                     thresholds: Iterable[float], n_sims: int, rng: np.random.Generator,
                     every: int = 1) -> Dict[str, pd.DataFrame]:
    """
    Monte Carlo forecast over posterior samples

    Runs n_sims continuations for every every-th sample and reports the event
    count distribution and P(at least one event with m >= threshold) for each
    threshold, with binomial standard errors.

    Returns:
        Dict with 'samples', 'probabilities' and 'counts' DataFrames
    """
    thresholds = sorted(float(th) for th in thresholds)
    rows = []
    for index in range(0, len(samples), max(1, int(every))):
        sample = samples[index]
        for sim in range(n_sims):
            continuation = simulate_forecast(history, sample, horizon, rng)
            row = {'sample_index': index, 'simulation': sim, 'n_events': continuation.n,
                   'max_magnitude': float(continuation.m.max()) if continuation.n else math.nan}
            rows.append(row)
    per_sim = pd.DataFrame(rows, columns=['sample_index', 'simulation', 'n_events', 'max_magnitude'])
    if per_sim.empty:
        raise SimulationError("no posterior samples to forecast from")

    n_total = len(per_sim)
    probabilities = []
    for threshold in thresholds:
        hits = (per_sim['max_magnitude'] >= threshold).to_numpy()
        prob = float(hits.mean())
        probabilities.append({'threshold': threshold, 'probability': prob,
                              'std_error': math.sqrt(prob * (1.0 - prob) / n_total)})
    counts = per_sim['n_events'].value_counts().sort_index()
    count_distribution = pd.DataFrame({'n_events': counts.index.astype(int),
                                       'frequency': counts.to_numpy() / n_total})
    logger.info(f"Forecast over [{horizon[0]}, {horizon[1]}]: {n_total} simulations, "
                f"mean count {per_sim['n_events'].mean():.3f}")
    return {'samples': per_sim, 'probabilities': pd.DataFrame(probabilities), 'counts': count_distribution}


def save_branching(simulated: SimulatedCatalog, path: Union[str, Path]) -> Path:
    """Write (child_index, parent_index) rows, 1-based, parent 0 for immigrants"""
    path = Path(path)
    parents = simulated.true_branching.parents
    pd.DataFrame({'child_index': np.arange(1, parents.size + 1), 'parent_index': parents}).to_csv(path, index=False)
    return path
