"""
Reduced-scale simulation study: for each admissible triggering parameter set
and each synthetic background, simulate a catalog, fit the KDE and DP models
on the training window and compare them on the extension window.
"""

import logging
import math
from itertools import product
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from catalog import catalog_area, split_window
from config import SYNTHETIC_PHI_NAMES, SYNTHETIC_SETUP, TOHOKU_PARAMS, DEFAULT_OOS_EVERY, param_grid
from etas_kernels import EtasParams
from evaluation import compare_models, evaluate_model
from gibbs_sampler import SamplerConfig, run_chain
from simulator import SimulationSpec, simulate_catalog, synthetic_region

logger = logging.getLogger(__name__)

STUDY_MODELS = ('kde', 'dp')


def parameter_grid(grid: Dict[str, List[float]] = param_grid,
                   beta_gr: float = SYNTHETIC_SETUP['beta_gr']) -> List[EtasParams]:
    """
    Expand the grid into parameter sets with mu_bar, c and p held at the study
    values; supercritical combinations are left out.
    """
    names = list(grid.keys())
    combinations = [dict(zip(names, values)) for values in product(*[grid[name] for name in names])]
    base = {
        'mu_bar': SYNTHETIC_SETUP['mu_bar'],
        'K_bar': TOHOKU_PARAMS['K_bar'],
        'alpha': TOHOKU_PARAMS['alpha'],
        'c': TOHOKU_PARAMS['c'],
        'p': TOHOKU_PARAMS['p'],
        'd': TOHOKU_PARAMS['d'],
        'q': TOHOKU_PARAMS['q'],
        'beta_gr': beta_gr,
    }
    admissible = []
    for combination in combinations:
        values = dict(base)
        values.update(combination)
        params = EtasParams(**values)
        if params.is_stable():
            admissible.append(params)
    logger.info(f"Parameter grid: {len(admissible)} of {len(combinations)} combinations are subcritical")
    return admissible


def _winner(table: pd.DataFrame, rank_column: str) -> str:
    leaders = table.index[table[rank_column] == 1]
    return leaders[0] if len(leaders) == 1 else 'tie'


def run_grid_study(phi_names: Iterable[str] = SYNTHETIC_PHI_NAMES,
                   grid: Dict[str, List[float]] = param_grid,
                   sampler_overrides: Optional[Dict] = None,
                   seed: int = 0,
                   max_sets: Optional[int] = None,
                   oos_every: int = DEFAULT_OOS_EVERY) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Run the simulate / fit / compare loop over the grid

    Args:
        phi_names: Synthetic backgrounds to simulate from
        grid: Parameter grid (see config.param_grid)
        sampler_overrides: SamplerConfig fields for both fits (keep small)
        seed: Master seed; every catalog and chain gets its own child stream
        max_sets: Optional cap on the number of parameter sets
        oos_every: Out-of-sample evaluation cadence

    Returns:
        (one row per catalog, DP win counts per background and metric)
    """
    parameter_sets = parameter_grid(grid)
    if max_sets is not None:
        parameter_sets = parameter_sets[:max_sets]
    phi_names = list(phi_names)
    overrides = dict(sampler_overrides or {})
    overrides.setdefault('show_progress', False)
    streams = iter(np.random.SeedSequence(seed).spawn(len(parameter_sets) * len(phi_names) * 3))

    rows = []
    for params in parameter_sets:
        for phi_name in phi_names:
            spec = SimulationSpec(params=params, phi=phi_name, region=synthetic_region(phi_name),
                                  T=SYNTHETIC_SETUP['T_test_end'], M0=SYNTHETIC_SETUP['M0'])
            simulated = simulate_catalog(spec, rng=np.random.default_rng(next(streams)))
            train, test = split_window(simulated.catalog, SYNTHETIC_SETUP['T'])
            fit_streams = {model: next(streams) for model in STUDY_MODELS}
            if train.n < 2:
                logger.warning(f"Skipping {phi_name} with {params}: only {train.n} training events")
                continue

            reports = []
            for model in STUDY_MODELS:
                config = SamplerConfig(background=model, **overrides)
                chain = run_chain(train, config, rng=np.random.default_rng(fit_streams[model]))
                reports.append(evaluate_model(model, chain, train, test, every=oos_every))
            table = compare_models(reports)

            row = {'phi': phi_name}
            row.update({name: getattr(params, name) for name in ('alpha', 'K_bar', 'd', 'q')})
            row.update({
                'n_train': train.n,
                'n_test': test.n,
                'area': catalog_area(train),
                'immigrant_proportion': simulated.true_branching.n_immigrants / max(simulated.catalog.n, 1),
            })
            for model in STUDY_MODELS:
                row[f'dic_{model}'] = table.loc[model, 'dic']
                row[f'oos_mean_{model}'] = table.loc[model, 'oos_mean_loglik']
                row[f'oos_max_{model}'] = table.loc[model, 'oos_max_loglik']
            row['winner_dic'] = _winner(table, 'rank_dic')
            row['winner_oos_max'] = _winner(table, 'rank_oos_max')
            row['winner_oos_mean'] = _winner(table, 'rank_oos_mean')
            rows.append(row)
            logger.info(f"{phi_name} alpha={params.alpha} K_bar={params.K_bar} d={params.d} q={params.q}: "
                        f"DIC winner {row['winner_dic']}, mean oos winner {row['winner_oos_mean']}")

    results = pd.DataFrame(rows)
    if results.empty:
        return results, pd.DataFrame()
    wins = results.groupby('phi')[['winner_dic', 'winner_oos_max', 'winner_oos_mean']].agg(
        lambda column: int((column == 'dp').sum()))
    wins['n_catalogs'] = results.groupby('phi').size()
    return results, wins


def area_threshold_split(results: pd.DataFrame, metric: str = 'winner_oos_mean') -> pd.DataFrame:
    """DP win rate for catalogs below and above the median convex-hull area"""
    if results.empty:
        return pd.DataFrame()
    median = float(results['area'].median())
    bands = np.where(results['area'] <= median, 'small_area', 'large_area')
    rates = results.assign(band=bands, dp_win=(results[metric] == 'dp').astype(float)).groupby('band')['dp_win']
    summary = rates.agg(['mean', 'count']).rename(columns={'mean': 'dp_win_rate'})
    summary['median_area'] = median if math.isfinite(median) else np.nan
    return summary
