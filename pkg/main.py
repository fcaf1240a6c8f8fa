import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from background_models import BackgroundError, DPConfig, density_grid
from catalog import Catalog, CatalogError, Region, load_catalog, save_catalog, split_window
from config import (
    DEFAULT_DP,
    LOG_LEVEL,
    MAX_WORKERS,
    SYNTHETIC_PHI_NAMES,
    ConfigError,
    RunConfig,
    load_run_config,
)
from etas_kernels import EtasParams
from evaluation import (
    EvaluationError,
    compare_models,
    evaluate_model,
    reports_frame,
    save_report,
    summary_table,
)
from gibbs_sampler import PriorSpec, SamplerConfig, SamplerError, load_chain, run_chain, run_chains
from simulator import (
    SimulationError,
    SimulationSpec,
    forecast_summary,
    make_synthetic_phi,
    save_branching,
    simulate_catalog,
    synthetic_region,
)

logger = logging.getLogger(__name__)

# Exit code per error category; argparse itself exits with 2 on bad usage
ERROR_CATEGORIES = [
    (ConfigError, 'config', 2),
    (CatalogError, 'catalog', 3),
    (BackgroundError, 'background', 4),
    (SamplerError, 'sampler', 5),
    (SimulationError, 'simulation', 6),
    (EvaluationError, 'evaluation', 7),
    (OSError, 'io', 8),
]
INTERNAL_ERROR = ('internal', 1)


def setup_logging(out_dir: Path):
    """Log to run.log in the output directory and to stdout"""
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(out_dir / 'run.log'),
            logging.StreamHandler(sys.stdout),
        ],
        force=True,
    )


def classify_error(error: BaseException) -> Tuple[str, int]:
    for error_type, category, code in ERROR_CATEGORIES:
        if isinstance(error, error_type):
            return category, code
    return INTERNAL_ERROR


def _region(cfg: RunConfig) -> Region:
    try:
        return Region(*cfg.get_region())
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e))


def _load_catalog(cfg: RunConfig) -> Catalog:
    path = cfg.get_path('catalog_path', must_exist=True)
    return load_catalog(
        path,
        M0=cfg.get_float('M0'),
        region=_region(cfg),
        origin=cfg.get_str('origin') if cfg.has('origin') else None,
        T=cfg.get_float('T') if cfg.has('T') else None,
        drop_outside=cfg.get_bool('drop_outside', True),
    )


def _bandwidth(cfg: RunConfig) -> Optional[np.ndarray]:
    if not cfg.has('kde_bandwidth'):
        return None
    values = cfg.get_float_list('kde_bandwidth')
    if len(values) == 1:
        return np.eye(2) * values[0]
    if len(values) == 2:
        return np.diag(values)
    if len(values) == 4:
        return np.array(values).reshape(2, 2)
    raise ConfigError(f"kde_bandwidth takes 1, 2 or 4 numbers, got {len(values)}")


def cmd_simulate(cfg: RunConfig, out_dir: Path):
    """Simulate a synthetic catalog and write catalog.csv, branching.csv and spec.json"""
    phi_name = cfg.get_str('phi')
    if phi_name not in SYNTHETIC_PHI_NAMES:
        raise ConfigError(f"unknown phi '{phi_name}'; valid names are {', '.join(SYNTHETIC_PHI_NAMES)}")
    region = _region(cfg) if cfg.has('region') else synthetic_region(phi_name)
    try:
        params = EtasParams(**{name: cfg.get_float(name) for name in
                               ('mu_bar', 'K_bar', 'alpha', 'c', 'p', 'd', 'q', 'beta_gr')}).validate()
        spec = SimulationSpec(params=params, phi=make_synthetic_phi(phi_name), region=region,
                              T=cfg.get_float('T'), M0=cfg.get_float('M0'), seed=cfg.get_int('seed'))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e))

    simulated = simulate_catalog(spec)
    save_catalog(simulated.catalog, out_dir / 'catalog.csv')
    save_branching(simulated, out_dir / 'branching.csv')
    echo = {
        'phi': phi_name,
        'params': params.to_dict(),
        'region': list(region.bounds),
        'T': spec.T,
        'M0': spec.M0,
        'seed': spec.seed,
        'n_events': simulated.catalog.n,
        'n_immigrants': simulated.true_branching.n_immigrants,
        'branching_ratio': params.branching_ratio(),
    }
    with open(out_dir / 'spec.json', 'w') as f:
        json.dump(echo, f, indent=2)
    logger.info(f"Wrote {simulated.catalog.n} events to {out_dir / 'catalog.csv'}")


def cmd_fit(cfg: RunConfig, out_dir: Path):
    """Fit the sampler to a catalog (training part when t_split is set) and write the chain files"""
    catalog = _load_catalog(cfg)
    if cfg.has('t_split'):
        catalog, _ = split_window(catalog, cfg.get_float('t_split'))
    try:
        sampler = SamplerConfig(
            n_samples=cfg.get_int('n_samples'),
            thinning=cfg.get_int('thinning'),
            burn_in=cfg.get_int('burn_in') if cfg.has('burn_in') else None,
            branching_update_every=cfg.get_int('branching_update_every'),
            proposal_sd=cfg.get_float('proposal_sd'),
            seed=cfg.get_int('seed'),
            background=cfg.get_str('background'),
            kde_bandwidth=_bandwidth(cfg),
            crp_sweeps=cfg.get_int('crp_sweeps'),
            show_progress=sys.stderr.isatty(),
        )
        prior = PriorSpec(mu_shape=cfg.get_float('mu_shape'), mu_rate=cfg.get_float('mu_rate'))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e))

    dp_config = None
    if sampler.background == 'dp':
        dp_config = DPConfig.for_points(
            catalog.points,
            chi=cfg.get_float('dp_chi'),
            niw_rho=DEFAULT_DP['niw_rho'],
            niw_df=DEFAULT_DP['niw_df'],
            truncation_N=cfg.get_int('dp_truncation_N'),
            update_hyperparams=cfg.get_bool('dp_update_hyperparams'),
        )

    n_chains = cfg.get_int('n_chains')
    logger.info(f"Fitting {sampler.background} model to {catalog.n} events on [{catalog.t_start}, {catalog.T}], "
                f"{sampler.total_iterations} iterations x {n_chains} chain(s)")
    if n_chains == 1:
        chains = [run_chain(catalog, sampler, prior, dp_config)]
        chains[0].save(out_dir)
    else:
        chains = run_chains(catalog, sampler, prior, dp_config, n_chains=n_chains, workers=MAX_WORKERS)
        for index, chain in enumerate(chains):
            chain.save(out_dir / f"chain_{index}")

    for index, chain in enumerate(chains):
        rates = ', '.join(f"{block}={rate:.3f}" for block, rate in chain.acceptance_rates().items())
        trace = [count for _, count in chain.immigrant_trace]
        logger.info(f"Chain {index}: acceptance {rates}; immigrants min/mean/max "
                    f"{min(trace)}/{np.mean(trace):.1f}/{max(trace)} over {len(trace)} branching draws")


def _parse_chain_list(text: str) -> List[Tuple[str, Path]]:
    pairs = []
    for item in text.split(','):
        if not item.strip():
            continue
        if ':' not in item:
            raise ConfigError(f"chains entries look like name:directory, got {item!r}")
        name, directory = item.split(':', 1)
        directory = Path(directory.strip())
        if not directory.is_dir():
            raise ConfigError(f"chain directory for '{name.strip()}' does not exist: {directory}")
        pairs.append((name.strip(), directory))
    if not pairs:
        raise ConfigError("no chains given")
    return pairs


def cmd_evaluate(cfg: RunConfig, out_dir: Path):
    """Compute DIC and out-of-sample metrics per chain and write the comparison table"""
    chains = _parse_chain_list(cfg.get_str('chains'))
    catalog = _load_catalog(cfg)
    train, test = split_window(catalog, cfg.get_float('t_split'))
    every = cfg.get_int('oos_every')

    reports = []
    for name, directory in chains:
        try:
            chain = load_chain(directory, train)
            report = evaluate_model(name, chain, train, test, every=every)
        except (SamplerError, EvaluationError) as e:
            raise EvaluationError(f"model '{name}' ({directory}): {e}") from e
        save_report(report, out_dir)
        reports.append(report)

    table = compare_models(reports) if len(reports) > 1 else reports_frame(reports)
    table.to_csv(out_dir / 'comparison.csv', float_format='%.17g')
    text = summary_table(table)
    (out_dir / 'summary.txt').write_text(text)
    logger.info('Model comparison:\n' + text)


def cmd_forecast(cfg: RunConfig, out_dir: Path):
    """Monte Carlo forecast of the horizon after the history window"""
    history = _load_catalog(cfg)
    if cfg.has('t_split'):
        history, _ = split_window(history, cfg.get_float('t_split'))
    chain = load_chain(cfg.get_path('chain_dir', must_exist=True), history)
    horizon = (history.T, cfg.get_float('horizon_end'))
    if horizon[1] < horizon[0]:
        raise SimulationError(f"horizon end {horizon[1]} precedes the history end {history.T}")
    if cfg.has('thresholds'):
        thresholds = cfg.get_float_list('thresholds')
    else:
        thresholds = [history.M0, history.M0 + 1.0, history.M0 + 2.0]
    every = cfg.get_int('sample_every')
    rng = np.random.default_rng(cfg.get_int('seed'))

    summary = forecast_summary(history, chain.samples, horizon, thresholds,
                               n_sims=cfg.get_int('n_sims'), rng=rng, every=every)
    summary['samples'].to_csv(out_dir / 'forecast_samples.csv', index=False, float_format='%.17g')
    summary['probabilities'].to_csv(out_dir / 'forecast_probabilities.csv', index=False, float_format='%.17g')
    summary['counts'].to_csv(out_dir / 'count_distribution.csv', index=False, float_format='%.17g')

    # shared densities (uniform, KDE) are averaged once
    phis = list({id(phi): phi for phi in chain.phis[::max(1, every)]}.values())
    grid = density_grid(phis, chain.region, cfg.get_int('grid_resolution'))
    grid.to_csv(out_dir / 'phi_grid.csv', index=False, float_format='%.17g')
    for row in summary['probabilities'].itertuples():
        logger.info(f"P(at least one m >= {row.threshold:g} in [{horizon[0]:g}, {horizon[1]:g}]) = "
                    f"{row.probability:.4f} +/- {row.std_error:.4f}")


COMMANDS: Dict[str, Callable[[RunConfig, Path], None]] = {
    'simulate': cmd_simulate,
    'fit': cmd_fit,
    'evaluate': cmd_evaluate,
    'forecast': cmd_forecast,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key=value configuration file')
    common.add_argument('--seed', type=int, help='random seed (overrides the config file)')
    common.add_argument('--out', help='output directory (default: runs/<command>)')
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='override one configuration key; may be repeated')

    parser = argparse.ArgumentParser(description='Bayesian spatio-temporal ETAS: simulate, fit, evaluate, forecast')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, handler in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=handler.__doc__)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out_dir = Path(args.out or Path('runs') / args.command)
        out_dir.mkdir(parents=True, exist_ok=True)
        setup_logging(out_dir)
        cfg = load_run_config(args.command, args.config, args.set, args.seed)
        cfg.write(out_dir)
        COMMANDS[args.command](cfg, out_dir)
        return 0
    except Exception as e:
        category, code = classify_error(e)
        message = ' '.join(str(e).split())
        logger.error(f"{args.command} failed ({category}): {message}", exc_info=category == 'internal')
        print(f"error: {category}: {message}", file=sys.stderr)
        return code


if __name__ == '__main__':
    sys.exit(main())
