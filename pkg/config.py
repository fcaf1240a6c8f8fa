import os
import math
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from dotenv import load_dotenv, dotenv_values

logger = logging.getLogger(__name__)

# Environment overrides (a .env file next to the run is honoured)
load_dotenv()
LOG_LEVEL = os.getenv('ETAS_LOG_LEVEL', 'INFO').upper()
MAX_WORKERS = int(os.getenv('ETAS_WORKERS', '1'))


class ConfigError(ValueError):
    """Raised when a run configuration is missing a key or holds an unparseable value."""


# Triggering parameters estimated for the Tohoku District catalog, used by all synthetic studies
TOHOKU_PARAMS = {
    'K_bar': 0.322,
    'alpha': 1.407,
    'p': 1.121,
    'c': 0.0353,
    'd': 0.0159,
    'q': 1.531,
}

# Synthetic setup: denser catalogs than the original parameterisation
SYNTHETIC_SETUP = {
    'mu_bar': 0.325,
    'M0': 2.0,
    'T': 300.0,
    'T_test_end': 350.0,
    'beta_gr': math.log(10.0),  # b-value of 1
}

# Regions used when a synthetic background density is simulated
SYNTHETIC_REGIONS = {
    'phi1': (-4.0, 4.0, -4.0, 4.0),
    'phi2': (-4.0, 4.0, -4.0, 4.0),
    'phi3': (-2.0, 2.0, -6.0, 8.0),
}

# Fault-line density defaults
PHI3_DEFAULTS = {
    'a': 1.0,
    'b': 2.0,
    'sigma_eps': 0.5,
    'x_range': (-2.0, 2.0),
}

# Sampler defaults
DEFAULT_SAMPLER = {
    'n_samples': 12000,          # retained, after thinning
    'thinning': 10,
    'burn_in': None,             # None -> 10% of all iterations, burn-in included
    'branching_update_every': 50,
    'proposal_sd': 0.1,
    'crp_sweeps': 5,
    'max_init_attempts': 10000,
    'log_every': 1000,
}

# Uniform prior boxes; d and q are unbounded above
DEFAULT_PRIOR = {
    'alpha': (0.0, 10.0),
    'c': (0.0, 10.0),
    'p': (1.0, 30.0),
    'K_bar': (0.0, 30.0),
    'd': (0.0, math.inf),
    'q': (1.0, math.inf),
    'mu_shape': 0.1,
    'mu_rate': 0.1,
    # finite boxes for initial values of the unbounded parameters
    'd_init': (0.0, 1.0),
    'q_init': (1.0, 3.0),
}

DEFAULT_DP = {
    'chi': 1.0,
    'niw_rho': 0.01,
    'niw_df': 4.0,
    'truncation_N': 50,
    'update_hyperparams': False,
}

# Posterior predictive evaluation uses every 50th retained sample
DEFAULT_OOS_EVERY = 50

BACKGROUND_MODELS = ('uniform', 'kde', 'dp')
SYNTHETIC_PHI_NAMES = ('phi1', 'phi2', 'phi3')

# Parameter grid for the large simulation study (mu_bar, c, p fixed)
param_grid = {
    'alpha': [1.0, 1.3, 1.6, 1.9],
    'K_bar': [0.1, 0.3, 0.5],
    'd': [0.01, 0.255, 0.5],
    'q': [1.10, 1.55, 2.0],
}

# Settings each subcommand understands, with their defaults ('' = required)
COMMAND_DEFAULTS = {
    'simulate': {
        'phi': 'phi1',
        'mu_bar': str(SYNTHETIC_SETUP['mu_bar']),
        'K_bar': str(TOHOKU_PARAMS['K_bar']),
        'alpha': str(TOHOKU_PARAMS['alpha']),
        'c': str(TOHOKU_PARAMS['c']),
        'p': str(TOHOKU_PARAMS['p']),
        'd': str(TOHOKU_PARAMS['d']),
        'q': str(TOHOKU_PARAMS['q']),
        'beta_gr': repr(SYNTHETIC_SETUP['beta_gr']),
        'M0': str(SYNTHETIC_SETUP['M0']),
        'T': str(SYNTHETIC_SETUP['T_test_end']),
        'region': '',
        'seed': '0',
    },
    'fit': {
        'catalog_path': '',
        'M0': '',
        'region': '',
        'origin': '',
        'T': '',
        'drop_outside': 'true',
        't_split': '',
        'background': 'dp',
        'n_samples': str(DEFAULT_SAMPLER['n_samples']),
        'thinning': str(DEFAULT_SAMPLER['thinning']),
        'burn_in': '',
        'branching_update_every': str(DEFAULT_SAMPLER['branching_update_every']),
        'proposal_sd': str(DEFAULT_SAMPLER['proposal_sd']),
        'crp_sweeps': str(DEFAULT_SAMPLER['crp_sweeps']),
        'kde_bandwidth': '',
        'dp_chi': str(DEFAULT_DP['chi']),
        'dp_truncation_N': str(DEFAULT_DP['truncation_N']),
        'dp_update_hyperparams': str(DEFAULT_DP['update_hyperparams']),
        'mu_shape': str(DEFAULT_PRIOR['mu_shape']),
        'mu_rate': str(DEFAULT_PRIOR['mu_rate']),
        'n_chains': '1',
        'seed': '0',
    },
    'evaluate': {
        'catalog_path': '',
        'M0': '',
        'region': '',
        'origin': '',
        'T': '',
        'drop_outside': 'true',
        't_split': '',
        'chains': '',
        'oos_every': str(DEFAULT_OOS_EVERY),
        'seed': '0',
    },
    'forecast': {
        'catalog_path': '',
        'M0': '',
        'region': '',
        'origin': '',
        'T': '',
        'drop_outside': 'true',
        't_split': '',
        'chain_dir': '',
        'horizon_end': '',
        'thresholds': '',
        'n_sims': '10',
        'sample_every': '1',
        'grid_resolution': '50',
        'seed': '0',
    },
}


def parse_region(text: str) -> Tuple[float, float, float, float]:
    """
    Parse a region written as 'x_min,x_max,y_min,y_max'

    Args:
        text: Comma separated bounds

    Returns:
        Tuple of the four bounds as floats
    """
    parts = [part.strip() for part in str(text).split(',')]
    if len(parts) != 4:
        raise ConfigError(f"region must be 'x_min,x_max,y_min,y_max', got {text!r}")
    try:
        return tuple(float(part) for part in parts)
    except ValueError:
        raise ConfigError(f"region bounds must be numbers, got {text!r}")


class RunConfig:
    """Resolved key/value settings for one subcommand"""

    def __init__(self, command: str, values: Dict[str, str]):
        self.command = command
        self.values = dict(values)

    def has(self, key: str) -> bool:
        return self.values.get(key, '') not in ('', None)

    def get_str(self, key: str, default: Optional[str] = None) -> str:
        value = self.values.get(key, '')
        if value in ('', None):
            if default is not None:
                return default
            raise ConfigError(f"missing required setting '{key}' for '{self.command}'")
        return str(value)

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        if not self.has(key) and default is not None:
            return default
        raw = self.get_str(key)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"setting '{key}' must be a number, got {raw!r}")

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        if not self.has(key) and default is not None:
            return default
        raw = self.get_str(key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"setting '{key}' must be an integer, got {raw!r}")

    def get_bool(self, key: str, default: Optional[bool] = None) -> bool:
        if not self.has(key) and default is not None:
            return default
        raw = self.get_str(key).strip().lower()
        if raw in ('1', 'true', 'yes', 'on'):
            return True
        if raw in ('0', 'false', 'no', 'off'):
            return False
        raise ConfigError(f"setting '{key}' must be a boolean, got {raw!r}")

    def get_path(self, key: str, must_exist: bool = True) -> Path:
        path = Path(self.get_str(key))
        if must_exist and not path.exists():
            raise ConfigError(f"path for '{key}' does not exist: {path}")
        return path

    def get_region(self, key: str = 'region') -> Tuple[float, float, float, float]:
        return parse_region(self.get_str(key))

    def get_float_list(self, key: str) -> List[float]:
        raw = self.get_str(key)
        try:
            return [float(part) for part in raw.split(',') if part.strip()]
        except ValueError:
            raise ConfigError(f"setting '{key}' must be a comma separated list of numbers, got {raw!r}")

    def to_text(self) -> str:
        """Render as key=value lines, sorted for diff-friendly output"""
        lines = [f"# resolved configuration for '{self.command}'"]
        for key in sorted(self.values):
            lines.append(f"{key}={self.values[key]}")
        return '\n'.join(lines) + '\n'

    def write(self, directory: Path) -> Path:
        path = Path(directory) / 'resolved_config.txt'
        path.write_text(self.to_text())
        return path


def load_run_config(command: str, path: Optional[str] = None, overrides: Optional[List[str]] = None,
                    seed: Optional[int] = None) -> RunConfig:
    """
    Build the run configuration for a subcommand

    Defaults are filled first, then the key=value file, then '--set key=value'
    overrides, then the --seed flag.

    Args:
        command: Subcommand name
        path: Optional config file in flat key=value format
        overrides: List of 'key=value' strings
        seed: Optional seed overriding the file

    Returns:
        RunConfig with every known key resolved
    """
    if command not in COMMAND_DEFAULTS:
        raise ConfigError(f"unknown command '{command}'")
    values = dict(COMMAND_DEFAULTS[command])

    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        file_values = dotenv_values(path)
        for key, value in file_values.items():
            values[key] = '' if value is None else value
        logger.debug(f"Loaded {len(file_values)} settings from {path}")

    for item in overrides or []:
        if '=' not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split('=', 1)
        values[key.strip()] = value.strip()

    if seed is not None:
        values['seed'] = str(seed)

    unknown = sorted(set(values) - set(COMMAND_DEFAULTS[command]))
    if unknown:
        logger.warning(f"Ignoring settings not used by '{command}': {', '.join(unknown)}")

    return RunConfig(command, values)
