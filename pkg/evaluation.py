"""
Model evaluation: DIC with the variance-based complexity term, out-of-sample
posterior predictive log-likelihood, and model comparison tables.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

from catalog import Catalog, catalog_signature
from config import DEFAULT_OOS_EVERY
from etas_kernels import log_likelihood

logger = logging.getLogger(__name__)

# Plug-in used for the deviance term; the DP background has no usable posterior mean
PLUGIN_RULE = 'chain_max'


class EvaluationError(ValueError):
    """Raised for too-short chains, empty chains and mismatched data splits."""


@dataclass
class EvaluationReport:
    model: str
    dic: float
    p_dic_alt: float
    insample_max_loglik: float
    oos_mean_loglik: float
    oos_max_loglik: float
    oos_series: np.ndarray
    sample_indices: np.ndarray
    split_signature: str = ''
    plugin: str = PLUGIN_RULE
    meta: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'sample_index': self.sample_indices, 'oos_loglik': self.oos_series})

    def summary(self) -> dict:
        return {
            'model': self.model,
            'dic': self.dic,
            'p_dic_alt': self.p_dic_alt,
            'insample_max_loglik': self.insample_max_loglik,
            'oos_mean_loglik': self.oos_mean_loglik,
            'oos_max_loglik': self.oos_max_loglik,
            'n_oos_samples': int(len(self.oos_series)),
            'plugin': self.plugin,
        }


def split_signature(train: Catalog, test: Catalog) -> str:
    return f"{catalog_signature(train)}|{catalog_signature(test)}"


def _check_chain_catalog(chain, catalog: Catalog):
    expected = getattr(chain, 'meta', {}).get('catalog_signature')
    if expected is not None and expected != catalog_signature(catalog):
        raise EvaluationError(f"chain was fitted on a different catalog ({expected})")


def compute_dic(chain, catalog: Catalog = None) -> Tuple[float, float]:
    """
    DIC = -2 l_plug + 2 p_dic_alt, with p_dic_alt = 2 Var(loglik) (n-1 denominator)
    and l_plug the largest recorded log-likelihood of the chain

    Args:
        chain: Chain with recorded full log-likelihoods
        catalog: Catalog the chain was fitted on (pairing is checked when given)

    Returns:
        (dic, p_dic_alt)
    """
    if catalog is not None:
        _check_chain_catalog(chain, catalog)
    loglik = np.asarray(chain.loglik, dtype=float)
    if loglik.size < 2:
        raise EvaluationError(f"DIC needs at least 2 samples, the chain has {loglik.size}")
    if not np.all(np.isfinite(loglik)):
        raise EvaluationError("chain holds non-finite log-likelihoods")
    p_dic_alt = 2.0 * float(np.var(loglik, ddof=1))
    dic = -2.0 * float(np.max(loglik)) + 2.0 * p_dic_alt
    return dic, p_dic_alt


def oos_loglik(chain, train: Catalog, test: Catalog, every: int = DEFAULT_OOS_EVERY) -> Tuple[np.ndarray, np.ndarray]:
    """
    Out-of-sample log-likelihood of the test window for every every-th posterior sample

    Training events trigger into the test window; the compensator covers the
    test window only.

    Returns:
        (sample indices, per-sample log-likelihoods)
    """
    if len(chain.samples) == 0:
        raise EvaluationError("chain is empty")
    if test.t_start < train.T:
        raise EvaluationError(f"test window starts at {test.t_start}, before the training window ends at {train.T}")
    indices = np.arange(0, len(chain.samples), max(1, int(every)))
    values = np.array([
        log_likelihood(test, chain.samples[i].params, chain.samples[i].phi, history=train) for i in indices
    ])
    logger.debug(f"Out-of-sample log-likelihood over {len(indices)} samples: mean {np.mean(values):.3f}")
    return indices, values


def evaluate_model(model: str, chain, train: Catalog, test: Catalog, every: int = DEFAULT_OOS_EVERY) -> EvaluationReport:
    """DIC on the training window plus out-of-sample metrics on the test window"""
    _check_chain_catalog(chain, train)
    dic, p_dic_alt = compute_dic(chain)
    indices, values = oos_loglik(chain, train, test, every)
    report = EvaluationReport(
        model=model,
        dic=dic,
        p_dic_alt=p_dic_alt,
        insample_max_loglik=float(np.max(chain.loglik)),
        oos_mean_loglik=float(np.mean(values)),
        oos_max_loglik=float(np.max(values)),
        oos_series=values,
        sample_indices=indices,
        split_signature=split_signature(train, test),
    )
    logger.info(f"{model}: DIC={dic:.2f} (p_dic_alt={p_dic_alt:.2f}), "
                f"mean oos={report.oos_mean_loglik:.2f}, max oos={report.oos_max_loglik:.2f}")
    return report


def reports_frame(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    """Metrics per model, sorted by model name"""
    if not reports:
        raise EvaluationError("no reports to tabulate")
    names = [r.model for r in reports]
    if len(set(names)) != len(names):
        raise EvaluationError(f"duplicate model names: {names}")
    frame = pd.DataFrame([r.summary() for r in reports]).set_index('model').sort_index()
    return frame


def compare_models(reports: Sequence[EvaluationReport]) -> pd.DataFrame:
    """
    Rank models by min DIC, max out-of-sample max and max out-of-sample mean

    A model is flagged best only when it wins all three metrics outright.
    """
    if len(reports) < 2:
        raise EvaluationError(f"model comparison needs at least 2 reports, got {len(reports)}")
    signatures = {r.split_signature for r in reports}
    if len(signatures) != 1:
        raise EvaluationError("reports were computed on different data splits")

    table = reports_frame(reports)
    table['rank_dic'] = table['dic'].rank(method='min', ascending=True).astype(int)
    table['rank_oos_max'] = table['oos_max_loglik'].rank(method='min', ascending=False).astype(int)
    table['rank_oos_mean'] = table['oos_mean_loglik'].rank(method='min', ascending=False).astype(int)
    table['rank_insample_max'] = table['insample_max_loglik'].rank(method='min', ascending=False).astype(int)

    rank_columns = ['rank_dic', 'rank_oos_max', 'rank_oos_mean']
    winners = (table[rank_columns] == 1).all(axis=1)
    unique = {col: int((table[col] == 1).sum()) == 1 for col in rank_columns}
    table['best'] = winners & all(unique.values())
    return table


def summary_table(table: pd.DataFrame) -> str:
    """Render one line of DIC and mean/max out-of-sample columns per model, side by side"""
    models = list(table.index)
    headers, values = [], []
    for prefix, column in (('DIC', 'dic'), ('oos_mean', 'oos_mean_loglik'), ('oos_max', 'oos_max_loglik')):
        for model in models:
            headers.append(f"{prefix}_{model}")
            values.append(f"{table.loc[model, column]:.2f}")
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    lines = [
        '  '.join(h.rjust(w) for h, w in zip(headers, widths)),
        '  '.join(v.rjust(w) for v, w in zip(values, widths)),
    ]
    if 'best' in table.columns:
        best = [model for model in models if bool(table.loc[model, 'best'])]
        lines.append(f"best: {best[0] if best else 'none (metrics disagree)'}")
    return '\n'.join(lines) + '\n'


def save_report(report: EvaluationReport, directory: Union[str, Path]) -> Path:
    path = Path(directory) / f"report_{report.model}.csv"
    report.to_frame().to_csv(path, index=False, float_format='%.17g')
    return path

