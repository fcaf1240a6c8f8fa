"""
ETAS parameter vector, triggering kernels, conditional intensity and likelihoods.

Kernels use the normalised parameterisation: the Omori and spatial kernels
are probability densities and K_bar is the expected number of direct
offspring of an event at magnitude M0.
"""

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Dict, Optional

import numpy as np

from catalog import Catalog

logger = logging.getLogger(__name__)

PARAM_NAMES = ('mu_bar', 'K_bar', 'alpha', 'c', 'p', 'd', 'q')

# Smallest positive normal float; intensities below it are floored before the log
INTENSITY_FLOOR = np.finfo(float).tiny

underflow_diagnostics = {'floored': 0}


def reset_underflow_counter():
    underflow_diagnostics['floored'] = 0


@dataclass(frozen=True)
class EtasParams:
    """Triggering parameters (mu_bar, K_bar, alpha, c, p, d, q) plus the G-R rate beta_gr"""
    mu_bar: float
    K_bar: float
    alpha: float
    c: float
    p: float
    d: float
    q: float
    beta_gr: float = math.log(10.0)

    def validate(self):
        """Raise ValueError when a parameter is outside its domain"""
        if not self.mu_bar > 0:
            raise ValueError(f"mu_bar must be positive, got {self.mu_bar}")
        if not self.K_bar >= 0:
            raise ValueError(f"K_bar must be non-negative, got {self.K_bar}")
        if not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if not self.q > 1:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if not self.beta_gr > 0:
            raise ValueError(f"beta_gr must be positive, got {self.beta_gr}")
        return self

    def branching_ratio(self) -> float:
        return branching_ratio(self)

    def is_stable(self) -> bool:
        """alpha < beta and K_bar * beta / (beta - alpha) < 1"""
        return branching_ratio(self) < 1.0

    def replace(self, **changes) -> 'EtasParams':
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class IntensityBreakdown:
    background: float
    triggered: np.ndarray
    total: float


def _check_positive(name: str, value: float):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def _check_above_one(name: str, value: float):
    if not value > 1:
        raise ValueError(f"{name} must exceed 1, got {value}")


def omori_log_density(z, c: float, p: float):
    z = np.asarray(z, dtype=float)
    _check_positive('c', c)
    _check_above_one('p', p)
    if np.any(z < 0):
        raise ValueError("Omori elapsed time z must be non-negative")
    return math.log(p - 1.0) + (p - 1.0) * math.log(c) - p * np.log(z + c)


def omori_density(z, c: float, p: float):
    """
    Normalised Omori density (p-1) c^(p-1) (z+c)^(-p), integrating to 1 over [0, inf)

    Args:
        z: Elapsed time(s) since the parent, in days
        c: Omori offset (days)
        p: Decay exponent, > 1

    Returns:
        Density value(s), same shape as z
    """
    return np.exp(omori_log_density(z, c, p))


def omori_survival(z, c: float, p: float):
    """Omori tail mass beyond z: c^(p-1) / (z+c)^(p-1)"""
    z = np.asarray(z, dtype=float)
    _check_positive('c', c)
    _check_above_one('p', p)
    return np.exp((p - 1.0) * (math.log(c) - np.log(np.maximum(z, 0.0) + c)))


def spatial_log_density(dx, dy, d: float, q: float):
    _check_positive('d', d)
    _check_above_one('q', q)
    r2 = np.square(np.asarray(dx, dtype=float)) + np.square(np.asarray(dy, dtype=float))
    return math.log(q - 1.0) + (q - 1.0) * math.log(d) - math.log(math.pi) - q * np.log(r2 + d)


def spatial_density(dx, dy, d: float, q: float):
    """Normalised power-law spatial density K_s (dx^2 + dy^2 + d)^(-q), K_s = (q-1) / (pi d^(1-q))"""
    return np.exp(spatial_log_density(dx, dy, d, q))


def productivity(m, alpha: float, M0: float):
    """Exponential productivity exp(alpha (m - M0))"""
    m = np.asarray(m, dtype=float)
    if np.any(m < M0):
        raise ValueError(f"magnitudes must be >= M0={M0}")
    return np.exp(alpha * (m - M0))


def branching_ratio(params: EtasParams) -> float:
    """Expected direct offspring per event, K_bar beta / (beta - alpha); inf when alpha >= beta"""
    if params.alpha >= params.beta_gr:
        return math.inf
    return params.K_bar * params.beta_gr / (params.beta_gr - params.alpha)


def triggering_contributions(params: EtasParams, t: float, x: float, y: float, t_prev, m_prev, x_prev, y_prev,
                             M0: float) -> np.ndarray:
    """Triggered intensity at (t, x, y) from each earlier event"""
    t_prev = np.asarray(t_prev, dtype=float)
    if t_prev.size == 0:
        return np.zeros(0)
    if params.K_bar == 0:
        return np.zeros(t_prev.size)
    log_terms = (
        math.log(params.K_bar)
        + params.alpha * (np.asarray(m_prev, dtype=float) - M0)
        + omori_log_density(t - t_prev, params.c, params.p)
        + spatial_log_density(x - np.asarray(x_prev), y - np.asarray(y_prev), params.d, params.q)
    )
    return np.exp(log_terms)


def conditional_intensity(t: float, x: float, y: float, history: Catalog, params: EtasParams,
                          phi) -> IntensityBreakdown:
    """
    Conditional intensity at (t, x, y) given the events of history

    Args:
        t, x, y: Query point
        history: Catalog whose events all precede t
        params: ETAS parameters
        phi: Background density

    Returns:
        IntensityBreakdown with one triggered entry per history event
    """
    if history.n and history.t[-1] >= t:
        raise ValueError(f"history events must precede t={t}")
    background = params.mu_bar * float(np.asarray(phi.evaluate(x, y)))
    triggered = triggering_contributions(params, t, x, y, history.t, history.m, history.x, history.y, history.M0)
    return IntensityBreakdown(background=background, triggered=triggered,
                              total=background + float(np.sum(triggered)))


def compensator(params: EtasParams, t_events, m_events, M0: float, t_start: float, T: float) -> float:
    """Integral of the intensity over [t_start, T] x plane, for triggering events at t_events"""
    t_events = np.asarray(t_events, dtype=float)
    total = params.mu_bar * (T - t_start)
    if params.K_bar == 0 or t_events.size == 0:
        return total
    iota = np.exp(params.alpha * (np.asarray(m_events, dtype=float) - M0))
    mass = (omori_survival(np.maximum(t_start - t_events, 0.0), params.c, params.p)
            - omori_survival(T - t_events, params.c, params.p))
    return total + params.K_bar * float(np.sum(iota * mass))


def log_likelihood(catalog: Catalog, params: EtasParams, phi, history: Optional[Catalog] = None) -> float:
    """
    Finite-time, infinite-space log-likelihood of the events of catalog on [t_start, T]

    Events in history (all before the window) contribute triggering to the
    window intensity and to its compensator but no log-intensity terms.

    Returns:
        Log-likelihood, or -inf when an event has zero intensity
    """
    if history is not None and history.n:
        if history.t[-1] > catalog.t_start:
            raise ValueError("history events must precede the catalog window start")
        t_all = np.concatenate([history.t, catalog.t])
        m_all = np.concatenate([history.m, catalog.m])
        x_all = np.concatenate([history.x, catalog.x])
        y_all = np.concatenate([history.y, catalog.y])
        offset = history.n
    else:
        t_all, m_all, x_all, y_all = catalog.t, catalog.m, catalog.x, catalog.y
        offset = 0

    background = params.mu_bar * np.asarray(phi.evaluate(catalog.x, catalog.y), dtype=float).reshape(-1)
    log_sum = 0.0
    floored = 0
    for i in range(catalog.n):
        k = offset + i
        triggered = triggering_contributions(params, t_all[k], x_all[k], y_all[k],
                                             t_all[:k], m_all[:k], x_all[:k], y_all[:k], catalog.M0)
        intensity = background[i] + float(np.sum(triggered))
        if intensity <= 0.0:
            if background[i] == 0.0 and (k == 0 or params.K_bar == 0):
                logger.warning(f"Zero intensity at event {i} (t={t_all[k]:.6g}): background is zero "
                               f"and nothing can trigger it")
                return -math.inf
            intensity = INTENSITY_FLOOR
            floored += 1
        log_sum += math.log(intensity)

    if floored:
        underflow_diagnostics['floored'] += floored
        logger.debug(f"Floored {floored} underflowing intensities "
                     f"(total so far {underflow_diagnostics['floored']})")

    return log_sum - compensator(params, t_all, m_all, catalog.M0, catalog.t_start, catalog.T)


@dataclass(frozen=True)
class BranchingVector:
    """
    Latent parent assignment: parents[i] == 0 marks event i (0-based) as an
    immigrant, parents[i] == j > 0 names event j - 1 as its parent.
    """
    parents: np.ndarray

    def __post_init__(self):
        parents = np.array(self.parents, dtype=np.int64).reshape(-1)
        if parents.size and (np.any(parents < 0) or np.any(parents > np.arange(parents.size))):
            raise ValueError("every event's parent must be 0 or an earlier event")
        parents.setflags(write=False)
        object.__setattr__(self, 'parents', parents)

    @classmethod
    def all_immigrants(cls, n: int) -> 'BranchingVector':
        return cls(np.zeros(n, dtype=np.int64))

    def __len__(self) -> int:
        return self.parents.size

    @property
    def immigrant_mask(self) -> np.ndarray:
        return self.parents == 0

    @property
    def n_immigrants(self) -> int:
        return int(np.sum(self.parents == 0))

    def offspring_counts(self) -> np.ndarray:
        """|S_j| for each event j (0-based)"""
        children = self.parents[self.parents > 0] - 1
        return np.bincount(children, minlength=self.parents.size)

    def offspring_pairs(self):
        """(child indices, parent indices), 0-based, for every triggered event"""
        children = np.flatnonzero(self.parents > 0)
        return children, self.parents[children] - 1


def branched_log_likelihood(catalog: Catalog, params: EtasParams, phi, branching: BranchingVector) -> float:
    """
    Log-likelihood conditional on a branching structure

    Sums the immigrant Poisson term, each parent's offspring-count term over
    [t_j, T] and the normalised Omori and spatial densities of every offspring.
    """
    if len(branching) != catalog.n:
        raise ValueError(f"branching has {len(branching)} entries for {catalog.n} events")

    immigrants = branching.immigrant_mask
    with np.errstate(divide='ignore'):
        log_phi = np.log(np.asarray(phi.evaluate(catalog.x[immigrants], catalog.y[immigrants]), dtype=float))
    if np.any(np.isneginf(log_phi)):
        logger.warning("An immigrant lies where the background density is zero")
        return -math.inf
    value = -params.mu_bar * catalog.length
    if immigrants.any():
        value += float(np.sum(log_phi)) + int(immigrants.sum()) * math.log(params.mu_bar)

    log_iota = params.alpha * (catalog.m - catalog.M0)
    value -= params.K_bar * float(np.sum(np.exp(log_iota) * (1.0 - omori_survival(catalog.T - catalog.t,
                                                                                params.c, params.p))))

    children, parents = branching.offspring_pairs()
    if children.size:
        if params.K_bar == 0:
            return -math.inf
        value += children.size * math.log(params.K_bar) + float(np.sum(log_iota[parents]))
        value += float(np.sum(omori_log_density(catalog.t[children] - catalog.t[parents], params.c, params.p)))
        value += float(np.sum(spatial_log_density(catalog.x[children] - catalog.x[parents],
                                                  catalog.y[children] - catalog.y[parents],
                                                  params.d, params.q)))
    return value
