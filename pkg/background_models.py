"""
Background spatial densities phi(x, y): uniform, fixed KDE and Dirichlet-process
Gaussian mixtures with a Normal-inverse-Wishart base measure.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp, multigammaln
from scipy.stats import invwishart, multivariate_normal, multivariate_t

from catalog import Region

logger = logging.getLogger(__name__)

# Max number of (query, centre) pairs evaluated at once by the KDE
KDE_CHUNK_PAIRS = 2_000_000

DP_FRAME_COLUMNS = ['weight', 'mean_x', 'mean_y', 'cov_xx', 'cov_xy', 'cov_yy']


class BackgroundError(ValueError):
    """Raised for invalid densities: too few points, singular bandwidths or broken cluster statistics."""


def _as_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.zeros((0, 2))
    return points.reshape(-1, 2)


def _query(x, y) -> Tuple[np.ndarray, tuple]:
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return np.column_stack([x.reshape(-1), y.reshape(-1)]), x.shape


def _shaped(values: np.ndarray, shape: tuple):
    if shape == ():
        return float(values[0])
    return values.reshape(shape)


def _check_spd(matrix: np.ndarray, name: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (2, 2) or not np.allclose(matrix, matrix.T):
        raise BackgroundError(f"{name} must be a symmetric 2x2 matrix")
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise BackgroundError(f"{name} is not positive definite: {matrix.tolist()}")
    return matrix


class BackgroundDensity(ABC):
    """A probability density over the plane (or over the region, for the uniform variant)"""
    kind = 'abstract'

    @abstractmethod
    def evaluate(self, x, y):
        """Density at (x, y); scalars in, float out; arrays in, array out"""

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points, returned as an (n, 2) array"""

    def __call__(self, x, y):
        return self.evaluate(x, y)


class UniformDensity(BackgroundDensity):
    kind = 'uniform'

    def __init__(self, region: Region):
        self.region = region

    def evaluate(self, x, y):
        points, shape = _query(x, y)
        inside = self.region.contains(points[:, 0], points[:, 1])
        return _shaped(np.where(inside, 1.0 / self.region.area, 0.0), shape)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        r = self.region
        return np.column_stack([rng.uniform(r.x_min, r.x_max, n), rng.uniform(r.y_min, r.y_max, n)])


class KDEDensity(BackgroundDensity):
    """Gaussian kernel density estimate with a full 2x2 bandwidth matrix"""
    kind = 'kde'

    def __init__(self, points, bandwidth):
        self.points = _as_points(points)
        self.bandwidth = _check_spd(bandwidth, 'bandwidth')

    def evaluate(self, x, y):
        query, shape = _query(x, y)
        n = len(self.points)
        chunk = max(1, KDE_CHUNK_PAIRS // n)
        out = np.empty(len(query))
        for start in range(0, len(query), chunk):
            block = query[start:start + chunk]
            diffs = block[:, None, :] - self.points[None, :, :]
            log_k = np.asarray(multivariate_normal.logpdf(diffs, mean=np.zeros(2), cov=self.bandwidth))
            log_k = log_k.reshape(len(block), n)
            out[start:start + chunk] = np.exp(logsumexp(log_k, axis=1) - math.log(n))
        return _shaped(out, shape)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        centres = self.points[rng.integers(0, len(self.points), size=n)]
        return centres + rng.multivariate_normal(np.zeros(2), self.bandwidth, size=n)


class GaussianMixtureDensity(BackgroundDensity):
    """Finite mixture of bivariate normals"""
    kind = 'mixture'

    def __init__(self, weights, means, covs):
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.means = np.asarray(means, dtype=float).reshape(-1, 2)
        self.covs = np.asarray(covs, dtype=float).reshape(-1, 2, 2)
        if not (len(self.weights) == len(self.means) == len(self.covs)):
            raise BackgroundError("mixture weights, means and covariances must have equal length")
        if np.any(self.weights < 0) or not math.isclose(float(np.sum(self.weights)), 1.0, abs_tol=1e-9):
            raise BackgroundError(f"mixture weights must be non-negative and sum to 1, got sum {np.sum(self.weights)}")
        for k, cov in enumerate(self.covs):
            _check_spd(cov, f"covariance of component {k}")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def evaluate(self, x, y):
        query, shape = _query(x, y)
        active = np.flatnonzero(self.weights > 0)
        log_terms = np.empty((len(active), len(query)))
        for row, k in enumerate(active):
            log_terms[row] = (math.log(self.weights[k])
                              + np.asarray(multivariate_normal.logpdf(query, self.means[k], self.covs[k])).reshape(-1))
        return _shaped(np.exp(logsumexp(log_terms, axis=0)), shape)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        components = rng.choice(self.n_components, size=n, p=self.weights / np.sum(self.weights))
        out = np.empty((n, 2))
        for k in np.unique(components):
            idx = np.flatnonzero(components == k)
            out[idx] = rng.multivariate_normal(self.means[k], self.covs[k], size=idx.size)
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'weight': self.weights,
            'mean_x': self.means[:, 0],
            'mean_y': self.means[:, 1],
            'cov_xx': self.covs[:, 0, 0],
            'cov_xy': self.covs[:, 0, 1],
            'cov_yy': self.covs[:, 1, 1],
        })

    @classmethod
    def from_frame(cls, frame: pd.DataFrame):
        covs = np.stack([
            np.column_stack([frame['cov_xx'], frame['cov_xy']]),
            np.column_stack([frame['cov_xy'], frame['cov_yy']]),
        ], axis=1)
        return cls(frame['weight'].to_numpy(), frame[['mean_x', 'mean_y']].to_numpy(), covs)


class DPRealization(GaussianMixtureDensity):
    """One truncated stick-breaking draw of the DP mixture"""
    kind = 'dp'


def eval_density(phi: BackgroundDensity, x, y):
    return phi.evaluate(x, y)


def silverman_bandwidth(points) -> np.ndarray:
    """Diagonal rule-of-thumb bandwidth, (1.06 sigma_hat n^(-1/5))^2 per axis"""
    points = _as_points(points)
    n = len(points)
    sigma = np.std(points, axis=0, ddof=1)
    return np.diag((1.06 * sigma * n ** (-0.2)) ** 2)


def fit_kde(points, bandwidth=None) -> KDEDensity:
    """
    Fit a KDE over every supplied point

    Args:
        points: (n, 2) coordinates, n >= 2
        bandwidth: Optional 2x2 bandwidth matrix (default: Silverman diagonal)

    Returns:
        KDEDensity
    """
    points = _as_points(points)
    if len(points) < 2:
        raise BackgroundError(f"KDE needs at least 2 points, got {len(points)}")
    H = silverman_bandwidth(points) if bandwidth is None else np.asarray(bandwidth, dtype=float)
    try:
        H = _check_spd(H, 'bandwidth')
    except BackgroundError as e:
        raise BackgroundError(f"singular bandwidth: {e}")
    logger.debug(f"KDE over {len(points)} points with bandwidth {H.tolist()}")
    return KDEDensity(points, H)


@dataclass(frozen=True, eq=False)
class DPConfig:
    """DP concentration chi and NIW base measure (xi, rho, df, V); the IW scale is df * V"""
    chi: float = 1.0
    niw_xi: np.ndarray = field(default_factory=lambda: np.zeros(2))
    niw_rho: float = 0.01
    niw_df: float = 4.0
    niw_V: np.ndarray = field(default_factory=lambda: np.eye(2))
    truncation_N: int = 50
    update_hyperparams: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'niw_xi', np.asarray(self.niw_xi, dtype=float).reshape(2))
        object.__setattr__(self, 'niw_V', _check_spd(self.niw_V, 'niw_V'))
        if not self.chi > 0:
            raise BackgroundError(f"chi must be positive, got {self.chi}")
        if not self.niw_rho > 0:
            raise BackgroundError(f"niw_rho must be positive, got {self.niw_rho}")
        if not self.niw_df >= 2:
            raise BackgroundError(f"niw_df must be >= 2, got {self.niw_df}")
        if int(self.truncation_N) < 1:
            raise BackgroundError(f"truncation_N must be >= 1, got {self.truncation_N}")

    @property
    def psi0(self) -> np.ndarray:
        return self.niw_df * self.niw_V

    @classmethod
    def for_points(cls, points, **overrides) -> 'DPConfig':
        """Scale-adapted defaults: xi at the centroid, V the sample covariance (identity when singular)"""
        points = _as_points(points)
        xi = points.mean(axis=0) if len(points) else np.zeros(2)
        V = np.eye(2)
        if len(points) >= 3:
            cov = np.cov(points.T)
            if np.all(np.isfinite(cov)) and np.all(np.linalg.eigvalsh(cov) > 1e-12):
                V = cov
        values = {'niw_xi': xi, 'niw_V': V}
        values.update(overrides)
        return cls(**values)

    def with_chi(self, chi: float) -> 'DPConfig':
        return replace(self, chi=chi)


def _stats_posterior(counts, sums, outers, config: DPConfig):
    """Vectorised NIW posterior (xi_n, rho_n, df_n, psi_n) from per-cluster sufficient statistics"""
    counts = np.asarray(counts, dtype=float)
    rho_n = config.niw_rho + counts
    df_n = config.niw_df + counts
    safe = np.maximum(counts, 1.0)[:, None]
    means = np.where(counts[:, None] > 0, sums / safe, config.niw_xi)
    scatter = outers - counts[:, None, None] * np.einsum('ki,kj->kij', means, means)
    delta = means - config.niw_xi
    shrink = (config.niw_rho * counts / rho_n)[:, None, None]
    psi_n = config.psi0 + scatter + shrink * np.einsum('ki,kj->kij', delta, delta)
    xi_n = (config.niw_rho * config.niw_xi + sums) / rho_n[:, None]
    return xi_n, rho_n, df_n, psi_n


def niw_posterior(points, config: DPConfig):
    """
    Conjugate NIW posterior for points under the base measure of config

    Returns:
        (xi_n, rho_n, df_n, psi_n)
    """
    points = _as_points(points)
    xi_n, rho_n, df_n, psi_n = _stats_posterior(
        np.array([len(points)]), points.sum(axis=0)[None, :], (points.T @ points)[None, :, :], config)
    return xi_n[0], float(rho_n[0]), float(df_n[0]), psi_n[0]


def niw_log_marginal(points, config: DPConfig) -> float:
    """Closed-form log marginal likelihood of points under one NIW-distributed Gaussian"""
    points = _as_points(points)
    n = len(points)
    _, rho_n, df_n, psi_n = niw_posterior(points, config)
    _, logdet_0 = np.linalg.slogdet(config.psi0)
    sign, logdet_n = np.linalg.slogdet(psi_n)
    if sign <= 0:
        raise BackgroundError("posterior scale matrix is not positive definite")
    return float(-n * math.log(math.pi)
                 + multigammaln(df_n / 2.0, 2) - multigammaln(config.niw_df / 2.0, 2)
                 + 0.5 * config.niw_df * logdet_0 - 0.5 * df_n * logdet_n
                 + math.log(config.niw_rho) - math.log(rho_n))


def niw_log_predictive(point, points, config: DPConfig) -> float:
    """Posterior predictive (multivariate t) log density of point given points"""
    xi_n, rho_n, df_n, psi_n = niw_posterior(points, config)
    shape = psi_n * (rho_n + 1.0) / (rho_n * (df_n - 1.0))
    return float(multivariate_t.logpdf(np.asarray(point, dtype=float), loc=xi_n, shape=shape, df=df_n - 1.0))


@dataclass
class ClusterState:
    """CRP partition of the immigrant points with per-cluster sufficient statistics"""
    assignments: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    outers: np.ndarray

    @classmethod
    def empty(cls) -> 'ClusterState':
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros((0, 2)), np.zeros((0, 2, 2)))

    @classmethod
    def from_labels(cls, points, labels) -> 'ClusterState':
        """
        Build a state from arbitrary labels; negative labels open singleton clusters.
        Clusters are renumbered 0..K-1 in order of first appearance.
        """
        points = _as_points(points)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if len(labels) != len(points):
            raise BackgroundError(f"{len(labels)} labels for {len(points)} points")
        assignments = np.empty(len(points), dtype=np.int64)
        mapping = {}
        for i, label in enumerate(labels):
            if label < 0:
                assignments[i] = len(mapping)
                mapping[('new', i)] = assignments[i]
            else:
                if label not in mapping:
                    mapping[label] = len(mapping)
                assignments[i] = mapping[label]
        K = len(mapping)
        counts = np.bincount(assignments, minlength=K).astype(np.int64)
        sums = np.zeros((K, 2))
        outers = np.zeros((K, 2, 2))
        np.add.at(sums, assignments, points)
        np.add.at(outers, assignments, np.einsum('ni,nj->nij', points, points))
        return cls(assignments, counts, sums, outers)

    @classmethod
    def single_cluster(cls, points) -> 'ClusterState':
        return cls.from_labels(points, np.zeros(len(_as_points(points)), dtype=np.int64))

    @property
    def n_points(self) -> int:
        return len(self.assignments)

    @property
    def n_clusters(self) -> int:
        return len(self.counts)

    def copy(self) -> 'ClusterState':
        return ClusterState(self.assignments.copy(), self.counts.copy(), self.sums.copy(), self.outers.copy())

    def is_consistent(self, points, atol: float = 1e-6) -> bool:
        """Statistics match a from-scratch recomputation and labels are contiguous"""
        points = _as_points(points)
        K = self.n_clusters
        if len(points) != self.n_points:
            return False
        if self.n_points and (self.assignments.min() < 0 or self.assignments.max() >= K):
            return False
        counts = np.bincount(self.assignments, minlength=K)
        sums = np.zeros((K, 2))
        outers = np.zeros((K, 2, 2))
        np.add.at(sums, self.assignments, points)
        np.add.at(outers, self.assignments, np.einsum('ni,nj->nij', points, points))
        return (len(counts) == K and bool(np.all(counts > 0))
                and np.array_equal(self.counts, counts)
                and np.allclose(self.sums, sums, atol=atol)
                and np.allclose(self.outers, outers, atol=atol))

    def remove(self, i: int, point: np.ndarray):
        k = self.assignments[i]
        self.counts[k] -= 1
        self.sums[k] -= point
        self.outers[k] -= np.outer(point, point)
        self.assignments[i] = -1
        if self.counts[k] == 0:
            self.counts = np.delete(self.counts, k)
            self.sums = np.delete(self.sums, k, axis=0)
            self.outers = np.delete(self.outers, k, axis=0)
            self.assignments[self.assignments > k] -= 1

    def add(self, i: int, point: np.ndarray, k: int):
        """Assign point i to cluster k; k == n_clusters opens a new cluster"""
        if k == self.n_clusters:
            self.counts = np.append(self.counts, 0)
            self.sums = np.vstack([self.sums, np.zeros((1, 2))])
            self.outers = np.concatenate([self.outers, np.zeros((1, 2, 2))])
        self.counts[k] += 1
        self.sums[k] += point
        self.outers[k] += np.outer(point, point)
        self.assignments[i] = k


def assignment_log_weights(state: ClusterState, point, config: DPConfig) -> np.ndarray:
    """
    Unnormalised CRP log weights for placing point: one entry per existing
    cluster (n_k times its posterior predictive) and a final entry for a new
    cluster (chi times the prior predictive). The point must not be in state.
    """
    point = np.asarray(point, dtype=float).reshape(2)
    counts = np.append(state.counts, 0)
    sums = np.vstack([state.sums, np.zeros((1, 2))])
    outers = np.concatenate([state.outers, np.zeros((1, 2, 2))])
    xi_n, rho_n, df_n, psi_n = _stats_posterior(counts, sums, outers, config)

    delta = point - xi_n
    psi_plus = psi_n + (rho_n / (rho_n + 1.0))[:, None, None] * np.einsum('ki,kj->kij', delta, delta)
    sign_n, logdet_n = np.linalg.slogdet(psi_n)
    sign_plus, logdet_plus = np.linalg.slogdet(psi_plus)
    if np.any(sign_n <= 0) or np.any(sign_plus <= 0):
        raise BackgroundError("cluster scale matrix is not positive definite; sufficient statistics are corrupt")
    log_pred = (-math.log(math.pi)
                + multigammaln((df_n + 1.0) / 2.0, 2) - multigammaln(df_n / 2.0, 2)
                + 0.5 * df_n * logdet_n - 0.5 * (df_n + 1.0) * logdet_plus
                + np.log(rho_n) - np.log(rho_n + 1.0))
    log_prior = np.append(np.log(np.maximum(state.counts, 1)), math.log(config.chi))
    return log_prior + log_pred


def crp_gibbs_sweep(state: ClusterState, points, config: DPConfig, rng: np.random.Generator) -> ClusterState:
    """One collapsed-Gibbs pass reassigning every point in turn; returns a new state"""
    points = _as_points(points)
    if state.n_points != len(points):
        raise BackgroundError(f"cluster state covers {state.n_points} points, got {len(points)}")
    state = state.copy()
    for i in range(len(points)):
        state.remove(i, points[i])
        log_w = assignment_log_weights(state, points[i], config)
        probs = np.exp(log_w - logsumexp(log_w))
        k = int(rng.choice(len(probs), p=probs / probs.sum()))
        state.add(i, points[i], k)
    return state


def _draw_niw(xi, rho, df, psi, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    cov = np.atleast_2d(invwishart.rvs(df=df, scale=psi, random_state=rng))
    cov = 0.5 * (cov + cov.T)
    mean = rng.multivariate_normal(xi, cov / rho)
    return mean, cov


def stick_breaking_weights(chi: float, n: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Truncated stick-breaking weights with Beta(1, chi + n) sticks; the leftover mass goes to the last atom"""
    sticks = rng.beta(1.0, chi + n, size=N)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - sticks)[:-1]])
    weights = sticks * remaining
    weights[-1] = max(1.0 - np.sum(weights[:-1]), 0.0)
    return weights


def sample_dp_realization(state: ClusterState, points, config: DPConfig, rng: np.random.Generator) -> DPRealization:
    """
    Draw a truncated realization of the DP posterior given the CRP state

    Each atom comes from the base measure with probability chi / (chi + n),
    otherwise from the NIW posterior of the cluster of a uniformly chosen point.
    """
    points = _as_points(points)
    n = len(points)
    N = int(config.truncation_N)
    weights = stick_breaking_weights(config.chi, n, N, rng)

    posteriors = {}
    if n:
        xi_n, rho_n, df_n, psi_n = _stats_posterior(state.counts, state.sums, state.outers, config)
    means = np.empty((N, 2))
    covs = np.empty((N, 2, 2))
    p_fresh = config.chi / (config.chi + n)
    for k in range(N):
        if n == 0 or rng.random() < p_fresh:
            means[k], covs[k] = _draw_niw(config.niw_xi, config.niw_rho, config.niw_df, config.psi0, rng)
        else:
            cluster = int(state.assignments[rng.integers(0, n)])
            posteriors[cluster] = posteriors.get(cluster, 0) + 1
            means[k], covs[k] = _draw_niw(xi_n[cluster], rho_n[cluster], df_n[cluster], psi_n[cluster], rng)
    logger.debug(f"DP realization: {len(posteriors)} occupied clusters reused over {sum(posteriors.values())} atoms")
    return DPRealization(weights, means, covs)


def update_dp_hyperparams(state: ClusterState, config: DPConfig, rng: np.random.Generator,
                          prior_shape: float = 1.0, prior_rate: float = 1.0) -> DPConfig:
    """
    Resample the concentration chi given the number of clusters, with the
    auxiliary-variable scheme for a Gamma(prior_shape, prior_rate) prior.
    NIW hyperparameters are left unchanged.
    """
    n = state.n_points
    k = state.n_clusters
    if n == 0:
        return config.with_chi(float(rng.gamma(prior_shape, 1.0 / prior_rate)))
    eta = rng.beta(config.chi + 1.0, n)
    rate = prior_rate - math.log(eta)
    odds = (prior_shape + k - 1.0) / (n * rate)
    shape = prior_shape + k if rng.random() < odds / (1.0 + odds) else prior_shape + k - 1.0
    chi = float(rng.gamma(shape, 1.0 / rate))
    logger.debug(f"chi update: k={k}, n={n}, chi={chi:.4f}")
    return config.with_chi(chi)


def density_grid(phis: Iterable[BackgroundDensity], region: Region, resolution: int = 50) -> pd.DataFrame:
    """Average of the given densities on a regular resolution x resolution grid over region"""
    phis: List[BackgroundDensity] = list(phis)
    if not phis:
        raise BackgroundError("density_grid needs at least one density")
    xs = np.linspace(region.x_min, region.x_max, resolution)
    ys = np.linspace(region.y_min, region.y_max, resolution)
    gx, gy = np.meshgrid(xs, ys)
    total = np.zeros(gx.size)
    for phi in phis:
        total += np.asarray(phi.evaluate(gx.reshape(-1), gy.reshape(-1)), dtype=float)
    return pd.DataFrame({'x': gx.reshape(-1), 'y': gy.reshape(-1), 'density': total / len(phis)})


def mass_in_ball(phi: BackgroundDensity, centre, radius: float, rng: np.random.Generator,
                 n_draws: int = 20000) -> float:
    """Monte Carlo estimate of the probability mass phi places within radius of centre"""
    draws = phi.sample(n_draws, rng)
    return float(np.mean(np.hypot(draws[:, 0] - centre[0], draws[:, 1] - centre[1]) <= radius))


def default_background(kind: str, points, region: Region, bandwidth: Optional[np.ndarray] = None):
    """Fixed background for the non-DP variants"""
    if kind == 'uniform':
        return UniformDensity(region)
    if kind == 'kde':
        return fit_kde(points, bandwidth)
    raise BackgroundError(f"no fixed background for kind '{kind}'")
