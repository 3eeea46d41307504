"""Linear-Gaussian world model with an exact denoiser.

The latent ``x`` has a Gaussian prior; each of the three conditioning
signals is a noisy linear observation ``y_j = A_j x + n_j``. Every nested
conditional ``p(x | y_1..y_j)`` is Gaussian, which makes the optimal
denoiser available in closed form at every noise level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput
from .guidance import ConditioningMask
from .schedule import alpha_sigma


def _check_spd(M, name):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInput(f"{name} must be square")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise InvalidInput(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise InvalidInput(f"{name} must be positive definite") from None
    return 0.5 * (M + M.T)


@dataclass(eq=False)
class GaussianWorld:
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    obs_maps: tuple[np.ndarray, ...]
    obs_covs: tuple[np.ndarray, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.prior_mean = np.asarray(self.prior_mean, dtype=np.float64).reshape(-1)
        d = self.prior_mean.size
        self.prior_cov = _check_spd(self.prior_cov, "prior_cov")
        if self.prior_cov.shape != (d, d):
            raise InvalidInput("prior_cov shape does not match prior_mean")
        if len(self.obs_maps) != 3 or len(self.obs_covs) != 3:
            raise InvalidInput("need one observation map and noise per signal (3)")
        maps, covs = [], []
        for j, (A, G) in enumerate(zip(self.obs_maps, self.obs_covs)):
            A = np.atleast_2d(np.asarray(A, dtype=np.float64))
            G = _check_spd(G, f"obs_covs[{j}]")
            if A.shape[1] != d or G.shape != (A.shape[0], A.shape[0]):
                raise InvalidInput(f"signal {j} has inconsistent shapes")
            maps.append(A)
            covs.append(G)
        self.obs_maps = tuple(maps)
        self.obs_covs = tuple(covs)

    @property
    def dim(self) -> int:
        return self.prior_mean.size

    def sample_joint(self, rng):
        """One draw of ``(x, signals)`` from the generative model."""
        x = rng.multivariate_normal(self.prior_mean, self.prior_cov)
        ys = tuple(
            A @ x + rng.multivariate_normal(np.zeros(A.shape[0]), G)
            for A, G in zip(self.obs_maps, self.obs_covs)
        )
        return x, ys

    def conditional(self, level: int, signals) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of ``x`` given the first ``level`` signals."""
        if not 0 <= level <= 3:
            raise InvalidInput("level must be in 0..3")
        key = (level,) + tuple(np.asarray(s, dtype=np.float64).tobytes() for s in signals[:level])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        info = np.linalg.inv(self.prior_cov)
        eta = info @ self.prior_mean
        for j in range(level):
            A, G = self.obs_maps[j], self.obs_covs[j]
            y = np.asarray(signals[j], dtype=np.float64).reshape(-1)
            if y.shape != (A.shape[0],):
                raise InvalidInput(f"signal {j} has wrong length")
            Gi = np.linalg.inv(G)
            info = info + A.T @ Gi @ A
            eta = eta + A.T @ Gi @ y
        S = np.linalg.inv(info)
        S = 0.5 * (S + S.T)
        m = S @ eta
        self._cache[key] = (m, S)
        return m, S

    def denoise(self, z, lam, mask: ConditioningMask, signals):
        """Exact ``(x_hat, eps_hat)`` for noisy latents ``z`` (n x d)."""
        alpha, sigma = alpha_sigma(lam)
        m, S = self.conditional(mask.level, signals)
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        C = alpha**2 * S + sigma**2 * np.eye(self.dim)
        # P = C^{-1} (z - alpha m), batched along rows
        P = np.linalg.solve(C, (z - alpha * m).T).T
        eps = sigma * P
        x = m + alpha * P @ S
        return x, eps

    def __call__(self, z, lam, mask: ConditioningMask, signals):
        """v-prediction of the exact denoiser."""
        alpha, sigma = alpha_sigma(lam)
        x, eps = self.denoise(z, lam, mask, signals)
        return alpha * eps - sigma * x

    def score(self, z, lam, mask: ConditioningMask, signals):
        """``grad_z log p(z | signals)`` at logSNR ``lam``."""
        alpha, sigma = alpha_sigma(lam)
        m, S = self.conditional(mask.level, signals)
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        C = alpha**2 * S + sigma**2 * np.eye(self.dim)
        return -np.linalg.solve(C, (z - alpha * m).T).T


def toy_world(seed: int = 0, block: int = 2) -> GaussianWorld:
    """Small well-conditioned world used by the demos and acceptance tests.

    The latent has three blocks of ``block`` dimensions (think: frames);
    signal ``j`` mostly observes block ``j``. Posterior standard deviations
    come out close to one.
    """
    rng = np.random.default_rng(seed)
    dim = 3 * block
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    prior_cov = Q @ np.diag(rng.uniform(2.0, 4.0, size=dim)) @ Q.T
    prior_mean = rng.normal(size=dim)
    maps, covs = [], []
    for j in range(3):
        A = 0.3 * rng.normal(size=(block, dim))
        A[:, j * block : (j + 1) * block] += np.eye(block)
        maps.append(A)
        covs.append(1.5 * np.eye(block))
    return GaussianWorld(prior_mean, 0.5 * (prior_cov + prior_cov.T), tuple(maps), tuple(covs))


def toy_signals(world: GaussianWorld, offset: float = 3.0):
    """Observed signals that pull the posterior well away from the prior mean."""
    out = []
    for A in world.obs_maps:
        out.append(A @ world.prior_mean + offset * np.ones(A.shape[0]))
    return tuple(out)
