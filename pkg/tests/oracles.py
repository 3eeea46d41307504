"""Independent reference computations used by several test modules."""

import numpy as np
from scipy.special import expit


def _alpha_sigma(lam):
    return np.sqrt(expit(lam)), np.sqrt(expit(-lam))


def score_guided_v(world, z, lam, weights, signals):
    """Guidance written as an unconditional score plus weighted score
    differences between consecutive nested conditionals, then turned into
    a v-prediction. Scores come straight from the Gaussian marginals."""
    alpha, sigma = _alpha_sigma(lam)
    z = np.atleast_2d(z)
    scores = []
    for level in range(len(weights) + 1):
        m, S = world.conditional(level, signals)
        C = alpha**2 * S + sigma**2 * np.eye(world.dim)
        scores.append(-np.linalg.solve(C, (z - alpha * m).T).T)
    s = scores[0] + sum(w * (scores[j + 1] - scores[j]) for j, w in enumerate(weights))
    eps = -sigma * s
    x = (z - sigma * eps) / alpha
    return alpha * eps - sigma * x


def _guided_eps_affine(world, lam, weights, signals):
    """eps_hat(z) = E z - e for the guided Gaussian denoiser."""
    alpha, sigma = _alpha_sigma(lam)
    w = list(weights)
    coef = [1 - w[0]] + [w[j] - w[j + 1] for j in range(len(w) - 1)] + [w[-1]]
    d = world.dim
    E = np.zeros((d, d))
    e = np.zeros(d)
    for level, c in enumerate(coef):
        m, S = world.conditional(level, signals)
        Ci = np.linalg.inv(alpha**2 * S + sigma**2 * np.eye(d))
        E += c * sigma * Ci
        e += c * sigma * alpha * Ci @ m
    return E, e


def discrete_moments(world, weights, signals, lams):
    """Push N(0, I) exactly through the deterministic sampler's affine
    steps on the logSNR grid ``lams``; returns moments of the final x_hat."""
    d = world.dim
    mean, cov = np.zeros(d), np.eye(d)
    for i in range(len(lams) - 1):
        lt, ls = lams[i], lams[i + 1]
        at, st = _alpha_sigma(lt)
        E, e = _guided_eps_affine(world, lt, weights, signals)
        X = (np.eye(d) - st * E) / at  # x_hat = X z + x0
        x0 = st * e / at
        if i == len(lams) - 2:
            return X @ mean + x0, X @ cov @ X.T
        as_, ss = _alpha_sigma(ls)
        L = as_ * X + ss * E
        l0 = as_ * x0 - ss * e
        mean, cov = L @ mean + l0, L @ cov @ L.T
    raise ValueError("need at least two grid points")


def ode_moments(world, weights, signals, lam_start, lam_end, n_steps=4000):
    """Moments of the guided probability-flow ODE, RK4 in logSNR.

    With y = z / alpha and eta = sigma / alpha the flow reads
    dy/dlam = -(eta / 2) eps_hat, and eps_hat is affine in y, so mean and
    covariance obey linear ODEs. The returned moments are of x_hat at
    ``lam_end``.
    """
    d = world.dim
    w = list(weights)
    coef = [1 - w[0]] + [w[j] - w[j + 1] for j in range(len(w) - 1)] + [w[-1]]
    conds = [world.conditional(level, signals) for level in range(len(coef))]

    def affine(lam):
        eta = np.exp(-lam / 2)
        A = np.zeros((d, d))
        b = np.zeros(d)
        for c, (m, S) in zip(coef, conds):
            Q = np.linalg.inv(S + eta**2 * np.eye(d))
            A += c * eta * Q
            b += c * eta * Q @ m
        return eta, A, b  # eps_hat = A y - b

    def rhs(lam, mu, C):
        eta, A, b = affine(lam)
        M = -(eta / 2) * A
        return M @ mu + (eta / 2) * b, M @ C + C @ M.T

    alpha0, _ = _alpha_sigma(lam_start)
    mu, C = np.zeros(d), np.eye(d) / alpha0**2
    h = (lam_end - lam_start) / n_steps
    lam = lam_start
    for _ in range(n_steps):
        k1 = rhs(lam, mu, C)
        k2 = rhs(lam + h / 2, mu + h / 2 * k1[0], C + h / 2 * k1[1])
        k3 = rhs(lam + h / 2, mu + h / 2 * k2[0], C + h / 2 * k2[1])
        k4 = rhs(lam + h, mu + h * k3[0], C + h * k3[1])
        mu = mu + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        C = C + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        lam += h
    eta, A, b = affine(lam_end)
    X = np.eye(d) - eta * A  # x_hat = y - eta eps_hat
    return X @ mu + eta * b, X @ C @ X.T
