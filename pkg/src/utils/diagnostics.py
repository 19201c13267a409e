"""

*** Diagnostics.py ***

Contains:
Distribution diagnostics comparing real and synthetic series: principal component
projection and exact t-SNE, plus plot-ready coordinate export

t-SNE:
    Per-point Gaussian precisions found by bisection so that every conditional row
    reaches the target perplexity (exp of its Shannon entropy in nats), symmetrized
    joint P, Student-t Q, gradient descent with momentum, gains and early exaggeration.
    Exact O(m^2) algorithm, limited to m <= 2000 points.

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/
scipy       -Scientific Python. https://scipy.org/
pandas      -Pandas. https://pandas.pydata.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
12/09/2024    Workbench team    Initial release
14/10/2024    Workbench team    Warns on rows whose perplexity bisection does not converge

References:
Short       Author,Year             Title
___ _       _________ _             ___ _
[vdM08]     van der Maaten,2008     Visualizing data using t-SNE

"""
# Imports
import logging
import math

import numpy as np
import pandas as pd
from scipy.linalg import eigh
from scipy.spatial.distance import pdist, squareform

from src.utils.errors import DegenerateData, InvalidConfig, PerplexityTooLarge, RankDeficient
from src.utils.seeding import numpy_rng

logger = logging.getLogger(__name__)

TSNE_MAX_POINTS = 2000


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidConfig(f"expected an (m, p) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DegenerateData("diagnostic input contains non-finite values")
    return X


def pca_project(X, k=2):
    """
    Principal component projection.

    Returns:
        projections (m, k), components (k, p), eigenvalues (p,) in descending order.
        The largest-magnitude entry of every component is positive.
    """
    X = _as_matrix(X)
    m, p = X.shape
    if m < 2:
        raise DegenerateData(f"PCA needs at least 2 points, got {m}")
    if not 1 <= k <= min(m, p):
        raise InvalidConfig(f"k must be in 1..{min(m, p)}, got {k}")

    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (m - 1)
    values, vectors = eigh(cov)
    order = np.argsort(values)[::-1]
    values, vectors = np.clip(values[order], 0.0, None), vectors[:, order]

    rank = int(np.sum(values > values[0] * max(m, p) * np.finfo(np.float64).eps)) if values[0] > 0 else 0
    if k > rank:
        raise RankDeficient(f"requested {k} components but the data has numerical rank {rank}")

    components = vectors[:, :k].T.copy()
    flip = np.sign(components[np.arange(k), np.argmax(np.abs(components), axis=1)])
    components *= flip[:, None]
    return centered @ components.T, components, values


def _row_conditional(distances, target_entropy, tol, max_iter=200):
    """
    Conditional distribution of one point and its precision (distances exclude the point).

    Returns:
        (p, beta, converged): converged is False when max_iter bisection steps did not
        bring the entropy within tol of the target.
    """
    shifted = distances - distances.min()
    beta, lo, hi = 1.0, 0.0, math.inf
    converged = False
    for _ in range(max_iter):
        w = np.exp(-shifted * beta)
        total = w.sum()
        entropy = math.log(total) + beta * float(np.dot(shifted, w)) / total
        diff = entropy - target_entropy
        if abs(diff) <= tol:
            converged = True
            break
        if diff > 0:
            lo = beta
            beta = beta * 2.0 if hi == math.inf else (beta + hi) / 2.0
        else:
            hi = beta
            beta = (beta + lo) / 2.0
    return w / total, beta, converged


def conditional_probabilities(X, perplexity=30.0):
    """(m, m) row-conditional affinities p_{j|i}, every row calibrated to ``perplexity``."""
    X = _as_matrix(X)
    m = X.shape[0]
    if perplexity >= m - 1:
        raise PerplexityTooLarge(f"perplexity {perplexity} must be below m - 1 = {m - 1}")
    D = squareform(pdist(X, "sqeuclidean"))
    target = math.log(perplexity)
    # |exp(H) - perplexity| <= perplexity * |dH|
    tol = 1e-6 / perplexity
    P = np.zeros((m, m))
    missed = 0
    for i in range(m):
        others = np.r_[0:i, i + 1:m]
        P[i, others], _, converged = _row_conditional(D[i, others], target, tol)
        missed += not converged
    if missed:
        logger.warning(f"Perplexity bisection did not converge on {missed}/{m} rows "
                       f"(target {perplexity}), affinities of those rows are approximate")
    return P


def row_perplexities(P):
    """exp(entropy) of every row of a conditional affinity matrix."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return np.exp(-terms.sum(axis=1))


def joint_probabilities(X, perplexity=30.0):
    P = conditional_probabilities(X, perplexity)
    P = (P + P.T) / (2.0 * P.shape[0])
    return np.maximum(P, 1e-300)


def tsne_embed(X, perplexity=30.0, iters=1000, seed=0, learning_rate=200.0,
               exaggeration=12.0, exaggeration_iters=100):
    """
    Exact t-SNE embedding in 2 dimensions.

    Args:
        X (array-like): (m, p) points, m <= 2000
        perplexity (float): target perplexity, below m - 1
        iters (int): gradient descent iterations
        seed (int): initial layout seed

    Returns:
        np.ndarray: (m, 2) coordinates
    """
    X = _as_matrix(X)
    m = X.shape[0]
    if m > TSNE_MAX_POINTS:
        raise InvalidConfig(f"exact t-SNE is limited to {TSNE_MAX_POINTS} points, got {m}")
    if m < 3 * perplexity:
        logger.warning(f"t-SNE on {m} points with perplexity {perplexity}: m >= 3*perplexity recommended")
    P = joint_probabilities(X, perplexity)

    rng = numpy_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(m, 2))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    for it in range(iters):
        P_eff = P * exaggeration if it < exaggeration_iters else P
        momentum = 0.5 if it < 250 else 0.8
        num = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-300)
        W = (P_eff - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y

        gains = np.where(np.sign(grad) != np.sign(velocity), gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        Y = Y + velocity
        Y -= Y.mean(axis=0)
        if not np.all(np.isfinite(Y)):
            raise DegenerateData(f"t-SNE diverged at iteration {it}")
    return Y


def coordinates_frame(coords, sources):
    """Plot-ready coordinates with a ``source`` column (real / synthetic)."""
    coords = np.asarray(coords, dtype=np.float64)
    frame = pd.DataFrame(coords, columns=[f"c{i + 1}" for i in range(coords.shape[1])])
    frame.insert(0, "source", list(sources))
    return frame


def write_coordinates(coords, sources, path):
    coordinates_frame(coords, sources).to_csv(path, index=False, encoding="utf-8")
