"""Sampling priors for synthetic deformations: a diagonal Gaussian mixture over
the FFD displacement vector and a normal prior over blend weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

VAR_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k, d)
    log_likelihoods: tuple = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if mu.shape != var.shape or len(w) != len(mu):
            raise ValueError("weights/means/variances disagree on shape")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be >= 0 and sum to 1")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_prob(self, x) -> np.ndarray:
        return logsumexp(_component_logpdf(np.atleast_2d(x), self), axis=1)

    def to_dict(self):
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["means"], d["variances"])

    @classmethod
    def isotropic(cls, dim, std, mean=0.0):
        return cls([1.0], np.full((1, dim), float(mean)), np.full((1, dim), float(std) ** 2))


def _component_logpdf(x, gmm):
    # (n, k) log(w_k N(x | mu_k, diag var_k))
    var = gmm.variances
    quad = ((x[:, None, :] - gmm.means[None]) ** 2 / var[None]).sum(axis=2)
    norm = np.log(2.0 * np.pi * var).sum(axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(gmm.weights)
    return logw[None] - 0.5 * (quad + norm[None])


def _kmeanspp(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(len(x))
        else:
            idx = rng.choice(len(x), p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def fit_gmm(samples, k=1, iters=100, seed=0, tol=0.0) -> GaussianMixture:
    """EM for a diagonal-covariance mixture, seeded by k-means++.

    Variances are floored at ``1e-6``. The per-iteration log-likelihood trace
    (mean over samples) is kept in ``log_likelihoods``. Stops early when the
    improvement drops to ``tol`` or below (``tol=0`` runs all iterations unless
    the fit is stationary).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or not len(x):
        raise ValueError("need a non-empty (n, d) sample array")
    if k < 1 or len(x) < k:
        raise ValueError(f"need 1 <= k <= n samples (k={k}, n={len(x)})")
    rng = np.random.default_rng(seed)
    n, d = x.shape
    means = _kmeanspp(x, k, rng)
    var0 = np.maximum(x.var(axis=0), VAR_FLOOR)
    gmm = GaussianMixture(np.full(k, 1.0 / k), means, np.tile(var0, (k, 1)))
    trace = []
    for _ in range(iters):
        logp = _component_logpdf(x, gmm)
        ll = logsumexp(logp, axis=1)
        trace.append(float(ll.mean()))
        if len(trace) > 1 and trace[-1] - trace[-2] <= tol and tol > 0:
            break
        resp = np.exp(logp - ll[:, None])
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        means = (resp.T @ x) / nk[:, None]
        var = (resp.T @ (x * x)) / nk[:, None] - means ** 2
        var = np.maximum(var, VAR_FLOOR)
        w = nk / nk.sum()
        gmm = GaussianMixture(w / w.sum(), means, var)
    ll = logsumexp(_component_logpdf(x, gmm), axis=1)
    trace.append(float(ll.mean()))
    return GaussianMixture(gmm.weights, gmm.means, gmm.variances, tuple(trace))


def sample_gmm(gmm: GaussianMixture, seed, n=None) -> np.ndarray:
    """One draw (``n=None``) or ``n`` draws; deterministic per ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = 1 if n is None else int(n)
    comp = rng.choice(gmm.k, size=m, p=gmm.weights)
    z = rng.standard_normal((m, gmm.dim))
    out = gmm.means[comp] + z * np.sqrt(gmm.variances[comp])
    return out[0] if n is None else out


@dataclass(frozen=True)
class AlphaPrior:
    mean: float = 0.5
    std: float = 0.1

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("alpha prior std must be positive")

    @classmethod
    def fit(cls, values):
        v = np.asarray(values, dtype=np.float64).ravel()
        return cls(float(v.mean()), float(max(v.std(), np.sqrt(VAR_FLOOR))))


def sample_alpha(prior: AlphaPrior, c, omega, n_nodes, sparsity=0.5, seed=0) -> np.ndarray:
    """Blend weights over all nodes: ``alpha[c]`` from the prior, each
    neighbour kept with probability ``1 - sparsity`` (then drawn from the
    prior), every other entry zero."""
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    alpha = np.zeros(int(n_nodes))
    alpha[c] = rng.normal(prior.mean, prior.std)
    for i in sorted(omega):
        keep = rng.random() >= sparsity
        draw = rng.normal(prior.mean, prior.std)
        if keep:
            alpha[i] = draw
    return alpha
