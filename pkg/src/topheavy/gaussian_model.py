"""Jointly Gaussian entry scores: tail bounds, the U2 lower bound, and numerical oracles.

Entry i wins when X_i >= t. With z_i = (t - mu_i) / sigma_i the marginal win
probability is Q(z_i); the bounds here bracket Q and upper-bound pairwise
joint tails so that U2 can be bounded below in closed form.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .exceptions import InputError, NumericalError

SQRT_2PI = math.sqrt(2 * math.pi)
PSD_REL_TOL = 1e-9
QUAD_TOL = 1e-8
MC_CHUNK = 1 << 16
MIN_MC_SAMPLES = 10_000


def phi(z):
    return np.exp(-0.5 * np.square(z)) / SQRT_2PI


def gaussian_tail(z):
    """Q(z) = P(N(0,1) >= z) through erfc, accurate far into the tail."""
    return 0.5 * special.erfc(np.asarray(z, dtype=float) / math.sqrt(2))


def gordon_lower(z):
    """phi(z) z / (z^2 + 1); valid lower bound on Q(z) for z > 0."""
    z = np.asarray(z, dtype=float)
    return phi(z) * z / (z * z + 1)


def gordon_upper(z):
    """phi(z) / z; valid upper bound on Q(z) for z > 0."""
    z = np.asarray(z, dtype=float)
    return phi(z) / z


@dataclass(frozen=True)
class TailBounds:
    z: float
    lower: float
    exact: float
    upper: float


def marginal_tail_bounds(mu: float, sigma: float, t: float) -> TailBounds:
    if not sigma > 0:
        raise InputError("sigma must be positive", "sigma")
    z = (t - mu) / sigma
    if not z > 0:
        raise InputError(f"bounds need t > mu (got z={z!r})", "t")
    return TailBounds(z, float(gordon_lower(z)), float(gaussian_tail(z)), float(gordon_upper(z)))


def bounds_table(z_values) -> list[TailBounds]:
    return [marginal_tail_bounds(0.0, 1.0, float(z)) for z in z_values]


def spectral_factor(cov: np.ndarray, rel_tol: float = PSD_REL_TOL) -> np.ndarray:
    """L with L @ L.T == cov after clipping tiny negative eigenvalues to zero.

    Eigenvalues below -rel_tol * max eigenvalue mean the matrix is not a
    covariance at all, and we refuse rather than repair it.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InputError("covariance must be a square matrix", "cov")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise InputError("covariance must be symmetric", "cov")
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    top = max(w.max(), 0.0)
    if w.min() < -rel_tol * top:
        raise InputError(f"covariance not PSD (min eigenvalue {w.min():.3g})", "cov")
    if w.min() < 0:
        warnings.warn(f"clipping eigenvalue {w.min():.3g} to zero", RuntimeWarning, stacklevel=2)
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(mean, L, n: int, seed, chunk: int = MC_CHUNK):
    """Yield ``(n_i, len(mean))`` blocks of draws, chunked with one spawned stream per block.

    The block layout depends only on ``n`` and ``chunk``, so splitting the
    blocks across workers reproduces the serial draws exactly.
    """
    mean = np.asarray(mean, dtype=float)
    n_chunks = -(-n // chunk)
    if isinstance(seed, np.random.SeedSequence):
        # spawn from a copy so the caller's sequence gives the same draws every time
        root = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        root = np.random.SeedSequence(seed)
    streams = root.spawn(n_chunks)
    for b, ss in enumerate(streams):
        size = min(chunk, n - b * chunk)
        rng = np.random.default_rng(ss)
        yield mean + rng.standard_normal((size, L.shape[1])) @ L.T


@dataclass(frozen=True)
class GaussianEnsemble:
    """Means, stdevs and a correlation matrix for N entries, plus the winning threshold t."""

    mu: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    t: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        sigma = np.asarray(self.sigma, dtype=float).ravel()
        n = mu.size
        rho = np.eye(n) if self.rho is None else np.asarray(self.rho, dtype=float)
        if sigma.size != n:
            raise InputError("mu and sigma lengths differ", "sigma")
        if np.any(~(sigma > 0)):
            raise InputError("stdevs must be positive", "sigma")
        if rho.shape != (n, n):
            raise InputError(f"rho must be {n}x{n}", "rho")
        if not np.allclose(rho, rho.T, atol=1e-12) or not np.allclose(np.diag(rho), 1.0, atol=1e-12):
            raise InputError("rho must be symmetric with unit diagonal", "rho")
        if np.any(np.abs(rho) > 1 + 1e-12):
            raise InputError("correlations must lie in [-1, 1]", "rho")
        if not math.isfinite(self.t):
            raise InputError("threshold must be finite", "t")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "t", float(self.t))
        # validates PSD once, up front
        object.__setattr__(self, "_factor", spectral_factor(self.covariance))

    @classmethod
    def from_json(cls, source) -> "GaussianEnsemble":
        if isinstance(source, dict):
            doc = source
        else:
            with open(source) as fh:
                doc = json.load(fh)
        try:
            return cls(doc["mu"], doc["sigma"], doc.get("rho"), doc["t"])
        except KeyError as exc:
            raise InputError(f"missing key {exc}", "json") from None

    def to_json(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist(),
                "rho": self.rho.tolist(), "t": self.t}

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def covariance(self) -> np.ndarray:
        return self.rho * np.outer(self.sigma, self.sigma)

    @property
    def z(self) -> np.ndarray:
        return (self.t - self.mu) / self.sigma

    def subset(self, S) -> list[int]:
        idx = [int(i) for i in S]
        if len(set(idx)) != len(idx):
            raise InputError("duplicate index in S", "S")
        for i in idx:
            if not 0 <= i < self.n:
                raise InputError(f"index {i} out of range", "S")
        return idx


@dataclass(frozen=True)
class JointTail:
    """Chernoff bound on P(min(X1, X2) > t) with the eigenvalue bookkeeping behind it."""

    bound: float
    lambda1: float          # closed form used in the bound
    lambda1_eigen: float    # top eigenvalue of the actual 2x2 covariance
    discriminant: float
    floored: bool


def joint_tail(mu1, mu2, sigma1, sigma2, rho, t) -> JointTail:
    """exp(-(2t - mu1 - mu2)^2 / (4 lambda1)) with lambda1 in closed form.

    A negative discriminant (rho < 0, sigma1 close to sigma2) is floored at
    zero and flagged. The result is still an upper bound: for rho <= 0,
    P(min > t) <= P(X1 + X2 >= 2t) and Var(X1 + X2) <= sigma1^2 + sigma2^2.
    """
    if not (sigma1 > 0 and sigma2 > 0):
        raise InputError("stdevs must be positive", "sigma")
    if not -1 <= rho <= 1:
        raise InputError("rho must lie in [-1, 1]", "rho")
    if not t > max(mu1, mu2):
        raise InputError("joint tail bound needs t > max(mu1, mu2)", "t")
    s1, s2 = sigma1 * sigma1, sigma2 * sigma2
    disc = (s1 - s2) ** 2 + 4 * rho * s1 * s2
    lam = 0.5 * (s1 + s2 + math.sqrt(max(disc, 0.0)))
    cov = np.array([[s1, rho * sigma1 * sigma2], [rho * sigma1 * sigma2, s2]])
    lam_eig = float(np.linalg.eigvalsh(cov)[-1])
    bound = math.exp(-((2 * t - mu1 - mu2) ** 2) / (4 * lam))
    return JointTail(bound, lam, lam_eig, disc, disc < 0)


def joint_tail_upper(mu1, mu2, sigma1, sigma2, rho, t) -> float:
    return joint_tail(mu1, mu2, sigma1, sigma2, rho, t).bound


def bivariate_tail(z1: float, z2: float, rho: float) -> float:
    """P(Z1 > z1, Z2 > z2) for standard normals with correlation rho, by adaptive quadrature.

    Integrates phi(x) Q((z2 - rho x) / sqrt(1 - rho^2)) over x > z1.
    """
    if not -1 <= rho <= 1:
        raise InputError("rho must lie in [-1, 1]", "rho")
    if rho == 1:
        return float(gaussian_tail(max(z1, z2)))
    if rho == -1:
        return float(max(0.0, special.ndtr(-z2) - special.ndtr(z1)))
    r = math.sqrt(1 - rho * rho)

    def f(x):
        return math.exp(-0.5 * x * x) / SQRT_2PI * 0.5 * math.erfc((z2 - rho * x) / (r * math.sqrt(2)))

    # the integrand is negligible beyond 40 standard deviations
    hi = max(z1, 0.0) + 40.0
    val, err = integrate.quad(f, z1, hi, epsabs=QUAD_TOL * 1e-2, epsrel=1e-10, limit=200)
    if err > QUAD_TOL:
        raise NumericalError(f"quadrature error {err:.2e} above {QUAD_TOL}", achieved=err)
    return float(min(max(val, 0.0), 1.0))


def _check_positive_z(ens: GaussianEnsemble, idx):
    z = ens.z[idx]
    if np.any(z <= 0):
        bad = idx[int(np.flatnonzero(z <= 0)[0])]
        raise InputError(f"entry {bad} has z <= 0 (t must exceed its mean)", "t")
    return z


def u2_lower(ens: GaussianEnsemble, S) -> float:
    """Closed-form lower bound on U2: Gordon lower tails minus Chernoff pair bounds.

    Includes the 1/sqrt(2 pi) factor on the first sum. Each unordered pair is
    subtracted once, which equals half the sum over ordered pairs.
    """
    idx = ens.subset(S)
    if not idx:
        return 0.0
    z = _check_positive_z(ens, idx)
    first = math.fsum(gordon_lower(z).tolist())
    pairs = []
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            i, j = idx[a], idx[b]
            pairs.append(joint_tail_upper(ens.mu[i], ens.mu[j], ens.sigma[i], ens.sigma[j],
                                          ens.rho[i, j], ens.t))
    return first - math.fsum(pairs)


def u2_exact_pairwise(ens: GaussianEnsemble, S) -> float:
    """U2 with exact marginals (erfc) and bivariate tails (quadrature)."""
    idx = ens.subset(S)
    if not idx:
        return 0.0
    z = _check_positive_z(ens, idx)
    singles = math.fsum(gaussian_tail(z).tolist())
    pairs = []
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            pairs.append(bivariate_tail(z[a], z[b], ens.rho[idx[a], idx[b]]))
    return singles - math.fsum(pairs)


def union_probability_mc(ens: GaussianEnsemble, S, samples: int = 100_000, seed=0,
                         chunk: int = MC_CHUNK) -> tuple[float, float]:
    """Monte Carlo P(max_{i in S} X_i >= t) and its binomial standard error."""
    if samples < MIN_MC_SAMPLES:
        raise InputError(f"need at least {MIN_MC_SAMPLES} samples", "samples")
    idx = ens.subset(S)
    if not idx:
        return 0.0, 0.0
    L = ens._factor[idx]
    hits = 0
    for block in sample_gaussian(ens.mu[idx], L, samples, seed, chunk):
        hits += int(np.count_nonzero(block.max(axis=1) >= ens.t))
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)
