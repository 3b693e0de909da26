"""Determined separation through a demixing matrix with a low-rank source
model (rank-1 spatial covariances), plus the sparsity-regularized variant.

The update sweep follows majorization-minimization: activations, then basis
vectors, then the demixing rows (iterative projection), so the tracked
objective is nonincreasing.  Two basis-update rules are available:

* ``derived-cubic`` (default): the positive root of the stationarity
  condition ``2 g w^3 + B w^2 - C = 0`` of the upper bound, where ``g`` is
  the hypersphere-penalty weight.  With ``g = 0`` this collapses to the
  classical multiplicative update.
* ``paper-closed-form``: the quadratic-shaped closed form
  ``([ (sum_t h)^2 + 8 w' sum_t |y| h / lambda ]^(1/2) - sum_t h) / 4``.

The cubic rule is the one that preserves cost monotonicity (see the
acceptance suite); the closed form is retained for comparison.
"""

from dataclasses import dataclass

import numpy as np

from .audio import Spectrogram
from .errors import DivergedError, UnsupportedConfigError
from .linalg import cubic_positive_roots
from .results import SeparationResult
from .sourcemodel import (
    FLOOR,
    SparsePrior,
    init_factors,
    model_power,
    prior_penalty,
)

W_UPDATE_RULES = ("derived-cubic", "paper-closed-form")
VARIANTS = ("ilrma", "s-ilrma")


@dataclass
class IlrmaConfig:
    iterations: int = 100
    n_basis: int = 10
    mu: float = None            # default: 0.05 for s-ilrma, 0 for ilrma
    rho: float = None           # default: 10 for s-ilrma, 0 for ilrma
    variant: str = "s-ilrma"
    w_update: str = "derived-cubic"
    bingham_weight: float = None  # default: 1 for s-ilrma, 0 for ilrma
    seed: int = 0
    track_cost: bool = True
    reference_channel: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.w_update not in W_UPDATE_RULES:
            raise ValueError(f"w_update must be one of {W_UPDATE_RULES}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        sparse = self.variant == "s-ilrma"
        if self.mu is None:
            self.mu = 0.05 if sparse else 0.0
        if self.rho is None:
            self.rho = 10.0 if sparse else 0.0
        if self.bingham_weight is None:
            self.bingham_weight = 1.0 if sparse else 0.0
        if np.any(np.asarray(self.mu) < 0):
            raise ValueError("mu must be nonnegative")

    def basis_counts(self, n_sources):
        if np.isscalar(self.n_basis):
            return [int(self.n_basis)] * n_sources
        return [int(k) for k in self.n_basis]

    def prior(self, n_sources, n_bins):
        counts = self.basis_counts(n_sources)
        if np.isscalar(self.mu):
            mu = [np.full(k, float(self.mu)) for k in counts]
        else:
            mu = [np.asarray(m, dtype=float) for m in self.mu]
        rho = [np.full(k, float(self.rho)) for k in counts]
        return SparsePrior(rho=rho, mu=mu, n_bins=n_bins)


def update_activations_ilrma(h, w, power, lam, mu):
    """One multiplicative activation sweep for a single source.

    h: (K, T), w: (F, K), power = |y|^2 and lam both (F, T), mu: (K,).
    """
    num = w.T @ (power / (lam * lam))
    den = w.T @ (1.0 / lam) + mu[:, None]
    return np.maximum(h * np.sqrt(num / den), FLOOR)


def update_bases_ilrma(w, h, power, lam, rule="derived-cubic", bingham_weight=1.0):
    """One basis sweep for a single source under the selected rule."""
    if rule == "derived-cubic":
        den = (1.0 / lam) @ h.T                      # (F, K)
        num = (power / (lam * lam)) @ h.T
        if bingham_weight == 0.0:
            w_new = w * np.sqrt(num / den)
        else:
            w_new = cubic_positive_roots(2.0 * bingham_weight, den, -(w * w) * num)
    elif rule == "paper-closed-form":
        h_sum = h.sum(axis=1)                        # (K,)
        g = (np.sqrt(power) / lam) @ h.T             # (F, K)
        w_new = (np.sqrt(h_sum**2 + 8.0 * w * g) - h_sum) / 4.0
    else:
        raise ValueError(f"unknown w_update rule {rule!r}")
    return np.maximum(w_new, FLOOR)


def _weighted_covariance(x, lam):
    """R_f = (1/T) sum_t x_ft x_ft^H / lam_ft, shape (F, M, M)."""
    n_frames = x.shape[1]
    return np.einsum("ftm,ftl,ft->fml", x, np.conj(x), 1.0 / lam) / n_frames


def update_demixing(demix, x, lam, n):
    """Iterative-projection update of demixing row n at every frequency.

    demix: (F, N, M) updated in place and returned; x: (F, T, M);
    lam: (F, T) model power of source n.  After the update the new row u
    satisfies u^H R u = 1 with R the lam-weighted frame covariance.
    """
    n_chan = demix.shape[2]
    cov = _weighted_covariance(x, lam)
    target = demix @ cov
    rhs = np.zeros(n_chan, dtype=np.complex128)
    rhs[n] = 1.0
    try:
        u = np.linalg.solve(target, rhs)
    except np.linalg.LinAlgError:
        u = None
    if u is None or not np.all(np.isfinite(u)):
        load = 1e-10 * np.trace(target, axis1=-2, axis2=-1)[:, None, None] / n_chan
        try:
            u = np.linalg.solve(target + load * np.eye(n_chan), rhs)
        except np.linalg.LinAlgError as exc:
            raise DivergedError(f"demixing system singular for source {n}") from exc
        if not np.all(np.isfinite(u)):
            raise DivergedError(f"demixing system singular for source {n}")
    scale = np.einsum("fm,fml,fl->f", np.conj(u), cov, u).real
    u = u / np.sqrt(np.maximum(scale, FLOOR))[:, None]
    demix[:, n, :] = np.conj(u)
    return demix


def back_project(y, demix, reference_channel=0):
    """Minimal-distortion rescaling: source n times [D_f^{-1}]_{ref, n}.

    Summing the projected sources reproduces the mixture at the reference
    channel.
    """
    coeff = np.linalg.inv(demix)[:, reference_channel, :]  # (F, N)
    return y * coeff.T[:, :, None]


def cost_silrma(power, lam, demix, factors, prior, bingham_weight=1.0):
    """Objective value: Gaussian term, demixing log-det, sparse penalties."""
    n_frames = power.shape[2]
    gauss = float((power / lam + np.log(lam)).sum())
    _, logdet = np.linalg.slogdet(demix)
    return gauss - 2.0 * n_frames * float(logdet.sum()) + prior_penalty(
        factors, prior, bingham_weight
    )


def run_ilrma(x, cfg: IlrmaConfig) -> SeparationResult:
    """Separate a determined multichannel spectrogram.

    x is a Spectrogram or a complex array of shape (F, T, M); the number of
    sources equals the channel count.
    """
    if isinstance(x, Spectrogram):
        x = x.data
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 3:
        raise ValueError(f"expected (F, T, M) input, got shape {x.shape}")
    n_bins, n_frames, n_chan = x.shape
    if n_frames < 2:
        raise ValueError("need at least two frames")
    n_src = n_chan
    if n_src < 2:
        raise UnsupportedConfigError("demixing requires at least two channels")

    factors = init_factors(n_bins, n_frames, cfg.basis_counts(n_src), seed=cfg.seed)
    prior = cfg.prior(n_src, n_bins)
    mu = prior.mu
    gamma = cfg.bingham_weight

    demix = np.tile(np.eye(n_chan, dtype=np.complex128), (n_bins, 1, 1))
    y = np.einsum("fnm,ftm->nft", demix, x)
    power = np.abs(y) ** 2
    lam = model_power(factors)

    cost = []
    if cfg.track_cost:
        cost.append(cost_silrma(power, lam, demix, factors, prior, gamma))

    for it in range(cfg.iterations):
        for n in range(n_src):
            factors.activation[n] = update_activations_ilrma(
                factors.activation[n], factors.basis[n], power[n], lam[n], mu[n]
            )
            lam[n] = model_power(factors, n)
        for n in range(n_src):
            factors.basis[n] = update_bases_ilrma(
                factors.basis[n], factors.activation[n], power[n], lam[n],
                rule=cfg.w_update, bingham_weight=gamma,
            )
            lam[n] = model_power(factors, n)
        for n in range(n_src):
            demix = update_demixing(demix, x, lam[n], n)
        y = np.einsum("fnm,ftm->nft", demix, x)
        power = np.abs(y) ** 2

        if gamma == 0.0:
            # cost-invariant rescale pinning mean model power at one; with the
            # hypersphere penalty active the penalty itself anchors the scale
            for n in range(n_src):
                s = lam[n].mean()
                factors.basis[n] = np.maximum(factors.basis[n] / s, FLOOR)
                lam[n] = model_power(factors, n)
                demix[:, n, :] /= np.sqrt(s)
                y[n] /= np.sqrt(s)
                power[n] /= s

        if not np.all(np.isfinite(y)) or any(
            not np.all(np.isfinite(h)) for h in factors.activation
        ):
            raise DivergedError(f"non-finite values at iteration {it}", iteration=it)
        if cfg.track_cost:
            cost.append(cost_silrma(power, lam, demix, factors, prior, gamma))

    estimates = back_project(y, demix, cfg.reference_channel)
    return SeparationResult(
        spectrograms=estimates,
        cost=np.asarray(cost),
        factors=factors,
        demixing=demix,
    )
