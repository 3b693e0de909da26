"""Full-rank spatial covariance separation (multichannel NMF) and its
sparsity-regularized variant.

Each source carries one Hermitian PSD spatial matrix per frequency; the
mixture covariance model is the power-weighted sum over sources.  One sweep
re-tightens the bound and updates activations, then basis vectors, then the
spatial matrices through the algebraic Riccati solution; the auxiliary
quantities are recomputed before every substep so the tracked objective is
nonincreasing.  Source signals come out through multichannel Wiener
filtering (the per-(f, t) masks sum to the identity).
"""

from dataclasses import dataclass

import numpy as np

from .audio import Spectrogram
from .errors import DivergedError, UnsupportedConfigError
from .linalg import cubic_positive_roots, hermitize, inv_psd, logdet_psd, riccati_solve, trace_prod
from .results import SeparationResult
from .sourcemodel import (
    FLOOR,
    SparsePrior,
    init_factors,
    model_power,
    prior_penalty,
)

VARIANTS = ("mnmf", "s-mnmf")


@dataclass
class MnmfConfig:
    iterations: int = 100
    n_basis: int = 10
    mu: float = None             # default: 0.05 for s-mnmf, 0 for mnmf
    rho: float = None            # default: 10 for s-mnmf, 0 for mnmf
    variant: str = "s-mnmf"
    bingham_weight: float = None  # default: 1 for s-mnmf, 0 for mnmf
    n_sources: int = None        # default: channel count
    seed: int = 0
    track_cost: bool = True
    reference_channel: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        sparse = self.variant == "s-mnmf"
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


def empirical_covariance(x):
    """Instantaneous outer products x_ft x_ft^H, shape (F, T, M, M)."""
    if isinstance(x, Spectrogram):
        x = x.data
    x = np.asarray(x, dtype=np.complex128)
    return np.einsum("ftm,ftl->ftml", x, np.conj(x))


def init_spatial(n_sources, n_bins, n_chan, seed=0):
    """Identity plus 0.1 x seeded Hermitian PSD perturbation, trace M."""
    rng = np.random.default_rng(seed)
    scm = np.empty((n_sources, n_bins, n_chan, n_chan), dtype=np.complex128)
    for n in range(n_sources):
        for f in range(n_bins):
            g = rng.standard_normal((n_chan, n_chan)) + 1j * rng.standard_normal(
                (n_chan, n_chan)
            )
            pert = g @ g.conj().T
            pert *= n_chan / np.trace(pert).real
            r = np.eye(n_chan) + 0.1 * pert
            scm[n, f] = r * (n_chan / np.trace(r).real)
    return scm


def _trace_with(scm_n, stack):
    """Re Tr(scm_nf @ stack_ft) for every (f, t), shape (F, T)."""
    return np.einsum("fml,ftlm->ft", scm_n, stack).real


def update_activations_mnmf(h, w, tr_num, tr_den, mu):
    """Multiplicative activation update for one source.

    tr_num / tr_den are the (F, T) trace fields of the model-vs-data and
    model-only quadratic forms (numerator and denominator of the sweep).
    """
    num = w.T @ tr_num
    den = w.T @ tr_den + mu[:, None]
    return np.maximum(h * np.sqrt(num / den), FLOOR)


def update_bases_mnmf(w, h, tr_num, tr_den, bingham_weight=1.0):
    """Basis update for one source: cubic stationarity when the hypersphere
    penalty is active, the classical multiplicative rule otherwise."""
    den = tr_den @ h.T                      # (F, K)
    num = tr_num @ h.T
    if bingham_weight == 0.0:
        w_new = w * np.sqrt(num / den)
    else:
        w_new = cubic_positive_roots(2.0 * bingham_weight, den, -(w * w) * num)
    return np.maximum(w_new, FLOOR)


def update_scm(scm_n, lam_n, rhat_inv, xxx):
    """Riccati update of one source's spatial matrices at every frequency.

    Solves R a R = b with a = sum_t lam R_hat^-1 and
    b = R' (sum_t lam R_hat^-1 R_x R_hat^-1) R'; xxx is the precomputed
    (F, T, M, M) field R_hat^-1 R_x R_hat^-1.
    """
    a = np.einsum("ft,ftml->fml", lam_n, rhat_inv)
    mid = np.einsum("ft,ftml->fml", lam_n, xxx)
    b = hermitize(scm_n @ mid @ scm_n)
    return riccati_solve(hermitize(a), b)


def scm_trace_normalize(scm, factors):
    """Rescale every spatial matrix to trace M, moving the scale into the
    basis matrices so the model product is unchanged."""
    n_chan = scm.shape[-1]
    tr = np.trace(scm, axis1=-2, axis2=-1).real  # (N, F)
    with np.errstate(divide="ignore", invalid="ignore"):
        # a vanished trace leaves NaNs for the run loop's divergence check
        scm = scm * (n_chan / tr)[..., None, None]
    for n in range(scm.shape[0]):
        factors.basis[n] = np.maximum(factors.basis[n] * (tr[n] / n_chan)[:, None], FLOOR)
    return scm, factors


def wiener_masks(lam, scm, rhat_inv):
    """Per-source Wiener masks lam_n R_n R_hat^-1, shape (N, F, T, M, M)."""
    return np.einsum("nft,nfml,ftlk->nftmk", lam, scm, rhat_inv)


def extract_sources_wiener(x, lam, scm, reference_channel=0, images=False):
    """Multichannel Wiener estimates lam_n R_n R_hat^-1 x.

    Returns the reference-channel spectrograms (N, F, T), or the full
    spatial images (N, F, T, M) with ``images=True``.  The images sum to
    the observed mixture at every (f, t).
    """
    if isinstance(x, Spectrogram):
        x = x.data
    x = np.asarray(x, dtype=np.complex128)
    rhat = np.einsum("nft,nfml->ftml", lam, scm)
    rhat_inv = inv_psd(rhat)
    v = np.einsum("ftml,ftl->ftm", rhat_inv, x)
    out = lam[..., None] * np.einsum("nfml,ftl->nftm", scm, v)
    if images:
        return out
    return out[..., reference_channel]


def cost_smnmf(emp_cov, rhat, factors, prior, bingham_weight=1.0):
    """Objective: sum of trace + log-det terms plus the sparse penalties."""
    gauss = float(trace_prod(emp_cov, inv_psd(rhat)).sum())
    logdet = float(logdet_psd(rhat).sum())
    return gauss + logdet + prior_penalty(factors, prior, bingham_weight)


def run_mnmf(x, cfg: MnmfConfig) -> SeparationResult:
    """Separate a multichannel spectrogram with the full-rank spatial model.

    x is a Spectrogram or complex array (F, T, M) with M >= 2; the number of
    sources defaults to M.
    """
    if isinstance(x, Spectrogram):
        x = x.data
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 3:
        raise ValueError(f"expected (F, T, M) input, got shape {x.shape}")
    n_bins, n_frames, n_chan = x.shape
    if n_chan < 2:
        raise UnsupportedConfigError("need at least two channels")
    n_src = cfg.n_sources if cfg.n_sources is not None else n_chan
    if n_src > n_chan:
        raise UnsupportedConfigError(
            f"{n_src} sources with {n_chan} channels is not supported"
        )

    factors = init_factors(n_bins, n_frames, cfg.basis_counts(n_src), seed=cfg.seed)
    prior = cfg.prior(n_src, n_bins)
    mu = prior.mu
    gamma = cfg.bingham_weight
    scm = init_spatial(n_src, n_bins, n_chan, seed=cfg.seed)
    emp_cov = empirical_covariance(x)
    lam = model_power(factors)

    def tighten():
        rhat = np.einsum("nft,nfml->ftml", lam, scm)
        rhat_inv = inv_psd(rhat)
        return rhat, rhat_inv

    cost = []
    if cfg.track_cost:
        rhat, _ = tighten()
        cost.append(cost_smnmf(emp_cov, rhat, factors, prior, gamma))

    for it in range(cfg.iterations):
        _, rhat_inv = tighten()
        xxx = rhat_inv @ emp_cov @ rhat_inv
        for n in range(n_src):
            factors.activation[n] = update_activations_mnmf(
                factors.activation[n], factors.basis[n],
                _trace_with(scm[n], xxx), _trace_with(scm[n], rhat_inv), mu[n],
            )
            lam[n] = model_power(factors, n)

        _, rhat_inv = tighten()
        xxx = rhat_inv @ emp_cov @ rhat_inv
        for n in range(n_src):
            factors.basis[n] = update_bases_mnmf(
                factors.basis[n], factors.activation[n],
                _trace_with(scm[n], xxx), _trace_with(scm[n], rhat_inv),
                bingham_weight=gamma,
            )
            lam[n] = model_power(factors, n)

        _, rhat_inv = tighten()
        xxx = rhat_inv @ emp_cov @ rhat_inv
        for n in range(n_src):
            scm[n] = update_scm(scm[n], lam[n], rhat_inv, xxx)

        scm, factors = scm_trace_normalize(scm, factors)
        for n in range(n_src):
            lam[n] = model_power(factors, n)

        if not np.all(np.isfinite(scm)) or not np.all(np.isfinite(lam)):
            raise DivergedError(f"non-finite values at iteration {it}", iteration=it)
        if cfg.track_cost:
            rhat, _ = tighten()
            cost.append(cost_smnmf(emp_cov, rhat, factors, prior, gamma))

    estimates = extract_sources_wiener(x, lam, scm, cfg.reference_channel)
    return SeparationResult(
        spectrograms=estimates,
        cost=np.asarray(cost),
        factors=factors,
        spatial=scm,
    )
