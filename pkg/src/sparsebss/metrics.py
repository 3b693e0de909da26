"""Separation quality metrics with FIR-projection decomposition.

Each estimate is decomposed against the reference signals: the target part
is its least-squares projection onto delayed copies (512 taps by default)
of the matching true source, interference is the extra energy captured by
projecting onto all true sources, and everything left is artifact.  SDR
compares the target to all residual energy, SIR to interference alone.
Estimates are matched to references by exhaustive permutation search
maximizing mean SIR.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, toeplitz
from scipy.signal import fftconvolve

DEFAULT_FILTER_TAPS = 512
DB_CAP = 80.0
MAX_PERMUTATION_SOURCES = 4


@dataclass
class MetricsReport:
    """Per-source scores after permutation alignment.

    permutation[j] is the estimate index assigned to true source j;
    improvements are against the unprocessed mixture baseline and stay None
    unless the mixture signal was supplied.
    """

    sdr: np.ndarray
    sir: np.ndarray
    permutation: tuple
    sdr_improvement: np.ndarray = None
    sir_improvement: np.ndarray = None
    sdr_mixture: np.ndarray = None
    sir_mixture: np.ndarray = None


def _db(num, den):
    num = max(num, 0.0)
    den = max(den, 0.0)
    if num <= 1e-300:
        return -DB_CAP
    if den <= 1e-30 * num:
        return DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


class _ReferenceProjector:
    """Precomputed Gram structure for projecting signals onto delayed
    references (per-source and all-sources subspaces)."""

    def __init__(self, references, taps=DEFAULT_FILTER_TAPS):
        references = np.asarray(references, dtype=np.float64)
        if references.ndim != 2:
            raise ValueError("references must be (n_sources, length)")
        self.n_src, length = references.shape
        self.taps = taps
        self.padded = np.concatenate(
            [references, np.zeros((self.n_src, taps - 1))], axis=1
        )
        n_fft = int(2 ** np.ceil(np.log2(length + taps - 1)))
        self.n_fft = n_fft
        self.spectra = np.fft.rfft(self.padded, n_fft, axis=1)

        blocks = [[None] * self.n_src for _ in range(self.n_src)]
        for j in range(self.n_src):
            for i in range(self.n_src):
                corr = np.fft.irfft(np.conj(self.spectra[j]) * self.spectra[i], n_fft)
                col = corr[:taps]
                row = np.concatenate([[corr[0]], corr[-1:-taps:-1]])
                blocks[j][i] = toeplitz(col, row)
        self.gram_full = np.block(blocks)
        self.solve_full = self._factor(self.gram_full)
        self.solve_own = [self._factor(blocks[j][j]) for j in range(self.n_src)]

    @staticmethod
    def _factor(gram):
        try:
            lu = lu_factor(gram)
            return lambda rhs: lu_solve(lu, rhs)
        except np.linalg.LinAlgError:
            return lambda rhs: np.linalg.lstsq(gram, rhs, rcond=None)[0]

    def _cross(self, estimate):
        spec = np.fft.rfft(estimate, self.n_fft)
        out = np.empty((self.n_src, self.taps))
        for j in range(self.n_src):
            corr = np.fft.irfft(np.conj(self.spectra[j]) * spec, self.n_fft)
            out[j] = corr[:self.taps]
        return out

    def decompose(self, estimate, true_index):
        """(target, interference, artifact) energy split of one estimate."""
        estimate = np.concatenate([estimate, np.zeros(self.taps - 1)])
        rhs = self._cross(estimate)
        own = self.solve_own[true_index](rhs[true_index])
        target = fftconvolve(self.padded[true_index], own)[:estimate.size]
        coeffs = self.solve_full(rhs.ravel()).reshape(self.n_src, self.taps)
        proj_all = np.zeros(estimate.size)
        for j in range(self.n_src):
            proj_all += fftconvolve(self.padded[j], coeffs[j])[:estimate.size]
        e_interf = proj_all - target
        e_artif = estimate - proj_all
        return target, e_interf, e_artif

    def scores(self, estimate, true_index):
        target, e_interf, e_artif = self.decompose(estimate, true_index)
        target_e = float((target**2).sum())
        sdr = _db(target_e, float(((e_interf + e_artif) ** 2).sum()))
        sir = _db(target_e, float((e_interf**2).sum()))
        return sdr, sir


def _score_matrix(estimates, references, taps):
    projector = _ReferenceProjector(references, taps)
    n_src = references.shape[0]
    sdr = np.empty((n_src, n_src))
    sir = np.empty((n_src, n_src))
    for i, est in enumerate(estimates):
        for j in range(n_src):
            sdr[j, i], sir[j, i] = projector.scores(est, j)
    return sdr, sir, projector


def permute_align(estimates, references, taps=DEFAULT_FILTER_TAPS) -> tuple:
    """Best source-to-estimate assignment by mean SIR, exhaustive search."""
    estimates = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    references = np.atleast_2d(np.asarray(references, dtype=np.float64))
    _, sir, _ = _score_matrix(estimates, references, taps)
    return _best_permutation(sir)


def _best_permutation(sir):
    n_src = sir.shape[0]
    if n_src > MAX_PERMUTATION_SOURCES:
        raise ValueError(
            f"exhaustive alignment supports up to {MAX_PERMUTATION_SOURCES} sources"
        )
    best, best_score = None, -np.inf
    for perm in itertools.permutations(range(n_src)):
        score = np.mean([sir[j, perm[j]] for j in range(n_src)])
        if score > best_score:
            best, best_score = perm, score
    return best


def sdr_sir(estimates, references, mixture=None, taps=DEFAULT_FILTER_TAPS) -> MetricsReport:
    """Permutation-aligned SDR/SIR of estimated sources.

    estimates and references are (n_sources, length) with equal shapes;
    mixture, when given, is the unprocessed reference-mic signal used as
    the improvement baseline for every source.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    references = np.atleast_2d(np.asarray(references, dtype=np.float64))
    if estimates.shape != references.shape:
        raise ValueError(
            f"estimates {estimates.shape} and references {references.shape} must match"
        )
    sdr_mat, sir_mat, projector = _score_matrix(estimates, references, taps)
    perm = _best_permutation(sir_mat)
    idx = np.arange(references.shape[0])
    report = MetricsReport(
        sdr=sdr_mat[idx, list(perm)],
        sir=sir_mat[idx, list(perm)],
        permutation=perm,
    )
    if mixture is not None:
        mixture = np.asarray(mixture, dtype=np.float64)
        if mixture.ndim != 1 or mixture.size != references.shape[1]:
            raise ValueError("mixture must be a single channel matching the references")
        base = np.array([projector.scores(mixture, j) for j in idx])
        report.sdr_mixture = base[:, 0]
        report.sir_mixture = base[:, 1]
        report.sdr_improvement = report.sdr - base[:, 0]
        report.sir_improvement = report.sir - base[:, 1]
    return report
