"""Low-rank nonnegative source spectrogram model with sparse priors.

Each source n carries a basis matrix W_n (F x K_n) and an activation
matrix H_n (K_n x T); the modeled power is lambda_nft = sum_k w_nfk h_nkt.
The sparse prior couples a squared-norm penalty on basis columns (unit
hypersphere pull) with an L1 penalty on activations.  Entries are clamped
at FLOOR after every update so multiplicative ratios stay finite.
"""

from dataclasses import dataclass, field

import numpy as np

FLOOR = 1e-12


@dataclass
class SourceFactors:
    """Per-source nonnegative factor matrices.

    basis[n] has shape (F, K_n); activation[n] has shape (K_n, T).
    """

    basis: list
    activation: list

    def __post_init__(self):
        if len(self.basis) != len(self.activation):
            raise ValueError("basis and activation lists must have equal length")
        self.basis = [np.maximum(np.asarray(w, dtype=np.float64), FLOOR) for w in self.basis]
        self.activation = [
            np.maximum(np.asarray(h, dtype=np.float64), FLOOR) for h in self.activation
        ]
        for n, (w, h) in enumerate(zip(self.basis, self.activation)):
            if w.ndim != 2 or h.ndim != 2 or w.shape[1] != h.shape[0]:
                raise ValueError(
                    f"source {n}: basis {w.shape} and activation {h.shape} are inconsistent"
                )

    @property
    def n_sources(self):
        return len(self.basis)

    @property
    def n_bins(self):
        return self.basis[0].shape[0]

    @property
    def n_frames(self):
        return self.activation[0].shape[1]

    def copy(self):
        return SourceFactors(
            [w.copy() for w in self.basis], [h.copy() for h in self.activation]
        )


@dataclass
class SparsePrior:
    """Hypersphere + L1 prior parameters.

    rho[n] and mu[n] are length-K_n nonnegative vectors; theta is the
    per-frequency exponent weight vector, fixed to all-ones at construction.
    """

    rho: list
    mu: list
    n_bins: int
    theta: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rho = [np.asarray(r, dtype=np.float64) for r in self.rho]
        self.mu = [np.asarray(m, dtype=np.float64) for m in self.mu]
        for name, vecs in (("rho", self.rho), ("mu", self.mu)):
            for v in vecs:
                if np.any(v < 0):
                    raise ValueError(f"{name} entries must be nonnegative")
        self.theta = np.ones(self.n_bins)

    @classmethod
    def uniform(cls, n_sources, n_basis, n_bins, rho=10.0, mu=0.05):
        """Prior with every coefficient set to the same scalar value."""
        if np.isscalar(n_basis):
            n_basis = [n_basis] * n_sources
        return cls(
            rho=[np.full(k, float(rho)) for k in n_basis],
            mu=[np.full(k, float(mu)) for k in n_basis],
            n_bins=n_bins,
        )

    def rho_total(self):
        return float(sum(r.sum() for r in self.rho))


def init_factors(n_bins, n_frames, n_basis, seed=0):
    """Seeded uniform(0.1, 1.0) factor initialization.

    n_basis is a single K applied to every source or a sequence of per-source
    values; the number of sources is its length (2 for a scalar default
    callers expand themselves).
    """
    if np.isscalar(n_basis):
        raise ValueError("pass one K per source, e.g. [10, 10]")
    rng = np.random.default_rng(seed)
    basis = [rng.uniform(0.1, 1.0, size=(n_bins, k)) for k in n_basis]
    activation = [rng.uniform(0.1, 1.0, size=(k, n_frames)) for k in n_basis]
    return SourceFactors(basis, activation)


def model_power(factors: SourceFactors, n=None):
    """lambda_nft = sum_k w_nfk h_nkt, floor-clamped.

    Returns (F, T) for a single source index or (N, F, T) for all sources
    (all sources must then share K-independent shapes F, T).
    """
    if n is not None:
        return np.maximum(factors.basis[n] @ factors.activation[n], FLOOR)
    return np.stack(
        [np.maximum(w @ h, FLOOR) for w, h in zip(factors.basis, factors.activation)]
    )


def prior_penalty(factors: SourceFactors, prior: SparsePrior, bingham_weight=1.0):
    """sum_nk mu_nk ||H_nk||_1 + bingham_weight * sum_nfk w_nfk^2 - sum_nk rho_nk."""
    total = 0.0
    for w, h, mu, rho in zip(factors.basis, factors.activation, prior.mu, prior.rho):
        total += float(mu @ np.abs(h).sum(axis=1))
        total += bingham_weight * float((w * w).sum())
        total -= float(rho.sum())
    return total


def sparsity_fraction(h):
    """Fraction of entries at (or below) 1e-6 of the matrix maximum."""
    h = np.asarray(h, dtype=np.float64)
    if h.size == 0:
        return 1.0
    peak = h.max()
    if peak <= 0.0:
        return 1.0
    return float((h <= 1e-6 * peak).mean())


def save_factors(path, factors: SourceFactors):
    """Text dump of all factor matrices, row-major.

    Format: a header line ``sparsebss-factors <n_sources>``, then for each
    source two blocks, each introduced by ``W <rows> <cols>`` or
    ``H <rows> <cols>`` followed by one whitespace-separated row per line.
    """
    with open(path, "w") as fh:
        fh.write(f"sparsebss-factors {factors.n_sources}\n")
        for w, h in zip(factors.basis, factors.activation):
            for tag, mat in (("W", w), ("H", h)):
                fh.write(f"{tag} {mat.shape[0]} {mat.shape[1]}\n")
                for row in mat:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_factors(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "sparsebss-factors":
            raise ValueError(f"{path} is not a factors dump")
        n_sources = int(header[1])
        basis, activation = [], []
        for _ in range(n_sources):
            for tag, dest in (("W", basis), ("H", activation)):
                head = fh.readline().split()
                if len(head) != 3 or head[0] != tag:
                    raise ValueError(f"corrupt factors dump {path}")
                rows, cols = int(head[1]), int(head[2])
                mat = np.array(
                    [[float(v) for v in fh.readline().split()] for _ in range(rows)]
                )
                if mat.shape != (rows, cols):
                    raise ValueError(f"corrupt factors dump {path}")
                dest.append(mat)
    return SourceFactors(basis, activation)
