"""Dense complex Hermitian matrix kernels used by the separation engines.

Every operation accepts a single (M, M) matrix or a stacked array of shape
(..., M, M) and applies matrix-wise.  Matrices are small (M <= 8); the
2 x 2 case, which dominates the hot loops, goes through closed-form
eigenvalue/inverse/square-root expressions, everything else through a
batched eigendecomposition.  Returned matrices are re-Hermitized so that
max |a_ij - conj(a_ji)| < 1e-12 always holds on output.
"""

import numpy as np

from .errors import SingularMatrixError

# Diagonal loading: add LOAD_EPS * tr/M once the smallest eigenvalue drops
# below LOAD_TRIGGER * tr.  Keeps iterates finite when a model covariance
# drifts toward singularity.
LOAD_EPS = 1e-10
LOAD_TRIGGER = 1e-12

HERM_TOL = 1e-10
PSD_TOL = 1e-10
MAX_DIM = 8


def _as_matrix_stack(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"{name} must have shape (..., M, M), got {a.shape}")
    if a.shape[-1] > MAX_DIM:
        raise ValueError(f"{name} dimension {a.shape[-1]} exceeds supported maximum {MAX_DIM}")
    return a


def hermitize(a):
    """Project onto the Hermitian part, 0.5 * (a + a^H)."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def is_hermitian(a, tol=1e-12):
    a = np.asarray(a)
    return float(np.abs(a - np.conj(np.swapaxes(a, -1, -2))).max()) <= tol


def _check_hermitian(a, name="matrix"):
    asym = np.abs(a - np.conj(np.swapaxes(a, -1, -2))).max()
    scale = max(1.0, float(np.abs(a).max()))
    if asym > HERM_TOL * scale:
        raise ValueError(f"{name} is not Hermitian (max asymmetry {asym:.3e})")


def _eig_range(a):
    """(lambda_min, lambda_max) per matrix; closed form for M = 2."""
    m = a.shape[-1]
    if m == 1:
        w = a[..., 0, 0].real
        return w, w
    if m == 2:
        half_tr = 0.5 * (a[..., 0, 0].real + a[..., 1, 1].real)
        det = a[..., 0, 0].real * a[..., 1, 1].real - (a[..., 0, 1] * a[..., 1, 0]).real
        gap = np.sqrt(np.maximum(half_tr * half_tr - det, 0.0))
        return half_tr - gap, half_tr + gap
    w = np.linalg.eigvalsh(a)
    return w[..., 0], w[..., -1]


def _check_psd(a, name="matrix"):
    lmin, lmax = _eig_range(a)
    bound = PSD_TOL * np.maximum(lmax, 0.0)
    if np.any(lmin < -bound - PSD_TOL):
        worst = float(np.min(lmin))
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {worst:.3e})")


def _loading(a):
    """Per-matrix diagonal load amount (zero where no loading is needed)."""
    m = a.shape[-1]
    tr = np.trace(a, axis1=-2, axis2=-1).real
    lmin, _ = _eig_range(a)
    return np.where(lmin < LOAD_TRIGGER * tr, LOAD_EPS * tr / m, 0.0), tr


def trace_prod(a, b):
    """Re(Tr(a @ b)) for matching square matrices (batched elementwise)."""
    a = _as_matrix_stack(a, "a")
    b = _as_matrix_stack(b, "b")
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.einsum("...ij,...ji->...", a, b).real


def inv_psd(a):
    """Inverse of a Hermitian PSD matrix with safeguard diagonal loading."""
    a = _as_matrix_stack(a)
    _check_hermitian(a)
    _check_psd(a)
    m = a.shape[-1]
    load, tr = _loading(a)
    if np.any(tr <= 0.0):
        raise SingularMatrixError("cannot invert a zero (or trace-nonpositive) PSD matrix")
    loaded = a + load[..., None, None] * np.eye(m)
    if m == 2:
        det = loaded[..., 0, 0].real * loaded[..., 1, 1].real \
            - (loaded[..., 0, 1] * loaded[..., 1, 0]).real
        out = np.empty_like(loaded)
        out[..., 0, 0] = loaded[..., 1, 1] / det
        out[..., 1, 1] = loaded[..., 0, 0] / det
        out[..., 0, 1] = -loaded[..., 0, 1] / det
        out[..., 1, 0] = -loaded[..., 1, 0] / det
    else:
        out = np.linalg.inv(loaded)
    return hermitize(out)


def logdet_psd(a):
    """log det of a Hermitian PSD matrix (after safeguard loading); finite."""
    a = _as_matrix_stack(a)
    _check_hermitian(a)
    _check_psd(a)
    load, tr = _loading(a)
    if np.any(tr <= 0.0):
        raise SingularMatrixError("log-determinant of a zero matrix is not finite")
    m = a.shape[-1]
    if m == 2:
        lmin, lmax = _eig_range(a)
        out = np.log(lmin + load) + np.log(lmax + load)
    else:
        w = np.linalg.eigvalsh(a)
        out = np.log(w + load[..., None]).sum(axis=-1)
    if a.ndim == 2:
        return float(out)
    return out


def sqrt_psd(a):
    """Principal (PSD) matrix square root."""
    a = _as_matrix_stack(a)
    _check_hermitian(a)
    _check_psd(a)
    m = a.shape[-1]
    if m == 2:
        tr = a[..., 0, 0].real + a[..., 1, 1].real
        det = a[..., 0, 0].real * a[..., 1, 1].real - (a[..., 0, 1] * a[..., 1, 0]).real
        s = np.sqrt(np.maximum(det, 0.0))
        t = np.sqrt(np.maximum(tr + 2.0 * s, 0.0))
        # (a + sqrt(det) I) / sqrt(tr + 2 sqrt(det)); zero matrix maps to zero
        safe_t = np.where(t > 0.0, t, 1.0)
        out = (a + s[..., None, None] * np.eye(2)) / safe_t[..., None, None]
        out = np.where((t > 0.0)[..., None, None], out, np.zeros_like(out))
    else:
        w, v = np.linalg.eigh(a)
        w = np.sqrt(np.maximum(w, 0.0))
        out = (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return hermitize(out)


def riccati_solve(a, b):
    """Unique PSD solution R of R a R = b via the square-root sandwich.

    R = a^(-1/2) (a^(1/2) b a^(1/2))^(1/2) a^(-1/2), with a made strictly
    positive definite by the safeguard loading first.
    """
    a = _as_matrix_stack(a, "a")
    b = _as_matrix_stack(b, "b")
    _check_hermitian(a, "a")
    _check_hermitian(b, "b")
    _check_psd(a, "a")
    _check_psd(b, "b")
    m = a.shape[-1]
    load, tr = _loading(a)
    if np.any(tr <= 0.0):
        raise SingularMatrixError("riccati_solve needs a strictly positive definite 'a'")
    loaded = a + load[..., None, None] * np.eye(m)
    s = sqrt_psd(loaded)
    s_inv = inv_psd(s)
    inner = hermitize(s @ b @ s)
    core = sqrt_psd(inner)
    return hermitize(s_inv @ core @ s_inv)


def cubic_positive_root(c3, c2, c0):
    """Unique nonnegative real root of c3 w^3 + c2 w^2 + c0 = 0.

    Requires c3 > 0, c2 >= 0, c0 <= 0 (the shape produced by the basis
    update stationarity conditions).  Safeguarded Newton from
    w0 = (-c0/c3)^(1/3), bisection on [0, 2 w0 + 1] as fallback.
    """
    c3 = float(c3)
    c2 = float(c2)
    c0 = float(c0)
    if c3 <= 0.0:
        raise ValueError(f"leading coefficient must be positive, got {c3}")
    if c2 < 0.0:
        raise ValueError(f"quadratic coefficient must be nonnegative, got {c2}")
    if c0 > 0.0:
        raise ValueError(f"constant coefficient must be nonpositive, got {c0}")
    if c0 == 0.0:
        return 0.0

    def f(w):
        return (c3 * w + c2) * w * w + c0

    w = (-c0 / c3) ** (1.0 / 3.0)  # f(w0) = c2 w0^2 >= 0, so w0 >= root
    tol = 1e-12 * max(abs(c0), c3)
    converged = False
    for _ in range(100):
        fw = f(w)
        dfw = (3.0 * c3 * w + 2.0 * c2) * w
        if dfw <= 0.0:
            break
        step = fw / dfw
        w_next = w - step
        if w_next < 0.0:
            break
        if abs(f(w_next)) <= tol or abs(step) <= 1e-16 * (1.0 + w):
            w = w_next
            converged = True
            break
        w = w_next
    if not converged and abs(f(w)) > tol:
        lo, hi = 0.0, 2.0 * (-c0 / c3) ** (1.0 / 3.0) + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        w = 0.5 * (lo + hi)
    return max(w, 0.0)


def cubic_positive_roots(c3, c2, c0):
    """Vectorized variant of :func:`cubic_positive_root` for arrays.

    Same root, computed by monotone Newton iterations on every entry at
    once; engines use this for per-(frequency, basis) cubic solves.
    """
    c2 = np.asarray(c2, dtype=np.float64)
    c0 = np.asarray(c0, dtype=np.float64)
    c3 = np.broadcast_to(np.asarray(c3, dtype=np.float64), c2.shape)
    if np.any(c3 <= 0.0) or np.any(c2 < 0.0) or np.any(c0 > 0.0):
        raise ValueError("coefficient signs must satisfy c3 > 0, c2 >= 0, c0 <= 0")
    w = np.cbrt(-c0 / c3)
    tol = 1e-12 * np.maximum(np.abs(c0), c3)
    for _ in range(60):
        fw = (c3 * w + c2) * w * w + c0
        dfw = (3.0 * c3 * w + 2.0 * c2) * w
        step = np.where(dfw > 0.0, fw / np.where(dfw > 0.0, dfw, 1.0), 0.0)
        w = np.maximum(w - step, 0.0)
        if np.all(np.abs(fw) <= tol):
            break
    return w
