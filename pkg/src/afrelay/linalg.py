"""Dense complex linear-algebra kernels used by the relay designs.

The eigensolver is a textbook QR algorithm: a Hermitian matrix is reduced
to real symmetric tridiagonal form with Householder reflections and then
diagonalised with implicitly shifted (Wilkinson) QR sweeps.  Only the
dominant pair is ever needed by the sum-rate design, so the power method
is offered as the cheap alternative.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConvergenceWarning,
    DegenerateError,
    SingularMatrixError,
    ValidationError,
)

__all__ = [
    "EigenResult",
    "PowerResult",
    "hermitian_evd",
    "power_method",
    "solve_linear",
    "hadamard",
    "is_hermitian",
    "normalize_phase",
]

HERMITIAN_RTOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues sorted descending with matching unit-norm column vectors."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0
    converged: bool = True

    def dominant(self):
        return self.values[0], self.vectors[:, 0]


@dataclass(frozen=True)
class PowerResult:
    value: complex
    vector: np.ndarray
    iterations: int
    converged: bool


def _as_square(x, name="x"):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains non-finite entries")
    return x


def is_hermitian(x, rtol=HERMITIAN_RTOL):
    x = np.asarray(x)
    scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
    return bool(np.max(np.abs(x - x.conj().T), initial=0.0) <= rtol * scale)


def normalize_phase(vectors):
    """Rotate each column so that its largest-magnitude entry is real positive."""
    v = np.array(vectors, dtype=complex, copy=True)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[:, None]
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    v = v / phases
    return v[:, 0] if squeeze else v


def _householder_tridiagonal(a):
    """Reduce Hermitian ``a`` to tridiagonal ``t`` with ``a = q t q^H``."""
    n = a.shape[0]
    t = np.array(a, dtype=complex, copy=True)
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = t[k + 1:, k].copy()
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        norm_x = np.linalg.norm(x)
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * norm_x
        v /= np.linalg.norm(v)
        # H = I - 2 v v^H, applied from both sides
        blk = t[k + 1:, :]
        t[k + 1:, :] = blk - 2.0 * np.outer(v, v.conj() @ blk)
        blk = t[:, k + 1:]
        t[:, k + 1:] = blk - 2.0 * np.outer(blk @ v, v.conj())
        blk = q[:, k + 1:]
        q[:, k + 1:] = blk - 2.0 * np.outer(blk @ v, v.conj())
    return t, q


def _realify(t):
    """Split Hermitian tridiagonal ``t`` into real diagonal, real off-diagonal and
    the unitary diagonal ``delta`` with ``t = D real(t) D^H``, ``D = diag(delta)``."""
    n = t.shape[0]
    delta = np.ones(n, dtype=complex)
    off = np.zeros(max(n - 1, 0))
    for k in range(n - 1):
        sub = t[k + 1, k]
        mag = abs(sub)
        off[k] = mag
        delta[k + 1] = delta[k] * (sub / mag) if mag > 0 else delta[k]
    diag = np.real(np.diag(t)).copy()
    return diag, off, delta


def _tridiagonal_qr(diag, off, n_q, tol):
    """Implicit Wilkinson-shift QR on a real symmetric tridiagonal matrix.

    Returns eigenvalues, the accumulated rotation matrix, the number of
    sweeps performed and whether every eigenvalue deflated within the cap
    of ``n_q`` sweeps per eigenvalue.
    """
    n = diag.size
    d = diag.copy()
    e = off.copy()
    z = np.eye(n)
    sweeps = 0
    converged = True
    hi = n - 1
    since_deflation = 0
    while hi > 0:
        if abs(e[hi - 1]) <= tol * (abs(d[hi - 1]) + abs(d[hi])) or e[hi - 1] == 0.0:
            e[hi - 1] = 0.0
            hi -= 1
            since_deflation = 0
            continue
        if since_deflation >= n_q:
            converged = False
            break
        lo = hi - 1
        while lo > 0 and abs(e[lo - 1]) > tol * (abs(d[lo - 1]) + abs(d[lo])):
            lo -= 1
        if lo > 0:
            e[lo - 1] = 0.0

        # Wilkinson shift from the trailing 2x2 block
        half = 0.5 * (d[hi - 1] - d[hi])
        b2 = e[hi - 1] ** 2
        sgn = 1.0 if half >= 0 else -1.0
        mu = d[hi] - b2 / (half + sgn * np.hypot(half, e[hi - 1]))

        x = d[lo] - mu
        y = e[lo]
        bulge = 0.0
        for k in range(lo, hi):
            r = np.hypot(x, y)
            c, s = (1.0, 0.0) if r == 0.0 else (x / r, y / r)
            if k > lo:
                e[k - 1] = r
            # rotate the 2x2 diagonal block and its neighbours
            dk, dk1, ek = d[k], d[k + 1], e[k]
            d[k] = c * c * dk + 2 * c * s * ek + s * s * dk1
            d[k + 1] = s * s * dk - 2 * c * s * ek + c * c * dk1
            e[k] = c * s * (dk1 - dk) + (c * c - s * s) * ek
            if k + 1 < hi:
                bulge = s * e[k + 1]
                e[k + 1] = c * e[k + 1]
                x = e[k]
                y = bulge
            zk = z[:, k].copy()
            z[:, k] = c * zk + s * z[:, k + 1]
            z[:, k + 1] = -s * zk + c * z[:, k + 1]
        sweeps += 1
        since_deflation += 1
    return d, z, sweeps, converged


def hermitian_evd(x, n_q=30, tol=1e-12, check=True):
    """Full eigendecomposition of a Hermitian matrix by the QR algorithm.

    ``n_q`` caps the number of shifted QR sweeps spent on any single
    eigenvalue; sweeps stop early once the off-diagonal coupling is below
    ``tol`` relative to the neighbouring diagonal entries.
    """
    x = _as_square(x)
    if n_q < 1:
        raise ValidationError("n_q must be >= 1")
    if check and not is_hermitian(x):
        raise ValidationError("hermitian_evd requires a Hermitian matrix")
    x = 0.5 * (x + x.conj().T)
    n = x.shape[0]
    if n == 0:
        return EigenResult(np.zeros(0), np.zeros((0, 0), dtype=complex))
    if n == 1:
        return EigenResult(np.array([float(np.real(x[0, 0]))]), np.ones((1, 1), dtype=complex))

    t, q = _householder_tridiagonal(x)
    diag, off, delta = _realify(t)
    values, rot, sweeps, converged = _tridiagonal_qr(diag, off, n_q, tol)
    if not converged:
        warnings.warn(
            f"QR algorithm hit the sweep cap n_q={n_q} before full deflation",
            ConvergenceWarning,
            stacklevel=2,
        )
    vectors = (q * delta[None, :]) @ rot
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    vectors /= np.linalg.norm(vectors, axis=0, keepdims=True)
    return EigenResult(values, normalize_phase(vectors), sweeps, converged)


def power_method(x, n_p=5000, seed=0, tol=1e-12):
    """Dominant eigenpair by power iteration from a seeded random start.

    Stops when ``||x v - mu v|| <= tol * ||x||_F``.  Hitting ``n_p`` without
    meeting that bound returns ``converged=False`` and emits a warning.
    """
    x = _as_square(x)
    if n_p < 1:
        raise ValidationError("n_p must be >= 1")
    scale = np.linalg.norm(x)
    if scale == 0.0:
        raise DegenerateError("power_method on the zero matrix")
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)

    mu = 0.0
    converged = False
    it = 0
    for it in range(1, n_p + 1):
        xv = x @ v
        norm = np.linalg.norm(xv)
        if norm == 0.0:
            # start vector fell into the null space; restart away from it
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        mu = np.vdot(v, xv)
        if np.linalg.norm(xv - mu * v) <= tol * scale:
            converged = True
            break
        v = xv / norm
    if not converged:
        warnings.warn(
            f"power method did not converge in n_p={n_p} iterations",
            ConvergenceWarning,
            stacklevel=2,
        )
    v = normalize_phase(v)
    mu = np.vdot(v, x @ v)
    return PowerResult(mu, v, it, converged)


def solve_linear(x, b, step="linear solve"):
    """Solve ``x @ sol = b`` without forming an inverse.

    ``step`` names the design step in the error raised for singular or
    ill-conditioned systems.
    """
    x = _as_square(x)
    b = np.asarray(b)
    if b.shape[0] != x.shape[0]:
        raise ValidationError(f"{step}: right-hand side has {b.shape[0]} rows, expected {x.shape[0]}")
    cond = np.linalg.cond(x)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularMatrixError(f"{step}: matrix is singular or ill-conditioned (cond={cond:.3g})")
    return np.linalg.solve(x, b)


def hadamard(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValidationError(f"hadamard shape mismatch: {x.shape} vs {y.shape}")
    return x * y
