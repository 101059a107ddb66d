"""Equal-time cross-correlation matrix and its random-matrix screening.

Eigenvalues are kept in descending order so that mode 0 is the market mode.
Each eigenvector is oriented so that its largest-magnitude component is
positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import LengthError, NumericalError, RegimeError
from .timeseries import ReturnPanel

SIGN_CONVENTION = "largest-magnitude component positive"


def correlation_matrix(panel: ReturnPanel) -> np.ndarray:
    """C_ij = <r_i r_j> averaged over the shared date axis."""
    r = panel.matrix if isinstance(panel, ReturnPanel) else np.asarray(panel, dtype=float)
    c = r @ r.T / r.shape[1]
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


def cij_histogram(C, bins=100, range=(-1.0, 1.0)):
    """Density of the off-diagonal entries of C.

    Returns ``(edges, density, mean)`` where ``density`` integrates to 1 over
    ``edges``.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if n < 2:
        raise LengthError("need N >= 2 for an off-diagonal histogram")
    vals = C[np.triu_indices(n, k=1)]
    density, edges = np.histogram(vals, bins=bins, range=range, density=True)
    return edges, density, float(vals.mean())


@dataclass(frozen=True)
class MpBounds:
    Q: float
    lambda_min: float
    lambda_max: float

    def to_dict(self):
        return {"Q": self.Q, "lambda_min_ran": self.lambda_min, "lambda_max_ran": self.lambda_max}


def mp_bounds(N: int, T: int) -> MpBounds:
    if N < 1 or T < 1:
        raise RegimeError(f"N and T must be positive, got N={N}, T={T}")
    Q = T / N
    if Q < 1:
        raise RegimeError(f"Q = T/N = {Q:.4g} < 1; the Wishart bounds assume T >= N")
    s = 1.0 / np.sqrt(Q)
    return MpBounds(Q, (1.0 - s) ** 2, (1.0 + s) ** 2)


def mp_density(lam, Q: float):
    """Wishart eigenvalue density for unit-variance series, zero off the support."""
    if Q < 1:
        raise RegimeError(f"Q = {Q} < 1")
    s = 1.0 / np.sqrt(Q)
    lo, hi = (1.0 - s) ** 2, (1.0 + s) ** 2
    lam = np.asarray(lam, dtype=float)
    inside = (lam > lo) & (lam < hi)
    out = np.zeros_like(lam)
    l = lam[inside]
    out[inside] = Q / (2 * np.pi) * np.sqrt((hi - l) * (l - lo)) / l
    return out if out.ndim else float(out)


def mp_cdf(lam, Q: float):
    """Cumulative Wishart density, by quadrature."""
    from scipy.integrate import quad

    s = 1.0 / np.sqrt(Q)
    lo, hi = (1.0 - s) ** 2, (1.0 + s) ** 2

    def one(x):
        if x <= lo:
            return 0.0
        if x >= hi:
            return 1.0
        return quad(lambda t: mp_density(t, Q), lo, x, limit=200)[0]

    lam = np.asarray(lam, dtype=float)
    return np.vectorize(one, otypes=[float])(lam) if lam.ndim else one(float(lam))


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude component is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Returns ``(eigenvalues, vectors)`` with eigenvectors as columns, in the
    order the rotations leave them. Slow (O(n^3) per sweep) but simple; used
    as a fallback and as an independent check on the LAPACK path.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1e-300)
    for sweep in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
    raise NumericalError(
        f"Jacobi iteration did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3e})"
    )


@dataclass(frozen=True)
class CorrelationSpectrum:
    """Descending eigenvalues, eigenvectors as rows, and the Wishart bounds."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    bounds: MpBounds | None
    degenerate: np.ndarray
    sign_convention: str = SIGN_CONVENTION

    @property
    def N(self):
        return self.eigenvalues.size

    def to_dict(self):
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "bounds": None if self.bounds is None else self.bounds.to_dict(),
            "vectors": self.vectors.tolist(),
            "sign_convention": self.sign_convention,
            "degenerate": np.flatnonzero(self.degenerate).tolist(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        b = d.get("bounds")
        bounds = None if b is None else MpBounds(b["Q"], b["lambda_min_ran"], b["lambda_max_ran"])
        lam = np.asarray(d["eigenvalues"], dtype=float)
        degenerate = np.zeros(lam.size, dtype=bool)
        degenerate[list(d.get("degenerate", []))] = True
        return cls(lam, np.asarray(d["vectors"], dtype=float), bounds, degenerate,
                   d.get("sign_convention", SIGN_CONVENTION))


def eigendecompose(C, T: int | None = None, method: str = "lapack", degeneracy_tol=1e-10):
    """Full spectrum of a symmetric matrix.

    ``T`` (the number of days behind C) attaches Wishart bounds; without it
    the spectrum carries no bounds. ``method`` is ``"lapack"`` (tridiagonal
    reduction + divide and conquer via ``numpy.linalg.eigh``) or ``"jacobi"``.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise LengthError(f"expected a square matrix, got shape {C.shape}")
    if not np.allclose(C, C.T, atol=1e-12):
        raise NumericalError("matrix is not symmetric")
    n = C.shape[0]
    if method == "lapack":
        try:
            lam, vec = np.linalg.eigh(C)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigensolver failed to converge for N={n}: {exc}") from exc
    elif method == "jacobi":
        lam, vec = jacobi_eigh(C)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    vectors = _orient(vec[:, order].T)

    gaps = np.abs(np.diff(lam))
    scale = max(1.0, np.abs(lam).max())
    close = gaps <= degeneracy_tol * scale
    degenerate = np.zeros(n, dtype=bool)
    degenerate[:-1] |= close
    degenerate[1:] |= close

    bounds = mp_bounds(n, T) if T is not None else None
    return CorrelationSpectrum(lam, vectors, bounds, degenerate)


def deviating_modes(spectrum: CorrelationSpectrum) -> list[int]:
    """Indices of eigenvalues above the Wishart upper bound, largest first.

    Index 0, when present, is the market mode.
    """
    if spectrum.bounds is None:
        raise ValueError("spectrum has no Wishart bounds; pass T to eigendecompose")
    return [int(a) for a in np.flatnonzero(spectrum.eigenvalues > spectrum.bounds.lambda_max)]


def mode_correlation(spectrum: CorrelationSpectrum, alpha: int, i: int, j: int) -> float:
    """u_i^alpha * u_j^alpha: the correlation of stocks i and j carried by one mode."""
    n = spectrum.N
    for name, k in (("alpha", alpha), ("i", i), ("j", j)):
        if not 0 <= k < n:
            raise IndexError(f"{name}={k} out of range for N={n}")
    u = spectrum.vectors[alpha]
    return float(u[i] * u[j])


def reconstruct(spectrum: CorrelationSpectrum) -> np.ndarray:
    """sum_alpha lambda_alpha u^alpha (u^alpha)^T."""
    v = spectrum.vectors
    return (v.T * spectrum.eigenvalues) @ v


def lambda_max_sweep(panel: ReturnPanel, lengths) -> list[tuple[int, float]]:
    """Largest eigenvalue of C computed on the first T days, for each T."""
    out = []
    for t in lengths:
        t = int(t)
        sub = panel.truncate(t)
        lam = np.linalg.eigvalsh(correlation_matrix(sub))
        out.append((t, float(lam[-1])))
    return out
