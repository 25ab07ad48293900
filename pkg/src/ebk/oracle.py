"""Direct Schrodinger ground truth on a truncated grid.

The operator -(hbar^2/2) d^2/dx^2 + V is discretized by the 3-point stencil
on N nodes x_i = -L + i*h, h = 2L/(N-1), with Dirichlet behavior outside
the grid, giving a symmetric tridiagonal matrix:

    diag[i]    = hbar^2/h^2 + V(x_i)
    offdiag[i] = -hbar^2/(2 h^2)

Eigenvalue counts come from the Sturm pivot recurrence

    d_1 = a_1 - lam,   d_i = (a_i - lam) - b_{i-1}^2 / d_{i-1},

counting negative pivots. Zero pivots are replaced by +1e-300, which makes
the count the number of eigenvalues strictly below lam; this convention is
fixed so counts reproduce bit for bit. Eigenvalues are localized by
bisection on the count, and the leading O(h^2) discretization error is
removed by Richardson extrapolation across nested grids N and 2N-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    DomainTooSmall,
    InverseIterationFailed,
    NonCompactWindow,
)
from .symbols import EnergyWindow, PotentialSpec

try:  # pragma: no cover - exercised implicitly
    from numba import njit as _njit
except ImportError:  # pragma: no cover
    _njit = None

DEFAULT_PHASE_TOL = 1e-5
DEFAULT_BISECT_TOL = 1e-11
_MAX_GRID = 600_000


def _sturm_counts_py(diag, offsq, lams):
    lams = np.asarray(lams, dtype=float)
    d = diag[0] - lams
    d[d == 0.0] = 1e-300
    counts = (d < 0.0).astype(np.int64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for i in range(1, diag.size):
            d = (diag[i] - lams) - offsq[i - 1] / d
            d[d == 0.0] = 1e-300
            counts += d < 0.0
    return counts


if _njit is not None:
    @_njit(cache=True)
    def _sturm_counts_jit(diag, offsq, lams):  # pragma: no cover - compiled
        m = lams.shape[0]
        n = diag.shape[0]
        counts = np.zeros(m, dtype=np.int64)
        for j in range(m):
            lam = lams[j]
            d = diag[0] - lam
            if d == 0.0:
                d = 1e-300
            c = 1 if d < 0.0 else 0
            for i in range(1, n):
                d = (diag[i] - lam) - offsq[i - 1] / d
                if d == 0.0:
                    d = 1e-300
                if d < 0.0:
                    c += 1
            counts[j] = c
        return counts

    def _sturm_counts(diag, offsq, lams):
        return _sturm_counts_jit(diag, offsq, np.ascontiguousarray(lams, dtype=float))
else:
    _sturm_counts = _sturm_counts_py


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal discretization with its grid metadata."""

    diag: np.ndarray
    offdiag: np.ndarray
    L: float
    n: int
    h: float
    hbar: float

    def potential_values(self) -> np.ndarray:
        return self.diag - self.hbar**2 / self.h**2

    def grid(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out


@dataclass(frozen=True)
class EigenResult:
    """Sorted eigenvalues with their global spectral indices."""

    eigenvalues: np.ndarray
    indices: np.ndarray
    eigenvectors: np.ndarray | None = None
    residual: float = 0.0

    def __post_init__(self):
        # Ties are allowed: the discrete spectrum is simple, but a doublet
        # split below the bracketing tolerance resolves to equal floats.
        if self.eigenvalues.size > 1 and np.any(np.diff(self.eigenvalues) < 0):
            raise ValueError("eigenvalues must be sorted")


def discretize(
    potential: PotentialSpec,
    hbar: float,
    L: float,
    N: int,
    *,
    window: EnergyWindow | None = None,
) -> TridiagonalOperator:
    """Assemble the 3-point operator on [-L, L] with N nodes.

    When a window is supplied, V(+-L) must clear e2 + margin so truncation
    cannot push window eigenvalues around (DomainTooSmall otherwise).
    """
    if N < 3:
        raise ValueError("need at least 3 grid points")
    if L <= 0 or hbar <= 0:
        raise ValueError("L and hbar must be positive")
    if window is not None:
        need = window.e2 + window.margin
        if float(potential.value(-L)) < need or float(potential.value(L)) < need:
            raise DomainTooSmall(
                f"V(+-{L:g}) does not reach {need:g}; enlarge the domain"
            )
    h = 2.0 * L / (N - 1)
    x = -L + h * np.arange(N)
    diag = hbar**2 / h**2 + np.asarray(potential.value(x), dtype=float)
    offdiag = np.full(N - 1, -(hbar**2) / (2.0 * h**2))
    return TridiagonalOperator(diag=diag, offdiag=offdiag, L=L, n=N, h=h, hbar=hbar)


def domain_auto(
    potential: PotentialSpec,
    window: EnergyWindow,
    hbar: float,
    *,
    phase_tol: float = DEFAULT_PHASE_TOL,
) -> tuple[float, int]:
    """Half-width and grid size adequate for the window at this hbar.

    L is the smallest half-width whose potential wall reaches the window top
    plus a tunneling-tail margin of 10*hbar, padded by 1.5; for potentials
    with a finite plateau the wall target is capped below the plateau (decay
    under the barrier replaces the wall, which the L-doubling stability
    check validates). N keeps the local stencil phase error
    (xi_max*h/hbar)^2/12 below phase_tol.
    """
    top = window.e2 + window.margin
    if not potential.confining_below(top):
        raise NonCompactWindow(
            f"level {top:g} is not confined by the {potential.kind} potential"
        )
    sup_l, sup_r = potential.tail_sup()
    headroom = min(sup_l, sup_r) - top
    target = top + min(10.0 * hbar, 0.9 * headroom)
    xlo, xhi = potential.sublevel_interval(target)
    L = 1.5 * max(abs(xlo), abs(xhi))
    ximax = math.sqrt(2.0 * (top - potential.min_value()))
    h = hbar * math.sqrt(12.0 * phase_tol) / ximax
    N = int(math.ceil(2.0 * L / h)) + 1
    if N > _MAX_GRID:
        raise ValueError(
            f"grid of {N} points exceeds the {_MAX_GRID} cap; relax phase_tol"
        )
    return L, N


def count_below(T: TridiagonalOperator, lam):
    """Number of eigenvalues strictly below lam (scalar or array)."""
    offsq = T.offdiag * T.offdiag
    scalar = np.isscalar(lam) or np.asarray(lam).ndim == 0
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    counts = _sturm_counts(T.diag, offsq, lams)
    return int(counts[0]) if scalar else counts


def eigenvalues_in(
    T: TridiagonalOperator, a: float, b: float, tol: float = DEFAULT_BISECT_TOL
) -> EigenResult:
    """All eigenvalues in (a, b), bracketed to width <= tol by Sturm bisection."""
    if not a < b:
        raise ValueError("need a < b")
    ca, cb = count_below(T, np.array([a, b]))
    m = int(cb - ca)
    if m == 0:
        return EigenResult(np.empty(0), np.empty(0, dtype=int))
    lo = np.full(m, a)
    hi = np.full(m, b)
    # Eigenvalue j (global index ca + j) lies below x iff count(x) >= ca+j+1.
    thresholds = ca + 1 + np.arange(m)
    for _ in range(200):
        if np.max(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        c = count_below(T, mid)
        below = c >= thresholds
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    return EigenResult(0.5 * (lo + hi), ca + np.arange(m))


def eigenvector(T: TridiagonalOperator, lam: float, *, iterations: int = 3) -> np.ndarray:
    """Unit grid-norm eigenvector by inverse iteration at lam.

    Start vector is drawn from a fixed-seed generator so repeated runs are
    identical. Raises InverseIterationFailed if the residual target
    1e-8 * ||T|| is not met.
    """
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(T.n)
    v /= np.linalg.norm(v)
    scale = float(np.max(np.abs(T.diag))) + 2.0 * float(np.max(np.abs(T.offdiag)))
    shift = 0.0
    ab = np.zeros((3, T.n))
    for attempt in range(4):
        ab[0, 1:] = T.offdiag
        ab[1, :] = T.diag - (lam + shift)
        ab[2, :-1] = T.offdiag
        try:
            w = v
            for _ in range(iterations):
                w = solve_banded((1, 1), ab, w)
                nrm = np.linalg.norm(w)
                if not np.isfinite(nrm) or nrm == 0.0:
                    raise np.linalg.LinAlgError
                w = w / nrm
            resid = np.linalg.norm(T.apply(w) - lam * w)
            if resid <= 1e-8 * scale:
                return w / math.sqrt(T.h * float(np.dot(w, w)))
        except np.linalg.LinAlgError:
            pass
        shift = (attempt + 1) * 1e-12 * scale
    raise InverseIterationFailed(f"no convergence at lam = {lam:g}")


def node_count(v: np.ndarray) -> int:
    """Strict sign changes, ignoring entries below 1e-12 of the peak."""
    v = np.asarray(v, dtype=float)
    if v.size == 0 or not np.any(v != 0.0):
        raise ValueError("vector must be nonzero")
    kept = v[np.abs(v) >= 1e-12 * float(np.max(np.abs(v)))]
    signs = np.sign(kept)
    return int(np.sum(signs[1:] != signs[:-1]))


def allowed_region_mass(
    v: np.ndarray, T: TridiagonalOperator, energy: float, delta: float
) -> float:
    """Probability mass sitting where V(x) > energy + delta."""
    pot = T.potential_values()
    w = np.square(np.asarray(v, dtype=float))
    total = float(np.sum(w))
    if total == 0.0:
        raise ValueError("vector must be nonzero")
    return float(np.sum(w[pot > energy + delta]) / total)


def ball_multiplicity(T: TridiagonalOperator, center: float, radius: float) -> int:
    """Exact eigenvalue count in the closed ball around center."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    lo, hi = count_below(T, np.array([center - radius, center + radius]))
    return int(hi - lo)


@dataclass(frozen=True)
class OracleRun:
    """Extrapolated window eigenvalues plus the finest operator used."""

    result: EigenResult
    operator: TridiagonalOperator
    L: float
    grid_sizes: tuple[int, ...]
    gate_residual: float | None
    floor_estimate: float


def solve_window(
    potential: PotentialSpec,
    window: EnergyWindow,
    hbar: float,
    *,
    phase_tol: float = DEFAULT_PHASE_TOL,
    bisect_tol: float = DEFAULT_BISECT_TOL,
    gate: bool = False,
    bounds: tuple[float, float] | None = None,
) -> OracleRun:
    """Window eigenvalues with the O(h^2) error removed by extrapolation.

    gate=True adds a third nested grid and reports the spread between the
    two extrapolations (the self-consistency residual a comparison must
    check before trusting the oracle).
    """
    a, b = bounds if bounds is not None else (window.e1, window.e2)
    L, N = domain_auto(potential, window, hbar, phase_tol=phase_tol)
    sizes = [N, 2 * N - 1] + ([4 * N - 3] if gate else [])
    pad = 0.01 * (b - a)
    per_grid = []
    for n_i in sizes:
        T = discretize(potential, hbar, L, n_i, window=window)
        per_grid.append((T, eigenvalues_in(T, a - pad, b + pad, tol=bisect_tol)))

    def _extrap(coarse: EigenResult, fine: EigenResult):
        common = np.intersect1d(coarse.indices, fine.indices)
        ec = coarse.eigenvalues[np.searchsorted(coarse.indices, common)]
        ef = fine.eigenvalues[np.searchsorted(fine.indices, common)]
        return common, (4.0 * ef - ec) / 3.0, float(np.max(np.abs(ef - ec), initial=0.0))

    idx1, ext1, corr1 = _extrap(per_grid[0][1], per_grid[1][1])
    gate_residual = None
    if gate:
        idx2, ext2, corr2 = _extrap(per_grid[1][1], per_grid[2][1])
        both = np.intersect1d(idx1, idx2)
        d1 = ext1[np.searchsorted(idx1, both)]
        d2 = ext2[np.searchsorted(idx2, both)]
        gate_residual = float(np.max(np.abs(d1 - d2), initial=0.0))
        idx1, ext1, corr1 = idx2, ext2, corr2
    keep = (ext1 >= a) & (ext1 <= b)
    result = EigenResult(
        eigenvalues=ext1[keep],
        indices=idx1[keep],
        residual=max(2.0 * bisect_tol, corr1 / 30.0),
    )
    floor = max(10.0 * bisect_tol, 0.1 * corr1 / 3.0)
    return OracleRun(
        result=result,
        operator=per_grid[-1][0],
        L=L,
        grid_sizes=tuple(sizes),
        gate_residual=gate_residual,
        floor_estimate=floor,
    )
