"""Exact time evolution by diagonalization, fidelity, and peak search.

Times passed to :func:`evolve` are physical (1/energy unit).  Everything that
deals with windows or traces uses t*Jmax instead, which is how results are
reported throughout the package.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import minimize_scalar
from scipy.special import jv

from .errors import ConvergenceError
from .hilbert import HamiltonianModel

DEFAULT_WINDOW = (0.0, 20.0)
DEFAULT_STEPS = 100


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # block diagonal, columns are eigenvectors
    blocks: tuple[slice, ...]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def diagonalize(h: HamiltonianModel) -> SpectralDecomposition:
    dim = h.basis.dim
    energies = np.zeros(dim)
    vectors = np.zeros((dim, dim))
    slices = tuple(h.basis.block_slices().values())
    for sl in slices:
        try:
            e, v = np.linalg.eigh(h.matrix[sl, sl])
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc)) from exc
        energies[sl] = e
        vectors[sl, sl] = v
    return SpectralDecomposition(energies, vectors, slices)


def evolve(sd: SpectralDecomposition, psi0: np.ndarray, t: float) -> np.ndarray:
    v = sd.eigenvectors
    return v @ (np.exp(-1j * sd.eigenvalues * t) * (v.conj().T @ psi0))


def fidelity(target: np.ndarray, psi: np.ndarray) -> float:
    return float(min(abs(np.vdot(target, psi)) ** 2, 1.0))


def overlap_weights(sd: SpectralDecomposition, psi0: np.ndarray, target: np.ndarray) -> np.ndarray:
    """w_k with <target|psi(t)> = sum_k w_k exp(-i E_k t)."""
    v = sd.eigenvectors
    return (v.T @ target.conj()) * (v.conj().T @ psi0)


def fidelity_curve(energies: np.ndarray, weights: np.ndarray, times: np.ndarray) -> np.ndarray:
    """|sum_k w_k exp(-i E_k t)|^2 for stacks of spectra.

    energies, weights: (batch, K); times: (T,) or (batch, T).  Returns (batch, T).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim == 1:
        phase = np.exp(-1j * energies[:, None, :] * times[None, :, None])
    else:
        phase = np.exp(-1j * energies[:, None, :] * times[:, :, None])
    amp = np.einsum("btk,bk->bt", phase, weights)
    return np.minimum(amp.real**2 + amp.imag**2, 1.0)


def time_grid(window: tuple[float, float] = DEFAULT_WINDOW, steps: int = DEFAULT_STEPS) -> np.ndarray:
    lo, hi = window
    if not hi > lo >= 0:
        raise ValueError(f"bad time window {window}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return lo + np.arange(steps + 1) * ((hi - lo) / steps)


@dataclass(frozen=True)
class FidelityTrace:
    times: np.ndarray  # t * Jmax
    fidelities: np.ndarray
    initial_fidelities: np.ndarray
    peak_time: float
    peak_fidelity: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_times_jmax", "fidelity_vs_target", "fidelity_vs_initial"])
        for row in zip(self.times, self.fidelities, self.initial_fidelities):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def peak_search(
    sd: SpectralDecomposition,
    psi0: np.ndarray,
    target: np.ndarray,
    window: tuple[float, float] = DEFAULT_WINDOW,
    steps: int = DEFAULT_STEPS,
    fixed_time: float | None = None,
    j_max: float = 1.0,
    refine: bool = False,
) -> FidelityTrace:
    """Sample F on the window grid (both ends included) and take the maximum.

    ``window``, ``fixed_time`` and the returned times are in units of 1/Jmax.
    With ``refine`` the grid peak is polished by a bounded scalar search over
    the neighbouring grid cells.
    """
    scale = j_max if j_max > 0 else 1.0
    if fixed_time is not None:
        times = np.array([float(fixed_time)])
    else:
        times = time_grid(window, steps)
    e = sd.eigenvalues[None, :] / scale
    f = fidelity_curve(e, overlap_weights(sd, psi0, target)[None, :], times)[0]
    f0 = fidelity_curve(e, overlap_weights(sd, psi0, psi0)[None, :], times)[0]
    k = int(np.argmax(f))
    peak_t, peak_f = float(times[k]), float(f[k])
    if refine and fixed_time is None:
        step = (window[1] - window[0]) / steps
        lo, hi = max(window[0], peak_t - step), min(window[1], peak_t + step)
        w = overlap_weights(sd, psi0, target)[None, :]
        res = minimize_scalar(
            lambda t: -fidelity_curve(e, w, np.array([t]))[0, 0],
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if -res.fun > peak_f:
            peak_t, peak_f = float(res.x), float(-res.fun)
    return FidelityTrace(times, f, f0, peak_t, peak_f)


def expm_oracle(h: HamiltonianModel, psi0: np.ndarray, t: float, max_dim: int = 256) -> np.ndarray:
    """exp(-iHt) psi0 by a scaled Taylor series; no eigensolver involved.

    Only for checking :func:`evolve` on small systems.
    """
    m = h.matrix
    if m.shape[0] > max_dim:
        raise ValueError(f"oracle limited to dimension {max_dim}")
    norm = float(np.abs(m).sum(axis=0).max()) * abs(t)
    n_steps = max(1, int(np.ceil(norm / 0.5)))
    a = (-1j * t / n_steps) * m
    psi = np.asarray(psi0, dtype=complex).copy()
    for _ in range(n_steps):
        term = psi.copy()
        total = psi.copy()
        for n in range(1, 60):
            term = a @ term / n
            total += term
            if np.linalg.norm(term) < 1e-17:
                break
        else:
            if np.linalg.norm(term) > 1e-12:
                raise ConvergenceError("Taylor residual above 1e-12")
        psi = total
    return psi


def _as_complex(v: np.ndarray, batch: int, dim: int) -> np.ndarray:
    return (v[:, 0] + 1j * v[:, 1]).reshape(batch, dim)


def chebyshev_propagate(
    rows: np.ndarray,
    cols: np.ndarray,
    hop: np.ndarray,
    diag: np.ndarray,
    psi0: np.ndarray,
    t: float,
    tol: float = 1e-17,
) -> np.ndarray:
    """exp(-iHt) psi0 for a batch of real symmetric H sharing one sparsity pattern.

    ``hop`` (batch, nnz) holds the off-diagonal entries at (rows, cols), both
    triangles included; ``diag`` is (batch, dim).  The propagator is expanded
    in Chebyshev polynomials of the spectrum-shifted H with Bessel-function
    coefficients, summed until every remaining coefficient is below ``tol``.
    This is the single-time counterpart of :func:`evolve` and agrees with it to
    rounding error, at a fraction of the cost of a full diagonalization.
    """
    batch, dim = diag.shape
    # Gershgorin interval per matrix
    radius = np.zeros((batch, dim))
    if rows.size:
        pattern = sparse.csr_matrix((np.ones(rows.size), (rows, np.arange(rows.size))), shape=(dim, rows.size))
        radius = (pattern @ np.abs(hop).T).T
    lo = (diag - radius).min(axis=1)
    hi = (diag + radius).max(axis=1)
    center = (hi + lo) / 2
    half = (hi - lo) / 2
    half = np.where(half > 0, half, 1.0)

    offsets = (np.arange(batch) * dim)[:, None]
    r = np.concatenate([(rows[None, :] + offsets).ravel(), (np.arange(dim)[None, :] + offsets).ravel()])
    c = np.concatenate([(cols[None, :] + offsets).ravel(), (np.arange(dim)[None, :] + offsets).ravel()])
    data = np.concatenate([(hop / half[:, None]).ravel(), ((diag - center[:, None]) / half[:, None]).ravel()])
    a = sparse.csr_matrix((data, (r, c)), shape=(batch * dim, batch * dim))

    z = half * abs(t)
    n_max = int(np.ceil(z.max() * 1.1 + 10 * np.cbrt(z.max()) + 40))
    k = np.arange(n_max + 1)
    bessel = jv(k[None, :], z[:, None])
    big = np.nonzero(np.any(np.abs(bessel) > tol, axis=0))[0]
    n_terms = int(big[-1]) + 1 if big.size else 1
    sign = -1j if t >= 0 else 1j
    coef = bessel[:, :n_terms] * (sign ** k[:n_terms]) * np.where(k[:n_terms] == 0, 1.0, 2.0)
    coef = np.ascontiguousarray(coef.T)[:, :, None]  # (terms, batch, 1)

    # real and imaginary parts as two columns keep the sparse product real
    p0 = np.asarray(psi0, dtype=complex)
    v_prev = np.tile(np.stack([p0.real, p0.imag], axis=1), (batch, 1))
    total = coef[0] * _as_complex(v_prev, batch, dim)
    if n_terms > 1:
        v = a @ v_prev
        total += coef[1] * _as_complex(v, batch, dim)
        for n in range(2, n_terms):
            w = a @ v
            w *= 2
            w -= v_prev
            v_prev, v = v, w
            total += coef[n] * _as_complex(v, batch, dim)
    out = total
    return out * np.exp(-1j * center * t)[:, None]
