"""Excitation-subspace bases and the XXZ Hamiltonian of a genome.

Site k of a genome (k-th letter in alphabetical order among the letters that
appear in its couplings) is bit k of an occupation bitmask.  Only the
excitation numbers that occur in the protocol are kept in the basis, and since
the Hamiltonian conserves excitation number it is stored block by block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import CapacityError
from .genome import Genome, StateExpression

DEFAULT_CAPACITY = 2**20


@dataclass(frozen=True)
class BasisSet:
    n_sites: int
    excitation_numbers: tuple[int, ...]
    states: tuple[int, ...]
    index: dict[int, int] = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def block_slices(self) -> dict[int, slice]:
        """Contiguous index range of each excitation subspace."""
        out, start = {}, 0
        for k in self.excitation_numbers:
            size = comb(self.n_sites, k)
            out[k] = slice(start, start + size)
            start += size
        return out


def enumerate_basis(
    n_sites: int,
    excitations: set[int] | tuple[int, ...] | list[int],
    capacity: int = DEFAULT_CAPACITY,
) -> BasisSet:
    """Enumerate the bitmasks of the requested excitation subspaces.

    Ordering: ascending excitation number, then ascending bitmask.
    """
    if n_sites < 1:
        raise ValueError("need at least one site")
    ks = tuple(sorted(set(excitations)))
    if any(k < 0 or k > n_sites for k in ks):
        raise ValueError(f"excitation numbers {ks} out of range for {n_sites} sites")
    dim = sum(comb(n_sites, k) for k in ks)
    if dim > capacity:
        raise CapacityError(f"basis dimension {dim} exceeds limit {capacity}")
    states: list[int] = []
    for k in ks:
        block = [sum(1 << i for i in occ) for occ in combinations(range(n_sites), k)]
        states.extend(sorted(block))
    return BasisSet(n_sites, ks, tuple(states), {s: i for i, s in enumerate(states)})


def protocol_basis(g: Genome, capacity: int = DEFAULT_CAPACITY) -> BasisSet:
    ks = g.initial.excitation_numbers | g.target.excitation_numbers
    return enumerate_basis(g.n_sites, ks, capacity)


def state_vector(expr: StateExpression, sites: list[str], basis: BasisSet) -> np.ndarray:
    """Normalized amplitude vector of ``expr`` in ``basis``."""
    bit = {s: i for i, s in enumerate(sites)}
    psi = np.zeros(basis.dim, dtype=complex)
    for letters, amp in expr.amplitudes().items():
        mask = sum(1 << bit[c] for c in letters)
        psi[basis.index[mask]] += amp
    return psi


@dataclass(frozen=True)
class HamiltonianModel:
    basis: BasisSet
    matrix: np.ndarray  # real symmetric
    j_max: float
    alpha: float

    def block(self, k: int) -> np.ndarray:
        s = self.basis.block_slices()[k]
        return self.matrix[s, s]


def build_hamiltonian(
    g: Genome,
    basis: BasisSet,
    alpha: float = 0.0,
    hopping: bool = True,
    onsite: bool = True,
    interaction: bool = True,
) -> HamiltonianModel:
    """Dense Hamiltonian of ``g`` on ``basis``.

    The three keyword switches exist so tests can rebuild with one term of the
    Hamiltonian disabled.
    """
    sites = g.sites
    if basis.n_sites != len(sites):
        raise ValueError(f"basis has {basis.n_sites} sites, genome has {len(sites)}")
    bit = {s: i for i, s in enumerate(sites)}
    h = np.zeros((basis.dim, basis.dim))
    for c in g.couplings:
        i, j, v = bit[c.site_a], bit[c.site_b], float(c.value)
        if c.is_onsite:
            if not onsite:
                continue
            for col, s in enumerate(basis.states):
                if s >> i & 1:
                    h[col, col] += v
            continue
        mi, mj = 1 << i, 1 << j
        for col, s in enumerate(basis.states):
            occ_i, occ_j = s & mi, s & mj
            if occ_i and occ_j:
                if interaction:
                    h[col, col] += alpha * v
            elif hopping and (occ_i or occ_j):
                row = basis.index[s ^ mi ^ mj]
                h[row, col] += v
    return HamiltonianModel(basis, h, g.j_max, alpha)


@dataclass(frozen=True)
class BlockOperators:
    """Per-coupling structure of one excitation block.

    The block Hamiltonian is linear in the coupling values::

        H[hop_rows, hop_cols] = values[hop_coupling]
        diag(H) = diag_weights.T @ values

    which lets a whole population be assembled with array indexing.
    """

    k: int
    dim: int
    hop_rows: np.ndarray
    hop_cols: np.ndarray
    hop_coupling: np.ndarray
    diag_weights: np.ndarray  # (n_couplings, dim)


def block_operators(g: Genome, basis: BasisSet, alpha: float = 0.0) -> list[BlockOperators]:
    sites = g.sites
    bit = {s: i for i, s in enumerate(sites)}
    out = []
    for k, sl in basis.block_slices().items():
        states = basis.states[sl]
        local = {s: n for n, s in enumerate(states)}
        rows, cols, which = [], [], []
        diag = np.zeros((len(g.couplings), len(states)))
        for c_idx, c in enumerate(g.couplings):
            i, j = bit[c.site_a], bit[c.site_b]
            if c.is_onsite:
                for n, s in enumerate(states):
                    if s >> i & 1:
                        diag[c_idx, n] = 1.0
                continue
            mi, mj = 1 << i, 1 << j
            for n, s in enumerate(states):
                occ_i, occ_j = s & mi, s & mj
                if occ_i and occ_j:
                    diag[c_idx, n] = alpha
                elif occ_i or occ_j:
                    rows.append(local[s ^ mi ^ mj])
                    cols.append(n)
                    which.append(c_idx)
        out.append(
            BlockOperators(
                k,
                len(states),
                np.array(rows, dtype=np.intp),
                np.array(cols, dtype=np.intp),
                np.array(which, dtype=np.intp),
                diag,
            )
        )
    return out


def assemble_blocks(ops: BlockOperators, values: np.ndarray) -> np.ndarray:
    """Stack of block Hamiltonians, shape (len(values), dim, dim)."""
    values = np.asarray(values, dtype=float)
    h = np.zeros((values.shape[0], ops.dim, ops.dim))
    if ops.hop_rows.size:
        h[:, ops.hop_rows, ops.hop_cols] = values[:, ops.hop_coupling]
    diag = np.zeros((values.shape[0], ops.dim))
    for c in range(values.shape[1]):
        w = ops.diag_weights[c]
        if w.any():
            diag += values[:, c, None] * w
    idx = np.arange(ops.dim)
    h[:, idx, idx] = diag
    return h
