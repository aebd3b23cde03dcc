import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinevo.errors import CapacityError
from spinevo.genome import chain_genome, parse
from spinevo.hilbert import (
    assemble_blocks,
    block_operators,
    build_hamiltonian,
    enumerate_basis,
    protocol_basis,
    state_vector,
)

from .strategies import random_genome


def test_single_excitation_basis():
    b = protocol_basis(parse("<A|C>AB500BC500"))
    assert b.excitation_numbers == (1,)
    assert b.states == (0b001, 0b010, 0b100)


def test_full_two_site_space():
    b = protocol_basis(parse("<0+A+B+AB|A>AB500"))
    assert b.excitation_numbers == (0, 1, 2)
    assert b.dim == 4


def test_three_excitation_count_matches_exhaustive_enumeration():
    b = protocol_basis(parse("<ABC|EFG>AB1BC1CD1DE1EF1FG1"))
    brute = [m for m in range(2**7) if bin(m).count("1") == 3]
    assert b.dim == len(brute) == 35
    assert list(b.states) == brute


def test_basis_ordering_and_index():
    b = enumerate_basis(5, {2, 0, 1})
    pops = [bin(s).count("1") for s in b.states]
    assert pops == sorted(pops)
    for k, sl in b.block_slices().items():
        block = b.states[sl]
        assert list(block) == sorted(block)
        assert all(bin(s).count("1") == k for s in block)
    assert all(b.index[s] == i for i, s in enumerate(b.states))


def test_capacity():
    with pytest.raises(CapacityError):
        enumerate_basis(20, {10}, capacity=1000)


def test_state_vector_uses_alphabetical_bits():
    g = parse("<B|AC>AB1BC1")
    b = protocol_basis(g)
    psi = state_vector(g.initial, g.sites, b)
    assert psi[b.index[0b010]] == 1
    tgt = state_vector(g.target, g.sites, b)
    assert tgt[b.index[0b101]] == 1


def test_two_site_hopping():
    g = parse("<A|B>AB1")
    h = build_hamiltonian(g, protocol_basis(g))
    assert np.array_equal(h.matrix, [[0, 1], [1, 0]])


def test_three_site_chain_matrix():
    g = parse("<A|C>AB500BC500")
    h = build_hamiltonian(g, protocol_basis(g))
    assert np.array_equal(h.matrix, [[0, 500, 0], [500, 0, 500], [0, 500, 0]])
    assert h.j_max == 500


def test_alpha_term_two_site():
    g = parse("<AB|AB>AB1000")
    h = build_hamiltonian(g, protocol_basis(g), alpha=0.141)
    assert h.matrix.shape == (1, 1)
    assert h.matrix[0, 0] == pytest.approx(141.0, abs=1e-12)


def test_onsite_energy_on_diagonal():
    g = parse("<A|B>AA650AB500")
    h = build_hamiltonian(g, protocol_basis(g))
    assert np.array_equal(h.matrix, [[650, 500], [500, 0]])


def test_negative_coupling():
    g = parse("<A|B>BA500")
    h = build_hamiltonian(g, protocol_basis(g))
    assert h.matrix[0, 1] == -500
    assert h.j_max == 500


@settings(max_examples=60, deadline=None)
@given(random_genome(max_sites=6, max_excitations=3))
def test_hermitian_and_excitation_conserving(g):
    b = protocol_basis(g)
    h = build_hamiltonian(g, b, alpha=0.3).matrix
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    pops = np.array([bin(s).count("1") for s in b.states])
    assert not np.any(h[pops[:, None] != pops[None, :]])


@settings(max_examples=60, deadline=None)
@given(random_genome(max_sites=6, max_excitations=3))
def test_alpha_zero_drops_interaction(g):
    b = protocol_basis(g)
    with_term = build_hamiltonian(g, b, alpha=0.0).matrix
    without = build_hamiltonian(g, b, alpha=0.7, interaction=False).matrix
    assert np.array_equal(with_term, without)


@settings(max_examples=60, deadline=None)
@given(random_genome(max_sites=6, max_excitations=3), st.integers(0, 5))
def test_linearity(g, c):
    # alpha = 1/4 keeps every product exact in binary floating point
    b = protocol_basis(g)
    scaled = g.with_values([c * v for v in g.values])
    assert np.array_equal(build_hamiltonian(scaled, b, 0.25).matrix, c * build_hamiltonian(g, b, 0.25).matrix)


@settings(max_examples=60, deadline=None)
@given(random_genome(max_sites=6, max_excitations=3))
def test_batched_assembly_matches_explicit(g):
    b = protocol_basis(g)
    h = build_hamiltonian(g, b, alpha=0.141).matrix
    values = np.array([g.values], dtype=float)
    for ops, sl in zip(block_operators(g, b, 0.141), b.block_slices().values()):
        assert np.allclose(assemble_blocks(ops, values)[0], h[sl, sl], rtol=0, atol=1e-12)


def test_chain_genome_builder():
    g = chain_genome([1, 2, 3], width=1)
    assert str(g) == "<A|D>AB1BC2CD3"
