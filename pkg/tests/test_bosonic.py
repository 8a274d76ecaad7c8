import math

import numpy as np
import pytest
from scipy.linalg import expm

from berryion import (
    QSpace,
    SqueezeParam,
    TruncationError,
    annihilator,
    creator,
    coherent_state,
    displacement_op,
    expectation,
    fidelity_up_to_phase,
    number_op,
    number_state,
    overlap,
    squeeze_interior_cap,
    squeeze_op,
    squeezed_number_state,
)

R_GRID = (0.1, 0.3, 0.4812)
THETA_GRID = (0.0, math.pi / 2, math.pi, -2 * math.pi / 3)


# ---------------------------------------------------------------- oracles

def squeezed_vacuum_amps(fock_dim, r, theta):
    """Closed-form amplitudes of S(r e^{i theta})|0>."""
    out = np.zeros(fock_dim, complex)
    t = math.tanh(r)
    for k in range(fock_dim // 2):
        out[2 * k] = (
            (1 / math.cosh(r)) ** 0.5
            * (-np.exp(1j * theta) * t / 2) ** k
            * math.sqrt(math.factorial(2 * k))
            / math.factorial(k)
        )
    return out


def squeezed_one_amps(fock_dim, r, theta):
    """Closed-form amplitudes of S(r e^{i theta})|1>."""
    out = np.zeros(fock_dim, complex)
    t = math.tanh(r)
    for k in range((fock_dim - 1) // 2):
        out[2 * k + 1] = (
            (1 / math.cosh(r)) ** 1.5
            * (-np.exp(1j * theta) * t / 2) ** k
            * math.sqrt(math.factorial(2 * k + 1))
            / math.factorial(k)
        )
    return out


@pytest.fixture(scope="module")
def space():
    return QSpace(fock_dim=64)


def test_number_states(space):
    psi = number_state(0, "g", space)
    assert abs(psi.norm() - 1) < 1e-14
    assert abs(overlap(number_state(2, "g", space), number_state(3, "g", space))) < 1e-14
    assert abs(expectation(number_op(space), number_state(5, "e", space)) - 5) < 1e-12


def test_coherent_vacuum_limit(space):
    v = coherent_state(0.0, "g", space)
    assert fidelity_up_to_phase(v, number_state(0, "g", space)) > 1 - 1e-14


def test_coherent_eigenvalue(space):
    a = annihilator(space)
    psi = coherent_state(1.0, "g", space)
    assert abs(expectation(a, psi) - 1.0) < 1e-8


def test_coherent_overlap_formula(space):
    for alpha in (0.3, 1.0, 2.0, 0.5 + 1.0j):
        for beta in (-0.7, 1.5j, 2.0, -1.0 - 0.5j):
            got = overlap(coherent_state(alpha, "g", space), coherent_state(beta, "g", space))
            want = np.exp(-(abs(alpha) ** 2 + abs(beta) ** 2) / 2 + np.conj(alpha) * beta)
            assert abs(got - want) < 1e-8


def test_readout_ambiguity_overlap(space):
    # |<0|-2 alpha>|^2 = e^{-4|alpha|^2}, the irreducible discrimination error
    alpha = 1.0
    got = abs(overlap(number_state(0, "g", space), coherent_state(-2 * alpha, "g", space))) ** 2
    assert abs(got - math.exp(-4 * abs(alpha) ** 2)) < 1e-6


def test_coherent_tail_guard():
    small = QSpace(fock_dim=12, trunc_margin=4)
    with pytest.raises(TruncationError):
        coherent_state(2.5, "g", small)


@pytest.mark.parametrize("r", R_GRID)
@pytest.mark.parametrize("theta", THETA_GRID)
def test_squeeze_adjoint_identity(space, r, theta):
    s = squeeze_op(SqueezeParam(r, theta), space)
    a = annihilator(space)
    ad = creator(space)
    lhs = (s.dag() @ a @ s).matrix
    rhs = math.cosh(r) * a.matrix - np.exp(1j * theta) * math.sinh(r) * ad.matrix
    cap = squeeze_interior_cap(space.fock_dim, r)
    assert cap >= 8
    keep = np.zeros(space.dim, bool)
    for lvl in range(space.internal_dim):
        keep[lvl * space.fock_dim: lvl * space.fock_dim + cap] = True
    assert np.abs((lhs - rhs)[np.ix_(keep, keep)]).max() < 1e-8


def test_squeeze_zero_is_identity(space):
    s = squeeze_op(SqueezeParam(0.0), space)
    assert np.abs(s.matrix - np.eye(space.dim)).max() < 1e-14


def test_squeeze_unitarity(space):
    s = squeeze_op(SqueezeParam(0.48, 1.1), space)
    assert np.abs((s @ s.dag()).matrix - np.eye(space.dim)).max() < 1e-10


def test_squeeze_matches_direct_generator_exponential(space):
    # the cached rotation-conjugation path equals expm of the complex generator
    eps = SqueezeParam(0.4812, -2 * math.pi / 3)
    a = annihilator(space).matrix
    ad = creator(space).matrix
    gen = 0.5 * (np.conj(eps.eps) * a @ a - eps.eps * ad @ ad)
    direct = expm(gen)
    assert np.abs(squeeze_op(eps, space).matrix - direct).max() < 1e-12


def test_displacement_creates_coherent(space):
    alpha = 0.8 + 0.3j
    d = displacement_op(alpha, space)
    created = d @ number_state(0, "g", space)
    assert fidelity_up_to_phase(created, coherent_state(alpha, "g", space)) > 1 - 1e-10


def test_displacement_inverse(space):
    alpha = 1.0
    d = displacement_op(-alpha, space)
    out = d @ coherent_state(alpha, "g", space)
    assert fidelity_up_to_phase(out, number_state(0, "g", space)) > 1 - 1e-8
    # composition phase Im(-alpha * conj(alpha)) = 0 for real alpha: exact equality
    assert np.abs(out.amplitudes - number_state(0, "g", space).amplitudes).max() < 1e-7


def test_displacement_composition_oracle(space):
    # D(beta)|alpha> = e^{i Im(beta conj(alpha))} |alpha + beta>
    alpha, beta = -1.0, -1.0
    moved = displacement_op(beta, space) @ coherent_state(alpha, "g", space)
    target = coherent_state(alpha + beta, "g", space)
    assert fidelity_up_to_phase(moved, target) > 1 - 1e-8
    phase = np.angle(overlap(target, moved))
    assert abs(phase - np.imag(beta * np.conj(alpha))) < 1e-7


def test_displacement_zero_identity(space):
    d = displacement_op(0.0, space)
    assert np.abs(d.matrix - np.eye(space.dim)).max() < 1e-14


def test_displacement_unitarity(space):
    d = displacement_op(0.9, space)
    dm = displacement_op(-0.9, space)
    assert np.abs((d @ dm).matrix - np.eye(space.dim)).max() < 1e-10


@pytest.mark.parametrize("r,theta", [(0.0, 0.0), (0.3, 1.2), (0.4812, 0.0), (0.4812, -2.1)])
def test_squeezed_vacuum_closed_form(space, r, theta):
    got = squeezed_number_state(0, SqueezeParam(r, theta), "g", space)
    want = squeezed_vacuum_amps(space.fock_dim, r, theta)
    assert np.abs(got.amplitudes[: space.fock_dim] - want).max() < 1e-8


@pytest.mark.parametrize("r,theta", [(0.3, 0.7), (0.4812, 0.0)])
def test_squeezed_one_closed_form(space, r, theta):
    got = squeezed_number_state(1, SqueezeParam(r, theta), "g", space)
    want = squeezed_one_amps(space.fock_dim, r, theta)
    assert np.abs(got.amplitudes[: space.fock_dim] - want).max() < 1e-8


def test_squeezed_one_p3_value(space):
    # population of |3> in the squeezed first Fock state at the working point,
    # frozen from the closed-form amplitudes
    got = squeezed_number_state(1, SqueezeParam(float(np.arcsinh(0.5))), "g", space)
    p3 = abs(got.amplitudes[3]) ** 2
    oracle = abs(squeezed_one_amps(8, float(np.arcsinh(0.5)), 0.0)[3]) ** 2
    assert abs(p3 - oracle) < 1e-8
    assert abs(p3 - 0.21466) < 5e-5


def test_squeezed_number_parity_selection(space):
    psi = squeezed_number_state(2, SqueezeParam(0.4), "g", space)
    odd = psi.amplitudes[1: space.fock_dim: 2]
    assert np.abs(odd).max() < 1e-14


def test_squeezed_number_r_zero(space):
    psi = squeezed_number_state(0, SqueezeParam(0.0), "g", space)
    assert fidelity_up_to_phase(psi, number_state(0, "g", space)) > 1 - 1e-14


def test_squeezed_number_tail_guard():
    small = QSpace(fock_dim=32, trunc_margin=6)
    with pytest.raises(TruncationError):
        squeezed_number_state(5, SqueezeParam(0.4812), "g", small)
    big = QSpace(fock_dim=96, trunc_margin=6)
    squeezed_number_state(5, SqueezeParam(0.4812), "g", big)  # fits


def test_tail_guard_on_all_factories(space):
    # every factory output keeps the top-margin mass below 1e-10
    margin = space.trunc_margin
    for ket in (
        coherent_state(1.0, "g", space),
        squeezed_number_state(1, SqueezeParam(0.4812), "g", space),
        number_state(3, "e", space),
    ):
        for lvl in range(space.internal_dim):
            hi = slice(lvl * space.fock_dim + space.fock_dim - margin, (lvl + 1) * space.fock_dim)
            assert np.sum(np.abs(ket.amplitudes[hi]) ** 2) < 1e-10
