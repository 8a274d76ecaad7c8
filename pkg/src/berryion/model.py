"""Model Hamiltonians, their analytic eigensystem, and trap-parameter conversion.

The driven two-sideband Hamiltonian implemented here is

    H(phi) = g_a (s+ a + a^dag s-)  +  g_b (e^{i phi} s+ a^dag + e^{-i phi} s- a),

with the tunable laser phase riding on the pair that drives the s+ a^dag
sideband.  With eps = r e^{i phi}, r = atanh(g_b/g_a), the squeeze frame
diagonalizes it exactly:

    S(eps)^dag H(phi) S(eps) = Omega (s+ a + a^dag s-),   Omega = g_a cosh r - g_b sinh r,

so the eigenstates are S(eps)(|g,n+1> +- |e,n>)/sqrt(2) with eigenvalues
+-Omega sqrt(n+1), plus the dark state S(eps)|g,0> at zero.  Putting the
phase on the other sideband instead only redefines the |e> phase
reference by a slow internal rotation; this placement is the one in which
the squeeze frame needs no extra internal rotation, and it is what the
first-order reduction of the two-pair laser Hamiltonian below produces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .bosonic import SqueezeParam, squeeze_fock_matrix
from .hilbert import Ket, LinOp, QSpace, internal_op, annihilator

__all__ = [
    "Couplings",
    "TrapParams",
    "PhasedDrive",
    "build_H",
    "build_H_JC",
    "eigensystem_analytic",
    "dark_state",
    "build_lab_H",
    "derive_couplings",
    "QUARTER_HANNAY_R",
]

# squeezing strength with sinh^2 r = 1/4, the protocol's working point
QUARTER_HANNAY_R = float(np.arcsinh(0.5))


@dataclass(frozen=True)
class Couplings:
    """Sideband coupling strengths g_a > g_b >= 0 and the slow laser phase."""

    g_a: float
    g_b: float
    phi: float = 0.0

    def __post_init__(self):
        if not self.g_a > 0:
            raise ValueError(f"g_a must be positive, got {self.g_a}")
        if not 0 <= self.g_b < self.g_a:
            raise ValueError(f"need g_a > g_b >= 0, got g_a={self.g_a}, g_b={self.g_b}")

    @property
    def r(self) -> float:
        """Squeezing strength atanh(g_b / g_a) of the diagonalizing frame."""
        return float(np.arctanh(self.g_b / self.g_a))

    @property
    def Omega(self) -> float:
        """Exchange strength of the diagonalized resonant coupling."""
        r = self.r
        return float(self.g_a * np.cosh(r) - self.g_b * np.sinh(r))

    @classmethod
    def from_squeezing(cls, r: float, g_a: float = 1.0, phi: float = 0.0) -> "Couplings":
        """Couplings whose diagonalizing squeeze strength is exactly r."""
        if r < 0:
            raise ValueError("squeezing strength must be nonnegative")
        return cls(g_a=g_a, g_b=g_a * float(np.tanh(r)), phi=phi)


@dataclass(frozen=True)
class TrapParams:
    """Trap and laser parameters; all frequencies angular, times in seconds."""

    eta12: float
    eta34: float
    Omega12: float
    Omega34: float
    nu: float
    omega0: float
    T_motional: float
    T_internal: float
    delta: float = 0.0

    def __post_init__(self):
        for name in ("Omega12", "Omega34", "nu", "omega0", "T_motional", "T_internal"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.eta34 and 0 < self.eta12):
            raise ValueError("Lamb-Dicke parameters must be nonnegative (eta12 > 0)")
        if max(self.eta12, self.eta34) > 0.3:
            import warnings

            warnings.warn("Lamb-Dicke parameter above 0.3; first-order reduction is unreliable")


class PhasedDrive:
    """Callable t -> H(phi(t)) with the matrices precomputed once.

    H(phi) = H_a + e^{i phi} C + e^{-i phi} C^dag, where H_a is the static
    g_a exchange part and C = g_b s+ a^dag.  phi_of_t is any callable.
    """

    def __init__(self, c: Couplings, space: QSpace, phi_of_t):
        sp = internal_op("sigma_plus", space).matrix
        a = annihilator(space).matrix
        ha = c.g_a * (sp @ a)
        self.space = space
        self.couplings = c
        self.h_static = ha + ha.conj().T
        self.c_matrix = c.g_b * (sp @ a.conj().T)
        self.phi_of_t = phi_of_t

    def matrix_at(self, t: float) -> np.ndarray:
        z = np.exp(1j * self.phi_of_t(t))
        m = z * self.c_matrix
        return self.h_static + m + m.conj().T

    def __call__(self, t: float) -> LinOp:
        return LinOp(self.matrix_at(t), self.space, hermitian=True)


def build_H(c: Couplings, space: QSpace) -> LinOp:
    """Two-sideband Hamiltonian at the couplings' phase value."""
    return PhasedDrive(c, space, lambda t: c.phi)(0.0)


def build_H_JC(Omega: float, space: QSpace) -> LinOp:
    """Resonant exchange coupling Omega (s+ a + a^dag s-)."""
    if Omega <= 0:
        raise ValueError("Omega must be positive")
    sp = internal_op("sigma_plus", space).matrix
    a = annihilator(space).matrix
    m = Omega * (sp @ a)
    return LinOp(m + m.conj().T, space, hermitian=True)


def eigensystem_analytic(
    n: int, eps: SqueezeParam, branch: int, Omega: float, space: QSpace
) -> tuple[Ket, float]:
    """Analytic eigenpair of build_H at couplings matching (eps, Omega).

    Returns (S(eps)(|g,n+1> + branch |e,n>)/sqrt2, branch * Omega * sqrt(n+1));
    branch is +1 or -1.  Valid for build_H with phi = eps.theta and
    r = eps.r = atanh(g_b/g_a).
    """
    if branch not in (+1, -1):
        raise ValueError("branch must be +1 or -1")
    if n < 0 or n + 1 >= space.fock_dim - space.trunc_margin:
        raise ValueError(f"pair index n={n} too close to the truncation ceiling")
    s = squeeze_fock_matrix(space.fock_dim, eps)
    full = np.zeros(space.dim, dtype=complex)
    g0 = space.index("g", 0)
    e0 = space.index("e", 0)
    full[g0:g0 + space.fock_dim] = s[:, n + 1] / np.sqrt(2)
    full[e0:e0 + space.fock_dim] = branch * s[:, n] / np.sqrt(2)
    return Ket(full, space), float(branch * Omega * np.sqrt(n + 1))


def dark_state(eps: SqueezeParam, space: QSpace) -> Ket:
    """Zero-eigenvalue state S(eps)|g,0> of build_H at matching couplings."""
    s = squeeze_fock_matrix(space.fock_dim, eps)
    full = np.zeros(space.dim, dtype=complex)
    g0 = space.index("g", 0)
    full[g0:g0 + space.fock_dim] = s[:, 0]
    return Ket(full, space)


@lru_cache(maxsize=32)
def _kick_matrix(fock_dim: int, eta: float) -> np.ndarray:
    """exp(i eta (a + a^dag)) on the bare oscillator."""
    a = np.diag(np.sqrt(np.arange(1, fock_dim)), 1).astype(complex)
    return expm(1j * eta * (a + a.conj().T))


def _kick_first_order(fock_dim: int, eta: float) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, fock_dim)), 1).astype(complex)
    return np.eye(fock_dim, dtype=complex) + 1j * eta * (a + a.conj().T)


def build_lab_H(t: float, tp: TrapParams, phi: float, order: str, space: QSpace) -> LinOp:
    """Two-pair laser Hamiltonian in the internal rotating frame.

        H = nu a^dag a
          + (Omega12/2) (e^{i nu t} E12 s+ + h.c.)
          + (Omega34/2) (e^{i (phi - nu t)} E34 s+ + h.c.),

    with E_ij = exp(i eta_ij (a + a^dag)) for order='exact' or its
    first-order truncation for order='lamb_dicke_1'.  The free motional
    term is kept explicitly so the two pairs address the lower and upper
    sidebands.  In the nu-rotating frame the surviving slow terms are
    i (eta12 Omega12 / 2) s+ a  +  i (eta34 Omega34 / 2) e^{i phi} s+ a^dag + h.c.,
    i.e. build_H at derive_couplings(tp) up to a constant internal phase
    (|e> -> i|e>).
    """
    if order not in ("exact", "lamb_dicke_1"):
        raise ValueError(f"order must be 'exact' or 'lamb_dicke_1', got {order!r}")
    n = space.fock_dim
    kick = _kick_matrix if order == "exact" else _kick_first_order
    e12 = kick(n, float(tp.eta12))
    e34 = kick(n, float(tp.eta34))
    sp = internal_op("sigma_plus", space).matrix
    blk = (tp.Omega12 / 2) * np.exp(1j * tp.nu * t) * space.fock_block(e12) \
        + (tp.Omega34 / 2) * np.exp(1j * (phi - tp.nu * t)) * space.fock_block(e34)
    m = sp @ blk
    num = space.fock_block(np.diag(np.arange(n)).astype(complex))
    return LinOp(tp.nu * num + m + m.conj().T, space, hermitian=True)


def derive_couplings(tp: TrapParams, phi: float = 0.0) -> Couplings:
    """First-order sideband couplings g_a = eta12 Omega12 / 2, g_b = eta34 Omega34 / 2.

    The slow phase is the laser phase of the g_b pair, or delta * t when
    the static-phase, detuned-pair alternative is used (a linear phase
    ramp in the Schedule reproduces exactly that).
    """
    g_a = tp.eta12 * tp.Omega12 / 2
    g_b = tp.eta34 * tp.Omega34 / 2
    if g_a <= g_b:
        raise ValueError(
            f"first-order couplings need eta12*Omega12 > eta34*Omega34 "
            f"(got g_a={g_a}, g_b={g_b}); the squeeze frame diverges otherwise"
        )
    return Couplings(g_a=g_a, g_b=g_b, phi=phi)
