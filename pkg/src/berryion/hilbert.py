"""Truncated Fock x internal-level linear algebra: spaces, kets, operators.

Basis convention: the joint index is internal-major,

    index = (internal level) * fock_dim + (Fock number),

with internal levels ordered g=0, e=1, r=2.  All values are immutable
after construction and every operation here is pure, so spaces, kets and
operators can be shared freely between threads or worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QSpace",
    "Ket",
    "LinOp",
    "NumericsError",
    "annihilator",
    "creator",
    "number_op",
    "identity_op",
    "internal_op",
    "expm_apply",
    "overlap",
    "expectation",
    "fidelity_up_to_phase",
]

LEVELS = {"g": 0, "e": 1, "r": 2}

INTERNAL_KINDS = ("sigma_plus", "sigma_minus", "sigma_z", "proj_g", "proj_e", "proj_r", "flip_g")


class NumericsError(RuntimeError):
    """A numeric contract was violated (norm drift, truncation, adiabaticity)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class QSpace:
    """Truncated oscillator (fock_dim levels) tensored with 2 or 3 internal levels."""

    fock_dim: int
    internal_dim: int = 2
    trunc_margin: int = 6

    def __post_init__(self):
        if self.fock_dim < 8:
            raise ValueError(f"fock_dim must be >= 8, got {self.fock_dim}")
        if self.internal_dim not in (2, 3):
            raise ValueError(f"internal_dim must be 2 or 3, got {self.internal_dim}")
        if not 0 <= self.trunc_margin < self.fock_dim / 2:
            raise ValueError(f"trunc_margin must lie in [0, fock_dim/2), got {self.trunc_margin}")

    @property
    def dim(self) -> int:
        return self.fock_dim * self.internal_dim

    def index(self, level: str | int, n: int) -> int:
        """Joint basis index of |level>|n>."""
        lvl = LEVELS[level] if isinstance(level, str) else level
        if lvl >= self.internal_dim:
            raise ValueError(f"internal level {level!r} outside a {self.internal_dim}-level space")
        if not 0 <= n < self.fock_dim:
            raise ValueError(f"Fock index {n} outside [0, {self.fock_dim})")
        return lvl * self.fock_dim + n

    def fock_block(self, op_fock: np.ndarray) -> np.ndarray:
        """Tensor a fock_dim x fock_dim matrix with the internal identity."""
        return np.kron(np.eye(self.internal_dim), op_fock)

    def internal_block(self, op_int: np.ndarray) -> np.ndarray:
        """Tensor an internal matrix with the Fock identity."""
        return np.kron(op_int, np.eye(self.fock_dim))


@dataclass(frozen=True)
class Ket:
    """Complex state vector on a QSpace."""

    amplitudes: np.ndarray
    space: QSpace

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise ValueError(f"amplitude vector has shape {amps.shape}, expected ({self.space.dim},)")
        if not np.all(np.isfinite(amps.view(float))):
            raise NumericsError("non-finite amplitudes in Ket")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "Ket":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Ket(self.amplitudes / n, self.space)

    def require_normalized(self, tol: float = 1e-10) -> "Ket":
        if abs(self.norm() - 1.0) > tol:
            raise NumericsError(f"state norm {self.norm()} deviates from 1 beyond {tol}")
        return self


@dataclass(frozen=True)
class LinOp:
    """Dense complex operator on a QSpace."""

    matrix: np.ndarray
    space: QSpace
    hermitian: bool = field(default=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix has shape {m.shape}, expected square of dim {self.space.dim}")
        if self.hermitian and np.abs(m - m.conj().T).max() >= 1e-12:
            raise NumericsError("operator flagged hermitian fails the hermiticity check")
        object.__setattr__(self, "matrix", _readonly(m))

    def dag(self) -> "LinOp":
        return LinOp(self.matrix.conj().T, self.space, hermitian=self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, Ket):
            _check_same_space(self, other)
            return Ket(self.matrix @ other.amplitudes, self.space)
        if isinstance(other, LinOp):
            _check_same_space(self, other)
            return LinOp(self.matrix @ other.matrix, self.space)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, LinOp):
            _check_same_space(self, other)
            return LinOp(self.matrix + other.matrix, self.space)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, LinOp):
            _check_same_space(self, other)
            return LinOp(self.matrix - other.matrix, self.space)
        return NotImplemented

    def __rmul__(self, scalar):
        return LinOp(complex(scalar) * self.matrix, self.space)


def _check_same_space(a, b):
    if a.space != b.space:
        raise ValueError("operands live on different spaces")


def _fock_annihilator(fock_dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, fock_dim)), 1).astype(complex)


def annihilator(space: QSpace) -> LinOp:
    """Oscillator lowering operator a (tensored with the internal identity)."""
    return LinOp(space.fock_block(_fock_annihilator(space.fock_dim)), space)


def creator(space: QSpace) -> LinOp:
    """Oscillator raising operator a^dag."""
    return annihilator(space).dag()


def number_op(space: QSpace) -> LinOp:
    """Phonon number operator a^dag a."""
    return LinOp(space.fock_block(np.diag(np.arange(space.fock_dim)).astype(complex)), space, hermitian=True)


def identity_op(space: QSpace) -> LinOp:
    return LinOp(np.eye(space.dim, dtype=complex), space, hermitian=True)


def internal_op(kind: str, space: QSpace) -> LinOp:
    """Internal-level operator tensored with the Fock identity.

    sigma_z follows the |g><g| - |e><e| sign convention; flip_g is the
    state-dependent pi phase diag(-1 on g, +1 elsewhere) produced by a
    fast 2-pi pulse on the g level.
    """
    d = space.internal_dim
    if kind not in INTERNAL_KINDS:
        raise ValueError(f"unknown internal operator {kind!r}; expected one of {INTERNAL_KINDS}")
    if kind == "proj_r" and d == 2:
        raise ValueError("proj_r requires a 3-level internal space")
    m = np.zeros((d, d), dtype=complex)
    herm = True
    if kind == "sigma_plus":
        m[LEVELS["e"], LEVELS["g"]] = 1.0
        herm = False
    elif kind == "sigma_minus":
        m[LEVELS["g"], LEVELS["e"]] = 1.0
        herm = False
    elif kind == "sigma_z":
        m[LEVELS["g"], LEVELS["g"]] = 1.0
        m[LEVELS["e"], LEVELS["e"]] = -1.0
    elif kind == "proj_g":
        m[LEVELS["g"], LEVELS["g"]] = 1.0
    elif kind == "proj_e":
        m[LEVELS["e"], LEVELS["e"]] = 1.0
    elif kind == "proj_r":
        m[LEVELS["r"], LEVELS["r"]] = 1.0
    elif kind == "flip_g":
        np.fill_diagonal(m, 1.0)
        m[LEVELS["g"], LEVELS["g"]] = -1.0
    return LinOp(space.internal_block(m), space, hermitian=herm)


def expm_apply_matrix(matrix: np.ndarray, scale: complex, vec: np.ndarray, breakdown: int = 120) -> np.ndarray:
    """exp(scale * matrix) @ vec by a scaled Taylor expansion to machine precision.

    The series is summed with sub-stepping so that each substep has
    ||scale * matrix||_1 / s <= 1; every term is one matvec, which beats a
    dense expm by a large factor at these dimensions.
    """
    if not np.all(np.isfinite(vec.view(float))):
        raise NumericsError("non-finite input vector in expm_apply")
    nrm = abs(scale) * np.linalg.norm(matrix, 1)
    if not np.isfinite(nrm):
        raise NumericsError("non-finite operator in expm_apply")
    s = max(1, int(np.ceil(nrm)))
    a = (scale / s) * matrix
    out = vec
    for _ in range(s):
        term = out
        acc = out.copy()
        for k in range(1, breakdown):
            term = a @ term / k
            acc += term
            if np.linalg.norm(term) <= 1e-16 * np.linalg.norm(acc):
                break
        else:
            raise NumericsError("expm_apply Taylor series failed to converge")
        out = acc
    return out


def expm_apply(op: LinOp, scale: complex, psi: Ket) -> Ket:
    """Apply exp(scale * op) to a state."""
    _check_same_space(op, psi)
    return Ket(expm_apply_matrix(op.matrix, scale, psi.amplitudes), psi.space)


def overlap(a: Ket, b: Ket) -> complex:
    """Inner product <a|b>."""
    _check_same_space(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expectation(op: LinOp, psi: Ket) -> complex:
    """<psi|op|psi>."""
    _check_same_space(op, psi)
    return complex(np.vdot(psi.amplitudes, op.matrix @ psi.amplitudes))


def fidelity_up_to_phase(a: Ket, b: Ket) -> float:
    """|<a|b>|^2 on normalized rays; insensitive to global phases."""
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        raise ValueError("fidelity of a zero vector is undefined")
    return float(abs(overlap(a, b)) ** 2 / (na * nb) ** 2)
