"""Time-dependent propagation with adiabaticity monitoring.

The integrator is the midpoint exponential rule,

    psi_{k+1} = exp(-i H(t_k + dt/2) dt) psi_k,

second-order accurate and exactly norm-preserving for Hermitian H, so any
norm drift signals a genuine numerics problem and aborts the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import Ket, LinOp, NumericsError, expm_apply_matrix, internal_op

__all__ = [
    "Schedule",
    "Trajectory",
    "LeakageReport",
    "propagate",
    "apply_flip_pulse",
    "adiabaticity_report",
]

RAMPS = ("linear", "smoothstep")


def _smoothstep(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class Schedule:
    """Cyclic ramp of the slow laser phase.

    One cycle advances phi by direction * 2*pi over the period T.  The
    linear ramp is exactly the constant-detuning alternative
    phi(t) = delta * t with delta = direction * 2*pi / T; smoothstep
    additionally switches the ramp rate on and off smoothly, suppressing
    the diabatic kick at the cycle endpoints.
    """

    T: float
    cycles: int = 1
    ramp: str = "smoothstep"
    phi0: float = 0.0
    direction: int = 1
    steps_per_cycle: int = 3000
    flip_after_cycle: int | None = None

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("cycle period T must be positive")
        if self.cycles < 1:
            raise ValueError("cycles must be a positive integer")
        if self.ramp not in RAMPS:
            raise ValueError(f"ramp must be one of {RAMPS}")
        if self.direction not in (+1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.steps_per_cycle < 2:
            raise ValueError("steps_per_cycle must be at least 2")
        if self.flip_after_cycle is not None and not 0 <= self.flip_after_cycle < self.cycles:
            raise ValueError("flip_after_cycle must name a cycle index inside the run")

    @property
    def dt(self) -> float:
        return self.T / self.steps_per_cycle

    @property
    def total_time(self) -> float:
        return self.T * self.cycles

    def phi_of_t(self, t: float) -> float:
        """Phase at time t in [0, cycles*T]."""
        cyc, frac = divmod(t / self.T, 1.0)
        if cyc >= self.cycles:  # endpoint
            cyc, frac = self.cycles - 1, 1.0
        f = _smoothstep(frac) if self.ramp == "smoothstep" else frac
        return self.phi0 + self.direction * 2.0 * np.pi * (cyc + f)


@dataclass(frozen=True)
class Trajectory:
    """Sampled states plus per-step energy record of one propagation."""

    times: np.ndarray
    states: tuple[Ket, ...]
    energy_times: np.ndarray
    energies: np.ndarray
    norm_drift: float
    schedule: Schedule

    def final(self) -> Ket:
        return self.states[-1]

    def dynamical_phase(self) -> float:
        """-integral of <H(t)> dt by trapezoidal quadrature at step density."""
        return float(-np.trapezoid(self.energies, self.energy_times))


@dataclass(frozen=True)
class LeakageReport:
    times: np.ndarray
    leakage: np.ndarray
    max_leakage: float = field(init=False)
    final_leakage: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "max_leakage", float(np.max(self.leakage)))
        object.__setattr__(self, "final_leakage", float(self.leakage[-1]))


def propagate(
    H_of_t,
    psi0: Ket,
    sched: Schedule,
    store_every: int | None = None,
    track_energy: bool = True,
    norm_tol: float = 1e-6,
) -> Trajectory:
    """Midpoint-exponential propagation of psi0 under H_of_t over the schedule.

    H_of_t is a callable t -> LinOp (model.PhasedDrive qualifies); its
    phase argument is expected to be driven by the same schedule.  States
    are stored every ``store_every`` steps (default: ~200 samples per
    cycle); energies <H(t)> are recorded every step when track_energy.
    """
    psi0.require_normalized(1e-8)
    space = psi0.space
    if store_every is None:
        store_every = max(1, sched.steps_per_cycle // 200)
    dt = sched.dt
    n_steps = sched.steps_per_cycle * sched.cycles
    flip_diag = None
    if sched.flip_after_cycle is not None:
        flip_diag = np.diag(internal_op("flip_g", space).matrix).copy()

    def h_matrix(t: float) -> np.ndarray:
        h = H_of_t(t)
        return h.matrix if isinstance(h, LinOp) else np.asarray(h)

    vec = psi0.amplitudes.copy()
    times = [0.0]
    states = [psi0]
    e_times = []
    energies = []
    if track_energy:
        e_times.append(0.0)
        energies.append(float(np.vdot(vec, h_matrix(0.0) @ vec).real))
    worst_drift = 0.0
    for k in range(n_steps):
        t_mid = (k + 0.5) * dt
        vec = expm_apply_matrix(h_matrix(t_mid), -1j * dt, vec)
        if not np.all(np.isfinite(vec.view(float))):
            raise NumericsError(f"non-finite state at step {k + 1}")
        drift = abs(np.linalg.norm(vec) - 1.0)
        worst_drift = max(worst_drift, drift)
        if drift > norm_tol:
            raise NumericsError(f"norm drift {drift:.3e} exceeded {norm_tol:.0e} at step {k + 1}")
        t_now = (k + 1) * dt
        cycle_end = (k + 1) % sched.steps_per_cycle == 0
        if cycle_end and flip_diag is not None:
            cyc = (k + 1) // sched.steps_per_cycle - 1
            if cyc == sched.flip_after_cycle:
                vec = flip_diag * vec
        if track_energy:
            e_times.append(t_now)
            energies.append(float(np.vdot(vec, h_matrix(t_now) @ vec).real))
        if (k + 1) % store_every == 0 or k + 1 == n_steps:
            times.append(t_now)
            states.append(Ket(vec.copy(), space))
    return Trajectory(
        times=np.asarray(times),
        states=tuple(states),
        energy_times=np.asarray(e_times, dtype=float),
        energies=np.asarray(energies, dtype=float),
        norm_drift=worst_drift,
        schedule=sched,
    )


def apply_flip_pulse(psi: Ket) -> Ket:
    """Instantaneous state-dependent pi phase |g> -> -|g>.

    Models the fast 2-pi pulse on the g level; commutes with every
    oscillator operator, and exchanges the +- exchange eigenstates up to
    an overall sign.
    """
    flip = internal_op("flip_g", psi.space)
    return flip @ psi


def adiabaticity_report(traj: Trajectory, eigen_family) -> LeakageReport:
    """Population outside a tracked eigen-family along a trajectory.

    eigen_family is a callable t -> sequence of Ket spanning the tracked
    instantaneous eigenspace; the leakage at each stored sample is
    1 - sum of |<family_i|psi>|^2.
    """
    leak = []
    for t, state in zip(traj.times, traj.states):
        family = eigen_family(t)
        pop = 0.0
        for member in family:
            pop += abs(np.vdot(member.amplitudes, state.amplitudes)) ** 2
        leak.append(max(0.0, 1.0 - pop))
    return LeakageReport(times=np.asarray(traj.times), leakage=np.asarray(leak))
