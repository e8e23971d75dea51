"""Chains, disorder ensembles and annealing schedules.

Couplings are stored in units where the characteristic J is 1.  All types
are immutable after construction and safe to share between workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

OPEN = "open"
PERIODIC = "periodic"

UNIFORM01 = "uniform01"
FIXED = "fixed"

SA_TEMPERATURE = "sa_temperature"
QA_FIELD = "qa_field"


@dataclass(frozen=True)
class CouplingSet:
    """Ferromagnetic bonds J_j >= 0 of a chain of L spins.

    For open boundaries J has length L-1 (bond j couples sites j, j+1);
    for periodic boundaries length L (bond L-1 wraps around to site 0).
    """

    L: int
    J: tuple
    boundary: str = OPEN

    def __post_init__(self):
        if self.L < 2:
            raise ConfigError(f"need at least 2 spins, got L={self.L}")
        if self.boundary not in (OPEN, PERIODIC):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        object.__setattr__(self, "J", tuple(float(j) for j in self.J))
        if len(self.J) != self.n_bonds:
            raise ConfigError(
                f"{self.boundary} chain of L={self.L} needs {self.n_bonds} bonds, "
                f"got {len(self.J)}"
            )
        if any(j < 0 for j in self.J):
            raise ConfigError("couplings must be ferromagnetic (J_j >= 0)")

    @property
    def n_bonds(self):
        return self.L if self.boundary == PERIODIC else self.L - 1

    @property
    def is_periodic(self):
        return self.boundary == PERIODIC

    def J_array(self):
        return np.asarray(self.J, dtype=float)

    def bonds(self):
        """Yield (site_a, site_b, J, wraps) for every bond.

        ``wraps`` flags the periodic bond crossing the chain end; fermionized
        operators pick up the even-parity-sector sign there.
        """
        for b, j in enumerate(self.J):
            yield b, (b + 1) % self.L, j, (b == self.L - 1)

    def neighbor_bonds(self, j):
        """(J_left, J_right) of site j; missing bonds at open ends count as 0."""
        if self.boundary == PERIODIC:
            return self.J[(j - 1) % self.L], self.J[j]
        left = self.J[j - 1] if j > 0 else 0.0
        right = self.J[j] if j < self.L - 1 else 0.0
        return left, right

    def to_text(self):
        """Plain-text serialization: first line "L boundary", one J per line."""
        lines = [f"{self.L} {self.boundary}"]
        lines += [f"{j:.17g}" for j in self.J]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if len(head) != 2:
            raise ConfigError(f"bad coupling-file header {lines[0]!r}")
        L = int(head[0])
        J = tuple(float(ln) for ln in lines[1:])
        return cls(L=L, J=J, boundary=head[1])


@dataclass(frozen=True)
class DisorderSpec:
    """Reproducible disorder stream: (seed, realization_index) -> couplings.

    Streams are split by seeding PCG64 with seed XOR realization_index, so a
    realization is a pure function of the pair, independent of draw order.
    """

    distribution: str = UNIFORM01
    seed: int = 0
    realization_index: int = 0
    fixed_value: float = 1.0

    def __post_init__(self):
        if self.distribution not in (UNIFORM01, FIXED):
            raise ConfigError(f"unknown distribution {self.distribution!r}")

    def rng(self):
        return np.random.Generator(np.random.PCG64(self.seed ^ self.realization_index))


def sample_couplings(spec, L, boundary=OPEN):
    """Draw one disorder realization as a CouplingSet.

    uniform01 draws each bond independently from the flat distribution on
    [0, 1]; fixed sets every bond to ``spec.fixed_value``.
    """
    if L < 2:
        raise ConfigError(f"need at least 2 spins, got L={L}")
    n_bonds = L if boundary == PERIODIC else L - 1
    if spec.distribution == FIXED:
        J = (spec.fixed_value,) * n_bonds
    else:
        J = tuple(spec.rng().random(n_bonds))
    return CouplingSet(L=L, J=J, boundary=boundary)


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear ramp of the annealing control parameter to zero.

    value(t) = initial * (1 - t/tau), exactly 0 at t = tau.  ``kind`` selects
    whether the control is the temperature k_B T (SA) or the transverse
    field Gamma (QA).  ``alpha`` is the heat-bath attempt rate; it sets the
    SA time unit and is ignored by QA.
    """

    kind: str
    initial: float
    tau: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in (SA_TEMPERATURE, QA_FIELD):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not self.initial > 0:
            raise ConfigError("schedule initial value must be positive")
        if not self.tau > 0:
            raise ConfigError("annealing time tau must be positive")
        if not self.alpha > 0:
            raise ConfigError("rate constant alpha must be positive")

    def value(self, t):
        if t < 0 or t > self.tau:
            raise ConfigError(f"t={t} outside schedule domain [0, {self.tau}]")
        if t == self.tau:
            return 0.0
        return self.initial * (1.0 - t / self.tau)

    def beta(self, t):
        """Inverse temperature 1/T(t) for SA schedules; +inf at t = tau."""
        if self.kind != SA_TEMPERATURE:
            raise ConfigError("beta(t) is only defined for SA temperature schedules")
        T = self.value(t)
        return np.inf if T == 0.0 else 1.0 / T


def schedule_value(schedule, t):
    """Instantaneous control value T(t) or Gamma(t) of a linear schedule."""
    return schedule.value(t)
