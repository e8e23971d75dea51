"""Annealing dynamics of the pairing matrix.

The state Z obeys the matrix Riccati flow

    xi dZ/dt = 2 (A Z + Z A + B + Z B Z),

with xi = i for real time and xi = -1 for imaginary time; normalization is
absorbed by the Z parametrization.  Ordered periodic chains reduce to
independent two-level modes on the even-sector grid k_m = (2m+1) pi / L,
with amplitudes lambda_k obeying

    xi dlambda/dt = 2 a_k lambda - b_k + lambda^2 b_k.

Integration uses an explicit adaptive Dormand-Prince 5(4) pair with the
local error controlled per unit time and antisymmetry restored after every
accepted step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntegrationError
from .model import QA_FIELD, SA_TEMPERATURE
from .observables import (
    ObservableRecord,
    antisymmetrize,
    defect_and_energy,
    greens_from_pairing,
)

REAL_TIME = "real-time"
IMAGINARY_TIME = "imaginary-time"

#: abort threshold on max |Z| (state effectively orthogonal to the vacuum)
NORM_CAP = 1e8

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_ERR = _B5 - _B4


def xi_of(domain):
    if domain == REAL_TIME:
        return 1j
    if domain == IMAGINARY_TIME:
        return -1.0
    raise ConfigError(f"unknown time domain {domain!r}")


def _max_abs(y):
    return float(np.abs(y).max()) if y.size else 0.0


def adaptive_rk45(rhs, t0, t1, y0, tol, sample_times, post_step=None,
                  max_step=np.inf, fixed_step=None, norm_cap=NORM_CAP):
    """Integrate dy/dt = rhs(t, y), returning [(t_s, y(t_s))] at sample times.

    Local error is held below ``tol`` per unit time, scaled elementwise by
    1 + |y|.  ``post_step`` may map an accepted y to a cleaned-up version
    (antisymmetry restoration).  ``fixed_step`` disables adaptivity (used by
    the convergence-order tests).
    """
    samples = sorted(set(float(ts) for ts in sample_times))
    if samples and (samples[0] < t0 - 1e-12 or samples[-1] > t1 + 1e-12):
        raise ConfigError("sample times outside the integration window")
    out = []
    t = t0
    y = np.array(y0, copy=True)
    if not np.all(np.isfinite(y.view(float) if np.iscomplexobj(y) else y)):
        raise IntegrationError("non-finite initial state", t=t0)
    next_idx = 0
    while next_idx < len(samples) and samples[next_idx] <= t0 + 1e-15:
        out.append((samples[next_idx], y.copy()))
        next_idx += 1

    f0 = rhs(t, y)
    if fixed_step is not None:
        h = float(fixed_step)
    else:
        h = 0.01 * (1.0 + _max_abs(y)) / (1.0 + _max_abs(f0))
        h = min(h, (t1 - t0) / 10.0, max_step)
    h_min = max(1e-14 * (t1 - t0), 1e-300)
    k = [None] * 7

    while t < t1 - 1e-14 * (t1 - t0):
        target = samples[next_idx] if next_idx < len(samples) else t1
        h = min(h, max_step, t1 - t)
        clipped = False
        if t + h >= target - 1e-14 * (t1 - t0):
            h = target - t
            clipped = True
        if h <= h_min and not clipped:
            raise IntegrationError(
                f"step size underflow (h={h:.3e}) at t={t:.6g}", t=t, step=h)

        k[0] = rhs(t, y)
        bad = False
        for i in range(1, 7):
            yi = y + h * sum(_A[i][j] * k[j] for j in range(i))
            if not np.all(np.isfinite(yi.view(float) if np.iscomplexobj(yi) else yi)):
                bad = True
                break
            k[i] = rhs(t + _C[i] * h, yi)
        if not bad:
            y5 = y + h * sum(_B5[j] * k[j] for j in range(7) if _B5[j] != 0.0)
            err = h * sum(_ERR[j] * k[j] for j in range(7) if _ERR[j] != 0.0)
            bad = not np.all(np.isfinite(y5.view(float) if np.iscomplexobj(y5) else y5))

        if bad:
            if fixed_step is not None:
                raise IntegrationError("non-finite state in fixed-step mode", t=t, step=h)
            h *= 0.25
            if h <= h_min:
                raise IntegrationError(
                    f"state became non-finite at t={t:.6g}", t=t, step=h)
            continue

        if fixed_step is None:
            scale = tol * h * (1.0 + np.abs(y))
            ratio = _max_abs(np.asarray(err) / np.maximum(scale, 1e-300))
            if ratio > 1.0:
                h = max(h * max(0.2, 0.9 * ratio ** -0.25), h_min * 2)
                continue
            grow = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.25))
        else:
            grow = 1.0

        t = t + h
        y = post_step(y5) if post_step is not None else y5
        if _max_abs(y) > norm_cap:
            raise IntegrationError(
                f"state norm exceeded {norm_cap:.1e} at t={t:.6g} "
                "(state orthogonal to the vacuum)", t=t, step=h)
        while next_idx < len(samples) and t >= samples[next_idx] - 1e-14 * (t1 - t0):
            out.append((samples[next_idx], y.copy()))
            next_idx += 1
        h = h * grow if fixed_step is None else fixed_step
    return out


@dataclass
class Trajectory:
    """Sampled observables of one annealing run plus the final state."""

    times: np.ndarray
    schedule_values: np.ndarray
    records: list
    final_state: np.ndarray
    domain: str

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def final(self):
        return self.records[-1]


def default_sample_times(tau, n_samples=64):
    """t = 0 plus a geometric grid up to tau (log-log friendly)."""
    if n_samples < 2:
        return np.array([0.0, tau])
    grid = np.geomspace(tau / 128.0, tau, n_samples - 1)
    grid[-1] = tau
    return np.concatenate([[0.0], grid])


def sa_builder(couplings, schedule):
    """Time-dependent heat-bath generator blocks for a SA schedule.

    The returned callable maps t to a QuadraticHamiltonian; its ``blocks``
    attribute is the lean (A, B) path used inside the integrator loop.
    """
    if schedule.kind != SA_TEMPERATURE:
        raise ConfigError("SA builder needs a temperature schedule")
    from .fermion_hamiltonian import sa_block_indices, sa_blocks, build_sa_hamiltonian

    indices = sa_block_indices(couplings)

    def build(t):
        return build_sa_hamiltonian(couplings, schedule.beta(t), schedule.alpha)

    def blocks(t):
        return sa_blocks(couplings, schedule.beta(t), schedule.alpha, indices=indices)

    build.blocks = blocks
    return build


def qa_builder(couplings, schedule):
    """Time-dependent transverse-field blocks for a QA schedule.

    Only the diagonal of A moves with Gamma(t); the Riccati right-hand side
    exploits A(t) Z + Z A(t) = A0 Z + Z A0 + 2 Gamma(t) Z via the
    ``field_split`` attribute.
    """
    if schedule.kind != QA_FIELD:
        raise ConfigError("QA builder needs a field schedule")
    from .fermion_hamiltonian import build_qa_hamiltonian

    h_static = build_qa_hamiltonian(couplings, 0.0)

    def build(t):
        return build_qa_hamiltonian(couplings, schedule.value(t))

    build.field_split = (h_static.A, h_static.B, schedule.value)
    return build


def evolve_pairing(builder, couplings, Z0, domain, tau, tol=1e-8,
                   sample_times=None, n_samples=64, schedule=None):
    """Integrate the full Riccati flow of Z(t) and sample observables.

    ``builder`` maps t in [0, tau] to the instantaneous QuadraticHamiltonian.
    Real-time runs promote Z to complex; imaginary-time runs stay real when
    Z0 is real.  Antisymmetry is restored after every accepted step.
    """
    xi = xi_of(domain)
    Z0 = np.asarray(Z0)
    if _max_abs(Z0 + Z0.T) > 1e-10 * max(1.0, _max_abs(Z0)):
        raise ConfigError("initial pairing matrix must be antisymmetric")
    if domain == REAL_TIME:
        Z0 = Z0.astype(complex)
    else:
        Z0 = Z0.astype(complex) if np.iscomplexobj(Z0) else Z0.astype(float)
    pref = 2.0 / xi

    if hasattr(builder, "field_split"):
        A0, B0, field = builder.field_split

        def rhs(t, Z):
            return pref * (A0 @ Z + Z @ A0 + (2.0 * field(t)) * Z + B0 + Z @ (B0 @ Z))
    elif hasattr(builder, "blocks"):
        blocks = builder.blocks

        def rhs(t, Z):
            A, B = blocks(t)
            return pref * (A @ Z + Z @ A + B + Z @ (B @ Z))
    else:
        def rhs(t, Z):
            h = builder(t)
            return pref * (h.A @ Z + Z @ h.A + h.B + Z @ (h.B @ Z))

    if sample_times is None:
        sample_times = default_sample_times(tau, n_samples)
    pairs = adaptive_rk45(rhs, 0.0, tau, Z0, tol, sample_times,
                          post_step=antisymmetrize)
    records = []
    values = []
    for t, Z in pairs:
        h = builder(t)
        records.append(defect_and_energy(greens_from_pairing(Z), couplings,
                                         t=t, hamiltonian=h))
        values.append(schedule.value(t) if schedule is not None else np.nan)
    return Trajectory(times=np.array([t for t, _ in pairs]),
                      schedule_values=np.array(values),
                      records=records, final_state=pairs[-1][1], domain=domain)


# ---------------------------------------------------------------------------
# Ordered chains: independent two-level modes
# ---------------------------------------------------------------------------

def kspace_grid(L):
    if L % 2 or L < 4:
        raise ConfigError(f"k-space path needs even L >= 4, got {L}")
    return (2 * np.arange(L // 2) + 1) * np.pi / L


def mode_coefficients(J, schedule, k):
    """a_k(t), b_k(t) of the two-level mode problems for a uniform chain.

    These are the Fourier transforms of the real-space blocks, labeled so
    the soft modes sit near the critical wave-vector k = pi.  Returns a
    callable t -> (a, b) over the given k grid.
    """
    cos_k, sin_k = np.cos(k), np.sin(k)
    cos_2k, sin_2k = np.cos(2 * k), np.sin(2 * k)
    if schedule.kind == QA_FIELD:
        def coeffs(t):
            g = schedule.value(t)
            a = 2.0 * (g + J * cos_k)
            b = -2.0 * J * sin_k
            return a, b
    elif schedule.kind == SA_TEMPERATURE:
        alpha = schedule.alpha

        def coeffs(t):
            beta = schedule.beta(t)
            arg = np.inf if np.isinf(beta) else 2.0 * beta * J
            sch = float(2.0 * np.exp(-abs(arg)) / (1.0 + np.exp(-2.0 * abs(arg))))
            th = float(np.tanh(arg)) if np.isfinite(arg) else 1.0
            g0 = 0.25 * alpha * (sch + 1.0)
            g1 = 0.5 * alpha * th
            g2 = 0.25 * alpha * (1.0 - sch)
            a = 2.0 * (g0 + g1 * cos_k + g2 * cos_2k)
            b = -2.0 * (g1 * sin_k + g2 * sin_2k)
            return a, b
    else:
        raise ConfigError(f"unknown schedule kind {schedule.kind!r}")
    return coeffs


def mode_ground_state(a, b):
    """lambda of the two-level ground state, b/(a + sqrt(a^2+b^2))."""
    e = np.sqrt(a * a + b * b)
    denom = a + e
    if np.any(np.abs(denom) < 1e-300):
        raise ConfigError("mode ground state not representable (a + E = 0)")
    return b / denom


def kspace_observables(lam, k, J, L, a=None, b=None, offset=0.0):
    """Defect density, residual energy and energy from the mode amplitudes."""
    occ = np.abs(lam) ** 2 / (1.0 + np.abs(lam) ** 2)
    f_re = np.real(lam) / (1.0 + np.abs(lam) ** 2)
    zz = -(4.0 / L) * float(np.sum(np.cos(k) * occ + np.sin(k) * f_re))
    rho = 0.5 * (1.0 - zz)
    eps = 2.0 * J * rho
    energy = 0.0
    if a is not None:
        denom = 1.0 + np.abs(lam) ** 2
        energy = float(np.sum((a * (np.abs(lam) ** 2 - 1.0)
                               - 2.0 * b * np.real(lam)) / denom)) + offset
    return rho, eps, energy


def kspace_evolve(J, schedule, domain, L, tol=1e-10, sample_times=None,
                  n_samples=64):
    """Anneal a uniform periodic chain through its independent modes.

    All L/2 mode amplitudes are integrated as one vector ODE; observables
    are assembled by k-sums.  Agrees with the real-space path on ordered
    chains (gated by tests).
    """
    k = kspace_grid(L)
    coeffs = mode_coefficients(J, schedule, k)
    xi = xi_of(domain)
    pref = 1.0 / xi
    a0, b0 = coeffs(0.0)
    lam0 = mode_ground_state(a0, b0)
    if domain == REAL_TIME:
        lam0 = lam0.astype(complex)

    def rhs(t, lam):
        a, b = coeffs(t)
        return pref * (2.0 * a * lam - b + lam * lam * b)

    tau = schedule.tau
    if sample_times is None:
        sample_times = default_sample_times(tau, n_samples)
    offset = 0.5 * schedule.alpha * L if schedule.kind == SA_TEMPERATURE else 0.0
    pairs = adaptive_rk45(rhs, 0.0, tau, lam0, tol, sample_times)
    records = []
    values = []
    for t, lam in pairs:
        a, b = coeffs(t)
        rho, eps, energy = kspace_observables(lam, k, J, L, a=a, b=b, offset=offset)
        records.append(ObservableRecord(t=t, rho_def=rho, eps_res=eps, energy=energy))
        values.append(schedule.value(t))
    return Trajectory(times=np.array([t for t, _ in pairs]),
                      schedule_values=np.array(values),
                      records=records, final_state=pairs[-1][1], domain=domain)


# ---------------------------------------------------------------------------
# Landau-Zener demonstrator
# ---------------------------------------------------------------------------

@dataclass
class LandauZenerResult:
    """Instantaneous excitation probability of one near-critical mode."""

    q: float
    domain: str
    times: np.ndarray
    schedule_values: np.ndarray
    p_ex: np.ndarray
    gap_min: float

    @property
    def p_final(self):
        return float(self.p_ex[-1])


def _mode_excitation_probability(a, b, lam):
    """Overlap of (|0> - lambda |2p>)/norm with the upper eigenvector."""
    h = np.array([[-a, b], [b, a]])
    _, vecs = np.linalg.eigh(h)
    psi = np.array([1.0, -lam], dtype=complex)
    psi /= np.linalg.norm(psi)
    return float(np.abs(np.vdot(vecs[:, 1], psi)) ** 2)


def landau_zener_demo(q, schedule, domain, tol=1e-10, J=1.0, n_samples=200):
    """Sweep a single mode k = pi - q across its avoided crossing.

    Real time reproduces Landau-Zener statistics (ln P_ex linear in
    Delta^2 tau); imaginary time filters the ground state exponentially
    once the gap reopens.  q = 0 is the exactly gapless mode whose
    excitation probability is independent of tau.
    """
    if schedule.kind != QA_FIELD:
        raise ConfigError("the Landau-Zener demonstrator uses a field schedule")
    k = np.pi - q
    cos_k, sin_k = np.cos(k), np.sin(k)
    xi = xi_of(domain)
    pref = 1.0 / xi

    def coeffs(t):
        return 2.0 * (schedule.value(t) + J * cos_k), -2.0 * J * sin_k

    a0, b0 = coeffs(0.0)
    lam0 = complex(mode_ground_state(np.array([a0]), np.array([b0]))[0])
    gap_min = abs(2.0 * (-2.0 * J * sin_k)) if schedule.initial >= J * abs(cos_k) \
        else 2.0 * np.sqrt(coeffs(schedule.tau)[0] ** 2 + (2 * J * sin_k) ** 2)

    def rhs(t, lam):
        a, b = coeffs(t)
        return pref * (2.0 * a * lam - b + lam * lam * b)

    tau = schedule.tau
    sample_times = np.linspace(0.0, tau, n_samples)
    if domain == REAL_TIME:
        y0 = np.array([lam0], dtype=complex)
    else:
        y0 = np.array([lam0.real], dtype=float)
    pairs = adaptive_rk45(rhs, 0.0, tau, y0, tol, sample_times)
    times = np.array([t for t, _ in pairs])
    p_ex = np.empty(times.size)
    values = np.empty(times.size)
    for i, (t, lam) in enumerate(pairs):
        a, b = coeffs(t)
        p_ex[i] = _mode_excitation_probability(a, b, complex(lam[0]))
        values[i] = schedule.value(t)
    return LandauZenerResult(q=q, domain=domain, times=times,
                             schedule_values=values, p_ex=p_ex, gap_min=gap_min)
