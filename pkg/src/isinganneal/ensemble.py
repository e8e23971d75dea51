"""Disorder ensembles, typical/average statistics, and scaling-law fits.

Realizations are the unit of parallelism: each one is a pure function of
(protocol, L, tau, seed, realization_index, tolerances), so ensembles are
bit-reproducible regardless of worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigError, IntegrationError
from .model import (
    OPEN,
    QA_FIELD,
    SA_TEMPERATURE,
    UNIFORM01,
    AnnealSchedule,
    DisorderSpec,
    sample_couplings,
)
from . import dynamics
from .dynamics import IMAGINARY_TIME, REAL_TIME, evolve_pairing
from .fermion_hamiltonian import bdg_diagonalize, ground_state_pairing

SA = "sa"
QA_RT = "qa-rt"
QA_IT = "qa-it"
PROTOCOLS = (SA, QA_RT, QA_IT)

#: ensemble aborts when more than this fraction of realizations fail
MAX_FAILURE_FRACTION = 0.05

#: floor applied to non-positive samples before taking logs
VALUE_FLOOR = 1e-300


def protocol_schedule(protocol, tau, initial=5.0, alpha=1.0):
    """Default linear schedule of a protocol (T(t) for SA, Gamma(t) for QA)."""
    if protocol == SA:
        return AnnealSchedule(kind=SA_TEMPERATURE, initial=initial, tau=tau, alpha=alpha)
    if protocol in (QA_RT, QA_IT):
        return AnnealSchedule(kind=QA_FIELD, initial=initial, tau=tau, alpha=alpha)
    raise ConfigError(f"unknown protocol {protocol!r}")


def protocol_domain(protocol):
    return REAL_TIME if protocol == QA_RT else IMAGINARY_TIME


@dataclass(frozen=True)
class EnsembleRecord:
    """Final observables of one disorder realization."""

    protocol: str
    L: int
    tau: float
    seed: int
    realization_index: int
    rho_def: float
    eps_res: float

    def __post_init__(self):
        if not (0.0 <= self.rho_def <= 1.0):
            raise ConfigError(f"rho_def={self.rho_def} outside [0, 1]")


@dataclass(frozen=True)
class EnsembleStats:
    """Average vs typical statistics of positive samples.

    typical = exp(mean ln x) <= average by Jensen's inequality; the spread
    of ln x and its histogram expose non-log-normal tails.
    """

    n: int
    average: float
    typical: float
    std_log: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray


def single_run(protocol, couplings, tau, initial=5.0, alpha=1.0, tol=1e-8,
               sample_times=None, n_samples=2):
    """One annealing run on a fixed chain; returns the Trajectory."""
    schedule = protocol_schedule(protocol, tau, initial=initial, alpha=alpha)
    if protocol == SA:
        builder = dynamics.sa_builder(couplings, schedule)
        h0 = builder(0.0)
    else:
        builder = dynamics.qa_builder(couplings, schedule)
        h0 = builder(0.0)
    Z0 = ground_state_pairing(bdg_diagonalize(h0))
    if sample_times is None:
        sample_times = np.array([0.0, tau]) if n_samples <= 2 else \
            dynamics.default_sample_times(tau, n_samples)
    return evolve_pairing(builder, couplings, Z0, protocol_domain(protocol),
                          tau, tol=tol, sample_times=sample_times,
                          schedule=schedule)


def _run_realization(args):
    """Worker body: one (protocol, L, tau, index) cell; returns a dict."""
    (protocol, L, tau, seed, index, initial, alpha, tol, boundary) = args
    spec = DisorderSpec(distribution=UNIFORM01, seed=seed, realization_index=index)
    couplings = sample_couplings(spec, L, boundary)
    try:
        traj = single_run(protocol, couplings, tau, initial=initial,
                          alpha=alpha, tol=tol)
    except IntegrationError as exc:
        return {"ok": False, "index": index, "error": str(exc)}
    final = traj.final()
    return {"ok": True, "index": index,
            "rho_def": final.rho_def, "eps_res": final.eps_res}


def run_ensemble(protocol, L, tau, n_realizations, seed, tol=1e-8,
                 initial=5.0, alpha=1.0, boundary=OPEN, threads=1):
    """Anneal ``n_realizations`` independent disorder realizations.

    Returns (records, failures); each failure is (index, message).  More
    than MAX_FAILURE_FRACTION failed realizations raises IntegrationError.
    """
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}")
    tasks = [(protocol, L, tau, seed, i, initial, alpha, tol, boundary)
             for i in range(n_realizations)]
    if threads > 1 and n_realizations > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_realization, tasks))
    else:
        results = [_run_realization(t) for t in tasks]
    records = []
    failures = []
    for res in sorted(results, key=lambda r: r["index"]):
        if res["ok"]:
            records.append(EnsembleRecord(
                protocol=protocol, L=L, tau=tau, seed=seed,
                realization_index=res["index"],
                rho_def=res["rho_def"], eps_res=res["eps_res"]))
        else:
            failures.append((res["index"], res["error"]))
    if n_realizations and len(failures) > MAX_FAILURE_FRACTION * n_realizations:
        raise IntegrationError(
            f"{len(failures)}/{n_realizations} realizations failed; first: "
            f"{failures[0][1]}")
    return records, failures


def aggregate(values):
    """EnsembleStats of positive samples; zeros floored with a warning."""
    values = np.asarray([getattr(v, "rho_def", v) for v in values], dtype=float)
    if values.size == 0:
        raise ConfigError("cannot aggregate an empty ensemble")
    if np.any(values <= 0.0):
        import warnings

        warnings.warn(f"flooring {int(np.sum(values <= 0))} non-positive values "
                      f"at {VALUE_FLOOR}", RuntimeWarning, stacklevel=2)
        values = np.maximum(values, VALUE_FLOOR)
    logs = np.log(values)
    neg_logs = -logs
    try:
        edges = np.histogram_bin_edges(neg_logs, bins="fd")
        if edges.size > 2000:
            raise ValueError
    except ValueError:
        edges = np.histogram_bin_edges(neg_logs, bins=10)
    counts, edges = np.histogram(neg_logs, bins=edges)
    return EnsembleStats(n=values.size,
                         average=float(values.mean()),
                         typical=float(np.exp(logs.mean())),
                         std_log=float(logs.std(ddof=1)) if values.size > 1 else 0.0,
                         hist_edges=edges, hist_counts=counts)


# ---------------------------------------------------------------------------
# Scaling-law fits
# ---------------------------------------------------------------------------

POWER_LAW = "power_law"      # v = C tau^-mu
LOG_LAW = "log_law"          # v = C log^-zeta(gamma tau)
KZ_LOG = "kz_log"            # v = C (ln tau)^nu / sqrt(tau)
MODELS = (POWER_LAW, LOG_LAW, KZ_LOG)


@dataclass(frozen=True)
class FitResult:
    """Least-squares fit of one scaling model in log coordinates."""

    model: str
    params: dict
    stderr: dict
    residual_norm: float
    window: tuple
    n_points: int

    def param(self, name):
        return self.params[name]


def default_fit_window(tau):
    """Top decade and a half of tau (excludes the small-tau transient)."""
    hi = float(np.max(tau))
    return hi / 10**1.5, hi


def _linear_fit(x, y):
    """y = p0 + p1 x least squares with parameter standard errors."""
    X = np.column_stack([np.ones_like(x), x])
    coef, res, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 2:
        raise ConfigError("singular design matrix in scaling fit")
    r = y - X @ coef
    dof = max(1, x.size - 2)
    s2 = float(r @ r) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return coef, np.sqrt(np.diag(cov)), float(np.sqrt(np.mean(r**2)))


def fit_scaling(tau, values, model, window=None, fixed_zeta=None,
                fix_amplitude=False):
    """Fit a scaling law to (tau, value) data inside a tau window.

    power_law and kz_log are linear in log coordinates; log_law
    (v = C log^-zeta(gamma tau)) iterates on gamma with ``least_squares``.
    ``fixed_zeta`` pins the log-law exponent; ``fix_amplitude`` pins C = 1.
    Requires at least 5 points in the window.
    """
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0) or np.any(tau <= 0.0):
        raise ConfigError("scaling fits need positive tau and values")
    if window is None:
        window = default_fit_window(tau)
    lo, hi = window
    mask = (tau >= lo) & (tau <= hi)
    if int(mask.sum()) < 5:
        raise ConfigError(f"fit window {window} holds {int(mask.sum())} < 5 points")
    t = tau[mask]
    v = values[mask]
    logt = np.log(t)
    logv = np.log(v)

    if model == POWER_LAW:
        coef, err, rnorm = _linear_fit(logt, logv)
        params = {"mu": -coef[1], "amplitude": math.exp(coef[0])}
        stderr = {"mu": err[1], "amplitude": math.exp(coef[0]) * err[0]}
    elif model == KZ_LOG:
        # v sqrt(tau) = C (ln tau)^nu
        y = logv + 0.5 * logt
        x = np.log(logt)
        coef, err, rnorm = _linear_fit(x, y)
        params = {"nu": coef[1], "amplitude": math.exp(coef[0])}
        stderr = {"nu": err[1], "amplitude": math.exp(coef[0]) * err[0]}
    elif model == LOG_LAW:
        # parameters in order (log C)?, zeta?, log gamma -- optional ones
        # dropped when pinned
        free_amp = not fix_amplitude
        free_zeta = fixed_zeta is None

        def unpack(p):
            i = 0
            if free_amp:
                lc = p[i]; i += 1
            else:
                lc = 0.0
            if free_zeta:
                zeta = p[i]; i += 1
            else:
                zeta = fixed_zeta
            return lc, zeta, p[i]

        def resid(p):
            lc, zeta, lg = unpack(p)
            return logv - lc + zeta * np.log(np.log(np.exp(lg) * t))

        lg_min = -np.log(t.min()) + 1e-6  # keeps log(gamma tau) > 1 + eps
        guess, lower, upper = [], [], []
        if free_amp:
            guess.append(0.0); lower.append(-np.inf); upper.append(np.inf)
        if free_zeta:
            guess.append(1.0); lower.append(0.0); upper.append(np.inf)
        guess.append(max(0.0, lg_min + 1e-6))
        lower.append(lg_min); upper.append(np.inf)
        sol = least_squares(resid, np.asarray(guess), bounds=(lower, upper),
                            max_nfev=20000, x_scale="jac")
        if not sol.success:
            raise ConfigError(f"log-law fit failed: {sol.message}")
        r = sol.fun
        dof = max(1, t.size - sol.x.size)
        try:
            cov = np.linalg.inv(sol.jac.T @ sol.jac) * float(r @ r) / dof
            perr = np.sqrt(np.diag(cov))
        except np.linalg.LinAlgError:
            perr = np.full(sol.x.size, np.nan)
        rnorm = float(np.sqrt(np.mean(r**2)))
        lc, zeta, lg = unpack(sol.x)
        errs = list(perr) + [0.0, 0.0]
        i = 0
        amp_err = math.exp(lc) * errs[i] if free_amp else 0.0
        i += int(free_amp)
        zeta_err = errs[i] if free_zeta else 0.0
        i += int(free_zeta)
        gamma_err = math.exp(lg) * errs[i]
        params = {"amplitude": math.exp(lc), "zeta": float(zeta),
                  "gamma": math.exp(lg)}
        stderr = {"amplitude": amp_err, "zeta": zeta_err, "gamma": gamma_err}
    else:
        raise ConfigError(f"unknown scaling model {model!r}")

    return FitResult(model=model, params={k: float(v) for k, v in params.items()},
                     stderr={k: float(v) for k, v in stderr.items()},
                     residual_norm=rnorm, window=(float(lo), float(hi)),
                     n_points=int(mask.sum()))


def preferred_model(tau, values, candidates, window=None, **kwargs):
    """Fit every candidate model and return (best model name, fits dict)."""
    fits = {}
    for model in candidates:
        fits[model] = fit_scaling(tau, values, model, window=window,
                                  fixed_zeta=kwargs.get("fixed_zeta", {}).get(model)
                                  if kwargs.get("fixed_zeta") else None)
    best = min(fits, key=lambda m: fits[m].residual_norm)
    return best, fits
