"""Command-line entry point.

Subcommands: anneal (one chain, trajectory CSV), ensemble (disorder grids,
records CSV + stats/fits JSON), spectrum (BdG gap statistics), lz
(Landau-Zener mode sweeps), oracle (dense small-L cross-checks).

Configuration comes from defaults, then an optional ``key = value`` config
file (--config), then flags; flags win.  Every output file embeds the
resolved configuration and a format-version field.  CSV files are
comma-separated with a header row, LF line endings, '.' decimal separator
and 17 significant digits, so re-running a command with the same inputs
reproduces them byte for byte.  Recipe runs also render PNG figures next
to the delimited output.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import figures
from .errors import ConfigError, IntegrationError, NonRepresentableError, NumericError
from .model import (
    FIXED,
    OPEN,
    PERIODIC,
    UNIFORM01,
    AnnealSchedule,
    CouplingSet,
    DisorderSpec,
    sample_couplings,
)
from .fermion_hamiltonian import (
    bdg_diagonalize,
    build_qa_hamiltonian,
    build_sa_hamiltonian,
)
from . import dynamics
from . import ensemble as ens
from . import spin_oracle as oracle

FORMAT_VERSION = 1
OUT_ENV = "ISINGANNEAL_OUT"

RECIPES = ("fig1a", "fig1b", "fig1c", "fig2")


def fmt(x):
    """Full-double-precision decimal rendering used in every CSV."""
    return f"{float(x):.17g}"


def atomic_write(path, data):
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=False)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8") if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows, config):
    lines = [f"# format_version: {FORMAT_VERSION}",
             "# config: " + json.dumps(config, sort_keys=True),
             ",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) if isinstance(c, (str, int)) else fmt(c)
                              for c in row))
    atomic_write(path, "\n".join(lines) + "\n")
    return path


def write_json(path, payload, config):
    doc = {"format_version": FORMAT_VERSION, "config": config}
    doc.update(payload)
    atomic_write(path, json.dumps(doc, sort_keys=True, indent=2,
                                  default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

DEFAULTS = {
    "protocol": "qa-rt",
    "L": 64,
    "boundary": OPEN,
    "distribution": UNIFORM01,
    "fixed_j": 1.0,
    "initial": 5.0,
    "alpha": 1.0,
    "tau": 100.0,
    "tau_grid": None,
    "n_real": 50,
    "seed": 1,
    "tol": 1e-8,
    "samples": 64,
    "path": "real",
    "threads": 0,          # 0 -> all cores
    "oracle": False,
    "plot": False,
    "recipe": None,
    "out": None,
    "q": 0.1,
    "gamma_c": float(1.0 / np.e),
    "temps": "1.0,0.8,0.6667,0.5,0.4",
    "sizes": "16,32,64",
}


def parse_config_file(path):
    """Parse the ``key = value`` config document (one setting per line)."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{n}: unknown setting {key!r}")
            out[key] = _coerce(val)
    return out


def _coerce(text):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def parse_tau_grid(spec_text):
    """Grid spec: "lo:hi:n" (geometric) or a comma list of values."""
    if spec_text is None:
        return None
    if isinstance(spec_text, (int, float)):
        return np.array([float(spec_text)])
    if ":" in spec_text:
        parts = spec_text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad tau grid {spec_text!r}, want lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if not (0 < lo < hi and n >= 2):
            raise ConfigError(f"bad tau grid bounds {spec_text!r}")
        return np.geomspace(lo, hi, n)
    vals = np.array([float(s) for s in spec_text.split(",") if s.strip()])
    if vals.size == 0 or np.any(vals <= 0):
        raise ConfigError(f"bad tau grid {spec_text!r}")
    return vals


def parse_int_list(text):
    return [int(s) for s in str(text).split(",") if s.strip()]


def parse_float_list(text):
    return [float(s) for s in str(text).split(",") if s.strip()]


@dataclass
class RunConfig:
    """Fully resolved configuration of one CLI invocation."""

    settings: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.settings[name]
        except KeyError:
            raise AttributeError(name) from None

    def as_dict(self):
        return {k: v for k, v in sorted(self.settings.items()) if v is not None}

    def validate(self, command):
        s = self.settings
        if s["protocol"] not in ens.PROTOCOLS:
            raise ConfigError(f"protocol must be one of {ens.PROTOCOLS}")
        if s["L"] < 2:
            raise ConfigError("L must be >= 2")
        if s["boundary"] not in (OPEN, PERIODIC):
            raise ConfigError("boundary must be open or periodic")
        if s["distribution"] not in (UNIFORM01, FIXED):
            raise ConfigError("distribution must be uniform01 or fixed")
        if s["tau"] is not None and s["tau"] <= 0:
            raise ConfigError("tau must be positive")
        if s["tol"] <= 0:
            raise ConfigError("tol must be positive")
        if s["initial"] <= 0:
            raise ConfigError("initial schedule value must be positive")
        if s["path"] not in ("real", "kspace"):
            raise ConfigError("path must be real or kspace")
        if s["path"] == "kspace":
            if s["distribution"] != FIXED:
                raise ConfigError("k-space path requires uniform (fixed) couplings")
            if s["L"] % 2 or s["boundary"] != PERIODIC:
                raise ConfigError("k-space path requires even L and periodic boundary")
        if s["oracle"] and s["L"] > 12:
            raise ConfigError("oracle comparisons are limited to L <= 12")
        if s["recipe"] is not None and s["recipe"] not in RECIPES:
            raise ConfigError(f"unknown recipe {s['recipe']!r}; choose from {RECIPES}")
        if command == "ensemble" and s["n_real"] < 1:
            raise ConfigError("n-real must be >= 1")


def resolve_config(args):
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if settings["out"] is None:
        settings["out"] = os.environ.get(OUT_ENV, "out")
    if settings["threads"] in (0, None):
        settings["threads"] = os.cpu_count() or 1
    return RunConfig(settings=settings)


def make_couplings(cfg, realization_index=0):
    spec = DisorderSpec(distribution=cfg.distribution, seed=cfg.seed,
                        realization_index=realization_index,
                        fixed_value=cfg.fixed_j)
    return sample_couplings(spec, cfg.L, cfg.boundary)


def make_schedule(cfg, tau=None):
    return ens.protocol_schedule(cfg.protocol, float(tau if tau is not None
                                                     else cfg.tau),
                                 initial=cfg.initial, alpha=cfg.alpha)


# ---------------------------------------------------------------------------
# anneal
# ---------------------------------------------------------------------------

def run_trajectory(cfg, tau=None):
    tau = float(tau if tau is not None else cfg.tau)
    schedule = make_schedule(cfg, tau)
    domain = ens.protocol_domain(cfg.protocol)
    if cfg.path == "kspace":
        if cfg.protocol == "sa" and cfg.L < 4:
            raise ConfigError("k-space SA needs L >= 4")
        traj = dynamics.kspace_evolve(cfg.fixed_j, schedule, domain, cfg.L,
                                      tol=cfg.tol, n_samples=cfg.samples)
        couplings = CouplingSet(L=cfg.L, J=(cfg.fixed_j,) * cfg.L,
                                boundary=PERIODIC)
    else:
        couplings = make_couplings(cfg)
        traj = ens.single_run(cfg.protocol, couplings, tau,
                              initial=cfg.initial, alpha=cfg.alpha,
                              tol=cfg.tol, n_samples=cfg.samples)
    return traj, couplings, schedule


def oracle_records(cfg, couplings, schedule, sample_times):
    """Dense reference observables at the given sample times (L <= 12)."""
    if cfg.protocol == "sa":
        psi0 = np.sqrt(oracle.gibbs_distribution(couplings, schedule.beta(0.0)))
        _, recs = oracle.dense_schrodinger(couplings, schedule, "imaginary",
                                           psi0, tol=min(cfg.tol, 1e-10),
                                           sample_times=sample_times,
                                           hamiltonian="sa")
        return recs
    M_spin = sum(-J * oracle.pauli_string(couplings.L, [(a, "z"), (b, "z")])
                 for a, b, J, _ in couplings.bonds()).toarray()
    M_spin += sum(-schedule.initial * oracle.pauli_string(couplings.L, [(j, "x")])
                  for j in range(couplings.L)).toarray()
    _, v = np.linalg.eigh(M_spin)
    psi0 = v[:, 0]
    domain = "real" if cfg.protocol == "qa-rt" else "imaginary"
    _, recs = oracle.dense_schrodinger(couplings, schedule, domain, psi0,
                                       tol=min(cfg.tol, 1e-10),
                                       sample_times=sample_times,
                                       hamiltonian="qa")
    return recs


def cmd_anneal(cfg):
    cfg.validate("anneal")
    traj, couplings, schedule = run_trajectory(cfg)
    config = cfg.as_dict()
    tag = f"{cfg.protocol}_L{cfg.L}_tau{cfg.tau:g}"
    out = cfg.out
    header = ["t", "schedule_value", "rho_def", "eps_res", "energy"]
    rows = [[r.t, sv, r.rho_def, r.eps_res, r.energy]
            for r, sv in zip(traj.records, traj.schedule_values)]
    summary = {
        "final": {"t": traj.records[-1].t,
                  "rho_def": traj.records[-1].rho_def,
                  "eps_res": traj.records[-1].eps_res,
                  "energy": traj.records[-1].energy},
    }
    if cfg.oracle:
        recs = oracle_records(cfg, couplings, schedule, traj.times)
        header += ["oracle_rho_def", "oracle_eps_res", "delta_rho_def"]
        for row, ref in zip(rows, recs):
            row += [ref.rho_def, ref.eps_res, row[2] - ref.rho_def]
        summary["oracle_max_delta_rho"] = float(
            max(abs(row[-1]) for row in rows))
    csv_path = write_csv(os.path.join(out, f"anneal_{tag}.csv"), header, rows,
                         config)
    atomic_write(os.path.join(out, f"anneal_{tag}_couplings.txt"),
                 couplings.to_text())
    write_json(os.path.join(out, f"anneal_{tag}.json"), summary, config)
    if cfg.plot:
        figures.trajectory_figure(traj, os.path.join(out, f"anneal_{tag}.png"),
                                  title=tag)
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------

def _record_key(protocol, L, tau, index):
    return (str(protocol), int(L), fmt(tau), int(index))


def load_records_csv(path):
    """Parse a records CSV back into EnsembleRecord values."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        rows = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = rows[0].split(",")
    idx = {name: i for i, name in enumerate(header)}
    for line in rows[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        records.append(ens.EnsembleRecord(
            protocol=parts[idx["protocol"]],
            L=int(parts[idx["L"]]),
            tau=float(parts[idx["tau"]]),
            seed=int(parts[idx["seed"]]),
            realization_index=int(parts[idx["realization_index"]]),
            rho_def=float(parts[idx["rho_def"]]),
            eps_res=float(parts[idx["eps_res"]])))
    return records


def run_ensemble_grid(cfg, protocols, taus, out_csv):
    """Run (protocol, tau) cells with resume support; returns sorted records."""
    done = {}
    if os.path.exists(out_csv):
        for rec in load_records_csv(out_csv):
            done[_record_key(rec.protocol, rec.L, rec.tau, rec.realization_index)] = rec
    records = []
    failures = []
    for protocol in protocols:
        for tau in taus:
            have = [done[k] for k in
                    (_record_key(protocol, cfg.L, tau, i) for i in range(cfg.n_real))
                    if k in done]
            if len(have) == cfg.n_real:
                records.extend(have)
                continue
            fresh, fails = ens.run_ensemble(
                protocol, cfg.L, float(tau), cfg.n_real, seed=cfg.seed,
                tol=cfg.tol, initial=cfg.initial, alpha=cfg.alpha,
                boundary=cfg.boundary, threads=cfg.threads)
            records.extend(fresh)
            failures.extend({"protocol": protocol, "tau": float(tau),
                             "realization_index": i, "error": msg}
                            for i, msg in fails)
    order = {p: n for n, p in enumerate(protocols)}
    records.sort(key=lambda r: (order.get(r.protocol, 99), r.L, r.tau,
                                r.realization_index))
    return records, failures


def _stats_payload(st):
    return {"n": st.n, "average": st.average, "typical": st.typical,
            "std_log": st.std_log, "hist_edges": st.hist_edges,
            "hist_counts": st.hist_counts}


def cmd_ensemble(cfg):
    cfg.validate("ensemble")
    if cfg.recipe == "fig2":
        return recipe_fig2(cfg)
    taus = parse_tau_grid(cfg.tau_grid)
    if taus is None:
        taus = np.array([float(cfg.tau)])
    protocols = [cfg.protocol]
    config = cfg.as_dict()
    out_csv = os.path.join(cfg.out, "records.csv")
    records, failures = run_ensemble_grid(cfg, protocols, taus, out_csv)
    write_records(out_csv, records, config)
    stats = {}
    for tau in taus:
        sub = [r for r in records if r.tau == float(tau)]
        if sub:
            stats[fmt(tau)] = {
                "rho_def": _stats_payload(ens.aggregate([r.rho_def for r in sub])),
                "eps_res": _stats_payload(ens.aggregate([r.eps_res for r in sub])),
            }
    payload = {"stats": stats, "failures": failures}
    if taus.size >= 5:
        tgrid = np.array(sorted({r.tau for r in records}))
        typ = np.array([ens.aggregate([r.rho_def for r in records
                                       if r.tau == t]).typical for t in tgrid])
        try:
            fit = ens.fit_scaling(tgrid, typ, ens.POWER_LAW, window=(tgrid.min(),
                                                                     tgrid.max()))
            payload["fits"] = {"rho_def_typical_power_law": fit.__dict__}
        except ConfigError:
            pass
    write_json(os.path.join(cfg.out, "summary.json"), payload, config)
    print(f"wrote {out_csv} ({len(records)} records, {len(failures)} failures)")
    return 0


def write_records(path, records, config):
    header = ["protocol", "L", "tau", "seed", "realization_index",
              "rho_def", "eps_res"]
    rows = [[r.protocol, r.L, r.tau, r.seed, r.realization_index,
             r.rho_def, r.eps_res] for r in records]
    return write_csv(path, header, rows, config)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def cmd_spectrum(cfg):
    cfg.validate("spectrum")
    from scipy.stats import ks_2samp

    config = cfg.as_dict()
    sizes = parse_int_list(cfg.sizes)
    rows = []
    payload = {}
    if cfg.protocol in ("qa-rt", "qa-it"):
        gaps_by_L = {}
        for L in sizes:
            gaps = []
            for i in range(cfg.n_real):
                c = sample_couplings(DisorderSpec(seed=cfg.seed,
                                                  realization_index=i),
                                     L, cfg.boundary)
                sp = bdg_diagonalize(build_qa_hamiltonian(c, cfg.gamma_c))
                gaps.append(sp.gap)
                rows.append(["qa", L, cfg.gamma_c, i, sp.gap,
                             -np.log(sp.gap) / np.sqrt(L)])
            gaps_by_L[L] = np.array(gaps)
        ks = {}
        for La, Lb in zip(sizes, sizes[1:]):
            ga = -np.log(gaps_by_L[La]) / np.sqrt(La)
            gb = -np.log(gaps_by_L[Lb]) / np.sqrt(Lb)
            ks[f"{La}-{Lb}"] = {
                "rescaled": float(ks_2samp(ga, gb).statistic),
                "raw": float(ks_2samp(gaps_by_L[La], gaps_by_L[Lb]).statistic),
            }
        payload["ks_statistics"] = ks
        if cfg.plot or cfg.recipe:
            figures.gap_histogram_figure(
                gaps_by_L, os.path.join(cfg.out, "gap_collapse.png"),
                title=f"gap distributions at Gamma_c, L={sizes}")
    else:
        temps = parse_float_list(cfg.temps)
        L = cfg.L
        typ = []
        for T in temps:
            logs = []
            for i in range(cfg.n_real):
                c = sample_couplings(DisorderSpec(seed=cfg.seed,
                                                  realization_index=i),
                                     L, cfg.boundary)
                sp = bdg_diagonalize(build_sa_hamiltonian(c, 1.0 / T,
                                                          cfg.alpha))
                logs.append(np.log(sp.gap))
                rows.append(["sa", L, T, i, np.exp(logs[-1]), ""])
            typ.append(float(np.mean(logs)))
        slope, intercept = np.polyfit(1.0 / np.asarray(temps), typ, 1)
        payload["arrhenius"] = {"B": float(-slope),
                                "log_prefactor": float(intercept),
                                "temperatures": temps,
                                "log_typical_gap": typ}
    kind = "qa" if cfg.protocol in ("qa-rt", "qa-it") else "sa"
    header = ["kind", "L", "control", "realization_index", "gap", "g"]
    csv_path = write_csv(os.path.join(cfg.out, f"gaps_{kind}.csv"),
                         header, rows, config)
    write_json(os.path.join(cfg.out, f"gaps_{kind}_summary.json"), payload, config)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# lz
# ---------------------------------------------------------------------------

def cmd_lz(cfg):
    cfg.validate("lz")
    config = cfg.as_dict()
    schedule = AnnealSchedule(kind="qa_field", initial=cfg.initial,
                              tau=float(cfg.tau), alpha=cfg.alpha)
    results = []
    rows = []
    for domain in (dynamics.REAL_TIME, dynamics.IMAGINARY_TIME):
        res = dynamics.landau_zener_demo(cfg.q, schedule, domain, tol=cfg.tol)
        results.append(res)
        for t, sv, p in zip(res.times, res.schedule_values, res.p_ex):
            rows.append([domain, cfg.q, res.gap_min, t, sv, p])
    header = ["domain", "q", "gap_min", "t", "schedule_value", "p_ex"]
    csv_path = write_csv(os.path.join(cfg.out, f"lz_q{cfg.q:g}.csv"),
                         header, rows, config)
    write_json(os.path.join(cfg.out, f"lz_q{cfg.q:g}.json"),
               {"p_final": {r.domain: r.p_final for r in results},
                "gap_min": results[0].gap_min}, config)
    if cfg.plot or cfg.recipe:
        figures.lz_figure(results, os.path.join(cfg.out, f"lz_q{cfg.q:g}.png"),
                          title=f"two-level sweep, q={cfg.q:g}")
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(cfg):
    cfg.validate("oracle")
    if cfg.L > 12:
        raise ConfigError("oracle runs are limited to L <= 12")
    config = cfg.as_dict()
    couplings = make_couplings(cfg)
    schedule = make_schedule(cfg)
    tau = float(cfg.tau)
    sample_times = np.linspace(0.0, tau, min(cfg.samples, 17))
    traj = ens.single_run(cfg.protocol, couplings, tau, initial=cfg.initial,
                          alpha=cfg.alpha, tol=cfg.tol,
                          sample_times=sample_times)
    refs = oracle_records(cfg, couplings, schedule, sample_times)
    header = ["t", "rho_def", "oracle_rho_def", "delta_rho_def"]
    rows = []
    for rec, ref in zip(traj.records, refs):
        rows.append([rec.t, rec.rho_def, ref.rho_def, rec.rho_def - ref.rho_def])
    payload = {"max_delta_rho": float(max(abs(r[3]) for r in rows))}
    if cfg.protocol == "sa":
        _, me_recs = oracle.dense_master_equation(couplings, schedule,
                                                  tol=min(cfg.tol, 1e-10),
                                                  sample_times=sample_times)
        header.append("master_equation_rho_def")
        for row, me in zip(rows, me_recs):
            row.append(me.rho_def)
        payload["quasistatic_gap_final"] = float(
            abs(rows[-1][1] - rows[-1][4]))
    tag = f"{cfg.protocol}_L{cfg.L}_tau{cfg.tau:g}"
    csv_path = write_csv(os.path.join(cfg.out, f"oracle_{tag}.csv"),
                         header, rows, config)
    write_json(os.path.join(cfg.out, f"oracle_{tag}.json"), payload, config)
    print(f"wrote {csv_path} (max |delta rho| = {payload['max_delta_rho']:.3e})")
    return 0


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

def _recipe_cfg(cfg, **overrides):
    settings = dict(cfg.settings)
    for key, val in overrides.items():
        if cfg.settings.get(key) == DEFAULTS.get(key):
            settings[key] = val
    return RunConfig(settings=settings)


def recipe_fig1(cfg, which):
    """Ordered-chain scalings: QA-RT power law (a), QA-IT tail (b), LZ (c)."""
    if which == "fig1c":
        rc = _recipe_cfg(cfg, tau=100.0, initial=10.0, q=0.2, plot=True)
        rc.validate("lz")
        return cmd_lz(rc)
    rc = _recipe_cfg(cfg, L=512, initial=10.0, fixed_j=1.0,
                     distribution=FIXED, boundary=PERIODIC, path="kspace",
                     tol=1e-11,
                     tau_grid="10:1000:17" if which == "fig1a" else "5:1000:24")
    rc.validate("anneal")
    protocol = "qa-rt" if which == "fig1a" else "qa-it"
    taus = parse_tau_grid(rc.tau_grid)
    schedule_of = lambda tau: ens.protocol_schedule(protocol, float(tau),
                                                    initial=rc.initial,
                                                    alpha=rc.alpha)
    domain = ens.protocol_domain(protocol)
    rhos = []
    for tau in taus:
        traj = dynamics.kspace_evolve(rc.fixed_j, schedule_of(tau), domain,
                                      rc.L, tol=rc.tol,
                                      sample_times=[0.0, float(tau)])
        rhos.append(traj.final().rho_def)
    rhos = np.array(rhos)
    config = rc.as_dict()
    config["recipe"] = which
    rows = [[protocol, rc.L, t, r] for t, r in zip(taus, rhos)]
    csv_path = write_csv(os.path.join(rc.out, f"{which}.csv"),
                         ["protocol", "L", "tau", "rho_def"], rows, config)
    payload = {}
    if which == "fig1a":
        fit = ens.fit_scaling(taus, rhos, ens.POWER_LAW)
        payload["kibble_zurek_fit"] = fit.__dict__
        figures.scaling_figure({("QA-RT L=%d" % rc.L): (taus, rhos)},
                               os.path.join(rc.out, f"{which}.png"),
                               title="defect density vs annealing time",
                               fits={("QA-RT L=%d" % rc.L):
                                     lambda t: fit.params["amplitude"]
                                     * t ** -fit.params["mu"]})
    else:
        tail = taus >= taus.max() / 10**1.5
        a = float(np.mean(rhos[tail] * taus[tail] ** 2))
        dev = rhos - a / taus**2
        payload["tail_coefficient"] = a
        small = (taus <= 25.0) & (dev > 0)
        if int(small.sum()) >= 5:
            slope, intercept = np.polyfit(taus[small], np.log(dev[small]), 1)
            pred = slope * taus[small] + intercept
            ss_res = float(np.sum((np.log(dev[small]) - pred) ** 2))
            ss_tot = float(np.sum((np.log(dev[small])
                                   - np.log(dev[small]).mean()) ** 2))
            payload["deviation_fit"] = {
                "rate": float(-slope), "log_prefactor": float(intercept),
                "r_squared": 1.0 - ss_res / max(ss_tot, 1e-300)}
        figures.scaling_figure({("QA-IT L=%d" % rc.L): (taus, rhos)},
                               os.path.join(rc.out, f"{which}.png"),
                               title="imaginary-time tail",
                               fits={("QA-IT L=%d" % rc.L): lambda t: a / t**2})
        figures.deviation_figure(taus, dev,
                                 os.path.join(rc.out, f"{which}_deviation.png"),
                                 title="deviation from the tail law")
    write_json(os.path.join(rc.out, f"{which}.json"), payload, config)
    print(f"wrote {csv_path}")
    return 0


def recipe_fig2(cfg):
    """Disordered-chain hierarchy: SA vs QA-RT vs QA-IT with fits."""
    rc = _recipe_cfg(cfg, L=32, n_real=50, tau_grid="10:1000:13", tol=1e-7)
    rc.validate("ensemble")
    taus = parse_tau_grid(rc.tau_grid)
    config = rc.as_dict()
    config["recipe"] = "fig2"
    out_csv = os.path.join(rc.out, "records.csv")
    protocols = [ens.SA, ens.QA_RT, ens.QA_IT]
    records, failures = run_ensemble_grid(rc, protocols, taus, out_csv)
    write_records(out_csv, records, config)

    series = {}
    fits = {}
    payload = {"failures": failures, "fits": {}, "stats": {}}
    for protocol in protocols:
        typ, avg = [], []
        for tau in taus:
            vals = [r.rho_def for r in records
                    if r.protocol == protocol and r.tau == float(tau)]
            st = ens.aggregate(vals)
            typ.append(st.typical)
            avg.append(st.average)
        typ = np.array(typ)
        avg = np.array(avg)
        series[f"{protocol} typical"] = (taus, typ)
        payload["stats"][protocol] = {
            "tau": taus, "typical": typ, "average": avg}
        window = (float(taus.min()), float(taus.max()))
        if protocol == ens.SA:
            fit = ens.fit_scaling(taus, typ, ens.LOG_LAW, window=window,
                                  fixed_zeta=1.0)
            fits[f"{protocol} typical"] = (
                lambda t, p=fit.params: p["amplitude"]
                / np.log(p["gamma"] * t) ** p["zeta"])
        elif protocol == ens.QA_RT:
            fit = ens.fit_scaling(taus, typ, ens.LOG_LAW, window=window,
                                  fixed_zeta=2.0)
            fits[f"{protocol} typical"] = (
                lambda t, p=fit.params: p["amplitude"]
                / np.log(p["gamma"] * t) ** p["zeta"])
        else:
            series[f"{protocol} average"] = (taus, avg)
            fit = ens.fit_scaling(taus, avg, ens.POWER_LAW, window=window)
            fits[f"{protocol} average"] = (
                lambda t, p=fit.params: p["amplitude"] * t ** -p["mu"])
        payload["fits"][protocol] = fit.__dict__
    write_json(os.path.join(rc.out, "summary.json"), payload, config)
    figures.scaling_figure(series, os.path.join(rc.out, "fig2.png"),
                           title=f"disordered chains, L={rc.L}", fits=fits)
    print(f"wrote {out_csv} and fits for {len(protocols)} protocols")
    return 0


def cmd_recipe_dispatch(cfg):
    if cfg.recipe in ("fig1a", "fig1b", "fig1c"):
        return recipe_fig1(cfg, cfg.recipe)
    if cfg.recipe == "fig2":
        return recipe_fig2(cfg)
    raise ConfigError(f"unknown recipe {cfg.recipe!r}")


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="isinganneal",
        description="Deterministic annealing simulator for random "
                    "ferromagnetic Ising chains (SA / QA-RT / QA-IT).")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--protocol", choices=ens.PROTOCOLS)
        sp.add_argument("--L", type=int)
        sp.add_argument("--boundary", choices=(OPEN, PERIODIC))
        sp.add_argument("--distribution", choices=(UNIFORM01, FIXED))
        sp.add_argument("--fixed-j", dest="fixed_j", type=float,
                        help="bond strength for the fixed distribution")
        sp.add_argument("--initial", type=float,
                        help="initial temperature (SA) or field (QA)")
        sp.add_argument("--alpha", type=float, help="heat-bath attempt rate")
        sp.add_argument("--tau", type=float, help="total annealing time")
        sp.add_argument("--tau-grid", dest="tau_grid",
                        help="lo:hi:n geometric grid or comma list")
        sp.add_argument("--n-real", dest="n_real", type=int,
                        help="disorder realizations per cell")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tol", type=float, help="integrator tolerance")
        sp.add_argument("--samples", type=int, help="trajectory sample count")
        sp.add_argument("--path", choices=("real", "kspace"))
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        sp.add_argument("--threads", type=int, help="worker processes (0 = all cores)")
        sp.add_argument("--oracle", action="store_const", const=True,
                        help="add dense-oracle comparison columns (L <= 12)")
        sp.add_argument("--plot", action="store_const", const=True,
                        help="render PNG figures next to the CSV output")
        sp.add_argument("--recipe", choices=RECIPES,
                        help="named preset reproducing one figure")
        sp.add_argument("--q", type=float, help="mode offset k = pi - q (lz)")
        sp.add_argument("--gamma-c", dest="gamma_c", type=float,
                        help="field for gap statistics (spectrum)")
        sp.add_argument("--temps", help="comma list of temperatures (spectrum, SA)")
        sp.add_argument("--sizes", help="comma list of L values (spectrum)")

    for name, fn in (("anneal", cmd_anneal), ("ensemble", cmd_ensemble),
                     ("spectrum", cmd_spectrum), ("lz", cmd_lz),
                     ("oracle", cmd_oracle)):
        sp = sub.add_parser(name)
        add_common(sp)
        sp.set_defaults(fn=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg.settings.get("recipe") and args.fn in (cmd_anneal, cmd_lz):
            return cmd_recipe_dispatch(cfg)
        return args.fn(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, NonRepresentableError, NumericError) as exc:
        diag = {"error": str(exc),
                "t": getattr(exc, "t", None), "step": getattr(exc, "step", None)}
        try:
            out = os.environ.get(OUT_ENV, "out")
            write_json(os.path.join(out, "error.json"), {"diagnostics": diag}, {})
        except OSError:
            pass
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
