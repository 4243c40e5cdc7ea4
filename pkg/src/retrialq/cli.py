"""Command-line interface: analyze | simulate | compare.

``analyze`` runs transforms -> generating functions -> lattice inversion ->
tail laws for the selected targets and writes plot-ready CSVs plus a JSON
report.  ``simulate`` runs DES replications and writes conditional
histograms with batch-means standard errors.  ``compare`` joins the two
output sets, applies the configured tolerances (bulk TV distances, tail
slopes, predictor ratios) and exits nonzero on any failure.

Config files are flat INI text with sections model/analysis/simulation/
compare; unknown sections or keys are rejected.  Exit codes: 0 pass,
1 criterion failure, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import _backend
from . import asymptotics as asym
from . import inversion as inv
from . import model as _model
from . import pgf as _pgf
from . import simulator as sim
from .transforms import (ConvergenceError, QuadratureError, TransformContext)

__all__ = ["main", "cmd_analyze", "cmd_simulate", "cmd_compare",
           "ConfigError", "MissingArtifactError", "parse_config"]


class ConfigError(ValueError):
    """Unparseable, unknown, or missing configuration."""


class MissingArtifactError(FileNotFoundError):
    """A compare input file produced by analyze/simulate is absent."""


ALL_TARGETS = ("R0", "R11", "R12", "Mc", "H2_given_H1_0", "R12_given_R11_0")

# target -> (pgf factory, tail-law factory, DES conditional histogram, fast band)
_TARGET_TABLE = {
    "R0": (_pgf.R0_pgf, asym.tail_R0, "orbit_given_idle", True),
    "R11": (_pgf.marginal_R11_pgf, asym.tail_R11, "queue_given_busy", False),
    "R12": (_pgf.marginal_R12_pgf, asym.tail_R12, "orbit_given_busy", False),
    "Mc": (_pgf.Mc_pgf, asym.tail_Mc, None, False),
    "H2_given_H1_0": (_pgf.cond_H2_given_H1_0_pgf, asym.tail_H2_given_H1_0, None, True),
    "R12_given_R11_0": (_pgf.cond_R12_given_R11_0_pgf, asym.tail_R12_given_R11_0,
                        None, False),
}

_SCHEMA = {
    "model": {"lambda": float, "q": float, "mu": float, "service": str,
              "a": float, "x_m": float, "rate": float, "value": float},
    "analysis": {"n_inversion": int, "targets": str},
    "simulation": {"horizon": float, "warmup": float, "seed": int,
                   "replications": int, "queue_cap": int, "orbit_cap": int,
                   "n_batches": int},
    "compare": {"fit_j_lo": int, "fit_j_hi": int, "slope_tol": float,
                "ratio_lo": float, "ratio_hi": float,
                "ratio_lo_fast": float, "ratio_hi_fast": float,
                "bulk_tv_tol": float, "bulk_j_max": int},
}


@dataclass
class ExperimentConfig:
    params: _model.ModelParams
    n_inversion: int
    targets: tuple
    sim: sim.SimConfig | None
    compare: dict


def _parse_service(sec) -> _model.ServiceDistribution:
    kind = sec.get("service")
    if kind is None:
        raise ConfigError("[model] requires a 'service' kind")
    kind = kind.strip().lower()
    if kind == "pareto":
        if "a" not in sec or "x_m" not in sec:
            raise ConfigError("pareto service requires keys a and x_m")
        return _model.Pareto(a=float(sec["a"]), x_m=float(sec["x_m"]))
    if kind == "exponential":
        if "rate" not in sec:
            raise ConfigError("exponential service requires key rate")
        return _model.Exponential(rate=float(sec["rate"]))
    if kind == "deterministic":
        if "value" not in sec:
            raise ConfigError("deterministic service requires key value")
        return _model.Deterministic(value=float(sec["value"]))
    raise ConfigError(f"unknown service kind {kind!r}")


_SERVICE_KEYS = {"pareto": {"a", "x_m"}, "exponential": {"rate"},
                 "deterministic": {"value"}}


def parse_config(path) -> ExperimentConfig:
    """Strict INI parsing: unknown sections/keys are errors, never ignored."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    unknown = set(cp.sections()) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if "model" not in cp:
        raise ConfigError("config requires a [model] section")

    parsed = {}
    for section in cp.sections():
        schema = _SCHEMA[section]
        vals = {}
        for key, raw in cp[section].items():
            if key not in schema:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            try:
                vals[key] = schema[key](raw) if schema[key] is not str else raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
        parsed[section] = vals

    msec = parsed["model"]
    for req in ("lambda", "q", "mu"):
        if req not in msec:
            raise ConfigError(f"[model] requires key '{req}'")
    service = _parse_service(msec)
    extra = set(msec) - {"lambda", "q", "mu", "service"} - _SERVICE_KEYS[service.kind]
    if extra:
        raise ConfigError(f"keys {sorted(extra)} do not apply to {service.kind} service")
    params = _model.ModelParams(lam=msec["lambda"], q=msec["q"], mu=msec["mu"],
                                service=service)

    asec = parsed.get("analysis", {})
    n_inversion = asec.get("n_inversion", 2 ** 18)
    if "targets" in asec:
        targets = tuple(t.strip() for t in asec["targets"].split(",") if t.strip())
        if not targets:
            raise ConfigError("no targets selected")
        bad = [t for t in targets if t not in ALL_TARGETS]
        if bad:
            raise ConfigError(f"unknown targets {bad}; choose from {ALL_TARGETS}")
    else:
        targets = ALL_TARGETS

    ssec = parsed.get("simulation", {})
    sim_cfg = None
    if ssec:
        if "horizon" not in ssec or "seed" not in ssec:
            raise ConfigError("[simulation] requires keys horizon and seed")
        sim_cfg = sim.SimConfig(
            horizon=ssec["horizon"], seed=ssec["seed"],
            warmup=ssec.get("warmup"),
            queue_cap=ssec.get("queue_cap", 512),
            orbit_cap=ssec.get("orbit_cap", 4096),
            replications=ssec.get("replications", 1),
            n_batches=ssec.get("n_batches", 32))

    csec = parsed.get("compare", {})
    compare = {
        "fit_j_lo": csec.get("fit_j_lo", 200),
        "fit_j_hi": csec.get("fit_j_hi", 20000),
        "slope_tol": csec.get("slope_tol", 0.05),
        "ratio_lo": csec.get("ratio_lo", 0.85),
        "ratio_hi": csec.get("ratio_hi", 1.15),
        "ratio_lo_fast": csec.get("ratio_lo_fast", 0.7),
        "ratio_hi_fast": csec.get("ratio_hi_fast", 1.3),
        "bulk_tv_tol": csec.get("bulk_tv_tol", 0.01),
        "bulk_j_max": csec.get("bulk_j_max", 50),
    }
    return ExperimentConfig(params=params, n_inversion=n_inversion,
                            targets=targets, sim=sim_cfg, compare=compare)


def _meta(seed=None, t0=None):
    return {
        "seed": seed,
        "versions": {"retrialq": __version__, "numpy": np.__version__},
        "backend": _backend.BACKEND_NAME,
        "wall_time_s": None if t0 is None else round(time.perf_counter() - t0, 3),
    }


def _largest_decade_ratio(cvals, law, j_hi):
    js = np.unique(np.round(np.geomspace(max(j_hi // 10, 10), j_hi, 8)).astype(int))
    js = js[(js < cvals.size) & (cvals[np.minimum(js, cvals.size - 1)] > 0)]
    if js.size == 0:
        return None
    ratios = cvals[js] / law.predict(js)
    return float(np.exp(np.mean(np.log(ratios))))


def cmd_analyze(config: ExperimentConfig, outdir) -> dict:
    """Invert the selected targets, fit tails, emit CSV/JSON artifacts."""
    t0 = time.perf_counter()
    os.makedirs(outdir, exist_ok=True)
    ctx = TransformContext(config.params)
    cmp_cfg = config.compare
    report = {"targets": {}}
    for name in config.targets:
        factory, law_factory, _, _ = _TARGET_TABLE[name]
        handle = factory(ctx)
        try:
            law = law_factory(ctx)
        except asym.LightTailError as exc:
            law = None
            light_note = str(exc)
        pmf = inv.invert(handle, config.n_inversion, tail_law=law, source_label=name)
        cc = inv.ccdf(pmf)
        stem = name.lower()
        pmf_file = os.path.join(outdir, f"{stem}_pmf.csv")
        ccdf_file = os.path.join(outdir, f"{stem}_ccdf.csv")
        inv.pmf_to_csv(pmf_file, pmf)
        inv.ccdf_to_csv(ccdf_file, cc)
        law_file = os.path.join(outdir, f"{stem}_taillaw.json")
        entry = {"pmf_file": pmf_file, "ccdf_file": ccdf_file,
                 "tail_law_file": law_file, "alias_bound": pmf.alias_bound,
                 "min_mass": float(np.min(pmf.masses))}
        if law is None:
            law_doc = {"target": name, "light_tailed": True,
                       "note": "light-tailed: no regular-variation law"}
            entry.update(tail_law=law_doc, slope_fit=None,
                         ratio_at_largest_decade=None)
        else:
            law_doc = {"target": law.target, "sigma": law.sigma,
                       "C": law.C, "L": law.L}
            fit = asym.fit_loglog(cc.values, cmp_cfg["fit_j_lo"],
                                  min(cmp_cfg["fit_j_hi"], config.n_inversion // 8))
            entry.update(
                tail_law=law_doc,
                slope_fit={"slope": fit.slope, "intercept": fit.intercept,
                           "range": list(fit.range), "residual": fit.residual},
                ratio_at_largest_decade=_largest_decade_ratio(
                    cc.values, law, min(cmp_cfg["fit_j_hi"], config.n_inversion // 8)),
            )
        with open(law_file, "w") as fh:
            json.dump(law_doc, fh, sort_keys=True, indent=1)
        report["targets"][name] = entry
    report["meta"] = _meta(t0=t0)
    with open(os.path.join(outdir, "analyze_report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
    return report


_SIM_FILES = {"orbit_given_idle": "sim_orbit_given_idle.csv",
              "queue_given_busy": "sim_queue_given_busy.csv",
              "orbit_given_busy": "sim_orbit_given_busy.csv"}


def cmd_simulate(config: ExperimentConfig, outdir, seed_override=None) -> dict:
    """Run DES replications, emit conditional histograms with SEs."""
    t0 = time.perf_counter()
    if config.sim is None:
        raise ConfigError("simulate requires a [simulation] section")
    os.makedirs(outdir, exist_ok=True)
    cfg = config.sim
    if seed_override is not None:
        cfg = sim.SimConfig(horizon=cfg.horizon, seed=seed_override,
                            warmup=cfg.warmup, queue_cap=cfg.queue_cap,
                            orbit_cap=cfg.orbit_cap, replications=cfg.replications,
                            n_batches=cfg.n_batches)
    acc = sim.run_des(config.params, cfg)
    import csv as _csv
    for which, fname in _SIM_FILES.items():
        pmf = acc.cond_pmf(which)
        se = acc.cond_pmf_se(which)
        with open(os.path.join(outdir, fname), "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["j", "p_j", "se"])
            for j in range(pmf.size):
                w.writerow([j, f"{pmf[j]:.17g}", f"{se[j]:.17g}"])
    idle, idle_se = acc.idle_probability()
    util, util_se = acc.utilization()
    summary = {
        "idle_probability": idle, "idle_probability_se": idle_se,
        "utilization": util, "utilization_se": util_se,
        "events": acc.events, "replications": cfg.replications,
        "horizon": cfg.horizon, "warmup": acc.warmup,
        "n_batches_total": int(acc.busy_queue.shape[0]),
        "files": dict(_SIM_FILES),
        "meta": _meta(seed=cfg.seed, t0=t0),
    }
    with open(os.path.join(outdir, "sim_summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
    return summary


def _load_json(path):
    if not os.path.exists(path):
        raise MissingArtifactError(f"missing artifact: {path}")
    with open(path) as fh:
        return json.load(fh)


def _load_sim_pmf(outdir, which):
    path = os.path.join(outdir, _SIM_FILES[which])
    if not os.path.exists(path):
        raise MissingArtifactError(f"missing artifact: {path}")
    import csv as _csv
    with open(path, newline="") as fh:
        rows = list(_csv.reader(fh))
    return np.array([float(r[1]) for r in rows[1:]])


def cmd_compare(config: ExperimentConfig, outdir) -> tuple[dict, bool]:
    """Join analyze and simulate outputs and apply the tolerances."""
    t0 = time.perf_counter()
    cmp_cfg = config.compare
    analyze_report = _load_json(os.path.join(outdir, "analyze_report.json"))
    c_scale = float(os.environ.get("RETRIALQ_DEBUG_TAIL_C_SCALE", "1.0"))
    criteria = []

    need_sim = any(_TARGET_TABLE[t][2] for t in config.targets
                   if t in analyze_report["targets"])
    sim_summary = None
    if need_sim:
        sim_summary = _load_json(os.path.join(outdir, "sim_summary.json"))

    for name in config.targets:
        entry = analyze_report["targets"].get(name)
        if entry is None:
            raise MissingArtifactError(f"missing artifact: analyze output for {name}")
        law_doc = entry["tail_law"]
        _, _, sim_hist, fast = _TARGET_TABLE[name]

        if not law_doc.get("light_tailed"):
            sigma = law_doc["sigma"]
            slope = entry["slope_fit"]["slope"]
            criteria.append({
                "criterion": "tail_slope", "target": name,
                "value": slope, "expect": -sigma, "tol": cmp_cfg["slope_tol"],
                "passed": bool(abs(slope + sigma) <= cmp_cfg["slope_tol"])})
            lo, hi = ((cmp_cfg["ratio_lo_fast"], cmp_cfg["ratio_hi_fast"]) if fast
                      else (cmp_cfg["ratio_lo"], cmp_cfg["ratio_hi"]))
            ratio = entry["ratio_at_largest_decade"]
            scaled = None if ratio is None else ratio / c_scale
            criteria.append({
                "criterion": "tail_ratio", "target": name,
                "value": scaled, "band": [lo, hi],
                "passed": bool(scaled is not None and lo <= scaled <= hi)})

        if sim_hist is not None:
            jmax = cmp_cfg["bulk_j_max"]
            sim_pmf = _load_sim_pmf(outdir, sim_hist)
            inv_pmf = inv.read_column_csv(entry["pmf_file"])
            upto = min(jmax + 1, sim_pmf.size, inv_pmf.size)
            tv = 0.5 * float(np.abs(sim_pmf[:upto] - inv_pmf[:upto]).sum())
            criteria.append({
                "criterion": "bulk_tv", "target": name, "value": tv,
                "tol": cmp_cfg["bulk_tv_tol"], "range": [0, upto - 1],
                "passed": bool(tv < cmp_cfg["bulk_tv_tol"])})

    ok = all(c["passed"] for c in criteria)
    report = {"criteria": criteria, "passed": ok,
              "tolerances": cmp_cfg, "meta": _meta(t0=t0)}
    if sim_summary is not None:
        report["simulation"] = {k: sim_summary[k] for k in
                                ("idle_probability", "idle_probability_se",
                                 "utilization", "utilization_se")}
    with open(os.path.join(outdir, "compare_report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
    return report, ok


def _build_parser():
    p = argparse.ArgumentParser(
        prog="retrialq",
        description="Stationary analysis and simulation of the M/G/1 retrial "
                    "queue with Bernoulli schedule")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("analyze", "transform inversion and tail laws"),
                        ("simulate", "discrete-event simulation"),
                        ("compare", "join outputs and apply tolerances")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="INI config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
        sp.add_argument("--targets", default=None,
                        help="comma-separated target subset override")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
        if args.targets is not None:
            targets = tuple(t.strip() for t in args.targets.split(",") if t.strip())
            if not targets:
                raise ConfigError("no targets selected")
            bad = [t for t in targets if t not in ALL_TARGETS]
            if bad:
                raise ConfigError(f"unknown targets {bad}")
            config.targets = targets
        if args.command == "analyze":
            cmd_analyze(config, args.out)
            return 0
        if args.command == "simulate":
            cmd_simulate(config, args.out, seed_override=args.seed)
            return 0
        _, ok = cmd_compare(config, args.out)
        return 0 if ok else 1
    except (ConfigError, MissingArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, QuadratureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # invalid parameters and pmf normalization breaches land here
        msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return 3 if ("mass" in msg or "converge" in msg) else 2


if __name__ == "__main__":
    sys.exit(main())
