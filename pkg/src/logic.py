"""
Run orchestration: configuration loading and validation, single runs,
convergence sweeps and artifact writing.
"""

import copy
import csv
import json
import math
import os
import re
import time

import numpy as np

from cases import make_case
from constants import (CONFIG_SCHEMA, CONVERGENCE_FILENAME, EXIT_FAILURE, EXIT_OK, NORMS_FILENAME,
                       SECTIONS, STEPS_FILENAME, SUMMARY_FILENAME, TIMESERIES_FILENAME, VERSION)
from diagnostics import (NORM_COLUMNS, NormReport, conserved_totals, domain_volume, entropy_rate,
                         error_norms, kinetic_energy, kinetic_energy_rate, norm_table_rows,
                         total_entropy)
from disc import Discretization
from errors import ConfigError, SolverError
from integrator import IntegratorConfig, integrate, write_steps_csv
from mesh import build_block_mesh, perturb_control_nodes
from metrics import gcl_residual, setup_metrics
from presets import get_preset_names, get_preset_settings


# Configuration

def default_config():
    """Flat configuration with every schema default."""
    return {key: copy.deepcopy(entry["default"]) for key, entry in CONFIG_SCHEMA.items()}


def _key_line(text, key):
    if not text:
        return None
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _in_range(value, entry):
    lo, hi = entry.get("range", (-math.inf, math.inf))
    return lo <= value <= hi


def validate_value(key, value):
    """
    Check one configuration value against CONFIG_SCHEMA and return its
    normalized form.

    Raises:
        ConfigError: wrong type, option or range.
    """
    entry = CONFIG_SCHEMA[key]
    kind = entry["type"]
    bad = ConfigError(f"invalid value {value!r} for '{key}' ({entry['label']}, type {kind})")

    if kind == "choice":
        if value not in entry["options"]:
            raise ConfigError(f"'{key}' must be one of {entry['options']}, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise bad
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise bad
        return value
    if kind == "int":
        if not isinstance(value, int) or isinstance(value, bool) or not _in_range(value, entry):
            raise bad
        return value
    if kind == "float":
        if not _is_number(value) or not _in_range(value, entry):
            raise bad
        return float(value)
    if kind == "optional_float":
        if value is None:
            return None
        if not _is_number(value) or value < 0:
            raise bad
        return float(value)
    if kind == "float_triple":
        if not isinstance(value, list) or len(value) != 3 or not all(_is_number(v) for v in value):
            raise bad
        return [float(v) for v in value]
    if kind == "int_triple":
        if (not isinstance(value, list) or len(value) != 3
                or not all(isinstance(v, int) and not isinstance(v, bool) and _in_range(v, entry) for v in value)):
            raise bad
        return list(value)
    if kind == "int_list":
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, int) and not isinstance(v, bool) and _in_range(v, entry) for v in value)):
            raise bad
        return sorted(set(value))
    if kind == "interval_triple":
        if (not isinstance(value, list) or len(value) != 3
                or not all(isinstance(v, list) and len(v) == 2 and all(_is_number(x) for x in v) and v[0] < v[1]
                           for v in value)):
            raise bad
        return [[float(lo), float(hi)] for lo, hi in value]
    raise ConfigError(f"schema type '{kind}' of '{key}' is not supported")


def resolve_config(data, path=None, text=None):
    """
    Merge a sectioned configuration over the defaults.

    Args:
        data: {section: {key: value}} as read from a run file or preset.
        path: Source file, for error messages.
        text: Raw file text, used to attach line numbers to errors.

    Returns:
        Flat {key: value} dict with every schema key.
    """
    if not isinstance(data, dict):
        raise ConfigError("a run configuration must be a JSON object of sections", path=path)
    config = default_config()
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section '{section}', expected one of {list(SECTIONS)}",
                              line=_key_line(text, section), path=path)
        if not isinstance(values, dict):
            raise ConfigError(f"section '{section}' must be an object", line=_key_line(text, section), path=path)
        for key, value in values.items():
            entry = CONFIG_SCHEMA.get(key)
            if entry is None or entry["section"] != section:
                raise ConfigError(f"unknown key '{key}' in section '{section}'",
                                  line=_key_line(text, key), path=path)
            try:
                config[key] = validate_value(key, value)
            except ConfigError as e:
                raise ConfigError(str(e), line=_key_line(text, key), path=path) from e
    return config


def load_config(path):
    """
    Load and validate a JSON run configuration.

    Raises:
        ConfigError: unreadable file, malformed JSON (with line and column)
            or a schema violation.
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read configuration: {e}", path=path) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno, column=e.colno, path=path) from e
    return resolve_config(data, path=path, text=text)


def preset_config(name):
    settings = get_preset_settings(name)
    if not settings:
        raise ConfigError(f"unknown preset '{name}', expected one of {get_preset_names()}")
    return resolve_config(settings)


def config_sections(config):
    """Flat configuration back to the sectioned file layout."""
    sections = {section: {} for section in SECTIONS}
    for key, entry in CONFIG_SCHEMA.items():
        sections[entry["section"]][key] = config[key]
    return sections


def save_config(config, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(config_sections(config), f, indent=2)


def apply_overrides(config, threads=None, seed=None, dissipation=None, output=None):
    """Command-line overrides on a resolved configuration (None keeps the value)."""
    config = dict(config)
    if threads is not None:
        config["threads"] = validate_value("threads", threads)
    if seed is not None:
        config["seed"] = validate_value("seed", seed)
    if dissipation is not None:
        config["dissipation"] = bool(dissipation)
    if output is not None:
        config["directory"] = validate_value("directory", output)
    return config


def worker_threads(config):
    return config["threads"] or os.cpu_count() or 1


# Problem setup

def build_problem(config, log_callback=print):
    """
    Mesh, metrics, case and discretization for a resolved configuration.

    Returns:
        (case, disc, gcl): gcl is the largest post-optimization constraint residual.
    """
    threads = worker_threads(config)
    case = make_case(config)
    mesh = build_block_mesh(config["elements"], config["bounds"], set(config["degrees"]),
                            seed=config["seed"], boundary=config["boundary"],
                            geometry_degree=config["geometry_degree"] or None)
    if config["amplitude"] > 0:
        mesh = perturb_control_nodes(mesh, config["amplitude"])
    log_callback(f"Mesh: {mesh.n_elements} elements, degrees {sorted(set(mesh.degrees))}, "
                 f"{len(mesh.interior_faces)} interior / {len(mesh.boundary_faces)} boundary faces")
    metrics = setup_metrics(mesh, target=config["metric_target"], face_seed=config["face_metrics"],
                            optimize=config["optimize_metrics"], threads=threads)
    gcl = max(gcl_residual(em)[1] for em in metrics)
    log_callback(f"Metrics ready, max GCL residual {gcl:.3e}")
    exact = case.exact if config["boundary"] == "dirichlet" else None
    disc = Discretization(mesh, metrics, case.physics, dissipation=config["dissipation"],
                          exact=exact, threads=threads)
    return case, disc, gcl


class RunMonitor:
    """Observer collecting entropy, kinetic energy and conserved totals per accepted step."""

    def __init__(self, disc):
        self.disc = disc
        self.volume = domain_volume(disc)
        self.entropy_scale = None

    def __call__(self, t, y, dydt):
        disc = self.disc
        state = disc.layout.unpack(y)
        rate = disc.layout.unpack(dydt)
        entropy = total_entropy(disc, state)
        if self.entropy_scale is None:
            self.entropy_scale = max(float(sum(np.sum(s * np.abs(disc.physics.entropy(q)))
                                               for s, q in zip(disc.scale, state))), 1e-300)
        s_rate = entropy_rate(disc, state, rate)
        _, totals = conserved_totals(disc, state)
        values = {"entropy": entropy, "entropy_rate": s_rate,
                  "relative_entropy_rate": s_rate / self.entropy_scale,
                  "kinetic_energy": kinetic_energy(disc, state),
                  "kinetic_energy_rate": kinetic_energy_rate(disc, state, rate)}
        for k, total in enumerate(totals):
            values[f"total_{k}"] = float(total)
        return values


def evaluate_checks(config, measured):
    """
    Compare measured quantities against the configured limits.

    Returns:
        {check: {"value", "limit", "passed"}} for every enabled check.
    """
    checks = {}
    for key in ("max_initial_residual", "max_entropy_rate", "entropy_nonincreasing",
                "max_conservation_drift", "max_state_drift"):
        limit = config[key]
        if limit is None:
            continue
        value = measured[key]
        checks[key] = {"value": value, "limit": limit, "passed": bool(value <= limit)}
    return checks


def _measure(result, y0, monitor, initial_residual):
    accepted = result.accepted_records
    series = [r.observations for r in accepted]
    scale = monitor.entropy_scale
    increase = max([(b["entropy"] - a["entropy"]) / scale for a, b in zip(series, series[1:])], default=0.0)
    totals = [k for k in series[0] if k.startswith("total_")]
    drift = max(abs(series[-1][k] - series[0][k]) for k in totals) / monitor.volume
    return {"max_initial_residual": initial_residual,
            "max_entropy_rate": max(abs(s["relative_entropy_rate"]) for s in series),
            "entropy_nonincreasing": increase,
            "max_conservation_drift": drift,
            "max_state_drift": float(np.max(np.abs(result.y - y0)))}


def write_timeseries(records, path):
    accepted = [r for r in records if r.accepted]
    keys = list(accepted[0].observations) if accepted else []
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["t"] + keys)
        for r in accepted:
            writer.writerow([f"{r.t:.17g}"] + [f"{r.observations[k]:.17g}" for k in keys])


def write_norms(report, path):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["variable", "L1", "L2", "L2_root", "Linf"])
        for k in range(len(report.l1)):
            writer.writerow([k, f"{report.l1[k]:.17g}", f"{report.l2[k]:.17g}",
                             f"{report.l2_root[k]:.17g}", f"{report.linf[k]:.17g}"])


def write_summary(summary, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(summary, f, indent=2)


def run_case(config, log_callback=print):
    """
    Build, integrate and measure one configured run, writing its artifacts
    into config["directory"].

    Returns:
        (success, summary): summary["exit_code"] is 0 on success, 1 for
        failed checks and the error's exit code otherwise.
    """
    output_dir = os.path.abspath(config["directory"])
    summary = {"version": VERSION, "label": config["label"], "case": config["case"],
               "seed": config["seed"], "config": config_sections(config), "status": "error",
               "exit_code": EXIT_FAILURE, "artifacts": []}
    started = time.perf_counter()
    try:
        os.makedirs(output_dir, exist_ok=True)
        case, disc, gcl = build_problem(config, log_callback)
        summary["gcl_residual"] = gcl

        state0 = disc.project(case.initial)
        y0 = disc.layout.pack(state0)
        initial_residual = float(np.max(np.abs(disc.rhs(0.0, y0))))
        log_callback(f"Initial max |dq/dt| = {initial_residual:.3e}")

        monitor = RunMonitor(disc)
        integrator_config = IntegratorConfig.from_config(config)
        log_callback(f"Integrating {config['case']} to t={config['t_end']} with {config['method']}...")
        result = integrate(disc.rhs, y0, integrator_config, observers=[monitor],
                           log_callback=log_callback, locate=disc.layout.element_of)
        log_callback(f"Reached t={result.t:.6e}: {result.accepted} accepted, "
                     f"{result.rejected} rejected steps, {result.evaluations} evaluations")

        steps_path = os.path.join(output_dir, STEPS_FILENAME)
        series_path = os.path.join(output_dir, TIMESERIES_FILENAME)
        write_steps_csv(result.records, steps_path)
        write_timeseries(result.records, series_path)
        summary["artifacts"] += [steps_path, series_path]

        if case.exact is not None:
            report = error_norms(disc, disc.layout.unpack(result.y), case.exact, result.t,
                                 label=str(config["elements"][0]))
            norms_path = os.path.join(output_dir, NORMS_FILENAME)
            write_norms(report, norms_path)
            summary["artifacts"].append(norms_path)
            summary["norms"] = report.as_dict()
            log_callback(f"Errors (variable 0): L1={report.l1[0]:.3e} L2={report.l2[0]:.3e} "
                         f"Linf={report.linf[0]:.3e}")

        measured = _measure(result, y0, monitor, initial_residual)
        checks = evaluate_checks(config, measured)
        first, last = result.accepted_records[0], result.accepted_records[-1]
        summary.update({"t_final": result.t, "accepted_steps": result.accepted,
                        "rejected_steps": result.rejected, "rhs_evaluations": result.evaluations,
                        "initial_residual": initial_residual, "measured": measured,
                        "entropy": {"initial": first.observations["entropy"],
                                    "final": last.observations["entropy"]},
                        "checks": checks})
        failed = [name for name, check in checks.items() if not check["passed"]]
        for name in failed:
            log_callback(f"Check failed: {name} = {checks[name]['value']:.3e} > {checks[name]['limit']:.3e}")
        summary["status"] = "failed" if failed else "passed"
        summary["exit_code"] = EXIT_FAILURE if failed else EXIT_OK

    except SolverError as e:
        log_callback(f"Error: {str(e)}")
        summary["error"] = str(e)
        summary["error_type"] = type(e).__name__
        summary["exit_code"] = e.exit_code
    except OSError as e:
        log_callback(f"Error writing artifacts: {str(e)}")
        summary["error"] = str(e)
        summary["error_type"] = type(e).__name__
    except Exception as e:  # pylint: disable=broad-exception-caught
        log_callback(f"Unexpected error: {str(e)}")
        summary["error"] = str(e)
        summary["error_type"] = type(e).__name__

    summary["elapsed_seconds"] = time.perf_counter() - started
    try:
        summary_path = os.path.join(output_dir, SUMMARY_FILENAME)
        write_summary(summary, summary_path)
        summary["artifacts"].append(summary_path)
    except OSError as e:
        log_callback(f"Could not write summary: {e}")
    log_callback(f"Run finished with status '{summary['status']}'.")
    return summary["status"] == "passed", summary


def convergence_sweep(config, grids, log_callback=print):
    """
    Run a case on nested grids n^3 and tabulate observed convergence rates.

    Returns:
        (success, result): result holds the per-grid summaries, the table
        rows per variable and the path of convergence.csv.
    """
    grids = [int(n) for n in grids]
    if len(grids) < 2:
        raise ConfigError("a convergence sweep needs at least two grids")
    if any(b != 2 * a for a, b in zip(grids, grids[1:])):
        raise ConfigError(f"grids must be nested by doubling, got {grids}")
    if config["case"] == "tgv" or (config["case"] == "burgers" and config["profile"] != "linear"):
        raise ConfigError(f"case '{config['case']}' has no exact solution to measure errors against")

    base_dir = os.path.abspath(config["directory"])
    summaries, reports = [], []
    for n in grids:
        run_config = dict(config, elements=[n, n, n], directory=os.path.join(base_dir, f"grid_{n}"))
        log_callback(f"--- grid {n}^3 ---")
        success, summary = run_case(run_config, log_callback)
        summaries.append(summary)
        if "norms" not in summary:
            log_callback(f"Sweep stopped: grid {n} produced no error norms.")
            return False, {"summaries": summaries, "exit_code": summary["exit_code"]}
        if not success:
            log_callback(f"Grid {n} failed its checks; continuing.")
        norms = summary["norms"]
        reports.append(NormReport(l1=np.array(norms["L1"]), l2=np.array(norms["L2"]),
                                  linf=np.array(norms["Linf"]), volume=norms["volume"], label=str(n)))

    table = {k: norm_table_rows(grids, reports, variable=k) for k in range(len(reports[0].l1))}
    os.makedirs(base_dir, exist_ok=True)
    path = os.path.join(base_dir, CONVERGENCE_FILENAME)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["variable"] + NORM_COLUMNS)
        for k, rows in table.items():
            for row in rows:
                writer.writerow([k] + row)
    monotone = all(b.l1[0] < a.l1[0] for a, b in zip(reports, reports[1:]))
    for row in table[0]:
        log_callback("grid {:>4}  L1 {} ({:>8})  L2 {} ({:>8})  Linf {} ({:>8})".format(*row))
    if not monotone:
        log_callback("Warning: density L1 error does not decrease monotonically.")
    exit_code = max(s["exit_code"] for s in summaries)
    if exit_code == EXIT_OK and not monotone:
        exit_code = EXIT_FAILURE
    return exit_code == EXIT_OK, {"summaries": summaries, "table": table, "path": path,
                                  "monotone": monotone, "exit_code": exit_code}
