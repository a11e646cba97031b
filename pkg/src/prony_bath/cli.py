"""Command-line front end: fit, spectrum, compare, cost, selftest.

All physical quantities are expressed in units of the density peak height
(energies) and its inverse (times). Structured results are JSON with sorted
keys; curves are RFC-4180 CSV with 17 significant digits. Identical config
plus seed yields byte-identical output files, which selftest verifies.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import (
    ErrorGridPolicy,
    ado_count,
    exact_spectrum,
    fit_error,
    matched_term_ratio,
    series_spectrum,
    sweep_accuracy,
    _composite_grid,
)
from .errors import (
    AccuracyError,
    ConfigError,
    NumericalError,
    PronyBathError,
    UnsupportedDensityError,
)
from .prony import ANALYTIC, build_hankel, fit_correlation, fit_part_with_factorization, takagi_factorize
from .series import ExponentialSeries
from .spectral import (
    BathParameters,
    Lorentzian,
    QuadratureConfig,
    Sector,
    Semicircle,
    Statistics,
    Tabulated,
    TimeGrid,
    analytic_lorentzian_real_part,
    default_omega_cutoff,
    density_value,
    sample_correlation_pair,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_UNSUPPORTED = 4

SERIES_SCHEMA = "prony-bath/series.v1"
REPORT_SCHEMA = "prony-bath/report.v1"
COMPARE_SCHEMA = "prony-bath/compare.v1"
COST_SCHEMA = "prony-bath/cost.v1"


# ---------------------------------------------------------------------------
# canonical serialization

def canonical_json(obj) -> str:
    """Sorted-keys, two-space-indent JSON text, trailing newline included."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def fmt_float(x: float) -> str:
    """17 significant digits, scientific; enough to reload the exact double."""
    return f"{float(x):.16e}"


def write_csv(path: Path, header: list, rows: list) -> None:
    # manual join instead of csv.writer: fields never contain commas or
    # quotes, and the explicit CRLF keeps the bytes platform-independent
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    path.write_text("\r\n".join(lines) + "\r\n", newline="")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, newline="")


# ---------------------------------------------------------------------------
# config loading and validation

_TOP_KEYS = {"density", "bath", "grid", "fit", "psd", "quadrature",
             "error_grid", "compare", "output", "seed"}


def _expect_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected an object")
    return node


def _reject_unknown(node: dict, path: str, allowed) -> None:
    unknown = sorted(set(node) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")


def _number(node: dict, key: str, path: str, default=None, minimum=None,
            strict_min=True, required=False) -> float:
    if key not in node:
        if required:
            raise ConfigError(f"{path}: missing required key '{key}'")
        return default
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number")
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError(f"{path}.{key}: must be finite")
    if minimum is not None:
        if strict_min and not val > minimum:
            raise ConfigError(f"{path}.{key}: must be > {minimum}")
        if not strict_min and not val >= minimum:
            raise ConfigError(f"{path}.{key}: must be >= {minimum}")
    return val


def _integer(node: dict, key: str, path: str, default=None, minimum=None,
             required=False) -> int:
    if key not in node:
        if required:
            raise ConfigError(f"{path}: missing required key '{key}'")
        return default
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}.{key}: expected an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}")
    return val


def _string(node: dict, key: str, path: str, default=None, choices=None) -> str:
    if key not in node:
        return default
    val = node[key]
    if not isinstance(val, str):
        raise ConfigError(f"{path}.{key}: expected a string")
    if choices is not None and val not in choices:
        raise ConfigError(f"{path}.{key}: must be one of {sorted(choices)}")
    return val


def _int_range(node: dict, key: str, path: str, default=None) -> list:
    """[lo, hi] or [lo, hi, step], inclusive bounds, expanded to a list."""
    if key not in node:
        return default
    val = node[key]
    if (not isinstance(val, list) or not 2 <= len(val) <= 3
            or any(isinstance(v, bool) or not isinstance(v, int) for v in val)):
        raise ConfigError(f"{path}.{key}: expected [lo, hi] or [lo, hi, step] integers")
    lo, hi = val[0], val[1]
    step = val[2] if len(val) == 3 else 1
    if step < 1:
        raise ConfigError(f"{path}.{key}: step must be >= 1")
    if hi < lo:
        raise ConfigError(f"{path}.{key}: hi must be >= lo")
    return list(range(lo, hi + 1, step))


def load_config(path) -> dict:
    """Read and schema-check a run configuration file."""
    if path is None:
        raw = {}
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    node = _expect_mapping(raw, "config")
    _reject_unknown(node, "config", _TOP_KEYS)
    for section in ("density", "bath", "grid", "fit", "psd", "quadrature",
                    "error_grid", "compare", "output"):
        if section in node:
            _expect_mapping(node[section], f"config.{section}")
    if "seed" in node:
        _integer(node, "seed", "config", minimum=0)
    return node


def build_density(cfg: dict):
    node = cfg.get("density", {})
    kind = _string(node, "kind", "config.density", default="lorentzian",
                   choices={"lorentzian", "semicircle", "tabulated"})
    if kind == "tabulated":
        _reject_unknown(node, "config.density", {"kind", "omega", "values"})
        for key in ("omega", "values"):
            if key not in node or not isinstance(node[key], list):
                raise ConfigError(f"config.density.{key}: expected a list of numbers")
        return Tabulated(np.asarray(node["omega"], float),
                         np.asarray(node["values"], float))
    _reject_unknown(node, "config.density", {"kind", "delta", "W"})
    delta = _number(node, "delta", "config.density", default=1.0, minimum=0.0)
    W = _number(node, "W", "config.density", default=10.0, minimum=0.0)
    cls = Lorentzian if kind == "lorentzian" else Semicircle
    return cls(delta, W)


def build_bath(cfg: dict, beta=None) -> BathParameters:
    node = cfg.get("bath", {})
    _reject_unknown(node, "config.bath", {"beta", "statistics", "sector"})
    if beta is None:
        beta = _number(node, "beta", "config.bath", default=10.0, minimum=0.0)
    stats = _string(node, "statistics", "config.bath", default="fermionic",
                    choices={"fermionic", "bosonic"})
    sector = _string(node, "sector", "config.bath", default="plus",
                     choices={"plus", "minus"})
    return BathParameters(beta, Statistics(stats), Sector(sector))


def build_grid(cfg: dict) -> TimeGrid:
    node = cfg.get("grid", {})
    _reject_unknown(node, "config.grid", {"t_cut", "N"})
    t_cut = _number(node, "t_cut", "config.grid", default=80.0, minimum=0.0)
    N = _integer(node, "N", "config.grid", default=400, minimum=1)
    return TimeGrid(t_cut, N)


def build_quadrature(cfg: dict) -> QuadratureConfig:
    node = cfg.get("quadrature", {})
    _reject_unknown(node, "config.quadrature", {"abs_tol", "max_refinements"})
    return QuadratureConfig(
        abs_tol=_number(node, "abs_tol", "config.quadrature", default=1e-9, minimum=0.0),
        max_refinements=_integer(node, "max_refinements", "config.quadrature",
                                 default=14, minimum=1),
    )


def build_error_policy(cfg: dict) -> ErrorGridPolicy:
    node = cfg.get("error_grid", {})
    _reject_unknown(node, "config.error_grid",
                    {"omega_max", "log_points", "linear_points", "rel_tol",
                     "max_refinements"})
    return ErrorGridPolicy(
        omega_max=_number(node, "omega_max", "config.error_grid",
                          default=None, minimum=0.0),
        log_points=_integer(node, "log_points", "config.error_grid",
                            default=400, minimum=8),
        linear_points=_integer(node, "linear_points", "config.error_grid",
                               default=2000, minimum=8),
        rel_tol=_number(node, "rel_tol", "config.error_grid",
                        default=1e-2, minimum=0.0),
        max_refinements=_integer(node, "max_refinements", "config.error_grid",
                                 default=6, minimum=1),
    )


def build_fit_plan(cfg: dict) -> dict:
    """Either explicit counts {K_r, K_i} or a search {target_error, max_terms}."""
    node = cfg.get("fit", {})
    _reject_unknown(node, "config.fit", {"K_r", "K_i", "target_error", "max_terms"})
    has_counts = "K_r" in node or "K_i" in node
    has_target = "target_error" in node
    if has_counts and has_target:
        raise ConfigError("config.fit: give either K_r/K_i or target_error, not both")
    if has_target:
        return {
            "mode": "target",
            "target_error": _number(node, "target_error", "config.fit",
                                    minimum=0.0, required=True),
            "max_terms": _integer(node, "max_terms", "config.fit",
                                  default=40, minimum=2),
        }
    K_r = node.get("K_r", "analytic")
    if K_r != "analytic":
        if isinstance(K_r, bool) or not isinstance(K_r, int) or K_r < 1:
            raise ConfigError("config.fit.K_r: expected a positive integer or 'analytic'")
    K_i = _integer(node, "K_i", "config.fit", default=4, minimum=1)
    return {"mode": "counts", "K_r": K_r, "K_i": K_i}


def build_output_names(cfg: dict) -> dict:
    node = cfg.get("output", {})
    _reject_unknown(node, "config.output",
                    {"series", "report", "samples", "spectrum", "table", "summary"})
    names = {
        "series": _string(node, "series", "config.output", default="series.json"),
        "report": _string(node, "report", "config.output", default="report.json"),
        "samples": _string(node, "samples", "config.output", default=None),
        "spectrum": _string(node, "spectrum", "config.output", default="spectrum.csv"),
        "table": _string(node, "table", "config.output", default="compare_table.csv"),
        "summary": _string(node, "summary", "config.output",
                           default="compare_summary.json"),
    }
    return names


def build_compare_plan(cfg: dict) -> dict:
    node = cfg.get("compare")
    if node is None:
        raise ConfigError("config.compare: section required for the compare command")
    _reject_unknown(node, "config.compare", {"methods", "cases"})
    methods = node.get("methods", ["pfd", "psd"])
    if (not isinstance(methods, list) or not methods
            or any(m not in ("pfd", "psd") for m in methods)):
        raise ConfigError("config.compare.methods: expected a nonempty subset of ['pfd', 'psd']")
    methods = sorted(set(methods))
    cases_node = node.get("cases")
    if not isinstance(cases_node, list) or not cases_node:
        raise ConfigError("config.compare.cases: expected a nonempty list")
    psd_default = _int_range(cfg.get("psd", {}), "P_range", "config.psd",
                             default=list(range(1, 17)))
    _reject_unknown(cfg.get("psd", {}), "config.psd", {"P_range"})
    cases = []
    for i, case in enumerate(cases_node):
        path = f"config.compare.cases[{i}]"
        case = _expect_mapping(case, path)
        _reject_unknown(case, path,
                        {"beta", "t_cut", "N", "K_range", "P_range", "anchor_terms"})
        cases.append({
            "beta": _number(case, "beta", path, minimum=0.0, required=True),
            "t_cut": _number(case, "t_cut", path, minimum=0.0, required=True),
            "N": _integer(case, "N", path, minimum=1, required=True),
            "K_list": _int_range(case, "K_range", path, default=list(range(1, 6))),
            "P_list": _int_range(case, "P_range", path, default=psd_default),
            "anchor_terms": _integer(case, "anchor_terms", path, default=None, minimum=2),
        })
    return {"methods": methods, "cases": cases}


def _density_echo(J) -> dict:
    if isinstance(J, Lorentzian):
        return {"kind": "lorentzian", "delta": J.delta, "W": J.W}
    if isinstance(J, Semicircle):
        return {"kind": "semicircle", "delta": J.delta, "W": J.W}
    return {"kind": "tabulated", "points": int(J.omega_grid.size)}


def _bath_echo(bath: BathParameters) -> dict:
    return {"beta": bath.beta, "statistics": bath.statistics.value,
            "sector": bath.sector.value}


# ---------------------------------------------------------------------------
# series files

def series_payload(series: ExponentialSeries) -> dict:
    return {"schema": SERIES_SCHEMA, "terms": series.to_records()}


def load_series(path) -> ExponentialSeries:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read series file {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"series file {path} is not valid JSON: {exc}") from exc
    node = _expect_mapping(payload, "series")
    _reject_unknown(node, "series", {"schema", "terms"})
    if node.get("schema") != SERIES_SCHEMA:
        raise ConfigError(f"series file {path}: expected schema '{SERIES_SCHEMA}'")
    terms = node.get("terms")
    if not isinstance(terms, list):
        raise ConfigError(f"series file {path}: 'terms' must be a list")
    for i, rec in enumerate(terms):
        rec = _expect_mapping(rec, f"series.terms[{i}]")
        _reject_unknown(rec, f"series.terms[{i}]",
                        {"eta_re", "eta_im", "gamma_re", "gamma_im"})
        for key in ("eta_re", "eta_im", "gamma_re", "gamma_im"):
            if key not in rec:
                raise ConfigError(f"series.terms[{i}]: missing '{key}'")
            if isinstance(rec[key], bool) or not isinstance(rec[key], (int, float)):
                raise ConfigError(f"series.terms[{i}].{key}: expected a number")
    return ExponentialSeries.from_records(terms)


# ---------------------------------------------------------------------------
# fit

def _search_minimal_counts(J, bath, grid, quad, error_policy, target, max_terms):
    """Smallest term budget whose spectral error meets the target.

    The residual decreases monotonically in K, so a linear scan that reuses
    one factorization per part finds the minimum without refitting. Returns
    (K_r, K_i, trace); raises AccuracyError when the budget runs out.
    """
    analytic_real = isinstance(J, Lorentzian)
    real_samples, imag_samples = sample_correlation_pair(J, bath, grid, quad)
    trace = []
    if analytic_real:
        real_series = analytic_lorentzian_real_part(J)
        max_K_i = min(max_terms - 1, grid.N)
        fact = takagi_factorize(build_hankel(imag_samples.samples), max_K_i + 1)
        best = None
        for K_i in range(1, max_K_i + 1):
            imag_series, _ = fit_part_with_factorization(imag_samples, fact, K_i)
            combined = real_series.concat(imag_series.scaled(1j))
            err = fit_error(combined, J, bath, error_policy)
            trace.append({"K_r": "analytic", "K_i": K_i,
                          "terms": 1 + len(imag_series), "error": err.error})
            best = err.error if best is None else min(best, err.error)
            if err.error <= target:
                return ANALYTIC, K_i, trace
    else:
        max_K = min(max_terms // 2, grid.N)
        fact_r = takagi_factorize(build_hankel(real_samples.samples), max_K + 1)
        fact_i = takagi_factorize(build_hankel(imag_samples.samples), max_K + 1)
        best = None
        for K in range(1, max_K + 1):
            real_series, _ = fit_part_with_factorization(real_samples, fact_r, K)
            imag_series, _ = fit_part_with_factorization(imag_samples, fact_i, K)
            combined = real_series.concat(imag_series.scaled(1j))
            err = fit_error(combined, J, bath, error_policy)
            trace.append({"K_r": K, "K_i": K,
                          "terms": len(real_series) + len(imag_series),
                          "error": err.error})
            best = err.error if best is None else min(best, err.error)
            if err.error <= target:
                return K, K, trace
    raise AccuracyError(
        f"target_error {target:g} not reached within {max_terms} terms",
        estimate=best,
    )


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    J = build_density(cfg)
    bath = build_bath(cfg)
    grid = build_grid(cfg)
    quad = build_quadrature(cfg)
    error_policy = build_error_policy(cfg)
    plan = build_fit_plan(cfg)
    names = build_output_names(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)

    search_trace = None
    if plan["mode"] == "target":
        K_r, K_i, search_trace = _search_minimal_counts(
            J, bath, grid, quad, error_policy,
            plan["target_error"], plan["max_terms"])
    else:
        K_r, K_i = plan["K_r"], plan["K_i"]
    series, fit_report = fit_correlation(J, bath, grid, K_r, K_i, quad)
    err = fit_error(series, J, bath, error_policy)

    series_path = out_dir / names["series"]
    _write_text(series_path, canonical_json(series_payload(series)))

    report = {
        "schema": REPORT_SCHEMA,
        "command": "fit",
        "density": _density_echo(J),
        "bath": _bath_echo(bath),
        "grid": {"t_cut": grid.t_cut, "N": grid.N},
        "requested": {"K_r": K_r if K_r == ANALYTIC else int(K_r), "K_i": int(K_i)},
        "terms": len(series),
        "error": err.error,
        "error_detail": err.to_dict(),
        "fit": fit_report.to_dict(),
        "seed": int(seed),
    }
    if search_trace is not None:
        report["search"] = {"target_error": plan["target_error"],
                            "max_terms": plan["max_terms"],
                            "trace": search_trace}
    _write_text(out_dir / names["report"], canonical_json(report))

    if names["samples"] is not None:
        real_s, imag_s = sample_correlation_pair(J, bath, grid, quad)
        rows = [[fmt_float(t), fmt_float(re), fmt_float(im)]
                for t, re, im in zip(grid.times, real_s.samples, imag_s.samples)]
        write_csv(out_dir / names["samples"], ["t", "c_real", "c_imag"], rows)

    sys.stdout.write(canonical_json({
        "command": "fit", "terms": len(series), "error": err.error,
        "series": str(series_path), "report": str(out_dir / names["report"]),
    }))
    return 0


# ---------------------------------------------------------------------------
# spectrum

def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    J = build_density(cfg)
    bath = build_bath(cfg)
    error_policy = build_error_policy(cfg)
    names = build_output_names(cfg)
    series = load_series(args.series)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    omega_max = error_policy.omega_max
    if omega_max is None:
        omega_max = default_omega_cutoff(J, bath)
    omega = _composite_grid(bath, omega_max, error_policy.log_points,
                            error_policy.linear_points)
    if args.reference == "symmetric":
        # reference for a real-part-only series: the even spectral half
        c_exact = density_value(J, omega) / 2.0
    else:
        c_exact = exact_spectrum(J, bath, omega)
    c_fit = series_spectrum(series, omega)
    diff = np.abs(c_exact - c_fit)

    rows = [[fmt_float(w), fmt_float(e), fmt_float(f), fmt_float(d)]
            for w, e, f, d in zip(omega, c_exact, c_fit, diff)]
    path = out_dir / names["spectrum"]
    write_csv(path, ["omega", "c_exact", "c_fit", "abs_diff"], rows)
    sys.stdout.write(canonical_json({
        "command": "spectrum", "rows": len(rows),
        "max_abs_diff": float(diff.max()),
        "argmax_omega": float(omega[int(np.argmax(diff))]),
        "csv": str(path),
    }))
    return 0


# ---------------------------------------------------------------------------
# compare

def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    J = build_density(cfg)
    quad = build_quadrature(cfg)
    error_policy = build_error_policy(cfg)
    plan = build_compare_plan(cfg)
    names = build_output_names(cfg)
    base_bath = build_bath(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    want_pfd = "pfd" in plan["methods"]
    want_psd = "psd" in plan["methods"]
    rows = []
    summary_cases = []
    for case in plan["cases"]:
        bath = BathParameters(case["beta"], base_bath.statistics, base_bath.sector)
        grid = TimeGrid(case["t_cut"], case["N"])
        table = sweep_accuracy(
            J, bath, grid,
            pfd_imag_counts=case["K_list"] if want_pfd else [],
            psd_orders=case["P_list"] if want_psd else [],
            quad=quad, error_policy=error_policy,
        )
        for entry in table.rows():
            param = entry.detail.get("K_i", entry.detail.get("P"))
            rows.append([entry.method, fmt_float(case["beta"]),
                         str(entry.terms), str(param), fmt_float(entry.error)])
        if want_pfd and want_psd:
            anchor = case["anchor_terms"]
            if anchor is None:
                anchor = max(e.terms for e in table.rows("pfd"))
            matched = matched_term_ratio(table, anchor)
            matched["beta"] = case["beta"]
            summary_cases.append(matched)

    table_path = out_dir / names["table"]
    write_csv(table_path, ["method", "beta", "terms", "param", "error"], rows)
    printed = {"command": "compare", "rows": len(rows), "table": str(table_path)}
    if summary_cases:
        summary = {"schema": COMPARE_SCHEMA, "cases": summary_cases}
        summary_path = out_dir / names["summary"]
        _write_text(summary_path, canonical_json(summary))
        printed["summary"] = str(summary_path)
        printed["ratios"] = [c["ratio"] for c in summary_cases]
    sys.stdout.write(canonical_json(printed))
    return 0


# ---------------------------------------------------------------------------
# cost

def _sig3(value: Fraction) -> str:
    """Round a positive rational to 3 significant digits, half to even."""
    if value == 0:
        return "0.00e+00"
    exp = 0
    v = value
    while v >= 10:
        v /= 10
        exp += 1
    while v < 1:
        v *= 10
        exp -= 1
    scaled = v * 100  # in [100, 1000)
    digits = int(scaled)
    rem = scaled - digits
    half = Fraction(1, 2)
    if rem > half or (rem == half and digits % 2 == 1):
        digits += 1
    if digits == 1000:
        digits = 100
        exp += 1
    return f"{digits // 100}.{digits % 100:02d}e{exp:+03d}"


def cmd_cost(args) -> int:
    n_ado = ado_count(args.K, args.n_alpha, args.n_u, args.L)
    k_tilde = 2 * args.n_alpha * args.n_u * args.K
    payload = {
        "schema": COST_SCHEMA,
        "K": args.K, "N_alpha": args.n_alpha, "N_u": args.n_u, "L": args.L,
        "K_tilde": k_tilde, "n_ado": n_ado,
    }
    if (args.K2 is None) != (args.L2 is None):
        raise ConfigError("comparison needs both --K2 and --L2")
    if args.K2 is not None:
        n_ado2 = ado_count(args.K2, args.n_alpha, args.n_u, args.L2)
        ratio = Fraction(n_ado, n_ado2)
        payload["comparison"] = {
            "K2": args.K2, "L2": args.L2,
            "K_tilde2": 2 * args.n_alpha * args.n_u * args.K2,
            "n_ado2": n_ado2,
            "ratio": {"numerator": ratio.numerator,
                      "denominator": ratio.denominator},
            "ratio_sig3": _sig3(ratio),
        }
    sys.stdout.write(canonical_json(payload))
    return 0


# ---------------------------------------------------------------------------
# selftest

def _check_hankel_entries():
    from .prony import HankelOperator
    H = HankelOperator(np.array([1.0, 2, 3, 4, 5])).to_dense()
    assert np.array_equal(H, np.array([[1.0, 2, 3], [2, 3, 4], [3, 4, 5]]))


def _check_takagi_identity():
    t = np.arange(41) * 0.1
    phi = (0.8 * np.exp(-0.3 * t) + 0.2 * np.exp(-0.7 * t) * np.cos(1.3 * t))
    H = build_hankel(phi)
    fact = takagi_factorize(H, 5)
    dense = H.to_dense()
    for k in range(5):
        u = fact.vectors[:, k]
        resid = np.abs(dense @ u - fact.sigma[k] * np.conj(u)).max()
        assert resid <= 1e-10 * fact.sigma[0], f"pair {k}: residual {resid:.2e}"


def _check_exponent_roundtrip(rng):
    from .prony import exponents_from_roots
    grid = TimeGrid(20.0, 10)
    r = 0.2 + 0.7 * rng.random(4)
    theta = rng.uniform(-math.pi, math.pi, 4)
    w = r * np.exp(1j * theta)
    lam = exponents_from_roots(w, grid)
    back = np.exp(-lam * grid.dt)
    assert np.abs(back - w).max() <= 1e-12


def _check_exact_recovery(rng):
    from .prony import fit_part
    from .spectral import Part, SampledCorrelation
    grid = TimeGrid(2.0 * 40, 40)
    w = np.array([0.9, 0.6 + 0.25j, 0.6 - 0.25j])
    amps = np.array([1.0, 0.4 - 0.1j, 0.4 + 0.1j])
    j = np.arange(grid.num_samples)
    phi = np.real(np.sum(amps * w[None, :] ** j[:, None], axis=1))
    samples = SampledCorrelation(grid, Part.REAL, phi)
    series, report = fit_part(samples, 3)
    recon = series.evaluate(grid.times).real
    assert np.abs(recon - phi).max() <= 1e-8 * np.abs(phi).max()
    assert report.K_effective == 3


def _check_pade_closed_forms():
    from .psd import pade_poles
    ferm = pade_poles(Statistics.FERMIONIC, 1)
    assert abs(ferm.xi[0] - 2.0 * math.sqrt(3.0)) <= 1e-12
    assert abs(ferm.eta[0] - 1.5) <= 1e-12
    bose = pade_poles(Statistics.BOSONIC, 1)
    assert abs(bose.xi[0] - 2.0 * math.sqrt(15.0)) <= 1e-12
    assert abs(bose.eta[0] - 2.5) <= 1e-12


def _check_occupation_identities(rng):
    from .psd import occupation_approx, pade_poles
    x = rng.uniform(-8.0, 8.0, 32)
    ferm = pade_poles(Statistics.FERMIONIC, 7)
    s = occupation_approx(ferm, x) + occupation_approx(ferm, -x)
    assert np.abs(s - 1.0).max() <= 1e-12
    x = x[np.abs(x) > 0.1]
    bose = pade_poles(Statistics.BOSONIC, 5)
    s = occupation_approx(bose, x) + occupation_approx(bose, -x)
    assert np.abs(s + 1.0).max() <= 1e-12


def _check_ado_counts():
    assert ado_count(5, 1, 2, 6) == 60459
    assert ado_count(7, 1, 1, 1) == 14
    prev = 0
    for L in range(1, 8):
        now = ado_count(3, 1, 2, L)
        assert now > prev or now == 2 ** 12 - 1
        prev = now


def _check_error_metric_zero():
    J = Lorentzian(1.0, 10.0)
    bath = BathParameters(10.0)
    series = analytic_lorentzian_real_part(J)
    report = fit_error(series, J, bath,
                       exact_fn=lambda w: series_spectrum(series, w))
    assert report.error == 0.0


def _check_series_roundtrip_bytes(rng):
    eta = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    gamma = rng.uniform(0.1, 3.0, 5) + 1j * rng.standard_normal(5)
    text = canonical_json(series_payload(ExponentialSeries(eta, gamma)))
    reread = ExponentialSeries.from_records(json.loads(text)["terms"])
    assert canonical_json(series_payload(reread)) == text


def _check_float_format():
    assert fmt_float(math.pi) == "3.1415926535897931e+00"
    assert float(fmt_float(1.0 / 3.0)) == 1.0 / 3.0
    assert fmt_float(0.0) == "0.0000000000000000e+00"


def _check_spectrum_reflection(rng):
    from .analysis import spectrum_imag_defect
    eta_c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    gamma_c = rng.uniform(0.2, 4.0, 3) + 1j * rng.uniform(0.5, 9.0, 3)
    eta = np.concatenate([eta_c, np.conj(eta_c), rng.standard_normal(2)])
    gamma = np.concatenate([gamma_c, np.conj(gamma_c), rng.uniform(0.2, 4.0, 2)])
    series = ExponentialSeries(eta, gamma)
    omega = np.linspace(0.1, 30.0, 64)
    scale = np.abs(series.eta).sum()
    assert spectrum_imag_defect(series, omega) <= 1e-12 * scale
    broken = ExponentialSeries(eta_c, gamma_c)  # partners removed
    assert spectrum_imag_defect(broken, omega) > 1e-6 * scale


def cmd_selftest(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    checks = [
        ("hankel-entries", _check_hankel_entries),
        ("takagi-identity", _check_takagi_identity),
        ("exponent-roundtrip", lambda: _check_exponent_roundtrip(rng)),
        ("exact-recovery", lambda: _check_exact_recovery(rng)),
        ("pade-closed-forms", _check_pade_closed_forms),
        ("occupation-identities", lambda: _check_occupation_identities(rng)),
        ("ado-counts", _check_ado_counts),
        ("error-metric-zero", _check_error_metric_zero),
        ("series-roundtrip-bytes", lambda: _check_series_roundtrip_bytes(rng)),
        ("float-format", _check_float_format),
        ("spectrum-reflection", lambda: _check_spectrum_reflection(rng)),
    ]
    failures = 0
    for name, fn in checks:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report and keep going
            failures += 1
            sys.stdout.write(f"FAIL {name}: {exc}\n")
        else:
            sys.stdout.write(f"ok {name}\n")
    sys.stdout.write(f"selftest: {len(checks) - failures} passed, {failures} failed\n")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON run configuration")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized checks, recorded in reports")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (default 1; env PRONY_BATH_THREADS)")

    parser = argparse.ArgumentParser(
        prog="prony-bath",
        description="Exponential-series decomposition of bath correlation functions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("fit", parents=[common],
                   help="fit a correlation function and write series + report")

    p_spec = sub.add_parser("spectrum", parents=[common],
                            help="tabulate exact vs fitted spectrum as CSV")
    p_spec.add_argument("--series", required=True, help="series JSON file")
    p_spec.add_argument("--reference", choices=("fdt", "symmetric"), default="fdt",
                        help="exact column: full thermal spectrum or the even half")

    sub.add_parser("compare", parents=[common],
                   help="error-vs-terms sweep against the sum-over-poles baseline")

    p_cost = sub.add_parser("cost", parents=[common],
                            help="hierarchy state count for a term budget")
    p_cost.add_argument("--K", type=int, required=True, help="exponential terms per bath")
    p_cost.add_argument("--N-alpha", dest="n_alpha", type=int, default=1,
                        help="number of dissipative modes")
    p_cost.add_argument("--N-u", dest="n_u", type=int, default=2,
                        help="system operators coupled per mode")
    p_cost.add_argument("--L", type=int, required=True, help="hierarchy depth")
    p_cost.add_argument("--K2", type=int, default=None, help="comparison term count")
    p_cost.add_argument("--L2", type=int, default=None, help="comparison depth")

    sub.add_parser("selftest", parents=[common],
                   help="run the invariant suite; nonzero exit on any violation")
    return parser


_COMMANDS = {
    "fit": cmd_fit,
    "spectrum": cmd_spectrum,
    "compare": cmd_compare,
    "cost": cmd_cost,
    "selftest": cmd_selftest,
}


def _thread_limit(args) -> int:
    value = args.threads
    if value is None:
        env = os.environ.get("PRONY_BATH_THREADS")
        if env is not None:
            try:
                value = int(env)
            except ValueError as exc:
                raise ConfigError(
                    f"PRONY_BATH_THREADS must be an integer, got {env!r}") from exc
    if value is None:
        value = 1  # deterministic reductions by default
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def _fail(code: int, exc: Exception) -> int:
    payload = {"error": {"code": code, "type": type(exc).__name__,
                         "message": str(exc)}}
    if isinstance(exc, AccuracyError) and exc.estimate is not None:
        payload["error"]["estimate"] = float(exc.estimate)
    sys.stderr.write(canonical_json(payload))
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        limit = _thread_limit(args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=limit):
            return _COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except UnsupportedDensityError as exc:
        return _fail(EXIT_UNSUPPORTED, exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except PronyBathError as exc:
        return _fail(EXIT_NUMERICAL, exc)


if __name__ == "__main__":
    raise SystemExit(main())
