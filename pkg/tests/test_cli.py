"""Command-line contract: config schema, output files, exit codes, determinism."""
import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from prony_bath.cli import (
    _sig3,
    build_compare_plan,
    build_fit_plan,
    canonical_json,
    fmt_float,
    load_config,
    load_series,
    main,
    series_payload,
)
from prony_bath.errors import ConfigError
from prony_bath.series import ExponentialSeries
from prony_bath.spectral import Lorentzian, analytic_lorentzian_real_part

from fractions import Fraction


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run_cli(args, **kwargs):
    return subprocess.run(
        [sys.executable, "-m", "prony_bath.cli", *args],
        capture_output=True, text=True, **kwargs,
    )


FIT_BASE = {
    "density": {"kind": "lorentzian", "delta": 1.0, "W": 10.0},
    "bath": {"beta": 10.0},
    "grid": {"t_cut": 80.0, "N": 200},
    "fit": {"K_r": "analytic", "K_i": 4},
}

COMPARE_BASE = {
    "density": {"kind": "lorentzian", "delta": 1.0, "W": 10.0},
    "bath": {"beta": 10.0},
    "compare": {
        "cases": [
            {"beta": 10.0, "t_cut": 40.0, "N": 100,
             "K_range": [1, 3], "P_range": [2, 6, 2], "anchor_terms": 4},
        ],
    },
}


class TestConfigValidation:
    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"densty": {}})
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(path)

    def test_unknown_nested_key_rejected(self, tmp_path):
        cfg = {"bath": {"beta": 10.0, "flavor": "up"}}
        path = write_json(tmp_path / "c.json", cfg)
        with pytest.raises(ConfigError, match="flavor"):
            from prony_bath.cli import build_bath
            build_bath(load_config(path))

    def test_non_object_config_rejected(self, tmp_path):
        path = write_json(tmp_path / "c.json", [1, 2])
        with pytest.raises(ConfigError, match="expected an object"):
            load_config(path)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(str(path))

    def test_fit_counts_and_target_are_exclusive(self):
        with pytest.raises(ConfigError, match="not both"):
            build_fit_plan({"fit": {"K_i": 4, "target_error": 1e-3}})

    def test_fit_boolean_k_rejected(self):
        with pytest.raises(ConfigError):
            build_fit_plan({"fit": {"K_r": True, "K_i": 4}})

    def test_fit_defaults_to_analytic_four(self):
        plan = build_fit_plan({})
        assert plan == {"mode": "counts", "K_r": "analytic", "K_i": 4}

    def test_compare_requires_section(self):
        with pytest.raises(ConfigError, match="compare"):
            build_compare_plan({})

    def test_compare_case_missing_beta(self):
        cfg = {"compare": {"cases": [{"t_cut": 40.0, "N": 100}]}}
        with pytest.raises(ConfigError, match=r"cases\[0\]"):
            build_compare_plan(cfg)

    def test_range_shape_rejected(self):
        cfg = {"compare": {"cases": [
            {"beta": 10.0, "t_cut": 40.0, "N": 100, "K_range": [3, 1]},
        ]}}
        with pytest.raises(ConfigError, match="hi must be >= lo"):
            build_compare_plan(cfg)

    def test_methods_subset_enforced(self):
        cfg = {"compare": {"methods": ["pfd", "exact"], "cases": [
            {"beta": 10.0, "t_cut": 40.0, "N": 100},
        ]}}
        with pytest.raises(ConfigError, match="methods"):
            build_compare_plan(cfg)

    def test_seed_must_be_nonnegative_integer(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"seed": -1})
        with pytest.raises(ConfigError):
            load_config(path)


class TestSeriesFile:
    def test_roundtrip_is_byte_identical(self, tmp_path):
        series = ExponentialSeries(
            np.array([0.3 - 0.2j, 0.3 + 0.2j, 1.1 + 0j]),
            np.array([0.5 + 2.0j, 0.5 - 2.0j, 3.0 + 0j]),
        )
        text = canonical_json(series_payload(series))
        path = tmp_path / "s.json"
        path.write_text(text, newline="")
        reread = load_series(str(path))
        assert canonical_json(series_payload(reread)) == text

    def test_unknown_series_key_rejected(self, tmp_path):
        payload = {"schema": "prony-bath/series.v1", "terms": [], "extra": 1}
        path = write_json(tmp_path / "s.json", payload)
        with pytest.raises(ConfigError, match="unknown keys"):
            load_series(path)

    def test_malformed_term_rejected(self, tmp_path):
        payload = {"schema": "prony-bath/series.v1",
                   "terms": [{"eta_re": 1.0, "eta_im": 0.0, "gamma_re": 1.0}]}
        path = write_json(tmp_path / "s.json", payload)
        with pytest.raises(ConfigError, match="gamma_im"):
            load_series(path)

    def test_wrong_schema_tag_rejected(self, tmp_path):
        path = write_json(tmp_path / "s.json", {"schema": "other", "terms": []})
        with pytest.raises(ConfigError, match="schema"):
            load_series(path)


@pytest.fixture(scope="module")
def fit_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fit_run")
    cfg = dict(FIT_BASE)
    cfg["output"] = {"samples": "samples.csv"}
    path = write_json(out / "cfg.json", cfg)
    code = main(["fit", "--config", path, "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def compare_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("compare_run")
    path = write_json(out / "cfg.json", COMPARE_BASE)
    assert main(["compare", "--config", path, "--out", str(out)]) == 0
    return out


class TestFitCommand:
    def test_writes_series_report_and_samples(self, fit_run):
        assert (fit_run / "series.json").exists()
        assert (fit_run / "report.json").exists()
        assert (fit_run / "samples.csv").exists()

    def test_series_has_five_terms(self, fit_run):
        series = load_series(fit_run / "series.json")
        assert len(series) == 5

    def test_report_contains_error_metric(self, fit_run):
        report = json.loads((fit_run / "report.json").read_text())
        assert 0.0 < report["error"] < 0.5
        assert report["terms"] == 5
        assert report["requested"] == {"K_r": "analytic", "K_i": 4}
        assert report["fit"]["K_effective"] == 5

    def test_samples_csv_parses_with_correct_length(self, fit_run):
        rows = list(csv.DictReader(open(fit_run / "samples.csv")))
        assert len(rows) == 2 * 200 + 1
        assert set(rows[0]) == {"t", "c_real", "c_imag"}
        # C(0) = integral of J*f / pi = delta*W/2 for this bath
        assert float(rows[0]["c_real"]) == pytest.approx(5.0, rel=1e-6)

    def test_emitted_series_reloads_byte_identically(self, fit_run):
        text = (fit_run / "series.json").read_text()
        series = load_series(fit_run / "series.json")
        assert canonical_json(series_payload(series)) == text

    def test_target_error_search_records_trace(self, tmp_path):
        cfg = dict(FIT_BASE)
        cfg["fit"] = {"target_error": 0.2}
        path = write_json(tmp_path / "cfg.json", cfg)
        assert main(["fit", "--config", path, "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        trace = report["search"]["trace"]
        assert report["error"] <= 0.2
        assert trace[-1]["error"] <= 0.2
        assert all(row["error"] > 0.2 for row in trace[:-1])

    def test_semicircle_recipe_gives_fifteen_terms(self, tmp_path):
        cfg = {"density": {"kind": "semicircle", "delta": 1.0, "W": 10.0},
               "bath": {"beta": 10.0},
               "grid": {"t_cut": 80.0, "N": 300},
               "fit": {"K_r": 7, "K_i": 8}}
        path = write_json(tmp_path / "cfg.json", cfg)
        assert main(["fit", "--config", path, "--out", str(tmp_path)]) == 0
        series = load_series(tmp_path / "series.json")
        assert len(series) == 15


class TestSpectrumCommand:
    def test_analytic_series_symmetric_reference(self, tmp_path):
        series = analytic_lorentzian_real_part(Lorentzian(1.0, 10.0))
        spath = tmp_path / "s.json"
        spath.write_text(canonical_json(series_payload(series)), newline="")
        cfg = write_json(tmp_path / "cfg.json", {k: FIT_BASE[k] for k in ("density", "bath")})
        code = main(["spectrum", "--config", cfg, "--series", str(spath),
                     "--reference", "symmetric", "--out", str(tmp_path)])
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
        assert set(rows[0]) == {"omega", "c_exact", "c_fit", "abs_diff"}
        assert max(float(r["abs_diff"]) for r in rows) <= 1e-10

    def test_abs_diff_column_consistent(self, tmp_path):
        series = analytic_lorentzian_real_part(Lorentzian(1.0, 10.0))
        spath = tmp_path / "s.json"
        spath.write_text(canonical_json(series_payload(series)), newline="")
        cfg = write_json(tmp_path / "cfg.json", {"density": FIT_BASE["density"]})
        main(["spectrum", "--config", cfg, "--series", str(spath), "--out", str(tmp_path)])
        for row in list(csv.DictReader(open(tmp_path / "spectrum.csv")))[::97]:
            expect = abs(float(row["c_exact"]) - float(row["c_fit"]))
            assert float(row["abs_diff"]) == pytest.approx(expect, abs=1e-17)

    def test_semicircle_exact_column_zero_outside_support(self, tmp_path):
        series = analytic_lorentzian_real_part(Lorentzian(1.0, 10.0))
        spath = tmp_path / "s.json"
        spath.write_text(canonical_json(series_payload(series)), newline="")
        cfg = write_json(tmp_path / "cfg.json", {
            "density": {"kind": "semicircle", "delta": 1.0, "W": 10.0},
            "bath": {"beta": 10.0},
            "error_grid": {"omega_max": 15.0},
        })
        main(["spectrum", "--config", cfg, "--series", str(spath), "--out", str(tmp_path)])
        rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
        outside = [r for r in rows if abs(float(r["omega"])) > 10.0]
        assert outside
        assert all(r["c_exact"] == "0.0000000000000000e+00" for r in outside)

    def test_missing_series_file_is_config_error(self, tmp_path):
        cfg = write_json(tmp_path / "cfg.json", {})
        code = main(["spectrum", "--config", cfg,
                     "--series", str(tmp_path / "none.json"), "--out", str(tmp_path)])
        assert code == 2


class TestCompareCommand:
    def test_table_has_both_methods(self, compare_run):
        rows = list(csv.DictReader(open(compare_run / "compare_table.csv")))
        methods = {r["method"] for r in rows}
        assert methods == {"pfd", "psd"}
        assert len([r for r in rows if r["method"] == "pfd"]) == 3
        assert len([r for r in rows if r["method"] == "psd"]) == 3

    def test_summary_contains_matched_ratio(self, compare_run):
        summary = json.loads((compare_run / "compare_summary.json").read_text())
        case = summary["cases"][0]
        assert case["beta"] == 10.0
        assert case["pfd_terms"] == 4
        if case["ratio"] is not None:
            assert case["ratio"] == case["psd_terms"] / case["pfd_terms"]

    def test_single_method_run_omits_summary(self, tmp_path):
        cfg = json.loads(json.dumps(COMPARE_BASE))
        cfg["compare"]["methods"] = ["pfd"]
        del cfg["compare"]["cases"][0]["anchor_terms"]
        path = write_json(tmp_path / "cfg.json", cfg)
        assert main(["compare", "--config", path, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "compare_table.csv").exists()
        assert not (tmp_path / "compare_summary.json").exists()

    def test_singleton_k_range_gives_one_row(self, tmp_path):
        cfg = json.loads(json.dumps(COMPARE_BASE))
        cfg["compare"]["methods"] = ["pfd"]
        cfg["compare"]["cases"][0]["K_range"] = [3, 3]
        del cfg["compare"]["cases"][0]["anchor_terms"]
        path = write_json(tmp_path / "cfg.json", cfg)
        assert main(["compare", "--config", path, "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(open(tmp_path / "compare_table.csv")))
        assert len(rows) == 1
        assert rows[0]["method"] == "pfd"


class TestCostCommand:
    def test_reference_count(self, capsys):
        assert main(["cost", "--K", "5", "--L", "6"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_ado"] == 60459
        assert payload["K_tilde"] == 20

    def test_depth_one_equals_k_tilde(self, capsys):
        assert main(["cost", "--K", "7", "--N-alpha", "1", "--N-u", "1", "--L", "1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_ado"] == payload["K_tilde"] == 14

    def test_comparison_ratio_rounded(self, capsys):
        assert main(["cost", "--K", "5", "--L", "6", "--K2", "20", "--L2", "6"]) == 0
        payload = json.loads(capsys.readouterr().out)
        comp = payload["comparison"]
        ratio = Fraction(comp["ratio"]["numerator"], comp["ratio"]["denominator"])
        assert ratio == Fraction(60459, comp["n_ado2"])
        assert comp["ratio_sig3"] == "1.85e-04"

    def test_half_comparison_rejected(self, capsys):
        assert main(["cost", "--K", "5", "--L", "6", "--K2", "20"]) == 2

    def test_non_integer_k_exits_two(self):
        result = run_cli(["cost", "--K", "1.5", "--L", "6"])
        assert result.returncode == 2

    def test_sig3_rounding(self):
        assert _sig3(Fraction(1, 3)) == "3.33e-01"
        assert _sig3(Fraction(9999, 10000)) == "1.00e+00"
        assert _sig3(Fraction(1845, 10_000_000)) == "1.84e-04"  # ties to even
        assert _sig3(Fraction(1855, 10_000_000)) == "1.86e-04"
        assert _sig3(Fraction(1, 1)) == "1.00e+00"


class TestExitCodesAndDeterminism:
    def test_unknown_key_exits_two_with_error_json(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"densty": {}})
        result = run_cli(["fit", "--config", path, "--out", str(tmp_path)])
        assert result.returncode == 2
        err = json.loads(result.stderr)["error"]
        assert err["code"] == 2
        assert "unknown keys" in err["message"]

    def test_unreachable_target_exits_three_with_estimate(self, tmp_path):
        cfg = dict(FIT_BASE)
        cfg["fit"] = {"target_error": 1e-12, "max_terms": 3}
        path = write_json(tmp_path / "c.json", cfg)
        result = run_cli(["fit", "--config", path, "--out", str(tmp_path)])
        assert result.returncode == 3
        err = json.loads(result.stderr)["error"]
        assert err["type"] == "AccuracyError"
        assert 0.0 < err["estimate"] < 1.0

    def test_unsupported_combination_exits_four(self, tmp_path):
        cfg = {"density": {"kind": "lorentzian"},
               "bath": {"beta": 10.0, "statistics": "bosonic"},
               "compare": {"methods": ["psd"], "cases": [
                   {"beta": 10.0, "t_cut": 40.0, "N": 50, "P_range": [2, 3]},
               ]}}
        path = write_json(tmp_path / "c.json", cfg)
        result = run_cli(["compare", "--config", path, "--out", str(tmp_path)])
        assert result.returncode == 4
        assert json.loads(result.stderr)["error"]["type"] == "UnsupportedDensityError"

    def test_zero_threads_exits_two(self, tmp_path):
        result = run_cli(["selftest", "--threads", "0"])
        assert result.returncode == 2

    def test_thread_env_variable_accepted(self, tmp_path, monkeypatch):
        path = write_json(tmp_path / "c.json", COMPARE_BASE)
        import os
        env = dict(os.environ, PRONY_BATH_THREADS="2")
        result = run_cli(["compare", "--config", path, "--out", str(tmp_path)], env=env)
        assert result.returncode == 0

    def test_compare_outputs_are_byte_identical_across_runs(self, tmp_path):
        path = write_json(tmp_path / "c.json", COMPARE_BASE)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = run_cli(["compare", "--config", path, "--out", str(out)])
            assert result.returncode == 0
            outs.append(out)
        table_a = (outs[0] / "compare_table.csv").read_bytes()
        table_b = (outs[1] / "compare_table.csv").read_bytes()
        assert table_a == table_b
        summary_a = (outs[0] / "compare_summary.json").read_bytes()
        summary_b = (outs[1] / "compare_summary.json").read_bytes()
        assert summary_a == summary_b

    def test_selftest_passes(self):
        result = run_cli(["selftest", "--seed", "7"])
        assert result.returncode == 0
        assert "0 failed" in result.stdout


class TestCsvFormat:
    def test_scientific_seventeen_digits(self):
        assert fmt_float(np.pi) == "3.1415926535897931e+00"
        assert fmt_float(-1.0) == "-1.0000000000000000e+00"

    def test_crlf_line_endings(self, tmp_path):
        from prony_bath.cli import write_csv
        write_csv(tmp_path / "x.csv", ["a", "b"], [["1", "2"]])
        raw = (tmp_path / "x.csv").read_bytes()
        assert raw == b"a,b\r\n1,2\r\n"
