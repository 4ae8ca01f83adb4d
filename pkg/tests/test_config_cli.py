import csv
import json

import pytest

from fockwave.cli import main
from fockwave.config import (PRESETS, ConfigError, ExperimentConfig,
                             config_from_dict, dump_config, load_config)
from fockwave.experiment import compare_no_tls, run, sweep_convergence
from fockwave.pulse import PulseShape

FAST = {
    "numerics": {"dt": 0.02},
    "observables": {"n_omega": 41, "time_stride": 50},
}


def _fast(**extra):
    raw = {k: dict(v) for k, v in FAST.items()}
    for section, values in extra.items():
        if isinstance(values, dict):
            raw.setdefault(section, {}).update(values)
        else:
            raw[section] = values
    return raw


def _read_csv(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


# -- configuration -----------------------------------------------------------

def test_defaults():
    cfg = config_from_dict({})
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.numerics.dt == 0.01 and cfg.numerics.chi_max == 32
    assert cfg.numerics.cutoff_for(2) == 3
    assert cfg.observables.n_omega == 401
    assert cfg.cases() == [cfg.pulse]


@pytest.mark.parametrize("preset, expected", [
    ("fig2a", {(1, 2.0)}), ("fig2b", {(2, 2.0)}),
    ("fig2c", {(1, 2.0), (1, 0.5)}), ("fig2d", {(2, 2.0), (2, 0.5)}),
    ("fig3", {(1, 2.0), (2, 2.0)}), ("fig5", {(1, 10.0), (2, 10.0)}),
])
def test_preset_cases(preset, expected):
    cases = config_from_dict({}, preset=preset).cases()
    assert {(c.photon_number, c.t_p) for c in cases} == expected
    assert all(c.shape is PulseShape.RECTANGULAR for c in cases)
    assert all(c.carrier_detuning == 0 for c in cases)


@pytest.mark.parametrize("raw, path", [
    ({"numerics": {"dtt": 0.1}}, "numerics.dtt"),
    ({"numerics": {"dt": "small"}}, "numerics.dt"),
    ({"numerics": {"dt": -0.1}}, "numerics.dt"),
    ({"numerics": {"chi_max": 1.5}}, "numerics.chi_max"),
    ({"numerics": {"chi_max": 1}}, "numerics.chi_max"),
    ({"pulse": {"shape": "triangle"}}, "pulse.shape"),
    ({"pulse": {"photon_number": 3}}, "pulse"),
    ({"system": {"gamma": 0.0}}, "system.gamma"),
    ({"outputs": {"artifacts": ["movie"]}}, "outputs.artifacts"),
    ({"outputs": {"checkpoint": 1}}, "outputs.checkpoint"),
    ({"observables": {"omega_max": -20.0}}, "observables.omega_max"),
    ({"numerics": {"bin_cutoff": 1}, "pulse": {"photon_number": 2}},
     "numerics.bin_cutoff"),
    ({"plot": {}}, "plot"),
    ({"pulse": 3}, "pulse"),
    ({"preset": "fig9"}, "preset"),
])
def test_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert str(info.value).startswith(path)


def test_preset_conflicts():
    with pytest.raises(ConfigError, match="pulse.t_p.*contradicts"):
        config_from_dict({"pulse": {"t_p": 3.0}}, preset="fig2a")
    with pytest.raises(ConfigError, match="system.delta"):
        config_from_dict({"system": {"delta": 0.5}}, preset="fig3")
    # agreeing explicit values and free numerics are fine
    cfg = config_from_dict({"pulse": {"t_p": 0.5}, "numerics": {"dt": 0.02}},
                           preset="fig2c")
    assert cfg.numerics.dt == 0.02


def test_preset_none_clears_file_preset():
    cfg = config_from_dict({"preset": "fig2a"}, preset="none")
    assert cfg.preset is None


def test_toml_round_trip(tmp_path):
    cfg = config_from_dict(_fast(pulse={"shape": "gaussian", "t_p": 1.5,
                                        "carrier_detuning": 0.25}))
    path = tmp_path / "exp.toml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    preset = config_from_dict({}, preset="fig5")
    path.write_text(dump_config(preset))
    back = load_config(path)
    assert back.preset == "fig5" and back.cases() == preset.cases()


def test_bad_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[numerics\ndt = ")
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(path)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


# -- run / sweep / reference ---------------------------------------------------

@pytest.fixture(scope="module")
def fig2a_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2a")
    cfg = config_from_dict(_fast(), preset="fig2a")
    return run(cfg, out), out


def test_run_writes_artifacts(fig2a_run):
    outcome, out = fig2a_run
    names = {p.name for p in outcome.files}
    assert names == {"population.csv", "flux.csv", "input_spectrum.csv",
                     "stationary_spectrum.csv", "dynamical_spectrum.csv",
                     "report.json"}
    rows = _read_csv(out / "population.csv")
    assert set(rows[0]) == {"case", "photon_number", "t_p", "t", "n_mps",
                            "n_analytic"}
    err = max(abs(float(r["n_mps"]) - float(r["n_analytic"])) for r in rows)
    assert err < 5e-3
    dyn = _read_csv(out / "dynamical_spectrum.csv")
    assert {r["kind"] for r in dyn} == {"S", "I"}
    with open(out / "population.csv") as fh:
        header = fh.readline()
    assert header.startswith("# fockwave")


def test_report_schema(fig2a_run):
    outcome, out = fig2a_run
    data = json.loads((out / "report.json").read_text())
    assert data["schema_version"] == 1
    assert data["passed"] == outcome.report.passed
    for check in data["checks"]:
        assert {"name", "passed", "oracle", "simulated",
                "tolerance"} <= set(check)
    assert outcome.report.passed == all(c["passed"] for c in data["checks"])
    assert "n1_tp2" in data["metadata"]["cases"]


def test_csv_output_is_deterministic(fig2a_run, tmp_path):
    _, first = fig2a_run
    cfg = config_from_dict(_fast(), preset="fig2a")
    run(cfg, tmp_path)
    for name in ("population.csv", "flux.csv", "stationary_spectrum.csv",
                 "dynamical_spectrum.csv"):
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes()


def test_failed_budget_is_reported(tmp_path):
    raw = _fast(numerics={"chi_max": 2, "truncation_budget": 1e-14},
                pulse={"photon_number": 2, "t_p": 1.0},
                outputs={"artifacts": ["population"]})
    outcome = run(config_from_dict(raw), tmp_path)
    assert not outcome.report.passed
    failed = [c.name for c in outcome.report.checks if not c.passed]
    assert "n2_tp1/truncation_budget" in failed
    assert (tmp_path / "report.json").exists()
    assert not (tmp_path / "flux.csv").exists()


def test_sweep_dt_first_order(tmp_path):
    cfg = config_from_dict(_fast(), preset="fig2a")
    rows = sweep_convergence(cfg, "dt", [0.04, 0.02], tmp_path)
    assert rows[0]["error"] > rows[1]["error"]
    assert 1.5 <= rows[0]["error"] / rows[1]["error"] <= 2.5
    lines = _read_csv(tmp_path / "sweep_dt.csv")
    assert [float(r["dt"]) for r in lines] == [0.04, 0.02]


def test_sweep_cutoff_and_chi(tmp_path):
    cfg = config_from_dict(_fast(), preset="fig2a")
    cut = sweep_convergence(cfg, "cutoff", [1, 2])
    assert abs(cut[0]["error"] - cut[1]["error"]) < 1e-10
    chi = sweep_convergence(cfg, "chi", [2, 4, 8])
    assert chi[1]["error"] == pytest.approx(chi[2]["error"], abs=1e-12)
    assert all(r["max_bond"] <= 4 for r in chi)
    with pytest.raises(ValueError, match="monotone"):
        sweep_convergence(cfg, "dt", [0.02, 0.04, 0.01])
    with pytest.raises(ValueError, match="axis"):
        sweep_convergence(cfg, "tail", [1.0])


def test_compare_no_tls(tmp_path):
    cfg = config_from_dict(_fast(), preset="fig2a")
    outcome = compare_no_tls(cfg, tmp_path)
    checks = {c.name.split("/")[-1]: c for c in outcome.report.checks}
    assert checks["population_zero"].passed
    assert checks["input_spectrum"].passed
    rows = _read_csv(tmp_path / "population_no_tls.csv")
    assert all(float(r["n_no_tls"]) == 0 for r in rows)
    spec = _read_csv(tmp_path / "stationary_spectrum_no_tls.csv")
    assert {"S_tls", "S_no_tls", "input_spectrum"} <= set(spec[0])


# -- command line ------------------------------------------------------------

def test_cli_dump_config(capsys):
    assert main(["run", "--preset", "fig2b", "--dump-config"]) == 0
    out = capsys.readouterr().out
    assert 'preset = "fig2b"' in out
    assert "(n=2, t_p=2)" in out


def test_cli_run_with_env_override(tmp_path, monkeypatch, capsys):
    path = tmp_path / "exp.toml"
    cfg = config_from_dict(_fast(pulse={"t_p": 1.0},
                                 outputs={"artifacts": ["population"]}))
    path.write_text(dump_config(cfg))
    target = tmp_path / "from_env"
    monkeypatch.setenv("FOCKWAVE_OUT", str(target))
    assert main(["run", "--config", str(path)]) == 0
    assert (target / "population.csv").exists()
    explicit = tmp_path / "explicit"
    assert main(["run", "--config", str(path), "--out", str(explicit)]) == 0
    assert (explicit / "report.json").exists()
    assert "PASS n1_tp1/population_vs_oracle" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    assert main(["run"]) == 2
    path = tmp_path / "bad.toml"
    path.write_text("[numerics]\ndt = -1.0\n")
    assert main(["run", "--config", str(path)]) == 2
    assert "numerics.dt" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run", "--preset", "fig9"])
    assert main(["sweep", "--preset", "fig2a", "--axis", "dt",
                 "--values", "0.02,x"]) == 2


def test_cli_sweep(tmp_path, capsys):
    path = tmp_path / "exp.toml"
    path.write_text(dump_config(config_from_dict(_fast(), preset="fig2a")))
    rc = main(["sweep", "--config", str(path), "--axis", "chi",
               "--values", "4,8", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "sweep_chi_max.csv").exists()
    assert capsys.readouterr().out.startswith("setting,error")


def test_cli_validate_subset(tmp_path, capsys):
    rc = main(["validate", "--only", "A7", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert "A7" in out
    data = json.loads((tmp_path / "acceptance_report.json").read_text())
    assert len(data["checks"]) == 1
    assert data["checks"][0]["name"].startswith("A7")
    assert rc == (0 if data["passed"] else 1)


def test_all_presets_known():
    assert set(PRESETS) == {"fig2a", "fig2b", "fig2c", "fig2d", "fig3",
                            "fig5"}
