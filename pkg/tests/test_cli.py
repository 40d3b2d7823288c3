from __future__ import annotations

import json
import shutil

import pytest

from svrobust.artifacts import (
    RunArtifact,
    SchemaError,
    read_json,
    schema_kind,
    validate_csv,
    validate_file,
    validate_json,
    write_json,
)
from svrobust.cli import EXIT_INPUT, EXIT_OK, EXIT_RUN, main

TOY_SPEC = {
    "model": "heston",
    "params": {"v0": 0.04, "kappa": 1.5, "theta": 0.04, "sigma": 0.3, "rho": -0.6},
    "strikes": [0.9, 1.0, 1.1],
    "maturities": [0.25, 0.5, 1.0],
    "spot": 100.0,
    "rate": 0.02,
    "seed": 0,
}


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth-gen -> calibrate -> bootstrap-run -> robustness-report -> mc-filter on a toy Heston spec."""
    root = tmp_path_factory.mktemp("pipeline")
    spec = root / "spec.json"
    write_json(spec, TOY_SPEC)
    dirs = {name: root / name for name in ("synth", "cal", "boot", "robust", "filter")}
    codes = {
        "synth": run_cli("synth-gen", "--spec", spec, "--out", dirs["synth"]),
        "cal": run_cli("calibrate", "--model", "heston", "--surface", dirs["synth"] / "quotes.csv",
                       "--budget", 500, "--seed", 1, "--out", dirs["cal"]),
        "boot": run_cli("bootstrap-run", "--model", "heston", "--surface", dirs["synth"] / "quotes.csv",
                        "--trials", 8, "--budget", 500, "--seed", 11, "--out", dirs["boot"]),
    }
    codes["robust"] = run_cli("robustness-report", dirs["boot"], "--out", dirs["robust"])
    codes["filter"] = run_cli("mc-filter", dirs["boot"], "--param", "kappa", "--out", dirs["filter"])
    return root, dirs, codes


class TestPipeline:
    def test_all_steps_succeed(self, pipeline):
        _, _, codes = pipeline
        assert codes == {k: EXIT_OK for k in codes}

    def test_expected_outputs(self, pipeline):
        _, dirs, _ = pipeline
        names = {k: sorted(p.name for p in d.iterdir()) for k, d in dirs.items()}
        assert names["synth"] == ["meta.json", "quotes.csv", "run.json"]
        assert names["cal"] == ["calibration.json", "run.json"]
        assert names["boot"] == ["bootstrap_run.json", "run.json", "trials.csv"]
        assert {"dispersion.csv", "scatter.json", "correlations.csv", "bubbles.csv", "qn_kappa.csv"} <= set(
            names["robust"])
        assert names["filter"] == ["ecdf_kappa.csv", "filter_report.json", "run.json"]

    def test_every_output_schema_valid(self, pipeline):
        _, dirs, _ = pipeline
        kinds = set()
        for d in dirs.values():
            for path in d.iterdir():
                kinds.add(validate_file(path))
        assert {"run", "meta", "quotes", "calibration", "bootstrap_run", "trials", "dispersion", "scatter",
                "correlations", "qn", "bubbles", "filter_report", "ecdf"} <= kinds

    def test_trials_csv_columns(self, pipeline):
        _, dirs, _ = pipeline
        header = (dirs["boot"] / "trials.csv").read_text().splitlines()[0]
        assert header == "trial,v0,kappa,theta,sigma,rho,fval,aare"
        assert validate_csv(dirs["boot"] / "trials.csv", "trials") == 8

    def test_filter_groups(self, pipeline):
        _, dirs, _ = pipeline
        report = read_json(dirs["filter"] / "filter_report.json")
        assert report["sizes"] == {"behavioural": 3, "non_behavioural": 3, "grey": 2}

    def test_run_artifact_records_config_and_digests(self, pipeline):
        _, dirs, _ = pipeline
        art = RunArtifact.read(dirs["boot"] / "run.json")
        assert art.command == "bootstrap-run"
        assert art.config["trials"] == 8 and art.config["seed"] == 11 and art.config["budget"] == 500
        assert set(art.inputs) == {"surface", "meta"}
        assert set(art.outputs) == {"bootstrap_run", "trials"}

    @pytest.mark.parametrize("step", ["synth", "cal", "boot", "robust", "filter"])
    def test_replay_bit_exact(self, pipeline, step, tmp_path):
        _, dirs, _ = pipeline
        assert run_cli("replay", dirs[step], "--out", tmp_path / "again") == EXIT_OK
        for name, ref in RunArtifact.read(dirs[step] / "run.json").outputs.items():
            assert (tmp_path / "again" / ref["path"]).read_bytes() == (dirs[step] / ref["path"]).read_bytes()

    def test_replay_independent_of_workers(self, pipeline, tmp_path):
        _, dirs, _ = pipeline
        assert run_cli("replay", dirs["boot"], "--out", tmp_path / "w2", "--workers", 2) == EXIT_OK

    def test_replay_detects_changed_input(self, pipeline, tmp_path):
        _, dirs, _ = pipeline
        copy = tmp_path / "synth"
        shutil.copytree(dirs["synth"], copy)
        code = run_cli("calibrate", "--model", "heston", "--surface", copy / "quotes.csv", "--budget", 500,
                       "--out", tmp_path / "cal")
        assert code == EXIT_OK
        with (copy / "quotes.csv").open("a") as fh:
            fh.write("120,2,0.5,0.6\n")
        assert run_cli("replay", tmp_path / "cal", "--out", tmp_path / "again") == EXIT_INPUT

    def test_replay_detects_changed_output(self, pipeline, tmp_path):
        _, dirs, _ = pipeline
        tampered = tmp_path / "cal"
        shutil.copytree(dirs["cal"], tampered)
        data = read_json(tampered / "run.json")
        data["outputs"]["calibration"]["sha256"] = "0" * 64
        write_json(tampered / "run.json", data)
        assert run_cli("replay", tampered, "--out", tmp_path / "again") == EXIT_RUN


class TestErrors:
    def test_missing_surface(self, tmp_path, caplog):
        missing = tmp_path / "nope.csv"
        assert run_cli("calibrate", "--model", "heston", "--surface", missing, "--out", tmp_path / "o") == EXIT_INPUT
        assert str(missing) in caplog.text

    def test_unknown_flag(self, capsys):
        assert run_cli("calibrate", "--model", "heston", "--frobnicate") == EXIT_INPUT
        assert "usage" in capsys.readouterr().err

    def test_unknown_command(self, capsys):
        assert run_cli("explode") == EXIT_INPUT
        assert "usage" in capsys.readouterr().err

    def test_bad_model(self):
        assert run_cli("price", "--model", "sabr", "--params", "{}", "--spot", 100, "--strike", 100,
                       "--maturity", 1) == EXIT_INPUT

    def test_bad_bounds_json(self, pipeline, tmp_path):
        _, dirs, _ = pipeline
        code = run_cli("calibrate", "--model", "heston", "--surface", dirs["synth"] / "quotes.csv",
                       "--bounds", "{not json", "--out", tmp_path)
        assert code == EXIT_INPUT

    def test_out_of_bounds_params(self):
        params = json.dumps({"v0": 0.04, "kappa": 1.5, "theta": 0.04, "sigma": 0.3, "rho": -2.0})
        assert run_cli("price", "--model", "heston", "--params", params, "--spot", 100, "--strike", 100,
                       "--maturity", 1) == EXIT_INPUT

    def test_budget_below_floor(self, pipeline, tmp_path):
        _, dirs, _ = pipeline
        code = run_cli("calibrate", "--model", "heston", "--surface", dirs["synth"] / "quotes.csv",
                       "--budget", 10, "--out", tmp_path)
        assert code == EXIT_INPUT

    def test_pricing_failure_is_run_error(self, tmp_path):
        params = json.dumps({"v0": 0.0, "kappa": 0.0, "theta": 0.0, "sigma": 0.0, "rho": 0.0})
        assert run_cli("price", "--model", "heston", "--params", params, "--spot", 100, "--strike", 100,
                       "--maturity", 1) == EXIT_RUN


class TestPrice:
    def test_prints_json(self, capsys, tmp_path):
        params = json.dumps({"v0": 0.04, "kappa": 1.5, "theta": 0.04, "sigma": 0.3, "rho": -0.6})
        code = run_cli("price", "--model", "heston", "--params", params, "--spot", 100, "--strike", 100,
                       "--maturity", 1, "--rate", 0.02, "--out", tmp_path)
        assert code == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["model"] == "heston" and 5 < out["price"] < 15
        validate_file(tmp_path / "price.json")


class TestSchemas:
    def test_rejects_bad_calibration(self):
        with pytest.raises(SchemaError):
            validate_json({"model": "heston"}, "calibration")

    def test_csv_header_mismatch(self, tmp_path):
        path = tmp_path / "dispersion.csv"
        path.write_text("j,K\n0,100\n")
        with pytest.raises(SchemaError, match="header"):
            validate_csv(path, "dispersion")

    def test_csv_negative_bre(self, tmp_path):
        path = tmp_path / "dispersion.csv"
        path.write_text("j,K,T,mid,Cbar,BRE,V\n0,100,1,5,5,-0.1,0\n")
        with pytest.raises(SchemaError, match="line 2"):
            validate_csv(path, "dispersion")

    def test_correlation_marker(self, tmp_path):
        path = tmp_path / "correlations.csv"
        path.write_text("param,a,b\na,1,--\nb,--,--\n")
        assert validate_csv(path, "correlations") == 2
        path.write_text("param,a\na,1.5\n")
        with pytest.raises(SchemaError):
            validate_csv(path, "correlations")

    @pytest.mark.parametrize("name, kind", [("qn_rho.csv", "qn"), ("ecdf_lambda.csv", "ecdf"),
                                            ("run.json", "run"), ("bootstrap_run.json", "bootstrap_run")])
    def test_schema_kind(self, name, kind):
        assert schema_kind(name) == kind

    def test_unknown_file(self):
        with pytest.raises(KeyError):
            schema_kind("notes.txt")
