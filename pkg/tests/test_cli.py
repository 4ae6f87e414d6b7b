import json

import numpy as np
import pytest

from nilmsrc.cli import main
from nilmsrc.dataset import ingest_csv
from nilmsrc.classifier import load_model


def write_config(tmp_path, out_dir, extra="", name="exp.conf"):
    text = (
        "# small synthetic household\n"
        "synth.num_appliances = 3\n"
        "synth.rated_powers = 100,400,1600\n"
        "synth.on_to_on = 0.9\n"
        "synth.off_to_off = 0.85\n"
        "synth.noise_std = 0.5\n"
        "synth.duration_hours = 60\n"
        "seed = 0\n"
        f"out = {out_dir}\n"
    ) + extra
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestSynth:
    def test_writes_ingestable_csv(self, tmp_path, capsys):
        cfg = write_config(tmp_path, tmp_path / "out")
        assert main(["synth", "--config", str(cfg)]) == 0
        path = tmp_path / "out" / "synthetic.csv"
        assert path.exists()
        house = ingest_csv(path)
        assert house.num_appliances == 3
        assert len(house.aggregate) == 60 * 6

    def test_same_seed_byte_identical(self, tmp_path):
        cfg1 = write_config(tmp_path, tmp_path / "a", name="a.conf")
        cfg2 = write_config(tmp_path, tmp_path / "b", name="b.conf")
        main(["synth", "--config", str(cfg1)])
        main(["synth", "--config", str(cfg2)])
        b1 = (tmp_path / "a" / "synthetic.csv").read_bytes()
        b2 = (tmp_path / "b" / "synthetic.csv").read_bytes()
        assert b1 == b2

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, tmp_path / "a", name="a.conf")
        main(["synth", "--config", str(cfg)])
        cfg2 = write_config(tmp_path, tmp_path / "b", name="b.conf")
        main(["synth", "--config", str(cfg2), "--seed", "99"])
        b1 = (tmp_path / "a" / "synthetic.csv").read_bytes()
        b2 = (tmp_path / "b" / "synthetic.csv").read_bytes()
        assert b1 != b2

    def test_one_hour_has_six_rows_per_trace(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out, extra="synth.duration_hours = 1\n")
        main(["synth", "--config", str(cfg)])
        lines = (out / "synthetic.csv").read_text().splitlines()
        assert len(lines) == 1 + 6  # header + six 10-minute rows


class TestFit:
    def test_model_round_trip(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        assert main(["fit", "--config", str(cfg)]) == 0
        dictionary, meta = load_model(out / "model.json")
        assert dictionary.num_classes == 3
        assert meta["appliance_names"] == ["app1", "app2", "app3"]
        assert meta["config"]["seed"] == "0"

    def test_keep_writes_window_exports(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        main(["fit", "--config", str(cfg), "--keep"])
        for name in ("train_features.csv", "train_labels.csv", "train_windows.json",
                     "test_features.csv", "test_labels.csv", "test_windows.json"):
            assert (out / name).exists()


class TestEval:
    def test_reports_and_figures_written(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        main(["fit", "--config", str(cfg)])
        assert main(["eval", "--config", str(cfg)]) == 0
        assert (out / "report.json").exists()
        assert (out / "report.txt").exists()
        assert (out / "predictions.csv").exists()
        for name in ("f1_per_appliance.png", "energy_per_appliance.png", "label_timeline.png"):
            assert (out / "figures" / name).exists()
        doc = json.loads((out / "report.json").read_text())
        assert doc["report"] == "nilmsrc-evaluation"
        assert doc["config"]["seed"] == "0"
        stdout = capsys.readouterr().out
        assert "Macro F1-measure" in stdout

    def test_eval_twice_byte_identical(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        main(["fit", "--config", str(cfg)])
        main(["eval", "--config", str(cfg)])
        first = (out / "report.json").read_bytes()
        main(["eval", "--config", str(cfg)])
        assert (out / "report.json").read_bytes() == first

    def test_window_length_mismatch_is_data_error(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        main(["fit", "--config", str(cfg)])
        cfg2 = write_config(tmp_path, out, extra="window_seconds = 7200\n")
        rc = main(["eval", "--config", str(cfg2)])
        assert rc == 2
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert doc["error"] == "DimensionMismatch"
        assert doc["exit_code"] == 2
        assert doc["stage"] == "predict"

    def test_missing_model_is_error(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        rc = main(["eval", "--config", str(cfg)])
        assert rc == 2


class TestPredict:
    def test_writes_predictions(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        main(["fit", "--config", str(cfg)])
        assert main(["predict", "--config", str(cfg)]) == 0
        lines = (out / "predictions.csv").read_text().splitlines()
        assert lines[0] == "window_start,app1,app2,app3"
        assert set(lines[1].split(",")[1:]) <= {"0", "1"}


class TestRun:
    def test_run_equals_fit_plus_eval(self, tmp_path):
        out1 = tmp_path / "separate"
        cfg1 = write_config(tmp_path, out1, name="sep.conf")
        main(["fit", "--config", str(cfg1)])
        main(["eval", "--config", str(cfg1)])
        out2 = tmp_path / "combined"
        cfg2 = write_config(tmp_path, out2, name="comb.conf")
        assert main(["run", "--config", str(cfg2)]) == 0
        # identical up to the output directory each report echoes
        doc1 = json.loads((out1 / "report.json").read_text())
        doc2 = json.loads((out2 / "report.json").read_text())
        doc1["config"].pop("out")
        doc2["config"].pop("out")
        assert doc1 == doc2
        pred1 = (out1 / "predictions.csv").read_bytes()
        pred2 = (out2 / "predictions.csv").read_bytes()
        assert pred1 == pred2

    def test_intermediates_only_with_keep(self, tmp_path):
        out = tmp_path / "nokeep"
        cfg = write_config(tmp_path, out)
        main(["run", "--config", str(cfg)])
        assert not (out / "model.json").exists()
        assert not (out / "synthetic.csv").exists()
        out2 = tmp_path / "keep"
        cfg2 = write_config(tmp_path, out2)
        main(["run", "--config", str(cfg2), "--keep"])
        assert (out2 / "model.json").exists()
        assert (out2 / "synthetic.csv").exists()
        assert (out2 / "train_features.csv").exists()

    def test_fixed_seed_byte_identical_reports(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out)
        main(["run", "--config", str(cfg)])
        first = (out / "report.json").read_bytes()
        main(["run", "--config", str(cfg)])
        assert (out / "report.json").read_bytes() == first

    def test_missing_input_file_reports_stage(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out, extra="data.csv = /nonexistent/house.csv\n")
        rc = main(["run", "--config", str(cfg)])
        assert rc == 2
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert doc["stage"] == "ingest"


class TestUsageErrors:
    def test_unknown_flag(self, capsys):
        assert main(["run", "--bogus"]) == 1
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert doc["error"] == "UsageError"
        assert doc["exit_code"] == 1

    def test_unknown_config_key(self, tmp_path, capsys):
        path = tmp_path / "bad.conf"
        path.write_text("nonsense_key = 1\n", encoding="utf-8")
        assert main(["run", "--config", str(path)]) == 1

    def test_bad_solver_choice(self, capsys):
        assert main(["run", "--solver", "magic"]) == 1

    def test_flag_overrides_file(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out, extra="tau = 2.0\n")
        main(["run", "--config", str(cfg), "--tau", "3.5"])
        doc = json.loads((out / "report.json").read_text())
        assert doc["config"]["tau"] == "3.5"


class TestNumericFailure:
    def test_zero_test_energy_exits_three(self, tmp_path, capsys):
        # appliance runs only during the training span; the test split has
        # zero ground-truth energy, so the energy error is undefined
        hours = 60
        steps = hours * 6
        lines = ["timestamp,aggregate,heater"]
        for i in range(steps):
            watts = 100.0 if i < 6 * 6 else 0.0
            lines.append(f"{i * 600},{watts + 20.0},{watts}")
        csv_path = tmp_path / "house.csv"
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "out"
        cfg = tmp_path / "exp.conf"
        cfg.write_text(f"data.csv = {csv_path}\nout = {out}\n", encoding="utf-8")
        rc = main(["run", "--config", str(cfg)])
        assert rc == 3
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert doc["error"] == "ZeroActualEnergy"
        assert doc["stage"] == "evaluate"
        assert doc["exit_code"] == 3


class TestCsvPipeline:
    def test_csv_source_end_to_end(self, tmp_path):
        src_out = tmp_path / "gen"
        gen_cfg = write_config(tmp_path, src_out)
        main(["synth", "--config", str(gen_cfg)])
        out = tmp_path / "out"
        cfg = write_config(tmp_path, out, extra=f"data.csv = {src_out / 'synthetic.csv'}\n")
        assert main(["run", "--config", str(cfg)]) == 0
        doc = json.loads((out / "report.json").read_text())
        assert [row["name"] for row in doc["per_appliance"]] == ["app1", "app2", "app3"]
