import hashlib
import json
import os
import subprocess
import sys

import pytest

from fclmqc.cli import main, read_config_file
from fclmqc.errors import FormatError


def run(*argv):
    return main([str(a) for a in argv])


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


@pytest.fixture
def instance(tmp_path):
    assert run("generate", "--c", 2, "--alpha", 0.2, "--seed", 4, "--out", tmp_path / "gen") == 0
    return tmp_path / "gen" / "instance.txt"


@pytest.fixture
def samples(tmp_path, instance):
    out = tmp_path / "smp"
    assert run("sample", "--problem", instance, "--samples", 64, "--sweeps", 2, "--out", out) == 0
    return out / "samples.txt"


class TestGenerate:
    def test_writes_instance_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "g"
        assert run("generate", "--type", 1, "--c", 16, "--alpha", 0.1, "--r", "inf", "--out", out) == 0
        assert "2048 qubits" in capsys.readouterr().out
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "generate" and manifest["config"]["r_limit"] == "inf"
        assert manifest["outputs"]["instance.txt"] == sha(out / "instance.txt")
        assert manifest["master_seed"] == 0 and "version" in manifest

    def test_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            assert run("generate", "--c", 4, "--alpha", 0.3, "--seed", 8, "--out", tmp_path / name) == 0
        assert (tmp_path / "a" / "instance.txt").read_bytes() == (tmp_path / "b" / "instance.txt").read_bytes()
        manifests = [json.loads((tmp_path / d / "manifest.json").read_text()) for d in "ab"]
        for m in manifests:
            del m["config"]["out"]  # the only intended difference
        assert manifests[0] == manifests[1]

    @pytest.mark.parametrize("argv", [["--c", 0], ["--type", 3], ["--alpha", -1], ["--r", 0], ["--bogus"]])
    def test_usage_errors(self, tmp_path, argv):
        with pytest.raises(SystemExit) as exc:
            run("generate", *argv, "--out", tmp_path)
        assert exc.value.code == 1

    def test_unsatisfiable(self, tmp_path, capsys):
        assert run("generate", "--type", 2, "--c", 1, "--out", tmp_path) == 3
        assert "two cells" in capsys.readouterr().err

    def test_generation_failure(self, tmp_path, capsys):
        assert run("generate", "--c", 2, "--alpha", 3, "--r", 1, "--out", tmp_path) == 3
        assert "loops accepted" in capsys.readouterr().err

    def test_env_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FCLMQC_OUT", str(tmp_path / "root"))
        assert run("generate", "--c", 1) == 0
        assert (tmp_path / "root" / "generate" / "instance.txt").exists()


class TestSampleReduceCurve:
    @pytest.mark.parametrize("sampler", ["anneal", "random"])
    def test_sample(self, tmp_path, instance, sampler):
        out = tmp_path / sampler
        assert run("sample", "--problem", instance, "--sampler", sampler, "--samples", 16, "--out", out) == 0
        lines = (out / "samples.txt").read_text().splitlines()
        assert lines[0].startswith("# problem ") and f"source {sampler}" in lines[0]
        assert len([line for line in lines if not line.startswith("#")]) == 16
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["inputs"] == {str(instance): sha(instance)}

    def test_sample_file_passthrough(self, tmp_path, instance, samples):
        out = tmp_path / "ing"
        assert run("sample", "--problem", instance, "--sampler", "file", "--input", samples, "--out", out) == 0
        body = [line for line in (out / "samples.txt").read_text().splitlines() if not line.startswith("#")]
        assert body == [line for line in samples.read_text().splitlines() if not line.startswith("#")]

    def test_sample_file_needs_input(self, tmp_path, instance):
        assert run("sample", "--problem", instance, "--sampler", "file", "--out", tmp_path) == 1

    def test_reduce_with_trace(self, tmp_path, instance, samples, capsys):
        out = tmp_path / "red"
        assert run("mqc-reduce", "--problem", instance, "--samples", samples, "--trace", "--out", out) == 0
        assert "reduced 64 samples" in capsys.readouterr().out
        trace = (out / "trace.csv").read_text().splitlines()
        assert trace[0] == "level,node,energy" and len(trace) == 1 + 127
        assert len((out / "reduced.txt").read_text().splitlines()) == 3

    def test_curve(self, tmp_path, instance, samples):
        out = tmp_path / "cur"
        assert run("curve", "--problem", instance, "--samples", samples, "--out", out) == 0
        lines = (out / "curve.csv").read_text().splitlines()
        assert "log2_size,raw_prob,mqc_prob" in lines and len(lines) == 2 + 1 + 7

    def test_stale_samples(self, tmp_path, samples, capsys):
        run("generate", "--c", 2, "--alpha", 0.2, "--seed", 5, "--out", tmp_path / "other")
        other = tmp_path / "other" / "instance.txt"
        assert run("mqc-reduce", "--problem", other, "--samples", samples, "--out", tmp_path / "x") == 2
        assert "does not match" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("curve", "--problem", tmp_path / "nope.txt", "--samples", tmp_path / "n", "--out", tmp_path) == 2

    def test_malformed_samples(self, tmp_path, instance, samples, capsys):
        bad = tmp_path / "bad.txt"
        text = samples.read_text().splitlines()
        text[3] = text[3].replace("-1", "0", 1).replace(" 1", " 0", 1)
        bad.write_text("\n".join(text) + "\n")
        assert run("curve", "--problem", instance, "--samples", bad, "--out", tmp_path / "c") == 2
        assert ":4:" in capsys.readouterr().err


class TestSurveyReport:
    def test_config_file_and_flag_override(self, tmp_path):
        cfg = tmp_path / "survey.cfg"
        cfg.write_text("# small grid\nc = 2\nalpha=0.1,0.2\nr=inf\ncases=2\nsamples=32\nsweeps=1\njobs=1\n")
        out = tmp_path / "sv"
        assert run("survey", "--config", cfg, "--cases", 1, "--out", out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["cases"] == 1 and manifest["config"]["sweeps"] == 1
        assert "cases=1" in manifest["grid"] and "sweeps=1" in manifest["sampler"]
        rows = [line for line in (out / "survey.csv").read_text().splitlines() if not line.startswith("#")]
        assert len(rows) == 1 + 2

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour=blue\n")
        with pytest.raises(SystemExit) as exc:
            run("survey", "--config", cfg)
        assert exc.value.code == 1

    def test_config_parser(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("--beta-start = 0.2  # comment\n\nrandom_order=yes\n")
        assert read_config_file(cfg) == {"beta_start": "0.2", "random_order": "yes"}
        cfg.write_text("novalue\n")
        with pytest.raises(FormatError):
            read_config_file(cfg)

    def test_paper_preset_echoed(self, tmp_path, monkeypatch):
        import fclmqc.cli as cli
        seen = {}

        def fake_run_survey(grid, sampler, seed, out, jobs, progress):
            seen["grid"] = grid
            return []
        monkeypatch.setattr(cli, "run_survey", fake_run_survey)
        for name in ("cases.csv", "survey.csv"):
            (tmp_path / name).write_text("")
        assert run("survey", "--preset", "paper", "--out", tmp_path) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "R=2,3,inf" in manifest["grid"] and "cases=100 samples=8192" in manifest["grid"]
        assert seen["grid"].c_values == tuple(range(2, 17))

    def test_report(self, tmp_path, capsys):
        sv = tmp_path / "sv"
        assert run("survey", "--c", 2, "--alpha", 0.1, "--r", "2,inf", "--cases", 3, "--samples", 64,
                   "--sweeps", 1, "--jobs", 1, "--out", sv) == 0
        capsys.readouterr()
        rep = tmp_path / "rep"
        assert run("report", sv, "--out", rep) == 0
        text = capsys.readouterr().out
        assert "cases: 6" in text and "raw unsolved" in text
        assert (rep / "survey.csv").read_text().splitlines()[-1] == (sv / "survey.csv").read_text().splitlines()[-1]

    def test_report_empty(self, tmp_path, capsys):
        empty = tmp_path / "cases.csv"
        empty.write_text("case_id,r,c,alpha,seed,ground_energy,raw_sts_log2,mqc_sts_log2,type,raw_half_log2,"
                         "mqc_half_log2,num_loops,status\n")
        assert run("report", empty, "--out", tmp_path / "rep") == 0
        assert "warning" in capsys.readouterr().err

    def test_report_missing(self, tmp_path):
        assert run("report", tmp_path / "nothing", "--out", tmp_path / "rep") == 2


class TestMisc:
    def test_export_graph(self, tmp_path):
        assert run("export-graph", "--c", 2, "--cols", 3, "--out", tmp_path) == 0
        lines = (tmp_path / "chimera_2x3.txt").read_text().splitlines()
        assert len(lines) == 6 * 16 + 4 * 3 + 4 * 2 * 2

    def test_initial_test(self, tmp_path, capsys):
        assert run("initial-test", "--c", 2, "--alpha", "0.1,0.3", "--cases", 1, "--samples", 64,
                   "--sweeps", 1, "--out", tmp_path) == 0
        names = os.listdir(tmp_path)
        assert sum(n.startswith("curve_") for n in names) == 2 and "cases.csv" in names
        assert capsys.readouterr().out.count("raw_sts_log2") == 2

    def test_console_script_exit_code(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "fclmqc.cli", "generate", "--c", "0"],
                              capture_output=True, text=True)
        assert proc.returncode == 1 and "usage" in proc.stderr

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("--version")
        assert exc.value.code == 0 and "fclmqc" in capsys.readouterr().out
