import csv

import pytest

from bqap.instance import load_instance, render_instance, write_text
from bqap.main import main


@pytest.fixture
def instance_file(tmp_path, small_instance):
    path = tmp_path / "small.dat"
    write_text(path, render_instance(small_instance))
    return path


def test_synth_writes_instance(tmp_path):
    out = tmp_path / "synth.dat"
    assert main(["synth", "--n", "6", "--correlation", "0.75", "--seed", "3", "--out", str(out)]) == 0
    assert load_instance(out).n == 6


def test_synth_rejects_bad_correlation(tmp_path):
    assert main(["synth", "--n", "6", "--correlation", "2", "--out", str(tmp_path / "x.dat")]) == 1


def test_hv(tmp_path, capsys):
    front = tmp_path / "front.txt"
    reference = tmp_path / "reference.txt"
    write_text(front, "1 2\n2 1\n")
    write_text(reference, "0 3\n3 0\n")
    assert main(["hv", "--front", str(front), "--reference-front", str(reference)]) == 0
    assert capsys.readouterr().out == "3\n"


def test_hv_missing_file(tmp_path):
    assert main(["hv", "--front", str(tmp_path / "nope"), "--reference-front", str(tmp_path / "nope")]) == 2


def test_usage_error():
    assert main(["synth", "--n", "6"]) == 1
    assert main(["no-such-command"]) == 1


def test_pareto(tmp_path, instance_file):
    out = tmp_path / "pareto.txt"
    assert main(["pareto", "--instance", str(instance_file), "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == "11 4\n"


def test_dump_cqm(instance_file, capsys):
    assert main(["dump-cqm", "--instance", str(instance_file), "--lambda1", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "var 0 0"
    assert "quad (0,0) (1,1) 17.0" in lines


def test_run(tmp_path, instance_file):
    out = tmp_path / "out"
    argv = [
        "run", "--instance", str(instance_file), "--backend", "exhaustive", "--runs", "2", "--num-weights", "3",
        "--budget-mode", "iterations", "--iterations", "100", "--seed", "1", "--out", str(out), "--no-progress",
    ]
    assert main(argv) == 0
    with open(out / "summary.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert [row[1] for row in rows[1:]] == ["uniform", "adaptive-averages", "adaptive-dichotomic"]
    assert (out / "report.json").exists()
    assert (out / "fronts" / "small.dat" / "reference.csv").exists()


def test_run_selected_methods(tmp_path, instance_file):
    out = tmp_path / "out"
    argv = [
        "run", "--instance", str(instance_file), "--method", "uniform,adaptive-dichotomic", "--backend", "exhaustive",
        "--runs", "1", "--num-weights", "2", "--budget-mode", "iterations", "--out", str(out), "--no-progress",
    ]
    assert main(argv) == 0
    assert len((out / "summary.csv").read_text(encoding="utf-8").splitlines()) == 3


def test_run_invalid_configuration(tmp_path, instance_file):
    argv = [
        "run", "--instance", str(instance_file), "--method", "adaptive-averages", "--num-weights", "1",
        "--out", str(tmp_path / "out"), "--no-progress",
    ]
    assert main(argv) == 1


def test_run_unknown_method(tmp_path, instance_file):
    assert main(["run", "--instance", str(instance_file), "--method", "chebyshev", "--out", str(tmp_path)]) == 1
