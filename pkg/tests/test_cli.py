import numpy as np
import pytest

from dictse.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

SMALL = """
output_dir = "out"
[[rods]]
material = "Ti"
n_offsets = 16
[[rods]]
material = "Al"
radius = 2.0
n_offsets = 16
[[rods]]
material = "Mg"
radius = 3.0
n_offsets = 16
[dictionary]
filters = [{ material = "Al", start = 0.1, stop = 3.1, step = 1.0 }]
scintillator = { material = "LuAG", start = 0.025, stop = 0.095, step = 0.035 }
[truth]
atoms = ["Al:0.1:0.025", "Al:3.1:0.095"]
weights = [0.5, 0.5]
[lsse]
iterations = 50
"""


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text(SMALL)
    return p


def test_full_pipeline(config_file, tmp_path, capsys):
    cfg = ["--config", str(config_file)]
    assert main(cfg + ["simulate"]) == EXIT_OK
    assert (tmp_path / "out" / "datasets" / "Ti" / "transmission.csv").is_file()
    assert main(cfg + ["build-dict"]) == EXIT_OK
    assert (tmp_path / "out" / "dictionary.csv").read_text().startswith("bin_lo_keV,bin_hi_keV,Al:")
    assert main(cfg + ["estimate"]) == EXIT_OK
    assert main(cfg + ["estimate", "--method", "lsse", "--materials", "Ti,Al"]) == EXIT_OK
    x = np.loadtxt(tmp_path / "out" / "estimate" / "lsse_spectrum.csv", delimiter=",", skiprows=1)
    assert x[:, 2].sum() == pytest.approx(1.0, abs=1e-9)
    assert main(cfg + ["trace"]) == EXIT_OK
    assert (tmp_path / "out" / "trace.csv").read_text().startswith("iter,k_star")
    assert main(cfg + ["crossval"]) == EXIT_OK
    assert "case 3" in capsys.readouterr().out


def test_crossval_is_byte_identical(config_file, tmp_path):
    runs = []
    for name in ("a", "b"):
        args = ["--config", str(config_file), "--seed", "7", "--out", str(tmp_path / name)]
        assert main(args + ["simulate"]) == EXIT_OK
        assert main(args + ["crossval"]) == EXIT_OK
        runs.append((tmp_path / name / "crossval" / "report.csv").read_bytes())
    assert runs[0] == runs[1]


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("noise_sd = -1\n")
    assert main(["--config", str(p), "simulate"]) == EXIT_CONFIG
    p.write_text("not toml [[[")
    assert main(["--config", str(p), "simulate"]) == EXIT_CONFIG


def test_missing_config_is_io_error(tmp_path):
    assert main(["--config", str(tmp_path / "nope.toml"), "simulate"]) == EXIT_IO


def test_missing_datasets(config_file, tmp_path):
    args = ["--config", str(config_file), "--out", str(tmp_path / "empty")]
    assert main(args + ["estimate"]) == EXIT_IO


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
