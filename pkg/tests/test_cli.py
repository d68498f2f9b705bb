"""
Tests for TwoWell CLI
"""

from twowell.cli import build_parser, main
from twowell.utils import read_csv, read_report


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parser():
    """Test flag names and destinations"""
    args = build_parser().parse_args(["construct", "--mu", "4", "--lambda", "0.6", "--grid-L", "20"])
    assert args.command == "construct"
    assert args.mu == 4.0
    assert args.lam == 0.6
    assert args.grid_L == 20.0
    assert args.relax is None


def test_version(capsys):
    """Test --version"""
    code, out, _ = _run(capsys, "construct", "--version")
    assert code == 0
    assert "twowell 1.0.0" in out


def test_construct(tmp_path, capsys):
    """Test a small-volume construction run"""
    out = tmp_path / "a"
    code, stdout, _ = _run(capsys, "construct", "--mu", "0.25", "--grid-n", "64", "--out", str(out))
    assert code == 0
    assert "E_interface=" in stdout
    assert "E_total=" in stdout
    for name in ("construct.csv", "chi.field", "v.field", "admissibility.txt"):
        assert (out / name).exists()

    comments, header, rows = read_csv(out / "construct.csv")
    assert comments[0] == "# version=1.0.0"
    assert header[0] == "mu"
    assert rows[0][0] == "0.25"
    assert read_report(out / "admissibility.txt")["admissible"] == "true"


def test_construct_is_deterministic(tmp_path, capsys):
    """Test that repeated runs write identical files"""
    for name in ("a", "b"):
        assert _run(capsys, "construct", "--mu", "0.25", "--grid-n", "64",
                    "--out", str(tmp_path / name))[0] == 0
    for name in ("construct.csv", "chi.field", "v.field", "admissibility.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_conflicting_wells(tmp_path, capsys):
    """Test that --lambda and --nu1 exclude each other"""
    code, _, _ = _run(capsys, "construct", "--mu", "1", "--lambda", "0.5", "--nu1", "0.7",
                      "--out", str(tmp_path))
    assert code == 2


def test_missing_volume(tmp_path, capsys):
    """Test a configuration error"""
    code, _, err = _run(capsys, "construct", "--out", str(tmp_path))
    assert code == 2
    assert "[ERROR]" in err
    assert "config" in err


def test_coarse_grid(tmp_path, capsys):
    """Test the resolution exit code"""
    code, _, err = _run(capsys, "construct", "--mu", "64", "--grid-n", "16", "--out", str(tmp_path))
    assert code == 3
    assert "construction" in err


def test_sweep(tmp_path, capsys):
    """Test a small-volume sweep"""
    out = tmp_path / "sweep"
    code, stdout, _ = _run(capsys, "sweep", "--mu-min", "0.0625", "--mu-max", "1", "--points", "5",
                           "--grid-n", "64", "--out", str(out))
    assert code == 0
    first = stdout.splitlines()[0].split()
    small = float(first[0].split("=")[1])
    assert 0.45 <= small <= 0.55
    assert first[1] == "slope_large=nan"
    assert stdout.splitlines()[1].startswith("ci95_small=[")

    _, _, rows = read_csv(out / "sweep.csv")
    assert len(rows) == 5
    assert read_report(out / "fit.txt")["slope_large"] == "nan"


def test_relax(tmp_path, capsys):
    """Test a short relaxation run"""
    out = tmp_path / "relax"
    code, stdout, _ = _run(capsys, "relax", "--mu", "0.25", "--grid-n", "64", "--max-iters", "20",
                           "--out", str(out))
    assert code == 0
    assert "iterations=" in stdout
    assert (out / "v_relaxed.field").exists()
    _, header, rows = read_csv(out / "relax.csv")
    assert header == ["iteration", "E_interface", "E_elastic", "E_total"]
    assert 1 <= len(rows) <= 21


def test_rigidity(tmp_path, capsys):
    """Test probes around a small disc"""
    out = tmp_path / "rigidity"
    code, stdout, _ = _run(capsys, "rigidity", "--mu", "0.25", "--grid-n", "64", "--out", str(out))
    assert code == 0
    assert "max_length_distortion=" in stdout
    report = read_report(out / "rigidity.txt")
    assert report["lower_bound_ratio"] == "refused"
    assert "bad_set_measure" in report
    assert "C_vii" in report


def test_cover(tmp_path, capsys):
    """Test the covering run"""
    out = tmp_path / "cover"
    code, stdout, _ = _run(capsys, "cover", "--mu", "0.25", "--grid-n", "64", "--out", str(out))
    assert code == 0
    assert "balls=1" in stdout
    _, header, rows = read_csv(out / "cover.csv")
    assert header == ["i", "x1", "x2", "R", "regime", "E_local"]
    assert rows[0][4] == "area"
    assert read_report(out / "cover.txt")["covers"] == "true"


def test_config_file(tmp_path, capsys):
    """Test that config file values reach the provenance header"""
    cfg = tmp_path / "run.cfg"
    cfg.write_text("lambda=0.6\nmu=0.25\ngrid_n=64\n")
    out = tmp_path / "cfg"
    code, _, _ = _run(capsys, "construct", "--config", str(cfg), "--out", str(out))
    assert code == 0
    comments, _, _ = read_csv(out / "construct.csv")
    assert "# lambda=0.6" in comments
    assert "# grid_n=64" in comments
