import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from lptrust.cli import (
    EXIT_OK, EXIT_USAGE, RunConfig, UsageError, main, parse_suite, run,
)
from lptrust.report import COLUMNS, ReportRow, emit_report, parse_report

finite = st.floats(-1e6, 1e6, allow_nan=False)
counts = st.integers(0, 10**6)
rows = st.builds(
    ReportRow, alg=st.sampled_from(["PG", "MM", "TR-MM-SPG"]), F=finite, iter=counts,
    eps_K=finite, dF=finite, h_K=st.none() | finite, h_K_nc=st.none() | finite,
    sparsity=st.floats(0, 1), feval=counts, hess=counts, prox_lp=counts,
    time_s=st.floats(0, 1e4))


@given(st.lists(rows, min_size=1, max_size=5))
def test_csv_round_trip(rs):
    text = emit_report(rs, "csv")
    assert text.endswith("\n") and "\r" not in text
    assert parse_report(text) == rs


def test_markdown_shape():
    r = ReportRow("PG", 1.0, 3, 0.0, 0.1, None, 0.5, 0.2, 4, 0, 4, 0.01)
    md = emit_report([r], "markdown").splitlines()
    assert md[0].count("|") == len(COLUMNS) + 1
    assert "| - |" in md[2]


def test_row_validation():
    with pytest.raises(ValueError):
        ReportRow("PG", float("nan"), 1, 0, 0, None, None, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        ReportRow("PG", 1.0, -1, 0, 0, None, None, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        ReportRow("PG", 1.0, 1, 0, 0, None, None, None, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        emit_report([], "csv")
    with pytest.raises(ValueError):
        emit_report([ReportRow("PG", 1.0, 1, 0, 0, None, None, 0, 0, 0, 0, 0)], "xml")


def test_suite_parsing():
    text = """
    # two runs
    problem=s2 p=0.8 variant=pg n=16
    variant=tr-mm-spg constrained=no   # trailing comment
    """
    a, b = parse_suite(text, RunConfig(n=8))
    assert (a.problem, a.p, a.variant, a.n) == ("s2", 0.8, "pg", 16)
    assert (b.problem, b.n, b.constrained) == ("poisson", 8, False)
    for bad in ("variant=nope", "n=abc", "foo=1", "problem", "# nothing", "space=h01 variant=pg"):
        with pytest.raises(UsageError):
            parse_suite(bad)


@pytest.mark.parametrize("argv", [
    ["--variant", "nope"], ["--p", "1.5"], ["--space", "h01", "--variant", "pg"],
    ["--n", "1"], ["--suite", "/nonexistent/file"], ["--bogus"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_cli_run_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["--problem", "poisson", "--p", "0.9", "--n", "8", "--variant", "pg",
            "--variant", "tr-mm-spg"]
    assert main(argv + ["--out", str(out1)]) == EXIT_OK
    assert main(argv + ["--out", str(out2), "--jobs", "2"]) == EXIT_OK
    r1, r2 = parse_report(out1.read_text()), parse_report(out2.read_text())
    assert [r.alg for r in r1] == ["PG", "TR-MM-SPG"]
    assert all(a.same_except_time(b) for a, b in zip(r1, r2))


def test_suite_file_and_markdown(tmp_path, capsys):
    suite = tmp_path / "runs.txt"
    suite.write_text("problem=s1 space=h01 constrained=0 variant=mm n=6 max_iter=3\n")
    code = main(["--suite", str(suite), "--format", "markdown"])
    out = capsys.readouterr()
    assert code in (EXIT_OK, 3)
    assert out.out.startswith("| alg |")
    if code == 3:
        assert "did not converge" in out.err


def test_run_applies_config():
    o = run(RunConfig(problem="poisson", n=6, p=0.9, variant="pg"))
    assert o.row.alg == "PG" and o.converged


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lptrust.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "--variant" in proc.stdout
