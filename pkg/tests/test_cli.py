import csv
import json
import math
import subprocess
import sys

import pytest

from blepi.cli import emit_trace_csv, jsonable, parse_sigmas, run
from blepi.datum import builtin_datum, dump_datum, load_datum
from blepi.solver import MgResult, Status


def strip_time(report):
    return {k: v for k, v in report.items() if k != "timestamp"}


@pytest.fixture
def map_file(tmp_path):
    p = tmp_path / "targets.json"
    p.write_text(json.dumps([{"kind": "exponential"}, {"kind": "uniform"}]))
    return str(p)


class TestCommands:
    def test_validate_unbalanced(self):
        code, rep = run(["validate", "--datum", "builtin:unbalanced"])
        assert code == 0
        assert rep["result"]["balance"] == 1.0
        assert rep["artifact"] == "blepi" and rep["command"] == "validate"

    def test_solve_epi(self):
        code, rep = run(["solve", "--datum", "builtin:epi:0.3"])
        assert code == 0
        assert rep["result"]["status"] == "Converged"
        assert abs(rep["result"]["value"]) <= 1e-6

    def test_solve_unbalanced_reports_unbounded(self):
        code, rep = run(["solve", "--datum", "builtin:unbalanced"])
        assert code == 0
        assert rep["result"]["status"] == "Unbounded"
        assert rep["result"]["value"] == pytest.approx(0.5 * math.log(1e8))
        assert rep["result"]["witness"] is not None

    def test_max_iterations_exit_code(self):
        code, rep = run(["solve", "--datum", "builtin:epi:0.3", "--max-iters", "1", "--stat-tol", "1e-300", "--restarts", "0"])
        assert code == 1 and rep["result"]["status"] == "MaxIterations"

    def test_verify_gaussian(self, capsys):
        code, rep = run(["verify-gaussian", "--datum", "builtin:epi:0.5", "--sigmas", "[[1]],[[4]]", "--mg", "0"])
        assert code == 0
        assert rep["result"]["gap"] == pytest.approx(0.1115718, abs=1e-7)
        assert json.loads(capsys.readouterr().out)["result"]["gap"] == rep["result"]["gap"]

    def test_verify_gaussian_solves_mg(self):
        code, rep = run(["verify-gaussian", "--datum", "builtin:epi:0.5", "--sigmas", "[[[1]],[[1]]]"])
        assert code == 0 and abs(rep["result"]["gap"]) <= 1e-6

    def test_verify_sampled(self, map_file):
        code, rep = run(["verify-sampled", "--datum", "builtin:epi:0.5", "--targets", map_file, "--samples", "4000", "--mg", "0"])
        assert code == 0 and rep["result"]["passed"]

    def test_lemma1_and_audit(self, map_file):
        for cmd in ("lemma1", "audit"):
            code, rep = run([cmd, "--datum", "builtin:zamir_feder:[[1,1]]", "--targets", map_file, "--samples", "4000"])
            assert code in (0, 1) and rep["command"] == cmd
            assert "passed" in rep["result"]


class TestTraceCsv:
    def read(self, path):
        with open(path, newline="") as fh:
            return list(csv.reader(fh))

    def test_identity_trace(self, tmp_path):
        p = tmp_path / "t.csv"
        code, _ = run(["solve", "--datum", "builtin:identity:3", "--trace-csv", str(p)])
        rows = self.read(p)
        assert code == 0 and rows[0] == ["iteration", "objective", "stationarity"]
        assert 2 <= len(rows) <= 10

    def test_epi_trace_matches_value(self, tmp_path):
        p = tmp_path / "t.csv"
        code, rep = run(["solve", "--datum", "builtin:epi:0.25", "--trace-csv", str(p)])
        rows = self.read(p)[1:]
        assert abs(float(rows[-1][1]) - rep["result"]["value"]) <= 1e-6
        values = [float(r[1]) for r in rows]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_seventeen_digits_round_trip(self, tmp_path):
        res = MgResult(Status.CONVERGED, 1 / 3, None, 0.0, [(0, 1 / 3, 2 / 7)])
        p = tmp_path / "t.csv"
        emit_trace_csv(res, p)
        row = self.read(p)[1]
        assert float(row[1]) == 1 / 3 and float(row[2]) == 2 / 7

    def test_empty_trace(self, tmp_path):
        with pytest.raises(ValueError):
            emit_trace_csv(MgResult(Status.CONVERGED, 0.0, None, 0.0, []), tmp_path / "t.csv")


class TestReproducibility:
    def test_dump_datum_round_trip(self, tmp_path):
        d = builtin_datum("zamir_feder", [[0.1, 0.7, 1 / 3], [2.0, -1.1, 0.3]])
        src = tmp_path / "d.json"
        src.write_text(dump_datum(d))
        _, rep = run(["validate", "--datum", str(src), "--dump-datum"])
        again = tmp_path / "again.json"
        again.write_text(json.dumps(rep["datum"]))
        assert load_datum(again) == d

    def test_identical_reports(self, map_file):
        argv = ["verify-sampled", "--datum", "builtin:epi:0.5", "--targets", map_file, "--samples", "3000", "--seed", "7"]
        assert strip_time(run(argv)[1]) == strip_time(run(argv)[1])

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, rep = run(["solve", "--datum", "builtin:epi:0.5", "--out", str(out)])
        assert code == 0 and capsys.readouterr().out == ""
        assert json.loads(out.read_text()) == rep


class TestInputErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["solve"],
            ["solve", "--datum", "/nonexistent/datum.json"],
            ["solve", "--datum", "builtin:nope"],
            ["solve", "--datum", "builtin:epi:0.5", "--bogus"],
            ["verify-gaussian", "--datum", "builtin:epi:0.5", "--sigmas", "[[1]],[["],
            ["verify-gaussian", "--datum", "builtin:unbalanced", "--sigmas", "[[1]]", "--mg", "0"],
            ["lemma1", "--datum", "builtin:epi:0.5"],
            ["frobnicate"],
        ],
    )
    def test_exit_two(self, argv, capsys):
        code, rep = run(argv)
        assert code == 2 and rep is None

    def test_unwritable_output(self, tmp_path):
        code, _ = run(["solve", "--datum", "builtin:epi:0.5", "--out", str(tmp_path / "no" / "such" / "r.json")])
        assert code == 2

    def test_bad_datum_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"r": [1], "c": [1], "d": [1], "maps": [[[1.0]]], "extra": 1}')
        assert run(["validate", "--datum", str(p)])[0] == 2


class TestHelpers:
    def test_parse_sigmas_forms(self):
        assert parse_sigmas("[[1]],[[4]]") == [[[1]], [[4]]]
        assert parse_sigmas("[[[1]],[[4]]]") == [[[1]], [[4]]]
        assert parse_sigmas("[[1, 0], [0, 2]]") == [[[1, 0], [0, 2]]]

    def test_jsonable(self):
        import numpy as np

        doc = jsonable({"a": np.float64(math.inf), "b": np.arange(2), "c": (np.bool_(True), -math.inf)})
        assert doc == {"a": "inf", "b": [0, 1], "c": [True, "-inf"]}
        json.dumps(doc, allow_nan=False)

    def test_console_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "blepi", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and "0.1.0" in out.stdout
