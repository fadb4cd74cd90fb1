import csv
import io
import json

import numpy as np
import pytest

from jointdiag.cli import (
    EXIT_INPUT,
    EXIT_NUMERIC,
    EXIT_OK,
    InputError,
    dumps_ensemble,
    loads_ensemble,
    main,
)
from jointdiag.ensemble_gen import circular_gaussian, generate


def _csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSerialization:
    def test_bitwise_round_trip(self, rng):
        for _ in range(10):
            A = circular_gaussian(rng, (3, 4, 4)) * 10.0 ** rng.uniform(-300, 300)
            back = loads_ensemble(dumps_ensemble(A))
            np.testing.assert_array_equal(back.matrices, A)

    @pytest.mark.parametrize("text", [
        "not json",
        '{"n": 2, "k": 1}',
        '{"n": 2, "k": 2, "matrices": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}',
        '{"n": 3, "k": 1, "matrices": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}',
        '{"n": 1, "k": 1, "matrices": [[[["a", 0]]]]}',
    ])
    def test_malformed(self, text):
        with pytest.raises(InputError):
            loads_ensemble(text)


class TestSolve:
    def test_diagonal_identity(self, tmp_path):
        D = np.array([np.diag([1.0, 2.0, 3.0]), np.diag([0.5j, 0.0, -1.0])])
        (tmp_path / "d.json").write_text(dumps_ensemble(D))
        out = tmp_path / "r.json"
        assert main(["solve", "--input", str(tmp_path / "d.json"), "--init", "identity",
                     "--output", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert len(doc["trace"]) == 1 and doc["trace"][0]["objective"] == 0.0
        assert {"U", "diagonals", "trace", "termination"} <= doc.keys()

    def test_malformed_exit(self, tmp_path):
        (tmp_path / "bad.json").write_text("{")
        assert main(["solve", "--input", str(tmp_path / "bad.json")]) == EXIT_INPUT
        assert main(["solve", "--input", str(tmp_path / "missing.json")]) == EXIT_INPUT
        assert main(["solve", "--bogus-flag"]) == EXIT_INPUT

    def test_singular_init_exit(self, tmp_path):
        (tmp_path / "e.json").write_text(dumps_ensemble(generate(3, 2, 30, 0).noisy))
        (tmp_path / "u.json").write_text(json.dumps([[[0, 0]] * 3] * 3))
        code = main(["solve", "--input", str(tmp_path / "e.json"),
                     "--init", f"file:{tmp_path / 'u.json'}"])
        assert code == EXIT_NUMERIC

    def test_resolve_is_idempotent(self, tmp_path):
        (tmp_path / "e.json").write_text(dumps_ensemble(generate(6, 3, 30, 0).noisy))
        main(["solve", "--input", str(tmp_path / "e.json"), "--output", str(tmp_path / "r1.json")])
        r1 = json.loads((tmp_path / "r1.json").read_text())
        (tmp_path / "t.json").write_text(json.dumps(r1["transformed"]))
        main(["solve", "--input", str(tmp_path / "t.json"), "--init", "identity",
              "--output", str(tmp_path / "r2.json")])
        r2 = json.loads((tmp_path / "r2.json").read_text())
        f1, f2 = r1["trace"][-1]["objective"], r2["trace"][-1]["objective"]
        assert abs(f1 - f2) <= 1e-12 * max(f1, 1e-300) or abs(f1 - f2) <= 1e-12


class TestBench:
    def test_rows_and_order(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        code = main(["bench", "--n", "4", "--k", "2", "--runs", "2", "--seed", "5",
                     "--snr", "30", "--snr", "inf", "--algorithm", "qn", "--algorithm", "cg",
                     "--output", str(out)])
        assert code == EXIT_OK
        rows = _csv(out)
        keys = [(r["seed"], r["snr_db"], r["algorithm"]) for r in rows]
        assert keys == [("5", "30.0", "qn"), ("5", "30.0", "cg"), ("5", "inf", "qn"), ("5", "inf", "cg"),
                        ("6", "30.0", "qn"), ("6", "30.0", "cg"), ("6", "inf", "qn"), ("6", "inf", "cg")]
        assert "median log10 f" in capsys.readouterr().err

    def test_deterministic_modulo_wall_time(self, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            main(["bench", "--n", "4", "--k", "2", "--runs", "2", "--output", str(p)])
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]  # noqa: E731
        assert strip(_csv(paths[0])) == strip(_csv(paths[1]))

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        import jointdiag.cli as cli

        monkeypatch.setattr(cli.os, "cpu_count", lambda: 2)
        monkeypatch.setenv("JD_THREADS", "2")
        main(["bench", "--n", "4", "--k", "2", "--runs", "3", "--output", str(tmp_path / "p.csv")])
        monkeypatch.setenv("JD_THREADS", "1")
        main(["bench", "--n", "4", "--k", "2", "--runs", "3", "--output", str(tmp_path / "s.csv")])
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]  # noqa: E731
        assert strip(_csv(tmp_path / "p.csv")) == strip(_csv(tmp_path / "s.csv"))

    def test_runs_must_be_positive(self):
        assert main(["bench", "--runs", "0"]) == EXIT_INPUT

    def test_stdout(self, capsys):
        main(["bench", "--n", "3", "--k", "2", "--algorithm", "gd"])
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 1 and rows[0]["algorithm"] == "gd"


class TestHarmonic:
    def test_single_mode_noiseless(self, tmp_path):
        out = tmp_path / "h.csv"
        assert main(["harmonic", "--k-modes", "1", "--grid", "6", "--snr", "inf",
                     "--output", str(out)]) == EXIT_OK
        rows = _csv(out)
        assert len(rows) == 2  # one per default method
        assert all(float(r["freq_error"]) <= 1e-10 for r in rows)

    def test_rows_per_snr_seed_method(self, tmp_path):
        out = tmp_path / "h.csv"
        main(["harmonic", "--k-modes", "2", "--grid", "6", "--runs", "2", "--snr", "20",
              "--snr", "30", "--algorithm", "cg", "--output", str(out)])
        assert len(_csv(out)) == 4

    def test_bad_grid(self):
        assert main(["harmonic", "--grid", "6", "6"]) == EXIT_INPUT
