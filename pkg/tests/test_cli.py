"""End-to-end tests for the command-line front-end."""

import json

import pytest

from app.main import main
from app.repositories.artifacts import CHAIN_COLUMNS, RUN_COLUMNS, SUMMARY_COLUMNS, merged_meta_path, read_table

pytestmark = pytest.mark.integration

FIT_FLAGS = ["--seed", "1", "--iters", "30", "--burn-in", "10", "--j-max", "4", "--grid-size", "11"]


@pytest.fixture
def path_file(tmp_path):
    """A short simulated path of b1 with dt = 1e-3."""
    target = tmp_path / "b1.csv"
    code = main(["simulate", "--drift", "b1", "--T", "2", "--dt", "0.001", "--seed", "3", "--out", str(target)])
    assert code == 0
    return target


@pytest.fixture
def coarse_file(tmp_path):
    """Observations of b1 at spacing 0.1."""
    target = tmp_path / "coarse.csv"
    code = main(
        [
            "simulate", "--drift", "b1", "--T", "2", "--dt", "0.01",
            "--keep-every", "10", "--seed", "4", "--out", str(target),
        ]
    )
    assert code == 0
    return target


class TestSimulate:
    """Tests for the simulate command."""

    def test_grid(self, tmp_path):
        """T = 1 and dt = 0.5 give three rows after the header."""
        target = tmp_path / "short.csv"
        assert main(["simulate", "--drift", "main", "--T", "1", "--dt", "0.5", "--out", str(target)]) == 0
        lines = target.read_text().splitlines()
        assert lines[0].startswith("# config_hash=")
        assert "seed=0" in lines[0]
        assert lines[1] == "t,x"
        assert len(lines) == 5

    def test_thinning(self, coarse_file):
        """keep-every thins the written path."""
        header, rows = read_table(coarse_file)
        assert header == ["t", "x"]
        assert len(rows) == 21
        assert float(rows[1][0]) == pytest.approx(0.1)

    def test_unknown_drift(self, tmp_path):
        """An unknown drift name exits with 2."""
        assert main(["simulate", "--drift", "b9", "--T", "1", "--dt", "0.5", "--out", str(tmp_path / "x.csv")]) == 2

    def test_coefficient_file(self, tmp_path):
        """A JSON coefficient file can serve as the drift."""
        spec = tmp_path / "drift.json"
        spec.write_text(json.dumps({"family": "schauder", "beta": 1.0, "theta": [0.5, 1.0]}))
        target = tmp_path / "path.csv"
        assert main(["simulate", "--drift", str(spec), "--T", "1", "--dt", "0.1", "--out", str(target)]) == 0
        assert len(read_table(target)[1]) == 11

    def test_divergence(self, tmp_path):
        """A diverging simulation exits with 3."""
        spec = tmp_path / "huge.json"
        spec.write_text(json.dumps({"family": "fourier", "theta": [1e308]}))
        code = main(["simulate", "--drift", str(spec), "--T", "10", "--dt", "1", "--out", str(tmp_path / "x.csv")])
        assert code == 3


class TestFit:
    """Tests for the fit command."""

    def test_continuous(self, tmp_path, path_file):
        """A continuous fit writes summary, chain and metadata."""
        out = tmp_path / "fit"
        assert main(["fit", str(path_file), "--out", str(out), *FIT_FLAGS]) == 0

        header, rows = read_table(out / "summary.csv")
        assert header == SUMMARY_COLUMNS
        assert len(rows) == 11
        assert all(float(row[2]) <= float(row[3]) for row in rows)

        header, rows = read_table(out / "chain.csv")
        assert header == CHAIN_COLUMNS
        assert len(rows) == 20

        meta = json.loads((out / "meta.json").read_text())
        assert meta["seed"] == 1
        assert len(meta["config_hash"]) == 16
        assert sum(meta["model_histogram"].values()) == 20
        assert meta["config"]["basis"]["j_max"] == 4
        assert (out / "summary.csv").read_text().startswith(f"# config_hash={meta['config_hash']} seed=1")

    def test_reproducible(self, tmp_path, path_file):
        """Equal seeds give byte-identical summary and chain files."""
        for name in ("a", "b"):
            assert main(["fit", str(path_file), "--out", str(tmp_path / name), *FIT_FLAGS]) == 0
        for artifact in ("summary.csv", "chain.csv"):
            assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()

    def test_discrete(self, tmp_path, coarse_file):
        """A discrete fit reports bridge acceptance rates."""
        out = tmp_path / "discrete"
        flags = ["--mode", "discrete", "--n-interior", "4", "--seed", "2", "--iters", "15", "--burn-in", "3"]
        assert main(["fit", str(coarse_file), "--out", str(out), "--j-max", "3", *flags]) == 0
        _, rows = read_table(out / "chain.csv")
        assert len(rows) == 12
        assert all(0.0 <= float(row[4]) <= 1.0 for row in rows)
        meta = json.loads((out / "meta.json").read_text())
        assert meta["config"]["mode"] == "discrete"
        assert meta["bridge_accept_mean"] is not None

    def test_schauder(self, tmp_path, path_file):
        """The Schauder basis runs through the sparse factorization."""
        out = tmp_path / "schauder"
        assert main(["fit", str(path_file), "--out", str(out), "--basis", "schauder", *FIT_FLAGS]) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["config"]["basis"]["family"] == "schauder"
        assert meta["config"]["sparse_schauder"] is True

    def test_coarse_continuous_warns(self, mocker, tmp_path):
        """Continuous fits on coarse data run with a warning."""
        logger = mocker.patch("app.cli.commands.fit.logger")
        data = tmp_path / "three.csv"
        data.write_text("t,x\n0,0\n0.5,0.3\n1,0.1\n")
        flags = ["--seed", "1", "--iters", "12", "--burn-in", "0", "--j-max", "3"]
        assert main(["fit", str(data), "--out", str(tmp_path / "fit"), *flags]) == 0
        logger.warning.assert_called_once()

    def test_burn_in_exceeds_iters(self, tmp_path, path_file):
        """Invalid run parameters exit with 2."""
        flags = ["--seed", "1", "--iters", "5", "--burn-in", "6"]
        assert main(["fit", str(path_file), "--out", str(tmp_path / "bad"), *flags]) == 2

    def test_nan_data(self, tmp_path):
        """A data file with NaN exits with 2."""
        data = tmp_path / "nan.csv"
        data.write_text("t,x\n0,0\n1,nan\n2,1\n")
        assert main(["fit", str(data), "--out", str(tmp_path / "fit"), *FIT_FLAGS]) == 2

    def test_missing_file(self, tmp_path):
        """A missing data file exits with 2."""
        assert main(["fit", str(tmp_path / "none.csv"), "--out", str(tmp_path / "fit"), *FIT_FLAGS]) == 2

    def test_seed_required(self, tmp_path, path_file):
        """fit refuses to run without a seed."""
        with pytest.raises(SystemExit) as excinfo:
            main(["fit", str(path_file), "--out", str(tmp_path / "fit")])
        assert excinfo.value.code == 2


class TestSummarize:
    """Tests for the summarize command."""

    def test_merge_runs(self, tmp_path, path_file):
        """Summaries of several runs merge under their directory labels."""
        for name, seed in (("run1", "1"), ("run2", "2")):
            flags = ["--seed", seed, "--iters", "20", "--burn-in", "5", "--j-max", "3", "--grid-size", "6"]
            assert main(["fit", str(path_file), "--out", str(tmp_path / name), *flags]) == 0
        merged = tmp_path / "merged.csv"
        code = main(
            [
                "summarize",
                str(tmp_path / "run1" / "summary.csv"),
                str(tmp_path / "run2" / "summary.csv"),
                "--out",
                str(merged),
            ]
        )
        assert code == 0
        header, rows = read_table(merged)
        assert header == [*RUN_COLUMNS, *SUMMARY_COLUMNS]
        assert [row[0] for row in rows] == ["run1"] * 6 + ["run2"] * 6
        hashes = {
            name: json.loads((tmp_path / name / "meta.json").read_text())["config_hash"] for name in ("run1", "run2")
        }
        assert [row[1] for row in rows] == [hashes["run1"]] * 6 + [hashes["run2"]] * 6
        assert [row[2] for row in rows] == ["1"] * 6 + ["2"] * 6

        meta = json.loads(merged_meta_path(merged).read_text())
        assert [run["label"] for run in meta["runs"]] == ["run1", "run2"]
        assert [run["config_hash"] for run in meta["runs"]] == [hashes["run1"], hashes["run2"]]
        assert [run["seed"] for run in meta["runs"]] == ["1", "2"]

    def test_label_count(self, tmp_path, path_file):
        """The number of labels must match the number of inputs."""
        code = main(["summarize", str(path_file), "--labels", "a", "b", "--out", str(tmp_path / "m.csv")])
        assert code == 2

    def test_schema_mismatch(self, tmp_path, path_file):
        """Tables with different headers exit with 2."""
        other = tmp_path / "other.csv"
        other.write_text("x,mean,lo,hi\n0,0,0,0\n")
        assert main(["summarize", str(path_file), str(other), "--out", str(tmp_path / "m.csv")]) == 2
