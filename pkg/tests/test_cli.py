from pathlib import Path

import numpy as np
import pytest

from dirlap.cli import bench, build_parser, run
from dirlap.core import (
    DirectedLaplacian,
    read_graph,
    read_vector,
    validate_laplacian,
    write_graph,
    write_vector,
)
from dirlap.exceptions import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, UsageError
from dirlap.oracle import (
    approx_norm,
    dense,
    dense_pinv,
    exact_stationary,
    power_iteration_pagerank,
)
from dirlap.reports import SCHEMA_VERSION
from dirlap.utils import json_loads


@pytest.fixture
def graph_file(tmp_path: Path):
    def write(laplacian: DirectedLaplacian, name: str = "graph.mtx") -> str:
        path = tmp_path / name
        write_graph(path, laplacian.adjacency)
        return str(path)

    return write


def _printed_vector(output: str) -> np.ndarray:
    return np.array([float(line) for line in output.split()])


class TestParser:
    def test_commands(self):
        parser = build_parser()
        args = parser.parse_args(["stationary", "g.mtx", "--alpha", "0.2"])
        assert args.command == "stationary"
        assert args.alpha == 0.2
        assert args.seed == 0
        assert args.report is None

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["unknown"],
            ["solve", "g.mtx"],
            ["solve", "g.mtx", "b.txt", "--eps", "2"],
            ["pagerank", "g.mtx"],
        ],
        ids=["no command", "unknown command", "missing demand", "eps", "no vertex"],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(UsageError):
            build_parser().parse_args(argv)
        assert run(argv) == EXIT_USAGE


class TestSparsifyCommands:
    def test_sparsify_eulerian(self, tmp_path, graph_file, eulerian):
        out = tmp_path / "out.mtx"
        report = tmp_path / "report.json"
        code = run(
            ["sparsify", graph_file(eulerian), str(out), "--report", str(report)]
        )
        assert code == EXIT_OK
        sparse = validate_laplacian(read_graph(out))
        assert sparse.nnz <= eulerian.nnz
        assert approx_norm(dense(eulerian), dense(sparse)) <= 0.25 + 1e-9
        data = json_loads(report.read_bytes())
        assert data["command"] == "sparsify"
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["nnz_in"] == eulerian.nnz
        assert data["nnz_out"] == sparse.nnz
        assert data["max_degree_error"] < 1e-12
        assert data["parameters"]["eulerian"] is True

    def test_sparsify_square(self, tmp_path, graph_file, eulerian):
        out = tmp_path / "square.mtx"
        report = tmp_path / "report.json"
        code = run(
            ["sparsify-square", graph_file(eulerian), str(out), "--report", str(report)]
        )
        assert code == EXIT_OK
        walk = eulerian.adjacency.csr_transpose.toarray()
        degrees = np.diag(walk.sum(axis=1))
        square = read_graph(out, kind="general").csr.toarray()
        np.testing.assert_allclose(square.sum(axis=0), degrees.diagonal())
        np.testing.assert_allclose(square.sum(axis=1), degrees.diagonal())
        exact = walk @ np.linalg.inv(degrees) @ walk
        norm = approx_norm(degrees - exact, degrees - square)
        assert norm <= 0.25 / 3 + 1e-9
        data = json_loads(report.read_bytes())
        assert data["command"] == "sparsify-square"
        assert data["max_degree_error"] < 1e-12

    def test_sparsify_square_needs_eulerian(
        self, tmp_path, graph_file, strongly_connected
    ):
        code = run(
            [
                "sparsify-square",
                graph_file(strongly_connected),
                str(tmp_path / "out.mtx"),
            ]
        )
        assert code == EXIT_VALIDATION


class TestDecomposeCommand:
    def test_manifest_on_stdout(self, graph_file, eulerian, capsys):
        assert run(["decompose", graph_file(eulerian), "--phi", "0.1"]) == EXIT_OK
        manifest = json_loads(capsys.readouterr().out)
        assert manifest["n"] == eulerian.n
        assert manifest["phi_target"] == 0.1
        assert manifest["total_support"] == sum(
            piece["support"] for piece in manifest["pieces"]
        )


class TestSolveCommands:
    def test_solve_eulerian(self, tmp_path, graph_file, eulerian, demand, capsys):
        b = tmp_path / "b.txt"
        write_vector(b, demand)
        report = tmp_path / "report.json"
        code = run(
            [
                "solve-eulerian",
                graph_file(eulerian),
                str(b),
                "--eps",
                "1e-8",
                "--report",
                str(report),
            ]
        )
        assert code == EXIT_OK
        x = _printed_vector(capsys.readouterr().out)
        expected = dense_pinv(eulerian) @ demand
        np.testing.assert_allclose(x - x.mean(), expected, atol=1e-5)
        data = json_loads(report.read_bytes())
        assert data["residual"] < 1e-4
        assert data["projected"] is False
        assert len(data["chain_nnz"]) == data["depth"] + 1

    def test_solve_eulerian_zero_demand(self, tmp_path, graph_file, eulerian):
        b = tmp_path / "b.txt"
        write_vector(b, np.zeros(eulerian.n))
        out = tmp_path / "x.txt"
        report = tmp_path / "report.json"
        code = run(
            [
                "solve-eulerian",
                graph_file(eulerian),
                str(b),
                "--out",
                str(out),
                "--report",
                str(report),
            ]
        )
        assert code == EXIT_OK
        np.testing.assert_array_equal(read_vector(out), np.zeros(eulerian.n))
        assert json_loads(report.read_bytes())["applications"] == 0

    def test_solve_eulerian_rejects_general_graph(
        self, tmp_path, graph_file, strongly_connected
    ):
        b = tmp_path / "b.txt"
        write_vector(b, np.zeros(strongly_connected.n))
        assert (
            run(["solve-eulerian", graph_file(strongly_connected), str(b)])
            == EXIT_VALIDATION
        )

    def test_solve_strongly_connected(
        self, tmp_path, graph_file, strongly_connected
    ):
        b = tmp_path / "b.txt"
        demand = np.linspace(-1.0, 1.0, strongly_connected.n)
        write_vector(b, demand)
        out = tmp_path / "x.txt"
        report = tmp_path / "report.json"
        code = run(
            [
                "solve",
                graph_file(strongly_connected),
                str(b),
                "--out",
                str(out),
                "--report",
                str(report),
            ]
        )
        assert code == EXIT_OK
        x = read_vector(out)
        residual = strongly_connected.matvec(x) - demand
        assert np.linalg.norm(residual) <= 1e-3 * np.linalg.norm(demand)
        data = json_loads(report.read_bytes())
        assert data["parameters"]["inner_solves"] >= 1

    def test_demand_length_mismatch(self, tmp_path, graph_file, eulerian):
        b = tmp_path / "b.txt"
        write_vector(b, np.zeros(eulerian.n + 1))
        assert run(["solve-eulerian", graph_file(eulerian), str(b)]) == EXIT_VALIDATION

    def test_missing_file(self, tmp_path):
        missing = str(tmp_path / "missing.mtx")
        assert run(["solve", missing, missing]) == EXIT_VALIDATION


class TestRandomWalkCommands:
    def test_stationary(self, tmp_path, graph_file, triangle):
        out = tmp_path / "pi.txt"
        report = tmp_path / "report.json"
        code = run(
            [
                "stationary",
                graph_file(triangle),
                "--alpha",
                "0.01",
                "--out",
                str(out),
                "--report",
                str(report),
            ]
        )
        assert code == EXIT_OK
        np.testing.assert_allclose(
            read_vector(out), exact_stationary(triangle), atol=1e-3
        )
        data = json_loads(report.read_bytes())
        assert data["alpha"] == 0.01
        assert data["iterations"] == len(data["trace"]) > 0

    def test_pagerank(self, graph_file, triangle, capsys):
        code = run(["pagerank", graph_file(triangle), "--seed-vertex", "1"])
        assert code == EXIT_OK
        ranks = _printed_vector(capsys.readouterr().out)
        expected = power_iteration_pagerank(triangle, 0.15, np.array([1.0, 0, 0]))
        np.testing.assert_allclose(ranks, expected, atol=1e-3)

    @pytest.mark.parametrize("vertex", ["0", "4"], ids=["zero", "past end"])
    def test_pagerank_vertex_out_of_range(self, graph_file, triangle, vertex):
        code = run(["pagerank", graph_file(triangle), "--seed-vertex", vertex])
        assert code == EXIT_USAGE


class TestOracleCommand:
    def test_approx_norm_of_itself(self, graph_file, eulerian, capsys):
        path = graph_file(eulerian)
        assert run(["oracle", "approx-norm", path, path]) == EXIT_OK
        assert float(capsys.readouterr().out) == 0.0

    def test_approx_norm_needs_other(self, graph_file, eulerian):
        assert run(["oracle", "approx-norm", graph_file(eulerian)]) == EXIT_USAGE

    def test_stationary(self, graph_file, triangle, capsys):
        assert run(["oracle", "stationary", graph_file(triangle)]) == EXIT_OK
        np.testing.assert_allclose(
            _printed_vector(capsys.readouterr().out), [0.4, 0.2, 0.4]
        )


class TestBench:
    def test_runs_and_slope(self):
        report = bench([16, 32], 0.1, seed=0)
        assert [run_["n"] for run_ in report.runs] == [16, 32]
        assert report.slope is not None
        assert all(run_["applications"] > 0 for run_ in report.runs)

    def test_sizes_must_ascend(self):
        with pytest.raises(UsageError):
            bench([32, 16], 0.1, seed=0)

    def test_command_prints_report(self, capsys):
        assert run(["bench", "--sizes", "16", "--eps", "0.1"]) == EXIT_OK
        report = json_loads(capsys.readouterr().out)
        assert report["sizes"] == [16]
        assert report["slope"] is None
