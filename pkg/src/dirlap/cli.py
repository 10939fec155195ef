"""
Command line front end.

Every command reads Matrix Market graphs and one-value-per-line vectors,
writes its outputs to files or standard output and, with ``--report``, a
versioned JSON report. Exit codes: 0 on success, 2 for invalid input,
3 for numerical failures and 64 for usage errors.
"""

import argparse
import logging
import math
import sys
import time

from dataclasses import asdict
from pathlib import Path
from typing import Callable, NoReturn, Sequence, TypeVar

import numpy as np

from numpy.typing import NDArray

from dirlap import oracle
from dirlap.applications import (
    compute_stationary,
    personalized_pagerank,
    solve_full,
    sparsify_strongly_connected,
)
from dirlap.config import (
    APPLICATION_DEFAULT,
    DECOMPOSITION_DEFAULT,
    SAMPLING_DEFAULT,
    SOLVER_DEFAULT,
)
from dirlap.core import (
    DirectedLaplacian,
    read_graph,
    read_vector,
    validate_laplacian,
    write_graph,
    write_vector,
)
from dirlap.decompose import find_decomposition
from dirlap.events import (
    Event,
    EventBus,
    ResampleEvent,
    SampleEvent,
    SolveEvent,
    StationaryRoundEvent,
)
from dirlap.exceptions import (
    EXIT_OK,
    EXIT_VALIDATION,
    DirlapError,
    NotEulerianError,
    UsageError,
    exit_code_for,
)
from dirlap.generators import random_demand, random_eulerian
from dirlap.reports import (
    BenchReport,
    DecompositionManifest,
    Report,
    SolveReport,
    SparsifyReport,
    StationaryReport,
    to_json,
)
from dirlap.solver import default_inner_solver, solve_eulerian
from dirlap.sparsify import sparsify_eulerian, sparsify_square

logger = logging.getLogger(__name__)

E = TypeVar("E", bound=Event)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


class _Recorder:
    """Event bus callback keeping every event it receives."""

    def __init__(self) -> None:
        self.events: list[Event] = []

    def __call__(self, event: Event) -> None:
        self.events.append(event)

    def of_type(self, kind: type[E]) -> list[E]:
        return [event for event in self.events if isinstance(event, kind)]


def _probability(value: str) -> float:
    number = float(value)
    if not 0 < number < 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return number


def _load(path: str) -> DirectedLaplacian:
    return validate_laplacian(read_graph(path))


def _emit_vector(values: NDArray[np.float64], out: str | None) -> None:
    if out is not None:
        write_vector(out, values)
        return
    for value in values.tolist():
        print(repr(value))


def _degree_error(before: DirectedLaplacian, after: DirectedLaplacian) -> float:
    scale = max(float(before.out_degrees.max(initial=0.0)), 1e-300)
    error = max(
        float(np.abs(before.out_degrees - after.out_degrees).max(initial=0.0)),
        float(np.abs(before.in_degrees - after.in_degrees).max(initial=0.0)),
    )
    return error / scale


def _sampling_counts(recorder: _Recorder) -> tuple[int, int]:
    return len(recorder.of_type(SampleEvent)), len(recorder.of_type(ResampleEvent))


def cmd_sparsify(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    if laplacian.eulerian:
        result = sparsify_eulerian(
            laplacian, args.p, args.eps, args.seed, event_bus=bus
        )
    else:
        result = sparsify_strongly_connected(
            laplacian,
            args.p,
            args.eps,
            args.seed,
            inner=default_inner_solver(args.seed),
            event_bus=bus,
        )
    write_graph(args.out, result.adjacency)
    samples, resamples = _sampling_counts(recorder)
    return SparsifyReport(
        command="sparsify",
        seed=args.seed,
        eps=args.eps,
        p=args.p,
        nnz_in=laplacian.nnz,
        nnz_out=result.nnz,
        samples=samples,
        resamples=resamples,
        max_degree_error=_degree_error(laplacian, result),
        parameters={
            "eulerian": laplacian.eulerian,
            "sampling": asdict(SAMPLING_DEFAULT),
            "decomposition": asdict(DECOMPOSITION_DEFAULT),
        },
    )


def cmd_sparsify_square(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    if not laplacian.eulerian:
        raise NotEulerianError("sparsify-square needs an Eulerian graph")
    walk = laplacian.adjacency.transpose()
    result = sparsify_square(walk, args.p, args.eps, args.seed, event_bus=bus)
    write_graph(args.out, result)
    samples, resamples = _sampling_counts(recorder)
    degrees = walk.row_sums()
    error = max(
        float(np.abs(result.row_sums() - degrees).max(initial=0.0)),
        float(np.abs(result.col_sums() - degrees).max(initial=0.0)),
    )
    return SparsifyReport(
        command="sparsify-square",
        seed=args.seed,
        eps=args.eps,
        p=args.p,
        nnz_in=walk.nnz,
        nnz_out=result.nnz,
        samples=samples,
        resamples=resamples,
        max_degree_error=error / max(float(degrees.max(initial=0.0)), 1e-300),
        parameters={
            "sampling": asdict(SAMPLING_DEFAULT),
            "decomposition": asdict(DECOMPOSITION_DEFAULT),
        },
    )


def cmd_decompose(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    decomposition = find_decomposition(laplacian, args.phi, args.seed, event_bus=bus)
    manifest = DecompositionManifest(
        seed=args.seed,
        n=laplacian.n,
        nnz=laplacian.nnz,
        phi_target=decomposition.phi_target,
        alpha=decomposition.alpha,
        beta=decomposition.beta,
        buckets=decomposition.buckets,
        rounds=decomposition.rounds,
        total_support=decomposition.total_support,
        pieces=[asdict(info) for info in decomposition.info],
        parameters={"decomposition": asdict(DECOMPOSITION_DEFAULT)},
    )
    if args.report is None:
        print(to_json(manifest).decode("utf-8"))
    return manifest


def _last_solve(recorder: _Recorder) -> SolveReport | None:
    reports = [event.report for event in recorder.of_type(SolveEvent)]
    return reports[-1] if reports else None


def cmd_solve_eulerian(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    b = read_vector(args.demand)
    x = solve_eulerian(laplacian, b, args.eps, seed=args.seed, event_bus=bus)
    _emit_vector(x, args.out)
    report = _last_solve(recorder)
    if report is None:
        # zero demand: nothing was solved
        report = SolveReport(
            eps=args.eps,
            seed=args.seed,
            lambda_hat=math.nan,
            depth=0,
            eps_hat=math.nan,
            applications=0,
            wall_time=0.0,
            residual=0.0,
            projected=False,
            parameters={"solver": asdict(SOLVER_DEFAULT)},
        )
    return report


def cmd_solve(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    b = read_vector(args.demand)
    start = time.perf_counter()

    def observed(
        system: DirectedLaplacian, demand: NDArray[np.float64], eps: float
    ) -> NDArray[np.float64]:
        return solve_eulerian(system, demand, eps, seed=args.seed, event_bus=bus)

    x = solve_full(laplacian, b, args.eps, observed, event_bus=bus)
    _emit_vector(x, args.out)
    solves = [event.report for event in recorder.of_type(SolveEvent)]
    demand = b - b.mean()
    norm = float(np.linalg.norm(demand)) or 1.0
    last = solves[-1] if solves else None
    return SolveReport(
        eps=args.eps,
        seed=args.seed,
        lambda_hat=last.lambda_hat if last else math.nan,
        depth=last.depth if last else 0,
        eps_hat=last.eps_hat if last else math.nan,
        applications=sum(report.applications for report in solves),
        wall_time=time.perf_counter() - start,
        residual=float(np.linalg.norm(laplacian.matvec(x) - demand)) / norm,
        projected=not math.isclose(float(b.sum()), 0.0, abs_tol=1e-12 * norm),
        chain_nnz=last.chain_nnz if last else [],
        parameters={
            "application": asdict(APPLICATION_DEFAULT),
            "solver": asdict(SOLVER_DEFAULT),
            "inner_solves": len(solves),
            "stationary_trace": [
                event.residual for event in recorder.of_type(StationaryRoundEvent)
            ],
        },
    )


def _stationary_report(
    alpha: float, recorder: _Recorder, parameters: dict[str, object]
) -> StationaryReport:
    trace = [event.residual for event in recorder.of_type(StationaryRoundEvent)]
    return StationaryReport(
        alpha=alpha,
        iterations=len(trace),
        residual=trace[-1] if trace else 0.0,
        trace=trace,
        parameters=parameters,
    )


def cmd_stationary(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    result = compute_stationary(
        laplacian, args.alpha, default_inner_solver(args.seed), event_bus=bus
    )
    _emit_vector(result.distribution, args.out)
    return _stationary_report(
        args.alpha, recorder, {"application": asdict(APPLICATION_DEFAULT)}
    )


def cmd_pagerank(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    laplacian = _load(args.graph)
    if not 1 <= args.seed_vertex <= laplacian.n:
        raise UsageError(
            f"--seed-vertex must be in 1..{laplacian.n}, got {args.seed_vertex}"
        )
    personalization = np.zeros(laplacian.n)
    personalization[args.seed_vertex - 1] = 1.0
    ranks = personalized_pagerank(
        laplacian,
        args.beta,
        personalization,
        inner=default_inner_solver(args.seed),
        event_bus=bus,
    )
    _emit_vector(ranks, args.out)
    return _stationary_report(
        APPLICATION_DEFAULT.stationary_alpha,
        recorder,
        {"beta": args.beta, "seed_vertex": args.seed_vertex},
    )


def bench(sizes: Sequence[int], eps: float, seed: int) -> BenchReport:
    """
    Time chain construction plus solve on random Eulerian graphs.

    Every size n gets a random Eulerian graph with 4n extra cycles of length
    at most 8. The slope of log(time) against log(nnz) is fitted when at least
    two sizes were run.
    """
    if list(sizes) != sorted(sizes):
        raise UsageError("Benchmark sizes must be ascending")
    runs = []
    for index, n in enumerate(sizes):
        laplacian = random_eulerian(n, 4 * n, seed + index, max_length=8)
        b = random_demand(n, seed + index)
        recorder = _Recorder()
        start = time.perf_counter()
        solve_eulerian(laplacian, b, eps, seed=seed, event_bus=EventBus([recorder]))
        elapsed = time.perf_counter() - start
        report = recorder.of_type(SolveEvent)[-1].report
        runs.append(
            {
                "n": n,
                "nnz": laplacian.nnz,
                "seconds": elapsed,
                "applications": report.applications,
                "chain_nnz": report.chain_nnz,
                "residual": report.residual,
            }
        )
        logger.info(
            "bench n = %d: %.3f s, %d applications", n, elapsed, report.applications
        )
    slope = None
    if len(runs) >= 2:
        nnz = np.log([run["nnz"] for run in runs])
        seconds = np.log([max(run["seconds"], 1e-9) for run in runs])
        slope = float(np.polyfit(nnz, seconds, 1)[0])
    return BenchReport(eps=eps, seed=seed, sizes=list(sizes), runs=runs, slope=slope)


def cmd_bench(
    args: argparse.Namespace, bus: EventBus, recorder: _Recorder
) -> Report:
    report = bench(args.sizes, args.eps, args.seed)
    if args.report is None:
        print(to_json(report).decode("utf-8"))
    return report


def cmd_oracle(args: argparse.Namespace, bus: EventBus, recorder: _Recorder) -> None:
    laplacian = _load(args.graph)
    match args.check:
        case "approx-norm":
            if args.other is None:
                raise UsageError("approx-norm needs a second graph")
            other = _load(args.other)
            print(repr(oracle.approx_norm(laplacian, other)))
        case "stationary":
            _emit_vector(oracle.exact_stationary(laplacian), args.out)
        case "solve":
            if args.other is None:
                raise UsageError("solve needs a demand vector")
            b = read_vector(args.other)
            _emit_vector(oracle.dense_pinv(laplacian) @ b, args.out)


Command = Callable[[argparse.Namespace, EventBus, _Recorder], Report | None]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirlap", description="Directed spectral toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--report", default=None, help="write a JSON report here")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging (-vv: debug)"
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )

    def add(name: str, handler: Command, **kwargs: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], **kwargs)
        sub.set_defaults(handler=handler)
        return sub

    sparsify = add("sparsify", cmd_sparsify, help="sparsify a strongly connected graph")
    square = add(
        "sparsify-square", cmd_sparsify_square, help="sparsify the square of a walk"
    )
    for sub in (sparsify, square):
        sub.add_argument("graph")
        sub.add_argument("out")
        sub.add_argument("--eps", type=_probability, default=0.25)
        sub.add_argument("--p", type=_probability, default=0.01)

    decompose = add("decompose", cmd_decompose, help="expander decomposition manifest")
    decompose.add_argument("graph")
    decompose.add_argument("--phi", type=_probability, default=None)

    eulerian = add(
        "solve-eulerian", cmd_solve_eulerian, help="solve an Eulerian system"
    )
    full = add("solve", cmd_solve, help="solve a strongly connected system")
    for sub in (eulerian, full):
        sub.add_argument("graph")
        sub.add_argument("demand")
        sub.add_argument("--eps", type=_probability, default=1e-6)
        sub.add_argument("--out", default=None)

    stationary = add("stationary", cmd_stationary, help="stationary distribution")
    stationary.add_argument("graph")
    stationary.add_argument("--alpha", type=_probability, default=0.1)
    stationary.add_argument("--out", default=None)

    pagerank = add("pagerank", cmd_pagerank, help="personalized PageRank")
    pagerank.add_argument("graph")
    pagerank.add_argument("--beta", type=_probability, default=0.15)
    pagerank.add_argument("--seed-vertex", type=int, required=True)
    pagerank.add_argument("--out", default=None)

    bench_ = add("bench", cmd_bench, help="scaling benchmark")
    bench_.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024])
    bench_.add_argument("--eps", type=_probability, default=1e-6)

    check = add("oracle", cmd_oracle)
    check.add_argument("check", choices=["approx-norm", "stationary", "solve"])
    check.add_argument("graph")
    check.add_argument("other", nargs="?", default=None)
    check.add_argument("--out", default=None)
    return parser


def _configure_logging(verbose: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def run(argv: Sequence[str] | None = None) -> int:
    """
    Run one command.

    Parameters
    ----------
    argv : Sequence[str], optional
        Arguments without the program name. By default `sys.argv[1:]`.

    Returns
    -------
    int
        Process exit code.

    """
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.verbose)
        recorder = _Recorder()
        report = args.handler(args, EventBus([recorder]), recorder)
        if report is not None and args.report is not None:
            Path(args.report).write_bytes(to_json(report))
            logger.info("Report written to %s", args.report)
    except DirlapError as exc:
        code = exit_code_for(exc)
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"dirlap: {exc}", file=sys.stderr)
        return code
    except (ValueError, OSError) as exc:
        code = EXIT_VALIDATION
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"dirlap: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


def main() -> None:
    sys.exit(run())
