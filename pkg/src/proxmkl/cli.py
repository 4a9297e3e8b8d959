"""Command-line front end: train, predict and bench as a thin client.

All work happens in the service handlers; the CLI only marshals arguments
into the request models, dispatches (in-process by default, over HTTP with
--server) and writes the returned artifacts.  Exit codes: 0 success,
1 numerical or convergence failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from .errors import (ConfigError, ContractError, ConvergenceError, InputError,
                     NumericalError, ProxMklError)
from .service import schemas as S

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proxmkl",
                                description="Sparse multiple kernel learning")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a kernel combination")
    t.add_argument("--data", required=True, help="dataset file")
    t.add_argument("--format", choices=["libsvm", "csv"], default="libsvm")
    t.add_argument("--csv-header", action="store_true")
    t.add_argument("--loss", choices=["logistic", "hinge", "squared"],
                   default="logistic")
    t.add_argument("--C", type=_float_list, default=[0.05],
                   help="regularization value or comma-separated grid")
    t.add_argument("--solver", choices=["spicy", "ist"], default="spicy")
    t.add_argument("--split", type=float, default=None,
                   help="train fraction; remainder becomes the test split")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--bank", default=None, help="kernel bank config JSON")
    t.add_argument("--bank-random", type=int, default=None, metavar="M",
                   help="use M random-width Gaussian kernels instead of the grid")
    t.add_argument("--no-standardize", action="store_true")
    t.add_argument("--tol", type=float, default=0.01, help="relative duality gap")
    t.add_argument("--inner-tol", type=float, default=1e-6)
    t.add_argument("--max-outer", type=int, default=60)
    t.add_argument("--max-inner", type=int, default=100)
    t.add_argument("--gamma-init", type=float, default=1.0)
    t.add_argument("--gamma-growth", type=float, default=2.0)
    t.add_argument("--gamma-cap", type=float, default=1e8)
    t.add_argument("--ist-tol", type=float, default=1e-9)
    t.add_argument("--ist-max-iter", type=int, default=20000)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--server", default=None, help="remote service URL")

    pr = sub.add_parser("predict", help="score new data with a saved model")
    pr.add_argument("--model", required=True, help="model JSON file")
    pr.add_argument("--data", required=True)
    pr.add_argument("--format", choices=["libsvm", "csv"], default="libsvm")
    pr.add_argument("--csv-header", action="store_true")
    pr.add_argument("--out", required=True, help="output directory")
    pr.add_argument("--server", default=None)

    b = sub.add_parser("bench", help="scaling sweep over kernels or samples")
    b.add_argument("--axis", choices=["kernels", "samples"], default="kernels")
    b.add_argument("--values", type=_int_list, default=[50, 200, 800])
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--solvers", default="spicy", help="comma list: spicy,ist")
    b.add_argument("--loss", choices=["logistic", "squared"], default="logistic")
    b.add_argument("--C", type=float, default=0.5)
    b.add_argument("--n-samples", type=int, default=200)
    b.add_argument("--n-kernels", type=int, default=20)
    b.add_argument("--n-features", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--tol", type=float, default=0.01)
    b.add_argument("--out", required=True)
    b.add_argument("--server", default=None)

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    return p


def _dispatch(endpoint: str, request, response_model, server: str | None):
    """In-process handler call, or POST to a running service."""
    if server is None:
        from .service import handlers
        fn = {"train": handlers.run_train, "predict": handlers.run_predict,
              "bench": handlers.run_bench}[endpoint]
        return fn(request)
    import httpx
    resp = httpx.post(f"{server.rstrip('/')}/{endpoint}",
                      json=request.model_dump(), timeout=None)
    if resp.status_code >= 400:
        detail = resp.json().get("detail", resp.text)
        if resp.status_code in (400, 422):
            raise InputError(f"server rejected request: {detail}")
        raise NumericalError(f"server error: {detail}")
    return response_model.model_validate(resp.json())


def _load_dataset_inline(path, fmt, csv_header):
    from .data import load
    ds = load(path, fmt=fmt, csv_header=csv_header)
    return ds.X.tolist(), ds.y.tolist()


def _trace_csv(rows: list[S.TraceRowModel]) -> str:
    header = "iter,primal_obj,dual_obj,rel_gap,active_kernels,seconds"
    lines = [header]
    for r in rows:
        lines.append(f"{r.iter},{r.primal_obj!r},"
                     f"{'' if r.dual_obj is None else repr(r.dual_obj)},"
                     f"{'' if r.rel_gap is None else repr(r.rel_gap)},"
                     f"{r.active_kernels},{r.seconds!r}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    X, y = _load_dataset_inline(args.data, args.format, args.csv_header)
    bank = None
    if args.bank:
        bank_path = Path(args.bank)
        if not bank_path.exists():
            raise InputError(f"bank config {bank_path} does not exist")
        bank = S.BankConfigModel(**json.loads(bank_path.read_text()))
    if args.bank_random is not None:
        bank = S.BankConfigModel(mode="random", n_kernels=args.bank_random,
                                 seed=args.seed)
    req = S.TrainRequest(
        X=X, y=y, loss=args.loss,
        C=args.C if len(args.C) > 1 else args.C[0],
        solver=args.solver, split_fraction=args.split, seed=args.seed,
        standardize=not args.no_standardize, bank=bank,
        options=S.SolverOptions(
            gamma_init=args.gamma_init, gamma_growth=args.gamma_growth,
            gamma_cap=args.gamma_cap, outer_tol=args.tol,
            inner_tol=args.inner_tol, max_outer=args.max_outer,
            max_inner=args.max_inner, ist_tol=args.ist_tol,
            ist_max_iter=args.ist_max_iter),
    )
    resp = _dispatch("train", req, S.TrainResponse, args.server)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    summaries = []
    all_converged = True
    for run in resp.runs:
        tag = f"C{run.summary.C:g}"
        (outdir / f"model_{tag}.json").write_text(json.dumps(run.model_payload))
        (outdir / f"trace_{tag}.csv").write_text(_trace_csv(run.trace))
        summaries.append(run.summary.model_dump())
        s = run.summary
        all_converged &= s.converged
        gap = "n/a" if s.final_gap is None else f"{s.final_gap:.4g}"
        acc = "" if s.accuracy is None else f" acc={s.accuracy:.3f}"
        print(f"C={s.C:g} solver={s.solver} kernels={s.active_kernels} "
              f"gap={gap} iters={s.outer_iters} time={s.seconds:.2f}s"
              f"{acc} converged={s.converged}")
    (outdir / "summary.json").write_text(json.dumps(summaries, indent=2))
    return EXIT_OK if all_converged else EXIT_NUMERICAL


def cmd_predict(args) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        raise InputError(f"model file {model_path} does not exist")
    payload = json.loads(model_path.read_text())
    from .data import load
    ds = load(args.data, fmt=args.format, csv_header=args.csv_header)
    req = S.PredictRequest(model_payload=payload, X=ds.X.tolist(),
                           y=ds.y.tolist())
    resp = _dispatch("predict", req, S.PredictResponse, args.server)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["index,score,label"]
    for i, score in enumerate(resp.scores):
        lab = "" if resp.labels is None else repr(resp.labels[i])
        lines.append(f"{i},{score!r},{lab}")
    (outdir / "predictions.csv").write_text("\n".join(lines) + "\n")
    if resp.accuracy is not None:
        print(f"accuracy={resp.accuracy:.4f} on {len(resp.scores)} rows")
    else:
        print(f"wrote {len(resp.scores)} predictions")
    return EXIT_OK


def cmd_bench(args) -> int:
    req = S.BenchRequest(
        axis=args.axis, values=args.values, reps=args.reps,
        solvers=[s for s in args.solvers.split(",") if s],
        loss=args.loss, C=args.C, n_samples=args.n_samples,
        n_kernels=args.n_kernels, n_features=args.n_features,
        seed=args.seed, tol=args.tol,
    )
    resp = _dispatch("bench", req, S.BenchResponse, args.server)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    header = ("axis_value,rep,solver,seed,seconds,iterations,final_gap,"
              "active_kernels,converged,status")
    lines = [header]
    for r in resp.rows:
        lines.append(f"{r.axis_value},{r.rep},{r.solver},{r.seed},"
                     f"{'' if r.seconds is None else repr(r.seconds)},"
                     f"{r.iterations},"
                     f"{'' if r.final_gap is None else repr(r.final_gap)},"
                     f"{r.active_kernels},{int(r.converged)},{r.status}")
    (outdir / "results.csv").write_text("\n".join(lines) + "\n")
    agg_lines = ["axis_value,solver,mean_seconds,std_seconds,n"]
    for a in resp.aggregates:
        agg_lines.append(f"{a.axis_value},{a.solver},{a.mean_seconds!r},"
                         f"{a.std_seconds!r},{a.n}")
    (outdir / "aggregates.csv").write_text("\n".join(agg_lines) + "\n")
    failed = [r for r in resp.rows if r.status != "ok"]
    print(f"{len(resp.rows)} runs ({len(failed)} failed), "
          f"{len(resp.aggregates)} aggregates -> {outdir}")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def cmd_serve(args) -> int:
    import uvicorn
    uvicorn.run("proxmkl.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": cmd_train, "predict": cmd_predict,
                "bench": cmd_bench, "serve": cmd_serve}
    try:
        return handlers[args.command](args)
    except (InputError, ConfigError, ContractError, ValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ConvergenceError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ProxMklError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
