"""Command line front end.

Subcommands:
    run      execute a config-driven experiment (one or many optimizers)
    analyze  spectral reports for MAT1 weight dumps
    oracle   sampling check of the Schatten-constrained steepest step
    flops    leading-term flop count for an update direction

Exit codes: 0 success, 2 usage/config error, 3 numeric failure.

Config format: a flat, typed key = value file with sections.  Grammar:

    file     := { section }
    section  := '[' header ']' NEWLINE { assignment | blank | comment }
    header   := 'problem' | 'run' | 'optimizer' NAME
    assignment := KEY '=' VALUE        # typed per the section schema

'#' starts a comment (full line or trailing).  Keys outside the schema of
their section are rejected with the offending line number.  The documented
schemas live in PROBLEM_SCHEMAS, RUN_SCHEMA and OPTIMIZER_SCHEMA below and
in the README.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from .bench import (
    Problem,
    flops_estimate,
    make_logistic_regression,
    make_matrix_regression,
    make_mlp2,
    run_record_jsonl,
    run_summary,
    run_training,
)
from .esd import reports_to_jsonl, spectral_report
from .matcore import load_matrix
from .optim import OptimizerConfig
from .specfun import NsConfig, verify_steepest


class ConfigError(Exception):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")


def _parse_int_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    return [int(t) for t in items]


PROBLEM_SCHEMAS = {
    "matrix_regression": {
        "seed": int,
        "rows": int,
        "cols": int,
        "out_rows": int,
        "out_cols": int,
        "n_samples": int,
        "noise": float,
    },
    "logistic_regression": {
        "seed": int,
        "dim": int,
        "classes": int,
        "n_samples": int,
        "separation": float,
    },
    "mlp2": {"seed": int, "in_dim": int, "hidden": int, "n_samples": int},
}

RUN_SCHEMA = {
    "steps": int,
    "batch_size": int,
    "seed": int,
    "checkpoints": _parse_int_list,
    "output_dir": str,
}

OPTIMIZER_SCHEMA = {
    "kind": str,
    "lr": float,
    "momentum": float,
    "weight_decay": float,
    "power": float,
    "fixspec_decay": float,
    "beta2": float,
    "eps": float,
    "interval": int,
    "ns_steps": int,
    "root_ns_steps": int,
    "lipschitz": float,
}


def parse_config(path):
    """Parse and type-check an experiment config.

    Returns (problem_kind, problem_kwargs, run_kwargs, [(name, opt_kwargs)]).
    Raises ConfigError with the offending line number on any violation.
    """
    problem = None
    run = None
    optimizers = []
    current = None  # (schema, dict, section_line)
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read config: {exc.strerror}") from exc
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(path, line_no, "unterminated section header")
            header = line[1:-1].strip()
            if header == "problem":
                if problem is not None:
                    raise ConfigError(path, line_no, "duplicate [problem] section")
                problem = {"_line": line_no}
                current = ("problem", problem)
            elif header == "run":
                if run is not None:
                    raise ConfigError(path, line_no, "duplicate [run] section")
                run = {}
                current = ("run", run)
            elif header.startswith("optimizer"):
                name = header[len("optimizer"):].strip()
                if not name:
                    raise ConfigError(path, line_no, "optimizer section needs a name")
                if any(n == name for n, _ in optimizers):
                    raise ConfigError(path, line_no, f"duplicate optimizer {name!r}")
                body = {}
                optimizers.append((name, body))
                current = ("optimizer", body)
            else:
                raise ConfigError(path, line_no, f"unknown section [{header}]")
            continue
        if current is None:
            raise ConfigError(path, line_no, "assignment outside any section")
        if "=" not in line:
            raise ConfigError(path, line_no, "expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        kind_sec, body = current
        if key in body:
            raise ConfigError(path, line_no, f"duplicate key {key!r}")
        body[key] = (value, line_no)

    if problem is None:
        raise ConfigError(path, 0, "missing [problem] section")
    if run is None:
        raise ConfigError(path, 0, "missing [run] section")
    if not optimizers:
        raise ConfigError(path, 0, "no [optimizer NAME] sections")

    problem_line = problem.pop("_line")
    if "kind" not in problem:
        raise ConfigError(path, problem_line, "problem section needs kind = ...")
    p_kind, kind_line = problem.pop("kind")
    if p_kind not in PROBLEM_SCHEMAS:
        raise ConfigError(
            path, kind_line,
            f"unknown problem kind {p_kind!r}; expected one of "
            + ", ".join(sorted(PROBLEM_SCHEMAS)),
        )

    def typed(body, schema, section):
        out = {}
        for key, (value, line_no) in body.items():
            if key not in schema:
                raise ConfigError(
                    path, line_no, f"unknown key {key!r} in [{section}]"
                )
            try:
                out[key] = schema[key](value)
            except ValueError as exc:
                raise ConfigError(
                    path, line_no, f"bad value for {key!r}: {exc}"
                ) from exc
        return out

    p_kwargs = typed(problem, PROBLEM_SCHEMAS[p_kind], "problem")
    r_kwargs = typed(run, RUN_SCHEMA, "run")
    for req in ("steps", "batch_size", "output_dir"):
        if req not in r_kwargs:
            raise ConfigError(path, 0, f"[run] section needs {req} = ...")
    opt_list = []
    for name, body in optimizers:
        kwargs = typed(body, OPTIMIZER_SCHEMA, f"optimizer {name}")
        if "kind" not in kwargs or "lr" not in kwargs:
            raise ConfigError(
                path, 0, f"[optimizer {name}] needs kind = ... and lr = ..."
            )
        opt_list.append((name, kwargs))
    return p_kind, p_kwargs, r_kwargs, opt_list


PROBLEM_BUILDERS = {
    "matrix_regression": make_matrix_regression,
    "logistic_regression": make_logistic_regression,
    "mlp2": make_mlp2,
}


def build_problem(kind, kwargs) -> Problem:
    return PROBLEM_BUILDERS[kind](**kwargs)


def build_optimizer_config(kwargs) -> OptimizerConfig:
    args = dict(kwargs)
    ns_steps = args.pop("ns_steps", None)
    root_steps = args.pop("root_ns_steps", None)
    if ns_steps is not None:
        args["ns"] = NsConfig(ns_steps=ns_steps)
    if root_steps is not None:
        args["root_ns"] = NsConfig(ns_steps=root_steps)
    return OptimizerConfig(**args)


def _write_atomic(path: Path, text: str) -> None:
    tmp = Path(str(path) + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _spectra_jsonl(record) -> str:
    chunks = []
    for cp in record.checkpoints:
        chunks.append(reports_to_jsonl(cp.weight_reports))
        chunks.append(reports_to_jsonl(cp.update_reports))
    return "".join(chunks)


def cmd_run(args) -> int:
    try:
        p_kind, p_kwargs, r_kwargs, opt_list = parse_config(args.config)
        opt_cfgs = [(name, build_optimizer_config(kw)) for name, kw in opt_list]
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(r_kwargs["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = r_kwargs["steps"]
    batch_size = r_kwargs["batch_size"]
    seed = r_kwargs.get("seed", 0)
    checkpoints = r_kwargs.get("checkpoints", [])
    workers = max(1, int(os.environ.get("SPOP_THREADS", "1")))

    def one(cfg):
        problem = build_problem(p_kind, p_kwargs)
        return run_training(problem, cfg, steps, batch_size, seed, checkpoints)

    try:
        if workers == 1:
            records = [one(cfg) for _, cfg in opt_cfgs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(one, [cfg for _, cfg in opt_cfgs]))
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    summary = {}
    for (name, _), record in zip(opt_cfgs, records):
        _write_atomic(out_dir / f"{name}.jsonl", run_record_jsonl(record))
        if checkpoints:
            _write_atomic(out_dir / f"{name}.spectra.jsonl", _spectra_jsonl(record))
        summary[name] = run_summary(record)
    _write_atomic(
        out_dir / "summary.json",
        json.dumps(summary, sort_keys=True, indent=2) + "\n",
    )
    header = "step," + ",".join(name for name, _ in opt_cfgs)
    rows = [header]
    for t in range(steps):
        rows.append(
            f"{t}," + ",".join(repr(rec.losses[t]) for rec in records)
        )
    _write_atomic(out_dir / "loss.csv", "\n".join(rows) + "\n")
    print(f"wrote {len(records)} runs to {out_dir}")
    return 0


def cmd_analyze(args) -> int:
    layers = []
    for file in args.files:
        try:
            layers.append((Path(file).name, load_matrix(file)))
        except (OSError, ValueError) as exc:
            print(f"error: {file}: {exc}", file=sys.stderr)
            return 2
    reports, mean_alpha = spectral_report(layers)
    esd_top = 512 if args.truncate_esd else None
    _write_atomic(Path(args.output), reports_to_jsonl(reports, esd_top=esd_top))
    for rep in reports:
        if rep.alpha is not None:
            print(f"{rep.layer_name}: alpha={rep.alpha.alpha:.4f} "
                  f"xmin={rep.alpha.xmin:.4g} ks={rep.alpha.ks_stat:.4f}")
        else:
            print(f"{rep.layer_name}: fit failed ({rep.fit_error})")
    print(f"mean_alpha: {'n/a' if mean_alpha is None else f'{mean_alpha:.4f}'}")
    print(f"wrote {args.output}")
    return 0


def cmd_oracle(args) -> int:
    q = math.inf if args.q.lower() in ("inf", "infinity") else float(args.q)
    if not q > 1.0:
        print("error: q must exceed 1 (or be 'inf')", file=sys.stderr)
        return 2
    if not args.delta > 0.0:
        print("error: delta must be positive", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.seed)
    g = rng.standard_normal((args.rows, args.cols))
    chk = verify_steepest(g, q, args.delta, args.samples, args.seed)
    print(f"closed_form: {chk.closed_form!r}")
    print(f"sampled_max: {chk.sampled_max!r}")
    print("PASS" if chk.passed else "FAIL")
    return 0 if chk.passed else 3


def cmd_flops(args) -> int:
    try:
        value = flops_estimate(
            args.kind, args.rows, args.cols, p=args.power, ns_steps=args.ns_steps
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(repr(value))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spop",
        description="spectral-power optimizers: experiments and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config-driven experiment")
    p_run.add_argument("config", help="path to the experiment config file")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="spectral reports for MAT1 files")
    p_an.add_argument("files", nargs="+", help="MAT1 weight dumps")
    p_an.add_argument("-o", "--output", default="spectral_report.jsonl")
    p_an.add_argument(
        "--truncate-esd", action="store_true",
        help="keep only the top 512 ESD values per layer",
    )
    p_an.set_defaults(func=cmd_analyze)

    p_or = sub.add_parser("oracle", help="check the steepest-step closed form")
    p_or.add_argument("--q", required=True, help="Schatten exponent (> 1 or 'inf')")
    p_or.add_argument("--delta", type=float, default=1.0)
    p_or.add_argument("--rows", type=int, default=8)
    p_or.add_argument("--cols", type=int, default=8)
    p_or.add_argument("--samples", type=int, default=10000)
    p_or.add_argument("--seed", type=int, default=0)
    p_or.set_defaults(func=cmd_oracle)

    p_fl = sub.add_parser("flops", help="leading-term flop counts")
    p_fl.add_argument("--kind", required=True, choices=["muon", "muon_pow_ns"])
    p_fl.add_argument("--rows", type=int, required=True)
    p_fl.add_argument("--cols", type=int, required=True)
    p_fl.add_argument("--power", type=float, default=0.125)
    p_fl.add_argument("--ns-steps", type=int, default=15)
    p_fl.set_defaults(func=cmd_flops)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
