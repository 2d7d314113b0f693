"""Command-line entry point: ``conelab info | run <experiment> | all``.

Exit codes: 0 when every assertion passed, 1 on an assertion failure, 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from conelab import __version__
from conelab.acceptance import run_all
from conelab.cone_geometry import make_cone
from conelab.experiments import EXPERIMENTS, cone_summary, run_experiment
from conelab.link_spectrum import enumerate_modes
from conelab.radial_calculus import OperatorSpec

OUT_ENV = "CONELAB_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    p: int = 3
    q: int = 3
    a: float | None = None
    op: str = "jacobi"
    lam: float = 0.0
    seed: int = 0
    tol_scale: float = 1.0
    T: list = field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0, 32.0])
    N: int = 4096
    spacing: float | None = None
    hub_spacing: bool = False
    levels: int = 12
    trials: int = 100
    samples: int = 1000
    quadruples: int = 100_000
    dirs: int = 3
    n: int = 12
    hardy_count: int = 100
    mu_max: float = 40.0
    mu: list = field(default_factory=lambda: [1.0, 1.0])
    nu: list = field(default_factory=lambda: [2.0, 1.0])
    etas: list = field(default_factory=lambda: [0.25, 0.125, 0.0625])
    Rs: list = field(default_factory=lambda: [4.0, 8.0, 16.0])
    out: str = "conelab_out"
    formats: list = field(default_factory=lambda: ["json", "csv"])

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> None:
        def need(cond, fld, msg):
            if not cond:
                raise ConfigError(f"field '{fld}': {msg}")
        need(isinstance(self.p, int) and isinstance(self.q, int), "p/q", "must be integers")
        need(self.op in ("laplace", "jacobi"), "op", "must be 'laplace' or 'jacobi'")
        need(isinstance(self.seed, int), "seed", "must be an integer")
        need(isinstance(self.tol_scale, (int, float)) and self.tol_scale > 0 and math.isfinite(self.tol_scale),
             "tol_scale", "tolerances must be positive")
        need(len(self.T) >= 1 and all(t > 0 for t in self.T), "T", "must be positive")
        need(all(b > a for a, b in zip(self.T, self.T[1:])), "T", "must be strictly increasing")
        need(self.N >= 16, "N", "must be at least 16")
        need(self.spacing is None or self.spacing > 0, "spacing", "must be positive")
        need(self.levels >= 3, "levels", "must be at least 3")
        need(self.trials >= 1 and self.samples >= 1 and self.dirs >= 1 and self.n >= 2,
             "trials/samples/dirs/n", "must be positive (n >= 2)")
        need(self.quadruples >= 1000, "quadruples", "must be at least 1000")
        need(len(self.mu) == 2 and len(self.nu) == 2, "mu/nu", "must be pairs")
        need(set(self.formats) <= {"json", "csv"}, "formats", "allowed values are json, csv")
        try:
            make_cone(self.p, self.q, self.a)
        except ValueError as e:
            raise ConfigError(f"field 'p/q/a': {e}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(Fraction(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _cone_arg(text: str) -> tuple[int, int]:
    try:
        p, q = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--cone expects p,q, got {text!r}") from None
    return p, q


def _number(text: str) -> float:
    try:
        return float(Fraction(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its values")
    sp.add_argument("--cone", type=_cone_arg, help="sphere dimensions p,q")
    sp.add_argument("--a", type=_number, help="S-transform constant (default sqrt(p+q))")
    sp.add_argument("--op", choices=("laplace", "jacobi"))
    sp.add_argument("--lambda", dest="lam", type=_number, help="spectral shift, fractions allowed (1/24)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol-scale", dest="tol_scale", type=float, help="multiplies every tolerance")
    sp.add_argument("--T", type=_floats, help="annulus widths in log r, e.g. 2,4,8,16")
    sp.add_argument("--N", type=int, help="grid nodes per annulus")
    sp.add_argument("--spacing", type=float, help="chain spacing in unfolded length (default 5a)")
    sp.add_argument("--hub-spacing", dest="hub_spacing", action="store_const", const=True,
                    help="chain spacing 300 * estimated Gromov delta")
    sp.add_argument("--levels", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--quadruples", type=int)
    sp.add_argument("--dirs", type=int, help="Martin pole directions")
    sp.add_argument("--n", type=int, help="Martin pole sequence length")
    sp.add_argument("--out", help=f"output directory (environment: {OUT_ENV})")
    sp.add_argument("--formats", type=lambda s: s.split(","), help="json,csv")
    sp.add_argument("--json", action="store_true", help="print the summary as schema-validated JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"conelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("info", help="cone constants, lambda* and the mode table head"))
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    _add_common(run)
    _add_common(sub.add_parser("all", help="run the acceptance suite"))
    return parser


FLAG_FIELDS = ("a", "op", "lam", "seed", "tol_scale", "T", "N", "spacing", "hub_spacing", "levels",
               "trials", "samples", "quadruples", "dirs", "n", "out", "formats")


def config_from_args(args: argparse.Namespace, require_cone: bool = False) -> RunConfig:
    data = dataclasses.asdict(RunConfig())
    cone_given = False
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        file_cfg = RunConfig.from_json(text)
        raw = json.loads(text)
        cone_given = "p" in raw and "q" in raw
        data.update({k: getattr(file_cfg, k) for k in raw})
    if os.environ.get(OUT_ENV):
        data["out"] = os.environ[OUT_ENV]
    if args.cone is not None:
        data["p"], data["q"] = args.cone
        cone_given = True
    for k in FLAG_FIELDS:
        val = getattr(args, k, None)
        if val is not None:
            data[k] = val
    if require_cone and not cone_given:
        raise ConfigError("missing --cone p,q")
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# output

def _plain(x):
    """JSON-ready copy with numpy scalars unwrapped and non-finite floats spelled out."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if hasattr(x, "tolist"):
        return _plain(x.tolist())
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_schema(name: str) -> dict:
    return json.loads(resources.files("conelab").joinpath("schemas", f"{name}.schema.json").read_text())


def validate(doc: dict, name: str) -> None:
    jsonschema.validate(_plain(doc), load_schema(name))


def _csv_text(meta: dict, header: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) or hasattr(x, "dtype") and x.dtype.kind == "f" else x
                    for x in row])
    return buf.getvalue()


def _meta(cfg: RunConfig, experiment: str, theorem: str) -> dict:
    return {"experiment": experiment, "cone": f"{cfg.p},{cfg.q}", "a": cfg.a if cfg.a is not None else "default",
            "operator": cfg.op, "lambda": cfg.lam, "seed": cfg.seed, "theorem": theorem}


def _summary(cfg: RunConfig, experiment: str, theorem: str, assertions: list) -> dict:
    return {
        "experiment": experiment,
        "theorem": theorem,
        "cone": {"p": cfg.p, "q": cfg.q, "a": cfg.a},
        "operator": {"name": cfg.op, "lambda": cfg.lam},
        "seed": cfg.seed,
        "config": json.loads(cfg.to_json()),
        "assertions": assertions,
        "passed": all(a["passed"] for a in assertions),
    }


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_info(cfg: RunConfig, as_json: bool = False) -> int:
    c = make_cone(cfg.p, cfg.q, cfg.a)
    op = OperatorSpec.named(cfg.op, cfg.lam)
    info = cone_summary(c, op)
    modes = enumerate_modes(c, 60.0)[:10]
    info["modes"] = [{"k1": m.k1, "k2": m.k2, "mu": m.mu, "mult": m.mult} for m in modes]
    if as_json:
        sys.stdout.write(dumps(info))
        return 0
    ls = Fraction(info["lambda_star"]).limit_denominator(10_000)
    print(f"cone C_{{{c.p},{c.q}}}: n={c.n} r1={c.r1:.6f} r2={c.r2:.6f} kappa={c.kappa:g} a={c.a:.6f} "
          f"minimizing={c.minimizing_flag}")
    print(f"operator {op.name}: lambda*={info['lambda_star']:.12g} (~{ls})")
    cert = info["adaptedness"]
    print("adaptedness: " + " ".join(f"{k}={v}" for k, v in cert.items()))
    print("modes:")
    print("  k1 k2        mu  mult")
    for m in modes:
        print(f"  {m.k1:2d} {m.k2:2d} {m.mu:9.4f} {m.mult:5d}")
    return 0


def cmd_run(cfg: RunConfig, experiment: str, as_json: bool = False) -> int:
    res = run_experiment(experiment, cfg)
    out = Path(cfg.out) / experiment
    summary = _summary(cfg, experiment, res.theorem, res.assertions)
    validate(summary, "summary")
    report = {"experiment": experiment, "theorem": res.theorem, "seed": cfg.seed,
              "cone": {"p": cfg.p, "q": cfg.q, "a": cfg.a}, "operator": {"name": cfg.op, "lambda": cfg.lam},
              "report": res.report}
    validate(report, "report")
    if "json" in cfg.formats:
        _write(out / "report.json", dumps(report))
    if "csv" in cfg.formats:
        meta = _meta(cfg, experiment, res.theorem)
        for name, (header, rows) in res.tables.items():
            _write(out / f"{name}.csv", _csv_text(meta, header, rows))
    _write(out / "summary.json", dumps(summary))
    if as_json:
        sys.stdout.write(dumps(summary))
    else:
        for a in res.assertions:
            print(f"[{'PASS' if a['passed'] else 'FAIL'}] {experiment}: {a['name']}")
    if not res.passed:
        failed = [a["name"] for a in res.assertions if not a["passed"]]
        print(f"{experiment}: failed invariant(s): {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_all(cfg: RunConfig, as_json: bool = False) -> int:
    rows = run_all(cfg.seed, cfg.tol_scale)
    out = Path(cfg.out) / "all"
    table = {"theorem": "acceptance suite", "seed": cfg.seed, "tol_scale": cfg.tol_scale,
             "criteria": [r.to_dict() for r in rows], "passed": all(r.passed for r in rows)}
    validate(table, "acceptance")
    assertions = [{"name": f"criterion {r.number}: {r.name}", "passed": r.passed, "detail": r.checks} for r in rows]
    summary = _summary(cfg, "all", "acceptance suite", assertions)
    validate(summary, "summary")
    _write(out / "acceptance.json", dumps(table))
    _write(out / "summary.json", dumps(summary))
    if as_json:
        sys.stdout.write(dumps(table))
    else:
        for r in rows:
            print(f"{r.number:2d}  {'PASS' if r.passed else 'FAIL'}  {r.name}")
            for k, ok in r.checks.items():
                if not ok:
                    print(f"      failed: {k}")
    return 0 if table["passed"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    try:
        cfg = config_from_args(args, require_cone=args.command == "info")
    except ConfigError as e:
        print(f"conelab: config error: {e}", file=sys.stderr)
        return 2
    if args.command == "info":
        return cmd_info(cfg, args.json)
    if args.command == "run":
        return cmd_run(cfg, args.experiment, args.json)
    return cmd_all(cfg, args.json)


if __name__ == "__main__":
    sys.exit(main())
