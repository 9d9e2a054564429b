"""Command-line front end: simulate, fit, evaluate, bench.

Exit codes: 0 success, 1 usage error, 2 data or model-artifact error,
3 unexpected internal failure. Artifacts are JSON documents under
schema_version "1" with every double rendered at 17 significant digits,
so a written model reloads bitwise. File writes go through a temp file
and rename, never leaving a partial artifact behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from .core import (
    Dataset,
    JilFit,
    Linear,
    Mlp,
    Partition,
    make_grid,
    normalize_treatment,
    validate_dataset,
)
from .errors import InvalidData, JilError, SchemaMismatch
from .fit import fit_djil, fit_ljil
from .mlp import MlpModel, TrainConfig
from .policy import (
    I2dr,
    MaxDose,
    MidPoint,
    MinDose,
    PropensityModel,
    UniformRandom,
    estimate_value,
    fit_propensity,
    recommend_batch,
    select_dose,
)
from .sim import (
    ScenarioSpec,
    _rep_seed,
    gen_scenario,
    replicate_table1,
    true_optimal_value,
)
from .tuning import TuningGrid, cv_select_djil, cv_select_ljil, default_gamma

SCHEMA_VERSION = "1"

ARTIFACT_KEYS = (
    "schema_version",
    "method",
    "m",
    "lambda",
    "gamma",
    "objective",
    "partition",
    "models",
    "propensity",
    "value",
    "provenance",
)


# ------------------------------------------------------------ serialization


def _fmt(v) -> str:
    """A double at 17 significant digits; float(_fmt(v)) == v exactly."""
    return format(float(v), ".17g")


def _jtext(obj, indent: int = 0) -> str:
    """Deterministic JSON: insertion-ordered keys, 17-digit doubles."""
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = "  " * (indent + 1)
        items = [f"{inner}{json.dumps(k)}: {_jtext(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_jtext(v, indent) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if obj is None:
        return "null"
    return json.dumps(obj)


def _atomic_write_text(path: str, text: str) -> None:
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".jil-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _created_at() -> str:
    """ISO-8601 UTC timestamp; SOURCE_DATE_EPOCH overrides the clock so
    repeated builds can produce byte-identical artifacts."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        dt = datetime.now(tz=timezone.utc)
    return dt.isoformat(timespec="seconds")


# ----------------------------------------------------------------- CSV I/O


def _write_csv(d: Dataset, path: str) -> None:
    cols = ["y", "a"] + [f"x{j}" for j in range(1, d.p + 1)]
    lines = [",".join(cols)]
    for i in range(d.n):
        vals = [d.outcomes[i], d.treatments[i], *d.covariates[i]]
        lines.append(",".join(_fmt(v) for v in vals))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _read_csv(path: str):
    """Parse a y,a,x1..xp file into raw arrays, naming the first bad row."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise InvalidData("csv", None, "data file is empty")
    header = [h.strip() for h in lines[0].split(",")]
    expected = ["y", "a"] + [f"x{j}" for j in range(1, len(header) - 1)]
    if header != expected:
        raise InvalidData("csv", None, f"expected header y,a,x1,...,xp; got {lines[0]!r}")
    p = len(header) - 2
    y, a, X = [], [], []
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != p + 2:
            raise InvalidData(
                "csv", i, f"expected {p + 2} fields at row {i}, got {len(parts)}"
            )
        try:
            vals = [float(tok) for tok in parts]
        except ValueError:
            bad = next(t.strip() for t in parts if not _is_number(t))
            raise InvalidData("csv", i, f"cannot parse {bad!r} at row {i}") from None
        y.append(vals[0])
        a.append(vals[1])
        X.append(vals[2:])
    n = len(y)
    return np.asarray(y), np.asarray(a), np.asarray(X, dtype=float).reshape(n, p)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _build_dataset(y, a_raw, X):
    """Dataset plus the raw treatment range when min-max scaling was needed."""
    a_min = a_max = None
    a = a_raw
    if a_raw.size and (a_raw.min() < 0.0 or a_raw.max() > 1.0):
        a_min, a_max = float(a_raw.min()), float(a_raw.max())
        a = normalize_treatment(a_raw)
    d = Dataset(X, a, y)
    validate_dataset(d)
    return d, a_min, a_max


# --------------------------------------------------------------- artifacts


def _artifact_dict(fit: JilFit, prop: PropensityModel, value, provenance: dict) -> dict:
    models = []
    for mod in fit.models:
        if fit.method == "ljil":
            models.append({"theta": [float(t) for t in mod.theta]})
        else:
            net = mod.network
            models.append(
                {
                    "layer_sizes": [int(s) for s in net.layer_sizes],
                    "weights": [[[float(v) for v in row] for row in W] for W in net.weights],
                    "biases": [[float(v) for v in b] for b in net.biases],
                }
            )
    payload = {"kind": prop.kind, "floor": float(prop.floor)}
    if prop.kind == "multinomial":
        payload["weights"] = [[float(v) for v in row] for row in prop.weights]
    else:
        payload["freqs"] = [float(v) for v in prop.freqs]
    return {
        "schema_version": SCHEMA_VERSION,
        "method": fit.method,
        "m": int(fit.m),
        "lambda": float(fit.lam),
        "gamma": float(fit.gamma),
        "objective": float(fit.objective),
        "partition": [[int(iv.lo), int(iv.hi)] for iv in fit.partition.intervals],
        "models": models,
        "propensity": payload,
        "value": {
            "v_hat": value.v_hat,
            "sigma_hat": value.sigma_hat,
            "ci_lo": value.ci_lo,
            "ci_hi": value.ci_hi,
            "alpha": value.alpha,
        },
        "provenance": provenance,
    }


def _load_artifact(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        art = json.loads(text)
    except ValueError as exc:
        raise SchemaMismatch(f"model file is not valid JSON: {exc}") from None
    if not isinstance(art, dict):
        raise SchemaMismatch("model file must contain a JSON object")
    if art.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"unsupported schema_version {art.get('schema_version')!r}; "
            f"this build reads {SCHEMA_VERSION!r}"
        )
    for key in ARTIFACT_KEYS:
        if key not in art:
            raise SchemaMismatch(f"model file is missing key {key!r}")
    if art["method"] not in ("ljil", "djil"):
        raise SchemaMismatch(f"unknown method {art['method']!r}")
    return art


def _fit_from_artifact(art: dict) -> JilFit:
    m = int(art["m"])
    edges = [0]
    for lo, hi in art["partition"]:
        if int(lo) != edges[-1]:
            raise SchemaMismatch("partition intervals do not abut")
        edges.append(int(hi))
    if edges[-1] != m:
        raise SchemaMismatch("partition does not cover the grid")
    try:
        partition = Partition.from_edges(edges, m)
    except ValueError as exc:
        raise SchemaMismatch(f"bad partition: {exc}") from None
    if len(art["models"]) != partition.size:
        raise SchemaMismatch("one model per interval required")
    models = []
    for entry in art["models"]:
        if art["method"] == "ljil":
            models.append(Linear(np.asarray(entry["theta"], dtype=float)))
        else:
            net = MlpModel(
                tuple(int(s) for s in entry["layer_sizes"]),
                tuple(np.asarray(W, dtype=float) for W in entry["weights"]),
                tuple(np.asarray(b, dtype=float) for b in entry["biases"]),
            )
            models.append(Mlp(net))
    return JilFit(
        partition=partition,
        models=tuple(models),
        m=m,
        lam=float(art["lambda"]),
        gamma=float(art["gamma"]),
        objective=float(art["objective"]),
        method=art["method"],
    )


def _prop_from_artifact(art: dict, partition: Partition) -> PropensityModel:
    payload = art["propensity"]
    try:
        if payload["kind"] == "multinomial":
            return PropensityModel(
                kind="multinomial",
                partition=partition,
                floor=float(payload["floor"]),
                weights=np.asarray(payload["weights"], dtype=float),
            )
        return PropensityModel(
            kind="empirical",
            partition=partition,
            floor=float(payload["floor"]),
            freqs=np.asarray(payload["freqs"], dtype=float),
        )
    except (KeyError, ValueError) as exc:
        raise SchemaMismatch(f"bad propensity payload: {exc}") from None


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    d, _ = gen_scenario(ScenarioSpec(args.scenario, args.n, args.p, args.seed))
    _write_csv(d, args.out)
    print(f"wrote {args.out} ({d.n} rows, scenario {args.scenario})")
    return 0


def _resolve_ljil(d: Dataset, m: int, args):
    lam, gamma = args.lam, args.gamma
    if lam == "auto" or gamma == "auto":
        g0 = default_gamma(d.n)
        lambdas = (0.0, 1e-3, 1e-2) if lam == "auto" else (float(lam),)
        if gamma == "auto":
            gammas = tuple(g0 * f for f in (0.25, 0.5, 1.0, 2.0, 4.0))
        elif gamma == "default":
            gammas = (g0,)
        else:
            gammas = (float(gamma),)
        grid = TuningGrid(lambdas=lambdas, gammas=gammas, k_folds=args.folds, seed=args.seed)
        report = cv_select_ljil(d, m, grid)
        return report.best_lambda, report.best_gamma
    if gamma == "default":
        gamma = default_gamma(d.n)
    return float(lam), float(gamma)


def cmd_fit(args) -> int:
    y, a_raw, X = _read_csv(args.data)
    d, a_min, a_max = _build_dataset(y, a_raw, X)
    m = make_grid(d.n, args.c)
    if args.method == "ljil":
        lam, gamma = _resolve_ljil(d, m, args)
        fit = fit_ljil(d, m, lam, gamma)
    else:
        cfg = TrainConfig(seed=args.seed)
        gamma = args.gamma
        if gamma == "auto":
            g0 = default_gamma(d.n)
            gamma = cv_select_djil(
                d, m, tuple(g0 * f for f in (0.25, 0.5, 1.0, 2.0, 4.0)), args.folds, cfg
            )
        elif gamma == "default":
            gamma = default_gamma(d.n)
        fit = fit_djil(d, m, float(gamma), cfg)
    prop = fit_propensity(d, fit.partition)
    value = estimate_value(d, I2dr(fit), prop, args.alpha)
    provenance = {
        "n": d.n,
        "p": d.p,
        "seed": args.seed,
        "created_at": _created_at(),
        "a_min": a_min,
        "a_max": a_max,
    }
    art = _artifact_dict(fit, prop, value, provenance)
    _atomic_write_text(args.out, _jtext(art) + "\n")
    _print_fit_report(fit, value, d)
    return 0


def _print_fit_report(fit: JilFit, value, d: Dataset) -> None:
    print(f"method {fit.method}")
    print(f"n {d.n}")
    print(f"p {d.p}")
    print(f"m {fit.m}")
    print(f"lambda {_fmt(fit.lam)}")
    print(f"gamma {_fmt(fit.gamma)}")
    print(f"objective {_fmt(fit.objective)}")
    print(f"segments {fit.partition.size}")
    cuts = fit.partition.boundaries()
    print("change_points " + (" ".join(_fmt(b) for b in cuts) if cuts else "-"))
    for iv, mod in zip(fit.partition.intervals, fit.models):
        closing = "]" if iv.hi == iv.m else ")"
        span = f"[{_fmt(iv.lo_frac)}, {_fmt(iv.hi_frac)}{closing}"
        if fit.method == "ljil":
            print(f"interval {span} theta " + " ".join(_fmt(t) for t in mod.theta))
        else:
            arch = "x".join(str(s) for s in mod.network.layer_sizes)
            print(f"interval {span} mlp {arch}")
    print(f"v_hat {_fmt(value.v_hat)}")
    print(f"sigma_hat {_fmt(value.sigma_hat)}")
    print(f"ci_lo {_fmt(value.ci_lo)} ci_hi {_fmt(value.ci_hi)} alpha {_fmt(value.alpha)}")


_PREFS = {
    "min": lambda seed: MinDose(),
    "max": lambda seed: MaxDose(),
    "mid": lambda seed: MidPoint(),
    "uniform": lambda seed: UniformRandom(seed),
}


def cmd_evaluate(args) -> int:
    art = _load_artifact(args.model)
    y, a_raw, X = _read_csv(args.data)
    prov = art["provenance"]
    if X.shape[1] != int(prov["p"]):
        raise SchemaMismatch(
            f"model was fit with p={int(prov['p'])} covariates, data has p={X.shape[1]}"
        )
    a = a_raw
    if prov.get("a_min") is not None:
        a = np.clip(
            (a_raw - float(prov["a_min"])) / (float(prov["a_max"]) - float(prov["a_min"])),
            0.0,
            1.0,
        )
    d = Dataset(X, a, y)
    validate_dataset(d)
    fit = _fit_from_artifact(art)
    prop = _prop_from_artifact(art, fit.partition)
    rule = I2dr(fit)
    value = estimate_value(d, rule, prop, args.alpha)
    if args.plot_data:
        pref = _PREFS[args.pref](int(prov["seed"]))
        idx = recommend_batch(rule, d.covariates)
        ivs = fit.partition.intervals
        rows = ["index\tlo\thi\tdose"]
        for i, j in enumerate(idx):
            iv = ivs[j]
            dose = select_dose(iv, pref)
            rows.append(f"{i}\t{_fmt(iv.lo_frac)}\t{_fmt(iv.hi_frac)}\t{_fmt(dose)}")
        _atomic_write_text(args.plot_data, "\n".join(rows) + "\n")
    print(
        _jtext(
            {
                "v_hat": value.v_hat,
                "sigma_hat": value.sigma_hat,
                "ci_lo": value.ci_lo,
                "ci_hi": value.ci_hi,
                "alpha": value.alpha,
            }
        )
    )
    return 0


def _bench_djil(args, v_opt: float) -> dict:
    records = []
    for rep in range(args.reps):
        seed_r = _rep_seed(args.seed, rep)
        d, _ = gen_scenario(ScenarioSpec(args.scenario, args.n, args.p, seed_r))
        m = make_grid(args.n, args.c)
        fit = fit_djil(d, m, default_gamma(args.n), TrainConfig(seed=seed_r))
        prop = fit_propensity(d, fit.partition)
        val = estimate_value(d, I2dr(fit), prop, 0.05)
        records.append(
            {
                "v_hat": val.v_hat,
                "sigma_hat": val.sigma_hat,
                "covered": val.ci_lo <= v_opt <= val.ci_hi,
                "segments": fit.partition.size,
            }
        )
    return {
        "mean_v_hat": float(np.mean([r["v_hat"] for r in records])),
        "mean_sigma_hat": float(np.mean([r["sigma_hat"] for r in records])),
        "coverage_pct": 100.0 * float(np.mean([r["covered"] for r in records])),
        "mean_segments": float(np.mean([r["segments"] for r in records])),
        "mean_l2": None,
        "v_opt": v_opt,
    }


def cmd_bench(args) -> int:
    workers = None
    env = os.environ.get("JIL_THREADS")
    if env:
        workers = int(env)
    if args.method == "ljil":
        res = replicate_table1(
            args.reps,
            args.n,
            args.seed,
            scenario=args.scenario,
            p=args.p,
            c=args.c,
            workers=workers,
        )
    else:
        v_opt = true_optimal_value(
            ScenarioSpec(args.scenario, args.n, args.p, args.seed), 10**6, args.seed
        )
        res = _bench_djil(args, v_opt)
    cols = [
        "scenario",
        "n",
        "reps",
        "method",
        "mean_v_hat",
        "mean_sigma_hat",
        "coverage_pct",
        "mean_segments",
        "mean_l2",
        "v_opt",
    ]
    l2 = res["mean_l2"]
    row = [
        str(args.scenario),
        str(args.n),
        str(args.reps),
        args.method,
        _fmt(res["mean_v_hat"]),
        _fmt(res["mean_sigma_hat"]),
        _fmt(res["coverage_pct"]),
        _fmt(res["mean_segments"]),
        "nan" if l2 is None else _fmt(l2),
        _fmt(res["v_opt"]),
    ]
    print("\t".join(cols))
    print("\t".join(row))
    return 0


# ------------------------------------------------------------------ parser


def _lambda_flag(tok: str):
    t = tok.strip().lower()
    if t == "auto":
        return "auto"
    try:
        v = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real number or 'auto', got {tok!r}")
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"lambda must be finite and >= 0, got {tok!r}")
    return v


def _gamma_flag(tok: str):
    t = tok.strip().lower()
    if t in ("auto", "default"):
        return t
    try:
        v = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a real number, 'auto', or 'default', got {tok!r}"
        )
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"gamma must be finite and >= 0, got {tok!r}")
    return v


def _positive_int(tok: str) -> int:
    v = int(tok)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {tok!r}")
    return v


def _fold_count(tok: str) -> int:
    v = int(tok)
    if v < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 folds, got {tok!r}")
    return v


def _positive_real(tok: str) -> float:
    v = float(tok)
    if not np.isfinite(v) or v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive real, got {tok!r}")
    return v


def _alpha_flag(tok: str) -> float:
    v = float(tok)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {tok!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jil",
        description="Jump interval-learning: segmentation-based individualized "
        "interval dosing rules.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="draw a synthetic dosing dataset as CSV")
    ps.add_argument("--scenario", type=int, choices=range(1, 6), required=True)
    ps.add_argument("--n", type=_positive_int, required=True)
    ps.add_argument("--p", type=_positive_int, default=4)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", help="fit a segmentation on a CSV dataset")
    pf.add_argument("--data", required=True)
    pf.add_argument("--method", choices=("ljil", "djil"), default="ljil")
    pf.add_argument("--c", type=_positive_real, default=5.0,
                    help="grid coarseness; m = floor(n / c)")
    pf.add_argument("--lambda", dest="lam", type=_lambda_flag, default="auto",
                    help="ridge penalty, or 'auto' for cross-validation")
    pf.add_argument("--gamma", type=_gamma_flag, default="auto",
                    help="jump penalty, 'auto' for CV, 'default' for 4 log(n)/n")
    pf.add_argument("--folds", type=_fold_count, default=5)
    pf.add_argument("--alpha", type=_alpha_flag, default=0.05)
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=cmd_fit)

    pe = sub.add_parser("evaluate", help="re-estimate a saved model's value on a CSV")
    pe.add_argument("--model", required=True)
    pe.add_argument("--data", required=True)
    pe.add_argument("--alpha", type=_alpha_flag, default=0.05)
    pe.add_argument("--pref", choices=("min", "max", "mid", "uniform"), default="mid")
    pe.add_argument("--plot-data", dest="plot_data", default=None,
                    help="write per-row recommended intervals and doses as TSV")
    pe.set_defaults(func=cmd_evaluate)

    pb = sub.add_parser("bench", help="replicate the simulation study at small scale")
    pb.add_argument("--scenario", type=int, choices=range(1, 6), default=1)
    pb.add_argument("--n", type=_positive_int, required=True)
    pb.add_argument("--p", type=_positive_int, default=4)
    pb.add_argument("--reps", type=_positive_int, required=True)
    pb.add_argument("--method", choices=("ljil", "djil"), default="ljil")
    pb.add_argument("--c", type=_positive_real, default=5.0)
    pb.add_argument("--seed", type=int, default=0)
    pb.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return int(args.func(args))
    except (JilError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  (contract: unexpected -> exit 3)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
