"""``geostat`` command line: generate, split, fit, predict, score, effrange, render.

Every failure prints one line ``error:<code>: <message>`` on stderr and exits
nonzero (2 unknown preset or bad usage, 3 dense cap, 4 incompatible scheme,
5 row-key mismatch, 6 unsupported kind, 1 anything else).

Fitted-parameter names per family:
  nugget        tau (options: mean=zero|mean1a|mean1b)
  matern        sigma2 range smoothness nugget
  gneiting      sigma2 range_space range_time alpha beta smoothness nugget
  parsimonious  sigma2_1 sigma2_2 beta12 smoothness_1 smoothness_2 range
  flexible      sigma2_1 sigma2_2 beta12 smoothness_1 smoothness_2 range_1 range_2 tau_bar
  nonstat       sigma_k lambda1_k lambda2_k site_x_k site_y_k (k = 1..M)
                bandwidth rotation smoothness nugget
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import io
from . import kernels as K
from .errors import DomainError, GeostatError, MaxEvaluationsExceeded, UnsupportedKind
from .fields import Design, Kind, SplitScheme, make_bivariate_design, make_spacetime_design, split
from .fields import sample_uniform_locations
from .inference import Exact, OptimizerConfig, Vecchia, fit_mle
from .predict import exact_kriging, local_kriging
from .score import ScoreReport, score_dataset
from .simulate import (
    DENSE_CAP,
    FAMILIES,
    BivariateMatern,
    Gneiting,
    NonstatMatern,
    StationaryMatern,
    generate,
    parse_model_spec,
    sample_grf,
)

DEFAULT_SEED = 0
DEFAULT_SLOTS = 100
TIME_BRACKET = (0.0, 1e6)
SPACE_BRACKET = (0.0, 100.0)
# linear ramp from dark blue (minimum) to light yellow (maximum)
RAMP_LO = np.array([20.0, 30.0, 120.0])
RAMP_HI = np.array([250.0, 230.0, 90.0])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error:usage: {message}", file=sys.stderr)
        sys.exit(2)


def _threads(value: str):
    if value == "auto":
        return None
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'")
    return n


def _common(p):
    p.add_argument("--seed", type=int, help=f"64-bit seed (default {DEFAULT_SEED})")
    p.add_argument("--threads", type=_threads, help="worker threads or 'auto' (env GEOSTAT_THREADS)")
    p.add_argument("--config", help="flat 'key = value' file; flags override its values")
    p.add_argument("--out", help="output path or prefix")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="geostat", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="simulate a dataset from a preset or an inline model")
    g.add_argument("--preset", help="published configuration, e.g. ST2, 3a-1, 1a-2")
    g.add_argument("--model", help="inline spec family:key=value,... (uniform locations)")
    g.add_argument("--n", type=int, help="number of spatial locations")
    g.add_argument("--m-slots", type=int, help="time slots for space-time data")
    g.add_argument("--dense-cap", type=int, help=f"largest exactly simulated size (default {DENSE_CAP})")
    _common(g)

    s = sub.add_parser("split", help="train/test split by a missingness scheme")
    s.add_argument("input")
    s.add_argument("--scheme", help="random10 | rs | rst | t10 (default: the dataset's preset scheme)")
    s.add_argument("--fraction", type=float, help="test fraction (default 0.1, ignored by t10)")
    _common(s)

    f = sub.add_parser("fit", help="maximum-likelihood fit; writes a key-value result file")
    f.add_argument("input")
    f.add_argument("--model", help="family, or family:key=value,... as starting values")
    f.add_argument("--neighbors", help="Vecchia neighbor count")
    f.add_argument("--exact", action="store_true", help="exact likelihood (after Vecchia if both given)")
    f.add_argument("--max-evaluations", type=int, help="Nelder-Mead evaluation budget")
    _common(f)

    p = sub.add_parser("predict", help="kriging predictions for a targets file")
    p.add_argument("train")
    p.add_argument("targets")
    p.add_argument("--model", help="model spec or a fit result file (default: the training metadata model)")
    p.add_argument("--neighbors", help="neighbor count or 'all'")
    p.add_argument("--exact", action="store_true", help="exact kriging on the whole training set")
    _common(p)

    c = sub.add_parser("score", help="RMSE per dataset and MCRMSE")
    c.add_argument("pairs", nargs="+", help="TRUTH.csv PREDICTIONS.csv [TRUTH.csv PREDICTIONS.csv ...]")
    _common(c)

    e = sub.add_parser("effrange", help="distance or lag where correlation falls to 0.05")
    e.add_argument("--model", help="inline model spec")
    e.add_argument("--preset", help="take the model from a preset")
    e.add_argument("--axis", choices=("space", "time"), default="space")
    e.add_argument("--pair", choices=("11", "22", "12"), default="11", help="bivariate component")
    _common(e)

    r = sub.add_parser("render", help="PPM heat map of a spatial field")
    r.add_argument("input")
    r.add_argument("--resolution", type=int, help="pixels per side (default 256)")
    r.add_argument("--slot", type=float, help="time slot to draw from space-time data")
    _common(r)
    return ap


def _merge_config(args) -> None:
    """Fill unset flags from ``--config``; explicit flags win."""
    if not args.config:
        return
    for key, value in io.read_kv(args.config).items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise DomainError(f"config key {key!r} is not an option of {args.command}")
        current = getattr(args, attr)
        if current is None or current is False:
            if attr == "threads":
                value = _threads(value)
            elif attr in ("seed", "n", "m_slots", "dense_cap", "resolution", "max_evaluations"):
                value = int(value)
            elif attr in ("fraction", "slot"):
                value = float(value)
            elif attr == "exact":
                value = value.lower() in ("1", "true", "yes")
            setattr(args, attr, value)


def _seed(args) -> int:
    return DEFAULT_SEED if args.seed is None else args.seed


def _require_out(args) -> str:
    if not args.out:
        raise DomainError(f"{args.command} needs --out")
    return args.out


# -- commands ---------------------------------------------------------------------


def _inline_design(model, n: int, m_slots: int | None, seed: int) -> Design:
    pts = sample_uniform_locations(n, seed)
    if model.kind is Kind.SPACETIME:
        return make_spacetime_design(pts, m_slots or DEFAULT_SLOTS)
    if model.kind is Kind.BIVARIATE:
        return make_bivariate_design(pts)
    return Design(Kind.SPATIAL, pts)


def cmd_generate(args) -> int:
    out = _require_out(args)
    seed = _seed(args)
    cap = args.dense_cap or DENSE_CAP
    if bool(args.preset) == bool(args.model):
        raise DomainError("give exactly one of --preset and --model")
    if args.preset:
        data = generate(args.preset, seed, n=args.n, m_slots=args.m_slots, dense_cap=cap, threads=args.threads)
    else:
        if not args.n:
            raise DomainError("--model needs --n")
        model = parse_model_spec(args.model)
        design = _inline_design(model, args.n, args.m_slots, seed)
        meta = {"n": args.n, "layout": "uniform"}
        if model.kind is Kind.SPACETIME:
            meta["m_slots"] = args.m_slots or DEFAULT_SLOTS
        data = sample_grf(model, design, seed, dense_cap=cap, threads=args.threads, metadata=meta)
    io.write_dataset(out, data)
    io.write_kv(io.sidecar(out), data.metadata)
    print(f"wrote {len(data)} rows to {out}")
    return 0


def cmd_split(args) -> int:
    prefix = _require_out(args)
    data = io.read_dataset(args.input)
    scheme = args.scheme or data.metadata.get("scheme")
    if not scheme:
        raise DomainError("no --scheme given and the dataset metadata names none")
    fraction = 0.1 if args.fraction is None else args.fraction
    seed = _seed(args)
    tts = split(data, SplitScheme(scheme, fraction), seed)
    meta = dict(data.metadata)
    meta.update(split_scheme=SplitScheme(scheme).kind.value, split_fraction=fraction, split_seed=seed)
    io.write_dataset(f"{prefix}.train.csv", tts.train)
    io.write_kv(io.sidecar(f"{prefix}.train.csv"), meta)
    io.write_dataset(f"{prefix}.test.csv", tts.test)
    io.write_targets(f"{prefix}.targets.csv", tts.test.design)
    print(f"train {len(tts.train)} rows, test {len(tts.test)} rows")
    return 0


def _neighbors(value):
    if value is None:
        return None
    if str(value).lower() == "all":
        return "all"
    m = int(value)
    if m < 1:
        raise DomainError("--neighbors must be positive or 'all'")
    return m


def cmd_fit(args) -> int:
    out = _require_out(args)
    data = io.read_dataset(args.input)
    spec = args.model or (data.metadata.get("model", "").partition(":")[0])
    if not spec:
        raise DomainError("fit needs --model")
    family, _, body = spec.partition(":")
    family = family.strip().lower()
    if family not in FAMILIES:
        raise DomainError(f"unknown model family {family!r}; expected one of {', '.join(FAMILIES)}")
    init = options = None
    if body:
        start = parse_model_spec(spec)
        init, options = start.params(), start.options()
    cfg = OptimizerConfig(max_evaluations=args.max_evaluations or OptimizerConfig.max_evaluations)
    m = _neighbors(args.neighbors)
    if m == "all":
        m = max(len(data) - 1, 0)
    stages = []
    if m is not None:
        stages.append(Vecchia(m))
    if args.exact or m is None:
        stages.append(Exact())
    total = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxEvaluationsExceeded)
        for stage in stages:
            res = fit_mle(family, data, init, cfg, stage, options=options, threads=args.threads)
            init, options = res.params, res.model.options()
            total += res.evaluations
    items = {
        "family": res.family,
        "likelihood": res.likelihood,
        "loglik": res.loglik,
        "evaluations": total,
        "converged": str(res.converged).lower(),
        "model": res.model.spec(),
    }
    items.update({f"param.{k}": float(v) for k, v in res.params.items()})
    io.write_kv(out, items)
    print(io.kv_text(items), end="")
    return 0


def _resolve_model(value, train):
    if value is None:
        spec = train.metadata.get("model")
        if not spec:
            raise DomainError("no --model given and the training metadata names none")
        return parse_model_spec(spec)
    if Path(value).is_file():
        kv = io.read_kv(value)
        if "model" not in kv:
            raise DomainError(f"{value}: no 'model' entry")
        return parse_model_spec(kv["model"])
    return parse_model_spec(value)


def cmd_predict(args) -> int:
    out = _require_out(args)
    train = io.read_dataset(args.train)
    targets, _ = io.read_table(args.targets)
    model = _resolve_model(args.model, train)
    m = _neighbors(args.neighbors)
    if args.exact and m is not None:
        raise DomainError("give at most one of --exact and --neighbors")
    if m == "all":
        m = len(train)
    if m is None and not args.exact:
        m = "exact" if len(train) <= DENSE_CAP else 30
    if args.exact or m == "exact":
        pred = exact_kriging(model, train, targets, threads=args.threads)
    else:
        pred = local_kriging(model, train, targets, m, threads=args.threads)
    io.write_predictions(out, targets, pred.mean, pred.variance)
    print(f"wrote {len(pred)} predictions to {out}")
    return 0


def cmd_score(args) -> int:
    if len(args.pairs) % 2:
        raise DomainError("score takes TRUTH PREDICTIONS pairs")
    scores = []
    for truth_path, pred_path in zip(args.pairs[::2], args.pairs[1::2]):
        truth, tcols = io.read_table(truth_path)
        sub, scols = io.read_table(pred_path)
        if "z" not in tcols:
            raise DomainError(f"{truth_path}: no z column")
        if "zhat" not in scols:
            raise DomainError(f"{pred_path}: no zhat column")
        name = Path(truth_path).name.removesuffix(".csv").removesuffix(".test")
        scores.append(score_dataset(name, sub, scols["zhat"], truth, tcols["z"]))
    report = ScoreReport.build(scores)
    text = report.to_text()
    if args.out:
        io.atomic_write(args.out, report.to_csv() if args.out.endswith(".csv") else text)
    print(text, end="")
    return 0


def _effrange_correlation(model, axis: str, pair: str):
    if axis == "time":
        if not isinstance(model, Gneiting):
            raise UnsupportedKind("a temporal effective range needs a space-time model")
        p = model.p
        return lambda u: K.gneiting_temporal_factor(p.range_time, p.alpha, u)
    if isinstance(model, Gneiting):
        p = model.p
        return lambda h: K.matern_correlation(p.smoothness, h / p.range_space)
    if isinstance(model, BivariateMatern):
        i, j = int(pair[0]), int(pair[1])
        p = model.p
        c0 = K.bivariate_matern_cov(p, 0.0, i, j)
        return lambda h: K.bivariate_matern_cov(p, h, i, j) / c0
    if isinstance(model, NonstatMatern):
        raise UnsupportedKind("the nonstationary model has no single effective range")
    if isinstance(model, StationaryMatern):
        p = model.p
        return lambda h: K.matern_correlation(p.smoothness, h / p.range)
    raise UnsupportedKind(f"{model.family} model has no correlation range")


def cmd_effrange(args) -> int:
    from .simulate import preset

    if bool(args.preset) == bool(args.model):
        raise DomainError("give exactly one of --preset and --model")
    model = preset(args.preset).model if args.preset else parse_model_spec(args.model)
    corr = _effrange_correlation(model, args.axis, args.pair)
    try:
        value = K.effective_range(corr, bracket=TIME_BRACKET if args.axis == "time" else SPACE_BRACKET)
    except K.Unbounded:
        print("inf")
        return 0
    print(f"{value:.6f}")
    return 0


def render_ppm(design: Design, values: np.ndarray, resolution: int) -> bytes:
    """Nearest-data-point heat map; image row 0 is the top edge (y = 1)."""
    c = (np.arange(resolution) + 0.5) / resolution
    px, py = np.meshgrid(c, c[::-1], indexing="xy")
    _, idx = cKDTree(design.coords).query(np.column_stack([px.ravel(), py.ravel()]))
    v = values[idx]
    lo, hi = float(values.min()), float(values.max())
    frac = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    rgb = np.rint(RAMP_LO + frac[:, None] * (RAMP_HI - RAMP_LO)).astype(np.uint8)
    return f"P6\n{resolution} {resolution}\n255\n".encode() + rgb.tobytes()


def cmd_render(args) -> int:
    out = _require_out(args)
    data = io.read_dataset(args.input, metadata={})
    design, z = data.design, data.values
    if design.kind is Kind.BIVARIATE:
        raise UnsupportedKind("render draws one variable; bivariate input is not supported")
    if design.kind is Kind.SPACETIME:
        slots = np.unique(design.t)
        if args.slot is None and slots.size > 1:
            raise UnsupportedKind(f"space-time input has {slots.size} slots; choose one with --slot")
        keep = design.t == (slots[0] if args.slot is None else args.slot)
        if not keep.any():
            raise DomainError(f"no rows at slot {args.slot}")
        design, z = design.take(np.flatnonzero(keep)), z[keep]
    res = args.resolution or 256
    if res < 1:
        raise DomainError("resolution must be positive")
    payload = render_ppm(design, z, res)
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)
    print(f"wrote {res}x{res} image to {out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "split": cmd_split,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "score": cmd_score,
    "effrange": cmd_effrange,
    "render": cmd_render,
}


def _one_line(e: Exception) -> str:
    lines = str(e).splitlines()
    return lines[0] if lines else type(e).__name__


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _merge_config(args)
        return COMMANDS[args.command](args)
    except GeostatError as e:
        print(f"error:{e.code}: {_one_line(e)}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"error:{'io' if isinstance(e, OSError) else 'invalid'}: {_one_line(e)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
