"""Command-line frontend.

Every subcommand accepts ``--config file.json``; each config key has a flag
and flags win over the file.  Results go to stdout as JSON unless
``--format csv`` is given (tabular commands only) or ``--output`` names a
file.  Failures print one JSON line ``{"error": code, "message": ...}`` to
stderr and exit with 2 (invalid input), 3 (numeric or regime problem) or 4
(resource budget).
"""

import argparse
import csv
import io
import json
import math
import sys

import jsonschema

from . import asympt, constants, harness, regimes
from . import estimate as est
from . import simulate as sim
from .errors import (
    ConstantRequiredError,
    DomainError,
    GFQError,
    ParameterError,
    ResourceBudgetError,
)
from .geometry import QueueSpec
from .variance_models import model_from_dict, parse_model

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_BUDGET = 4

_NUM = {"type": "number"}
_MODEL = {"oneOf": [{"type": "string"}, {"type": "object"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": _MODEL,
        "queue": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"c": _NUM, "x": _NUM},
        },
        "horizon": _MODEL,
        "u": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]},
        "T": _NUM,
        "target": {"enum": ["point", "sup"]},
        "targets": {"type": "array", "items": {"enum": ["point", "sup"]}},
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"reps": _NUM, "grid_points": _NUM},
        },
        "constants": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["pickands", "piterbarg", "piterbarg_a", "piterbarg_tilde"]},
                "base": _MODEL,
                "premultiplier": _NUM,
                "time_change": _NUM,
                "d": _NUM,
                "a": _NUM,
                "S": _NUM,
                "grid_step": _NUM,
                "reps": _NUM,
                "method": {"enum": ["measure_change", "crude"]},
                "sup": {"enum": ["auto", "grid"]},
                "cache": {"type": "string"},
                "for_approx": {"type": "boolean"},
            },
        },
        "study": {"enum": ["convergence", "stationarity", "lemma"]},
        "seed": {"type": "integer", "minimum": 0},
        "replicate": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "budget": _NUM,
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"format": {"enum": ["json", "csv"]}, "path": {"type": "string"}},
        },
    },
}

# flag dest -> config path
_FLAG_KEYS = {
    "model": ("model",),
    "c": ("queue", "c"),
    "x": ("queue", "x"),
    "horizon": ("horizon",),
    "u": ("u",),
    "T": ("T",),
    "target": ("target",),
    "targets": ("targets",),
    "reps": ("mc", "reps"),
    "grid": ("mc", "grid_points"),
    "kind": ("constants", "kind"),
    "base": ("constants", "base"),
    "premultiplier": ("constants", "premultiplier"),
    "time_change": ("constants", "time_change"),
    "d": ("constants", "d"),
    "a": ("constants", "a"),
    "S": ("constants", "S"),
    "grid_step": ("constants", "grid_step"),
    "const_reps": ("constants", "reps"),
    "method": ("constants", "method"),
    "sup": ("constants", "sup"),
    "cache": ("constants", "cache"),
    "for_approx": ("constants", "for_approx"),
    "study": ("study",),
    "seed": ("seed",),
    "replicate": ("replicate",),
    "threads": ("threads",),
    "budget": ("budget",),
    "format": ("output", "format"),
    "output": ("output", "path"),
}


class _UsageError(ParameterError):
    code = "usage"


def _count(text):
    """Positive integer that may be written as ``1e6``."""
    v = float(text)
    if not (v >= 1 and v == int(v)):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _common(p, queue=True):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    if queue:
        p.add_argument("--model", help="fbm:H[,scale] or a JSON model block")
        p.add_argument("--c", type=float, help="drain rate")
        p.add_argument("--x", type=float, help="initial backlog")
    p.add_argument("--json", action="store_true", help="JSON output (the default)")
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--output", help="write results to this file")
    p.add_argument("--threads", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="gfq", description="Overflow asymptotics for Gaussian fluid queues.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a horizon family into its asymptotic regime")
    _common(p)
    p.add_argument("--horizon", help="fixed:T, power:k,r, offset:d,b or exp:C[,p]")
    p.add_argument("--u", type=float, nargs="+", help="also report finite-u limit diagnostics")

    p = sub.add_parser("approx", help="evaluate the asymptotic overflow probability")
    _common(p)
    p.add_argument("--horizon")
    p.add_argument("--u", type=float, nargs="+")
    p.add_argument("--target", choices=["point", "sup"])
    p.add_argument("--cache", help="constants cache written by the constants command")

    p = sub.add_parser("estimate", help="crude Monte Carlo estimate of overflow probabilities")
    _common(p)
    p.add_argument("--horizon")
    p.add_argument("--u", type=float, nargs="+")
    p.add_argument("--T", type=float, help="fixed horizon (overrides --horizon)")
    p.add_argument("--reps", type=_count)
    p.add_argument("--grid", type=_count, help="number of grid steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=float)

    p = sub.add_parser("constants", help="estimate a Pickands or Piterbarg constant")
    _common(p)
    p.add_argument("--horizon")
    p.add_argument("--u", type=float, nargs="+")
    p.add_argument("--target", choices=["point", "sup"])
    p.add_argument("--kind", choices=["pickands", "piterbarg", "piterbarg_a", "piterbarg_tilde"])
    p.add_argument("--base", help="base process: fbm:H[,scale], line, or a JSON block")
    p.add_argument("--premultiplier", type=float)
    p.add_argument("--time-change", dest="time_change", type=float)
    p.add_argument("--d", type=float, help="drift rate")
    p.add_argument("--a", type=float, help="backlog level")
    p.add_argument("--S", type=float, help="window length")
    p.add_argument("--grid-step", dest="grid_step", type=float)
    p.add_argument("--reps", dest="const_reps", type=_count)
    p.add_argument("--method", choices=["measure_change", "crude"])
    p.add_argument("--sup", choices=["auto", "grid"])
    p.add_argument("--cache", help="append the estimate(s) to this cache file")
    p.add_argument("--for-approx", dest="for_approx", action="store_true", default=None,
                   help="estimate every constant the approx command needs for this setup")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=float)

    p = sub.add_parser("simulate", help="one sample path of the input and the workload")
    _common(p)
    p.add_argument("--T", type=float)
    p.add_argument("--grid", type=_count)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicate", type=int)

    p = sub.add_parser("study", help="run a validation study from a config")
    _common(p)
    p.add_argument("--horizon")
    p.add_argument("--study", choices=["convergence", "stationarity", "lemma"])
    p.add_argument("--u", type=float, nargs="+")
    p.add_argument("--targets", nargs="+", choices=["point", "sup"])
    p.add_argument("--reps", type=_count)
    p.add_argument("--grid", type=_count)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=float)
    p.add_argument("--cache")
    return ap


# ------------------------------------------------------------------ config


def load_config(args):
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ParameterError(f"config: {exc.message}") from None
    for dest, path in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is None:
            continue
        node = cfg
        for k in path[:-1]:
            node = node.setdefault(k, {})
        node[path[-1]] = v
    return cfg


def _get(cfg, *path, default=None, required=False):
    node = cfg
    for k in path:
        if not isinstance(node, dict) or k not in node:
            if required:
                raise _UsageError(f"missing required setting {'.'.join(path)} (flag or config)")
            return default
        node = node[k]
    return node


def _model(block):
    return parse_model(block) if isinstance(block, str) else model_from_dict(block)


def _spec(cfg):
    model = _model(_get(cfg, "model", required=True))
    return QueueSpec(_get(cfg, "queue", "c", required=True), _get(cfg, "queue", "x", default=0.0), model)


def _family(cfg, required=True):
    block = _get(cfg, "horizon", required=required)
    if block is None:
        return None
    return regimes.parse_horizon(block) if isinstance(block, str) else regimes.family_from_dict(block)


def _levels(cfg):
    u = _get(cfg, "u", required=True)
    return [float(v) for v in (u if isinstance(u, list) else [u])]


def _seed(cfg):
    seed = _get(cfg, "seed")
    if seed is None:
        raise _UsageError("a seed is required (--seed or config 'seed')")
    return seed


def _cache(cfg, path_key=("constants", "cache")):
    path = _get(cfg, *path_key)
    if path:
        try:
            return constants.ConstantsCache.load(path)
        except FileNotFoundError:
            return constants.ConstantsCache()
    return constants.ConstantsCache()


# ------------------------------------------------------------------ output


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(cfg, payload, table=None):
    """Write ``payload`` as JSON, or ``table = (columns, rows)`` as CSV."""
    fmt = _get(cfg, "output", "format", default="json")
    path = _get(cfg, "output", "path")
    if fmt == "csv":
        if table is None:
            raise _UsageError("this command has no tabular output; use --format json")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols, rows = table
        w.writerow(cols)
        for r in rows:
            w.writerow(["n/a" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
        text = buf.getvalue()
    else:
        text = json.dumps(_clean(payload), indent=1) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_classify(cfg):
    spec = _spec(cfg)
    fam = _family(cfg)
    reg = regimes.classify(spec, fam, strict_t3=False)
    out = {"spec": spec.to_dict(), "horizon": fam.to_dict(), "regime": reg.to_dict()}
    if _get(cfg, "u") is not None:
        out["diagnostics"] = [regimes.limit_diagnostics(spec, fam, u) for u in _levels(cfg)]
    _emit(cfg, out)


def cmd_approx(cfg):
    spec = _spec(cfg)
    fam = _family(cfg)
    target = _get(cfg, "target", default="point")
    cache = _cache(cfg)
    results = [asympt.approx_dispatch(spec, fam, u, target, cache).to_dict() for u in _levels(cfg)]
    _emit(cfg, results[0] if len(results) == 1 else results)


def cmd_estimate(cfg):
    spec = _spec(cfg)
    seed = _seed(cfg)
    reps = _get(cfg, "mc", "reps", required=True)
    n = _get(cfg, "mc", "grid_points", required=True)
    us = _levels(cfg)
    T = _get(cfg, "T")
    threads, budget = _get(cfg, "threads"), _get(cfg, "budget")
    rows = []
    if T is not None:
        pairs = est.estimate_pair(spec, T, sorted(us), int(reps), int(n), seed, threads, budget)
        rows = [(u, T, p, s) for u, p, s in pairs]
    else:
        fam = _family(cfg)
        for u in us:
            Tu = regimes.horizon_value(fam, spec, u)
            (_, p, s), = est.estimate_pair(spec, Tu, [u], int(reps), int(n), seed, threads, budget)
            rows.append((u, Tu, p, s))
    payload = [{"u": u, "T": t, "point": p.to_dict(), "sup": s.to_dict()} for u, t, p, s in rows]
    cols = ["u", "T", "target", "p_hat", "std_error", "ci_low", "ci_high", "hits", "replications",
            "grid_points", "seed"]
    table = [(u, t, name, m.p_hat, m.std_error, m.ci_low, m.ci_high, m.hits, m.replications,
              m.grid_points, m.seed) for u, t, p, s in rows for name, m in (("point", p), ("sup", s))]
    _emit(cfg, payload[0] if len(payload) == 1 else payload, (cols, table))


def _mc_settings(cfg):
    return {
        "S": _get(cfg, "constants", "S", default=constants.DEFAULT_S),
        "grid_step": _get(cfg, "constants", "grid_step", default=2.0**-9),
        "reps": int(_get(cfg, "constants", "reps", default=10_000)),
        "seed": _seed(cfg),
        "method": _get(cfg, "constants", "method", default="measure_change"),
        "sup": _get(cfg, "constants", "sup", default="auto"),
        "threads": _get(cfg, "threads"),
        "budget": _get(cfg, "budget"),
    }


def cmd_constants(cfg):
    settings = _mc_settings(cfg)
    path = _get(cfg, "constants", "cache")
    cache = _cache(cfg)
    if _get(cfg, "constants", "for_approx"):
        spec = _spec(cfg)
        fam = _family(cfg)
        cache.auto_estimate = settings
        target = _get(cfg, "target", default="point")
        used = []
        for u in _levels(cfg):
            a = asympt.approx_dispatch(spec, fam, u, target, cache)
            used.extend(a.constants_used)
        results = [{"name": n, "value": v, "source": s if isinstance(s, str) else s.to_dict()}
                   for n, v, s in used]
    else:
        kind = _get(cfg, "constants", "kind", required=True)
        base = _get(cfg, "constants", "base", required=True)
        if base == "line":
            base = constants.StraightLine()
        elif isinstance(base, str):
            base = parse_model(base)
        else:
            base = constants.base_from_dict(base)
        proc = constants.LimitProcessSpec(
            base,
            _get(cfg, "constants", "premultiplier", default=1.0),
            _get(cfg, "constants", "time_change", default=1.0),
        )
        d = _get(cfg, "constants", "d")
        a = _get(cfg, "constants", "a")
        if kind == "pickands":
            e = constants.pickands(proc, **settings)
        elif kind == "piterbarg":
            e = constants.piterbarg(proc, d, **settings)
        elif kind == "piterbarg_a":
            e = constants.piterbarg_a(proc, d, 0.0 if a is None else a, **settings)
        else:
            e = constants.piterbarg_tilde(proc, d, 0.0 if a is None else a, **settings)
        query = constants.ConstantQuery(kind, proc, None if kind == "pickands" else e.d,
                                        a if kind in ("piterbarg_a", "piterbarg_tilde") else None)
        cache.put(query, e)
        exact = constants.closed_form(kind, proc, query.d, query.a)
        results = [dict(e.to_dict(), closed_form=exact)]
    if path:
        cache.save(path)
    _emit(cfg, results[0] if len(results) == 1 else results)


def cmd_simulate(cfg):
    spec = _spec(cfg)
    if not spec.is_fbm:
        raise ParameterError("simulate supports fractional Brownian inputs only")
    T = _get(cfg, "T", required=True)
    n = int(_get(cfg, "mc", "grid_points", required=True))
    seed = _get(cfg, "seed", default=0)
    rep = _get(cfg, "replicate", default=0)
    path = sim.generate_fgn(spec.model.hurst, n, T / n, seed, rep, spec.model.scale)
    wl = sim.workload_path(path, spec.c, spec.x)
    times = path.times.tolist()
    payload = {"step": path.step, "running_sup": wl.running_sup, "t": times,
               "X": path.values.tolist(), "Q": wl.q_values.tolist()}
    table = (["t", "X", "Q"], list(zip(times, path.values.tolist(), wl.q_values.tolist())))
    _emit(cfg, payload, table)


def cmd_study(cfg):
    spec = _spec(cfg)
    fam = _family(cfg)
    kind = _get(cfg, "study", default="convergence")
    fmt = _get(cfg, "output", "format", default="json")
    cache = _cache(cfg)
    if kind == "convergence":
        conf = harness.StudyConfig(
            spec=spec, family=fam, u_grid=_levels(cfg),
            reps=_get(cfg, "mc", "reps", required=True),
            grid_points=_get(cfg, "mc", "grid_points", required=True),
            seed=_seed(cfg),
            targets=tuple(_get(cfg, "targets", default=["point", "sup"])),
            output_format=fmt,
            budget=_get(cfg, "budget", default=harness.DEFAULT_STUDY_BUDGET),
            threads=_get(cfg, "threads"),
        )
        rows, row_type = harness.convergence_study(conf, cache), harness.StudyRow
    elif kind == "stationarity":
        _seed(cfg)
        rows = harness.stationarity_study(spec, fam, _levels(cfg),
                                          tuple(_get(cfg, "targets", default=["point", "sup"])), cache)
        row_type = harness.StationarityRow
    else:
        _seed(cfg)
        us = _levels(cfg) if _get(cfg, "u") is not None else harness.LEMMA_GRID
        rows, row_type = harness.lemma_limit_sweep(spec, fam, us), harness.LemmaRow
    path = _get(cfg, "output", "path")
    if path:
        harness.export(rows, fmt, path, row_type)
        return
    cols = [f for f in row_type.__dataclass_fields__]
    _emit(cfg, [{c: getattr(r, c) for c in cols} for r in rows],
          (cols, [[getattr(r, c) for c in cols] for r in rows]))


COMMANDS = {
    "classify": cmd_classify,
    "approx": cmd_approx,
    "estimate": cmd_estimate,
    "constants": cmd_constants,
    "simulate": cmd_simulate,
    "study": cmd_study,
}


def _fail(code, exc, status, **extra):
    record = {"error": code, "message": str(exc), **extra}
    sys.stderr.write(json.dumps(_clean(record)) + "\n")
    return status


def run(argv=None):
    """Parse ``argv``, run the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
        COMMANDS[args.command](cfg)
    except ConstantRequiredError as exc:
        return _fail(exc.code, exc, EXIT_NUMERIC, query=exc.query)
    except ResourceBudgetError as exc:
        return _fail(exc.code, exc, EXIT_BUDGET)
    except (ParameterError, DomainError) as exc:
        return _fail(exc.code, exc, EXIT_VALIDATION)
    except GFQError as exc:
        return _fail(exc.code, exc, EXIT_NUMERIC)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("io", exc, EXIT_VALIDATION)
    except (ValueError, TypeError, KeyError) as exc:
        return _fail("validation", exc, EXIT_VALIDATION)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
