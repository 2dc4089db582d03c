"""Validation studies and table export.

Three studies are provided:

* :func:`convergence_study` puts crude Monte Carlo next to the asymptotic
  formula for every level of a grid and reports their ratio;
* :func:`stationarity_study` compares transient asymptotics with the
  stationary queue;
* :func:`lemma_limit_sweep` tracks the local geometry (slope, curvature,
  peak location, ``Omega``) against its large-``u`` limits.

Rows are flat dataclasses so that :func:`export` can write them as CSV or
JSON with a fixed column order and :func:`read_rows` can parse them back.
"""

import csv
import dataclasses
import json
import math
import typing
from dataclasses import dataclass

from scipy.optimize import brentq

from . import asympt
from . import estimate as est
from . import geometry as geo
from .constants import ConstantsCache
from .errors import DomainError, ParameterError, UnsupportedBranchError
from .regimes import classify, family_from_dict, horizon_value
from .variance_models import model_from_dict

DEFAULT_STUDY_BUDGET = 10**9
LEMMA_GRID = tuple(10.0**k for k in range(3, 9))
NA = "n/a"


@dataclass(frozen=True)
class StudyConfig:
    """Everything a convergence study needs; validated on construction."""

    spec: geo.QueueSpec
    family: object
    u_grid: tuple
    reps: int
    grid_points: int
    seed: int
    targets: tuple = ("point", "sup")
    output_format: str = "json"
    output_path: str = None
    budget: float = DEFAULT_STUDY_BUDGET
    threads: int = None

    def __post_init__(self):
        us = tuple(float(u) for u in self.u_grid)
        if not us:
            raise ParameterError("u_grid must be nonempty")
        if any(b <= a for a, b in zip(us, us[1:])):
            raise ParameterError("u_grid must be strictly ascending")
        targets = tuple(dict.fromkeys(self.targets))
        if not targets:
            raise ParameterError("targets must name at least one of 'point', 'sup'")
        bad = [t for t in targets if t not in ("point", "sup")]
        if bad:
            raise ParameterError(f"unknown targets {bad}")
        if self.output_format not in ("csv", "json"):
            raise ParameterError(f"output format must be csv or json, got {self.output_format!r}")
        reps, n = int(self.reps), int(self.grid_points)
        if reps < 1 or n < 1:
            raise ParameterError("reps and grid_points must be positive")
        work = float(reps) * n * len(us)
        if work > self.budget:
            est.check_budget(work, self.budget)
        object.__setattr__(self, "u_grid", us)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "reps", reps)
        object.__setattr__(self, "grid_points", n)

    @classmethod
    def from_dict(cls, block):
        """Build from a config mapping with ``model``, ``queue``, ``horizon``,
        ``u_grid``, ``mc`` and optional ``targets``, ``output``, ``budget``."""
        known = {"model", "queue", "horizon", "u_grid", "mc", "targets", "output", "budget", "threads"}
        extra = set(block) - known
        if extra:
            raise ParameterError(f"unknown study keys {sorted(extra)}")
        queue = block["queue"]
        spec = geo.QueueSpec(queue["c"], queue.get("x", 0.0), model_from_dict(block["model"]))
        mc = block["mc"]
        out = block.get("output", {})
        return cls(
            spec=spec,
            family=family_from_dict(block["horizon"]),
            u_grid=block["u_grid"],
            reps=mc["reps"],
            grid_points=mc["grid_points"],
            seed=mc["seed"],
            targets=tuple(block.get("targets", ("point", "sup"))),
            output_format=out.get("format", "json"),
            output_path=out.get("path"),
            budget=block.get("budget", DEFAULT_STUDY_BUDGET),
            threads=block.get("threads"),
        )


@dataclass(frozen=True)
class StudyRow:
    u: float
    T_u: float
    target: str
    regime: str
    formula_id: str
    p_hat: float
    std_error: float
    ci_low: float
    ci_high: float
    hits: int
    log_value: typing.Optional[float]
    ratio: typing.Optional[float]
    replications: int
    grid_points: int
    seed: int


@dataclass(frozen=True)
class StationarityRow:
    u: float
    T_u: typing.Optional[float]
    target: str
    relation: str
    predicted_factor: typing.Optional[float]
    transient_log: typing.Optional[float]
    stationary_log: typing.Optional[float]
    realized_ratio: typing.Optional[float]
    flags: str


@dataclass(frozen=True)
class LemmaRow:
    u: float
    T_u: float
    a_u: float
    a_limit: float
    a_error: float
    b_u: float
    b_limit: float
    b_rel_error: float
    t_ratio: float
    t_star: float
    omega: float
    omega_limit: typing.Optional[float]


# ------------------------------------------------------------------ studies


def _ratio(p_hat, log_value):
    if log_value is None or not p_hat > 0:
        return None
    return math.exp(math.log(p_hat) - log_value)


def convergence_study(config, cache=None):
    """Monte Carlo and asymptotics side by side, one row per ``(u, target)``.

    Every level is simulated with the same seed on its own horizon ``T_u``.
    """
    cfg = config
    strict = "sup" in cfg.targets
    regime = classify(cfg.spec, cfg.family, strict_t3=strict)
    cache = cache if cache is not None else ConstantsCache()
    rows = []
    for u in cfg.u_grid:
        T = horizon_value(cfg.family, cfg.spec, u)
        (_, point, sup), = est.estimate_pair(cfg.spec, T, [u], cfg.reps, cfg.grid_points, cfg.seed,
                                             cfg.threads, cfg.budget)
        for target in cfg.targets:
            a = asympt.approx_dispatch(cfg.spec, cfg.family, u, target, cache)
            if a.regime.scenario != regime.scenario:
                raise DomainError(f"regime changed within the study at u={u}")
            mc = point if target == "point" else sup
            rows.append(StudyRow(
                u=u, T_u=T, target=target, regime=regime.scenario.value, formula_id=a.formula_id,
                p_hat=mc.p_hat, std_error=mc.std_error, ci_low=mc.ci_low, ci_high=mc.ci_high,
                hits=mc.hits, log_value=a.log_value, ratio=_ratio(mc.p_hat, a.log_value),
                replications=mc.replications, grid_points=mc.grid_points, seed=mc.seed,
            ))
    return rows


def stationarity_study(spec, family, u_grid, targets=("point", "sup"), cache=None, symbolic=False):
    """Transient asymptotics against the stationary queue at each level.

    The point reference ``P(Q* > u)`` is closed-form only for Brownian
    input; other models need ``symbolic=True``, which reports the predicted
    relation without numbers.
    """
    brownian = spec.is_fbm and spec.model.hurst == 0.5
    if "point" in targets and not (brownian or symbolic):
        raise UnsupportedBranchError("numeric stationarity study needs Brownian input; pass symbolic=True")
    pred = asympt.stationary_ratio(spec, family)
    rows = []
    for u in u_grid:
        u = float(u)
        T = _try_horizon(family, spec, u)
        for target in targets:
            p = pred[target]
            fac = p["factor"]
            flags = list(p["flags"])
            trans = ref = realized = None
            if p["relation"] == "asymptotic" and not symbolic:
                trans = asympt.approx_dispatch(spec, family, u, target, cache).log_value
                if target == "point":
                    ref = asympt.stationary_reference_log(spec, u)
                elif T is not None:
                    ref = asympt.stationary_sup_reference_log(spec, u, T, cache)
                if ref is not None:
                    realized = math.exp(trans - ref)
            rows.append(StationarityRow(u, T, target, p["relation"], fac, trans, ref, realized,
                                        ";".join(flags)))
    return rows


def _try_horizon(family, spec, u):
    try:
        return horizon_value(family, spec, u)
    except Exception:  # noqa: BLE001 - exponential horizons may overflow
        return None


def lemma_limit_sweep(spec, family, u_grid=LEMMA_GRID):
    """Local geometry over a grid of levels with the limits it should approach."""
    reg = classify(spec, family, strict_t3=False)
    a_inf = spec.alpha
    g = reg.horizon_rate if reg.horizon_rate is not None else reg.gamma
    if g is None:
        a_lim = a_inf
    elif math.isinf(g):
        a_lim = a_inf - 1.0
    else:
        a_lim = a_inf - spec.c * g / (1.0 + spec.c * g)
    A, B = geo.ab_constants(spec)
    b_lim = B / (2.0 * A)
    ts = geo.t_star(spec)
    om_lim = reg.omega_inf
    rows = []
    for u in u_grid:
        u = float(u)
        T = horizon_value(family, spec, u)
        a_u = geo.local_slope_a(spec, u, T)
        b_u = geo.local_curvature_b(spec, u)
        rows.append(LemmaRow(
            u=u, T_u=T, a_u=a_u, a_limit=a_lim, a_error=abs(a_u - a_lim),
            b_u=b_u, b_limit=b_lim, b_rel_error=abs(b_u / b_lim - 1.0),
            t_ratio=geo.t_peak(spec, u) / u, t_star=ts,
            omega=geo.omega_ratio(spec, u, T), omega_limit=om_lim,
        ))
    return rows


def solve_level(spec, family, log_prob, target="point", lo=1.0, hi=1e6, cache=None):
    """Level ``u`` at which the asymptotic log-probability equals ``log_prob`` (bisection)."""
    f = lambda u: asympt.approx_dispatch(spec, family, u, target, cache).log_value - log_prob  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise DomainError(f"log_prob={log_prob} is not bracketed by u in [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-10, rtol=1e-12)


# ------------------------------------------------------------------ export


def _columns(row_type):
    return [f.name for f in dataclasses.fields(row_type)]


def _encode(v):
    if v is None:
        return NA
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def export(rows, fmt, path, row_type=None):
    """Write rows as CSV (header plus ``repr`` floats, ``n/a`` for missing)
    or as a JSON array of objects in column order."""
    rows = list(rows)
    row_type = row_type or (type(rows[0]) if rows else StudyRow)
    cols = _columns(row_type)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_encode(getattr(r, c)) for c in cols])
    elif fmt == "json":
        data = [{c: _json_value(getattr(r, c)) for c in cols} for r in rows]
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
    else:
        raise ParameterError(f"unknown export format {fmt!r}")


def _decode(text, hint):
    if text is None or text == NA:
        return None
    base = [t for t in typing.get_args(hint) if t is not type(None)] or [hint]
    kind = base[0]
    if kind is float:
        return float(text)
    if kind is int:
        return int(text)
    return text


def read_rows(path, fmt, row_type=StudyRow):
    """Parse a file written by :func:`export` back into rows."""
    hints = typing.get_type_hints(row_type)
    if fmt == "csv":
        with open(path, newline="") as fh:
            records = list(csv.DictReader(fh))
    elif fmt == "json":
        with open(path) as fh:
            records = json.load(fh)
        records = [{k: (v if not isinstance(v, (int, float)) or isinstance(v, bool) else str(v))
                    for k, v in rec.items()} for rec in records]
    else:
        raise ParameterError(f"unknown export format {fmt!r}")
    return [row_type(**{k: _decode(rec[k], hints[k]) for k in _columns(row_type)}) for rec in records]
