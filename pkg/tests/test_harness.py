import json
import math

import pytest

from gfq import geometry as G
from gfq import harness as Hh
from gfq import regimes as R
from gfq.errors import DomainError, ParameterError, ResourceBudgetError, UnsupportedBranchError
from gfq.variance_models import FractionalBrownian


def bm(scale=1.0, x=0.0):
    return G.QueueSpec(1.0, x, FractionalBrownian(0.5, scale))


@pytest.fixture(scope="module")
def study_rows():
    cfg = Hh.StudyConfig(bm(5.0), R.PowerLaw(0.5, 1), (2.0, 5.0), 20_000, 512, seed=1)
    return Hh.convergence_study(cfg)


def test_convergence_rows(study_rows):
    assert [(r.u, r.target) for r in study_rows] == [(2.0, "point"), (2.0, "sup"), (5.0, "point"), (5.0, "sup")]
    by = {(r.u, r.target): r for r in study_rows}
    assert 0.5 <= by[5.0, "point"].ratio <= 2.0
    for u in (2.0, 5.0):
        assert by[u, "sup"].p_hat >= by[u, "point"].p_hat
        assert by[u, "point"].regime == "ShortOmegaFinite"
        assert by[u, "point"].T_u == pytest.approx(u / 2)


def test_ratio_missing_without_hits():
    cfg = Hh.StudyConfig(bm(), R.PowerLaw(0.5, 1), (20.0,), 1000, 16, seed=2, targets=("point",))
    (row,) = Hh.convergence_study(cfg)
    assert row.hits == 0 and row.ratio is None


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_export_round_trip(study_rows, tmp_path, fmt):
    path = tmp_path / f"rows.{fmt}"
    Hh.export(study_rows, fmt, path)
    assert Hh.read_rows(path, fmt) == study_rows


def test_csv_encodes_missing_as_na(tmp_path):
    row = Hh.StudyRow(1.0, 1.0, "point", "x", "f", 0.0, 0.0, 0.0, 1.0, 0, None, None, 10, 4, 0)
    Hh.export([row], "csv", tmp_path / "r.csv")
    body = (tmp_path / "r.csv").read_text().splitlines()
    assert body[1].endswith("n/a,n/a,10,4,0")
    assert Hh.read_rows(tmp_path / "r.csv", "csv") == [row]


@pytest.mark.parametrize("fmt, expected", [("csv", "u,T_u,target"), ("json", "[]")])
def test_empty_export(tmp_path, fmt, expected):
    Hh.export([], fmt, tmp_path / "e", Hh.StudyRow)
    assert (tmp_path / "e").read_text().startswith(expected)


def test_unknown_format(tmp_path):
    with pytest.raises(ParameterError):
        Hh.export([], "xml", tmp_path / "e", Hh.StudyRow)


@pytest.mark.parametrize("kw", [
    dict(u_grid=()), dict(u_grid=(2.0, 1.0)), dict(targets=()), dict(targets=("mean",)),
    dict(output_format="xml"), dict(reps=0),
])
def test_config_validation(kw):
    args = dict(spec=bm(), family=R.PowerLaw(1, 0.5), u_grid=(1.0,), reps=10, grid_points=4, seed=0)
    args.update(kw)
    with pytest.raises(ParameterError):
        Hh.StudyConfig(**args)


def test_config_budget():
    with pytest.raises(ResourceBudgetError):
        Hh.StudyConfig(bm(), R.PowerLaw(1, 0.5), (1.0, 2.0), 10**6, 10**3, seed=0)


def test_config_from_dict():
    block = {"model": {"kind": "fbm", "hurst": 0.5}, "queue": {"c": 1.0}, "horizon": {"kind": "power", "kappa": 1, "rho": 0.5},
             "u_grid": [1, 2], "mc": {"reps": 10, "grid_points": 4, "seed": 3}, "targets": ["sup", "sup"]}
    cfg = Hh.StudyConfig.from_dict(json.loads(json.dumps(block)))
    assert cfg.u_grid == (1.0, 2.0) and cfg.targets == ("sup",) and cfg.seed == 3
    with pytest.raises(ParameterError):
        Hh.StudyConfig.from_dict(dict(block, colour="red"))


def test_stationarity_rows():
    rows = Hh.stationarity_study(bm(), R.OffsetFromPeak(0, 1), [50.0, 5000.0])
    point = [r for r in rows if r.target == "point"]
    assert point[-1].realized_ratio == pytest.approx(0.5, rel=0.02)
    assert point[0].predicted_factor == 0.5
    sup = [r for r in rows if r.target == "sup"]
    assert sup[0].flags == "degenerate-prefactor"


def test_stationarity_needs_brownian_unless_symbolic():
    spec = G.QueueSpec(1.0, 0.0, FractionalBrownian(0.75))
    with pytest.raises(UnsupportedBranchError):
        Hh.stationarity_study(spec, R.PowerLaw(2, 1), [10.0])
    rows = Hh.stationarity_study(spec, R.PowerLaw(4, 1), [10.0], symbolic=True)
    assert all(r.transient_log is None for r in rows)


@pytest.mark.parametrize("H", [0.25, 0.5, 0.75])
def test_lemma_sweep_converges(H):
    spec = G.QueueSpec(1.0, 0.0, FractionalBrownian(H))
    rows = Hh.lemma_limit_sweep(spec, R.PowerLaw(1, 0.5))
    assert rows[-1].a_error < rows[0].a_error
    assert rows[-1].b_rel_error < 1e-3
    assert all(r.t_ratio == pytest.approx(r.t_star, rel=1e-12) for r in rows)


def test_solve_level_inverts_dispatch():
    u = Hh.solve_level(bm(), R.PowerLaw(1, 0.8), math.log(1e-3))
    from gfq.asympt import approx_dispatch

    assert approx_dispatch(bm(), R.PowerLaw(1, 0.8), u).value == pytest.approx(1e-3, rel=1e-9)
    with pytest.raises(DomainError):
        Hh.solve_level(bm(), R.PowerLaw(1, 0.8), 1.0)
