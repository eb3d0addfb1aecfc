import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robsel import cli
from robsel.cli_io import (
    DataError,
    FitRunConfig,
    SimulateRunConfig,
    StandInConfig,
    UsageError,
    dataset_to_csv,
    ingest_csv,
    resolve_config,
    screen_columns,
    synth_standin,
)
from robsel.loss import Dataset


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_ingest_no_missing(tmp_path):
    data = ingest_csv(_write(tmp_path, "y,g1,g2\n1,2,3\n4,5,6\n7,8,9\n"), "y")
    assert data.complete.tolist() == [1, 1, 1]
    assert data.missing_block == ()
    assert data.names == ("g1", "g2")
    assert data.response.tolist() == [1.0, 4.0, 7.0]


def test_ingest_one_na(tmp_path):
    data = ingest_csv(_write(tmp_path, "y,g1,g2\n1,2,3\n4,5,NA\n7,8,9\n"), "y")
    assert data.complete.tolist() == [1, 0, 1]
    assert [data.names[k] for k in data.missing_block] == ["g2"]


def test_ingest_custom_token_and_empty_cell(tmp_path):
    p = _write(tmp_path, "g1,y\n-999,1\n2,2\n,3\n")
    with pytest.raises(DataError, match="row 4"):
        ingest_csv(p, "y", na_token="-999")
    data = ingest_csv(p, "y")
    assert data.complete.tolist() == [1, 1, 0]


@pytest.mark.parametrize(
    "text, match",
    [
        ("y,g1\n1,abc\n", "row 2, column 'g1'"),
        ("y,g1\nNA,2\n", "absent"),
        ("y,g1,g1\n1,2,3\n", "duplicate"),
        ("z,g1\n1,2\n", "not found"),
        ("y,g1\n1,2,3\n", "row 2 has 3 cells"),
        ("", "no header"),
        ("y,g1\n1,1_0\n", "non-numeric"),
    ],
)
def test_ingest_errors(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        ingest_csv(_write(tmp_path, text), "y")


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest_csv(tmp_path / "nope.csv", "y")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=finite),
       st.data())
def test_csv_round_trip(tmp_path_factory, X, draw):
    n, d = X.shape
    y = draw.draw(arrays(np.float64, (n,), elements=finite))
    mask = draw.draw(arrays(np.bool_, (n, d)))
    X = X.copy()
    X[mask] = np.nan
    data = Dataset.from_arrays(y, X, names=[f"c{j}" for j in range(d)])
    p = tmp_path_factory.mktemp("rt") / "x.csv"
    p.write_text(dataset_to_csv(data, "resp"), encoding="utf-8")
    back = ingest_csv(p, "resp")
    assert np.array_equal(back.response, data.response)
    assert np.array_equal(back.design, data.design, equal_nan=True)
    assert back.complete.tolist() == data.complete.tolist()
    assert back.missing_block == data.missing_block
    assert back.names == data.names


def _screen_data():
    rng = np.random.default_rng(0)
    y = rng.normal(size=30)
    X = rng.normal(size=(30, 5))
    X[:, 2] = y
    X[:, 4] = -y
    return Dataset.from_arrays(y, X)


def test_screen_perfect_correlations_rank_first():
    data = _screen_data()
    res = screen_columns(data, 5, 5, np.random.default_rng(0))
    assert res.indices[:2] == (2, 4)  # tie at |corr| = 1 broken by index
    assert res.correlations[0] == pytest.approx(1.0)
    assert res.correlations[1] == pytest.approx(1.0)


def test_screen_matches_brute_force():
    rng = np.random.default_rng(1)
    y = rng.normal(size=20)
    X = rng.normal(size=(20, 5)) + 0.3 * np.arange(1, 6) * y[:, None]
    X[3, 1] = np.nan
    res = screen_columns(Dataset.from_arrays(y, X), 5, 5, np.random.default_rng(0))
    brute = []
    for j in range(5):
        m = ~np.isnan(X[:, j])
        brute.append(abs(np.corrcoef(X[m, j], y[m])[0, 1]))
    order = sorted(range(5), key=lambda j: (-brute[j], j))
    assert list(res.indices) == order
    assert np.allclose(res.correlations, [brute[j] for j in order], rtol=1e-12)


def test_screen_prefix_monotone_and_deterministic():
    rng = np.random.default_rng(2)
    data = Dataset.from_arrays(rng.normal(size=25), rng.normal(size=(25, 40)))
    full = screen_columns(data, 10, 30, np.random.default_rng(5))
    for k in range(1, 10):
        assert screen_columns(data, k, 30, np.random.default_rng(5)).indices == full.indices[:k]


def test_screen_excludes_sparse_and_zeroes_constant_columns():
    rng = np.random.default_rng(3)
    y = rng.normal(size=10)
    X = rng.normal(size=(10, 4))
    X[2:, 0] = np.nan  # only two observed pairs
    X[:, 1] = 7.0
    res = screen_columns(Dataset.from_arrays(y, X), 3, 4, np.random.default_rng(0))
    assert "x1" in res.excluded
    assert 0 not in res.indices
    assert res.correlations[-1] == 0.0 and res.indices[-1] == 1


def test_screen_bad_sizes():
    with pytest.raises(ValueError):
        screen_columns(_screen_data(), 6, 5, np.random.default_rng(0))


def test_standin_shape():
    data = synth_standin(StandInConfig(d=300, seed=1))
    assert data.n == 98 and data.d == 300
    assert 0 < data.complete.sum() < 98
    assert data.missing_block == (5, 6, 7)


def test_config_precedence(tmp_path):
    file_values = {"input": "a.csv", "seed": 4, "hs": [1.0]}
    cfg = resolve_config(FitRunConfig, file_values, {"seed": 9, "penalties": None})
    assert cfg.seed == 9
    assert cfg.hs == (1.0,)
    assert cfg.penalties == ("lasso", "scad", "mcp", "atan")
    with pytest.raises(UsageError):
        resolve_config(FitRunConfig, {"bogus": 1}, {})
    with pytest.raises(UsageError):
        resolve_config(SimulateRunConfig, {}, {"conditions": ["sideways"]})


def test_cli_usage_error(capsys):
    assert cli.run(["fit", "--bogus"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 1


def test_cli_bad_input_leaves_no_outputs(tmp_path, capsys):
    code = cli.run(["fit", "--input", str(tmp_path / "missing.csv"), "--response", "y",
                    "--output-dir", str(tmp_path)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "DataError"
    assert list(tmp_path.iterdir()) == []


def test_cli_no_complete_rows_is_data_error(tmp_path, capsys):
    p = _write(tmp_path, "y,a,b\n1,NA,2\n2,NA,1\n3,NA,4\n4,NA,3\n")
    out = tmp_path / "out"
    out.mkdir()
    code = cli.run(["fit", "--input", str(p), "--response", "y", "--output-dir", str(out), "--no-screen",
                    "--penalty", "lasso", "--h", "1"])
    assert code == 2
    assert list(out.iterdir()) == []


def test_cli_synth_screen_fit(tmp_path):
    data_path = tmp_path / "standin.csv"
    assert cli.run(["synth", "--output", str(data_path), "--d", "400", "--seed", "2"]) == 0
    assert cli.run(["screen", "--input", str(data_path), "--response", "y", "--output",
                    str(tmp_path / "screen.json"), "--k", "5", "--seed", "1"]) == 0
    screen = json.loads((tmp_path / "screen.json").read_text())
    assert len(screen["columns"]) == 5 and screen["seed"] == 1
    out = tmp_path / "fit"
    out.mkdir()
    code = cli.run(["fit", "--input", str(data_path), "--response", "y", "--output-dir", str(out),
                    "--penalty", "lasso", "atan", "--h", "1", "--seed", "1", "--screen-keep", "40"])
    assert code == 0
    results = json.loads((out / "results.json").read_text())
    assert results["seed"] == 1
    assert results["config"]["penalties"] == ["lasso", "atan"]
    assert [(b["penalty"], b["h"]) for b in results["fits"]] == [("lasso", 1.0), ("atan", 1.0)]
    assert all(math.isfinite(b["cv_objective"]) for b in results["fits"])
    assert (out / "features.md").read_text().count("(h=1)") == 2
