"""Dataset ingestion, correlation screening, stand-in data and report emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import re
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .estimator import NumericalFailure, fit_penalized, select_f
from .loss import CompleteCaseProblem, Condition, Dataset, FitConfig
from .penalties import Family, PenaltySpec
from .propensity import DEFAULT_CLIP_FLOOR
from .simulation import (
    Correlation,
    ErrorDist,
    MonteCarloReport,
    SimulationScenario,
    condition_weights,
    run_monte_carlo,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULT_NA_TOKENS = ("", "NA")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class DataError(ValueError):
    """Malformed or unusable input data (exit code 2)."""


class UsageError(ValueError):
    """Bad command-line arguments or run configuration (exit code 1)."""


# --------------------------------------------------------------------------
# CSV in / out


def _na_tokens(na_token) -> frozenset:
    if na_token is None:
        return frozenset(DEFAULT_NA_TOKENS)
    if isinstance(na_token, str):
        return frozenset([na_token])
    return frozenset(na_token)


def _data_lines(handle):
    """Yield lines after any leading ``#`` comment lines."""
    header_seen = False
    for line in handle:
        if not header_seen and line.startswith("#"):
            continue
        header_seen = True
        yield line


def ingest_csv(path, response_column: str, na_token=None) -> Dataset:
    """Read a numeric CSV into a :class:`Dataset`.

    Cells equal to an NA token (default: empty or ``NA``) become absent.
    A row is complete when none of its covariate cells is absent, and the
    missing block is every column with at least one absent cell. Leading
    lines starting with ``#`` are skipped.
    """
    tokens = _na_tokens(na_token)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    with handle:
        reader = csv.reader(_data_lines(handle))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"{path}: duplicate column header {name!r}")
            seen.add(name)
        if response_column not in seen:
            raise DataError(f"{path}: response column {response_column!r} not found")
        resp = header.index(response_column)
        cov = [j for j in range(len(header)) if j != resp]
        if not cov:
            raise DataError(f"{path}: no covariate columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip() and len(header) > 1):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            rows.append([_parse_cell(row[j], tokens, lineno, header[j]) for j in range(len(header))])
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    y = arr[:, resp]
    bad = np.flatnonzero(np.isnan(y))
    if bad.size:
        raise DataError(f"{path}: response {response_column!r} is absent in row {int(bad[0]) + 2}")
    return Dataset.from_arrays(y, arr[:, cov], names=[header[j] for j in cov])


def _parse_cell(cell: str, tokens, lineno: int, column: str) -> float:
    if cell in tokens or cell.strip() in tokens:
        return math.nan
    text = cell.strip()
    if not _NUMBER.match(text):
        raise DataError(f"row {lineno}, column {column!r}: non-numeric cell {cell!r}")
    return float(text)


def format_float(v: float) -> str:
    """17 significant digits, enough to round-trip any finite double."""
    return format(float(v), ".17g")


def dataset_to_csv(data: Dataset, response_column: str = "y", na_token: str = "NA", comment: str | None = None) -> str:
    if response_column in data.names:
        raise ValueError(f"response column {response_column!r} clashes with a covariate name")
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([response_column, *data.names])
    for y, row in zip(data.response, data.design):
        writer.writerow([format_float(y)] + [na_token if math.isnan(v) else format_float(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def commit_outputs(outputs: dict) -> list:
    """Write every ``{path: text}`` pair atomically, after checking all targets.

    Content is fully rendered before anything touches disk, so a failing
    command leaves no partial artifacts behind.
    """
    paths = [Path(p) for p in outputs]
    for p in paths:
        if not p.parent.is_dir():
            raise DataError(f"output directory {p.parent} does not exist")
    written = []
    try:
        for p, text in zip(paths, outputs.values()):
            write_atomic(p, text)
            written.append(p)
    except OSError as exc:
        for p in written:
            p.unlink(missing_ok=True)
        raise DataError(f"cannot write {p}: {exc.strerror or exc}") from exc
    return written


# --------------------------------------------------------------------------
# Screening


@dataclass(frozen=True)
class ScreeningResult:
    """Top columns by absolute Pearson correlation with the response."""

    indices: tuple
    names: tuple
    correlations: tuple
    subsample_size: int
    seed: int | None = None
    excluded: tuple = ()

    def __post_init__(self):
        c = [float(v) for v in self.correlations]
        if any(not 0.0 <= v <= 1.0 for v in c):
            raise ValueError("correlations must lie in [0, 1]")
        if any(a < b for a, b in zip(c, c[1:])):
            raise ValueError("correlations must be sorted in descending order")
        if not len(self.indices) == len(self.names) == len(c):
            raise ValueError("indices, names and correlations differ in length")

    def to_dict(self) -> dict:
        return {
            "columns": [
                {"index": int(i), "name": n, "abs_corr": float(c)}
                for i, n, c in zip(self.indices, self.names, self.correlations)
            ],
            "subsample_size": self.subsample_size,
            "seed": self.seed,
            "excluded": list(self.excluded),
        }


def pairwise_abs_corr(y, X) -> tuple:
    """|Pearson correlation| of each column with ``y`` over its observed rows.

    Returns ``(corr, counts)``. Columns with zero variance over their pairs
    get correlation 0; columns with fewer than three pairs get NaN.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    M = ~np.isnan(X)
    cnt = M.sum(axis=0)
    safe = np.maximum(cnt, 1)
    Y = np.where(M, y[:, None], 0.0)
    Xz = np.where(M, X, 0.0)
    xm = Xz.sum(axis=0) / safe
    ym = Y.sum(axis=0) / safe
    xc = np.where(M, Xz - xm, 0.0)
    yc = np.where(M, Y - ym, 0.0)
    sxy = (xc * yc).sum(axis=0)
    sxx = (xc * xc).sum(axis=0)
    syy = (yc * yc).sum(axis=0)
    denom = np.sqrt(sxx * syy)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, np.abs(sxy) / np.where(denom > 0, denom, 1.0), 0.0)
    corr = np.minimum(corr, 1.0)
    corr[cnt < 3] = np.nan
    return corr, cnt


def screen_columns(data: Dataset, k: int, subsample_size: int, rng: np.random.Generator, seed=None) -> ScreeningResult:
    """Rank a random column subsample by absolute correlation with the response.

    ``subsample_size`` columns are drawn without replacement; the ``k`` with
    the largest pairwise-complete ``|corr|`` are returned, ties broken by
    ascending column index.
    """
    if not 1 <= k <= subsample_size <= data.d:
        raise ValueError(f"need 1 <= k ({k}) <= subsample_size ({subsample_size}) <= d ({data.d})")
    cols = np.sort(rng.choice(data.d, size=subsample_size, replace=False))
    corr, cnt = pairwise_abs_corr(data.response, data.design[:, cols])
    excluded = tuple(data.names[c] for c in cols[np.isnan(corr)])
    for name in excluded:
        log.warning("column %s has fewer than 3 observed pairs; excluded from screening", name)
    keep = ~np.isnan(corr)
    if keep.sum() < k:
        raise DataError(f"only {int(keep.sum())} columns can be screened, {k} requested")
    cols, corr = cols[keep], corr[keep]
    order = np.lexsort((cols, -corr))[:k]
    return ScreeningResult(
        indices=tuple(int(c) for c in cols[order]),
        names=tuple(data.names[c] for c in cols[order]),
        correlations=tuple(float(v) for v in corr[order]),
        subsample_size=int(subsample_size),
        seed=seed,
        excluded=excluded,
    )


# --------------------------------------------------------------------------
# Synthetic stand-in for a wide expression matrix


@dataclass(frozen=True)
class StandInConfig:
    n: int = 98
    d: int = 2000
    n_signal: int = 5
    n_missing_columns: int = 3
    me_variance: float = 0.3
    noise_scale: float = 1.0
    seed: int = 0


def synth_standin(cfg: StandInConfig) -> Dataset:
    """Wide synthetic data: sparse linear signal, measurement error and MAR gaps.

    The first ``n_signal`` columns carry coefficients proportional to
    ``1..n_signal`` with Euclidean norm 2; columns
    ``n_signal .. n_signal + n_missing_columns - 1`` lose cells with a
    logistic probability increasing in ``Y``.
    """
    if cfg.n < 3 or cfg.d < cfg.n_signal + cfg.n_missing_columns:
        raise ValueError("stand-in needs n >= 3 and d >= n_signal + n_missing_columns")
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, cfg.d))
    omega = np.zeros(cfg.d)
    sig = np.arange(1, cfg.n_signal + 1, dtype=float)
    omega[: cfg.n_signal] = 2.0 * sig / np.linalg.norm(sig)
    y = X @ omega + cfg.noise_scale * rng.standard_normal(cfg.n)
    T = X + math.sqrt(cfg.me_variance) * rng.standard_normal(X.shape)
    miss = list(range(cfg.n_signal, cfg.n_signal + cfg.n_missing_columns))
    if miss:
        z = (y - y.mean()) / y.std()
        p_complete = 1.0 / (1.0 + np.exp(-(1.5 + 1.5 * z)))
        incomplete = rng.random(cfg.n) >= p_complete
        T[np.ix_(incomplete, miss)] = np.nan
    names = [f"g{j + 1:05d}" for j in range(cfg.d)]
    return Dataset.from_arrays(y, T, names=names)


# --------------------------------------------------------------------------
# Run configurations


def _as_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


@dataclass(frozen=True)
class FitRunConfig:
    input: str = ""
    response: str = "y"
    output_dir: str = "."
    na_token: str | None = None
    penalties: tuple = ("lasso", "scad", "mcp", "atan")
    hs: tuple = (0.1, 1.0, 10.0)
    conditions: tuple = ("full",)
    seed: int = 0
    screen: bool = True
    subsample_size: int = 3000
    screen_keep: int = 100
    report_k: int = 5
    cv_folds: int = 5
    clip_floor: float = DEFAULT_CLIP_FLOOR
    en_rule: float = 1.0
    atan_u: float = 0.005
    max_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "penalties", tuple(Family(p).value for p in _as_tuple(self.penalties)))
        object.__setattr__(self, "conditions", tuple(Condition(c).value for c in _as_tuple(self.conditions)))
        hs = tuple(float(h) for h in _as_tuple(self.hs))
        if any(not h > 0 for h in hs):
            raise ValueError("every h must be positive")
        object.__setattr__(self, "hs", hs)
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.report_k < 1 or self.screen_keep < 1 or self.subsample_size < 1:
            raise ValueError("report_k, screen_keep and subsample_size must be positive")
        if not self.input:
            raise ValueError("an input CSV is required")
        if Path(self.input).resolve().parent == Path(self.output_dir).resolve() and Path(self.input).name in FIT_OUTPUTS:
            raise ValueError("input file would be overwritten by an output")

    def fit_config(self, h: float, condition: str) -> FitConfig:
        return FitConfig(h=h, condition=condition, atan_u=self.atan_u, en_rule=self.en_rule, max_size=self.max_size)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class SimulateRunConfig:
    output_dir: str = "."
    n: int = 100
    d: int = 300
    replications: int = 300
    seed: int = 0
    error_dists: tuple = ("normal",)
    correlations: tuple = ("corr",)
    penalties: tuple = ("atan",)
    hs: tuple = (0.1,)
    conditions: tuple = ("full", "none")
    me_variance: float = 0.3
    missing_coefs: tuple = (1.0, 2.0, -2.0, 4.0)

    def __post_init__(self):
        object.__setattr__(self, "error_dists", tuple(ErrorDist(v).value for v in _as_tuple(self.error_dists)))
        object.__setattr__(self, "correlations", tuple(Correlation(v).value for v in _as_tuple(self.correlations)))
        object.__setattr__(self, "penalties", tuple(Family(p).value for p in _as_tuple(self.penalties)))
        object.__setattr__(self, "conditions", tuple(Condition(c).value for c in _as_tuple(self.conditions)))
        object.__setattr__(self, "hs", tuple(float(h) for h in _as_tuple(self.hs)))
        object.__setattr__(self, "missing_coefs", tuple(float(c) for c in self.missing_coefs))

    def scenarios(self) -> list:
        out = []
        for cond in self.conditions:
            for ed in self.error_dists:
                for corr in self.correlations:
                    for pen in self.penalties:
                        for h in self.hs:
                            out.append(
                                SimulationScenario(
                                    n=self.n,
                                    d=self.d,
                                    correlation=corr,
                                    error_dist=ed,
                                    condition=cond,
                                    penalty_family=pen,
                                    h=h,
                                    me_variance=self.me_variance,
                                    replications=self.replications,
                                    seed=self.seed,
                                    missing_coefs=self.missing_coefs,
                                )
                            )
        return out

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def resolve_config(cls, file_values: dict | None, flag_values: dict):
    """Defaults, overridden by config-file values, overridden by flags.

    ``flag_values`` entries that are ``None`` were not given on the command
    line and do not override anything.
    """
    names = {f.name for f in fields(cls)}
    merged = {}
    for source in (file_values or {}, {k: v for k, v in flag_values.items() if v is not None}):
        unknown = set(source) - names
        if unknown:
            raise UsageError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
        merged.update(source)
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    return values


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def error_payload(exc: BaseException, code: int) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sort_keys=True)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (NumericalFailure, ArithmeticError)):
        return EXIT_NUMERIC
    return EXIT_DATA


# --------------------------------------------------------------------------
# fit


FIT_OUTPUTS = ("results.json", "features.csv", "features.md", "summary.csv", "summary.md")


def cv_objective(data: Dataset, weights, pen: PenaltySpec, cfg: FitConfig, folds: int, rng) -> float:
    """Mean held-out objective per unit weight over ``folds`` random folds.

    Each training fold is refit at the given ``pen.f``; the held-out value
    is the condition's weighted objective on the fold's complete rows,
    divided by the fold's total weight so folds of different size compare.
    """
    assign = rng.permutation(data.n) % folds
    probs = np.asarray(weights.probs)
    scores = []
    for k in range(folds):
        test, train = np.flatnonzero(assign == k), np.flatnonzero(assign != k)
        if not data.complete[test].any() or not data.complete[train].any():
            continue
        tr = data.select_rows(train)
        te = data.select_rows(test)
        res = fit_penalized(tr, probs[train], pen, cfg)
        prob = CompleteCaseProblem(te, probs[test], cfg.h, cfg.condition.uses_orthogonal)
        scores.append(prob.value(res.omega_hat) / float(prob.w.sum()))
    if not scores:
        raise DataError("no fold has complete rows on both sides")
    return float(np.mean(scores))


def run_fit_command(config: FitRunConfig) -> dict:
    """Ingest, screen, fit every (condition, penalty, h) and render reports.

    Returns ``{path: text}`` for :func:`commit_outputs`; nothing is written
    here.
    """
    data = ingest_csv(config.input, config.response, config.na_token)
    screening = None
    if config.screen:
        sub = min(config.subsample_size, data.d)
        keep = min(config.screen_keep, sub)
        screening = screen_columns(data, keep, sub, np.random.default_rng(config.seed), seed=config.seed)
        data = data.select_columns(sorted(screening.indices))
    blocks = []
    for cond in config.conditions:
        weights = condition_weights(data, cond, config.clip_floor)
        for fam in config.penalties:
            for h in config.hs:
                cfg = config.fit_config(h, cond)
                pen = PenaltySpec(fam, u=cfg.atan_u)
                res = select_f(data, weights, pen, cfg, seed=config.seed)
                cv = cv_objective(
                    data, weights, pen.with_f(res.f_selected), cfg, config.cv_folds, np.random.default_rng(config.seed)
                )
                order = sorted(res.active_set, key=lambda k: (-abs(res.omega_hat[k]), k))
                blocks.append(
                    {
                        "condition": cond,
                        "penalty": fam,
                        "h": h,
                        "top_features": [data.names[k] for k in order[: config.report_k]],
                        "cv_objective": cv,
                        "size": res.size,
                        "result": res.to_dict(),
                        "selected": {data.names[k]: float(res.omega_hat[k]) for k in order},
                        "propensity": {
                            "bandwidth": weights.bandwidth,
                            "clip_floor": weights.clip_floor,
                            "n_clipped": weights.n_clipped,
                            "probs": [float(p) for p in weights.probs],
                        },
                    }
                )
    header = {"seed": config.seed, "config": config.to_dict()}
    results = dict(header, n=data.n, d=data.d, n_complete=int(data.complete.sum()),
                   screening=screening.to_dict() if screening else None, fits=blocks)
    out = Path(config.output_dir)
    return {
        out / "results.json": _dumps(results),
        out / "features.csv": _features_csv(blocks, config, header),
        out / "features.md": _features_md(blocks, config, header),
        out / "summary.csv": _summary_csv(blocks, header),
        out / "summary.md": _summary_md(blocks, config, header),
    }


def _comment(header: dict) -> str:
    return "# " + json.dumps(header, sort_keys=True) + "\n"


def _features_csv(blocks, config, header) -> str:
    buf = io.StringIO()
    buf.write(_comment(header))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "penalty", "h"] + [f"feature_{i + 1}" for i in range(config.report_k)])
    for b in blocks:
        feats = b["top_features"] + [""] * (config.report_k - len(b["top_features"]))
        w.writerow([b["condition"], b["penalty"], format_float(b["h"]), *feats])
    return buf.getvalue()


def _features_md(blocks, config, header) -> str:
    lines = [f"<!-- {json.dumps(header, sort_keys=True)} -->", "", "# Selected features", ""]
    for cond in config.conditions:
        lines += [f"## condition: {cond}", "", "| method | features |", "|---|---|"]
        for b in blocks:
            if b["condition"] == cond:
                feats = " ".join(b["top_features"]) or "(none)"
                lines.append(f"| {b['penalty']}(h={b['h']:g}) | {feats} |")
        lines.append("")
    return "\n".join(lines)


def _summary_csv(blocks, header) -> str:
    buf = io.StringIO()
    buf.write(_comment(header))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "penalty", "h", "cv_objective", "size", "f_selected"])
    for b in blocks:
        w.writerow([b["condition"], b["penalty"], format_float(b["h"]), format_float(b["cv_objective"]),
                    b["size"], format_float(b["result"]["f_selected"])])
    return buf.getvalue()


def _summary_md(blocks, config, header) -> str:
    pens = list(config.penalties)
    lines = [
        f"<!-- {json.dumps(header, sort_keys=True)} -->",
        "",
        "# Fit summary",
        "",
        "`cv` is the 5-fold held-out weighted objective per unit weight, a proxy for bias;"
        " `size` is the number of selected features.".replace("5-fold", f"{config.cv_folds}-fold"),
        "",
    ]
    for cond in config.conditions:
        lines.append(f"## condition: {cond}")
        lines.append("")
        lines.append("| h | " + " | ".join(f"{p} cv | {p} size" for p in pens) + " |")
        lines.append("|---|" + "---|---|" * len(pens))
        for h in config.hs:
            cells = []
            for p in pens:
                b = next(b for b in blocks if b["condition"] == cond and b["penalty"] == p and b["h"] == h)
                cells += [f"{b['cv_objective']:.4f}", str(b["size"])]
            lines.append(f"| {h:g} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# simulate


REPORT_COLUMNS = ("error_dist", "correlation", "penalty", "h", "condition", "mean_error", "se",
                  "mean_size", "mean_tp", "failures", "seed")


def report_csv(reports: list, header: dict) -> str:
    buf = io.StringIO()
    buf.write(_comment(header))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for rep in reports:
        row = rep.row()
        w.writerow([format_float(row[c]) if isinstance(row[c], float) else row[c] for c in REPORT_COLUMNS])
    return buf.getvalue()


def report_markdown(reports: list, header: dict) -> str:
    """Model-error table: one block per condition, penalty-by-h columns."""
    pens = list(dict.fromkeys(r.scenario.penalty_family.value for r in reports))
    hs = list(dict.fromkeys(r.scenario.h for r in reports))
    conds = list(dict.fromkeys(r.scenario.condition.value for r in reports))
    rows = list(dict.fromkeys((r.scenario.error_dist.value, r.scenario.correlation.value) for r in reports))
    index = {(r.scenario.condition.value, r.scenario.error_dist.value, r.scenario.correlation.value,
              r.scenario.penalty_family.value, r.scenario.h): r for r in reports}
    cols = [(p, h) for p in pens for h in hs]
    lines = [f"<!-- {json.dumps(header, sort_keys=True)} -->", "",
             "# Mean model error (standard error)", ""]
    for cond in conds:
        lines += [f"## condition: {cond}", "",
                  "| error | covariates | " + " | ".join(f"{p} h={h:g}" for p, h in cols) + " |",
                  "|---|---|" + "---|" * len(cols)]
        for ed, corr in rows:
            cells = []
            for p, h in cols:
                r = index.get((cond, ed, corr, p, h))
                cells.append("" if r is None else f"{r.mean_error:.3f} ({r.se:.3f})")
            lines.append(f"| {ed} | {corr} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def run_simulate_command(config: SimulateRunConfig) -> tuple:
    """Run every scenario; returns ``({path: text}, reports)``."""
    reports: list[MonteCarloReport] = [run_monte_carlo(s) for s in config.scenarios()]
    header = {"seed": config.seed, "config": config.to_dict()}
    out = Path(config.output_dir)
    return {
        out / "report.csv": report_csv(reports, header),
        out / "report.md": report_markdown(reports, header),
    }, reports


def run_screen_command(input: str, response: str, output: str, k: int, subsample_size: int | None,
                       seed: int, na_token=None) -> dict:
    data = ingest_csv(input, response, na_token)
    sub = data.d if subsample_size is None else subsample_size
    res = screen_columns(data, k, sub, np.random.default_rng(seed), seed=seed)
    payload = dict(res.to_dict(), config={"input": input, "response": response, "k": k,
                                           "subsample_size": sub, "seed": seed, "na_token": na_token})
    return {Path(output): _dumps(payload)}


def run_synth_command(cfg: StandInConfig, output: str, response: str = "y") -> dict:
    data = synth_standin(cfg)
    header = json.dumps({"seed": cfg.seed, "config": asdict(cfg)}, sort_keys=True)
    return {Path(output): dataset_to_csv(data, response, comment=header)}


__all__ = [
    "DataError",
    "UsageError",
    "ScreeningResult",
    "StandInConfig",
    "FitRunConfig",
    "SimulateRunConfig",
    "ingest_csv",
    "dataset_to_csv",
    "screen_columns",
    "synth_standin",
    "run_fit_command",
    "run_simulate_command",
    "commit_outputs",
    "resolve_config",
]
