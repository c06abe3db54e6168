"""Cohort attribution on tabular data, with CSV/JSON/SVG reports.

The bundled diabetes file (442 patients, ten standardised features) and a
linear model over it are available through :func:`bundled_path`.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .core import Dataset, Model, model_from_json, read_dataset_csv
from .distributions import empirical
from .errors import AttributionError, ParseError
from .methods import bshap, ces_empirical, ig, rbshap
from .pms import Always, PossibilityPredicate, pms

log = logging.getLogger(__name__)

COHORT_METHODS = ("bshap", "ces", "ces_0.1", "ces_0.2", "rbshap", "ig", "pms")
DEFAULT_COHORT_SIZE = 20
DEFAULT_SEED = 2020
FORMATS = ("csv", "json", "svg")

_CES = re.compile(r"^ces(?:_empirical)?(?:[_@](?P<tau>\d+(?:\.\d*)?|\.\d+))?$")


def bundled_path(name: str) -> Path:
    """Path of a file shipped in the package data directory."""
    return Path(str(resources.files("shapattr").joinpath("data", name)))


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset CSV (header of feature names, optional leading ``weight``)."""
    return read_dataset_csv(path)


def load_model(path: str | Path) -> Model:
    try:
        with open(path) as fh:
            return model_from_json(json.load(fh))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


def parse_method(token: str) -> tuple[str, float]:
    """``"ces_0.1"`` -> ``("ces", 0.1)``; other names carry smoothing 0."""
    token = token.strip()
    m = _CES.match(token)
    if m:
        return "ces", float(m.group("tau") or 0.0)
    if token in {"bshap", "rbshap", "ig", "pms"}:
        return token, 0.0
    raise ValueError(f"unknown cohort method {token!r}; choose from {COHORT_METHODS} or ces_<tau>")


def method_label(name: str, tau: float) -> str:
    return f"ces_{tau:g}" if name == "ces" and tau else name


def resolve_baseline(spec, data: Dataset) -> dict:
    """``"zeros"``, ``"mean"``, a comma list, a sequence or a mapping -> feature dict."""
    if isinstance(spec, Mapping):
        return {k: float(spec[k]) for k in data.features}
    if isinstance(spec, str):
        if spec == "zeros":
            return {k: 0.0 for k in data.features}
        if spec == "mean":
            return data.mean()
        spec = [float(v) for v in spec.split(",")]
    spec = list(spec)
    if len(spec) != len(data.features):
        raise ValueError(f"baseline has {len(spec)} values for {len(data.features)} features")
    return dict(zip(data.features, map(float, spec)))


def select_explicands(data: Dataset, count: int, seed: int) -> list[int]:
    """``count`` distinct row indices drawn with ``seed``, in ascending order."""
    if count > len(data):
        raise ValueError(f"cannot pick {count} explicands from {len(data)} rows")
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(len(data), size=count, replace=False))


@dataclass
class RunConfig:
    model: Model
    data: Dataset
    methods: Sequence[str] = ("bshap", "ces", "ces_0.1", "ces_0.2")
    explicands: Sequence[int] | None = None
    count: int = DEFAULT_COHORT_SIZE
    seed: int = DEFAULT_SEED
    baseline: object = "mean"
    steps: int = 300
    noise: float = 0.0
    possible: PossibilityPredicate = field(default_factory=Always)
    out: Path | None = None
    formats: Sequence[str] = FORMATS


@dataclass
class CohortReport:
    """Scores per method, per feature, across one fixed list of explicands."""

    features: tuple
    explicands: list
    scores: dict  # method -> feature -> list of score (None where the cell failed)
    errors: list
    settings: dict

    @property
    def methods(self) -> list:
        return list(self.scores)

    def summary(self) -> dict:
        """Min, quartiles and max per method and feature over successful cells."""
        out = {}
        for method, per in self.scores.items():
            out[method] = {}
            for k in self.features:
                vals = np.asarray([v for v in per[k] if v is not None], dtype=float)
                if len(vals) == 0:
                    out[method][k] = None
                    continue
                q = np.percentile(vals, [0, 25, 50, 75, 100])
                out[method][k] = dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))
        return out


def attribute_cohort(config: RunConfig) -> CohortReport:
    """Run every method on every explicand; failed cells are recorded, not dropped."""
    data, f = config.data, config.model
    idx = list(config.explicands) if config.explicands is not None else select_explicands(data, config.count, config.seed)
    baseline = resolve_baseline(config.baseline, data)
    parsed = [parse_method(m) for m in config.methods]
    rng = np.random.default_rng([config.seed, 1])
    explicands = []
    for i in idx:
        x = data.row(i)
        if config.noise:
            x = {k: v + config.noise * float(rng.standard_normal()) for k, v in x.items()}
        explicands.append(x)
    dist = None
    scores: dict = {}
    errors = []
    for name, tau in parsed:
        label = method_label(name, tau)
        per = {k: [] for k in data.features}
        for row, x in zip(idx, explicands):
            try:
                if name == "bshap":
                    a = bshap(f, x, baseline)
                elif name == "ces":
                    a = ces_empirical(f, x, data, tau)
                elif name == "rbshap":
                    dist = dist or empirical(data)
                    a = rbshap(f, x, dist)
                elif name == "ig":
                    a = ig(f, x, baseline, config.steps)
                else:
                    a = pms(f, x, baseline, config.possible)
                vals = {k: a[k] for k in data.features}
            except AttributionError as exc:
                errors.append({"method": label, "explicand": row, "error": f"{type(exc).__name__}: {exc}"})
                vals = {k: None for k in data.features}
            for k in data.features:
                per[k].append(vals[k])
        scores[label] = per
    settings = {
        "seed": config.seed,
        "explicands": idx,
        "baseline": baseline,
        "noise": config.noise,
        "steps": config.steps,
        "smoothing": {method_label(n, t): t for n, t in parsed if n == "ces"},
        "model": f.to_json(),
    }
    return CohortReport(tuple(data.features), idx, scores, errors, settings)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------


def _safe(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label)


def report_csv(report: CohortReport, method: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "explicand", "feature", "score", "seed"])
    for k in report.features:
        for row, s in zip(report.explicands, report.scores[method][k]):
            w.writerow([method, row, k, "" if s is None else repr(float(s)), report.settings["seed"]])
    return buf.getvalue()


def report_json(report: CohortReport, method: str) -> str:
    obj = {
        "method": method,
        "features": list(report.features),
        "explicands": report.explicands,
        "summary": report.summary()[method],
        "errors": [e for e in report.errors if e["method"] == method],
        "settings": report.settings,
    }
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def report_svg(report: CohortReport, method: str) -> str:
    """Box-and-whisker panel, one box per feature, plain rect/line elements."""
    stats = report.summary()[method]
    feats = list(report.features)
    width, height, pad, top = 80 + 60 * len(feats), 320, 50, 40
    finite = [v for s in stats.values() if s for v in s.values()]
    lo, hi = (min(finite), max(finite)) if finite else (-1.0, 1.0)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    plot_h = height - top - pad

    def y(v):
        return top + (hi - v) / (hi - lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<!-- shapattr {__version__} -->",
        f"<!-- seed {report.settings['seed']} -->",
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{method}</text>',
        f'<line x1="{pad}" y1="{top}" x2="{pad}" y2="{top + plot_h}" stroke="black"/>',
    ]
    if lo < 0 < hi:
        out.append(f'<line x1="{pad}" y1="{y(0):.2f}" x2="{width - 10}" y2="{y(0):.2f}" stroke="#bbbbbb" stroke-dasharray="4 3"/>')
    for tick in (lo, hi):
        out.append(f'<text x="{pad - 4}" y="{y(tick) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{tick:.3g}</text>')
    for j, k in enumerate(feats):
        cx = pad + 30 + 60 * j
        s = stats[k]
        out.append(f'<text x="{cx}" y="{height - pad + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{k}</text>')
        if s is None:
            continue
        out.append(f'<line class="whisker" x1="{cx}" y1="{y(s["max"]):.2f}" x2="{cx}" y2="{y(s["min"]):.2f}" stroke="black"/>')
        box_h = max(y(s["q1"]) - y(s["q3"]), 0.5)
        out.append(
            f'<rect class="box" x="{cx - 15}" y="{y(s["q3"]):.2f}" width="30" height="{box_h:.2f}" fill="#9ecae1" stroke="black"/>'
        )
        out.append(f'<line class="median" x1="{cx - 15}" y1="{y(s["median"]):.2f}" x2="{cx + 15}" y2="{y(s["median"]):.2f}" stroke="black" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


RENDERERS = {"csv": report_csv, "json": report_json, "svg": report_svg}


def emit_report(report: CohortReport, out: str | Path, formats: Sequence[str] = FORMATS) -> list[Path]:
    """Write one file per (method, format) into ``out``; returns the paths."""
    bad = [f for f in formats if f not in RENDERERS]
    if bad:
        raise ValueError(f"unknown report formats {bad}; choose from {FORMATS}")
    if not report.methods:
        log.warning("cohort report has no methods; nothing written")
        return []
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for method in report.methods:
        for fmt in formats:
            path = out / f"{_safe(method)}.{fmt}"
            try:
                path.write_text(RENDERERS[fmt](report, method))
            except OSError as exc:
                raise OSError(f"cannot write {path}: {exc}") from exc
            written.append(path)
    return written
