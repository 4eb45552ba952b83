"""Time-series feature catalog for pause and coherence series.

Catalog ``v1`` is a fixed, ordered subset of the usual tsfresh feature
families. Every entry records whether it depends on series length; those
are excluded unless explicitly requested. Features that are undefined for a
given series (too short, zero variance) are imputed as 0 and flagged.

Pinned conventions:

* variance and standard deviation are population (divide by n);
* quantiles interpolate linearly between order statistics;
* skewness and kurtosis are the bias-adjusted sample estimators
  (pandas ``skew``/``kurt``), needing n >= 3 and n >= 4 respectively;
* the mean is the correctly rounded arithmetic mean (exact rational sum), so
  a constant series has exactly its value as mean; other sums use
  :func:`math.fsum`. Distributional features are therefore exactly invariant
  under permutation of the series.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

CATALOG_VERSION = "v1"

OK = "ok"
IMPUTED = "undefined_imputed"

QUANTILES = (0.1, 0.25, 0.75, 0.9)
LARGE_STD_RS = tuple(round(0.05 * k, 2) for k in range(1, 20))
AUTOCORR_LAGS = (1, 2, 3, 4, 5)
ENTROPY_BINS = 10


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    length_dependent: bool
    family: str
    params: dict = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class FeatureCatalog:
    version: str
    entries: tuple[CatalogEntry, ...]

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def manifest(self) -> str:
        rows = [
            {"name": e.name, "length_dependent": e.length_dependent, "params": e.params}
            for e in self.entries
        ]
        return json.dumps({"version": self.version, "features": rows}, indent=2) + "\n"


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]
    flags: tuple[str, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def prefixed(self, prefix: str) -> "FeatureVector":
        return FeatureVector(tuple(prefix + n for n in self.names), self.values, self.flags)


def _entries() -> list[CatalogEntry]:
    out: list[CatalogEntry] = []

    def add(name, family, length_dependent=False, **params):
        out.append(CatalogEntry(name, length_dependent, family, params))

    for name in ("mean", "median", "standard_deviation", "variance", "skewness", "kurtosis",
                 "minimum", "maximum"):
        add(name, "distributional")
    for q in QUANTILES:
        add(f"quantile_q_{q:.2f}", "distributional", q=q)
    add("root_mean_square", "distributional")
    add("variance_larger_than_standard_deviation", "distributional")
    for r in LARGE_STD_RS:
        add(f"large_standard_deviation_r_{r:.2f}", "distributional", r=r)
    add("fraction_above_mean", "distributional")
    add("fraction_below_mean", "distributional")
    add(f"binned_entropy_max_bins_{ENTROPY_BINS}", "distributional", max_bins=ENTROPY_BINS)
    add("ratio_value_number_to_time_series_length", "distributional")

    add("mean_abs_change", "temporal")
    add("mean_change", "temporal")
    for lag in AUTOCORR_LAGS:
        add(f"autocorrelation_lag_{lag}", "temporal", lag=lag)
    add("first_location_of_maximum", "temporal")
    add("last_location_of_maximum", "temporal")
    add("first_location_of_minimum", "temporal")
    add("last_location_of_minimum", "temporal")
    add("linear_trend_slope", "temporal")
    add("linear_trend_intercept", "temporal")
    add("cid_ce_normalize_true", "temporal", normalize=True)
    add("longest_strike_above_mean", "temporal")
    add("longest_strike_below_mean", "temporal")

    for name in ("length", "abs_energy", "absolute_sum_of_changes", "count_above_mean",
                 "count_below_mean", "number_peaks_n_1", "sum_values"):
        add(name, "length_dependent", length_dependent=True)
    return out


_ALL_ENTRIES = tuple(_entries())


def catalog(include_length_dependent: bool = False) -> FeatureCatalog:
    entries = tuple(e for e in _ALL_ENTRIES if include_length_dependent or not e.length_dependent)
    return FeatureCatalog(CATALOG_VERSION, entries)


def _longest_run(mask: Sequence[bool]) -> int:
    best = run = 0
    for m in mask:
        run = run + 1 if m else 0
        best = max(best, run)
    return best


def _quantile(sorted_x: Sequence[float], q: float) -> float:
    pos = q * (len(sorted_x) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_x) - 1)
    frac = pos - lo
    return sorted_x[lo] + (sorted_x[hi] - sorted_x[lo]) * frac


def _compute(x: list[float]) -> tuple[dict[str, float], set[str]]:
    """Evaluate every catalog v1 feature; returns values and the names left undefined."""
    n = len(x)
    vals: dict[str, float] = {}
    undefined: set[str] = set()
    if n == 0:
        return {}, {e.name for e in _ALL_ENTRIES}

    mean = float(sum(map(Fraction, x)) / n)
    dev = [v - mean for v in x]
    m2 = math.fsum(d * d for d in dev) / n
    std = math.sqrt(m2)
    xs = sorted(x)
    lo, hi = xs[0], xs[-1]

    vals["mean"] = mean
    vals["median"] = _quantile(xs, 0.5)
    vals["standard_deviation"] = std
    vals["variance"] = m2
    vals["minimum"] = lo
    vals["maximum"] = hi

    # variance so small that its powers underflow counts as degenerate
    if n >= 3 and m2 ** 1.5 > 0:
        m3 = math.fsum(d ** 3 for d in dev) / n
        g1 = m3 / m2 ** 1.5
        vals["skewness"] = math.sqrt(n * (n - 1)) / (n - 2) * g1
    else:
        undefined.add("skewness")
    if n >= 4 and m2 ** 2 > 0:
        m4 = math.fsum(d ** 4 for d in dev) / n
        g2 = m4 / m2 ** 2 - 3.0
        vals["kurtosis"] = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * g2 + 6.0)
    else:
        undefined.add("kurtosis")

    for q in QUANTILES:
        vals[f"quantile_q_{q:.2f}"] = _quantile(xs, q)
    vals["root_mean_square"] = math.sqrt(math.fsum(v * v for v in x) / n)
    vals["variance_larger_than_standard_deviation"] = float(m2 > std)
    for r in LARGE_STD_RS:
        vals[f"large_standard_deviation_r_{r:.2f}"] = float(std > r * (hi - lo))
    above = [v > mean for v in x]
    below = [v < mean for v in x]
    vals["fraction_above_mean"] = sum(above) / n
    vals["fraction_below_mean"] = sum(below) / n

    ent_name = f"binned_entropy_max_bins_{ENTROPY_BINS}"
    if hi > lo:
        # half-open bins over linspace(lo, hi), last bin closed (np.histogram's rule);
        # searchsorted also copes with ranges too narrow for distinct edges
        edges = np.linspace(lo, hi, ENTROPY_BINS + 1)
        idx = np.minimum(np.searchsorted(edges, x, side="right") - 1, ENTROPY_BINS - 1)
        counts = np.bincount(idx, minlength=ENTROPY_BINS)
        vals[ent_name] = -math.fsum((c / n) * math.log(c / n) for c in counts.tolist() if c)
    else:
        undefined.add(ent_name)
    vals["ratio_value_number_to_time_series_length"] = len(set(x)) / n

    diffs = [x[i + 1] - x[i] for i in range(n - 1)]
    if diffs:
        vals["mean_abs_change"] = math.fsum(abs(d) for d in diffs) / (n - 1)
        vals["mean_change"] = (x[-1] - x[0]) / (n - 1)
    else:
        undefined.update(("mean_abs_change", "mean_change"))

    for lag in AUTOCORR_LAGS:
        name = f"autocorrelation_lag_{lag}"
        if lag < n and m2 > 0:
            acc = math.fsum(dev[t] * dev[t + lag] for t in range(n - lag))
            vals[name] = acc / ((n - lag) * m2)
        else:
            undefined.add(name)

    first_max = x.index(hi)
    last_max = n - 1 - x[::-1].index(hi)
    first_min = x.index(lo)
    last_min = n - 1 - x[::-1].index(lo)
    vals["first_location_of_maximum"] = first_max / n
    vals["last_location_of_maximum"] = (last_max + 1) / n
    vals["first_location_of_minimum"] = first_min / n
    vals["last_location_of_minimum"] = (last_min + 1) / n

    if n >= 2:
        t_mean = (n - 1) / 2.0
        sxx = math.fsum((t - t_mean) ** 2 for t in range(n))
        sxy = math.fsum((t - t_mean) * dev[t] for t in range(n))
        slope = sxy / sxx
        vals["linear_trend_slope"] = slope
        vals["linear_trend_intercept"] = mean - slope * t_mean
    else:
        undefined.update(("linear_trend_slope", "linear_trend_intercept"))

    if std > 0 and n >= 2:
        z = [d / std for d in dev]
        vals["cid_ce_normalize_true"] = math.sqrt(math.fsum((z[i + 1] - z[i]) ** 2 for i in range(n - 1)))
    else:
        undefined.add("cid_ce_normalize_true")
    vals["longest_strike_above_mean"] = _longest_run(above) / n
    vals["longest_strike_below_mean"] = _longest_run(below) / n

    vals["length"] = float(n)
    vals["abs_energy"] = math.fsum(v * v for v in x)
    vals["absolute_sum_of_changes"] = math.fsum(abs(d) for d in diffs)
    vals["count_above_mean"] = float(sum(above))
    vals["count_below_mean"] = float(sum(below))
    vals["number_peaks_n_1"] = float(sum(1 for i in range(1, n - 1) if x[i] > x[i - 1] and x[i] > x[i + 1]))
    vals["sum_values"] = math.fsum(x)
    return vals, undefined


def featurize(series: Sequence[float], cat: FeatureCatalog | None = None) -> FeatureVector:
    cat = cat or catalog()
    x = [float(v) for v in series]
    if not all(math.isfinite(v) for v in x):
        raise ValueError("series contains non-finite values")
    vals, undefined = _compute(x)
    names, values, flags = [], [], []
    for e in cat.entries:
        names.append(e.name)
        if e.name in undefined:
            values.append(0.0)
            flags.append(IMPUTED)
        else:
            values.append(vals[e.name])
            flags.append(OK)
    return FeatureVector(tuple(names), tuple(values), tuple(flags))


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows of named features keyed by record id; the modeling input."""

    ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.ids), len(self.names)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.ids)} ids x {len(self.names)} names"
            )

    @classmethod
    def from_vectors(cls, ids: Sequence[str], vectors: Sequence[FeatureVector]) -> "FeatureMatrix":
        if not vectors:
            raise ValueError("no feature vectors")
        names = vectors[0].names
        for v in vectors:
            if v.names != names:
                raise ValueError("feature vectors disagree on column names")
        values = np.array([v.values for v in vectors], dtype=float).reshape(len(vectors), len(names))
        return cls(tuple(ids), tuple(names), values)

    def select(self, ids: Sequence[str]) -> "FeatureMatrix":
        pos = {rid: i for i, rid in enumerate(self.ids)}
        return FeatureMatrix(tuple(ids), self.names, self.values[[pos[r] for r in ids]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["record_id", *self.names])
        for rid, row in zip(self.ids, self.values):
            w.writerow([rid, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        return cls(
            tuple(r[0] for r in body),
            tuple(header[1:]),
            np.array([[float(v) for v in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1),
        )


def featurize_many(
    ids: Sequence[str],
    series: Sequence[Sequence[float]],
    cat: FeatureCatalog | None = None,
    prefix: str = "",
) -> FeatureMatrix:
    cat = cat or catalog()
    vectors = [featurize(s, cat).prefixed(prefix) for s in series]
    return FeatureMatrix.from_vectors(ids, vectors)

