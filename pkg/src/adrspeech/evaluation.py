"""Task metrics: classification scores around a confusion matrix (positive
class = AD, stated on every report) and regression scores for MMSE
prediction. Ratios with a zero denominator are reported as None ("undefined"),
never NaN."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ManifestError

POSITIVE_CLASS = "AD"
NEGATIVE_CLASS = "CN"


@dataclass
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, predicted: list[str], actual: list[str]) -> "ConfusionMatrix":
        tp = fp = tn = fn = 0
        for p, a in zip(predicted, actual):
            if a == POSITIVE_CLASS:
                if p == POSITIVE_CLASS:
                    tp += 1
                else:
                    fn += 1
            else:
                if p == POSITIVE_CLASS:
                    fp += 1
                else:
                    tn += 1
        return cls(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass
class RegressionReport:
    rmse: float
    pearson_r: float | None
    r_squared: float | None
    n: int


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


def classification_metrics(cm: ConfusionMatrix) -> dict[str, float | None]:
    """accuracy, sensitivity, specificity, precision, F1 (positive class AD)."""
    if cm.total <= 0:
        raise DataError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    sensitivity = _ratio(cm.tp, cm.tp + cm.fn)
    specificity = _ratio(cm.tn, cm.tn + cm.fp)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    if precision is None or sensitivity is None or precision + sensitivity == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * sensitivity / (precision + sensitivity)
    return {"accuracy": accuracy, "sensitivity": sensitivity,
            "specificity": specificity, "precision": precision, "f1": f1}


def regression_metrics(predicted, actual) -> RegressionReport:
    """RMSE, Pearson r, and the coefficient of determination.

    r is undefined (None) when either side has zero variance; R^2 is
    undefined when the actuals have zero variance.
    """
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if len(predicted) != len(actual):
        raise DataError(f"length mismatch: {len(predicted)} predictions "
                        f"vs {len(actual)} references")
    if len(actual) == 0:
        raise DataError("empty score vectors")
    err = predicted - actual
    rmse = float(np.sqrt(np.mean(err * err)))

    ss_tot = float(((actual - actual.mean()) ** 2).sum())
    var_pred = float(((predicted - predicted.mean()) ** 2).sum())
    if ss_tot > 0 and var_pred > 0:
        r = float(np.corrcoef(predicted, actual)[0, 1])
    else:
        r = None
    r2 = 1.0 - float((err ** 2).sum()) / ss_tot if ss_tot > 0 else None
    return RegressionReport(rmse=rmse, pearson_r=r, r_squared=r2, n=len(actual))


def _check_ids(pred_ids: list[str], ref_ids: list[str]) -> None:
    seen: set[str] = set()
    dupes = sorted({i for i in pred_ids if i in seen or seen.add(i)})
    if dupes:
        raise ManifestError(f"duplicate prediction ids: {', '.join(dupes)}")
    missing = sorted(set(ref_ids) - set(pred_ids))
    if missing:
        raise ManifestError(f"missing predictions for ids: {', '.join(missing)}")


def score_task1(predictions: dict[str, str], reference: dict[str, str]
                ) -> dict[str, float | None]:
    """Classification report keyed by recording id; ranking key = accuracy."""
    _check_ids(list(predictions), list(reference))
    ids = sorted(reference)
    cm = ConfusionMatrix.from_labels([predictions[i] for i in ids],
                                     [reference[i] for i in ids])
    return classification_metrics(cm)


def score_task2(predictions: dict[str, float], reference: dict[str, float]
                ) -> RegressionReport:
    """Regression report keyed by recording id; ranking key = RMSE."""
    _check_ids(list(predictions), list(reference))
    ids = sorted(reference)
    return regression_metrics([predictions[i] for i in ids],
                              [reference[i] for i in ids])


def format_report(metrics: dict[str, float | None] | RegressionReport,
                  task: int) -> tuple[str, str]:
    """(human-readable text, CSV) renderings; values rounded to 4 decimals
    only here, never in the computation."""
    if task == 1:
        assert isinstance(metrics, dict)
        lines = [f"task 1 classification report (positive class = {POSITIVE_CLASS})"]
        rows = list(metrics.items())
    else:
        assert isinstance(metrics, RegressionReport)
        lines = ["task 2 regression report (MMSE)"]
        rows = [("rmse", metrics.rmse), ("pearson_r", metrics.pearson_r),
                ("r_squared", metrics.r_squared), ("n", metrics.n)]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["metric", "value"])
    for name, value in rows:
        shown = "undefined" if value is None else f"{value:.4f}"
        lines.append(f"  {name:12s} {shown}")
        writer.writerow([name, shown])
    return "\n".join(lines), buf.getvalue()
