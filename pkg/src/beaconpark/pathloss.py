"""Log-distance path-loss model: RSSI prediction, inversion, and fitting.

The signal model is RSSI(d) = ref_rssi - 10 * exponent * log10(d / d_ref),
i.e. a line in log10-distance. Fitting is therefore ordinary least squares
on (log10 distance, mean RSSI per distance) with standard two-sided
t-intervals for the 95% confidence bounds on both coefficients.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

REFERENCE_DISTANCE_M = 1.0


class FitError(ValueError):
    """Calibration data cannot be fitted."""


class RankDeficientError(FitError):
    """All calibration distances coincide; the line is underdetermined."""


@dataclass(frozen=True)
class PathLossModel:
    """Fitted propagation constants for one environment.

    exponent: path-loss exponent (2 in free space, larger with clutter).
    ref_rssi_dbm: mean RSSI at the reference distance.
    ref_distance_m: reference distance, fixed at 1 m.
    """

    exponent: float
    ref_rssi_dbm: float
    ref_distance_m: float = REFERENCE_DISTANCE_M

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError(f"path-loss exponent must be positive, got {self.exponent}")
        if not math.isfinite(self.ref_rssi_dbm):
            raise ValueError("reference RSSI must be finite")
        if self.ref_distance_m != REFERENCE_DISTANCE_M:
            raise ValueError(f"reference distance is fixed at {REFERENCE_DISTANCE_M} m")


# Fitted constants for the two calibrated parking environments.
INDOOR_MODEL = PathLossModel(exponent=2.424, ref_rssi_dbm=-65.24)
OUTDOOR_MODEL = PathLossModel(exponent=2.049, ref_rssi_dbm=-88.78)


@dataclass(frozen=True)
class RssiSample:
    """One received advertisement: when, from which beacon, how strong."""

    timestamp_ms: int
    beacon: object  # SpotId or any raw beacon identifier
    rssi_dbm: float

    def __post_init__(self):
        if not math.isfinite(self.rssi_dbm):
            raise ValueError("RSSI must be finite")


@dataclass(frozen=True)
class CalibrationDataset:
    """RSSI captures grouped by true distance, for model fitting."""

    points: tuple  # of (distance_m, (rssi, ...)) pairs

    def __post_init__(self):
        pts = tuple((float(d), tuple(float(r) for r in samples)) for d, samples in self.points)
        object.__setattr__(self, "points", pts)
        if any(d <= 0 for d, _ in pts):
            raise ValueError("calibration distances must be positive")
        if any(len(s) == 0 for _, s in pts):
            raise ValueError("every calibration distance needs at least one sample")
        if len({d for d, _ in pts}) < 2:
            raise RankDeficientError("need samples at two or more distinct distances")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "CalibrationDataset":
        """Group raw (distance, rssi) rows by distance, preserving order."""
        grouped: dict[float, list[float]] = {}
        for d, r in pairs:
            grouped.setdefault(float(d), []).append(float(r))
        return cls(tuple((d, tuple(rs)) for d, rs in grouped.items()))

    def sample_counts(self) -> dict[float, int]:
        return {d: len(s) for d, s in self.points}


@dataclass(frozen=True)
class FitResult:
    """Fitted model plus 95% confidence bounds and residual spread."""

    model: PathLossModel
    exponent_ci95: tuple[float, float]
    ref_rssi_ci95: tuple[float, float]
    residual_std_db: float


def average_rssi(samples: Sequence[float]) -> float:
    """Arithmetic mean of raw RSSI readings."""
    if len(samples) == 0:
        raise ValueError("cannot average an empty RSSI list")
    return float(sum(samples)) / len(samples)


def predict_rssi(model: PathLossModel, distance_m: float) -> float:
    """Noise-free RSSI expected at a distance."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return model.ref_rssi_dbm - 10.0 * model.exponent * math.log10(
        distance_m / model.ref_distance_m
    )


def estimate_distance(model: PathLossModel, rssi_dbm: float) -> float:
    """Exact algebraic inverse of predict_rssi."""
    return model.ref_distance_m * 10.0 ** (
        (model.ref_rssi_dbm - rssi_dbm) / (10.0 * model.exponent)
    )


def fit_model(data: CalibrationDataset) -> FitResult:
    """Least-squares fit of (exponent, reference RSSI) with 95% CIs.

    The regression observations are the per-distance mean RSSI values
    against log10 distance; the model line is y = ref_rssi - 10n * x.
    residual_std_db is the root-mean-square residual of those means.
    """
    x = np.array([math.log10(d / REFERENCE_DISTANCE_M) for d, _ in data.points])
    y = np.array([average_rssi(s) for _, s in data.points])
    m = len(x)

    x_bar = x.mean()
    y_bar = y.mean()
    sxx = float(np.sum((x - x_bar) ** 2))
    if sxx == 0.0:
        raise RankDeficientError("all calibration distances are equal")
    slope = float(np.sum((x - x_bar) * (y - y_bar)) / sxx)
    intercept = y_bar - slope * x_bar

    resid = y - (intercept + slope * x)
    sse = float(np.sum(resid**2))
    residual_std = math.sqrt(sse / m)

    dof = m - 2
    if dof >= 1 and sse > 0.0:
        s2 = sse / dof
        se_slope = math.sqrt(s2 / sxx)
        se_intercept = math.sqrt(s2 * (1.0 / m + x_bar**2 / sxx))
        t_crit = float(stats.t.ppf(0.975, dof))
    else:
        # Exact fit (or only two distances): degenerate zero-width intervals.
        se_slope = se_intercept = 0.0
        t_crit = 0.0

    exponent = -slope / 10.0
    half_n = t_crit * se_slope / 10.0
    half_c = t_crit * se_intercept
    model = PathLossModel(exponent=exponent, ref_rssi_dbm=intercept)
    return FitResult(
        model=model,
        exponent_ci95=(exponent - half_n, exponent + half_n),
        ref_rssi_ci95=(intercept - half_c, intercept + half_c),
        residual_std_db=residual_std,
    )


def fallback_model_from_tx_power(tx_power_dbm: float, exponent: float = 2.0) -> PathLossModel:
    """Build a model from a beacon's advertised reference power.

    Only for use when no calibration exists: the factory constant can be
    far from the truth in a real environment, so a warning is logged.
    """
    logger.warning(
        "no calibration data: falling back to advertised tx power %s dBm "
        "with free-space exponent %s; calibrate before relying on distances",
        tx_power_dbm,
        exponent,
    )
    return PathLossModel(exponent=exponent, ref_rssi_dbm=float(tx_power_dbm))


# --- file formats ---

CALIBRATION_CSV_HEADER = ["distance_m", "rssi_dbm"]


def read_calibration_csv(path) -> CalibrationDataset:
    """Read `distance_m,rssi_dbm` rows (one sample per row)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CALIBRATION_CSV_HEADER:
            raise ValueError(f"expected header {CALIBRATION_CSV_HEADER}, got {header}")
        pairs = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                pairs.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
    if not pairs:
        raise ValueError("calibration CSV contains no samples")
    return CalibrationDataset.from_pairs(pairs)


def write_calibration_csv(path, data: CalibrationDataset) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CALIBRATION_CSV_HEADER)
        for d, samples in data.points:
            for r in samples:
                writer.writerow([f"{d:.6f}", f"{r:.6f}"])


def fit_result_to_json_dict(fit: FitResult) -> dict:
    return {
        "n": fit.model.exponent,
        "C": fit.model.ref_rssi_dbm,
        "d0": fit.model.ref_distance_m,
        "n_ci95": [fit.exponent_ci95[0], fit.exponent_ci95[1]],
        "C_ci95": [fit.ref_rssi_ci95[0], fit.ref_rssi_ci95[1]],
        "residual_std": fit.residual_std_db,
    }


def fit_result_from_json_dict(obj: dict) -> FitResult:
    model = PathLossModel(
        exponent=float(obj["n"]),
        ref_rssi_dbm=float(obj["C"]),
        ref_distance_m=float(obj.get("d0", REFERENCE_DISTANCE_M)),
    )
    n_lo, n_hi = obj["n_ci95"]
    c_lo, c_hi = obj["C_ci95"]
    return FitResult(
        model=model,
        exponent_ci95=(float(n_lo), float(n_hi)),
        ref_rssi_ci95=(float(c_lo), float(c_hi)),
        residual_std_db=float(obj["residual_std"]),
    )


def model_from_json_dict(obj: dict) -> PathLossModel:
    return PathLossModel(
        exponent=float(obj["n"]),
        ref_rssi_dbm=float(obj["C"]),
        ref_distance_m=float(obj.get("d0", REFERENCE_DISTANCE_M)),
    )


def model_to_json_dict(model: PathLossModel) -> dict:
    return {"n": model.exponent, "C": model.ref_rssi_dbm, "d0": model.ref_distance_m}
