"""Multi-beacon spot identification and accuracy scoring.

A listener sits in front of a row of beacons; each beacon gets its own
distance filter. Prediction rounds fire on a fixed cadence (default one
second): every beacon that delivered samples in the round updates its
filter, the spot with the smallest estimated distance is predicted, and
the prediction is tallied against the geometric ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .eddystone import SpotId
from .particle import DistanceEstimate, DistanceParticleFilter, FilterConfig
from .pathloss import PathLossModel, RssiSample, average_rssi, estimate_distance
from .seeding import TAG_FILTER, derive_seed, spot_key

DEFAULT_CADENCE_MS = 1000


@dataclass(frozen=True)
class BeaconLayout:
    """A row of beacons plus the listener's position relative to it.

    beacons: (spot, position along the row in meters), strictly increasing.
    listener_offset: (x along the row measured from the middle beacon,
    y perpendicular distance from the row, y >= 0).
    """

    beacons: tuple
    listener_offset: tuple[float, float]

    def __post_init__(self):
        beacons = tuple((spot, float(pos)) for spot, pos in self.beacons)
        object.__setattr__(self, "beacons", beacons)
        object.__setattr__(
            self,
            "listener_offset",
            (float(self.listener_offset[0]), float(self.listener_offset[1])),
        )
        if not beacons:
            raise ValueError("layout needs at least one beacon")
        positions = [pos for _, pos in beacons]
        if any(p2 <= p1 for p1, p2 in zip(positions, positions[1:])):
            raise ValueError("beacon positions must be strictly increasing")
        spots = [spot for spot, _ in beacons]
        if len(set(spots)) != len(spots):
            raise ValueError("duplicate spot in layout")
        if self.listener_offset[1] < 0:
            raise ValueError("perpendicular listener distance must be >= 0")

    def spots(self) -> list[SpotId]:
        return [spot for spot, _ in self.beacons]

    def listener_row_position(self) -> float:
        """Listener's along-row coordinate (offset is from the middle beacon)."""
        middle = self.beacons[len(self.beacons) // 2][1]
        return middle + self.listener_offset[0]

    def true_distances(self) -> dict[SpotId, float]:
        """Euclidean listener-to-beacon distances from the layout geometry."""
        lx = self.listener_row_position()
        ly = self.listener_offset[1]
        return {spot: math.hypot(pos - lx, ly) for spot, pos in self.beacons}

    def ground_truth(self) -> SpotId:
        """The geometrically nearest spot (ties to the smallest spot id)."""
        return min(self.true_distances().items(), key=lambda kv: (kv[1], kv[0]))[0]


@dataclass
class PredictionTally:
    """Per-spot prediction counts against one ground-truth spot."""

    counts: dict
    total: int
    accuracy: float

    def __post_init__(self):
        if sum(self.counts.values()) != self.total:
            raise ValueError("tally counts do not sum to the total")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must be a fraction in [0, 1]")


def predict_spot(estimates: Mapping[SpotId, DistanceEstimate]) -> SpotId:
    """Spot with the smallest estimated distance; ties to smallest id."""
    if not estimates:
        raise ValueError("no estimates to predict from")
    return min(estimates.items(), key=lambda kv: (kv[1].mean_m, kv[0]))[0]


def _nearest_spot(means: Mapping[SpotId, float]) -> SpotId:
    return min(means.items(), key=lambda kv: (kv[1], kv[0]))[0]


def _group_rounds(
    streams: Mapping[SpotId, Sequence[RssiSample]], cadence_ms: int
) -> list[dict[SpotId, list[float]]]:
    """Bucket every sample into its cadence round, per beacon."""
    if cadence_ms <= 0:
        raise ValueError("cadence must be positive")
    last_ts = -1
    for samples in streams.values():
        for s in samples:
            last_ts = max(last_ts, s.timestamp_ms)
    if last_ts < 0:
        raise ValueError("streams contain no samples")
    n_rounds = last_ts // cadence_ms + 1
    rounds: list[dict[SpotId, list[float]]] = [{} for _ in range(n_rounds)]
    for spot, samples in streams.items():
        for s in samples:
            rounds[s.timestamp_ms // cadence_ms].setdefault(spot, []).append(s.rssi_dbm)
    return rounds


def _check_streams(streams, layout: BeaconLayout) -> None:
    known = set(layout.spots())
    for spot in streams:
        if spot not in known:
            raise ValueError(f"stream beacon {spot} is not in the layout")


def _tally(predictions: list[SpotId], layout: BeaconLayout) -> PredictionTally:
    counts = {spot: 0 for spot in layout.spots()}
    for p in predictions:
        counts[p] += 1
    truth = layout.ground_truth()
    total = len(predictions)
    return PredictionTally(
        counts=counts, total=total, accuracy=counts[truth] / total if total else 0.0
    )


def run_identification(
    layout: BeaconLayout,
    streams: Mapping[SpotId, Sequence[RssiSample]],
    model: PathLossModel,
    config: FilterConfig,
    cadence_ms: int = DEFAULT_CADENCE_MS,
) -> PredictionTally:
    """Filtered identification: one particle filter per beacon.

    Each beacon's filter gets its own child seed derived from the config
    seed. A beacon with no samples in a round keeps its previous state.
    """
    _check_streams(streams, layout)
    rounds = _group_rounds(streams, cadence_ms)
    filters = {
        spot: DistanceParticleFilter(
            replace(config, seed=derive_seed(config.seed, TAG_FILTER, spot_key(spot)))
        )
        for spot in layout.spots()
    }
    predictions = []
    for bucket in rounds:
        for spot, rssis in bucket.items():
            flt = filters[spot]
            for rssi in rssis:
                flt.update(estimate_distance(model, rssi))
        estimates = {spot: flt.estimate() for spot, flt in filters.items()}
        predictions.append(predict_spot(estimates))
    return _tally(predictions, layout)


def raw_baseline(
    streams: Mapping[SpotId, Sequence[RssiSample]],
    model: PathLossModel,
    layout: BeaconLayout,
    cadence_ms: int = DEFAULT_CADENCE_MS,
) -> PredictionTally:
    """Unfiltered baseline: per-round average-RSSI distance estimates.

    The averaging window is the samples received since the previous
    prediction round; a beacon that has never been heard is treated as
    infinitely far away until its first sample.
    """
    _check_streams(streams, layout)
    rounds = _group_rounds(streams, cadence_ms)
    means = {spot: math.inf for spot in layout.spots()}
    predictions = []
    for bucket in rounds:
        for spot, rssis in bucket.items():
            means[spot] = estimate_distance(model, average_rssi(rssis))
        predictions.append(_nearest_spot(means))
    return _tally(predictions, layout)
