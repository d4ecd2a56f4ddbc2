"""Spatial feature vectors: distance and orientation between two places.

Coordinates are projected to a local plane with an equirectangular
projection centered on a per-dataset origin (x east, y north, kilometres).
A relation instance (P_u, r, P_v) is summarized by the 2-vector

    (distance, orientation) = (|P_u - P_v|, atan2(dy, dx) in degrees)

measured at the reference place P_v toward the subject P_u, with east at 0
degrees and north at 90. Coincident points take orientation 0 by convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gazetteer import Poi

__all__ = [
    "EARTH_RADIUS_KM",
    "ProjectionOrigin",
    "SpatialFeatureVector",
    "TrainingSet",
    "build_training_sets",
    "feature_components",
    "feature_vector",
    "load_feature_array",
    "origin_for_points",
    "project",
    "write_training_set",
]

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class ProjectionOrigin:
    """Latitude/longitude the local plane is centered on."""

    lat0: float
    lon0: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat0 <= 90.0 and -180.0 <= self.lon0 <= 180.0):
            raise ValueError(f"origin out of range: {self}")


@dataclass(frozen=True)
class SpatialFeatureVector:
    """Distance (km) and orientation (degrees in [0, 360)) of one instance."""

    distance: float
    orientation: float

    def __post_init__(self) -> None:
        if self.distance < 0.0:
            raise ValueError("distance must be non-negative")
        if not (0.0 <= self.orientation < 360.0):
            raise ValueError("orientation must lie in [0, 360)")
        if self.distance == 0.0 and self.orientation != 0.0:
            raise ValueError("zero distance requires orientation 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.distance, self.orientation], dtype=float)


@dataclass
class TrainingSet:
    """All feature vectors observed for one relation label."""

    relation: str
    vectors: list[SpatialFeatureVector] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.vectors)

    def to_array(self) -> np.ndarray:
        if not self.vectors:
            return np.empty((0, 2), dtype=float)
        return np.array([[v.distance, v.orientation] for v in self.vectors])


def project(lat, lon, origin: ProjectionOrigin):
    """Equirectangular projection to (x, y) kilometres relative to origin.

    Accepts scalars or numpy arrays; x grows eastward, y northward.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    x = EARTH_RADIUS_KM * np.cos(np.radians(origin.lat0)) * np.radians(lon - origin.lon0)
    y = EARTH_RADIUS_KM * np.radians(lat - origin.lat0)
    return x, y


def feature_components(lat_u, lon_u, lat_v, lon_v, origin: ProjectionOrigin):
    """Distance and orientation of subject (u) relative to reference (v).

    Vectorized over numpy array inputs; orientation is 0 wherever the
    projected points coincide.
    """
    xu, yu = project(lat_u, lon_u, origin)
    xv, yv = project(lat_v, lon_v, origin)
    dx = xu - xv
    dy = yu - yv
    distance = np.hypot(dx, dy)
    orientation = np.degrees(np.arctan2(dy, dx)) % 360.0
    orientation = np.where(distance == 0.0, 0.0, orientation)
    return distance, orientation


def feature_vector(p_u: Poi, p_v: Poi, origin: ProjectionOrigin) -> SpatialFeatureVector:
    """Feature vector of subject ``p_u`` measured at reference ``p_v``."""
    distance, orientation = feature_components(p_u.lat, p_u.lon, p_v.lat, p_v.lon, origin)
    return SpatialFeatureVector(float(distance), float(orientation))


def origin_for_points(points) -> ProjectionOrigin:
    """Bounding-box centroid of an iterable of (lat, lon) pairs."""
    pts = list(points)
    if not pts:
        raise ValueError("cannot derive an origin from zero points")
    lats = [p[0] for p in pts]
    lons = [p[1] for p in pts]
    return ProjectionOrigin((min(lats) + max(lats)) / 2.0, (min(lons) + max(lons)) / 2.0)


def build_training_sets(triplets, origin: ProjectionOrigin) -> dict[str, TrainingSet]:
    """Group triplets by relation label, preserving first-seen label order.

    Every triplet contributes exactly one feature vector to the set of its
    label; the total size across sets equals the number of triplets.
    """
    sets: dict[str, TrainingSet] = {}
    for triplet in triplets:
        bucket = sets.setdefault(triplet.relation, TrainingSet(triplet.relation))
        bucket.vectors.append(feature_vector(triplet.subject, triplet.object, origin))
    return sets


def write_training_set(training_set: TrainingSet, path: str) -> None:
    """Write one feature vector per line as ``distance<TAB>orientation``."""
    lines = [f"{v.distance!r}\t{v.orientation!r}\n" for v in training_set.vectors]
    with open(path, "w", encoding="utf-8") as handle:
        handle.writelines(lines)


def load_feature_array(path: str) -> np.ndarray:
    """Read a training-set TSV back into an (n, 2) array."""
    rows: list[tuple[float, float]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(fields)}")
            rows.append((float(fields[0]), float(fields[1])))
    return np.array(rows, dtype=float) if rows else np.empty((0, 2), dtype=float)
