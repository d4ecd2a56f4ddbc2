"""Location estimation by fusing qualitative observations about one place.

An observation is a (relation label, landmark) pair describing an unknown
point of interest. Each observation induces a density over the grid
vertices (its label's mixture evaluated with the landmark as reference);
fusion combines the per-vertex evidence across observations, by default as
a product (sum of log densities, treating observations as independent) with
a plain density sum available as the alternative. The fused vertex mass is
averaged onto regions, renormalized, and summarized by the
likelihood-weighted centroid of region centers (the mode region's center is
carried alongside). Estimation error is the haversine distance to the true
location, which is never consulted while building the surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import feature_components
from .gazetteer import Poi
from .predict import Grid, make_grid

__all__ = [
    "Estimate",
    "MissingModelError",
    "Scenario",
    "fuse",
    "haversine_km",
    "load_scenario",
    "save_scenario",
    "subsample",
]

FUSION_MODES = ("product", "sum")


class MissingModelError(ValueError):
    """Raised when an observation's label has no trained model."""


@dataclass(frozen=True)
class Scenario:
    """An unknown place, observations about it, and the search area."""

    unknown: Poi
    observations: tuple[tuple[str, Poi], ...]
    bbox: tuple[float, float, float, float]
    dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "observations", tuple(self.observations))
        if not self.observations:
            raise ValueError("a scenario needs at least one observation")
        min_lat, min_lon, max_lat, max_lon = self.bbox
        for label, landmark in self.observations:
            if not label:
                raise ValueError("observation labels must be non-empty")
            if not (min_lat <= landmark.lat <= max_lat and min_lon <= landmark.lon <= max_lon):
                raise ValueError(f"landmark {landmark.name} outside bbox {self.bbox}")


@dataclass
class Estimate:
    """Fusion output: fused surface, point estimates, and their errors."""

    center: tuple[float, float]
    error_km: float
    region_likelihoods: np.ndarray
    grid: Grid
    mode_center: tuple[float, float]
    mode_error_km: float
    observations_used: tuple[tuple[str, Poi], ...]


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * 6371.0 * math.asin(math.sqrt(a))


def subsample(observations, fraction: float, seed: int) -> list:
    """Uniform sample without replacement of ceil(fraction * n) observations.

    Deterministic for a given seed; selected observations keep their
    original order, and fraction 1.0 returns the full list untouched.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must lie in (0, 1]")
    observations = list(observations)
    size = math.ceil(fraction * len(observations))
    if size >= len(observations):
        return observations
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(observations), size=size, replace=False).tolist())
    return [observations[i] for i in chosen]


def fuse(scenario: Scenario, models, fraction: float = 1.0, seed: int = 0, fusion: str = "product") -> Estimate:
    """Estimate the unknown location from a subsample of the observations.

    Per-vertex evidence is accumulated with compensated sums that make the
    result independent of observation order; ``fusion='product'`` sums log
    densities, ``fusion='sum'`` sums raw densities.
    """
    if fusion not in FUSION_MODES:
        raise ValueError(f"fusion must be one of {FUSION_MODES}")
    used = subsample(scenario.observations, fraction, seed)
    missing = sorted({label for label, _ in used if label not in models})
    if missing:
        raise MissingModelError(f"no model for relation label(s): {', '.join(missing)}")

    grid = make_grid(scenario.bbox, scenario.dim)
    lats = grid.vertices[:, 0]
    lons = grid.vertices[:, 1]
    per_observation = np.empty((len(used), grid.vertex_count))
    for row, (label, landmark) in enumerate(used):
        dist, orient = feature_components(lats, lons, landmark.lat, landmark.lon, grid.origin)
        per_observation[row] = models[label].logpdf(np.column_stack([dist, orient]))

    if fusion == "product":
        log_vertex = np.array(
            [math.fsum(per_observation[:, j]) for j in range(grid.vertex_count)]
        )
        peak = log_vertex.max()
        if math.isinf(peak):
            raise ValueError("all observations underflowed on every grid vertex")
        vertex_mass = np.exp(log_vertex - peak)
    else:
        densities = np.exp(per_observation)
        vertex_mass = np.array(
            [math.fsum(densities[:, j]) for j in range(grid.vertex_count)]
        )
        if vertex_mass.max() <= 0.0:
            raise ValueError("all observations underflowed on every grid vertex")

    vertex_mass = vertex_mass / math.fsum(vertex_mass)
    corners = grid.regions
    region = (
        vertex_mass[corners[:, 0]]
        + vertex_mass[corners[:, 1]]
        + vertex_mass[corners[:, 2]]
        + vertex_mass[corners[:, 3]]
    ) / 4.0
    region = region / math.fsum(region)

    centers = grid.region_centers()
    center = (
        float(math.fsum(region * centers[:, 0])),
        float(math.fsum(region * centers[:, 1])),
    )
    mode_index = int(np.argmax(region))
    mode_center = (float(centers[mode_index, 0]), float(centers[mode_index, 1]))
    return Estimate(
        center=center,
        error_km=haversine_km(center[0], center[1], scenario.unknown.lat, scenario.unknown.lon),
        region_likelihoods=region,
        grid=grid,
        mode_center=mode_center,
        mode_error_km=haversine_km(
            mode_center[0], mode_center[1], scenario.unknown.lat, scenario.unknown.lon
        ),
        observations_used=tuple(used),
    )


def save_scenario(scenario: Scenario, path: str) -> None:
    """Write the scenario file format (see ``load_scenario``)."""
    lines = [
        "bbox\t{!r}\t{!r}\t{!r}\t{!r}\n".format(*scenario.bbox),
        f"dim\t{scenario.dim}\n",
        f"unknown\t{scenario.unknown.name}\t{scenario.unknown.lat!r}\t{scenario.unknown.lon!r}\n",
    ]
    lines.extend(
        f"{label}\t{landmark.name}\t{landmark.lat!r}\t{landmark.lon!r}\n"
        for label, landmark in scenario.observations
    )
    with open(path, "w", encoding="utf-8") as handle:
        handle.writelines(lines)


def load_scenario(path: str) -> Scenario:
    """Read a scenario: bbox/dim/unknown header lines, then observations.

    Lines are tab-separated: ``bbox<TAB>min_lat<TAB>min_lon<TAB>max_lat<TAB>
    max_lon``, ``dim<TAB>n``, ``unknown<TAB>name<TAB>lat<TAB>lon``, then one
    ``label<TAB>landmark_name<TAB>lat<TAB>lon`` line per observation.
    """
    bbox = None
    dim = None
    unknown = None
    observations: list[tuple[str, Poi]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            fields = stripped.split("\t")
            try:
                if fields[0] == "bbox" and len(fields) == 5:
                    bbox = tuple(float(f) for f in fields[1:])
                elif fields[0] == "dim" and len(fields) == 2:
                    dim = int(fields[1])
                elif fields[0] == "unknown" and len(fields) == 4:
                    unknown = Poi(fields[1], float(fields[2]), float(fields[3]))
                elif len(fields) == 4:
                    observations.append((fields[0], Poi(fields[1], float(fields[2]), float(fields[3]))))
                else:
                    raise ValueError("unrecognized line")
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if bbox is None or dim is None or unknown is None:
        raise ValueError(f"{path}: scenario needs bbox, dim, and unknown header lines")
    return Scenario(unknown=unknown, observations=tuple(observations), bbox=bbox, dim=dim)
