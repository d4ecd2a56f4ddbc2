"""Grid-based location scoring from relation mixture models.

A square grid of vertices is laid over a bounding box, indexed row-major
from the bottom-left vertex, proceeding rightward then row by row upward;
the cells between vertices form regions indexed the same way. To score a
point: every vertex in turn acts as the reference landmark, the model whose
density best explains the point's feature vector relative to that vertex is
selected, and that model then scores every vertex as a hypothetical subject
location with the reference held fixed. Scores are accumulated per scored
vertex (a compensated sum across reference vertices), normalized into a
vertex distribution, and averaged over each region's four corners.

Densities are evaluated in log space and exponentiated only after
subtracting the surface-wide maximum, so the stored surface is a uniformly
scaled copy of the raw densities; every derived quantity is scale-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import ProjectionOrigin, feature_components

__all__ = [
    "Grid",
    "PredictionSurface",
    "PredictionTrial",
    "RelationOracle",
    "best_model",
    "make_grid",
    "prediction_accuracy",
    "prediction_trial",
    "qualitative_accuracy",
    "region_ranking",
    "score_point",
    "surface_to_csv",
    "surface_to_geojson",
    "topk_hit",
]


@dataclass(frozen=True)
class Grid:
    """Vertex lattice over a bounding box.

    ``vertices`` holds (lat, lon) rows; vertex ``row * dim + col`` sits at
    the row-th latitude from the bottom and col-th longitude from the left.
    ``regions`` holds the four vertex indices of each cell in the order
    (bottom-left, bottom-right, top-left, top-right).
    """

    bbox: tuple[float, float, float, float]
    dim: int
    vertices: np.ndarray
    regions: np.ndarray
    origin: ProjectionOrigin

    @property
    def vertex_count(self) -> int:
        return self.dim * self.dim

    @property
    def region_count(self) -> int:
        return (self.dim - 1) * (self.dim - 1)

    def region_containing(self, lat: float, lon: float) -> int:
        """Index of the region holding the point; outside the box is an error."""
        min_lat, min_lon, max_lat, max_lon = self.bbox
        if not (min_lat <= lat <= max_lat and min_lon <= lon <= max_lon):
            raise ValueError(f"point ({lat}, {lon}) outside bbox {self.bbox}")
        cells = self.dim - 1
        row = min(int((lat - min_lat) / (max_lat - min_lat) * cells), cells - 1)
        col = min(int((lon - min_lon) / (max_lon - min_lon) * cells), cells - 1)
        return row * cells + col

    def region_centers(self) -> np.ndarray:
        """(region_count, 2) array of cell-center (lat, lon) pairs."""
        return self.vertices[self.regions].mean(axis=1)


def make_grid(bbox: tuple[float, float, float, float], dim: int) -> Grid:
    """Build a ``dim x dim`` vertex grid spanning ``bbox``.

    ``bbox`` is (min_lat, min_lon, max_lat, max_lon); both extents must be
    non-degenerate and ``dim`` at least 2.
    """
    min_lat, min_lon, max_lat, max_lon = bbox
    if dim < 2:
        raise ValueError("grid dim must be >= 2")
    if not (min_lat < max_lat and min_lon < max_lon):
        raise ValueError(f"degenerate bbox: {bbox}")
    lats = np.linspace(min_lat, max_lat, dim)
    lons = np.linspace(min_lon, max_lon, dim)
    grid_lon, grid_lat = np.meshgrid(lons, lats)
    vertices = np.column_stack([grid_lat.ravel(), grid_lon.ravel()])
    cells = dim - 1
    regions = np.empty((cells * cells, 4), dtype=int)
    for row in range(cells):
        for col in range(cells):
            base = row * dim + col
            regions[row * cells + col] = (base, base + 1, base + dim, base + dim + 1)
    origin = ProjectionOrigin((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0)
    return Grid(tuple(bbox), dim, vertices, regions, origin)


@dataclass
class PredictionSurface:
    """Per-point scoring output.

    ``vertex_likelihoods[i, j]`` is the (uniformly scaled) density of vertex
    j as subject with vertex i as reference under the model selected at i;
    ``fused_vertex`` is the normalized per-vertex accumulation and
    ``region_likelihoods`` its four-corner average per region.
    ``underflow_vertices`` lists reference vertices where every model
    underflowed to zero density and the first label was used as fallback.
    """

    vertex_likelihoods: np.ndarray
    fused_vertex: np.ndarray
    region_likelihoods: np.ndarray
    chosen_labels: tuple[str, ...]
    underflow_vertices: tuple[int, ...] = ()


def _latlon(point) -> tuple[float, float]:
    if hasattr(point, "lat"):
        return float(point.lat), float(point.lon)
    lat, lon = point
    return float(lat), float(lon)


def _select_models(point, grid: Grid, models) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Per reference vertex, pick the label whose density best explains the point.

    Returns the lexicographically sorted labels, the chosen label index per
    vertex (ties resolve to the first, i.e. smallest, label), and the
    per-vertex maximum log-density used for underflow detection.
    """
    lat, lon = _latlon(point)
    labels = sorted(models)
    if not labels:
        raise ValueError("at least one model is required")
    dist, orient = feature_components(lat, lon, grid.vertices[:, 0], grid.vertices[:, 1], grid.origin)
    point_features = np.column_stack([dist, orient])
    log_densities = np.stack([models[label].logpdf(point_features) for label in labels])
    return labels, np.argmax(log_densities, axis=0), np.max(log_densities, axis=0)


def best_model(point, ref_vertex, models, origin: ProjectionOrigin) -> str:
    """Label of the model maximizing density of the point relative to one vertex.

    Ties break lexicographically; if every model underflows to zero density
    the lexicographically first label is returned.
    """
    lat, lon = _latlon(point)
    vlat, vlon = _latlon(ref_vertex)
    labels = sorted(models)
    if not labels:
        raise ValueError("at least one model is required")
    dist, orient = feature_components(lat, lon, vlat, vlon, origin)
    x = np.array([[float(dist), float(orient)]])
    scores = [float(models[label].logpdf(x)[0]) for label in labels]
    return labels[int(np.argmax(scores))]


def _pairwise_features(grid: Grid) -> np.ndarray:
    """(V, V, 2) features of vertex j as subject relative to vertex i."""
    lats = grid.vertices[:, 0]
    lons = grid.vertices[:, 1]
    dist, orient = feature_components(
        lats[None, :], lons[None, :], lats[:, None], lons[:, None], grid.origin
    )
    return np.dstack([dist, orient])


def score_point(point, grid: Grid, models) -> PredictionSurface:
    """Score every grid vertex and region as the location of ``point``."""
    labels, choice, best_log = _select_models(point, grid, models)
    v = grid.vertex_count
    underflow = tuple(int(i) for i in np.flatnonzero(np.isneginf(best_log)))

    pair_features = _pairwise_features(grid).reshape(v * v, 2)
    log_surface = np.empty((v, v))
    for index, label in enumerate(labels):
        rows = choice == index
        if rows.any():
            block = pair_features.reshape(v, v, 2)[rows].reshape(-1, 2)
            log_surface[rows] = models[label].logpdf(block).reshape(-1, v)

    peak = log_surface.max()
    if math.isinf(peak):
        scaled = np.ones((v, v))
        underflow = tuple(range(v))
    else:
        scaled = np.exp(log_surface - peak)

    column_sums = np.array([math.fsum(scaled[:, j]) for j in range(v)])
    total = math.fsum(column_sums)
    fused = column_sums / total
    corners = grid.regions
    region = (fused[corners[:, 0]] + fused[corners[:, 1]] + fused[corners[:, 2]] + fused[corners[:, 3]]) / 4.0
    return PredictionSurface(
        vertex_likelihoods=scaled,
        fused_vertex=fused,
        region_likelihoods=region,
        chosen_labels=tuple(labels[i] for i in choice),
        underflow_vertices=underflow,
    )


def region_ranking(region_likelihoods: np.ndarray) -> list[int]:
    """Region indices from most to least likely; ties favor the lower index."""
    order = sorted(range(len(region_likelihoods)), key=lambda r: (-region_likelihoods[r], r))
    return order


def topk_hit(surface: PredictionSurface, point, grid: Grid, k: int) -> bool:
    """True when the region containing the point ranks in the top k."""
    if not (1 <= k <= grid.region_count):
        raise ValueError(f"k must lie in [1, {grid.region_count}]")
    lat, lon = _latlon(point)
    target = grid.region_containing(lat, lon)
    return target in region_ranking(surface.region_likelihoods)[:k]


@dataclass
class PredictionTrial:
    """Batch scoring outcome for uniformly sampled points.

    ``ranks[p]`` is the rank (0-based) of point p's true region in its
    surface's ordering, so the top-k accuracy is ``mean(rank < k)``.
    ``selection_log`` holds (ref_vertex_latlon, point_latlon, label) for
    every model selection when collected.
    """

    grid: Grid
    points: np.ndarray
    ranks: list[int]
    selection_log: list[tuple[tuple[float, float], tuple[float, float], str]] = field(
        default_factory=list
    )

    def accuracy(self, k: int) -> float:
        if not (1 <= k <= self.grid.region_count):
            raise ValueError(f"k must lie in [1, {self.grid.region_count}]")
        return sum(rank < k for rank in self.ranks) / len(self.ranks)


def prediction_trial(
    models,
    bbox: tuple[float, float, float, float],
    dim: int,
    n_points: int,
    seed: int,
    collect_log: bool = False,
) -> PredictionTrial:
    """Score ``n_points`` uniform random points over the bbox grid."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    grid = make_grid(bbox, dim)
    rng = np.random.default_rng(seed)
    lats = rng.uniform(bbox[0], bbox[2], n_points)
    lons = rng.uniform(bbox[1], bbox[3], n_points)
    ranks: list[int] = []
    log: list[tuple[tuple[float, float], tuple[float, float], str]] = []
    for lat, lon in zip(lats, lons):
        surface = score_point((lat, lon), grid, models)
        order = region_ranking(surface.region_likelihoods)
        ranks.append(order.index(grid.region_containing(lat, lon)))
        if collect_log:
            point = (float(lat), float(lon))
            log.extend(
                ((float(vlat), float(vlon)), point, label)
                for (vlat, vlon), label in zip(grid.vertices, surface.chosen_labels)
            )
    return PredictionTrial(grid, np.column_stack([lats, lons]), ranks, log)


def prediction_accuracy(
    models,
    bbox: tuple[float, float, float, float],
    dim: int,
    n_points: int,
    k: int,
    seed: int,
) -> float:
    """Fraction of uniform random points whose region lands in the top k."""
    return prediction_trial(models, bbox, dim, n_points, seed).accuracy(k)


@dataclass(frozen=True)
class RelationOracle:
    """Geometric ground-truth predicates for label correctness.

    Proximity labels hold within a distance threshold; directional labels
    hold when the subject's orientation seen from the reference falls in a
    sector around the cardinal direction (north 90, south 270, east 0,
    west 180 degrees).
    """

    near_km: float = 6.5
    at_km: float = 2.5
    containment_km: float = 2.5
    sector_half_width_deg: float = 60.0

    def __post_init__(self) -> None:
        if min(self.near_km, self.at_km, self.containment_km) <= 0.0:
            raise ValueError("distance thresholds must be positive")
        if not (0.0 < self.sector_half_width_deg <= 90.0):
            raise ValueError("sector half-width must lie in (0, 90]")

    @classmethod
    def from_file(cls, path: str) -> RelationOracle:
        """Read ``key<TAB>value`` overrides for the default thresholds."""
        overrides: dict[str, float] = {}
        allowed = {"near_km", "at_km", "containment_km", "sector_half_width_deg"}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split("\t")
                if len(fields) != 2 or fields[0] not in allowed:
                    raise ValueError(f"{path}:{lineno}: expected '<threshold>\\t<value>'")
                overrides[fields[0]] = float(fields[1])
        return cls(**overrides)

    def is_correct(self, label: str, distance_km: float, orientation_deg: float) -> bool:
        if label in ("near", "next to", "close to"):
            return distance_km <= self.near_km
        if label == "at":
            return distance_km <= self.at_km
        if label == "in":
            return distance_km <= self.containment_km
        centers = {
            "east of": 0.0,
            "northeast of": 45.0,
            "north of": 90.0,
            "northwest of": 135.0,
            "west of": 180.0,
            "southwest of": 225.0,
            "south of": 270.0,
            "southeast of": 315.0,
        }
        if label in centers:
            delta = abs((orientation_deg - centers[label] + 180.0) % 360.0 - 180.0)
            return delta <= self.sector_half_width_deg
        return False


def qualitative_accuracy(selection_log, oracle: RelationOracle, origin: ProjectionOrigin) -> float:
    """Fraction of logged selections whose label predicate actually holds."""
    entries = list(selection_log)
    if not entries:
        raise ValueError("selection log must be non-empty")
    correct = 0
    for (vlat, vlon), (plat, plon), label in entries:
        distance, orientation = feature_components(plat, plon, vlat, vlon, origin)
        correct += oracle.is_correct(label, float(distance), float(orientation))
    return correct / len(entries)


def surface_to_csv(grid: Grid, region_likelihoods: np.ndarray) -> str:
    """Region likelihoods as ``region_row,region_col,likelihood`` CSV text."""
    cells = grid.dim - 1
    lines = ["region_row,region_col,likelihood"]
    for index, value in enumerate(region_likelihoods):
        lines.append(f"{index // cells},{index % cells},{float(value)!r}")
    return "\n".join(lines) + "\n"


def surface_to_geojson(grid: Grid, region_likelihoods: np.ndarray) -> dict:
    """Region likelihoods as a GeoJSON FeatureCollection of cell polygons."""
    cells = grid.dim - 1
    features = []
    for index, value in enumerate(region_likelihoods):
        bl, br, tl, tr = grid.regions[index]
        ring = [
            [float(grid.vertices[v, 1]), float(grid.vertices[v, 0])]
            for v in (bl, br, tr, tl, bl)
        ]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "region_row": index // cells,
                    "region_col": index % cells,
                    "likelihood": float(value),
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}
