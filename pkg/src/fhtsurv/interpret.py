"""Parameter-space risk maps via inverse-distance-weighted event times.

Every trained subject with an observed event is a point in the model's
two-dimensional parameter space; a query point's interpolated event time is

    T(p) = sum_i w_i T_i / sum_i w_i,   w_i = 1 / sqrt(d(p, p_i)),

a convex combination of the source times that acts as a risk proxy across
the whole plane.  A query closer than 1e-12 to a source takes that source's
time (the formula's limit).

The default distance is Euclidean after mapping the second parameter axis
to log scale for the driftless kind (its learned range spans decades) and
leaving both axes raw for the drifted kind; pass ``log_second=False`` (or a
custom metric to ``idw_time``) for plain Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fht import DistKind

EXACT_MATCH_DIST = 1e-12
_GRID_CHUNK = 64


def euclidean_distances(queries: np.ndarray, sources: np.ndarray) -> np.ndarray:
    diff = queries[:, None, :] - sources[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def idw_time(query, source_params, source_times, metric=None):
    """Interpolate event times at query points (convex in the source times)."""
    source_params = np.atleast_2d(np.asarray(source_params, dtype=np.float64))
    source_times = np.asarray(source_times, dtype=np.float64)
    if source_params.shape[0] == 0:
        raise ValueError("source set is empty")
    if not np.all(source_times > 0.0):
        raise ValueError("source times must be > 0")
    query = np.asarray(query, dtype=np.float64)
    scalar = query.ndim == 1
    queries = np.atleast_2d(query)
    dist = (metric or euclidean_distances)(queries, source_params)
    out = np.empty(queries.shape[0])
    exact = dist < EXACT_MATCH_DIST
    hit = exact.any(axis=1)
    for i in np.flatnonzero(hit):
        out[i] = source_times[exact[i]].mean()
    rest = ~hit
    if rest.any():
        w = 1.0 / np.sqrt(dist[rest])
        out[rest] = (w @ source_times) / w.sum(axis=1)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class AxisSpec:
    name: str
    lo: float
    hi: float
    scale: str = "linear"  # or "log"
    resolution: int = 200

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("axis needs hi > lo")
        if self.scale not in ("linear", "log"):
            raise ValueError("scale must be 'linear' or 'log'")
        if self.scale == "log" and self.lo <= 0.0:
            raise ValueError("log axis needs lo > 0")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")

    def grid(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.resolution)
        return np.linspace(self.lo, self.hi, self.resolution)


@dataclass
class RiskMap:
    """Interpolated event-time grid plus the subject overlay used to build it."""

    x_axis: AxisSpec
    y_axis: AxisSpec
    grid: np.ndarray  # (y_resolution, x_resolution)
    n_sources: int
    overlay_params: np.ndarray  # (n, 2) raw parameter coordinates
    overlay_times: np.ndarray
    overlay_delta: np.ndarray

    def write_csv(self, grid_path, overlay_path=None) -> None:
        xg, yg = self.x_axis.grid(), self.y_axis.grid()
        with open(grid_path, "w", encoding="utf-8") as fh:
            for ax, nm in ((self.x_axis, "x_axis"), (self.y_axis, "y_axis")):
                fh.write(
                    f"# {nm}: name={ax.name} scale={ax.scale} "
                    f"min={ax.lo!r} max={ax.hi!r} resolution={ax.resolution}\n"
                )
            fh.write(f"# n_sources: {self.n_sources}\n")
            fh.write(f"{self.x_axis.name},{self.y_axis.name},time\n")
            for iy, yv in enumerate(yg):
                for ix, xv in enumerate(xg):
                    fh.write(f"{xv!r},{yv!r},{self.grid[iy, ix]!r}\n")
        if overlay_path is not None:
            with open(overlay_path, "w", encoding="utf-8") as fh:
                fh.write(f"{self.x_axis.name},{self.y_axis.name},time,event\n")
                for (px, py), t, d in zip(
                    self.overlay_params, self.overlay_times, self.overlay_delta
                ):
                    fh.write(f"{px!r},{py!r},{t!r},{int(d)}\n")


_AXIS_NAMES = {
    DistKind.LEVY: ("x0", "diffusion"),
    DistKind.INVERSE_GAUSSIAN: ("x0", "drift"),
}


def default_axes(kind: DistKind, params: np.ndarray, resolution=200, log_second=None):
    """Axes spanning the 1st-99th percentile of the parameters, padded 10%,
    then widened if needed so every training point lies inside the grid.

    The second axis defaults to log scale for the driftless kind.
    """
    if log_second is None:
        log_second = kind == DistKind.LEVY
    names = _AXIS_NAMES[kind]
    axes = []
    for j, name in enumerate(names):
        col = params[:, j]
        log_axis = log_second and j == 1
        if log_axis:
            col = np.log(col)
        lo, hi = np.percentile(col, [1.0, 99.0])
        pad = 0.1 * max(hi - lo, 1e-12)
        lo = min(lo - pad, float(col.min()) - 1e-12)
        hi = max(hi + pad, float(col.max()) + 1e-12)
        if log_axis:
            axes.append(AxisSpec(name, float(np.exp(lo)), float(np.exp(hi)), "log", resolution))
        else:
            axes.append(AxisSpec(name, float(lo), float(hi), "linear", resolution))
    return tuple(axes)


def _metric_coords(points: np.ndarray, axes) -> np.ndarray:
    cols = []
    for j, ax in enumerate(axes):
        col = points[:, j]
        cols.append(np.log(col) if ax.scale == "log" else col)
    return np.stack(cols, axis=1)


def risk_grid(model, train_data, axes=None, resolution=200, overlay_data=None) -> RiskMap:
    """Interpolated event-time map over the model's parameter plane.

    Sources are the uncensored training subjects' predicted parameters and
    observed times; the overlay lists every subject of ``overlay_data``
    (default: the training data) for external plotting.
    """
    params = model.params_for(train_data.x)
    uncensored = train_data.delta == 1
    if not uncensored.any():
        raise ValueError("need at least one uncensored training record")
    src_params = params[uncensored]
    src_times = train_data.time[uncensored]
    if axes is None:
        axes = default_axes(model.kind, params, resolution=resolution)
    x_axis, y_axis = axes

    src_coords = _metric_coords(src_params, axes)
    xg, yg = x_axis.grid(), y_axis.grid()
    grid = np.empty((y_axis.resolution, x_axis.resolution))
    for start in range(0, y_axis.resolution, _GRID_CHUNK):
        rows = yg[start : start + _GRID_CHUNK]
        qx, qy = np.meshgrid(xg, rows)
        queries = np.stack([qx.ravel(), qy.ravel()], axis=1)
        q_coords = _metric_coords(queries, axes)
        vals = idw_time(q_coords, src_coords, src_times)
        grid[start : start + len(rows)] = vals.reshape(len(rows), x_axis.resolution)

    if overlay_data is None:
        overlay_params, overlay_times, overlay_delta = params, train_data.time, train_data.delta
    else:
        overlay_params = model.params_for(overlay_data.x)
        overlay_times, overlay_delta = overlay_data.time, overlay_data.delta
    return RiskMap(
        x_axis=x_axis,
        y_axis=y_axis,
        grid=grid,
        n_sources=int(uncensored.sum()),
        overlay_params=overlay_params,
        overlay_times=overlay_times,
        overlay_delta=overlay_delta,
    )
