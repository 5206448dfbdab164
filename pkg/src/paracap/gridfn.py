"""Shared container for functions sampled on space-time tensor grids."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridFunction:
    """Values on a tensor grid: axes are spatial node coordinates per
    dimension, times the temporal nodes, values has shape
    (len(axes[0]), ..., len(axes[-1]), len(times))."""

    axes: tuple
    times: np.ndarray
    values: np.ndarray
    h: float
    ht: float
    meta: dict = field(default_factory=dict)

    @property
    def ndim_space(self):
        return len(self.axes)

    def node_points(self):
        """All grid nodes as a flat ((nnodes, N) coords, (nnodes,) times) pair."""
        grids = np.meshgrid(*self.axes, self.times, indexing="ij")
        pts = np.stack([g.ravel() for g in grids[:-1]], axis=1)
        return pts, grids[-1].ravel()

    def interp(self, px, pt):
        """Multilinear interpolation at points (px: (M, N), pt: (M,))."""
        from scipy.interpolate import RegularGridInterpolator

        rgi = RegularGridInterpolator(
            tuple(self.axes) + (self.times,), self.values,
            bounds_error=False, fill_value=None)
        q = np.column_stack([np.asarray(px, float), np.asarray(pt, float)])
        return rgi(q)

    def restrict_spatial(self, mask):
        """Copy with values outside the boolean spatial mask set to NaN."""
        v = self.values.copy()
        v[~mask] = np.nan
        return GridFunction(self.axes, self.times, v, self.h, self.ht, dict(self.meta))
