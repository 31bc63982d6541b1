"""Search structures for temporal and spatial event association.

Three exact queries live here:

* ``IntervalIndex``: for a split batch, which second-half events lie within
  the temporal gate of a first-half event. Every gate has the same
  half-width, so the stabbing query reduces to binary search over the sorted
  second-half timestamps.
* ``RayIndex``: nearest unit ray under Euclidean (chord) distance, backed by
  a kd-tree with an exact tie-resolution pass so equidistant neighbours
  always resolve to the smallest index.
* ``windowed_nearest``: batched nearest-neighbour over per-query contiguous
  index windows with monotone endpoints, the inner loop of the registration
  solver. Implemented as a two-pointer sweep over a 2-D hash grid keyed on
  ray x/y; for unit rays the planar distance lower-bounds the chord, which
  makes the expanding ring search exact.

All three return exactly what a linear scan would, including ties.
"""

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .errors import InsufficientDataError


class IntervalIndex:
    """Temporal gates of a split batch, queryable by first-half timestamp.

    A second-half event k (global index >= split count) matches a first-half
    timestamp t when ``|t_k - t - offset| <= half_width``.
    """

    def __init__(self, times, offset, half_width, base_index=0):
        self.times = np.ascontiguousarray(times, dtype=float)
        if self.times.size and np.any(np.diff(self.times) < 0):
            raise InsufficientDataError("interval index times must be sorted")
        self.offset = float(offset)
        self.half_width = float(half_width)
        self.base_index = int(base_index)

    def window_bounds(self, query_times):
        """Half-open [lo, hi) bounds into the indexed times for each query."""
        q = np.asarray(query_times, dtype=float)
        lo = np.searchsorted(self.times, q + self.offset - self.half_width, "left")
        hi = np.searchsorted(self.times, q + self.offset + self.half_width, "right")
        return lo.astype(np.int64), hi.astype(np.int64)

    def stab(self, t):
        """Global indices of all events whose gate contains t, ascending."""
        lo, hi = self.window_bounds(np.array([t]))
        return np.arange(lo[0], hi[0], dtype=np.int64) + self.base_index


def build_interval_index(batch, epsilon_t):
    """Interval index over the second half of a split batch.

    The gate of each second-half event is centred one half-window after the
    event it could continue, so queries are first-half timestamps.
    """
    m = batch.split_count()
    return IntervalIndex(
        batch.t[m:], offset=batch.half_duration, half_width=epsilon_t,
        base_index=m,
    )


class RayIndex:
    """Nearest-neighbour search over unit rays, smallest index on ties."""

    def __init__(self, rays):
        rays = np.ascontiguousarray(rays, dtype=float)
        if rays.ndim != 2 or rays.shape[1] != 3 or rays.shape[0] == 0:
            raise InsufficientDataError("ray index needs a non-empty (n, 3) array")
        self.rays = rays
        self._tree = cKDTree(rays)

    def __len__(self):
        return self.rays.shape[0]

    def nearest(self, query):
        """(index, distance) of the closest ray to one query ray.

        The kd-tree proposes a nearest distance; candidates within a relative
        1e-9 of it are then re-scored with the same arithmetic a linear scan
        would use, so exact ties resolve to the smallest index.
        """
        query = np.asarray(query, dtype=float)
        d, _ = self._tree.query(query)
        ball = self._tree.query_ball_point(query, d * (1.0 + 1e-9) + 1e-300)
        cand = np.sort(np.asarray(ball, dtype=np.int64))
        diff = self.rays[cand] - query
        d2 = np.einsum("ij,ij->i", diff, diff)
        best = int(cand[np.argmin(d2)])  # argmin returns the first minimum
        return best, float(np.sqrt(d2.min()))


def build_ray_index(rays):
    return RayIndex(rays)


# ---------------------------------------------------------------------------
# Windowed nearest-neighbour sweep.
# ---------------------------------------------------------------------------

# No fastmath anywhere below: the distance arithmetic must round identically
# to the numpy linear-scan oracle, ties included.


@njit(cache=True)
def _grid_cells(tx, ty, x0, y0, inv_hx, inv_hy, nx, ny):
    n = tx.size
    cell = np.empty(n, np.int64)
    for i in range(n):
        gx = int((tx[i] - x0) * inv_hx)
        gy = int((ty[i] - y0) * inv_hy)
        if gx < 0:
            gx = 0
        elif gx >= nx:
            gx = nx - 1
        if gy < 0:
            gy = 0
        elif gy >= ny:
            gy = ny - 1
        cell[i] = gy * nx + gx
    return cell


@njit(cache=True)
def _grid_sweep(targets, cell, x0, y0, inv_hx, inv_hy, nx, ny, hmin,
                lo, hi, queries, head, nxt, prv, out_idx, out_d2):
    nq = queries.shape[0]
    head[:] = -1
    cur_lo = 0
    cur_hi = 0
    for j in range(nq):
        a = lo[j]
        b = hi[j]
        # grow the window first so removals never touch uninserted targets
        while cur_hi < b:
            k = cur_hi
            c = cell[k]
            nxt[k] = head[c]
            prv[k] = -1
            if head[c] >= 0:
                prv[head[c]] = k
            head[c] = k
            cur_hi += 1
        while cur_lo < a:
            k = cur_lo
            c = cell[k]
            if prv[k] >= 0:
                nxt[prv[k]] = nxt[k]
            else:
                head[c] = nxt[k]
            if nxt[k] >= 0:
                prv[nxt[k]] = prv[k]
            cur_lo += 1
        if a >= b:
            out_idx[j] = -1
            out_d2[j] = np.inf
            continue
        qx = queries[j, 0]
        qy = queries[j, 1]
        qz = queries[j, 2]
        gx = int((qx - x0) * inv_hx)
        gy = int((qy - y0) * inv_hy)
        if gx < 0:
            gx = 0
        elif gx >= nx:
            gx = nx - 1
        if gy < 0:
            gy = 0
        elif gy >= ny:
            gy = ny - 1
        best = -1
        bd = np.inf
        R = 0
        rmax = nx if nx > ny else ny
        while R <= rmax:
            if best >= 0 and R >= 1:
                # cells in ring R are at least (R-1)*hmin away in the plane,
                # and planar distance lower-bounds chord distance
                dmin = (R - 1) * hmin
                if dmin * dmin > bd:
                    break
            cy0 = gy - R
            cy1 = gy + R
            for cyy in range(max(cy0, 0), min(cy1, ny - 1) + 1):
                on_edge_row = cyy == cy0 or cyy == cy1
                row = cyy * nx
                cx0 = gx - R
                cx1 = gx + R
                cxx = cx0 if cx0 > 0 else 0
                last = cx1 if cx1 < nx - 1 else nx - 1
                while cxx <= last:
                    if on_edge_row or cxx == cx0 or cxx == cx1:
                        k = head[row + cxx]
                        while k >= 0:
                            dx = targets[k, 0] - qx
                            dy = targets[k, 1] - qy
                            dz = targets[k, 2] - qz
                            d = dx * dx + dy * dy + dz * dz
                            if d < bd or (d == bd and k < best):
                                bd = d
                                best = k
                            k = nxt[k]
                        cxx += 1
                    else:
                        # interior of the ring was scanned in earlier rings
                        cxx = cx1 if cx1 <= last else last + 1
            R += 1
        out_idx[j] = best
        out_d2[j] = bd
    return out_idx, out_d2


class WindowSearch:
    """Reusable exact nearest-ray search over sliding index windows.

    Built once per target set; ``query`` may then be called repeatedly with
    different query rays (the registration solver re-queries every iteration
    with re-rotated rays while the windows stay fixed).
    """

    # grid sizing: aim for a few targets per cell, cap the cell count
    _OCCUPANCY = 1.8
    _MAX_CELLS_PER_AXIS = 512

    def __init__(self, target_rays):
        targets = np.ascontiguousarray(target_rays, dtype=float)
        if targets.ndim != 2 or targets.shape[1] != 3:
            raise InsufficientDataError("window search needs an (n, 3) ray array")
        self.targets = targets
        n = targets.shape[0]
        if n == 0:
            return
        tx = targets[:, 0]
        ty = targets[:, 1]
        x0 = float(tx.min())
        y0 = float(ty.min())
        xspan = max(float(tx.max()) - x0, 1e-12)
        yspan = max(float(ty.max()) - y0, 1e-12)
        h = self._OCCUPANCY * float(np.sqrt(xspan * yspan / n))
        nx = int(min(max(xspan / h, 1.0), self._MAX_CELLS_PER_AXIS))
        ny = int(min(max(yspan / h, 1.0), self._MAX_CELLS_PER_AXIS))
        # widen cells a hair so the max coordinate maps inside the last cell
        hx = xspan / nx * (1.0 + 1e-12)
        hy = yspan / ny * (1.0 + 1e-12)
        self._geom = (x0, y0, 1.0 / hx, 1.0 / hy, nx, ny, min(hx, hy))
        self._cell = _grid_cells(tx.copy(), ty.copy(), x0, y0,
                                 1.0 / hx, 1.0 / hy, nx, ny)
        self._head = np.empty(nx * ny, np.int64)
        self._nxt = np.empty(n, np.int64)
        self._prv = np.empty(n, np.int64)

    def query(self, lo, hi, query_rays):
        """Nearest target within [lo[j], hi[j]) for each query ray j.

        Windows must have non-decreasing lo and hi. Returns (index, distance)
        arrays; empty windows yield index -1 and infinite distance.
        """
        lo = np.ascontiguousarray(lo, dtype=np.int64)
        hi = np.ascontiguousarray(hi, dtype=np.int64)
        queries = np.ascontiguousarray(query_rays, dtype=float)
        nq = queries.shape[0]
        out_idx = np.empty(nq, np.int64)
        out_d2 = np.empty(nq, np.float64)
        if self.targets.shape[0] == 0 or nq == 0:
            out_idx[:] = -1
            out_d2[:] = np.inf
            return out_idx, np.sqrt(out_d2)
        x0, y0, inv_hx, inv_hy, nx, ny, hmin = self._geom
        _grid_sweep(self.targets, self._cell, x0, y0, inv_hx, inv_hy,
                    nx, ny, hmin, lo, hi, queries,
                    self._head, self._nxt, self._prv, out_idx, out_d2)
        return out_idx, np.sqrt(out_d2)


def windowed_nearest(target_rays, lo, hi, query_rays):
    """One-shot exact windowed nearest-neighbour query."""
    return WindowSearch(target_rays).query(lo, hi, query_rays)
