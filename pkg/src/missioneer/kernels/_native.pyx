# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled point-cloud kernels: voxel-hash neighbour queries.

Same contracts as kernels._fallback; the parity tests hold both backends to
identical outputs. Each kernel hashes points into cells the size of the query
radius, so a radius query only inspects the 27 surrounding cells.
"""

from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

import numpy as np

from . import _fallback

BACKEND = "native"

# Cell coordinates are packed into one 64-bit key, 21 bits per axis. Clouds
# wider than 2^21 cells on any axis fall back to the reference kernels.
cdef long long AXIS_BITS = 21
cdef long long AXIS_MAX = (1 << 21) - 1


cdef inline long long _pack(long long ix, long long iy, long long iz) noexcept:
    return (ix << (2 * AXIS_BITS)) | (iy << AXIS_BITS) | iz


cdef inline double _d2(double[:, ::1] a, Py_ssize_t i, double[:, ::1] b, Py_ssize_t j) noexcept:
    cdef double dx = a[i, 0] - b[j, 0]
    cdef double dy = a[i, 1] - b[j, 1]
    cdef double dz = a[i, 2] - b[j, 2]
    return dx * dx + dy * dy + dz * dz


cdef inline long long _find(long long[::1] parent, long long x) noexcept:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


cdef class _Grid:
    cdef unordered_map[long long, vector[int]] cells
    cdef double cell
    cdef double ox, oy, oz
    cdef bint usable

    def __cinit__(self, double[:, ::1] points, double cell):
        cdef Py_ssize_t n = points.shape[0], i
        cdef double ox, oy, oz, mx, my, mz
        cdef long long ix, iy, iz
        self.cell = cell
        self.ox = self.oy = self.oz = 0.0
        if n == 0:
            self.usable = True
            return
        if cell <= 0.0:
            self.usable = False
            return
        ox = mx = points[0, 0]
        oy = my = points[0, 1]
        oz = mz = points[0, 2]
        for i in range(n):
            if points[i, 0] < ox: ox = points[i, 0]
            if points[i, 1] < oy: oy = points[i, 1]
            if points[i, 2] < oz: oz = points[i, 2]
            if points[i, 0] > mx: mx = points[i, 0]
            if points[i, 1] > my: my = points[i, 1]
            if points[i, 2] > mz: mz = points[i, 2]
        self.ox, self.oy, self.oz = ox, oy, oz
        if ((mx - ox) / cell + 2.0 > <double>AXIS_MAX
                or (my - oy) / cell + 2.0 > <double>AXIS_MAX
                or (mz - oz) / cell + 2.0 > <double>AXIS_MAX):
            self.usable = False
            return
        self.usable = True
        for i in range(n):
            ix = <long long>((points[i, 0] - ox) / cell)
            iy = <long long>((points[i, 1] - oy) / cell)
            iz = <long long>((points[i, 2] - oz) / cell)
            self.cells[_pack(ix, iy, iz)].push_back(<int>i)


cdef class NeighborIndex:
    """Fixed-radius nearest-neighbour queries against a static target cloud."""

    cdef object _target_arr
    cdef double[:, ::1] _target
    cdef public double radius
    cdef _Grid _grid
    cdef object _fb

    def __init__(self, target, radius):
        self._target_arr = np.ascontiguousarray(target, dtype=np.float64).reshape(-1, 3)
        self._target = self._target_arr
        self.radius = float(radius)
        self._grid = _Grid(self._target, self.radius)
        self._fb = None
        if not self._grid.usable:
            self._fb = _fallback.NeighborIndex(self._target_arr, self.radius)

    @property
    def target(self):
        return self._target_arr

    def nearest_within(self, queries):
        """Index of the nearest target point within radius per query (-1 if
        none), plus the squared distance (inf if none)."""
        if self._fb is not None:
            return self._fb.nearest_within(queries)
        q_arr = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        cdef double[:, ::1] q = q_arr
        cdef Py_ssize_t n = q.shape[0]
        idx_arr = np.full(n, -1, dtype=np.int64)
        d2_arr = np.full(n, np.inf, dtype=np.float64)
        if n == 0 or self._target.shape[0] == 0:
            return idx_arr, d2_arr
        cdef long long[::1] idx = idx_arr
        cdef double[::1] d2s = d2_arr
        cdef double cell = self._grid.cell
        cdef double r2 = self.radius * self.radius
        cdef double ox = self._grid.ox, oy = self._grid.oy, oz = self._grid.oz
        cdef double inf = np.inf
        cdef Py_ssize_t i, k, m
        cdef long long cx, cy, cz, nx, ny, nz, key, best_j, j
        cdef int dx, dy, dz
        cdef double best, d
        cdef vector[int]* bucket
        for i in range(n):
            cx = <long long>((q[i, 0] - ox) / cell) if q[i, 0] >= ox else -1
            cy = <long long>((q[i, 1] - oy) / cell) if q[i, 1] >= oy else -1
            cz = <long long>((q[i, 2] - oz) / cell) if q[i, 2] >= oz else -1
            best = inf
            best_j = -1
            for dx in range(-1, 2):
                nx = cx + dx
                if nx < 0 or nx > AXIS_MAX:
                    continue
                for dy in range(-1, 2):
                    ny = cy + dy
                    if ny < 0 or ny > AXIS_MAX:
                        continue
                    for dz in range(-1, 2):
                        nz = cz + dz
                        if nz < 0 or nz > AXIS_MAX:
                            continue
                        key = _pack(nx, ny, nz)
                        if self._grid.cells.count(key) == 0:
                            continue
                        bucket = &self._grid.cells[key]
                        m = <Py_ssize_t>bucket.size()
                        for k in range(m):
                            j = bucket[0][k]
                            d = _d2(q, i, self._target, <Py_ssize_t>j)
                            if d < best or (d == best and j < best_j):
                                best = d
                                best_j = j
            if best <= r2:
                idx[i] = best_j
                d2s[i] = best
        return idx_arr, d2_arr


def cluster_labels(points, tolerance):
    """Connected-component labels linking points within `tolerance` (inclusive).

    Labels are normalised to first-occurrence order, matching the fallback.
    """
    pts_arr = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] pts = pts_arr
    cdef Py_ssize_t n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cdef double tol = float(tolerance)
    cdef _Grid grid = _Grid(pts, tol)
    if not grid.usable:
        return _fallback.cluster_labels(pts_arr, tol)

    parent_arr = np.arange(n, dtype=np.int64)
    cdef long long[::1] parent = parent_arr
    cdef double tol2 = tol * tol
    cdef double cell = grid.cell
    cdef Py_ssize_t i, k, m
    cdef long long cx, cy, cz, nx, ny, nz, key, j, ri, rj
    cdef int dx, dy, dz
    cdef vector[int]* bucket
    for i in range(n):
        cx = <long long>((pts[i, 0] - grid.ox) / cell)
        cy = <long long>((pts[i, 1] - grid.oy) / cell)
        cz = <long long>((pts[i, 2] - grid.oz) / cell)
        for dx in range(-1, 2):
            nx = cx + dx
            if nx < 0 or nx > AXIS_MAX:
                continue
            for dy in range(-1, 2):
                ny = cy + dy
                if ny < 0 or ny > AXIS_MAX:
                    continue
                for dz in range(-1, 2):
                    nz = cz + dz
                    if nz < 0 or nz > AXIS_MAX:
                        continue
                    key = _pack(nx, ny, nz)
                    if grid.cells.count(key) == 0:
                        continue
                    bucket = &grid.cells[key]
                    m = <Py_ssize_t>bucket.size()
                    for k in range(m):
                        j = bucket[0][k]
                        if j <= i:
                            continue
                        if _d2(pts, i, pts, <Py_ssize_t>j) <= tol2:
                            ri = _find(parent, i)
                            rj = _find(parent, j)
                            if ri != rj:
                                if ri < rj:
                                    parent[rj] = ri
                                else:
                                    parent[ri] = rj

    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef long long next_label = 0
    cdef dict label_of = {}
    for i in range(n):
        ri = _find(parent, i)
        if ri not in label_of:
            label_of[ri] = next_label
            next_label += 1
        out[i] = label_of[ri]
    return out_arr


def neighborhood_moments(points, radius):
    """Per-point count, mean, and biased covariance within `radius` (self included)."""
    pts_arr = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    cdef double[:, ::1] pts = pts_arr
    cdef Py_ssize_t n = pts.shape[0]
    counts_arr = np.ones(n, dtype=np.int64)
    if n == 0:
        return counts_arr, pts_arr.copy(), np.zeros((0, 3, 3), dtype=np.float64)
    cdef double r = float(radius)
    cdef _Grid grid = _Grid(pts, r)
    if not grid.usable:
        return _fallback.neighborhood_moments(pts_arr, r)

    sums_arr = pts_arr.copy()
    sq_arr = np.einsum("ni,nj->nij", pts_arr, pts_arr)
    cdef long long[::1] counts = counts_arr
    cdef double[:, ::1] sums = sums_arr
    cdef double[:, :, ::1] sq = sq_arr
    cdef double r2 = r * r
    cdef double cell = grid.cell
    cdef Py_ssize_t i, k, m
    cdef long long cx, cy, cz, nx, ny, nz, key, j
    cdef int dx, dy, dz, a, b
    cdef vector[int]* bucket
    for i in range(n):
        cx = <long long>((pts[i, 0] - grid.ox) / cell)
        cy = <long long>((pts[i, 1] - grid.oy) / cell)
        cz = <long long>((pts[i, 2] - grid.oz) / cell)
        for dx in range(-1, 2):
            nx = cx + dx
            if nx < 0 or nx > AXIS_MAX:
                continue
            for dy in range(-1, 2):
                ny = cy + dy
                if ny < 0 or ny > AXIS_MAX:
                    continue
                for dz in range(-1, 2):
                    nz = cz + dz
                    if nz < 0 or nz > AXIS_MAX:
                        continue
                    key = _pack(nx, ny, nz)
                    if grid.cells.count(key) == 0:
                        continue
                    bucket = &grid.cells[key]
                    m = <Py_ssize_t>bucket.size()
                    for k in range(m):
                        j = bucket[0][k]
                        if j <= i:
                            continue
                        if _d2(pts, i, pts, <Py_ssize_t>j) <= r2:
                            counts[i] += 1
                            counts[j] += 1
                            for a in range(3):
                                sums[i, a] += pts[j, a]
                                sums[j, a] += pts[i, a]
                                for b in range(3):
                                    sq[i, a, b] += pts[j, a] * pts[j, b]
                                    sq[j, a, b] += pts[i, a] * pts[i, b]

    means_arr = sums_arr / counts_arr[:, None]
    covs_arr = sq_arr / counts_arr[:, None, None] - np.einsum(
        "ni,nj->nij", means_arr, means_arr
    )
    return counts_arr, means_arr, covs_arr
