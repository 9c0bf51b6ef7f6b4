"""Non-uniform spatial mesh on [0, R] with geometrically growing spacing.

Spacing grows by a constant ratio ``r > 1`` from the origin outwards, so the
mesh is very fine near x = 0 (where the solution can form a jump or a cusp)
and coarse in the exponentially decaying tail.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMeshSpec, LengthMismatch, OutOfDomain

#: Mesh parameters reproducing a first spacing of about 1.03e-7 on [0, 30].
CANONICAL_M = 4000
CANONICAL_R = 30.0
CANONICAL_LAST_SPACING = 0.1034

_RATIO_BRACKET = (1.0 + 1e-15, 10.0)
_BISECTION_ITERS = 200


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable 1D mesh ``0 = x[0] < x[1] < ... < x[M] = R``.

    Attributes
    ----------
    nodes : ndarray, shape (M+1,)
        Node coordinates (dimensionless photon energy). Read-only.
    ratio : float
        Constant spacing ratio ``dx[i+1] / dx[i]`` used at construction.
    """

    nodes: np.ndarray
    ratio: float = float("nan")
    spacings: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise InvalidMeshSpec("mesh needs at least two nodes")
        if x[0] != 0.0:
            raise InvalidMeshSpec("first node must be 0")
        dx = np.diff(x)
        if not np.all(np.isfinite(dx)) or np.any(dx <= 0):
            raise InvalidMeshSpec("nodes must be finite and strictly increasing")
        x.flags.writeable = False
        dx.flags.writeable = False
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "spacings", dx)

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def R(self) -> float:
        return float(self.nodes[-1])

    def __len__(self):
        return self.nodes.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "x"])
        for i, xi in enumerate(self.nodes):
            w.writerow([i, f"{xi:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Mesh":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(np.array([float(r["x"]) for r in rows]))


def _scaled_sum(r: float, M: int) -> float:
    # sum_{j=0}^{M-1} r^{-j}, written so that r**M never overflows
    return -np.expm1(-M * np.log(r)) / -np.expm1(-np.log(r))


def _solve_ratio(M: int, R: float, last_spacing: float) -> float:
    def g(r):
        return last_spacing * _scaled_sum(r, M) - R

    lo, hi = _RATIO_BRACKET
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0 > g_hi):
        raise InvalidMeshSpec(
            f"no geometric ratio r > 1 gives sum R={R} with M={M} and "
            f"last spacing {last_spacing} (need M*last_spacing > R)"
        )
    for _ in range(_BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2 * np.finfo(float).eps * mid:
            break
    return 0.5 * (lo + hi)


def build_geometric_mesh(M: int, R: float, last_spacing: float) -> Mesh:
    """Build the mesh with ``dx[i] = h0 * r**i`` summing to ``R``.

    ``r`` is found by bisection so that the last spacing equals
    ``last_spacing``; the final node is then snapped exactly to ``R``.

    Raises
    ------
    InvalidMeshSpec
        If ``M < 3``, the spacing is out of range, or no ``r > 1`` exists.
    """
    if int(M) != M or M < 3:
        raise InvalidMeshSpec(f"M must be an integer >= 3, got {M!r}")
    M = int(M)
    if not (np.isfinite(R) and R > 0):
        raise InvalidMeshSpec(f"R must be positive, got {R!r}")
    if not (0 < last_spacing < R):
        raise InvalidMeshSpec(f"need 0 < last_spacing < R, got {last_spacing!r}")

    r = _solve_ratio(M, float(R), float(last_spacing))
    i = np.arange(M)
    spacings = last_spacing * np.exp((i - (M - 1)) * np.log(r))
    nodes = np.empty(M + 1)
    nodes[0] = 0.0
    np.cumsum(spacings, out=nodes[1:])
    nodes[-1] = R
    return Mesh(nodes, ratio=r)


def canonical_mesh() -> Mesh:
    return build_geometric_mesh(CANONICAL_M, CANONICAL_R, CANONICAL_LAST_SPACING)


def interpolate(mesh: Mesh, values, x: float) -> float:
    """Piecewise-linear interpolation of nodal ``values`` at ``x``."""
    values = np.asarray(values, dtype=float)
    if values.shape != mesh.nodes.shape:
        raise LengthMismatch(f"expected {mesh.nodes.size} values, got {values.size}")
    if not (0.0 <= x <= mesh.R):
        raise OutOfDomain(f"x={x} outside [0, {mesh.R}]")
    return float(np.interp(x, mesh.nodes, values))


def refine(mesh: Mesh) -> Mesh:
    """Nested refinement: split every cell geometrically, ratio ``sqrt(r)``.

    Every node of ``mesh`` is (up to rounding) a node of the result.
    """
    q = math.sqrt(mesh.ratio)
    return build_geometric_mesh(2 * mesh.M, mesh.R, float(mesh.spacings[-1]) * q / (1 + q))


def coarsen(mesh: Mesh) -> Mesh:
    """Inverse of :func:`refine`: merge cell pairs, ratio ``r**2``. Needs even M."""
    if mesh.M % 2 or mesh.M < 6:
        raise InvalidMeshSpec("coarsening needs an even M >= 6")
    r = mesh.ratio
    return build_geometric_mesh(mesh.M // 2, mesh.R, float(mesh.spacings[-1]) * (1 + 1 / r))
