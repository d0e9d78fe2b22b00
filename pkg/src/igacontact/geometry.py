"""NURBS patch geometry for the contact benchmarks.

The benchmark domains (quarter disc, sphere octant) are single patches
built from exact rational-quadratic arcs, laid out so that the curved
contact boundary is one full parametric face.  Both constructions use a
collapsed parametric face at the body center (and, in 3D, at the pole
axis); quadrature points are always placed strictly inside elements, so
assembly never touches the degenerate sets.

Face ids are integers ``2*axis + side`` with ``side`` 0 at parameter 0
and 1 at parameter 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .splines import (
    KnotVector,
    SplineError,
    TensorSpace,
    WeightedSpace,
    knot_insertion,
    make_open_knot_vector,
)


class GeometryError(ValueError):
    """Invalid patch data or degenerate evaluation request."""


def face_id(axis: int, side: int) -> int:
    return 2 * axis + side


def face_axis_side(face: int, ndim: int) -> tuple[int, int]:
    if not 0 <= face < 2 * ndim:
        raise GeometryError(f"invalid face id {face} for a {ndim}D patch")
    return face // 2, face % 2


@dataclass(frozen=True)
class NurbsPatch:
    """Tensor-product NURBS geometry map from the unit cube.

    ``control_points`` holds one point per basis function in flat
    C-order matching :meth:`TensorSpace.eval_many` indices.
    """

    space: WeightedSpace
    control_points: np.ndarray

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        object.__setattr__(self, "control_points", cp)
        if cp.shape != (self.space.dim, self.ndim):
            raise GeometryError(
                f"control net must be ({self.space.dim}, {self.ndim}), got {cp.shape}"
            )

    @property
    def ndim(self) -> int:
        return self.space.ndim

    @property
    def knot_vectors(self) -> tuple[KnotVector, ...]:
        return self.space.space.knot_vectors

    @property
    def degrees(self) -> tuple[int, ...]:
        return self.space.space.degrees

    def map_points(self, points) -> np.ndarray:
        idx, vals, _ = self.space.eval_many(points)
        return np.einsum("ma,mad->md", vals, self.control_points[idx])

    def jacobians(self, points):
        """Jacobian matrices dx/dzeta and determinants at many points."""
        idx, _, grads = self.space.eval_many(points, n_grad=1)
        J = np.einsum("mad,maj->mdj", self.control_points[idx], grads)
        det = np.linalg.det(J)
        return J, det

    def homogeneous_controls(self) -> np.ndarray:
        w = self.space.weights
        return np.concatenate([self.control_points * w[:, None], w[:, None]], axis=1)

    def insert_knots(self, axis: int, values) -> "NurbsPatch":
        """Refine by Boehm insertion along one axis; the map is unchanged."""
        kvs = list(self.knot_vectors)
        shape = self.space.space.n_basis
        hw = self.homogeneous_controls().reshape(shape + (self.ndim + 1,))
        hw = np.moveaxis(hw, axis, 0)
        kv = kvs[axis]
        for z in np.atleast_1d(values):
            kv, flat = knot_insertion(kv, hw.reshape(hw.shape[0], -1), float(z))
            hw = flat.reshape((kv.n_basis,) + hw.shape[1:])
        hw = np.moveaxis(hw, 0, axis)
        kvs[axis] = kv
        weights = hw[..., -1].ravel()
        controls = hw[..., :-1].reshape(-1, self.ndim) / weights[:, None]
        return NurbsPatch(WeightedSpace(TensorSpace(tuple(kvs)), weights), controls)

    def refine_to_breakpoints(self, breakpoints_per_axis) -> "NurbsPatch":
        """Insert every listed breakpoint (once) that is not yet a knot."""
        patch = self
        for axis, breaks in enumerate(breakpoints_per_axis):
            existing = patch.knot_vectors[axis].breakpoints
            new = [z for z in np.asarray(breaks, float) if not np.any(np.isclose(existing, z))]
            if new:
                patch = patch.insert_knots(axis, sorted(new))
        return patch


def jacobian(patch: NurbsPatch, zeta):
    """Jacobian matrix and determinant at one parametric point; det must be positive."""
    J, det = patch.jacobians(np.atleast_2d(zeta))
    if det[0] <= 0:
        raise GeometryError(f"nonpositive Jacobian determinant {det[0]} at {zeta}")
    return J[0], float(det[0])


def graded_breakpoints(n_spans: int, span_fraction: float, length_fraction: float) -> np.ndarray:
    """Breakpoints on [0, 1] concentrating spans near 0.

    ``round(span_fraction * n_spans)`` uniform spans cover
    ``[0, length_fraction]``; the remaining spans cover the rest.
    """
    if n_spans < 2:
        raise GeometryError("need at least 2 spans")
    if not (0 < span_fraction < 1 and 0 < length_fraction < 1):
        raise GeometryError("fractions must lie in (0, 1)")
    k = int(round(span_fraction * n_spans))
    if k < 1 or k >= n_spans:
        raise GeometryError("span fraction leaves an empty band")
    fine = np.linspace(0.0, length_fraction, k + 1)
    coarse = np.linspace(length_fraction, 1.0, n_spans - k + 1)
    return np.concatenate([fine, coarse[1:]])


def graded_breakpoints_toward_end(n_spans, span_fraction, length_fraction) -> np.ndarray:
    """Mirror image of :func:`graded_breakpoints`: spans concentrate near 1."""
    return 1.0 - graded_breakpoints(n_spans, span_fraction, length_fraction)[::-1]


_ARC_WEIGHT = 1.0 / np.sqrt(2.0)


def quarter_disc_patch(R: float) -> NurbsPatch:
    """Quarter disc of radius R in the first quadrant, exact to rounding.

    Axis 0 is radial (0 at the center), axis 1 runs along the arc from
    the contact pole (R, 0) to (0, R).  Faces:

    * ``QUARTER_DISC_CONTACT_FACE`` (axis 0, side 1): the circular arc,
    * ``QUARTER_DISC_LOAD_FACE``: the straight edge x = 0,
    * ``QUARTER_DISC_SYMMETRY_FACE``: the straight edge y = 0,
    * axis 0 / side 0 collapses to the center (degenerate).
    """
    if R <= 0:
        raise GeometryError("radius must be positive")
    kv = make_open_knot_vector([0, 1], 2)
    arc_ctrl = np.array([[R, 0.0], [R, R], [0.0, R]])
    arc_w = np.array([1.0, _ARC_WEIGHT, 1.0])
    # radial degree elevated to 2: rows at 0, C/2, C keep the map zeta_r * arc
    ctrl = np.zeros((3, 3, 2))
    ctrl[1] = 0.5 * arc_ctrl
    ctrl[2] = arc_ctrl
    weights = np.tile(arc_w, (3, 1))
    ws = WeightedSpace(TensorSpace((kv, kv)), weights.ravel())
    return NurbsPatch(ws, ctrl.reshape(-1, 2))


QUARTER_DISC_CONTACT_FACE = face_id(0, 1)  # outer radius: the circular arc
QUARTER_DISC_LOAD_FACE = face_id(1, 1)  # straight edge x = 0
QUARTER_DISC_SYMMETRY_FACE = face_id(1, 0)  # straight edge y = 0
# in the quarter-disc layout axis 0 / side 0 is the collapsed center


def sphere_octant_patch(R: float) -> NurbsPatch:
    """Solid ball octant {x, y >= 0, z <= 0} of radius R.

    This is the hemispherical body cut by its two vertical symmetry
    planes.  Axis 0 is azimuthal (x-z plane toward y-z plane), axis 1
    polar (0 at the pole (0, 0, -R)), axis 2 radial.  Faces:

    * ``SPHERE_OCTANT_CONTACT_FACE`` (axis 2, side 1): spherical surface,
    * ``SPHERE_OCTANT_LOAD_FACE`` (axis 1, side 1): flat top z = 0,
    * ``SPHERE_OCTANT_SYMMETRY_FACES``: planes y = 0 and x = 0,
    * axis 1 / side 0 and axis 2 / side 0 are degenerate (pole axis, center).
    """
    if R <= 0:
        raise GeometryError("radius must be positive")
    kv = make_open_knot_vector([0, 1], 2)
    # surface of revolution of the pole-to-equator quarter arc about the z axis
    profile = np.array([[0.0, 0.0, -R], [R, 0.0, -R], [R, 0.0, 0.0]])
    profile_w = np.array([1.0, _ARC_WEIGHT, 1.0])
    surf_ctrl = np.zeros((3, 3, 3))  # (azimuth, polar, xyz)
    surf_w = np.zeros((3, 3))
    for j in range(3):
        r, z = profile[j, 0], profile[j, 2]
        surf_ctrl[:, j] = [[r, 0.0, z], [r, r, z], [0.0, r, z]]
        surf_w[:, j] = profile_w[j] * np.array([1.0, _ARC_WEIGHT, 1.0])
    ctrl = np.zeros((3, 3, 3, 3))  # (azimuth, polar, radial, xyz)
    ctrl[:, :, 1] = 0.5 * surf_ctrl
    ctrl[:, :, 2] = surf_ctrl
    weights = np.repeat(surf_w[:, :, None], 3, axis=2)
    ws = WeightedSpace(TensorSpace((kv, kv, kv)), weights.ravel())
    return NurbsPatch(ws, ctrl.reshape(-1, 3))


SPHERE_OCTANT_CONTACT_FACE = face_id(2, 1)
SPHERE_OCTANT_LOAD_FACE = face_id(1, 1)
SPHERE_OCTANT_SYMMETRY_FACES = (face_id(0, 0), face_id(0, 1))  # y = 0, x = 0


def unit_square_patch(degree: int, n_spans: int) -> NurbsPatch:
    """Identity map on the unit square (Greville control points, unit weights)."""
    kv = make_open_knot_vector(np.linspace(0, 1, n_spans + 1), degree)
    g = kv.greville()
    ctrl = np.array([[x, y] for x in g for y in g])
    ws = WeightedSpace(TensorSpace((kv, kv)), np.ones(kv.n_basis ** 2))
    return NurbsPatch(ws, ctrl)


def elevate_bezier_degree(patch: NurbsPatch) -> NurbsPatch:
    """Raise every direction's degree by one on a single-element patch."""
    for kv in patch.knot_vectors:
        if kv.n_elements != 1:
            raise GeometryError("degree elevation implemented for single-element patches only")
    shape = patch.space.space.n_basis
    hw = patch.homogeneous_controls().reshape(shape + (patch.ndim + 1,))
    kvs = []
    for axis, kv in enumerate(patch.knot_vectors):
        p = kv.degree
        hw = np.moveaxis(hw, axis, 0)
        old = hw
        new = np.zeros((p + 2,) + old.shape[1:])
        for i in range(p + 2):
            a = i / (p + 1.0)
            if i == 0:
                new[i] = old[0]
            elif i == p + 1:
                new[i] = old[p]
            else:
                new[i] = a * old[i - 1] + (1 - a) * old[i]
        hw = np.moveaxis(new, 0, axis)
        lo, hi = kv.domain
        kvs.append(make_open_knot_vector([lo, hi], p + 1))
    weights = hw[..., -1].ravel()
    controls = hw[..., :-1].reshape(-1, patch.ndim) / weights[:, None]
    return NurbsPatch(WeightedSpace(TensorSpace(tuple(kvs)), weights), controls)


@dataclass(frozen=True)
class BoundaryTrace:
    """Restriction of a patch to one parametric face.

    ``dof_map`` sends flat surface basis indices to flat volume basis
    indices; ``normal`` is the outward unit normal of the rigid body the
    face may contact.
    """

    patch: NurbsPatch
    face: int
    space: WeightedSpace
    control_points: np.ndarray
    dof_map: np.ndarray
    normal: np.ndarray

    @property
    def ndim(self) -> int:
        return self.space.ndim

    def map_points(self, points) -> np.ndarray:
        idx, vals, _ = self.space.eval_many(points)
        return np.einsum("ma,mad->md", vals, self.control_points[idx])

    def tangents(self, points):
        idx, _, grads = self.space.eval_many(points, n_grad=1)
        return np.einsum("mad,maj->mjd", self.control_points[idx], grads)

    def measures(self, points) -> np.ndarray:
        """Surface Jacobian |dGamma/dzeta| at the given surface parameters."""
        t = self.tangents(points)
        if self.ndim == 1:
            return np.linalg.norm(t[:, 0, :], axis=1)
        cross = np.cross(t[:, 0, :], t[:, 1, :])
        return np.linalg.norm(cross, axis=1)


def extract_trace(patch: NurbsPatch, face: int, rigid_normal=None) -> BoundaryTrace:
    """Face restriction of the patch with its rigid-plane outward normal."""
    axis, side = face_axis_side(face, patch.ndim)
    shape = patch.space.space.n_basis
    grid = np.arange(patch.space.dim).reshape(shape)
    take = np.take(grid, -1 if side else 0, axis=axis)
    dof_map = take.ravel()
    kvs = tuple(kv for a, kv in enumerate(patch.knot_vectors) if a != axis)
    surf_space = WeightedSpace(TensorSpace(kvs), patch.space.weights[dof_map])
    if rigid_normal is None:
        normal = np.zeros(patch.ndim)
    else:
        normal = np.asarray(rigid_normal, dtype=float)
        nrm = np.linalg.norm(normal)
        if not np.isclose(nrm, 1.0):
            raise GeometryError("rigid normal must be a unit vector")
    return BoundaryTrace(
        patch=patch,
        face=face,
        space=surf_space,
        control_points=patch.control_points[dof_map],
        dof_map=dof_map,
        normal=normal,
    )


@dataclass(frozen=True)
class MeshView:
    """Element list of a patch with physical size estimates."""

    bounds: np.ndarray  # (n_el, ndim, 2) parametric bounds
    sizes: np.ndarray  # (n_el,) physical bounding-chord diameters

    @property
    def n_elements(self) -> int:
        return self.bounds.shape[0]

    @property
    def h(self) -> float:
        return float(self.sizes.max())


def mesh_view(patch: NurbsPatch) -> MeshView:
    """Elements as products of nonempty spans; h_Q from the 2^d mapped corners."""
    per_dir = [kv.element_bounds for kv in patch.knot_vectors]
    combos = list(product(*[range(len(b)) for b in per_dir]))
    nd = patch.ndim
    bounds = np.array([[per_dir[d][c[d]] for d in range(nd)] for c in combos])
    corners = np.array(list(product(*[(0, 1)] * nd)))  # (2^d, nd)
    pts = bounds[:, :, 0][:, None, :] + corners[None, :, :] * (
        bounds[:, :, 1] - bounds[:, :, 0]
    )[:, None, :]
    mapped = patch.map_points(pts.reshape(-1, nd)).reshape(len(combos), -1, nd)
    diff = mapped[:, :, None, :] - mapped[:, None, :, :]
    sizes = np.sqrt((diff ** 2).sum(axis=-1)).max(axis=(1, 2))
    return MeshView(bounds=bounds, sizes=sizes)


def trace_mesh_sizes(trace: BoundaryTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per-element parametric bounds and physical sizes of a boundary trace."""
    per_dir = [kv.element_bounds for kv in trace.space.space.knot_vectors]
    combos = list(product(*[range(len(b)) for b in per_dir]))
    nd = trace.ndim
    bounds = np.array([[per_dir[d][c[d]] for d in range(nd)] for c in combos])
    corners = np.array(list(product(*[(0, 1)] * nd)))
    pts = bounds[:, :, 0][:, None, :] + corners[None, :, :] * (
        bounds[:, :, 1] - bounds[:, :, 0]
    )[:, None, :]
    mapped = trace.map_points(pts.reshape(-1, nd)).reshape(len(combos), -1, trace.patch.ndim)
    diff = mapped[:, :, None, :] - mapped[:, None, :, :]
    sizes = np.sqrt((diff ** 2).sum(axis=-1)).max(axis=(1, 2))
    return bounds, sizes


def export_patch_text(patch: NurbsPatch, path) -> None:
    """Plain-text patch dump: degrees, knot vectors, weights, control points.

    Schema (whitespace separated, one section per line group):
        dim <d>
        degrees <p_1> ... <p_d>
        knots <axis> <count> <values...>        (one line per axis)
        weights <count> <values...>
        control_points <count>                  followed by one point per line
    """
    lines = [f"dim {patch.ndim}", "degrees " + " ".join(str(p) for p in patch.degrees)]
    for a, kv in enumerate(patch.knot_vectors):
        vals = " ".join(f"{v:.17g}" for v in kv.knots)
        lines.append(f"knots {a} {kv.knots.size} {vals}")
    w = patch.space.weights
    lines.append(f"weights {w.size} " + " ".join(f"{v:.17g}" for v in w))
    lines.append(f"control_points {patch.space.dim}")
    for row in patch.control_points:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
