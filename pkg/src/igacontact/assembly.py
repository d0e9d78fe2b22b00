"""Quadrature, degree-of-freedom management, and global assembly.

Displacement dofs are numbered ``basis_index * n_comp + component``
with basis functions in flat C-order.  Element loops are chunked and
vectorized over quadrature points; accumulation order is fixed, so
repeated assembly of the same data is bitwise reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss

from .geometry import BoundaryTrace, NurbsPatch, extract_trace, face_axis_side
from .materials import ElementInversionError, LinearMaterial, NeoHookeanMaterial
from .splines import eval_basis_batch

_CHUNK = 1024


class AssemblyError(ValueError):
    """Invalid assembly request (bad rule order, singular geometry, bad constraints)."""


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre points and weights on the reference interval [-1, 1]."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size


def gauss_rule(n: int) -> QuadratureRule:
    if not 1 <= n <= 30:
        raise AssemblyError("Gauss rule order must lie in [1, 30]")
    x, w = leggauss(n)
    return QuadratureRule(points=x, weights=w)


def _direction_tables(kv, rule: QuadratureRule):
    """Per-span Gauss data of one knot vector direction.

    Returns (first_indices, points, weights, values, derivs) with element
    axis first: shapes (nel,), (nel, n), (nel, n), (nel, n, p+1), same.
    """
    bounds = kv.element_bounds
    nel = bounds.shape[0]
    mid = 0.5 * (bounds[:, 0] + bounds[:, 1])
    half = 0.5 * (bounds[:, 1] - bounds[:, 0])
    pts = mid[:, None] + half[:, None] * rule.points[None, :]
    wts = half[:, None] * rule.weights[None, :]
    flat = pts.ravel()
    first, vals, ders = eval_basis_batch(kv, flat, n_deriv=min(1, kv.degree))
    n = rule.n
    first = first.reshape(nel, n)[:, 0]
    vals = vals.reshape(nel, n, -1)
    if ders.shape[1]:
        ders = ders[:, 0, :].reshape(nel, n, -1)
    else:
        ders = np.zeros_like(vals)
    return first, pts, wts, vals, ders


def _tensor_combine(tables):
    """Outer product over directions: list of (ce, n_d, k_d) -> (ce, prod n, prod k)."""
    out = tables[0]
    for t in tables[1:]:
        ce, a, b = out.shape
        _, n, k = t.shape
        out = (out[:, :, None, :, None] * t[:, None, :, None, :]).reshape(ce, a * n, b * k)
    return out


@dataclass
class ElementBlock:
    """Quadrature data of a chunk of elements."""

    dofs: np.ndarray  # (ce, nloc) flat basis indices
    values: np.ndarray  # (ce, nq, nloc) rational basis values
    grads_phys: np.ndarray  # (ce, nq, nloc, d)
    wdet: np.ndarray  # (ce, nq) quadrature weight x |J|
    points_param: np.ndarray  # (ce, nq, d)
    jac_inv: np.ndarray  # (ce, nq, d, d)


def iter_element_blocks(patch: NurbsPatch, n_gauss: int, chunk: int = _CHUNK):
    """Yield vectorized per-element quadrature blocks of a patch."""
    rule = gauss_rule(n_gauss)
    nd = patch.ndim
    space = patch.space.space
    tabs = [_direction_tables(kv, rule) for kv in space.knot_vectors]
    nel_dir = [t[0].shape[0] for t in tabs]
    total = int(np.prod(nel_dir))
    offs = space._local_offsets
    strides = np.array([int(np.prod(space.n_basis[d + 1 :])) for d in range(nd)])
    weights = patch.space.weights
    ctrl = patch.control_points

    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        multi = np.array(np.unravel_index(ids, nel_dir)).T  # (ce, nd)
        ce = ids.size
        firsts = [tabs[d][0][multi[:, d]] for d in range(nd)]
        dofs = np.zeros((ce, offs.shape[0]), dtype=np.int64)
        for d in range(nd):
            dofs += (firsts[d][:, None] + offs[None, :, d]) * strides[d]

        vals_d = [tabs[d][3][multi[:, d]] for d in range(nd)]
        ders_d = [tabs[d][4][multi[:, d]] for d in range(nd)]
        bvals = _tensor_combine(vals_d)
        nq = bvals.shape[1]
        bgrads = np.empty(bvals.shape + (nd,))
        for g in range(nd):
            bgrads[..., g] = _tensor_combine([ders_d[d] if d == g else vals_d[d] for d in range(nd)])

        pts_d = [tabs[d][1][multi[:, d]] for d in range(nd)]
        wts_d = [tabs[d][2][multi[:, d]] for d in range(nd)]
        pts = np.empty((ce, nq, nd))
        grid_shape = (ce,) + tuple(rule.n for _ in range(nd))
        for d in range(nd):
            expand = [None] * (nd + 1)
            expand[0] = slice(None)
            expand[d + 1] = slice(None)
            pts[..., d] = np.broadcast_to(pts_d[d][tuple(expand)], grid_shape).reshape(ce, nq)
        wq = _tensor_combine([w[:, :, None] for w in wts_d])[:, :, 0]

        wloc = weights[dofs]
        num = wloc[:, None, :] * bvals
        W = num.sum(axis=2)
        rvals = num / W[:, :, None]
        dnum = wloc[:, None, :, None] * bgrads
        dW = dnum.sum(axis=2)
        rgrads = (dnum - rvals[..., None] * dW[:, :, None, :]) / W[:, :, None, None]

        cloc = ctrl[dofs]  # (ce, nloc, d)
        J = np.einsum("ead,eqaj->eqdj", cloc, rgrads)
        det = np.linalg.det(J)
        if np.any(det <= 0):
            raise AssemblyError("singular or inverted geometry Jacobian at a quadrature point")
        Jinv = np.linalg.inv(J)
        grads_phys = np.einsum("eqaj,eqji->eqai", rgrads, Jinv)
        yield ElementBlock(
            dofs=dofs,
            values=rvals,
            grads_phys=grads_phys,
            wdet=wq * det,
            points_param=pts,
            jac_inv=Jinv,
        )


@dataclass
class GlobalSystem:
    """Sparse stiffness, load vector, dof numbering and Dirichlet data."""

    stiffness: sp.csr_matrix
    load: np.ndarray
    n_basis: int
    n_comp: int
    constraints: dict[int, float] = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.n_basis * self.n_comp

    def dof(self, basis_index: int, comp: int) -> int:
        return basis_index * self.n_comp + comp


def _scatter_matrix(blocks_iter, n_dofs: int, n_comp: int, local_matrix):
    """Accumulate per-chunk element matrices into a CSR matrix."""
    K = sp.csr_matrix((n_dofs, n_dofs))
    for block in blocks_iter:
        ke = local_matrix(block)  # (ce, nloc*nc, nloc*nc)
        ce, n, _ = ke.shape
        dofs = (block.dofs[:, :, None] * n_comp + np.arange(n_comp)[None, None, :]).reshape(ce, n)
        rows = np.broadcast_to(dofs[:, :, None], (ce, n, n)).ravel()
        cols = np.broadcast_to(dofs[:, None, :], (ce, n, n)).ravel()
        K = K + sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    return K


def assemble_stiffness(patch: NurbsPatch, mat: LinearMaterial, n_gauss: int | None = None) -> GlobalSystem:
    """Linear elastic stiffness of the isoparametric displacement space."""
    nd = patch.ndim
    n_gauss = n_gauss or max(patch.degrees) + 1
    A = mat.stiffness_tensor(nd)
    n_dofs = patch.space.dim * nd

    def local(block):
        return np.einsum(
            "eqaj,ijkl,eqbl,eq->eaibk", block.grads_phys, A, block.grads_phys, block.wdet
        ).reshape(block.dofs.shape[0], -1, block.dofs.shape[1] * nd)

    K = _scatter_matrix(iter_element_blocks(patch, n_gauss), n_dofs, nd, local)
    return GlobalSystem(stiffness=K, load=np.zeros(n_dofs), n_basis=patch.space.dim, n_comp=nd)


@dataclass(frozen=True)
class TraceQuadrature:
    """Gauss data on the elements of a boundary trace."""

    params: np.ndarray  # (m, sd) surface parametric coordinates
    weights: np.ndarray  # (m,) gauss weight x parametric span factor
    measure: np.ndarray  # (m,) surface Jacobian
    phys: np.ndarray  # (m, d)
    element: np.ndarray  # (m,) flat trace element id
    vals: np.ndarray  # (m, nloc) primal surface basis values
    idx: np.ndarray  # (m, nloc) flat surface basis indices

    @property
    def wmeas(self) -> np.ndarray:
        return self.weights * self.measure


def build_trace_quadrature(trace: BoundaryTrace, n_gauss: int | None = None) -> TraceQuadrature:
    n_gauss = n_gauss or max(trace.space.space.degrees) + 1
    rule = gauss_rule(n_gauss)
    sd = trace.ndim
    tabs = [_direction_tables(kv, rule) for kv in trace.space.space.knot_vectors]
    nel_dir = [t[0].shape[0] for t in tabs]
    n = rule.n
    flat_pts = [tabs[d][1].reshape(-1) for d in range(sd)]
    flat_wts = [tabs[d][2].reshape(-1) for d in range(sd)]
    mesh = np.meshgrid(*[np.arange(x.size) for x in flat_pts], indexing="ij")
    pos = [m.ravel() for m in mesh]
    params = np.stack([flat_pts[d][pos[d]] for d in range(sd)], axis=1)
    weights = np.ones(params.shape[0])
    for d in range(sd):
        weights = weights * flat_wts[d][pos[d]]
    element = np.ravel_multi_index(tuple(pos[d] // n for d in range(sd)), nel_dir)
    idx, vals, _ = trace.space.eval_many(params)
    measure = trace.measures(params)
    phys = trace.map_points(params)
    return TraceQuadrature(
        params=params,
        weights=weights,
        measure=measure,
        phys=phys,
        element=element,
        vals=vals,
        idx=idx,
    )


def assemble_load(
    patch: NurbsPatch,
    tractions: dict[int, np.ndarray] | None = None,
    body=None,
    n_gauss: int | None = None,
) -> np.ndarray:
    """Consistent load vector from face tractions and an optional body force."""
    nd = patch.ndim
    n_gauss = n_gauss or max(patch.degrees) + 1
    F = np.zeros(patch.space.dim * nd)
    for face, traction in (tractions or {}).items():
        face_axis_side(face, nd)  # validates the id
        trace = extract_trace(patch, face)
        tq = build_trace_quadrature(trace, n_gauss)
        t = np.asarray(traction(tq.phys) if callable(traction) else traction, dtype=float)
        t = np.broadcast_to(t, (tq.params.shape[0], nd))
        contrib = tq.vals[:, :, None] * (t * tq.wmeas[:, None])[:, None, :]
        dofs = trace.dof_map[tq.idx][:, :, None] * nd + np.arange(nd)[None, None, :]
        np.add.at(F, dofs.ravel(), contrib.ravel())
    if body is not None:
        for block in iter_element_blocks(patch, n_gauss):
            if callable(body):
                raise AssemblyError("callable body forces not supported; pass a constant vector")
            b = np.asarray(body, dtype=float)
            contrib = block.values[:, :, :, None] * b[None, None, None, :]
            contrib = (contrib * block.wdet[:, :, None, None]).sum(axis=1)
            dofs = block.dofs[:, :, None] * nd + np.arange(nd)[None, None, :]
            np.add.at(F, dofs.ravel(), contrib.ravel())
    return F


def merge_constraints(*parts: dict[int, float]) -> dict[int, float]:
    """Union of constraint dicts; conflicting values on one dof are an error."""
    out: dict[int, float] = {}
    for part in parts:
        for dof, val in part.items():
            if dof in out and not np.isclose(out[dof], val):
                raise AssemblyError(f"contradictory constraints on dof {dof}: {out[dof]} vs {val}")
            out[dof] = val
    return out


def face_basis_indices(patch: NurbsPatch, face: int) -> np.ndarray:
    axis, side = face_axis_side(face, patch.ndim)
    shape = patch.space.space.n_basis
    grid = np.arange(patch.space.dim).reshape(shape)
    return np.take(grid, -1 if side else 0, axis=axis).ravel()


def dirichlet_on_face(patch: NurbsPatch, face: int, component: int, value: float = 0.0) -> dict[int, float]:
    """Fix one displacement component of every basis function on a face."""
    nd = patch.ndim
    return {int(b) * nd + component: float(value) for b in face_basis_indices(patch, face)}


def apply_constraints(K: sp.csr_matrix, F: np.ndarray, constraints: dict[int, float]):
    """Symmetric elimination: unit diagonal rows/cols, right-hand side shifted."""
    if not constraints:
        return K.tocsr(), F.copy()
    n = F.size
    fixed = np.fromiter(constraints.keys(), dtype=np.int64)
    if fixed.size != len(set(constraints.keys())):
        raise AssemblyError("duplicate constraint dofs")
    if np.any(fixed < 0) or np.any(fixed >= n):
        raise AssemblyError("constraint dof out of range")
    values = np.fromiter(constraints.values(), dtype=float)
    u_fix = np.zeros(n)
    u_fix[fixed] = values
    Fc = F - K @ u_fix
    free = np.ones(n)
    free[fixed] = 0.0
    Df = sp.diags(free)
    unit = np.zeros(n)
    unit[fixed] = 1.0
    Kc = ((Df @ K @ Df) + sp.diags(unit)).tocsr()
    Fc[fixed] = values
    return Kc, Fc


def neo_hookean_forces(
    patch: NurbsPatch,
    mat: NeoHookeanMaterial,
    u: np.ndarray,
    n_gauss: int | None = None,
):
    """Internal force vector and consistent tangent at displacement state u.

    Total Lagrangian: gradients are taken with respect to the reference
    configuration; raises :class:`ElementInversionError` when det F <= 0
    at any quadrature point.
    """
    nd = patch.ndim
    n_gauss = n_gauss or max(patch.degrees) + 1
    n_dofs = patch.space.dim * nd
    u_mat = np.asarray(u, dtype=float).reshape(patch.space.dim, nd)
    f_int = np.zeros(n_dofs)
    K = sp.csr_matrix((n_dofs, n_dofs))
    eye = np.eye(nd)
    mu, lam = mat.lame()
    for block in iter_element_blocks(patch, n_gauss):
        uloc = u_mat[block.dofs]  # (ce, nloc, d)
        gradu = np.einsum("eai,eqaj->eqij", uloc, block.grads_phys)
        Fdef = eye[None, None, :, :] + gradu
        J = np.linalg.det(Fdef)
        if np.any(J <= 0):
            raise ElementInversionError("element inversion: det F <= 0 at a quadrature point")
        P = mat.pk1(Fdef)
        fe = np.einsum("eqij,eqaj,eq->eai", P, block.grads_phys, block.wdet)
        dofs = (block.dofs[:, :, None] * nd + np.arange(nd)[None, None, :]).reshape(
            block.dofs.shape[0], -1
        )
        np.add.at(f_int, dofs.ravel(), fe.reshape(dofs.shape).ravel())
        # tangent dP/dF = mu I (x) I + lam F^-T (x) F^-T + (mu - lam lnJ) swap-term:
        # contract per term instead of forming the fourth-order tensor
        FinvT = np.swapaxes(np.linalg.inv(Fdef), -1, -2)
        lnJ = np.log(J)
        w = np.einsum("eqiJ,eqaJ->eqai", FinvT, block.grads_phys)
        g = block.grads_phys
        k1 = np.einsum("eqaj,eqbj,eq->eab", g, g, mu * block.wdet)
        nloc = dofs.shape[1] // nd
        ke = np.zeros((dofs.shape[0], nloc, nd, nloc, nd))
        ke += k1[:, :, None, :, None] * eye[None, None, :, None, :]
        ke += np.einsum("eqai,eqbk,eq->eaibk", w, w, lam * block.wdet)
        ke += np.einsum("eqak,eqbi,eq->eaibk", w, w, (mu - lam * lnJ) * block.wdet)
        ke = ke.reshape(dofs.shape[0], dofs.shape[1], dofs.shape[1])
        ce, nl, _ = ke.shape
        rows = np.broadcast_to(dofs[:, :, None], (ce, nl, nl)).ravel()
        cols = np.broadcast_to(dofs[:, None, :], (ce, nl, nl)).ravel()
        K = K + sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
    return f_int, K
