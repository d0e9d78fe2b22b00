"""B-spline and NURBS basis machinery on open knot vectors.

Univariate evaluation follows the span-local Cox-de Boor recursion
(NURBS Book algorithms A2.1-A2.3), vectorized over evaluation points.
Tensor-product and rational (NURBS) spaces are thin wrappers combining
per-direction evaluations; the multiplier space used by the contact
formulation is derived here by stripping boundary knots and dropping
two degrees.

Conventions:
    * indices are 0-based everywhere,
    * the parametric domain is closed; the right endpoint evaluates in
      the last nonempty span,
    * degree-0 functions are element indicators with the half-open
      convention (closed on the last element).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class SplineError(ValueError):
    """Invalid knot vector, degree, or evaluation point."""


_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class KnotVector:
    """Univariate knot vector with degree bookkeeping.

    ``knots`` must be non-decreasing.  Open knot vectors (end knots
    repeated ``degree + 1`` times) are produced by
    :func:`make_open_knot_vector`; raw construction only validates
    monotonicity and a positive basis count.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if self.degree < 0:
            raise SplineError(f"degree must be non-negative, got {self.degree}")
        if knots.ndim != 1 or knots.size < self.degree + 2:
            raise SplineError("knot vector too short for degree")
        if np.any(np.diff(knots) < 0):
            raise SplineError("knots must be non-decreasing")
        if self.n_basis < 1:
            raise SplineError("knot vector defines no basis functions")

    @property
    def n_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @cached_property
    def multiplicities(self) -> np.ndarray:
        _, counts = np.unique(self.knots, return_counts=True)
        return counts

    @property
    def is_open(self) -> bool:
        m = self.multiplicities
        return bool(m[0] == self.degree + 1 and m[-1] == self.degree + 1)

    @cached_property
    def spans(self) -> np.ndarray:
        """Indices of nonempty knot spans inside the domain."""
        lo, hi = self.degree, self.knots.size - self.degree - 2
        idx = np.arange(lo, hi + 1)
        return idx[self.knots[idx] < self.knots[idx + 1]]

    @cached_property
    def element_bounds(self) -> np.ndarray:
        """(n_elements, 2) parametric bounds of the nonempty spans."""
        s = self.spans
        return np.column_stack([self.knots[s], self.knots[s + 1]])

    @property
    def n_elements(self) -> int:
        return self.spans.size

    def greville(self) -> np.ndarray:
        """Greville abscissae (knot averages)."""
        if self.degree == 0:
            b = self.element_bounds
            return 0.5 * (b[:, 0] + b[:, 1])
        p = self.degree
        return np.array([self.knots[i + 1 : i + p + 1].mean() for i in range(self.n_basis)])


@dataclass(frozen=True)
class BasisEvaluation:
    """Nonzero basis functions at one point.

    ``values[j]`` is function ``first_index + j``; ``derivatives`` rows
    are orders 1..n in parametric units^-order (``None`` when no
    derivatives were requested).
    """

    first_index: int
    values: np.ndarray
    derivatives: np.ndarray | None = None


def make_open_knot_vector(breakpoints, degree, interior_multiplicities=None) -> KnotVector:
    """Build the open knot vector over the given breakpoints.

    End breakpoints get multiplicity ``degree + 1``; interior
    multiplicities default to 1 and must stay below the degree so the
    basis keeps at least C^1 continuity inside the domain.
    """
    z = np.asarray(breakpoints, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise SplineError("need at least two breakpoints")
    if np.any(np.diff(z) <= 0):
        raise SplineError("breakpoints must be strictly increasing")
    n_int = z.size - 2
    if interior_multiplicities is None:
        mult = np.ones(n_int, dtype=int)
    else:
        mult = np.asarray(interior_multiplicities, dtype=int)
        if mult.size != n_int:
            raise SplineError("one interior multiplicity per interior breakpoint")
    if n_int and (mult.min() < 1 or mult.max() > max(degree - 1, 1)):
        raise SplineError(f"interior multiplicities must lie in [1, {max(degree - 1, 1)}]")
    knots = np.concatenate(
        [np.full(degree + 1, z[0])]
        + [np.full(m, zb) for zb, m in zip(z[1:-1], mult)]
        + [np.full(degree + 1, z[-1])]
    )
    return KnotVector(knots, degree)


def find_span(kv: KnotVector, zeta: float) -> int:
    """Knot span index containing ``zeta`` (right endpoint maps to the last span)."""
    return int(find_spans(kv, np.array([zeta]))[0])


def find_spans(kv: KnotVector, zetas) -> np.ndarray:
    z = np.asarray(zetas, dtype=float)
    lo, hi = kv.domain
    slack = _DOMAIN_SLACK * max(1.0, abs(lo), abs(hi))
    if np.any(z < lo - slack) or np.any(z > hi + slack):
        raise SplineError(f"evaluation point outside parametric domain [{lo}, {hi}]")
    z = np.clip(z, lo, hi)
    spans = np.searchsorted(kv.knots, z, side="right") - 1
    return np.minimum(spans, kv.spans[-1])


def _basis_tables(kv: KnotVector, spans: np.ndarray, z: np.ndarray, n_deriv: int):
    """Vectorized Cox-de Boor values and derivatives (A2.3 over many points).

    Returns ``(values, ders)`` with shapes (m, p+1) and (m, n_deriv, p+1).
    """
    p = kv.degree
    U = kv.knots
    m = z.size
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = z - U[spans + 1 - j]
        right[:, j] = U[spans + j] - z
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved
    values = ndu[:, :, p].copy()
    if n_deriv == 0:
        return values, np.zeros((m, 0, p + 1))

    ders = np.zeros((m, n_deriv, p + 1))
    n_eff = min(n_deriv, p)
    a = np.zeros((m, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:, 0, :] = 0.0
        a[:, 1, :] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, n_eff + 1):
            d = np.zeros(m)
            rk = r - k
            pk = p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if (r - 1) <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k - 1, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, n_eff + 1):
        ders[:, k - 1, :] *= fac
        fac *= p - k
    return values, ders


def eval_basis(kv: KnotVector, zeta: float, n_deriv: int = 0) -> BasisEvaluation:
    """Values (and derivatives up to ``n_deriv``) of the p+1 nonzero functions at ``zeta``."""
    if n_deriv < 0 or n_deriv > kv.degree:
        raise SplineError("derivative order must lie in [0, degree]")
    first, values, ders = eval_basis_batch(kv, np.array([zeta]), n_deriv)
    return BasisEvaluation(int(first[0]), values[0], ders[0] if n_deriv else None)


def eval_basis_batch(kv: KnotVector, zetas, n_deriv: int = 0):
    """Batched version of :func:`eval_basis`.

    Returns ``(first_indices, values, derivatives)`` with shapes (m,),
    (m, p+1) and (m, n_deriv, p+1).
    """
    z = np.asarray(zetas, dtype=float)
    spans = find_spans(kv, z)
    lo, hi = kv.domain
    z = np.clip(z, lo, hi)
    values, ders = _basis_tables(kv, spans, z, n_deriv)
    return spans - kv.degree, values, ders


def knot_insertion(kv: KnotVector, controls, zeta_new: float):
    """Boehm insertion of a single knot; leading axis of ``controls`` indexes basis functions.

    The represented curve/field is unchanged.  For degree >= 2 the
    resulting interior multiplicity must stay <= degree - 1.
    """
    controls = np.asarray(controls, dtype=float)
    if controls.shape[0] != kv.n_basis:
        raise SplineError("one control entry per basis function required")
    lo, hi = kv.domain
    if not (lo < zeta_new < hi):
        raise SplineError("insertion point must lie strictly inside the domain")
    p = kv.degree
    U = kv.knots
    current_mult = int(np.count_nonzero(np.abs(U - zeta_new) <= _DOMAIN_SLACK))
    limit = p - 1 if p >= 2 else p
    if current_mult + 1 > limit:
        raise SplineError(
            f"multiplicity overflow: inserting {zeta_new} would reach multiplicity "
            f"{current_mult + 1} > {limit}"
        )
    k = find_span(kv, zeta_new)
    new_knots = np.insert(U, k + 1, zeta_new)
    n = controls.shape[0]
    out = np.empty((n + 1,) + controls.shape[1:], dtype=float)
    out[: k - p + 1] = controls[: k - p + 1]
    out[k + 1 :] = controls[k:]
    for i in range(k - p + 1, k + 1):
        alpha = (zeta_new - U[i]) / (U[i + p] - U[i])
        out[i] = alpha * controls[i] + (1.0 - alpha) * controls[i - 1]
    return KnotVector(new_knots, p), out


def interior_knot_vector(kv: KnotVector) -> KnotVector:
    """Strip one knot from each end; the result carries degree p - 2."""
    if kv.degree < 2:
        raise SplineError("degree must be at least 2 to derive an interior knot vector")
    if kv.n_basis < 3:
        raise SplineError("need at least 3 basis functions")
    return KnotVector(kv.knots[1:-1], kv.degree - 2)


def _clamp_end_multiplicity(kv: KnotVector) -> KnotVector:
    """Reduce end-knot multiplicities to degree + 1, dropping zero-support functions."""
    target = kv.degree + 1
    knots = kv.knots
    lead = int(np.count_nonzero(knots == knots[0]))
    trail = int(np.count_nonzero(knots == knots[-1]))
    lo = max(lead - target, 0)
    hi = knots.size - max(trail - target, 0)
    return KnotVector(knots[lo:hi], kv.degree)


@dataclass(frozen=True)
class TensorSpace:
    """Tensor product of univariate B-spline spaces."""

    knot_vectors: tuple[KnotVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "knot_vectors", tuple(self.knot_vectors))

    @property
    def ndim(self) -> int:
        return len(self.knot_vectors)

    @property
    def n_basis(self) -> tuple[int, ...]:
        return tuple(kv.n_basis for kv in self.knot_vectors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.n_basis))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knot_vectors)

    @cached_property
    def _local_offsets(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(kv.degree + 1) for kv in self.knot_vectors], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)  # (nloc, ndim)

    @property
    def n_local(self) -> int:
        return int(np.prod([kv.degree + 1 for kv in self.knot_vectors]))

    def ravel_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.n_basis))

    def eval_many(self, points, n_grad: int = 0):
        """Nonzero basis values (and parametric gradients) at many points.

        Returns ``(indices, values, grads)``: flat C-order basis indices
        (m, nloc), values (m, nloc) and gradients (m, nloc, ndim); the
        gradient array is ``None`` when ``n_grad == 0``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.ndim:
            raise SplineError(f"points must have {self.ndim} coordinates")
        m = pts.shape[0]
        firsts, vals, ders = [], [], []
        for d, kv in enumerate(self.knot_vectors):
            f, v, de = eval_basis_batch(kv, pts[:, d], min(n_grad, 1))
            firsts.append(f)
            vals.append(v)
            ders.append(de[:, 0, :] if n_grad else None)
        offs = self._local_offsets
        strides = np.array([int(np.prod(self.n_basis[d + 1 :])) for d in range(self.ndim)])
        indices = np.zeros((m, offs.shape[0]), dtype=np.int64)
        for d in range(self.ndim):
            indices += (firsts[d][:, None] + offs[None, :, d]) * strides[d]
        values = np.ones((m, offs.shape[0]))
        for d in range(self.ndim):
            values *= vals[d][:, offs[:, d]]
        grads = None
        if n_grad:
            grads = np.empty((m, offs.shape[0], self.ndim))
            for g in range(self.ndim):
                acc = np.ones((m, offs.shape[0]))
                for d in range(self.ndim):
                    table = ders[d] if d == g else vals[d]
                    acc *= table[:, offs[:, d]]
                grads[:, :, g] = acc
        return indices, values, grads


@dataclass(frozen=True)
class WeightedSpace:
    """NURBS space: a tensor B-spline space with positive weights."""

    space: TensorSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "weights", w)
        if w.size != self.space.dim:
            raise SplineError("one weight per basis function required")
        if np.any(w <= 0):
            raise SplineError("weights must be strictly positive")

    @property
    def ndim(self) -> int:
        return self.space.ndim

    @property
    def dim(self) -> int:
        return self.space.dim

    def eval_many(self, points, n_grad: int = 0):
        """Rational basis values/gradients by the quotient rule."""
        indices, bvals, bgrads = self.space.eval_many(points, n_grad)
        wloc = self.weights[indices]
        num = wloc * bvals
        W = num.sum(axis=1)
        if np.any(W <= 0):
            raise SplineError("nonpositive weight function; invalid weights")
        values = num / W[:, None]
        grads = None
        if n_grad:
            dnum = wloc[:, :, None] * bgrads
            dW = dnum.sum(axis=1)
            grads = (dnum - values[:, :, None] * dW[:, None, :]) / W[:, None, None]
        return indices, values, grads


def eval_nurbs_basis(ws: WeightedSpace, zeta, n_deriv: int = 0):
    """Rational basis values (and first-order gradients) at one parametric point.

    Returns a tuple ``(indices, values, grads)`` of the nonzero
    functions; ``grads`` is ``None`` for ``n_deriv == 0``.
    """
    if n_deriv not in (0, 1):
        raise SplineError("rational evaluation supports derivative orders 0 and 1")
    indices, values, grads = ws.eval_many(np.atleast_2d(zeta), n_deriv)
    return indices[0], values[0], (grads[0] if n_deriv else None)


def multiplier_space(primal: TensorSpace) -> TensorSpace:
    """Degree p-2 multiplier space paired with a degree-p trace space.

    Per direction the first and last knots are stripped and the degree
    dropped by two.  Leftover end-knot repetitions beyond degree - 1
    only generate identically-zero functions, so end multiplicities are
    clamped to the new degree + 1; for p = 2 the result is the space of
    element indicator functions.
    """
    reduced = []
    for kv in primal.knot_vectors:
        if kv.degree < 2:
            raise SplineError("multiplier space needs primal degree >= 2")
        reduced.append(_clamp_end_multiplicity(interior_knot_vector(kv)))
    return TensorSpace(tuple(reduced))
