"""Closed-form contact solutions, error norms, and convergence-rate fitting.

Displacement errors are integrated in the shared parametric domain on
the reference mesh's quadrature grid (coarse and reference solutions
live on the same patch geometry).  Multiplier errors are L2 norms of
the pressure mismatch on the contact boundary, with the classical
profile mapped through the arc-length coordinate measured from the
contact pole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import build_trace_quadrature, iter_element_blocks
from .contact import MultiplierBasis
from .geometry import BoundaryTrace, NurbsPatch


class VerificationError(ValueError):
    """Inconsistent comparison request or invalid rate-fit data."""


@dataclass(frozen=True)
class HertzAnalytic:
    """Contact half-width, peak pressure and pressure profile for a pressed body."""

    mode: str  # "2d" or "3d"
    radius: float
    young: float
    poisson: float
    load: float
    a: float
    p0: float

    def pressure_profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.a == 0.0:
            return np.zeros_like(r)
        val = 1.0 - (r / self.a) ** 2
        return self.p0 * np.sqrt(np.clip(val, 0.0, None))


def _check_hertz_inputs(R, E, nu, P):
    if R <= 0 or E <= 0 or P < 0:
        raise VerificationError("radius, modulus must be positive and load non-negative")
    if not 0 <= nu < 0.5:
        raise VerificationError("Poisson ratio must lie in [0, 0.5)")


def hertz_2d(R: float, E: float, nu: float, P: float) -> HertzAnalytic:
    """Long cylinder of radius R pressed on a plane by a uniform face pressure P.

    The contact band half-width is ``a = sqrt(8 R^2 P (1 - nu^2) / (pi E))``
    and the peak pressure ``p0 = 4 R P / (pi a)``.
    """
    _check_hertz_inputs(R, E, nu, P)
    a = math.sqrt(8.0 * R * R * P * (1.0 - nu * nu) / (math.pi * E))
    p0 = 4.0 * R * P / (math.pi * a) if a > 0 else 0.0
    return HertzAnalytic(mode="2d", radius=R, young=E, poisson=nu, load=P, a=a, p0=p0)


def hertz_3d(R: float, E: float, nu: float, P: float) -> HertzAnalytic:
    """Hemisphere of radius R pressed on a plane by a uniform face pressure P.

    The face pressure resultant is ``P * pi R^2``, giving the contact
    radius ``a = (3 pi R^3 P (1 - nu^2) / (4 E))^(1/3)`` and peak
    pressure ``p0 = 3 R^2 P / (2 a^2)``.
    """
    _check_hertz_inputs(R, E, nu, P)
    a = (3.0 * math.pi * R ** 3 * P * (1.0 - nu * nu) / (4.0 * E)) ** (1.0 / 3.0)
    p0 = 3.0 * R * R * P / (2.0 * a * a) if a > 0 else 0.0
    return HertzAnalytic(mode="3d", radius=R, young=E, poisson=nu, load=P, a=a, p0=p0)


def displacement_errors(
    u_coarse: np.ndarray,
    patch_coarse: NurbsPatch,
    u_ref: np.ndarray,
    patch_ref: NurbsPatch,
    n_gauss: int | None = None,
) -> tuple[float, float]:
    """Absolute L2 and full H1 norms of the difference of two displacement fields.

    Both patches must carry the same geometry map (nested refinements of
    one patch); integration runs on the reference quadrature grid.
    """
    if patch_coarse.ndim != patch_ref.ndim:
        raise VerificationError("geometry dimension mismatch")
    nd = patch_ref.ndim
    n_gauss = n_gauss or max(patch_ref.degrees) + 1
    uc = np.asarray(u_coarse, dtype=float).reshape(-1, nd)
    ur = np.asarray(u_ref, dtype=float).reshape(-1, nd)
    if uc.shape[0] != patch_coarse.space.dim or ur.shape[0] != patch_ref.space.dim:
        raise VerificationError("coefficient count does not match the space dimension")
    if uc.shape == ur.shape and np.array_equal(uc, ur) and patch_coarse.space.dim == patch_ref.space.dim:
        return 0.0, 0.0  # identical fields differ by the zero function
    l2_sq = 0.0
    h1_semi_sq = 0.0
    for block in iter_element_blocks(patch_ref, n_gauss):
        ce, nq = block.wdet.shape
        vals_r = np.einsum("eqa,ead->eqd", block.values, ur[block.dofs])
        grad_r = np.einsum("eai,eqaj->eqij", ur[block.dofs], block.grads_phys)
        pts = block.points_param.reshape(-1, nd)
        idx_c, vals_c, grads_c = patch_coarse.space.eval_many(pts, n_grad=1)
        vals_cc = np.einsum("ma,mad->md", vals_c, uc[idx_c]).reshape(ce, nq, nd)
        grad_param = np.einsum("mad,maj->mdj", uc[idx_c], grads_c).reshape(ce, nq, nd, nd)
        grad_cc = np.einsum("eqdj,eqji->eqdi", grad_param, block.jac_inv)
        dv = vals_cc - vals_r
        dg = grad_cc - grad_r
        l2_sq += float(np.einsum("eqd,eqd,eq->", dv, dv, block.wdet))
        h1_semi_sq += float(np.einsum("eqij,eqij,eq->", dg, dg, block.wdet))
    l2 = math.sqrt(l2_sq)
    return l2, math.sqrt(l2_sq + h1_semi_sq)


def arc_coordinate_2d(trace: BoundaryTrace, n_samples: int = 4001):
    """Arc length from parameter 0 along a 1D trace.

    Returns a callable mapping a :class:`TraceQuadrature` (or any object
    with surface ``params``) to arc-length coordinates, built from a
    trapezoidal table of the parametric speed.
    """
    zs = np.linspace(0.0, 1.0, n_samples)
    speed = trace.measures(zs[:, None])
    cumulative = np.concatenate(
        [[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(zs))]
    )

    def r_of(tq) -> np.ndarray:
        params = tq.params if hasattr(tq, "params") else np.atleast_2d(tq)
        return np.interp(params[:, 0], zs, cumulative)

    return r_of


def geodesic_coordinate_3d(radius: float, pole_direction):
    """Great-circle distance from the contact pole on a sphere of given radius.

    Returns a callable mapping a :class:`TraceQuadrature` (or an array of
    physical points) to geodesic distances.
    """
    p = np.asarray(pole_direction, dtype=float)
    p = p / np.linalg.norm(p)

    def r_of(tq) -> np.ndarray:
        x = tq.phys if hasattr(tq, "phys") else np.atleast_2d(tq)
        cosang = np.clip((x @ p) / radius, -1.0, 1.0)
        return radius * np.arccos(cosang)

    return r_of


def multiplier_pressure_at(lam: np.ndarray, basis: MultiplierBasis, params) -> np.ndarray:
    """Contact pressure p = -lambda of a multiplier field at surface parameters."""
    idx, vals = basis.values_at(params)
    return -np.einsum("mk,mk->m", vals, np.asarray(lam, dtype=float)[idx])


def multiplier_error_analytic(
    lam: np.ndarray,
    basis: MultiplierBasis,
    analytic: HertzAnalytic,
    r_of,
    n_gauss: int = 8,
) -> float:
    """L2 mismatch on the contact face between -lambda and the closed-form profile."""
    tq = build_trace_quadrature(basis.trace, n_gauss)
    p_h = multiplier_pressure_at(lam, basis, tq.params)
    p = analytic.pressure_profile(r_of(tq) if callable(r_of) else np.asarray(r_of))
    return math.sqrt(float(((p_h - p) ** 2 * tq.wmeas).sum()))


def multiplier_error_reference(
    lam_coarse: np.ndarray,
    basis_coarse: MultiplierBasis,
    lam_ref: np.ndarray,
    basis_ref: MultiplierBasis,
    n_gauss: int = 6,
) -> float:
    """L2 mismatch between two multiplier fields, integrated on the reference trace."""
    tq = build_trace_quadrature(basis_ref.trace, n_gauss)
    p_c = multiplier_pressure_at(lam_coarse, basis_coarse, tq.params)
    p_r = multiplier_pressure_at(lam_ref, basis_ref, tq.params)
    return math.sqrt(float(((p_c - p_r) ** 2 * tq.wmeas).sum()))


def fit_rate(pairs) -> float:
    """Least-squares slope of log(error) against log(h)."""
    data = np.asarray(list(pairs), dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 2:
        raise VerificationError("need at least two (h, error) pairs")
    if np.any(data <= 0):
        raise VerificationError("h and error values must be positive")
    x = np.log(data[:, 0])
    y = np.log(data[:, 1])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)
