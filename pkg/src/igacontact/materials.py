"""Constitutive laws: linear elasticity and compressible Neo-Hookean.

2D problems are treated as plane strain, so both laws share the 3D Lame
parameters.  The Neo-Hookean stored energy is the standard compressible
form ``W = mu/2 (I1 - d) - mu ln J + lam/2 (ln J)^2``, which linearizes
to the elastic tensor at the identity deformation gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaterialError(ValueError):
    """Invalid material parameters or inadmissible deformation state."""


class ElementInversionError(MaterialError):
    """Deformation gradient with nonpositive determinant."""


def _check_elastic(young: float, poisson: float):
    if young <= 0:
        raise MaterialError("Young's modulus must be positive")
    if not (0 <= poisson < 0.5):
        raise MaterialError("Poisson's ratio must lie in [0, 0.5)")


def _lame(young: float, poisson: float) -> tuple[float, float]:
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


@dataclass(frozen=True)
class LinearMaterial:
    young: float
    poisson: float

    def __post_init__(self):
        _check_elastic(self.young, self.poisson)

    def lame(self) -> tuple[float, float]:
        return _lame(self.young, self.poisson)

    def stiffness_tensor(self, ndim: int) -> np.ndarray:
        """Fourth-order tensor a_ijkl (plane strain for ndim == 2)."""
        mu, lam = self.lame()
        eye = np.eye(ndim)
        return (
            lam * np.einsum("ij,kl->ijkl", eye, eye)
            + mu * np.einsum("ik,jl->ijkl", eye, eye)
            + mu * np.einsum("il,jk->ijkl", eye, eye)
        )


@dataclass(frozen=True)
class NeoHookeanMaterial:
    young: float
    poisson: float

    def __post_init__(self):
        _check_elastic(self.young, self.poisson)

    def lame(self) -> tuple[float, float]:
        return _lame(self.young, self.poisson)

    def energy(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        mu, lam = self.lame()
        J = np.linalg.det(F)
        if np.any(J <= 0):
            raise ElementInversionError("nonpositive deformation gradient determinant")
        I1 = np.einsum("...ij,...ij->...", F, F)
        lnJ = np.log(J)
        return 0.5 * mu * (I1 - d) - mu * lnJ + 0.5 * lam * lnJ ** 2

    def pk1(self, F) -> np.ndarray:
        """First Piola-Kirchhoff stress, batched over leading axes."""
        F = np.asarray(F, dtype=float)
        mu, lam = self.lame()
        J = np.linalg.det(F)
        if np.any(J <= 0):
            raise ElementInversionError("nonpositive deformation gradient determinant")
        FinvT = np.swapaxes(np.linalg.inv(F), -1, -2)
        lnJ = np.log(J)
        return mu * F + (lam * lnJ - mu)[..., None, None] * FinvT

    def tangent(self, F) -> np.ndarray:
        """Material tangent dP_iJ/dF_kL, batched over leading axes."""
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        mu, lam = self.lame()
        J = np.linalg.det(F)
        if np.any(J <= 0):
            raise ElementInversionError("nonpositive deformation gradient determinant")
        FinvT = np.swapaxes(np.linalg.inv(F), -1, -2)
        lnJ = np.log(J)
        eye = np.eye(d)
        A = mu * np.einsum("ik,JL->iJkL", eye, eye)
        A = A + lam * np.einsum("...iJ,...kL->...iJkL", FinvT, FinvT)
        A = A + (mu - lam * lnJ)[..., None, None, None, None] * np.einsum(
            "...iL,...kJ->...iJkL", FinvT, FinvT
        )
        return A
