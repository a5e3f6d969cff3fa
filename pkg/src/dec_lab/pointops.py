"""Pointwise tensor calculus on batches of points.

All functions operate on arrays whose leading axes enumerate evaluation
points and whose trailing axes are tensor indices.  The same algebra serves
two derivative sources: finite-difference jets of sampled fields and exact
jets from analytic backgrounds.  Keeping a single algebra layer lets tests
separate discretization error from modeling error.

Index conventions
-----------------
``dg[..., i, j, k]``   is ∂_k g_ij, ``d2g[..., i, j, k, l]`` is ∂_k ∂_l g_ij.
``Gamma[..., k, i, j]`` is Γ^k_ij.
``riemann[..., i, j, k, l]`` is the covariant curvature
Rm(∂_i, ∂_j, ∂_k, ∂_l) built so that the Ricci tensor is the contraction of
the first against the last slot, R_jk = g^{lm} Rm_{ljkm}.  With this sign the
round sphere has positive scalar curvature.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

__all__ = ["GeometryJet", "sym2", "odot"]


def sym2(t):
    """Symmetrize the last two axes."""
    return 0.5 * (t + np.swapaxes(t, -1, -2))


def odot(a, b):
    """Symmetric tensor product of two covectors, (a ⊙ b)_ij = ½(a_i b_j + b_i a_j)."""
    return 0.5 * (a[..., :, None] * b[..., None, :] + b[..., :, None] * a[..., None, :])


class GeometryJet:
    """Metric 2-jet (plus optional momentum 1-jet) at a batch of points.

    Curvature, Christoffel symbols and the constraint densities are derived
    lazily; everything is plain array algebra once the jets are given.
    """

    def __init__(self, g, dg, d2g, pi=None, dpi=None, lorentzian=False):
        self.g = np.asarray(g, dtype=float)
        self.dg = np.asarray(dg, dtype=float)
        self.d2g = np.asarray(d2g, dtype=float)
        self.n = self.g.shape[-1]
        self.lorentzian = lorentzian
        if pi is None:
            pi = np.zeros_like(self.g)
            dpi = np.zeros_like(self.dg)
        self.pi = np.asarray(pi, dtype=float)
        self.dpi = np.asarray(dpi, dtype=float) if dpi is not None else np.zeros_like(self.dg)

    def release(self, *names):
        """Drop cached derived arrays (the curvature tensors are large)."""
        for name in names:
            self.__dict__.pop(name, None)

    # -- metric algebra ----------------------------------------------------

    @cached_property
    def ginv(self):
        return np.linalg.inv(self.g)

    @cached_property
    def dginv(self):
        # ∂_k g^{ij} = -g^{ia} (∂_k g_ab) g^{bj}
        return -np.einsum("...ia,...abk,...bj->...ijk", self.ginv, self.dg, self.ginv)

    @cached_property
    def sqrt_det(self):
        det = np.linalg.det(self.g)
        return np.sqrt(np.abs(det))

    def lower(self, v):
        return np.einsum("...ij,...j->...i", self.g, v)

    def raise_(self, w):
        return np.einsum("...ij,...j->...i", self.ginv, w)

    def lower2(self, t):
        return np.einsum("...ia,...jb,...ab->...ij", self.g, self.g, t)

    def raise2(self, t):
        return np.einsum("...ia,...jb,...ab->...ij", self.ginv, self.ginv, t)

    def norm2_vec(self, v):
        return np.einsum("...ij,...i,...j->...", self.g, v, v)

    def inner_vec(self, v, w):
        return np.einsum("...ij,...i,...j->...", self.g, v, w)

    # -- connection ----------------------------------------------------------

    @cached_property
    def gamma_low(self):
        # Γ_ijk = g(∇_i ∂_j, ∂_k) = ½(g_ik,j + g_jk,i - g_ij,k), axes [..., i, j, k]
        dg = self.dg
        return 0.5 * (
            np.einsum("...ikj->...ijk", dg) + np.einsum("...jki->...ijk", dg) - dg
        )

    @cached_property
    def gamma(self):
        return np.einsum("...kl,...ijl->...kij", self.ginv, self.gamma_low)

    @cached_property
    def dgamma_low(self):
        # ∂_m Γ_ijk, axes [..., i, j, k, m]
        d2g = self.d2g
        return 0.5 * (
            np.einsum("...ikjm->...ijkm", d2g)
            + np.einsum("...jkim->...ijkm", d2g)
            - np.einsum("...ijkm->...ijkm", d2g)
        )

    @cached_property
    def dgamma(self):
        # ∂_m Γ^k_ij, axes [..., k, i, j, m]
        return np.einsum("...klm,...ijl->...kijm", self.dginv, self.gamma_low) + np.einsum(
            "...kl,...ijlm->...kijm", self.ginv, self.dgamma_low
        )

    # -- curvature -----------------------------------------------------------

    @cached_property
    def riemann(self):
        # Rm_ijkl = Γ_jkl,i - Γ_ikl,j - Γ^p_jk Γ_ilp + Γ^p_ik Γ_jlp
        dG = self.dgamma_low
        t1 = np.einsum("...jkli->...ijkl", dG)
        t2 = np.einsum("...iklj->...ijkl", dG)
        t3 = np.einsum("...pjk,...ilp->...ijkl", self.gamma, self.gamma_low)
        t4 = np.einsum("...pik,...jlp->...ijkl", self.gamma, self.gamma_low)
        return t1 - t2 - t3 + t4

    @cached_property
    def riemann13(self):
        # R^l_ijk = g^{lm} Rm_ijkm
        return np.einsum("...lm,...ijkm->...lijk", self.ginv, self.riemann)

    @cached_property
    def ricci(self):
        return np.einsum("...lm,...ljkm->...jk", self.ginv, self.riemann)

    @cached_property
    def scalar_curvature(self):
        return np.einsum("...jk,...jk->...", self.ginv, self.ricci)

    @cached_property
    def einstein(self):
        return self.ricci - 0.5 * self.scalar_curvature[..., None, None] * self.g

    # -- derivatives of scalars and vectors -----------------------------------

    def scalar_hessian(self, df, d2f):
        """Covariant Hessian f_;ij from the partial 2-jet of a scalar."""
        return d2f - np.einsum("...kij,...k->...ij", self.gamma, df)

    def laplacian(self, df, d2f):
        return np.einsum("...ij,...ij->...", self.ginv, self.scalar_hessian(df, d2f))

    def dlower_vec(self, X, dX):
        # ∂_k (g_ij X^j), axes [..., i, k]
        return np.einsum("...ijk,...j->...ik", self.dg, X) + np.einsum(
            "...ij,...jk->...ik", self.g, dX
        )

    def vector_cov_deriv(self, X, dX):
        """X_i;j = ∇_j X_i for a contravariant vector given its partial 1-jet."""
        Xl = self.lower(X)
        dXl = self.dlower_vec(X, dX)
        return np.einsum("...ij->...ij", dXl) - np.einsum(
            "...kij,...k->...ij", self.gamma, Xl
        )

    def vector_cov_deriv2(self, X, dX, d2X):
        """Second covariant derivative X_i;jk = ∇_k ∇_j X_i."""
        Xl = self.lower(X)
        dXl = self.dlower_vec(X, dX)
        # ∂_k ∂_j X_i (lowered), axes [..., i, j, k]
        d2Xl = (
            np.einsum("...iajk,...a->...ijk", self.d2g, X)
            + np.einsum("...iaj,...ak->...ijk", self.dg, dX)
            + np.einsum("...iak,...aj->...ijk", self.dg, dX)
            + np.einsum("...ia,...ajk->...ijk", self.g, d2X)
        )
        M = dXl - np.einsum("...kij,...k->...ij", self.gamma, Xl)
        dM = (
            d2Xl
            - np.einsum("...lijk,...l->...ijk", self.dgamma, Xl)
            - np.einsum("...lij,...lk->...ijk", self.gamma, dXl)
        )
        return (
            dM
            - np.einsum("...lik,...lj->...ijk", self.gamma, M)
            - np.einsum("...ljk,...il->...ijk", self.gamma, M)
        )

    def cov_deriv_cov2(self, B, dB):
        """B_ij;k for a covariant 2-tensor given values and partials ∂_k B_ij."""
        return (
            dB
            - np.einsum("...lik,...lj->...ijk", self.gamma, B)
            - np.einsum("...ljk,...il->...ijk", self.gamma, B)
        )

    def lie_metric(self, X, dX):
        M = self.vector_cov_deriv(X, dX)
        return M + np.swapaxes(M, -1, -2)

    def lie_pi(self, X, dX):
        """(L_X π)^{lm} for the contravariant momentum."""
        return (
            np.einsum("...k,...lmk->...lm", X, self.dpi)
            - np.einsum("...km,...lk->...lm", self.pi, dX)
            - np.einsum("...lk,...mk->...lm", self.pi, dX)
        )

    def divergence_vec(self, X, dX):
        return np.einsum("...ij,...ij->...", self.ginv, self.vector_cov_deriv(X, dX))

    # -- momentum contractions and constraint densities ------------------------

    @cached_property
    def pi_low(self):
        return self.lower2(self.pi)

    @cached_property
    def tr_pi(self):
        return np.einsum("...ij,...ij->...", self.g, self.pi)

    @cached_property
    def pi_norm2(self):
        return np.einsum("...ij,...ij->...", self.pi_low, self.pi)

    @cached_property
    def current(self):
        """J^j = (Div_g π)^j = π^{ij}_{;i}."""
        return (
            np.einsum("...iji->...j", self.dpi)
            + np.einsum("...iki,...kj->...j", self.gamma, self.pi)
            + np.einsum("...jki,...ki->...j", self.gamma, self.pi)
        )

    @cached_property
    def current_norm(self):
        return np.sqrt(np.maximum(self.norm2_vec(self.current), 0.0))

    @cached_property
    def energy_density(self):
        n = self.n
        return 0.5 * (
            self.scalar_curvature + self.tr_pi**2 / (n - 1) - self.pi_norm2
        )

    @cached_property
    def sigma(self):
        """Dominant energy scalar 2(μ - |J|_g)."""
        return 2.0 * (self.energy_density - self.current_norm)

    def momentum_coefficient(self):
        """B_ij = (2/(n-1)) (tr π) g_ij - 2 π_ij, the lapse factor in the momentum identity."""
        n = self.n
        return (2.0 / (n - 1)) * self.tr_pi[..., None, None] * self.g - 2.0 * self.pi_low

    def dmomentum_coefficient(self):
        """∂_k B_ij for the tensor above."""
        n = self.n
        dtr = np.einsum("...ijk,...ij->...k", self.dg, self.pi) + np.einsum(
            "...ij,...ijk->...k", self.g, self.dpi
        )
        dpil = (
            np.einsum("...iak,...jb,...ab->...ijk", self.dg, self.g, self.pi)
            + np.einsum("...ia,...jbk,...ab->...ijk", self.g, self.dg, self.pi)
            + np.einsum("...ia,...jb,...abk->...ijk", self.g, self.g, self.dpi)
        )
        return (
            (2.0 / (n - 1))
            * (
                dtr[..., None, None, :] * self.g[..., :, :, None]
                + self.tr_pi[..., None, None, None] * self.dg
            )
            - 2.0 * dpil
        )
