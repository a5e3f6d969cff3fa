"""Closed-form initial data backgrounds with exact derivative callbacks.

Each background can produce the 2-jet of its metric (and 1-jet of its
momentum) at arbitrary points.  Feeding those exact jets through the shared
algebra in :mod:`dec_lab.pointops` gives curvature and constraint values at
round-off accuracy, which is what lets tests separate discretization error
from modeling error.  Sampling the same background on a grid produces the
finite-difference path.
"""

from __future__ import annotations

import math

import numpy as np

from .grids import ChartGrid, MetricField, TensorField
from .pointops import GeometryJet

__all__ = [
    "sphere_volume",
    "AnalyticBackground",
    "FlatBackground",
    "PolyBump",
    "RadialMatterPsi",
    "QuadraticPsi",
    "SeparablePPWaveProfile",
    "PPWaveBackground",
    "RadialConformalBackground",
    "schwarzschild_isotropic",
    "SphereChartBackground",
    "ConformalBackground",
    "BumpMetricBackground",
]


def sphere_volume(k):
    """Volume of the standard unit k-sphere."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def _radial_jet(x, f, f1_over_r, f2):
    """Cartesian 2-jet of f(|x|) from radial callbacks.

    ``f1_over_r`` must return f'(r)/r, which stays finite at r = 0 for the
    smooth profiles used here.  hess = (f'/r)(δ - rr/r²) + f'' rr/r².
    """
    r = np.sqrt(np.sum(x**2, axis=-1))
    val = f(r)
    w = f1_over_r(r)
    grad = w[..., None] * x
    n = x.shape[-1]
    eye = np.eye(n)
    rr = x[..., :, None] * x[..., None, :]
    r2 = np.maximum(r**2, 1e-300)[..., None, None]
    hess = w[..., None, None] * (eye - rr / r2) + f2(r)[..., None, None] * (rr / r2)
    at_origin = r < 1e-14
    if np.any(at_origin):
        hess[at_origin] = f2(r[at_origin])[..., None, None] * eye
    return val, grad, hess


class AnalyticBackground:
    """Base class: exact jets of (g, π) plus optional lapse-shift callbacks."""

    n = None
    has_lapse_shift = False

    def metric_jet(self, x):
        raise NotImplementedError

    def momentum_jet(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        return (
            np.zeros(x.shape[:-1] + (n, n)),
            np.zeros(x.shape[:-1] + (n, n, n)),
        )

    def geometry(self, x):
        g, dg, d2g = self.metric_jet(x)
        pi, dpi = self.momentum_jet(x)
        return GeometryJet(g, dg, d2g, pi, dpi)

    def lapse_shift_jet(self, x):
        raise NotImplementedError

    def constraint_closed_form(self, x):
        """Literal (μ, J) formulas where the background has them, else None."""
        return None

    def sample(self, grid):
        """Sample (g, π) on a grid; returns (MetricField, TensorField)."""
        pts = grid.points()
        g, _, _ = self.metric_jet(pts)
        pi, _ = self.momentum_jet(pts)
        return MetricField(grid, g), TensorField(grid, 0, 2, pi, symmetric=True)


class FlatBackground(AnalyticBackground):
    def __init__(self, n, lapse=0.5, shift=None):
        self.n = n
        self.lapse = float(lapse)
        self.shift = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
        self.has_lapse_shift = True

    def metric_jet(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        base = x.shape[:-1]
        g = np.broadcast_to(np.eye(n), base + (n, n)).copy()
        return g, np.zeros(base + (n, n, n)), np.zeros(base + (n, n, n, n))

    def lapse_shift_jet(self, x):
        x = np.asarray(x, dtype=float)
        base = x.shape[:-1]
        n = self.n
        return {
            "f": np.full(base, self.lapse),
            "df": np.zeros(base + (n,)),
            "d2f": np.zeros(base + (n, n)),
            "X": np.broadcast_to(self.shift, base + (n,)).copy(),
            "dX": np.zeros(base + (n, n)),
            "d2X": np.zeros(base + (n, n, n)),
        }

    def constraint_closed_form(self, x):
        x = np.asarray(x, dtype=float)
        base = x.shape[:-1]
        return np.zeros(base), np.zeros(base + (self.n,))


# ---------------------------------------------------------------------------
# pp-wave slice data
# ---------------------------------------------------------------------------


class PolyBump:
    """Compactly supported even bump b(s) = amp (1 - (s/c)^2)^p on |s| <= c."""

    def __init__(self, halfwidth, amplitude=1.0, power=3):
        self.c = float(halfwidth)
        self.amp = float(amplitude)
        self.p = int(power)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        u = s / self.c
        inside = np.abs(u) < 1.0
        out = np.zeros_like(s)
        out[inside] = self.amp * (1.0 - u[inside] ** 2) ** self.p
        return out

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        u = s / self.c
        inside = np.abs(u) < 1.0
        out = np.zeros_like(s)
        out[inside] = (
            self.amp * self.p * (1.0 - u[inside] ** 2) ** (self.p - 1) * (-2.0 * u[inside] / self.c)
        )
        return out

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        u = s / self.c
        inside = np.abs(u) < 1.0
        out = np.zeros_like(s)
        q = u[inside] ** 2
        out[inside] = (self.amp * 2.0 * self.p / self.c**2) * (
            1.0 - q
        ) ** (self.p - 2) * ((2 * self.p - 1) * q - 1.0)
        return out

    def integral(self):
        """∫ b ds in closed form (moments of (1-u^2)^p)."""
        # ∫_{-1}^{1} (1-u^2)^p du = 2^(2p+1) (p!)^2 / (2p+1)!
        p = self.p
        val = 2.0 ** (2 * p + 1) * math.factorial(p) ** 2 / math.factorial(2 * p + 1)
        return self.amp * self.c * val


class RadialMatterPsi:
    """Solution ψ of Δ'ψ = -F on R^m for a radial polynomial-bump source.

    F(r) = amplitude (1 - (r/R)^2)^3 on r <= R.  The Newton representation
    reduces ψ and its radial derivatives to two 1-D integrals; for this
    source family the moment integrals are exact polynomials, so ψ is closed
    form.  Beyond the support, ψ(r) = A r^(2-m) exactly.
    """

    def __init__(self, m, radius=1.0, amplitude=1.0):
        if m < 3:
            raise ValueError("transverse dimension must be at least 3")
        self.m = int(m)
        self.R = float(radius)
        self.amp = float(amplitude)
        # F(s) = amp Σ_k c_k s^{2k} with c_k = (-1)^k C(3,k) R^{-2k}
        self.coeffs = [
            (-1.0) ** k * math.comb(3, k) * self.R ** (-2 * k) for k in range(4)
        ]

    def source(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < self.R
        u2 = (r[inside] / self.R) ** 2
        out[inside] = self.amp * (1.0 - u2) ** 3
        return out

    def dsource(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < self.R
        u2 = (r[inside] / self.R) ** 2
        out[inside] = self.amp * 3.0 * (1.0 - u2) ** 2 * (-2.0 * r[inside] / self.R**2)
        return out

    def _moment_over_rm(self, r):
        """j(r)/r^m with j(r) = ∫_0^r F s^{m-1} ds, as an exact polynomial."""
        r = np.asarray(r, dtype=float)
        m = self.m
        rc = np.minimum(r, self.R)
        ratio = np.where(r > 0, rc / np.where(r > 0, r, 1.0), 1.0)
        out = np.zeros_like(r)
        for k, c in enumerate(self.coeffs):
            out += self.amp * c * rc ** (2 * k) / (m + 2 * k) * ratio**m
        return out

    def moment(self, r):
        """j(r) = ∫_0^r F s^{m-1} ds exactly."""
        r = np.asarray(r, dtype=float)
        m = self.m
        rc = np.minimum(r, self.R)
        out = np.zeros_like(r)
        for k, c in enumerate(self.coeffs):
            out += self.amp * c * rc ** (m + 2 * k) / (m + 2 * k)
        return out

    @property
    def total_moment(self):
        return float(self.moment(np.array(self.R)))

    @property
    def leading_coefficient(self):
        """A in ψ = A r^(3-n) beyond the support; equals ∫F / ((m-2) ω_{m-1})."""
        return self.total_moment / (self.m - 2)

    def source_integral(self):
        """∫_{R^m} F dx = ω_{m-1} ∫ F s^{m-1} ds."""
        return sphere_volume(self.m - 1) * self.total_moment

    def _tail(self, r):
        """t(r) = ∫_r^∞ F s ds, exact."""
        r = np.asarray(r, dtype=float)
        rc = np.minimum(r, self.R)
        out = np.zeros_like(r)
        for k, c in enumerate(self.coeffs):
            out += self.amp * c * (self.R ** (2 * k + 2) - rc ** (2 * k + 2)) / (2 * k + 2)
        return out

    def value(self, r):
        r = np.asarray(r, dtype=float)
        m = self.m
        # r^(2-m) j(r) = r² · j(r)/r^m stays finite through the origin
        return (r**2 * self._moment_over_rm(r) + self._tail(r)) / (m - 2)

    def d1_over_r(self, r):
        return -self._moment_over_rm(r)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return self.d1_over_r(r) * r

    def d2(self, r):
        # ψ'' = (m-1) j(r)/r^m - F, using ψ'/r = -j/r^m
        return (self.m - 1) * self._moment_over_rm(r) - self.source(r)


class QuadraticPsi:
    """ψ(x') = c0 - ½ x'ᵀ Q x' on a bounded chart; Δ'ψ = -tr Q is constant.

    Used for local slab data (e.g. 3-dimensional kernel probes) where no
    asymptotics are needed.  An asymmetric Q removes rotational symmetry.
    """

    def __init__(self, c0, Q):
        self.c0 = float(c0)
        self.Q = np.asarray(Q, dtype=float)
        self.Q = 0.5 * (self.Q + self.Q.T)

    def value_jet(self, xp):
        xp = np.asarray(xp, dtype=float)
        q = np.einsum("...i,ij,...j->...", xp, self.Q, xp)
        val = self.c0 - 0.5 * q
        grad = -np.einsum("ij,...j->...i", self.Q, xp)
        hess = np.broadcast_to(-self.Q, xp.shape[:-1] + self.Q.shape).copy()
        return val, grad, hess

    def lap(self, xp):
        xp = np.asarray(xp, dtype=float)
        return np.full(xp.shape[:-1], -np.trace(self.Q))

    def dlap(self, xp):
        xp = np.asarray(xp, dtype=float)
        return np.zeros_like(xp)


class SeparablePPWaveProfile:
    """S(x', x^n) = 1 + bump(x^n) ψ(x') with radial or quadratic ψ."""

    def __init__(self, n, bump, psi):
        self.n = n
        self.bump = bump
        self.psi = psi
        self.slab_halfwidth = bump.c

    def _split(self, x):
        return x[..., :-1], x[..., -1]

    def _psi_jet(self, xp):
        if isinstance(self.psi, QuadraticPsi):
            return self.psi.value_jet(xp)
        r = np.sqrt(np.sum(xp**2, axis=-1))
        val = self.psi.value(r)
        w = self.psi.d1_over_r(r)
        grad = w[..., None] * xp
        m = xp.shape[-1]
        rr = xp[..., :, None] * xp[..., None, :]
        r2 = np.maximum(r**2, 1e-300)[..., None, None]
        hess = w[..., None, None] * (np.eye(m) - rr / r2) + self.psi.d2(r)[
            ..., None, None
        ] * (rr / r2)
        origin = r < 1e-14
        if np.any(origin):
            hess[origin] = self.psi.d2(r[origin])[..., None, None] * np.eye(m)
        return val, grad, hess

    def _lap_prime_psi(self, xp):
        if isinstance(self.psi, QuadraticPsi):
            return self.psi.lap(xp), self.psi.dlap(xp)
        r = np.sqrt(np.sum(xp**2, axis=-1))
        lap = -self.psi.source(r)
        w = np.zeros_like(r)
        pos = r > 1e-14
        w[pos] = -self.psi.dsource(r[pos]) / r[pos]
        dlap = w[..., None] * xp
        return lap, dlap

    def jet(self, x):
        """Returns (S, dS, d2S, Δ'S, d(Δ'S))."""
        x = np.asarray(x, dtype=float)
        xp, xn = self._split(x)
        n = self.n
        b, b1, b2 = self.bump(xn), self.bump.d1(xn), self.bump.d2(xn)
        pv, pg, ph = self._psi_jet(xp)
        S = 1.0 + b * pv
        dS = np.zeros(x.shape[:-1] + (n,))
        dS[..., :-1] = b[..., None] * pg
        dS[..., -1] = b1 * pv
        d2S = np.zeros(x.shape[:-1] + (n, n))
        d2S[..., :-1, :-1] = b[..., None, None] * ph
        d2S[..., :-1, -1] = b1[..., None] * pg
        d2S[..., -1, :-1] = b1[..., None] * pg
        d2S[..., -1, -1] = b2 * pv
        lap_p, dlap_p = self._lap_prime_psi(xp)
        lap = b * lap_p
        dlap = np.zeros(x.shape[:-1] + (n,))
        dlap[..., :-1] = b[..., None] * dlap_p
        dlap[..., -1] = b1 * lap_p
        return S, dS, d2S, lap, dlap


class PPWaveBackground(AnalyticBackground):
    """Constant-u slice data of a pp-wave with profile S.

    The slice metric is S (dx^n)^2 + Σ (dx^a)^2; the momentum, the canonical
    lapse-shift pair (½ S^(-1/2), S^(-1) ∂_n), and (μ, J) are all closed
    forms in S and its first two derivatives.
    """

    has_lapse_shift = True

    def __init__(self, profile):
        self.profile = profile
        self.n = profile.n

    def metric_jet(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        S, dS, d2S, _, _ = self.profile.jet(x)
        base = x.shape[:-1]
        g = np.broadcast_to(np.eye(n), base + (n, n)).copy()
        g[..., n - 1, n - 1] = S
        dg = np.zeros(base + (n, n, n))
        dg[..., n - 1, n - 1, :] = dS
        d2g = np.zeros(base + (n, n, n, n))
        d2g[..., n - 1, n - 1, :, :] = d2S
        return g, dg, d2g

    def momentum_jet(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        S, dS, d2S, _, _ = self.profile.jet(x)
        base = x.shape[:-1]
        s32 = S ** (-1.5)
        ds32 = -1.5 * S ** (-2.5)
        pi = np.zeros(base + (n, n))
        dpi = np.zeros(base + (n, n, n))
        for a in range(n - 1):
            pi[..., n - 1, a] = 0.5 * s32 * dS[..., a]
            pi[..., a, n - 1] = pi[..., n - 1, a]
            pi[..., a, a] = -0.5 * s32 * dS[..., n - 1]
            dpi[..., n - 1, a, :] = 0.5 * (
                ds32[..., None] * dS[..., a, None] * dS + s32[..., None] * d2S[..., a, :]
            )
            dpi[..., a, n - 1, :] = dpi[..., n - 1, a, :]
            dpi[..., a, a, :] = -0.5 * (
                ds32[..., None] * dS[..., n - 1, None] * dS
                + s32[..., None] * d2S[..., n - 1, :]
            )
        return pi, dpi

    def lapse_shift_jet(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        S, dS, d2S, _, _ = self.profile.jet(x)
        base = x.shape[:-1]
        f = 0.5 * S ** (-0.5)
        df = -0.25 * (S ** (-1.5))[..., None] * dS
        d2f = (0.375 * (S ** (-2.5))[..., None, None]) * (
            dS[..., :, None] * dS[..., None, :]
        ) - 0.25 * (S ** (-1.5))[..., None, None] * d2S
        X = np.zeros(base + (n,))
        X[..., n - 1] = 1.0 / S
        dX = np.zeros(base + (n, n))
        dX[..., n - 1, :] = -(S ** (-2.0))[..., None] * dS
        d2X = np.zeros(base + (n, n, n))
        d2X[..., n - 1, :, :] = (2.0 * (S ** (-3.0))[..., None, None]) * (
            dS[..., :, None] * dS[..., None, :]
        ) - (S ** (-2.0))[..., None, None] * d2S
        return {"f": f, "df": df, "d2f": d2f, "X": X, "dX": dX, "d2X": d2X}

    def constraint_closed_form(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        S, _, _, lap, _ = self.profile.jet(x)
        mu = -0.5 * lap / S
        J = np.zeros(x.shape[:-1] + (n,))
        J[..., n - 1] = 0.5 * S ** (-1.5) * lap
        return mu, J

    def current_jet(self, x):
        """J and ∂J in closed form (for the unit-current identities)."""
        x = np.asarray(x, dtype=float)
        n = self.n
        S, dS, _, lap, dlap = self.profile.jet(x)
        J = np.zeros(x.shape[:-1] + (n,))
        J[..., n - 1] = 0.5 * S ** (-1.5) * lap
        dJ = np.zeros(x.shape[:-1] + (n, n))
        dJ[..., n - 1, :] = 0.5 * (
            -1.5 * (S ** (-2.5) * lap)[..., None] * dS + (S ** (-1.5))[..., None] * dlap
        )
        return J, dJ


def standard_ppwave(n, source_radius=1.0, source_amplitude=1.0, slab_halfwidth=1.0,
                    bump_amplitude=1.0):
    """The compact-source pp-wave family: radial source, polynomial bump."""
    if n < 4:
        raise ValueError("the compact-source family needs dimension at least 4")
    psi = RadialMatterPsi(n - 1, source_radius, source_amplitude)
    bump = PolyBump(slab_halfwidth, bump_amplitude)
    return PPWaveBackground(SeparablePPWaveProfile(n, bump, psi))


# ---------------------------------------------------------------------------
# Conformally flat backgrounds (isotropic Schwarzschild and friends)
# ---------------------------------------------------------------------------


class RadialConformalBackground(AnalyticBackground):
    """Time-symmetric metric g = ψ(r)^(4/(n-2)) δ with radial ψ callbacks."""

    def __init__(self, n, psi, dpsi, d2psi):
        self.n = n
        self.psi = psi
        self.dpsi = dpsi
        self.d2psi = d2psi

    def conformal_factor_jet(self, x):
        x = np.asarray(x, dtype=float)
        q = 4.0 / (self.n - 2)
        r = np.sqrt(np.sum(x**2, axis=-1))
        p, p1, p2 = self.psi(r), self.dpsi(r), self.d2psi(r)
        u = p**q
        u1 = q * p ** (q - 1) * p1
        u2 = q * (q - 1) * p ** (q - 2) * p1**2 + q * p ** (q - 1) * p2
        w = u1 / r
        grad = w[..., None] * x
        rr = x[..., :, None] * x[..., None, :]
        r2 = (r**2)[..., None, None]
        hess = w[..., None, None] * (np.eye(self.n) - rr / r2) + u2[..., None, None] * (
            rr / r2
        )
        return u, grad, hess

    def metric_jet(self, x):
        u, du, d2u = self.conformal_factor_jet(x)
        n = self.n
        eye = np.eye(n)
        g = u[..., None, None] * eye
        dg = np.einsum("...k,ij->...ijk", du, eye)
        d2g = np.einsum("...kl,ij->...ijkl", d2u, eye)
        return g, dg, d2g


def schwarzschild_isotropic(n, mass):
    """Isotropic-chart Schwarzschild slice; ADM energy equals ``mass``."""
    m = float(mass)
    p = n - 2

    def psi(r):
        return 1.0 + 0.5 * m * r ** (-p)

    def dpsi(r):
        return -0.5 * m * p * r ** (-p - 1)

    def d2psi(r):
        return 0.5 * m * p * (p + 1) * r ** (-p - 2)

    return RadialConformalBackground(n, psi, dpsi, d2psi)


class SphereChartBackground(AnalyticBackground):
    """Round 2-sphere of radius 1 in a polar chart (θ, φ)."""

    n = 2

    def metric_jet(self, x):
        x = np.asarray(x, dtype=float)
        th = x[..., 0]
        base = x.shape[:-1]
        g = np.zeros(base + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = np.sin(th) ** 2
        dg = np.zeros(base + (2, 2, 2))
        dg[..., 1, 1, 0] = 2.0 * np.sin(th) * np.cos(th)
        d2g = np.zeros(base + (2, 2, 2, 2))
        d2g[..., 1, 1, 0, 0] = 2.0 * np.cos(2.0 * th)
        return g, dg, d2g


class ConformalBackground(AnalyticBackground):
    """(g, π) -> (u^(4/(n-2)) g, u^(-6/(n-2)) π) for a positive factor u.

    ``factor_jet(x)`` must return (u, ∂u, ∂²u).  Derivatives of the deformed
    data come from the product rule on the base jets, so the deformed
    background is as exact as the base one.
    """

    def __init__(self, base, factor_jet):
        self.base = base
        self.n = base.n
        self.factor_jet = factor_jet

    def metric_jet(self, x):
        g, dg, d2g = self.base.metric_jet(x)
        u, du, d2u = self.factor_jet(x)
        a = 4.0 / (self.n - 2)
        w = u**a
        w1 = (a * u ** (a - 1))[..., None] * du
        w2 = (a * (a - 1) * u ** (a - 2))[..., None, None] * (
            du[..., :, None] * du[..., None, :]
        ) + (a * u ** (a - 1))[..., None, None] * d2u
        gt = w[..., None, None] * g
        dgt = np.einsum("...k,...ij->...ijk", w1, g) + w[..., None, None, None] * dg
        d2gt = (
            np.einsum("...kl,...ij->...ijkl", w2, g)
            + np.einsum("...k,...ijl->...ijkl", w1, dg)
            + np.einsum("...l,...ijk->...ijkl", w1, dg)
            + w[..., None, None, None, None] * d2g
        )
        return gt, dgt, d2gt

    def momentum_jet(self, x):
        pi, dpi = self.base.momentum_jet(x)
        u, du, _ = self.factor_jet(x)
        b = -6.0 / (self.n - 2)
        v = u**b
        v1 = (b * u ** (b - 1))[..., None] * du
        pit = v[..., None, None] * pi
        dpit = v1[..., None, None, :] * pi[..., :, :, None] + v[..., None, None, None] * dpi
        return pit, dpit


class BumpMetricBackground(AnalyticBackground):
    """Flat metric plus a compactly supported smooth symmetric perturbation.

    g = δ + Σ_c A_c b(x - x_c) e_c ⊙ e_c with polynomial bumps; handy as a
    generic curved test metric with exact jets.
    """

    def __init__(self, n, amplitudes, centers, radius=1.0, power=4):
        self.n = n
        self.amps = np.asarray(amplitudes, dtype=float)
        self.centers = np.asarray(centers, dtype=float)
        self.radius = float(radius)
        self.power = int(power)
        if self.amps.shape[0] != self.centers.shape[0]:
            raise ValueError("one amplitude matrix per center")

    def _bump_jet(self, x, center):
        y = x - center
        r2 = np.sum(y**2, axis=-1)
        u = r2 / self.radius**2
        inside = u < 1.0
        p = self.power
        val = np.zeros_like(r2)
        grad = np.zeros_like(y)
        hess = np.zeros(y.shape + (self.n,))
        w = 1.0 - u[inside]
        val[inside] = w**p
        # d/dy_i = p w^(p-1) * (-2 y_i / R^2)
        grad[inside] = (p * w ** (p - 1) * (-2.0 / self.radius**2))[..., None] * y[inside]
        eye = np.eye(self.n)
        hess[inside] = (
            (p * (p - 1) * w ** (p - 2) * (4.0 / self.radius**4))[..., None, None]
            * (y[inside][..., :, None] * y[inside][..., None, :])
            + (p * w ** (p - 1) * (-2.0 / self.radius**2))[..., None, None] * eye
        )
        return val, grad, hess

    def metric_jet(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        base = x.shape[:-1]
        g = np.broadcast_to(np.eye(n), base + (n, n)).copy()
        dg = np.zeros(base + (n, n, n))
        d2g = np.zeros(base + (n, n, n, n))
        for A, c in zip(self.amps, self.centers):
            val, grad, hess = self._bump_jet(x, c)
            g += val[..., None, None] * A
            dg += np.einsum("...k,ij->...ijk", grad, A)
            d2g += np.einsum("...kl,ij->...ijkl", hess, A)
        return g, dg, d2g
