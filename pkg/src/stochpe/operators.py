"""Deterministic operators of the hydrostatic model.

Covers the hydrostatic Leray projection, the diagnostic vertical velocity,
the advection forms (trilinear pairing and the associated bilinear operator),
the pressure/buoyancy and Coriolis operators, the aggregate forcing, and the
barotropic/baroclinic depth splitting.

All operators are stateless functions of immutable spectral states; quadratic
products are formed on the dealiased collocation grid so the advection
pairing is antisymmetric in its last two slots to round-off, provided the
advecting velocity satisfies the depth-integrated divergence constraint
(apply ``leray_project`` first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, SpectralState

__all__ = [
    "PhysicsParams",
    "ModeSplit",
    "leray_project",
    "vertical_velocity",
    "average_A2",
    "average_A3",
    "fluctuation_R",
    "trilinear_b",
    "bilinear_B",
    "pressure_buoyancy_Apr",
    "coriolis_E",
    "forcing_F",
    "mode_split",
    "baroclinic_rhs_terms",
    "velocity_rhs_unsplit",
    "recombine_split_rhs",
]


@dataclass(frozen=True)
class PhysicsParams:
    """Coriolis, thermal expansion, gravity, reference density/temperature."""

    f: float = 1.0
    beta_T: float = 0.1
    g: float = 1.0
    rho0: float = 1.0
    T_r: float = 0.0

    def __post_init__(self):
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.g < 0:
            raise ValueError("g must be nonnegative")


@dataclass
class ModeSplit:
    """Depth splitting of the horizontal velocity.

    ``vbar``: barotropic coefficients (2, nkx, nky); ``vtilde``: baroclinic
    coefficient array (2, nkx, nky, nm) with vanishing depth mean.
    """

    grid: Grid
    vbar: np.ndarray
    vtilde: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vtilde.copy()
        v[:, :, :, 0] += self.vbar
        return v


# -- projection and diagnostic velocity ---------------------------------------


def leray_project(state: SpectralState) -> SpectralState:
    """Project the barotropic velocity onto 2D divergence-free fields.

    Coefficientwise v <- v - k (k.v)/|k|^2 on the depth-mean modes; the
    baroclinic part is untouched.  The constant barotropic mode is pinned to
    zero (zero-mean gauge, which keeps the dissipation operator invertible on
    the velocity space).
    """
    g = state.grid
    out = state.coeffs.copy()
    kx = g.kx_phys[:, None]
    ky = g.ky_phys[None, :]
    ksq = np.where(g.ksq_h == 0.0, 1.0, g.ksq_h)
    v1 = out[0, :, :, 0]
    v2 = out[1, :, :, 0]
    d = (kx * v1 + ky * v2) / ksq
    v1p = v1 - kx * d
    v2p = v2 - ky * d
    v1p[0, 0] = 0.0
    v2p[0, 0] = 0.0
    out[0, :, :, 0] = v1p
    out[1, :, :, 0] = v2p
    return SpectralState(g, out, state.time)


def barotropic_divergence(state: SpectralState) -> np.ndarray:
    """Spectral divergence of the depth-mean velocity, one value per wavevector."""
    g = state.grid
    return (
        1j * g.kx_phys[:, None] * state.coeffs[0, :, :, 0]
        + 1j * g.ky_phys[None, :] * state.coeffs[1, :, :, 0]
    )


def _w_parts(grid: Grid, vcoeffs: np.ndarray):
    """Vertical velocity of v: sine coefficients plus an affine (z+h) part.

    w(v) = -int_{-h}^z div v dz'; the m = 0 divergence contributes
    -(z+h) * div(vbar), which vanishes after ``leray_project``.
    """
    div = 1j * grid.kx_phys[:, None, None] * vcoeffs[0] + 1j * grid.ky_phys[None, :, None] * vcoeffs[1]
    m = grid.m_int.astype(float)
    inv = np.zeros_like(m)
    inv[1:] = grid.spec.h / (np.pi * m[1:])
    w_sin = -div * inv[None, None, :]
    w_affine = -div[:, :, 0]  # coefficient of (z + h) per wavevector
    return w_sin, w_affine


def vertical_velocity(state: SpectralState, padded: bool = True) -> np.ndarray:
    """Diagnostic vertical velocity sampled on the collocation grid."""
    g = state.grid
    w_sin, w_aff = _w_parts(g, state.coeffs[:2])
    w = g.synth_sin(w_sin, padded=padded)
    _, _, z = g.nodes(padded=padded)
    aff2d = g.synth_cos2d(w_aff, padded=padded)
    return w + aff2d[:, :, None] * (z + g.spec.h)[None, None, :]


def vertical_velocity_top(state: SpectralState, padded: bool = True) -> np.ndarray:
    """w evaluated at the top face z = 0.

    Every sine mode vanishes there, so only the affine part -h * div(vbar)
    survives; it is zero up to the divergence residual of the barotropic mode.
    """
    g = state.grid
    _, w_aff = _w_parts(g, state.coeffs[:2])
    return g.spec.h * g.synth_cos2d(w_aff, padded=padded)


# -- depth averaging -----------------------------------------------------------


def average_A2(state: SpectralState) -> np.ndarray:
    """Depth mean of every component, as 2D coefficients (3, nkx, nky)."""
    return state.coeffs[:, :, :, 0].copy()


def average_A3(state: SpectralState) -> SpectralState:
    """Depth mean lifted back to a z-independent 3D state."""
    out = np.zeros_like(state.coeffs)
    out[:, :, :, 0] = state.coeffs[:, :, :, 0]
    return SpectralState(state.grid, out, state.time)


def fluctuation_R(state: SpectralState) -> SpectralState:
    """Depth fluctuation: identity minus the lifted depth mean (exact on coefficients)."""
    out = state.coeffs.copy()
    out[:, :, :, 0] = 0.0
    return SpectralState(state.grid, out, state.time)


# -- advection -----------------------------------------------------------------


def _advection_samples(grid: Grid, adv_coeffs: np.ndarray, target_coeffs: np.ndarray) -> np.ndarray:
    """Samples of (v.grad)X + w(v) dz X on the dealiased grid, per component."""
    v1g = grid.synth_cos(adv_coeffs[0], padded=True)
    v2g = grid.synth_cos(adv_coeffs[1], padded=True)
    w_sin, w_aff = _w_parts(grid, adv_coeffs)
    wg = grid.synth_sin(w_sin, padded=True)
    if np.abs(w_aff).max() > 0.0:
        _, _, z = grid.nodes(padded=True)
        wg = wg + grid.synth_cos2d(w_aff, padded=True)[:, :, None] * (z + grid.spec.h)[None, None, :]
    out = np.empty((target_coeffs.shape[0],) + v1g.shape)
    for c in range(target_coeffs.shape[0]):
        tc = target_coeffs[c]
        fx = grid.synth_cos(grid.dx(tc), padded=True)
        fy = grid.synth_cos(grid.dy(tc), padded=True)
        fz = grid.synth_sin(grid.dz_to_sin(tc), padded=True)
        out[c] = v1g * fx + v2g * fy + wg * fz
    return out


def _hadv_samples(grid: Grid, adv_coeffs: np.ndarray, target_coeffs: np.ndarray) -> np.ndarray:
    """Horizontal-only advection samples (v.grad)X, no vertical transport."""
    v1g = grid.synth_cos(adv_coeffs[0], padded=True)
    v2g = grid.synth_cos(adv_coeffs[1], padded=True)
    out = np.empty((target_coeffs.shape[0],) + v1g.shape)
    for c in range(target_coeffs.shape[0]):
        tc = target_coeffs[c]
        out[c] = v1g * grid.synth_cos(grid.dx(tc), padded=True) + v2g * grid.synth_cos(
            grid.dy(tc), padded=True
        )
    return out


def trilinear_b(U: SpectralState, Usharp: SpectralState, Uflat: SpectralState) -> float:
    """Advection pairing (P_H[(v.grad)U# + w(v) dz U#], Ub) by exact quadrature."""
    g = U.grid
    samples = _advection_samples(g, U.coeffs[:2], Usharp.coeffs)
    flat = leray_project(Uflat)
    w = g.quad_weight(padded=True)
    total = 0.0
    for c in range(3):
        total += float(np.sum(samples[c] * g.synth_cos(flat.coeffs[c], padded=True)))
    return total * w


def bilinear_B(U: SpectralState, Usharp: SpectralState | None = None) -> SpectralState:
    """Dealiased spectral advection term, projected onto the constrained space."""
    if Usharp is None:
        Usharp = U
    g = U.grid
    samples = _advection_samples(g, U.coeffs[:2], Usharp.coeffs)
    coeffs = np.stack([g.analyze_cos(samples[c]) for c in range(3)])
    return leray_project(SpectralState(g, coeffs, U.time))


# -- linear operators ----------------------------------------------------------


def _pressure_integral_cos(grid: Grid, Tc: np.ndarray) -> np.ndarray:
    """Cosine coefficients of int_z^0 T dz' (vertical antiderivative, re-expanded)."""
    m = grid.m_int.astype(float)
    fac = np.zeros_like(m)
    fac[1:] = -grid.spec.h / (np.pi * m[1:])
    g_sin = Tc * fac[None, None, :]
    cos_part = g_sin @ grid.sin_to_cos.T
    cos_part += Tc[:, :, 0:1] * grid.neg_z_cos[None, None, :]
    return cos_part


def pressure_buoyancy_Apr(state: SpectralState, physics: PhysicsParams) -> SpectralState:
    """Buoyancy-pressure operator: P_H(-beta_T g grad int_z^0 T dz', 0)."""
    g = state.grid
    G = _pressure_integral_cos(g, state.coeffs[2])
    out = np.zeros_like(state.coeffs)
    scale = -physics.beta_T * physics.g
    out[0] = scale * g.dx(G)
    out[1] = scale * g.dy(G)
    return leray_project(SpectralState(g, out, state.time))


def coriolis_E(state: SpectralState, physics: PhysicsParams) -> SpectralState:
    """Coriolis operator: P_H(f (-v2, v1), 0)."""
    g = state.grid
    out = np.zeros_like(state.coeffs)
    out[0] = -physics.f * state.coeffs[1]
    out[1] = physics.f * state.coeffs[0]
    return leray_project(SpectralState(g, out, state.time))


def forcing_F(
    state: SpectralState,
    physics: PhysicsParams,
    F_U: SpectralState | None = None,
) -> SpectralState:
    """Aggregate linear term A_pr U + E U - F_U (Lipschitz in U by construction)."""
    g = state.grid
    apr = pressure_buoyancy_Apr(state, physics)
    cor = coriolis_E(state, physics)
    coeffs = apr.coeffs + cor.coeffs
    if F_U is not None:
        if F_U.grid is not g and F_U.coeffs.shape != state.coeffs.shape:
            raise ValueError("forcing field resolution mismatch")
        coeffs = coeffs - F_U.coeffs
    return SpectralState(g, coeffs, state.time)


# -- barotropic / baroclinic splitting -----------------------------------------


def mode_split(state: SpectralState) -> ModeSplit:
    """Split horizontal velocity into depth mean and fluctuation (exact)."""
    vbar = state.coeffs[:2, :, :, 0].copy()
    vtilde = state.coeffs[:2].copy()
    vtilde[:, :, :, 0] = 0.0
    return ModeSplit(state.grid, vbar, vtilde)


def _lift(grid: Grid, c2d: np.ndarray) -> np.ndarray:
    out = np.zeros(c2d.shape + (grid.nm,), dtype=np.complex128)
    out[..., 0] = c2d
    return out


def _leray_2d(grid: Grid, c2d: np.ndarray) -> np.ndarray:
    kx = grid.kx_phys[:, None]
    ky = grid.ky_phys[None, :]
    ksq = np.where(grid.ksq_h == 0.0, 1.0, grid.ksq_h)
    d = (kx * c2d[0] + ky * c2d[1]) / ksq
    out = np.stack([c2d[0] - kx * d, c2d[1] - ky * d])
    out[:, 0, 0] = 0.0
    return out


def baroclinic_rhs_terms(state: SpectralState, physics: PhysicsParams) -> dict:
    """Named right-hand-side terms of the depth-split velocity equations.

    Barotropic entries are 2D coefficient arrays (2, nkx, nky), baroclinic
    entries 3D velocity coefficient arrays (2, nkx, nky, nm).  Terms carry
    their natural sign (the transported quantity itself); the tendency
    assembly with signs lives in ``recombine_split_rhs``.
    """
    g = state.grid
    split = mode_split(state)
    vbar3 = _lift(g, split.vbar)
    vtilde = split.vtilde
    pad2 = lambda c2: np.stack([g.analyze_cos(c2[i]) for i in range(2)])

    # (vt.grad)vt + w(vt) dz vt -- vertical transport by the fluctuation only
    tt_full = pad2(_advection_samples(g, vtilde, vtilde))

    # (vt.grad)vt + (div vt) vt -- the depth-mean carrier of the same interaction
    div_t_g = g.synth_cos(
        1j * g.kx_phys[:, None, None] * vtilde[0] + 1j * g.ky_phys[None, :, None] * vtilde[1],
        padded=True,
    )
    vt_g = np.stack([g.synth_cos(vtilde[0], padded=True), g.synth_cos(vtilde[1], padded=True)])
    tt_avg_carrier = pad2(_hadv_samples(g, vtilde, vtilde) + div_t_g[None] * vt_g)

    adv_tb = pad2(_hadv_samples(g, vtilde, vbar3))  # (vt.grad)vbar
    adv_bt = pad2(_hadv_samples(g, vbar3, vtilde))  # (vbar.grad)vt
    adv_bb = pad2(_hadv_samples(g, vbar3, vbar3))  # (vbar.grad)vbar

    G = _pressure_integral_cos(g, state.coeffs[2])
    buoy = np.stack([g.dx(G), g.dy(G)]) * (-physics.beta_T * physics.g)

    barotropic = {
        "diffusion": -(g.spec.mu * g.ksq_h)[None] * split.vbar,
        "adv_vbar": adv_bb[:, :, :, 0],
        "adv_tilde_avg": tt_avg_carrier[:, :, :, 0],
        "coriolis": np.stack([-physics.f * split.vbar[1], physics.f * split.vbar[0]]),
        "buoyancy": buoy[:, :, :, 0],
    }
    avg_corr = _lift(g, tt_avg_carrier[:, :, :, 0])  # lifted depth mean, + sign in rhs
    buoy_fluct = buoy.copy()
    buoy_fluct[:, :, :, 0] = 0.0
    baroclinic = {
        "diffusion": -g.lam[None] * vtilde,
        "adv_tilde_tilde": tt_full,
        "adv_tilde_vbar": adv_tb,
        "adv_vbar_tilde": adv_bt,
        "avg_correction": avg_corr,
        "coriolis": np.stack([-physics.f * vtilde[1], physics.f * vtilde[0]]),
        "buoyancy": buoy_fluct,
    }
    return {"barotropic": barotropic, "baroclinic": baroclinic, "split": split}


def recombine_split_rhs(grid: Grid, terms: dict) -> np.ndarray:
    """Total velocity tendency implied by the split equations (lifted + fluctuating)."""
    bar = terms["barotropic"]
    bc = terms["baroclinic"]
    rhs_bar = (
        bar["diffusion"] - bar["adv_vbar"] - bar["adv_tilde_avg"] - bar["coriolis"] - bar["buoyancy"]
    )
    rhs_bar = _leray_2d(grid, rhs_bar)
    rhs_tilde = (
        bc["diffusion"]
        - bc["adv_tilde_tilde"]
        - bc["adv_tilde_vbar"]
        - bc["adv_vbar_tilde"]
        + bc["avg_correction"]
        - bc["coriolis"]
        - bc["buoyancy"]
    )
    rhs_tilde = rhs_tilde.copy()
    rhs_tilde[:, :, :, 0] = 0.0  # fluctuation part; depth mean carried by rhs_bar
    total = rhs_tilde
    total[:, :, :, 0] += rhs_bar
    return total


def velocity_rhs_unsplit(state: SpectralState, physics: PhysicsParams) -> np.ndarray:
    """Velocity rows of the unsplit tendency -AU - B(U) - A_pr U - E U."""
    g = state.grid
    b = bilinear_B(state)
    f_lin = forcing_F(state, physics)
    rhs = -g.lam[None] * state.coeffs[:2] - b.coeffs[:2] - f_lin.coeffs[:2]
    return rhs
