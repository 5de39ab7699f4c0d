"""The action functional, its derivative, and the verification residuals.

All quantities are evaluated in a single consistent discrete model (piecewise
linear profile, per-cell Gauss quadrature with the exact kernel at quadrature
points, closed forms for pure Green-kernel integrals).  Because the energy,
the directional derivative, the assembled gradient and the Hessian all use the
same discrete forms, finite differences of the energy reproduce the derivative
to near machine precision, and Newton converges quadratically on the discrete
critical points.

For the action I(u) with u = phi + q G_lam:

    I = 1/2 ||grad phi||^2 + (lam/2)(||phi||^2 - ||u||^2)
        + 1/2 (alpha + xi_lam) |q|^2 - int G(u)

and the extended functional J(theta, u) = I(u(e^{-theta} .)) has the closed
form obtained by scaling each block, with xi evaluated at e^{-2 theta} lam.
The theta-derivative at 0 is exactly the Pohozaev expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.linalg import solve_banded, solveh_banded

from .field import FieldState, l2_inner
from .greens import omega_alpha, xi
from .nonlinearity import G_eval, dg_signed, g_eval, g_signed

__all__ = [
    "EnergyBreakdown",
    "VerificationReport",
    "energy",
    "derivative",
    "gradient_vector",
    "gradient_norm",
    "riesz_representative",
    "hessian_blocks",
    "arrow_solve",
    "extended_energy",
    "extended_energy_dtheta",
    "pohozaev_residual",
    "pohozaev_residual_alt",
    "boundary_residual",
    "blowup_diagnostic",
    "gradient_system",
    "radial_laplacian",
    "verify",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float        # 1/2 ||grad phi||^2
    l2_block: float       # (lam/2)(||phi||^2 - ||u||^2)
    charge_block: float   # 1/2 (alpha + xi_lam)|q|^2
    potential: float      # int G(u)

    @property
    def total(self):
        return self.kinetic + self.l2_block + self.charge_block - self.potential


def _norms(state):
    """(||grad phi||^2, ||phi||^2, ||u||^2) in the discrete model."""
    grid = state.grid
    grad_sq = float(np.real(grid.stiffness_inner(state.phi, state.phi)))
    phi_sq = float(np.real(grid.mass_inner(state.phi, state.phi)))
    u_sq = float(np.real(l2_inner(state, state)))
    return grad_sq, phi_sq, u_sq


def _potential(state, spec):
    u_gp = state.u_at_gauss()
    return float(np.dot(state.grid.gw, G_eval(spec, u_gp)))


def energy(state, spec, strength):
    if strength.dim != state.grid.dim:
        raise ValueError("dimension mismatch between state and interaction strength")
    grad_sq, phi_sq, u_sq = _norms(state)
    xi_l = xi(state.grid.dim, state.lam)
    return EnergyBreakdown(
        kinetic=0.5 * grad_sq,
        l2_block=0.5 * state.lam * (phi_sq - u_sq),
        charge_block=0.5 * (strength.alpha + xi_l) * abs(state.charge) ** 2,
        potential=_potential(state, spec),
    )


def derivative(state, direction, spec, strength):
    """Directional derivative I'(u)[v], real by definition."""
    if state.grid is not direction.grid and not state.grid.compatible(direction.grid):
        raise ValueError("grid mismatch between state and direction")
    if state.lam != direction.lam:
        raise ValueError("lambda mismatch between state and direction")
    grid = state.grid
    xi_l = xi(grid.dim, state.lam)
    u_gp = state.u_at_gauss()
    v_gp = direction.u_at_gauss()
    nl = np.dot(grid.gw, g_eval(spec, u_gp) * np.conjugate(v_gp))
    val = (
        grid.stiffness_inner(state.phi, direction.phi)
        + state.lam * grid.mass_inner(state.phi, direction.phi)
        - state.lam * l2_inner(state, direction)
        + (strength.alpha + xi_l) * state.charge * np.conjugate(direction.charge)
        - nl
    )
    return float(np.real(val))


# ---------------------------------------------------------------------------
# Real-gauge gradient / Hessian assembly (the solver's system).
# ---------------------------------------------------------------------------


def _require_real(state):
    if np.iscomplexobj(state.phi) or np.iscomplexobj(np.asarray(state.charge)):
        raise ValueError("solver-side assembly requires the real gauge (gauge_fix first)")


def gradient_vector(state, spec, strength):
    """(grad wrt nodal phi, grad wrt q) of the discrete action, real gauge.

    The lam*mass terms of the phi-block cancel between (lam/2)||phi||^2 and
    -(lam/2)||u||^2; what remains is the stiffness part, the charge coupling
    through the kernel, and the nonlinear term tested with hat functions.
    """
    _require_real(state)
    grid = state.grid
    g = grid.green(state.lam)
    q = float(np.real(state.charge))
    u_gp = grid.nodal_at_gauss(state.phi) + q * g["gp"]
    gvals = g_signed(spec, u_gp)
    s_phi = _stiffness_apply(grid, state.phi)
    grad_phi = s_phi - state.lam * q * g["c_vec"] - grid.scatter_to_nodes(gvals)
    xi_l = xi(grid.dim, state.lam)
    grad_q = (
        (strength.alpha + xi_l) * q
        - state.lam * (np.dot(g["c_vec"], state.phi) + q * g["l2_sq"])
        - np.dot(grid.gw, gvals * g["gp"])
    )
    return grad_phi, float(grad_q)


def _stiffness_apply(grid, v):
    d = np.diff(v) * grid.stiff_k
    out = np.zeros_like(np.asarray(v, dtype=float))
    out[:-1] -= d
    out[1:] += d
    return out


def _stiffness_banded(grid):
    M = grid.M
    diag = np.zeros(M + 1)
    diag[:-1] += grid.stiff_k
    diag[1:] += grid.stiff_k
    off = -grid.stiff_k
    return diag, off


def _mass_banded(grid):
    gl = grid.glam
    w = grid.gw
    diag = np.zeros(grid.M + 1)
    np.add.at(diag, grid.gcell, w * (1.0 - gl) ** 2)
    np.add.at(diag, grid.gcell + 1, w * gl**2)
    off = np.zeros(grid.M)
    np.add.at(off, grid.gcell, w * gl * (1.0 - gl))
    return diag, off


def _tridiag_from_gauss(grid, coeff_at_gauss):
    """Tridiagonal (diag, off) of sum_g coeff_g hat_i hat_j at the Gauss points."""
    gl = grid.glam
    c = grid.gw * coeff_at_gauss
    diag = np.zeros(grid.M + 1)
    np.add.at(diag, grid.gcell, c * (1.0 - gl) ** 2)
    np.add.at(diag, grid.gcell + 1, c * gl**2)
    off = np.zeros(grid.M)
    np.add.at(off, grid.gcell, c * gl * (1.0 - gl))
    return diag, off


def riesz_representative(state, strength, grad_phi, grad_q):
    """Solve the norm's quadratic form for the dual gradient: B z = grad.

    B is block diagonal: stiffness + lam*mass on the profile block and
    (alpha + xi_lam) on the charge; needs lam > omega_alpha.
    """
    grid = state.grid
    if not state.lam > omega_alpha(strength):
        raise ValueError("dual norm needs lambda > omega_alpha")
    sd, so = _stiffness_banded(grid)
    md, mo = _mass_banded(grid)
    diag = sd + state.lam * md
    off = so + state.lam * mo
    ab = np.zeros((2, grid.M + 1))
    ab[0, 1:] = off
    ab[1, :] = diag
    z_phi = solveh_banded(ab, grad_phi)
    xi_l = xi(grid.dim, state.lam)
    z_q = grad_q / (strength.alpha + xi_l)
    return z_phi, z_q


def gradient_norm(state, spec, strength):
    """Dual norm of I'(u) wrt the coercive norm at the state's own lambda."""
    gp, gq = gradient_vector(state, spec, strength)
    zp, zq = riesz_representative(state, strength, gp, gq)
    return math.sqrt(max(float(np.dot(gp, zp) + gq * zq), 0.0))


def hessian_blocks(state, spec, strength):
    """Second derivative of the discrete action at a real-gauge state.

    Returns (diag, off, b, d): tridiagonal phi-phi block (stiffness minus the
    linearized nonlinear term), the phi-q coupling column b, and the scalar
    q-q entry d.  The nonlinearity is linearized with numerical g'.
    """
    _require_real(state)
    grid = state.grid
    g = grid.green(state.lam)
    q = float(np.real(state.charge))
    u_gp = grid.nodal_at_gauss(state.phi) + q * g["gp"]
    dg = dg_signed(spec, u_gp)
    sd, so = _stiffness_banded(grid)
    nd, no = _tridiag_from_gauss(grid, dg)
    diag = sd - nd
    off = so - no
    b = -state.lam * g["c_vec"] - grid.scatter_to_nodes(dg * g["gp"])
    xi_l = xi(grid.dim, state.lam)
    d = (
        (strength.alpha + xi_l)
        - state.lam * g["l2_sq"]
        - float(np.dot(grid.gw, dg * g["gp"] ** 2))
    )
    return diag, off, b, d


def arrow_solve(diag, off, b, d, rhs_phi, rhs_q):
    """Solve the symmetric arrow system [[T, b], [b^T, d]] x = rhs.

    T is tridiagonal (diag, off); solved by block elimination with two banded
    solves, so the cost stays linear in the grid size.
    """
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1, :] = diag
    ab[2, :-1] = off
    x1 = solve_banded((1, 1), ab, rhs_phi)
    x2 = solve_banded((1, 1), ab, b)
    denom = d - float(np.dot(b, x2))
    if denom == 0.0:
        raise np.linalg.LinAlgError("arrow system is singular")
    q = (rhs_q - float(np.dot(b, x1))) / denom
    return x1 - q * x2, q


# ---------------------------------------------------------------------------
# Extended functional and residual identities.
# ---------------------------------------------------------------------------


def extended_energy(theta, state, spec, strength):
    """J(theta, u) = I(u(e^{-theta} .)) via the closed-form block scaling."""
    grad_sq, phi_sq, u_sq = _norms(state)
    pot = _potential(state, spec)
    n2 = state.grid.dim - 2
    q2 = abs(state.charge) ** 2
    xi_th = xi(state.grid.dim, math.exp(-2.0 * theta) * state.lam)
    return (
        0.5 * math.exp(n2 * theta) * grad_sq
        + 0.5 * math.exp(n2 * theta) * state.lam * (phi_sq - u_sq)
        + 0.5 * math.exp(2 * n2 * theta) * (strength.alpha + xi_th) * q2
        - math.exp(state.grid.dim * theta) * pot
    )


def extended_energy_dtheta(theta, state, spec, strength):
    """d/dtheta of J, using d xi(e^{-2 theta} lam)/dtheta = -2 e^{-(N-2)theta} lam ||G_lam||^2."""
    grid = state.grid
    grad_sq, phi_sq, u_sq = _norms(state)
    pot = _potential(state, spec)
    n2 = grid.dim - 2
    q2 = abs(state.charge) ** 2
    xi_th = xi(grid.dim, math.exp(-2.0 * theta) * state.lam)
    g_l2 = grid.green(state.lam)["l2_sq"]
    dxi = -2.0 * math.exp(-n2 * theta) * state.lam * g_l2
    return (
        0.5 * n2 * math.exp(n2 * theta) * grad_sq
        + 0.5 * n2 * math.exp(n2 * theta) * state.lam * (phi_sq - u_sq)
        + (n2 * (strength.alpha + xi_th) + 0.5 * dxi) * math.exp(2 * n2 * theta) * q2
        - grid.dim * math.exp(grid.dim * theta) * pot
    )


def pohozaev_residual(state, spec, strength):
    """The dilation identity's right-hand side; zero at exact solutions.

    (N-2)/2 ||grad phi||^2 + (N-2) lam/2 (||phi||^2 - ||u||^2)
    - lam ||G_lam||^2 |q|^2 + (N-2)(alpha + xi_lam)|q|^2 - N int G(u).
    """
    grid = state.grid
    grad_sq, phi_sq, u_sq = _norms(state)
    pot = _potential(state, spec)
    n2 = grid.dim - 2
    q2 = abs(state.charge) ** 2
    xi_l = xi(grid.dim, state.lam)
    g_l2 = grid.green(state.lam)["l2_sq"]
    return (
        0.5 * n2 * grad_sq
        + 0.5 * n2 * state.lam * (phi_sq - u_sq)
        - state.lam * g_l2 * q2
        + n2 * (strength.alpha + xi_l) * q2
        - grid.dim * pot
    )


def pohozaev_residual_alt(state, spec, strength):
    """3D rewriting: 1/2||grad phi||^2 + lam/2(||phi||^2-||u||^2)
    + 1/2(alpha+xi)|q|^2 + 1/2 alpha |q|^2 - 3 int G(u); equals the primary
    form identically through lam ||G_lam||^2 = xi_lam / 2."""
    if state.grid.dim != 3:
        raise ValueError("the alternate Pohozaev form is specific to dimension 3")
    grad_sq, phi_sq, u_sq = _norms(state)
    pot = _potential(state, spec)
    q2 = abs(state.charge) ** 2
    xi_l = xi(3, state.lam)
    return (
        0.5 * grad_sq
        + 0.5 * state.lam * (phi_sq - u_sq)
        + 0.5 * (strength.alpha + xi_l) * q2
        + 0.5 * strength.alpha * q2
        - 3.0 * pot
    )


def boundary_residual(state, strength):
    """phi(0) - (alpha + xi_lam) q: the matching condition at the origin."""
    xi_l = xi(state.grid.dim, state.lam)
    res = state.phi[0] - (strength.alpha + xi_l) * state.charge
    return complex(res) if np.iscomplexobj(np.asarray(res)) else float(res)


def blowup_diagnostic(state, n_points=16):
    """Least-squares slope of log|phi'| vs log r over the innermost cells.

    phi' is taken at cell midpoints (one-sided of the first cell excluded: the
    r=0 node carries the regular-part value).  Returns None when the profile
    is too flat for a meaningful fit or the grid too coarse.
    """
    grid = state.grid
    if grid.M < 2 * n_points + 2:
        return None
    phi = np.real(np.asarray(state.phi))
    idx = np.arange(1, n_points + 1)
    h = np.diff(grid.nodes)[idx]
    dphi = (phi[idx + 1] - phi[idx]) / h
    mid = 0.5 * (grid.nodes[idx] + grid.nodes[idx + 1])
    mag = np.abs(dphi)
    if np.max(mag) < 1e-13:
        return None
    keep = mag > 1e-300
    if keep.sum() < 4:
        return None
    slope = np.polyfit(np.log(mid[keep]), np.log(mag[keep]), 1)[0]
    return float(slope)


def radial_laplacian(grid, phi, charge=0.0, lam=None):
    """Second-order finite-difference radial Laplacian of the regular part.

    Returns values at nodes 0..M-1 (the outer boundary node is excluded).  At
    r=0 the profile is treated as an even function (ghost-node reflection), so
    Delta phi(0) = N * phi''(0) ~ 2N (phi_1 - phi_0)/r_1^2; with charge != 0
    the node-0 value of the strong residual is not defined and callers should
    ignore it.
    """
    r = grid.nodes
    phi = np.asarray(phi, dtype=float)
    out = np.empty(grid.M)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    denom = hm * hp * (hm + hp)
    d2 = 2.0 * (hm * phi[2:] - (hm + hp) * phi[1:-1] + hp * phi[:-2]) / denom
    d1 = (hm**2 * phi[2:] - hp**2 * phi[:-2] + (hp**2 - hm**2) * phi[1:-1]) / denom
    out[1:] = d2 + (grid.dim - 1) / r[1:-1] * d1
    out[0] = 2.0 * grid.dim * (phi[1] - phi[0]) / r[1] ** 2
    return out


def gradient_system(state, spec, strength):
    """Strong-form nodewise residual plus the scalar charge residual.

    Profile residual: -phi'' - (N-1)/r phi' - lam q G - g(u) at interior
    nodes (nan at r=0 when q != 0, where the forcing is singular; the weak
    system used by Newton has no such defect).  Charge residual: the q-
    component of the weak gradient.
    """
    _require_real(state)
    grid = state.grid
    q = float(np.real(state.charge))
    lap = radial_laplacian(grid, state.phi)
    res = np.full(grid.M + 1, np.nan)
    g_nodes = grid.green(state.lam)["nodes"]
    u_inner = state.phi[1:-1] + q * g_nodes[1:-1]
    res[1:-1] = (
        -lap[1:]
        - state.lam * q * g_nodes[1:-1]
        - g_signed(spec, u_inner)
    )
    if q == 0.0:
        res[0] = -lap[0] - g_signed(spec, state.phi[0])
    _, charge_res = gradient_vector(state, spec, strength)
    return res, charge_res


@dataclass(frozen=True)
class VerificationReport:
    energy: EnergyBreakdown
    gradient_norm: float
    pohozaev_residual: float
    pohozaev_residual_alt: float | None
    boundary_residual: complex
    blowup_exponent: float | None
    charge: complex
    lam: float

    def to_json_dict(self):
        b = complex(self.boundary_residual)
        q = complex(self.charge)
        return {
            "energy": {
                "kinetic": self.energy.kinetic,
                "l2_block": self.energy.l2_block,
                "charge_block": self.energy.charge_block,
                "potential": self.energy.potential,
                "total": self.energy.total,
            },
            "gradient_norm": self.gradient_norm,
            "pohozaev_residual": self.pohozaev_residual,
            "pohozaev_residual_alt": self.pohozaev_residual_alt,
            "boundary_residual_re": b.real,
            "boundary_residual_im": b.imag,
            "blowup_exponent": self.blowup_exponent,
            "charge_re": q.real,
            "charge_im": q.imag,
            "lambda": self.lam,
        }


def verify(state, spec, strength):
    """Full residual report for a candidate state."""
    en = energy(state, spec, strength)
    try:
        gn = gradient_norm(state, spec, strength)
    except ValueError:
        # complex state or non-coercive lambda: fall back on the gauge-fixed
        # real part when possible, else report nan
        from .field import gauge_fix

        fixed = gauge_fix(state)
        try:
            real_state = FieldState(
                fixed.grid, fixed.lam, float(np.real(fixed.charge)), np.real(fixed.phi)
            )
            gn = gradient_norm(real_state, spec, strength)
        except ValueError:
            gn = float("nan")
    alt = pohozaev_residual_alt(state, spec, strength) if state.grid.dim == 3 else None
    return VerificationReport(
        energy=en,
        gradient_norm=gn,
        pohozaev_residual=pohozaev_residual(state, spec, strength),
        pohozaev_residual_alt=alt,
        boundary_residual=boundary_residual(state, strength),
        blowup_exponent=blowup_diagnostic(state),
        charge=state.charge,
        lam=state.lam,
    )
