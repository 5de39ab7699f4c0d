"""Critical-point solvers.

Three layers:
  * scalar_ground_state -- radial shooting baseline for the equation without
    point interaction (q = 0), giving the reference energy m0;
  * mountain_pass -- path deformation: start from the segment joining the zero
    state to a dilated negative-energy state (with a small charge perturbation
    so the optimizer can move in q), repeatedly push the maximizing knot along
    the dual-norm steepest descent direction, then hand over to Newton;
  * newton_refine -- damped Newton on the coupled (phi, q) discrete system,
    quadratically convergent near a critical point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .field import (
    FieldState,
    add,
    change_lambda,
    dilate,
    gauge_fix,
    make_grid,
    resample,
    scale,
    zero_state,
)
from .functional import (
    arrow_solve,
    energy,
    gradient_norm,
    gradient_vector,
    hessian_blocks,
    riesz_representative,
    verify,
)
from .greens import omega_alpha, xi
from .nonlinearity import G_eval, g_signed, resolve_omega1

__all__ = [
    "SolverConfig",
    "SolveResult",
    "NewtonError",
    "ShootingError",
    "solve_lambda",
    "scalar_ground_state",
    "initial_path",
    "newton_refine",
    "mountain_pass",
]


@dataclass(frozen=True)
class SolverConfig:
    path_knots: int = 17
    descent_step: float = 0.5
    max_iters: int = 400
    grad_tol: float = 1e-8
    newton_tol: float = 1e-10
    dilation_T: float = 4.0
    seed_profile: str = "scalar_ground_state"  # bump | scalar_ground_state | file
    theta_mode: bool = False
    q_amplitude: float = 0.1
    newton_switch: float = 5e-2
    M: int = 512
    r_max: float | None = None
    grading_exponent: float | None = None
    lam: float | None = None
    seed: int = 0
    seed_file: str | None = None
    freeze_charge: bool = False
    dilation_T_cap: float = 64.0
    newton_max_iter: int = 60

    def __post_init__(self):
        if self.path_knots < 16:
            raise ValueError("path_knots must be >= 16")
        if not (self.grad_tol > 0 and self.newton_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.seed_profile not in ("bump", "scalar_ground_state", "file"):
            raise ValueError("seed_profile must be bump, scalar_ground_state or file")


@dataclass(frozen=True)
class SolveResult:
    state: FieldState
    sigma_estimate: float
    m0_estimate: float | None
    report: object
    iterations: int
    converged: bool
    trace: tuple = ()
    p_regime: str | None = None


class ShootingError(RuntimeError):
    pass


class NewtonError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


def solve_lambda(spec, strength):
    """Working lambda for solves: the linearization frequency omega when it is
    safely above the coercivity threshold, else 2*omega_alpha (the threshold can
    exceed omega outside the theorems' hypotheses; any lambda works for the
    critical points themselves)."""
    om_a = omega_alpha(strength)
    if spec.omega > 1.01 * om_a:
        return spec.omega
    return 2.0 * om_a


# ---------------------------------------------------------------------------
# Radial shooting for the scalar baseline.
# ---------------------------------------------------------------------------


def _shoot_classify(spec, dim, a, r_end):
    """Integrate u'' + (N-1)/r u' + g(u) = 0 from u(0)=a, u'(0)=0.

    Returns ('over', sol) if u crosses zero, ('under', sol) if u turns back up
    while still positive, ('decay', sol) if it just decays to r_end.
    """
    r0 = 1e-8

    def rhs(r, y):
        return [y[1], -(dim - 1) / r * y[1] - g_signed(spec, y[0])]

    ga = float(g_signed(spec, a))
    y0 = [a - ga * r0**2 / (2.0 * dim), -ga * r0 / dim]

    def cross(r, y):
        return y[0]

    cross.terminal = True
    cross.direction = -1

    def turn(r, y):
        # u' crossing zero upward while u is still visibly positive
        return y[1] if y[0] > 1e-10 * a else -1.0

    turn.terminal = True
    turn.direction = 1

    sol = solve_ivp(
        rhs,
        (r0, r_end),
        y0,
        rtol=1e-10,
        atol=1e-12 * a,
        events=(cross, turn),
        dense_output=True,
        max_step=r_end / 50.0,
    )
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    return "decay", sol


def scalar_ground_state(spec, dim, grid, lam=None):
    """Ground state of the scalar equation by bisection on u(0).

    Returns (FieldState with q=0 on the given grid, m0) where m0 is the grid
    energy of the profile.  The profile is positive and decaying; beyond the
    last trusted radius it is extended by the linearized exponential tail.
    """
    if lam is None:
        lam = spec.omega
    r_end = max(grid.r_max, 30.0 / math.sqrt(spec.omega))
    # bracket: scan upward from the smallest amplitude with g(a) > 0
    scan = np.geomspace(1e-2, 1e5, 120)
    positive = [a for a in scan if g_signed(spec, a) > 0 and G_eval(spec, a) is not None]
    a_under = None
    a_over = None
    trace = []
    for a in positive:
        kind, _ = _shoot_classify(spec, dim, a, r_end)
        trace.append((a, kind))
        if kind in ("under", "decay"):
            a_under = a
        elif kind == "over" and a_under is not None:
            a_over = a
            break
    if a_over is None or a_under is None:
        raise ShootingError("no shooting bracket found; scan trace: %r" % (trace[-10:],))
    for _ in range(200):
        mid = 0.5 * (a_under + a_over)
        if mid == a_under or mid == a_over:
            break
        kind, _ = _shoot_classify(spec, dim, mid, r_end)
        if kind == "over":
            a_over = mid
        else:
            a_under = mid
    a_star = 0.5 * (a_under + a_over)
    kind, sol = _shoot_classify(spec, dim, a_star, r_end)
    # trusted radius: where the profile falls below a small fraction of u(0)
    t_dense = np.linspace(sol.t[0], sol.t[-1], 4000)
    u_dense = sol.sol(t_dense)[0]
    tiny = np.nonzero(u_dense < 1e-9 * a_star)[0]
    r_cut = t_dense[tiny[0]] if tiny.size else sol.t[-1]
    u_cut = float(sol.sol(r_cut)[0])

    nodes = grid.nodes
    phi = np.empty(grid.M + 1)
    inner = nodes <= sol.t[0]
    mid_mask = (~inner) & (nodes <= r_cut)
    phi[inner] = a_star
    phi[mid_mask] = sol.sol(nodes[mid_mask])[0]
    tail = nodes > r_cut
    if np.any(tail):
        s = math.sqrt(spec.omega)
        decay = np.exp(-s * (nodes[tail] - r_cut)) * (r_cut / nodes[tail]) ** ((dim - 1) / 2.0)
        phi[tail] = max(u_cut, 0.0) * decay
    phi = np.maximum(phi, 0.0)
    state = FieldState(grid, lam, 0.0, phi)
    m0 = energy(state, spec, _dummy_strength(dim)).total
    return state, m0


def _dummy_strength(dim):
    # q = 0 energies do not involve alpha; any strength of the right dimension works
    from .greens import InteractionStrength

    return InteractionStrength(0.0, dim)


# ---------------------------------------------------------------------------
# Mountain pass.
# ---------------------------------------------------------------------------


def _seed_state(spec, dim, config, grid, lam):
    if config.seed_profile == "scalar_ground_state":
        state, m0 = scalar_ground_state(spec, dim, grid, lam=lam)
        return state, m0
    if config.seed_profile == "file":
        from .field import load_profile

        if not config.seed_file:
            raise ValueError("seed_profile=file needs seed_file")
        st = load_profile(config.seed_file)
        st = resample(st, grid)
        return FieldState(grid, lam, 0.0, np.real(st.phi)), None
    # bump: a Gaussian at an amplitude that makes the potential term positive
    from .nonlinearity import check_assumptions

    zeta = spec.zeta_hint
    if zeta is None:
        scan = np.geomspace(1e-2, 1e5, 200)
        gv = G_eval(spec, scan)
        idx = np.argmax(gv > 0)
        if not gv[idx] > 0:
            raise ValueError("cannot find zeta with G(zeta) > 0 for the bump seed")
        zeta = float(scan[idx])
    width = 3.0 / math.sqrt(spec.omega)
    phi = 2.0 * zeta * np.exp(-((grid.nodes / width) ** 2))
    return FieldState(grid, lam, 0.0, phi), None


def initial_path(spec, strength, config, grid=None):
    """Discretized mountain-pass path: knots k/K * z with z a dilated
    negative-energy state, plus a small mid-path charge bump.

    Returns (knots, m0, lam).  The knots share one grid (the seed grid scaled
    by the dilation factor) and one lambda.
    """
    dim = strength.dim
    lam = config.lam if config.lam is not None else solve_lambda(spec, strength)
    T = config.dilation_T
    if grid is None:
        r_seed = config.r_max if config.r_max is not None else 20.0 / math.sqrt(min(lam, spec.omega))
        grading = config.grading_exponent
        grid = make_grid(dim, r_seed, config.M, grading, p_growth=spec.p_growth)
    seed, m0 = _seed_state(spec, dim, config, grid, lam * config.dilation_T**2)
    # Dilation alone can fail to reach negative energy (in 2D the kinetic term
    # is scale-invariant and the scalar ground state has zero potential mass),
    # so amplify the profile when the dilation factor hits its cap.
    amp = 1.0
    z = None
    for _ in range(60):
        seed_T = FieldState(seed.grid, lam * T * T, 0.0, amp * np.asarray(seed.phi))
        z = dilate(seed_T, T)
        en = energy(z, spec, strength).total
        if en < 0:
            break
        T *= 1.5
        if T > config.dilation_T_cap:
            T = config.dilation_T
            amp *= 1.5
    else:
        raise RuntimeError(
            "mountain pass endpoint not found: I(dilated seed) >= 0 up to "
            "T=%g, amplitude factor %g" % (config.dilation_T_cap, amp)
        )
    # Trim the endpoint to just past the zero-energy crossing: a deeply
    # negative endpoint makes the polyline so long that the barrier region is
    # undersampled and the discrete path max can tunnel through it.
    def _en_at(c):
        return energy(scale(z, c), spec, strength).total

    cs = np.linspace(0.0, 1.0, 65)
    vals = [_en_at(c) for c in cs]
    c_pos = max((c for c, v in zip(cs, vals) if v > 0), default=0.0)
    if c_pos > 0 and c_pos < 1.0:
        lo, hi = c_pos, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _en_at(mid) > 0:
                lo = mid
            else:
                hi = mid
        c_end = min(1.0, hi * 1.1)
        while _en_at(c_end) >= 0 and c_end < 1.0:
            c_end = min(1.0, c_end * 1.1)
        if _en_at(c_end) < 0:
            z = scale(z, c_end)
    K = config.path_knots - 1
    knots = []
    for k in range(config.path_knots):
        st = scale(z, k / K)
        if not config.freeze_charge and config.q_amplitude:
            qk = config.q_amplitude * math.sin(math.pi * k / K)
            st = FieldState(st.grid, st.lam, float(np.real(st.charge)) + qk, np.real(np.asarray(st.phi)))
        else:
            st = FieldState(st.grid, st.lam, float(np.real(st.charge)), np.real(np.asarray(st.phi)))
        knots.append(st)
    return knots, m0, lam


def newton_refine(state, spec, strength, config):
    """Damped Newton on the coupled discrete system; returns (state, history).

    The convergence measure is the dual gradient norm; steps are halved until
    the measure decreases.  Raises NewtonError on stagnation or divergence.
    """
    st = state
    history = []
    freeze = config.freeze_charge

    def _residual(s):
        if not freeze:
            return gradient_norm(s, spec, strength)
        # frozen charge: measure only the profile block of the gradient
        gp, _ = gradient_vector(s, spec, strength)
        zp, _ = riesz_representative(s, strength, gp, 0.0)
        return math.sqrt(max(float(np.dot(gp, zp)), 0.0))

    res = _residual(st)
    history.append(res)
    for _it in range(config.newton_max_iter):
        if res <= config.newton_tol:
            return st, history
        diag, off, b, d = hessian_blocks(st, spec, strength)
        gp, gq = gradient_vector(st, spec, strength)
        if freeze:
            dphi, _ = arrow_solve(diag, off, np.zeros_like(b), 1.0, -gp, 0.0)
            dq = 0.0
        else:
            dphi, dq = arrow_solve(diag, off, b, d, -gp, -gq)
        t = 1.0
        accepted = False
        while t > 1e-8:
            cand = FieldState(
                st.grid,
                st.lam,
                float(np.real(st.charge)) + t * dq,
                np.real(np.asarray(st.phi)) + t * dphi,
            )
            cand_res = _residual(cand)
            if cand_res < res or cand_res <= config.newton_tol:
                st, res = cand, cand_res
                history.append(res)
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise NewtonError("Newton stagnated at residual %.3e" % res, history)
    if res <= config.newton_tol:
        return st, history
    raise NewtonError("Newton did not reach tolerance: %.3e" % res, history)


def _descent_step(knot, spec, strength, step0, freeze_charge, max_dist=None):
    """One Armijo-backtracked steepest-descent step in the dual metric.

    max_dist caps the displacement (coercive norm) so the maximizing knot
    cannot tunnel through the mountain-pass barrier in a single move.
    """
    gp, gq = gradient_vector(knot, spec, strength)
    if freeze_charge:
        gq = 0.0
    zp, zq = riesz_representative(knot, strength, gp, gq)
    if freeze_charge:
        zq = 0.0
    gsq = float(np.dot(gp, zp) + gq * zq)
    e0 = energy(knot, spec, strength).total
    t = step0
    if max_dist is not None and gsq > 0:
        # the Riesz step of size t moves the state by t * sqrt(gsq)
        t = min(t, max_dist / math.sqrt(gsq))
    while t > 1e-12:
        cand = FieldState(
            knot.grid,
            knot.lam,
            float(np.real(knot.charge)) - t * zq,
            np.real(np.asarray(knot.phi)) - t * zp,
        )
        e1 = energy(cand, spec, strength).total
        if e1 <= e0 - 0.25 * t * gsq:
            return cand, math.sqrt(max(gsq, 0.0)), e1
        t *= 0.5
    return knot, math.sqrt(max(gsq, 0.0)), e0


def _state_dist(a, b, strength):
    """Distance in the coercive norm between two states on one grid/lambda."""
    grid = a.grid
    dphi = np.real(np.asarray(a.phi)) - np.real(np.asarray(b.phi))
    dq = float(np.real(a.charge)) - float(np.real(b.charge))
    grad = float(np.dot(grid.stiff_k, np.diff(dphi) ** 2))
    gl = grid.nodal_at_gauss(dphi)
    mass = float(np.dot(grid.gw, gl * gl))
    xi_l = xi(grid.dim, a.lam)
    return math.sqrt(max(grad + a.lam * mass + (strength.alpha + xi_l) * dq * dq, 0.0))


def _reparametrize(knots, strength):
    """Redistribute the knots evenly along the polyline (endpoints fixed).

    Keeps the discrete path connected, so pushing the maximizing knot downhill
    cannot make the path maximum collapse below the pass level.
    """
    K = len(knots) - 1
    seg = np.array(
        [_state_dist(knots[i + 1], knots[i], strength) for i in range(K)]
    )
    total = seg.sum()
    if total <= 0:
        return knots
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, total, K + 1)
    out = [knots[0]]
    for k in range(1, K):
        t = targets[k]
        i = int(np.searchsorted(cum, t, side="right") - 1)
        i = min(i, K - 1)
        frac = 0.0 if seg[i] == 0 else (t - cum[i]) / seg[i]
        a, b = knots[i], knots[i + 1]
        phi = (1 - frac) * np.real(np.asarray(a.phi)) + frac * np.real(np.asarray(b.phi))
        q = (1 - frac) * float(np.real(a.charge)) + frac * float(np.real(b.charge))
        out.append(FieldState(a.grid, a.lam, q, phi))
    out.append(knots[K])
    return out


def _theta_descent(knot, theta, spec, strength, step0):
    """Augmented descent step in (theta, u) for the extended functional."""
    from .functional import extended_energy, extended_energy_dtheta

    dth = extended_energy_dtheta(theta, knot, spec, strength)
    e0 = extended_energy(theta, knot, spec, strength)
    t = step0
    if abs(dth) > 0:
        # cap the theta move at 0.5 per step: exp(theta) feeds grid dilation,
        # so unbounded moves overflow long before they help
        t = min(t, 0.5 / abs(dth))
    while t > 1e-12:
        cand = theta - t * dth
        if extended_energy(cand, knot, spec, strength) <= e0 - 0.25 * t * dth**2:
            return cand
        t *= 0.5
    return theta


def _nontrivial(state, spec, strength):
    """Reject Newton limits that are the zero state (or numerically trivial)."""
    en = energy(state, spec, strength).total
    size = float(np.max(np.abs(np.asarray(state.phi)))) + abs(state.charge)
    return size > 1e-8 and abs(en) > 1e-12


def _multistart_newton(spec, strength, config, grid, lam, seed_phi):
    """Structured Newton restarts for degenerate path geometry.

    When the zero state is not a local minimum (omega <= omega_alpha) the
    deformation path slides below zero energy and never isolates a saddle, so
    we probe a charge/amplitude ladder around the scalar profile instead.
    Returns the nontrivial critical point of smallest positive energy
    (falling back to the one closest to zero), or None.
    """
    best_key = None
    best = None
    for c in (1.0, 0.5, 1.5, 2.0):
        for q0 in (0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0):
            st = FieldState(grid, lam, q0, c * np.asarray(seed_phi, dtype=float))
            try:
                cand, _ = newton_refine(st, spec, strength, config)
            except NewtonError:
                continue
            if not _nontrivial(cand, spec, strength):
                continue
            en = energy(cand, spec, strength).total
            key = (en <= 0, abs(en))
            if best_key is None or key < best_key:
                best_key, best = key, cand
    return best


def mountain_pass(spec, strength, config):
    """Path deformation + Newton refinement; returns a SolveResult.

    sigma estimates (the running path maximum) are nonincreasing; the
    maximizing knot (smallest index on ties) is pushed downhill each sweep.
    When its gradient norm falls under newton_switch, the knot is handed to
    Newton; on success the refined, gauge-fixed state is verified and gated.
    """
    dim = strength.dim
    lam = config.lam if config.lam is not None else solve_lambda(spec, strength)
    r_seed = config.r_max if config.r_max is not None else 20.0 / math.sqrt(min(lam, spec.omega))
    solve_grid = make_grid(
        dim, r_seed, config.M, config.grading_exponent, p_growth=spec.p_growth
    )
    knots, m0, _ = initial_path(spec, strength, config, grid=solve_grid)
    energies = [energy(k, spec, strength).total for k in knots]
    trace = []
    theta = 0.0
    best_state = None
    best_gn = math.inf
    newton_history = None
    iterations = 0
    refined = None
    switch = config.newton_switch
    collapse_count = 0
    for it in range(config.max_iters):
        iterations = it + 1
        # The barrier can hide inside a segment: check midpoints, and when one
        # tops every knot, promote it (replacing its lower-energy neighbor) so
        # the discrete path max cannot tunnel between samples.
        for _ in range(4):
            j = int(np.argmax(energies))
            mids = [
                FieldState(
                    solve_grid,
                    lam,
                    0.5 * (float(np.real(knots[i].charge)) + float(np.real(knots[i + 1].charge))),
                    0.5 * (np.real(np.asarray(knots[i].phi)) + np.real(np.asarray(knots[i + 1].phi))),
                )
                for i in range(len(knots) - 1)
            ]
            emids = [energy(m, spec, strength).total for m in mids]
            i_m = int(np.argmax(emids))
            if emids[i_m] <= energies[j]:
                break
            # replace the adjacent knot with lower energy (never an endpoint)
            left, right = i_m, i_m + 1
            if left == 0:
                repl = right
            elif right == len(knots) - 1:
                repl = left
            else:
                repl = left if energies[left] <= energies[right] else right
            knots[repl] = mids[i_m]
            energies[repl] = emids[i_m]
        j = int(np.argmax(energies))
        knot = knots[j]
        if j == 0 and energies[j] <= 1e-12:
            # path max collapsed onto the zero endpoint: the landscape has no
            # usable barrier along the current path (omega <= omega_alpha), so
            # switch to structured Newton restarts around the scalar profile
            collapse_count += 1
            if collapse_count >= 3:
                seed_phi = _seed_state(spec, dim, config, solve_grid, lam)[0].phi
                cand = _multistart_newton(spec, strength, config, solve_grid, lam, seed_phi)
                if cand is not None:
                    refined = cand
                break
            # drop the collapsed interior knots back onto a fresh path
            knots = _reparametrize(knots, strength)
            energies = [energy(k, spec, strength).total for k in knots]
            continue
        if config.theta_mode:
            theta = _theta_descent(knot, theta, spec, strength, config.descent_step)
        path_len = sum(
            _state_dist(knots[i + 1], knots[i], strength) for i in range(len(knots) - 1)
        )
        cap = 0.5 * path_len / (len(knots) - 1) if path_len > 0 else None
        new_knot, gn, e1 = _descent_step(
            knot, spec, strength, config.descent_step, config.freeze_charge, max_dist=cap
        )
        trace.append((it, energies[j], gn, float(np.real(knot.charge))))
        if gn < best_gn:
            best_gn, best_state = gn, knot
        if gn <= switch:
            cand = knot
            if config.theta_mode and theta != 0.0:
                cand = dilate(cand, math.exp(theta))
                cand = change_lambda(cand, lam)
                theta = 0.0
            if not cand.grid.compatible(solve_grid):
                cand = resample(cand, solve_grid)
            cand = FieldState(
                solve_grid, lam, float(np.real(cand.charge)), np.real(np.asarray(cand.phi))
            )
            try:
                candidate, newton_history = newton_refine(cand, spec, strength, config)
                if _nontrivial(candidate, spec, strength):
                    refined = candidate
                    break
            except NewtonError:
                pass
            switch *= 0.5  # failed or trivial: keep descending, demand a better start
        knots[j] = new_knot
        energies[j] = e1
        knots = _reparametrize(knots, strength)
        energies = [energy(k, spec, strength).total for k in knots]
    if refined is None and best_state is not None:
        cand = best_state
        if not cand.grid.compatible(solve_grid):
            cand = resample(cand, solve_grid)
        cand = FieldState(
            solve_grid, lam, float(np.real(cand.charge)), np.real(np.asarray(cand.phi))
        )
        try:
            refined, newton_history = newton_refine(cand, spec, strength, config)
        except NewtonError:
            refined = None
            best_state = cand
    final = gauge_fix(refined) if refined is not None else gauge_fix(best_state)
    final = FieldState(
        final.grid, final.lam, float(np.real(final.charge)), np.real(np.asarray(final.phi))
    )
    report = verify(final, spec, strength)
    sigma = report.energy.total
    xi_l = xi(dim, final.lam)
    q = abs(final.charge)
    gate_grad = report.gradient_norm <= config.grad_tol
    gate_poho = abs(report.pohozaev_residual) <= 100 * config.grad_tol * (1 + abs(sigma))
    gate_bdry = abs(report.boundary_residual) <= 100 * config.grad_tol * (
        1 + (strength.alpha + xi_l) * q
    )
    gate_alt = True
    if report.pohozaev_residual_alt is not None:
        gate_alt = (
            abs(report.pohozaev_residual - report.pohozaev_residual_alt) <= 1e-12
        )
    converged = bool(refined is not None and gate_grad and gate_poho and gate_bdry and gate_alt)
    p_regime = None
    if dim == 3:
        p_regime = "2<p<5/2 (classical)" if spec.p_growth < 2.5 else "5/2<=p<3 (weak-solution regime)"
    return SolveResult(
        state=final,
        sigma_estimate=sigma,
        m0_estimate=m0,
        report=report,
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
        p_regime=p_regime,
    )
