"""Active-set solvers for the mixed contact problem.

Small deformation: an outer loop alternates sparse saddle-point solves
(gap pinned to zero on the active multiplier dofs) with activity
updates until the set is stable and complementarity holds.  Large
deformation: load stepping with Newton iterations on the combined
residual, the active set updated after every Newton solve.

TODO: optional iterative Schur-complement path for larger 3D runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import GlobalSystem, apply_constraints, assemble_load, neo_hookean_forces
from .contact import ContactState, active_set_update
from .materials import ElementInversionError, NeoHookeanMaterial


class SolverError(RuntimeError):
    """Linear-solve failure, cycling, or iteration-cap overrun."""


@dataclass(frozen=True)
class SolveSettings:
    max_active_set_iters: int = 60
    max_newton_iters: int = 40
    newton_tol: float = 1e-10
    gap_tol: float = 1e-10
    linear_solver: str = "direct"

    def __post_init__(self):
        if self.max_active_set_iters < 1 or self.max_newton_iters < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.newton_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.linear_solver != "direct":
            raise ValueError("only the direct linear solver is implemented")


@dataclass(frozen=True)
class IterationRecord:
    step: int
    iteration: int
    n_active: int
    residual_u: float
    residual_lam: float
    changed: int


@dataclass
class SolutionBundle:
    """Converged displacement/multiplier pair with the iteration history."""

    u: np.ndarray
    lam: np.ndarray
    active: np.ndarray
    weighted_gap: np.ndarray
    measures: np.ndarray
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def state(self) -> ContactState:
        return ContactState(
            lam=self.lam, weighted_gap=self.weighted_gap, active=self.active, measures=self.measures
        )

    def log_text(self) -> str:
        lines = ["step iter n_active residual_u residual_lam changed_K"]
        for r in self.iterations:
            lines.append(
                f"{r.step} {r.iteration} {r.n_active} {r.residual_u:.6e} "
                f"{r.residual_lam:.6e} {r.changed}"
            )
        return "\n".join(lines) + "\n"


def saddle_solve(K: sp.spmatrix, F: np.ndarray, B_active: sp.spmatrix, g=None):
    """Direct solve of ``[[K, B^T], [B, 0]] [u, lam] = [F, g]``.

    With no active rows this reduces to ``K u = F``.  The factorization
    residual is checked against the right-hand side.
    """
    n = F.size
    nK = B_active.shape[0]
    if nK == 0:
        mat = sp.csc_matrix(K)
        rhs = F
    else:
        mat = sp.bmat([[K, B_active.T], [B_active, None]], format="csc")
        rhs = np.concatenate([F, np.zeros(nK) if g is None else np.asarray(g, dtype=float)])
    try:
        lu = spla.splu(mat)
        x = lu.solve(rhs)
    except RuntimeError as exc:
        raise SolverError(_diagnose_saddle_failure(K, B_active, exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolverError(_diagnose_saddle_failure(K, B_active, "non-finite solution"))
    rhs_norm = np.linalg.norm(rhs)
    res = np.linalg.norm(mat @ x - rhs)
    # numerically singular factorizations leave O(1) relative residuals
    if res > 1e-4 * max(rhs_norm, 1e-300):
        raise SolverError(f"saddle solve residual {res:.3e} exceeds 1e-4 * |rhs|")
    return x[:n], x[n:]


def _diagnose_saddle_failure(K, B_active, exc) -> str:
    nK = B_active.shape[0]
    if nK:
        Bd = np.asarray(B_active.todense())
        rank = np.linalg.matrix_rank(Bd) if min(Bd.shape) else 0
        if rank < nK:
            sv = sla.svdvals(Bd)
            bad = int(nK - rank)
            return (
                f"rank-deficient active coupling block: rank {rank} < {nK} rows "
                f"({bad} dependent active dofs, smallest singular values {sv[-bad:]})"
            )
    return f"singular stiffness block: constraint deficiency ({exc})"


def complementarity_ok(state: ContactState, gap_tol: float, pressure_scale: float = 1.0) -> bool:
    """Discrete complementarity: feasible signs and vanishing products."""
    lam, wg = state.lam, state.weighted_gap
    if np.any(lam > 1e-10 * pressure_scale):
        return False
    inactive = ~state.active
    if np.any(wg[inactive] < -max(1e-8, 100 * gap_tol)):
        return False
    floor = 1e-14 * pressure_scale
    bound = 1e-8 * (np.abs(lam).max() * np.abs(wg).max() + floor)
    return bool(np.abs(lam * wg).max() <= max(bound, floor))


@dataclass(frozen=True)
class SmallDeformationProblem:
    """Assembled data of one linear contact solve.

    ``initial_active`` optionally seeds the active set (a warm start);
    the loop still iterates to the same optimality conditions.
    """

    system: GlobalSystem
    coupling: sp.csr_matrix
    gap_integrals: np.ndarray  # integral(B_K g0)
    measures: np.ndarray
    initial_active: np.ndarray | None = None


def _masked_coupling(coupling: sp.csr_matrix, fixed: np.ndarray, n: int) -> sp.csr_matrix:
    if fixed.size == 0:
        return coupling
    free = np.ones(n)
    free[fixed] = 0.0
    return (coupling @ sp.diags(free)).tocsr()


def _initial_active(wg0: np.ndarray, gap_tol: float) -> np.ndarray:
    active = wg0 <= gap_tol
    return active


def solve_small_deformation(
    problem: SmallDeformationProblem, settings: SolveSettings = SolveSettings()
) -> SolutionBundle:
    """Outer active-set loop around linear saddle-point solves."""
    system = problem.system
    K, F = apply_constraints(system.stiffness, system.load, system.constraints)
    n = F.size
    fixed = np.fromiter(system.constraints.keys(), dtype=np.int64) if system.constraints else np.empty(0, np.int64)
    u_fix = np.zeros(n)
    for d, v in system.constraints.items():
        u_fix[d] = v
    B = problem.coupling
    Bhat = _masked_coupling(B, fixed, n)
    gap_shift = B @ u_fix
    g_rhs = -(problem.gap_integrals + gap_shift)
    measures = problem.measures
    wg0 = (problem.gap_integrals + gap_shift) / measures
    gap_tol = settings.gap_tol

    if problem.initial_active is not None:
        active = problem.initial_active.copy()
    else:
        active = _initial_active(wg0, gap_tol)
    lam = np.zeros(B.shape[0])
    records: list[IterationRecord] = []
    seen: dict[bytes, int] = {}
    seeded = False
    it = 0
    while it < settings.max_active_set_iters:
        it += 1
        act_idx = np.flatnonzero(active)
        try:
            u, lam_act = saddle_solve(K, F, Bhat[act_idx], g_rhs[act_idx])
        except SolverError:
            if act_idx.size == 0 and not seeded:
                # tangent-plane start: every weighted gap is positive but the
                # stiffness alone is singular; seed the closest dof
                active[int(np.argmin(wg0))] = True
                seeded = True
                continue
            raise
        lam = np.zeros(B.shape[0])
        lam[act_idx] = lam_act
        wg = (problem.gap_integrals + B @ u) / measures
        state = ContactState(lam=lam, weighted_gap=wg, active=active, measures=measures)
        new_state, changed = active_set_update(state, gap_tol)
        res_u = np.linalg.norm(K @ u + Bhat.T @ lam - F)
        res_lam = np.abs(wg[act_idx] * measures[act_idx]).max() if act_idx.size else 0.0
        records.append(
            IterationRecord(
                step=0,
                iteration=it,
                n_active=int(active.sum()),
                residual_u=res_u,
                residual_lam=res_lam,
                changed=changed,
            )
        )
        if changed == 0 and complementarity_ok(new_state, gap_tol):
            return SolutionBundle(
                u=u,
                lam=new_state.lam,
                active=new_state.active,
                weighted_gap=wg,
                measures=measures,
                iterations=records,
                converged=True,
            )
        key = new_state.active.tobytes()
        if key in seen and changed:
            # cycling: keep the larger of the repeating sets, tighten the gap test
            if new_state.active.sum() < active.sum():
                new_active = active
            else:
                new_active = new_state.active
            gap_tol = gap_tol / 10.0
            seen.clear()
            active = new_active.copy()
        else:
            seen[key] = it
            active = new_state.active.copy()
        lam = new_state.lam
    raise SolverError(f"active-set loop did not converge in {settings.max_active_set_iters} iterations")


@dataclass(frozen=True)
class LargeDeformationProblem:
    """Data of a finite-deformation contact run (dead loads, fixed plane normal).

    ``initial_active`` optionally seeds the first load step; later steps
    continue from the previous converged set.
    """

    patch: object
    material: NeoHookeanMaterial
    tractions: dict[int, np.ndarray]
    constraints: dict[int, float]  # values at full load
    coupling: sp.csr_matrix
    gap_integrals: np.ndarray
    measures: np.ndarray
    n_gauss: int | None = None
    initial_active: np.ndarray | None = None
    # optional load-factor-aware activity hint: called with t in (0, 1], returns
    # a mask of dofs expected active; united with the running set before a step
    active_hint: object | None = None


def solve_large_deformation(
    problem: LargeDeformationProblem,
    settings: SolveSettings = SolveSettings(),
    n_steps: int = 10,
) -> SolutionBundle:
    """Incremental loading with Newton iterations and embedded activity updates.

    Both tractions and prescribed displacements are scaled by the load
    factor.  Element inversion inside a step triggers step halving (up
    to 20 halvings).
    """
    patch = problem.patch
    nd = patch.ndim
    n = patch.space.dim * nd
    F_full = assemble_load(patch, problem.tractions, n_gauss=problem.n_gauss)
    fixed = (
        np.fromiter(problem.constraints.keys(), dtype=np.int64)
        if problem.constraints
        else np.empty(0, np.int64)
    )
    vals_full = np.array([problem.constraints[d] for d in fixed], dtype=float)
    B = problem.coupling
    Bhat = _masked_coupling(B, fixed, n)
    measures = problem.measures
    gap_tol = settings.gap_tol

    u = np.zeros(n)
    lam = np.zeros(B.shape[0])
    wg0 = problem.gap_integrals / measures
    if problem.initial_active is not None and problem.initial_active.any():
        active = problem.initial_active.copy()
    else:
        active = _initial_active(wg0, gap_tol)
        if not active.any():
            active[int(np.argmin(wg0))] = True

    records: list[IterationRecord] = []
    bundle_state = None
    t = 0.0
    dt_base = 1.0 / n_steps
    dt = dt_base
    halvings = 0
    step = 0
    while t < 1.0 - 1e-12:
        t_try = min(t + dt, 1.0)
        step += 1
        if problem.active_hint is not None:
            active = active | problem.active_hint(t_try)
        try:
            u_new, lam, active, wg, recs = _newton_contact_step(
                problem, settings, u, lam, active, Bhat, F_full * t_try, fixed,
                vals_full * t_try, gap_tol, step,
            )
        except (ElementInversionError, SolverError):
            halvings += 1
            if halvings > 20:
                raise SolverError("load step halved more than 20 times without progress")
            dt *= 0.5
            step -= 1
            continue
        records.extend(recs)
        u = u_new
        t = t_try
        halvings = 0
        dt = min(2.0 * dt, dt_base)  # recover after halvings
        bundle_state = (u, lam, active, wg)
    if bundle_state is None:
        raise SolverError("no load step executed")
    u, lam, active, wg = bundle_state
    return SolutionBundle(
        u=u,
        lam=lam,
        active=active,
        weighted_gap=wg,
        measures=measures,
        iterations=records,
        converged=True,
    )


def _newton_contact_step(
    problem, settings, u0, lam0, active0, Bhat, F_t, fixed, vals_t, gap_tol, step
):
    patch = problem.patch
    B = problem.coupling
    measures = problem.measures
    n = u0.size
    u = u0.copy()
    # prescribed increments enter through the first tangent solve so the free
    # dofs follow along; jumping u[fixed] directly inverts elements next to
    # the constrained faces
    dv = np.zeros(n)
    dv[fixed] = vals_t - u[fixed]
    lam = lam0.copy()
    active = active0.copy()
    zero_fix = {int(d): 0.0 for d in fixed}
    records: list[IterationRecord] = []
    seeded = False
    seen: dict[bytes, int] = {}
    first_res = None
    for it in range(1, settings.max_newton_iters + 1):
        f_int, K_T = neo_hookean_forces(patch, problem.material, u, problem.n_gauss)
        lam = np.where(active, lam, 0.0)
        r_u = f_int + B.T @ lam - F_t
        r_u_hat = r_u.copy()
        r_u_hat[fixed] = 0.0
        wg = (problem.gap_integrals + B @ u) / measures
        state = ContactState(lam=lam, weighted_gap=wg, active=active, measures=measures)
        new_state, changed = active_set_update(state, gap_tol)
        cur_idx = np.flatnonzero(active)
        ref = max(np.linalg.norm(F_t), np.linalg.norm(f_int), 1e-30)
        res_u = np.linalg.norm(r_u_hat)
        res_lam = (
            np.linalg.norm(wg[cur_idx] * measures[cur_idx]) if cur_idx.size else 0.0
        )
        records.append(
            IterationRecord(
                step=step,
                iteration=it,
                n_active=int(active.sum()),
                residual_u=res_u,
                residual_lam=res_lam,
                changed=changed,
            )
        )
        pending = bool(np.abs(dv).max() > 0.0) if dv.size else False
        if not pending and changed == 0 and res_u <= settings.newton_tol * ref and complementarity_ok(
            new_state, gap_tol
        ):
            return u, new_state.lam, new_state.active, wg, records
        if first_res is None and res_u > 0.0:
            first_res = res_u
        if it > 6 and first_res is not None and res_u > 1e3 * first_res:
            raise SolverError("Newton residual diverged")
        if it == 1 and (pending or res_u > settings.newton_tol * ref):
            # trust the inherited/seeded set for the first solve of a loaded
            # step; the not-yet-displaced state would deactivate everything
            new_state = state
            changed = 0
        if changed:
            key = new_state.active.tobytes()
            if key in seen:
                # activity chatter: keep the larger of the repeating sets and
                # tighten the gap test, as in the linear active-set loop
                if new_state.active.sum() < active.sum():
                    keep = active.copy()
                    lam_keep = lam.copy()
                else:
                    keep = new_state.active.copy()
                    lam_keep = new_state.lam.copy()
                gap_tol = gap_tol / 10.0
                seen.clear()
                new_state = ContactState(
                    lam=lam_keep, weighted_gap=wg, active=keep, measures=measures
                )
            else:
                seen[key] = it
        active = new_state.active.copy()
        lam = new_state.lam.copy()
        act_idx = np.flatnonzero(active)
        r_lam = wg[act_idx] * measures[act_idx]
        if not pending and res_u == 0.0 and r_lam.size == 0:
            continue  # exact equilibrium, only activity bookkeeping changed
        Kc, _ = apply_constraints(K_T, np.zeros(n), zero_fix)

        def _rhs(idx):
            rhs_u = -r_u_hat.copy()
            rhs_l = -(wg[idx] * measures[idx])
            if pending:
                rhs_u -= K_T @ dv
                rhs_u[fixed] = dv[fixed]
                rhs_l -= (B @ dv)[idx]
            return rhs_u, rhs_l

        try:
            rhs_u, rhs_l = _rhs(act_idx)
            du, dlam = saddle_solve(Kc, rhs_u, Bhat[act_idx], rhs_l)
        except SolverError:
            if act_idx.size or seeded:
                raise
            # stiffness alone is singular: re-seed the closest multiplier dof
            seeded = True
            active[int(np.argmin(wg))] = True
            act_idx = np.flatnonzero(active)
            rhs_u, rhs_l = _rhs(act_idx)
            du, dlam = saddle_solve(Kc, rhs_u, Bhat[act_idx], rhs_l)
        u = u + du
        lam[act_idx] += dlam
        dv[:] = 0.0
    raise SolverError(f"Newton did not converge in {settings.max_newton_iters} iterations")


def inf_sup_estimate(coupling_scalar, mass_primal, mass_multiplier) -> float:
    """Discrete stability constant of a trace/multiplier pairing.

    Computes the square root of the smallest nonzero eigenvalue of the
    Gram-normalized Schur operator; both norms are L2 on the contact
    boundary.  Identical spaces give exactly 1.
    """
    B = np.asarray(coupling_scalar, dtype=float)
    Mp = np.asarray(mass_primal, dtype=float)
    Mm = np.asarray(mass_multiplier, dtype=float)
    try:
        S = B @ sla.solve(Mp, B.T, assume_a="pos")
        vals = sla.eigh(0.5 * (S + S.T), Mm, eigvals_only=True)
    except (sla.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"singular Gram matrix in stability estimate: {exc}") from exc
    cutoff = 1e-12 * max(vals.max(), 1e-300)
    positive = vals[vals > cutoff]
    if positive.size == 0:
        raise SolverError("no nonzero eigenvalues: coupling has empty range")
    return float(np.sqrt(positive.min()))
