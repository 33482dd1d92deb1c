"""Joint MMSE receiver and relay power allocation.

Alternates between the Wiener receiver for fixed relay gains and the
constrained minimizer of the MSE over the gains for a fixed receiver.  For
fixed normalizers the MSE is quadratic in each gain vector,
``a^H phi a - 2 Re(z^H a) + const``, so every gain update is a quadratic
minimization on the budget sphere solved through a Lagrange multiplier.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateError, InfeasibleConstraintError, ValidationError
from .linalg import hermitian_evd, solve_linear
from .network import (
    GlobalPower,
    IndividualPower,
    LocalPower,
    compute_stats,
    destination_moments,
)

__all__ = [
    "PhiZ",
    "MmseDesignResult",
    "wiener_receiver",
    "mse",
    "lagrangian",
    "build_b_matrices",
    "build_phi_z",
    "secular_terms",
    "secular_value",
    "solve_lambda",
    "solve_lambda_global",
    "solve_lambda_local",
    "allocate",
    "allocate_individual",
    "run_mmse",
]

EIG_TRUNCATION = 1e-9


@dataclass(frozen=True)
class PhiZ:
    """Quadratic and linear coefficients of the MSE in each gain vector."""

    phi: tuple
    z: tuple


@dataclass
class MmseDesignResult:
    receiver: np.ndarray
    gains: list
    multipliers: object
    mse_trace: list
    constraint: object
    stats: object = None
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)


def wiener_receiver(topology, channels, gains, stats):
    """``W = E[dd^H]^{-1} E[ds^H]``."""
    rdd, rds = destination_moments(topology, channels, gains, stats)
    return solve_linear(rdd, rds, step="Wiener receiver")


def mse(topology, channels, gains, stats, receiver):
    """Analytic ``E||s - W^H d||^2`` under the given statistics."""
    rdd, rds = destination_moments(topology, channels, gains, stats)
    w = receiver
    val = (
        topology.sigma_s2 * topology.n_sources
        - 2.0 * np.real(np.trace(w.conj().T @ rds))
        + np.real(np.trace(w.conj().T @ rdd @ w))
    )
    return float(val)


def lagrangian(topology, channels, gains, receiver, normalizers, constraint, multipliers):
    """MSE with frozen normalizers plus the multiplier-weighted budget terms."""
    stats = compute_stats(topology, channels, gains, normalizers=normalizers)
    val = mse(topology, channels, gains, stats, receiver)
    counts = topology.node_counts
    if isinstance(constraint, GlobalPower):
        used = sum(counts[i + 2] * np.vdot(a, a).real for i, a in enumerate(gains))
        val += multipliers * (used - constraint.total)
    elif isinstance(constraint, LocalPower):
        for i, a in enumerate(gains):
            val += multipliers[i] * (counts[i + 2] * np.vdot(a, a).real - constraint.budgets[i])
    else:
        for i, a in enumerate(gains):
            val += float(
                np.sum(multipliers[i] * (counts[i + 2] * np.abs(a) ** 2 - constraint.budgets[i]))
            )
    return float(val)


def build_b_matrices(topology, channels, gains, stats):
    """Backward products ``B_i = prod_{k=i+1}^{m-1} H_{k-1,k}^H F_k A_k^H``, ``B_{m-1} = I``."""
    links = channels.links
    m = topology.m
    out = [None] * (m - 1)
    out[m - 2] = np.eye(topology.node_counts[m - 1], dtype=complex)
    for i in range(m - 2, 0, -1):
        # factor k = i + 1: H_{i,i+1}^H F_{i+1} A_{i+1}^H
        k = i + 1
        factor = links[k - 1].conj().T * (stats.normalizers[k - 1] * np.conj(gains[k - 1]))[None, :]
        out[i - 1] = factor @ out[i]
    return out


def build_phi_z(topology, channels, gains, stats, receiver):
    """``phi_i = (B_i H_d^H W W^H H_d B_i^H) o ryy_i^*`` and ``z_i = (B_i H_d^H W o rys_i^*) u``."""
    b = build_b_matrices(topology, channels, gains, stats)
    hw = channels.h_d.conj().T @ receiver
    phis, zs = [], []
    for i in range(topology.n_groups):
        k = b[i] @ hw
        phi = (k @ k.conj().T) * np.conj(stats.ryy[i])
        phi = 0.5 * (phi + phi.conj().T)
        z = np.sum(k * np.conj(stats.rys[i]), axis=1)
        phis.append(phi)
        zs.append(z)
    return PhiZ(tuple(phis), tuple(zs))


def secular_terms(phi, z):
    """Eigenvalues of ``phi`` and the weights ``|q_j^H z|^2`` of the budget equation."""
    evd = hermitian_evd(phi)
    alpha = np.clip(evd.values, 0.0, None)
    top = alpha.max() if alpha.size else 0.0
    alpha = np.where(alpha < EIG_TRUNCATION * top, 0.0, alpha)
    weights = np.abs(evd.vectors.conj().T @ z) ** 2
    return alpha, weights


def secular_value(terms, lam):
    """``g(lam) = sum N (alpha + N lam)^-2 C`` over ``terms = [(alpha, C, N), ...]``."""
    total = 0.0
    for alpha, c, n in terms:
        total += float(np.sum(n * c / (alpha + n * lam) ** 2))
    return total


def solve_lambda(terms, budget, max_iter=2000):
    """Unique root of ``g(lam) = budget`` with ``alpha + N lam > 0`` for every term.

    Bisection runs on the offset ``mu = lam - lam_min`` so that denominators
    near the pole keep full relative precision.
    """
    if not budget > 0:
        raise ValidationError("power budget must be positive")
    if all(np.all(c == 0) for _, c, _ in terms):
        raise InfeasibleConstraintError("all gain gradients vanish; the budget cannot be met")
    pole = min(float(np.min(alpha / n)) for alpha, _, n in terms)
    lam_min = -pole
    shifted = [(np.clip(alpha - n * pole, 0.0, None), c, n) for alpha, c, n in terms]

    def g(mu):
        total = 0.0
        for base, c, n in shifted:
            total += float(np.sum(n * c / (base + n * mu) ** 2))
        return total

    # g near the pole: terms sitting exactly on it blow up only if weighted
    at_pole = sum(
        float(np.sum(np.where(base > 0, n * c / np.where(base > 0, base, 1.0) ** 2, 0.0)))
        for base, c, n in shifted
    )
    on_pole = any(np.any((base == 0) & (c > 0)) for base, c, _ in shifted)
    if not on_pole and at_pole < budget:
        raise DegenerateError("budget equation has no root to the right of its pole")

    hi = 1.0
    scale = max(max(float(np.max(b)) if b.size else 0.0 for b, _, _ in shifted), 1e-300)
    hi = max(hi, scale)
    while g(hi) > budget:
        hi *= 2.0
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    mu = 0.5 * (lo + hi) if lo > 0 else hi
    return lam_min + mu, mu


def solve_lambda_global(phi_z, topology, total):
    counts = topology.node_counts
    terms = [
        (*secular_terms(phi, z), counts[i + 2]) for i, (phi, z) in enumerate(zip(phi_z.phi, phi_z.z))
    ]
    lam, _ = solve_lambda(terms, total)
    return lam


def solve_lambda_local(phi, z, n_next, budget):
    alpha, c = secular_terms(phi, z)
    lam, _ = solve_lambda([(alpha, c, n_next)], budget)
    return lam


def allocate(phi, z, n_next, lam):
    """``a = (phi + N lam I)^-1 z``."""
    n = phi.shape[0]
    return solve_linear(phi + n_next * lam * np.eye(n), z, step="gain allocation")


def allocate_individual(phi, z, budgets, n_next, gains):
    """One Gauss-Seidel sweep of per-node updates under per-node budgets.

    Each coefficient takes the phase of its residual drive
    ``r = z_j - sum_{l != j} phi_jl a_l`` and the magnitude fixed by its budget.
    Returns the new gains and the per-node multipliers.
    """
    a = np.array(gains, dtype=complex, copy=True)
    lams = np.empty(a.size)
    for j in range(a.size):
        r = z[j] - (phi[j] @ a - phi[j, j] * a[j])
        mag = abs(r)
        if mag == 0.0:
            raise InfeasibleConstraintError(f"node {j + 1}: zero drive, phase undefined")
        denom = mag * np.sqrt(n_next / budgets[j])
        lams[j] = (denom - phi[j, j].real) / n_next
        a[j] = r / denom
    return a, lams


def _sweep_global(topology, channels, gains, stats, receiver, constraint):
    # Groups are updated in order; each solves the joint budget equation over
    # itself and the groups still to come, with the power already committed
    # upstream removed from the total.  The last group closes the budget.
    counts = topology.node_counts
    gains = list(gains)
    lams = []
    for i in range(topology.n_groups):
        cur = compute_stats(topology, channels, gains, normalizers=stats.normalizers)
        pz = build_phi_z(topology, channels, gains, cur, receiver)
        committed = sum(counts[k + 2] * np.vdot(gains[k], gains[k]).real for k in range(i))
        terms = [
            (*secular_terms(pz.phi[k], pz.z[k]), counts[k + 2])
            for k in range(i, topology.n_groups)
        ]
        lam, _ = solve_lambda(terms, constraint.total - committed)
        gains[i] = allocate(pz.phi[i], pz.z[i], counts[i + 2], lam)
        lams.append(lam)
    # the last multiplier closes the total budget; all agree at a fixed point
    return gains, lams[-1]


def _sweep_local(topology, channels, gains, stats, receiver, constraint):
    counts = topology.node_counts
    gains = list(gains)
    lams = []
    for i in range(topology.n_groups):
        cur = compute_stats(topology, channels, gains, normalizers=stats.normalizers)
        pz = build_phi_z(topology, channels, gains, cur, receiver)
        lam = solve_lambda_local(pz.phi[i], pz.z[i], counts[i + 2], constraint.budgets[i])
        gains[i] = allocate(pz.phi[i], pz.z[i], counts[i + 2], lam)
        lams.append(lam)
    return gains, lams


def _sweep_individual(topology, channels, gains, stats, receiver, constraint):
    counts = topology.node_counts
    gains = list(gains)
    lams = []
    for i in range(topology.n_groups):
        cur = compute_stats(topology, channels, gains, normalizers=stats.normalizers)
        pz = build_phi_z(topology, channels, gains, cur, receiver)
        gains[i], lam = allocate_individual(
            pz.phi[i], pz.z[i], constraint.budgets[i], counts[i + 2], gains[i]
        )
        lams.append(lam)
    return gains, lams


_SWEEPS = {
    "global": _sweep_global,
    "local": _sweep_local,
    "individual": _sweep_individual,
}


def _evaluate(topology, channels, gains):
    stats = compute_stats(topology, channels, gains)
    receiver = wiener_receiver(topology, channels, gains, stats)
    return stats, receiver, mse(topology, channels, gains, stats, receiver)


def run_mmse(
    topology,
    channels,
    constraint,
    iterations=2,
    initial_gains=None,
    safeguard=True,
    max_backtracks=8,
):
    """Alternating MMSE design.

    Starts from the equal-split gains of the constraint type, then per
    iteration: relay statistics, Wiener receiver, and the constrained gain
    update for every relay group.  ``mse_trace[0]`` is the MSE of the start
    point and ``mse_trace[n]`` the MSE after ``n`` iterations, each with its
    own Wiener receiver.

    The gain updates hold the normalizers fixed, so a full sweep can raise
    the true MSE once the normalizers are refreshed.  With ``safeguard`` on,
    such a sweep is backtracked towards the previous gains (halving the step
    and projecting onto the budget) until the MSE does not increase; if no
    step qualifies the previous gains are kept.  ``steps`` records the
    accepted step per iteration (0 for a rejected sweep).
    """
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    channels.check(topology)
    constraint.check(topology)
    sweep = _SWEEPS[constraint.kind]
    gains = (
        constraint.initial_gains(topology)
        if initial_gains is None
        else [np.asarray(a, dtype=complex) for a in initial_gains]
    )
    stats, receiver, value = _evaluate(topology, channels, gains)
    trace = [value]
    residuals = []
    steps = []
    multipliers = None
    stalled = False
    for _ in range(iterations):
        if stalled:
            # state unchanged, so the sweep would be rejected again
            trace.append(value)
            residuals.append(constraint.residual(topology, gains))
            steps.append(0.0)
            continue
        proposal, multipliers = sweep(topology, channels, gains, stats, receiver, constraint)
        cand = _evaluate(topology, channels, proposal)
        step = 1.0
        if safeguard and cand[2] > value:
            accepted = False
            for _ in range(max_backtracks):
                step *= 0.5
                mixed = [(1 - step) * a + step * b for a, b in zip(gains, proposal)]
                mixed = constraint.project(topology, mixed)
                cand = _evaluate(topology, channels, mixed)
                if cand[2] <= value:
                    proposal = mixed
                    accepted = True
                    break
            if not accepted:
                stalled = True
                step = 0.0
                proposal = gains
                cand = (stats, receiver, value)
        gains = proposal
        stats, receiver, value = cand
        steps.append(step)
        residuals.append(constraint.residual(topology, gains))
        trace.append(value)
    return MmseDesignResult(
        receiver, gains, multipliers, trace, constraint, stats, residuals, steps
    )
