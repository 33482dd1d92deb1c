"""Joint maximum sum-rate receiver and relay gains for a single source.

With one source the end-to-end link is ``d = C_0 s + sum_k C_k v_k + v_d``
where ``C_k`` is the cascade from the noise entry point at group ``k`` to the
destinations.  The sum rate is a generalized Rayleigh quotient in the
receiver ``w`` and, for fixed normalizers, also in each gain vector ``a_i``,
so both updates are dominant generalized eigenvectors.  Every such problem
here has a rank-one numerator.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateError, ValidationError
from .linalg import hermitian_evd, power_method, solve_linear
from .network import LocalPower, compute_stats

__all__ = [
    "Cascade",
    "GroupMatrices",
    "MsrDesignResult",
    "build_cascade",
    "sum_rate",
    "quotient",
    "generalized_dominant",
    "solve_receiver",
    "build_group_matrices",
    "solve_gains",
    "run_msr",
    "SOLVERS",
]

SOLVERS = ("qr", "power")


@dataclass(frozen=True)
class Cascade:
    """Per-hop factors of the end-to-end link and the two quotient matrices.

    ``factors[0] = H_s``; ``factors[i] = H_{i,i+1} A_i F_i`` for relay group
    ``i``, the last one landing on the destinations.  ``phi`` is the signal
    term and ``z`` the noise term (including the destination noise).
    """

    links: tuple
    factors: tuple
    normalizers: tuple
    phi: np.ndarray
    z: np.ndarray

    def product(self, i, j):
        """``C_{i,j} = factors[j] ... factors[i]``; identity of the right size when ``i > j``."""
        if i > j:
            n = self.factors[0].shape[1] if i == 0 else self.factors[i - 1].shape[0]
            return np.eye(n, dtype=complex)
        out = self.factors[i]
        for k in range(i + 1, j + 1):
            out = self.factors[k] @ out
        return out


@dataclass(frozen=True)
class GroupMatrices:
    m: np.ndarray
    p: np.ndarray
    t_quad: float
    n: np.ndarray
    w_scaled: np.ndarray


@dataclass
class MsrDesignResult:
    receiver: np.ndarray
    gains: list
    sr_trace: list
    solver: str
    constraint: object
    stats: object = None
    steps: list = field(default_factory=list)


def _require_single_source(topology):
    if topology.n_sources != 1:
        raise ValidationError(
            f"sum-rate design supports a single source, got N_0={topology.n_sources}"
        )


def build_cascade(topology, channels, gains, stats):
    _require_single_source(topology)
    links = tuple(np.asarray(h, dtype=complex) for h in channels.links)
    m = topology.m
    factors = [links[0]]
    for i in range(1, m):
        f = stats.normalizers[i - 1]
        factors.append(links[i] * (np.asarray(gains[i - 1]) * f)[None, :])
    casc = Cascade(links, tuple(factors), tuple(stats.normalizers), None, None)
    c0 = casc.product(0, m - 1)
    phi = c0 @ c0.conj().T
    z = np.eye(topology.n_destinations, dtype=complex)
    for k in range(1, m):
        ck = casc.product(k, m - 1)
        z = z + ck @ ck.conj().T
    return Cascade(
        links,
        casc.factors,
        casc.normalizers,
        0.5 * (phi + phi.conj().T),
        0.5 * (z + z.conj().T),
    )


def quotient(phi, z, w):
    w = np.asarray(w)
    if not np.any(w):
        raise DegenerateError("quotient undefined for a zero receiver")
    return float(np.vdot(w, phi @ w).real / np.vdot(w, z @ w).real)


def sum_rate(cascade, w, topology):
    """``(1/m) log2(1 + snr * w^H phi w / w^H Z w)`` in bps/Hz."""
    q = quotient(cascade.phi, cascade.z, w)
    return float(np.log2(1.0 + topology.snr * max(q, 0.0)) / topology.m)


def generalized_dominant(num, den, solver="qr", n_iter=None, seed=0):
    """Unit-norm dominant generalized eigenvector of ``(num, den)`` with ``den`` positive definite.

    ``qr`` diagonalizes the Hermitian congruence ``L^-1 num L^-H`` (``den = L L^H``);
    ``power`` iterates on ``den^-1 num`` directly.
    """
    if solver not in SOLVERS:
        raise ValidationError(f"solver must be one of {SOLVERS}, got {solver!r}")
    if solver == "qr":
        try:
            chol = np.linalg.cholesky(den)
        except np.linalg.LinAlgError as exc:
            raise DegenerateError("denominator matrix is not positive definite") from exc
        left = solve_linear(chol, num, step="Cholesky congruence")
        sym = solve_linear(chol, left.conj().T, step="Cholesky congruence").conj().T
        sym = 0.5 * (sym + sym.conj().T)
        v = hermitian_evd(sym, n_q=n_iter or 30).vectors[:, 0]
        vec = solve_linear(chol.conj().T, v, step="Cholesky back-substitution")
    else:
        mat = solve_linear(den, num, step="generalized eigenproblem")
        vec = power_method(mat, n_p=n_iter or 5000, seed=seed).vector
    return vec / np.linalg.norm(vec)


def solve_receiver(cascade, solver="qr", n_iter=None, seed=0):
    """Receiver maximizing ``w^H phi w / w^H Z w``."""
    if not np.any(cascade.phi):
        raise DegenerateError("no signal reaches the destinations")
    return generalized_dominant(cascade.phi, cascade.z, solver, n_iter, seed)


def build_group_matrices(cascade, w, group, topology, budget):
    """Gain-side form of the quotient for relay group ``group`` (1-based).

    For fixed normalizers
    ``w^H phi w / w^H Z w = a^H M a / (a^H P a + w^H T w)``, and on the budget
    sphere the receiver can be rescaled to ``w^H T w = 1`` which turns the
    denominator into ``a^H N a`` with ``N = P + (N_{i+1}/P_{T,i}) I``.
    """
    m = topology.m
    i = group
    w = np.asarray(w, dtype=complex)
    t = np.zeros_like(cascade.z)
    for k in range(i + 1, m + 1):
        ck = cascade.product(k, m - 1)
        t = t + ck @ ck.conj().T
    t_quad = float(np.vdot(w, t @ w).real)
    if not t_quad > 0:
        raise DegenerateError(f"group {i}: receiver sees no downstream noise")
    w_i = w / np.sqrt(t_quad)

    f = cascade.normalizers[i - 1]
    # row r = w_i^H C_{i+1,m-1} H_{i,i+1}; the signal at group i's output is f * C_{0,i-1}
    r = (w_i.conj() @ cascade.product(i + 1, m - 1)) @ cascade.links[i]
    u = r * (f * cascade.product(0, i - 1)[:, 0])
    mm = np.outer(u.conj(), u)
    noise = np.zeros((f.size, f.size), dtype=complex)
    for k in range(1, i + 1):
        ck = cascade.product(k, i - 1)
        noise = noise + ck @ ck.conj().T
    core = np.conj(f[:, None] * noise * f[None, :])
    p = r.conj()[:, None] * core * r[None, :]
    p = 0.5 * (p + p.conj().T)
    n = p + (topology.node_counts[i + 1] / budget) * np.eye(f.size)
    return GroupMatrices(mm, p, t_quad, n, w_i)


def solve_gains(mats, budget, n_next, solver="qr", n_iter=None, seed=0):
    """Dominant generalized eigenvector of ``(M_i, N_i)`` scaled to ``N_{i+1} a^H a = P_{T,i}``."""
    if not np.any(mats.m):
        raise DegenerateError("relay group carries no useful signal")
    a = generalized_dominant(mats.m, mats.n, solver, n_iter, seed)
    return a * np.sqrt(budget / n_next)


def _evaluate(topology, channels, gains, solver, n_iter, seed):
    stats = compute_stats(topology, channels, gains)
    casc = build_cascade(topology, channels, gains, stats)
    w = solve_receiver(casc, solver, n_iter, seed)
    return stats, casc, w, sum_rate(casc, w, topology)


def _sweep(topology, channels, gains, stats, w, constraint, solver, n_iter, seed):
    counts = topology.node_counts
    gains = list(gains)
    for i in range(1, topology.m):
        casc = build_cascade(topology, channels, gains, stats)
        mats = build_group_matrices(casc, w, i, topology, constraint.budgets[i - 1])
        a = solve_gains(mats, constraint.budgets[i - 1], counts[i + 1], solver, n_iter, seed)
        # the quotient ignores a common phase; pick the one closest to the old gains
        overlap = np.vdot(a, gains[i - 1])
        if abs(overlap) > 0:
            a = a * (overlap / abs(overlap))
        gains[i - 1] = a
    return gains


def run_msr(
    topology,
    channels,
    constraint,
    iterations=2,
    solver="qr",
    n_iter=None,
    seed=0,
    initial_gains=None,
    safeguard=True,
    max_backtracks=8,
):
    """Alternating sum-rate design under per-group budgets.

    Each iteration fixes the receiver and the normalizers and updates the
    relay groups in order, then refreshes the statistics and the receiver.
    ``sr_trace[0]`` is the sum rate of the equal-gain start and
    ``sr_trace[n]`` that after ``n`` iterations.  The safeguard mirrors the
    MMSE driver: a sweep that lowers the true sum rate is backtracked towards
    the previous gains and dropped if no step helps.
    """
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    if not isinstance(constraint, LocalPower):
        raise ValidationError("sum-rate design supports per-group (local) budgets only")
    _require_single_source(topology)
    channels.check(topology)
    constraint.check(topology)
    gains = (
        constraint.initial_gains(topology)
        if initial_gains is None
        else [np.asarray(a, dtype=complex) for a in initial_gains]
    )
    stats, _, w, value = _evaluate(topology, channels, gains, solver, n_iter, seed)
    trace = [value]
    steps = []
    stalled = False
    for _ in range(iterations):
        if stalled:
            trace.append(value)
            steps.append(0.0)
            continue
        proposal = _sweep(topology, channels, gains, stats, w, constraint, solver, n_iter, seed)
        cand = _evaluate(topology, channels, proposal, solver, n_iter, seed)
        step = 1.0
        if safeguard and cand[3] < value:
            accepted = False
            for _ in range(max_backtracks):
                step *= 0.5
                mixed = [(1 - step) * a + step * b for a, b in zip(gains, proposal)]
                mixed = constraint.project(topology, mixed)
                cand = _evaluate(topology, channels, mixed, solver, n_iter, seed)
                if cand[3] >= value:
                    proposal = mixed
                    accepted = True
                    break
            if not accepted:
                stalled = True
                step = 0.0
                proposal = gains
                cand = (stats, None, w, value)
        gains = proposal
        stats, _, w, value = cand
        steps.append(step)
        trace.append(value)
    return MsrDesignResult(w, gains, trace, solver, constraint, stats, steps)
