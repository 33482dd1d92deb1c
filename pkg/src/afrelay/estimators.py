"""scikit-learn style front end to the relay designs.

``fit`` takes one channel realization (a :class:`~afrelay.network.ChannelSet`
or the list of link matrices, source link first) and designs the receiver
and relay gains for it.  ``transform`` applies the fitted receiver to
received samples laid out as rows, ``predict`` returns hard QPSK bit
decisions and ``score`` the design's own figure of merit (higher is better).
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _validation as v
from .mmse import mse, run_mmse, wiener_receiver
from .msr import SOLVERS, build_cascade, run_msr, solve_receiver, sum_rate
from .network import compute_stats, equal_power_gains
from .sim import make_constraint, qpsk_demodulate

__all__ = ["MMSERelayDesign", "MSRRelayDesign", "EqualPowerDesign"]

CONSTRAINTS = ("global", "local", "individual")


class _RelayDesignBase(TransformerMixin, BaseEstimator):
    def _setup(self, X):
        v.check_positive(self.total_power, "total_power")
        self.topology_ = v.check_topology(self.node_counts, self.snr_db)
        self.channels_ = v.check_channels(X, self.topology_)

    def _apply(self, X):
        check_is_fitted(self, "gains_")
        d = v.check_received(X, self.topology_.n_destinations)
        w = np.asarray(self.receiver_)
        if w.ndim == 1:
            w = w[:, None]
        return d @ w.conj()

    def transform(self, X):
        """Receiver output ``W^H d`` per row of ``X``; shape ``(n_samples, N_0)``."""
        return self._apply(X)

    def predict(self, X):
        """Hard QPSK decisions, two bits per source symbol per row."""
        est = self._apply(X)
        return qpsk_demodulate(est.ravel()).reshape(est.shape[0], -1)

    @property
    def relay_powers_(self):
        check_is_fitted(self, "gains_")
        counts = self.topology_.node_counts
        return np.array([counts[i + 2] * np.vdot(a, a).real for i, a in enumerate(self.gains_)])


class MMSERelayDesign(_RelayDesignBase):
    """Joint Wiener receiver and relay gains minimizing the mean-square error.

    Parameters
    ----------
    node_counts : tuple of int
        ``(N_0, N_1, ..., N_m)``.
    snr_db : float
        ``10 log10(sigma_s^2 / sigma_n^2)``.
    constraint : {"global", "local", "individual"}
        Budget granularity; all three spend ``total_power`` in total.
    total_power : float
    iterations : int
    safeguard : bool
        Backtrack sweeps that would raise the MSE.
    """

    def __init__(
        self,
        node_counts=(1, 4, 4, 2),
        snr_db=10.0,
        constraint="global",
        total_power=8.0,
        iterations=2,
        safeguard=True,
    ):
        self.node_counts = node_counts
        self.snr_db = snr_db
        self.constraint = constraint
        self.total_power = total_power
        self.iterations = iterations
        self.safeguard = safeguard

    def fit(self, X, y=None):
        v.check_choice(self.constraint, "constraint", CONSTRAINTS)
        v.check_count(self.iterations, "iterations")
        self._setup(X)
        cons = make_constraint(self.constraint, self.topology_, self.total_power)
        res = run_mmse(
            self.topology_, self.channels_, cons, iterations=self.iterations, safeguard=self.safeguard
        )
        self.constraint_ = cons
        self.receiver_ = res.receiver
        self.gains_ = res.gains
        self.multipliers_ = res.multipliers
        self.mse_trace_ = list(res.mse_trace)
        self.stats_ = res.stats
        return self

    def score(self, X=None, y=None):
        """Negative analytic MSE of the fitted design."""
        check_is_fitted(self, "gains_")
        return -self.mse_trace_[-1]


class MSRRelayDesign(_RelayDesignBase):
    """Joint receiver and relay gains maximizing the sum rate, per-group budgets."""

    def __init__(
        self,
        node_counts=(1, 4, 4, 2),
        snr_db=10.0,
        total_power=8.0,
        iterations=2,
        solver="qr",
        safeguard=True,
    ):
        self.node_counts = node_counts
        self.snr_db = snr_db
        self.total_power = total_power
        self.iterations = iterations
        self.solver = solver
        self.safeguard = safeguard

    def fit(self, X, y=None):
        v.check_choice(self.solver, "solver", SOLVERS)
        v.check_count(self.iterations, "iterations")
        self._setup(X)
        cons = make_constraint("local", self.topology_, self.total_power)
        res = run_msr(
            self.topology_,
            self.channels_,
            cons,
            iterations=self.iterations,
            solver=self.solver,
            safeguard=self.safeguard,
        )
        self.constraint_ = cons
        self.receiver_ = res.receiver
        self.gains_ = res.gains
        self.sr_trace_ = list(res.sr_trace)
        self.stats_ = res.stats
        return self

    def score(self, X=None, y=None):
        """Sum rate in bps/Hz."""
        check_is_fitted(self, "gains_")
        return self.sr_trace_[-1]


class EqualPowerDesign(_RelayDesignBase):
    """Fixed equal gains; ``receiver`` picks the Wiener or the rate-optimal receiver."""

    def __init__(self, node_counts=(1, 4, 4, 2), snr_db=10.0, total_power=8.0, receiver="mmse"):
        self.node_counts = node_counts
        self.snr_db = snr_db
        self.total_power = total_power
        self.receiver = receiver

    def fit(self, X, y=None):
        v.check_choice(self.receiver, "receiver", ("mmse", "msr"))
        self._setup(X)
        top, ch = self.topology_, self.channels_
        self.gains_ = equal_power_gains(top, self.total_power)
        self.stats_ = compute_stats(top, ch, self.gains_)
        if self.receiver == "mmse":
            self.receiver_ = wiener_receiver(top, ch, self.gains_, self.stats_)
            self.mse_ = mse(top, ch, self.gains_, self.stats_, self.receiver_)
        else:
            casc = build_cascade(top, ch, self.gains_, self.stats_)
            self.receiver_ = solve_receiver(casc)
            self.sum_rate_ = sum_rate(casc, self.receiver_, top)
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "gains_")
        return -self.mse_ if self.receiver == "mmse" else self.sum_rate_
