"""Signal model of an m-hop amplify-and-forward relay network.

Node groups are indexed 0..m: group 0 holds the sources, groups 1..m-1
the relays and group m the destinations.  ``ChannelSet.links[k]`` is the
channel *into* group ``k + 1``, so ``links[0]`` is the source channel and
``links[m - 1]`` the destination channel.  Relay gains are a list of
complex vectors, one per relay group, ``gains[i - 1]`` holding the
diagonal of the amplification matrix of group ``i``.

Every relay normalizes its received power to one before amplifying, so
the transmit power of relay group ``i`` is ``N_{i+1} * ||a_i||^2``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateError, ValidationError

__all__ = [
    "Topology",
    "ChannelSet",
    "SecondOrderStats",
    "Propagation",
    "GlobalPower",
    "LocalPower",
    "IndividualPower",
    "draw_channels",
    "compute_stats",
    "destination_moments",
    "propagate",
    "diag_embed",
    "vec_of_diag",
    "group_powers",
    "split_budget",
    "equal_power_gains",
]


@dataclass(frozen=True)
class Topology:
    """Hop count, node counts ``N_0..N_m`` and signal/noise variances."""

    node_counts: tuple
    sigma_s2: float = 1.0
    sigma_n2: float = 1.0

    def __post_init__(self):
        counts = tuple(int(n) for n in self.node_counts)
        object.__setattr__(self, "node_counts", counts)
        if len(counts) < 3:
            raise ValidationError("need at least two hops (node_counts of length >= 3)")
        if any(n < 1 for n in counts):
            raise ValidationError(f"all node counts must be >= 1, got {counts}")
        if not (self.sigma_s2 > 0 and self.sigma_n2 > 0):
            raise ValidationError("sigma_s2 and sigma_n2 must be positive")

    @classmethod
    def from_snr_db(cls, node_counts, snr_db, sigma_s2=1.0):
        """Topology whose noise variance gives ``sigma_s2 / sigma_n2 = 10^(snr_db/10)``."""
        return cls(tuple(node_counts), sigma_s2, sigma_s2 * 10.0 ** (-snr_db / 10.0))

    @property
    def m(self):
        return len(self.node_counts) - 1

    @property
    def n_groups(self):
        return self.m - 1

    @property
    def n_sources(self):
        return self.node_counts[0]

    @property
    def n_destinations(self):
        return self.node_counts[-1]

    @property
    def relay_counts(self):
        return self.node_counts[1:-1]

    @property
    def snr(self):
        return self.sigma_s2 / self.sigma_n2

    def with_noise(self, sigma_n2):
        return Topology(self.node_counts, self.sigma_s2, sigma_n2)

    def link_shape(self, k):
        return (self.node_counts[k + 1], self.node_counts[k])


@dataclass(frozen=True)
class ChannelSet:
    """One block-fading realization of every hop."""

    h_s: np.ndarray
    hops: tuple
    h_d: np.ndarray

    @classmethod
    def from_links(cls, links):
        links = [np.asarray(h, dtype=complex) for h in links]
        if len(links) < 2:
            raise ValidationError("need at least two links")
        return cls(links[0], tuple(links[1:-1]), links[-1])

    @property
    def links(self):
        return [self.h_s, *self.hops, self.h_d]

    @property
    def node_counts(self):
        links = self.links
        return (links[0].shape[1],) + tuple(h.shape[0] for h in links)

    def check(self, topology):
        links = self.links
        if len(links) != topology.m:
            raise ValidationError(f"expected {topology.m} links, got {len(links)}")
        for k, h in enumerate(links):
            if h.shape != topology.link_shape(k):
                raise ValidationError(
                    f"link {k} has shape {h.shape}, expected {topology.link_shape(k)}"
                )
            if not np.all(np.isfinite(h)):
                raise ValidationError(f"link {k} has non-finite entries")
        return self


@dataclass(frozen=True)
class SecondOrderStats:
    """Normalizer diagonals, ``E[y_i y_i^H]`` and ``E[y_i s^H]`` per relay group."""

    normalizers: tuple
    ryy: tuple
    rys: tuple
    rx_power: tuple = field(default=())


@dataclass(frozen=True)
class Propagation:
    received: np.ndarray
    relay_outputs: tuple


# -- power constraints -------------------------------------------------------


def group_powers(topology, gains):
    """Transmit power ``N_{i+1} ||a_i||^2`` of every relay group."""
    counts = topology.node_counts
    return np.array([counts[i + 2] * np.vdot(a, a).real for i, a in enumerate(gains)])


@dataclass(frozen=True)
class GlobalPower:
    total: float
    kind = "global"

    def check(self, topology):
        if not self.total > 0:
            raise ValidationError("global power budget must be positive")
        return self

    def initial_gains(self, topology):
        counts = topology.node_counts
        denom = sum(counts[i] * counts[i + 1] for i in range(1, topology.m))
        level = np.sqrt(self.total / denom)
        return [np.full(n, level, dtype=complex) for n in topology.relay_counts]

    def residual(self, topology, gains):
        return abs(group_powers(topology, gains).sum() - self.total) / self.total

    def project(self, topology, gains):
        """Common rescaling onto the total budget."""
        scale = np.sqrt(self.total / group_powers(topology, gains).sum())
        return [scale * np.asarray(a, dtype=complex) for a in gains]

    def to_local(self, topology):
        return LocalPower(tuple(split_budget(self.total, topology, "local")))


@dataclass(frozen=True)
class LocalPower:
    budgets: tuple
    kind = "local"

    def __post_init__(self):
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))

    @property
    def total(self):
        return sum(self.budgets)

    def check(self, topology):
        if len(self.budgets) != topology.n_groups:
            raise ValidationError(
                f"local constraint needs {topology.n_groups} budgets, got {len(self.budgets)}"
            )
        if any(not b > 0 for b in self.budgets):
            raise ValidationError("local power budgets must be positive")
        return self

    def initial_gains(self, topology):
        counts = topology.node_counts
        return [
            np.full(counts[i + 1], np.sqrt(p / (counts[i + 1] * counts[i + 2])), dtype=complex)
            for i, p in enumerate(self.budgets)
        ]

    def residual(self, topology, gains):
        p = group_powers(topology, gains)
        b = np.asarray(self.budgets)
        return float(np.max(np.abs(p - b) / b))

    def project(self, topology, gains):
        p = group_powers(topology, gains)
        return [np.sqrt(b / q) * np.asarray(a, dtype=complex) for a, b, q in zip(gains, self.budgets, p)]


@dataclass(frozen=True)
class IndividualPower:
    budgets: tuple
    kind = "individual"

    def __post_init__(self):
        object.__setattr__(
            self, "budgets", tuple(np.asarray(b, dtype=float).copy() for b in self.budgets)
        )

    @property
    def total(self):
        return float(sum(b.sum() for b in self.budgets))

    def check(self, topology):
        if len(self.budgets) != topology.n_groups:
            raise ValidationError(
                f"individual constraint needs {topology.n_groups} groups, got {len(self.budgets)}"
            )
        for i, (b, n) in enumerate(zip(self.budgets, topology.relay_counts)):
            if b.shape != (n,):
                raise ValidationError(f"group {i + 1}: expected {n} node budgets, got {b.shape}")
            if np.any(~(b > 0)):
                raise ValidationError("individual power budgets must be positive")
        return self

    def initial_gains(self, topology):
        counts = topology.node_counts
        return [np.sqrt(b / counts[i + 2]).astype(complex) for i, b in enumerate(self.budgets)]

    def residual(self, topology, gains):
        counts = topology.node_counts
        worst = 0.0
        for i, (a, b) in enumerate(zip(gains, self.budgets)):
            p = counts[i + 2] * np.abs(a) ** 2
            worst = max(worst, float(np.max(np.abs(p - b) / b)))
        return worst

    def project(self, topology, gains):
        # keeps each coefficient's phase, fixes its magnitude
        counts = topology.node_counts
        out = []
        for i, (a, b) in enumerate(zip(gains, self.budgets)):
            a = np.asarray(a, dtype=complex)
            mag = np.abs(a)
            phase = np.where(mag > 0, a / np.where(mag > 0, mag, 1.0), 1.0)
            out.append(phase * np.sqrt(b / counts[i + 2]))
        return out


def split_budget(total, topology, kind):
    """Split a total relay budget so that every constraint type spends the same power.

    Groups get equal shares; inside a group every node gets an equal share.
    """
    if kind == "global":
        return total
    per_group = [total / topology.n_groups] * topology.n_groups
    if kind == "local":
        return per_group
    if kind == "individual":
        return [np.full(n, p / n) for p, n in zip(per_group, topology.relay_counts)]
    raise ValidationError(f"unknown constraint kind {kind!r}")


def equal_power_gains(topology, total):
    """Equal-power baseline: ``A_i = sqrt(P_{T,i} / (N_i N_{i+1})) I`` with equal group shares."""
    return LocalPower(tuple(split_budget(total, topology, "local"))).initial_gains(topology)


# -- channel draws and statistics --------------------------------------------


def _crandn(rng, shape, var=1.0):
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(topology, seed=None):
    """I.i.d. unit-variance circularly-symmetric complex Gaussian links."""
    rng = np.random.default_rng(seed)
    links = [_crandn(rng, topology.link_shape(k)) for k in range(topology.m)]
    return ChannelSet.from_links(links)


def diag_embed(a):
    return np.diag(np.asarray(a))


def vec_of_diag(a_mat):
    return np.diag(np.asarray(a_mat)).copy()


def _check_gains(topology, gains):
    if len(gains) != topology.n_groups:
        raise ValidationError(f"expected {topology.n_groups} gain vectors, got {len(gains)}")
    out = []
    for i, (a, n) in enumerate(zip(gains, topology.relay_counts)):
        a = np.asarray(a, dtype=complex)
        if a.shape != (n,):
            raise ValidationError(f"gain vector {i + 1} has shape {a.shape}, expected ({n},)")
        out.append(a)
    return out


def compute_stats(topology, channels, gains, normalizers=None):
    """Evaluate the normalizers and relay-output moments group by group.

    With ``normalizers`` given, those fixed diagonals are used instead of
    the ones that would make every relay's received power unity.
    """
    links = channels.links
    gains = _check_gains(topology, gains)
    s2, n2 = topology.sigma_s2, topology.sigma_n2
    f_all, ryy_all, rys_all, px_all = [], [], [], []
    ryy = rys = None
    for i in range(1, topology.m):
        h = links[i - 1]
        if i == 1:
            rxx = s2 * (h @ h.conj().T)
            rxs = s2 * h
        else:
            ha = h * gains[i - 2][None, :]
            rxx = ha @ ryy @ ha.conj().T
            rxs = ha @ rys
        rxx = rxx + n2 * np.eye(h.shape[0])
        px = np.real(np.diag(rxx)).copy()
        if normalizers is None:
            if np.any(px <= 0):
                raise DegenerateError(f"relay group {i} receives zero power")
            f = 1.0 / np.sqrt(px)
        else:
            f = np.asarray(normalizers[i - 1], dtype=float)
        ryy = f[:, None] * rxx * f[None, :]
        ryy = 0.5 * (ryy + ryy.conj().T)
        rys = f[:, None] * rxs
        f_all.append(f)
        ryy_all.append(ryy)
        rys_all.append(rys)
        px_all.append(px)
    return SecondOrderStats(tuple(f_all), tuple(ryy_all), tuple(rys_all), tuple(px_all))


def destination_moments(topology, channels, gains, stats):
    """``E[d d^H]`` and ``E[d s^H]`` at the destinations."""
    ha = channels.h_d * np.asarray(gains[-1])[None, :]
    rdd = ha @ stats.ryy[-1] @ ha.conj().T + topology.sigma_n2 * np.eye(ha.shape[0])
    rds = ha @ stats.rys[-1]
    return 0.5 * (rdd + rdd.conj().T), rds


def propagate(topology, channels, gains, stats, symbols, seed=None):
    """Send source symbols hop by hop; returns the destination signal and relay outputs.

    ``symbols`` is ``(N_0,)`` or ``(N_0, n)`` for ``n`` independent uses of the
    same channel.  Noise of variance ``sigma_n2`` is added at every receiver.
    """
    rng = np.random.default_rng(seed)
    gains = _check_gains(topology, gains)
    s = np.asarray(symbols, dtype=complex)
    squeeze = s.ndim == 1
    if squeeze:
        s = s[:, None]
    if s.shape[0] != topology.n_sources:
        raise ValidationError(f"symbols must have {topology.n_sources} rows, got {s.shape[0]}")
    n2 = topology.sigma_n2
    links = channels.links
    outputs = []
    signal = s
    for i in range(1, topology.m):
        h = links[i - 1]
        x = h @ signal + _crandn(rng, (h.shape[0], s.shape[1]), n2)
        y = stats.normalizers[i - 1][:, None] * x
        outputs.append(y[:, 0] if squeeze else y)
        signal = gains[i - 1][:, None] * y
    d = channels.h_d @ signal + _crandn(rng, (channels.h_d.shape[0], s.shape[1]), n2)
    return Propagation(d[:, 0] if squeeze else d, tuple(outputs))
