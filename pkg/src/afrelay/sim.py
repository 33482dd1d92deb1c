"""Monte-Carlo link simulation: QPSK packets over block-fading relay chains.

Every packet draws a fresh channel set shared by all designs at that SNR
point (common random numbers), designs the relays, optionally corrupts the
fed-back gains, and pushes a packet of QPSK symbols through the network.
Seeds are derived from ``(seed, snr index, packet, purpose)`` so results do
not depend on worker count or scheduling.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc
from scipy.stats import binomtest

from .exceptions import AfRelayError, ValidationError
from .mmse import run_mmse, wiener_receiver
from .msr import build_cascade, run_msr, solve_receiver, sum_rate
from .network import (
    GlobalPower,
    IndividualPower,
    LocalPower,
    Topology,
    compute_stats,
    draw_channels,
    equal_power_gains,
    group_powers,
    propagate,
    split_budget,
)

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "BerRow",
    "SumRateRow",
    "qpsk_modulate",
    "qpsk_demodulate",
    "quantize_feedback",
    "make_constraint",
    "wilson_interval",
    "qpsk_awgn_ber",
    "simulate_awgn_qpsk",
    "run_ber_sweep",
    "run_sumrate_sweep",
    "BER_DESIGNS",
    "SR_DESIGNS",
]

BER_DESIGNS = ("global", "local", "individual", "equal")
SR_DESIGNS = ("msr", "equal")
MAX_REDRAWS = 10

_SQRT_HALF = np.sqrt(0.5)

# purpose tags for seed derivation
_CHANNEL, _BITS, _NOISE, _FEEDBACK = 0, 1, 2, 3


# -- modulation ---------------------------------------------------------------


def qpsk_modulate(bits):
    """Gray-mapped unit-energy QPSK: bit pair ``(b0, b1) -> ((1-2 b0) + j (1-2 b1)) / sqrt 2``."""
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size % 2:
        raise ValidationError(f"need an even number of bits, got {bits.size}")
    pairs = bits.reshape(-1, 2).astype(float)
    return _SQRT_HALF * ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1]))


def qpsk_demodulate(symbols):
    """Sign decisions on the real and imaginary parts."""
    s = np.asarray(symbols).ravel()
    out = np.empty(2 * s.size, dtype=np.int8)
    out[0::2] = s.real < 0
    out[1::2] = s.imag < 0
    return out


# -- feedback -----------------------------------------------------------------


def _quantize_part(x, span, bits):
    levels = 2**bits
    step = 2.0 * span / levels
    idx = np.clip(np.floor((x + span) / step), 0, levels - 1).astype(np.int64)
    return idx, step


def quantize_feedback(gains, bits_real=4, bits_imag=4, pe=0.0, seed=None):
    """Quantize every gain and send its bits over a binary symmetric channel.

    Real and imaginary parts use a uniform mid-rise quantizer over
    ``[-R, R]`` with ``R`` the largest gain magnitude of the group.  Each bit
    flips when its uniform draw falls below ``pe``, so the flips for a
    smaller ``pe`` are a subset of those for a larger one under one seed.
    """
    if bits_real < 1 or bits_imag < 1:
        raise ValidationError("quantizer needs at least one bit per part")
    if not 0.0 <= pe <= 0.5:
        raise ValidationError(f"pe must lie in [0, 0.5], got {pe}")
    rng = np.random.default_rng(seed)
    out = []
    for a in gains:
        a = np.asarray(a, dtype=complex)
        span = float(np.max(np.abs(a))) if a.size else 0.0
        if span == 0.0:
            out.append(a.copy())
            continue
        parts = []
        for x, bits in ((a.real, bits_real), (a.imag, bits_imag)):
            idx, step = _quantize_part(x, span, bits)
            weights = 1 << np.arange(bits - 1, -1, -1)
            word = (idx[:, None] & weights[None, :]) > 0
            flips = rng.random(word.shape) < pe
            idx = ((word ^ flips) * weights[None, :]).sum(axis=1)
            parts.append(-span + (idx + 0.5) * step)
        out.append(parts[0] + 1j * parts[1])
    return out


# -- statistics helpers -------------------------------------------------------


def wilson_interval(errors, trials, level=0.95):
    if trials == 0:
        return (0.0, 1.0)
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def qpsk_awgn_ber(ebn0_db):
    """``Q(sqrt(2 Eb/N0))``."""
    ebn0 = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    return 0.5 * erfc(np.sqrt(ebn0))


def simulate_awgn_qpsk(ebn0_db, n_bits, seed=0):
    """Bit errors of QPSK over a direct AWGN link; returns ``(errors, n_bits)``."""
    if n_bits % 2:
        raise ValidationError("n_bits must be even")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, n_bits, dtype=np.int8)
    s = qpsk_modulate(bits)
    n0 = 1.0 / (2.0 * 10.0 ** (ebn0_db / 10.0))
    noise = np.sqrt(n0 / 2) * (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size))
    errors = int(np.count_nonzero(qpsk_demodulate(s + noise) != bits))
    return errors, n_bits


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Experiment description shared by the BER and sum-rate sweeps.

    ``total_power`` is the relay budget shared by every design; local and
    individual budgets split it equally over groups and then nodes.
    """

    node_counts: tuple = (1, 4, 4, 2)
    total_power: float = 8.0
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    packets: int = 200
    symbols: int = 1500
    designs: tuple = BER_DESIGNS
    iterations: int = 2
    solver: str = "qr"
    feedback: str = "perfect"
    pe: float = 1e-3
    bits_real: int = 4
    bits_imag: int = 4
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "node_counts", tuple(int(n) for n in self.node_counts))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "designs", tuple(self.designs))
        Topology(self.node_counts)
        if not self.total_power > 0:
            raise ValidationError("total_power must be positive")
        if self.symbols < 1 or self.packets < 1:
            raise ValidationError("symbols and packets must be >= 1")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.feedback not in ("perfect", "bsc"):
            raise ValidationError(f"feedback must be 'perfect' or 'bsc', got {self.feedback!r}")
        if not 0.0 <= self.pe <= 0.5:
            raise ValidationError(f"pe must lie in [0, 0.5], got {self.pe}")
        if self.bits_real < 1 or self.bits_imag < 1:
            raise ValidationError("quantizer bit depths must be >= 1")
        if self.solver not in ("qr", "power"):
            raise ValidationError(f"solver must be 'qr' or 'power', got {self.solver!r}")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if not self.snr_db:
            raise ValidationError("snr_db grid is empty")

    def topology(self, snr_db):
        return Topology.from_snr_db(self.node_counts, snr_db)

    @property
    def feedback_label(self):
        return "perfect" if self.feedback == "perfect" else f"bsc:{self.pe:g}"

    def with_(self, **changes):
        return replace(self, **changes)


def make_constraint(kind, topology, total):
    """Constraint of the given kind spending ``total`` across all relays."""
    budget = split_budget(total, topology, kind)
    if kind == "global":
        return GlobalPower(budget)
    if kind == "local":
        return LocalPower(tuple(budget))
    if kind == "individual":
        return IndividualPower(tuple(budget))
    raise ValidationError(f"unknown constraint kind {kind!r}")


def _seed(cfg, snr_index, packet, purpose, attempt=0):
    return np.random.SeedSequence([cfg.seed, snr_index, packet, attempt, purpose])


# -- BER ------------------------------------------------------------------------


@dataclass
class TrialOutcome:
    errors: int = 0
    bits: int = 0
    power_violation: float = 0.0
    traces: list = field(default_factory=list)

    def merge(self, other):
        self.errors += other.errors
        self.bits += other.bits
        self.power_violation = max(self.power_violation, other.power_violation)
        self.traces.extend(other.traces)
        return self


@dataclass(frozen=True)
class BerRow:
    snr_db: float
    design: str
    constraint: str
    feedback: str
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    packets: int
    errors: int
    bits: int
    power_violation: float

    CSV_FIELDS = ("snr_db", "design", "constraint", "feedback", "ber", "ber_ci_lo", "ber_ci_hi", "packets")

    def csv_row(self):
        return (
            f"{self.snr_db:g}",
            self.design,
            self.constraint,
            self.feedback,
            f"{self.ber:.8g}",
            f"{self.ber_ci_lo:.8g}",
            f"{self.ber_ci_hi:.8g}",
            str(self.packets),
        )


def _design_mmse(cfg, top, channels, kind):
    constraint = make_constraint(kind, top, cfg.total_power)
    res = run_mmse(top, channels, constraint, iterations=cfg.iterations)
    resid = constraint.residual(top, res.gains)
    if resid > 1e-8:
        raise AfRelayError(f"{kind} design missed its budget (residual {resid:.2e})")
    return res.gains, res.receiver, res.mse_trace


def _feedback(cfg, designed, seed):
    if cfg.feedback == "perfect":
        return designed
    return quantize_feedback(designed, cfg.bits_real, cfg.bits_imag, cfg.pe, seed)


def _ber_packet(cfg, snr_index, packet):
    """All designs on one channel draw; returns ``{design: TrialOutcome}``."""
    top = cfg.topology(cfg.snr_db[snr_index])
    n_bits = 2 * cfg.symbols * top.n_sources
    bits = np.random.default_rng(_seed(cfg, snr_index, packet, _BITS)).integers(
        0, 2, n_bits, dtype=np.int8
    )
    symbols = qpsk_modulate(bits).reshape(top.n_sources, cfg.symbols, order="F")
    for attempt in range(MAX_REDRAWS):
        channels = draw_channels(top, _seed(cfg, snr_index, packet, _CHANNEL, attempt))
        try:
            designs = {}
            for name in cfg.designs:
                if name == "equal":
                    gains = equal_power_gains(top, cfg.total_power)
                    stats = compute_stats(top, channels, gains)
                    designs[name] = (gains, wiener_receiver(top, channels, gains, stats), [])
                else:
                    designs[name] = _design_mmse(cfg, top, channels, name)
            break
        except AfRelayError as exc:
            log.warning("snr %s packet %d attempt %d: %s; redrawing", top.snr, packet, attempt, exc)
    else:
        raise AfRelayError(f"packet {packet}: no usable channel draw in {MAX_REDRAWS} attempts")

    out = {}
    for name, (gains, receiver, trace) in designs.items():
        # the fixed baseline needs no feedback link
        actual = gains if name == "equal" else _feedback(cfg, gains, _seed(cfg, snr_index, packet, _FEEDBACK))
        designed_p = group_powers(top, gains).sum()
        violation = abs(group_powers(top, actual).sum() - designed_p) / designed_p
        stats = compute_stats(top, channels, actual)
        rx = propagate(top, channels, actual, stats, symbols, _seed(cfg, snr_index, packet, _NOISE))
        est = receiver.conj().T @ rx.received
        decided = qpsk_demodulate(est.ravel(order="F"))
        errors = int(np.count_nonzero(decided != bits))
        out[name] = TrialOutcome(errors, n_bits, violation, [trace])
    return out


def _ber_chunk(args):
    cfg, snr_index, packets = args
    total = {}
    for p in packets:
        for name, res in _ber_packet(cfg, snr_index, p).items():
            total.setdefault(name, TrialOutcome()).merge(res)
    return snr_index, total


def _chunks(cfg):
    per = max(1, -(-cfg.packets // (4 * cfg.threads)))
    for k in range(len(cfg.snr_db)):
        for start in range(0, cfg.packets, per):
            yield cfg, k, range(start, min(start + per, cfg.packets))


def _map(cfg, fn):
    jobs = list(_chunks(cfg))
    if cfg.threads == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, jobs))


def run_ber_sweep(cfg):
    """BER of every configured design at every SNR point, as a list of :class:`BerRow`."""
    for name in cfg.designs:
        if name not in BER_DESIGNS:
            raise ValidationError(f"unknown BER design {name!r}; choose from {BER_DESIGNS}")
    acc = {}
    for k, part in _map(cfg, _ber_chunk):
        for name, res in part.items():
            acc.setdefault((k, name), TrialOutcome()).merge(res)
    rows = []
    for k, snr in enumerate(cfg.snr_db):
        for name in cfg.designs:
            res = acc[(k, name)]
            lo, hi = wilson_interval(res.errors, res.bits)
            rows.append(
                BerRow(
                    snr,
                    "equal" if name == "equal" else "mmse",
                    "none" if name == "equal" else name,
                    "perfect" if name == "equal" else cfg.feedback_label,
                    res.errors / res.bits,
                    lo,
                    hi,
                    cfg.packets,
                    res.errors,
                    res.bits,
                    res.power_violation,
                )
            )
    return rows


# -- sum rate -------------------------------------------------------------------


@dataclass(frozen=True)
class SumRateRow:
    snr_db: float
    design: str
    sr_bps_hz: float
    draws: int
    sr_std: float = 0.0

    CSV_FIELDS = ("snr_db", "design", "sr_bps_hz", "draws")

    def csv_row(self):
        return (f"{self.snr_db:g}", self.design, f"{self.sr_bps_hz:.10g}", str(self.draws))


def _sr_draw(cfg, snr_index, draw):
    top = cfg.topology(cfg.snr_db[snr_index])
    local = make_constraint("local", top, cfg.total_power)
    for attempt in range(MAX_REDRAWS):
        channels = draw_channels(top, _seed(cfg, snr_index, draw, _CHANNEL, attempt))
        try:
            res = run_msr(top, channels, local, iterations=cfg.iterations, solver=cfg.solver)
            eq = equal_power_gains(top, cfg.total_power)
            eq_casc = build_cascade(top, channels, eq, compute_stats(top, channels, eq))
            eq_w = solve_receiver(eq_casc, cfg.solver)
            break
        except AfRelayError as exc:
            log.warning("snr %s draw %d attempt %d: %s; redrawing", top.snr, draw, attempt, exc)
    else:
        raise AfRelayError(f"draw {draw}: no usable channel draw in {MAX_REDRAWS} attempts")
    actual = _feedback(cfg, res.gains, _seed(cfg, snr_index, draw, _FEEDBACK))
    casc = build_cascade(top, channels, actual, compute_stats(top, channels, actual))
    return {
        f"msr-{cfg.solver}": sum_rate(casc, res.receiver, top),
        "equal": sum_rate(eq_casc, eq_w, top),
    }


def _sr_chunk(args):
    cfg, snr_index, draws = args
    return snr_index, [_sr_draw(cfg, snr_index, d) for d in draws]


def run_sumrate_sweep(cfg):
    """Average sum rate of the MSR design and the equal-power baseline; ``packets`` counts draws."""
    acc = {}
    for k, part in _map(cfg, _sr_chunk):
        for values in part:
            for name, v in values.items():
                acc.setdefault((k, name), []).append(v)
    rows = []
    for k, snr in enumerate(cfg.snr_db):
        for name in (f"msr-{cfg.solver}", "equal"):
            vals = np.asarray(acc[(k, name)])
            rows.append(SumRateRow(snr, name, float(vals.mean()), vals.size, float(vals.std(ddof=1)) if vals.size > 1 else 0.0))
    return rows
