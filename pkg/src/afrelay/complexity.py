"""Closed-form per-iteration operation counts of the MMSE and MSR designs.

Counts are polynomials in the node counts ``N_0..N_m`` and the eigensolver
iteration budget (``n_q`` sweeps for the QR algorithm, ``n_p`` steps for the
power method).  They are evaluated in exact rational arithmetic and must come
out integral.  Root finding for the multipliers is not counted.
"""

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from .exceptions import ValidationError

__all__ = [
    "OpCount",
    "MMSE_SCHEMES",
    "MSR_SCHEMES",
    "count_mmse",
    "count_msr",
    "total",
    "complexity_rows",
    "emit_complexity_curves",
    "CSV_HEADER",
]

MMSE_SCHEMES = ("mmse-global", "mmse-local", "mmse-individual")
MSR_SCHEMES = ("msr-qr", "msr-power")
CSV_HEADER = ("N", "scheme", "component", "multiplications", "additions", "divisions")


@dataclass(frozen=True)
class OpCount:
    scheme: str
    component: str
    multiplications: int
    additions: int
    divisions: int

    def __add__(self, other):
        return OpCount(
            self.scheme,
            "total",
            self.multiplications + other.multiplications,
            self.additions + other.additions,
            self.divisions + other.divisions,
        )


def _int(value, what):
    value = Fraction(value)
    if value.denominator != 1:
        raise ArithmeticError(f"{what} evaluated to non-integer {value}")
    if value < 0:
        raise ArithmeticError(f"{what} evaluated to negative {value}")
    return int(value)


def _op(scheme, component, mult, add, div):
    return OpCount(
        scheme,
        component,
        _int(mult, f"{scheme}/{component} multiplications"),
        _int(add, f"{scheme}/{component} additions"),
        _int(div, f"{scheme}/{component} divisions"),
    )


def _sizes(node_counts):
    n = tuple(int(x) for x in node_counts)
    if len(n) < 3 or any(x < 1 for x in n):
        raise ValidationError(f"need m >= 2 and all node counts >= 1, got {n}")
    return n, len(n) - 1


def _check_iters(name, value):
    if int(value) != value or value < 1:
        raise ValidationError(f"{name} must be an integer >= 1, got {value}")


def _solve_cost(n):
    """``N(N-1)(4N+1)/6``: cost of one dense Hermitian solve of size ``N``."""
    return Fraction(n * (n - 1) * (4 * n + 1), 6)


def _qr_mult(n, nq):
    return nq * (Fraction(13, 6) * n**3 + Fraction(3, 2) * n**2 + Fraction(1, 3) * n - 2)


def _qr_add(n, nq):
    return nq * (Fraction(13, 6) * n**3 - n**2 - Fraction(1, 6) * n + 1)


def _cascade_sums(n, m, tail):
    """Shared middle-hop sums of the receiver rows; ``tail`` is ``N_0`` or ``N_m``."""
    mult = add = Fraction(0)
    for i in range(2, m):
        a, b = n[i - 1], n[i]
        mult += 2 * a * a * b + a * b * b + tail * a * b + 4 * a * b + 2 * b
        add += 2 * a * b * b + a * (b - 1) * tail - b * b + b
    return mult, add


def count_mmse(node_counts, constraint, n_q=10):
    """Per-component counts ``{"W", "lambda", "a"}`` of one MMSE iteration."""
    n, m = _sizes(node_counts)
    _check_iters("n_q", n_q)
    if constraint not in ("global", "local", "individual"):
        raise ValidationError(f"unknown constraint {constraint!r}")
    scheme = f"mmse-{constraint}"
    n0, nm, nl = n[0], n[m], n[m - 1]

    # receiver
    mid_mult = mid_add = Fraction(0)
    for i in range(2, m):
        a, b = n[i - 1], n[i]
        mid_mult += 2 * a * a * b + a * b * b + n0 * a * b + 4 * a * b + 2 * b
        mid_add += 2 * a * b * b + n0 * (a - 1) * b - b * b + b
    w_mult = (
        _solve_cost(nm) + (n0 + nl) * nm**2 + nl**2 * nm + n0 * nl * nm + nl * nm + mid_mult
    )
    w_add = (
        _solve_cost(nm)
        + (n0 + nl) * nm**2
        + nl**2 * nm
        + n0 * nl * nm
        - nm**2
        + 2 * n0 * nm
        + nl * nm
        + nm
        + mid_add
    )
    w_div = Fraction(nm * (3 * nm - 1), 2)

    relays = range(1, m)
    chain = sum(Fraction(n[i] * n[i + 1] + n[i + 1]) for i in range(1, m - 1))
    if constraint == "individual":
        l_mult = (
            sum(n0 * n[i] ** 2 + n0 * n[i] * n[i + 1] + n[i] ** 2 + n0 * n[i] for i in relays)
            + chain
        )
        l_add = sum(n0 * n[i] ** 2 + n0 * n[i] * n[i + 1] - n[i] ** 2 - n[i] for i in relays)
        l_div = 0
        a_mult = 2 * sum(n[i] for i in relays)
        a_add = sum(n[i] for i in relays)
        a_div = sum(n[i] for i in relays)
    else:
        # global and local share both rows
        l_mult = (
            sum(
                _qr_mult(n[i], n_q) - n[i] ** 3 + 3 * n0 * n[i] ** 2 + n0 * n[i] * n[i + 1] + n[i] ** 2
                for i in relays
            )
            + chain
        )
        l_add = sum(
            _qr_add(n[i], n_q)
            - n[i] ** 3
            + 3 * n0 * n[i] ** 2
            + n0 * n[i] * n[i + 1]
            - n[i] ** 2
            - n0 * n[i]
            - n[i]
            for i in relays
        )
        l_div = sum(n_q * (n[i] - 1) for i in relays)
        a_mult = sum(_solve_cost(n[i]) + n[i] ** 2 + 1 for i in relays)
        a_add = sum(_solve_cost(n[i]) + n[i] ** 2 for i in relays)
        a_div = sum(Fraction(n[i] * (3 * n[i] - 1), 2) for i in relays)

    return {
        "W": _op(scheme, "W", w_mult, w_add, w_div),
        "lambda": _op(scheme, "lambda", l_mult, l_add, l_div),
        "a": _op(scheme, "a", a_mult, a_add, a_div),
    }


def count_msr(node_counts, solver, n_iter=10):
    """Per-component counts ``{"w", "a"}`` of one MSR iteration.

    ``n_iter`` is ``n_q`` for the QR solver and ``n_p`` for the power method.
    """
    n, m = _sizes(node_counts)
    if solver not in ("qr", "power"):
        raise ValidationError(f"unknown solver {solver!r}")
    _check_iters("n_q" if solver == "qr" else "n_p", n_iter)
    scheme = f"msr-{solver}"
    nm = n[m]
    relays = range(1, m)
    mid_mult, mid_add = _cascade_sums(n, m, nm)
    hop_mult = sum(n[i] * nm**2 + n[i] * n[i + 1] + n[i] for i in relays)
    hop_add = sum(n[i] * nm**2 for i in relays)

    if solver == "qr":
        w_mult = _qr_mult(nm, n_iter) + _solve_cost(nm) + nm**2 + n[1] * nm + hop_mult + mid_mult
        w_add = _qr_add(nm, n_iter) + _solve_cost(nm) - nm**2 + n[1] * nm + hop_add + mid_add
        w_div = n_iter * (nm - 1) + Fraction(nm * (3 * nm - 1), 2)
    else:
        w_mult = n_iter * nm**2 + _solve_cost(nm) + nm**3 + nm**2 + n[1] * nm + hop_mult + mid_mult
        w_add = (
            n_iter * nm * (nm - 1)
            + _solve_cost(nm)
            + nm**3
            - 2 * nm**2
            + n[1] * nm
            + hop_add
            + mid_add
        )
        w_div = Fraction(nm * (3 * nm - 1), 2)

    # terms shared by both gain rows
    tail_add = Fraction(0)
    for i in range(2, m):
        tail_add += sum((n[k] - 1) * n[i] ** 2 for k in range(1, i)) + n[i] ** 2 * (i - 2) + n[i]
    a_mult = a_add = Fraction(0)
    for i in relays:
        ni, nn = n[i], n[i + 1]
        upstream = sum(n[k] * ni**2 for k in range(1, i + 1))
        common_mult = _solve_cost(ni) + upstream + 3 * ni**2 + 2 * ni * nn + nn * nm + 3 * ni + 2
        common_add = _solve_cost(ni) + ni * nn + nn * nm - nn + ni - 1
        if solver == "qr":
            a_mult += _qr_mult(ni, n_iter) + common_mult
            a_add += _qr_add(ni, n_iter) + common_add
        else:
            a_mult += n_iter * ni**2 + ni**3 + common_mult
            a_add += n_iter * ni * (ni - 1) + ni**3 - ni**2 + common_add
    a_mult += 2 * nm**2
    a_add += tail_add + 2 * nm**2 - 2 * nm
    a_div = sum(Fraction(n[i] * (3 * n[i] - 1), 2) for i in relays) + nm + m - 1
    if solver == "qr":
        a_div += sum(n_iter * (n[i] - 1) for i in relays)

    return {
        "w": _op(scheme, "w", w_mult, w_add, w_div),
        "a": _op(scheme, "a", a_mult, a_add, a_div),
    }


def total(counts):
    """Sum of the component counts of one scheme."""
    parts = list(counts.values())
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def complexity_rows(n_values, m=3, n0=1, n_dest=2, n_q=10, n_p=10):
    """One row per (N, scheme, component) plus a ``total`` row per (N, scheme).

    Every relay group has ``N`` nodes.
    """
    rows = []
    for big_n in n_values:
        sizes = (n0,) + (int(big_n),) * (m - 1) + (n_dest,)
        blocks = [(s, count_mmse(sizes, s.split("-")[1], n_q)) for s in MMSE_SCHEMES]
        blocks += [
            ("msr-qr", count_msr(sizes, "qr", n_q)),
            ("msr-power", count_msr(sizes, "power", n_p)),
        ]
        for scheme, parts in blocks:
            for comp, c in list(parts.items()) + [("total", total(parts))]:
                rows.append(
                    (int(big_n), scheme, comp, c.multiplications, c.additions, c.divisions)
                )
    return rows


def emit_complexity_curves(n_values=range(2, 11), m=3, n0=1, n_dest=2, n_q=10, n_p=10, stream=None):
    """Write the complexity table as CSV; returns the text when ``stream`` is None."""
    rows = complexity_rows(n_values, m, n0, n_dest, n_q, n_p)
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    return buf.getvalue() if stream is None else None
