"""Input checks shared by the estimator wrappers.

scikit-learn's ``check_array`` refuses complex data, so the few checks
needed here are written out directly.
"""

import numbers

import numpy as np

from .exceptions import ValidationError
from .network import ChannelSet, Topology


def check_complex_array(x, name="X", ndim=2):
    """Finite complex ndarray with exactly ``ndim`` dimensions (1-D promoted to one row)."""
    try:
        arr = np.asarray(x, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not numeric") from exc
    if ndim == 2 and arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def check_channels(x, topology):
    """Accept a ``ChannelSet`` or a sequence of link matrices; shapes must match ``topology``."""
    if isinstance(x, ChannelSet):
        channels = x
    elif isinstance(x, (list, tuple)):
        channels = ChannelSet.from_links([check_complex_array(h, f"link {k}") for k, h in enumerate(x)])
    else:
        raise ValidationError(
            f"expected a ChannelSet or a list of link matrices, got {type(x).__name__}"
        )
    return channels.check(topology)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValidationError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_choice(value, name, choices):
    if value not in choices:
        raise ValidationError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value


def check_topology(node_counts, snr_db):
    if not isinstance(snr_db, numbers.Real) or not np.isfinite(snr_db):
        raise ValidationError(f"snr_db must be a finite number, got {snr_db!r}")
    return Topology.from_snr_db(tuple(node_counts), float(snr_db))


def check_received(x, n_dest):
    """Received samples as rows: shape ``(n_samples, N_m)``."""
    d = check_complex_array(x, "X")
    if d.shape[1] != n_dest:
        raise ValidationError(f"X must have {n_dest} columns (destinations), got {d.shape[1]}")
    return d
