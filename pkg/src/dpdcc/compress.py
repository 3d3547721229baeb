"""
Message compressors and bit accounting.

Quantizers map a real vector onto the lattice ``delta * Z^p``; the transmitted
payload is the vector of lattice coordinates, costing ``q`` bits per
coordinate.  The identity compressor sends raw 64-bit floats.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Compressor",
    "CompressedMessage",
    "compress",
    "bit_cost",
    "compressor_error",
    "norm_equivalence",
    "lattice_overflow",
    "write_messages",
    "read_messages",
    "KINDS",
]

KINDS = ("round", "identity", "dithered")
FLOAT_BITS = 64


@dataclass(frozen=True)
class Compressor:
    """
    Compression operator descriptor.

    Parameters
    ----------
    kind : {"round", "identity", "dithered"}
        ``round`` is ``delta * floor(x / delta + 1/2)``; ``dithered`` is
        ``delta * floor(x / delta + u)`` with ``u ~ U[0, 1)^p``.
    delta : int
        Lattice step of the quantizers.
    q : int
        Bits per transmitted lattice coordinate.
    """

    kind: str = "round"
    delta: int = 1
    q: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown compressor kind {self.kind!r}")
        if self.kind != "identity":
            if self.delta <= 0:
                raise ValueError("quantizer step delta must be positive")
            if self.q < 1:
                raise ValueError("q must be a positive number of bits")

    @property
    def exact(self):
        return self.kind == "identity"

    @property
    def stochastic(self):
        return self.kind == "dithered"

    @property
    def norm(self):
        """Norm index ``d`` in which the error bound is stated."""
        return math.inf

    @property
    def error_bound(self):
        """Bound on the (expected) squared ``d``-norm error."""
        if self.kind == "round":
            return self.delta**2 / 4.0
        if self.kind == "dithered":
            return float(self.delta**2)
        return 0.0

    def bits_per_coordinate(self):
        return FLOAT_BITS if self.exact else self.q

    def lattice(self, x, rng=None):
        """Integer lattice coordinates (as floats) of the compressed ``x``."""
        x = _finite(x)
        if self.kind == "round":
            return np.floor(x / self.delta + 0.5)
        if self.kind == "dithered":
            if rng is None:
                raise ValueError("dithered compression needs a random generator")
            return np.floor(x / self.delta + rng.random(x.shape))
        raise ValueError("the identity compressor has no lattice")

    def apply(self, x, rng=None):
        """Return ``C(x)``; rows of a 2-D ``x`` are compressed independently."""
        if self.exact:
            return _finite(x).copy()
        return self.delta * self.lattice(x, rng)


def _finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("cannot compress a non-finite vector")
    return x


@dataclass(frozen=True)
class CompressedMessage:
    """Payload of one broadcast: lattice integers or raw floats."""

    coords: tuple
    delta: int
    bits: int

    @property
    def dimension(self):
        return len(self.coords)


def compress(compressor, x, rng=None):
    """Compress ``x`` and package the payload with its bit cost."""
    x = _finite(x).reshape(-1)
    bits = bit_cost(compressor, x.size)
    if compressor.exact:
        return x.copy(), CompressedMessage(tuple(float(v) for v in x), 0, bits)
    k = compressor.lattice(x, rng)
    return compressor.delta * k, CompressedMessage(tuple(int(v) for v in k), compressor.delta, bits)


def bit_cost(compressor, p):
    """Bits of one message of dimension ``p``."""
    if p < 1:
        raise ValueError("message dimension must be positive")
    return p * compressor.bits_per_coordinate()


def lattice_overflow(coords, q):
    """Mask of coordinates outside the signed ``q``-bit range."""
    lim = 2 ** (q - 1)
    coords = np.asarray(coords)
    return (coords < -lim) | (coords > lim - 1)


def compressor_error(compressor, samples, p=2, scale=100.0, seed=0):
    """
    Empirical squared ``d``-norm error of ``compressor``.

    Returns the maximum over ``samples`` uniform inputs in ``[-scale, scale]^p``
    for deterministic kinds and the sample mean for the dithered one.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-scale, scale, size=(samples, p))
    err = compressor.apply(x, rng) - x
    sq = np.linalg.norm(err, ord=compressor.norm, axis=1) ** 2
    return float(sq.mean() if compressor.stochastic else sq.max())


def norm_equivalence(p, d):
    """
    Factors ``(p_hat, p_tilde)`` with ``||x||_d <= p_hat ||x||`` and
    ``||x|| <= p_tilde ||x||_d``.
    """
    if d < 1:
        raise ValueError("norm index must be >= 1")
    if d <= 2:
        return p ** (1.0 / d - 0.5), 1.0
    return 1.0, p ** (0.5 - 1.0 / d)


def write_messages(records, path):
    """
    Write ``(round, sender, message)`` records, one per line:
    ``round sender delta bits c_1 ... c_p``.
    """
    with open(path, "w") as fh:
        for t, sender, msg in records:
            coords = " ".join(repr(c) if isinstance(c, float) else str(c) for c in msg.coords)
            fh.write(f"{t} {sender} {msg.delta} {msg.bits} {coords}\n")


def read_messages(path):
    out = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            t, sender, delta, bits = (int(v) for v in parts[:4])
            coords = tuple(float(v) if delta == 0 else int(v) for v in parts[4:])
            out.append((t, sender, CompressedMessage(coords, delta, bits)))
    return out
