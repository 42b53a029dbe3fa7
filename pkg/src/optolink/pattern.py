"""PRBS7 / PRBS7Q pattern generation, Gray mapping and the BER checker.

The generator is a 7-bit Fibonacci LFSR with feedback polynomial
x^7 + x^6 + 1. PRBS7Q takes consecutive non-overlapping bit pairs of one
PRBS7 stream and Gray-maps them onto PAM-4 levels::

    (0, 0) -> 0    (0, 1) -> 1    (1, 1) -> 2    (1, 0) -> 3

Because 127 is odd, the symbol stream repeats after exactly 127 symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRBS7_PERIOD = 127
_MASK = 0x7F

# level -> (msb, lsb)
GRAY_BITS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)


@dataclass(frozen=True)
class Lfsr7State:
    register: int = 0x7F

    def __post_init__(self):
        if not 0 < self.register <= _MASK:
            raise ValueError("degenerate LFSR state")

    def advance(self) -> tuple[int, Lfsr7State]:
        """Clock once; return the output bit and the next state."""
        r = self.register
        bit = ((r >> 6) ^ (r >> 5)) & 1
        return bit, Lfsr7State(((r << 1) | bit) & _MASK)


@dataclass(frozen=True)
class SymbolStream:
    """PAM-4 symbols (levels 0..3) using the Gray map in ``GRAY_BITS``."""

    symbols: np.ndarray
    bit_order: str = "msb-first gray: 00->0 01->1 11->2 10->3"

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64)
        if s.ndim != 1:
            raise ValueError("symbols must be one-dimensional")
        if s.size and (s.min() < 0 or s.max() > 3):
            raise ValueError("PAM-4 symbols must lie in 0..3")
        object.__setattr__(self, "symbols", s)

    def __len__(self) -> int:
        return len(self.symbols)

    def bits(self) -> np.ndarray:
        return gray_unmap(self.symbols)


@dataclass(frozen=True)
class BerReport:
    bits_compared: int
    bit_errors: int
    ber: float
    symbol_errors: int
    confidence_note: str
    offset: int = 0


def as_levels(x) -> np.ndarray:
    """Accept a SymbolStream or any integer array-like of levels."""
    if isinstance(x, SymbolStream):
        return x.symbols
    return SymbolStream(np.asarray(x)).symbols


def gray_map(bits: np.ndarray) -> np.ndarray:
    """Map a flat bit array (even length, msb first per pair) to levels."""
    b = np.asarray(bits, dtype=np.int64).reshape(-1, 2)
    msb, lsb = b[:, 0], b[:, 1]
    return 2 * msb + (msb ^ lsb)


def gray_unmap(levels: np.ndarray) -> np.ndarray:
    """Inverse of :func:`gray_map`; returns a flat bit array."""
    return GRAY_BITS[np.asarray(levels, dtype=np.int64)].reshape(-1)


def prbs7_generate(seed: Lfsr7State, n_bits: int) -> np.ndarray:
    if n_bits < 0:
        raise ValueError("n_bits must be >= 0")
    if not isinstance(seed, Lfsr7State):
        seed = Lfsr7State(int(seed))
    # one period is cheap to clock out; tile it for long requests
    period = np.empty(PRBS7_PERIOD, dtype=np.uint8)
    state = seed
    for k in range(PRBS7_PERIOD):
        period[k], state = state.advance()
    reps = -(-n_bits // PRBS7_PERIOD)
    return np.tile(period, reps)[:n_bits]


def prbs7q_generate(seed: Lfsr7State, n_symbols: int) -> SymbolStream:
    if n_symbols < 0:
        raise ValueError("n_symbols must be >= 0")
    return SymbolStream(gray_map(prbs7_generate(seed, 2 * n_symbols)))


def _confidence_note(bit_errors: int, bits: int) -> str:
    if bits == 0:
        return "no bits compared"
    if bit_errors == 0:
        return f"no errors; BER < {3.0 / bits:.3g} at 95% confidence"
    return f"{bit_errors} errors; relative 1-sigma uncertainty {1.0 / np.sqrt(bit_errors):.2g}"


def ber_check(reference, received, alignment: int | str = "auto") -> BerReport:
    """Compare ``received`` against ``reference`` treated as a cyclic pattern.

    ``received[k]`` is matched with ``reference[(k + offset) % len(reference)]``.
    With ``alignment="auto"`` the offset in 0..126 giving the fewest symbol
    errors is used.
    """
    ref = as_levels(reference)
    rx = as_levels(received)
    if rx.size == 0:
        raise ValueError("received stream is empty")
    if ref.size == 0:
        raise ValueError("reference stream is empty")
    if alignment == "auto":
        if rx.size < 2 * PRBS7_PERIOD:
            raise ValueError("insufficient data for alignment")
        n_off = min(PRBS7_PERIOD, ref.size)
        probe = rx[: 8 * PRBS7_PERIOD]
        idx = np.arange(probe.size)
        errs = [np.count_nonzero(probe != ref[(idx + o) % ref.size]) for o in range(n_off)]
        offset = int(np.argmin(errs))
    else:
        offset = int(alignment)
    expected = ref[(np.arange(rx.size) + offset) % ref.size]
    sym_err = int(np.count_nonzero(expected != rx))
    bit_err = int(np.count_nonzero(gray_unmap(expected) != gray_unmap(rx)))
    bits = 2 * rx.size
    return BerReport(
        bits_compared=bits,
        bit_errors=bit_err,
        ber=bit_err / bits,
        symbol_errors=sym_err,
        confidence_note=_confidence_note(bit_err, bits),
        offset=offset,
    )
