"""Coded-mode forward error correction and spreading.

Block structure on air:

    preamble (80 sym) | block1: fec(AA | CI | TERM1) at S=8 | block2:
    fec(whitened(PDU | CRC) | TERM2) at S=8 (LE125K) or S=2 (LE500K)

The rate-1/2 encoder has constraint length 4 with generators
1 + D + D^2 + D^3 and 1 + D^2 + D^3; each TERM field is three zero bits
that drive the trellis back to state zero, so both blocks decode with a
terminated traceback.  The S=8 pattern mapper spreads coded bit 0 to
symbols 0011 and coded bit 1 to 1100; S=2 maps bits straight through.
"""
from __future__ import annotations

import numpy as np

from .bits import as_bits, int_to_bits
from .errors import LengthError, ModeError, ParamError
from .llpacket import LinkLayerPacket, crc24_bits, whiten
from .phymode import PhyMode

TERM_BITS = 3
CI_FIELD_BITS = 2
# AA (32) + CI (2) + TERM1 (3) input bits of the first FEC block.
BLOCK1_INPUT_BITS = 32 + CI_FIELD_BITS + TERM_BITS

_PATTERN_ZERO = np.array([0, 0, 1, 1], dtype=np.uint8)
_PATTERN_ONE = np.array([1, 1, 0, 0], dtype=np.uint8)


def spreading_factor(s: int) -> int:
    """Symbols per coded bit for coding scheme S."""
    if s == 8:
        return 4
    if s == 2:
        return 1
    raise ParamError(f"coding scheme S={s} (expected 2 or 8)")


def fec_encode(bits: np.ndarray) -> np.ndarray:
    """Rate-1/2 convolutional encode from the all-zero state.

    Emits two coded bits (g0 then g1) per input bit; output length is
    exactly 2*len(bits).  Appending three zero input bits flushes the
    trellis back to state zero.
    """
    bits = as_bits(bits).astype(np.int64)
    n = bits.size
    # Non-recursive code: each output is a mod-2 convolution of the input
    # with the generator taps [1,1,1,1] and [1,0,1,1] (D^0 .. D^3).
    padded = np.concatenate([np.zeros(3, dtype=np.int64), bits])
    g0 = (padded[3:] + padded[2:-1] + padded[1:-2] + padded[:-3]) & 1
    g1 = (padded[3:] + padded[1:-2] + padded[:-3]) & 1
    out = np.empty(2 * n, dtype=np.uint8)
    out[0::2] = g0
    out[1::2] = g1
    return out


def pattern_map(coded_bits: np.ndarray, s: int) -> np.ndarray:
    """Expand coded bits to on-air symbols for coding scheme S."""
    coded_bits = as_bits(coded_bits)
    p = spreading_factor(s)
    if p == 1:
        return coded_bits.copy()
    out = np.where(
        coded_bits[:, None].astype(bool), _PATTERN_ONE[None, :], _PATTERN_ZERO[None, :]
    )
    return out.reshape(-1).astype(np.uint8)


def pattern_demap(soft_symbols: np.ndarray, s: int) -> np.ndarray:
    """Collapse soft symbols back to one soft value per coded bit.

    Positive values vote for bit 1.  For S=8 the four symbols of one coded
    bit are combined with the pattern's antipodal signs (+,+,-,-).
    """
    soft = _as_soft(soft_symbols)
    p = spreading_factor(s)
    if soft.size % p:
        raise LengthError(f"{soft.size} symbols not divisible by spreading {p}")
    if p == 1:
        return soft
    groups = soft.reshape(-1, 4)
    return groups[:, 0] + groups[:, 1] - groups[:, 2] - groups[:, 3]


def _as_soft(symbols: np.ndarray) -> np.ndarray:
    symbols = np.asarray(symbols)
    if symbols.dtype.kind in "ui":
        return symbols.astype(np.float64) * 2.0 - 1.0
    return symbols.astype(np.float64)


# Trellis tables, indexed by destination state (3 bits, newest first).
# State s encodes (b[n-1], b[n-2], b[n-3]); destination t = (b<<2)|(s>>1)
# has two predecessors 2*(t&3) and 2*(t&3)+1 with input bit t>>2.
_PRED = np.empty((8, 2), dtype=np.int64)
_SIGN0 = np.empty((8, 2), dtype=np.float64)
_SIGN1 = np.empty((8, 2), dtype=np.float64)
for _t in range(8):
    _b = _t >> 2
    for _k in range(2):
        _s = ((_t & 3) << 1) | _k
        _PRED[_t, _k] = _s
        _s2, _s1, _s0 = (_s >> 2) & 1, (_s >> 1) & 1, _s & 1
        _g0 = _b ^ _s2 ^ _s1 ^ _s0
        _g1 = _b ^ _s1 ^ _s0
        _SIGN0[_t, _k] = 2.0 * _g0 - 1.0
        _SIGN1[_t, _k] = 2.0 * _g1 - 1.0


def viterbi_decode(symbols: np.ndarray, s: int) -> np.ndarray:
    """Maximum-likelihood decode of one FEC block.

    `symbols` are on-air symbols (hard 0/1 or soft, positive = 1) of a
    block whose input ended with the TERM flush, so the traceback starts
    from state zero.  Returns the decoded input bits including the flush.
    """
    p = spreading_factor(s)
    soft = pattern_demap(symbols, s)
    if soft.size % 2:
        raise LengthError(f"{soft.size} coded bits do not form (g0, g1) pairs")
    n_steps = soft.size // 2
    if n_steps == 0:
        raise LengthError("empty coded block")
    l0 = soft[0::2]
    l1 = soft[1::2]

    pm = np.full(8, -np.inf)
    pm[0] = 0.0
    backptr = np.empty((n_steps, 8), dtype=np.int8)
    for i in range(n_steps):
        cand = pm[_PRED] + l0[i] * _SIGN0 + l1[i] * _SIGN1
        best = np.argmax(cand, axis=1)
        pm = cand[np.arange(8), best]
        backptr[i] = best

    bits = np.empty(n_steps, dtype=np.uint8)
    state = 0
    for i in range(n_steps - 1, -1, -1):
        bits[i] = state >> 2
        state = _PRED[state, backptr[i, state]]
    return bits


def assemble_coded(packet: LinkLayerPacket, mode: PhyMode) -> np.ndarray:
    """On-air symbol stream for the coded modes."""
    if not mode.coded:
        raise ModeError(f"{mode.value} packets are built by assemble_uncoded")
    preamble = mode.preamble_bits()
    aa = int_to_bits(packet.access_address, 32, lsb_first=True)
    ci = int_to_bits(mode.ci_bits, CI_FIELD_BITS, lsb_first=True)
    term = np.zeros(TERM_BITS, dtype=np.uint8)
    block1 = pattern_map(fec_encode(np.concatenate([aa, ci, term])), 8)
    body = np.concatenate([packet.pdu, crc24_bits(packet.pdu, packet.crc_init)])
    block2_in = np.concatenate([whiten(body, packet.channel.index), term])
    block2 = pattern_map(fec_encode(block2_in), 8 if mode.spreading == 4 else 2)
    return np.concatenate([preamble, block1, block2])


def block1_symbol_count() -> int:
    return BLOCK1_INPUT_BITS * 2 * 4


def block2_symbol_count(pdu_bits: int, s: int) -> int:
    return (pdu_bits + 24 + TERM_BITS) * 2 * spreading_factor(s)


def scheme_from_ci(ci_value: int) -> int | None:
    """Coding scheme announced by a decoded CI field (None if reserved)."""
    if ci_value == 0b00:
        return 8
    if ci_value == 0b01:
        return 2
    return None
