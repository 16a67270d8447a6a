"""One- and two-sided M-level ASK constellations and per-level SNR mapping.

A constellation stores M real amplitudes built from M_distinct strictly
increasing energies: one-sided uses s_m = sqrt(E_m); two-sided mirrors the
levels about zero, s = (-sqrt(E_last), ..., -sqrt(E_1), +sqrt(E_1), ...,
+sqrt(E_last)).  The SNR of level m is Gamma_m = E_m*sigma_h_sq/sigma_n_sq
and Gamma_av = E_av*sigma_h_sq/sigma_n_sq.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

_DUP_TOL = 1e-12


class Side(str, Enum):
    ONE_SIDED = "one_sided"
    TWO_SIDED = "two_sided"


def n_levels(side: Side, m: int) -> int:
    """Number of distinct energy levels for M symbols."""
    return m if Side(side) is Side.ONE_SIDED else m // 2


def _validate_energies(energies: np.ndarray) -> np.ndarray:
    energies = np.asarray(energies, dtype=np.float64).reshape(-1)
    if energies.size == 0:
        raise ValueError("at least one energy level required")
    if np.any(energies <= 0):
        raise ValueError("energies must be positive")
    energies = np.sort(energies)
    gaps = np.diff(energies)
    if np.any(gaps <= _DUP_TOL * energies[1:]):
        raise ValueError("energy levels must be strictly increasing (duplicates rejected)")
    return energies


def _symbols_from_energies(side: Side, energies: np.ndarray) -> np.ndarray:
    roots = np.sqrt(energies)
    if side is Side.ONE_SIDED:
        return roots
    return np.concatenate([-roots[::-1], roots])


@dataclass(frozen=True)
class Constellation:
    """Immutable ASK constellation; symbols are strictly increasing."""

    side: Side
    energies: np.ndarray
    symbols: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "side", Side(self.side))
        energies = _validate_energies(self.energies)
        object.__setattr__(self, "energies", energies)
        symbols = np.asarray(self.symbols, dtype=np.float64).reshape(-1)
        expected = _symbols_from_energies(self.side, energies)
        if symbols.shape != expected.shape or not np.allclose(
            symbols, expected, rtol=1e-12, atol=0.0
        ):
            raise ValueError("symbols inconsistent with energies for this side")
        object.__setattr__(self, "symbols", expected)
        if self.side is Side.TWO_SIDED and self.m % 2:
            raise ValueError("two-sided constellations need even M")

    @classmethod
    def from_energies(cls, side: Side, energies: np.ndarray) -> "Constellation":
        energies = _validate_energies(np.asarray(energies))
        return cls(side=Side(side), energies=energies,
                   symbols=_symbols_from_energies(Side(side), energies))

    @property
    def m(self) -> int:
        return self.symbols.shape[0]

    @property
    def m_levels(self) -> int:
        return self.energies.shape[0]

    @property
    def e_av(self) -> float:
        return float(np.mean(self.symbols**2))

    @property
    def levels_of_symbols(self) -> np.ndarray:
        """0-based distinct-energy level index of each symbol."""
        if self.side is Side.ONE_SIDED:
            return np.arange(self.m)
        half = self.m // 2
        return np.concatenate([np.arange(half)[::-1], np.arange(half)])

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self.symbols).astype(np.int64)

    def csv_row(self) -> list:
        """Serialization row (side, M, s_1..s_M)."""
        return [self.side.value, self.m, *(float(s) for s in self.symbols)]


def equispaced_constellation(side: Side, m: int, e_av: float) -> Constellation:
    """Arithmetic-progression baseline: amplitudes m*Delta (one-sided) or
    +/-(2k-1)*Delta (two-sided), with Delta normalizing mean energy to e_av."""
    side = Side(side)
    if not e_av > 0:
        raise ValueError("e_av must be positive")
    if m < 2:
        raise ValueError("equispaced constellations need M >= 2")
    if side is Side.ONE_SIDED:
        amps = np.arange(1, m + 1, dtype=np.float64)
    else:
        if m % 2:
            raise ValueError("two-sided constellations need even M")
        amps = 2.0 * np.arange(1, m // 2 + 1, dtype=np.float64) - 1.0
    count = m
    delta_sq = e_av * count / (2.0 * np.sum(amps**2) if side is Side.TWO_SIDED else np.sum(amps**2))
    return Constellation.from_energies(side, delta_sq * amps**2)


def constellation_from_gammas(
    side: Side,
    gammas: np.ndarray,
    sigma_h_sq: float,
    sigma_n_sq: float,
) -> Constellation:
    """Invert the SNR map: E_m = Gamma_m * sigma_n_sq / sigma_h_sq."""
    gammas = np.asarray(gammas, dtype=np.float64).reshape(-1)
    if np.any(gammas <= 0):
        raise ValueError("gammas must be positive")
    if np.any(np.diff(gammas) <= 0):
        raise ValueError("gammas must be strictly increasing")
    if not (sigma_h_sq > 0 and sigma_n_sq > 0):
        raise ValueError("sigma_h_sq and sigma_n_sq must be positive")
    return Constellation.from_energies(side, gammas * (sigma_n_sq / sigma_h_sq))


@dataclass(frozen=True)
class SnrProfile:
    """Per-level SNRs plus the per-symbol sign pattern."""

    side: Side
    gammas: np.ndarray
    signs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "side", Side(self.side))
        gammas = np.asarray(self.gammas, dtype=np.float64).reshape(-1)
        if np.any(gammas <= 0) or np.any(np.diff(gammas) <= 0):
            raise ValueError("gammas must be positive and strictly increasing")
        object.__setattr__(self, "gammas", gammas)
        signs = np.asarray(self.signs, dtype=np.int64).reshape(-1)
        expected_m = gammas.size if self.side is Side.ONE_SIDED else 2 * gammas.size
        if signs.shape != (expected_m,) or not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be +-1 with one entry per symbol")
        object.__setattr__(self, "signs", signs)

    @property
    def m(self) -> int:
        return self.signs.shape[0]

    @property
    def m_levels(self) -> int:
        return self.gammas.shape[0]

    @property
    def gamma_av(self) -> float:
        # each level appears equally often among the symbols for both sides
        return float(np.mean(self.gammas))

    @property
    def levels_of_symbols(self) -> np.ndarray:
        if self.side is Side.ONE_SIDED:
            return np.arange(self.m)
        half = self.m // 2
        return np.concatenate([np.arange(half)[::-1], np.arange(half)])

    def gamma_of_symbol(self, i: int) -> float:
        return float(self.gammas[self.levels_of_symbols[i]])

    def sign_of_symbol(self, i: int) -> int:
        return int(self.signs[i])


def snr_profile(c: Constellation, sigma_h_sq: float, sigma_n_sq: float) -> SnrProfile:
    """Per-level SNRs Gamma_m = E_m*sigma_h_sq/sigma_n_sq with symbol signs."""
    if not (sigma_h_sq > 0 and sigma_n_sq > 0):
        raise ValueError("sigma_h_sq and sigma_n_sq must be positive")
    return SnrProfile(side=c.side, gammas=c.energies * (sigma_h_sq / sigma_n_sq), signs=c.signs)


def snr_profile_from_gammas(side: Side, gammas: np.ndarray) -> SnrProfile:
    """Profile with the canonical sign pattern for the given side."""
    side = Side(side)
    gammas = np.asarray(gammas, dtype=np.float64).reshape(-1)
    if side is Side.ONE_SIDED:
        signs = np.ones(gammas.size, dtype=np.int64)
    else:
        signs = np.concatenate([-np.ones(gammas.size, dtype=np.int64),
                                np.ones(gammas.size, dtype=np.int64)])
    return SnrProfile(side=side, gammas=gammas, signs=signs)
