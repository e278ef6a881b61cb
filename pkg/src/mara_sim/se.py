"""Per-user SINR and sum spectral efficiency.

The SINR convention uses the intended user's channel against the other users'
precoders (standard downlink broadcast form): the interference at user u on
subcarrier g is sum over u' != u of |h_{u,g}^H w_{u',g}|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .channel import ChannelTensor

_LN2 = float(np.log(2.0))


@dataclass
class PrecoderSet:
    """Per-subcarrier digital precoding matrices, stacked as (G, M, U)."""

    w: np.ndarray

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    def copy(self) -> "PrecoderSet":
        return PrecoderSet(self.w.copy())


def effective_gains(channel: ChannelTensor, precoders: PrecoderSet) -> np.ndarray:
    """Complex link gains gains[g, u, u'] = h_{u,g}^H w_{u',g}."""
    return np.einsum("umg,gmv->guv", channel.h, precoders.w)


def sinr_matrix(channel: ChannelTensor, precoders: PrecoderSet,
                noise_power: float) -> np.ndarray:
    """SINR for every (u, g), shape (G, U)."""
    gains = effective_gains(channel, precoders)
    power = np.abs(gains) ** 2
    signal = np.einsum("guu->gu", power)
    interference = power.sum(axis=2) - signal
    return signal / (interference + noise_power)


def sinr(channel: ChannelTensor, precoders: PrecoderSet, u: int, g: int,
         noise_power: float) -> float:
    """SINR of user u on subcarrier g."""
    U, _, G = channel.h.shape
    if not (0 <= u < U) or not (0 <= g < G):
        raise ContractError(f"index (u={u}, g={g}) out of range for (U={U}, G={G})")
    row = channel.h[u, :, g]
    gains = row @ precoders.w[g]
    power = np.abs(gains) ** 2
    interference = power.sum() - power[u]
    return float(power[u] / (interference + noise_power))


def sum_se(channel: ChannelTensor, precoders: PrecoderSet, noise_power: float) -> float:
    """Total spectral efficiency: sum over g and u of log2(1 + SINR), bits/s/Hz."""
    return sum_se_arrays(channel.h, precoders.w, noise_power)


def sum_se_arrays(h: np.ndarray, w: np.ndarray, noise_power: float) -> float:
    """sum_se on raw arrays h (U, M, G) and w (G, M, U); the optimizer hot path."""
    gains = np.einsum("umg,gmv->guv", h, w)
    power = np.abs(gains) ** 2
    signal = np.einsum("guu->gu", power)
    interference = power.sum(axis=2) - signal
    s = signal / (interference + noise_power)
    return float(np.sum(np.log1p(s)) / _LN2)


def per_subcarrier_se(channel: ChannelTensor, precoders: PrecoderSet,
                      noise_power: float) -> float:
    """Average of the summed SE over the subcarrier grid, bits/s/Hz."""
    return sum_se(channel, precoders, noise_power) / channel.h.shape[2]
