"""Linear mechanical characterization: frequency response and Q extraction.

Used to interpret shaker measurements of the suspension: the uncharged,
small-amplitude device is a driven spring-damper-mass system whose damping
is linearized at the rest position.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import damping_coefficient
from .model import DeviceDesign


@dataclass(frozen=True)
class FrequencyResponse:
    frequencies: np.ndarray  # Hz
    amplitudes: np.ndarray   # m, steady displacement amplitude
    f_0: float               # Hz, resonance (interpolated peak)
    delta_f: float           # Hz, half-power bandwidth
    q: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("frequency_hz", "amplitude_m"))
            for f, a in zip(self.frequencies, self.amplitudes):
                writer.writerow([repr(float(f)), repr(float(a))])

    def to_json_dict(self) -> dict:
        return {"f_0_hz": self.f_0, "delta_f_hz": self.delta_f, "q": self.q}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def linear_response(design: DeviceDesign, accel: float, freq) -> float | np.ndarray:
    """Steady displacement amplitude of the uncharged structure.

    |z| = m A / sqrt((k - m w^2)^2 + (b w)^2), with the squeeze-film damping
    linearized at z = 0.  Accepts a scalar frequency or an array.
    """
    if accel < 0:
        raise ValueError("acceleration must be >= 0")
    m = design.mechanics.shuttle_mass
    k = design.mechanics.spring_constant
    b = damping_coefficient(0.0, design)
    w = 2.0 * math.pi * np.asarray(freq, dtype=float)
    amp = m * accel / np.sqrt((k - m * w * w) ** 2 + (b * w) ** 2)
    return float(amp) if np.isscalar(freq) else amp


def _extract_peak(freqs: np.ndarray, amps: np.ndarray) -> tuple[float, float]:
    """Parabolic-refined peak (f_0, amplitude) of a sampled response."""
    i = int(np.argmax(amps))
    if i == 0 or i == len(amps) - 1:
        raise ValueError("resonance peak lies at the grid boundary; widen the grid")
    # 3-point parabola through the peak and its neighbours
    y0, y1, y2 = amps[i - 1], amps[i], amps[i + 1]
    denom = y0 - 2.0 * y1 + y2
    shift = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    f_peak = freqs[i] + shift * (freqs[i + 1] - freqs[i])
    a_peak = y1 - 0.25 * (y0 - y2) * shift
    return float(f_peak), float(a_peak)


def quality_factor(response: FrequencyResponse) -> float:
    """Q = f_0 / half-power bandwidth, from the sampled response grid.

    The two amplitude/sqrt(2) crossings are located by linear interpolation
    between grid points; raises if the peak sits on the grid boundary or a
    crossing is missing (overdamped or grid too narrow).
    """
    freqs = np.asarray(response.frequencies, dtype=float)
    amps = np.asarray(response.amplitudes, dtype=float)
    f_peak, a_peak = _extract_peak(freqs, amps)
    half = a_peak / math.sqrt(2.0)
    i = int(np.argmax(amps))

    def _cross(lo: int, hi: int, step: int) -> float:
        j = lo
        while j != hi and amps[j] >= half:
            j += step
        if j == hi:
            raise ValueError("half-power crossing outside the grid; widen the grid")
        f_in, f_out = freqs[j - step], freqs[j]
        a_in, a_out = amps[j - step], amps[j]
        return float(f_in + (half - a_in) * (f_out - f_in) / (a_out - a_in))

    f_lo = _cross(i, -1, -1)
    f_hi = _cross(i, len(amps), 1)
    delta_f = abs(f_hi - f_lo)
    return f_peak / delta_f


def frequency_response(design: DeviceDesign, accel: float,
                       freqs) -> FrequencyResponse:
    """Sample the linear response and extract resonance and Q."""
    f = np.asarray(list(freqs), dtype=float)
    if f.size < 3:
        raise ValueError("need at least 3 grid frequencies")
    amps = linear_response(design, accel, f)
    resp = FrequencyResponse(frequencies=f, amplitudes=amps,
                             f_0=float("nan"), delta_f=float("nan"), q=float("nan"))
    f_peak, _ = _extract_peak(f, amps)
    q = quality_factor(resp)
    return FrequencyResponse(frequencies=f, amplitudes=amps,
                             f_0=f_peak, delta_f=f_peak / q, q=q)


def spring_from_resonance(f_0: float, m: float) -> float:
    """Suspension stiffness from a measured resonance: k = (2 pi f_0)^2 m."""
    if f_0 <= 0 or m <= 0:
        raise ValueError("f_0 and m must be > 0")
    w = 2.0 * math.pi * f_0
    return w * w * m


def damping_from_q(m: float, f_0: float, q: float) -> float:
    """Viscous damping equivalent to a measured quality factor: b = m w_0 / Q."""
    if m <= 0 or f_0 <= 0 or q <= 0:
        raise ValueError("m, f_0 and q must be > 0")
    return m * 2.0 * math.pi * f_0 / q
