"""P300 amplitude and latency of stimulus-locked epochs.

Epochs span 200 ms before to 800 ms after the stimulus. They are averaged,
baseline-corrected by the pre-stimulus mean and band-passed at 1-10 Hz. The
P300 is the most positive sample between 200 and 500 ms.

"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

import bciarm.signals as signals
import bciarm.stats as stats
from bciarm.signals import Epoch, EpochSet, SignalBlock

logger = logging.getLogger(__name__)

PRE_STIMULUS_S = 0.2
POST_STIMULUS_S = 0.8
SEARCH_WINDOW_MS = (200.0, 500.0)
ERP_BAND = (1.0, 10.0)
P300_CHANNELS = ("O1", "O2", "Pz")


class NoP300Peak(Exception):
    pass


@dataclass(frozen=True, slots=True)
class P300Features:
    amplitude: float
    latency: float

    def __post_init__(self):
        lo, hi = SEARCH_WINDOW_MS
        if not lo <= self.latency <= hi:
            raise ValueError(f"latency {self.latency} ms is outside {lo}-{hi} ms")


def average_waveform(epochs: EpochSet, channel: str) -> np.ndarray:
    """Baseline-corrected, band-passed average of one channel."""
    if len(epochs) == 0:
        raise signals.SignalError("at least one epoch is needed")
    block = epochs[0].block
    rate = block.sample_rate
    expected = int(round((PRE_STIMULUS_S + POST_STIMULUS_S) * rate))
    if block.n_samples != expected:
        raise signals.SignalError(
            f"epochs must span -200..+800 ms ({expected} samples), got {block.n_samples}"
        )

    average = np.mean([e.block.channel(channel) for e in epochs], axis=0)
    onset = int(round(PRE_STIMULUS_S * rate))
    average = average - average[:onset].mean()
    return signals.bandpass_array(average, rate, *ERP_BAND)


def times_ms(sample_rate: float) -> np.ndarray:
    n = int(round((PRE_STIMULUS_S + POST_STIMULUS_S) * sample_rate))
    return (np.arange(n) / sample_rate - PRE_STIMULUS_S) * 1000.0


def p300_extract(epochs: EpochSet, channel: str) -> P300Features:
    waveform = average_waveform(epochs, channel)
    t = times_ms(epochs[0].block.sample_rate)
    lo, hi = SEARCH_WINDOW_MS
    # Tolerance absorbs the rounding of sample times to milliseconds.
    inside = np.flatnonzero((t >= lo - 1e-6) & (t <= hi + 1e-6))
    peak = inside[int(np.argmax(waveform[inside]))]
    amplitude = float(waveform[peak])
    if amplitude <= 0:
        raise NoP300Peak(f"no P300 peak on {channel}: the 200-500 ms window stays non-positive")
    latency = float(np.clip(t[peak], lo, hi))
    logger.debug("%s: P300 %.3f uV at %.1f ms", channel, amplitude, latency)
    return P300Features(amplitude, latency)


def p300_waveform(
    t_s: np.ndarray,
    amplitude: float = 5.0,
    latency_ms: float = 350.0,
    envelope_ms: float = 120.0,
    carrier_hz: float = 4.0,
) -> np.ndarray:
    """Gaussian-enveloped cosine peaking at `latency_ms`.

    A 4 Hz carrier keeps the deflection inside the 1-10 Hz analysis band, so
    band-passing barely changes its peak.
    """
    dt = t_s - latency_ms / 1000.0
    envelope = np.exp(-0.5 * (dt / (envelope_ms / 1000.0)) ** 2)
    return amplitude * envelope * np.cos(2 * math.pi * carrier_hz * dt)


def synth_p300(
    n_epochs: int = 20,
    amplitude: float = 5.0,
    latency_ms: float = 350.0,
    noise_sigma: float = 2.0,
    channels: Sequence[str] = P300_CHANNELS,
    sample_rate: float = signals.SAMPLE_RATE,
    seed: int = 0,
) -> EpochSet:
    """Stimulus-locked epochs with a P300-like deflection on `channels`."""
    rng = np.random.default_rng(seed)
    t = times_ms(sample_rate) / 1000.0
    wave = p300_waveform(t, amplitude, latency_ms)
    rows = [signals.MONTAGE.index(c) for c in channels]

    epochs = []
    for k in range(n_epochs):
        samples = rng.normal(0.0, noise_sigma, size=(len(signals.MONTAGE), t.size))
        samples[rows] += wave
        epochs.append(Epoch(SignalBlock(samples, sample_rate), None, k * t.size))
    return EpochSet(tuple(epochs))


@dataclass(frozen=True, slots=True)
class P300Record:
    """P300 features of one trial on one channel in one session."""

    trial: int
    channel: str
    session: int
    features: P300Features


def p300_table(
    records: Iterable[P300Record], feature: str = "latency"
) -> tuple[np.ndarray, list[int], list[str]]:
    """Cells (trial, channel, session) for a two-way ANOVA.

    Trials are factor A, channels factor B and sessions the replicates. Every
    combination must be present exactly once.
    """
    if feature not in ("amplitude", "latency"):
        raise ValueError(f"unknown P300 feature {feature!r}")
    records = list(records)
    trials = sorted({r.trial for r in records})
    channels = sorted({r.channel for r in records}, key=_channel_order)
    sessions = sorted({r.session for r in records})

    cells = np.full((len(trials), len(channels), len(sessions)), np.nan)
    for r in records:
        i, j, k = trials.index(r.trial), channels.index(r.channel), sessions.index(r.session)
        if not np.isnan(cells[i, j, k]):
            raise ValueError(f"duplicate record for {r.trial}, {r.channel}, {r.session}")
        cells[i, j, k] = getattr(r.features, feature)
    if np.isnan(cells).any():
        raise ValueError("the records do not fill a balanced design")
    return cells, trials, channels


def _channel_order(channel: str) -> int:
    return signals.MONTAGE.index(channel) if channel in signals.MONTAGE else len(signals.MONTAGE)


@dataclass(frozen=True, slots=True)
class FatigueAnalysis:
    """One-way ANOVAs with trial repetition as the factor, per channel and feature.

    `selected` is the channel whose latency test has the lowest p.
    """

    tests: dict[tuple[str, str], stats.OneWayResult]
    selected: str


def fatigue_analysis(records: Iterable[P300Record]) -> FatigueAnalysis:
    records = list(records)
    channels = sorted({r.channel for r in records}, key=_channel_order)
    if not channels:
        raise ValueError("no P300 records")

    tests = {}
    for channel in channels:
        for feature in ("amplitude", "latency"):
            by_trial: dict[int, list[float]] = {}
            for r in records:
                if r.channel == channel:
                    by_trial.setdefault(r.trial, []).append(getattr(r.features, feature))
            groups = [by_trial[t] for t in sorted(by_trial)]
            tests[(channel, feature)] = stats.anova_oneway(groups)

    # min keeps the first channel in montage order on equal p.
    selected = min(channels, key=lambda c: tests[(c, "latency")].p)
    logger.info("fatigue: latency is most significant on %s", selected)
    return FatigueAnalysis(tests, selected)
