"""Multichannel EEG blocks and the signal processing run on them.

Filtering is always zero-phase: each recursive filter is applied forward and
backward with `scipy.signal.sosfiltfilt`, padding by up to one second of odd
extension so that the edges settle before the data starts.

"""

import csv
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Literal, Sequence, TypeAlias

import numpy as np
import scipy.signal

from bciarm.montage import Montage, UnknownChannel

logger = logging.getLogger(__name__)

MONTAGE: tuple[str, ...] = (
    "FP1",
    "FP2",
    "F3",
    "F4",
    "C3",
    "C4",
    "P3",
    "P4",
    "O1",
    "O2",
    "F7",
    "F8",
    "T3",
    "T4",
    "T5",
    "T6",
    "Cz",
    "Fz",
    "Pz",
)

SAMPLE_RATE = 1000.0

Label: TypeAlias = Literal["LHIM", "REST", "RHIM"]
CLASSES: tuple[Label, ...] = ("LHIM", "REST", "RHIM")

Band: TypeAlias = tuple[float, float]
FEATURE_RANGE: Band = (1.0, 70.0)
BIN_WIDTH = 2.0


class SignalError(ValueError):
    pass


@dataclass(frozen=True, slots=True, eq=False)
class SignalBlock:
    """Samples in microvolts, one row per channel."""

    samples: np.ndarray
    sample_rate: float = SAMPLE_RATE
    channels: tuple[str, ...] = MONTAGE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise SignalError(f"expected channels x time samples, got {samples.shape}")
        if samples.shape[0] != len(self.channels):
            raise SignalError(
                f"{samples.shape[0]} rows for {len(self.channels)} channel names"
            )
        if not self.sample_rate > 0:
            raise SignalError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def index(self, channel: str) -> int:
        try:
            return self.channels.index(channel)
        except ValueError:
            raise SignalError(f"unknown channel {channel!r}") from None

    def channel(self, channel: str) -> np.ndarray:
        return self.samples[self.index(channel)]

    def with_samples(self, samples: np.ndarray) -> "SignalBlock":
        return SignalBlock(samples, self.sample_rate, self.channels)

    def window(self, start: int, stop: int) -> "SignalBlock":
        if not 0 <= start < stop <= self.n_samples:
            raise SignalError(
                f"window [{start}, {stop}) outside a block of {self.n_samples} samples"
            )
        return self.with_samples(self.samples[:, start:stop])


@dataclass(frozen=True, slots=True)
class Epoch:
    """A window of a recording. `start` indexes the source block."""

    block: SignalBlock
    label: Label | None = None
    start: int = 0

    @property
    def stop(self) -> int:
        return self.start + self.block.n_samples


@dataclass(frozen=True, slots=True)
class EpochSet:
    epochs: tuple[Epoch, ...]

    def __post_init__(self):
        epochs = tuple(self.epochs)
        object.__setattr__(self, "epochs", epochs)
        if not epochs:
            return
        first = epochs[0].block
        for e in epochs:
            if e.block.n_samples != first.n_samples:
                raise SignalError("epochs of a set must have the same length")
            if e.block.channels != first.channels:
                raise SignalError("epochs of a set must share their channels")
            if e.block.sample_rate != first.sample_rate:
                raise SignalError("epochs of a set must share their sample rate")
            if e.label is not None and e.label not in CLASSES:
                raise SignalError(f"unknown class label {e.label!r}")

    def __len__(self) -> int:
        return len(self.epochs)

    def __iter__(self) -> Iterator[Epoch]:
        return iter(self.epochs)

    def __getitem__(self, i: int) -> Epoch:
        return self.epochs[i]

    @property
    def labels(self) -> list[Label | None]:
        return [e.label for e in self.epochs]

    def with_label(self, label: Label) -> "EpochSet":
        return EpochSet(tuple(e for e in self.epochs if e.label == label))

    def data(self) -> np.ndarray:
        """Stacked samples, shape (epochs, channels, time)."""
        return np.stack([e.block.samples for e in self.epochs])


@dataclass(frozen=True, slots=True)
class FeatureSpec:
    """(channel, band) pairs whose power feeds the classifier."""

    features: tuple[tuple[str, Band], ...]

    def __post_init__(self):
        features = tuple((str(c), (float(lo), float(hi))) for c, (lo, hi) in self.features)
        object.__setattr__(self, "features", features)
        for channel, (lo, hi) in features:
            if channel not in MONTAGE:
                raise SignalError(f"unknown channel {channel!r}")
            if not FEATURE_RANGE[0] <= lo < hi <= FEATURE_RANGE[1]:
                raise SignalError(
                    f"band {lo}-{hi} Hz is outside {FEATURE_RANGE[0]}-{FEATURE_RANGE[1]} Hz"
                )

    def __len__(self) -> int:
        return len(self.features)

    def describe(self) -> str:
        return "; ".join(f"{c} {lo:g}-{hi:g} Hz" for c, (lo, hi) in self.features)


# Filters


@functools.lru_cache(maxsize=64)
def _bandpass_sos(lo: float, hi: float, sample_rate: float, order: int) -> np.ndarray:
    if not 0 < lo < hi < sample_rate / 2:
        raise SignalError(
            f"band edges need 0 < lo < hi < {sample_rate / 2:g} Hz, got {lo}-{hi}"
        )
    return scipy.signal.butter(order, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")


@functools.lru_cache(maxsize=16)
def _notch_sos(freq: float, quality: float, sample_rate: float) -> np.ndarray:
    if not 0 < freq < sample_rate / 2:
        raise SignalError(f"notch frequency must be in (0, {sample_rate / 2:g}) Hz")
    b, a = scipy.signal.iirnotch(freq, quality, fs=sample_rate)
    return scipy.signal.tf2sos(b, a)


def _zero_phase(sos: np.ndarray, x: np.ndarray, sample_rate: float) -> np.ndarray:
    n = x.shape[-1]
    if n < 2:
        raise SignalError("at least 2 samples are needed to filter")
    return scipy.signal.sosfiltfilt(sos, x, axis=-1, padlen=min(n - 1, int(sample_rate)))


def bandpass_array(
    x: np.ndarray, sample_rate: float, lo: float, hi: float, order: int = 4
) -> np.ndarray:
    return _zero_phase(_bandpass_sos(lo, hi, sample_rate, order), x, sample_rate)


def bandpass(block: SignalBlock, lo: float, hi: float, order: int = 4) -> SignalBlock:
    """Zero-phase Butterworth band-pass of every channel."""
    return block.with_samples(
        bandpass_array(block.samples, block.sample_rate, lo, hi, order)
    )


def notch(block: SignalBlock, freq: float = 60.0, quality: float = 30.0) -> SignalBlock:
    """Zero-phase notch, -3 dB bandwidth freq / quality."""
    sos = _notch_sos(freq, quality, block.sample_rate)
    return block.with_samples(_zero_phase(sos, block.samples, block.sample_rate))


def preprocess(block: SignalBlock) -> SignalBlock:
    """The acquisition chain: 1-100 Hz fourth order band-pass, 60 Hz notch."""
    return notch(bandpass(block, 1.0, 100.0, 4), 60.0)


def laplacian(block: SignalBlock, center: str, neighbors: Sequence[str]) -> np.ndarray:
    """`center` minus the mean of `neighbors`, sample by sample."""
    if not neighbors:
        raise SignalError(f"no neighbors given for {center}")
    rows = [block.index(name) for name in neighbors]
    return block.channel(center) - block.samples[rows].mean(axis=0)


@functools.lru_cache(maxsize=1)
def _standard_montage() -> Montage:
    return Montage.standard()


def default_neighbors(channel: str) -> list[str]:
    """The four nearest electrodes of the standard montage."""
    try:
        return _standard_montage().neighbors(channel, 4)
    except UnknownChannel as e:
        raise SignalError(str(e)) from e


def band_power(
    epoch: SignalBlock | Epoch, channel: str, band: Band, order: int = 4
) -> float:
    """Mean square of the band-passed channel over the epoch.

    The epoch must hold at least one period of the lower band edge.
    """
    block = epoch.block if isinstance(epoch, Epoch) else epoch
    lo, hi = band
    minimum = math.ceil(block.sample_rate / lo)
    if block.n_samples < minimum:
        raise SignalError(
            f"{block.n_samples} samples is shorter than the {minimum} needed for {lo:g} Hz"
        )
    filtered = bandpass_array(block.channel(channel), block.sample_rate, lo, hi, order)
    return float(np.mean(filtered**2))


# r^2 maps


def frequency_bins(
    band: Band = FEATURE_RANGE, width: float = BIN_WIDTH
) -> list[Band]:
    lo, hi = band
    n = int(math.floor((hi - lo) / width))
    return [(lo + k * width, lo + (k + 1) * width) for k in range(n)]


@dataclass(frozen=True, slots=True, eq=False)
class R2Map:
    """Squared point-biserial correlation per channel (rows) and bin (columns)."""

    values: np.ndarray
    channels: tuple[str, ...]
    bins: tuple[Band, ...]

    def argmax(self) -> tuple[str, Band]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return self.channels[i], self.bins[j]

    def top(self, k: int) -> list[tuple[str, Band, float]]:
        """The k largest cells, ties in channel then bin order."""
        flat = self.values.ravel()
        order = sorted(range(flat.size), key=lambda n: (-flat[n], n))
        out = []
        for n in order[:k]:
            i, j = divmod(n, self.values.shape[1])
            out.append((self.channels[i], self.bins[j], float(flat[n])))
        return out


def _binned_power(epochs: EpochSet, bins: Sequence[Band]) -> np.ndarray:
    """Welch power per bin, shape (epochs, channels, bins)."""
    data = epochs.data()
    rate = epochs[0].block.sample_rate
    freqs, psd = scipy.signal.welch(
        data, fs=rate, nperseg=min(int(rate), data.shape[-1]), axis=-1
    )
    out = np.empty(data.shape[:2] + (len(bins),))
    for k, (lo, hi) in enumerate(bins):
        mask = (freqs >= lo) & (freqs < hi)
        if not mask.any():
            raise SignalError(f"no frequency resolution inside the {lo}-{hi} Hz bin")
        out[:, :, k] = psd[:, :, mask].mean(axis=-1)
    return out


def r2_map(
    set_a: EpochSet, set_b: EpochSet, bins: Sequence[Band] | None = None
) -> R2Map:
    """How well each (channel, bin) band power separates two sets of epochs."""
    for name, s in (("first", set_a), ("second", set_b)):
        if len(s) < 2:
            raise SignalError(f"the {name} set needs at least 2 epochs, got {len(s)}")
    a0, b0 = set_a[0].block, set_b[0].block
    if a0.channels != b0.channels or a0.sample_rate != b0.sample_rate:
        raise SignalError("both sets must share channels and sample rate")

    bins = list(bins) if bins is not None else frequency_bins()
    pa = _binned_power(set_a, bins)
    pb = _binned_power(set_b, bins)
    na, nb = len(set_a), len(set_b)
    n = na + nb

    everything = np.concatenate([pa, pb])
    spread = everything.std(axis=0)
    diff = pa.mean(axis=0) - pb.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(spread > 0, diff * math.sqrt(na * nb) / (n * spread), 0.0)
    values = np.clip(r**2, 0.0, 1.0)
    return R2Map(values, a0.channels, tuple(bins))


# Synthetic data


@dataclass(frozen=True, slots=True)
class SynthProfile:
    """Class-dependent mu-band modulation of synthetic motor-imagery EEG.

    Imagining a left hand movement lowers the mu rhythm over the right motor
    cortex (C4) by `erd_factor`, and the other way around. An `erd_factor` of 1
    makes every class look the same.
    """

    counts: tuple[int, int, int] = (10, 10, 10)
    epoch_seconds: float = 6.0
    sample_rate: float = SAMPLE_RATE
    mu_hz: float = 10.0
    mu_amplitude: float = 10.0
    amplitude_jitter: float = 0.2
    erd_factor: float = 0.3
    alpha_hz: float = 12.0
    alpha_amplitude: float = 8.0
    noise_sigma: float = 5.0
    motor_channels: tuple[str, str] = ("C3", "C4")

    @classmethod
    def zero_contrast(cls, **kwargs) -> "SynthProfile":
        return cls(erd_factor=1.0, **kwargs)


def synth_eeg(profile: SynthProfile = SynthProfile(), seed: int = 0) -> EpochSet:
    """Labeled epochs in random class order, deterministic given the seed."""
    rng = np.random.default_rng(seed)
    labels = [c for c, n in zip(CLASSES, profile.counts) for _ in range(n)]
    labels = [labels[i] for i in rng.permutation(len(labels))]

    n = int(round(profile.epoch_seconds * profile.sample_rate))
    t = np.arange(n) / profile.sample_rate
    left, right = (MONTAGE.index(c) for c in profile.motor_channels)

    epochs = []
    for k, label in enumerate(labels):
        samples = rng.normal(0.0, profile.noise_sigma, size=(len(MONTAGE), n))
        alpha = profile.alpha_amplitude * np.sin(
            2 * math.pi * profile.alpha_hz * t + rng.uniform(0, 2 * math.pi)
        )
        samples += alpha

        for row, suppressed_by in ((left, "RHIM"), (right, "LHIM")):
            gain = rng.uniform(1 - profile.amplitude_jitter, 1 + profile.amplitude_jitter)
            if label == suppressed_by:
                gain *= profile.erd_factor
            samples[row] += (
                gain
                * profile.mu_amplitude
                * np.sin(2 * math.pi * profile.mu_hz * t + rng.uniform(0, 2 * math.pi))
            )

        block = SignalBlock(samples, profile.sample_rate)
        epochs.append(Epoch(block, label, start=k * n))
    return EpochSet(tuple(epochs))


# IO


@dataclass(frozen=True, slots=True)
class Event:
    onset: float
    label: Label | None = None


def write_signals(block: SignalBlock, path: Path) -> None:
    """CSV with a time column (s) followed by one column per channel."""
    t = np.arange(block.n_samples) / block.sample_rate
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time", *block.channels])
        for i in range(block.n_samples):
            writer.writerow([repr(float(t[i])), *(repr(float(v)) for v in block.samples[:, i])])


def read_signals(path: Path) -> SignalBlock:
    with open(path, newline="") as f:
        header = next(csv.reader(f), None)
    if not header or header[0].strip().lower() != "time":
        raise SignalError(f"{path}: the first column must be 'time'")
    channels = tuple(h.strip() for h in header[1:])
    for channel in channels:
        if channel not in MONTAGE:
            raise SignalError(f"{path}: unknown channel {channel!r}")

    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[0] < 2:
        raise SignalError(f"{path}: at least two samples are needed")
    rate = 1.0 / float(np.median(np.diff(table[:, 0])))
    logger.debug("read %d samples at %.3f Hz from %s", table.shape[0], rate, path)
    return SignalBlock(table[:, 1:].T.copy(), round(rate, 6), channels)


def read_events(path: Path) -> list[Event]:
    """CSV with `onset` (s) and optional `label` columns."""
    events = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            try:
                onset = float(row["onset"])
            except (KeyError, ValueError, TypeError):
                raise SignalError(f"{path}: bad onset in {row}") from None
            label = (row.get("label") or "").strip() or None
            if label is not None and label not in CLASSES:
                raise SignalError(f"{path}: unknown label {label!r}")
            events.append(Event(onset, label))
    return events


def write_events(events: Iterable[Event], path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["onset", "label"])
        for e in events:
            writer.writerow([repr(e.onset), e.label or ""])


def epoch_signals(
    block: SignalBlock,
    onsets: Sequence[float],
    labels: Sequence[Label | None] | None = None,
    tmin: float = 0.0,
    tmax: float = 6.0,
) -> EpochSet:
    """Cut one epoch per onset, spanning [onset + tmin, onset + tmax)."""
    if labels is None:
        labels = [None] * len(onsets)
    if len(labels) != len(onsets):
        raise SignalError("one label per onset is needed")
    length = int(round((tmax - tmin) * block.sample_rate))
    epochs = []
    for onset, label in zip(onsets, labels):
        start = int(round((onset + tmin) * block.sample_rate))
        epochs.append(Epoch(block.window(start, start + length), label, start))
    return EpochSet(tuple(epochs))


def concatenate(epochs: EpochSet) -> tuple[SignalBlock, list[Event]]:
    """Lay the epochs end to end as one recording, with their events."""
    block = epochs[0].block
    samples = np.concatenate([e.block.samples for e in epochs], axis=1)
    events = [
        Event(k * block.n_samples / block.sample_rate, e.label)
        for k, e in enumerate(epochs)
    ]
    return block.with_samples(samples), events
