import math

import numpy as np
import pytest

import bciarm.signals as signals
from bciarm.signals import Epoch, EpochSet, FeatureSpec, SignalBlock, SignalError

RATE = signals.SAMPLE_RATE


def single_channel(x: np.ndarray) -> SignalBlock:
    return SignalBlock(np.atleast_2d(x), RATE, ("C3",))


def sine(freq: float, seconds: float, amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(seconds * RATE)) / RATE
    return amplitude * np.sin(2 * math.pi * freq * t + phase)


def tone_epochs(
    rng: np.random.Generator, n: int, amplitude: float, seconds: float = 6.0
) -> EpochSet:
    size = int(seconds * RATE)
    c3 = signals.MONTAGE.index("C3")
    epochs = []
    for _ in range(n):
        samples = rng.normal(0.0, 20.0, size=(len(signals.MONTAGE), size))
        samples[c3] += sine(10.0, seconds, amplitude, rng.uniform(0, 2 * math.pi))
        epochs.append(Epoch(SignalBlock(samples)))
    return EpochSet(tuple(epochs))


def test_block_validation():
    with pytest.raises(SignalError):
        SignalBlock(np.zeros((3, 10)))
    with pytest.raises(SignalError):
        SignalBlock(np.zeros(10), RATE, ("C3",))
    with pytest.raises(SignalError):
        SignalBlock(np.zeros((1, 10)), 0.0, ("C3",))
    block = single_channel(np.arange(10.0))
    with pytest.raises(SignalError):
        block.channel("C4")
    with pytest.raises(SignalError):
        block.window(5, 11)
    assert block.window(2, 5).samples.tolist() == [[2.0, 3.0, 4.0]]
    assert block.duration == pytest.approx(0.01)


def test_epoch_set_validation():
    a = Epoch(single_channel(np.zeros(10)))
    b = Epoch(single_channel(np.zeros(11)))
    with pytest.raises(SignalError):
        EpochSet((a, b))
    assert len(EpochSet(())) == 0


def test_feature_spec():
    spec = FeatureSpec((("C3", (9, 11)), ("C4", (23.0, 25.0))))
    assert spec.features[0] == ("C3", (9.0, 11.0))
    assert spec.describe() == "C3 9-11 Hz; C4 23-25 Hz"
    with pytest.raises(SignalError):
        FeatureSpec((("Oz", (9.0, 11.0)),))
    with pytest.raises(SignalError):
        FeatureSpec((("C3", (60.0, 80.0)),))
    with pytest.raises(SignalError):
        FeatureSpec((("C3", (11.0, 9.0)),))


def test_notch_removes_line_noise():
    t = np.arange(10001) / RATE
    clean = np.sin(2 * math.pi * 10 * t)
    block = single_channel(clean + np.sin(2 * math.pi * 60 * t))
    filtered = signals.notch(block).channel("C3")
    assert np.max(np.abs(filtered - clean)[1000:-1000]) < 0.05


def test_bandpass_keeps_the_band():
    clean = sine(10.0, 10.0)
    block = single_channel(clean + sine(40.0, 10.0) + 3.0)
    filtered = signals.bandpass(block, 8.0, 12.0).channel("C3")
    assert np.max(np.abs(filtered - clean)[2000:-2000]) < 0.05


def test_preprocess_removes_dc():
    block = single_channel(np.full(5000, 7.0))
    out = signals.preprocess(block)
    assert out.samples.shape == block.samples.shape
    assert np.max(np.abs(out.samples)) < 1e-3


@pytest.mark.parametrize("band", [(0.0, 10.0), (10.0, 8.0), (10.0, 500.0)])
def test_bad_band_edges(band):
    with pytest.raises(SignalError):
        signals.bandpass(single_channel(np.zeros(100)), *band)


def test_laplacian():
    samples = np.ones((len(signals.MONTAGE), 4))
    samples[signals.MONTAGE.index("C3")] = 5.0
    samples[signals.MONTAGE.index("F3")] = 3.0
    block = SignalBlock(samples)
    out = signals.laplacian(block, "C3", ["F3", "P3", "T3", "Cz"])
    assert out.tolist() == [3.5] * 4
    with pytest.raises(SignalError):
        signals.laplacian(block, "C3", [])


def test_default_neighbors():
    neighbors = signals.default_neighbors("C3")
    assert len(neighbors) == 4
    assert "C3" not in neighbors
    assert set(neighbors) <= set(signals.MONTAGE)
    with pytest.raises(SignalError):
        signals.default_neighbors("Oz")


def test_band_power_of_a_sine():
    block = single_channel(sine(10.0, 6.0, amplitude=4.0))
    assert signals.band_power(block, "C3", (8.0, 12.0)) == pytest.approx(8.0, rel=0.02)
    assert signals.band_power(block, "C3", (30.0, 40.0)) < 0.01
    with pytest.raises(SignalError):
        signals.band_power(single_channel(np.zeros(100)), "C3", (1.0, 3.0))


def test_frequency_bins():
    bins = signals.frequency_bins()
    assert len(bins) == 34
    assert bins[0] == (1.0, 3.0)
    assert bins[-1] == (67.0, 69.0)
    assert signals.frequency_bins((8.0, 13.0), 1.0) == [(8, 9), (9, 10), (10, 11), (11, 12), (12, 13)]


def test_r2_finds_the_modulated_cell():
    rng = np.random.default_rng(0)
    a = tone_epochs(rng, 20, 5.0)
    b = tone_epochs(rng, 20, 5.0 * math.sqrt(2))
    r2 = signals.r2_map(a, b)
    assert r2.values.shape == (len(signals.MONTAGE), 34)
    assert r2.argmax() == ("C3", (9.0, 11.0))
    assert r2.top(1)[0][2] > 0.5
    assert np.all((r2.values >= 0) & (r2.values <= 1))


def test_r2_is_symmetric():
    rng = np.random.default_rng(1)
    a = tone_epochs(rng, 5, 5.0, seconds=2.0)
    b = tone_epochs(rng, 5, 10.0, seconds=2.0)
    np.testing.assert_allclose(signals.r2_map(a, b).values, signals.r2_map(b, a).values)


def test_r2_of_identical_sets_is_zero():
    a = tone_epochs(np.random.default_rng(2), 4, 5.0, seconds=1.0)
    assert np.all(signals.r2_map(a, a).values == 0.0)


def test_r2_without_contrast_is_small():
    rng = np.random.default_rng(3)
    a = tone_epochs(rng, 100, 5.0, seconds=1.0)
    b = tone_epochs(rng, 100, 5.0, seconds=1.0)
    assert signals.r2_map(a, b).values.mean() < 0.05


def test_r2_needs_two_epochs_per_set():
    rng = np.random.default_rng(4)
    with pytest.raises(SignalError):
        signals.r2_map(tone_epochs(rng, 1, 5.0, 1.0), tone_epochs(rng, 3, 5.0, 1.0))


def test_r2_top_order():
    values = np.array([[0.1, 0.5], [0.5, 0.2]])
    r2 = signals.R2Map(values, ("C3", "C4"), ((1.0, 3.0), (3.0, 5.0)))
    assert r2.argmax() == ("C3", (3.0, 5.0))
    assert [(c, b) for c, b, _ in r2.top(3)] == [
        ("C3", (3.0, 5.0)),
        ("C4", (1.0, 3.0)),
        ("C4", (3.0, 5.0)),
    ]


def test_synth_is_deterministic():
    profile = signals.SynthProfile(counts=(2, 3, 4), epoch_seconds=1.0)
    a = signals.synth_eeg(profile, seed=5)
    b = signals.synth_eeg(profile, seed=5)
    assert a.labels == b.labels
    assert np.array_equal(a.data(), b.data())
    assert sorted(a.labels) == ["LHIM"] * 2 + ["REST"] * 3 + ["RHIM"] * 4
    assert a[0].block.n_samples == 1000
    assert not np.array_equal(a.data(), signals.synth_eeg(profile, seed=6).data())


def test_synth_lateralizes_the_mu_rhythm():
    epochs = signals.synth_eeg(signals.SynthProfile(epoch_seconds=2.0), seed=0)

    def mean_power(label, channel):
        return np.mean(
            [signals.band_power(e, channel, (9.0, 11.0)) for e in epochs.with_label(label)]
        )

    assert mean_power("LHIM", "C4") < 0.5 * mean_power("RHIM", "C4")
    assert mean_power("RHIM", "C3") < 0.5 * mean_power("LHIM", "C3")


def test_signal_files(tmp_path):
    rng = np.random.default_rng(7)
    block = SignalBlock(rng.normal(size=(2, 50)), RATE, ("C3", "C4"))
    path = tmp_path / "eeg.csv"
    signals.write_signals(block, path)
    assert path.read_text().splitlines()[0] == "time,C3,C4"

    back = signals.read_signals(path)
    assert back.channels == ("C3", "C4")
    assert back.sample_rate == pytest.approx(RATE)
    assert np.array_equal(back.samples, block.samples)


def test_bad_signal_files(tmp_path):
    path = tmp_path / "eeg.csv"
    path.write_text("t,C3\n0,1\n0.001,2\n")
    with pytest.raises(SignalError):
        signals.read_signals(path)
    path.write_text("time,Oz\n0,1\n0.001,2\n")
    with pytest.raises(SignalError):
        signals.read_signals(path)


def test_event_files(tmp_path):
    events = [signals.Event(0.0, "LHIM"), signals.Event(6.5, None), signals.Event(12.0, "RHIM")]
    path = tmp_path / "events.csv"
    signals.write_events(events, path)
    assert signals.read_events(path) == events

    path.write_text("onset,label\n1.0,JUMP\n")
    with pytest.raises(SignalError):
        signals.read_events(path)
    path.write_text("onset,label\nsoon,REST\n")
    with pytest.raises(SignalError):
        signals.read_events(path)


def test_epoch_signals():
    samples = np.tile(np.arange(10000.0), (1, 1))
    block = single_channel(samples)
    epochs = signals.epoch_signals(block, [1.0, 3.0], ["LHIM", "REST"], tmin=0.0, tmax=2.0)
    assert len(epochs) == 2
    assert epochs.labels == ["LHIM", "REST"]
    assert epochs[0].start == 1000
    assert epochs[1].block.samples[0, 0] == 3000.0
    assert epochs[1].block.n_samples == 2000

    shifted = signals.epoch_signals(block, [1.0], tmin=-0.5, tmax=0.5)
    assert shifted[0].start == 500

    with pytest.raises(SignalError):
        signals.epoch_signals(block, [9.0], tmax=2.0)
    with pytest.raises(SignalError):
        signals.epoch_signals(block, [1.0, 2.0], ["LHIM"])


def test_concatenate_then_epoch():
    epochs = signals.synth_eeg(signals.SynthProfile(counts=(1, 1, 1), epoch_seconds=1.0), seed=2)
    block, events = signals.concatenate(epochs)
    assert block.n_samples == 3000
    assert [e.onset for e in events] == [0.0, 1.0, 2.0]

    again = signals.epoch_signals(
        block, [e.onset for e in events], [e.label for e in events], tmax=1.0
    )
    assert again.labels == epochs.labels
    assert np.array_equal(again.data(), epochs.data())
