import numpy as np
import pytest

import bciarm.erp as erp
import bciarm.signals as signals
from bciarm.erp import NoP300Peak, P300Features, P300Record
from bciarm.signals import Epoch, EpochSet, SignalBlock

RATE = signals.SAMPLE_RATE


def epochs_with(wave: np.ndarray, n: int = 20, noise: float = 1.0, seed: int = 0) -> EpochSet:
    rng = np.random.default_rng(seed)
    pz = signals.MONTAGE.index("Pz")
    out = []
    for _ in range(n):
        samples = rng.normal(0.0, noise, size=(len(signals.MONTAGE), wave.size))
        samples[pz] += wave
        out.append(Epoch(SignalBlock(samples)))
    return EpochSet(tuple(out))


def test_times():
    t = erp.times_ms(RATE)
    assert t.size == 1000
    assert t[0] == pytest.approx(-200.0)
    assert t[200] == pytest.approx(0.0)
    assert t[-1] == pytest.approx(799.0)


def test_synthetic_p300():
    epochs = erp.synth_p300(seed=0)
    for channel in erp.P300_CHANNELS:
        features = erp.p300_extract(epochs, channel)
        assert features.latency == pytest.approx(350.0, abs=10.0)
        assert features.amplitude == pytest.approx(5.0, rel=0.15)


def test_the_first_peak_in_the_window_wins():
    t = erp.times_ms(RATE) / 1000.0
    wave = erp.p300_waveform(t, 4.0, 400.0, envelope_ms=60.0) + erp.p300_waveform(
        t, 6.0, 600.0, envelope_ms=60.0
    )
    features = erp.p300_extract(epochs_with(wave), "Pz")
    assert features.latency == pytest.approx(400.0, abs=15.0)
    assert 3.0 <= features.amplitude <= 5.0


def test_latency_follows_the_stimulus():
    early = erp.p300_extract(erp.synth_p300(latency_ms=300.0, seed=1), "Pz")
    late = erp.p300_extract(erp.synth_p300(latency_ms=350.0, seed=1), "Pz")
    assert late.latency - early.latency == pytest.approx(50.0, abs=2.0)
    assert late.amplitude == pytest.approx(early.amplitude, rel=0.05)


def test_flat_signal_has_no_peak():
    flat = np.zeros(1000)
    with pytest.raises(NoP300Peak):
        erp.p300_extract(epochs_with(flat, n=3, noise=0.0), "Pz")


def test_baseline_is_removed():
    offset = np.full(1000, 50.0)
    waveform = erp.average_waveform(epochs_with(offset, n=3, noise=0.0), "Pz")
    assert np.max(np.abs(waveform)) < 1e-6


def test_epoch_length_is_checked():
    short = epochs_with(np.zeros(900), n=2)
    with pytest.raises(signals.SignalError):
        erp.p300_extract(short, "Pz")
    with pytest.raises(signals.SignalError):
        erp.average_waveform(EpochSet(()), "Pz")


def test_latency_range():
    assert P300Features(3.0, 200.0).latency == 200.0
    with pytest.raises(ValueError):
        P300Features(3.0, 150.0)
    with pytest.raises(ValueError):
        P300Features(3.0, 501.0)


def records(skip=None):
    out = []
    for trial in (1, 2):
        for channel in ("Pz", "O1", "O2"):
            for session in (1, 2):
                if (trial, channel, session) == skip:
                    continue
                latency = 300.0 + 10 * trial + session
                out.append(P300Record(trial, channel, session, P300Features(2.0, latency)))
    return out


def test_p300_table():
    cells, trials, channels = erp.p300_table(records())
    assert cells.shape == (2, 3, 2)
    assert trials == [1, 2]
    assert channels == ["O1", "O2", "Pz"]
    assert cells[1, 2].tolist() == [321.0, 322.0]

    amplitudes, _, _ = erp.p300_table(records(), "amplitude")
    assert np.all(amplitudes == 2.0)


def test_p300_table_errors():
    with pytest.raises(ValueError):
        erp.p300_table(records(skip=(2, "O1", 1)))
    with pytest.raises(ValueError):
        erp.p300_table(records() + records()[:1])
    with pytest.raises(ValueError):
        erp.p300_table(records(), "width")


def fatigue_records(latency) -> list[P300Record]:
    return [
        P300Record(t, c, s, P300Features(5.0 + 0.2 * t + 0.1 * s, latency(t, c, s)))
        for t in range(3)
        for c in ("Pz", "O2", "O1")
        for s in range(3)
    ]


def test_fatigue_analysis_picks_the_latency_channel():
    def latency(t, c, s):
        if c == "Pz":
            return 300.0 + 50.0 * t + s
        if c == "O1":
            return 300.0 + t + 10.0 * s
        return 300.0 + 5.0 * (t % 2) + 10.0 * s

    analysis = erp.fatigue_analysis(fatigue_records(latency))
    assert set(analysis.tests) == {
        (c, f) for c in ("O1", "O2", "Pz") for f in ("amplitude", "latency")
    }
    assert analysis.selected == "Pz"
    # O1: group means 310, 311, 312 and within-group SS 200 each.
    assert analysis.tests[("O1", "latency")].f == pytest.approx(0.03)
    assert analysis.tests[("Pz", "latency")].f == pytest.approx(7500.0)
    assert analysis.tests[("Pz", "latency")].between.df == 2
    assert analysis.tests[("Pz", "latency")].df_within == 6


def test_fatigue_analysis_ties_go_to_montage_order():
    analysis = erp.fatigue_analysis(fatigue_records(lambda t, c, s: 300.0 + 10.0 * s))
    assert analysis.selected == "O1"
    assert analysis.tests[("O2", "latency")].p == 1.0
    with pytest.raises(ValueError):
        erp.fatigue_analysis([])
