"""Three-class motor-imagery classifier built from pairwise LDAs.

Each stimulus epoch is cut into 64 overlapping two-second sub-epochs, one
every 0.0625 s. A pairwise discriminant labels every sub-epoch and the epoch
takes the most frequent label. The general classifier then names the class
that at least two of the three pairwise classifiers agree on.

Features are log band powers of Laplacian-filtered channels. Which
(channel, band) pairs to use is read off the r^2 maps of the training data.

"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Sequence, TypeAlias

import numpy as np

import bciarm.signals as signals
from bciarm.signals import CLASSES, EpochSet, FeatureSpec, Label, SignalBlock

logger = logging.getLogger(__name__)

Pair: TypeAlias = tuple[Label, Label]
PAIRS: tuple[Pair, ...] = (("LHIM", "RHIM"), ("LHIM", "REST"), ("RHIM", "REST"))

Decision: TypeAlias = Label | Literal["UNDECIDED"]
UNDECIDED: Decision = "UNDECIDED"

N_SUBEPOCHS = 64
SUBEPOCH_SECONDS = 2.0
HOP_SECONDS = 0.0625
# The last window starts 63 hops in and lasts 2 s.
MIN_EPOCH_SECONDS = 6.0

MODEL_HEADER = "# bciarm classifier v1"


class TrainingError(ValueError):
    pass


class MalformedPairLabels(ValueError):
    pass


@dataclass(frozen=True, slots=True, eq=False)
class LinearDiscriminant:
    """score(x) = weights . x + bias; positive scores name the second class."""

    pair: Pair
    weights: np.ndarray
    bias: float

    def score(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.weights + self.bias

    def predict(self, x: np.ndarray) -> list[Label]:
        scores = np.atleast_1d(self.score(np.atleast_2d(x)))
        return [self.pair[1] if s > 0 else self.pair[0] for s in scores]


def lda_train(
    features: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    pair: Pair = ("LHIM", "RHIM"),
    regularization: float = 1e-6,
) -> LinearDiscriminant:
    """Fisher discriminant between samples labeled 0 and 1.

    The pooled within-class covariance is shrunk by
    `regularization * trace / dim` on the diagonal.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels)
    if x.shape[0] != y.shape[0]:
        raise TrainingError(f"{x.shape[0]} samples for {y.shape[0]} labels")
    if x.shape[1] < 1:
        raise TrainingError("at least one feature is needed")

    x0, x1 = x[y == 0], x[y == 1]
    for name, part in zip(pair, (x0, x1)):
        if len(part) < 2:
            raise TrainingError(f"class {name} has {len(part)} samples, at least 2 are needed")
    if np.all(x == x[0]):
        raise TrainingError("all training samples are identical")

    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    scatter = (x0 - mu0).T @ (x0 - mu0) + (x1 - mu1).T @ (x1 - mu1)
    pooled = scatter / (len(x) - 2)
    dim = pooled.shape[0]
    shrink = regularization * np.trace(pooled) / dim
    if shrink <= 0:
        shrink = regularization
    w = np.linalg.solve(pooled + shrink * np.eye(dim), mu1 - mu0)
    b = -float(w @ (mu0 + mu1)) / 2
    return LinearDiscriminant(pair, w, b)


# Features


def _filtered(block: SignalBlock, spec: FeatureSpec) -> np.ndarray:
    """Laplacian then band-pass, one row per feature, over the whole block."""
    rows = []
    for channel, (lo, hi) in spec.features:
        spatial = signals.laplacian(block, channel, signals.default_neighbors(channel))
        rows.append(signals.bandpass_array(spatial, block.sample_rate, lo, hi))
    return np.array(rows)


def _log_power(filtered: np.ndarray) -> np.ndarray:
    return np.log1p(np.mean(filtered**2, axis=-1))


def subepoch_starts(sample_rate: float) -> list[int]:
    return [int(round(k * HOP_SECONDS * sample_rate)) for k in range(N_SUBEPOCHS)]


def subepoch_features(block: SignalBlock, spec: FeatureSpec) -> np.ndarray:
    """Feature vectors of the 64 sub-epochs, shape (64, len(spec))."""
    if block.duration < MIN_EPOCH_SECONDS - 1e-9:
        raise signals.SignalError(
            f"sub-epoch voting needs {MIN_EPOCH_SECONDS:g} s of signal, got {block.duration:g} s"
        )
    filtered = _filtered(block, spec)
    length = int(round(SUBEPOCH_SECONDS * block.sample_rate))
    return np.array(
        [_log_power(filtered[:, s : s + length]) for s in subepoch_starts(block.sample_rate)]
    )


def select_features(r2: signals.R2Map, k: int = 2) -> FeatureSpec:
    """The k most discriminative (channel, bin) cells of an r^2 map."""
    return FeatureSpec(tuple((channel, band) for channel, band, _ in r2.top(k)))


# Voting


@dataclass(frozen=True, slots=True)
class Vote:
    label: Label
    tie: bool
    counts: tuple[int, int]


def tally(labels: Sequence[Label], pair: Pair) -> Vote:
    """Most frequent label. A tie goes to the first class of the pair."""
    for label in labels:
        if label not in pair:
            raise MalformedPairLabels(f"{label!r} is not one of {pair}")
    counts = Counter(labels)
    first, second = counts[pair[0]], counts[pair[1]]
    if second > first:
        return Vote(pair[1], False, (first, second))
    return Vote(pair[0], first == second, (first, second))


def subepoch_vote(
    epoch: SignalBlock | signals.Epoch,
    discriminant: LinearDiscriminant,
    spec: FeatureSpec,
) -> Vote:
    block = epoch.block if isinstance(epoch, signals.Epoch) else epoch
    return tally(discriminant.predict(subepoch_features(block, spec)), discriminant.pair)


def general_classify(votes: Sequence[Label] | Mapping[Pair, Label]) -> Decision:
    """The class named by at least two pairwise results, or UNDECIDED.

    Sequences are read in the order of PAIRS.
    """
    if isinstance(votes, Mapping):
        if set(votes) != set(PAIRS):
            raise MalformedPairLabels(f"votes for {sorted(votes)} instead of {PAIRS}")
        ordered = [votes[p] for p in PAIRS]
    else:
        ordered = list(votes)
        if len(ordered) != len(PAIRS):
            raise MalformedPairLabels(f"{len(ordered)} votes for {len(PAIRS)} pairs")
    for pair, label in zip(PAIRS, ordered):
        if label not in pair:
            raise MalformedPairLabels(f"{label!r} is not one of {pair}")

    label, count = Counter(ordered).most_common(1)[0]
    return label if count >= 2 else UNDECIDED


# Models


@dataclass(frozen=True, slots=True)
class ClassifierModel:
    spec: FeatureSpec
    discriminants: tuple[LinearDiscriminant, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(d.pair for d in self.discriminants) != PAIRS:
            raise TrainingError(f"discriminants must cover {PAIRS} in order")
        for d in self.discriminants:
            if d.weights.shape != (len(self.spec),):
                raise TrainingError(
                    f"{d.pair}: {d.weights.shape[0]} weights for {len(self.spec)} features"
                )

    def save(self, path: Path) -> None:
        with open(path, "w") as f:
            f.write(format_model(self))

    @classmethod
    def load(cls, path: Path) -> "ClassifierModel":
        with open(path) as f:
            return parse_model(f.read())


def format_model(model: ClassifierModel) -> str:
    lines = [MODEL_HEADER]
    for key, value in sorted(model.metadata.items()):
        lines.append(f"# {key}: {value}")
    lines.append(f"features {len(model.spec)}")
    for channel, (lo, hi) in model.spec.features:
        lines.append(f"{channel} {lo!r} {hi!r}")
    for d in model.discriminants:
        lines.append(" ".join([d.pair[0], d.pair[1], repr(d.bias), *map(repr, map(float, d.weights))]))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> ClassifierModel:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != MODEL_HEADER:
        raise TrainingError("not a bciarm classifier model")

    metadata = {}
    body = []
    for line in lines[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
        else:
            body.append(line)

    try:
        head, count = body[0].split()
        if head != "features":
            raise TrainingError(f"expected a features line, got {body[0]!r}")
        n = int(count)
        features = []
        for line in body[1 : 1 + n]:
            channel, lo, hi = line.split()
            features.append((channel, (float(lo), float(hi))))
        discriminants = []
        for line in body[1 + n :]:
            a, b, bias, *weights = line.split()
            discriminants.append(
                LinearDiscriminant((a, b), np.array([float(w) for w in weights]), float(bias))
            )
    except (IndexError, ValueError) as e:
        raise TrainingError(f"malformed model: {e}") from e

    return ClassifierModel(FeatureSpec(tuple(features)), tuple(discriminants), metadata)


def pairwise_features(epochs: EpochSet, k: int = 2) -> FeatureSpec:
    """Union of the top-k cells of the three pairwise r^2 maps."""
    chosen: list[tuple[str, signals.Band]] = []
    for a, b in PAIRS:
        r2 = signals.r2_map(epochs.with_label(a), epochs.with_label(b))
        for channel, band, value in r2.top(k):
            logger.debug("%s/%s: r2 %.3f at %s %s Hz", a, b, value, channel, band)
            if (channel, band) not in chosen:
                chosen.append((channel, band))
    return FeatureSpec(tuple(chosen))


def train_classifier(
    epochs: EpochSet,
    spec: FeatureSpec | None = None,
    k: int = 2,
    regularization: float = 1e-6,
) -> ClassifierModel:
    """Train the three pairwise discriminants on every sub-epoch of `epochs`."""
    for label in CLASSES:
        if len(epochs.with_label(label)) < 2:
            raise TrainingError(f"class {label} needs at least 2 training epochs")
    if spec is None:
        spec = pairwise_features(epochs, k)
    logger.info("training on %d epochs with features %s", len(epochs), spec.describe())

    windows = {label: [] for label in CLASSES}
    for epoch in epochs:
        if epoch.label is not None:
            windows[epoch.label].append(subepoch_features(epoch.block, spec))
    stacked = {label: np.concatenate(w) for label, w in windows.items()}

    discriminants = []
    for a, b in PAIRS:
        x = np.concatenate([stacked[a], stacked[b]])
        y = np.concatenate([np.zeros(len(stacked[a])), np.ones(len(stacked[b]))])
        discriminants.append(lda_train(x, y, (a, b), regularization))

    metadata = {
        "epochs": str(len(epochs)),
        "subepochs": str(N_SUBEPOCHS),
        "sample_rate": f"{epochs[0].block.sample_rate:g}",
    }
    return ClassifierModel(spec, tuple(discriminants), metadata)


@dataclass(frozen=True, slots=True)
class Classification:
    votes: tuple[Vote, ...]
    label: Decision


def classify_epoch(
    model: ClassifierModel, epoch: SignalBlock | signals.Epoch
) -> Classification:
    block = epoch.block if isinstance(epoch, signals.Epoch) else epoch
    x = subepoch_features(block, model.spec)
    votes = tuple(tally(d.predict(x), d.pair) for d in model.discriminants)
    return Classification(votes, general_classify([v.label for v in votes]))


@dataclass(frozen=True, slots=True)
class ClassificationReport:
    """Percentages. UNDECIDED epochs count as misses in `accuracy`."""

    accuracy: float
    decided_accuracy: float | None
    undecided: int
    pair_accuracy: Mapping[Pair, float]
    confusion: Mapping[tuple[Label, Decision], int]


def evaluate(model: ClassifierModel, epochs: EpochSet) -> ClassificationReport:
    results = []
    for epoch in epochs:
        if epoch.label is None:
            raise TrainingError("evaluation needs labeled epochs")
        results.append((epoch.label, classify_epoch(model, epoch)))

    n = len(results)
    if n == 0:
        raise TrainingError("nothing to evaluate")
    correct = sum(c.label == truth for truth, c in results)
    decided = [(truth, c) for truth, c in results if c.label != UNDECIDED]
    decided_accuracy = (
        100.0 * sum(c.label == truth for truth, c in decided) / len(decided)
        if decided
        else None
    )

    pair_accuracy = {}
    for i, pair in enumerate(PAIRS):
        relevant = [(truth, c.votes[i].label) for truth, c in results if truth in pair]
        if relevant:
            pair_accuracy[pair] = 100.0 * sum(t == v for t, v in relevant) / len(relevant)

    confusion = Counter((truth, c.label) for truth, c in results)
    return ClassificationReport(
        100.0 * correct / n,
        decided_accuracy,
        n - len(decided),
        pair_accuracy,
        dict(confusion),
    )

