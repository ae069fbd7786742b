"""One-way and two-way (with interaction) fixed-effects ANOVA.

p-values are upper tails of the F distribution, through the regularized
incomplete beta function.

"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.special

# Sums of squares below this fraction of the total are zero.
_RELATIVE_ZERO = 1e-12


class AnovaError(ValueError):
    pass


def f_survival(f: float, df1: float, df2: float) -> float:
    """P(F > f) for F ~ F(df1, df2)."""
    if math.isinf(f):
        return 0.0
    if f <= 0:
        return 1.0
    return float(scipy.special.betainc(df2 / 2, df1 / 2, df2 / (df2 + df1 * f)))


@dataclass(frozen=True, slots=True)
class Effect:
    ss: float
    df: int
    ms: float
    f: float
    p: float


@dataclass(frozen=True, slots=True)
class OneWayResult:
    between: Effect
    ss_within: float
    df_within: int

    @property
    def f(self) -> float:
        return self.between.f

    @property
    def p(self) -> float:
        return self.between.p


def _as_groups(groups: Sequence[Sequence[float]]) -> list[np.ndarray]:
    out = [np.asarray(g, dtype=float) for g in groups]
    for g in out:
        if g.ndim != 1:
            raise AnovaError("each group must be a flat list of values")
        if not np.all(np.isfinite(g)):
            raise AnovaError("values must be finite")
    return out


def anova_oneway(groups: Sequence[Sequence[float]]) -> OneWayResult:
    data = _as_groups(groups)
    if len(data) < 2:
        raise AnovaError(f"at least 2 groups are needed, got {len(data)}")
    for i, g in enumerate(data):
        if g.size < 2:
            raise AnovaError(f"group {i} has {g.size} values, at least 2 are needed")

    everything = np.concatenate(data)
    grand = everything.mean()
    total = float(np.sum((everything - grand) ** 2))
    ss_between = float(sum(g.size * (g.mean() - grand) ** 2 for g in data))
    ss_within = float(sum(np.sum((g - g.mean()) ** 2) for g in data))

    df_between = len(data) - 1
    df_within = everything.size - len(data)
    if ss_within <= _RELATIVE_ZERO * total:
        ss_within = 0.0
    between = _test(ss_between, df_between, ss_within, df_within, total)
    return OneWayResult(between, ss_within, df_within)


def _test(ss: float, df: int, ss_within: float, df_within: int, total: float) -> Effect:
    if ss <= _RELATIVE_ZERO * total:
        ss = 0.0
    ms = ss / df
    ms_within = ss_within / df_within
    if ms_within > 0:
        f = ms / ms_within
    else:
        f = 0.0 if ss == 0 else math.inf
    return Effect(ss, df, ms, f, f_survival(f, df, df_within))


@dataclass(frozen=True, slots=True)
class TwoWayResult:
    a: Effect
    b: Effect
    interaction: Effect
    ss_within: float
    df_within: int

    @property
    def ms_within(self) -> float:
        return self.ss_within / self.df_within


def anova_twoway(cells: np.ndarray | Sequence) -> TwoWayResult:
    """Balanced two-way ANOVA. `cells[i][j]` holds the replicates of level i of
    factor A and level j of factor B."""
    try:
        data = np.asarray(cells, dtype=float)
    except ValueError:
        raise AnovaError("unbalanced cells: every cell needs the same number of replicates") from None
    if data.ndim != 3:
        raise AnovaError(
            "unbalanced cells: expected an A x B x replicates array, "
            f"got {data.ndim} dimensions"
        )
    a, b, r = data.shape
    if a < 2 or b < 2:
        raise AnovaError(f"each factor needs at least 2 levels, got {a} x {b}")
    if r < 2:
        raise AnovaError(f"at least 2 replicates per cell are needed, got {r}")
    if not np.all(np.isfinite(data)):
        raise AnovaError("values must be finite")

    grand = data.mean()
    cell = data.mean(axis=2)
    mean_a = data.mean(axis=(1, 2))
    mean_b = data.mean(axis=(0, 2))

    total = float(np.sum((data - grand) ** 2))
    ss_a = float(b * r * np.sum((mean_a - grand) ** 2))
    ss_b = float(a * r * np.sum((mean_b - grand) ** 2))
    ss_ab = float(
        r * np.sum((cell - mean_a[:, None] - mean_b[None, :] + grand) ** 2)
    )
    ss_within = float(np.sum((data - cell[:, :, None]) ** 2))
    if ss_within <= _RELATIVE_ZERO * total:
        ss_within = 0.0

    df_within = a * b * (r - 1)
    return TwoWayResult(
        _test(ss_a, a - 1, ss_within, df_within, total),
        _test(ss_b, b - 1, ss_within, df_within, total),
        _test(ss_ab, (a - 1) * (b - 1), ss_within, df_within, total),
        ss_within,
        df_within,
    )
