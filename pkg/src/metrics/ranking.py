"""
Agreement between real and proxy success rates of a policy family.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from ..utils.errors import ShapeError, TooFewPolicies, ZeroVariance

TABLE_COLUMNS = ["policy", "real_rate", "proxy_rate"]


@dataclass(eq=False)
class SuccessTable:
    """Real success rate R_i and proxy (world-model) success rate R_S,i per policy."""

    real: np.ndarray
    proxy: np.ndarray
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=float).reshape(-1)
        self.proxy = np.asarray(self.proxy, dtype=float).reshape(-1)
        if self.real.shape != self.proxy.shape:
            raise ShapeError(f"{self.real.size} real rates but {self.proxy.size} proxy rates")
        if not self.names:
            self.names = [f"policy_{i}" for i in range(self.real.size)]
        if len(self.names) != self.real.size:
            raise ShapeError(f"{len(self.names)} names for {self.real.size} policies")

    def __len__(self) -> int:
        return self.real.size

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "SuccessTable":
        return cls(frame["real_rate"].to_numpy(), frame["proxy_rate"].to_numpy(), [str(n) for n in frame["policy"]])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"policy": self.names, "real_rate": self.real, "proxy_rate": self.proxy})

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)


def _require_policies(table: SuccessTable) -> None:
    if len(table) < 2:
        raise TooFewPolicies(f"ranking metrics need at least two policies, got {len(table)}")


def rank_violations(table: SuccessTable) -> np.ndarray:
    """(N, N) matrix of |R_i - R_j| where the proxy strictly reverses the real order of i, j."""
    r, rs = table.real, table.proxy
    weight = np.abs(r[:, None] - r[None, :])
    # a tie on either side is not a reversal
    discordant = (rs[:, None] - rs[None, :]) * (r[:, None] - r[None, :]) < 0
    return weight * discordant


def mmrv(table: SuccessTable) -> float:
    """
    Mean maximum rank violation.

    Strict inequalities only: a tie on either side contributes no
    violation.

    Raises:
        TooFewPolicies: Fewer than two policies
    """
    _require_policies(table)
    return float(rank_violations(table).max(axis=1).mean())


def pearson_r(table: SuccessTable) -> float:
    """
    Sample Pearson correlation between real and proxy rates.

    Raises:
        TooFewPolicies: Fewer than two policies
        ZeroVariance: Either column is constant
    """
    _require_policies(table)
    for column in (table.real, table.proxy):
        if np.all(column == column[0]):
            raise ZeroVariance("a success-rate column is constant")
    dr = table.real - table.real.mean()
    ds = table.proxy - table.proxy.mean()
    sr, ss = np.sqrt(np.sum(dr * dr)), np.sqrt(np.sum(ds * ds))
    return float(np.clip(np.sum(dr * ds) / (sr * ss), -1.0, 1.0))


def ranking_summary(table: SuccessTable) -> dict:
    """MMRV and Pearson r; r is NaN when a column is constant."""
    try:
        r = pearson_r(table)
    except ZeroVariance:
        r = float("nan")
    return {"policies": len(table), "mmrv": mmrv(table), "pearson_r": r}


def success_rates(outcomes: Sequence[Sequence[bool]]) -> np.ndarray:
    return np.array([np.mean(np.asarray(o, dtype=float)) if len(o) else 0.0 for o in outcomes])
