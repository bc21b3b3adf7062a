"""Travel-distance efficiency score."""
from __future__ import annotations

from dataclasses import dataclass


class ScoreError(ValueError):
    pass


def score(d_base: float, d_dp: float) -> float:
    """Percentage reduction in travel distance relative to the baseline; negative when longer."""
    if not d_base > 0:
        raise ScoreError(f"baseline distance must be positive, got {d_base}")
    if d_dp < 0:
        raise ScoreError(f"planned distance must be non-negative, got {d_dp}")
    return (d_base - d_dp) / d_base * 100.0


@dataclass(frozen=True)
class ScoreReport:
    d_baseline: float
    d_dp: float
    score: float

    @classmethod
    def from_distances(cls, d_base: float, d_dp: float) -> "ScoreReport":
        return cls(d_base, d_dp, score(d_base, d_dp))

    def to_dict(self) -> dict:
        return {"d_baseline": self.d_baseline, "d_dp": self.d_dp, "score": self.score}

    def formula(self) -> str:
        return (f"score = (D_baseline - D_DP) / D_baseline x 100 = ({self.d_baseline:.3f} - {self.d_dp:.3f}) / "
                f"{self.d_baseline:.3f} x 100 = {self.score:.3f}%")
