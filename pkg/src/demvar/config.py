from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs shared by every analysis.

    ``exact`` switches all arithmetic to :class:`fractions.Fraction`; in that
    mode every comparison tolerance collapses to zero.
    """

    exact: bool = False
    tol_prob: float = 1e-9
    tol_e1: float = 1e-9
    value_tol: float = 1e-9
    md_cap: int = 10**6
    max_unfold_states: int = 5_000_000
    max_product_states: int = 1_000_000
    bound_override: Optional[int] = None
    seed: int = 0
    samples: int = 100_000
    exact_oracle: bool = False
    auto_oracle: bool = True
    ascent_restarts: int = 8
    ks: tuple = (1.5, 2.0, 3.0)

    def __post_init__(self):
        for name in ("tol_prob", "tol_e1", "value_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("md_cap", "max_unfold_states", "max_product_states", "samples"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.bound_override is not None and self.bound_override < 0:
            raise ValueError("bound_override must be nonnegative")

    @property
    def tol(self):
        return 0 if self.exact else self.value_tol

    def num(self, x):
        return Fraction(x) if self.exact else float(x)

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT = AnalysisConfig()
