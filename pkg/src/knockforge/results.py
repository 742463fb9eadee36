"""Shared result container for knockoff constructions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class KnockoffResult:
    """A knockoff matrix plus the record of trivial columns (x_tilde_j == x_j)."""

    x_tilde: np.ndarray
    trivial: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def n_trivial(self) -> int:
        return int(np.count_nonzero(self.trivial))


def stack_folds(fold_results: list[KnockoffResult], info: dict | None = None) -> KnockoffResult:
    """Row-concatenates per-fold knockoffs; a column is trivial only if it is
    trivial in every fold."""
    x_tilde = np.concatenate([r.x_tilde for r in fold_results], axis=0)
    trivial = np.logical_and.reduce([r.trivial for r in fold_results])
    return KnockoffResult(x_tilde=x_tilde, trivial=trivial, info=info or {})
