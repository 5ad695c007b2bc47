from typing import List, Tuple

import numpy as np
from sklearn.model_selection import KFold

from .errors import InsufficientData


def fold_splits(n: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffled k-fold partition of range(n) into (train, test) index pairs."""
    if folds < 2:
        raise InsufficientData(f"need at least 2 folds, got {folds}")
    if n < folds:
        raise InsufficientData(f"{n} samples cannot be split into {folds} folds")
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    return list(splitter.split(np.arange(n)))


def fold_seed(base_seed: int, fold: int) -> int:
    return base_seed + fold
