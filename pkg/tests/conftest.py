"""Fixtures partagées: petits tenseurs de déclarations et hyperparamètres"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Ajouter le répertoire parent au path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.priors import HyperParams
from src.reports import ReporterMask, build_report_tensor


def random_reports(rng: np.random.Generator, n_nodes: int, mask: ReporterMask,
                   density: float = 0.5, max_count: int = 3, n_reporters: int = None):
    """Déclarations aléatoires sur tous les triplets éligibles"""
    n_reporters = n_nodes if n_reporters is None else n_reporters
    records = []
    for i in range(n_nodes):
        for j in range(n_nodes):
            for m in range(n_reporters):
                if i == j or not mask.contains([i], [j], [m], n_nodes, n_reporters)[0]:
                    continue
                if rng.random() < density:
                    records.append((i, j, m, int(rng.integers(1, max_count + 1))))
    return build_report_tensor(records, n_nodes, mask, n_reporters)


def random_hyperparams(rng: np.random.Generator, n_reporters: int, n_levels: int = 2) -> HyperParams:
    return HyperParams(
        alpha=rng.uniform(0.5, 2.0, n_reporters), beta=rng.uniform(0.5, 2.0, n_reporters),
        a=rng.uniform(0.5, 2.0, n_levels), b=rng.uniform(0.5, 2.0, n_levels),
        c=float(rng.uniform(0.5, 2.0)), d=float(rng.uniform(0.5, 2.0)),
        p=rng.dirichlet(np.ones(n_levels) * 2.0),
    )


@pytest.fixture
def small_reports():
    """Trois nœuds, masque self_dyads, une paire réciproque"""
    records = [
        (0, 1, 0, 1), (1, 0, 0, 1),   # 0 déclare 0→1 et 1→0
        (0, 1, 1, 2),                 # 1 confirme 0→1
        (1, 2, 2, 1),
        (2, 0, 2, 1),
    ]
    return build_report_tensor(records, 3, ReporterMask.self_dyads())


@pytest.fixture
def default_priors():
    return HyperParams()
