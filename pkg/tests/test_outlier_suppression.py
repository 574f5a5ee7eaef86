"""Weak connectivity shields senders from receiving-side outlier data.

All eight agents classify points inside vs outside an ellipse; the three
receiving agents additionally see a +1 outlier cluster far from the origin.
Under the weak topology the sending agents never ingest that cluster, so
their classifier keeps rejecting the outlier region, while a fully
connected network lets the outliers inflate everyone's +1 region.
"""
import numpy as np

import atcnet as an
from atcnet.costs import EllipseSampler, LogisticCost, quadratic_features

from conftest import EIGHT_AGENT, FULLY_CONNECTED

OUTLIER_CENTER = (6.0, 6.0)


def _train(matrix, dirty_agents):
    clean = EllipseSampler()
    dirty = EllipseSampler(outlier_fraction=0.1, outlier_center=OUTLIER_CENTER)
    models = [
        LogisticCost(
            rho=0.01,
            sampler=dirty if k in dirty_agents else clean,
            eval_samples=50000,
        )
        for k in range(8)
    ]
    run = an.run_ensemble(
        an.validate(matrix),
        models,
        an.StepSizeProfile(0.01, np.ones(8)),
        np.zeros((8, 6)),
        iterations=20000,
        n_runs=1,
        master_seed=41,
        record_iterates=True,
    )[0]
    return run.iterates[-500:].mean(axis=0)


def test_weak_topology_keeps_senders_clear_of_outliers():
    weak = _train(EIGHT_AGENT, dirty_agents=(5, 6, 7))
    full = _train(FULLY_CONNECTED, dirty_agents=(5, 6, 7))
    h_outlier = quadratic_features(np.array([OUTLIER_CENTER]))[0]
    h_origin = quadratic_features(np.array([[0.0, 0.0]]))[0]

    # both classifiers keep the ellipse interior in class +1
    assert weak[0] @ h_origin > 0 and full[0] @ h_origin > 0
    # the sheltered sender firmly rejects the outlier region ...
    assert weak[0] @ h_outlier < 0
    # ... while the fully-connected boundary is dragged toward including it
    assert full[0] @ h_outlier > weak[0] @ h_outlier
