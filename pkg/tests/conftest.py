import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kmproxy.store import EmbeddingDataset


def make_dataset(vectors, labels, name="ds", num_classes=None, prefix="r"):
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float32))
    labels = np.asarray(labels, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return EmbeddingDataset(
        name=name,
        dim=vectors.shape[1],
        num_classes=num_classes,
        ids=[f"{prefix}{i}" for i in range(len(labels))],
        labels=labels,
        vectors=vectors,
    )


@pytest.fixture
def tiny_ds():
    return make_dataset(
        [[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]], [0, 0, 1, 1]
    )


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile (or load from disk cache) every jitted kernel once, so
    # individual tests measure the work and not the JIT.
    from kmproxy import distances as D
    from kmproxy import proxy as P

    a = np.arange(8, dtype=np.float32).reshape(4, 2) + 1.0
    b = a + 0.5
    for metric in D.METRICS:
        for exact in (True, False):
            D.self_nearest(a, metric, exact=exact)
            D.cross_nearest(a, b, metric, exact=exact)
        model = P.new_model(1, 2, 2, metric)
        P.update_proxies(model, a, np.array([0, 0, 1, 1]))
        ds = EmbeddingDataset("warm", 2, 2, ["a", "b", "c", "d"],
                              np.array([0, 0, 1, 1]), a)
        P.finalize_radii(model, ds)
        P.nearest_proxy_batch(model, b)
