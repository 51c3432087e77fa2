import time

import pytest

from stlcbf import demo_config, run_construct


@pytest.fixture(scope="session")
def demo_doc():
    """One offline construction of the packaged demo, shared by the
    end-to-end acceptance tests.  Returns (config, document, elapsed_s)."""
    cfg = demo_config()
    t0 = time.perf_counter()
    doc = run_construct(cfg)
    elapsed = time.perf_counter() - t0
    return cfg, doc, elapsed
