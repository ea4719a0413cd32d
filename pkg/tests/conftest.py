import numpy as np
import pytest

from spoofoptics.corpus import CorpusConfig, generate_pairs
from spoofoptics.image import sphere_normal_map
from spoofoptics.padlab import feature_matrix
from spoofoptics.sh import lambertian_kernel


class SmallCorpus:
    """Default-config scenes rendered in memory, with their features."""

    def __init__(self, n):
        self.cfg = CorpusConfig(n_per_class=n, seed=1234)
        self.pairs = generate_pairs(self.cfg, threads=1)
        self.normals = sphere_normal_map(self.cfg.resolution)
        self.kernel = lambertian_kernel(3)
        self.live = [p.live for p in self.pairs]
        self.spoof = [p.spoof for p in self.pairs]
        self.images = self.live + self.spoof
        self.labels = np.r_[np.ones(n), np.zeros(n)].astype(np.int64)
        self.features = feature_matrix(self.images, self.normals, self.kernel)


@pytest.fixture(scope="session")
def small_corpus():
    return SmallCorpus(80)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines, which are otherwise captured."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
