import math

import numpy as np
import pytest

from vdm.divergences import make_spec
from vdm.verify import (Check, biconjugate, conjugate_checks, golden_max, gradient_checks, random_mixture,
                        run_suites, saddle_checks)


class TestHelpers:
    def test_golden_max(self):
        assert golden_max(lambda x: -(x - 1.3) ** 2 + 2.0, -20, 20) == pytest.approx(2.0, abs=1e-15)

    def test_biconjugate_hellinger(self):
        spec = make_spec("hellinger")
        for u in (0.2, 1.0, 7.0):
            assert biconjugate(spec, u) == pytest.approx((math.sqrt(u) - 1) ** 2, abs=1e-9)

    def test_random_mixture_valid(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = random_mixture(rng)
            assert abs(sum(m.weights) - 1.0) < 1e-12


class TestSuites:
    def test_conjugates_single_spec(self):
        checks = conjugate_checks([make_spec("jeffrey")])
        assert all(isinstance(c, Check) for c in checks)
        assert all(c.passed for c in checks), [c for c in checks if not c.passed]

    def test_gradients(self):
        checks = gradient_checks(n_nets=6, seed=3)
        assert len(checks) == 6 and all(c.passed for c in checks)

    def test_saddle(self):
        checks = saddle_checks(n_instances=5, seed=1)
        assert all(c.passed for c in checks)

    def test_run_suites_timing(self):
        results = run_suites(["saddle"])
        checks, seconds = results["saddle"]
        assert len(checks) == 20 and seconds > 0
