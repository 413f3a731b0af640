import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from felab import experiments as X
from felab.filters import builtin_filter
from felab.particles import InitialVorticitySpec


def test_fit_exact_power_law():
    f = X.fit_decay_rate([(e, 3 * e * e) for e in (0.4, 0.2, 0.1, 0.05)])
    assert f.exponent == pytest.approx(2.0, abs=1e-12)
    assert f.prefactor == pytest.approx(3.0, rel=1e-12)
    assert f.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_window_keeps_smallest_eps():
    pairs = [(0.4, 1.0), (0.2, 1.0), (0.1, 0.01), (0.05, 0.0025), (0.025, 0.000625)]
    f = X.fit_decay_rate(pairs, window=3)
    assert f.window == (0.1, 0.05, 0.025)
    assert f.exponent == pytest.approx(2.0, abs=1e-12)


def test_fit_zero_and_mixed_values():
    f = X.fit_decay_rate([(0.4, 0.0), (0.2, 0.0), (0.1, 0.0)])
    assert f.verdict == "exact zero"
    with pytest.raises(ValueError):
        X.fit_decay_rate([(0.4, 1.0), (0.2, 0.0), (0.1, 0.5)])
    with pytest.raises(ValueError):
        X.fit_decay_rate([(0.4, 1.0), (0.2, 0.5)])


@given(seed=st.integers(0, 10_000))
def test_fit_recovers_perturbed_rate(seed):
    rng = np.random.default_rng(seed)
    eps = 0.4 * 2.0 ** (-np.arange(6) / 2)
    vals = eps**2 * (1 + 0.03 * rng.uniform(-1, 1, eps.size))
    assert 1.9 <= X.fit_decay_rate(zip(eps, vals)).exponent <= 2.1


def test_exponents_are_exact():
    assert X.dissipation_exponent("7/4") == Fraction(4, 7)
    assert X.dissipation_exponent(Fraction(3, 2)) == Fraction(0)
    assert X.dissipation_exponent(2) == Fraction(1)
    assert X.dissipation_exponent(math.inf) == 4
    assert X.onsager_exponent("1/2") == Fraction(1, 6)
    assert X.as_fraction(1.75) == Fraction(7, 4)


def test_monotone_verdict():
    assert X.monotone_verdict([5, 4, 3, 2])[0]
    assert X.monotone_verdict([5, 4, 4.3, 2])[0]
    assert not X.monotone_verdict([5, 4, 4.5, 2])[0]
    assert not X.monotone_verdict([5, 5.1, 3, 3.1])[0]


PATCH = InitialVorticitySpec("gaussian_patch", radius=0.5, sigma=0.3)


def test_sweep_config_validation():
    ok = dict(initial=PATCH, p="7/4", eps=[0.4, 0.3, 0.2, 0.15])
    X.SweepConfig(**ok)
    with pytest.raises(ValueError):
        X.SweepConfig(**dict(ok, eps=[0.4, 0.3, 0.2]))
    with pytest.raises(ValueError):
        X.SweepConfig(**dict(ok, eps=[0.4, 0.2, 0.3, 0.1]))
    with pytest.raises(ValueError):
        X.SweepConfig(**dict(ok, p=1))
    with pytest.raises(ValueError):
        X.SweepConfig(**dict(ok, mode="other"))
    beta = InitialVorticitySpec("power_law", beta=1.3)
    with pytest.raises(ValueError):
        X.SweepConfig(**dict(ok, initial=beta, p=2))


def _small_sweep(**kw):
    cfg = X.SweepConfig(initial=PATCH, p="7/4", eps=[0.4, 0.3, 0.2, 0.15], T=0.1, cadence=0.05,
                        grid_h_factor=0.25, **kw)
    return X.run_sweep(cfg)


def test_small_sweep_is_reproducible():
    a = _small_sweep()
    b = _small_sweep()
    assert a.to_json() == b.to_json()
    assert not a.partial and set(a.verdicts) == {"dissipation_rate", "defect_rate"}
    # tables live in rho = r / eps, so every run shares one checksum
    assert len(set(a.table_checksums.values())) == 1
    assert [r["eps"] for r in a.runs] == [0.4, 0.3, 0.2, 0.15]


def test_sweep_marks_partial_runs():
    rep = _small_sweep(max_particles=100)
    assert rep.partial and not rep.passed
    assert rep.verdicts["complete"]["failed_eps"]


def test_limit_config_validation():
    with pytest.raises(ValueError):
        X.LimitStudyConfig(PATCH, eps=[0.4, 0.2], eps_ref=0.3, delta=0.1)
    with pytest.raises(ValueError):
        X.LimitStudyConfig(PATCH, eps=[0.4, 0.2], eps_ref=0.1, delta=0.2)


def test_small_limit_study():
    cfg = X.LimitStudyConfig(PATCH, eps=[0.4, 0.3, 0.2], eps_ref=0.1, delta=0.05, T=0.2, dt=0.05,
                             R=1.0, r=1.0, grid_h=0.05)
    out = X.euler_limit_study(cfg)
    assert len(out["times"]) == 3
    diffs = [row["diff"] for row in out["rows"]]
    assert np.all(np.asarray(diffs) > 0)
    assert out["passed"] == all(v["pass"] for v in out["verdicts"].values())


def test_corrupted_table_breaks_uniform_decay():
    bad = X.corrupted_decay_check(builtin_filter("gaussian"))
    assert bad["spread"] > 0.05 and not bad["pass"]
