import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from felab import particles as P
from felab.filters import builtin_filter
from felab.kernels import kernel_table

GAUSS = builtin_filter("gaussian")
BLOB = builtin_filter("algebraic_blob")


# ---- initial data ---------------------------------------------------------------


def test_gaussian_patch_circulation_second_order():
    spec = P.InitialVorticitySpec("gaussian_patch", radius=1.0, amplitude=2.0, sigma=0.4)
    exact = spec.total_circulation()
    assert exact == pytest.approx(2.0 * math.pi * 0.16 * -math.expm1(-1 / 0.16), rel=1e-15)
    errs = [abs(P.discretize(spec, d, 0.1).total_circulation() - exact) for d in (0.1, 0.05, 0.025)]
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_vortex_patch_circulation_tends_to_disk_area():
    spec = P.InitialVorticitySpec("vortex_patch", radius=0.7)
    errs = [abs(P.discretize(spec, d, 0.1).total_circulation() - math.pi * 0.49) for d in (0.1, 0.025, 0.00625)]
    assert errs[-1] < errs[0] and errs[-1] / (math.pi * 0.49) < 5e-3


def test_power_law_circulation():
    spec = P.InitialVorticitySpec("power_law", radius=1.0, beta=1.2)
    assert spec.total_circulation() == pytest.approx(2 * math.pi / 0.8, rel=1e-14)
    g = [P.discretize(spec, d, 0.1).total_circulation() for d in (0.05, 0.0125)]
    assert abs(g[1] - 2 * math.pi / 0.8) < abs(g[0] - 2 * math.pi / 0.8)
    assert g[1] == pytest.approx(2 * math.pi / 0.8, rel=5e-3)


def test_integrability_class():
    spec = P.InitialVorticitySpec("power_law", beta=2 / 1.75 - 0.05)
    assert spec.in_Lp(1.75) and not spec.in_Lp(2.0)
    assert spec.p_max == pytest.approx(2 / (2 / 1.75 - 0.05))
    assert P.InitialVorticitySpec("vortex_patch").p_max == math.inf


def test_multi_blob_is_seeded():
    a = P.InitialVorticitySpec("multi_blob", seed=4).blobs()
    b = P.InitialVorticitySpec("multi_blob", seed=4).blobs()
    c = P.InitialVorticitySpec("multi_blob", seed=5).blobs()
    assert a == b and a != c


def test_bad_initial_data_rejected():
    with pytest.raises(ValueError):
        P.InitialVorticitySpec("spiral")
    with pytest.raises(ValueError):
        P.InitialVorticitySpec("power_law", beta=2.0)
    with pytest.raises(ValueError):
        P.discretize(P.InitialVorticitySpec("vortex_patch", radius=0.1), 0.5, 0.1)


# ---- velocities -------------------------------------------------------------------


def test_single_particle_self_velocity_zero():
    ens = P.point_vortices([[0.3, -0.2]], [1.0], 0.1)
    assert np.all(P.velocity_at(ens, np.array([0.3, -0.2])) == 0.0)
    assert np.all(P.velocities(ens) == 0.0)


@pytest.mark.parametrize("eps", [0.1, 0.5, 2.0])
def test_blob_velocity_closed_form(eps):
    ens = P.point_vortices([[0.0, 0.0]], [2 * math.pi], eps, BLOB)
    v = P.velocity_at(ens, np.array([1.0, 0.0]))
    assert v[0] == pytest.approx(0.0, abs=1e-16)
    assert v[1] == pytest.approx(1 / (1 + eps**2), rel=1e-14)


def test_symmetric_pair_velocity_at_origin():
    ens = P.point_vortices([[-0.4, 0.1], [0.4, -0.1]], [1.3, 1.3], 0.2)
    assert np.allclose(P.velocity_at(ens, np.zeros(2)), 0.0, atol=1e-16)


@pytest.mark.parametrize("filt", ["gaussian", "algebraic_blob", "euler_alpha"])
def test_table_and_closed_form_paths_agree(filt):
    # the compiled sums use closed forms for the first two filters and the table for the third
    spec = builtin_filter(filt)
    rng = np.random.default_rng(3)
    ens = P.point_vortices(rng.uniform(-1, 1, (12, 2)), rng.normal(size=12), 0.3, spec)
    tab = kernel_table(spec, 0.3)
    ref = np.zeros((12, 2))
    for i in range(12):
        for j in range(12):
            if i != j:
                d = ens.positions[i] - ens.positions[j]
                r = math.hypot(*d)
                ref[i] += np.array([-d[1], d[0]]) * float(tab.enclosed_mass(r / 0.3)) / (2 * math.pi * r * r) \
                    * ens.circulations[j]
    assert np.allclose(P.velocities(ens), ref, rtol=1e-10, atol=1e-14)


@given(seed=st.integers(0, 10_000), shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_velocity_translation_invariant(seed, shift):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (6, 2))
    g = rng.normal(size=6)
    a = P.velocities(P.point_vortices(x, g, 0.2))
    b = P.velocities(P.point_vortices(x + np.array(shift), g, 0.2))
    assert np.allclose(a, b, rtol=1e-8, atol=1e-8)


@given(seed=st.integers(0, 10_000))
def test_rk4_step_conserves_circulation_and_impulse(seed):
    rng = np.random.default_rng(seed)
    ens = P.point_vortices(rng.uniform(-1, 1, (8, 2)), rng.normal(size=8), 0.3)
    c0 = ens.center_of_vorticity()
    new = P.step_rk4(ens, 1e-2)
    assert new.total_circulation() == ens.total_circulation()
    scale = np.sum(np.abs(ens.circulations)) * (1 + np.max(np.abs(ens.positions)))
    assert np.allclose(new.center_of_vorticity(), c0, atol=1e-13 * scale)


# ---- dynamics --------------------------------------------------------------------


def _pair_run(dt, T, eps=0.5, d=1.0, gam=1.0):
    ens = P.point_vortices([[-d / 2, 0.0], [d / 2, 0.0]], [gam, gam], eps)
    return P.simulate(P.SimulationConfig(ensemble=ens, eps=eps, dt=dt, T=T, cadence=T))


def test_two_vortex_rigid_rotation():
    eps, d, T = 0.5, 1.0, 2.0
    res = _pair_run(1e-3, T)
    x = res.final.positions
    assert math.hypot(*(x[0] - x[1])) == pytest.approx(d, rel=1e-12)
    omega = float(kernel_table(GAUSS, eps).enclosed_mass(d / eps)) / (math.pi * d * d)
    ang = math.atan2(x[1, 1] - x[0, 1], x[1, 0] - x[0, 0])
    assert ang == pytest.approx(omega * T, abs=1e-12)


def test_one_particle_is_stationary():
    ens = P.point_vortices([[0.2, 0.3]], [5.0], 0.1)
    res = P.simulate(P.SimulationConfig(ensemble=ens, eps=0.1, dt=0.1, T=1.0, cadence=0.5))
    assert np.array_equal(res.final.positions, ens.positions)


def test_dipole_translates_at_pair_speed():
    eps, d = 0.5, 1.0
    ens = P.point_vortices([[0.0, d / 2], [0.0, -d / 2]], [-1.0, 1.0], eps, BLOB)
    res = P.simulate(P.SimulationConfig(ensemble=ens, eps=eps, filter=BLOB, dt=1e-2, T=2.0, cadence=1.0))
    speed = d**2 / (d**2 + eps**2) / (2 * math.pi * d)
    disp = res.final.positions - ens.positions
    assert np.allclose(disp[:, 0], -speed * 2.0, rtol=1e-12)  # negative vortex on top: moves in -x
    assert np.allclose(disp[:, 1], 0.0, atol=1e-14)


def test_zero_horizon_gives_initial_diagnostics_only():
    ens = P.point_vortices([[0, 0], [1, 0]], [1, 1], 0.2)
    res = P.simulate(P.SimulationConfig(ensemble=ens, eps=0.2, dt=0.1, T=0.0))
    assert res.steps == 0 and len(res.series.snapshots) == 1


def test_rk4_fourth_order():
    eps, d = 0.5, 1.0
    omega = float(kernel_table(GAUSS, eps).enclosed_mass(d / eps)) / (math.pi * d * d)
    errs = []
    for dt in (0.4, 0.2, 0.1):
        res = _pair_run(dt, 4.0)
        x = res.final.positions
        exact = np.array([[-0.5 * math.cos(omega * 4.0), -0.5 * math.sin(omega * 4.0)]])
        errs.append(np.max(np.abs(x[0] - exact[0])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.8)


def test_rotation_equivariance():
    a = P.InitialVorticitySpec("gaussian_patch", radius=0.6, sigma=0.3, aspect=2.0)
    b = P.InitialVorticitySpec("gaussian_patch", radius=0.6, sigma=0.3, aspect=0.5)
    ra = P.simulate(P.SimulationConfig(a, eps=0.2, delta=0.1, dt=0.05, T=0.5, cadence=0.5)).final
    rb = P.simulate(P.SimulationConfig(b, eps=0.2, delta=0.1, dt=0.05, T=0.5, cadence=0.5)).final
    rot = np.column_stack([-ra.positions[:, 1], ra.positions[:, 0]])
    key = lambda p: np.lexsort((np.round(p[:, 1], 9), np.round(p[:, 0], 9)))  # noqa: E731
    assert np.allclose(rot[key(rot)], rb.positions[key(rb.positions)], atol=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_state_raises_with_dump():
    ens = P.point_vortices([[0, 0], [1e-3, 0]], [1e300, 1e300], 1e-3)
    with pytest.raises(P.SimulationError) as info:
        P.step_rk4(ens, 1e300)
    assert "positions" in info.value.dump and info.value.dump["bad_indices"]


def test_cfl_and_cadence_rules():
    ens = P.point_vortices([[0, 0], [1, 0]], [1, 1], 0.2)
    dt = P.cfl_timestep(ens, 0.1)
    umax = np.max(np.hypot(*P.velocities(ens).T))
    assert dt == pytest.approx(0.2 * 0.1 / umax)
    res = P.simulate(P.SimulationConfig(ensemble=ens, eps=0.2, dt=0.03, T=0.2, cadence=0.1))
    assert res.dt == pytest.approx(0.1 / 4) and res.steps == 8
    with pytest.raises(ValueError):
        P.simulate(P.SimulationConfig(ensemble=ens, eps=0.2, dt=0.01, T=0.25, cadence=0.1))


def test_trajectory_csv():
    ens = P.point_vortices([[0, 0], [1, 0]], [1, 2], 0.2)
    res = P.simulate(P.SimulationConfig(ensemble=ens, eps=0.2, dt=0.05, T=0.1, cadence=0.05,
                                        record_trajectory=True))
    text = P.trajectory_to_csv(res.frames, ens.circulations, header="x")
    lines = text.splitlines()
    assert lines[0] == "# x" and lines[1] == "t,i,x,y,gamma"
    assert len(lines) == 2 + 3 * 2
