"""Rate fitting, data generation, and report plumbing of the sweep harness."""

import numpy as np
import pytest

from maxhom.coefficients import constant_set, layered_isotropic
from maxhom.fields import freq_indices, to_fourier
from maxhom.harness import (
    SweepReport,
    _torus_shape,
    band_limited_field,
    rate_fit,
    sweep,
)
from maxhom.lattice import cubic_lattice


EPSILONS = [0.5, 0.25, 0.125, 0.0625]


def test_rate_fit_recovers_first_order():
    errors = [3.7 * e for e in EPSILONS]
    slope, intercept, ssr, stderr = rate_fit(errors, EPSILONS)
    assert abs(slope - 1.0) < 1e-10
    assert abs(intercept - np.log(3.7)) < 1e-10
    assert ssr < 1e-20


def test_rate_fit_recovers_three_halves():
    errors = [0.2 * e ** 1.5 for e in EPSILONS]
    slope, _, _, _ = rate_fit(errors, EPSILONS)
    assert abs(slope - 1.5) < 1e-10


def test_rate_fit_with_multiplicative_noise():
    rng = np.random.default_rng(3)
    errors = [e * (1.0 + 0.05 * rng.uniform(-1, 1)) for e in EPSILONS]
    slope, _, _, stderr = rate_fit(errors, EPSILONS)
    assert 0.9 <= slope <= 1.1
    assert stderr < 0.1


def test_rate_fit_needs_three_positive_points():
    with pytest.raises(ValueError):
        rate_fit([0.5, 0.25], [0.5, 0.25])
    # zeros are dropped, three positive points remain
    slope, _, _, _ = rate_fit([0.5, 0.0, 0.125, 0.0625], EPSILONS)
    assert abs(slope - 1.0) < 1e-10


def test_band_limited_field_support_and_normalization():
    lat = cubic_lattice()
    shape = (16, 12, 10)
    f = band_limited_field(lat, shape, seed=4, max_index=2)
    assert f.shape == (3,) + shape
    assert np.isrealobj(f)
    assert abs(np.max(np.abs(f)) - 1.0) < 1e-14
    hat = to_fourier(f)
    for axis in range(3):
        freqs = freq_indices(shape[axis])
        high = np.abs(freqs) > 2
        sl = [slice(None)] * 4
        sl[1 + axis] = high
        assert np.max(np.abs(hat[tuple(sl)])) < 1e-13
    again = band_limited_field(lat, shape, seed=4, max_index=2)
    assert np.array_equal(f, again)


def test_torus_shape_scales_varying_axes_only():
    layered = layered_isotropic(shape=(64, 4, 4))
    assert _torus_shape(layered, 2) == (128, 8, 8)
    assert _torus_shape(layered, 4, transverse=10) == (256, 10, 10)
    const = constant_set(shape=(4, 4, 4))
    assert _torus_shape(const, 8) == (8, 8, 8)


def _toy_report():
    errors = {"e_v": [0.1, 0.05], "e_z": [0.2, 0.1]}
    slopes = {
        "e_v": {"slope": 1.0, "intercept": 0.0, "residual": 0.0,
                "stderr": 0.0, "tag": "plain-l2", "expected": 1.0},
        "e_z": None,
    }
    return SweepReport(
        scenario="toy",
        epsilons=[0.5, 0.25],
        tau=1.0,
        errors=errors,
        data_norms=[1.0, 1.0],
        slopes=slopes,
        flags={"e_z": "degenerate: errors at floor", "warnings": []},
        config_echo={"seed": 0},
        diagnostics={"per_eps": []},
    )


def test_sweep_report_serialization_is_deterministic():
    rep = _toy_report()
    assert rep.to_json() == rep.to_json()
    assert '"scenario": "toy"' in rep.to_json()
    rows = rep.csv_rows().strip().split("\n")
    assert rows[0] == "scenario,eps,tau,metric,value"
    assert len(rows) == 1 + 4  # two metrics x two epsilons
    assert rep.passed() == {"e_v": True, "e_z": True}


def test_sweep_constant_coefficients_hits_solver_floor():
    # with constant coefficients the oscillating and effective evolutions
    # coincide; at a small time step every error sits below the floor
    rep = sweep(
        "constant",
        cell_shape=(4, 4, 4),
        n_list=(2, 4),
        tau=0.5,
        seed=1,
        phi_zero=True,
        dt=2e-4,
    )
    assert all(rep.passed().values())
    assert all(
        rep.flags.get(m) == "degenerate: errors at floor"
        for m in ("e_v", "e_corr_H1", "e_flux")
    )
    for d in rep.diagnostics["per_eps"]:
        assert d["energy_drift"] < 1e-6
        assert d["div_mu0_v_max"] < 1e-8
