"""Convergence-rate experiments: epsilon sweeps comparing the oscillating
evolution against the homogenized one (with and without correctors),
log-log rate fits, and the tau-growth probe.

Error metrics per epsilon = 1/n:

    e_v       L2 difference of the magnetic intensities v_eps and v0,
    e_z       L2 difference of the inductions mu0 v_eps and mu0 v0,
    e_corr_H1 H1 difference of v_eps and the corrector-dressed v0,
    e_flux    L2 difference of the fluxes (eta^eps)^{-1} curl v_eps and
              ((eta0)^{-1} + Sigma^eps) curl v0,
    e_u       L2 difference of the electric-field increments,
    e_w       L2 difference of the displacement increments.

Every metric is normalized by a Sobolev norm of the data so that the
fitted prefactors are comparable across scenarios.
"""

import json

import numpy as np

from .cell import SolverError, solve_cell_problems
from .coefficients import FAMILIES
from .fields import norm_hs, norm_l2, to_grid
from .wave import (
    CorrectorOnTorus,
    TorusProblem,
    project_weighted,
    propagate_eps,
    propagate_homogenized,
)

#: metric -> (descriptive tag, expected log-log slope)
EXPECTED_SLOPES = {
    "e_v": ("plain-l2", 1.0),
    "e_z": ("plain-l2", 1.0),
    "e_corr_H1": ("corrected-energy", 1.0),
    "e_flux": ("corrected-flux", 1.0),
    "e_u": ("recovered-electric", 1.0),
    "e_w": ("recovered-displacement", 1.0),
}

SLOPE_MARGIN = 0.1  # pass when slope >= expected - margin
ERROR_FLOOR = 1e-6  # below this the fit is meaningless


def band_limited_field(lattice, shape, seed, max_index=2, components=3):
    """Random real field with Fourier support |m_j| <= max_index."""
    rng = np.random.default_rng(seed)
    shape = tuple(shape)
    hat = np.zeros((components,) + shape, dtype=complex)
    rng_mode = range(-max_index, max_index + 1)
    for m1 in rng_mode:
        for m2 in rng_mode:
            for m3 in rng_mode:
                if (m1, m2, m3) == (0, 0, 0):
                    continue
                coef = rng.normal(size=components) + 1j * rng.normal(size=components)
                hat[:, m1, m2, m3] = coef
    # enforce a real field
    full = to_grid(hat)
    values = full.real + full.imag  # mixes conjugate-symmetric parts, stays band-limited
    scale = np.max(np.abs(values))
    return values / scale if scale > 0 else values


def rate_fit(errors, epsilons):
    """Least-squares fit of log(error) against log(epsilon).

    Returns (slope, intercept, residual, slope_stderr).  Nonpositive
    errors are excluded from the fit; fewer than three usable points
    raise ValueError.
    """
    errors = np.asarray(errors, dtype=float)
    epsilons = np.asarray(epsilons, dtype=float)
    usable = errors > 0
    if np.count_nonzero(usable) < 3:
        raise ValueError("rate_fit needs at least 3 positive error values")
    x = np.log(epsilons[usable])
    y = np.log(errors[usable])
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = y - design @ coef
    ssr = float(np.sum(resid**2))
    dof = max(len(x) - 2, 1)
    denom = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(ssr / dof / denom)) if denom > 0 else float("inf")
    return slope, intercept, ssr, stderr


def _torus_shape(coeffs, n, transverse=8, min_size=8):
    """Grid for eps = 1/n: axes along which the coefficients vary get
    cell_size * n points (all scaled coefficient and corrector modes are
    then represented exactly), the others a fixed transverse size."""
    eta_hat = coeffs.eta.hat
    nu_hat = coeffs.nu.hat
    mags = np.abs(eta_hat).reshape((-1,) + eta_hat.shape[-3:]).max(axis=0)
    mags = mags + np.abs(nu_hat)
    thresh = 1e-12 * max(float(mags.max()), 1e-300)
    shape = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        profile = mags.max(axis=other)
        profile = profile.copy()
        profile[0] = 0.0  # the mean does not oscillate
        varies = bool(np.any(profile > thresh))
        cell_size = eta_hat.shape[-3:][axis]
        shape.append(max(cell_size * n, min_size) if varies else max(transverse, min_size))
    return tuple(shape)


class SweepReport:
    """Outcome of one epsilon sweep; serializes deterministically."""

    def __init__(self, scenario, epsilons, tau, errors, data_norms, slopes, flags, config_echo, diagnostics):
        self.scenario = scenario
        self.epsilons = list(epsilons)
        self.tau = tau
        self.errors = errors
        self.data_norms = data_norms
        self.slopes = slopes
        self.flags = flags
        self.config_echo = config_echo
        self.diagnostics = diagnostics

    def passed(self):
        out = {}
        for metric, fit in self.slopes.items():
            if fit is None or fit.get("advisory"):
                out[metric] = True  # at the solver floor, or no bound claimed
                continue
            _, expected = EXPECTED_SLOPES[metric]
            out[metric] = fit["slope"] >= expected - SLOPE_MARGIN
        return out

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "epsilons": self.epsilons,
            "tau": self.tau,
            "errors": self.errors,
            "data_norms": self.data_norms,
            "slopes": self.slopes,
            "flags": self.flags,
            "passed": self.passed(),
            "config": self.config_echo,
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self):
        rows = ["scenario,eps,tau,metric,value"]
        for metric, values in sorted(self.errors.items()):
            for eps, value in zip(self.epsilons, values):
                rows.append(f"{self.scenario},{eps!r},{self.tau!r},{metric},{value!r}")
        return "\n".join(rows) + "\n"


def sweep(
    family,
    family_params=None,
    cell_shape=(64, 4, 4),
    n_list=(2, 4, 8, 16),
    tau=1.0,
    seed=0,
    phi_zero=True,
    data_max_index=2,
    transverse=8,
    smoothed=False,
    cell_tol=1e-10,
    energy_guard=1e-3,
    dt=None,
):
    """Run the oscillating and homogenized evolutions for eps = 1/n over
    ``n_list`` on identical band-limited data and report error norms and
    fitted rates."""
    if any(int(n) < 1 for n in n_list):
        raise ValueError("epsilon values must be reciprocals of positive integers")
    builder = FAMILIES[family]
    params = dict(family_params or {})
    coeffs = builder(shape=tuple(cell_shape), **params)
    corr = solve_cell_problems(coeffs, tol=cell_tol)
    lattice = coeffs.lattice
    mu0 = coeffs.mu0

    metrics = ["e_v", "e_z", "e_corr_H1", "e_flux", "e_u", "e_w"]
    errors = {m: [] for m in metrics}
    diagnostics = {"per_eps": []}
    warnings = []
    epsilons = []

    for n in n_list:
        n = int(n)
        shape = _torus_shape(coeffs, n, transverse=transverse)
        f = band_limited_field(lattice, shape, seed, max_index=data_max_index)
        if phi_zero:
            phi = np.zeros_like(f)
        else:
            raw = band_limited_field(lattice, shape, seed + 1000, max_index=data_max_index)
            phi = project_weighted(lattice, shape, raw, eta0=mu0)

        # theorem-scale data norms: H^3 of f (and H^2 of phi when present)
        dnorm = norm_hs(lattice, f, 3) + (norm_hs(lattice, phi, 2) if not phi_zero else 0.0)
        curl_norm = norm_hs(lattice, f, 2)  # curl-based alternative, reported

        problem = TorusProblem(coeffs, n, shape)
        try:
            state = propagate_eps(problem, phi, f, tau, dt=dt, energy_guard=energy_guard)
        except (RuntimeError, SolverError) as exc:
            raise SolverError(f"oscillating run failed at n={n}: {exc}") from exc
        ref = propagate_homogenized(coeffs, corr.eta0, corr.nu_eff, shape, phi, f, tau)
        dressing = CorrectorOnTorus(corr, n, shape)

        dv = state.v - ref.v
        errors["e_v"].append(norm_l2(lattice, dv) / dnorm)
        z_diff = np.einsum("ab,b...->a...", mu0, dv)
        errors["e_z"].append(norm_l2(lattice, z_diff) / dnorm)
        errors["e_corr_H1"].append(
            norm_hs(lattice, state.v - dressing.corrected_v(ref.v, smoothed=smoothed), 1) / dnorm
        )
        errors["e_flux"].append(
            norm_l2(lattice, state.flux - dressing.corrected_flux(ref.v, smoothed=smoothed)) / dnorm
        )
        errors["e_u"].append(
            norm_l2(lattice, state.u_delta - dressing.corrected_u(ref.u_delta, smoothed=smoothed)) / dnorm
        )
        errors["e_w"].append(
            norm_l2(lattice, state.w_delta - dressing.corrected_w(ref.w_delta, smoothed=smoothed)) / dnorm
        )
        epsilons.append(1.0 / n)
        diagnostics["per_eps"].append(
            {
                "n": n,
                "grid": list(shape),
                "data_norm": dnorm,
                "curl_data_norm": curl_norm,
                "energy_drift": state.diagnostics["energy_drift"],
                "div_mu0_v_max": state.diagnostics["div_mu0_v_max"],
                "dt": state.diagnostics["dt"],
                "nsteps": state.diagnostics["nsteps"],
            }
        )

    slopes = {}
    flags = {"warnings": warnings}
    for metric in metrics:
        values = errors[metric]
        if max(values) <= ERROR_FLOOR:
            slopes[metric] = None
            flags[metric] = "degenerate: errors at floor"
            continue
        if sum(v > 0 for v in values) < 3:
            slopes[metric] = None
            flags[metric] = "insufficient points for fit"
            continue
        slope, intercept, ssr, stderr = rate_fit(values, epsilons)
        tag, expected = EXPECTED_SLOPES[metric]
        slopes[metric] = {
            "slope": slope,
            "intercept": intercept,
            "residual": ssr,
            "stderr": stderr,
            "tag": tag,
            "expected": expected,
        }
        if not phi_zero and metric in ("e_corr_H1", "e_flux"):
            # the first-order corrected estimates hold for data with zero
            # initial field; with phi != 0 these rates are reported but
            # not judged against the expected slope
            slopes[metric]["advisory"] = True
            flags[metric] = "corrected-route bound assumes zero initial field"
        elif slope > expected + 3 * SLOPE_MARGIN:
            flags[metric] = "better than bound"

    config_echo = {
        "family": family,
        "family_params": params,
        "cell_shape": list(cell_shape),
        "n_list": [int(n) for n in n_list],
        "tau": tau,
        "seed": seed,
        "phi_zero": phi_zero,
        "data_max_index": data_max_index,
        "transverse": transverse,
        "smoothed": smoothed,
    }
    return SweepReport(
        scenario=family,
        epsilons=epsilons,
        tau=tau,
        errors=errors,
        data_norms=[d["data_norm"] for d in diagnostics["per_eps"]],
        slopes=slopes,
        flags=flags,
        config_echo=config_echo,
        diagnostics=diagnostics,
    )


def tau_scaling_probe(
    family,
    family_params=None,
    cell_shape=(64, 4, 4),
    n=8,
    tau_list=(0.5, 1.0, 2.0, 4.0),
    seed=0,
    data_max_index=2,
    transverse=8,
):
    """Growth of the plain L2 error in tau at fixed eps = 1/n.

    Fits e_v(tau)/eps ~ C (1+tau)^q and reports the exponent q; the
    improved-regime scenarios (harmonic-mean effective matrix) stay near
    q = 1/2, the general ones near q = 1.
    """
    builder = FAMILIES[family]
    params = dict(family_params or {})
    coeffs = builder(shape=tuple(cell_shape), **params)
    corr = solve_cell_problems(coeffs)
    lattice = coeffs.lattice

    shape = _torus_shape(coeffs, int(n), transverse=transverse)
    f = band_limited_field(lattice, shape, seed, max_index=data_max_index)
    phi = np.zeros_like(f)
    dnorm = norm_hs(lattice, f, 3)
    problem = TorusProblem(coeffs, int(n), shape)

    values = []
    for tau in tau_list:
        state = propagate_eps(problem, phi, f, float(tau))
        ref = propagate_homogenized(coeffs, corr.eta0, corr.nu_eff, shape, phi, f, float(tau))
        values.append(norm_l2(lattice, state.v - ref.v) / dnorm * n)

    if max(values) <= ERROR_FLOOR * n:
        return {"tau_list": list(tau_list), "scaled_errors": values, "exponent": None,
                "flag": "degenerate: errors at floor"}
    x = np.log1p(np.asarray(tau_list, dtype=float))
    y = np.log(values)
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    exponent = float(coef[0])
    return {
        "tau_list": list(tau_list),
        "scaled_errors": values,
        "exponent": exponent,
        "growth": "sublinear" if exponent <= 0.7 else ("linear" if exponent <= 1.2 else "superlinear"),
    }
