"""Numerical verification of the qualitative properties of minimizers.

Each check returns a record with a stable descriptive ``property`` string,
a pass flag, a signed margin (positive means headroom), and details. The
overall report is the conjunction. All checks are pure functions of their
inputs and rerun identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from radrelax.envelope import EnvelopeResult
from radrelax.potentials import ProblemSpec
from radrelax.radial_solver import RadialProfile, energy_reduced, sphere_area

__all__ = [
    "VerifyReport",
    "detachment_avoidance_report",
    "slope_and_sign_check",
    "corner_condition_check",
    "euler_lagrange_affine_check",
    "concavity_exclusion_check",
    "energy_consistency",
    "consistency_tolerance",
    "full_report",
]

_EPS_SLOPE = 1e-6


def _rec(name, prop, passed, margin, details) -> dict:
    return {
        "name": name,
        "property": prop,
        "passed": bool(passed),
        "margin": float(margin),
        "details": details,
    }


@dataclass
class VerifyReport:
    records: list
    overall: bool
    grid: dict

    def to_dict(self) -> dict:
        return {"overall": bool(self.overall), "grid": dict(self.grid),
                "records": list(self.records)}


def _interior_mask(slopes: np.ndarray, components, eps: float,
                   nonconstant_only: bool = False) -> np.ndarray:
    mask = np.zeros_like(slopes, dtype=bool)
    for c in components:
        if nonconstant_only and c.is_constant:
            continue
        mask |= (slopes > c.a + eps) & (slopes < c.b - eps)
    return mask


def detachment_avoidance_report(profile: RadialProfile, env: EnvelopeResult,
                                eps_slope: float = _EPS_SLOPE) -> dict:
    """Radial measure of cells whose slope sits strictly inside a detachment
    interval; minimizers concentrate this on at most a grid-resolution set."""
    dr = profile.grid.dr
    inside = _interior_mask(profile.slopes, env.components, eps_slope)
    measure = float(np.sum(dr[inside]))
    threshold = 2.0 * float(np.max(dr))
    return _rec(
        "detachment_avoidance",
        "minimizer slopes avoid the interiors of detachment intervals",
        measure <= threshold,
        threshold - measure,
        {"measure": measure, "threshold": threshold,
         "cells_inside": int(np.count_nonzero(inside))},
    )


def slope_and_sign_check(profile: RadialProfile, M: float) -> dict:
    """At least 99% of cells have slope <= -M (+1e-6), and the nodal values
    keep one sign up to 1e-9 slack."""
    s = profile.slopes
    u = profile.u
    frac = float(np.mean(s <= -M + 1e-6))
    slack = 1e-9 * max(1.0, float(np.max(np.abs(u))))
    nonneg = bool(np.all(u >= -slack))
    nonpos = bool(np.all(u <= slack))
    sign_ok = nonneg or nonpos
    return _rec(
        "slope_and_sign",
        "du/dr <= -M on almost every cell and u keeps a single sign",
        frac >= 0.99 and sign_ok,
        frac - 0.99 if sign_ok else -1.0,
        {"fraction_steep": frac, "nonnegative": nonneg, "nonpositive": nonpos},
    )


def corner_condition_check(profile: RadialProfile, M: float,
                           window: float, tol: float = 0.05) -> dict:
    """Least-squares linear fit of cell slopes on rbar < window, extrapolated
    to r = 0; the intercept must match -M within tol.

    Raises:
        ValueError: when fewer than 8 cells fall inside the window.
    """
    rbar = profile.grid.midpoints
    sel = rbar < window
    if int(np.count_nonzero(sel)) < 8:
        raise ValueError(
            f"corner window {window} holds {int(np.count_nonzero(sel))} cells; "
            "need at least 8")
    coeffs = np.polyfit(rbar[sel], profile.slopes[sel], 1)
    fit0 = float(coeffs[1])
    err = abs(fit0 + M)
    return _rec(
        "corner_condition",
        "the limiting slope at the origin equals -M",
        err <= tol,
        tol - err,
        {"fit_at_zero": fit0, "target": -M, "window": float(window),
         "cells": int(np.count_nonzero(sel))},
    )


def _require_poly_G(spec: ProblemSpec):
    if spec.G.kind == "sampled":
        raise ValueError("check requires a polynomial G")


def euler_lagrange_affine_check(profile: RadialProfile, env: EnvelopeResult,
                                spec: ProblemSpec,
                                eps_slope: float = _EPS_SLOPE) -> dict:
    """On cells whose slope lies inside a nonconstant affine interval with
    slope alpha, the radial stationarity residual -(N-1) alpha / r + G'(u)
    must vanish; vacuously passes when no such cell exists (the expected
    outcome for minimizers).

    Raises:
        ValueError: for sampled G (needs trustworthy derivatives).
    """
    _require_poly_G(spec)
    s = profile.slopes
    inside = _interior_mask(s, env.components, eps_slope, nonconstant_only=True)
    if not np.any(inside):
        return _rec(
            "euler_lagrange_affine",
            "-(N-1) alpha / r + G'(u) = 0 where the slope sits in a "
            "nonconstant affine interval",
            True, 0.0, {"vacuous": True, "cells": 0})
    rbar = profile.grid.midpoints[inside]
    ubar = profile.midpoint_values[inside]
    alphas = np.zeros(int(np.count_nonzero(inside)))
    sl = s[inside]
    for c in env.components:
        if c.is_constant:
            continue
        m = (sl > c.a + eps_slope) & (sl < c.b - eps_slope)
        alphas[m] = c.alpha
    res = np.abs(-(spec.dimension - 1) * alphas / rbar + spec.G.derivative(ubar))
    gmax = float(np.max(np.abs(spec.G.derivative(profile.midpoint_values))))
    tol = max(1e-8, 5.0 * float(np.max(profile.grid.dr))) * (1.0 + gmax)
    return _rec(
        "euler_lagrange_affine",
        "-(N-1) alpha / r + G'(u) = 0 where the slope sits in a "
        "nonconstant affine interval",
        bool(np.max(res) <= tol),
        tol - float(np.max(res)),
        {"vacuous": False, "cells": int(np.count_nonzero(inside)),
         "max_residual": float(np.max(res)), "tolerance": tol,
         "consistent_cells": int(np.count_nonzero(res <= tol))},
    )


def concavity_exclusion_check(profile: RadialProfile, env: EnvelopeResult,
                              spec: ProblemSpec,
                              eps_slope: float = _EPS_SLOPE) -> dict:
    """Cells that are density points (neighborhood fraction > 1/2 within
    radius 5 dr) of an affine slope set must not see strictly concave G.

    Raises:
        ValueError: for sampled G (needs second derivatives).
    """
    _require_poly_G(spec)
    s = profile.slopes
    inside = _interior_mask(s, env.components, eps_slope)
    if not np.any(inside):
        return _rec(
            "concavity_exclusion",
            "strict concavity of G excludes density points of affine slope sets",
            True, 0.0, {"vacuous": True, "density_cells": 0})
    rbar = profile.grid.midpoints
    radius = 5.0 * float(np.max(profile.grid.dr))
    near = np.abs(rbar[:, None] - rbar[None, :]) <= radius
    density = (near & inside[None, :]).sum(axis=1) / near.sum(axis=1)
    dens_pts = inside & (density > 0.5)
    if not np.any(dens_pts):
        return _rec(
            "concavity_exclusion",
            "strict concavity of G excludes density points of affine slope sets",
            True, 0.0, {"vacuous": False, "density_cells": 0})
    g2 = spec.G.derivative(profile.midpoint_values[dens_pts], order=2)
    worst = float(np.min(g2))
    return _rec(
        "concavity_exclusion",
        "strict concavity of G excludes density points of affine slope sets",
        worst >= -1e-9,
        worst + 1e-9,
        {"vacuous": False, "density_cells": int(np.count_nonzero(dens_pts)),
         "min_G_second_derivative": worst},
    )


def _component_gap_bound(env: EnvelopeResult) -> float:
    worst = 0.0
    W = env.potential
    for c in env.components:
        t = np.linspace(c.a, c.b, 258)[1:-1]
        gap = np.asarray(W.eval(t)) - (c.alpha * t + c.beta)
        worst = max(worst, float(np.max(gap)))
    return worst


def consistency_tolerance(profile: RadialProfile, spec: ProblemSpec,
                          env: EnvelopeResult) -> float:
    """1e-6 relative plus the price of a grid-resolution detachment set."""
    e_rel = energy_reduced(profile, spec, use_envelope=True)
    maxdr = float(np.max(profile.grid.dr))
    area = sphere_area(spec.dimension)
    allowance = (2.0 * maxdr * area * spec.radius ** (spec.dimension - 1)
                 * _component_gap_bound(env))
    return 1e-6 * (1.0 + abs(e_rel)) + allowance


def energy_consistency(profile: RadialProfile, spec: ProblemSpec,
                       env: EnvelopeResult) -> dict:
    """The potential and its envelope must price the profile identically up
    to the tolerance for an allowed grid-resolution detachment set."""
    e_orig = energy_reduced(profile, spec, use_envelope=False)
    e_rel = energy_reduced(profile, spec, use_envelope=True)
    gap = abs(e_orig - e_rel)
    tol = consistency_tolerance(profile, spec, env)
    return _rec(
        "energy_consistency",
        "W and its envelope price the minimizer identically",
        gap <= tol,
        tol - gap,
        {"original_energy": e_orig, "relaxed_energy": e_rel, "gap": gap,
         "relative_gap": gap / (1.0 + abs(e_rel)), "tolerance": tol},
    )


def full_report(profile: RadialProfile, spec: ProblemSpec,
                env: EnvelopeResult, corner_window: Optional[float] = None,
                corner_tol: float = 0.05) -> VerifyReport:
    """Run every applicable check and conjoin the outcomes.

    The derivative-based checks are recorded as skipped (passing) when G is
    sampled; call them directly to get the hard error instead.
    """
    if corner_window is None:
        corner_window = 0.2 * spec.radius
    records = [
        detachment_avoidance_report(profile, env),
        slope_and_sign_check(profile, env.M),
        corner_condition_check(profile, env.M, corner_window, corner_tol),
    ]
    if spec.G.kind == "sampled":
        records.append(_rec("euler_lagrange_affine",
                            "-(N-1) alpha / r + G'(u) = 0 where the slope sits "
                            "in a nonconstant affine interval",
                            True, 0.0, {"skipped": "sampled G"}))
        records.append(_rec("concavity_exclusion",
                            "strict concavity of G excludes density points of "
                            "affine slope sets",
                            True, 0.0, {"skipped": "sampled G"}))
    else:
        records.append(euler_lagrange_affine_check(profile, env, spec))
        records.append(concavity_exclusion_check(profile, env, spec))
    records.append(energy_consistency(profile, spec, env))

    mu = profile.midpoint_values
    span = np.linspace(float(np.min(mu)), float(np.max(mu)), 512)
    lipschitz = float(np.max(np.abs(spec.G.derivative(span))))
    grid_meta = {
        "cells": int(profile.grid.cells),
        "max_dr": float(np.max(profile.grid.dr)),
        "radius": float(profile.grid.nodes[-1]),
        "lipschitz_G": lipschitz,
    }
    return VerifyReport(records=records,
                        overall=all(r["passed"] for r in records),
                        grid=grid_meta)
