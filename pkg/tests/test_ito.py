"""Chain-rule decomposition, Taylor remainders and the power-function route."""

import numpy as np
import pytest

from cmvm.hilbert import BilinearTensor, LinearOp, trace_bilinear
from cmvm.integrate import (
    ItoProcessSpec,
    constant_integrand,
    deterministic_integrand,
    integrate,
    integrate_process,
    compose_integrands,
    simulate_ito_process,
    state_linear_integrand,
)
from cmvm.ito import (
    finite_difference_check,
    gamma_estimate,
    ito_residual,
    ito_terms,
    make_smooth,
    norm_power_expansion,
    taylor_remainder,
    taylor_remainder_quadrature,
)
from cmvm.noise import TimeGrid, sample_path
from cmvm.presets import make_preset

PHI = np.array([[0.9, 0.2], [-0.3, 1.1]])


@pytest.fixture(scope="module")
def mixed():
    return make_preset("mixed-default")


@pytest.fixture(scope="module")
def grid8():
    return TimeGrid(1.0, 8)


def _walk(spec, grid, integrand, *, seed, path_index, drift=None):
    proc = ItoProcessSpec(integrand, drift_rate=drift)
    return simulate_ito_process(proc, sample_path(spec, grid, seed=seed, path_index=path_index))


# ---------------------------------------------------------------- registry


@pytest.mark.parametrize("name", ["quadratic", "linear:0.7", "norm_p:4", "norm_p:3", "gauss_cos"])
@pytest.mark.parametrize("point", [[0.4, -1.1], [2.0, 0.3]])
def test_registry_derivatives_match_finite_differences(name, point):
    f = make_smooth(name)
    errs = finite_difference_check(f, 0.37, np.array(point), step=1e-5)
    assert errs["d_t"] < 1e-4
    assert errs["d_x"] < 1e-4
    assert errs["d_xx"] < 1e-4


def test_registry_rejects_unknown_and_shallow_powers():
    with pytest.raises(ValueError, match="unknown smooth function"):
        make_smooth("cubic-spline")
    with pytest.raises(ValueError, match="p > 2"):
        make_smooth("norm_p:2")
    with pytest.raises(ValueError, match="p > 2"):
        make_smooth("norm_p:1.5")


# ------------------------------------------------------- Taylor remainder


def test_taylor_remainder_frozen_quartic():
    # f(x) = x^4 in one dimension: f(2) - f(1) - f'(1) - f''(1)/2 = 16 - 1 - 4 - 6.
    f = make_smooth("norm_p:4")
    x, y = np.array([1.0]), np.array([2.0])
    direct = taylor_remainder(f, 0.0, x, y)
    quad = taylor_remainder_quadrature(f, 0.0, x, y)
    assert direct.shape == (1,)
    assert abs(direct[0] - 5.0) < 1e-12
    assert abs(quad[0] - 5.0) < 1e-12


@pytest.mark.parametrize("name", ["quadratic", "linear:1.5", "norm_p:4", "gauss_cos"])
def test_taylor_routes_agree_on_registered_set(name):
    f = make_smooth(name)
    rng = np.random.default_rng(7)
    for _ in range(40):
        t = float(rng.uniform(0.0, 1.0))
        x = rng.uniform(-1.5, 1.5, size=2)
        y = x + rng.uniform(-1.0, 1.0, size=2)
        direct = taylor_remainder(f, t, x, y)
        quad = taylor_remainder_quadrature(f, t, x, y)
        assert np.abs(direct - quad).max() < 1e-8
    if name in ("quadratic", "linear:1.5"):
        # second-order Taylor is already exact for these
        assert np.abs(taylor_remainder(f, 0.2, [1.0, -2.0], [0.5, 3.0])).max() < 1e-12


def test_quadrature_node_floor():
    f = make_smooth("gauss_cos")
    with pytest.raises(ValueError, match="at least 16"):
        taylor_remainder_quadrature(f, 0.0, [0.0, 0.0], [1.0, 1.0], n_nodes=8)


def test_gamma_modulus_decays():
    f = make_smooth("norm_p:4")
    sups = gamma_estimate(f, [1.0, 0.5, 0.25, 0.125], dim=2, n_samples=300, seed=5)
    assert all(a > b for a, b in zip(sups, sups[1:]))
    assert sups[-1] < 0.3 * sups[0]


# --------------------------------------------------------- chain rule


def test_quadratic_realized_residual_vanishes_per_path(mixed, grid8):
    """Driftless + quadratic + realized trace telescopes exactly, path by path."""
    jump_spec = make_preset("jump-default")
    models = [
        (mixed, constant_integrand(PHI)),
        (mixed, state_linear_integrand(PHI, [0.5, -0.3], 0.4)),
        (jump_spec, deterministic_integrand(lambda k, t, j: PHI * (1.0 + 0.5 * t * (1 + j)), 2, 2)),
    ]
    f = make_smooth("quadratic")
    for spec, integrand in models:
        for idx in range(60):
            path = _walk(spec, grid8, integrand, seed=4100, path_index=idx)
            change = f.value(1.0, path.values[-1]) - f.value(0.0, path.values[0])
            res = ito_residual(path, f, trace_variant="realized")
            assert np.abs(res).max() <= 1e-10 * max(1.0, np.abs(change).max())


def test_compensator_trace_residual_centers_on_zero(mixed, grid8):
    f = make_smooth("quadratic")
    integrand = constant_integrand(PHI)
    res = np.array(
        [
            ito_residual(
                _walk(mixed, grid8, integrand, seed=6200, path_index=i), f
            )[0]
            for i in range(1500)
        ]
    )
    assert res.std() > 1e-4  # the gap is genuinely random ...
    se = res.std(ddof=1) / np.sqrt(len(res))
    assert abs(res.mean()) < 4.0 * se  # ... and centered


def test_linear_function_sees_no_second_order_terms(mixed, grid8):
    f = make_smooth("linear:0.7")
    path = _walk(mixed, grid8, constant_integrand(PHI), seed=88, path_index=1, drift=[0.3, -0.2])
    terms = ito_terms(path, f)
    assert np.all(terms.trace == 0.0)
    assert np.abs(terms.jump).max() < 1e-13
    assert np.all(terms.time == 0.0)
    assert np.abs(ito_residual(path, f)).max() < 1e-12
    drift_total = path.drift.sum(axis=0)
    assert abs(terms.fv[0] - 0.7 * drift_total.sum()) < 1e-12


def test_unknown_trace_variant_rejected(mixed, grid8):
    path = _walk(mixed, grid8, constant_integrand(PHI), seed=1, path_index=0)
    with pytest.raises(ValueError, match="trace variant"):
        ito_terms(path, make_smooth("quadratic"), trace_variant="midpoint")


# ------------------------------------------------- power-function route


@pytest.mark.parametrize("p", [3.0, 4.0])
@pytest.mark.parametrize("variant", ["compensator", "realized"])
def test_norm_power_matches_generic_route(mixed, grid8, p, variant):
    f = make_smooth(f"norm_p:{p}")
    for idx in range(10):
        path = _walk(
            mixed, grid8, constant_integrand(PHI), seed=910, path_index=idx, drift=[0.2, 0.1]
        )
        spec_terms = norm_power_expansion(path, p, trace_variant=variant)
        gen = ito_terms(path, f, trace_variant=variant)
        scale = max(1.0, abs(gen.total[0]))
        assert abs(spec_terms.stoch - gen.stoch[0]) < 1e-9 * scale
        assert abs(spec_terms.fv - gen.fv[0]) < 1e-9 * scale
        assert abs(spec_terms.jump - gen.jump[0]) < 1e-9 * scale
        assert abs(spec_terms.trace_outer + spec_terms.trace_hs - gen.trace[0]) < 1e-9 * scale
        assert abs(spec_terms.total - gen.total[0]) < 1e-9 * scale


def test_norm_power_rejects_shallow_exponent(mixed, grid8):
    path = _walk(mixed, grid8, constant_integrand(PHI), seed=1, path_index=0)
    with pytest.raises(ValueError, match="p > 2"):
        norm_power_expansion(path, 2.0)


# -------------------------------------------------- cross-module routes


def test_stoch_term_matches_composed_integral_without_jumps(grid8):
    """On a continuous model the gradient-against-noise term is itself a
    stochastic integral; walking the composed integrand and integrating the
    gradient against the walked path must both reproduce it."""
    gauss = make_preset("gauss-default")
    f = make_smooth("gauss_cos")
    inner = constant_integrand(PHI)
    for idx in range(8):
        sample = sample_path(gauss, grid8, seed=2500, path_index=idx)
        path = integrate(inner, sample)
        direct = ito_terms(path, f).stoch

        def grad_at(step, time, value, _p=path, _f=f):
            return _f.d_x(time, _p.values[step])

        via_process = integrate_process(grad_at, path, dim_out=1)
        composed = compose_integrands(grad_at, inner, dim_out=1)
        via_walk = integrate(composed, sample).terminal
        assert np.abs(direct - via_process).max() < 1e-12
        assert np.abs(direct - via_walk).max() < 1e-12


def test_compensator_trace_agrees_with_trace_helper(mixed, grid8):
    """Dual route for the trace term: the inlined sum must equal the partial
    trace computed through the bilinear helper, cell by cell."""
    f = make_smooth("gauss_cos")
    path = _walk(mixed, grid8, constant_integrand(PHI), seed=303, path_index=2)
    tab = mixed.tables
    dt = grid8.dt
    expected = np.zeros(1)
    for k in range(grid8.n_steps):
        zeta = BilinearTensor(f.d_xx(float(grid8.times[k]), path.values[k]))
        for j in np.nonzero(tab.cont_rate)[0]:
            m = LinearOp(path.phis[k, j] @ tab.q_cont_sqrt[j])
            expected += 0.5 * tab.cont_rate[j] * dt * trace_bilinear(zeta, m, m)
    got = ito_terms(path, f).trace
    assert np.abs(got - expected).max() < 1e-12


def test_residual_shrinks_with_mesh(mixed):
    f = make_smooth("gauss_cos")
    integrand = constant_integrand(PHI)

    def median_residual(n_steps):
        grid = TimeGrid(1.0, n_steps)
        res = [
            abs(
                ito_residual(
                    _walk(mixed, grid, integrand, seed=7070, path_index=i, drift=[0.3, -0.2]),
                    f,
                    trace_variant="realized",
                )[0]
            )
            for i in range(50)
        ]
        return float(np.median(res))

    coarse, fine = median_residual(8), median_residual(64)
    assert fine < 0.7 * coarse
