import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skyrmion_lab.energy import default_grid, rasterize
from skyrmion_lab.profile import solve_profile
from skyrmion_lab.stability import (completed_square_form, curl_norms, energy_hessian_identity,
                                    h0_lower_bound, h1_norm_sq, h1_norm_sq_2d, hardy_decomposition_check,
                                    hardy_instances, hessian_2d, hinf_form, mode_form,
                                    mode_reduction_margin, mode_spectrum, positivity_coefficient,
                                    random_planar_field, random_radial_bump,
                                    random_tangent_perturbation, sphere_project, substitute,
                                    tangent_project, tilde_form, translation_field,
                                    translation_mode)

# lowest eigenvalue per mode on the default grid at h = 50
LAMBDA50 = [35.86464197968368, -0.016069460465152792, 50.815965750251884,
            51.46526632852679, 52.26144974265549, 53.199013537967]


@pytest.fixture(scope="module")
def spectra(profile50):
    return [mode_spectrum(profile50, k, 2) for k in range(6)]


def _pair(profile, seed):
    rng = np.random.default_rng(seed)
    return (random_radial_bump(profile.grid, rng) + random_radial_bump(profile.grid, rng),
            random_radial_bump(profile.grid, rng) + random_radial_bump(profile.grid, rng))


# -- spectra ------------------------------------------------------------------

@pytest.mark.parametrize("k", range(6))
def test_lambda_frozen(spectra, k):
    assert spectra[k].lambda_min == pytest.approx(LAMBDA50[k], rel=1e-6, abs=1e-8)


def test_spectrum_shape(spectra):
    assert spectra[0].lambda_min > 0
    upper = [s.lambda_min for s in spectra[1:]]
    assert all(b >= a for a, b in zip(upper, upper[1:]))
    for s in spectra:
        assert np.all(np.diff(s.eigenvalues) >= 0)


def test_zero_mode(spectra, profile50):
    s1 = spectra[1]
    assert s1.zero_mode_overlap >= 0.99
    a, b = translation_mode(profile50)
    assert abs(mode_form(profile50, 1, a, b)) <= 1e-8 * h1_norm_sq(profile50, a, b)


def test_zero_mode_refines(profile50, spectra):
    fine = solve_profile(50.0, profile50.grid.refined())
    lam = mode_spectrum(fine, 1).lambda_min
    assert abs(lam) <= 0.5 * abs(spectra[1].lambda_min)


def test_spectrum_json(spectra):
    d = spectra[2].to_json()
    assert set(d) == {"k", "eigenvalues", "zero_mode_overlap"} and len(d["eigenvalues"]) == 2


@pytest.mark.parametrize("k, count", [(9, 1), (-1, 1), (1, 0), (1, 5)])
def test_spectrum_rejects(profile50, k, count):
    with pytest.raises(ValueError):
        mode_spectrum(profile50, k, count)


# -- quadratic forms ----------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("k", [0, 1])
def test_substitution_preserves_form(profile50, k, seed):
    xi, eta = _pair(profile50, seed)
    a, b = substitute(profile50, xi, eta)
    lhs, rhs = mode_form(profile50, k, a, b), tilde_form(profile50, k, xi, eta)
    assert rhs == pytest.approx(lhs, rel=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_completed_square(profile50, seed):
    xi, eta = _pair(profile50, seed)
    assert completed_square_form(profile50, xi, eta) == pytest.approx(tilde_form(profile50, 1, xi, eta),
                                                                       rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_h0_lower_bound(profile50, seed):
    xi, eta = _pair(profile50, seed)
    assert tilde_form(profile50, 0, xi, eta) >= h0_lower_bound(profile50, xi, eta)


def test_positivity_coefficient(profile50):
    assert positivity_coefficient(profile50).min() >= -1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_mode_reduction_pointwise(profile50, seed, k):
    a, b = _pair(profile50, seed)
    m = mode_reduction_margin(profile50, k, a, b)
    scale = (a * a + b * b) / profile50.r**2
    assert np.all(m.integrand >= m.bound - 1e-12 * scale)
    assert np.all(m.bound >= 0)


def test_mode_reduction_rejects_k0(profile50):
    with pytest.raises(ValueError):
        mode_reduction_margin(profile50, 0, profile50.r, profile50.r)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("which", [0, 1])
def test_hardy_balance(profile50, k, which):
    rng = np.random.default_rng(10 * k + which)
    A, V, psi = hardy_instances(profile50, k)[which]
    f = random_radial_bump(profile50.grid, rng)
    hb = hardy_decomposition_check(A, V, psi, f, profile50.grid)
    assert hb.gap <= 1e-6 * abs(hb.lhs)


def test_hardy_rejects_sign_change(profile50):
    A, V, psi = hardy_instances(profile50, 1)[0]
    with pytest.raises(ValueError, match="positivity"):
        hardy_decomposition_check(A, V, -psi, np.ones_like(psi), profile50.grid)


# -- planar Hessian -----------------------------------------------------------

def test_translation_is_near_kernel(profile50, raster50):
    u = translation_field(profile50, raster50.grid)
    H = hessian_2d(profile50, raster50.with_values(u))
    assert abs(H) <= 1e-3 * h1_norm_sq_2d(raster50.grid, u)


@pytest.mark.parametrize("seed", range(3))
def test_energy_hessian_identity(profile50, raster50, seed):
    rng = np.random.default_rng(seed)
    phi = random_tangent_perturbation(raster50, rng, profile50.core_radius)
    gap = energy_hessian_identity(profile50, raster50, phi, 0.1)
    assert gap.gap <= 1e-3 * (gap.xi_h1_sq + abs(gap.lhs))


def test_identity_gap_shrinks_with_scale(profile50, raster50_coarse):
    # the raster is critical only up to its O(Delta^2) tension, so the gap has a linear part
    rng = np.random.default_rng(5)
    phi = random_tangent_perturbation(raster50_coarse, rng, profile50.core_radius)
    g1 = energy_hessian_identity(profile50, raster50_coarse, phi, 0.04).gap
    g2 = energy_hessian_identity(profile50, raster50_coarse, phi, 0.02).gap
    assert g2 < g1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coercivity(profile50, raster50_coarse, seed):
    g = raster50_coarse.grid
    phi = random_planar_field(g, np.random.default_rng(seed), profile50.core_radius)
    assert hinf_form(g, phi, 50.0) >= (49.0 / 51.0) * h1_norm_sq_2d(g, phi)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_curl_plus_divergence_is_gradient(raster50_coarse, seed):
    g = raster50_coarse.grid
    phi = random_planar_field(g, np.random.default_rng(seed), 0.05)
    c2, g2 = curl_norms(g, phi)
    div = g.dx(phi[0]) + g.dy(phi[1])
    assert c2 + g.integrate(div * div) == pytest.approx(g2, rel=1e-2)
    # curl alone misses the divergence of the in-plane part
    assert c2 < g2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.3))
def test_sphere_project_unit(raster50_coarse, seed, scale):
    phi = random_tangent_perturbation(raster50_coarse, np.random.default_rng(seed), 0.01)
    m = sphere_project(raster50_coarse, phi, scale)
    assert m.unit_defect <= 1e-12
    t = tangent_project(raster50_coarse, phi)
    assert np.max(np.abs(np.sum(t * raster50_coarse.values, axis=0))) <= 1e-12


def test_sphere_project_too_large(raster50_coarse):
    with pytest.raises(ValueError, match="too large"):
        sphere_project(raster50_coarse, -raster50_coarse.values, 1.0)
