import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import eval_legendre

from spoofoptics.decompose import decompose, leakage_score
from spoofoptics.errors import RenderError, ValidationError
from spoofoptics.imstats import rms_contrast
from spoofoptics.optics import (
    AlbedoTexture,
    PlanarIlluminationField,
    PointLight,
    SphereScene,
    _reference_normals,
    capture_spoof,
    distant_irradiance,
    near_light_band_fractions,
    planar_illumination,
    print_tone,
    render_live_distant,
    render_live_near,
    spoof_irradiance,
)
from spoofoptics.sh import (
    SHCoeffs,
    band_energies,
    direct_irradiance,
    lambertian_kernel,
    make_quadrature,
    sh_basis,
    sh_synthesize,
    sh_transform,
)

K2 = lambertian_kernel(2)
_Y00 = 0.5 / np.sqrt(np.pi)


def random_light(rng, rel=0.3, order=2):
    """Degree <= 2 light with a dominant DC term (irradiance stays positive)."""
    v = rng.uniform(-rel, rel, (order + 1) ** 2)
    v[0] = 1.0 / (np.pi * _Y00)
    return SHCoeffs(order, v)


def third_degree_fraction_oracle(distance):
    """Independent 1-D quadrature of the near-light irradiance on a unit sphere."""
    d = distance

    def e(t):
        return (d * t - 1.0) / (1.0 + d * d - 2.0 * d * t) ** 1.5

    lo = 1.0 / d
    p3 = quad(lambda t: e(t) * eval_legendre(3, t), lo, 1, epsabs=1e-14, epsrel=1e-12)[0]
    coef = 2 * np.pi * np.sqrt(7 / (4 * np.pi)) * p3
    total = 2 * np.pi * quad(lambda t: e(t) ** 2, lo, 1, epsabs=1e-14, epsrel=1e-12)[0]
    return coef * coef / total


# --- texture -----------------------------------------------------------------


def test_texture_range_and_determinism():
    tex = AlbedoTexture(seed=5)
    n = _reference_normals()
    a = tex(n)
    assert np.all(a >= tex.low) and np.all(a <= tex.high)
    assert np.array_equal(a, AlbedoTexture(seed=5)(n))
    assert not np.array_equal(a, AlbedoTexture(seed=6)(n))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_texture_statistics_are_pinned(seed):
    # weak contrast never reaches the clip limits, so the pinning is exact
    tex = AlbedoTexture(seed=seed, contrast=0.05)
    a = tex(_reference_normals())
    assert a.mean() == pytest.approx(tex.mean, rel=1e-12)
    assert a.std() / a.mean() == pytest.approx(tex.contrast, rel=1e-9)
    # default contrast clips a fraction of a percent of the disk
    tex = AlbedoTexture(seed=seed)
    a = tex(_reference_normals())
    assert a.mean() == pytest.approx(tex.mean, rel=1e-3)
    assert a.std() / a.mean() == pytest.approx(tex.contrast, rel=0.03)


@pytest.mark.parametrize("contrast, tol", [(0.05, 1e-9), (0.2, 0.05)])
def test_texture_has_no_low_frequencies(contrast, tol):
    tex = AlbedoTexture(seed=4, contrast=contrast)
    n = _reference_normals()
    a = tex(n) - tex.mean
    basis = sh_basis(n, tex.detail_degree)
    low, *_ = np.linalg.lstsq(basis, a, rcond=None)
    assert np.linalg.norm(basis @ low) < tol * np.linalg.norm(a)


def test_texture_validation():
    with pytest.raises(ValidationError):
        AlbedoTexture(seed=0, low=0.0)
    with pytest.raises(ValidationError):
        AlbedoTexture(seed=0, mean=0.01)
    with pytest.raises(ValidationError):
        AlbedoTexture(seed=0, contrast=-1)


# --- distant rendering -------------------------------------------------------


def test_dc_light_white_albedo_is_constant():
    light = SHCoeffs.from_dict(2, {(0, 0): 1.0})
    img = render_live_distant(SphereScene(32), light, K2)
    vals = img.values()
    assert np.ptp(vals) < 1e-12
    assert vals[0] == pytest.approx(np.pi * _Y00, rel=1e-12)
    assert np.all(img.pixels[~img.mask] == 0)


def test_zero_light_renders_black():
    img = render_live_distant(SphereScene(16), SHCoeffs.zeros(2), K2)
    assert np.all(img.pixels == 0)


def test_order2_render_decomposes_exactly():
    rng = np.random.default_rng(0)
    scene = SphereScene(48)
    img = render_live_distant(scene, random_light(rng), K2)
    dec = decompose(img, scene.normal_map(), lambertian_kernel(3))
    assert dec.residual_fraction < 1e-6


def test_render_matches_brute_force_integral():
    rng = np.random.default_rng(1)
    light = random_light(rng)
    scene = SphereScene(32)
    img = render_live_distant(scene, light, K2)
    normals = scene.normal_map().valid_normals()[::7]
    want = direct_irradiance(lambda u: sh_synthesize(light, u), normals, n=8)
    got = img.values()[::7]
    assert np.max(np.abs(got - want) / np.abs(want)) < 1e-3


def test_render_gate_rejects_dark_lighting():
    light = SHCoeffs.from_dict(2, {(0, 0): 0.1, (1, 0): -1.0})
    with pytest.raises(RenderError):
        render_live_distant(SphereScene(32), light, K2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_render_is_linear_in_lighting(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    l1, l2 = random_light(rng), random_light(rng)
    scene = SphereScene(24, texture=AlbedoTexture(seed=seed % 100, n_blobs=20))
    nm = scene.normal_map()
    # linearity holds for the unclamped irradiance, which is what pixels carry
    # whenever the combination stays non-negative
    n = nm.valid_normals()
    alb = scene.albedo(n)
    combo = SHCoeffs(2, alpha * l1.values + beta * l2.values)
    lhs = alb * distant_irradiance(combo, K2, n)
    rhs = alpha * alb * distant_irradiance(l1, K2, n) + beta * alb * distant_irradiance(l2, K2, n)
    assert np.max(np.abs(lhs - rhs)) < 1e-9
    img1 = render_live_distant(scene, l1, K2)
    np.testing.assert_allclose(img1.values(), alb * distant_irradiance(l1, K2, n), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_live_irradiance_is_confined_to_degree_two(seed):
    light = random_light(np.random.default_rng(seed), rel=1.0)
    grid = make_quadrature(6)
    samples = distant_irradiance(light, K2, grid.dirs)
    e = band_energies(sh_transform(grid, samples, 4))
    assert e[3] < 1e-9 * e.sum()


# --- near light --------------------------------------------------------------


def test_near_light_third_degree_matches_oracle():
    for d in (1.5, 3.0, 8.0):
        assert near_light_band_fractions(d)[3] == pytest.approx(third_degree_fraction_oracle(d), rel=1e-6)


def test_near_light_third_degree_decays_with_distance():
    fracs = [near_light_band_fractions(d)[3] for d in (1.5, 2.0, 4.0, 8.0, 16.0)]
    assert all(a > b for a, b in zip(fracs, fracs[1:]))


@pytest.mark.xfail(strict=True, reason="fraction at 8r is 0.0123 by an independent quadrature")
def test_near_light_third_degree_below_one_percent_at_8r():
    assert near_light_band_fractions(8.0)[3] < 0.01


def test_near_light_distant_limit():
    w = np.array([0.3, 0.2, 1.0])
    w /= np.linalg.norm(w)
    scene = SphereScene(48)
    d = 1e4
    near = render_live_near(scene, PointLight(d * w, d * d)).values()
    exact = np.maximum(scene.normal_map().valid_normals() @ w, 0.0)
    assert np.max(np.abs(near - exact)) < 1e-3 * exact.max()
    # the SH renderer approaches the same image as the light's band limit grows
    errs = []
    for order in (2, 4, 8, 16):
        light = SHCoeffs(order, sh_basis(w[None], order)[0])
        dist = render_live_distant(scene, light, lambertian_kernel(order), max_clamped=1.0).values()
        errs.append(np.linalg.norm(dist - near) / np.linalg.norm(near))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 5e-3


def test_near_light_inside_sphere_rejected():
    with pytest.raises(ValidationError):
        render_live_near(SphereScene(16), PointLight([0, 0, 0.5]))


def test_near_render_white_on_axis_is_zonal():
    img = render_live_near(SphereScene(33), PointLight([0, 0, 8.0]))
    assert np.allclose(img.pixels, img.pixels[::-1, :]) and np.allclose(img.pixels, img.pixels[:, ::-1])


# --- planar illumination -------------------------------------------------------


def test_distant_axial_light_gives_uniform_field():
    fit = planar_illumination(PointLight([0, 0, 1e5], 1e10), 1.0)
    assert abs(fit.field.a) < 1e-4 * fit.field.c
    assert abs(fit.field.b) < 1e-4 * fit.field.c


def test_45_degree_light_ratio():
    h = 1.0
    pos = 8 * h * np.array([np.sin(np.pi / 4), 0.0, np.cos(np.pi / 4)])
    fit = planar_illumination(PointLight(pos), h)
    ratio = fit.exact(1.0, 0.0) / fit.exact(-1.0, 0.0)
    assert ratio == pytest.approx(1.4, abs=0.05)
    # the affine fit points the same way
    assert fit.field.a > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 10))
def test_planar_mirror_symmetry(x, y, z):
    f = planar_illumination(PointLight([x, y, z]), 1.0).field
    g = planar_illumination(PointLight([-x, y, z]), 1.0).field
    assert g.a == pytest.approx(-f.a, rel=1e-9, abs=1e-12)
    assert g.b == pytest.approx(f.b, rel=1e-9, abs=1e-12)
    assert g.c == pytest.approx(f.c, rel=1e-9)


def test_light_behind_photo_rejected():
    with pytest.raises(ValidationError):
        planar_illumination(PointLight([0, 0, -1]), 1.0)


# --- spoof capture -----------------------------------------------------------


def _live(seed=0, texture=None, res=48):
    return render_live_distant(SphereScene(res, texture=texture), random_light(np.random.default_rng(seed)), K2)


def test_uniform_field_scales_exactly():
    live = _live()
    spoof = capture_spoof(live, PlanarIlluminationField(0, 0, 1.7), 1.0)
    assert np.array_equal(spoof.pixels, 1.7 * live.pixels)


def test_print_contrast_scales_rms_contrast():
    live = _live(texture=AlbedoTexture(seed=2))
    c = 1.3
    spoof = capture_spoof(live, PlanarIlluminationField(0, 0, c), 0.85)
    assert rms_contrast(spoof) / c == pytest.approx(0.85 * rms_contrast(live), abs=1e-9)


def test_sloped_field_raises_leakage():
    scene = SphereScene(48)
    nm = scene.normal_map()
    live = _live(res=48)
    spoof = capture_spoof(live, PlanarIlluminationField(0.4, 0.0, 1.0), 1.0)
    assert leakage_score(spoof, nm) > leakage_score(live, nm)


def test_capture_preserves_mask_and_validates():
    live = _live()
    spoof = capture_spoof(live, PlanarIlluminationField(0.1, 0.1, 1.0), 0.9)
    assert np.array_equal(spoof.mask, live.mask)
    assert np.all(spoof.pixels[~spoof.mask] == 0)
    with pytest.raises(ValidationError):
        capture_spoof(live, PlanarIlluminationField(1.0, 0.5, 1.0))
    with pytest.raises(ValidationError):
        print_tone(live, 1.5)
    with pytest.raises(ValidationError):
        print_tone(live, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_sloped_field_always_leaks_into_degree_three(seed, a, b):
    if abs(a) + abs(b) < 1e-3:
        a = 0.1
    light = random_light(np.random.default_rng(seed), rel=1.0)
    irr = SHCoeffs(2, light.values * K2.per_coefficient(2))
    spoofed = spoof_irradiance(irr, PlanarIlluminationField(a, b, 1.0))
    assert spoofed.order == 3
    assert band_energies(spoofed)[3] > 0
