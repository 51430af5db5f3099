"""Tests for period Gram matrices, annulus integrals, and determinant growth."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ellipk

from pinchlab.errors import AGMNotConverged, GridMismatch, GridTooShort, IllConditionedFit
from pinchlab.family import INF_POINT, three_cycle_family, two_sphere_family
from pinchlab.laplace import Spectrum
from pinchlab.periods import (
    KAPPA,
    KAPPA_CANDIDATE_REJECTED,
    RHO_0,
    RHO_1,
    PeriodGram,
    PlumbingDifferential,
    RationalForm,
    annulus_log_integral,
    bivariate_taylor,
    canonical_basis,
    component_pairing,
    det_growth_fit,
    elliptic_period_gram,
    fit_log_asymptotics,
    key_identity_check,
    leading_coefficient,
    node_residue,
    node_taylor,
    plumbing_gram,
    plumbing_twisted_gram,
    plumbing_untwisted_gram,
    residue_free_differential,
    validate_residues,
)


def annulus_closed_form(t, ci, cj):
    # alpha_i conj(alpha_j) has one exponential per angular frequency
    # k = m - n, so the integral is a finite sum in closed form
    def freq_coeffs(c):
        d = {}
        M, N = c.shape
        for m in range(M):
            for n in range(N):
                if c[m, n] != 0:
                    d[m - n] = d.get(m - n, 0) + c[m, n] * t ** n
        return d

    Si, Sj = freq_coeffs(np.asarray(ci, complex)), freq_coeffs(np.asarray(cj, complex))
    L = math.log(1.0 / abs(t))
    total = 0.0 + 0.0j
    for k in set(Si) | set(Sj):
        si, sj = Si.get(k, 0.0), Sj.get(k, 0.0)
        if si == 0 or sj == 0:
            continue
        radial = L if k == 0 else (1.0 - abs(t) ** (2 * k)) / (2 * k)
        total += si * np.conj(sj) * radial
    return 4.0 * math.pi * total


class TestRationalForm:
    def test_residue_at_infinity_balances(self):
        f = RationalForm(poles=((0j, 2.0 + 1j), (1.0 + 0j, -0.5 + 0j)))
        assert f.residue_at_infinity() == -(2.0 + 1j - 0.5)

    def test_taylor_at_zero_matches_evaluation(self):
        f = RationalForm(poles=((0j, 1.0 + 0j), (2.0 + 1j, -1.0 + 0j)))
        c = f.taylor_alpha_at_zero(20)
        x = 0.1 + 0.05j
        series = sum(c[m] * x ** m for m in range(21))
        assert series == pytest.approx(x * complex(f.eval(np.array([x]))[0]), rel=1e-12)

    def test_taylor_at_infinity_matches_evaluation(self):
        f = RationalForm(poles=((1.5j, 1.0 + 0j), (-1.5j, -1.0 + 0j)))
        c = f.taylor_alpha_at_infinity(40)
        x = 0.1 - 0.2j  # local coordinate 1/z
        series = sum(c[m] * x ** m for m in range(41))
        direct = -complex(f.eval(np.array([1.0 / x]))[0]) / x
        assert series == pytest.approx(direct, rel=1e-10)

    def test_validate_residues_rejects_mismatched_node(self):
        fam = two_sphere_family()
        bad = PlumbingDifferential(
            forms={0: RationalForm(poles=((0j, 1.0 + 0j),)),
                   1: RationalForm(poles=((0j, 1.0 + 0j),))}
        )
        with pytest.raises(ValueError):
            validate_residues(fam, bad)

    def test_bivariate_taylor_layout(self):
        g = np.array([1.0, 2.0, 3.0], dtype=complex)
        h = np.array([-1.0, 5.0], dtype=complex)
        c = bivariate_taylor(g, h)
        assert c[0, 0] == 1.0  # left constant term wins
        assert list(c[:, 0]) == [1.0, 2.0, 3.0]
        assert c[0, 1] == -5.0  # right branch enters with dy/y = -dx/x


class TestAnnulusLogIntegral:
    def test_constant_data_gives_kappa_log(self):
        one = np.array([[1.0 + 0j]])
        for t in (1e-2, 1e-5, 1e-9):
            v = annulus_log_integral(t, one, one)
            assert v.real == pytest.approx(4.0 * math.pi * math.log(1.0 / t), rel=1e-9)
            assert abs(v.imag) < 1e-9

    def test_kappa_constants_recorded(self):
        assert KAPPA == 4.0 * math.pi
        assert KAPPA_CANDIDATE_REJECTED == 8.0 * math.pi

    def test_linear_data_stays_bounded(self):
        cx = np.zeros((2, 1), complex)
        cx[1, 0] = 1.0
        v4 = annulus_log_integral(1e-4, cx, cx)
        v8 = annulus_log_integral(1e-8, cx, cx)
        assert v4.real == pytest.approx(2.0 * math.pi, rel=1e-6)
        assert abs(v8 - v4) < 1e-6  # no log term

    def test_regression_residual_below_one_percent(self):
        ci = bivariate_taylor(np.array([1.0, 0.3], complex), np.array([-1.0, 0.2], complex))
        ts = np.array([1e-3, 1e-4, 1e-5])
        vals = np.array([annulus_log_integral(t, ci, ci).real for t in ts])
        consts = vals - KAPPA * np.log(1.0 / ts)
        assert (consts.max() - consts.min()) / abs(consts.mean()) < 0.01

    def test_rejects_bad_t(self):
        one = np.array([[1.0 + 0j]])
        for t in (0.0, 1.5):
            with pytest.raises(ValueError):
                annulus_log_integral(t, one, one)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=2.0, allow_nan=False,
                                       allow_infinity=False), min_size=8, max_size=8))
    def test_matches_closed_form(self, flat):
        ci = np.array(flat[:4], complex).reshape(2, 2)
        cj = np.array(flat[4:], complex).reshape(2, 2)
        if abs(ci).max() < 1e-3 or abs(cj).max() < 1e-3:
            return
        t = 1e-3
        v = annulus_log_integral(t, ci, cj)
        oracle = annulus_closed_form(t, ci, cj)
        # quadrature stops relative to the L1 mass of the integrand
        tol = 1e-5 * (1.0 + abs(ci).sum() * abs(cj).sum() * math.log(1.0 / t))
        assert abs(v - oracle) <= tol
        # Hermitian symmetry of the pairing
        assert annulus_log_integral(t, cj, ci) == pytest.approx(np.conj(v), abs=tol)


class TestLeadingCoefficient:
    def test_zero_residues_vanish(self):
        assert leading_coefficient(np.zeros(3), np.ones(3)) == 0

    def test_single_node_unit_residues(self):
        assert leading_coefficient(np.array([1.0]), np.array([1.0])) == KAPPA

    def test_sesquilinear_scaling(self):
        r = np.array([1.0 + 1j, -0.5 + 0j])
        lam = 2.0 - 1j
        assert leading_coefficient(lam * r, lam * r) == pytest.approx(
            abs(lam) ** 2 * leading_coefficient(r, r)
        )


def legendre_gram_2d_quadrature(t):
    """(i/2) int omega ^ conj(omega) = 2 int_C dA / |x(x-1)(x-t)| by
    patch-decomposed polar quadrature (patches around the three roots,
    smooth remainder, 1/x chart past |x| = 2)."""
    roots = [0.0, t, 1.0]
    nodes, weights = np.polynomial.legendre.leggauss(24)

    def smoothstep(x):
        x = np.clip(x, 0.0, 1.0)
        return x ** 3 * (10 - x * (15 - 6 * x))

    def chi(r):
        return smoothstep((0.2 - r) / 0.1)

    def f(x):
        return 2.0 / np.abs(x * (x - 1.0) * (x - t))

    def polar(fn, center, r0, r1, npan, ntheta):
        th = 2 * math.pi * np.arange(ntheta) / ntheta
        edges = np.linspace(r0, r1, npan + 1)
        tot = 0.0
        for a, b in zip(edges, edges[1:]):
            r = 0.5 * (a + b) + 0.5 * (b - a) * nodes
            w = 0.5 * (b - a) * weights
            z = center + r[:, None] * np.exp(1j * th[None, :])
            tot += ((fn(z).sum(axis=1) * (2 * math.pi / ntheta)) * (w * r)).sum()
        return tot

    def mid(z):
        v = f(z)
        for a in roots:
            v = v * (1 - chi(np.abs(z - a)))
        return v

    def far(w):  # x = 1/w past |x| = 2
        return 2.0 / (np.abs(w) * np.abs(1 - w) * np.abs(1 - t * w))

    total = sum(
        polar(lambda z, a=a: f(z) * chi(np.abs(z - a)), a, 0.0, 0.2, 20, 128)
        for a in roots
    )
    total += polar(mid, 0.0, 0.0, 2.0, 40, 128)
    total += polar(far, 0.0, 0.0, 0.5, 20, 128)
    return total


class TestEllipticPeriodGram:
    def test_matches_complete_elliptic_integrals(self):
        for t in (0.1, 0.3, 1e-4):
            expect = 16.0 * ellipk(t) * ellipk(1.0 - t)
            assert elliptic_period_gram(t) == pytest.approx(expect, rel=1e-10)

    def test_small_t_q_expansion(self):
        # lambda ~ 16 q gives Im tau = log(16/|t|)/pi; |omega_1|^2 -> (2 pi)^2 / pi
        t = 1e-9
        expect = 4.0 * math.pi * math.log(16.0 / t)
        assert elliptic_period_gram(t) == pytest.approx(expect, rel=1e-6)

    def test_half_matches_direct_2d_quadrature(self):
        direct = legendre_gram_2d_quadrature(0.5 - 1e-9)
        # 0.5 is outside the open precondition range; evaluate the AGM at
        # the same nudged point
        assert elliptic_period_gram(0.5 - 1e-9) == pytest.approx(direct, rel=1e-4)

    def test_conjugate_t_same_gram(self):
        t = 0.2 + 0.1j
        assert elliptic_period_gram(np.conj(t)) == pytest.approx(
            elliptic_period_gram(t), rel=1e-12
        )

    def test_rejects_out_of_range(self):
        for t in (0.0, 0.7):
            with pytest.raises(ValueError):
                elliptic_period_gram(t)


class TestCanonicalBasis:
    def test_two_sphere_counts(self):
        tw, utw = canonical_basis(two_sphere_family())
        assert len(tw) == 1 and len(utw) == 0
        # residue theorem forces node residues +-1
        fam = two_sphere_family()
        r = node_residue(fam, tw[0], fam.nodes[0], 0)
        assert abs(abs(r) - 1.0) < 1e-14

    def test_three_cycle_counts_and_residues(self):
        fam = three_cycle_family()
        tw, utw = canonical_basis(fam)
        assert len(tw) == 3 and len(utw) == 1  # g + N - 1 = 3, g = 1
        for d in tw:
            validate_residues(fam, d)
        # cycle form has |residue| 1 at every node
        res = [node_residue(fam, tw[0], n, 0) for n in fam.nodes]
        assert all(abs(abs(r) - 1.0) < 1e-14 for r in res)

    def test_residue_free_has_no_node_residues(self):
        for fam in (two_sphere_family(), three_cycle_family()):
            rf = residue_free_differential(fam)
            for node in fam.nodes:
                assert node_residue(fam, rf, node, 0) == 0

    def test_node_taylor_constant_term_is_residue(self):
        fam = three_cycle_family()
        tw, _ = canonical_basis(fam)
        for d in tw:
            for node in fam.nodes:
                c = node_taylor(fam, d, node, 0, degree=6)
                assert c[0] == pytest.approx(node_residue(fam, d, node, 0))


class TestComponentPairing:
    def test_radial_oracle_for_cap_form(self):
        # f = dz/z on a one-node component with puncture at infinity: the
        # weighted density is radial, so a 1D quadrature is exact
        fam = two_sphere_family()
        tw, _ = canonical_basis(fam)
        v = component_pairing(fam, tw[0], tw[0], 0)
        from pinchlab.periods import _weight_profile

        def radial(rho):  # rho = |1/z|, density 2/|z|^2 * W(rho)
            return float(_weight_profile(np.array([rho]))[0]) / rho

        oracle = 4.0 * math.pi * quad(radial, 1e-12, 2.0, limit=400)[0]
        assert v.real == pytest.approx(oracle, rel=1e-5)
        assert abs(v.imag) < 1e-9

    def test_hermitian(self):
        fam = three_cycle_family()
        tw, _ = canonical_basis(fam)
        a = component_pairing(fam, tw[0], tw[1], 0)
        b = component_pairing(fam, tw[1], tw[0], 0)
        assert a == pytest.approx(np.conj(b), abs=1e-4)

    def test_zero_when_form_absent(self):
        fam = three_cycle_family()
        tw, _ = canonical_basis(fam)
        # twisted-1 routes through components 0 and 1 only
        assert component_pairing(fam, tw[1], tw[1], 2) == 0


@pytest.fixture(scope="module")
def two_sphere_gram():
    ts = np.logspace(-3, -8, 8)
    return ts, plumbing_twisted_gram(two_sphere_family(), ts)


@pytest.fixture(scope="module")
def three_cycle_grams():
    ts = np.logspace(-4, -16, 8)
    fam = three_cycle_family()
    return ts, plumbing_twisted_gram(fam, ts), plumbing_untwisted_gram(fam, ts)


class TestPlumbingGram:
    def test_two_sphere_log_growth(self, two_sphere_gram):
        ts, g = two_sphere_gram
        fit = fit_log_asymptotics(g)
        assert fit.a[0, 0].real == pytest.approx(KAPPA, rel=1e-6)
        assert fit.residual < 1e-6

    def test_positive_definite_everywhere(self, three_cycle_grams):
        _, g, gu = three_cycle_grams
        assert g.check_positive_definite() > 0
        assert gu.check_positive_definite() > 0

    def test_hermitian_entries(self, three_cycle_grams):
        _, g, _ = three_cycle_grams
        for m in g.matrices:
            assert abs(m - m.conj().T).max() < 1e-8

    def test_leading_coefficients_match_residues(self, three_cycle_grams):
        ts, g, _ = three_cycle_grams
        fam = three_cycle_family()
        tw, _ = canonical_basis(fam)
        fit = fit_log_asymptotics(g)
        res = np.array(
            [[node_residue(fam, d, n, 0) for n in fam.nodes] for d in tw]
        )
        pred = np.array(
            [[leading_coefficient(res[i], res[j]) for j in range(3)] for i in range(3)]
        )
        assert abs(fit.a - pred).max() < 1e-6 * abs(pred).max()

    def test_untwisted_block_log_growth(self, three_cycle_grams):
        ts, _, gu = three_cycle_grams
        vals = np.array([m[0, 0].real for m in gu.matrices])
        slope = np.polyfit(np.log(1.0 / ts), vals, 1)[0]
        assert slope == pytest.approx(3 * KAPPA, rel=1e-6)  # three unit-residue nodes

    def test_two_sphere_untwisted_is_empty(self):
        ts = np.array([1e-3, 1e-4])
        gu = plumbing_untwisted_gram(two_sphere_family(), ts)
        assert np.allclose(gu.determinants(), 1.0)

    def test_json_round_trip(self, tmp_path, two_sphere_gram):
        ts, g = two_sphere_gram
        path = str(tmp_path / "gram.json")
        g.to_json(path)
        payload = json.load(open(path))
        assert payload["schema"] == "pinchlab-gram-v1"
        back = PeriodGram.from_json(path)
        assert np.allclose(back.t_grid, np.abs(ts))
        assert all(
            np.allclose(a, b) for a, b in zip(back.matrices, g.matrices)
        )
        assert back.twisted


class TestProp51:
    def test_residue_free_rows_have_tiny_leading_coefficient(self):
        fam = two_sphere_family()
        tw, _ = canonical_basis(fam)
        rf = residue_free_differential(fam)
        ts = np.logspace(-3, -8, 8)
        g = plumbing_gram(fam, ts, tw + [rf], twisted=True)
        fit = fit_log_asymptotics(g)
        amax = abs(fit.a).max()
        assert abs(fit.a[1]).max() < 1e-3 * amax
        assert abs(fit.a[:, 1]).max() < 1e-3 * amax
        # A block (residue-carrying) and B block both positive-definite
        assert np.linalg.eigvalsh(fit.a[:1, :1]).min() > 0
        assert np.linalg.eigvalsh(fit.b).min() > 0
        assert g.check_positive_definite() > 0


class TestDetGrowthFit:
    def test_synthetic_cubic_model(self):
        ts = np.logspace(-2, -10, 9)
        dets = np.log(1.0 / ts) ** 3
        slope, nearest, dev = det_growth_fit(ts, dets)
        assert slope == pytest.approx(3.0, abs=1e-9)
        assert nearest == 3 and dev < 1e-9

    def test_legendre_family_slope_one(self):
        ts = np.logspace(-20, -200, 10)
        dets = np.array([elliptic_period_gram(t) for t in ts])
        slope, nearest, dev = det_growth_fit(ts, dets)
        assert nearest == 1 and abs(slope - 1.0) < 0.05
        # linearity of the Gram itself in log(1/|t|)
        L = np.log(1.0 / ts)
        resid = np.polyfit(L, dets, 1, full=True)[1][0]
        ss = ((dets - dets.mean()) ** 2).sum()
        assert 1.0 - resid / ss > 0.999

    def test_two_sphere_twisted_slope_one(self):
        ts = np.logspace(-10, -150, 9)
        g = plumbing_twisted_gram(two_sphere_family(), ts)
        slope, nearest, _ = det_growth_fit(ts, g.determinants())
        assert nearest == 1 and abs(slope - 1.0) < 0.05

    def test_power_substitution_invariance(self):
        ts = np.logspace(-20, -150, 10)  # t^2 stays above the float underflow
        dets = np.array([elliptic_period_gram(t) for t in ts])
        s1 = det_growth_fit(ts, dets)[0]
        dets_sq = np.array([elliptic_period_gram(t) for t in ts ** 2])
        s2 = det_growth_fit(ts ** 2, dets_sq)[0]
        assert abs(s1 - s2) < 0.05

    def test_accepts_period_gram(self, two_sphere_gram):
        ts, g = two_sphere_gram
        assert det_growth_fit(g) == det_growth_fit(ts, g.determinants())

    def test_grid_too_short(self):
        with pytest.raises(GridTooShort):
            det_growth_fit(np.logspace(-2, -8, 5), np.ones(5))
        with pytest.raises(GridTooShort):
            det_growth_fit(np.logspace(-2, -4, 9), np.ones(9))

    def test_nonpositive_determinant_rejected(self):
        ts = np.logspace(-2, -10, 9)
        dets = np.ones(9)
        dets[3] = -1.0
        with pytest.raises(IllConditionedFit):
            det_growth_fit(ts, dets)


def _spectrum(evs, s):
    evs = np.asarray(evs, dtype=float)
    return Spectrum(
        eigenvalues=evs,
        residual_norms=np.zeros_like(evs),
        k=len(evs),
        s=s,
        zero_threshold=1e-12,
    )


def _gram_1x1(ts, values, twisted=True):
    return PeriodGram(
        t_grid=np.asarray(ts, dtype=complex),
        matrices=[np.array([[v + 0j]]) for v in values],
        twisted=twisted,
    )


class TestKeyIdentity:
    def test_synthetic_exact_inputs_pass(self):
        ts = np.logspace(-2, -10, 9)
        L = np.log(1.0 / ts)
        spectra = [_spectrum([0.0, 1.0 / l, 2.0, 3.0], s) for s, l in zip(ts, L)]
        twisted = _gram_1x1(ts, L)
        untwisted = _gram_1x1(ts, np.ones_like(L), twisted=False)
        chk = key_identity_check(spectra, twisted, untwisted, n_small=1)
        assert chk.verdict == "PASS"
        assert np.allclose(chk.ratio, 1.0)

    def test_mismatched_exponent_fails(self):
        ts = np.logspace(-2, -10, 9)
        L = np.log(1.0 / ts)
        spectra = [_spectrum([0.0, 1.0 / l, 2.0, 3.0], s) for s, l in zip(ts, L)]
        twisted = _gram_1x1(ts, L ** 2)
        untwisted = _gram_1x1(ts, np.ones_like(L), twisted=False)
        chk = key_identity_check(spectra, twisted, untwisted, n_small=1)
        assert chk.verdict == "FAIL"

    def test_grid_mismatch_raises(self):
        ts = np.logspace(-2, -10, 9)
        L = np.log(1.0 / ts)
        spectra = [_spectrum([0.0, 1.0 / l, 2.0], s) for s, l in zip(ts, L)]
        twisted = _gram_1x1(ts * 10.0, L)
        untwisted = _gram_1x1(ts, np.ones_like(L), twisted=False)
        with pytest.raises(GridMismatch):
            key_identity_check(spectra, twisted, untwisted, n_small=1)
