import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.exceptions import NotFittedError

from oracles import analysis_unitary_oracle, label_resolved_rate
from pathtomo.correlations import KIND_PAIRS, kind_rate
from pathtomo.distinguishability import (
    VisibleStateTomography,
    hom_source_vis,
    mle_reconstruct_vis,
    normalized_rate_vis,
    predict_rate_vis,
    vis_record_model,
    vis_unvectorize,
    vis_vectorize,
)
from pathtomo.exceptions import InsufficientDesign, OutOfRange
from pathtomo.optics import SetupConfig, build_hom_source
from pathtomo.states import VisDensityMatrix, random_density
from pathtomo.synth import campaign_layout, noiseless_records

BAL = SetupConfig()
LOSSY = SetupConfig(hom_reflectivity=0.508, eta0=0.6, eta1=0.6, eta2=0.6)
STAGE = {"path3": 0, "path4": 1, "path5": 2}
PSI_MINUS = VisDensityMatrix(np.zeros((3, 3)), 1.0)
seeds = st.integers(0, 2**32 - 1)


def oracle(cfg, overlap, phi, a, b):
    if a in STAGE:
        u = analysis_unitary_oracle(cfg.hom_reflectivity, cfg.bs1_reflectivity, cfg.bs2_reflectivity,
                                    (cfg.eta0, cfg.eta1, cfg.eta2), phi, cfg.phase_arm)
        return label_resolved_rate(cfg.hom_reflectivity, overlap, u, STAGE[a], STAGE[b])
    return label_resolved_rate(cfg.hom_reflectivity, overlap, np.eye(6), int(a[-1]), int(b[-1]))


def test_hom_source_vis_examples():
    ideal = hom_source_vis(0.5, 1.0)
    assert ideal.antisym_pop == pytest.approx(0, abs=1e-15)
    np.testing.assert_allclose(ideal.sym_block, build_hom_source(0.5).matrix, atol=1e-15)
    dist = hom_source_vis(0.5, 0.0)
    np.testing.assert_allclose(np.diag(dist.sym_block).real, [0.25, 0, 0.25], atol=1e-15)
    assert abs(dist.sym_block[0, 2]) == pytest.approx(0.25)
    for m in (0.0, 0.5, 0.975):
        rho = hom_source_vis(0.5, m)
        assert rho.antisym_pop == pytest.approx((1 - m) / 2, abs=1e-15)
        assert rho.is_physical()
    with pytest.raises(OutOfRange):
        hom_source_vis(0.5, 1.2)
    with pytest.raises(OutOfRange):
        hom_source_vis(1.0, 0.5)


@pytest.mark.parametrize("overlap", [0.0, 0.3, 0.975])
@pytest.mark.parametrize("kind", list(KIND_PAIRS))
def test_rates_match_label_resolved_oracle(kind, overlap):
    cfg = SetupConfig(hom_reflectivity=0.45, bs1_reflectivity=0.4, bs2_reflectivity=0.55,
                      eta0=0.7, eta1=0.9, eta2=0.6)
    a, b = KIND_PAIRS[kind]
    rho = hom_source_vis(cfg.hom_reflectivity, overlap)
    for phi in (0.0, 0.7, 2.9):
        assert predict_rate_vis(rho, cfg, phi, a, b) == pytest.approx(oracle(cfg, overlap, phi, a, b), abs=1e-12)


def test_psi_minus_antibunches():
    # psi- leaves a balanced splitter as one photon per port
    for phi in (0.0, 1.0):
        assert predict_rate_vis(PSI_MINUS, BAL, phi, "path0", "path1") == pytest.approx(1)
        assert predict_rate_vis(PSI_MINUS, BAL, phi, "path0", "path0") == pytest.approx(0, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0, 1), st.sampled_from(list(KIND_PAIRS)), st.floats(0, 2 * np.pi))
def test_collapse_consistency(seed, w, kind, phi):
    # with psi- weight zero the visible rates reduce to the path rates
    rho = random_density(np.random.default_rng(seed))
    a, b = KIND_PAIRS[kind]
    vis = VisDensityMatrix(rho.matrix, 0.0)
    assert predict_rate_vis(vis, LOSSY, phi, a, b) == pytest.approx(kind_rate(rho, LOSSY, kind, phi), abs=1e-12)
    # mixing in psi- is linear in its weight
    mix = VisDensityMatrix((1 - w) * rho.matrix, w)
    expect = (1 - w) * kind_rate(rho, LOSSY, kind, phi) + w * predict_rate_vis(PSI_MINUS, LOSSY, phi, a, b)
    assert predict_rate_vis(mix, LOSSY, phi, a, b) == pytest.approx(expect, abs=1e-12)


def test_path_matrix_accepted():
    rho = random_density(np.random.default_rng(3))
    assert predict_rate_vis(rho, BAL, 0.4, "path3", "path4") == pytest.approx(
        predict_rate_vis(rho.to_vis(), BAL, 0.4, "path3", "path4"))
    with pytest.raises(ValueError):
        predict_rate_vis(np.eye(2), BAL, 0.0, "path3", "path4")


def test_vis_vectorize_round_trip():
    rho = hom_source_vis(0.508, 0.4)
    back = vis_unvectorize(vis_vectorize(rho))
    np.testing.assert_allclose(back.matrix, rho.matrix, atol=1e-15)


def _vis_records(rho, cfg, bins=5, normalized=True, sigma=1e-3):
    kinds, phases = campaign_layout(bins)
    return noiseless_records(rho, cfg, kinds, phases, sigma=sigma, normalized=normalized)


@pytest.mark.parametrize("overlap", [1.0, 0.95, 0.5])
def test_vis_mle_normalized_recovers_overlap(overlap):
    truth = hom_source_vis(0.508, overlap)
    res = mle_reconstruct_vis(_vis_records(truth, LOSSY), LOSSY, random_state=0)
    assert vis_unvectorize(res.x).antisym_pop == pytest.approx((1 - overlap) / 2, abs=1e-4)


def test_fully_distinguishable_normalized_ambiguity():
    # normalized rates alone cannot separate this state from the two-photon
    # source with no interference; raw rates can
    truth = hom_source_vis(0.5, 0.0)
    other = VisDensityMatrix(
        np.array([[0.1623, 0, -0.2187], [0, 0.0219, 0], [-0.2187, 0, 0.3566]]), 0.459)
    kinds, phases = campaign_layout(5)
    for kind, phi in zip(kinds, phases):
        a, b = KIND_PAIRS[kind]
        p = 0.0 if phi is None else phi
        # the alternative is rounded to four digits
        assert normalized_rate_vis(other, BAL, p, a, b) == pytest.approx(
            normalized_rate_vis(truth, BAL, p, a, b), abs=2e-3)
    res = mle_reconstruct_vis(_vis_records(truth, BAL, normalized=False, sigma=1e-6), BAL,
                              rates="raw", random_state=0)
    assert vis_unvectorize(res.x).antisym_pop == pytest.approx(0.5, abs=1e-6)


def test_vis_design_requirements():
    kinds, phases = campaign_layout(1)
    recs = noiseless_records(hom_source_vis(0.5, 0.5), BAL, kinds, phases)
    with pytest.raises(InsufficientDesign):
        mle_reconstruct_vis(recs, BAL)


def test_vis_model_rows_have_antisym_column():
    kinds, phases = campaign_layout(4)
    model = vis_record_model(BAL, kinds, [np.nan if p is None else p for p in phases])
    assert model.coinc.shape == (len(kinds), 10)


def test_visible_state_estimator():
    truth = hom_source_vis(0.508, 0.95)
    recs = _vis_records(truth, LOSSY)
    est = VisibleStateTomography(config=LOSSY, random_state=0)
    with pytest.raises(NotFittedError):
        est.fidelity()
    est.fit(recs)
    assert est.antisym_population_ == pytest.approx(0.025, abs=1e-4)
    assert est.density_.shape == (4, 4)
    assert est.vis_density_.is_physical(atol=1e-8)
    np.testing.assert_allclose(est.predict(recs), [r.normalized_rate for r in recs], atol=1e-5)
    assert est.get_params()["rates"] == "normalized"
