"""Transition tensors, loss spectra, plane geometry, field slices, and basin
profiles, checked against analytic models and synthetic label streams."""

import math

import numpy as np
import pytest

from rulelab.dataset import generate_dataset
from rulelab.denoisers import EmpiricalDenoiser, RuleDenoiser
from rulelab.dissect import (BasinProfile, CRITICAL_BAND, PlaneSpec,
                             TransitionTensor, aggregate_transitions,
                             basin_profile, build_plane, dsm_spectrum,
                             field_slice, sigma_grid, spectra_to_csv,
                             standard_splits, transition_counts)
from rulelab.encoding import encode
from rulelab.metrics import StateLabel
from rulelab.rules import Family, RuleSpec, RuleError, sample_valid


# -- transitions -----------------------------------------------------------------------


def test_transition_identity_labels():
    labels = np.array([0, 1, 2, 3, 2, 2])
    counts = transition_counts(labels, labels)
    assert counts.sum() == 6
    assert (np.diag(counts) == np.bincount(labels, minlength=4)).all()
    assert counts.sum() - np.trace(counts) == 0


def test_transition_single_cell():
    a = np.full(10, StateLabel.VALID_NOVEL)
    b = np.full(10, StateLabel.VALID_MEMORIZED)
    counts = transition_counts(a, b)
    assert counts[StateLabel.VALID_NOVEL, StateLabel.VALID_MEMORIZED] == 10
    assert counts.sum() == 10


def test_transition_length_mismatch():
    with pytest.raises(ValueError):
        transition_counts(np.zeros(3, int), np.zeros(4, int))


def synthetic_tensor():
    rng = np.random.default_rng(0)
    steps = [10, 20, 40, 80, 160]
    labels = [rng.integers(0, 4, 100) for _ in steps]
    return TransitionTensor.from_labels(steps, labels), labels


def test_aggregate_single_window_is_raw():
    tensor, labels = synthetic_tensor()
    counts, norm, defined = tensor.aggregate((10, 10))
    assert (counts == transition_counts(labels[0], labels[1])).all()
    rs = counts.sum(axis=1)
    assert np.allclose(norm[defined].sum(axis=1), 1.0)


def test_aggregate_additivity():
    tensor, _ = synthetic_tensor()
    a, _, _ = tensor.aggregate((10, 20))
    b, _, _ = tensor.aggregate((40, 160))
    total, _, _ = tensor.aggregate((10, 160))
    assert (a + b == total).all()


def test_aggregate_empty_window_errors():
    tensor, _ = synthetic_tensor()
    with pytest.raises(ValueError):
        tensor.aggregate((500, 600))
    with pytest.raises(ValueError):
        aggregate_transitions(tensor, (11, 19))


def test_sample_conservation():
    tensor, labels = synthetic_tensor()
    for i in range(len(tensor.counts) - 1):
        col_sums = tensor.counts[i].sum(axis=0)
        row_sums = tensor.counts[i + 1].sum(axis=1)
        assert (col_sums == row_sums).all()


def test_zero_row_flagged():
    a = np.zeros(5, int)  # only state 0 occupied
    b = np.ones(5, int)
    t = TransitionTensor.from_labels([1, 2], [a, b])
    counts, norm, defined = t.aggregate((1, 1))
    assert defined.tolist() == [True, False, False, False]
    assert norm[1].sum() == 0.0


# -- spectra ---------------------------------------------------------------------------


def test_sigma_grid_endpoints():
    g = sigma_grid()
    assert len(g) == 50
    assert g[0] == 0.002 and g[-1] == 80.0
    assert (np.diff(np.log(g)) > 0).all()


RULE12 = RuleSpec(Family.GROUP_PARITY, D=12, G=3)


def spectra_setup():
    ds = generate_dataset(RULE12, 32, seed=1)
    splits = standard_splits(ds, heldout_count=64, cube_count=64, seed=0)
    return ds, splits


def test_perfect_denoiser_zero_spectrum():
    ds, splits = spectra_setup()

    class Perfect:
        exact_score = True

        def denoise(self, x, sigma):
            return self._x0

    perfect = Perfect()
    grid = sigma_grid()[::10]
    # evaluate each split against itself as the clean target
    for name, mat in splits.items():
        class P:
            exact_score = True

            def denoise(self, x, sigma, _m=mat):
                return _m[: len(x)]

        # the loss definition uses the clean batch as target with fresh noise,
        # so an oracle returning exactly the batch gives zero loss
        spec = dsm_spectrum(P(), {name: mat}, sigmas=grid, repeats=2)
        assert np.allclose(spec.mean, 0.0)


def test_empirical_spectrum_train_below_heldout_in_band():
    ds, splits = spectra_setup()
    den = EmpiricalDenoiser(splits["train"])
    spec = dsm_spectrum(den, splits, repeats=8, noise_seed=3)
    band = spec.band_mask()
    i_train = spec.splits.index("train")
    i_held = spec.splits.index("heldout_valid")
    gap = spec.mean[i_held, band] - spec.mean[i_train, band]
    se = np.sqrt(spec.se[i_held, band] ** 2 + spec.se[i_train, band] ** 2)
    assert (gap > 3 * se).all()


def test_rule_spectrum_train_matches_heldout():
    ds, splits = spectra_setup()
    den = RuleDenoiser(RULE12)
    spec = dsm_spectrum(den, splits, repeats=8, noise_seed=5)
    i_train = spec.splits.index("train")
    i_held = spec.splits.index("heldout_valid")
    diff = np.abs(spec.mean[i_train] - spec.mean[i_held])
    se = np.sqrt(spec.se[i_train] ** 2 + spec.se[i_held] ** 2)
    band = spec.band_mask()
    assert (diff[band] <= 3 * se[band]).all()
    # uniform cube sits strictly above both inside the band
    i_cube = spec.splits.index("uniform_cube")
    for i_other in (i_train, i_held):
        gap = spec.mean[i_cube, band] - spec.mean[i_other, band]
        se2 = np.sqrt(spec.se[i_cube, band] ** 2 + spec.se[i_other, band] ** 2)
        assert (gap > 3 * se2).all()


def test_spectrum_invariant_to_cube_seed():
    ds, _ = spectra_setup()
    den = RuleDenoiser(RULE12)
    grid = sigma_grid()[10:40:4]
    means = []
    for seed in (0, 123):
        splits = standard_splits(ds, heldout_count=64, cube_count=64, seed=seed)
        spec = dsm_spectrum(den, {"uniform_cube": splits["uniform_cube"]},
                            sigmas=grid, repeats=8, noise_seed=7)
        means.append((spec.mean[0], spec.se[0]))
    diff = np.abs(means[0][0] - means[1][0])
    se = np.sqrt(means[0][1] ** 2 + means[1][1] ** 2)
    assert (diff <= 3.5 * se).all()


def test_spectrum_rejects_empty_split():
    with pytest.raises(ValueError):
        dsm_spectrum(RuleDenoiser(RULE12), {"train": np.empty((0, 12))})


def test_spectra_csv_format():
    ds, splits = spectra_setup()
    spec = dsm_spectrum(RuleDenoiser(RULE12), splits, sigmas=sigma_grid()[:3], repeats=1)
    csv = spectra_to_csv([spec])
    lines = csv.strip().split("\n")
    assert lines[0] == "split,sigma,step,loss,se"
    assert len(lines) == 1 + 3 * len(splits)


# -- plane geometry ----------------------------------------------------------------------


def test_plane_anchor_coordinates():
    rng = np.random.default_rng(0)
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=3)
    s2 = math.sqrt(2)
    for _ in range(100):
        x_a = sample_valid(rule, rng).astype(float)
        plane = build_plane(x_a, rule)
        coords = plane.anchor_coords()
        expected = np.array([[0.0, 0.0], [2 * s2, 0.0], [s2, s2], [s2, -s2]])
        assert np.abs(coords - expected).max() < 1e-10
        # orthonormal basis
        gram = plane.basis @ plane.basis.T
        assert np.abs(gram - np.eye(2)).max() < 1e-12


def test_plane_neighbor_distances():
    rule = RuleSpec(Family.GROUP_PARITY, D=9, G=3)
    x_a = sample_valid(rule, np.random.default_rng(1)).astype(float)
    plane = build_plane(x_a, rule)
    assert np.isclose(np.linalg.norm(plane.anchor_b - plane.anchor_a), 2 * math.sqrt(2))
    assert np.isclose(np.linalg.norm(plane.anchor_c - plane.anchor_a), 2.0)
    # the second single-flip neighbor mirrors the first across the a-b axis
    assert np.isclose(np.linalg.norm(plane.anchor_d - plane.anchor_a), 2.0)
    assert (plane.anchor_d == plane.anchor_a + plane.anchor_b - plane.anchor_c).all()


def test_plane_rejects_invalid_anchor():
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    bad = np.ones(6)
    bad[0] = -1
    with pytest.raises(RuleError):
        build_plane(bad, rule)


def test_plane_grid_embedding():
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    x_a = np.ones(6)
    plane = build_plane(x_a, rule)
    pts = plane.grid_points()
    assert pts.shape == (2500, 6)
    # index [i, j] corresponds to (alphas[i], betas[j])
    k = 7 * 50 + 3
    expect = plane.embed(plane.alphas[7], plane.betas[3])[0]
    assert np.allclose(pts[k], expect)


def test_field_slice_identity_denoiser_zero_score():
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    plane = build_plane(np.ones(6), rule)

    class Identity:
        exact_score = False

        def denoise(self, x, sigma):
            return np.asarray(x, dtype=np.float64).copy()

    mag, proj = field_slice(Identity(), plane, 0.5)
    assert mag.shape == (50, 50) and proj.shape == (50, 50)
    assert np.allclose(mag, 0.0)


def test_field_slice_single_anchor_attraction():
    """With only the base anchor in training, the projected velocity points to
    it over the whole plane."""
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=3)
    x_a = sample_valid(rule, np.random.default_rng(2)).astype(float)
    plane = build_plane(x_a, rule)
    den = EmpiricalDenoiser(x_a[None, :])
    mag, proj = field_slice(den, plane, 0.5)
    # projection of x_a onto the unit a-to-b direction is exactly -sqrt2
    assert np.allclose(proj, -math.sqrt(2))
    frac_toward_a = (proj < 0).mean()
    assert frac_toward_a > 0.9


def test_field_slice_rule_denoiser_valid_anchors_are_calm():
    """Score magnitude at the rule-valid anchors is far below the magnitude at
    the rule-violating anchors for the population-optimal denoiser."""
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=3)
    x_a = sample_valid(rule, np.random.default_rng(3)).astype(float)
    plane = build_plane(x_a, rule)
    den = RuleDenoiser(rule)
    sigma = 0.2
    pts = np.stack([plane.anchor_a, plane.anchor_b, plane.anchor_c, plane.anchor_d])
    score = (den.denoise(pts, sigma) - pts) / sigma ** 2
    mags = np.linalg.norm(score, axis=1)
    assert mags[0] < 1e-6 and mags[1] < 1e-6
    assert mags[2] > 10 and mags[3] > 10


def test_field_slice_requires_positive_sigma():
    rule = RuleSpec(Family.GROUP_PARITY, D=6, G=3)
    plane = build_plane(np.ones(6), rule)
    with pytest.raises(ValueError):
        field_slice(RuleDenoiser(rule), plane, 0.0)


# -- basin profiles ----------------------------------------------------------------------


def test_two_anchor_boundary_at_midpoint():
    """Symmetric two-anchor toy: the exact-match boundary sits at t = 0.5
    within one grid cell, and the profile is monotone nonincreasing."""
    rule = RuleSpec(Family.GROUP_PARITY, D=10, G=2)
    a = np.ones(10)
    b = a.copy()
    b[[0, 1]] = -1  # valid neighbor at Hamming 2
    from rulelab.dataset import Dataset

    ds = Dataset(rule=rule, samples=np.stack([a, b]).astype(np.int64), seed=0)
    den = EmpiricalDenoiser(np.stack([a, b]))
    prof = basin_profile(den, ds, "nearest_other_train", sigma=0.5,
                         n_anchors=1, bootstrap=100)
    t = prof.t_grid
    ex = prof.exact_match
    crossings = np.where(np.diff(ex) < 0)[0]
    assert len(crossings) >= 1
    t_cross = 0.5 * (t[crossings[0]] + t[crossings[0] + 1])
    cell = t[1] - t[0]
    assert abs(t_cross - 0.5) <= cell
    assert (np.diff(ex) <= 1e-12).all()


def test_basin_exact_match_at_anchor():
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=3)
    ds = generate_dataset(rule, 16, seed=2)
    den = EmpiricalDenoiser(encode(ds.samples, rule))
    prof = basin_profile(den, ds, "hamming1_invalid", sigma=0.5,
                         n_anchors=8, bootstrap=200)
    i0 = int(np.argmin(np.abs(prof.t_grid)))
    assert prof.exact_match[i0] == 1.0
    assert prof.n_anchors == 8


def test_basin_memorizer_holds_longer_than_rule_model():
    """Along the valid-novel direction the empirical model keeps matching the
    anchor strictly longer than the population model."""
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=3)
    ds = generate_dataset(rule, 16, seed=3)
    emp = EmpiricalDenoiser(encode(ds.samples, rule))
    pop = RuleDenoiser(rule)
    p_emp = basin_profile(emp, ds, "hamming2_valid_novel", sigma=0.5,
                          n_anchors=10, bootstrap=100)
    p_pop = basin_profile(pop, ds, "hamming2_valid_novel", sigma=0.5,
                          n_anchors=10, bootstrap=100)

    def last_full_match(p):
        idx = np.where(p.exact_match >= 1.0)[0]
        return p.t_grid[idx[-1]]

    assert last_full_match(p_emp) > last_full_match(p_pop)


def test_basin_bootstrap_bands():
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=2)
    ds = generate_dataset(rule, 40, seed=4)
    den = EmpiricalDenoiser(encode(ds.samples, rule))
    wide = basin_profile(den, ds, "hamming1_invalid", sigma=0.5,
                         n_anchors=10, bootstrap=500, bootstrap_seed=1)
    narrow = basin_profile(den, ds, "hamming1_invalid", sigma=0.5,
                           n_anchors=40, bootstrap=500, bootstrap_seed=1)
    # CI contains the point estimate
    assert (wide.l2_lo <= wide.l2_from_start + 1e-12).all()
    assert (wide.l2_from_start <= wide.l2_hi + 1e-12).all()
    # more anchors shrink the band width on average
    assert (narrow.l2_hi - narrow.l2_lo).mean() <= (wide.l2_hi - wide.l2_lo).mean() + 1e-12


def test_basin_csv_format():
    rule = RuleSpec(Family.GROUP_PARITY, D=12, G=2)
    ds = generate_dataset(rule, 8, seed=5)
    den = EmpiricalDenoiser(encode(ds.samples, rule))
    prof = basin_profile(den, ds, "hamming1_invalid", n_anchors=4,
                         t_points=10, bootstrap=50)
    lines = prof.to_csv().strip().split("\n")
    assert lines[0] == "direction,sigma,t,metric,mean,lo,hi"
    assert len(lines) == 1 + 3 * 10
