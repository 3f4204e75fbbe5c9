import numpy as np
import pytest

from domainmix import (
    IGNORE,
    ConfigError,
    DataError,
    GridSpec,
    MixConfig,
    SelectionWeights,
    SpatialPrior,
    build_bank,
    build_spatial_prior,
    compute_stats,
    derive_rng,
    joint_selection_weights,
    mix_pair,
    paste,
    select_patch,
    select_patch_uniform,
    spatial_continuity_probs,
)
from domainmix.cut import CutPlan
from domainmix.stats import ClassStats

from conftest import cellwise_sample, make_sample


def flat_prior(num_classes, resolution=8):
    return SpatialPrior(
        num_classes=num_classes,
        resolution=resolution,
        bandwidth=0.1,
        maps=np.ones((num_classes, resolution, resolution)),
    )


class TestSpatialContinuityProbs:
    GRID = GridSpec.for_image(16, 12, 4, 3)

    def test_flat_prior_gives_uniform(self):
        prior = flat_prior(6)
        probs = spatial_continuity_probs(prior, (0.3, 0.4), self.GRID.cell_centers())
        np.testing.assert_allclose(probs, np.full(12, 1 / 12), atol=1e-12)

    def test_peaked_prior_prefers_aligned_cell(self):
        # put all class-0 mass near the center of cell 5 (row 1, col 1)
        res = 24
        maps = np.zeros((1, res, res))
        cx, cy = self.GRID.cell_center(5)
        maps[0, int(cy * res), int(cx * res)] = 1.0
        from scipy.ndimage import gaussian_filter

        maps[0] = gaussian_filter(maps[0], sigma=2.0)
        prior = SpatialPrior(num_classes=1, resolution=res, bandwidth=0.1, maps=maps)
        probs = spatial_continuity_probs(prior, (cx, cy), self.GRID.cell_centers())
        assert int(np.argmax(probs)) == 5
        assert probs[5] > 2 * np.sort(probs)[-2]

    def test_matches_direct_normalization_oracle(self):
        # raster bin centers coincide with the 2x2 grid cell centers, so
        # lookups are exact map entries and the oracle is plain arithmetic
        grid = GridSpec.for_image(8, 8, 2, 2)
        maps = np.array(
            [
                [[4.0, 1.0], [2.0, 3.0]],  # class 0, rows are y
                [[9.0, 9.0], [9.0, 9.0]],  # class 1 dominates everywhere
            ]
        )
        prior = SpatialPrior(num_classes=2, resolution=2, bandwidth=0.1, maps=maps)
        centers = grid.cell_centers()

        probs = spatial_continuity_probs(prior, (0.25, 0.25), centers)
        expected = np.array([9.0, 9.0, 9.0, 9.0])  # argmax class is 1
        np.testing.assert_allclose(probs, expected / expected.sum(), atol=1e-12)

        probs0 = spatial_continuity_probs(prior, (0.25, 0.25), centers, class_id=0)
        expected0 = np.array([4.0, 1.0, 2.0, 3.0])  # row-major cells: (y0x0, y0x1, y1x0, y1x1)
        np.testing.assert_allclose(probs0, expected0 / expected0.sum(), atol=1e-12)

    def test_zero_mass_class_falls_back_to_uniform(self):
        maps = np.zeros((2, 4, 4))
        maps[1] += 1.0
        prior = SpatialPrior(num_classes=2, resolution=4, bandwidth=0.1, maps=maps)
        probs = spatial_continuity_probs(
            prior, (0.5, 0.5), self.GRID.cell_centers(), class_id=0
        )
        np.testing.assert_allclose(probs, np.full(12, 1 / 12), atol=1e-12)


def two_cell_bank(with_empty_class=False):
    """Grid 2x1; both cells of both samples contain classes 0 and 1."""
    grid = GridSpec.for_image(8, 4, 2, 1)
    samples = []
    for i in range(3):
        label = np.zeros((4, 8), dtype=np.uint8)
        label[2:, :] = 1  # both classes in every cell
        conf = np.full((4, 8), 0.5 + 0.1 * i, dtype=np.float32)
        samples.append(make_sample(f"b{i}", label, conf=conf))
    num_classes = 3 if with_empty_class else 2
    bank = build_bank(samples, grid, num_classes, 1, np.full(num_classes, 0.5))
    return grid, bank


class TestJointSelection:
    def test_exact_product_distribution(self):
        grid, bank = two_cell_bank()
        weights = SelectionWeights(
            p_class=np.array([0.7, 0.3]),
            p_cell=np.array([0.8, 0.2]),
            p_group=np.array([1.0]),
        )
        triples, probs = joint_selection_weights(bank, weights)
        expected = {
            (0, 0, 0): 0.7 * 0.8,
            (0, 1, 0): 0.3 * 0.8,
            (1, 0, 0): 0.7 * 0.2,
            (1, 1, 0): 0.3 * 0.2,
        }
        assert set(triples) == set(expected)
        for triple, p in zip(triples, probs):
            assert p == pytest.approx(expected[triple], abs=1e-12)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_restriction_to_nonempty_renormalizes(self):
        grid, bank = two_cell_bank(with_empty_class=True)  # class 2 has no patches
        weights = SelectionWeights(
            p_class=np.array([0.5, 0.25, 0.25]),
            p_cell=np.array([0.5, 0.5]),
            p_group=np.array([1.0]),
        )
        triples, probs = joint_selection_weights(bank, weights)
        assert all(t[1] != 2 for t in triples)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        # class 0 keeps twice the mass of class 1 after renormalization
        mass0 = probs[[t[1] == 0 for t in triples]].sum()
        mass1 = probs[[t[1] == 1 for t in triples]].sum()
        assert mass0 == pytest.approx(2 * mass1, abs=1e-12)

    def test_scaling_weights_leaves_distribution_unchanged(self):
        grid, bank = two_cell_bank()
        a = SelectionWeights(np.array([0.7, 0.3]), np.array([0.8, 0.2]), np.array([1.0]))
        b = SelectionWeights(
            np.array([7.0, 3.0]), np.array([80.0, 20.0]), np.array([12.5])
        )
        _, pa = joint_selection_weights(bank, a)
        _, pb = joint_selection_weights(bank, b)
        np.testing.assert_allclose(pa, pb, atol=1e-12)

    def test_single_nonempty_sequence_always_selected(self):
        grid = GridSpec.for_image(8, 4, 2, 1)
        label = np.zeros((4, 8), dtype=np.uint8)
        label[:, 4:] = IGNORE  # only cell 0 has content
        sample = make_sample("only", label)
        bank = build_bank([sample], grid, 2, 1, np.zeros(2))
        weights = SelectionWeights(np.array([0.5, 0.5]), np.array([0.1, 0.9]), np.array([1.0]))
        rng = derive_rng(0)
        for _ in range(10):
            patch, sel = select_patch(bank, weights, rng)
            assert (sel.origin_cell, sel.class_id, sel.group) == (0, 0, 0)
            assert patch.sample_id == "only"

    def test_zero_probability_class_never_selected(self):
        grid, bank = two_cell_bank()
        weights = SelectionWeights(np.array([1.0, 0.0]), np.array([0.5, 0.5]), np.array([1.0]))
        triples, probs = joint_selection_weights(bank, weights)
        for triple, p in zip(triples, probs):
            if triple[1] == 1:
                assert p == 0.0
        rng = derive_rng(1)
        for _ in range(200):
            _, sel = select_patch(bank, weights, rng)
            assert sel.class_id == 0

    def test_all_empty_bank_unusable(self):
        grid = GridSpec.for_image(8, 4, 2, 1)
        sample = make_sample("void", np.full((4, 8), IGNORE, dtype=np.uint8))
        bank = build_bank([sample], grid, 2, 1, np.zeros(2))
        weights = SelectionWeights(np.array([0.5, 0.5]), np.array([0.5, 0.5]), np.array([1.0]))
        with pytest.raises(DataError, match="unusable"):
            select_patch(bank, weights, derive_rng(0))
        with pytest.raises(DataError, match="unusable"):
            select_patch_uniform(bank, derive_rng(0))

    def test_zero_joint_mass_rejected(self):
        grid = GridSpec.for_image(8, 4, 2, 1)
        label = np.ones((4, 8), dtype=np.uint8)  # only class 1 present
        bank = build_bank([make_sample("s", label)], grid, 2, 1, np.zeros(2))
        weights = SelectionWeights(np.array([1.0, 0.0]), np.array([0.5, 0.5]), np.array([1.0]))
        with pytest.raises(DataError, match="zero"):
            joint_selection_weights(bank, weights)

    def test_empirical_frequencies_match_product(self):
        grid, bank = two_cell_bank()
        weights = SelectionWeights(
            p_class=np.array([0.7, 0.3]),
            p_cell=np.array([0.8, 0.2]),
            p_group=np.array([1.0]),
        )
        triples, probs = joint_selection_weights(bank, weights)
        lookup = {t: i for i, t in enumerate(triples)}
        rng = derive_rng(2024)
        tally = np.zeros(len(triples))
        draws = 100_000
        for _ in range(draws):
            _, sel = select_patch(bank, weights, rng)
            tally[lookup[(sel.origin_cell, sel.class_id, sel.group)]] += 1
        l1 = float(np.abs(tally / draws - probs).sum())
        assert l1 < 0.01


class TestPaste:
    GRID = GridSpec.for_image(8, 4, 2, 1)

    def _bank(self):
        label = np.ones((4, 8), dtype=np.uint8)
        sample = make_sample("bank0", label)
        return build_bank([sample], self.GRID, 2, 1, np.zeros(2))

    def test_zero_cut_cells_is_identity(self):
        sample = make_sample("a", np.zeros((4, 8), dtype=np.uint8))
        plan = CutPlan(candidates=(0, 1), ratios=(0.0, 0.0), cut_cells=())
        mixed = paste(sample, plan, [], self.GRID)
        np.testing.assert_array_equal(mixed.image, sample.image)
        np.testing.assert_array_equal(mixed.label, sample.label)
        assert mixed.provenance == ()

    def test_single_cell_paste(self):
        bank = self._bank()
        ref = bank.query(1, 1, 0)[0]
        patch = bank.patch(ref)
        base = make_sample("a", np.zeros((4, 8), dtype=np.uint8))
        plan = CutPlan(candidates=(1,), ratios=(1.0,), cut_cells=(1,))
        from domainmix.mix import Selection

        sel = Selection(class_id=1, origin_cell=1, group=0, ref=ref)
        mixed = paste(base, plan, [(patch, sel)], self.GRID)
        rows, cols = self.GRID.cell_rect(1).slices()
        np.testing.assert_array_equal(mixed.image[rows, cols], patch.image)
        np.testing.assert_array_equal(mixed.label[rows, cols], patch.label)
        # complement untouched
        np.testing.assert_array_equal(mixed.image[:, :4], base.image[:, :4])
        assert len(mixed.provenance) == 1
        assert mixed.provenance[0].sample_id == "bank0"

    def test_size_mismatch_rejected(self):
        bank = self._bank()
        ref = bank.query(0, 1, 0)[0]
        patch = bank.patch(ref)
        other_grid = GridSpec.for_image(12, 6, 2, 1)
        base = make_sample("a", np.zeros((6, 12), dtype=np.uint8))
        plan = CutPlan(candidates=(0,), ratios=(1.0,), cut_cells=(0,))
        from domainmix.mix import Selection

        sel = Selection(class_id=1, origin_cell=0, group=0, ref=ref)
        with pytest.raises(DataError, match="fit"):
            paste(base, plan, [(patch, sel)], other_grid)


def toy_domains(seed=0, num_samples=6, ignore_cells=2):
    """Two small domains over a 4x3 grid with IGNORE-heavy cells to cut."""
    grid = GridSpec.for_image(16, 12, 4, 3)
    gen = np.random.default_rng(seed)
    def build(tag):
        samples = []
        for i in range(num_samples):
            cells = gen.integers(0, 3, size=grid.num_cells)
            sample = cellwise_sample(f"{tag}{i}", grid, cells, conf_value=0.8, rng=gen)
            label = np.array(sample.label)
            for cell in gen.choice(grid.num_cells, size=ignore_cells, replace=False):
                rows, cols = grid.cell_rect(int(cell)).slices()
                label[rows, cols] = IGNORE
            samples.append(make_sample(sample.id, label, conf=np.array(sample.confidence),
                                       image=np.array(sample.image)))
        return samples

    src = build("src")
    tgt = build("tgt")
    stats = compute_stats(src, 3)
    prior = build_spatial_prior([s.label for s in src], 3, resolution=16)
    src_bank = build_bank(src, grid, 3, 3, stats.difficulty, domain="source")
    tgt_bank = build_bank(tgt, grid, 3, 3, stats.difficulty, domain="target")
    config = MixConfig(num_classes=3, num_cut_boxes=4, seed=7)
    return grid, src, tgt, src_bank, tgt_bank, stats, prior, config


class TestMixPair:
    def test_no_ignore_pair_is_identity(self):
        grid = GridSpec.for_image(16, 12, 4, 3)
        src = cellwise_sample("s", grid, np.zeros(12, dtype=int))
        tgt = cellwise_sample("t", grid, np.ones(12, dtype=int))
        stats = ClassStats(3, np.array([10, 10, 1]), np.full(3, 0.5))
        prior = flat_prior(3)
        bank_s = build_bank([src], grid, 3, 3, stats.difficulty)
        bank_t = build_bank([tgt], grid, 3, 3, stats.difficulty)
        config = MixConfig(num_classes=3, seed=1)
        mixed_s, mixed_t = mix_pair(
            src, tgt, bank_s, bank_t, stats, prior, config, derive_rng(1)
        )
        np.testing.assert_array_equal(mixed_s.image, src.image)
        np.testing.assert_array_equal(mixed_s.label, src.label)
        np.testing.assert_array_equal(mixed_t.image, tgt.image)
        assert mixed_s.provenance == () and mixed_t.provenance == ()

    def test_seeded_runs_byte_identical(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains()
        outs = []
        for _ in range(2):
            rng = derive_rng(123, "pair", 0)
            outs.append(
                mix_pair(src[0], tgt[0], src_bank, tgt_bank, stats, prior, config, rng)
            )
        (s1, t1), (s2, t2) = outs
        assert s1.image.tobytes() == s2.image.tobytes()
        assert s1.label.tobytes() == s2.label.tobytes()
        assert t1.image.tobytes() == t2.image.tobytes()
        assert t1.label.tobytes() == t2.label.tobytes()
        assert s1.provenance == s2.provenance
        assert s1.cut == s2.cut

    def test_direction_separation(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains()
        found_src = found_tgt = 0
        for i, (s, t) in enumerate(zip(src, tgt)):
            mixed_s, mixed_t = mix_pair(
                s, t, src_bank, tgt_bank, stats, prior, config, derive_rng(5, i)
            )
            for p in mixed_s.provenance:
                assert p.sample_id.startswith("tgt")
                found_src += 1
            for p in mixed_t.provenance:
                assert p.sample_id.startswith("src")
                found_tgt += 1
        assert found_src > 0 and found_tgt > 0  # cuts actually happened

    def test_every_pixel_traceable(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains(seed=3)
        mixed_s, _ = mix_pair(
            src[1], tgt[1], src_bank, tgt_bank, stats, prior, config, derive_rng(9)
        )
        assert tuple(p.cell for p in mixed_s.provenance) == mixed_s.cut.cut_cells
        covered = np.zeros(mixed_s.label.shape, dtype=bool)
        for p in mixed_s.provenance:
            rows, cols = grid.cell_rect(p.cell).slices()
            image, label = tgt_bank.loader(p.sample_id, p.origin_cell)
            np.testing.assert_array_equal(mixed_s.image[rows, cols], image)
            np.testing.assert_array_equal(mixed_s.label[rows, cols], label)
            covered[rows, cols] = True
        np.testing.assert_array_equal(mixed_s.image[~covered], src[1].image[~covered])
        np.testing.assert_array_equal(mixed_s.label[~covered], src[1].label[~covered])

    def test_label_and_image_from_same_patch(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains(seed=4)
        mixed_s, mixed_t = mix_pair(
            src[2], tgt[2], src_bank, tgt_bank, stats, prior, config, derive_rng(11)
        )
        for mixed, bank in ((mixed_s, tgt_bank), (mixed_t, src_bank)):
            for p in mixed.provenance:
                rows, cols = grid.cell_rect(p.cell).slices()
                image, label = bank.loader(p.sample_id, p.origin_cell)
                np.testing.assert_array_equal(mixed.image[rows, cols], image)
                np.testing.assert_array_equal(mixed.label[rows, cols], label)

    def test_uniform_selection_mode(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains(seed=5)
        mixed_s, mixed_t = mix_pair(
            src[0], tgt[0], src_bank, tgt_bank, stats, prior, config, derive_rng(13),
            selection="uniform",
        )
        for p in mixed_s.provenance:
            assert p.class_id is None and p.group is None
            assert p.sample_id.startswith("tgt")

    def test_variant_flag_runs(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains(seed=6)
        mixed_s, _ = mix_pair(
            src[0], tgt[0], src_bank, tgt_bank, stats, prior, config, derive_rng(17),
            sc_from_cut_content=True,
        )
        assert tuple(p.cell for p in mixed_s.provenance) == mixed_s.cut.cut_cells

    def test_mismatched_banks_rejected(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains()
        other = GridSpec.for_image(16, 12, 2, 2)
        label = np.zeros((12, 16), dtype=np.uint8)
        bank_other = build_bank([make_sample("x", label)], other, 3, 3, np.zeros(3))
        with pytest.raises(DataError, match="grid"):
            mix_pair(src[0], tgt[0], src_bank, bank_other, stats, prior, config, derive_rng(0))

    def test_unknown_selection_mode_rejected(self):
        grid, src, tgt, src_bank, tgt_bank, stats, prior, config = toy_domains()
        with pytest.raises(ConfigError):
            mix_pair(src[0], tgt[0], src_bank, tgt_bank, stats, prior, config,
                     derive_rng(0), selection="sideways")
