import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from md_oracle import reconcile_by_least_squares
from texweave.camera import DepthMap
from texweave.denoiser import make_mock_denoiser
from texweave.multidiffusion import (DenoiseProposal, DenoiserFailure,
                                     EmptyProposalsWarning, LatentGrid, Window,
                                     WindowTooLarge, filter_windows, load_latent,
                                     md_step, region_weight, run_md_denoising,
                                     save_latent, tile_windows)


def random_instance(rng, size=32, window=8, stride=4, channels=4,
                    zero_weight_prob=0.15):
    grid = LatentGrid(rng.standard_normal((channels, size, size)).astype(np.float32),
                      timestep=10)
    proposals = []
    for origin in tile_windows(size, window, stride):
        w = 0.0 if rng.uniform() < zero_weight_prob else float(rng.uniform(0, 1))
        proposals.append(DenoiseProposal(
            window=Window(origin, window, w),
            values=rng.standard_normal((channels, window, window)).astype(np.float32),
        ))
    return grid, proposals


class TestTileWindows:
    def test_reference_tiling_is_25_windows(self):
        origins = tile_windows(128, 64, 16)
        axis = sorted({o[0] for o in origins})
        assert axis == [0, 16, 32, 48, 64]
        assert len(origins) == 25

    def test_single_window_when_grid_equals_size(self):
        assert tile_windows(64, 64, 16) == [(0, 0)]

    def test_flush_origin_appended_for_coverage(self):
        origins = tile_windows(100, 64, 16)
        axis = sorted({o[0] for o in origins})
        assert axis == [0, 16, 32, 36]

    def test_window_too_large(self):
        with pytest.raises(WindowTooLarge):
            tile_windows(32, 64, 16)

    @settings(max_examples=60, deadline=None)
    @given(size=st.integers(8, 200), window=st.integers(1, 64),
           stride=st.integers(1, 48))
    def test_windows_cover_every_cell(self, size, window, stride):
        # coverage holds in the sliding-window regime (stride <= window)
        if window > size or stride > window:
            return
        covered = np.zeros((size, size), dtype=bool)
        for r, c in tile_windows(size, window, stride):
            assert 0 <= r <= size - window and 0 <= c <= size - window
            covered[r:r + window, c:c + window] = True
        assert covered.all()


class TestRegionWeight:
    def test_full_inside_object(self):
        assert region_weight(Window((0, 0), 8), np.ones((16, 16), bool)) == 1.0

    def test_fully_background(self):
        assert region_weight(Window((0, 0), 8), np.zeros((16, 16), bool)) == 0.0

    def test_half_coverage(self):
        mask = np.zeros((8, 8), bool)
        mask[:, :4] = True
        assert region_weight(Window((0, 0), 8), mask) == 0.5

    def test_out_of_bounds(self):
        with pytest.raises(WindowTooLarge):
            region_weight(Window((12, 0), 8), np.ones((16, 16), bool))


class TestFilterWindows:
    def _windows(self, size=128, window=64, stride=16):
        return [Window(o, window) for o in tile_windows(size, window, stride)]

    def test_all_true_mask_keeps_everything(self):
        windows = self._windows()
        assert filter_windows(windows, np.ones((128, 128), bool)) == windows

    def test_all_false_mask_removes_everything(self):
        assert filter_windows(self._windows(), np.zeros((128, 128), bool)) == []

    def test_single_corner_cell_retains_one_window(self):
        mask = np.zeros((128, 128), bool)
        mask[0, 0] = True
        kept = filter_windows(self._windows(), mask)
        assert [w.origin for w in kept] == [(0, 0)]

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.uniform(size=(32, 32)) < 0.1
        windows = [Window(o, 8) for o in tile_windows(32, 8, 4)]
        once = filter_windows(windows, mask)
        assert filter_windows(once, mask) == once


class TestMdStep:
    def test_single_full_window_passes_proposal_through(self):
        rng = np.random.default_rng(0)
        grid = LatentGrid(rng.standard_normal((4, 64, 64)).astype(np.float32), 5)
        phi = rng.standard_normal((4, 64, 64)).astype(np.float32)
        out = md_step(grid, [DenoiseProposal(Window((0, 0), 64, 1.0), phi)])
        assert np.array_equal(out.values, phi)

    def test_two_overlapping_windows_hand_value(self):
        # Weighted normal equations by hand: (0.5^2*0 + 1^2*1) / (0.25 + 1) = 0.8
        grid = LatentGrid(np.zeros((1, 8, 8), np.float32), 3)
        p0 = DenoiseProposal(Window((0, 0), 8, 0.5), np.zeros((1, 8, 8), np.float32))
        p1 = DenoiseProposal(Window((0, 0), 8, 1.0), np.ones((1, 8, 8), np.float32))
        out = md_step(grid, [p0, p1])
        assert np.allclose(out.values, 0.8)

    def test_linear_weight_mode(self):
        grid = LatentGrid(np.zeros((1, 8, 8), np.float32), 3)
        p0 = DenoiseProposal(Window((0, 0), 8, 0.5), np.zeros((1, 8, 8), np.float32))
        p1 = DenoiseProposal(Window((0, 0), 8, 1.0), np.ones((1, 8, 8), np.float32))
        out = md_step(grid, [p0, p1], linear_weights=True)
        assert np.allclose(out.values, 1.0 / 1.5, atol=1e-7)

    def test_matches_dense_least_squares_oracle(self):
        rng = np.random.default_rng(1)
        grid, proposals = random_instance(rng)
        out = md_step(grid, proposals)
        oracle = reconcile_by_least_squares(grid.values, proposals)
        assert np.abs(out.values - oracle).max() < 1e-6

    def test_uncovered_and_zero_weight_cells_pass_through(self):
        rng = np.random.default_rng(2)
        grid = LatentGrid(rng.standard_normal((2, 16, 16)).astype(np.float32), 1)
        proposals = [
            DenoiseProposal(Window((0, 0), 4, 0.7),
                            rng.standard_normal((2, 4, 4)).astype(np.float32)),
            DenoiseProposal(Window((8, 8), 4, 0.0),
                            rng.standard_normal((2, 4, 4)).astype(np.float32)),
        ]
        out = md_step(grid, proposals)
        assert np.array_equal(out.values[:, 8:12, 8:12], grid.values[:, 8:12, 8:12])
        assert np.array_equal(out.values[:, 4:, :8], grid.values[:, 4:, :8])

    def test_empty_proposals_warn_and_pass_through(self):
        grid = LatentGrid(np.ones((1, 8, 8), np.float32), 2)
        with pytest.warns(EmptyProposalsWarning):
            out = md_step(grid, [])
        assert np.array_equal(out.values, grid.values)

    def test_output_minimizes_the_reconciliation_loss(self):
        rng = np.random.default_rng(3)
        grid, proposals = random_instance(rng, size=16, window=8, stride=4)
        out = md_step(grid, proposals)

        def md_loss(j):
            total = 0.0
            for p in proposals:
                r, c = p.window.origin
                s = p.window.size
                crop = j[:, r:r + s, c:c + s].astype(np.float64)
                total += float(np.sum((p.window.weight *
                                       (crop - p.values.astype(np.float64))) ** 2))
            return total

        base = md_loss(out.values)
        for _ in range(100):
            delta = rng.standard_normal(out.values.shape).astype(np.float32) * 0.01
            assert md_loss(out.values + delta) >= base - 1e-9

    def test_agreeing_proposals_stitch_regardless_of_weights(self):
        rng = np.random.default_rng(4)
        full = rng.standard_normal((3, 16, 16)).astype(np.float32)
        grid = LatentGrid(np.zeros((3, 16, 16), np.float32), 1)
        proposals = []
        for origin in tile_windows(16, 8, 4):
            r, c = origin
            proposals.append(DenoiseProposal(
                Window(origin, 8, float(rng.uniform(0.1, 1.0))),
                full[:, r:r + 8, c:c + 8].copy()))
        out = md_step(grid, proposals)
        assert np.allclose(out.values, full, atol=1e-6)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        grid, proposals = random_instance(rng, size=24, window=6, stride=3,
                                          zero_weight_prob=0.0)
        shift = 4
        # Shift everything down/right inside a larger grid and compare.
        big = np.zeros((4, 32, 32), np.float32)
        big[:, shift:shift + 24, shift:shift + 24] = grid.values
        moved = [DenoiseProposal(Window((p.window.origin[0] + shift,
                                         p.window.origin[1] + shift),
                                        p.window.size, p.window.weight), p.values)
                 for p in proposals]
        out_small = md_step(grid, proposals)
        out_big = md_step(LatentGrid(big, grid.timestep), moved)
        assert np.array_equal(out_big.values[:, shift:shift + 24, shift:shift + 24],
                              out_small.values)


def full_depth(size):
    return DepthMap(values=np.linspace(0, 1, size * size).reshape(size, size),
                    mask=np.ones((size, size), bool))


class TestRunMdDenoising:
    def test_identity_denoiser_is_fixed_point(self):
        rng = np.random.default_rng(6)
        init = LatentGrid(rng.standard_normal((4, 32, 32)).astype(np.float32), 5)
        out = run_md_denoising(init, make_mock_denoiser("identity"),
                               full_depth(32), "p", np.ones((32, 32), bool),
                               schedule=[4, 3, 2, 1, 0], window_size=8, stride=4)
        assert out.timestep == 0
        assert np.allclose(out.values, init.values, atol=1e-5)

    def test_constant_denoiser_floods_covered_cells(self):
        rng = np.random.default_rng(7)
        init = LatentGrid(rng.standard_normal((4, 32, 32)).astype(np.float32), 1)
        out = run_md_denoising(init, make_mock_denoiser("constant:0.7"),
                               full_depth(32), "p", np.ones((32, 32), bool),
                               schedule=[0], window_size=8, stride=4)
        assert np.allclose(out.values, 0.7, atol=1e-6)

    def test_shrink_denoiser_matches_geometric_decay(self):
        rng = np.random.default_rng(8)
        init = LatentGrid(rng.standard_normal((4, 16, 16)).astype(np.float32), 10)
        out = run_md_denoising(init, make_mock_denoiser("shrink:0.5"),
                               full_depth(16), "p", np.ones((16, 16), bool),
                               schedule=list(range(9, -1, -1)),
                               window_size=16, stride=16)
        assert np.array_equal(out.values, init.values * np.float32(0.5 ** 10))

    def test_update_mask_filtering_freezes_unselected_regions(self):
        rng = np.random.default_rng(9)
        init = LatentGrid(rng.standard_normal((2, 32, 32)).astype(np.float32), 1)
        update = np.zeros((32, 32), bool)
        update[0, 0] = True
        out = run_md_denoising(init, make_mock_denoiser("constant:1.0"),
                               full_depth(32), "p", update,
                               schedule=[0], window_size=8, stride=4)
        # only the window at the origin is retained
        assert np.allclose(out.values[:, :8, :8], 1.0)
        assert np.array_equal(out.values[:, 8:, 8:], init.values[:, 8:, 8:])

    def test_concurrency_is_bit_identical(self):
        rng = np.random.default_rng(10)
        init = LatentGrid(rng.standard_normal((4, 32, 32)).astype(np.float32), 3)
        kwargs = dict(depth=full_depth(32), prompt_handle="p",
                      update_mask=np.ones((32, 32), bool),
                      schedule=[2, 1, 0], window_size=8, stride=4)
        a = run_md_denoising(init, make_mock_denoiser("box_blur:3"),
                             concurrency=1, **kwargs)
        b = run_md_denoising(init, make_mock_denoiser("box_blur:3"),
                             concurrency=8, **kwargs)
        assert a.values.tobytes() == b.values.tobytes()

    def test_schedule_validation(self):
        init = LatentGrid(np.zeros((1, 8, 8), np.float32), 3)
        d = make_mock_denoiser("identity")
        for bad in ([], [2, 2, 0], [0, 1], [3, 1]):
            with pytest.raises(ValueError):
                run_md_denoising(init, d, full_depth(8), "p",
                                 np.ones((8, 8), bool), schedule=bad,
                                 window_size=8, stride=8)

    def test_denoiser_failure_names_window_and_timestep(self):
        init = LatentGrid(np.zeros((1, 16, 16), np.float32), 1)

        def broken(request):
            raise RuntimeError("backend fell over")

        with pytest.raises(DenoiserFailure, match=r"window 0 at \(0, 0\), timestep 0"):
            run_md_denoising(init, broken, full_depth(16), "p",
                             np.ones((16, 16), bool), schedule=[0],
                             window_size=8, stride=8)


def test_latent_blob_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    grid = LatentGrid(rng.standard_normal((4, 16, 16)).astype(np.float32), 7)
    save_latent(grid, tmp_path / "latent")
    back = load_latent(tmp_path / "latent")
    assert back.timestep == 7
    assert back.values.tobytes() == grid.values.tobytes()
