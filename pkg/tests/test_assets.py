import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockfield.assets import (
    EMPTY,
    BlockAssets,
    OccupancyPyramid,
    maxpool_occupancy,
    query_attributes,
    unpack_atlas,
)
from blockfield.bake import pack_atlas
from blockfield.codec import (
    QuantizationSpec,
    color_activation,
    dequantize,
    quantize_channels,
)
from blockfield.geometry import BlockId

from conftest import make_uniform_assets


class TestMaxpool:
    def test_all_empty(self):
        assert not maxpool_occupancy(np.zeros((8, 8, 8), bool)).any()

    def test_single_child_single_parent(self):
        g = np.zeros((8, 8, 8), bool)
        g[3, 4, 5] = True
        pooled = maxpool_occupancy(g)
        assert pooled.sum() == 1
        assert pooled[1, 2, 2]

    def test_odd_resolution_rejected(self):
        with pytest.raises(ValueError):
            maxpool_occupancy(np.zeros((7, 8, 8), bool))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10 ** 9))
    def test_matches_bruteforce_or(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.random((8, 8, 8)) < 0.2
        pooled = maxpool_occupancy(g)
        for i, j, k in np.ndindex(4, 4, 4):
            expect = g[2 * i : 2 * i + 2, 2 * j : 2 * j + 2, 2 * k : 2 * k + 2].any()
            assert pooled[i, j, k] == expect


class TestOccupancyPyramid:
    def test_conservative_every_level(self):
        rng = np.random.default_rng(2)
        level0 = rng.random((16, 16, 16)) < 0.1
        pyr = OccupancyPyramid.build(level0, 3)
        for i in range(len(pyr.levels) - 1):
            child = pyr.levels[i]
            parent = pyr.levels[i + 1]
            occ = np.argwhere(child)
            for c in occ:
                assert parent[tuple(c // 2)]

    def test_shape_chain_validated(self):
        with pytest.raises(ValueError):
            OccupancyPyramid([np.zeros((8, 8, 8), bool), np.zeros((3, 3, 3), bool)])


class TestPackAtlas:
    def test_fully_empty(self):
        grid = np.zeros((16, 16, 16, 8), np.uint8)
        atlas, ind = pack_atlas(grid, np.zeros((16, 16, 16), bool))
        assert atlas.shape[0] == 0
        assert np.all(ind == EMPTY)

    def test_fully_occupied_count(self):
        grid = np.zeros((64, 64, 64, 8), np.uint8)
        atlas, ind = pack_atlas(grid, np.ones((64, 64, 64), bool))
        assert atlas.shape[0] == (64 // 8) ** 3 == 512
        assert not np.any(ind == EMPTY)

    def test_resolution_must_divide(self):
        with pytest.raises(ValueError):
            pack_atlas(np.zeros((12, 12, 12, 8), np.uint8), np.zeros((12, 12, 12), bool))

    def test_occupied_texels_roundtrip_exactly(self):
        rng = np.random.default_rng(5)
        grid = rng.integers(0, 256, size=(16, 16, 16, 8), dtype=np.uint8)
        occ = rng.random((16, 16, 16)) < 0.15
        atlas, ind = pack_atlas(grid, occ)
        dense = unpack_atlas(atlas, ind, 16)
        for v in np.argwhere(occ):
            assert np.array_equal(dense[tuple(v)], grid[tuple(v)])

    def test_indirection_entries_unique(self):
        rng = np.random.default_rng(6)
        occ = rng.random((16, 16, 16)) < 0.4
        _, ind = pack_atlas(np.zeros((16, 16, 16, 8), np.uint8), occ)
        used = ind[ind != EMPTY]
        assert np.unique(used).size == used.size


class TestBlockAssetsValidation:
    def test_occupied_vertex_must_be_covered(self):
        assets = make_uniform_assets(voxel_res=16)
        occ = np.zeros((16, 16, 16), bool)
        occ[0, 0, 0] = True
        with pytest.raises(ValueError):
            BlockAssets(
                block=BlockId(1, 0, 0), voxel_res=16, triplane_res=16,
                atlas=np.zeros((0, 8, 8, 8, 8), np.uint8),
                indirection=np.full((2, 2, 2), EMPTY, np.int32),
                planes=assets.planes,
                occupancy=OccupancyPyramid.build(occ, 2),
                quant=QuantizationSpec(),
                bounds=assets.bounds,
            )

    def test_aliased_indirection_rejected(self):
        assets = make_uniform_assets(voxel_res=16)
        ind = assets.indirection.copy()
        ind[0, 0, 1] = ind[0, 0, 0]
        with pytest.raises(ValueError):
            BlockAssets(
                block=assets.block, voxel_res=16, triplane_res=16,
                atlas=assets.atlas, indirection=ind, planes=assets.planes,
                occupancy=assets.occupancy, quant=assets.quant, bounds=assets.bounds,
            )


class TestQueryAttributes:
    def test_empty_macroblock_returns_zeros(self):
        assets = make_uniform_assets(density_pre=3.0, color_pre=2.0, occupied=False)
        sigma, diffuse, feature = query_attributes((4.0, 4.0, 4.0), assets)
        assert sigma == 0.0
        assert np.all(diffuse == 0.0)
        assert np.all(feature == 0.0)

    def test_uniform_grid_constant(self):
        spec = QuantizationSpec()
        assets = make_uniform_assets(density_pre=1.0, color_pre=0.5)
        sigma, diffuse, feature = query_attributes((3.3, 2.2, 5.1), assets)
        # planes hold quantized zeros; each channel dequantizes in its own range
        dq_v = dequantize(quantize_channels(np.array([[1.0] * 8]), spec)[0, 0], -10, 10)
        assert sigma == pytest.approx(np.exp(dq_v + 3 * dequantize(128, -10, 10)), rel=1e-12)
        code_c = quantize_channels(np.full((1, 8), 0.5), spec)[0, 1]
        expect_c = color_activation(dequantize(code_c, -7, 7) + 3 * dequantize(128, -7, 7))
        assert np.allclose(diffuse, expect_c)

    def test_vertex_collapses_to_stored_value(self):
        # at an exact grid vertex the trilinear weights select one texel
        assets = make_uniform_assets(density_pre=0.7, color_pre=-0.4, voxel_res=16)
        s = assets.sampler()
        lo, hi = assets.bounds
        h = (hi - lo) / 15.0
        p = lo + h * np.array([3, 5, 7])
        pre = s.sample_pre(p[None])[0]
        dense = s.dense[3, 5, 7]
        expect = np.array([dequantize(dense[c], *assets.quant.ranges[c]) for c in range(8)])
        plane_zero = np.array([dequantize(128, *assets.quant.ranges[c]) for c in range(8)])
        assert np.allclose(pre, expect + 3 * plane_zero, atol=1e-7)

    def test_sampler_shared_and_reused(self):
        assets = make_uniform_assets()
        assert assets.sampler() is assets.sampler()


class TestVoxelWidth:
    def test_voxel_width_matches_spacing(self):
        assets = make_uniform_assets(voxel_res=16, bounds_lo=(0, 0, 0), bounds_hi=(30, 30, 30))
        assert assets.voxel_width == pytest.approx(2.0)

    def test_z_top_empty_block(self):
        assets = make_uniform_assets(occupied=False, bounds_lo=(0, 0, 2.0), bounds_hi=(8, 8, 9.0))
        assert assets.z_top() == 2.0

    def test_z_top_full_block(self):
        assets = make_uniform_assets(occupied=True, bounds_lo=(0, 0, 2.0), bounds_hi=(8, 8, 9.0))
        assert assets.z_top() == 9.0
