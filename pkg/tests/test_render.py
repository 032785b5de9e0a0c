import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockfield.assets import DeferredShaderWeights
from blockfield.camera import PinholeCamera
from blockfield.geometry import BlockLayout
from blockfield.render import (
    Framebuffer,
    LoadedScene,
    Ray,
    RaySegmentResult,
    accumulate,
    composite,
    composite_blocks,
    deferred_shade,
    eval_shader,
    load_pfm,
    march_block,
    positional_encoding,
    psnr,
    render_frame,
    render_monolithic,
    render_ray,
)

from conftest import make_uniform_assets


def seg(cd, alpha, feature=None, shaded=None, entry_t=0.0):
    return RaySegmentResult(
        block=None, entry_t=entry_t, cdiff=np.asarray(cd, dtype=float),
        feature=np.asarray(feature if feature is not None else np.zeros(4), dtype=float),
        alpha=alpha, shaded=None if shaded is None else np.asarray(shaded, dtype=float),
    )


class TestAccumulate:
    def test_single_opaque_sample(self):
        cd, _, a = accumulate(np.array([1.0]), np.array([[1.0, 0.5, 0.0]]))
        assert np.allclose(cd, [1.0, 0.5, 0.0])
        assert a == 1.0

    def test_two_sample_hand_values(self):
        # w1 = 0.5, w2 = 0.5 * 0.5 = 0.25
        cd, _, a = accumulate(
            np.array([0.5, 0.5]), np.array([[1.0, 0, 0], [0, 1.0, 0]])
        )
        assert np.allclose(cd, [0.5, 0.25, 0.0])
        assert a == pytest.approx(0.75)

    def test_empty(self):
        cd, ft, a = accumulate(np.zeros(4), np.zeros((4, 3)), np.zeros((4, 4)))
        assert np.allclose(cd, 0) and np.allclose(ft, 0) and a == 0

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(0)
        alphas = rng.random((5, 7))
        colors = rng.random((5, 7, 3))
        cd, _, a = accumulate(alphas, colors)
        for i in range(5):
            t = 1.0
            c = np.zeros(3)
            s = 0.0
            for j in range(7):
                w = t * alphas[i, j]
                c += w * colors[i, j]
                s += w
                t *= 1 - alphas[i, j]
            assert np.allclose(cd[i], c)
            assert a[i] == pytest.approx(s)

    def test_opacity_identity(self):
        rng = np.random.default_rng(1)
        alphas = rng.random((1000, 16))
        _, _, a = accumulate(alphas)
        assert np.abs((1 - a) - np.prod(1 - alphas, axis=1)).max() <= 1e-6


class TestComposite:
    def test_single_segment_identity(self):
        c, a = composite_blocks([seg([0.4, 0, 0], 0.5, shaded=[0.4, 0, 0])])
        assert np.allclose(c, [0.4, 0, 0])
        assert a == 0.5

    def test_two_segment_hand_values(self):
        segs = [
            seg([0.4, 0, 0], 0.5, shaded=[0.4, 0, 0]),
            seg([0.3, 0, 0], 0.6, shaded=[0.3, 0, 0]),
        ]
        c, a = composite_blocks(segs)
        assert np.allclose(c, [0.55, 0, 0])
        assert a == pytest.approx(0.8)

    def test_opaque_first_blocks_rest(self):
        first = seg([0.2, 0.3, 0.4], 1.0, shaded=[0.2, 0.3, 0.4])
        for tail_color in ([1, 0, 0], [0, 0, 1]):
            c, a = composite_blocks([first, seg(tail_color, 0.7, shaded=tail_color)])
            assert np.array_equal(c, [0.2, 0.3, 0.4])
            assert a == 1.0

    def test_alpha_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            RaySegmentResult(None, 0.0, np.zeros(3), np.zeros(4), 1.5)
        s = seg([0, 0, 0], 0.5, shaded=[0, 0, 0])
        s.alpha = 1.5  # mutate past validation
        with pytest.raises(ValueError):
            composite_blocks([s])

    def test_diffuse_mode(self):
        segs = [
            seg([0.4, 0, 0], 0.5, feature=[0.1, 0, 0, 0]),
            seg([0.3, 0, 0], 0.6, feature=[0.2, 0, 0, 0]),
        ]
        cd, ft, a = composite_blocks(segs, mode="diffuse")
        assert np.allclose(cd, [0.55, 0, 0])
        assert ft[0] == pytest.approx(0.1 + 0.5 * 0.2)
        assert a == pytest.approx(0.8)

    def test_order_sensitivity(self):
        a = seg([0.5, 0, 0], 0.5, shaded=[0.5, 0, 0])
        b = seg([0, 0.9, 0], 0.9, shaded=[0, 0.9, 0])
        c1, _ = composite_blocks([a, b])
        c2, _ = composite_blocks([b, a])
        assert np.abs(np.asarray(c1) - c2).max() > 0.05

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 123456))
    def test_blocked_equals_monolithic(self, k, root_seed):
        rng = np.random.default_rng(root_seed)
        counts = rng.integers(0, 9, size=k)
        alphas = [rng.random(c) for c in counts]
        colors = [rng.random((c, 3)) for c in counts]
        cds, als = [], []
        for a, c in zip(alphas, colors):
            cd, _, al = accumulate(a, c)
            cds.append(cd if cd is not None else np.zeros(3))
            als.append(al)
        blocked, blocked_a = composite(np.array(als), np.array(cds))
        merged_a = np.concatenate(alphas) if k else np.zeros(0)
        merged_c = np.concatenate(colors) if k else np.zeros((0, 3))
        mono, _, mono_a = accumulate(merged_a, merged_c)
        assert np.allclose(blocked, mono, atol=1e-12)
        assert blocked_a == pytest.approx(mono_a, abs=1e-12)


class TestDeferredShade:
    def test_zero_weights_identity(self):
        w = DeferredShaderWeights.zeros()
        s = seg([0.3, 0.2, 0.1], 0.5)
        c = deferred_shade(s, np.array([0.0, 0.0, 1.0]), w)
        assert np.allclose(c, [0.3, 0.2, 0.1])

    def test_output_bias_only(self):
        w = DeferredShaderWeights.zeros()
        w.b2[:] = [0.2, -0.05, 0.9]
        s = seg([0.3, 0.2, 0.5], 0.5)
        c = deferred_shade(s, np.array([1.0, 0.0, 0.0]), w)
        assert np.allclose(c, np.clip([0.5, 0.15, 1.4], 0, 1))

    def test_matches_reference_forward_pass(self):
        w = DeferredShaderWeights.random(seed=42, scale=0.5)
        cd = np.array([0.25, 0.5, 0.75])
        ft = np.array([0.1, 0.2, 0.3, 0.4])
        d = np.array([0.6, -0.48, 0.64])
        d /= np.linalg.norm(d)
        # independent straightforward implementation
        pe = []
        for b in range(w.freq_bands):
            pe.extend(np.sin((2.0 ** b) * d))
            pe.extend(np.cos((2.0 ** b) * d))
        x = np.concatenate([cd, ft, pe])
        h = np.array([max(0.0, sum(x[i] * w.w0[i, j] for i in range(len(x))) + w.b0[j])
                      for j in range(16)])
        h2 = np.array([max(0.0, sum(h[i] * w.w1[i, j] for i in range(16)) + w.b1[j])
                       for j in range(16)])
        ref = np.array([sum(h2[i] * w.w2[i, j] for i in range(16)) + w.b2[j]
                        for j in range(3)])
        got = eval_shader(w, cd, ft, d[None])[0]
        assert np.allclose(got, ref, atol=1e-6)

    def test_unit_direction_required(self):
        w = DeferredShaderWeights.zeros()
        with pytest.raises(ValueError):
            deferred_shade(seg([0, 0, 0], 0.0), np.array([1.0, 1.0, 0.0]), w)

    def test_nonfinite_weights_rejected(self):
        w = DeferredShaderWeights.zeros()
        bad = w.w0.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            DeferredShaderWeights(bad, w.b0, w.w1, w.b1, w.w2, w.b2)

    def test_positional_encoding_shape_and_values(self):
        d = np.array([[0.5, 0.2, 0.8]])
        pe = positional_encoding(d, 4)
        assert pe.shape == (1, 24)
        assert pe[0, 0] == pytest.approx(np.sin(0.5))
        assert pe[0, 3] == pytest.approx(np.cos(0.5))
        assert pe[0, 6] == pytest.approx(np.sin(1.0))

    def test_weights_json_roundtrip(self):
        w = DeferredShaderWeights.random(seed=7)
        w2 = DeferredShaderWeights.from_json(w.to_json())
        assert np.array_equal(w.w0, w2.w0)
        assert np.array_equal(w.b2, w2.b2)


class TestMonolithic:
    def test_one_opaque_sample(self):
        c, a = render_monolithic(np.array([1.0]), np.array([1.0]),
                                 np.array([[0.2, 0.7, 0.9]]))
        assert np.allclose(c, [0.2, 0.7, 0.9])
        assert a == 1.0

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            render_monolithic(np.array([2.0, 1.0]), np.array([0.5, 0.5]),
                              np.zeros((2, 3)))

    def test_background_blend(self):
        c, a = render_monolithic(np.array([1.0]), np.array([0.25]),
                                 np.array([[1.0, 0.0, 0.0]]), background=(0.4, 0.4, 0.4))
        assert np.allclose(c, [0.25 + 0.75 * 0.4, 0.3, 0.3])

    def test_deferred_shade_at_end(self):
        w = DeferredShaderWeights.zeros()
        w.b2[:] = 0.1
        c, _ = render_monolithic(
            np.array([1.0]), np.array([0.5]), np.array([[0.5, 0.5, 0.5]]),
            features=np.zeros((1, 4)), view_dir=np.array([0, 0, 1.0]), weights=w,
        )
        assert np.allclose(c, [0.35, 0.35, 0.35])


class TestMarchBlock:
    def test_miss_returns_zero_segment(self):
        assets = make_uniform_assets()
        ray = Ray(origin=np.array([-10.0, -10.0, 4.0]),
                  direction=np.array([0.0, 0.0, 1.0]))
        out = march_block(ray, assets)
        assert out.alpha == 0.0
        assert np.all(out.cdiff == 0.0)

    def test_empty_block_zero(self):
        assets = make_uniform_assets(occupied=False)
        ray = Ray(origin=np.array([-1.0, 4.0, 4.0]),
                  direction=np.array([1.0, 0.0, 0.0]))
        out = march_block(ray, assets)
        assert out.alpha == 0.0 and np.all(out.cdiff == 0.0) and np.all(out.feature == 0.0)

    def test_matches_bruteforce_lattice(self):
        # per-sample brute force over the same lattice is the oracle
        assets = make_uniform_assets(density_pre=0.5, color_pre=0.3)
        sampler = assets.sampler()
        origin = np.array([-3.0, 2.2, 3.7])
        direction = np.array([1.0, 0.35, 0.1])
        direction = direction / np.linalg.norm(direction)
        ray = Ray(origin=origin, direction=direction)
        out = march_block(ray, assets, eps_t=0.0)

        from blockfield.codec import apply_activations
        from blockfield.render import ray_aabb

        t0, t1 = ray_aabb(origin[None], direction[None], sampler.lo, sampler.hi,
                          1e-6, np.inf)
        delta = assets.voxel_width
        n = int(np.floor((t1[0] - t0[0]) / delta + 0.5))
        trans, cd, acc = 1.0, np.zeros(3), 0.0
        for i in range(n):
            t = t0[0] + (i + 0.5) * delta
            p = origin + t * direction
            g = np.clip(sampler.grid_coords(p[None], sampler.res3), 0, sampler.res3 - 1)
            cell = np.clip(np.floor(g).astype(int), 0, sampler.res3 - 2)
            if not sampler.cell_occ[cell[0, 0], cell[0, 1], cell[0, 2]]:
                continue
            pre = sampler.pre_from_grid(g, cell)
            sigma, color, _ = apply_activations(pre)
            alpha = 1.0 - np.exp(-sigma[0] * delta)
            cd += trans * alpha * color[0]
            acc += trans * alpha
            trans *= 1.0 - alpha
        assert out.alpha == pytest.approx(acc, abs=1e-12)
        assert np.allclose(out.cdiff, cd, atol=1e-12)

    def test_early_termination_bounded(self):
        assets = make_uniform_assets(density_pre=2.0, color_pre=1.0)
        ray = Ray(origin=np.array([-1.0, 4.0, 4.0]), direction=np.array([1.0, 0, 0.0]))
        full = march_block(ray, assets, eps_t=0.0)
        cut = march_block(ray, assets, eps_t=1e-4)
        assert abs(full.alpha - cut.alpha) <= 1e-4
        assert np.abs(full.cdiff - cut.cdiff).max() <= 1e-4

    def test_skip_equals_exhaustive_on_uniform(self):
        assets = make_uniform_assets(density_pre=0.0, color_pre=0.5)
        ray = Ray(origin=np.array([-1.0, 3.3, 5.1]), direction=np.array([1.0, 0, 0]))
        a = march_block(ray, assets, use_occupancy=True)
        b = march_block(ray, assets, use_occupancy=False)
        assert a.alpha == pytest.approx(b.alpha, abs=1e-12)
        assert np.allclose(a.cdiff, b.cdiff, atol=1e-12)

    def test_energy_bound(self):
        assets = make_uniform_assets(density_pre=1.5, color_pre=2.0)
        ray = Ray(origin=np.array([-1.0, 4.0, 4.0]), direction=np.array([1.0, 0, 0]))
        out = march_block(ray, assets, eps_t=0.0)
        assert 0.0 <= out.alpha <= 1.0
        assert np.all(out.cdiff <= out.alpha + 1e-6)
        assert np.all(out.feature <= out.alpha + 1e-6)


class TestSamplePoint:
    def test_alpha_from_density_and_step(self):
        from blockfield.render import SamplePoint

        s = SamplePoint(t=1.0, delta=0.25, sigma=4.0,
                        color=np.array([1.0, 0, 0]), feature=np.zeros(4))
        assert s.alpha == pytest.approx(1.0 - np.exp(-1.0))
        zero = SamplePoint(t=0.5, delta=0.25, sigma=0.0,
                           color=np.zeros(3), feature=np.zeros(4))
        assert zero.alpha == 0.0


class TestRayValidation:
    def test_non_unit_direction(self):
        with pytest.raises(ValueError):
            Ray(origin=np.zeros(3), direction=np.array([1.0, 1.0, 0.0]))

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            Ray(origin=np.zeros(3), direction=np.array([1.0, 0, 0]), t_near=5, t_far=1)


class TestRenderRay:
    def _scene(self, **kwargs):
        assets = make_uniform_assets(**kwargs)
        layout = BlockLayout(origin=(0.0, 0.0), block_size=8.0, grid_dims=(1, 1),
                             z_range=(0.0, 8.0))
        return LoadedScene(layout=layout, blocks={assets.block: assets},
                           background=(0.5, 0.5, 0.5))

    def test_miss_returns_background(self):
        scene = self._scene()
        ray = Ray(origin=np.array([20.0, 20.0, 20.0]), direction=np.array([0.0, 0, 1.0]))
        c, a = render_ray(ray, scene)
        assert np.allclose(c, 0.5)
        assert a == 0.0

    def test_vertical_ray_orders_by_entry(self):
        scene = self._scene(density_pre=1.0)
        ray = Ray(origin=np.array([4.0, 4.0, -2.0]), direction=np.array([0.0, 0, 1.0]))
        c, a = render_ray(ray, scene)
        assert a > 0.9

    def test_occluder_hides_far_block(self, quad_loaded):
        scene, _ = quad_loaded
        # ray through the sphere center: the near block is an opaque wall,
        # so the far block's assets must not change the output
        eye = np.array([-6.0, 7.0, 4.0])
        d = np.array([1.0, 0.0, 0.0])
        ray = Ray(origin=eye, direction=d)
        near_only = LoadedScene(
            layout=scene.layout,
            blocks={b: a for b, a in scene.blocks.items() if b.ix == 0},
            weights=scene.weights, group_of=scene.group_of,
            background=scene.background,
        )
        c_near, a_near = render_ray(ray, near_only)
        assert a_near > 0.999, "fixture ray should hit an opaque wall"
        c_all, _ = render_ray(ray, scene)
        assert np.allclose(c_all, c_near, atol=1e-3)

    def test_shading_modes_agree_with_zero_weights(self, quad_loaded):
        scene, _ = quad_loaded
        rng = np.random.default_rng(8)
        for _ in range(20):
            eye = rng.uniform([-5, -5, 1], [25, 25, 14])
            to = rng.uniform([2, 2, 0], [18, 18, 8])
            d = to - eye
            n = np.linalg.norm(d)
            if n < 1e-6:
                continue
            ray = Ray(origin=eye, direction=d / n)
            c1, a1 = render_ray(ray, scene, mode="per-block")
            c2, a2 = render_ray(ray, scene, mode="post-composite")
            assert np.allclose(c1, c2, atol=1e-12)
            assert a1 == pytest.approx(a2, abs=1e-12)


def collect_block_samples(ray, assets, eps=0.0):
    """All lattice samples of one block as (t, alpha, color) lists."""
    from blockfield.codec import apply_activations
    from blockfield.render import ray_aabb

    sampler = assets.sampler()
    t0, t1 = ray_aabb(ray.origin[None], ray.direction[None], sampler.lo,
                      sampler.hi, ray.t_near, ray.t_far)
    delta = assets.voxel_width
    n = int(max(np.floor((t1[0] - t0[0]) / delta + 0.5), 0)) if t1[0] > t0[0] else 0
    ts, alphas, colors = [], [], []
    for i in range(n):
        t = t0[0] + (i + 0.5) * delta
        p = ray.origin + t * ray.direction
        g = np.clip(sampler.grid_coords(p[None], sampler.res3), 0, sampler.res3 - 1)
        cell = np.clip(np.floor(g).astype(int), 0, sampler.res3 - 2)
        if not sampler.cell_occ[cell[0, 0], cell[0, 1], cell[0, 2]]:
            continue
        pre = sampler.pre_from_grid(g, cell)
        sigma, color, _ = apply_activations(pre)
        ts.append(t)
        alphas.append(1.0 - np.exp(-sigma[0] * delta))
        colors.append(color[0])
    return ts, alphas, colors


class TestAssetsLevelEquivalence:
    def test_blockwise_render_equals_monolithic_on_same_samples(self, quad_loaded):
        # the diffuse-only block pipeline must equal one monolithic pass
        # over the identical merged sample list, on real baked assets
        scene, _ = quad_loaded
        rng = np.random.default_rng(12)
        checked = 0
        for _ in range(40):
            eye = rng.uniform([-8, -8, 0.5], [28, 28, 13])
            to = rng.uniform([3, 3, 0.5], [17, 17, 7])
            d = to - eye
            n = np.linalg.norm(d)
            if n < 1e-6:
                continue
            ray = Ray(origin=eye, direction=d / n)

            segments = []
            merged = []
            for bid in scene.blocks:
                seg = march_block(ray, scene.blocks[bid], eps_t=0.0)
                if np.isfinite(seg.entry_t):
                    segments.append(seg)
                ts, alphas, colors = collect_block_samples(ray, scene.blocks[bid])
                merged.extend(zip(ts, alphas, colors))
            if not merged:
                continue
            segments.sort(key=lambda s: s.entry_t)
            cd_b, _, a_b = composite_blocks(segments, mode="diffuse")

            merged.sort(key=lambda x: x[0])
            t = np.array([x[0] for x in merged])
            al = np.array([x[1] for x in merged])
            cl = np.array([x[2] for x in merged])
            cd_m, a_m = render_monolithic(t, al, cl)
            assert np.abs(cd_b - cd_m).max() <= 1e-5
            assert abs(a_b - a_m) <= 1e-5
            checked += 1
        assert checked >= 30


class TestPsnr:
    def test_identical_capped(self):
        img = np.random.default_rng(0).random((8, 8, 3))
        assert psnr(img, img) == 99.0

    def test_black_vs_white(self):
        a = np.zeros((4, 4, 3))
        b = np.ones((4, 4, 3))
        assert psnr(a, b) == pytest.approx(0.0)

    def test_uniform_difference(self):
        a = np.zeros((4, 4, 3))
        b = np.full((4, 4, 3), 0.1)
        assert psnr(a, b) == pytest.approx(20.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


class TestFramebufferIO:
    def test_pfm_roundtrip(self, tmp_path):
        rgb = np.random.default_rng(3).random((6, 9, 3)).astype(np.float32)
        fb = Framebuffer(rgb.astype(np.float64), np.zeros((6, 9)))
        p = tmp_path / "x.pfm"
        fb.save_pfm(p)
        back = load_pfm(p)
        assert back.shape == (6, 9, 3)
        assert np.allclose(back, rgb, atol=1e-7)

    def test_png_write(self, tmp_path):
        fb = Framebuffer(np.full((4, 4, 3), 0.25), np.ones((4, 4)))
        p = tmp_path / "x.png"
        fb.save_png(p)
        from blockfield.render import load_png

        img = load_png(p)
        assert np.abs(img - 0.25).max() <= 1 / 255


class TestRenderFrame:
    def test_single_background_pixel(self):
        layout = BlockLayout(origin=(0.0, 0.0), block_size=8.0, grid_dims=(1, 1),
                             z_range=(0.0, 8.0))
        scene = LoadedScene(layout=layout, blocks={}, background=(0.1, 0.2, 0.3))
        cam = PinholeCamera.look_at((50.0, 50.0, 50.0), (60.0, 60.0, 60.0), 1, 1)
        fb = render_frame(cam, scene)
        assert fb.rgb.shape == (1, 1, 3)
        assert np.allclose(fb.rgb[0, 0], [0.1, 0.2, 0.3])

    def test_deterministic(self, quad_loaded):
        scene, _ = quad_loaded
        cam = PinholeCamera.look_at((22.0, 10.0, 9.0), (10.0, 10.0, 3.0), 48, 48)
        a = render_frame(cam, scene)
        b = render_frame(cam, scene)
        assert np.array_equal(a.rgb, b.rgb)
        assert np.array_equal(a.alpha, b.alpha)

    def test_tiled_matches_single_worker(self, quad_loaded):
        scene, _ = quad_loaded
        cam = PinholeCamera.look_at((22.0, 10.0, 9.0), (10.0, 10.0, 3.0), 40, 40)
        a = render_frame(cam, scene, workers=1)
        b = render_frame(cam, scene, workers=3)
        assert np.array_equal(a.rgb, b.rgb)

    def test_zero_area_rejected(self):
        with pytest.raises(ValueError):
            PinholeCamera.look_at((0, 0, 0), (1, 1, 1), 0, 10)
