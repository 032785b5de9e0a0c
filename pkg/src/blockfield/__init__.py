"""Block-partitioned baked radiance field engine.

Bake analytic volumetric scenes into per-block quantized voxel and
triplane assets with LOD hierarchies, render them with depth-sorted
per-block volume integration, and stream them to interactive viewers.
"""

from .assets import (
    BlockAssets,
    BlockSampler,
    DeferredShaderWeights,
    OccupancyPyramid,
    SceneManifest,
    maxpool_occupancy,
    query_attributes,
)
from .bake import (
    BakeConfig,
    bake_occupancy,
    bake_scene,
    export_assets,
    generate_lod,
    import_assets,
    load_scene,
    pack_atlas,
    sample_field_to_grids,
)
from .camera import PinholeCamera
from .codec import QuantizationSpec, dequantize, quantize
from .field import FieldSource
from .geometry import BlockId, BlockLayout, OutOfDomainError, assign_block, contract, uncontract
from .render import (
    Framebuffer,
    LoadedScene,
    Ray,
    RaySegmentResult,
    SamplePoint,
    accumulate,
    composite,
    composite_blocks,
    deferred_shade,
    march_block,
    psnr,
    render_frame,
    render_frame_field,
    render_monolithic,
    render_ray,
)
from .synth import CameraPath, Primitive, SceneSpec, build_field, load_scene_file, orbit_path

__version__ = "0.1.0"
