//! HDR sky imaging and cloud segmentation.
//!
//! Exposure stacks are fused into radiance maps, converted to color
//! channels, and segmented by a fuzzy-C-means-seeded graph cut. Baseline
//! segmenters and an evaluation harness are included for comparison.

pub mod baselines;
pub mod color;
pub mod dataset_io;
pub mod error;
pub mod eval;
pub mod pfm;
pub mod radiance;
pub mod segment;
pub mod synth;
pub mod tonemap;

pub use color::{extract_channel, normalize_channel, ChannelId, ChannelMap, RgbSource};
pub use dataset_io::{
    saturation_mask_hdr, saturation_mask_ldr, BinaryMask, Dataset, ExposureStack, LdrImage,
    Sample, SaturationMask,
};
pub use error::{Error, Result};
pub use radiance::{fuse, recover_response, RadianceMap, ResponseCurve, ResponseParams};
pub use segment::{
    fcm_cluster, generate_seeds, graph_cut, hdrcloudseg, ldrcloudseg, EnergyBreakdown,
    MembershipMap, SeedMap, SegParams,
};
pub use tonemap::{tonemap, TonemapMethod, TonemapParams};
