//! End-to-end segmentation of stacks and single images.

use serde::{Deserialize, Serialize};

use super::{
    fcm_cluster_with_polarity, generate_seeds, graph_cut, resolve_sigma, Centroids,
    EnergyBreakdown, MembershipMap, Polarity, Seed, SegParams,
};
use crate::color::{extract_channel, ChannelId, ChannelMap, RgbSource};
use crate::dataset_io::{saturation_mask_hdr, BinaryMask, ExposureStack, LdrImage};
use crate::error::Result;
use crate::radiance::{fuse, RadianceMap, ResponseCurve};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedCounts {
    pub cloud: usize,
    pub sky: usize,
    pub unlabeled: usize,
}

/// Per-image metadata written next to each mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub channel: ChannelId,
    pub polarity: Polarity,
    pub centroids: Centroids,
    pub fcm_iterations: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub seeds: SeedCounts,
    pub energy: EnergyBreakdown,
    pub cloud_pixels: usize,
    pub total_pixels: usize,
    /// Pixels where a channel formula hit a zero denominator.
    pub guarded_pixels: usize,
    /// HDR-saturated pixels (stack input only); they are segmented normally.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturated_pixels: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub mask: BinaryMask,
    pub membership: MembershipMap,
    pub summary: SegmentationSummary,
}

/// Clusters, seeds and cuts an already extracted channel.
pub fn segment_map(map: &ChannelMap, polarity: Polarity, params: &SegParams) -> Result<Segmentation> {
    params.validate()?;
    let membership = fcm_cluster_with_polarity(map, params, polarity)?;
    let seeds = generate_seeds(&membership, params.alpha)?;
    let (mask, energy) = graph_cut(map, &membership, &seeds, params)?;
    let summary = SegmentationSummary {
        channel: map.channel(),
        polarity,
        centroids: membership.centroids(),
        fcm_iterations: membership.iterations(),
        alpha: params.alpha,
        sigma: resolve_sigma(map, params),
        seeds: SeedCounts {
            cloud: seeds.count(Seed::Cloud),
            sky: seeds.count(Seed::Sky),
            unlabeled: seeds.count(Seed::Unlabeled),
        },
        energy,
        cloud_pixels: mask.cloud_count(),
        total_pixels: mask.len(),
        guarded_pixels: map.guarded_pixels(),
        saturated_pixels: None,
    };
    Ok(Segmentation {
        mask,
        membership,
        summary,
    })
}

/// Mean of `channel` over the pixels the normalized-ratio clustering calls sky.
fn sky_reference(c15: &ChannelMap, channel: &ChannelMap, params: &SegParams) -> Result<f64> {
    let membership = fcm_cluster_with_polarity(c15, params, Polarity::Lower)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (&u, &v) in membership.values().iter().zip(channel.values()) {
        if u < 0.5 {
            sum += v;
            n += 1;
        }
    }
    if n > 0 {
        return Ok(sum / n as f64);
    }
    let (mut ws, mut wv) = (0.0, 0.0);
    for (&u, &v) in membership.values().iter().zip(channel.values()) {
        ws += 1.0 - u;
        wv += (1.0 - u) * v;
    }
    Ok(if ws > 0.0 { wv / ws } else { membership.centroids().sky })
}

/// Runs the pipeline on any channel of an RGB source.
pub fn segment_source<S: RgbSource + ?Sized>(
    source: &S,
    channel: ChannelId,
    params: &SegParams,
) -> Result<Segmentation> {
    let map = extract_channel(source, channel)?;
    let polarity = match Polarity::for_channel(channel) {
        Some(p) => p,
        None => {
            let c15 = extract_channel(source, ChannelId::NORMALIZED_BR)?;
            Polarity::FartherFrom {
                reference: sky_reference(&c15, &map, params)?,
            }
        }
    };
    segment_map(&map, polarity, params)
}

/// Fuses the stack and segments the normalized blue-red ratio of the radiance.
pub fn hdrcloudseg(stack: &ExposureStack, params: &SegParams, response: &ResponseCurve) -> Result<BinaryMask> {
    Ok(hdrcloudseg_detailed(stack, params, response)?.1.mask)
}

pub fn hdrcloudseg_detailed(
    stack: &ExposureStack,
    params: &SegParams,
    response: &ResponseCurve,
) -> Result<(RadianceMap, Segmentation)> {
    params.validate()?;
    let radiance = fuse(stack, response)?;
    let mut seg = segment_source(&radiance, ChannelId::NORMALIZED_BR, params)?;
    seg.summary.saturated_pixels = Some(saturation_mask_hdr(stack).count());
    Ok((radiance, seg))
}

/// The same pipeline on a single 8-bit image.
pub fn ldrcloudseg(image: &LdrImage, params: &SegParams) -> Result<BinaryMask> {
    Ok(ldrcloudseg_detailed(image, params)?.mask)
}

pub fn ldrcloudseg_detailed(image: &LdrImage, params: &SegParams) -> Result<Segmentation> {
    segment_source(image, ChannelId::NORMALIZED_BR, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_image() -> LdrImage {
        LdrImage::from_fn(40, 30, 1.0, 0.0, |x, y| {
            let d2 = (f64::from(x) - 20.0).powi(2) + (f64::from(y) - 15.0).powi(2);
            if d2 < 64.0 {
                [200, 205, 210]
            } else {
                [60, 110, 220 + (x % 3) as u8]
            }
        })
        .unwrap()
    }

    #[test]
    fn disk_on_blue() {
        let img = disk_image();
        let seg = ldrcloudseg_detailed(&img, &SegParams::default()).unwrap();
        let truth = BinaryMask::from_fn(40, 30, |x, y| {
            (f64::from(x) - 20.0).powi(2) + (f64::from(y) - 15.0).powi(2) < 64.0
        });
        assert_eq!(seg.mask, truth);
        assert_eq!(seg.summary.polarity, Polarity::Lower);
        assert!(seg.summary.centroids.cloud < seg.summary.centroids.sky);
    }

    #[test]
    fn reference_polarity_for_red() {
        let img = disk_image();
        let seg = segment_source(&img, ChannelId::R, &SegParams::default()).unwrap();
        assert!(matches!(seg.summary.polarity, Polarity::FartherFrom { .. }));
        assert_eq!(seg.mask, ldrcloudseg(&img, &SegParams::default()).unwrap());
    }
}
