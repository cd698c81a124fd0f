use hdrcloudseg_core::color::{extract_channel, ChannelId};
use hdrcloudseg_core::radiance::RadianceMap;
use hdrcloudseg_core::tonemap::{tonemap, TonemapMethod, TonemapParams};
use proptest::prelude::*;

fn radiance(max_side: u32) -> impl Strategy<Value = RadianceMap> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::array::uniform3(1e-3f64..1e3), (w * h) as usize)
            .prop_map(move |v| RadianceMap::new(w, h, v).unwrap())
    })
}

fn gray(max_side: u32) -> impl Strategy<Value = RadianceMap> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(1e-3f64..1e3, (w * h) as usize)
            .prop_map(move |v| RadianceMap::new(w, h, v.into_iter().map(|l| [l; 3]).collect()).unwrap())
    })
}

proptest! {
    #[test]
    fn ratio_channels_are_scale_invariant(map in radiance(12), k in 1e-3f64..1e3) {
        let scaled = map.scaled(k).unwrap();
        for ch in [ChannelId::NORMALIZED_BR, ChannelId::RB_RATIO] {
            let a = extract_channel(&map, ch).unwrap();
            let b = extract_channel(&scaled, ch).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalized_ratio_follows_from_ratio(map in radiance(12)) {
        let q = extract_channel(&map, ChannelId::RB_RATIO).unwrap();
        let n = extract_channel(&map, ChannelId::NORMALIZED_BR).unwrap();
        for (q, n) in q.values().iter().zip(n.values()) {
            prop_assert!((n - (1.0 - q) / (1.0 + q)).abs() <= 1e-9);
        }
    }

    #[test]
    fn extraction_commutes_with_pixel_permutation(map in radiance(8), seed in any::<u64>(), ch in 1u8..=16) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let ch = ChannelId::new(ch).unwrap();
        let n = map.values().len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let permuted = RadianceMap::new(
            map.width(),
            map.height(),
            order.iter().map(|&i| map.values()[i]).collect(),
        )
        .unwrap();
        let a = extract_channel(&map, ch).unwrap();
        let b = extract_channel(&permuted, ch).unwrap();
        // L*a*b* on radiance normalizes by the image maximum, which is permutation invariant
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(b.values()[k], a.values()[i]);
        }
    }

    #[test]
    fn tonemapping_is_deterministic_and_valid(map in radiance(20), photographic in any::<bool>()) {
        let params = TonemapParams {
            method: if photographic { TonemapMethod::Photographic } else { TonemapMethod::Clahe },
            ..Default::default()
        };
        let a = tonemap(&map, &params).unwrap();
        prop_assert_eq!(a.dimensions(), map.dimensions());
        prop_assert_eq!(&a, &tonemap(&map, &params).unwrap());
    }

    #[test]
    fn photographic_is_monotone(map in gray(20)) {
        let params = TonemapParams { method: TonemapMethod::Photographic, ..Default::default() };
        let out = tonemap(&map, &params).unwrap();
        let mut pairs: Vec<(f64, u8)> = map.values().iter().zip(out.pixels()).map(|(i, o)| (i[0], o[0])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    /// With a single tile every pixel shares one transfer curve.
    #[test]
    fn clahe_is_monotone_within_a_tile(map in gray(24), clip in 0.001f64..0.5) {
        let params = TonemapParams { clahe_tiles: 1, clahe_clip_limit: clip, ..Default::default() };
        let out = tonemap(&map, &params).unwrap();
        let mut pairs: Vec<(f64, u8)> = map.values().iter().zip(out.pixels()).map(|(i, o)| (i[0], o[0])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    /// Reference: `L = a lum / exp(mean ln(lum + eps))`, output `L / (1 + L)`.
    #[test]
    fn photographic_matches_reference_and_ignores_exposure(map in gray(16)) {
        let params = TonemapParams { method: TonemapMethod::Photographic, ..Default::default() };
        let lum: Vec<f64> = map.values().iter().map(|p| p[0]).collect();
        let log_avg = (lum.iter().map(|l| (l + 1e-6).ln()).sum::<f64>() / lum.len() as f64).exp();
        let out = tonemap(&map, &params).unwrap();
        let doubled = tonemap(&map.scaled(2.0).unwrap(), &params).unwrap();
        for ((l, o), d) in lum.iter().zip(out.pixels()).zip(doubled.pixels()) {
            let s = 0.18 * l / log_avg;
            let expect = 255.0 * s / (1.0 + s);
            prop_assert!((f64::from(o[0]) - expect).abs() <= 0.5 + 1e-6);
            prop_assert!(o[0].abs_diff(d[0]) <= 1);
        }
    }
}
