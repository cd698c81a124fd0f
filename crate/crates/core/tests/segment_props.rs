mod common;

use common::CutProblem;
use hdrcloudseg_core::color::{ChannelId, ChannelMap};
use hdrcloudseg_core::segment::{
    fcm_1d, fcm_cluster, generate_seeds, graph_cut, segment_map, Centroids, MembershipMap, Neighborhood,
    Polarity, Seed, SeedMap, SegParams,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    w: u32,
    h: u32,
    values: Vec<f64>,
    membership: Vec<f64>,
    seeds: Vec<Seed>,
    mu: f64,
    sigma: f64,
    eight: bool,
}

fn seed_strategy() -> impl Strategy<Value = Seed> {
    prop_oneof![
        1 => Just(Seed::Cloud),
        1 => Just(Seed::Sky),
        3 => Just(Seed::Unlabeled),
    ]
}

fn instance(max_side: u32) -> impl Strategy<Value = Instance> {
    (1..=max_side, 1..=max_side, 0.0f64..3.0, 0.02f64..2.0, any::<bool>()).prop_flat_map(
        |(w, h, mu, sigma, eight)| {
            let n = (w * h) as usize;
            (
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(seed_strategy(), n),
            )
                .prop_map(move |(values, membership, seeds)| Instance {
                    w,
                    h,
                    values,
                    membership,
                    seeds,
                    mu,
                    sigma,
                    eight,
                })
        },
    )
}

impl Instance {
    fn params(&self) -> SegParams {
        SegParams {
            mu: self.mu,
            sigma: Some(self.sigma),
            neighborhood: if self.eight { Neighborhood::Eight } else { Neighborhood::Four },
            ..Default::default()
        }
    }

    fn run(&self) -> (Vec<bool>, f64) {
        let map = ChannelMap::new(self.w, self.h, self.values.clone(), ChannelId::NORMALIZED_BR).unwrap();
        let mm = MembershipMap::new(self.w, self.h, self.membership.clone(), Centroids { sky: 1.0, cloud: 0.0 })
            .unwrap();
        let seeds = SeedMap::new(self.w, self.h, self.seeds.clone()).unwrap();
        let (mask, energy) = graph_cut(&map, &mm, &seeds, &self.params()).unwrap();
        (mask.labels().to_vec(), energy.total)
    }

    fn problem(&self) -> CutProblem {
        CutProblem {
            values: self.values.clone(),
            membership: self.membership.clone(),
            seeds: self.seeds.clone(),
            pairs: common::neighbour_pairs(self.w as usize, self.h as usize, self.eight),
            mu: self.mu,
            sigma: self.sigma,
            eps: self.params().data_cost_epsilon,
        }
    }
}

proptest! {
    #[test]
    fn seeds_are_inviolable(inst in instance(12)) {
        let (labels, _) = inst.run();
        prop_assert!(inst.problem().admissible(&labels));
    }

    #[test]
    fn cut_beats_simple_labelings(inst in instance(10)) {
        let (labels, total) = inst.run();
        let p = inst.problem();
        prop_assert!((p.energy(&labels) - total).abs() <= 1e-9 * total.abs().max(1.0));
        let n = labels.len();
        let candidates = [
            vec![true; n],
            vec![false; n],
            inst.membership.iter().map(|&u| u > 0.5).collect::<Vec<_>>(),
        ];
        for c in candidates.iter().filter(|c| p.admissible(c)) {
            prop_assert!(total <= p.energy(c) + 1e-9 * total.abs().max(1.0));
        }
    }

    #[test]
    fn no_smoothing_is_thresholding(mut inst in instance(12)) {
        inst.mu = 0.0;
        // keep clear of the exact tie at one half
        for u in &mut inst.membership {
            if (*u - 0.5).abs() < 1e-9 {
                *u = 0.6;
            }
        }
        let (labels, _) = inst.run();
        for ((&l, &u), s) in labels.iter().zip(&inst.membership).zip(&inst.seeds) {
            let expect = match s {
                Seed::Cloud => true,
                Seed::Sky => false,
                Seed::Unlabeled => u > 0.5,
            };
            prop_assert_eq!(l, expect);
        }
    }

    #[test]
    fn small_grids_match_exhaustive_search(inst in instance(3)) {
        let (_, total) = inst.run();
        let best = inst.problem().exhaustive_min();
        prop_assert!((total - best).abs() <= 1e-9 * best.abs().max(1.0));
    }

    #[test]
    fn fcm_objective_never_rises(values in prop::collection::vec(-10.0f64..10.0, 2..400), m in 1.2f64..4.0) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        let out = fcm_1d(&values, m, 1e-7, 500).unwrap();
        for w in out.objective.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        }
        prop_assert!(out.memberships.iter().all(|u| (0.0..=1.0).contains(u)));
    }

    #[test]
    fn seeds_follow_memberships(membership in prop::collection::vec(0.0f64..=1.0, 1..200), alpha in 0.501f64..0.999) {
        let n = membership.len() as u32;
        let mm = MembershipMap::new(n, 1, membership.clone(), Centroids { sky: 1.0, cloud: 0.0 }).unwrap();
        let seeds = generate_seeds(&mm, alpha).unwrap();
        for (s, &u) in seeds.states().iter().zip(&membership) {
            let expect = if u > alpha { Seed::Cloud } else if u < 1.0 - alpha { Seed::Sky } else { Seed::Unlabeled };
            prop_assert_eq!(*s, expect);
        }
    }
}

fn channel_image() -> impl Strategy<Value = (u32, u32, Vec<f64>)> {
    (4u32..24, 4u32..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop_oneof![0.0f64..0.2, 0.5f64..0.9], (w * h) as usize)
            .prop_map(move |v| (w, h, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Power-of-two scaling is exact in floating point, so masks agree exactly.
    #[test]
    fn scaling_channel_and_sigma_together_keeps_the_mask((w, h, v) in channel_image(), e in -6i32..6, sigma in 0.05f64..1.0) {
        let a = 2f64.powi(e);
        let params = SegParams { sigma: Some(sigma), ..Default::default() };
        let base = ChannelMap::new(w, h, v.clone(), ChannelId::NORMALIZED_BR).unwrap();
        let scaled = ChannelMap::new(w, h, v.iter().map(|x| a * x).collect(), ChannelId::NORMALIZED_BR).unwrap();
        let x = segment_map(&base, Polarity::Lower, &params).unwrap();
        let y = segment_map(&scaled, Polarity::Lower, &SegParams { sigma: Some(a * sigma), ..params }).unwrap();
        prop_assert_eq!(x.mask, y.mask);
    }

    #[test]
    fn affine_relabeling_keeps_the_mask((w, h, v) in channel_image(), a in 0.1f64..10.0, b in -5.0f64..5.0, sigma in 0.05f64..1.0) {
        let params = SegParams { sigma: Some(sigma), ..Default::default() };
        let base = ChannelMap::new(w, h, v.clone(), ChannelId::NORMALIZED_BR).unwrap();
        let moved = ChannelMap::new(w, h, v.iter().map(|x| a * x + b).collect(), ChannelId::NORMALIZED_BR).unwrap();
        let x = segment_map(&base, Polarity::Lower, &params).unwrap();
        let y = segment_map(&moved, Polarity::Lower, &SegParams { sigma: Some(a * sigma), ..params }).unwrap();
        for (p, q) in x.membership.values().iter().zip(y.membership.values()) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
        prop_assert_eq!(x.mask, y.mask);
    }

    #[test]
    fn cloud_cluster_is_the_low_ratio_one((w, h, v) in channel_image()) {
        let map = ChannelMap::new(w, h, v.clone(), ChannelId::NORMALIZED_BR).unwrap();
        prop_assume!(v.iter().any(|&x| x < 0.3) && v.iter().any(|&x| x > 0.4));
        let mm = fcm_cluster(&map, &SegParams::default()).unwrap();
        let c = mm.centroids();
        prop_assert!(c.cloud < c.sky);
        for (&x, &u) in v.iter().zip(mm.values()) {
            if x <= c.cloud {
                prop_assert!(u >= 0.5);
            }
            if x >= c.sky {
                prop_assert!(u <= 0.5);
            }
        }
    }
}
