//! Fuzzy-C-means-seeded graph-cut segmentation.
//!
//! A channel map is clustered into two fuzzy classes, confident pixels become
//! hard seeds, and a minimum s-t cut over the pixel adjacency graph labels
//! the rest.

mod fcm;
mod graph_cut;
pub mod maxflow;
mod pipeline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fcm::{fcm_1d, fcm_cluster, fcm_cluster_with_polarity, FcmOutcome};
pub use graph_cut::{estimate_sigma, graph_cut, labeling_energy, resolve_sigma};
pub use pipeline::{
    hdrcloudseg, hdrcloudseg_detailed, ldrcloudseg, ldrcloudseg_detailed, segment_map,
    segment_source, SeedCounts, Segmentation, SegmentationSummary,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Neighborhood {
    #[serde(rename = "4-connected", alias = "4")]
    Four,
    #[default]
    #[serde(rename = "8-connected", alias = "8")]
    Eight,
}

impl Neighborhood {
    /// Forward offsets; each unordered pair is visited once.
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Neighborhood::Four => &[(1, 0), (0, 1)],
            Neighborhood::Eight => &[(1, 0), (0, 1), (1, 1), (-1, 1)],
        }
    }
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Neighborhood::Four => "4-connected",
            Neighborhood::Eight => "8-connected",
        })
    }
}

impl FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" | "4-connected" | "four" => Ok(Neighborhood::Four),
            "8" | "8-connected" | "eight" => Ok(Neighborhood::Eight),
            other => Err(Error::param(format!("unknown neighborhood {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegParams {
    pub alpha: f64,
    pub mu: f64,
    /// Boundary contrast scale; `None` estimates it per image.
    pub sigma: Option<f64>,
    pub neighborhood: Neighborhood,
    pub fcm_fuzzifier: f64,
    /// Convergence threshold on the centroid shift, relative to the value range.
    pub fcm_tol: f64,
    pub fcm_max_iter: usize,
    pub data_cost_epsilon: f64,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            alpha: 0.88,
            mu: 1.0,
            sigma: None,
            neighborhood: Neighborhood::Eight,
            fcm_fuzzifier: 2.0,
            fcm_tol: 1e-5,
            fcm_max_iter: 300,
            data_cost_epsilon: 1e-6,
        }
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must lie in (0.5, 1), got {alpha}")))
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::param(format!("mu must be finite and >= 0, got {}", self.mu)));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.fcm_fuzzifier > 1.0 && self.fcm_fuzzifier.is_finite()) {
            return Err(Error::param(format!(
                "fcm_fuzzifier must exceed 1, got {}",
                self.fcm_fuzzifier
            )));
        }
        if !(self.fcm_tol > 0.0 && self.fcm_tol.is_finite()) {
            return Err(Error::param("fcm_tol must be positive"));
        }
        if self.fcm_max_iter == 0 {
            return Err(Error::param("fcm_max_iter must be at least 1"));
        }
        if !(self.data_cost_epsilon > 0.0 && self.data_cost_epsilon < 0.5) {
            return Err(Error::param("data_cost_epsilon must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Which fuzzy cluster is cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cloud", rename_all = "kebab-case")]
pub enum Polarity {
    Lower,
    Higher,
    /// The cluster whose centroid lies farther from a sky reference value.
    FartherFrom { reference: f64 },
}

impl Polarity {
    /// Fixed polarities; `None` for channels resolved against a sky reference.
    pub fn for_channel(channel: crate::color::ChannelId) -> Option<Polarity> {
        match channel.index() {
            13 | 14 => Some(Polarity::Higher),
            5 | 15 => Some(Polarity::Lower),
            _ => None,
        }
    }

    /// Index (0 or 1) of the cloud centroid.
    pub fn cloud_index(self, centroids: [f64; 2]) -> usize {
        let [a, b] = centroids;
        match self {
            Polarity::Lower => usize::from(b < a),
            Polarity::Higher => usize::from(b > a),
            Polarity::FartherFrom { reference } => {
                usize::from((b - reference).abs() > (a - reference).abs())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    pub sky: f64,
    pub cloud: f64,
}

/// Per-pixel cloud membership; sky membership is the complement.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    centroids: Centroids,
    polarity: Option<Polarity>,
    iterations: usize,
    objective: Vec<f64>,
}

impl MembershipMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>, centroids: Centroids) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} memberships for {width}x{height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("membership {v} outside [0, 1]")));
        }
        if !(centroids.sky.is_finite() && centroids.cloud.is_finite()) || centroids.sky == centroids.cloud {
            return Err(Error::DegenerateClustering(format!(
                "centroids must be finite and distinct, got {centroids:?}"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            centroids,
            polarity: None,
            iterations: 0,
            objective: Vec::new(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn centroids(&self) -> Centroids {
        self.centroids
    }

    pub fn polarity(&self) -> Option<Polarity> {
        self.polarity
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Objective after each membership update.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Seed {
    Cloud,
    Sky,
    Unlabeled,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedMap {
    width: u32,
    height: u32,
    states: Vec<Seed>,
}

impl SeedMap {
    pub fn new(width: u32, height: u32, states: Vec<Seed>) -> Result<Self> {
        if states.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "{} seed states for {width}x{height}",
                states.len()
            )));
        }
        Ok(Self {
            width,
            height,
            states,
        })
    }

    pub fn unlabeled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            states: vec![Seed::Unlabeled; width as usize * height as usize],
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn states(&self) -> &[Seed] {
        &self.states
    }

    pub fn count(&self, seed: Seed) -> usize {
        self.states.iter().filter(|&&s| s == seed).count()
    }

    /// Whether `labels` (true = cloud) agrees with every seed.
    pub fn respected_by(&self, labels: &[bool]) -> bool {
        self.states.iter().zip(labels).all(|(s, &l)| match s {
            Seed::Cloud => l,
            Seed::Sky => !l,
            Seed::Unlabeled => true,
        })
    }
}

/// Cloud seed above `alpha`, sky seed below `1 - alpha`.
pub fn generate_seeds(membership: &MembershipMap, alpha: f64) -> Result<SeedMap> {
    check_alpha(alpha)?;
    let states = membership
        .values
        .iter()
        .map(|&u| {
            if u > alpha {
                Seed::Cloud
            } else if u < 1.0 - alpha {
                Seed::Sky
            } else {
                Seed::Unlabeled
            }
        })
        .collect();
    SeedMap::new(membership.width, membership.height, states)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub data_term: f64,
    /// Unweighted sum over cut neighbour pairs.
    pub boundary_term: f64,
    pub mu: f64,
    pub total: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::ChannelId;

    fn membership(values: Vec<f64>) -> MembershipMap {
        let n = values.len() as u32;
        MembershipMap::new(n, 1, values, Centroids { sky: 0.5, cloud: 0.1 }).unwrap()
    }

    #[test]
    fn seed_rule() {
        let m = membership(vec![0.95, 0.05, 0.5, 0.88, 0.12]);
        let s = generate_seeds(&m, 0.88).unwrap();
        assert_eq!(
            s.states(),
            &[Seed::Cloud, Seed::Sky, Seed::Unlabeled, Seed::Unlabeled, Seed::Unlabeled]
        );
        for a in [0.5, 1.0, 0.2] {
            assert!(generate_seeds(&m, a).is_err());
        }
    }

    #[test]
    fn params_validation() {
        assert!(SegParams::default().validate().is_ok());
        let bad = [
            SegParams { alpha: 0.5, ..Default::default() },
            SegParams { mu: -1.0, ..Default::default() },
            SegParams { sigma: Some(0.0), ..Default::default() },
            SegParams { fcm_fuzzifier: 1.0, ..Default::default() },
            SegParams { fcm_max_iter: 0, ..Default::default() },
            SegParams { data_cost_epsilon: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn params_json_partial() {
        let p: SegParams = serde_json::from_str(r#"{"alpha": 0.9, "neighborhood": "4"}"#).unwrap();
        assert_eq!(p.alpha, 0.9);
        assert_eq!(p.neighborhood, Neighborhood::Four);
        assert_eq!(p.mu, 1.0);
    }

    #[test]
    fn polarity_table() {
        let c = |i| ChannelId::new(i).unwrap();
        assert_eq!(Polarity::for_channel(c(15)), Some(Polarity::Lower));
        assert_eq!(Polarity::for_channel(c(5)), Some(Polarity::Lower));
        assert_eq!(Polarity::for_channel(c(13)), Some(Polarity::Higher));
        assert_eq!(Polarity::for_channel(c(14)), Some(Polarity::Higher));
        assert_eq!(Polarity::for_channel(c(1)), None);
        assert_eq!(Polarity::Lower.cloud_index([0.9, 0.1]), 1);
        assert_eq!(Polarity::Higher.cloud_index([0.9, 0.1]), 0);
        assert_eq!(Polarity::FartherFrom { reference: 0.8 }.cloud_index([0.9, 0.1]), 1);
    }

    #[test]
    fn membership_validation() {
        let c = Centroids { sky: 1.0, cloud: 0.0 };
        assert!(MembershipMap::new(2, 1, vec![0.2, 1.1], c).is_err());
        assert!(MembershipMap::new(2, 1, vec![0.2], c).is_err());
        assert!(MembershipMap::new(1, 1, vec![0.2], Centroids { sky: 1.0, cloud: 1.0 }).is_err());
    }
}
