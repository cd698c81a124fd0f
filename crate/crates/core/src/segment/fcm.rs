//! Two-cluster fuzzy C-means on scalar values.

use rayon::prelude::*;

use super::{Centroids, MembershipMap, Polarity, SegParams};
use crate::color::ChannelMap;
use crate::error::{Error, Result};

/// Fixed chunking keeps parallel sums bitwise reproducible.
const CHUNK: usize = 8192;

#[derive(Clone, Debug, PartialEq)]
pub struct FcmOutcome {
    pub centroids: [f64; 2],
    /// Membership in cluster 0; cluster 1 holds the complement.
    pub memberships: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// J_m after each membership update, final update included.
    pub objective: Vec<f64>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[inline]
fn membership0(x: f64, v: [f64; 2], exponent: f64) -> f64 {
    let d0 = (x - v[0]).abs();
    let d1 = (x - v[1]).abs();
    if d0 == 0.0 {
        return 1.0;
    }
    if d1 == 0.0 {
        return 0.0;
    }
    let q = d0 / d1;
    let r = if exponent == 2.0 { q * q } else { q.powf(exponent) };
    1.0 / (1.0 + r)
}

#[inline]
fn weight(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u * u
    } else {
        u.powf(m)
    }
}

/// Per-chunk partial sums: [Σw0, Σw0·x, Σw1, Σw1·x, J].
fn sweep(values: &[f64], v: [f64; 2], m: f64, exponent: f64) -> [f64; 5] {
    let partials: Vec<[f64; 5]> = values
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = [0.0; 5];
            for &x in chunk {
                let u0 = membership0(x, v, exponent);
                let w0 = weight(u0, m);
                let w1 = weight(1.0 - u0, m);
                s[0] += w0;
                s[1] += w0 * x;
                s[2] += w1;
                s[3] += w1 * x;
                s[4] += w0 * (x - v[0]).powi(2) + w1 * (x - v[1]).powi(2);
            }
            s
        })
        .collect();
    partials.iter().fold([0.0; 5], |mut acc, p| {
        for (a, b) in acc.iter_mut().zip(p) {
            *a += b;
        }
        acc
    })
}

/// Clusters `values` into two fuzzy classes with fuzzifier `m`.
///
/// Centroids start at the 25th and 75th percentiles (min and max when those
/// coincide). Iteration stops once no centroid moves by more than
/// `tol * (max - min)`.
pub fn fcm_1d(values: &[f64], m: f64, tol: f64, max_iter: usize) -> Result<FcmOutcome> {
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::param(format!("fuzzifier must exceed 1, got {m}")));
    }
    if let Some(x) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFiniteCost(format!("channel value {x}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = match (sorted.first(), sorted.last()) {
        (Some(&a), Some(&b)) if a < b => (a, b),
        _ => {
            return Err(Error::DegenerateClustering(
                "fewer than two distinct values".into(),
            ))
        }
    };
    let mut v = [percentile(&sorted, 0.25), percentile(&sorted, 0.75)];
    if v[0] >= v[1] {
        v = [min, max];
    }
    let exponent = 2.0 / (m - 1.0);
    let threshold = tol * (max - min);
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let s = sweep(values, v, m, exponent);
        objective.push(s[4]);
        iterations += 1;
        if !(s[0] > 0.0 && s[2] > 0.0) {
            return Err(Error::DegenerateClustering("empty cluster".into()));
        }
        let next = [s[1] / s[0], s[3] / s[2]];
        let shift = (next[0] - v[0]).abs().max((next[1] - v[1]).abs());
        v = next;
        if shift < threshold {
            converged = true;
            break;
        }
    }
    if !(v[0] != v[1] && v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::DegenerateClustering(format!("centroids collapsed to {v:?}")));
    }
    let memberships: Vec<f64> = values
        .par_iter()
        .map(|&x| membership0(x, v, exponent))
        .collect();
    objective.push(sweep(values, v, m, exponent)[4]);
    Ok(FcmOutcome {
        centroids: v,
        memberships,
        iterations,
        converged,
        objective,
    })
}

/// Clusters a channel whose cloud polarity is fixed by the channel table.
pub fn fcm_cluster(map: &ChannelMap, params: &SegParams) -> Result<MembershipMap> {
    let polarity = Polarity::for_channel(map.channel()).ok_or_else(|| {
        Error::param(format!(
            "channel {} needs a sky reference; use fcm_cluster_with_polarity",
            map.channel()
        ))
    })?;
    fcm_cluster_with_polarity(map, params, polarity)
}

pub fn fcm_cluster_with_polarity(
    map: &ChannelMap,
    params: &SegParams,
    polarity: Polarity,
) -> Result<MembershipMap> {
    params.validate()?;
    let out = fcm_1d(map.values(), params.fcm_fuzzifier, params.fcm_tol, params.fcm_max_iter)?;
    if !out.converged {
        log::warn!(
            "fuzzy C-means on {} stopped at the iteration cap ({})",
            map.channel(),
            params.fcm_max_iter
        );
    }
    let cloud = polarity.cloud_index(out.centroids);
    let values = if cloud == 0 {
        out.memberships
    } else {
        out.memberships.into_iter().map(|u| 1.0 - u).collect()
    };
    let centroids = Centroids {
        sky: out.centroids[1 - cloud],
        cloud: out.centroids[cloud],
    };
    let mut membership = MembershipMap::new(map.width(), map.height(), values, centroids)?;
    membership.polarity = Some(polarity);
    membership.iterations = out.iterations;
    membership.objective = out.objective;
    Ok(membership)
}
