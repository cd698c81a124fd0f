//! Seeded minimum-cut labeling.
//!
//! The source terminal is cloud. A pixel left on the source side pays its
//! cloud data cost through the cut sink edge and vice versa.

use rayon::prelude::*;

use super::maxflow::FlowGraph;
use super::{EnergyBreakdown, MembershipMap, Seed, SeedMap, SegParams};
use crate::color::ChannelMap;
use crate::dataset_io::BinaryMask;
use crate::error::{Error, Result};

/// Standard deviation of 4-neighbour differences, falling back to their RMS
/// and then to 1.
pub fn estimate_sigma(map: &ChannelMap) -> f64 {
    let (w, h) = map.dimensions();
    let v = map.values();
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for y in 0..h as usize {
        for x in 0..w as usize {
            let i = y * w as usize + x;
            if x + 1 < w as usize {
                let d = v[i + 1] - v[i];
                n += 1;
                sum += d;
                sum_sq += d * d;
            }
            if y + 1 < h as usize {
                let d = v[i + w as usize] - v[i];
                n += 1;
                sum += d;
                sum_sq += d * d;
            }
        }
    }
    if n == 0 {
        return 1.0;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let std = var.sqrt();
    if std > 0.0 && std.is_finite() {
        return std;
    }
    let rms = (sum_sq / n as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        rms
    } else {
        1.0
    }
}

pub fn resolve_sigma(map: &ChannelMap, params: &SegParams) -> f64 {
    params.sigma.unwrap_or_else(|| estimate_sigma(map))
}

fn data_costs(u: f64, eps: f64) -> (f64, f64) {
    let cloud = -u.clamp(eps, 1.0 - eps).ln();
    let sky = -(1.0 - u).clamp(eps, 1.0 - eps).ln();
    (cloud, sky)
}

fn boundary(a: f64, b: f64, sigma: f64) -> f64 {
    let d = a - b;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

fn neighbour_pairs(
    width: u32,
    height: u32,
    params: &SegParams,
) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (w, h) = (i64::from(width), i64::from(height));
    (0..h).flat_map(move |y| {
        (0..w).flat_map(move |x| {
            params.neighborhood.offsets().iter().filter_map(move |&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && nx < w && ny < h)
                    .then(|| ((y * w + x) as usize, (ny * w + nx) as usize))
            })
        })
    })
}

fn check_dims(map: &ChannelMap, membership: &MembershipMap, seeds: Option<&SeedMap>) -> Result<()> {
    let expected = map.dimensions();
    if membership.dimensions() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: membership.dimensions(),
        });
    }
    if let Some(s) = seeds {
        if s.dimensions() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: s.dimensions(),
            });
        }
    }
    Ok(())
}

/// Energy of an arbitrary labeling (true = cloud) under the same cost model.
pub fn labeling_energy(
    map: &ChannelMap,
    membership: &MembershipMap,
    labels: &[bool],
    params: &SegParams,
    sigma: f64,
) -> Result<EnergyBreakdown> {
    check_dims(map, membership, None)?;
    if labels.len() != map.values().len() {
        return Err(Error::InvalidImage(format!(
            "{} labels for {} pixels",
            labels.len(),
            map.values().len()
        )));
    }
    let data_term: f64 = membership
        .values()
        .iter()
        .zip(labels)
        .map(|(&u, &l)| {
            let (c, s) = data_costs(u, params.data_cost_epsilon);
            if l {
                c
            } else {
                s
            }
        })
        .sum();
    let v = map.values();
    let boundary_term: f64 = neighbour_pairs(map.width(), map.height(), params)
        .filter(|&(p, q)| labels[p] != labels[q])
        .map(|(p, q)| boundary(v[p], v[q], sigma))
        .sum();
    Ok(EnergyBreakdown {
        data_term,
        boundary_term,
        mu: params.mu,
        total: data_term + params.mu * boundary_term,
    })
}

/// Minimizes data cost plus `mu` times cut boundary weight, subject to seeds.
pub fn graph_cut(
    map: &ChannelMap,
    membership: &MembershipMap,
    seeds: &SeedMap,
    params: &SegParams,
) -> Result<(BinaryMask, EnergyBreakdown)> {
    params.validate()?;
    check_dims(map, membership, Some(seeds))?;
    let sigma = resolve_sigma(map, params);
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonFiniteCost(format!("sigma = {sigma}")));
    }
    let (w, h) = map.dimensions();
    let n = map.values().len();
    let v = map.values();

    let tlinks: Vec<(f64, f64)> = membership
        .values()
        .par_iter()
        .map(|&u| data_costs(u, params.data_cost_epsilon))
        .collect();
    let nlinks: Vec<(usize, usize, f64)> = if params.mu > 0.0 {
        neighbour_pairs(w, h, params)
            .map(|(p, q)| (p, q, params.mu * boundary(v[p], v[q], sigma)))
            .collect()
    } else {
        Vec::new()
    };

    let finite_total: f64 = tlinks.iter().map(|&(c, s)| c + s).sum::<f64>()
        + nlinks.iter().map(|&(_, _, b)| 2.0 * b).sum::<f64>();
    let hard = 1.0 + finite_total;
    if !hard.is_finite() {
        return Err(Error::NonFiniteCost(format!("capacity total {finite_total}")));
    }

    let mut graph = FlowGraph::with_capacity(n, nlinks.len());
    for (i, (&(cloud, sky), seed)) in tlinks.iter().zip(seeds.states()).enumerate() {
        match seed {
            Seed::Cloud => graph.add_tweights(i, hard, 0.0),
            Seed::Sky => graph.add_tweights(i, 0.0, hard),
            Seed::Unlabeled => graph.add_tweights(i, sky, cloud),
        }
    }
    for &(p, q, b) in &nlinks {
        if b > 0.0 {
            graph.add_edge(p, q, b, b);
        }
    }
    graph.maxflow();

    let labels: Vec<bool> = (0..n).map(|i| graph.is_source_side(i)).collect();
    debug_assert!(seeds.respected_by(&labels));
    let energy = labeling_energy(map, membership, &labels, params, sigma)?;
    Ok((BinaryMask::new(w, h, labels)?, energy))
}
