//! Bipartite entanglement of the encoded states.
//!
//! Entropies are in bits. A space-like cut at `cut_row = c` puts spin rows `0..=c` and the
//! colors of vertex rows `1..=c` in the bottom part, so the bottom part records the first
//! `c` slices and the surface at the cut is the profile after `c` slices. A time-like cut at
//! `cut_col = k` puts edge columns `a < k` and vertex columns `i < k` on the left.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::SparseState;
use crate::lattice::{colored_area, decode_config, key_to_config, Geometry, LatticeConfig};
use crate::model::{
    peak_at_bottom, updatable_sites, BoundaryMode, Color, HeightProfile, ModelParams, Parity, SiteShape, Surface,
    VertexClass,
};
use crate::numeric::{shannon_bits, CompensatedSum};

/// Default ceiling on profiles stored by the dynamic program.
pub const PROFILE_LIMIT: usize = 10_000_000;

/// Schmidt weights below this are dropped.
pub const SCHMIDT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bipartition {
    SpaceLike { cut_row: usize },
    TimeLike { cut_col: usize },
}

impl Bipartition {
    fn validate(&self, size: usize) -> Result<()> {
        let (name, value) = match *self {
            Bipartition::SpaceLike { cut_row } => ("cut row", cut_row),
            Bipartition::TimeLike { cut_col } => ("cut column", cut_col),
        };
        if value == 0 || value > size {
            return Err(Error::InvalidParameter(format!("{name} {value} outside 1..={size}")));
        }
        Ok(())
    }

    /// Register values of the two halves of a configuration.
    fn split(&self, config: &LatticeConfig, geometry: &Geometry, colored: bool) -> (Vec<u8>, Vec<u8>) {
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (e, &up) in config.spins.iter().enumerate() {
            let (a, b) = geometry.edge_coords(e);
            let left = match *self {
                Bipartition::SpaceLike { cut_row } => b <= cut_row,
                Bipartition::TimeLike { cut_col } => a < cut_col,
            };
            if left { &mut first } else { &mut second }.push(up as u8);
        }
        for (v, color) in config.colors.iter().enumerate() {
            let (i, t) = geometry.vertex_coords(v);
            let left = match *self {
                Bipartition::SpaceLike { cut_row } => t <= cut_row,
                Bipartition::TimeLike { cut_col } => i < cut_col,
            };
            // An uncolored state carries the single color r on every height change.
            let value = if colored {
                color.code()
            } else if vertex_changes(config, geometry, i, t) {
                Color::Red.code()
            } else {
                Color::Blank.code()
            };
            if left { &mut first } else { &mut second }.push(value);
        }
        (first, second)
    }
}

fn vertex_changes(config: &LatticeConfig, geometry: &Geometry, i: usize, t: usize) -> bool {
    let spins = geometry.vertex_edges(i, t).map(|e| config.spins[e]);
    spins.iter().all(|&s| s == spins[0])
}

/// Surface and pair colors at a space-like cut.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorLabel {
    pub profile: HeightProfile,
    pub stacks: Vec<Vec<Color>>,
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.profile)?;
        for (i, stack) in self.stacks.iter().enumerate() {
            if !stack.is_empty() && stack.iter().any(|&c| c != Color::Blank) {
                write!(f, " {i}:")?;
                for c in stack {
                    write!(f, "{c}")?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSector {
    /// Present for space-like cuts whose block shares a single surface label.
    pub label: Option<SectorLabel>,
    pub weights: Vec<f64>,
}

fn surface_at(config: &LatticeConfig, params: &ModelParams, cut_row: usize) -> Result<SectorLabel> {
    let traj = decode_config(config, params)?;
    let mut surface = Surface::horizon(params.size)?;
    for slice in traj.events.iter().take(cut_row) {
        for e in slice {
            surface.apply(e.site, e.event);
        }
    }
    Ok(SectorLabel {
        profile: surface.profile,
        stacks: surface.stacks,
    })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Schmidt weights grouped into independent blocks of the reduced density matrix.
pub fn schmidt_spectrum(state: &SparseState, bipartition: Bipartition) -> Result<Vec<SchmidtSector>> {
    let params = &state.params;
    bipartition.validate(params.size)?;
    let norm_sq = state.norm_sq();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm_sq));
    }
    let geometry = Geometry::new(params.size)?;
    let mut left_index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut right_index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(state.len());
    let mut representative = Vec::new();
    for (key, &amp) in &state.amplitudes {
        let config = key_to_config(key, params)?;
        let (left, right) = bipartition.split(&config, &geometry, params.colored);
        let next_left = left_index.len();
        let li = *left_index.entry(left).or_insert(next_left);
        if li == representative.len() {
            representative.push(config);
        }
        let next_right = right_index.len();
        let ri = *right_index.entry(right).or_insert(next_right);
        entries.push((li, ri, amp));
    }
    let n_left = left_index.len();
    let mut parent: Vec<usize> = (0..n_left + right_index.len()).collect();
    for &(li, ri, _) in &entries {
        let (a, b) = (find(&mut parent, li), find(&mut parent, n_left + ri));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut blocks: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for &(li, ri, amp) in &entries {
        let root = find(&mut parent, li);
        blocks.entry(root).or_default().push((li, ri, amp));
    }

    let blocks: Vec<Vec<(usize, usize, f64)>> = blocks.into_values().collect();
    let sectors: Vec<Result<SchmidtSector>> = blocks
        .par_iter()
        .map(|block| {
            let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
            let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
            for &(li, ri, _) in block {
                let r = rows.len();
                rows.entry(li).or_insert(r);
                let c = cols.len();
                cols.entry(ri).or_insert(c);
            }
            let mut m = DMatrix::<f64>::zeros(rows.len(), cols.len());
            for &(li, ri, amp) in block {
                m[(rows[&li], cols[&ri])] = amp;
            }
            let gram = if m.nrows() <= m.ncols() {
                &m * m.transpose()
            } else {
                m.transpose() * &m
            };
            let mut weights: Vec<f64> = SymmetricEigen::new(gram)
                .eigenvalues
                .iter()
                .copied()
                .filter(|&w| w >= SCHMIDT_FLOOR)
                .collect();
            weights.sort_by(|a, b| b.total_cmp(a));
            let label = match bipartition {
                Bipartition::SpaceLike { cut_row } => {
                    let labels: Result<Vec<SectorLabel>> = rows
                        .keys()
                        .map(|&li| surface_at(&representative[li], params, cut_row))
                        .collect();
                    let labels = labels?;
                    if labels.windows(2).all(|w| w[0] == w[1]) {
                        labels.into_iter().next()
                    } else {
                        None
                    }
                }
                Bipartition::TimeLike { .. } => None,
            };
            Ok(SchmidtSector { label, weights })
        })
        .collect();
    let mut sectors = sectors.into_iter().collect::<Result<Vec<_>>>()?;
    sectors.retain(|s| !s.weights.is_empty());
    Ok(sectors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyMethod {
    Svd,
    Formula,
    Dp,
}

impl fmt::Display for EntropyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntropyMethod::Svd => "svd",
            EntropyMethod::Formula => "formula",
            EntropyMethod::Dp => "dp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub s_total: f64,
    pub s_uncolored: f64,
    pub color_term: f64,
    pub method: EntropyMethod,
}

/// Von Neumann entropy from the Schmidt spectrum. For space-like cuts the uncolored part is
/// the entropy of the surface marginal and the color term is the remainder.
pub fn entropy_exact(state: &SparseState, bipartition: Bipartition) -> Result<EntropyReport> {
    let sectors = schmidt_spectrum(state, bipartition)?;
    let s_total = shannon_bits(sectors.iter().flat_map(|s| s.weights.iter().copied()));
    let labeled = sectors.iter().all(|s| s.label.is_some()) && matches!(bipartition, Bipartition::SpaceLike { .. });
    let s_uncolored = if labeled {
        let mut marginal: BTreeMap<&HeightProfile, CompensatedSum> = BTreeMap::new();
        for s in &sectors {
            let profile = &s.label.as_ref().expect("labeled").profile;
            let acc = marginal.entry(profile).or_default();
            for &w in &s.weights {
                acc.add(w);
            }
        }
        shannon_bits(marginal.values().map(CompensatedSum::value))
    } else {
        s_total
    };
    Ok(EntropyReport {
        s_total,
        s_uncolored,
        color_term: s_total - s_uncolored,
        method: EntropyMethod::Svd,
    })
}

/// Probability of each surface at a space-like cut of the bridge ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDistribution {
    pub table: BTreeMap<HeightProfile, f64>,
    pub cut_row: usize,
    pub mean_area: f64,
    pub mean_color_units: f64,
}

impl SurfaceDistribution {
    pub fn from_weights(table: BTreeMap<HeightProfile, f64>, cut_row: usize) -> Result<Self> {
        let total = table.values().copied().collect::<CompensatedSum>().value();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::NotNormalized(total));
        }
        let table: BTreeMap<HeightProfile, f64> = table
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(h, w)| (h, w / total))
            .collect();
        let mean_area = table
            .iter()
            .map(|(h, w)| w * colored_area(h).0 as f64)
            .collect::<CompensatedSum>()
            .value();
        Ok(SurfaceDistribution {
            table,
            cut_row,
            mean_area,
            mean_color_units: mean_area / 2.0,
        })
    }

    pub fn total(&self) -> f64 {
        self.table.values().copied().collect::<CompensatedSum>().value()
    }
}

/// Weighted successors of a profile over one slice, using uncolored vertex probabilities.
/// Colored weights summed over colors coincide with these.
fn successors(profile: &HeightProfile, t: usize, params: &ModelParams) -> Vec<(HeightProfile, f64)> {
    let p = params.p;
    let mut out = vec![(profile.heights().to_vec(), 1.0)];
    for i in updatable_sites(params.size, Parity::for_slice(t)) {
        let h = profile.heights();
        let shape = SiteShape::classify(h[i - 1], h[i], h[i + 1]);
        let options: Vec<(i32, f64)> = match shape {
            SiteShape::Valley => vec![
                (0, VertexClass::ValleyNoChange.probability(p)),
                (2, VertexClass::Deposit.probability(p)),
            ],
            SiteShape::Peak if peak_at_bottom(shape, h[i], params.boundary) => vec![(0, 1.0)],
            SiteShape::Peak => vec![
                (0, VertexClass::PeakNoChange.probability(p)),
                (-2, VertexClass::Evaporate.probability(p)),
            ],
            SiteShape::SlopeUp | SiteShape::SlopeDown => vec![(0, 1.0)],
        };
        let mut next = Vec::with_capacity(out.len() * options.len());
        for (heights, w) in &out {
            for &(delta, prob) in &options {
                if prob <= 0.0 {
                    continue;
                }
                let hi = heights[i] + delta;
                if params.boundary == BoundaryMode::Absorbing && hi < 0 {
                    continue;
                }
                let mut child = heights.clone();
                child[i] = hi;
                next.push((child, w * prob));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(h, w)| (HeightProfile::from_heights_unchecked(h), w))
        .collect()
}

fn forward_layer(layer: &BTreeMap<HeightProfile, f64>, t: usize, params: &ModelParams) -> BTreeMap<HeightProfile, f64> {
    let expanded: Vec<Vec<(HeightProfile, f64)>> = layer
        .par_iter()
        .map(|(profile, &w)| {
            successors(profile, t, params)
                .into_iter()
                .map(|(next, prob)| (next, w * prob))
                .collect()
        })
        .collect();
    let mut out: BTreeMap<HeightProfile, f64> = BTreeMap::new();
    for list in expanded {
        for (profile, w) in list {
            *out.entry(profile).or_insert(0.0) += w;
        }
    }
    out
}

/// Surface distribution at a space-like cut by a forward-backward pass over profiles.
pub fn midcut_distribution(params: &ModelParams, cut_row: usize) -> Result<SurfaceDistribution> {
    midcut_distribution_with_limit(params, cut_row, PROFILE_LIMIT)
}

pub fn midcut_distribution_with_limit(
    params: &ModelParams,
    cut_row: usize,
    limit: usize,
) -> Result<SurfaceDistribution> {
    params.validate()?;
    let size = params.size;
    if cut_row == 0 || cut_row > size {
        return Err(Error::InvalidParameter(format!("cut row {cut_row} outside 1..={size}")));
    }
    let mut layers = vec![BTreeMap::from([(HeightProfile::horizon(size)?, 1.0)])];
    let mut stored = 1;
    for t in 1..=size {
        let next = forward_layer(&layers[t - 1], t, params);
        stored += next.len();
        if stored > limit {
            return Err(Error::Capacity {
                what: "profiles",
                count: stored,
                limit,
            });
        }
        layers.push(next);
    }
    let horizon = HeightProfile::horizon(size)?;
    let mut backward: BTreeMap<HeightProfile, f64> = BTreeMap::from([(horizon, 1.0)]);
    for t in (cut_row + 1..=size).rev() {
        let sources: Vec<&HeightProfile> = layers[t - 1].keys().collect();
        let values: Vec<f64> = sources
            .par_iter()
            .map(|profile| {
                successors(profile, t, params)
                    .iter()
                    .map(|(next, prob)| prob * backward.get(next).copied().unwrap_or(0.0))
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect();
        backward = sources
            .into_iter()
            .cloned()
            .zip(values)
            .filter(|(_, v)| *v > 0.0)
            .collect();
    }
    let table: BTreeMap<HeightProfile, f64> = layers[cut_row]
        .iter()
        .filter_map(|(profile, &f)| backward.get(profile).map(|&b| (profile.clone(), f * b)))
        .collect();
    SurfaceDistribution::from_weights(table, cut_row)
}

/// How many bits one unit of colored area contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorUnit {
    /// One bit per deposited pair, `N_c = A / 2`.
    Pairs,
    /// One bit per block, `A`.
    Blocks,
}

/// Closed-form entropy: Shannon entropy of the surface marginal plus the mean color units.
pub fn entropy_formula(dist: &SurfaceDistribution) -> EntropyReport {
    entropy_formula_with_unit(dist, ColorUnit::Pairs)
}

pub fn entropy_formula_with_unit(dist: &SurfaceDistribution, unit: ColorUnit) -> EntropyReport {
    let s_uncolored = shannon_bits(dist.table.values().copied());
    let color_term = match unit {
        ColorUnit::Pairs => dist.mean_color_units,
        ColorUnit::Blocks => dist.mean_area,
    };
    EntropyReport {
        s_total: s_uncolored + color_term,
        s_uncolored,
        color_term,
        method: EntropyMethod::Formula,
    }
}

/// Entropy at a space-like cut through the dynamic program, for colored or uncolored states.
pub fn entropy_dp(params: &ModelParams, cut_row: usize) -> Result<EntropyReport> {
    let dist = midcut_distribution(params, cut_row)?;
    let mut report = entropy_formula(&dist);
    if !params.colored {
        report.color_term = 0.0;
        report.s_total = report.s_uncolored;
    }
    report.method = EntropyMethod::Dp;
    Ok(report)
}

/// Surface marginal at a space-like cut computed directly from a state's support.
pub fn marginal_from_state(state: &SparseState, cut_row: usize) -> Result<BTreeMap<HeightProfile, f64>> {
    let mut table: BTreeMap<HeightProfile, f64> = BTreeMap::new();
    for (config, amp) in state.configs()? {
        let profile = crate::lattice::zigzag_profile(&config, cut_row)?;
        *table.entry(profile).or_insert(0.0) += amp * amp;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log y = log amplitude + exponent log x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::Fit("data must be positive and finite".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("x values are all equal".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(PowerLawFit {
        exponent,
        amplitude: intercept.exp(),
        r_squared,
    })
}

/// One row of an entropy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub mode: String,
    pub cut: usize,
    pub method: String,
    #[serde(rename = "S_uncolored")]
    pub s_uncolored: f64,
    pub color_term: f64,
    #[serde(rename = "S_total")]
    pub s_total: f64,
}

impl EntropyRow {
    pub fn new(params: &ModelParams, cut: usize, report: &EntropyReport) -> Self {
        EntropyRow {
            size: params.size,
            p: params.p,
            mode: params.boundary.to_string(),
            cut,
            method: report.method.to_string(),
            s_uncolored: report.s_uncolored,
            color_term: report.color_term,
            s_total: report.s_total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::build_state;

    fn params(size: usize, p: f64, boundary: BoundaryMode, colored: bool) -> ModelParams {
        ModelParams::new(size, p, boundary, colored, 0).unwrap()
    }

    #[test]
    fn p_zero_has_no_entanglement() {
        let params = params(3, 0.0, BoundaryMode::Reflecting, true);
        let state = build_state(&params).unwrap();
        let sectors = schmidt_spectrum(&state, Bipartition::SpaceLike { cut_row: 1 }).unwrap();
        assert_eq!(sectors.len(), 1);
        assert_eq!(sectors[0].weights.len(), 1);
        assert!((sectors[0].weights[0] - 1.0).abs() < 1e-14);
        assert_eq!(
            entropy_exact(&state, Bipartition::SpaceLike { cut_row: 1 })
                .unwrap()
                .s_total,
            0.0
        );
        let dist = midcut_distribution(&params, 1).unwrap();
        assert_eq!(dist.table.len(), 1);
        assert_eq!(entropy_formula(&dist).s_total, 0.0);
    }

    #[test]
    fn unnormalized_state_rejected() {
        let params = params(3, 0.5, BoundaryMode::Reflecting, true);
        let mut state = build_state(&params).unwrap();
        for a in state.amplitudes.values_mut() {
            *a *= 2.0;
        }
        assert!(matches!(
            schmidt_spectrum(&state, Bipartition::SpaceLike { cut_row: 1 }),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn power_law_examples() {
        let xs: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let fit = fit_power_law(&xs, &xs).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!((fit_power_law(&xs, &sq).unwrap().exponent - 2.0).abs() < 1e-12);
        assert!(fit_power_law(&xs[..2], &xs[..2]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn cut_range_checked() {
        let params = params(3, 0.5, BoundaryMode::Reflecting, false);
        assert!(midcut_distribution(&params, 0).is_err());
        assert!(midcut_distribution(&params, 4).is_err());
        let state = build_state(&params).unwrap();
        assert!(schmidt_spectrum(&state, Bipartition::TimeLike { cut_col: 0 }).is_err());
    }
}
