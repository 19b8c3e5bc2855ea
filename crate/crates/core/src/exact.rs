//! Exhaustive bridge enumeration and sparse construction of the encoded quantum states.
//!
//! Binary state format (all integers little-endian):
//! `b"DEPVST01"`, `L: u32`, `p: f64`, `mode: u8` (0 reflecting, 1 absorbing),
//! `colored: u8`, `seed: u64`, `key_len: u32`, `count: u64`, then `count` entries of
//! `key: [u8; key_len]` followed by `amplitude: f64`, sorted by key.
//!
//! Text format: `#` header lines with the parameters, then one `key-hex amplitude` line
//! per entry in key order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{
    canonical_key, decode_config, encode_trajectory, key_to_config, CanonicalKey, Geometry, LatticeConfig,
};
use crate::model::{
    updatable_sites, BoundaryMode, HeightProfile, ModelParams, Parity, SiteEvent, SliceEvents, Surface,
    TrajectoryRecord,
};
use crate::numeric::CompensatedSum;

/// Default ceiling on enumerated search nodes.
pub const ENUMERATION_LIMIT: usize = 10_000_000;

const MAGIC: &[u8; 8] = b"DEPVST01";

/// Sparse real state keyed by canonical configuration keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    pub params: ModelParams,
    pub amplitudes: BTreeMap<CanonicalKey, f64>,
}

impl SparseState {
    pub fn new(params: ModelParams) -> Self {
        SparseState {
            params,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn get(&self, key: &CanonicalKey) -> f64 {
        self.amplitudes.get(key).copied().unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes
            .values()
            .map(|a| a * a)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        for a in self.amplitudes.values_mut() {
            *a /= norm;
        }
        Ok(())
    }

    pub fn configs(&self) -> Result<Vec<(LatticeConfig, f64)>> {
        self.amplitudes
            .iter()
            .map(|(k, &a)| Ok((key_to_config(k, &self.params)?, a)))
            .collect()
    }

    /// Checks that every key decodes to a valid trajectory of the state's parameters.
    pub fn validate_support(&self) -> Result<()> {
        for key in self.amplitudes.keys() {
            decode_config(&key_to_config(key, &self.params)?, &self.params)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let key_len = Geometry::new(self.params.size)
            .map(|g| g.key_len(self.params.colored))
            .unwrap_or(0);
        let mut out = Vec::with_capacity(48 + self.len() * (key_len + 8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.params.size as u32).to_le_bytes());
        out.extend_from_slice(&self.params.p.to_le_bytes());
        out.push(match self.params.boundary {
            BoundaryMode::Reflecting => 0,
            BoundaryMode::Absorbing => 1,
        });
        out.push(self.params.colored as u8);
        out.extend_from_slice(&self.params.seed.to_le_bytes());
        out.extend_from_slice(&(key_len as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (key, amp) in &self.amplitudes {
            out.extend_from_slice(key.as_bytes());
            out.extend_from_slice(&amp.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader { bytes, pos: 0 };
        if reader.take(8)? != MAGIC {
            return Err(Error::Io("not a state file".into()));
        }
        let size = u32::from_le_bytes(reader.array()?) as usize;
        let p = f64::from_le_bytes(reader.array()?);
        let boundary = match reader.take(1)?[0] {
            0 => BoundaryMode::Reflecting,
            1 => BoundaryMode::Absorbing,
            other => return Err(Error::Io(format!("unknown boundary code {other}"))),
        };
        let colored = reader.take(1)?[0] != 0;
        let seed = u64::from_le_bytes(reader.array()?);
        let params = ModelParams::new(size, p, boundary, colored, seed)?;
        let key_len = u32::from_le_bytes(reader.array()?) as usize;
        if key_len != Geometry::new(size)?.key_len(colored) {
            return Err(Error::Io(format!("key length {key_len} does not match L = {size}")));
        }
        let count = u64::from_le_bytes(reader.array()?) as usize;
        let mut state = SparseState::new(params);
        for _ in 0..count {
            let key = CanonicalKey(reader.take(key_len)?.to_vec());
            let amp = f64::from_le_bytes(reader.array()?);
            key_to_config(&key, &params)?;
            state.amplitudes.insert(key, amp);
        }
        if reader.pos != bytes.len() {
            return Err(Error::Io("trailing bytes after state entries".into()));
        }
        Ok(state)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        out.push_str(&format!(
            "# L={} p={} mode={} colored={} seed={}\n# count={}\n",
            p.size,
            p.p,
            p.boundary,
            p.colored,
            p.seed,
            self.len()
        ));
        for (key, amp) in &self.amplitudes {
            out.push_str(&format!("{} {:.17e}\n", key.to_hex(), amp));
        }
        out
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Io("truncated state file".into()));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Update opportunities left for each site after slice `t`.
fn remaining_opportunities(size: usize) -> Vec<Vec<i32>> {
    (0..=size)
        .map(|t| {
            (0..size + 2)
                .map(|i| {
                    if i < 2 || i >= size {
                        return 0;
                    }
                    (t + 1..=size).filter(|&s| Parity::for_slice(s).matches(i)).count() as i32
                })
                .collect()
        })
        .collect()
}

struct Walker<'a> {
    params: &'a ModelParams,
    limit: usize,
    nodes: usize,
    sites: Vec<Vec<usize>>,
    remaining: Vec<Vec<i32>>,
    profiles: Vec<HeightProfile>,
    events: Vec<SliceEvents>,
    out: Vec<(TrajectoryRecord, f64)>,
}

impl Walker<'_> {
    fn slice(&mut self, t: usize, surface: &Surface, weight: f64) -> Result<()> {
        if t > self.params.slices() {
            if surface.profile.is_horizon() {
                let record = TrajectoryRecord {
                    size: self.params.size,
                    profiles: self.profiles.clone(),
                    events: self.events.clone(),
                    weight,
                };
                self.out.push((record, weight));
            }
            return Ok(());
        }
        self.expand(t, 0, surface, surface.clone(), Vec::new(), weight)
    }

    fn expand(
        &mut self,
        t: usize,
        k: usize,
        base: &Surface,
        next: Surface,
        slice_events: SliceEvents,
        weight: f64,
    ) -> Result<()> {
        let sites = &self.sites[t];
        if k == sites.len() {
            let feasible =
                (0..next.profile.heights().len()).all(|i| next.profile.excess(i) <= 2 * self.remaining[t][i]);
            if !feasible {
                return Ok(());
            }
            self.profiles.push(next.profile.clone());
            self.events.push(slice_events);
            self.slice(t + 1, &next, weight)?;
            self.events.pop();
            self.profiles.pop();
            return Ok(());
        }
        let i = sites[k];
        for (event, probability) in base.branches(i, self.params) {
            if probability <= 0.0 {
                continue;
            }
            let mut child = next.clone();
            child.apply(i, event);
            if child.profile.get(i) < 0 {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.limit {
                return Err(Error::Capacity {
                    what: "enumeration nodes",
                    count: self.nodes,
                    limit: self.limit,
                });
            }
            let mut events = slice_events.clone();
            events.push(SiteEvent {
                site: i,
                event,
                probability,
            });
            self.expand(t, k + 1, base, child, events, weight * probability)?;
        }
        Ok(())
    }
}

/// All bridge trajectories with their weights, depth first over slices and in increasing
/// site order within a slice. Branches that dip below zero are pruned.
pub fn enumerate_bridge(params: &ModelParams) -> Result<Vec<(TrajectoryRecord, f64)>> {
    enumerate_bridge_with_limit(params, ENUMERATION_LIMIT)
}

pub fn enumerate_bridge_with_limit(params: &ModelParams, limit: usize) -> Result<Vec<(TrajectoryRecord, f64)>> {
    params.validate()?;
    let size = params.size;
    let horizon = Surface::horizon(size)?;
    let mut walker = Walker {
        params,
        limit,
        nodes: 0,
        sites: (0..=size)
            .map(|t| {
                if t == 0 {
                    Vec::new()
                } else {
                    updatable_sites(size, Parity::for_slice(t)).collect()
                }
            })
            .collect(),
        remaining: remaining_opportunities(size),
        profiles: vec![horizon.profile.clone()],
        events: Vec::new(),
        out: Vec::new(),
    };
    walker.slice(1, &horizon, 1.0)?;
    Ok(walker.out)
}

/// Sum of bridge weights before renormalization.
pub fn success_probability(params: &ModelParams) -> Result<f64> {
    Ok(enumerate_bridge(params)?
        .iter()
        .map(|(_, w)| *w)
        .collect::<CompensatedSum>()
        .value())
}

/// The normalized state with amplitudes `sqrt(weight / Z)` over encoded bridges.
pub fn build_state(params: &ModelParams) -> Result<SparseState> {
    build_state_with_limit(params, ENUMERATION_LIMIT)
}

pub fn build_state_with_limit(params: &ModelParams, limit: usize) -> Result<SparseState> {
    let bridges = enumerate_bridge_with_limit(params, limit)?;
    let total = bridges.iter().map(|(_, w)| *w).collect::<CompensatedSum>().value();
    if total <= 0.0 {
        return Err(Error::NotNormalized(total));
    }
    let mut state = SparseState::new(*params);
    for (traj, weight) in &bridges {
        let key = canonical_key(&encode_trajectory(traj, params)?, params.colored);
        if state.amplitudes.insert(key, (weight / total).sqrt()).is_some() {
            return Err(Error::Encode("two trajectories share one configuration".into()));
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(size: usize, p: f64, boundary: BoundaryMode, colored: bool) -> ModelParams {
        ModelParams::new(size, p, boundary, colored, 0).unwrap()
    }

    #[test]
    fn p_zero_has_single_flat_bridge() {
        let params = params(3, 0.0, BoundaryMode::Reflecting, true);
        let bridges = enumerate_bridge(&params).unwrap();
        assert_eq!(bridges.len(), 1);
        assert_eq!(bridges[0].1, 1.0);
        let state = build_state(&params).unwrap();
        assert_eq!(state.len(), 1);
        assert_eq!(*state.amplitudes.values().next().unwrap(), 1.0);
        assert_eq!(success_probability(&params).unwrap(), 1.0);
    }

    #[test]
    fn l3_colored_has_three_bridges() {
        let params = params(3, 0.5, BoundaryMode::Reflecting, true);
        let state = build_state(&params).unwrap();
        assert_eq!(state.len(), 3);
        assert!((state.norm_sq() - 1.0).abs() < 1e-12);
        state.validate_support().unwrap();
    }

    #[test]
    fn capacity_guard_trips() {
        let params = params(5, 0.5, BoundaryMode::Reflecting, true);
        match enumerate_bridge_with_limit(&params, 3) {
            Err(Error::Capacity { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_and_text_round_trip() {
        let params = params(5, 0.4, BoundaryMode::Absorbing, true);
        let state = build_state(&params).unwrap();
        let bytes = state.to_bytes();
        assert_eq!(SparseState::from_bytes(&bytes).unwrap(), state);
        assert!(SparseState::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let text = state.to_text();
        assert_eq!(text.lines().count(), state.len() + 2);
    }
}
