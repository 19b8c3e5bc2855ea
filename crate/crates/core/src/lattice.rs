//! Spin and color lattice encoding of trajectories.
//!
//! Edges carry spins and are indexed by `(a, b)` with `0 <= a, b <= L`; edge `(a, b)`
//! sits at coordinate `(a + 1/2, b + 1/2)`. Spin row `b` encodes the profile after `b`
//! slices through `s_{a,b} = (-1)^{a+b} (h_{a+1} - h_a) / 2`. Update vertices `(i, t)`
//! with `i + t` odd and `1 <= i, t <= L` carry colors. Vertex `(i, t)` records the event
//! of site `i` in slice `t` and touches edges `(i-1, t-1)`, `(i-1, t)` on its left and
//! `(i, t-1)`, `(i, t)` on its right.
//!
//! Canonical key layout: spins packed one bit each (up = 1), most significant bit first,
//! edges in row-major order (rows bottom to top, left to right within a row), zero-padded
//! to a byte boundary. Colored configurations append 2-bit color codes (0, r = 1, g = 2),
//! most significant pair first, vertices in the same row-major order, zero-padded.

use std::fmt;

use crate::error::{DecodeError, Error, Result};
use crate::model::{
    horizon_height, peak_at_bottom, updatable_sites, Color, Event, EventKind, HeightProfile, ModelParams, Parity,
    SiteEvent, SiteShape, Surface, TrajectoryRecord,
};

/// Index maps between lattice coordinates and register positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    size: usize,
    vertices: Vec<(usize, usize)>,
    vertex_lookup: Vec<Option<usize>>,
}

impl Geometry {
    pub fn new(size: usize) -> Result<Self> {
        crate::model::validate_size(size)?;
        let side = size + 1;
        let mut vertices = Vec::new();
        let mut vertex_lookup = vec![None; side * side];
        for t in 1..=size {
            for i in 1..=size {
                if (i + t) % 2 == 1 {
                    vertex_lookup[t * side + i] = Some(vertices.len());
                    vertices.push((i, t));
                }
            }
        }
        Ok(Geometry {
            size,
            vertices,
            vertex_lookup,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edge_count(&self) -> usize {
        (self.size + 1) * (self.size + 1)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a <= self.size && b <= self.size);
        b * (self.size + 1) + a
    }

    pub fn edge_coords(&self, index: usize) -> (usize, usize) {
        (index % (self.size + 1), index / (self.size + 1))
    }

    pub fn vertex_index(&self, i: usize, t: usize) -> Option<usize> {
        if i > self.size || t > self.size {
            return None;
        }
        self.vertex_lookup[t * (self.size + 1) + i]
    }

    pub fn vertex_coords(&self, index: usize) -> (usize, usize) {
        self.vertices[index]
    }

    pub fn vertices(&self) -> &[(usize, usize)] {
        &self.vertices
    }

    /// Left pair (lower, upper) then right pair (lower, upper) of edge indices.
    pub fn vertex_edges(&self, i: usize, t: usize) -> [usize; 4] {
        [
            self.edge_index(i - 1, t - 1),
            self.edge_index(i - 1, t),
            self.edge_index(i, t - 1),
            self.edge_index(i, t),
        ]
    }

    fn spin_bytes(&self) -> usize {
        self.edge_count().div_ceil(8)
    }

    fn color_bytes(&self) -> usize {
        self.vertex_count().div_ceil(4)
    }

    pub fn key_len(&self, colored: bool) -> usize {
        self.spin_bytes() + if colored { self.color_bytes() } else { 0 }
    }
}

/// Spins on every edge (`true` = up) and colors on every update vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeConfig {
    pub size: usize,
    pub spins: Vec<bool>,
    pub colors: Vec<Color>,
}

impl LatticeConfig {
    pub fn spin(&self, geometry: &Geometry, a: usize, b: usize) -> bool {
        self.spins[geometry.edge_index(a, b)]
    }

    pub fn color(&self, geometry: &Geometry, i: usize, t: usize) -> Option<Color> {
        geometry.vertex_index(i, t).map(|v| self.colors[v])
    }

    /// Global exchange of red and green.
    pub fn swapped_colors(&self) -> LatticeConfig {
        LatticeConfig {
            size: self.size,
            spins: self.spins.clone(),
            colors: self.colors.iter().map(|c| c.swapped()).collect(),
        }
    }

    /// Drops every color.
    pub fn uncolored(&self) -> LatticeConfig {
        LatticeConfig {
            size: self.size,
            spins: self.spins.clone(),
            colors: vec![Color::Blank; self.colors.len()],
        }
    }
}

/// Byte string identifying a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(pub Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        hex::decode(text)
            .map(CanonicalKey)
            .map_err(|e| Error::MalformedKey(e.to_string()))
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// `2 s` of an up/down spin.
fn twice(spin: bool) -> i32 {
    if spin {
        1
    } else {
        -1
    }
}

fn sign(k: usize) -> i32 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Spin of edge `(a, b)` for the profile encoded in spin row `b`.
pub fn spin_from_profile(profile: &HeightProfile, a: usize, b: usize) -> bool {
    let h = profile.heights();
    sign(a + b) * (h[a + 1] - h[a]) > 0
}

/// Integrates spin row `b` from `h_0 = 0`. Does not validate `h_{L+1}`.
fn integrate_row(config: &LatticeConfig, geometry: &Geometry, b: usize) -> Vec<i32> {
    let size = geometry.size();
    let mut heights = Vec::with_capacity(size + 2);
    heights.push(0);
    for a in 0..=size {
        let prev = heights[a];
        heights.push(prev + sign(a + b) * twice(config.spin(geometry, a, b)));
    }
    heights
}

fn check_shape(config: &LatticeConfig, geometry: &Geometry) -> Result<()> {
    if config.size != geometry.size() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has L = {}, expected {}",
            config.size,
            geometry.size()
        )));
    }
    if config.spins.len() != geometry.edge_count() {
        return Err(DecodeError::Shape {
            expected: geometry.edge_count(),
            found: config.spins.len(),
        }
        .into());
    }
    if config.colors.len() != geometry.vertex_count() {
        return Err(DecodeError::Shape {
            expected: geometry.vertex_count(),
            found: config.colors.len(),
        }
        .into());
    }
    Ok(())
}

/// Left-pair minus right-pair spin sum at vertex `(i, t)`, as an integer.
pub fn gauss_residual(config: &LatticeConfig, vertex: (usize, usize)) -> Result<i32> {
    let geometry = Geometry::new(config.size)?;
    check_shape(config, &geometry)?;
    let (i, t) = vertex;
    if geometry.vertex_index(i, t).is_none() {
        return Err(Error::InvalidParameter(format!("({i}, {t}) is not an update vertex")));
    }
    Ok(residual_at(config, &geometry, i, t))
}

fn residual_at(config: &LatticeConfig, geometry: &Geometry, i: usize, t: usize) -> i32 {
    let [l1, l2, r1, r2] = geometry.vertex_edges(i, t).map(|e| twice(config.spins[e]));
    (l1 + l2 - r1 - r2) / 2
}

/// Expected spin of a left or right boundary-column edge in row `b`.
pub fn boundary_column_spin(b: usize) -> bool {
    b % 2 == 0
}

/// The profile encoded in spin row `cut_row`, the surface straddling the cut between
/// spin rows `cut_row` and `cut_row + 1`.
pub fn zigzag_profile(config: &LatticeConfig, cut_row: usize) -> Result<HeightProfile> {
    let geometry = Geometry::new(config.size)?;
    check_shape(config, &geometry)?;
    if cut_row == 0 || cut_row > geometry.size() {
        return Err(Error::InvalidParameter(format!(
            "cut row {cut_row} outside 1..={}",
            geometry.size()
        )));
    }
    HeightProfile::from_heights(integrate_row(config, &geometry, cut_row))
}

/// Colored area `A` above the horizon and the number of color units `N_c = A / 2`.
pub fn colored_area(profile: &HeightProfile) -> (i64, i64) {
    let area: i64 = (1..=profile.size()).map(|i| profile.excess(i) as i64).sum();
    (area, area / 2)
}

fn check_consecutive(before: &HeightProfile, after: &HeightProfile, t: usize) -> Result<()> {
    let parity = Parity::for_slice(t);
    for i in 0..before.heights().len() {
        let delta = after.get(i) - before.get(i);
        let updatable = i >= 2 && i < before.size() && parity.matches(i);
        let legal = if updatable {
            delta.abs() == 2 || delta == 0
        } else {
            delta == 0
        };
        if !legal {
            return Err(Error::Encode(format!("site {i} changes by {delta} in slice {t}")));
        }
    }
    Ok(())
}

/// Encodes a bridge trajectory as a lattice configuration.
pub fn encode_trajectory(traj: &TrajectoryRecord, params: &ModelParams) -> Result<LatticeConfig> {
    let geometry = Geometry::new(params.size)?;
    let size = params.size;
    if traj.size != size || traj.profiles.len() != size + 1 || traj.events.len() != size {
        return Err(Error::Encode(format!(
            "trajectory has {} profiles and {} slices, expected {} and {}",
            traj.profiles.len(),
            traj.events.len(),
            size + 1,
            size
        )));
    }
    if !traj.is_bridge() {
        return Err(Error::Encode("trajectory does not start and end at the horizon".into()));
    }
    for profile in &traj.profiles {
        HeightProfile::from_heights(profile.heights().to_vec()).map_err(|e| Error::Encode(e.to_string()))?;
    }
    let mut colors = vec![Color::Blank; geometry.vertex_count()];
    for t in 1..=size {
        let (before, after) = (&traj.profiles[t - 1], &traj.profiles[t]);
        check_consecutive(before, after, t)?;
        for i in updatable_sites(size, Parity::for_slice(t)) {
            let delta = after.get(i) - before.get(i);
            let event = traj
                .event_at(i, t)
                .ok_or_else(|| Error::Encode(format!("missing event for site {i} in slice {t}")))?;
            if event.kind.height_delta() != delta {
                return Err(Error::Encode(format!(
                    "event at ({i}, {t}) disagrees with the profiles"
                )));
            }
            if params.colored {
                if event.kind.changes_height() == (event.color == Color::Blank) {
                    return Err(Error::Encode(format!("event color at ({i}, {t}) is inconsistent")));
                }
                let v = geometry.vertex_index(i, t).expect("updatable site has a vertex");
                colors[v] = event.color;
            }
        }
    }
    Ok(config_from_profiles(&geometry, &traj.profiles, colors))
}

/// Spins of the profile sequence `P_0..=P_L` together with the given vertex colors.
pub fn config_from_profiles(geometry: &Geometry, profiles: &[HeightProfile], colors: Vec<Color>) -> LatticeConfig {
    let size = geometry.size();
    let mut spins = vec![false; geometry.edge_count()];
    for (b, profile) in profiles.iter().enumerate() {
        for a in 0..=size {
            spins[geometry.edge_index(a, b)] = spin_from_profile(profile, a, b);
        }
    }
    LatticeConfig { size, spins, colors }
}

/// Reconstructs the trajectory of a configuration, validating Gauss's law, boundary
/// spins, slopes, color validity and color matching, and computes its weight.
pub fn decode_config(config: &LatticeConfig, params: &ModelParams) -> Result<TrajectoryRecord> {
    let geometry = Geometry::new(params.size)?;
    check_shape(config, &geometry)?;
    let size = params.size;
    for &(i, t) in geometry.vertices() {
        let residual = residual_at(config, &geometry, i, t);
        if residual != 0 {
            return Err(DecodeError::Gauss { i, t, residual }.into());
        }
    }
    for b in 0..=size {
        for a in [0, size] {
            if config.spin(&geometry, a, b) != boundary_column_spin(b) {
                return Err(DecodeError::Boundary { a, b }.into());
            }
        }
    }
    for a in 0..=size {
        if !config.spin(&geometry, a, 0) {
            return Err(DecodeError::Boundary { a, b: 0 }.into());
        }
        if config.spin(&geometry, a, size) {
            return Err(DecodeError::Boundary { a, b: size }.into());
        }
    }
    let mut profiles = Vec::with_capacity(size + 1);
    for b in 0..=size {
        let heights = integrate_row(config, &geometry, b);
        if heights[size + 1] != 0 {
            return Err(DecodeError::Slope { row: b }.into());
        }
        profiles.push(HeightProfile::from_heights_unchecked(heights));
    }
    for t in 1..=size {
        if check_consecutive(&profiles[t - 1], &profiles[t], t).is_err() {
            return Err(DecodeError::Slope { row: t }.into());
        }
    }
    for (v, &(i, t)) in geometry.vertices().iter().enumerate() {
        let color = config.colors[v];
        let changes = profiles[t].get(i) != profiles[t - 1].get(i);
        let valid = if params.colored {
            changes != (color == Color::Blank)
        } else {
            color == Color::Blank
        };
        if !valid {
            return Err(DecodeError::Color {
                i,
                t,
                color: color.code(),
            }
            .into());
        }
    }

    let mut surface = Surface::horizon(size)?;
    let mut events = Vec::with_capacity(size);
    let mut weight = 1.0;
    for (t, target) in profiles.iter().enumerate().skip(1) {
        let mut slice = Vec::new();
        let mut next = surface.clone();
        for i in updatable_sites(size, Parity::for_slice(t)) {
            let before = surface.profile.get(i);
            let delta = target.get(i) - before;
            let color = config.color(&geometry, i, t).expect("vertex exists");
            let shape = surface.shape(i);
            let kind = match delta {
                2 => EventKind::Deposit,
                -2 => EventKind::Evaporate,
                _ if peak_at_bottom(shape, before, params.boundary) => EventKind::ForcedNoChange,
                _ => EventKind::NoChange,
            };
            if kind == EventKind::Evaporate
                && params.colored
                && before > horizon_height(i)
                && surface.top(i) != Some(color)
            {
                return Err(DecodeError::ColorMismatch { i, t }.into());
            }
            let event = Event { kind, color };
            let probability = branch_probability(&surface, i, event, params);
            weight *= probability;
            next.apply(i, event);
            slice.push(SiteEvent {
                site: i,
                event,
                probability,
            });
        }
        surface = next;
        events.push(slice);
    }
    Ok(TrajectoryRecord {
        size,
        profiles,
        events,
        weight,
    })
}

fn branch_probability(surface: &Surface, i: usize, event: Event, params: &ModelParams) -> f64 {
    let branches = surface.branches(i, params);
    let matched = branches.iter().find(|(e, _)| *e == event).map(|b| b.1);
    match matched {
        Some(prob) => prob,
        // Below-horizon evaporations in absorbing mode carry no stack color.
        None if event.kind == EventKind::Evaporate && surface.shape(i) == SiteShape::Peak => branches
            .iter()
            .find(|(e, _)| e.kind == EventKind::Evaporate)
            .map_or(0.0, |b| b.1),
        None => 0.0,
    }
}

/// Canonical byte key of a configuration. Colors are included only for colored runs.
pub fn canonical_key(config: &LatticeConfig, colored: bool) -> CanonicalKey {
    let edge_bytes = config.spins.len().div_ceil(8);
    let color_bytes = if colored { config.colors.len().div_ceil(4) } else { 0 };
    let mut bytes = vec![0u8; edge_bytes + color_bytes];
    for (k, &up) in config.spins.iter().enumerate() {
        if up {
            bytes[k / 8] |= 0x80 >> (k % 8);
        }
    }
    if colored {
        for (v, color) in config.colors.iter().enumerate() {
            bytes[edge_bytes + v / 4] |= color.code() << (6 - 2 * (v % 4));
        }
    }
    CanonicalKey(bytes)
}

/// Inverse of `canonical_key`. Rejects wrong lengths, nonzero padding and color code 3.
pub fn key_to_config(key: &CanonicalKey, params: &ModelParams) -> Result<LatticeConfig> {
    let geometry = Geometry::new(params.size)?;
    let bytes = key.as_bytes();
    let expected = geometry.key_len(params.colored);
    if bytes.len() != expected {
        return Err(Error::MalformedKey(format!(
            "{} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let edges = geometry.edge_count();
    let edge_bytes = geometry.spin_bytes();
    let spins: Vec<bool> = (0..edges).map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0).collect();
    for k in edges..edge_bytes * 8 {
        if bytes[k / 8] & (0x80 >> (k % 8)) != 0 {
            return Err(Error::MalformedKey("nonzero spin padding".into()));
        }
    }
    let vertices = geometry.vertex_count();
    let mut colors = vec![Color::Blank; vertices];
    if params.colored {
        for slot in 0..geometry.color_bytes() * 4 {
            let code = (bytes[edge_bytes + slot / 4] >> (6 - 2 * (slot % 4))) & 0b11;
            if slot >= vertices {
                if code != 0 {
                    return Err(Error::MalformedKey("nonzero color padding".into()));
                }
                continue;
            }
            colors[slot] = Color::from_code(code).ok_or_else(|| Error::MalformedKey(format!("color code {code}")))?;
        }
    }
    Ok(LatticeConfig {
        size: params.size,
        spins,
        colors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundaryMode;

    fn params(colored: bool) -> ModelParams {
        ModelParams::new(3, 0.5, BoundaryMode::Reflecting, colored, 0).unwrap()
    }

    fn horizon_traj(size: usize) -> TrajectoryRecord {
        let h = HeightProfile::horizon(size).unwrap();
        let events = (1..=size)
            .map(|t| {
                updatable_sites(size, Parity::for_slice(t))
                    .map(|site| SiteEvent {
                        site,
                        event: Event::NO_CHANGE,
                        probability: 1.0,
                    })
                    .collect()
            })
            .collect();
        TrajectoryRecord {
            size,
            profiles: vec![h; size + 1],
            events,
            weight: 1.0,
        }
    }

    #[test]
    fn geometry_counts() {
        let g = Geometry::new(3).unwrap();
        assert_eq!(g.edge_count(), 16);
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.vertices(), &[(2, 1), (1, 2), (3, 2), (2, 3)]);
        let g5 = Geometry::new(5).unwrap();
        assert_eq!(g5.vertex_count(), 12);
        assert_eq!(g5.edge_coords(g5.edge_index(4, 2)), (4, 2));
    }

    #[test]
    fn flat_trajectory_encoding() {
        let config = encode_trajectory(&horizon_traj(3), &params(true)).unwrap();
        let g = Geometry::new(3).unwrap();
        for a in 0..=3 {
            assert!(config.spin(&g, a, 0));
            assert!(!config.spin(&g, a, 3));
        }
        for b in 0..=3 {
            for a in 0..=3 {
                assert_eq!(config.spin(&g, a, b), b % 2 == 0, "edge ({a}, {b})");
            }
        }
        assert!(config.colors.iter().all(|&c| c == Color::Blank));
    }

    #[test]
    fn gauss_examples() {
        let g = Geometry::new(3).unwrap();
        let mut config = encode_trajectory(&horizon_traj(3), &params(false)).unwrap();
        let [l1, l2, r1, r2] = g.vertex_edges(2, 1);
        for e in [l1, l2, r1, r2] {
            config.spins[e] = true;
        }
        assert_eq!(gauss_residual(&config, (2, 1)).unwrap(), 0);
        config.spins[r2] = false;
        assert_eq!(gauss_residual(&config, (2, 1)).unwrap(), 1);
        assert!(gauss_residual(&config, (2, 2)).is_err());
    }

    #[test]
    fn all_up_is_boundary_violation() {
        let g = Geometry::new(3).unwrap();
        let config = LatticeConfig {
            size: 3,
            spins: vec![true; g.edge_count()],
            colors: vec![Color::Blank; g.vertex_count()],
        };
        match decode_config(&config, &params(false)) {
            Err(Error::Decode(DecodeError::Boundary { .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn colored_area_examples() {
        let p = |h: &[i32]| HeightProfile::from_heights(h.to_vec()).unwrap();
        assert_eq!(colored_area(&HeightProfile::horizon(3).unwrap()), (0, 0));
        assert_eq!(colored_area(&p(&[0, 1, 2, 1, 0])), (2, 1));
        assert_eq!(colored_area(&p(&[0, 1, 2, 3, 2, 1, 0])), (6, 3));
    }

    #[test]
    fn key_layout_and_errors() {
        let config = encode_trajectory(&horizon_traj(3), &params(true)).unwrap();
        let key = canonical_key(&config, true);
        assert_eq!(key.as_bytes().len(), 3);
        assert_eq!(key_to_config(&key, &params(true)).unwrap(), config);
        let mut short = key.clone();
        short.0.pop();
        assert!(key_to_config(&short, &params(true)).is_err());
        let mut bad = key.clone();
        bad.0[2] = 0b1100_0000;
        assert!(key_to_config(&bad, &params(true)).is_err());
        assert_eq!(canonical_key(&config, false).as_bytes().len(), 2);
    }

    #[test]
    fn zigzag_range() {
        let config = encode_trajectory(&horizon_traj(3), &params(false)).unwrap();
        assert!(zigzag_profile(&config, 0).is_err());
        assert!(zigzag_profile(&config, 4).is_err());
        for c in 1..=3 {
            assert!(zigzag_profile(&config, c).unwrap().is_horizon());
        }
    }
}
