//! Exact simulation of sequential generation with a stack emitter.
//!
//! The emitter holds one stack per site `1..=L`. A stack stores the colors of the block
//! pairs above the site's horizon height, bottom first, followed by a marker (`E` on even
//! sites, `F` on odd sites) and blank cells up to a fixed capacity. The marker level is the
//! number of pairs, so the surface height is the horizon height plus twice the marker level.
//!
//! Round `n` applies the local channels of every site `i` with `i + n` odd, which emit
//! the spins of edges `(i-1, n)` and `(i, n)` and the color of vertex `(i, n)`. Even rounds
//! also apply the boundary channels: `U_L` and `U_R` emit edges `(1, n)` and `(L-1, n)`
//! from the neighboring stack, and `U_b` flips the fresh edges `(0, n)` and `(L, n)` to up.
//! Spin row 0 is fixed and is not generated.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::SparseState;
use crate::lattice::{canonical_key, spin_from_profile, Geometry, LatticeConfig};
use crate::model::{
    horizon_height, site_branches, updatable_sites, BoundaryMode, Color, EventKind, HeightProfile, ModelParams, Parity,
    SiteShape, Surface,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    E,
    F,
}

impl Marker {
    pub fn for_site(i: usize) -> Marker {
        if i % 2 == 0 {
            Marker::E
        } else {
            Marker::F
        }
    }

    /// Horizon height of the sites carrying this marker.
    pub fn horizon(self) -> i32 {
        match self {
            Marker::E => 0,
            Marker::F => 1,
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::E => "E",
            Marker::F => "F",
        })
    }
}

/// One emitter cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Blank,
    Red,
    Green,
    E,
    F,
}

impl Symbol {
    pub fn code(self) -> u8 {
        match self {
            Symbol::Blank => 0,
            Symbol::Red => 1,
            Symbol::Green => 2,
            Symbol::E => 3,
            Symbol::F => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Symbol> {
        Some(match code {
            0 => Symbol::Blank,
            1 => Symbol::Red,
            2 => Symbol::Green,
            3 => Symbol::E,
            4 => Symbol::F,
            _ => return None,
        })
    }

    fn marker(m: Marker) -> Symbol {
        match m {
            Marker::E => Symbol::E,
            Marker::F => Symbol::F,
        }
    }
}

/// Stack contents of the emitter for sites `1..=L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EmitterConfig {
    pub size: usize,
    pub capacity: usize,
    pub stacks: Vec<Vec<Symbol>>,
}

/// Reference state: every marker at the bottom of its stack.
pub fn init_emitter(size: usize) -> Result<EmitterConfig> {
    crate::model::validate_size(size)?;
    let capacity = size + 2;
    let stacks = (1..=size)
        .map(|i| {
            let mut stack = vec![Symbol::Blank; capacity];
            stack[0] = Symbol::marker(Marker::for_site(i));
            stack
        })
        .collect();
    Ok(EmitterConfig { size, capacity, stacks })
}

impl EmitterConfig {
    /// Marker level of site `i`, counted from the bottom.
    pub fn marker_level(&self, i: usize) -> usize {
        self.stacks[i - 1]
            .iter()
            .position(|s| matches!(s, Symbol::E | Symbol::F))
            .expect("every stack carries a marker")
    }

    pub fn validate(&self) -> Result<()> {
        if self.stacks.len() != self.size {
            return Err(Error::Emitter(format!(
                "{} stacks for L = {}",
                self.stacks.len(),
                self.size
            )));
        }
        for (k, stack) in self.stacks.iter().enumerate() {
            let i = k + 1;
            if stack.len() != self.capacity {
                return Err(Error::Emitter(format!("stack {i} has {} cells", stack.len())));
            }
            let markers: Vec<usize> = (0..stack.len())
                .filter(|&j| matches!(stack[j], Symbol::E | Symbol::F))
                .collect();
            let [level] = markers[..] else {
                return Err(Error::Emitter(format!("stack {i} carries {} markers", markers.len())));
            };
            if stack[level] != Symbol::marker(Marker::for_site(i)) {
                return Err(Error::Emitter(format!("stack {i} carries the wrong marker")));
            }
            if stack[..level].iter().any(|s| !matches!(s, Symbol::Red | Symbol::Green)) {
                return Err(Error::Emitter(format!(
                    "stack {i} has an uncolored cell below its marker"
                )));
            }
            if stack[level + 1..].iter().any(|&s| s != Symbol::Blank) {
                return Err(Error::Emitter(format!("stack {i} has a colored cell above its marker")));
            }
        }
        Ok(())
    }

    /// Emitter holding a surface. Uncolored pairs are stored as `r`.
    pub fn from_surface(surface: &Surface) -> Result<Self> {
        let size = surface.size();
        let mut config = init_emitter(size)?;
        for i in 1..=size {
            let pairs = &surface.stacks[i];
            if surface.profile.get(i) != horizon_height(i) + 2 * pairs.len() as i32 {
                return Err(Error::Emitter(format!(
                    "site {i} is below its horizon or out of sync with its stack"
                )));
            }
            if pairs.len() + 1 > config.capacity {
                return Err(Error::Capacity {
                    what: "emitter stack cells",
                    count: pairs.len() + 1,
                    limit: config.capacity,
                });
            }
            let stack = &mut config.stacks[i - 1];
            for (level, &c) in pairs.iter().enumerate() {
                stack[level] = match c {
                    Color::Green => Symbol::Green,
                    Color::Red | Color::Blank => Symbol::Red,
                };
            }
            stack[pairs.len()] = Symbol::marker(Marker::for_site(i));
        }
        Ok(config)
    }

    pub fn to_surface(&self, colored: bool) -> Result<Surface> {
        self.validate()?;
        let mut heights = vec![0; self.size + 2];
        let mut stacks = vec![Vec::new(); self.size + 2];
        for i in 1..=self.size {
            let level = self.marker_level(i);
            heights[i] = horizon_height(i) + 2 * level as i32;
            stacks[i] = self.stacks[i - 1][..level]
                .iter()
                .map(|&s| match (colored, s) {
                    (false, _) => Color::Blank,
                    (true, Symbol::Green) => Color::Green,
                    _ => Color::Red,
                })
                .collect();
        }
        Ok(Surface {
            profile: HeightProfile::from_heights(heights)?,
            stacks,
        })
    }

    /// One byte per cell, stacks in site order, preceded by `L` and the capacity.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + self.size * self.capacity);
        out.push(self.size as u8);
        out.push(self.capacity as u8);
        for stack in &self.stacks {
            out.extend(stack.iter().map(|s| s.code()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (&size, rest) = bytes
            .split_first()
            .ok_or_else(|| Error::Emitter("empty emitter key".into()))?;
        let (&capacity, cells) = rest
            .split_first()
            .ok_or_else(|| Error::Emitter("truncated emitter key".into()))?;
        let (size, capacity) = (size as usize, capacity as usize);
        if capacity == 0 || cells.len() != size * capacity {
            return Err(Error::Emitter(format!(
                "emitter key of {} bytes for L = {size}",
                bytes.len()
            )));
        }
        let stacks = cells
            .chunks(capacity)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|&c| Symbol::from_code(c).ok_or_else(|| Error::Emitter(format!("symbol code {c}"))))
                    .collect()
            })
            .collect::<Result<Vec<Vec<Symbol>>>>()?;
        let config = EmitterConfig { size, capacity, stacks };
        config.validate()?;
        Ok(config)
    }
}

/// Window of a site channel: neighbor heights relative to the center and the center stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelWindow {
    pub marker: Marker,
    /// `h_{i-1} - h_i`, either 1 or -1.
    pub left: i32,
    /// `h_{i+1} - h_i`, either 1 or -1.
    pub right: i32,
    pub stack: Vec<Color>,
}

impl ChannelWindow {
    fn height(&self) -> i32 {
        self.marker.horizon() + 2 * self.stack.len() as i32
    }

    fn shape(&self) -> SiteShape {
        SiteShape::classify(self.left, 0, self.right)
    }
}

/// One nonzero matrix element of a site channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    pub window: ChannelWindow,
    /// Emitted spins of edges `(i-1, n)` and `(i, n)`.
    pub spins: [bool; 2],
    pub color: Color,
    pub amplitude: f64,
}

/// Nonzero elements of the site channel on one input window.
pub fn channel_outputs(window: &ChannelWindow, params: &ModelParams) -> Vec<ChannelOutput> {
    let shape = window.shape();
    let top = window.stack.last().copied();
    site_branches(shape, window.height(), top, params)
        .into_iter()
        .filter(|&(_, prob)| prob > 0.0)
        .map(|(event, prob)| {
            let delta = event.kind.height_delta();
            let mut stack = window.stack.clone();
            match event.kind {
                EventKind::Deposit => stack.push(event.color),
                EventKind::Evaporate => {
                    stack.pop();
                }
                _ => {}
            }
            ChannelOutput {
                window: ChannelWindow {
                    marker: window.marker,
                    left: window.left - delta,
                    right: window.right - delta,
                    stack,
                },
                spins: [delta > window.left, delta > window.right],
                // Uncolored runs use the single color r.
                color: match (event.kind.changes_height(), params.colored) {
                    (false, _) => Color::Blank,
                    (true, true) => event.color,
                    (true, false) => Color::Red,
                },
                amplitude: prob.sqrt(),
            }
        })
        .collect()
}

/// Sparse description of `U_{E,j}` or `U_{F,j}` on the windows reachable with stacks of
/// at most `max_depth` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalChannel {
    pub marker: Marker,
    pub params: ModelParams,
    pub columns: Vec<(ChannelWindow, Vec<ChannelOutput>)>,
}

fn stacks_up_to(depth: usize, colored: bool) -> Vec<Vec<Color>> {
    let palette: &[Color] = if colored { &Color::PAIR } else { &[Color::Blank] };
    let mut all = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..depth {
        layer = layer
            .iter()
            .flat_map(|s: &Vec<Color>| {
                palette.iter().map(move |&c| {
                    let mut next = s.clone();
                    next.push(c);
                    next
                })
            })
            .collect();
        all.extend(layer.iter().cloned());
    }
    all
}

pub fn local_channel(marker: Marker, params: &ModelParams, max_depth: usize) -> LocalChannel {
    let mut columns = Vec::new();
    for stack in stacks_up_to(max_depth, params.colored) {
        for left in [-1, 1] {
            for right in [-1, 1] {
                let window = ChannelWindow {
                    marker,
                    left,
                    right,
                    stack: stack.clone(),
                };
                // Reflecting surfaces never have a neighbor below zero.
                if window.height() + left.min(right) < 0 {
                    continue;
                }
                let outputs = channel_outputs(&window, params);
                columns.push((window, outputs));
            }
        }
    }
    LocalChannel {
        marker,
        params: *params,
        columns,
    }
}

impl LocalChannel {
    pub fn column_norms(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|(_, outs)| outs.iter().map(|o| o.amplitude * o.amplitude).sum())
            .collect()
    }

    /// Largest deviation of the column Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        type OutKey = (ChannelWindow, [bool; 2], Color);
        let vectors: Vec<BTreeMap<OutKey, f64>> = self
            .columns
            .iter()
            .map(|(_, outs)| {
                let mut v = BTreeMap::new();
                for o in outs {
                    *v.entry((o.window.clone(), o.spins, o.color)).or_insert(0.0) += o.amplitude;
                }
                v
            })
            .collect();
        let mut worst = 0.0f64;
        for (a, va) in vectors.iter().enumerate() {
            for (b, vb) in vectors.iter().enumerate().skip(a) {
                let dot: f64 = va.iter().filter_map(|(k, x)| vb.get(k).map(|y| x * y)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// The deterministic boundary channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryChannel {
    /// Flips the two fresh boundary qubits `(0, n)` and `(L, n)` from down to up.
    Bottom,
    /// Emits edge `(1, n)`: up when the marker of site 2 sits at level 0.
    Left,
    /// Emits edge `(L-1, n)`: up when the marker of site `L-1` sits at level 0.
    Right,
}

/// Spin emitted by a boundary channel given the marker level of the neighboring stack.
/// `Bottom` ignores the level.
pub fn boundary_emission(channel: BoundaryChannel, neighbor_level: usize) -> bool {
    match channel {
        BoundaryChannel::Bottom => true,
        BoundaryChannel::Left | BoundaryChannel::Right => neighbor_level == 0,
    }
}

/// Emitter bytes paired with the record emitted so far.
pub type JointKey = (Vec<u8>, Vec<u8>);

/// Emitter and emitted registers, keyed by `(emitter bytes, emitted record)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub params: ModelParams,
    /// Rounds applied so far.
    pub round: usize,
    pub entries: BTreeMap<JointKey, f64>,
}

/// Number of emitted registers per round `n`: `L + 1` spins and the vertex colors of row `n`.
fn row_len(size: usize, n: usize) -> usize {
    size + 1 + (1..=size).filter(|&i| (i + n) % 2 == 1).count()
}

fn record_len(size: usize, rounds: usize) -> usize {
    (1..=rounds).map(|n| row_len(size, n)).sum()
}

impl JointState {
    pub fn initial(params: &ModelParams) -> Result<Self> {
        let emitter = init_emitter(params.size)?;
        let mut entries = BTreeMap::new();
        entries.insert((emitter.to_bytes(), Vec::new()), 1.0);
        Ok(JointState {
            params: *params,
            round: 0,
            entries,
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|a| a * a).sum()
    }
}

/// Every output of one round from a single joint basis state.
fn expand_entry(
    emitter_bytes: &[u8],
    record: &[u8],
    amplitude: f64,
    n: usize,
    params: &ModelParams,
) -> Result<Vec<(JointKey, f64)>> {
    let size = params.size;
    let emitter = EmitterConfig::from_bytes(emitter_bytes)?;
    let surface = emitter.to_surface(params.colored)?;
    let vertex_positions: Vec<usize> = (1..=size).filter(|&i| (i + n) % 2 == 1).collect();
    let slot = |i: usize| size + 1 + vertex_positions.iter().position(|&v| v == i).expect("vertex in row");
    let mut row = vec![0u8; row_len(size, n)];
    if n % 2 == 0 {
        row[0] = boundary_emission(BoundaryChannel::Bottom, 0) as u8;
        row[size] = boundary_emission(BoundaryChannel::Bottom, 0) as u8;
        row[1] = boundary_emission(BoundaryChannel::Left, emitter.marker_level(2)) as u8;
        row[size - 1] = boundary_emission(BoundaryChannel::Right, emitter.marker_level(size - 1)) as u8;
    }
    let mut branches = vec![(surface.clone(), row, amplitude)];
    for i in updatable_sites(size, Parity::for_slice(n)) {
        let h = surface.profile.heights();
        let window = ChannelWindow {
            marker: Marker::for_site(i),
            left: h[i - 1] - h[i],
            right: h[i + 1] - h[i],
            stack: surface.stacks[i].clone(),
        };
        let outputs = channel_outputs(&window, params);
        let mut next = Vec::with_capacity(branches.len() * outputs.len());
        for (s, row, amp) in &branches {
            for out in &outputs {
                let mut s = s.clone();
                let mut heights = s.profile.heights().to_vec();
                heights[i] = h[i] + window.left - out.window.left;
                s.profile = HeightProfile::from_heights_unchecked(heights);
                s.stacks[i] = out.window.stack.clone();
                let mut row = row.clone();
                row[i - 1] = out.spins[0] as u8;
                row[i] = out.spins[1] as u8;
                row[slot(i)] = out.color.code();
                next.push((s, row, amp * out.amplitude));
            }
        }
        branches = next;
    }
    branches
        .into_iter()
        .map(|(s, row, amp)| {
            let mut rec = record.to_vec();
            rec.extend(row);
            Ok(((EmitterConfig::from_surface(&s)?.to_bytes(), rec), amp))
        })
        .collect()
}

/// Applies round `n` with the channel parameters `params` (a cooling round passes `p = 0`).
pub fn apply_round(state: &JointState, n: usize, params: &ModelParams) -> Result<JointState> {
    if n != state.round + 1 || n > state.params.size {
        return Err(Error::Emitter(format!("round {n} after round {}", state.round)));
    }
    let expected = record_len(state.params.size, state.round);
    if let Some(((_, rec), _)) = state.entries.iter().find(|((_, rec), _)| rec.len() != expected) {
        return Err(Error::Emitter(format!(
            "emitted record of length {} where {expected} is due",
            rec.len()
        )));
    }
    let expanded: Vec<Result<Vec<(JointKey, f64)>>> = state
        .entries
        .par_iter()
        .map(|((emitter, record), &amp)| expand_entry(emitter, record, amp, n, params))
        .collect();
    let mut entries = BTreeMap::new();
    for part in expanded {
        for (key, amp) in part? {
            if entries.insert(key, amp).is_some() {
                return Err(Error::Emitter(
                    "two branches produced the same joint basis state".into(),
                ));
            }
        }
    }
    Ok(JointState {
        params: state.params,
        round: n,
        entries,
    })
}

/// Post-selected generated state and the probability of the post-selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub state: SparseState,
    pub success_probability: f64,
}

/// First cooled round: the second half of the rounds runs at `p = 0`.
pub fn cooling_start(size: usize) -> usize {
    size / 2 + 1
}

/// Runs all `L` rounds, projects the emitter onto its reference state and renormalizes.
pub fn run_generation(params: &ModelParams, cooling: bool) -> Result<Generation> {
    params.validate()?;
    if params.boundary != BoundaryMode::Reflecting {
        return Err(Error::Unsupported(
            "sequential generation needs the reflecting mode".into(),
        ));
    }
    let size = params.size;
    let mut joint = JointState::initial(params)?;
    for n in 1..=size {
        let round_params = if cooling && n >= cooling_start(size) {
            params.with_p(0.0)
        } else {
            *params
        };
        joint = apply_round(&joint, n, &round_params)?;
        let norm = joint.norm_sq();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
    }
    let reference = init_emitter(size)?.to_bytes();
    let geometry = Geometry::new(size)?;
    let horizon = HeightProfile::horizon(size)?;
    let mut amplitudes = BTreeMap::new();
    let mut success = 0.0;
    for ((emitter, record), amp) in &joint.entries {
        if *emitter != reference {
            continue;
        }
        success += amp * amp;
        let config = record_to_config(&geometry, &horizon, record)?;
        if amplitudes
            .insert(canonical_key(&config, params.colored), *amp)
            .is_some()
        {
            return Err(Error::Emitter("two records map to the same configuration".into()));
        }
    }
    if success <= 0.0 {
        return Err(Error::Emitter("post-selection has zero probability".into()));
    }
    let scale = success.sqrt();
    amplitudes.values_mut().for_each(|a| *a /= scale);
    Ok(Generation {
        state: SparseState {
            params: *params,
            amplitudes,
        },
        success_probability: success,
    })
}

fn record_to_config(geometry: &Geometry, horizon: &HeightProfile, record: &[u8]) -> Result<LatticeConfig> {
    let size = geometry.size();
    if record.len() != record_len(size, size) {
        return Err(Error::Emitter(format!("record of length {}", record.len())));
    }
    let mut spins = vec![false; geometry.edge_count()];
    for a in 0..=size {
        spins[geometry.edge_index(a, 0)] = spin_from_profile(horizon, a, 0);
    }
    let mut colors = vec![Color::Blank; geometry.vertex_count()];
    let mut cursor = 0;
    for n in 1..=size {
        for a in 0..=size {
            spins[geometry.edge_index(a, n)] = record[cursor] != 0;
            cursor += 1;
        }
        for i in (1..=size).filter(|&i| (i + n) % 2 == 1) {
            let code = record[cursor];
            let color = Color::from_code(code).ok_or_else(|| Error::Emitter(format!("color code {code}")))?;
            colors[geometry.vertex_index(i, n).expect("vertex")] = color;
            cursor += 1;
        }
    }
    Ok(LatticeConfig { size, spins, colors })
}

/// `(sum_k a_k b_k)^2` for two states over the same key space.
pub fn fidelity(a: &SparseState, b: &SparseState) -> Result<f64> {
    if a.params.size != b.params.size || a.params.colored != b.params.colored {
        return Err(Error::DimensionMismatch(format!(
            "states for L = {} colored = {} and L = {} colored = {}",
            a.params.size, a.params.colored, b.params.size, b.params.colored
        )));
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let overlap: f64 = small.amplitudes.iter().map(|(k, x)| x * large.get(k)).sum();
    Ok(overlap * overlap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(size: usize, p: f64, colored: bool) -> ModelParams {
        ModelParams::new(size, p, BoundaryMode::Reflecting, colored, 0).unwrap()
    }

    #[test]
    fn initial_emitter_layout() {
        let e = init_emitter(3).unwrap();
        assert_eq!(e.stacks[0][0], Symbol::F);
        assert_eq!(e.stacks[1][0], Symbol::E);
        assert_eq!(e.stacks[2][0], Symbol::F);
        assert!(e
            .stacks
            .iter()
            .all(|s| s.len() == 5 && s[1..].iter().all(|&c| c == Symbol::Blank)));
        assert_eq!(EmitterConfig::from_bytes(&e.to_bytes()).unwrap(), e);
        let surface = e.to_surface(true).unwrap();
        assert!(surface.profile.is_horizon());
        assert_eq!(EmitterConfig::from_surface(&surface).unwrap(), e);
    }

    #[test]
    fn emitter_rejects_bad_stacks() {
        let mut e = init_emitter(3).unwrap();
        e.stacks[1][2] = Symbol::E;
        assert!(e.validate().is_err());
        let mut e = init_emitter(3).unwrap();
        e.stacks[1].swap(0, 1);
        assert!(e.validate().is_err());
        assert!(EmitterConfig::from_bytes(&[3, 5, 9]).is_err());
    }

    #[test]
    fn channel_elements_at_p_zero() {
        let p = params(5, 0.0, true);
        let peak = ChannelWindow {
            marker: Marker::E,
            left: -1,
            right: -1,
            stack: vec![Color::Green],
        };
        let outs = channel_outputs(&peak, &p);
        assert_eq!(outs.len(), 2);
        assert!((outs[1].amplitude - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(outs[1].color, Color::Green);
        let valley = ChannelWindow {
            marker: Marker::F,
            left: 1,
            right: 1,
            stack: vec![],
        };
        assert_eq!(channel_outputs(&valley, &p).len(), 1);
        let slope = ChannelWindow {
            marker: Marker::F,
            left: -1,
            right: 1,
            stack: vec![],
        };
        let outs = channel_outputs(&slope, &p);
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].amplitude, 1.0);
        assert_eq!(outs[0].spins, [true, false]);
        assert_eq!(outs[0].color, Color::Blank);
    }

    #[test]
    fn boundary_channel_elements() {
        assert!(boundary_emission(BoundaryChannel::Bottom, 3));
        assert!(boundary_emission(BoundaryChannel::Left, 0));
        assert!(!boundary_emission(BoundaryChannel::Left, 1));
        assert!(boundary_emission(BoundaryChannel::Right, 0));
        assert!(!boundary_emission(BoundaryChannel::Right, 1));
    }

    #[test]
    fn p_zero_generation_is_a_product_state() {
        let g = run_generation(&params(5, 0.0, true), false).unwrap();
        assert_eq!(g.state.len(), 1);
        assert!((g.success_probability - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_order_enforced() {
        let p = params(3, 0.5, true);
        let joint = JointState::initial(&p).unwrap();
        assert!(apply_round(&joint, 2, &p).is_err());
    }

    #[test]
    fn absorbing_mode_rejected() {
        let p = params(3, 0.5, true).with_boundary(BoundaryMode::Absorbing);
        assert!(matches!(run_generation(&p, false), Err(Error::Unsupported(_))));
    }
}
