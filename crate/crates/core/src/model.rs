//! Deposition-evaporation dynamics on a one-dimensional surface with sublattice updates.
//!
//! Sites are `0..=L+1`. Sites `0` and `L+1` are pinned at height zero; sites `1` and `L`
//! are frozen at height one. One time slice updates every interior site `2..=L-1` of one
//! parity. Slice `t` updates the sites with `i + t` odd, so odd slices move even sites.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities that should sum to one are checked against this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Heights never drop below the horizon; evaporation at the bottom is forbidden.
    Reflecting,
    /// Unconstrained evolution, post-selected onto trajectories that stay at or above zero.
    Absorbing,
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::Reflecting => f.write_str("reflecting"),
            BoundaryMode::Absorbing => f.write_str("absorbing"),
        }
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reflecting" => Ok(BoundaryMode::Reflecting),
            "absorbing" => Ok(BoundaryMode::Absorbing),
            other => Err(Error::InvalidParameter(format!("unknown boundary mode {other:?}"))),
        }
    }
}

/// Model parameters shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Lattice side `L`: odd, at least 3.
    pub size: usize,
    /// Deposition bias.
    pub p: f64,
    pub boundary: BoundaryMode,
    pub colored: bool,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(size: usize, p: f64, boundary: BoundaryMode, colored: bool, seed: u64) -> Result<Self> {
        let params = ModelParams {
            size,
            p,
            boundary,
            colored,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        validate_size(self.size)?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!("p = {} is outside [0, 1]", self.p)));
        }
        Ok(())
    }

    /// Number of update slices between the initial and final horizon rows.
    pub fn slices(&self) -> usize {
        self.size
    }

    /// The cut splitting the slices as evenly as possible.
    pub fn mid_cut(&self) -> usize {
        (self.size - 1) / 2
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_colored(mut self, colored: bool) -> Self {
        self.colored = colored;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryMode) -> Self {
        self.boundary = boundary;
        self
    }
}

pub(crate) fn validate_size(size: usize) -> Result<()> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "L = {size} must be odd and at least 3"
        )));
    }
    Ok(())
}

/// Color register of an update vertex. `Blank` marks a vertex without a height change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Blank,
    Red,
    Green,
}

impl Color {
    pub const PAIR: [Color; 2] = [Color::Red, Color::Green];

    pub fn code(self) -> u8 {
        match self {
            Color::Blank => 0,
            Color::Red => 1,
            Color::Green => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Color> {
        match code {
            0 => Some(Color::Blank),
            1 => Some(Color::Red),
            2 => Some(Color::Green),
            _ => None,
        }
    }

    /// Exchanges red and green, leaving blank alone.
    pub fn swapped(self) -> Color {
        match self {
            Color::Blank => Color::Blank,
            Color::Red => Color::Green,
            Color::Green => Color::Red,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Blank => "0",
            Color::Red => "r",
            Color::Green => "g",
        })
    }
}

/// Which sublattice of sites a slice updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Slice `t` (counted from 1) updates sites with `i + t` odd.
    pub fn for_slice(t: usize) -> Parity {
        if t % 2 == 1 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn matches(self, site: usize) -> bool {
        (site % 2 == 0) == (self == Parity::Even)
    }
}

/// Interior sites `2..=L-1` of the given parity, in increasing order.
pub fn updatable_sites(size: usize, parity: Parity) -> impl Iterator<Item = usize> {
    (2..size).filter(move |&i| parity.matches(i))
}

/// Height of site `i` in the horizon profile.
pub fn horizon_height(i: usize) -> i32 {
    (i % 2) as i32
}

/// Heights `h_0..=h_{L+1}` at one time slice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeightProfile {
    heights: Vec<i32>,
}

impl HeightProfile {
    pub fn horizon(size: usize) -> Result<Self> {
        validate_size(size)?;
        Ok(HeightProfile {
            heights: (0..size + 2).map(horizon_height).collect(),
        })
    }

    /// Validates boundary zeros, unit slopes and site parity. Negative heights are allowed.
    pub fn from_heights(heights: Vec<i32>) -> Result<Self> {
        if heights.len() < 5 {
            return Err(Error::InvalidProfile(format!("{} entries is too short", heights.len())));
        }
        validate_size(heights.len() - 2)?;
        let last = heights.len() - 1;
        if heights[0] != 0 || heights[last] != 0 {
            return Err(Error::InvalidProfile("boundary heights must be zero".into()));
        }
        for (i, w) in heights.windows(2).enumerate() {
            if (w[0] - w[1]).abs() != 1 {
                return Err(Error::InvalidProfile(format!("slope between sites {i} and {}", i + 1)));
            }
        }
        Ok(HeightProfile { heights })
    }

    pub(crate) fn from_heights_unchecked(heights: Vec<i32>) -> Self {
        HeightProfile { heights }
    }

    /// Lattice side `L`.
    pub fn size(&self) -> usize {
        self.heights.len() - 2
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn get(&self, i: usize) -> i32 {
        self.heights[i]
    }

    pub fn is_horizon(&self) -> bool {
        self.heights.iter().enumerate().all(|(i, &h)| h == horizon_height(i))
    }

    pub fn min_height(&self) -> i32 {
        self.heights.iter().copied().min().unwrap_or(0)
    }

    /// Height above the horizon at site `i`; always even.
    pub fn excess(&self, i: usize) -> i32 {
        self.heights[i] - horizon_height(i)
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.size() {
            return Err(Error::InvalidParameter(format!("site {i} outside 1..={}", self.size())));
        }
        Ok(())
    }
}

impl fmt::Display for HeightProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, h) in self.heights.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{h}")?;
        }
        f.write_str("]")
    }
}

/// Deposition: `h_i <- min(h_{i-1}, h_{i+1}) + 1`.
pub fn deposit_rule(profile: &HeightProfile, i: usize) -> Result<HeightProfile> {
    profile.check_site(i)?;
    let mut heights = profile.heights.clone();
    heights[i] = heights[i - 1].min(heights[i + 1]) + 1;
    Ok(HeightProfile { heights })
}

/// Evaporation: `h_i <- max(h_{i-1}, h_{i+1}) - 1`. May go negative.
pub fn evaporate_rule(profile: &HeightProfile, i: usize) -> Result<HeightProfile> {
    profile.check_site(i)?;
    let mut heights = profile.heights.clone();
    heights[i] = heights[i - 1].max(heights[i + 1]) - 1;
    Ok(HeightProfile { heights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteShape {
    /// Both neighbors one above.
    Valley,
    /// Both neighbors one below.
    Peak,
    /// Left neighbor below, right neighbor above.
    SlopeUp,
    /// Left neighbor above, right neighbor below.
    SlopeDown,
}

impl SiteShape {
    /// Classifies a site from its neighbors' heights relative to it.
    pub fn classify(left: i32, center: i32, right: i32) -> SiteShape {
        match (left > center, right > center) {
            (true, true) => SiteShape::Valley,
            (false, false) => SiteShape::Peak,
            (false, true) => SiteShape::SlopeUp,
            (true, false) => SiteShape::SlopeDown,
        }
    }
}

pub fn site_shape(profile: &HeightProfile, i: usize) -> Result<SiteShape> {
    profile.check_site(i)?;
    let h = &profile.heights;
    Ok(SiteShape::classify(h[i - 1], h[i], h[i + 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    NoChange,
    /// Height-neutral outcome forced by the reflecting rule at the bottom.
    ForcedNoChange,
    Deposit,
    Evaporate,
}

impl EventKind {
    pub fn height_delta(self) -> i32 {
        match self {
            EventKind::NoChange | EventKind::ForcedNoChange => 0,
            EventKind::Deposit => 2,
            EventKind::Evaporate => -2,
        }
    }

    pub fn changes_height(self) -> bool {
        self.height_delta() != 0
    }
}

/// One vertex outcome. Colors are `Blank` for no-change events and in uncolored runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub kind: EventKind,
    pub color: Color,
}

impl Event {
    pub const NO_CHANGE: Event = Event {
        kind: EventKind::NoChange,
        color: Color::Blank,
    };
    pub const FORCED: Event = Event {
        kind: EventKind::ForcedNoChange,
        color: Color::Blank,
    };

    pub fn deposit(color: Color) -> Event {
        Event {
            kind: EventKind::Deposit,
            color,
        }
    }

    pub fn evaporate(color: Color) -> Event {
        Event {
            kind: EventKind::Evaporate,
            color,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventEntry {
    pub event: Event,
    pub height_delta: i32,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventDistribution {
    pub entries: Vec<EventEntry>,
}

impl EventDistribution {
    fn from_pairs(pairs: &[(Event, f64)]) -> Self {
        EventDistribution {
            entries: pairs
                .iter()
                .map(|&(event, probability)| EventEntry {
                    event,
                    height_delta: event.kind.height_delta(),
                    probability,
                })
                .collect(),
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn probability_of(&self, event: Event) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.event == event)
            .map(|e| e.probability)
            .sum()
    }
}

/// Probability classes of a single update vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexClass {
    ValleyNoChange,
    Deposit,
    PeakNoChange,
    Evaporate,
    Slope,
}

impl VertexClass {
    /// Uncolored probability of the class. A colored deposit of one specific color has half of it.
    pub fn probability(self, p: f64) -> f64 {
        match self {
            VertexClass::ValleyNoChange => 1.0 - p / 2.0,
            VertexClass::Deposit => p / 2.0,
            VertexClass::PeakNoChange => 0.5 + p / 2.0,
            VertexClass::Evaporate => 0.5 - p / 2.0,
            VertexClass::Slope => 1.0,
        }
    }
}

/// Reflecting mode forbids evaporation of the horizon block of an odd site.
pub fn peak_at_bottom(shape: SiteShape, h: i32, boundary: BoundaryMode) -> bool {
    shape == SiteShape::Peak && h <= 1 && boundary == BoundaryMode::Reflecting
}

/// Stack-agnostic event table of one site. Colored runs split deposits and evaporations
/// evenly over the two colors.
pub fn event_distribution(shape: SiteShape, h: i32, params: &ModelParams) -> EventDistribution {
    let p = params.p;
    let split = |make: fn(Color) -> Event, prob: f64| -> Vec<(Event, f64)> {
        if params.colored {
            Color::PAIR.iter().map(|&c| (make(c), prob / 2.0)).collect()
        } else {
            vec![(make(Color::Blank), prob)]
        }
    };
    let mut pairs = Vec::with_capacity(3);
    match shape {
        SiteShape::Valley => {
            pairs.push((Event::NO_CHANGE, VertexClass::ValleyNoChange.probability(p)));
            pairs.extend(split(Event::deposit, VertexClass::Deposit.probability(p)));
        }
        SiteShape::Peak if peak_at_bottom(shape, h, params.boundary) => {
            pairs.push((Event::FORCED, 1.0));
        }
        SiteShape::Peak => {
            pairs.push((Event::NO_CHANGE, VertexClass::PeakNoChange.probability(p)));
            pairs.extend(split(Event::evaporate, VertexClass::Evaporate.probability(p)));
        }
        SiteShape::SlopeUp | SiteShape::SlopeDown => pairs.push((Event::NO_CHANGE, 1.0)),
    }
    EventDistribution::from_pairs(&pairs)
}

/// Stack-aware branches of one site. An evaporation removes the top pair of the site's
/// stack and therefore carries that pair's color with the full evaporation probability.
/// `top` is `None` when the site sits at or below its horizon height.
pub(crate) fn site_branches(shape: SiteShape, h: i32, top: Option<Color>, params: &ModelParams) -> Vec<(Event, f64)> {
    let p = params.p;
    match shape {
        SiteShape::Valley => {
            let mut out = vec![(Event::NO_CHANGE, VertexClass::ValleyNoChange.probability(p))];
            if params.colored {
                for c in Color::PAIR {
                    out.push((Event::deposit(c), VertexClass::Deposit.probability(p) / 2.0));
                }
            } else {
                out.push((Event::deposit(Color::Blank), VertexClass::Deposit.probability(p)));
            }
            out
        }
        SiteShape::Peak if peak_at_bottom(shape, h, params.boundary) => vec![(Event::FORCED, 1.0)],
        SiteShape::Peak => {
            let color = if params.colored {
                top.unwrap_or(Color::Blank)
            } else {
                Color::Blank
            };
            vec![
                (Event::NO_CHANGE, VertexClass::PeakNoChange.probability(p)),
                (Event::evaporate(color), VertexClass::Evaporate.probability(p)),
            ]
        }
        SiteShape::SlopeUp | SiteShape::SlopeDown => vec![(Event::NO_CHANGE, 1.0)],
    }
}

/// Picks the branch selected by the uniform draw `u`, skipping zero-probability branches.
pub(crate) fn pick_branch(u: f64, probabilities: impl Iterator<Item = f64>) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (k, prob) in probabilities.enumerate() {
        if prob <= 0.0 {
            continue;
        }
        cumulative += prob;
        last_positive = k;
        if u < cumulative {
            return k;
        }
    }
    last_positive
}

/// A profile together with the colors of the block pairs stacked above the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Surface {
    pub profile: HeightProfile,
    /// Pair colors per site, bottom first. Uncolored runs store `Blank` entries.
    pub stacks: Vec<Vec<Color>>,
}

impl Surface {
    pub fn horizon(size: usize) -> Result<Self> {
        Ok(Surface {
            profile: HeightProfile::horizon(size)?,
            stacks: vec![Vec::new(); size + 2],
        })
    }

    pub fn size(&self) -> usize {
        self.profile.size()
    }

    pub fn shape(&self, i: usize) -> SiteShape {
        let h = self.profile.heights();
        SiteShape::classify(h[i - 1], h[i], h[i + 1])
    }

    pub fn top(&self, i: usize) -> Option<Color> {
        self.stacks[i].last().copied()
    }

    /// Stack-aware branches available at site `i`.
    pub fn branches(&self, i: usize, params: &ModelParams) -> Vec<(Event, f64)> {
        site_branches(self.shape(i), self.profile.get(i), self.top(i), params)
    }

    /// Applies an event at site `i`. Returns `false` if the site left the region at or above
    /// its horizon height, which only happens for absorbing dynamics.
    pub fn apply(&mut self, i: usize, event: Event) -> bool {
        let before = self.profile.heights[i];
        let after = before + event.kind.height_delta();
        self.profile.heights[i] = after;
        let horizon = horizon_height(i);
        match event.kind {
            EventKind::Deposit if after > horizon => self.stacks[i].push(event.color),
            EventKind::Evaporate if before > horizon => {
                self.stacks[i].pop();
            }
            _ => {}
        }
        after >= horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteEvent {
    pub site: usize,
    pub event: Event,
    pub probability: f64,
}

pub type SliceEvents = Vec<SiteEvent>;

/// Advances every updatable site of `parity` by one sampled event. One uniform draw is
/// consumed per updatable site, in increasing site order.
pub fn advance_slice<R: Rng + ?Sized>(
    surface: &Surface,
    parity: Parity,
    rng: &mut R,
    params: &ModelParams,
) -> (Surface, SliceEvents, f64) {
    let mut next = surface.clone();
    let mut events = Vec::new();
    let mut weight = 1.0;
    for i in updatable_sites(surface.size(), parity) {
        let branches = surface.branches(i, params);
        let u: f64 = rng.random();
        let k = pick_branch(u, branches.iter().map(|b| b.1));
        let (event, probability) = branches[k];
        next.apply(i, event);
        weight *= probability;
        events.push(SiteEvent {
            site: i,
            event,
            probability,
        });
    }
    (next, events, weight)
}

/// A full evolution over `L` slices: profiles `P_0..=P_L` and the events of each slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub size: usize,
    pub profiles: Vec<HeightProfile>,
    /// `events[t - 1]` holds slice `t`.
    pub events: Vec<SliceEvents>,
    pub weight: f64,
}

impl TrajectoryRecord {
    pub fn is_bridge(&self) -> bool {
        self.profiles.first().is_some_and(HeightProfile::is_horizon)
            && self.profiles.last().is_some_and(HeightProfile::is_horizon)
    }

    pub fn stays_nonnegative(&self) -> bool {
        self.profiles.iter().all(|p| p.min_height() >= 0)
    }

    /// Event at site `i` in slice `t`, if that site updates there.
    pub fn event_at(&self, i: usize, t: usize) -> Option<Event> {
        self.events
            .get(t.checked_sub(1)?)?
            .iter()
            .find(|e| e.site == i)
            .map(|e| e.event)
    }
}

/// Samples an unconditioned trajectory of `L` slices from the horizon.
pub fn sample_trajectory<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<TrajectoryRecord> {
    params.validate()?;
    let mut surface = Surface::horizon(params.size)?;
    let mut profiles = vec![surface.profile.clone()];
    let mut events = Vec::with_capacity(params.slices());
    let mut weight = 1.0;
    for t in 1..=params.slices() {
        let (next, slice, w) = advance_slice(&surface, Parity::for_slice(t), rng, params);
        surface = next;
        profiles.push(surface.profile.clone());
        events.push(slice);
        weight *= w;
    }
    Ok(TrajectoryRecord {
        size: params.size,
        profiles,
        events,
        weight,
    })
}

/// RNG stream `index` derived from a master seed. Streams are independent and the same
/// `(seed, index)` always yields the same sequence.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(size: usize, p: f64, boundary: BoundaryMode, colored: bool) -> ModelParams {
        ModelParams::new(size, p, boundary, colored, 7).unwrap()
    }

    fn profile(h: &[i32]) -> HeightProfile {
        HeightProfile::from_heights(h.to_vec()).unwrap()
    }

    #[test]
    fn horizon_profiles() {
        assert_eq!(HeightProfile::horizon(3).unwrap().heights(), &[0, 1, 0, 1, 0]);
        assert_eq!(HeightProfile::horizon(5).unwrap().heights(), &[0, 1, 0, 1, 0, 1, 0]);
        assert!(HeightProfile::horizon(2).is_err());
        assert!(HeightProfile::horizon(1).is_err());
    }

    #[test]
    fn deposit_and_evaporate_rules() {
        let flat = profile(&[0, 1, 0, 1, 0]);
        let raised = profile(&[0, 1, 2, 1, 0]);
        assert_eq!(deposit_rule(&flat, 2).unwrap(), raised);
        assert_eq!(deposit_rule(&raised, 2).unwrap(), raised);
        assert_eq!(evaporate_rule(&raised, 2).unwrap(), flat);
        assert_eq!(evaporate_rule(&flat, 2).unwrap(), flat);
        assert_eq!(evaporate_rule(&flat, 1).unwrap().get(1), -1);
        let slope = profile(&[0, 1, 2, 1, 0, 1, 0]);
        assert_eq!(deposit_rule(&slope, 4).unwrap(), profile(&[0, 1, 2, 1, 2, 1, 0]));
        assert_eq!(deposit_rule(&slope, 3).unwrap().get(3), 1);
        assert!(deposit_rule(&flat, 0).is_err());
    }

    #[test]
    fn shapes() {
        assert_eq!(site_shape(&profile(&[0, 1, 0, 1, 0]), 2).unwrap(), SiteShape::Valley);
        assert_eq!(site_shape(&profile(&[0, 1, 2, 1, 0]), 2).unwrap(), SiteShape::Peak);
        assert_eq!(
            site_shape(&profile(&[0, 1, 2, 3, 2, 1, 0]), 2).unwrap(),
            SiteShape::SlopeUp
        );
        assert_eq!(
            site_shape(&profile(&[0, 1, 2, 3, 2, 1, 0]), 4).unwrap(),
            SiteShape::SlopeDown
        );
    }

    #[test]
    fn event_tables() {
        let p6 = params(3, 0.6, BoundaryMode::Reflecting, false);
        let valley = event_distribution(SiteShape::Valley, 0, &p6);
        assert!((valley.probability_of(Event::deposit(Color::Blank)) - 0.3).abs() < 1e-15);
        assert!((valley.probability_of(Event::NO_CHANGE) - 0.7).abs() < 1e-15);

        let colored = p6.with_colored(true);
        let peak = event_distribution(SiteShape::Peak, 2, &colored);
        assert!((peak.probability_of(Event::evaporate(Color::Red)) - 0.1).abs() < 1e-15);
        assert!((peak.probability_of(Event::evaporate(Color::Green)) - 0.1).abs() < 1e-15);
        assert!((peak.probability_of(Event::NO_CHANGE) - 0.8).abs() < 1e-15);

        for p in [0.0, 0.3, 1.0] {
            let bottom = event_distribution(SiteShape::Peak, 1, &p6.with_p(p));
            assert_eq!(bottom.entries.len(), 1);
            assert_eq!(bottom.entries[0].probability, 1.0);
            let abs = event_distribution(SiteShape::Peak, 1, &p6.with_p(p).with_boundary(BoundaryMode::Absorbing));
            assert!((abs.probability_of(Event::evaporate(Color::Blank)) - (1.0 - p) / 2.0).abs() < 1e-15);
        }
        let slope = event_distribution(SiteShape::SlopeUp, 3, &p6);
        assert_eq!(slope.entries.len(), 1);
        assert_eq!(slope.entries[0].probability, 1.0);
    }

    #[test]
    fn l3_even_slice_branches_sum_to_one() {
        let params = params(3, 0.5, BoundaryMode::Reflecting, true);
        let surface = Surface::horizon(3).unwrap();
        let branches = surface.branches(2, &params);
        let total: f64 = branches.iter().map(|b| b.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(branches.len(), 3);
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0);
            let (_, events, weight) = advance_slice(&surface, Parity::Even, &mut rng, &params);
            assert_eq!(events.len(), 1);
            assert_eq!(weight, events[0].probability);
            let expected = if events[0].event.kind == EventKind::Deposit {
                0.125
            } else {
                0.75
            };
            assert_eq!(weight, expected);
        }
    }

    #[test]
    fn l3_odd_slice_is_trivial() {
        let params = params(3, 0.5, BoundaryMode::Reflecting, false);
        let surface = Surface::horizon(3).unwrap();
        let mut rng = stream_rng(1, 0);
        let (next, events, weight) = advance_slice(&surface, Parity::Odd, &mut rng, &params);
        assert_eq!(next, surface);
        assert!(events.is_empty());
        assert_eq!(weight, 1.0);
    }

    #[test]
    fn p_zero_reflecting_is_frozen() {
        let params = params(9, 0.0, BoundaryMode::Reflecting, true);
        let mut rng = stream_rng(3, 0);
        let traj = sample_trajectory(&params, &mut rng).unwrap();
        assert!(traj.profiles.iter().all(HeightProfile::is_horizon));
        assert_eq!(traj.weight, 1.0);
    }

    #[test]
    fn stacks_track_pair_colors() {
        let params = params(5, 0.5, BoundaryMode::Reflecting, true);
        let mut s = Surface::horizon(5).unwrap();
        assert!(s.apply(2, Event::deposit(Color::Green)));
        assert_eq!(s.top(2), Some(Color::Green));
        assert_eq!(s.shape(2), SiteShape::Peak);
        let branches = s.branches(2, &params);
        assert_eq!(branches[1].0, Event::evaporate(Color::Green));
        assert_eq!(branches[1].1, 0.25);
        assert!(s.apply(2, Event::evaporate(Color::Green)));
        assert_eq!(s, Surface::horizon(5).unwrap());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream_rng(11, 3), |r, _: u64| Some(r.random()))
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream_rng(11, 3), |r, _: u64| Some(r.random()))
            .collect();
        let c: Vec<u64> = (0..4)
            .map(|_| 0)
            .scan(stream_rng(11, 4), |r, _: u64| Some(r.random()))
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
