//! Frustration-free parent Hamiltonian of the absorbing-mode states.
//!
//! Every term acts on a short list of registers (edge spins and vertex colors). Its
//! matrix is stored on the span of an explicit list of local basis configurations and
//! acts as zero on every other local configuration.
//!
//! An update term lives on plaquette `(i, t)` with `2 <= i, t <= L-1` and `i + t` even.
//! Its support, in order, is the bottom pair `(i-1, t-2)`, `(i, t-2)`; the left pair
//! `(i-2, t-1)`, `(i-2, t)`; the four central edges `(i-1, t-1)`, `(i, t-1)`, `(i-1, t)`,
//! `(i, t)`; the right pair `(i+1, t-1)`, `(i+1, t)`; the top pair `(i-1, t+1)`,
//! `(i, t+1)`; and, for colored states, the colors of vertices `(i, t-1)` and `(i, t+1)`.
//!
//! Export format, one block per term:
//! ```text
//! term <index> kind=<kind> coefficient=<c> printed_norm=<x|-> exact_norm=<x|->
//! support <s(a,b)|c(i,t)> ...
//! basis <register values>            (one line per local basis state)
//! matrix <row-major entries>
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::SparseState;
use crate::lanczos::{lowest_eigenpairs, Eigenpairs, LanczosOptions};
use crate::lattice::{
    boundary_column_spin, canonical_key, config_from_profiles, key_to_config, CanonicalKey, Geometry, LatticeConfig,
};
use crate::model::{updatable_sites, BoundaryMode, Color, HeightProfile, ModelParams, Parity, SiteShape, VertexClass};

/// Default ceiling on sector basis states.
pub const SECTOR_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Register {
    Spin { a: usize, b: usize },
    Color { i: usize, t: usize },
}

impl Register {
    fn read(&self, config: &LatticeConfig, geometry: &Geometry) -> u8 {
        match *self {
            Register::Spin { a, b } => config.spin(geometry, a, b) as u8,
            Register::Color { i, t } => config.color(geometry, i, t).map_or(0, Color::code),
        }
    }

    fn write(&self, config: &mut LatticeConfig, geometry: &Geometry, value: u8) {
        match *self {
            Register::Spin { a, b } => config.spins[geometry.edge_index(a, b)] = value != 0,
            Register::Color { i, t } => {
                let v = geometry.vertex_index(i, t).expect("color register on a vertex");
                config.colors[v] = Color::from_code(value).expect("valid color code");
            }
        }
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Register::Spin { a, b } => write!(f, "s({a},{b})"),
            Register::Color { i, t } => write!(f, "c({i},{t})"),
        }
    }
}

/// The three local deformations of an update plaquette, by the heights below and above
/// the center relative to its four neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateCase {
    /// `h -> h+2 -> h` against `h -> h -> h`.
    Bump,
    /// `h -> h+2 -> h+2` against `h -> h -> h+2`.
    Rise,
    /// `h -> h -> h-2` against `h -> h-2 -> h-2`.
    Fall,
}

impl UpdateCase {
    pub const ALL: [UpdateCase; 3] = [UpdateCase::Bump, UpdateCase::Rise, UpdateCase::Fall];

    pub fn k(self) -> u8 {
        match self {
            UpdateCase::Bump => 1,
            UpdateCase::Rise => 2,
            UpdateCase::Fall => 3,
        }
    }

    /// Heights below and above the center, relative to the neighbors.
    fn ends(self) -> (i32, i32) {
        match self {
            UpdateCase::Bump => (-1, -1),
            UpdateCase::Rise => (-1, 1),
            UpdateCase::Fall => (1, -1),
        }
    }
}

/// Surrounding spins `(s1, s2, s3, s4)` of the left and right vertices, `true` = up.
pub type Surround = [bool; 4];

/// The four surroundings allowed by Gauss's law.
pub const SURROUNDS: [Surround; 4] = [
    [true, false, true, false],
    [true, false, false, true],
    [false, true, true, false],
    [false, true, false, true],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Initial,
    Final,
    Left,
    Right,
    Gauss,
    Color,
    Update {
        case: UpdateCase,
        color: Option<Color>,
        surround: Surround,
        i: usize,
        t: usize,
    },
}

impl TermKind {
    pub fn is_projector(&self) -> bool {
        !matches!(self, TermKind::Gauss)
    }

    pub fn touches_colors(&self) -> bool {
        matches!(self, TermKind::Color | TermKind::Update { color: Some(_), .. })
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermKind::Initial => f.write_str("initial"),
            TermKind::Final => f.write_str("final"),
            TermKind::Left => f.write_str("left"),
            TermKind::Right => f.write_str("right"),
            TermKind::Gauss => f.write_str("gauss"),
            TermKind::Color => f.write_str("color"),
            TermKind::Update {
                case,
                color,
                surround,
                i,
                t,
            } => {
                let s: String = surround.iter().map(|&up| if up { 'u' } else { 'd' }).collect();
                let c = color.map_or("-".to_string(), |c| c.to_string());
                write!(f, "update(k={},c={c},S={s},i={i},t={t})", case.k())
            }
        }
    }
}

/// A local operator `coefficient * sum_rc matrix[r][c] |basis_r><basis_c|`.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    pub kind: TermKind,
    pub support: Vec<Register>,
    pub coefficient: f64,
    pub basis: Vec<Vec<u8>>,
    /// Row-major, `basis.len()` squared entries.
    pub matrix: Vec<f64>,
    /// Normalization printed for update projectors: the sum of the two uncolored `p_{S,h}`.
    pub printed_norm: Option<f64>,
    /// The exact squared norm of the deformation state used to build the projector.
    pub exact_norm: Option<f64>,
    lookup: HashMap<Vec<u8>, usize>,
}

impl LocalTerm {
    pub fn new(
        kind: TermKind,
        support: Vec<Register>,
        coefficient: f64,
        basis: Vec<Vec<u8>>,
        matrix: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(matrix.len(), basis.len() * basis.len());
        let lookup = basis.iter().enumerate().map(|(k, b)| (b.clone(), k)).collect();
        LocalTerm {
            kind,
            support,
            coefficient,
            basis,
            matrix,
            printed_norm: None,
            exact_norm: None,
            lookup,
        }
    }

    fn diagonal(kind: TermKind, support: Vec<Register>, coefficient: f64, entries: Vec<(Vec<u8>, f64)>) -> Self {
        let d = entries.len();
        let mut matrix = vec![0.0; d * d];
        let mut basis = Vec::with_capacity(d);
        for (k, (local, value)) in entries.into_iter().enumerate() {
            matrix[k * d + k] = value;
            basis.push(local);
        }
        LocalTerm::new(kind, support, coefficient, basis, matrix)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.matrix[r * self.dim() + c]
    }

    fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.matrix)
    }

    /// Largest `|M_rc - M_cr|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.entry(r, c) - self.entry(c, r)).abs());
            }
        }
        worst
    }

    /// Largest entry of `|M^2 - M|`.
    pub fn idempotence_defect(&self) -> f64 {
        let m = self.dense();
        (&m * &m - &m).abs().max()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut values: Vec<f64> = SymmetricEigen::new(self.dense()).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn rank(&self, tolerance: f64) -> usize {
        self.eigenvalues().iter().filter(|v| v.abs() > tolerance).count()
    }

    fn local(&self, config: &LatticeConfig, geometry: &Geometry) -> Vec<u8> {
        self.support.iter().map(|r| r.read(config, geometry)).collect()
    }

    /// Images of one configuration under the term, with their coefficients.
    fn act(&self, config: &LatticeConfig, geometry: &Geometry) -> Vec<(LatticeConfig, f64)> {
        let Some(&c) = self.lookup.get(&self.local(config, geometry)) else {
            return Vec::new();
        };
        let d = self.dim();
        let mut out = Vec::new();
        for r in 0..d {
            let m = self.matrix[r * d + c];
            if m == 0.0 {
                continue;
            }
            let mut image = config.clone();
            for (reg, &value) in self.support.iter().zip(&self.basis[r]) {
                reg.write(&mut image, geometry, value);
            }
            out.push((image, self.coefficient * m));
        }
        out
    }
}

/// Probability of a single vertex class.
pub fn single_vertex_probability(class: VertexClass, p: f64) -> f64 {
    class.probability(p)
}

/// Two-branch local superposition around one update plaquette.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationState {
    pub case: UpdateCase,
    pub color: Option<Color>,
    pub surround: Surround,
    /// The local subspace the projector acts on; the first two entries are the branches.
    pub subspace: Vec<Vec<u8>>,
    /// Branch weights: conditional probabilities of the two local histories.
    pub weights: [f64; 2],
    /// The two uncolored products `p_{S,h}` of the branches.
    pub uncolored_products: [f64; 2],
}

impl DeformationState {
    pub fn amplitudes(&self) -> Vec<f64> {
        let mut amps: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        amps.resize(self.subspace.len(), 0.0);
        amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn positive_branches(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Probability of the no-change vertex beside the center: site `i -/+ 1` stays at `n`
/// with outer neighbor at `n + outer` and the center at `n + center`.
fn side_probability(frozen: bool, outer: i32, center: i32, p: f64) -> f64 {
    if frozen {
        return 1.0;
    }
    match (outer, center) {
        (1, 1) => VertexClass::ValleyNoChange.probability(p),
        (-1, -1) => VertexClass::PeakNoChange.probability(p),
        _ => VertexClass::Slope.probability(p),
    }
}

/// Probability of the center site moving from `from` to `to`, both relative to neighbors at 0.
/// Deposits count `deposit` each.
fn center_probability(from: i32, to: i32, p: f64, deposit: f64) -> f64 {
    match (from, to - from) {
        (-1, 0) => VertexClass::ValleyNoChange.probability(p),
        (-1, 2) => deposit,
        (1, 0) => VertexClass::PeakNoChange.probability(p),
        (1, -2) => VertexClass::Evaporate.probability(p),
        _ => 0.0,
    }
}

fn local_config(bottom: i32, center: i32, top: i32, surround: Surround, colors: Option<(Color, Color)>) -> Vec<u8> {
    let [s1, s2, s3, s4] = surround;
    let lower = center == 1;
    let upper = center == -1;
    let mut local = vec![
        (bottom == -1) as u8,
        (bottom == -1) as u8,
        s1 as u8,
        s2 as u8,
        lower as u8,
        lower as u8,
        upper as u8,
        upper as u8,
        s3 as u8,
        s4 as u8,
        (top == 1) as u8,
        (top == 1) as u8,
    ];
    if let Some((below, above)) = colors {
        local.push(below.code());
        local.push(above.code());
    }
    local
}

fn update_support(i: usize, t: usize, colored: bool) -> Vec<Register> {
    let s = |a, b| Register::Spin { a, b };
    let mut support = vec![
        s(i - 1, t - 2),
        s(i, t - 2),
        s(i - 2, t - 1),
        s(i - 2, t),
        s(i - 1, t - 1),
        s(i, t - 1),
        s(i - 1, t),
        s(i, t),
        s(i + 1, t - 1),
        s(i + 1, t),
        s(i - 1, t + 1),
        s(i, t + 1),
    ];
    if colored {
        support.push(Register::Color { i, t: t - 1 });
        support.push(Register::Color { i, t: t + 1 });
    }
    support
}

fn check_plaquette(params: &ModelParams, i: usize, t: usize) -> Result<()> {
    let size = params.size;
    if i < 2 || i + 1 > size || t < 2 || t + 1 > size || (i + t) % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "({i}, {t}) is not an update plaquette for L = {size}"
        )));
    }
    Ok(())
}

/// The local superposition of the two histories of plaquette `(i, t)` that differ only in
/// the center height. Left and right vertices in the frozen columns count with probability one.
pub fn build_deformation_state(
    params: &ModelParams,
    i: usize,
    t: usize,
    case: UpdateCase,
    color: Option<Color>,
    surround: Surround,
) -> Result<DeformationState> {
    params.validate()?;
    check_plaquette(params, i, t)?;
    let [s1, s2, s3, s4] = surround;
    if s1 == s2 || s3 == s4 {
        return Err(Error::NoDeformation(format!(
            "surrounding spins {surround:?} violate Gauss's law at the side vertices"
        )));
    }
    let c = match (params.colored, color) {
        (true, Some(c @ (Color::Red | Color::Green))) => Some(c),
        (false, None) => None,
        _ => {
            return Err(Error::NoDeformation(format!(
                "color {color:?} does not fit a {} state",
                if params.colored { "colored" } else { "uncolored" }
            )))
        }
    };
    let p = params.p;
    let (bottom, top) = case.ends();
    let left_outer = if s1 { 1 } else { -1 };
    let right_outer = if s3 { 1 } else { -1 };
    let left_frozen = i - 1 == 1;
    let right_frozen = i + 1 == params.size;
    let uncolored_deposit = VertexClass::Deposit.probability(p);
    let deposit = if c.is_some() {
        uncolored_deposit / 2.0
    } else {
        uncolored_deposit
    };
    let weight = |center: i32, deposit: f64| -> f64 {
        side_probability(left_frozen, left_outer, center, p)
            * side_probability(right_frozen, right_outer, center, p)
            * center_probability(bottom, center, p, deposit)
            // The upper vertex sees the center as its starting height.
            * center_probability(center, top, p, deposit)
    };
    let centers = [-1, 1];
    let weights = centers.map(|center| weight(center, deposit));
    let uncolored_products = centers.map(|center| weight(center, uncolored_deposit));
    let branch_colors = |center: i32| -> Option<(Color, Color)> {
        let c = c?;
        let below = if bottom + 2 == center || bottom - 2 == center {
            c
        } else {
            Color::Blank
        };
        let above = if center + 2 == top || center - 2 == top {
            c
        } else {
            Color::Blank
        };
        Some((below, above))
    };
    let mut subspace: Vec<Vec<u8>> = centers
        .iter()
        .map(|&center| local_config(bottom, center, top, surround, branch_colors(center)))
        .collect();
    if let (UpdateCase::Bump, Some(c)) = (case, c) {
        subspace.push(local_config(bottom, 1, top, surround, Some((c, c.swapped()))));
    }
    Ok(DeformationState {
        case,
        color: c,
        surround,
        subspace,
        weights,
        uncolored_products,
    })
}

/// `I_sub - |D><D| / <D|D>` for the deformation state of plaquette `(i, t)`.
pub fn build_update_projector(
    params: &ModelParams,
    i: usize,
    t: usize,
    case: UpdateCase,
    color: Option<Color>,
    surround: Surround,
) -> Result<LocalTerm> {
    let state = build_deformation_state(params, i, t, case, color, surround)?;
    let d = state.subspace.len();
    let amps = state.amplitudes();
    let norm = state.norm_sq();
    let mut matrix = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            let identity = if r == c { 1.0 } else { 0.0 };
            let rank_one = if norm > 0.0 { amps[r] * amps[c] / norm } else { 0.0 };
            matrix[r * d + c] = identity - rank_one;
        }
    }
    let kind = TermKind::Update {
        case,
        color: state.color,
        surround,
        i,
        t,
    };
    let mut term = LocalTerm::new(kind, update_support(i, t, params.colored), 1.0, state.subspace, matrix);
    term.printed_norm = Some(state.uncolored_products.iter().sum());
    term.exact_norm = Some(norm);
    Ok(term)
}

fn single_spin(kind: TermKind, a: usize, b: usize, forbidden: bool, coefficient: f64) -> LocalTerm {
    LocalTerm::diagonal(
        kind,
        vec![Register::Spin { a, b }],
        coefficient,
        vec![(vec![forbidden as u8], 1.0)],
    )
}

fn vertex_spins(i: usize, t: usize) -> Vec<Register> {
    vec![
        Register::Spin { a: i - 1, b: t - 1 },
        Register::Spin { a: i - 1, b: t },
        Register::Spin { a: i, b: t - 1 },
        Register::Spin { a: i, b: t },
    ]
}

/// Boundary spin projectors of the four lattice sides and the below-horizon projectors
/// next to the initial and final rows, all with prefactor `1/L`.
pub fn build_boundary_terms(params: &ModelParams) -> Result<Vec<LocalTerm>> {
    params.validate()?;
    let size = params.size;
    let coefficient = 1.0 / size as f64;
    let mut terms = Vec::new();
    for a in 0..=size {
        terms.push(single_spin(TermKind::Initial, a, 0, false, coefficient));
    }
    // An odd interior site evaporating right after the initial row drops to -1.
    for i in (3..size - 1).step_by(2) {
        terms.push(LocalTerm::diagonal(
            TermKind::Initial,
            vertex_spins(i, 2),
            coefficient,
            vec![(vec![0, 0, 0, 0], 1.0)],
        ));
    }
    for a in 0..=size {
        terms.push(single_spin(TermKind::Final, a, size, true, coefficient));
    }
    // Likewise, a deposit into the final row from -1.
    for i in (3..size - 1).step_by(2) {
        terms.push(LocalTerm::diagonal(
            TermKind::Final,
            vertex_spins(i, size - 1),
            coefficient,
            vec![(vec![1, 1, 1, 1], 1.0)],
        ));
    }
    for b in 0..=size {
        terms.push(single_spin(TermKind::Left, 0, b, !boundary_column_spin(b), coefficient));
    }
    for b in 0..=size {
        terms.push(single_spin(
            TermKind::Right,
            size,
            b,
            !boundary_column_spin(b),
            coefficient,
        ));
    }
    Ok(terms)
}

fn spin_patterns() -> impl Iterator<Item = [u8; 4]> {
    (0..16u8).map(|m| [(m >> 3) & 1, (m >> 2) & 1, (m >> 1) & 1, m & 1])
}

fn pattern_residual(pattern: [u8; 4]) -> i32 {
    let s = |v: u8| if v == 1 { 1 } else { -1 };
    (s(pattern[0]) + s(pattern[1]) - s(pattern[2]) - s(pattern[3])) / 2
}

/// Squared Gauss residual at every vertex.
pub fn build_gauss_term(params: &ModelParams) -> Result<Vec<LocalTerm>> {
    let geometry = Geometry::new(params.size)?;
    Ok(geometry
        .vertices()
        .iter()
        .map(|&(i, t)| {
            let entries = spin_patterns()
                .filter_map(|pattern| {
                    let r = pattern_residual(pattern);
                    (r != 0).then(|| (pattern.to_vec(), (r * r) as f64))
                })
                .collect();
            LocalTerm::diagonal(TermKind::Gauss, vertex_spins(i, t), 1.0, entries)
        })
        .collect())
}

/// Projector onto Gauss-satisfying vertex patterns with the wrong kind of color: a height
/// change colored 0, or no change colored r or g.
pub fn build_color_term(params: &ModelParams) -> Result<Vec<LocalTerm>> {
    let geometry = Geometry::new(params.size)?;
    Ok(geometry
        .vertices()
        .iter()
        .map(|&(i, t)| {
            let mut support = vertex_spins(i, t);
            support.push(Register::Color { i, t });
            let mut entries = Vec::new();
            for pattern in spin_patterns().filter(|&p| pattern_residual(p) == 0) {
                let changes = pattern.iter().all(|&v| v == pattern[0]);
                let forbidden: &[Color] = if changes { &[Color::Blank] } else { &Color::PAIR };
                for &c in forbidden {
                    let mut local = pattern.to_vec();
                    local.push(c.code());
                    entries.push((local, 1.0));
                }
            }
            LocalTerm::diagonal(TermKind::Color, support, 1.0, entries)
        })
        .collect())
}

/// The full term list together with the parameters it was built for.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub params: ModelParams,
    pub terms: Vec<LocalTerm>,
}

/// Update plaquettes in row-major order.
pub fn update_plaquettes(size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for t in 2..size {
        for i in 2..size {
            if (i + t) % 2 == 0 {
                out.push((i, t));
            }
        }
    }
    out
}

pub fn assemble_hamiltonian(params: &ModelParams) -> Result<Hamiltonian> {
    params.validate()?;
    if params.boundary != BoundaryMode::Absorbing {
        return Err(Error::Unsupported(
            "the reflecting-mode state has no local parent Hamiltonian".into(),
        ));
    }
    let mut terms = build_boundary_terms(params)?;
    terms.extend(build_gauss_term(params)?);
    if params.colored {
        terms.extend(build_color_term(params)?);
    }
    let colors: Vec<Option<Color>> = if params.colored {
        Color::PAIR.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    for (i, t) in update_plaquettes(params.size) {
        for case in UpdateCase::ALL {
            for surround in SURROUNDS {
                for &color in &colors {
                    terms.push(build_update_projector(params, i, t, case, color, surround)?);
                }
            }
        }
    }
    Ok(Hamiltonian { params: *params, terms })
}

fn check_compatible(h: &Hamiltonian, state: &SparseState) -> Result<Geometry> {
    let (a, b) = (&h.params, &state.params);
    if a.size != b.size || a.colored != b.colored {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian for L = {} colored = {}, state for L = {} colored = {}",
            a.size, a.colored, b.size, b.colored
        )));
    }
    Geometry::new(a.size)
}

fn decoded(state: &SparseState) -> Result<Vec<(LatticeConfig, f64)>> {
    state.configs()
}

fn apply_one(
    term: &LocalTerm,
    geometry: &Geometry,
    colored: bool,
    configs: &[(LatticeConfig, f64)],
) -> BTreeMap<CanonicalKey, f64> {
    let mut out: BTreeMap<CanonicalKey, f64> = BTreeMap::new();
    for (config, amp) in configs {
        for (image, value) in term.act(config, geometry) {
            *out.entry(canonical_key(&image, colored)).or_insert(0.0) += value * amp;
        }
    }
    out
}

/// `term |state>` for a single term, unnormalized.
pub fn apply_term(h: &Hamiltonian, index: usize, state: &SparseState) -> Result<SparseState> {
    let geometry = check_compatible(h, state)?;
    let term = h
        .terms
        .get(index)
        .ok_or_else(|| Error::InvalidParameter(format!("no term {index}")))?;
    let configs = decoded(state)?;
    Ok(SparseState {
        params: state.params,
        amplitudes: apply_one(term, &geometry, state.params.colored, &configs),
    })
}

/// `H |state>`, unnormalized.
pub fn apply_operator(h: &Hamiltonian, state: &SparseState) -> Result<SparseState> {
    let geometry = check_compatible(h, state)?;
    let configs = decoded(state)?;
    let colored = state.params.colored;
    let parts: Vec<BTreeMap<CanonicalKey, f64>> = h
        .terms
        .par_iter()
        .map(|term| apply_one(term, &geometry, colored, &configs))
        .collect();
    let mut out: BTreeMap<CanonicalKey, f64> = BTreeMap::new();
    for part in parts {
        for (k, v) in part {
            *out.entry(k).or_insert(0.0) += v;
        }
    }
    Ok(SparseState {
        params: state.params,
        amplitudes: out,
    })
}

/// `<state| H |state>`.
pub fn expectation(h: &Hamiltonian, state: &SparseState) -> Result<f64> {
    let image = apply_operator(h, state)?;
    Ok(image.amplitudes.iter().map(|(k, v)| v * state.get(k)).sum())
}

/// `|| term_j |state> ||` for every term, in term order.
pub fn term_residuals(h: &Hamiltonian, state: &SparseState) -> Result<Vec<f64>> {
    let geometry = check_compatible(h, state)?;
    let configs = decoded(state)?;
    let colored = state.params.colored;
    Ok(h.terms
        .par_iter()
        .map(|term| {
            apply_one(term, &geometry, colored, &configs)
                .values()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Configurations satisfying Gauss's law, the boundary spins and color validity, with
/// heights allowed to go negative.
#[derive(Debug, Clone)]
pub struct Sector {
    pub params: ModelParams,
    pub configs: Vec<LatticeConfig>,
    index: HashMap<LatticeConfig, usize>,
}

impl Sector {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn index_of(&self, config: &LatticeConfig) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Coefficients of a state in the sector basis. Keys outside the sector are an error.
    pub fn coordinates(&self, state: &SparseState) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.len()];
        for (config, amp) in state.configs()? {
            let k = self
                .index_of(&config)
                .ok_or_else(|| Error::DimensionMismatch("state has support outside the sector".into()))?;
            x[k] = amp;
        }
        Ok(x)
    }
}

struct SectorWalker<'a> {
    geometry: &'a Geometry,
    colored: bool,
    limit: usize,
    remaining: Vec<Vec<i32>>,
    profiles: Vec<HeightProfile>,
    out: Vec<LatticeConfig>,
}

impl SectorWalker<'_> {
    fn slice(&mut self, t: usize) -> Result<()> {
        let size = self.geometry.size();
        if t > size {
            if self.profiles[size].is_horizon() {
                self.emit()?;
            }
            return Ok(());
        }
        let current = self.profiles[t - 1].clone();
        let sites: Vec<usize> = updatable_sites(size, Parity::for_slice(t)).collect();
        self.expand(t, &sites, 0, current.heights().to_vec())
    }

    fn expand(&mut self, t: usize, sites: &[usize], k: usize, heights: Vec<i32>) -> Result<()> {
        if k == sites.len() {
            let profile = HeightProfile::from_heights_unchecked(heights);
            let feasible = (0..profile.heights().len()).all(|i| profile.excess(i).abs() <= 2 * self.remaining[t][i]);
            if !feasible {
                return Ok(());
            }
            self.profiles.push(profile);
            self.slice(t + 1)?;
            self.profiles.pop();
            return Ok(());
        }
        let i = sites[k];
        let before = &self.profiles[t - 1];
        let shape = SiteShape::classify(before.get(i - 1), before.get(i), before.get(i + 1));
        let moves: &[i32] = match shape {
            SiteShape::Valley => &[0, 2],
            SiteShape::Peak => &[0, -2],
            SiteShape::SlopeUp | SiteShape::SlopeDown => &[0],
        };
        for &delta in moves {
            let mut next = heights.clone();
            next[i] += delta;
            self.expand(t, sites, k + 1, next)?;
        }
        Ok(())
    }

    fn emit(&mut self) -> Result<()> {
        let changed: Vec<usize> = self
            .geometry
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, &(i, t))| self.profiles[t].get(i) != self.profiles[t - 1].get(i))
            .map(|(v, _)| v)
            .collect();
        let choices = if self.colored { 1usize << changed.len() } else { 1 };
        for mask in 0..choices {
            let mut colors = vec![Color::Blank; self.geometry.vertex_count()];
            if self.colored {
                for (bit, &v) in changed.iter().enumerate() {
                    colors[v] = if mask >> bit & 1 == 0 { Color::Red } else { Color::Green };
                }
            }
            self.out
                .push(config_from_profiles(self.geometry, &self.profiles, colors));
            if self.out.len() > self.limit {
                return Err(Error::Capacity {
                    what: "sector states",
                    count: self.out.len(),
                    limit: self.limit,
                });
            }
        }
        Ok(())
    }
}

pub fn enumerate_sector(params: &ModelParams, limit: usize) -> Result<Sector> {
    params.validate()?;
    let size = params.size;
    let geometry = Geometry::new(size)?;
    let remaining = (0..=size)
        .map(|t| {
            (0..size + 2)
                .map(|i| {
                    if i < 2 || i >= size {
                        0
                    } else {
                        (t + 1..=size).filter(|&s| Parity::for_slice(s).matches(i)).count() as i32
                    }
                })
                .collect()
        })
        .collect();
    let mut walker = SectorWalker {
        geometry: &geometry,
        colored: params.colored,
        limit,
        remaining,
        profiles: vec![HeightProfile::horizon(size)?],
        out: Vec::new(),
    };
    walker.slice(1)?;
    let mut configs = walker.out;
    configs.sort();
    let index = configs.iter().enumerate().map(|(k, c)| (c.clone(), k)).collect();
    Ok(Sector {
        params: *params,
        configs,
        index,
    })
}

/// Rows of `H` restricted to the sector, as sorted `(column, value)` lists.
pub fn sector_matrix(h: &Hamiltonian, sector: &Sector) -> Result<Vec<Vec<(usize, f64)>>> {
    let geometry = Geometry::new(h.params.size)?;
    let columns: Vec<Result<BTreeMap<usize, f64>>> = sector
        .configs
        .par_iter()
        .map(|config| {
            let mut column: BTreeMap<usize, f64> = BTreeMap::new();
            for term in &h.terms {
                for (image, value) in term.act(config, &geometry) {
                    let r = sector
                        .index_of(&image)
                        .ok_or_else(|| Error::DimensionMismatch(format!("{} leaves the sector", term.kind)))?;
                    *column.entry(r).or_insert(0.0) += value;
                }
            }
            Ok(column)
        })
        .collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sector.len()];
    for (c, column) in columns.into_iter().enumerate() {
        for (r, v) in column? {
            if v != 0.0 {
                rows[r].push((c, v));
            }
        }
    }
    Ok(rows)
}

/// Lowest eigenpairs of `H` on the constrained sector.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub sector: Sector,
    pub pairs: Eigenpairs,
}

pub fn sector_eigenpairs(h: &Hamiltonian, k: usize, limit: usize) -> Result<SectorSpectrum> {
    let sector = enumerate_sector(&h.params, limit)?;
    let rows = sector_matrix(h, &sector)?;
    let matvec = |x: &[f64], y: &mut [f64]| {
        for (yr, row) in y.iter_mut().zip(&rows) {
            *yr = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    };
    let options = LanczosOptions {
        max_iter: sector.len().min(600),
        ..LanczosOptions::default()
    };
    let pairs = lowest_eigenpairs(sector.len(), k, matvec, &options)?;
    Ok(SectorSpectrum { sector, pairs })
}

/// The `k` lowest eigenvalues of `H` on the constrained sector, ascending.
pub fn sector_spectrum(h: &Hamiltonian, k: usize) -> Result<Vec<f64>> {
    Ok(sector_eigenpairs(h, k, SECTOR_LIMIT)?.pairs.values)
}

/// Plain-text export of the term list.
pub fn export_terms(h: &Hamiltonian) -> String {
    let mut out = String::new();
    let fmt_opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.17e}"));
    for (index, term) in h.terms.iter().enumerate() {
        let _ = writeln!(
            out,
            "term {index} kind={} coefficient={:.17e} printed_norm={} exact_norm={}",
            term.kind,
            term.coefficient,
            fmt_opt(term.printed_norm),
            fmt_opt(term.exact_norm)
        );
        let support: Vec<String> = term.support.iter().map(Register::to_string).collect();
        let _ = writeln!(out, "support {}", support.join(" "));
        for b in &term.basis {
            let values: Vec<String> = b.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "basis {}", values.join(" "));
        }
        let entries: Vec<String> = term.matrix.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "matrix {}", entries.join(" "));
    }
    out
}

/// Keys of a state decoded into configurations, exposed for diagnostics.
pub fn state_configs(state: &SparseState) -> Result<Vec<(LatticeConfig, f64)>> {
    state
        .amplitudes
        .iter()
        .map(|(k, &a)| Ok((key_to_config(k, &state.params)?, a)))
        .collect()
}
