//! Free (unconditioned) growth from the horizon: roughness and midpoint height versus time.
//!
//! One unit of time is one slice. Slice `t` updates the interior sites with `i + t` odd,
//! consuming one uniform draw per updated site exactly as [`advance_slice`] does, so the
//! integer kernel here reproduces the reference dynamics draw for draw.
//!
//! [`advance_slice`]: crate::model::advance_slice

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::entanglement::{fit_power_law, PowerLawFit};
use crate::error::{Error, Result};
use crate::model::{horizon_height, stream_rng, BoundaryMode, HeightProfile, ModelParams, VertexClass};

/// Transient excluded from exponent fits.
pub const FIT_START: usize = 100;
/// Slope of `log W` against `log t` below which the series counts as saturated.
pub const SATURATION_TOLERANCE: f64 = 0.05;
/// Ratio between the ends of the saturation window.
pub const SATURATION_WINDOW: usize = 10;
/// Sample times per decade.
pub const SAMPLES_PER_DECADE: usize = 24;

/// `sqrt((1/L) sum_{i=1..L} (h_i - hbar)^2)` with `hbar` the mean over sites `1..=L`.
pub fn roughness(profile: &HeightProfile) -> f64 {
    let size = profile.size();
    roughness_sq(&profile.heights()[1..=size]).sqrt()
}

fn roughness_sq(heights: &[i32]) -> f64 {
    let n = heights.len() as f64;
    let mean = heights.iter().map(|&h| h as f64).sum::<f64>() / n;
    heights.iter().map(|&h| (h as f64 - mean).powi(2)).sum::<f64>() / n
}

/// Sites of the central half of the system, used for the bulk roughness diagnostic.
fn bulk_range(size: usize) -> std::ops::Range<usize> {
    let quarter = size / 4;
    1 + quarter..size + 1 - quarter
}

/// Log-spaced sample times in `1..=t_max`, always including both ends.
pub fn sample_times(t_max: usize) -> Vec<usize> {
    let mut times = Vec::new();
    let mut k = 0u32;
    loop {
        let t = 10f64.powf(k as f64 / SAMPLES_PER_DECADE as f64).round() as usize;
        if t > t_max {
            break;
        }
        if times.last() != Some(&t) {
            times.push(t);
        }
        k += 1;
    }
    if times.last() != Some(&t_max) {
        times.push(t_max);
    }
    times
}

/// Integer-height kernel of the reflecting dynamics.
#[derive(Debug, Clone)]
pub struct FreeKernel {
    pub heights: Vec<i32>,
    valley_stay: f64,
    deposit_possible: bool,
    peak_stay: f64,
    evaporate_possible: bool,
    slice: usize,
}

impl FreeKernel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if params.boundary != BoundaryMode::Reflecting {
            return Err(Error::Unsupported("free dynamics runs in the reflecting mode".into()));
        }
        let p = params.p;
        Ok(FreeKernel {
            heights: HeightProfile::horizon(params.size)?.heights().to_vec(),
            valley_stay: VertexClass::ValleyNoChange.probability(p),
            deposit_possible: VertexClass::Deposit.probability(p) > 0.0,
            peak_stay: VertexClass::PeakNoChange.probability(p),
            evaporate_possible: VertexClass::Evaporate.probability(p) > 0.0,
            slice: 0,
        })
    }

    pub fn slice(&self) -> usize {
        self.slice
    }

    /// Advances one slice.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.slice += 1;
        let size = self.heights.len() - 2;
        let first = if self.slice % 2 == 1 { 2 } else { 3 };
        let h = &mut self.heights;
        let mut i = first;
        while i < size {
            let u: f64 = rng.random();
            let (left, center, right) = (h[i - 1], h[i], h[i + 1]);
            if left > center && right > center {
                if u >= self.valley_stay && self.deposit_possible {
                    h[i] += 2;
                }
            } else if left < center && right < center && center > 1 && u >= self.peak_stay && self.evaporate_possible {
                h[i] -= 2;
            }
            i += 2;
        }
    }

    pub fn profile(&self) -> HeightProfile {
        HeightProfile::from_heights_unchecked(self.heights.clone())
    }
}

/// Per-sample observables of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub times: Vec<usize>,
    /// Squared roughness.
    pub w_sq: Vec<f64>,
    pub mid: Vec<f64>,
    /// Squared roughness of the central half.
    pub bulk_sq: Vec<f64>,
}

/// Runs one trajectory for `t_max` slices and records observables at `times`.
pub fn run_free_dynamics<R: Rng + ?Sized>(
    params: &ModelParams,
    t_max: usize,
    times: &[usize],
    rng: &mut R,
) -> Result<TrajectorySeries> {
    if times.windows(2).any(|w| w[0] >= w[1]) || times.last().is_some_and(|&t| t > t_max) {
        return Err(Error::InvalidParameter(
            "sample times must increase and end by t_max".into(),
        ));
    }
    let mut kernel = FreeKernel::new(params)?;
    let size = params.size;
    let mid_site = size.div_ceil(2);
    let bulk = bulk_range(size);
    let mut out = TrajectorySeries {
        times: times.to_vec(),
        w_sq: Vec::with_capacity(times.len()),
        mid: Vec::with_capacity(times.len()),
        bulk_sq: Vec::with_capacity(times.len()),
    };
    let mut next = times.iter().peekable();
    for _ in 0..t_max {
        kernel.step(rng);
        if next.peek() == Some(&&kernel.slice) {
            next.next();
            out.w_sq.push(roughness_sq(&kernel.heights[1..=size]));
            out.mid.push(kernel.heights[mid_site] as f64);
            out.bulk_sq.push(roughness_sq(&kernel.heights[bulk.clone()]));
        }
    }
    Ok(out)
}

/// Ensemble-averaged observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub params: ModelParams,
    pub times: Vec<usize>,
    /// `sqrt` of the ensemble mean of the squared roughness.
    pub w: Vec<f64>,
    pub w_stderr: Vec<f64>,
    pub mid: Vec<f64>,
    pub mid_stderr: Vec<f64>,
    /// Roughness of the central half of the system, a diagnostic that ignores the boundary ramps.
    pub bulk_w: Vec<f64>,
    pub n_samples: usize,
}

/// Running mean and spread (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn add(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = (self.m2 / (self.n - 1) as f64).max(0.0);
        (var / self.n as f64).sqrt()
    }
}

/// Runs `n_traj` independent trajectories on streams `0..n_traj` of `params.seed`.
pub fn ensemble(params: &ModelParams, n_traj: usize, t_max: usize) -> Result<ObservableSeries> {
    if n_traj == 0 || t_max == 0 {
        return Err(Error::InvalidParameter(
            "ensemble needs at least one trajectory and one slice".into(),
        ));
    }
    let times = sample_times(t_max);
    let runs: Vec<Result<TrajectorySeries>> = (0..n_traj)
        .into_par_iter()
        .map(|k| run_free_dynamics(params, t_max, &times, &mut stream_rng(params.seed, k as u64)))
        .collect();
    let m = times.len();
    let mut acc = vec![[Moments::default(); 3]; m];
    for run in runs {
        let run = run?;
        for (j, a) in acc.iter_mut().enumerate() {
            a[0].add(run.w_sq[j]);
            a[1].add(run.mid[j]);
            a[2].add(run.bulk_sq[j]);
        }
    }
    let mut series = ObservableSeries {
        params: *params,
        times,
        w: Vec::with_capacity(m),
        w_stderr: Vec::with_capacity(m),
        mid: Vec::with_capacity(m),
        mid_stderr: Vec::with_capacity(m),
        bulk_w: Vec::with_capacity(m),
        n_samples: n_traj,
    };
    for [w_sq, mid, bulk_sq] in acc {
        let w = w_sq.mean.sqrt();
        series.w.push(w);
        // Delta method for the square root.
        series
            .w_stderr
            .push(if w > 0.0 { w_sq.stderr() / (2.0 * w) } else { 0.0 });
        series.mid.push(mid.mean);
        series.mid_stderr.push(mid.stderr());
        series.bulk_w.push(bulk_sq.mean.sqrt());
    }
    Ok(series)
}

fn window_fit(times: &[usize], values: &[f64], from: usize, to: usize) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= from && t <= to)
        .map(|(&t, &v)| (t as f64, v))
        .unzip();
    fit_power_law(&xs, &ys)
}

/// First sample time `t` at which the log-log slope of `W` over `[t, window * t]` falls
/// below `tolerance`. `None` when no complete window saturates.
pub fn saturation_time(series: &ObservableSeries, window: usize, tolerance: f64) -> Result<Option<usize>> {
    let t_max = *series.times.last().ok_or_else(|| Error::Fit("empty series".into()))?;
    if window < 2 || window > t_max {
        return Err(Error::Fit(format!(
            "saturation window {window} does not fit a series ending at {t_max}"
        )));
    }
    for &t in &series.times {
        if t * window > t_max {
            break;
        }
        let Ok(fit) = window_fit(&series.times, &series.w, t, t * window) else {
            continue;
        };
        if fit.exponent.abs() < tolerance {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Power-law fits of the growth observables over one time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentReport {
    pub window: (usize, usize),
    pub saturation: Option<usize>,
    pub w: PowerLawFit,
    pub mid: PowerLawFit,
    pub bulk_w: PowerLawFit,
}

/// Fit window `[FIT_START, min(T_sat / 4, t_max)]`.
pub fn default_fit_window(series: &ObservableSeries) -> Result<((usize, usize), Option<usize>)> {
    let t_max = *series.times.last().ok_or_else(|| Error::Fit("empty series".into()))?;
    let saturation = saturation_time(series, SATURATION_WINDOW.min(t_max), SATURATION_TOLERANCE)?;
    let end = saturation.map_or(t_max, |t| (t / 4).min(t_max));
    Ok(((FIT_START, end), saturation))
}

pub fn exponent_report(series: &ObservableSeries, fit_window: (usize, usize)) -> Result<ExponentReport> {
    let (from, to) = fit_window;
    let t_max = *series.times.last().ok_or_else(|| Error::Fit("empty series".into()))?;
    if from >= to || to > t_max {
        return Err(Error::Fit(format!(
            "fit window [{from}, {to}] outside the series [1, {t_max}]"
        )));
    }
    let saturation = saturation_time(series, SATURATION_WINDOW.min(t_max), SATURATION_TOLERANCE)?;
    Ok(ExponentReport {
        window: fit_window,
        saturation,
        w: window_fit(&series.times, &series.w, from, to)?,
        mid: window_fit(&series.times, &series.mid, from, to)?,
        bulk_w: window_fit(&series.times, &series.bulk_w, from, to)?,
    })
}

/// Mean roughness over the samples at or after saturation, or over the last decade when
/// the series never saturates.
pub fn saturated_roughness(series: &ObservableSeries) -> Result<f64> {
    let t_max = *series.times.last().ok_or_else(|| Error::Fit("empty series".into()))?;
    let start = saturation_time(series, SATURATION_WINDOW.min(t_max), SATURATION_TOLERANCE)?
        .unwrap_or(t_max / SATURATION_WINDOW);
    let tail: Vec<f64> = series
        .times
        .iter()
        .zip(&series.w)
        .filter(|(&t, _)| t >= start)
        .map(|(_, &w)| w)
        .collect();
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// One CSV row of a scaling series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub t: usize,
    #[serde(rename = "W_mean")]
    pub w_mean: f64,
    #[serde(rename = "W_stderr")]
    pub w_stderr: f64,
    pub mid_mean: f64,
    pub mid_stderr: f64,
    pub n: usize,
}

impl ObservableSeries {
    pub fn rows(&self) -> Vec<ScalingRow> {
        (0..self.times.len())
            .map(|j| ScalingRow {
                t: self.times[j],
                w_mean: self.w[j],
                w_stderr: self.w_stderr[j],
                mid_mean: self.mid[j],
                mid_stderr: self.mid_stderr[j],
                n: self.n_samples,
            })
            .collect()
    }

    /// Height of the middle site at the horizon.
    pub fn initial_mid(&self) -> i32 {
        horizon_height(self.params.size.div_ceil(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{advance_slice, Parity, Surface};

    fn params(size: usize, p: f64) -> ModelParams {
        ModelParams::new(size, p, BoundaryMode::Reflecting, false, 11).unwrap()
    }

    #[test]
    fn roughness_examples() {
        let horizon = HeightProfile::horizon(3).unwrap();
        assert!((roughness(&horizon) - (2.0f64 / 9.0).sqrt()).abs() < 1e-15);
        let raised = HeightProfile::from_heights(vec![0, 1, 2, 1, 0]).unwrap();
        let mean = 4.0 / 3.0;
        let want = (((1.0 - mean) * (1.0 - mean) * 2.0 + (2.0 - mean) * (2.0 - mean)) / 3.0f64).sqrt();
        assert!((roughness(&raised) - want).abs() < 1e-15);
        assert_eq!(roughness_sq(&[3, 3, 3]), 0.0);
    }

    #[test]
    fn sample_times_are_log_spaced() {
        let t = sample_times(1000);
        assert_eq!(t[0], 1);
        assert_eq!(*t.last().unwrap(), 1000);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert!(t.len() > 50 && t.len() < 80);
    }

    #[test]
    fn kernel_matches_reference_dynamics() {
        for p in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let pr = params(21, p);
            let mut kernel = FreeKernel::new(&pr).unwrap();
            let mut surface = Surface::horizon(21).unwrap();
            let mut a = stream_rng(5, 0);
            let mut b = stream_rng(5, 0);
            for t in 1..=400 {
                kernel.step(&mut a);
                surface = advance_slice(&surface, Parity::for_slice(t), &mut b, &pr).0;
                assert_eq!(kernel.profile(), surface.profile, "p={p} t={t}");
            }
        }
    }

    #[test]
    fn p_zero_stays_at_horizon() {
        let pr = params(31, 0.0);
        let s = ensemble(&pr, 3, 200).unwrap();
        let w0 = roughness(&HeightProfile::horizon(31).unwrap());
        assert!(s.w.iter().all(|&w| (w - w0).abs() < 1e-12));
        assert!(s.mid.iter().all(|&m| m == s.initial_mid() as f64));
        assert!(s.w_stderr.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let pr = params(41, 0.7);
        assert_eq!(ensemble(&pr, 4, 300).unwrap(), ensemble(&pr, 4, 300).unwrap());
    }

    #[test]
    fn absorbing_rejected() {
        let pr = params(11, 0.5).with_boundary(BoundaryMode::Absorbing);
        assert!(matches!(ensemble(&pr, 1, 10), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fit_window_checked() {
        let s = ensemble(&params(11, 0.5), 2, 50).unwrap();
        assert!(exponent_report(&s, (100, 40)).is_err());
        assert!(saturation_time(&s, 100, 0.05).is_err());
    }
}
