//! Synthetic data with known ground truth.
//!
//! * [`generate_multiscale`]: a video of localized spatial modes oscillating at
//!   different frequencies that switch on and off, flattened to an
//!   `snapshots x pixels` matrix.
//! * [`corrupt`]: additive salt-and-pepper spikes on a random subset of entries.
//! * [`low_rank_synthetic`]: Gaussian factor products plus small dense noise.
//! * [`score_support_recovery`] and [`mask_scores`]: support-recovery metrics.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::matrix::DenseMatrix;

/// When a mode is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    AlwaysOn,
    /// Explicit `[start, end)` on-intervals in seconds.
    Intervals(Vec<(f64, f64)>),
    /// `switches` switch times drawn uniformly over the duration, at least
    /// `min_dwell` seconds apart and from either end.
    Irregular {
        switches: usize,
        min_dwell: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Blob center as (row, col) in pixels.
    pub center: (f64, f64),
    /// Gaussian width in pixels.
    pub sigma: f64,
    /// Pixels farther than this from the center are exactly zero.
    pub radius: f64,
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleSpec {
    pub height: usize,
    pub width: usize,
    pub duration: f64,
    pub dt: f64,
    pub modes: Vec<ModeSpec>,
    pub seed: u64,
}

impl MultiscaleSpec {
    /// 40x40 grid, 150 s at dt = 0.5 s (300 snapshots), three modes.
    pub fn desk(seed: u64) -> Self {
        Self::three_modes(40, 40, 150.0, 0.5, seed)
    }

    /// Three spatially disjoint modes on an arbitrary grid; geometry scales with the grid.
    pub fn three_modes(height: usize, width: usize, duration: f64, dt: f64, seed: u64) -> Self {
        let (h, w) = (height as f64, width as f64);
        let unit = h.min(w);
        let dwell = 10.0 * dt;
        let blob = |cy: f64, cx: f64, amplitude: f64, frequency_hz: f64, schedule| ModeSpec {
            center: (cy * h, cx * w),
            sigma: 0.09 * unit,
            radius: 0.17 * unit,
            amplitude,
            frequency_hz,
            phase: 0.0,
            schedule,
        };
        Self {
            height,
            width,
            duration,
            dt,
            modes: vec![
                blob(
                    0.27,
                    0.27,
                    2.0,
                    0.03,
                    Schedule::Irregular {
                        switches: 2,
                        min_dwell: dwell,
                    },
                ),
                blob(
                    0.30,
                    0.72,
                    1.0,
                    0.11,
                    Schedule::Irregular {
                        switches: 3,
                        min_dwell: dwell,
                    },
                ),
                blob(
                    0.72,
                    0.50,
                    1.0,
                    0.13,
                    Schedule::Irregular {
                        switches: 3,
                        min_dwell: dwell,
                    },
                ),
            ],
            seed,
        }
    }

    pub fn snapshots(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.duration > 0.0) {
            return Err(SpcaError::Config(format!(
                "duration and dt must be positive, got {} and {}",
                self.duration, self.dt
            )));
        }
        let steps = self.duration / self.dt;
        let n = steps.round();
        if (steps - n).abs() > 1e-9 * steps.max(1.0) || n < 1.0 {
            return Err(SpcaError::Config(format!(
                "duration {} is not an integer multiple of dt {}",
                self.duration, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// Exact ground truth of a generated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleTruth {
    pub height: usize,
    pub width: usize,
    pub times: Vec<f64>,
    /// Unit-norm spatial modes, one vector of `height * width` pixels each (row-major pixels).
    pub modes: Vec<Vec<f64>>,
    /// Nonzero pattern of each spatial mode.
    pub supports: Vec<Vec<bool>>,
    /// Amplitude `a_j(t_i)` of each mode at each snapshot, zero while off.
    pub time_courses: Vec<Vec<f64>>,
    /// Whether each mode is switched on at each snapshot.
    pub active: Vec<Vec<bool>>,
}

/// Returns the `snapshots x pixels` data matrix and its ground truth. Each
/// row is `sum_j a_j(t) phi_j` over the active modes.
pub fn generate_multiscale(spec: &MultiscaleSpec) -> Result<(DenseMatrix, MultiscaleTruth)> {
    if spec.modes.is_empty() {
        return Err(SpcaError::Config("at least one mode is required".into()));
    }
    if spec.height == 0 || spec.width == 0 {
        return Err(SpcaError::Config("grid must be nonempty".into()));
    }
    let n = spec.snapshots()?;
    let p = spec.pixels();
    let times: Vec<f64> = (0..n).map(|i| i as f64 * spec.dt).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut modes = Vec::with_capacity(spec.modes.len());
    let mut supports = Vec::with_capacity(spec.modes.len());
    let mut time_courses = Vec::with_capacity(spec.modes.len());
    let mut active = Vec::with_capacity(spec.modes.len());

    for (j, mode) in spec.modes.iter().enumerate() {
        let phi = spatial_mode(spec, mode, j)?;
        supports.push(phi.iter().map(|&v| v != 0.0).collect::<Vec<bool>>());
        let intervals = on_intervals(&mode.schedule, spec.duration, &mut rng)?;
        let on: Vec<bool> = times
            .iter()
            .map(|&t| intervals.iter().any(|&(a, b)| t >= a && t < b))
            .collect();
        let course: Vec<f64> = times
            .iter()
            .zip(&on)
            .map(|(&t, &is_on)| {
                if is_on {
                    mode.amplitude * (2.0 * PI * mode.frequency_hz * t + mode.phase).sin()
                } else {
                    0.0
                }
            })
            .collect();
        modes.push(phi);
        time_courses.push(course);
        active.push(on);
    }

    let mut data = Array2::<f64>::zeros((n, p));
    for (phi, course) in modes.iter().zip(&time_courses) {
        for (i, mut row) in data.axis_iter_mut(Axis(0)).enumerate() {
            let c = course[i];
            if c == 0.0 {
                continue;
            }
            for (dst, &v) in row.iter_mut().zip(phi) {
                *dst += c * v;
            }
        }
    }

    Ok((
        DenseMatrix::new(data)?,
        MultiscaleTruth {
            height: spec.height,
            width: spec.width,
            times,
            modes,
            supports,
            time_courses,
            active,
        },
    ))
}

fn spatial_mode(spec: &MultiscaleSpec, mode: &ModeSpec, j: usize) -> Result<Vec<f64>> {
    if !(mode.sigma > 0.0 && mode.radius > 0.0) {
        return Err(SpcaError::Config(format!(
            "mode {j}: sigma and radius must be positive"
        )));
    }
    let mut phi = Vec::with_capacity(spec.pixels());
    for r in 0..spec.height {
        for c in 0..spec.width {
            let dy = r as f64 - mode.center.0;
            let dx = c as f64 - mode.center.1;
            let d2 = dy * dy + dx * dx;
            phi.push(if d2 <= mode.radius * mode.radius {
                (-d2 / (2.0 * mode.sigma * mode.sigma)).exp()
            } else {
                0.0
            });
        }
    }
    let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SpcaError::Config(format!(
            "mode {j} has no pixels inside the grid"
        )));
    }
    phi.iter_mut().for_each(|v| *v /= norm);
    Ok(phi)
}

fn on_intervals(
    schedule: &Schedule,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, f64)>> {
    match schedule {
        Schedule::AlwaysOn => Ok(vec![(0.0, f64::INFINITY)]),
        Schedule::Intervals(iv) => {
            if iv
                .iter()
                .any(|&(a, b)| a.partial_cmp(&b) != Some(std::cmp::Ordering::Less))
            {
                return Err(SpcaError::Config(
                    "on-intervals must have start < end".into(),
                ));
            }
            Ok(iv.clone())
        }
        Schedule::Irregular {
            switches,
            min_dwell,
        } => {
            let starts_on: bool = rng.random();
            if *switches == 0 {
                return Ok(vec![(0.0, f64::INFINITY)]);
            }
            let needed = (*switches as f64 + 1.0) * min_dwell;
            if needed > duration {
                return Err(SpcaError::Config(format!(
                    "{switches} switches with dwell {min_dwell} do not fit in {duration} s"
                )));
            }
            // rejection sampling of sorted uniform switch times
            let mut times = Vec::new();
            for attempt in 0.. {
                if attempt == 100_000 {
                    return Err(SpcaError::Config(
                        "could not place switch times with the requested dwell".into(),
                    ));
                }
                times = (0..*switches)
                    .map(|_| rng.random_range(0.0..duration))
                    .collect();
                times.sort_by(|a, b| a.total_cmp(b));
                let mut edges = vec![0.0];
                edges.extend(&times);
                edges.push(duration);
                if edges.windows(2).all(|w| w[1] - w[0] >= *min_dwell) {
                    break;
                }
            }
            let mut edges = vec![0.0];
            edges.extend(times);
            edges.push(f64::INFINITY);
            let intervals = edges
                .windows(2)
                .enumerate()
                .filter(|(i, _)| (i % 2 == 0) == starts_on)
                .map(|(_, w)| (w[0], w[1]))
                .collect();
            Ok(intervals)
        }
    }
}

/// Sign law of the planted spikes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `+magnitude` or `-magnitude` with equal probability.
    #[default]
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub fraction: f64,
    pub magnitude: f64,
    #[serde(default)]
    pub polarity: Polarity,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(fraction: f64, magnitude: f64, seed: u64) -> Self {
        Self {
            fraction,
            magnitude,
            polarity: Polarity::Symmetric,
            seed,
        }
    }
}

/// A corrupted copy with the planted spikes and their locations.
#[derive(Debug, Clone)]
pub struct Corruption {
    pub data: DenseMatrix,
    pub mask: Array2<bool>,
    /// `+-magnitude` on masked entries, zero elsewhere.
    pub spikes: Array2<f64>,
}

impl Corruption {
    pub fn altered(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// The mask as a 0/1 matrix.
    pub fn mask_matrix(&self) -> DenseMatrix {
        DenseMatrix::new(self.mask.mapv(|m| if m { 1.0 } else { 0.0 }))
            .expect("0/1 entries are finite")
    }
}

/// Adds `+-magnitude` (random sign) to exactly `round(fraction * n * p)`
/// entries chosen uniformly without replacement.
pub fn corrupt(x: &DenseMatrix, spec: &CorruptionSpec) -> Result<Corruption> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(SpcaError::Config(format!(
            "corruption fraction must lie in [0, 1], got {}",
            spec.fraction
        )));
    }
    if !(spec.magnitude > 0.0 && spec.magnitude.is_finite()) {
        return Err(SpcaError::Config(format!(
            "spike magnitude must be positive, got {}",
            spec.magnitude
        )));
    }
    let (n, p) = x.shape();
    let total = n * p;
    let count = ((spec.fraction * total as f64).round() as usize).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut mask = Array2::from_elem((n, p), false);
    let mut spikes = Array2::<f64>::zeros((n, p));
    let mut idx: Vec<usize> = sample(&mut rng, total, count).into_vec();
    idx.sort_unstable();
    for flat in idx {
        let (i, j) = (flat / p, flat % p);
        let sign = match spec.polarity {
            Polarity::Symmetric => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        mask[[i, j]] = true;
        spikes[[i, j]] = sign * spec.magnitude;
    }
    let data = DenseMatrix::new(x.as_array() + &spikes)?;
    Ok(Corruption { data, mask, spikes })
}

/// Exact-rank `L R` with Gaussian factors plus `noise`-scaled Gaussian noise.
pub fn low_rank_synthetic(
    n: usize,
    p: usize,
    rank: usize,
    noise: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if rank == 0 || rank > n.min(p) {
        return Err(SpcaError::Config(format!(
            "rank {rank} is not in 1..={}",
            n.min(p)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = Array2::<f64>::from_shape_simple_fn((n, rank), || StandardNormal.sample(&mut rng));
    let right = Array2::<f64>::from_shape_simple_fn((rank, p), || StandardNormal.sample(&mut rng));
    let mut x = left.dot(&right);
    if noise > 0.0 {
        x.mapv_inplace(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + noise * e
        });
    }
    DenseMatrix::new(x)
}

/// Precision, recall, F1 and Jaccard of a predicted binary pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
}

impl BinaryScore {
    pub fn from_counts(true_pos: usize, predicted: usize, actual: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        let union = predicted + actual - true_pos;
        Self {
            precision: ratio(true_pos, predicted),
            recall: ratio(true_pos, actual),
            f1: ratio(2 * true_pos, predicted + actual),
            jaccard: ratio(true_pos, union),
        }
    }

    pub fn compare<'a>(
        predicted: impl IntoIterator<Item = &'a bool>,
        truth: impl IntoIterator<Item = &'a bool>,
    ) -> Self {
        let (mut tp, mut pred, mut act) = (0, 0, 0);
        for (&p, &t) in predicted.into_iter().zip(truth) {
            pred += p as usize;
            act += t as usize;
            tp += (p && t) as usize;
        }
        Self::from_counts(tp, pred, act)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScore {
    pub mode: usize,
    /// Loading column matched to this mode.
    pub column: usize,
    pub jaccard: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportScore {
    pub threshold: f64,
    pub modes: Vec<ModeScore>,
}

impl SupportScore {
    pub fn min_jaccard(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.jaccard)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Binarizes each loading column at `|entry| > threshold` and greedily pairs
/// modes with columns by largest Jaccard index.
pub fn score_support_recovery(
    truth: &[Vec<bool>],
    loadings: &DenseMatrix,
    threshold: f64,
) -> Result<SupportScore> {
    if loadings.cols() < truth.len() {
        return Err(SpcaError::Shape(format!(
            "{} loading columns cannot cover {} modes",
            loadings.cols(),
            truth.len()
        )));
    }
    if let Some(t) = truth.iter().find(|t| t.len() != loadings.rows()) {
        return Err(SpcaError::Shape(format!(
            "truth mask has {} entries but loadings have {} rows",
            t.len(),
            loadings.rows()
        )));
    }
    let predicted: Vec<Vec<bool>> = loadings
        .as_array()
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs() > threshold).collect())
        .collect();
    let mut table: Vec<(usize, usize, BinaryScore)> = Vec::new();
    for (m, t) in truth.iter().enumerate() {
        for (c, p) in predicted.iter().enumerate() {
            table.push((m, c, BinaryScore::compare(p, t)));
        }
    }
    // stable sort keeps (mode, column) order among ties
    table.sort_by(|x, y| y.2.jaccard.total_cmp(&x.2.jaccard));
    let mut mode_taken = vec![false; truth.len()];
    let mut col_taken = vec![false; predicted.len()];
    let mut modes = Vec::with_capacity(truth.len());
    for (m, c, score) in table {
        if mode_taken[m] || col_taken[c] {
            continue;
        }
        mode_taken[m] = true;
        col_taken[c] = true;
        modes.push(ModeScore {
            mode: m,
            column: c,
            jaccard: score.jaccard,
            f1: score.f1,
        });
    }
    modes.sort_by_key(|s| s.mode);
    Ok(SupportScore { threshold, modes })
}

/// Scores the support of `outliers` (`|entry| > threshold`) against a planted mask.
pub fn mask_scores(
    outliers: &DenseMatrix,
    truth: &Array2<bool>,
    threshold: f64,
) -> Result<BinaryScore> {
    if outliers.shape() != truth.dim() {
        return Err(SpcaError::Shape(format!(
            "outliers {:?} vs mask {:?}",
            outliers.shape(),
            truth.dim()
        )));
    }
    let predicted = outliers.as_array().mapv(|v| v.abs() > threshold);
    Ok(BinaryScore::compare(predicted.iter(), truth.iter()))
}
