//! Deterministic versus randomized timing on seeded low-rank synthetics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::low_rank_synthetic;
use crate::error::{Result, SpcaError};
use crate::matrix::DenseMatrix;
use crate::prox::RegularizerSpec;
use crate::sketch::solve_randomized;
use crate::solver::{objective, solve, SolverConfig, SpcaResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchVariant {
    pub name: String,
    pub randomized: bool,
}

impl BenchVariant {
    pub fn deterministic() -> Self {
        Self {
            name: "deterministic".into(),
            randomized: false,
        }
    }

    pub fn randomized() -> Self {
        Self {
            name: "randomized".into(),
            randomized: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub shapes: Vec<(usize, usize)>,
    pub intrinsic_rank: usize,
    pub rank: usize,
    pub repetitions: usize,
    pub variants: Vec<BenchVariant>,
    /// Standard deviation of the dense noise added to the exact-rank product.
    pub noise: f64,
    pub regularizer: RegularizerSpec,
    pub oversample: usize,
    pub power_iters: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(shapes: Vec<(usize, usize)>, rank: usize, seed: u64) -> Self {
        Self {
            shapes,
            intrinsic_rank: rank,
            rank,
            repetitions: 3,
            variants: vec![BenchVariant::deterministic(), BenchVariant::randomized()],
            noise: 1e-6,
            regularizer: RegularizerSpec::l1(1e-3),
            oversample: 10,
            power_iters: 2,
            max_iter: 1000,
            tol: 1e-5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 3 {
            return Err(SpcaError::Config(format!(
                "timings need at least 3 repetitions, got {}",
                self.repetitions
            )));
        }
        if self.variants.is_empty() || self.shapes.is_empty() {
            return Err(SpcaError::Config("nothing to benchmark".into()));
        }
        let l = self.rank + self.oversample;
        for &(n, p) in &self.shapes {
            if self.rank == 0 || self.rank > n.min(p) || self.intrinsic_rank > n.min(p) {
                return Err(SpcaError::Config(format!("ranks do not fit shape {n}x{p}")));
            }
            if self.variants.iter().any(|v| v.randomized) && l > n.min(p) {
                return Err(SpcaError::Config(format!(
                    "sketch dimension {l} exceeds min({n}, {p})"
                )));
            }
        }
        Ok(())
    }

    fn config(&self, randomized: bool) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.rank)
            .with_regularizer(self.regularizer.clone())
            .with_max_iter(self.max_iter)
            .with_tol(self.tol)
            .with_seed(self.seed);
        cfg.center = false;
        if randomized {
            cfg = cfg.randomized(self.oversample, self.power_iters);
        }
        cfg
    }
}

/// One (variant, shape) cell of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    pub rows: usize,
    pub cols: usize,
    pub times_secs: Vec<f64>,
    pub median_secs: f64,
    pub std_secs: f64,
    /// Objective of the final factors on the full matrix.
    pub final_objective: Option<f64>,
    pub iterations: Option<usize>,
    /// `|f - f_first| / max(1, |f_first|)` against the first variant on this shape.
    pub relative_gap: Option<f64>,
    pub error: Option<String>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn run_once(x: &DenseMatrix, cfg: &SolverConfig) -> Result<SpcaResult> {
    if cfg.randomized {
        solve_randomized(x, cfg)
    } else {
        solve(x, cfg)
    }
}

/// Runs every variant on every shape, sequentially.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let mut table = Vec::new();
    for (s, &(n, p)) in spec.shapes.iter().enumerate() {
        let x = low_rank_synthetic(n, p, spec.intrinsic_rank, spec.noise, spec.seed + s as u64)?;
        let mut baseline: Option<f64> = None;
        for variant in &spec.variants {
            let cfg = spec.config(variant.randomized);
            let mut times = Vec::with_capacity(spec.repetitions);
            let mut outcome: Option<std::result::Result<SpcaResult, String>> = None;
            for _ in 0..spec.repetitions {
                let start = Instant::now();
                let res = run_once(&x, &cfg);
                times.push(start.elapsed().as_secs_f64());
                let failed = res.is_err();
                outcome = Some(res.map_err(|e| e.to_string()));
                if failed {
                    break;
                }
            }
            let mut row = BenchRow {
                variant: variant.name.clone(),
                rows: n,
                cols: p,
                median_secs: median(&times),
                std_secs: std_dev(&times),
                times_secs: times,
                final_objective: None,
                iterations: None,
                relative_gap: None,
                error: None,
            };
            match outcome.expect("at least one repetition") {
                Ok(res) => {
                    let f = objective(&x, &res.a, &res.b, &spec.regularizer)?;
                    row.final_objective = Some(f);
                    row.iterations = Some(res.iterations);
                    let base = *baseline.get_or_insert(f);
                    row.relative_gap = Some((f - base).abs() / base.abs().max(1.0));
                }
                Err(msg) => row.error = Some(msg),
            }
            log::info!(
                "bench {} {}x{}: median {:.3}s",
                row.variant,
                n,
                p,
                row.median_secs
            );
            table.push(row);
        }
    }
    Ok(table)
}
