use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use spca::bench::{run_bench, BenchSpec};
use spca::datagen::{
    corrupt, generate_multiscale, mask_scores, score_support_recovery, CorruptionSpec,
    MultiscaleSpec, MultiscaleTruth,
};
use spca::io::{
    read_groups, read_json, read_matrix, trace_records, write_json, write_jsonl, write_matrix_as,
    KappaSource, MatrixFormat, PhaseTimings, RunManifest, SolverKind,
};
use spca::robust::{objective_robust, solve_robust};
use spca::sketch::{randomized_sketch, SketchConfig};
use spca::solver::{self, explained_variance, objective, Initialization};
use spca::{DenseMatrix, RegularizerSpec, SolverConfig};

use crate::{BenchArgs, CorruptArgs, Failure, Format, MultiscaleArgs, Reg, ScoreArgs, SolveArgs};

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl Format {
    fn matrix_format(self) -> MatrixFormat {
        match self {
            Format::Csv => MatrixFormat::Csv,
            Format::Bin => MatrixFormat::Binary,
        }
    }
}

/// Writes `m` as `dir/stem.<ext>` and returns the path.
fn emit(dir: &Path, stem: &str, m: &DenseMatrix, format: Format) -> Result<PathBuf, Failure> {
    let fmt = format.matrix_format();
    let path = dir.join(format!("{stem}.{}", fmt.extension()));
    write_matrix_as(&path, m, fmt)?;
    Ok(path)
}

fn regularizer(args: &SolveArgs) -> Result<RegularizerSpec, Failure> {
    let alpha = || {
        args.alpha
            .ok_or_else(|| usage("--alpha is required for this penalty"))
    };
    let ridge = matches!(args.reg, Reg::L0l2 | Reg::L1l2);
    if args.beta.is_some() && !ridge {
        return Err(usage("--beta only applies to --reg l0l2 or l1l2"));
    }
    if args.groups.is_some() && args.reg != Reg::Group {
        return Err(usage("--groups only applies to --reg group"));
    }
    if args.reg == Reg::None && args.alpha.is_some() {
        return Err(usage("--alpha has no effect with --reg none"));
    }
    let beta = args.beta.unwrap_or(0.0);
    Ok(match args.reg {
        Reg::None => RegularizerSpec::none(),
        Reg::L0 => RegularizerSpec::l0(alpha()?),
        Reg::L1 => RegularizerSpec::l1(alpha()?),
        Reg::L0l2 => RegularizerSpec::l0_ridge(alpha()?, beta),
        Reg::L1l2 => RegularizerSpec::l1_ridge(alpha()?, beta),
        Reg::Group => {
            let path = args
                .groups
                .as_ref()
                .ok_or_else(|| usage("--reg group needs --groups"))?;
            RegularizerSpec::group_lasso(alpha()?, read_groups(path)?)
        }
    })
}

fn solver_config(args: &SolveArgs) -> Result<SolverConfig, Failure> {
    if args.huber_kappa.is_some() && !args.robust {
        return Err(usage("--huber-kappa requires --robust"));
    }
    if args.robust && args.randomized {
        return Err(usage("--robust and --randomized cannot be combined"));
    }
    let mut cfg = SolverConfig::new(args.rank)
        .with_regularizer(regularizer(args)?)
        .with_max_iter(args.max_iter)
        .with_tol(args.tol)
        .with_seed(args.seed);
    cfg.center = !args.no_center;
    cfg.fista = args.fista;
    cfg.huber_kappa = args.huber_kappa;
    if args.random_init {
        cfg.init = Initialization::Random;
    }
    if args.randomized {
        cfg = cfg.randomized(args.oversample, args.power_iters);
    }
    Ok(cfg)
}

pub fn solve(args: &SolveArgs) -> CmdResult {
    let cfg = solver_config(args)?;
    let raw = read_matrix(&args.input)?;
    cfg.validate(raw.rows(), raw.cols())?;
    let x = if cfg.center {
        raw.centered()
    } else {
        raw.clone()
    };
    std::fs::create_dir_all(&args.output_dir)?;

    let start = Instant::now();
    let mut timings = PhaseTimings::default();
    let (kind, res) = if args.robust {
        (SolverKind::Robust, solve_robust(&x, &cfg)?)
    } else if args.randomized {
        let sketch = randomized_sketch(&x, &SketchConfig::from_solver(&cfg))?;
        timings.sketch_secs = start.elapsed().as_secs_f64();
        (SolverKind::Randomized, solver::solve(&sketch, &cfg)?)
    } else {
        (SolverKind::Deterministic, solver::solve(&x, &cfg)?)
    };
    timings.total_secs = start.elapsed().as_secs_f64();
    timings.iterations_secs = timings.total_secs - timings.sketch_secs;

    // the reported objective is recomputed on the full data from the factors written below
    let final_objective = match (&res.s, res.huber_kappa) {
        (Some(s), Some(kappa)) => objective_robust(&x, &res.a, &res.b, s, &cfg.regularizer, kappa)?,
        _ => objective(&x, &res.a, &res.b, &cfg.regularizer)?,
    };

    let dir = &args.output_dir;
    let mut outputs = BTreeMap::new();
    let mut record = |name: &str, path: PathBuf| {
        outputs.insert(name.to_string(), path.display().to_string());
    };
    let z = DenseMatrix::new(x.as_array().dot(res.b.as_array()))?;
    record("loadings", emit(dir, "B", &res.b, args.format)?);
    record(
        "orthonormal",
        emit(dir, "A", &res.a.to_matrix()?, args.format)?,
    );
    record("components", emit(dir, "Z", &z, args.format)?);
    if let Some(s) = &res.s {
        record("outliers", emit(dir, "S", s, args.format)?);
    }
    if cfg.center {
        let means = DenseMatrix::new(raw.column_means().insert_axis(ndarray::Axis(0)))?;
        record("column_means", emit(dir, "means", &means, args.format)?);
    }
    let variance_path = dir.join("variance.json");
    write_json(&variance_path, &explained_variance(&x, &res)?)?;
    record("variance", variance_path);
    let trace_path = dir.join("trace.jsonl");
    write_jsonl(&trace_path, &trace_records(&res))?;
    record("trace", trace_path);
    let manifest_path = dir.join("manifest.json");
    record("manifest", manifest_path.clone());

    let manifest = RunManifest {
        input: args.input.display().to_string(),
        shape: raw.shape(),
        solver: kind,
        config: cfg.clone(),
        outputs,
        timings,
        termination: res.termination.label().to_string(),
        criterion: res.termination,
        iterations: res.iterations,
        step_size: res.step_size,
        initial_objective: res.initial_objective,
        final_objective,
        final_stationarity: res.final_stationarity(),
        huber_kappa: res.huber_kappa,
        kappa_source: res.huber_kappa.map(|_| {
            if cfg.huber_kappa.is_some() {
                KappaSource::User
            } else {
                KappaSource::MadDefault
            }
        }),
    };
    write_json(&manifest_path, &manifest)?;
    println!(
        "{} after {} iterations ({:?}); objective {:.6e}; wrote {}",
        manifest.termination,
        res.iterations,
        res.termination,
        final_objective,
        dir.display()
    );
    Ok(())
}

fn parse_pair(s: &str, what: &str) -> Result<(usize, usize), Failure> {
    let bad = || usage(format!("{what} must look like 40x40, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn gen_multiscale(args: &MultiscaleArgs) -> CmdResult {
    let (h, w) = parse_pair(&args.grid, "--grid")?;
    if args.snapshots == 0 {
        return Err(usage("--snapshots must be positive"));
    }
    let spec =
        MultiscaleSpec::three_modes(h, w, args.snapshots as f64 * args.dt, args.dt, args.seed);
    let (x, truth) = generate_multiscale(&spec)?;
    std::fs::create_dir_all(&args.output_dir)?;
    let path = emit(&args.output_dir, "data", &x, args.format)?;
    write_json(args.output_dir.join("truth.json"), &truth)?;
    write_json(args.output_dir.join("spec.json"), &spec)?;
    println!(
        "wrote {} ({}x{}) and truth.json",
        path.display(),
        x.rows(),
        x.cols()
    );
    Ok(())
}

pub fn gen_corrupt(args: &CorruptArgs) -> CmdResult {
    let x = read_matrix(&args.input)?;
    let x = if args.center { x.centered() } else { x };
    let magnitude = match args.magnitude {
        Some(m) => m,
        None => 10.0 * x.as_array().iter().fold(0.0f64, |m, v| m.max(v.abs())),
    };
    let spec = CorruptionSpec::new(args.fraction, magnitude, args.seed);
    let c = corrupt(&x, &spec)?;
    std::fs::create_dir_all(&args.output_dir)?;
    let data = emit(&args.output_dir, "corrupted", &c.data, args.format)?;
    emit(&args.output_dir, "mask", &c.mask_matrix(), args.format)?;
    write_json(
        args.output_dir.join("corruption.json"),
        &json!({ "spec": spec, "altered": c.altered(), "centered": args.center }),
    )?;
    println!(
        "wrote {} with {} spikes of magnitude {magnitude:.6e}",
        data.display(),
        c.altered()
    );
    Ok(())
}

pub fn score(args: &ScoreArgs) -> CmdResult {
    let mut report = serde_json::Map::new();
    if let (Some(truth), Some(loadings)) = (&args.truth, &args.loadings) {
        let truth: MultiscaleTruth = read_json(truth)?;
        let b = read_matrix(loadings)?;
        let s = score_support_recovery(&truth.supports, &b, args.threshold)?;
        report.insert("min_jaccard".into(), json!(s.min_jaccard()));
        report.insert("support".into(), json!(s));
    }
    if let (Some(mask), Some(outliers)) = (&args.mask, &args.outliers) {
        let mask = read_matrix(mask)?.as_array().mapv(|v| v != 0.0);
        let s = read_matrix(outliers)?;
        report.insert(
            "outliers".into(),
            json!(mask_scores(&s, &mask, args.outlier_threshold)?),
        );
    }
    if report.is_empty() {
        return Err(usage("give --truth/--loadings, --mask/--outliers, or both"));
    }
    let report = serde_json::Value::Object(report);
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("JSON values serialize")
    );
    Ok(())
}

pub fn bench(args: &BenchArgs) -> CmdResult {
    let shapes = args
        .shapes
        .split(',')
        .map(|s| parse_pair(s, "--shapes"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = BenchSpec::new(shapes, args.rank, args.seed);
    spec.repetitions = args.repetitions;
    spec.noise = args.noise;
    let rows = run_bench(&spec)?;
    println!(
        "{:<14} {:>12} {:>10} {:>9} {:>14} {:>6} {:>9}",
        "variant", "shape", "median_s", "std_s", "objective", "iters", "gap"
    );
    for r in &rows {
        let opt =
            |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$e}"));
        println!(
            "{:<14} {:>12} {:>10.3} {:>9.3} {:>14} {:>6} {:>9}",
            r.variant,
            format!("{}x{}", r.rows, r.cols),
            r.median_secs,
            r.std_secs,
            opt(r.final_objective, 6),
            r.iterations.map_or("-".to_string(), |i| i.to_string()),
            opt(r.relative_gap, 1),
        );
        if let Some(e) = &r.error {
            println!("  error: {e}");
        }
    }
    if let Some(path) = &args.output {
        write_json(path, &json!({ "spec": spec, "rows": rows }))?;
    }
    Ok(())
}
