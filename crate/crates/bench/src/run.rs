use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use lbvh::cloud_io;
use lbvh::oracle::{compare_knn, compare_spatial, Mismatch};
use lbvh::{default_radius, Allocation, Bvh, CloudSpec, KnnQuery, Point, QueryOptions, ResultSet, SpatialQuery};

use crate::cli::{
    Alloc, BenchArgs, Command, ExperimentArgs, Format, GenerateArgs, QueryKind, ScaleArgs, Switch, VerifyArgs,
};
use crate::report::{BenchReport, CountStats, PhaseTimes, CSV_HEADER};

/// Largest source cloud `verify` accepts; the oracle is O(m n).
pub const VERIFY_MAX_M: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    Io = 2,
    Mismatch = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: ExitCode::Usage,
            message: message.into(),
        }
    }

    fn io(message: impl fmt::Display) -> Self {
        Failure {
            code: ExitCode::Io,
            message: message.to_string(),
        }
    }
}

impl From<lbvh::Error> for Failure {
    fn from(e: lbvh::Error) -> Self {
        Failure {
            code: ExitCode::Usage,
            message: e.to_string(),
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Bench(args) => cmd_bench(&args, out),
        Command::Scale(args) => cmd_scale(&args, out),
        Command::Verify(args) => cmd_verify(&args, out),
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let count = usize::try_from(args.count).map_err(|_| Failure::usage("count too large"))?;
    let points = CloudSpec {
        kind: args.cloud,
        count,
        seed: args.seed,
    }
    .generate();
    cloud_io::save(&args.output, &points).map_err(|e| Failure::io(format!("{}: {e}", args.output.display())))
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct Plan {
    pub args: ExperimentArgs,
    pub n: usize,
    pub radius: f32,
    pub options: QueryOptions,
}

impl Plan {
    pub fn new(args: &ExperimentArgs) -> Result<Self, Failure> {
        let n = args.n.unwrap_or(args.m);
        if args.m == 0 || n == 0 {
            return Err(Failure::usage("--m and --n must be at least 1"));
        }
        if args.reps == 0 {
            return Err(Failure::usage("--reps must be at least 1"));
        }
        if args.k == 0 {
            return Err(Failure::usage("--k must be at least 1"));
        }
        let allocation = match (args.alloc, args.buffer_size) {
            (Alloc::OnePass, Some(0)) => return Err(Failure::usage("--buffer-size must be at least 1")),
            (Alloc::OnePass, Some(buffer_size)) => Allocation::OnePass { buffer_size },
            (Alloc::OnePass, None) => return Err(Failure::usage("--alloc 1p requires --buffer-size")),
            (Alloc::TwoPass, Some(_)) => return Err(Failure::usage("--buffer-size only applies to --alloc 1p")),
            (Alloc::TwoPass, None) => Allocation::TwoPass,
        };
        let radius = args.radius.unwrap_or_else(|| default_radius(args.k));
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Failure::usage(format!("invalid --radius {radius}")));
        }
        let options = QueryOptions {
            allocation,
            sort_queries: args.sort_queries == Switch::On,
        };
        Ok(Plan {
            args: args.clone(),
            n,
            radius,
            options,
        })
    }

    pub fn source_spec(&self) -> CloudSpec {
        CloudSpec {
            kind: self.args.source,
            count: self.args.m,
            seed: self.args.seed,
        }
    }

    pub fn target_spec(&self) -> CloudSpec {
        CloudSpec {
            kind: self.args.target,
            count: self.n,
            seed: self.args.seed.wrapping_add(1),
        }
    }
}

pub enum Queries {
    Spatial(Vec<SpatialQuery>),
    Knn(Vec<KnnQuery>),
}

impl Queries {
    pub fn new(plan: &Plan, targets: &[Point]) -> Result<Self, Failure> {
        Ok(match plan.args.kind {
            QueryKind::Spatial => Queries::Spatial(
                targets
                    .iter()
                    .map(|&c| SpatialQuery::new(c, plan.radius))
                    .collect::<lbvh::Result<_>>()?,
            ),
            QueryKind::Knn => Queries::Knn(
                targets
                    .iter()
                    .map(|&c| KnnQuery::new(c, plan.args.k))
                    .collect::<lbvh::Result<_>>()?,
            ),
        })
    }

    /// Runs the batch; the flag reports a one-pass fallback.
    pub fn run(&self, tree: &Bvh, options: &QueryOptions) -> lbvh::Result<(ResultSet, bool)> {
        match self {
            Queries::Spatial(q) => tree.query_spatial(q, options),
            Queries::Knn(q) => Ok((tree.query_knn(q, options.sort_queries)?, false)),
        }
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    if threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start {threads} threads: {e}")))
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Timed run of one configuration on `threads` workers.
pub fn run_bench(plan: &Plan, threads: usize) -> Result<BenchReport, Failure> {
    let pool = pool(threads)?;
    pool.install(|| {
        let start = Instant::now();
        let sources = plan.source_spec().generate();
        let targets = plan.target_spec().generate();
        let generate = start.elapsed();
        let queries = Queries::new(plan, &targets)?;

        let mut build = PhaseTimes::default();
        let mut query = PhaseTimes::default();
        let mut last = None;
        // The first repetition warms caches and the pool and is not recorded.
        for rep in 0..=plan.args.reps {
            let t = Instant::now();
            let tree = Bvh::from_points(&sources)?;
            let build_time = t.elapsed();
            let t = Instant::now();
            let (results, fell_back) = queries.run(&tree, &plan.options)?;
            let query_time = t.elapsed();
            if rep > 0 {
                build.0.push(build_time);
                query.0.push(query_time);
            }
            last = Some((results, fell_back));
        }
        let (results, fallback) = last.expect("at least one repetition");
        Ok(BenchReport {
            config: plan.args.clone(),
            n: plan.n,
            radius: plan.radius,
            threads,
            generate,
            build,
            query,
            counts: CountStats::from_offsets(results.offsets()),
            fallback,
        })
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(Failure::io)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let plan = Plan::new(&args.experiment)?;
    let report = run_bench(&plan, args.threads.unwrap_or_else(default_threads))?;
    match plan.args.format {
        Format::Csv => emit(out, &format!("{CSV_HEADER}\n{}\n", report.csv_row())),
        Format::Pretty => emit(out, &report.pretty()),
    }
}

pub fn cmd_scale(args: &ScaleArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let plan = Plan::new(&args.experiment)?;
    if args.threads.is_empty() {
        return Err(Failure::usage("--threads needs at least one value"));
    }
    let reports = args
        .threads
        .iter()
        .map(|&t| run_bench(&plan, t))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = reports.iter().find(|r| r.threads == 1).unwrap_or(&reports[0]);
    let (b0, q0) = (baseline.build.median(), baseline.query.median());
    let speedup = |base: Duration, d: Duration| {
        if d.is_zero() {
            f64::INFINITY
        } else {
            base.as_secs_f64() / d.as_secs_f64()
        }
    };
    let mut text = String::new();
    match plan.args.format {
        Format::Csv => {
            text.push_str(CSV_HEADER);
            text.push_str(",build_speedup,query_speedup\n");
            for r in &reports {
                text.push_str(&format!(
                    "{},{:.2},{:.2}\n",
                    r.csv_row(),
                    speedup(b0, r.build.median()),
                    speedup(q0, r.query.median())
                ));
            }
        }
        Format::Pretty => {
            for r in &reports {
                text.push_str(&r.pretty());
                text.push_str(&format!(
                    "speedup     build {:.2}x, query {:.2}x\n\n",
                    speedup(b0, r.build.median()),
                    speedup(q0, r.query.median())
                ));
            }
        }
    }
    emit(out, &text)
}

/// Mismatches between the library and the brute-force oracle for `plan`.
pub fn verify_plan(plan: &Plan, threads: usize, corrupt_tree: bool) -> Result<(usize, Vec<Mismatch>), Failure> {
    pool(threads)?.install(|| {
        let sources = plan.source_spec().generate();
        let targets = plan.target_spec().generate();
        let mut tree = Bvh::from_points(&sources)?;
        if corrupt_tree {
            tree.corrupt_for_testing();
        }
        let queries = Queries::new(plan, &targets)?;
        let (results, _) = queries.run(&tree, &plan.options)?;
        let mismatches = match &queries {
            Queries::Spatial(q) => compare_spatial(&sources, q, &results),
            Queries::Knn(q) => compare_knn(&sources, q, &results),
        };
        Ok((targets.len(), mismatches))
    })
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let plan = Plan::new(&args.experiment)?;
    if plan.args.m > VERIFY_MAX_M {
        return Err(Failure::usage(format!("verify supports --m up to {VERIFY_MAX_M}")));
    }
    let (queries, mismatches) = verify_plan(&plan, args.threads.unwrap_or_else(default_threads), args.corrupt_tree)?;
    let mut text = format!("queries: {queries} mismatches: {}\n", mismatches.len());
    for m in mismatches.iter().take(5) {
        text.push_str(&format!("  query {}: {}\n", m.query, m.detail));
    }
    emit(out, &text)?;
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: ExitCode::Mismatch,
            message: format!("{} mismatching queries", mismatches.len()),
        })
    }
}
