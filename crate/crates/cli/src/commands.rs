use std::fs;
use std::path::Path;

use anyhow::Context;
use depth_refine::bench::{speedup, BenchCase, BenchOptions, BenchResult, MIN_RUNS, MIN_WARMUP};
use depth_refine::io;
use depth_refine::{
    back_project, evaluate, fuse, guided_affinity, min_pool, schedule_c, CameraIntrinsics, Implementation,
    PropagationConfig, ScalarPlane,
};

use crate::args::{
    BackprojectArgs, BenchArgs, BenchImpl, Command, EvalArgs, FuseArgs, GenAffinityArgs, IntrinsicsArgs,
    RefineArgs,
};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag combinations; detected before touching any file.
    Usage(String),
    /// Anything that went wrong reading, computing or writing data.
    Data(anyhow::Error),
}

impl From<depth_refine::Error> for Failure {
    fn from(e: depth_refine::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Refine(a) => refine(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Backproject(a) => backproject(a),
        Command::GenAffinity(a) => gen_affinity(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

fn refine(args: RefineArgs) -> CmdResult {
    if args.anchor && args.input.is_none() {
        return Err(usage("--anchor requires --input with the sparse depth map"));
    }
    if args.coarse.is_none() && args.input.is_none() {
        return Err(usage("refine needs --coarse, --input, or both"));
    }
    let schedule = schedule_c(args.schedule, args.iterations).map_err(|e| usage(e.to_string()))?;

    let field = io::read_affinity(&args.affinity)?;
    let sparse = args.input.as_deref().map(io::read_depth_png).transpose()?;
    let coarse = match (&args.coarse, &sparse) {
        (Some(path), _) => io::read_depth_png(path)?,
        (None, Some(sparse)) => sparse.fill_nearest_valid(),
        (None, None) => unreachable!("checked above"),
    };
    let mut cfg = PropagationConfig::new(schedule);
    if args.anchor {
        cfg = cfg.with_anchor(sparse.expect("checked above"));
    }
    let refined = args.implementation.run(&coarse, &field, &cfg)?;
    io::write_depth_png(&refined, &args.output)?;
    log::info!("refined {:?} with {} -> {}", refined.shape(), cfg.schedule, args.output.display());
    Ok(())
}

fn fuse_cmd(args: FuseArgs) -> CmdResult {
    let d_cd = io::read_depth_png(&args.cd)?;
    let d_dd = io::read_depth_png(&args.dd)?;
    let c_cd = io::read_scalar_plane(&args.conf_cd)?;
    let c_dd = io::read_scalar_plane(&args.conf_dd)?;
    let fused = fuse(&d_cd, &d_dd, &c_cd, &c_dd)?;
    io::write_depth_png(&fused, &args.output)?;
    Ok(())
}

enum IntrinsicsSource<'a> {
    Flags(CameraIntrinsics),
    Calib(&'a Path),
}

fn intrinsics_source(args: &IntrinsicsArgs) -> Result<IntrinsicsSource<'_>, Failure> {
    if let Some(path) = &args.calib {
        return Ok(IntrinsicsSource::Calib(path));
    }
    match (args.fx, args.fy, args.u0, args.v0) {
        (Some(fx), Some(fy), Some(u0), Some(v0)) => CameraIntrinsics::new(fx, fy, u0, v0)
            .map(IntrinsicsSource::Flags)
            .map_err(|e| usage(e.to_string())),
        _ => Err(usage("give either --calib or all of --fx --fy --u0 --v0")),
    }
}

fn backproject(args: BackprojectArgs) -> CmdResult {
    if args.pool == 0 {
        return Err(usage("--pool must be at least 1"));
    }
    let source = intrinsics_source(&args.intrinsics)?;
    let k = match source {
        IntrinsicsSource::Flags(k) => k,
        IntrinsicsSource::Calib(path) => io::read_kitti_calib(path)?,
    };
    let depth = io::read_depth_png(&args.depth)?;
    let pooled = min_pool(&depth, args.pool)?;
    let positions = back_project(&pooled, &k.scaled(args.pool)?);
    io::write_planes(&io::PlaneContainer::new(positions.into_planes())?, &args.output)?;
    Ok(())
}

fn gen_affinity(args: GenAffinityArgs) -> CmdResult {
    if args.kernel < 3 || args.kernel.is_multiple_of(2) {
        return Err(usage(format!("--kernel must be odd and at least 3, got {}", args.kernel)));
    }
    if !(args.sigma.is_finite() && args.sigma > 0.0) {
        return Err(usage(format!("--sigma must be positive, got {}", args.sigma)));
    }
    let img = image::open(&args.image)
        .with_context(|| format!("{}: cannot read guide image", args.image.display()))?
        .to_rgb32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let channel = |c: usize| {
        ScalarPlane::from_fn(h, w, |row, col| img.get_pixel(col as u32, row as u32)[c])
    };
    let guide = [channel(0)?, channel(1)?, channel(2)?];
    let field = guided_affinity(&guide, args.kernel, args.sigma)?;
    io::write_affinity(&field, &args.output)?;
    Ok(())
}

fn eval(args: EvalArgs) -> CmdResult {
    let pred = io::read_depth_png(&args.pred)?;
    let gt = io::read_depth_png(&args.gt)?;
    let report = evaluate(&pred, &gt)?;
    println!("{}", report.to_kv_line());
    println!();
    println!("{report}");
    Ok(())
}

fn bench(args: BenchArgs) -> CmdResult {
    let shape = (args.shape.height, args.shape.width);
    if shape.0 < 8 || shape.1 < 8 {
        return Err(usage(format!("--shape must be at least 8x8, got {}", args.shape)));
    }
    if args.runs < MIN_RUNS || args.warmup < MIN_WARMUP {
        return Err(usage(format!(
            "need --runs >= {MIN_RUNS} and --warmup >= {MIN_WARMUP}"
        )));
    }
    let schedule = schedule_c(args.schedule, args.iterations).map_err(|e| usage(e.to_string()))?;
    let mut opts = BenchOptions {
        runs: args.runs,
        warmup: args.warmup,
        ..BenchOptions::default()
    };
    if let Some(seed) = args.seed {
        opts.seed = seed;
    }

    let case = BenchCase::generate(shape, &schedule, &opts)?;
    let imps: &[Implementation] = match args.implementation {
        BenchImpl::Naive => &[Implementation::Naive],
        BenchImpl::Accelerated => &[Implementation::Accelerated],
        BenchImpl::Both => &[Implementation::Naive, Implementation::Accelerated],
    };
    let mut results: Vec<BenchResult> = Vec::new();
    for &imp in imps {
        let run = case.time(imp, &opts)?;
        println!(
            "{:<12} {} schedule {} ({} iterations): median {:.6} s over {} runs",
            run.result.label, args.shape, run.result.schedule, run.result.iterations, run.result.median_seconds,
            run.result.runs
        );
        results.push(run.result);
    }
    if let [naive, accelerated] = results.as_slice() {
        println!("speedup      {:.2}x", speedup(naive, accelerated));
    }
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&results).context("serializing bench results")?;
        fs::write(path, json + "\n").with_context(|| format!("{}: cannot write", path.display()))?;
    }
    Ok(())
}
