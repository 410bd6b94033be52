mod manifest;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use tzlab_core::geometry::Window;
use tzlab_core::ifs::{certify_ssc, GapCertificate};
use tzlab_core::io::{parse_ifs_spec, parse_region, write_cloud_csv};
use tzlab_core::limit_models::{enumerate_limit_models, LimitModelOptions, DEFAULT_Q_MAX};
use tzlab_core::measure::{density_profile, discrete_measure, region_mass, regularity_scan, DEPTH_CAP};
use tzlab_core::verify::{verify_support_identity, verify_tan_formula, TangentRequest};
use tzlab_core::zoom::{view_cloud, zoom_window};
use tzlab_core::{Coding, Error, IfsSystem};

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "tzlab",
    version,
    about = "Zoom dynamics, limit models and tangent measures of self-similar sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// IFS spec (JSON)
    #[arg(long)]
    ifs: PathBuf,
    /// Where to write the run manifest (defaults next to --out)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Deepest level tried by the separation certifier
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Similarity dimension from the Moran equation
    Dim {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
    },
    /// Certify strong separation by a cylinder gap search
    CertifySsc {
        #[command(flatten)]
        common: Common,
    },
    /// Weighted sample of the natural measure
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified normalized mass of a region
    Measure {
        #[command(flatten)]
        common: Common,
        /// `box lo.. hi..` or `ball c.. r`
        #[arg(long)]
        region: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Exact view of a zoomed window and its point cloud
    Zoom {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coding: String,
        #[arg(long)]
        w: usize,
        #[arg(long = "N")]
        n: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate limit models along residue classes of zoom depth
    LimitModels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coding: String,
        #[arg(long = "N", default_value_t = 1.0)]
        n: f64,
        /// Comma-separated probe scales in [1, 1/β_min)
        #[arg(long, default_value = "1.0")]
        alphas: String,
        /// `a..b` or `a..=b`
        #[arg(long, default_value = "0..32")]
        depths: String,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long)]
        cluster_tol: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_Q_MAX)]
        q_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tangent-measure and support harnesses
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
    /// Density ratios at a point, or a regularity scan over random points
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "samples")]
        coding: Option<String>,
        /// Comma-separated radii, decreasing
        #[arg(long)]
        radii: Option<String>,
        /// Run a regularity scan with this many random points instead
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone)]
struct HarnessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    coding: String,
    #[arg(long = "N", default_value_t = 1.0)]
    n: f64,
    #[arg(long, default_value_t = 0)]
    residue: usize,
    /// Compare against the model of another residue (control)
    #[arg(long)]
    model_residue: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
}

#[derive(Subcommand, Debug)]
enum VerifyCommand {
    /// Fit tangent masses against the limit model's masses
    Tan {
        #[command(flatten)]
        args: HarnessArgs,
        #[arg(long, default_value_t = 3)]
        grid: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hausdorff distance between a tangent support and its limit model
    Support {
        #[command(flatten)]
        args: HarnessArgs,
        #[arg(long, default_value = "1..13")]
        depths: String,
    },
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
struct CertificationFailure(String);

impl std::fmt::Display for CertificationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CertificationFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let certification = e.downcast_ref::<CertificationFailure>().is_some()
                || matches!(
                    e.downcast_ref::<Error>(),
                    Some(Error::SscNotCertified { .. } | Error::MissingCertificate)
                );
            ExitCode::from(if certification { 2 } else { 1 })
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("TZLAB_THREADS") {
        let n: usize = value
            .parse()
            .map_err(|_| anyhow!("TZLAB_THREADS must be a positive integer, got '{value}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

struct Session {
    manifest: RunManifest,
    started: Instant,
    manifest_path: Option<PathBuf>,
}

impl Session {
    fn new(common: &Common, default_manifest: Option<PathBuf>) -> anyhow::Result<Self> {
        let mut manifest = RunManifest::new(std::env::args().collect());
        manifest.hash_ifs(&common.ifs)?;
        manifest.tol("certify_max_depth", common.max_depth);
        manifest.tol("depth_cap", DEPTH_CAP);
        Ok(Session {
            manifest,
            started: Instant::now(),
            manifest_path: common.manifest.clone().or(default_manifest),
        })
    }

    fn finish(mut self) -> anyhow::Result<()> {
        if let Some(path) = &self.manifest_path {
            self.manifest.wall_time_s = Some(self.started.elapsed().as_secs_f64());
            let text = serde_json::to_string_pretty(&self.manifest)?;
            std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn load(common: &Common) -> anyhow::Result<IfsSystem> {
    Ok(parse_ifs_spec(&common.ifs)?)
}

fn load_certified(common: &Common) -> anyhow::Result<IfsSystem> {
    let system = load(common)?;
    match certify_ssc(&system, common.max_depth) {
        Ok(cert) => Ok(system.with_certificate(cert)),
        Err(Error::SscNotCertified { depth, certificate }) => Err(CertificationFailure(format!(
            "strong separation not certified by depth {depth}: {}",
            certificate_json(&certificate)
        ))
        .into()),
        Err(e) => Err(e.into()),
    }
}

fn certificate_json(cert: &GapCertificate) -> String {
    serde_json::to_string(cert).expect("certificate serializes")
}

fn parse_coding(text: &str) -> anyhow::Result<Coding> {
    text.parse::<Coding>().map_err(|e| anyhow!("--coding: {e}"))
}

fn parse_range(text: &str) -> anyhow::Result<Range<usize>> {
    let (a, b, inclusive) = if let Some((a, b)) = text.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = text.split_once("..") {
        (a, b, false)
    } else {
        bail!("range '{text}' must look like a..b or a..=b");
    };
    let a: usize = a.trim().parse().with_context(|| format!("range start in '{text}'"))?;
    let b: usize = b.trim().parse().with_context(|| format!("range end in '{text}'"))?;
    let end = if inclusive { b + 1 } else { b };
    if end <= a {
        bail!("range '{text}' is empty");
    }
    Ok(a..end)
}

fn parse_list(text: &str, flag: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("{flag}: bad number '{t}'"))
        })
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_with_hash<T: Serialize>(session: &Session, body: &T) -> anyhow::Result<String> {
    let value = json!({
        "manifest_sha256": session.manifest.hash(),
        "report": body,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Dim { common, tol } => {
            let mut session = Session::new(&common, None)?;
            session.manifest.tol("tol", tol);
            let system = load(&common)?;
            let ratios: Vec<f64> = system.maps().iter().map(|m| m.ratio()).collect();
            println!("{:.12}", tzlab_core::moran_dimension(&ratios, tol));
            session.finish()
        }
        Command::CertifySsc { common } => {
            let session = Session::new(&common, None)?;
            let system = load(&common)?;
            match certify_ssc(&system, common.max_depth) {
                Ok(cert) => {
                    println!("{}", certificate_json(&cert));
                    session.finish()
                }
                Err(Error::SscNotCertified { depth, certificate }) => {
                    println!("{}", certificate_json(&certificate));
                    session.finish()?;
                    Err(CertificationFailure(format!("strong separation not certified by depth {depth}")).into())
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Sample { common, eps, out } => {
            let mut session = Session::new(&common, out.as_deref().map(sidecar))?;
            session.manifest.tol("eps", eps);
            let system = load(&common)?;
            let dm = discrete_measure(&system, eps)?;
            let mut buf = Vec::new();
            write_cloud_csv(&mut buf, &dm.points, Some(&dm.weights), &[session.manifest.header()])?;
            emit(out.as_deref(), std::str::from_utf8(&buf)?)?;
            session.finish()
        }
        Command::Measure { common, region, tol } => {
            let mut session = Session::new(&common, None)?;
            session.manifest.tol("tol", tol);
            let system = load(&common)?;
            let region = parse_region(&region, system.dim())?;
            let m = region_mass(&system, &region, tol)?;
            println!("{} {} {}", m.lo, m.hi, m.cylinders_used);
            session.finish()
        }
        Command::Zoom {
            common,
            coding,
            w,
            n,
            eps,
            out,
        } => {
            let mut session = Session::new(&common, out.as_deref().map(sidecar))?;
            session.manifest.tol("eps", eps);
            session.manifest.tol("N", n);
            let system = load_certified(&common)?;
            let x = parse_coding(&coding)?;
            let view = zoom_window(&system, &x, w, n)?;
            let cloud = view_cloud(&system, &view, eps)?;
            let comments = vec![
                session.manifest.header(),
                format!(
                    "view scale={} base={} depth_used={} window_N={} rot={}",
                    view.scale,
                    view.base,
                    view.depth_used,
                    n,
                    serde_json::to_string(&view.rot)?
                ),
            ];
            let mut buf = Vec::new();
            write_cloud_csv(&mut buf, &cloud, None, &comments)?;
            emit(out.as_deref(), std::str::from_utf8(&buf)?)?;
            session.finish()
        }
        Command::LimitModels {
            common,
            coding,
            n,
            alphas,
            depths,
            eps,
            cluster_tol,
            q_max,
            out,
        } => {
            let mut session = Session::new(&common, Some(out.join("manifest.json")))?;
            let alphas = parse_list(&alphas, "--alphas")?;
            let depths = parse_range(&depths)?;
            let mut opts = LimitModelOptions::new(eps, depths.clone());
            if let Some(t) = cluster_tol {
                opts.cluster_tol = t;
            }
            opts.q_max = q_max;
            session.manifest.tol("eps", eps);
            session.manifest.tol("cluster_tol", opts.cluster_tol);
            session.manifest.tol("q_max", q_max);
            session.manifest.tol("N", n);
            let system = load_certified(&common)?;
            let x = parse_coding(&coding)?;
            let window = Window::centered_cube(system.dim(), n)?;
            let set = enumerate_limit_models(&system, &x, &window, &alphas, &opts)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let header = session.manifest.header();
            let mut index = Vec::new();
            for (k, m) in set.models.iter().enumerate() {
                let file = format!("model_{k:03}.csv");
                let mut w = BufWriter::new(File::create(out.join(&file))?);
                write_cloud_csv(&mut w, &m.cloud, None, std::slice::from_ref(&header))?;
                w.flush()?;
                index.push(json!({
                    "file": file,
                    "alpha": m.alpha,
                    "residue": m.residues[0],
                    "residues": m.residues,
                    "period_steps": m.period_steps,
                    "rotation_order": m.rotation_order,
                    "certified": m.certified,
                    "depth": m.depth,
                    "view": m.view,
                }));
            }
            let mut clusters = Vec::new();
            for (k, c) in set.clusters.iter().enumerate() {
                let file = format!("cluster_{k:03}.csv");
                let mut w = BufWriter::new(File::create(out.join(&file))?);
                write_cloud_csv(&mut w, &c.representative_cloud, None, std::slice::from_ref(&header))?;
                w.flush()?;
                clusters.push(json!({
                    "file": file,
                    "members": c.members,
                    "spread": c.spread,
                    "certified": false,
                }));
            }
            let body = json!({ "models": index, "clusters": clusters, "warnings": set.warnings });
            for warning in &set.warnings {
                eprintln!("warning: {warning}");
            }
            std::fs::write(out.join("index.json"), json_with_hash(&session, &body)?)?;
            session.finish()
        }
        Command::Verify { which } => match which {
            VerifyCommand::Tan {
                args,
                grid,
                tol,
                depth,
                out,
            } => {
                let mut session = Session::new(&args.common, out.as_deref().map(sidecar))?;
                session.manifest.tol("tol", tol);
                session.manifest.tol("eps", args.eps);
                session.manifest.tol("grid", grid);
                let system = load_certified(&args.common)?;
                let x = parse_coding(&args.coding)?;
                let window = Window::centered_cube(system.dim(), args.n)?;
                let req = TangentRequest {
                    residue: args.residue,
                    model_residue: args.model_residue,
                    alpha: args.alpha,
                    max_depth: depth,
                    eps: args.eps,
                };
                let report = verify_tan_formula(&system, &x, &window, grid, tol, &req)?;
                emit(out.as_deref(), &json_with_hash(&session, &report)?)?;
                session.finish()
            }
            VerifyCommand::Support { args, depths } => {
                let mut session = Session::new(&args.common, None)?;
                session.manifest.tol("eps", args.eps);
                let system = load_certified(&args.common)?;
                let x = parse_coding(&args.coding)?;
                let window = Window::centered_cube(system.dim(), args.n)?;
                let req = TangentRequest {
                    residue: args.residue,
                    model_residue: args.model_residue,
                    alpha: args.alpha,
                    eps: args.eps,
                    ..TangentRequest::default()
                };
                let d = verify_support_identity(&system, &x, &window, parse_range(&depths)?, args.eps, &req)?;
                println!("{d}");
                session.finish()
            }
        },
        Command::Density {
            common,
            coding,
            radii,
            samples,
            seed,
        } => {
            let mut session = Session::new(&common, None)?;
            let system = load_certified(&common)?;
            let text = match samples {
                Some(count) => {
                    session.manifest.seed("regularity", seed);
                    let scales = match &radii {
                        Some(r) => parse_list(r, "--radii")?,
                        None => (1..=8).map(|k| system.beta_max().powi(k)).collect(),
                    };
                    let report = regularity_scan(&system, count, &scales, seed)?;
                    for warning in &report.warnings {
                        eprintln!("warning: {warning}");
                    }
                    json_with_hash(&session, &report)?
                }
                None => {
                    let x = parse_coding(coding.as_deref().expect("clap requires coding"))?;
                    let radii = match &radii {
                        Some(r) => parse_list(r, "--radii")?,
                        None => (1..=8).map(|k| system.beta_max().powi(k)).collect(),
                    };
                    json_with_hash(&session, &density_profile(&system, &x, &radii)?)?
                }
            };
            print!("{text}");
            session.finish()
        }
    }
}
