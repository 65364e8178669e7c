//! qsurf command line: builds test surfaces, runs the approximation
//! pipeline, and wraps the axiom, modulus, and distortion checks. Reports go
//! to stdout as canonical single-line JSON (sorted keys, 17 significant
//! digits) so identical configs produce byte-identical output; progress and
//! errors go to stderr.
//!
//! Exit codes: 0 success, 1 a computed certificate failed, 2 input error,
//! 3 solver did not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use qsurf_core::approximation::{
    certify_skeleton, check_axioms, skeleton_approximation, CheckBudget, Host,
};
use qsurf_core::constructions::snowsphere;
use qsurf_core::finite_metric::{bilip_constant, qs_profile};
use qsurf_core::modulus::{mod2, CurveFamily};
use qsurf_core::pipeline::{run_pipeline, PipelineInput};
use qsurf_core::report::{canonical_json, Report};
use qsurf_core::simplicial::mesh_graph;
use qsurf_core::{Error, FiniteMetric, MetricComplex};

#[derive(Parser)]
#[command(name = "qsurf", about = "Polyhedral surface approximation toolkit")]
struct Cli {
    /// cap the worker thread count (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a snowsphere surface; writes complex JSON and OBJ
    Snowsphere {
        /// subdivision stage, up to 4
        #[arg(long)]
        stage: usize,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble and certify the approximating space for a target metric
    Approximate {
        /// base complex JSON (congruent triangles)
        #[arg(long)]
        complex: PathBuf,
        /// target metric JSON on the base vertices
        #[arg(long)]
        target: PathBuf,
        /// assembly scale; omit to select the tight scale automatically
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 4)]
        mesh_level: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// directory for the assembled complex and report
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the approximation axioms of a complex's vertex-star cover
    Verify {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, default_value_t = 4)]
        mesh_level: usize,
        /// combinatorial constant; default is the certified one
        #[arg(long)]
        k: Option<usize>,
        /// metric constant; default is the certified one
        #[arg(long)]
        l: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the 2-modulus of the mesh path family joining two node sets
    Modulus {
        #[arg(long)]
        complex: PathBuf,
        /// family JSON: {"e": [...], "f": [...], "g": [...] or "all"}
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 4)]
        mesh_level: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distortion profile and bi-Lipschitz constant of a point map
    Distortion {
        /// source metric JSON
        #[arg(long)]
        src: PathBuf,
        /// destination metric JSON
        #[arg(long)]
        dst: PathBuf,
        /// JSON array mapping source to destination indices; default identity
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 20000)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Node sets defining a curve family; `g` restricts the ambient nodes and
/// defaults to the whole mesh.
#[derive(Deserialize)]
struct FamilySpec {
    e: Vec<usize>,
    f: Vec<usize>,
    #[serde(default)]
    g: Option<serde_json::Value>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes into the output directory, creating it if needed.
fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, content)?;
    Ok(path)
}

/// Canonical JSON text of any serializable value.
fn canonical<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    Ok(canonical_json(&serde_json::to_value(value)?))
}

fn emit(report: &Report, out: &Option<PathBuf>) -> Result<(), Error> {
    let rendered = report.render();
    print!("{}", rendered);
    if let Some(dir) = out {
        write_artifact(dir, "report.json", &rendered)?;
    }
    Ok(())
}

fn cmd_snowsphere(stage: usize, out: &PathBuf) -> Result<bool, Error> {
    let s = snowsphere(stage)?;
    let complex_path = write_artifact(out, "complex.json", &canonical(&s.complex)?)?;
    let obj_path = write_artifact(out, "snowsphere.obj", &s.complex.export_obj()?)?;
    eprintln!(
        "stage {}: {} squares, {} triangles, {} vertices",
        stage,
        s.square_count,
        s.complex.triangle_count(),
        s.complex.vertex_count()
    );
    let config = json!({ "command": "snowsphere", "stage": stage, "out": out.display().to_string(), "seed": 0u64 });
    let result = json!({
        "squares": s.square_count,
        "triangles": s.complex.triangle_count(),
        "vertices": s.complex.vertex_count(),
        "complex": complex_path.display().to_string(),
        "obj": obj_path.display().to_string(),
    });
    emit(&Report::new("snowsphere", &config, &result)?, &Some(out.clone()))?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_approximate(
    complex: &Path,
    target: &Path,
    alpha: Option<f64>,
    mesh_level: usize,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<bool, Error> {
    let z: MetricComplex = read_json(complex)?;
    let target_m: FiniteMetric = read_json(target)?;
    let output = run_pipeline(&PipelineInput {
        z: &z,
        target: &target_m,
        alpha,
        mesh_level,
    })?;
    let certs = &output.certs;
    let pass = certs.axioms.pass
        && certs.domination.pass
        && certs.separation.pass
        && certs.image_axioms.as_ref().map_or(true, |a| a.pass);
    let mut written = json!(null);
    if let Some(dir) = out {
        let y_path = write_artifact(dir, "y.json", &canonical(&output.y)?)?;
        let obj = match output.y.export_obj() {
            Ok(text) => Some(write_artifact(dir, "y.obj", &text)?.display().to_string()),
            Err(_) => None, // the assembled complex usually has no embedding
        };
        written = json!({ "y": y_path.display().to_string(), "obj": obj });
    }
    let config = json!({
        "command": "approximate",
        "complex": complex.display().to_string(),
        "target": target.display().to_string(),
        "alpha": alpha,
        "mesh_level": mesh_level,
        "seed": seed,
    });
    let result = json!({
        "pass": pass,
        "t": output.t,
        "alpha": output.alpha,
        "alpha_selection": output.alpha_selection,
        "mesh_nodes": output.mesh_nodes,
        "vertices": output.d_s.len(),
        "certs": certs,
        "artifacts": written,
    });
    emit(&Report::new("approximate", &config, &result)?, out)?;
    Ok(pass)
}

fn cmd_verify(
    complex: &Path,
    mesh_level: usize,
    k: Option<usize>,
    l: Option<f64>,
    tol: f64,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<bool, Error> {
    let c: MetricComplex = read_json(complex)?;
    let mesh = mesh_graph(&c, mesh_level);
    let host = Host::Mesh(&mesh);
    let approx = skeleton_approximation(&c, &mesh)?;
    let cert = certify_skeleton(&approx, &host)?;
    let use_k = k.unwrap_or(cert.k);
    let use_l = l.unwrap_or(cert.l);
    let budget = CheckBudget {
        seed,
        ..CheckBudget::default()
    };
    let axioms = check_axioms(&approx, &host, use_k, use_l, tol, &budget)?;
    let config = json!({
        "command": "verify",
        "complex": complex.display().to_string(),
        "mesh_level": mesh_level,
        "k": k,
        "l": l,
        "tol": tol,
        "seed": seed,
    });
    let result = json!({
        "pass": axioms.pass,
        "certificate": cert,
        "checked_k": use_k,
        "checked_l": use_l,
        "axioms": axioms,
    });
    emit(&Report::new("verify", &config, &result)?, out)?;
    Ok(axioms.pass)
}

fn cmd_modulus(
    complex: &Path,
    family: &Path,
    mesh_level: usize,
    tol: f64,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<bool, Error> {
    let c: MetricComplex = read_json(complex)?;
    let spec: FamilySpec = read_json(family)?;
    let g_nodes: Option<Vec<usize>> = match &spec.g {
        None => None,
        Some(serde_json::Value::String(s)) if s == "all" => None,
        Some(serde_json::Value::Array(_)) => {
            Some(serde_json::from_value(spec.g.clone().unwrap())?)
        }
        Some(other) => {
            return Err(Error::invalid(format!(
                "family field g must be \"all\" or a node list, got {}",
                other
            )))
        }
    };
    let mesh = mesh_graph(&c, mesh_level);
    let fam = CurveFamily::new(&mesh, spec.e.clone(), spec.f.clone(), g_nodes.as_deref())?;
    let estimate = mod2(&fam, tol)?;
    let rho_support = estimate.density.rho.iter().filter(|&&r| r > 0.0).count();
    let rho_max = estimate.density.rho.iter().cloned().fold(0.0f64, f64::max);
    let config = json!({
        "command": "modulus",
        "complex": complex.display().to_string(),
        "family": family.display().to_string(),
        "mesh_level": mesh_level,
        "tol": tol,
        "seed": seed,
    });
    let result = json!({
        "value": estimate.value,
        "min_path_length": estimate.min_path_length,
        "iterations": estimate.iterations,
        "active_paths": estimate.active_paths.len(),
        "rho_support": rho_support,
        "rho_max": rho_max,
        "mesh_nodes": mesh.node_count(),
    });
    emit(&Report::new("modulus", &config, &result)?, out)?;
    Ok(true)
}

fn cmd_distortion(
    src: &Path,
    dst: &Path,
    map: &Option<PathBuf>,
    budget: usize,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<bool, Error> {
    let src_m: FiniteMetric = read_json(src)?;
    let dst_m: FiniteMetric = read_json(dst)?;
    let map_v: Vec<usize> = match map {
        Some(path) => read_json(path)?,
        None => (0..src_m.len()).collect(),
    };
    let profile = qs_profile(&src_m, &dst_m, &map_v, budget, seed)?;
    let bilip = bilip_constant(&src_m, &dst_m, &map_v)?;
    let config = json!({
        "command": "distortion",
        "src": src.display().to_string(),
        "dst": dst.display().to_string(),
        "map": map.as_ref().map(|p| p.display().to_string()),
        "budget": budget,
        "seed": seed,
    });
    let result = json!({ "profile": profile, "bilip": bilip });
    emit(&Report::new("distortion", &config, &result)?, out)?;
    Ok(true)
}

fn run(cmd: &Cmd) -> Result<bool, Error> {
    match cmd {
        Cmd::Snowsphere { stage, out } => cmd_snowsphere(*stage, out),
        Cmd::Approximate {
            complex,
            target,
            alpha,
            mesh_level,
            seed,
            out,
        } => cmd_approximate(complex, target, *alpha, *mesh_level, *seed, out),
        Cmd::Verify {
            complex,
            mesh_level,
            k,
            l,
            tol,
            seed,
            out,
        } => cmd_verify(complex, *mesh_level, *k, *l, *tol, *seed, out),
        Cmd::Modulus {
            complex,
            family,
            mesh_level,
            tol,
            seed,
            out,
        } => cmd_modulus(complex, family, *mesh_level, *tol, *seed, out),
        Cmd::Distortion {
            src,
            dst,
            map,
            budget,
            seed,
            out,
        } => cmd_distortion(src, dst, map, *budget, *seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(&cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more certificates failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::NoConvergence(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
