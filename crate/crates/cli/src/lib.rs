//! Scenario runner for the hard/soft constraint controller.
//!
//! Subcommand plumbing lives here so integration tests can drive the CLI
//! in-process; `main.rs` is a thin argument-parsing shell.

pub mod export;
pub mod presets;
pub mod scenario;

use hs_ctrl_core::constraint::estimate_joint_alpha_star;
use hs_ctrl_core::sim::simulate;
use scenario::{build_scenario, parse_scenario, Overrides, Scenario, ScenarioError};
use std::path::{Path, PathBuf};

/// Verbosity gate: set `HS_CTRL_LOG` to anything but `0`/`off` for progress
/// chatter on stderr.
pub fn verbose() -> bool {
    match std::env::var("HS_CTRL_LOG") {
        Ok(v) => !v.is_empty() && v != "0" && v.to_lowercase() != "off",
        Err(_) => false,
    }
}

macro_rules! vlog {
    ($($arg:tt)*) => {
        if $crate::verbose() {
            eprintln!($($arg)*);
        }
    };
}

/// Resolve a scenario reference: an existing path, a path missing its
/// `.toml` extension, or the name of an embedded preset.
pub fn resolve_scenario(input: &str) -> Result<(String, String), ScenarioError> {
    let p = Path::new(input);
    if p.is_file() {
        let name = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.to_string());
        return Ok((name, std::fs::read_to_string(p)?));
    }
    let with_ext = PathBuf::from(format!("{input}.toml"));
    if with_ext.is_file() {
        let name = with_ext
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| input.to_string());
        return Ok((name, std::fs::read_to_string(&with_ext)?));
    }
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| input.to_string());
    if let Some(text) = presets::preset_text(&stem) {
        return Ok((stem, text.to_string()));
    }
    Err(ScenarioError::schema(
        "scenario",
        format!(
            "`{input}` is neither a readable file nor one of the presets ({})",
            presets::preset_names().join(", ")
        ),
    ))
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub scenario: String,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub mode: Option<String>,
    pub out: PathBuf,
    pub plots: bool,
}

fn prepare(scenario_ref: &str, ov: &Overrides) -> Result<(String, Scenario), ScenarioError> {
    let (name, text) = resolve_scenario(scenario_ref)?;
    vlog!("loaded scenario `{name}`");
    let file = parse_scenario(&text)?;
    let mut sc = build_scenario(file, ov)?;
    if sc.wants_auto_tune {
        let before = sc.controller.nominal().rho0();
        sc.auto_tune()
            .map_err(|e| ScenarioError::schema("controller", e.to_string()))?;
        vlog!(
            "auto-tuned rho0: {} -> {}",
            before,
            sc.controller.nominal().rho0()
        );
    }
    Ok((name, sc))
}

/// `run` subcommand. Exit codes: 0 completed, 1 configuration problem,
/// 2 breach during simulation.
pub fn cmd_run(args: &RunArgs) -> i32 {
    let ov = Overrides {
        dt: args.dt,
        t_final: args.t_final,
        mode: args.mode.clone(),
    };
    let (name, sc) = match prepare(&args.scenario, &ov) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    let x0 = sc.measured_x0();
    match sc.controller.validate_initial(&x0) {
        Ok(report) => {
            if !report.passed() {
                let failed = report.first_failure().expect("failed report has a failure");
                eprintln!(
                    "error: initial-condition check `{}` failed: {}",
                    failed.name, failed.detail
                );
                if failed.name == "hard_initial" {
                    eprintln!(
                        "the initial state violates the hard constraints; no admissible \
                         controller exists for this start"
                    );
                }
                return 1;
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    }

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create output directory: {e}");
        return 1;
    }

    vlog!(
        "simulating `{name}`: dt = {}, t_final = {}",
        sc.sim.dt,
        sc.sim.t_final
    );
    let started = std::time::Instant::now();
    let result = match simulate(&sc.plant, &sc.controller, &sc.sim, &sc.x0) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    vlog!(
        "simulated {} records in {:.2} s",
        result.records.len(),
        started.elapsed().as_secs_f64()
    );

    let csv_path = args.out.join("trajectory.csv");
    if let Err(e) = export::export_csv(&result, sc.plant.n(), &csv_path) {
        eprintln!("error: csv export failed: {e}");
        return 1;
    }
    if let Err(e) = export::write_summary(&result, &args.out.join("summary.txt")) {
        eprintln!("error: summary export failed: {e}");
        return 1;
    }
    if args.plots {
        if let Err(e) = export::export_svg(
            &result,
            sc.controller.hard(),
            sc.controller.soft(),
            &args.out,
        ) {
            eprintln!("error: svg export failed: {e}");
            return 1;
        }
    }

    let s = &result.summary;
    println!(
        "{name}: {}  min_alpha_h={:.4e}  max_rho_r={:.4e}  deadlock_suspected={}",
        if result.status.is_completed() {
            "completed".to_string()
        } else {
            format!("{:?}", result.status)
        },
        s.min_alpha_h,
        s.max_rho_r,
        s.deadlock_suspected
    );
    if result.status.is_completed() {
        0
    } else {
        2
    }
}

/// `validate` subcommand: initial-condition checks plus feasibility and
/// critical-point sampling diagnostics, no simulation.
pub fn cmd_validate(scenario_ref: &str) -> i32 {
    let (name, sc) = match prepare(scenario_ref, &Overrides::default()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let x0 = sc.measured_x0();
    let report = match sc.controller.validate_initial(&x0) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    println!("scenario `{name}`: initial-condition checks");
    for c in &report.checks {
        println!(
            "  [{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }

    // Feasibility diagnostics over a box covering the workspace scale.
    let bx = [(-12.0, 12.0), (-12.0, 12.0)];
    if sc.plant.n() == 2 {
        let hard_star = sc.controller.hard().estimate_alpha_star(0.0, &bx, 61);
        let soft_star = sc.controller.soft().estimate_alpha_star(0.0, &bx, 61);
        let joint =
            estimate_joint_alpha_star(sc.controller.hard(), sc.controller.soft(), 0.0, &bx, 61);
        match (hard_star, soft_star, joint) {
            (Ok(h), Ok(s), Ok(j)) => {
                println!("feasibility at t = 0 (grid lower bounds over [-12,12]^2):");
                println!("  alpha_h* >= {h:.4}  (positive means the hard set is nonempty)");
                println!("  alpha_s* >= {s:.4}");
                println!("  max min(alpha_h, alpha_s) >= {j:.4}  (positive means compatible)");
            }
            _ => println!("feasibility diagnostics unavailable"),
        }

        // Sampling check for spurious critical points of alpha_s outside the
        // soft set (they would stall the soft-attraction term).
        let mut suspicious = 0;
        for i in 0..61 {
            for j in 0..61 {
                let x = [
                    -12.0 + 24.0 * i as f64 / 60.0,
                    -12.0 + 24.0 * j as f64 / 60.0,
                ];
                if let (Ok(a), Ok(g)) = (
                    sc.controller.soft().alpha(0.0, &x),
                    sc.controller.soft().alpha_gradient(0.0, &x),
                ) {
                    let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                    if a < -1e-6 && gn < 1e-3 {
                        suspicious += 1;
                    }
                }
            }
        }
        println!(
            "soft-gradient critical points sampled outside the soft set: {suspicious} \
             (0 supports the soft-attraction requirement)"
        );
    }

    if report.passed() {
        println!("validation: PASS");
        0
    } else {
        println!("validation: FAIL");
        1
    }
}

pub fn cmd_list_presets() -> i32 {
    for (name, text) in presets::PRESETS {
        let descr = text
            .lines()
            .find_map(|l| l.strip_prefix("description = "))
            .map(|s| s.trim_matches('"').to_string())
            .unwrap_or_default();
        println!("{name:<16} {descr}");
    }
    0
}
