//! Command-line front end: scenario runs, DNS-vs-homogenized comparison,
//! interface-friction sweeps, and unit-cell reports.

use clap::{Parser, Subcommand};
use rebarflow::app::{
    beta_sweep, compare, load_run, parse_sections, report_text, run_scenario, write_rve_dump,
};
use rebarflow::constitutive::FluidLaw;
use rebarflow::error::{Error, Result};
use rebarflow::micro::{solve_boundary_layer, RveProblem};
use rebarflow::scenario::Scenario;
use rebarflow::solver::NewtonConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "rebarflow",
    about = "Steady flow around reinforcing bars: resolved (DNS) and \
             homogenized Stokes-Darcy finite element solves"
)]
struct Cli {
    /// Worker threads for the linear algebra backend (1 = fully serial,
    /// deterministic output).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the scenario in a config file and write its outputs.
    Run {
        /// Scenario config file (INI-style sections).
        config: PathBuf,
    },
    /// Compare a DNS run directory against a homogenized run directory.
    Compare {
        dns_dir: PathBuf,
        homog_dir: PathBuf,
        /// Sections file: one `name x0 y0 x1 y1 [samples]` per line.
        #[arg(long)]
        sections: Option<PathBuf>,
    },
    /// Sweep interface friction values against a freshly solved DNS
    /// reference and report the best fit.
    BetaSweep {
        /// Scenario config (geometry/fluid shared by both modes).
        config: PathBuf,
        /// Comma-separated friction coefficients to try.
        #[arg(long, value_delimiter = ',', default_value = "0,1,3,10")]
        betas: Vec<f64>,
        /// Samples along the comparison section.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Report unit-cell quantities for an obstacle of radius xi.
    Rve {
        /// Obstacle radius in the unit cell, 0 < xi < 0.5.
        xi: f64,
        /// Fluid law: newtonian or bingham.
        #[arg(long, default_value = "newtonian")]
        law: String,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        mu0: f64,
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
        #[arg(long, default_value_t = 15.0)]
        m: f64,
        /// Cell mesh resolution.
        #[arg(long, default_value_t = 0.125)]
        h: f64,
        /// Free cells stacked above the porous cell in the boundary-layer
        /// problem.
        #[arg(long, default_value_t = 4)]
        cells: usize,
        /// Dump the cell solution (mesh + fields) into this directory.
        #[arg(long)]
        dump_rve: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config } => {
            let sol = run_scenario(&config)?;
            print!("{}", report_text(&sol));
            Ok(())
        }
        Cmd::Compare { dns_dir, homog_dir, sections } => {
            let dns = load_run(&dns_dir)?;
            let homog = load_run(&homog_dir)?;
            let secs = match sections {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::io(format!("{}: {e}", path.display())))?;
                    parse_sections(&text)?
                }
                None => Vec::new(),
            };
            let rep = compare(&dns, &homog, &secs)?;
            println!("velocity_error {:.17e}", rep.velocity_error);
            println!("pressure_gradient_error {:.17e}", rep.pressure_gradient_error);
            for (name, err) in &rep.sections {
                println!("section {name} pressure_error {err:.17e}");
            }
            Ok(())
        }
        Cmd::BetaSweep { config, betas, samples } => {
            let scenario = Scenario::from_file(&config)?;
            let sweep = beta_sweep(&scenario, &betas, samples)?;
            for (beta, mismatch) in &sweep.mismatches {
                println!("beta {beta} mismatch {mismatch:.17e}");
            }
            println!("best_beta {}", sweep.best);
            Ok(())
        }
        Cmd::Rve { xi, law, mu, mu0, tau0, m, h, cells, dump_rve } => {
            let fluid = match law.as_str() {
                "newtonian" => FluidLaw::Newtonian { mu },
                "bingham" => FluidLaw::Bingham { mu0, tau0, m },
                other => {
                    return Err(Error::Config(format!(
                        "--law must be 'newtonian' or 'bingham', got '{other}'"
                    )))
                }
            };
            fluid.validate().map_err(Error::Config)?;
            let rve = RveProblem::new(xi, h, fluid)?;
            println!("porosity {:.17e}", rve.porosity);
            let state = if fluid.is_linear() {
                let k = rve.permeability()?;
                println!("K [[{:.17e}, {:.17e}], [{:.17e}, {:.17e}]]", k[0][0], k[0][1], k[1][0], k[1][1]);
                let bl = solve_boundary_layer(xi, cells, h)?;
                println!("c_bl {:.17e}", bl.c_bl);
                println!("beta {:.17e}", bl.beta(mu));
                // report the cell solution for a unit forcing in +x
                let mut state = rve.init_state();
                rve.solve([1.0, 0.0], &mut state, &NewtonConfig::default())?;
                state
            } else {
                // no constant permeability for a nonlinear law: report the
                // flux and consistent tangent at a unit forcing in +x
                let mut state = rve.init_state();
                rve.solve([1.0, 0.0], &mut state, &NewtonConfig::default())?;
                let (w, k) = rve.seepage_and_tangent([1.0, 0.0], &state)?;
                println!("seepage_at_unit_fx [{:.17e}, {:.17e}]", w[0], w[1]);
                println!(
                    "tangent_at_unit_fx [[{:.17e}, {:.17e}], [{:.17e}, {:.17e}]]",
                    k[0][0], k[0][1], k[1][0], k[1][1]
                );
                println!("note boundary-layer beta is only defined for Newtonian fluids");
                state
            };
            if let Some(dir) = dump_rve {
                write_rve_dump(&rve, &state, &dir)?;
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 1 {
        faer::set_global_parallelism(faer::Par::rayon(cli.threads));
    } else {
        faer::set_global_parallelism(faer::Par::Seq);
    }
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
