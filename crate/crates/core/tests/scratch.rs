use rebarflow::app::{beta_sweep, compare, load_run, solve_scenario, write_outputs};
use rebarflow::constitutive::FluidLaw;
use rebarflow::mesh::{ObstacleGrid, Point};
use rebarflow::scenario::{BetaSpec, Mode, Scenario};
use rebarflow::solver::NewtonConfig;
use std::path::PathBuf;

fn mk(gap: f64, xi: f64, mu: f64, mode: Mode, target_h: f64, beta: f64) -> Scenario {
    Scenario {
        mode,
        width: 10.0,
        height: 4.0 + 2.0 * gap,
        grid: ObstacleGrid {
            rows: 4,
            cols: 4,
            cell_size: 1.0,
            radius: xi,
            origin: Point::new(3.0, gap),
            rotation_angle: 0.0,
        },
        target_h,
        rve_h: 0.0625,
        law: FluidLaw::Newtonian { mu },
        inlet_velocity: 1.0,
        outlet_pressure: 0.0,
        body_force: [0.0, 0.0],
        beta: BetaSpec::Value(beta),
        bl_free_cells: 4,
        bl_h: 0.125,
        newton: NewtonConfig::default(),
        output_dir: None,
        profiles: Vec::new(),
    }
}


fn fp_err(ld: &rebarflow::app::LoadedRun, lh: &rebarflow::app::LoadedRun) -> (f64, f64) {
    let grid = &ld.scenario.grid;
    let inner = |m: &Vec<Vec<f64>>| -> Vec<f64> {
        let mut out = Vec::new();
        for j in 1..grid.rows - 1 {
            for i in 1..grid.cols - 1 {
                out.push(m[j][i]);
            }
        }
        out
    };
    let err = |a: &Vec<f64>, b: &Vec<f64>| -> f64 {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
        let s = a.iter().cloned().fold(0.0f64, f64::max);
        d / s
    };
    let speed = err(
        &inner(&ld.footprint_speed_averages()),
        &inner(&lh.footprint_speed_averages()),
    );
    let vecm = err(
        &inner(&ld.footprint_seepage_magnitudes()),
        &inner(&lh.footprint_seepage_magnitudes()),
    );
    (speed, vecm)
}

fn mean_err(ld: &rebarflow::app::LoadedRun, lh: &rebarflow::app::LoadedRun) -> (f64, f64) {
    let grid = &ld.scenario.grid;
    let inner_mean = |m: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        let mut n = 0.0;
        for j in 1..grid.rows - 1 {
            for i in 1..grid.cols - 1 {
                s += m[j][i];
                n += 1.0;
            }
        }
        s / n
    };
    let sa = inner_mean(&ld.footprint_speed_averages());
    let sb = inner_mean(&lh.footprint_speed_averages());
    let va = inner_mean(&ld.footprint_seepage_magnitudes());
    let vb = inner_mean(&lh.footprint_seepage_magnitudes());
    ((sa - sb).abs() / sa, (va - vb).abs() / va)
}

#[test]
#[ignore]
fn study() {
    for &(xi, beta, gaps) in &[
        (0.125f64, 0.0f64, [5.0f64, 5.5, 6.0]),
        (0.25, 3.0, [2.25, 2.5, 2.75]),
    ] {
        for &gap in gaps.iter() {
            let mut sd = mk(gap, xi, 20.0, Mode::Dns, 0.25, beta);
            sd.law = FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 };
            sd.rve_h = 0.25;
            let mut sh = sd.clone();
            sh.mode = Mode::Homogenized;
            sh.target_h = 1.0;
            let t0 = std::time::Instant::now();
            let d = solve_scenario(&sd).unwrap();
            let h = solve_scenario(&sh).unwrap();
            let dir_d = PathBuf::from("/tmp/study_dns");
            let dir_h = PathBuf::from("/tmp/study_hom");
            write_outputs(&d, &dir_d).unwrap();
            write_outputs(&h, &dir_h).unwrap();
            let ld = load_run(&dir_d).unwrap();
            let lh = load_run(&dir_h).unwrap();
            let rep = compare(&ld, &lh, &[]).unwrap();
            eprintln!(
                "xi {xi} beta {beta} gap {gap}: vel {:.4}  pgrad {:.4}  ({:.0}s)",
                rep.velocity_error, rep.pressure_gradient_error, t0.elapsed().as_secs_f64()
            );
        }
    }
}
