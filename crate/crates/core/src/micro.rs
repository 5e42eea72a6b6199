//! Microscale (unit-cell) problems and their upscaled quantities.
//!
//! * [`RveProblem`] — periodic Stokes flow through the unit cell with a
//!   rigid circular obstacle, driven by a constant forcing
//!   `f = rho_b - g_bar`. Its volume-averaged velocity is the macroscopic
//!   seepage, and the derivative of the seepage with respect to the forcing
//!   is the (tangent) permeability.
//! * [`HomogenizedLaw`] — a [`DarcyLaw`] backed by cell solves. Newtonian
//!   cells reduce to a constant permeability computed once from two
//!   unit-forcing solves; Bingham cells are re-solved per macro element
//!   with warm starts.
//! * [`solve_boundary_layer`] — the interface cell problem that calibrates
//!   the Beavers-Joseph-Saffman slip coefficient.

use crate::constitutive::FluidLaw;
use crate::error::{Error, Result};
use crate::fem::{assemble, DarcyLaw, DofMap, SystemSpec};
use crate::linsolve::SparseMatrix;
use crate::mesh::{
    generate_boundary_layer_mesh, generate_rve_mesh, BoundaryTag, Mesh,
};
use crate::solver::{newton_solve, NewtonConfig, SolveReport};
use std::collections::HashMap;
use std::sync::Mutex;

/// Periodic unit-cell Stokes problem.
pub struct RveProblem {
    pub mesh: Mesh,
    pub dofs: DofMap,
    /// Fluid area fraction of the unit cell.
    pub porosity: f64,
    pub law: FluidLaw,
}

impl RveProblem {
    pub fn new(xi: f64, target_h: f64, law: FluidLaw) -> Result<Self> {
        law.validate().map_err(Error::Config)?;
        let mesh = generate_rve_mesh(xi, target_h)?;
        let porosity = mesh.total_area(); // |Y| = 1
        let mut dofs = DofMap::new(&mesh);
        for e in &mesh.boundary_edges {
            if e.tag == BoundaryTag::Obstacle {
                for node in e.nodes() {
                    dofs.fix(dofs.vel_fluid_dof(node, 0).unwrap(), 0.0);
                    dofs.fix(dofs.vel_fluid_dof(node, 1).unwrap(), 0.0);
                }
            }
        }
        for &(m, s) in &mesh.periodic_pairs {
            for comp in 0..2 {
                dofs.tie(
                    dofs.vel_fluid_dof(s, comp).unwrap(),
                    dofs.vel_fluid_dof(m, comp).unwrap(),
                );
            }
            if let (Some(ps), Some(pm)) = (dofs.pres_fluid_dof(s), dofs.pres_fluid_dof(m)) {
                dofs.tie(ps, pm);
            }
        }
        // velocity is fully constrained up to the periodic quotient, so the
        // pressure has a constant nullspace: pin the first unconstrained
        // pressure DOF
        let pin = (0..mesh.n_corners)
            .filter_map(|n| dofs.pres_fluid_dof(n))
            .find(|&d| !dofs.is_tied(d));
        match pin {
            Some(d) => dofs.fix(d, 0.0),
            None => return Err(Error::Mesh("RVE mesh has no pressure DOF to pin".into())),
        }
        dofs.finalize()?;
        Ok(RveProblem { mesh, dofs, porosity, law })
    }

    fn spec(&self, forcing: [f64; 2]) -> SystemSpec<'_> {
        SystemSpec { fluid: self.law, body_force: forcing, ..Default::default() }
    }

    /// Solves the cell problem; `state` is used as the initial iterate
    /// (warm start) and holds the solution afterwards.
    pub fn solve(
        &self,
        forcing: [f64; 2],
        state: &mut Vec<f64>,
        cfg: &NewtonConfig,
    ) -> Result<SolveReport> {
        newton_solve(&self.mesh, &self.dofs, &self.spec(forcing), state, cfg)
    }

    pub fn init_state(&self) -> Vec<f64> {
        self.dofs.init_state()
    }

    /// Volume average of the velocity over the cell (`|Y| = 1`), i.e. the
    /// macroscopic seepage velocity.
    pub fn seepage(&self, state: &[f64]) -> [f64; 2] {
        average_velocity(&self.mesh, &self.dofs, state)
    }

    /// Average of the pressure over the fluid domain; used to report the
    /// zero-mean pressure field.
    pub fn mean_pressure(&self, state: &[f64]) -> f64 {
        use crate::fem::quadrature::TRI_DEG5;
        use crate::fem::shape::{p1_values, physical_p1_grads};
        let mut int_p = 0.0;
        for t in 0..self.mesh.triangles.len() {
            let conn = self.mesh.triangles[t];
            let c = self.mesh.corner_coords(t);
            let coords = [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y]];
            let (_, det) = physical_p1_grads(&coords);
            for q in &TRI_DEG5 {
                let psi = p1_values(q.r, q.s);
                let mut p = 0.0;
                for a in 0..3 {
                    p += psi[a] * state[self.dofs.pres_fluid_dof(conn[a]).unwrap()];
                }
                int_p += q.w * det * p;
            }
        }
        int_p / self.porosity
    }

    /// Seepage and its derivative w.r.t. the forcing, evaluated at a
    /// converged state. The tangent comes from two linear solves against
    /// the cell Jacobian, so it is consistent with the nonlinear solve.
    pub fn seepage_and_tangent(
        &self,
        forcing: [f64; 2],
        state: &[f64],
    ) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let (raw_triplets, _) = assemble(&self.mesh, &self.dofs, state, &self.spec(forcing))?;
        let triplets = self.dofs.reduce_triplets(&raw_triplets);
        let a = SparseMatrix::from_triplets(self.dofs.n_free(), &triplets)?;
        let lu = a.factorize()?;
        let mut k = [[0.0; 2]; 2];
        for dir in 0..2 {
            // dR/df_dir = -L_dir with L the P2 load vector of a unit force
            let load = self.dofs.reduce_residual(&unit_load(&self.mesh, &self.dofs, dir));
            let du = lu.solve(&load)?;
            // expand the reduced sensitivity to a raw velocity field
            let mut raw = vec![0.0; self.dofs.n_raw()];
            self.dofs.apply_correction(&mut raw, &du, 1.0);
            let dw = average_velocity(&self.mesh, &self.dofs, &raw);
            k[0][dir] = dw[0];
            k[1][dir] = dw[1];
        }
        Ok((self.seepage(state), k))
    }

    /// Permeability of the Newtonian cell (`w_bar = K f`).
    pub fn permeability(&self) -> Result<[[f64; 2]; 2]> {
        if !self.law.is_linear() {
            return Err(Error::Config(
                "constant permeability only exists for the Newtonian law".into(),
            ));
        }
        let mut state = self.init_state();
        self.solve([0.0, 0.0], &mut state, &NewtonConfig::default())?;
        let (_, k) = self.seepage_and_tangent([0.0, 0.0], &state)?;
        Ok(k)
    }
}

fn unit_load(mesh: &Mesh, dofs: &DofMap, dir: usize) -> Vec<f64> {
    use crate::fem::quadrature::TRI_DEG5;
    use crate::fem::shape::{p2_values, physical_p1_grads};
    let mut load = vec![0.0; dofs.n_raw()];
    for t in 0..mesh.triangles.len() {
        let conn = mesh.triangles[t];
        let c = mesh.corner_coords(t);
        let coords = [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y]];
        let (_, det) = physical_p1_grads(&coords);
        for q in &TRI_DEG5 {
            let phi = p2_values(q.r, q.s);
            for a in 0..6 {
                if let Some(d) = dofs.vel_fluid_dof(conn[a], dir) {
                    load[d] += q.w * det * phi[a];
                }
            }
        }
    }
    load
}

fn average_velocity(mesh: &Mesh, dofs: &DofMap, state: &[f64]) -> [f64; 2] {
    use crate::fem::quadrature::TRI_DEG5;
    use crate::fem::shape::{p2_values, physical_p1_grads};
    let mut avg = [0.0; 2];
    for t in 0..mesh.triangles.len() {
        let conn = mesh.triangles[t];
        let c = mesh.corner_coords(t);
        let coords = [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y]];
        let (_, det) = physical_p1_grads(&coords);
        for q in &TRI_DEG5 {
            let phi = p2_values(q.r, q.s);
            for a in 0..6 {
                let base = dofs.vel_fluid_dof(conn[a], 0).unwrap();
                avg[0] += q.w * det * phi[a] * state[base];
                avg[1] += q.w * det * phi[a] * state[base + 1];
            }
        }
    }
    avg
}

/// Upscaled Darcy closure backed by unit-cell solves.
pub struct HomogenizedLaw {
    rve: RveProblem,
    /// Constant permeability (Newtonian cells only).
    linear_k: Option<[[f64; 2]; 2]>,
    /// Warm-start states of the nonlinear cell solves, keyed by macro
    /// element index.
    cache: Mutex<HashMap<usize, Vec<f64>>>,
    cell_cfg: NewtonConfig,
    solves: std::sync::atomic::AtomicUsize,
}

impl HomogenizedLaw {
    pub fn new(xi: f64, target_h: f64, law: FluidLaw) -> Result<Self> {
        let rve = RveProblem::new(xi, target_h, law)?;
        let linear_k = if law.is_linear() { Some(rve.permeability()?) } else { None };
        Ok(HomogenizedLaw {
            rve,
            linear_k,
            cache: Mutex::new(HashMap::new()),
            cell_cfg: NewtonConfig::default(),
            solves: std::sync::atomic::AtomicUsize::new(0),
        })
    }

    pub fn porosity(&self) -> f64 {
        self.rve.porosity
    }

    pub fn rve(&self) -> &RveProblem {
        &self.rve
    }

    pub fn permeability(&self) -> Option<[[f64; 2]; 2]> {
        self.linear_k
    }

    /// Converged cell state for macro element `elem` under `forcing`,
    /// warm-started from (and stored back into) the cell cache. Used for
    /// sub-scale field reconstruction after the macro solve.
    pub fn cell_state(&self, elem: usize, forcing: [f64; 2]) -> Result<Vec<f64>> {
        let mut cache = self
            .cache
            .lock()
            .map_err(|_| Error::Solver("cell cache poisoned".into()))?;
        let state = cache.entry(elem).or_insert_with(|| self.rve.init_state());
        self.rve.solve(forcing, state, &self.cell_cfg)?;
        Ok(state.clone())
    }
}

impl DarcyLaw for HomogenizedLaw {
    fn seepage(&self, elem: usize, f: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
        if let Some(k) = self.linear_k {
            return Ok((
                [
                    k[0][0] * f[0] + k[0][1] * f[1],
                    k[1][0] * f[0] + k[1][1] * f[1],
                ],
                k,
            ));
        }
        let mut cache = self
            .cache
            .lock()
            .map_err(|_| Error::Solver("cell cache poisoned".into()))?;
        let state = cache.entry(elem).or_insert_with(|| self.rve.init_state());
        self.rve.solve(f, state, &self.cell_cfg)?;
        self.solves.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.rve.seepage_and_tangent(f, state)
    }

    fn solve_count(&self) -> usize {
        self.solves.load(std::sync::atomic::Ordering::Relaxed)
    }
}

/// Result of the interface boundary-layer cell problem.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryLayerResult {
    /// `C_bl = int_Gamma u_t ds` under a unit tangential driving traction
    /// at unit viscosity; negative (the slip opposes the traction jump
    /// convention).
    pub c_bl: f64,
    /// Number of stacked free-flow cells used above the porous cell.
    pub free_cells: usize,
}

impl BoundaryLayerResult {
    /// Slip coefficient of the BJS condition for a fluid of viscosity `mu`.
    pub fn beta(&self, mu: f64) -> f64 {
        -mu / self.c_bl
    }
}

/// Solves the boundary-layer cell problem: a porous unit cell below
/// `y = 1`, `free_cells` clear cells above, periodic in x, no slip at the
/// bottom and on the obstacle, `u_t = 0` at the top, driven by a unit
/// tangential traction on the seam.
pub fn solve_boundary_layer(
    xi: f64,
    free_cells: usize,
    target_h: f64,
) -> Result<BoundaryLayerResult> {
    let mesh = generate_boundary_layer_mesh(xi, free_cells, target_h)?;
    let mut dofs = DofMap::new(&mesh);
    for e in &mesh.boundary_edges {
        match e.tag {
            BoundaryTag::BlBottom | BoundaryTag::Obstacle => {
                for node in e.nodes() {
                    dofs.fix(dofs.vel_fluid_dof(node, 0).unwrap(), 0.0);
                    dofs.fix(dofs.vel_fluid_dof(node, 1).unwrap(), 0.0);
                }
            }
            // impermeable, shear-free lid: u_n = 0 with u_t natural, so the
            // free column carries no shear and the slip integral converges
            // exponentially in the number of free cells
            BoundaryTag::BlTop => {
                for node in e.nodes() {
                    dofs.fix(dofs.vel_fluid_dof(node, 1).unwrap(), 0.0);
                }
            }
            _ => {}
        }
    }
    for &(m, s) in &mesh.periodic_pairs {
        for comp in 0..2 {
            dofs.tie(
                dofs.vel_fluid_dof(s, comp).unwrap(),
                dofs.vel_fluid_dof(m, comp).unwrap(),
            );
        }
        if let (Some(ps), Some(pm)) = (dofs.pres_fluid_dof(s), dofs.pres_fluid_dof(m)) {
            dofs.tie(ps, pm);
        }
    }
    dofs.finalize()?;
    let spec = SystemSpec {
        fluid: FluidLaw::Newtonian { mu: 1.0 },
        interface_traction: 1.0,
        ..Default::default()
    };
    let mut state = dofs.init_state();
    newton_solve(&mesh, &dofs, &spec, &mut state, &NewtonConfig::default())?;

    // C_bl = int_Gamma u_t ds
    use crate::fem::quadrature::LINE_GAUSS3;
    use crate::fem::shape::line_p2_values;
    let mut c_bl = 0.0;
    for e in mesh.interface_edges() {
        let (_, tang) = mesh.edge_normal_tangent(e);
        let len = mesh.edge_length(e);
        let nodes = e.nodes();
        for q in &LINE_GAUSS3 {
            let phi = line_p2_values(q.x);
            let mut u_t = 0.0;
            for (a, &node) in nodes.iter().enumerate() {
                let base = dofs.vel_fluid_dof(node, 0).unwrap();
                u_t += phi[a] * (tang[0] * state[base] + tang[1] * state[base + 1]);
            }
            c_bl += q.w * 0.5 * len * u_t;
        }
    }
    if !(c_bl < 0.0) {
        return Err(Error::Solver(format!(
            "boundary-layer problem produced a non-negative slip integral {c_bl}"
        )));
    }
    Ok(BoundaryLayerResult { c_bl, free_cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd_check(k: [[f64; 2]; 2], tol_sym: f64) {
        assert!(
            (k[0][1] - k[1][0]).abs() <= tol_sym * k[0][0].abs(),
            "K not symmetric: {k:?}"
        );
        let tr = k[0][0] + k[1][1];
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        assert!(tr > 0.0 && det > 0.0, "K not positive definite: {k:?}");
    }

    #[test]
    fn newtonian_permeability_is_spd_and_isotropic() {
        let rve = RveProblem::new(0.25, 0.25, FluidLaw::Newtonian { mu: 1.0 }).unwrap();
        let k = rve.permeability().unwrap();
        spd_check(k, 1e-8);
        // the cell has the symmetries of the square: K = k I
        assert!((k[0][0] - k[1][1]).abs() < 1e-6 * k[0][0], "anisotropy: {k:?}");
        assert!(k[0][1].abs() < 1e-8 * k[0][0]);
    }

    #[test]
    fn permeability_scales_inversely_with_viscosity() {
        let k1 = RveProblem::new(0.25, 0.3, FluidLaw::Newtonian { mu: 1.0 })
            .unwrap()
            .permeability()
            .unwrap();
        let k5 = RveProblem::new(0.25, 0.3, FluidLaw::Newtonian { mu: 5.0 })
            .unwrap()
            .permeability()
            .unwrap();
        assert!((k1[0][0] / k5[0][0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn permeability_decreases_with_bar_radius() {
        let mut last = f64::INFINITY;
        for xi in [0.125, 0.25, 0.35] {
            let k = RveProblem::new(xi, 0.3, FluidLaw::Newtonian { mu: 1.0 })
                .unwrap()
                .permeability()
                .unwrap();
            assert!(k[0][0] < last, "K should shrink as the bar grows");
            last = k[0][0];
        }
    }

    #[test]
    fn bingham_tangent_matches_finite_differences() {
        let rve = RveProblem::new(
            0.25,
            0.35,
            FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 },
        )
        .unwrap();
        let f = [30.0, 10.0];
        let mut state = rve.init_state();
        rve.solve(f, &mut state, &NewtonConfig::default()).unwrap();
        let (w0, k) = rve.seepage_and_tangent(f, &state).unwrap();
        spd_check(k, 1e-6);
        let eps = 1e-4 * (f[0] * f[0] + f[1] * f[1]).sqrt();
        for dir in 0..2 {
            let mut fp = f;
            fp[dir] += eps;
            let mut sp = state.clone();
            rve.solve(fp, &mut sp, &NewtonConfig::default()).unwrap();
            let wp = rve.seepage(&sp);
            let mut fm = f;
            fm[dir] -= eps;
            let mut sm = state.clone();
            rve.solve(fm, &mut sm, &NewtonConfig::default()).unwrap();
            let wm = rve.seepage(&sm);
            for i in 0..2 {
                let fd = (wp[i] - wm[i]) / (2.0 * eps);
                let scale = k[0][0].abs().max(k[1][1].abs());
                assert!(
                    (k[i][dir] - fd).abs() < 1e-4 * scale,
                    "dK[{i}][{dir}]: consistent {} vs fd {}",
                    k[i][dir],
                    fd
                );
            }
        }
    }

    #[test]
    fn bingham_seepage_is_sublinear_in_the_forcing() {
        // with a yield stress, doubling the forcing more than doubles the
        // seepage (shear thinning of the apparent viscosity)
        let rve = RveProblem::new(
            0.25,
            0.35,
            FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 },
        )
        .unwrap();
        let mut s1 = rve.init_state();
        rve.solve([20.0, 0.0], &mut s1, &NewtonConfig::default()).unwrap();
        let w1 = rve.seepage(&s1)[0];
        let mut s2 = rve.init_state();
        rve.solve([40.0, 0.0], &mut s2, &NewtonConfig::default()).unwrap();
        let w2 = rve.seepage(&s2)[0];
        assert!(w2 > 2.0 * w1, "w(2f) = {w2} vs 2 w(f) = {}", 2.0 * w1);
    }

    #[test]
    fn homogenized_law_linear_path_matches_rve() {
        let law = HomogenizedLaw::new(0.25, 0.3, FluidLaw::Newtonian { mu: 2.0 }).unwrap();
        let k = law.permeability().unwrap();
        let (w, kt) = law.seepage(0, [3.0, -1.0]).unwrap();
        assert_eq!(k, kt);
        assert!((w[0] - (k[0][0] * 3.0 - k[0][1])).abs() < 1e-14);
    }

    #[test]
    fn boundary_layer_slip_is_negative_and_converged_in_depth() {
        let r3 = solve_boundary_layer(0.25, 3, 0.3).unwrap();
        let r5 = solve_boundary_layer(0.25, 5, 0.3).unwrap();
        assert!(r3.c_bl < 0.0);
        // adding clear cells barely changes the interface slip
        let rel = ((r5.c_bl - r3.c_bl) / r3.c_bl).abs();
        assert!(rel < 5e-2, "boundary layer not converged in depth: {rel}");
        assert!(r3.beta(2.0) > 0.0);
        assert!((r3.beta(2.0) - 2.0 * r3.beta(1.0)).abs() < 1e-12);
    }
}
