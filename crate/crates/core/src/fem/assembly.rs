//! Residual and consistent-tangent assembly for the coupled problem.
//!
//! Conventions (strain rate unhalved, `D = grad u + grad u^T`, stress
//! `tau = mu_app(J2) D`, `J2 = 0.5 D:D`):
//!
//! * Stokes regions: `int 0.5 D(dw) : mu_app D(u) - int p div dw
//!   + int dq div u - int dw . rho_b`, plus the natural pressure term
//!   `+ int dw_n p_hat` on tagged boundary edges.
//! * Darcy regions: `int dw_bar . (u_bar - w_bar(f)) + int dq_bar div u_bar`
//!   with the forcing `f = rho_b - grad p_bar` and the seepage map `w_bar`
//!   supplied by a [`DarcyLaw`].
//! * Interface edges (normal pointing from the Darcy side into the fluid):
//!   tangential friction `+ int dw_t beta u_t`, the pressure traction
//!   `- int dw_n p_bar`, and optionally a prescribed tangential driving
//!   traction (the boundary-layer cell problem).
//!
//! The residual is `internal - external`, so Newton solves `J dx = -r`.
//! Velocity DOFs at nodes carrying a rotation frame are expressed in
//! normal/tangential components; element blocks are rotated before scatter.

use super::dofs::{frame_matrix, DofMap};
use super::quadrature::{LINE_GAUSS3, TRI_DEG5};
use super::shape::{line_p2_values, p1_values, p2_values, physical_p1_grads, physical_p2_grads};
use crate::constitutive::{viscosity_state, FluidLaw};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Macroscopic Darcy closure: seepage velocity and its derivative with
/// respect to the forcing `f = rho_b - grad p_bar`. The element index keys
/// warm-start caches in nonlinear implementations.
pub trait DarcyLaw {
    fn seepage(&self, elem: usize, f: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])>;

    /// Cumulative count of unit-cell solves performed so far (for solver
    /// reporting); constant closures spend none.
    fn solve_count(&self) -> usize {
        0
    }
}

/// Constant-permeability closure, `w_bar = K f`.
pub struct LinearDarcy {
    pub k: [[f64; 2]; 2],
}

impl DarcyLaw for LinearDarcy {
    fn seepage(&self, _elem: usize, f: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
        Ok((
            [
                self.k[0][0] * f[0] + self.k[0][1] * f[1],
                self.k[1][0] * f[0] + self.k[1][1] * f[1],
            ],
            self.k,
        ))
    }
}

pub struct SystemSpec<'a> {
    pub fluid: FluidLaw,
    pub body_force: [f64; 2],
    /// Optional spatially varying body force added to `body_force`;
    /// evaluated at quadrature points of Stokes elements (manufactured
    /// solutions).
    pub body_force_fn: Option<&'a dyn Fn(f64, f64) -> [f64; 2]>,
    /// Closure for Darcy regions; required iff the mesh has any.
    pub darcy: Option<&'a dyn DarcyLaw>,
    /// Interface slip coefficient (tangential friction).
    pub beta: f64,
    /// Natural pressure on fluid boundary edges, by tag.
    pub pressure_bc: Vec<(BoundaryTag, f64)>,
    /// Prescribed tangential traction on interface edges, positive along
    /// +x (boundary-layer cell problem driver).
    pub interface_traction: f64,
}

impl Default for SystemSpec<'_> {
    fn default() -> Self {
        SystemSpec {
            fluid: FluidLaw::Newtonian { mu: 1.0 },
            body_force: [0.0, 0.0],
            body_force_fn: None,
            darcy: None,
            beta: 0.0,
            pressure_bc: Vec::new(),
            interface_traction: 0.0,
        }
    }
}

/// Assembles the raw residual and raw Jacobian triplets at the given state.
pub fn assemble(
    mesh: &Mesh,
    dofs: &DofMap,
    state: &[f64],
    spec: &SystemSpec,
) -> Result<(Vec<(usize, usize, f64)>, Vec<f64>)> {
    let mut triplets = Vec::new();
    let mut residual = vec![0.0; dofs.n_raw()];

    for (t, region) in mesh.regions.iter().enumerate() {
        if region.is_stokes() {
            stokes_element(mesh, dofs, state, spec, t, &mut triplets, &mut residual);
        } else {
            let law = spec.darcy.ok_or_else(|| {
                Error::Solver("mesh has Darcy regions but no Darcy closure was supplied".into())
            })?;
            darcy_element(mesh, dofs, state, spec, t, law, &mut triplets, &mut residual)?;
        }
    }

    for e in &mesh.boundary_edges {
        match e.tag {
            BoundaryTag::Interface => {
                interface_edge(mesh, dofs, state, spec, e, &mut triplets, &mut residual);
            }
            tag => {
                if let Some(&(_, p_hat)) =
                    spec.pressure_bc.iter().find(|&&(t, _)| t == tag)
                {
                    pressure_edge(mesh, dofs, e, p_hat, &mut triplets, &mut residual);
                }
            }
        }
    }

    Ok((triplets, residual))
}

// ---------------------------------------------------------------------------
// gather / rotate / scatter helpers
// ---------------------------------------------------------------------------

/// Cartesian velocity at a node, undoing the node frame if present.
fn gather_vel(
    dofs: &DofMap,
    state: &[f64],
    node: usize,
    raw: Option<usize>,
) -> [f64; 2] {
    let base = raw.expect("velocity dof missing at an element node");
    let v = [state[base], state[base + 1]];
    match dofs.frame(node) {
        None => v,
        Some(n) => {
            let q = frame_matrix(n);
            [
                q[0][0] * v[0] + q[0][1] * v[1],
                q[1][0] * v[0] + q[1][1] * v[1],
            ]
        }
    }
}

/// Rotates the 2x2 velocity blocks of an element matrix/residual into the
/// node frames: `K <- Q^T K Q`, `r <- Q^T r`. `vel_slots` lists the local
/// offset of each velocity pair together with its mesh node.
fn apply_frames<const N: usize>(
    dofs: &DofMap,
    ke: &mut [[f64; N]; N],
    re: &mut [f64; N],
    vel_slots: &[(usize, usize)],
) {
    for &(off, node) in vel_slots {
        let Some(n) = dofs.frame(node) else { continue };
        let q = frame_matrix(n);
        // rows: block <- Q^T block
        for col in 0..N {
            let a = ke[off][col];
            let b = ke[off + 1][col];
            ke[off][col] = q[0][0] * a + q[1][0] * b;
            ke[off + 1][col] = q[0][1] * a + q[1][1] * b;
        }
        // cols: block <- block Q
        for row in 0..N {
            let a = ke[row][off];
            let b = ke[row][off + 1];
            ke[row][off] = a * q[0][0] + b * q[1][0];
            ke[row][off + 1] = a * q[0][1] + b * q[1][1];
        }
        let a = re[off];
        let b = re[off + 1];
        re[off] = q[0][0] * a + q[1][0] * b;
        re[off + 1] = q[0][1] * a + q[1][1] * b;
    }
}

fn scatter<const N: usize>(
    ke: &[[f64; N]; N],
    re: &[f64; N],
    map: &[Option<usize>; N],
    triplets: &mut Vec<(usize, usize, f64)>,
    residual: &mut [f64],
) {
    for i in 0..N {
        let Some(gi) = map[i] else { continue };
        residual[gi] += re[i];
        for j in 0..N {
            let Some(gj) = map[j] else { continue };
            if ke[i][j] != 0.0 {
                triplets.push((gi, gj, ke[i][j]));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// element routines
// ---------------------------------------------------------------------------

fn tri_coords(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let c = mesh.corner_coords(t);
    [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y]]
}

/// Taylor-Hood Stokes element: 12 velocity + 3 pressure local DOFs.
fn stokes_element(
    mesh: &Mesh,
    dofs: &DofMap,
    state: &[f64],
    spec: &SystemSpec,
    t: usize,
    triplets: &mut Vec<(usize, usize, f64)>,
    residual: &mut [f64],
) {
    let conn = mesh.triangles[t];
    let coords = tri_coords(mesh, t);
    let mut u = [[0.0; 2]; 6];
    let mut p = [0.0; 3];
    for a in 0..6 {
        u[a] = gather_vel(dofs, state, conn[a], dofs.vel_fluid_dof(conn[a], 0));
    }
    for a in 0..3 {
        p[a] = state[dofs.pres_fluid_dof(conn[a]).expect("missing pressure dof")];
    }

    let mut ke = [[0.0f64; 15]; 15];
    let mut re = [0.0f64; 15];
    for q in &TRI_DEG5 {
        let (g, det) = physical_p2_grads(&coords, q.r, q.s);
        let w = q.w * det;
        let phi = p2_values(q.r, q.s);
        let psi = p1_values(q.r, q.s);
        // velocity gradient L_ij = du_i/dx_j and unhalved strain rate D
        let mut l = [[0.0; 2]; 2];
        for a in 0..6 {
            for i in 0..2 {
                for j in 0..2 {
                    l[i][j] += u[a][i] * g[a][j];
                }
            }
        }
        let d = [
            [2.0 * l[0][0], l[0][1] + l[1][0]],
            [l[0][1] + l[1][0], 2.0 * l[1][1]],
        ];
        let j2 = 0.5 * (d[0][0] * d[0][0] + d[1][1] * d[1][1] + 2.0 * d[0][1] * d[0][1]);
        let (mu, dmu) = viscosity_state(&spec.fluid, j2);
        let div_u = l[0][0] + l[1][1];
        let p_val = psi[0] * p[0] + psi[1] * p[1] + psi[2] * p[2];
        let mut body = spec.body_force;
        if let Some(f) = spec.body_force_fn {
            let x = psi[0] * coords[0][0] + psi[1] * coords[1][0] + psi[2] * coords[2][0];
            let y = psi[0] * coords[0][1] + psi[1] * coords[1][1] + psi[2] * coords[2][1];
            let extra = f(x, y);
            body[0] += extra[0];
            body[1] += extra[1];
        }

        // D . grad(phi_a), reused for residual and the dyadic tangent part
        let mut dg = [[0.0; 2]; 6];
        for a in 0..6 {
            dg[a][0] = d[0][0] * g[a][0] + d[0][1] * g[a][1];
            dg[a][1] = d[1][0] * g[a][0] + d[1][1] * g[a][1];
        }

        for a in 0..6 {
            for i in 0..2 {
                re[2 * a + i] +=
                    w * (0.5 * mu * dg[a][i] - p_val * g[a][i] - phi[a] * body[i]);
            }
        }
        for aa in 0..3 {
            re[12 + aa] += w * psi[aa] * div_u;
        }
        for a in 0..6 {
            for b in 0..6 {
                let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                for i in 0..2 {
                    for k in 0..2 {
                        let mut v = 0.5
                            * mu
                            * (if i == k { gg } else { 0.0 } + g[a][k] * g[b][i]);
                        v += dmu * dg[a][i] * dg[b][k];
                        ke[2 * a + i][2 * b + k] += w * v;
                    }
                }
            }
            for bb in 0..3 {
                for i in 0..2 {
                    ke[2 * a + i][12 + bb] -= w * g[a][i] * psi[bb];
                }
            }
        }
        for aa in 0..3 {
            for b in 0..6 {
                for k in 0..2 {
                    ke[12 + aa][2 * b + k] += w * psi[aa] * g[b][k];
                }
            }
        }
    }

    let vel_slots: Vec<(usize, usize)> = (0..6).map(|a| (2 * a, conn[a])).collect();
    apply_frames(dofs, &mut ke, &mut re, &vel_slots);
    let mut map = [None; 15];
    for a in 0..6 {
        map[2 * a] = dofs.vel_fluid_dof(conn[a], 0);
        map[2 * a + 1] = dofs.vel_fluid_dof(conn[a], 1);
    }
    for a in 0..3 {
        map[12 + a] = dofs.pres_fluid_dof(conn[a]);
    }
    scatter(&ke, &re, &map, triplets, residual);
}

/// Darcy element: seepage identity `u_bar = w_bar(f)` weighted with P2
/// test functions plus the macro continuity equation. The forcing is
/// constant per element (P1 pressure, constant body force), so the closure
/// is evaluated once per element.
fn darcy_element(
    mesh: &Mesh,
    dofs: &DofMap,
    state: &[f64],
    spec: &SystemSpec,
    t: usize,
    law: &dyn DarcyLaw,
    triplets: &mut Vec<(usize, usize, f64)>,
    residual: &mut [f64],
) -> Result<()> {
    let conn = mesh.triangles[t];
    let coords = tri_coords(mesh, t);
    let mut ubar = [[0.0; 2]; 6];
    let mut pbar = [0.0; 3];
    for a in 0..6 {
        ubar[a] = gather_vel(dofs, state, conn[a], dofs.vel_darcy_dof(conn[a], 0));
    }
    for a in 0..3 {
        pbar[a] = state[dofs.pres_darcy_dof(conn[a]).expect("missing macro pressure dof")];
    }

    let (gp1, _) = physical_p1_grads(&coords);
    let grad_p = [
        gp1[0][0] * pbar[0] + gp1[1][0] * pbar[1] + gp1[2][0] * pbar[2],
        gp1[0][1] * pbar[0] + gp1[1][1] * pbar[1] + gp1[2][1] * pbar[2],
    ];
    let f = [spec.body_force[0] - grad_p[0], spec.body_force[1] - grad_p[1]];
    let (w_bar, k_perm) = law.seepage(t, f)?;

    let mut ke = [[0.0f64; 15]; 15];
    let mut re = [0.0f64; 15];
    for q in &TRI_DEG5 {
        let (g, det) = physical_p2_grads(&coords, q.r, q.s);
        let w = q.w * det;
        let phi = p2_values(q.r, q.s);
        let psi = p1_values(q.r, q.s);
        let mut u_qp = [0.0; 2];
        let mut div_u = 0.0;
        for a in 0..6 {
            u_qp[0] += phi[a] * ubar[a][0];
            u_qp[1] += phi[a] * ubar[a][1];
            div_u += g[a][0] * ubar[a][0] + g[a][1] * ubar[a][1];
        }
        for a in 0..6 {
            for i in 0..2 {
                re[2 * a + i] += w * phi[a] * (u_qp[i] - w_bar[i]);
            }
        }
        for aa in 0..3 {
            re[12 + aa] += w * psi[aa] * div_u;
        }
        for a in 0..6 {
            for b in 0..6 {
                let mass = w * phi[a] * phi[b];
                ke[2 * a][2 * b] += mass;
                ke[2 * a + 1][2 * b + 1] += mass;
            }
            // d w_bar / d p_bar_B = -K grad(psi_B)  =>  +K in the residual
            for bb in 0..3 {
                for i in 0..2 {
                    let kg = k_perm[i][0] * gp1[bb][0] + k_perm[i][1] * gp1[bb][1];
                    ke[2 * a + i][12 + bb] += w * phi[a] * kg;
                }
            }
        }
        for aa in 0..3 {
            for b in 0..6 {
                for k in 0..2 {
                    ke[12 + aa][2 * b + k] += w * psi[aa] * g[b][k];
                }
            }
        }
    }

    let vel_slots: Vec<(usize, usize)> = (0..6).map(|a| (2 * a, conn[a])).collect();
    apply_frames(dofs, &mut ke, &mut re, &vel_slots);
    let mut map = [None; 15];
    for a in 0..6 {
        map[2 * a] = dofs.vel_darcy_dof(conn[a], 0);
        map[2 * a + 1] = dofs.vel_darcy_dof(conn[a], 1);
    }
    for a in 0..3 {
        map[12 + a] = dofs.pres_darcy_dof(conn[a]);
    }
    scatter(&ke, &re, &map, triplets, residual);
    Ok(())
}

/// Interface edge: tangential friction and the macro-pressure traction on
/// the fluid momentum equations, plus an optional prescribed tangential
/// traction. Local DOFs: 6 fluid velocity (nodes a, b, mid), 2 macro
/// pressures (corners a, b).
fn interface_edge(
    mesh: &Mesh,
    dofs: &DofMap,
    state: &[f64],
    spec: &SystemSpec,
    e: &crate::mesh::BoundaryEdge,
    triplets: &mut Vec<(usize, usize, f64)>,
    residual: &mut [f64],
) {
    let (n, tangent) = mesh.edge_normal_tangent(e);
    let len = mesh.edge_length(e);
    let nodes = e.nodes();
    let mut u = [[0.0; 2]; 3];
    for (a, &node) in nodes.iter().enumerate() {
        u[a] = gather_vel(dofs, state, node, dofs.vel_fluid_dof(node, 0));
    }
    let has_pbar = dofs.pres_darcy_dof(e.a).is_some() && dofs.pres_darcy_dof(e.b).is_some();
    let pbar = if has_pbar {
        [
            state[dofs.pres_darcy_dof(e.a).unwrap()],
            state[dofs.pres_darcy_dof(e.b).unwrap()],
        ]
    } else {
        [0.0; 2]
    };

    let mut ke = [[0.0f64; 8]; 8];
    let mut re = [0.0f64; 8];
    for q in &LINE_GAUSS3 {
        let w = q.w * 0.5 * len;
        let phi = line_p2_values(q.x);
        let psi = [0.5 * (1.0 - q.x), 0.5 * (1.0 + q.x)];
        let mut u_t = 0.0;
        for a in 0..3 {
            u_t += phi[a] * (tangent[0] * u[a][0] + tangent[1] * u[a][1]);
        }
        let p_val = if has_pbar { psi[0] * pbar[0] + psi[1] * pbar[1] } else { 0.0 };
        for a in 0..3 {
            for i in 0..2 {
                re[2 * a + i] += w
                    * phi[a]
                    * (spec.beta * tangent[i] * u_t - n[i] * p_val
                        - if i == 0 { spec.interface_traction } else { 0.0 });
                for b in 0..3 {
                    for k in 0..2 {
                        ke[2 * a + i][2 * b + k] +=
                            w * spec.beta * phi[a] * phi[b] * tangent[i] * tangent[k];
                    }
                }
                if has_pbar {
                    for bb in 0..2 {
                        ke[2 * a + i][6 + bb] -= w * phi[a] * n[i] * psi[bb];
                    }
                }
            }
        }
    }

    let vel_slots: Vec<(usize, usize)> =
        nodes.iter().enumerate().map(|(a, &node)| (2 * a, node)).collect();
    apply_frames(dofs, &mut ke, &mut re, &vel_slots);
    let mut map = [None; 8];
    for (a, &node) in nodes.iter().enumerate() {
        map[2 * a] = dofs.vel_fluid_dof(node, 0);
        map[2 * a + 1] = dofs.vel_fluid_dof(node, 1);
    }
    if has_pbar {
        map[6] = dofs.pres_darcy_dof(e.a);
        map[7] = dofs.pres_darcy_dof(e.b);
    }
    scatter(&ke, &re, &map, triplets, residual);
}

/// Natural pressure boundary term `+ int dw_n p_hat` on a fluid edge.
fn pressure_edge(
    mesh: &Mesh,
    dofs: &DofMap,
    e: &crate::mesh::BoundaryEdge,
    p_hat: f64,
    triplets: &mut Vec<(usize, usize, f64)>,
    residual: &mut [f64],
) {
    let (n, _) = mesh.edge_normal_tangent(e);
    let len = mesh.edge_length(e);
    let nodes = e.nodes();
    let mut ke = [[0.0f64; 6]; 6];
    let mut re = [0.0f64; 6];
    for q in &LINE_GAUSS3 {
        let w = q.w * 0.5 * len;
        let phi = line_p2_values(q.x);
        for a in 0..3 {
            for i in 0..2 {
                re[2 * a + i] += w * phi[a] * n[i] * p_hat;
            }
        }
    }
    let vel_slots: Vec<(usize, usize)> =
        nodes.iter().enumerate().map(|(a, &node)| (2 * a, node)).collect();
    apply_frames(dofs, &mut ke, &mut re, &vel_slots);
    let mut map = [None; 6];
    for (a, &node) in nodes.iter().enumerate() {
        map[2 * a] = dofs.vel_fluid_dof(node, 0);
        map[2 * a + 1] = dofs.vel_fluid_dof(node, 1);
    }
    scatter(&ke, &re, &map, triplets, residual);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle_mesh;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_state(dofs: &DofMap, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..dofs.n_raw()).map(|_| rng.gen_range(-0.5..0.5)).collect()
    }

    fn fd_check(mesh: &Mesh, spec: &SystemSpec, seed: u64) {
        let mut dofs = DofMap::new(mesh);
        dofs.finalize().unwrap();
        let state = random_state(&dofs, seed);
        let (triplets, r0) = assemble(mesh, &dofs, &state, spec).unwrap();
        let mut rng = StdRng::seed_from_u64(seed ^ 0xabcd);
        let dir: Vec<f64> = (0..dofs.n_raw()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // J * dir from triplets
        let mut jd = vec![0.0; dofs.n_raw()];
        for &(i, j, v) in &triplets {
            jd[i] += v * dir[j];
        }
        let eps = 1e-7;
        let plus: Vec<f64> = state.iter().zip(&dir).map(|(s, d)| s + eps * d).collect();
        let minus: Vec<f64> = state.iter().zip(&dir).map(|(s, d)| s - eps * d).collect();
        let (_, rp) = assemble(mesh, &dofs, &plus, spec).unwrap();
        let (_, rm) = assemble(mesh, &dofs, &minus, spec).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..dofs.n_raw() {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            num += (jd[i] - fd).powi(2);
            den += fd.powi(2).max(1.0);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-5, "jacobian/fd mismatch {rel}");
    }

    #[test]
    fn newtonian_jacobian_matches_finite_differences() {
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.5).unwrap();
        let spec = SystemSpec {
            fluid: FluidLaw::Newtonian { mu: 2.0 },
            body_force: [0.3, -0.1],
            ..Default::default()
        };
        fd_check(&mesh, &spec, 7);
    }

    #[test]
    fn bingham_jacobian_matches_finite_differences() {
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.5).unwrap();
        let spec = SystemSpec {
            fluid: FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 },
            body_force: [0.0, 0.0],
            ..Default::default()
        };
        for seed in [1, 2, 3] {
            fd_check(&mesh, &spec, seed);
        }
    }

    #[test]
    fn rigid_motion_has_zero_viscous_residual() {
        // u = (c1 - w y, c2 + w x), p = 0: D = 0 and div u = 0, so the
        // residual reduces to the body-force term; with zero body force it
        // must vanish identically.
        let mesh = generate_rectangle_mesh(2.0, 1.0, 0.4).unwrap();
        let mut dofs = DofMap::new(&mesh);
        dofs.finalize().unwrap();
        let mut state = vec![0.0; dofs.n_raw()];
        let (c1, c2, om) = (0.7, -0.3, 1.3);
        for (node, p) in mesh.vertices.iter().enumerate() {
            let base = dofs.vel_fluid_dof(node, 0).unwrap();
            state[base] = c1 - om * p.y;
            state[base + 1] = c2 + om * p.x;
        }
        let spec = SystemSpec {
            fluid: FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 },
            ..Default::default()
        };
        let (_, r) = assemble(&mesh, &dofs, &state, &spec).unwrap();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-10, "rigid motion residual {norm}");
    }

    #[test]
    fn constant_pressure_balances_uniform_boundary_pressure() {
        // u = 0, p = c, natural pressure p_hat = c on the whole boundary:
        // momentum rows must balance exactly (div theorem holds discretely).
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.3).unwrap();
        let mut dofs = DofMap::new(&mesh);
        dofs.finalize().unwrap();
        let mut state = vec![0.0; dofs.n_raw()];
        let c = 2.5;
        for node in 0..mesh.n_corners {
            if let Some(d) = dofs.pres_fluid_dof(node) {
                state[d] = c;
            }
        }
        let spec = SystemSpec {
            pressure_bc: vec![
                (BoundaryTag::Inlet, c),
                (BoundaryTag::Outlet, c),
                (BoundaryTag::SlipWall, c),
            ],
            ..Default::default()
        };
        let (_, r) = assemble(&mesh, &dofs, &state, &spec).unwrap();
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-12, "residual {norm}");
    }

    #[test]
    fn divergence_rows_vanish_for_divergence_free_quadratic_field() {
        // u = (x^2, -2 x y) is divergence free and exactly representable
        // in P2, so the continuity rows must vanish to round-off.
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.25).unwrap();
        let mut dofs = DofMap::new(&mesh);
        dofs.finalize().unwrap();
        let mut state = vec![0.0; dofs.n_raw()];
        for (node, p) in mesh.vertices.iter().enumerate() {
            let base = dofs.vel_fluid_dof(node, 0).unwrap();
            state[base] = p.x * p.x;
            state[base + 1] = -2.0 * p.x * p.y;
        }
        let spec = SystemSpec::default();
        let (_, r) = assemble(&mesh, &dofs, &state, &spec).unwrap();
        for node in 0..mesh.n_corners {
            let d = dofs.pres_fluid_dof(node).unwrap();
            assert!(r[d].abs() < 1e-13, "continuity residual {}", r[d]);
        }
    }

    #[test]
    fn newtonian_viscous_block_is_symmetric() {
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.5).unwrap();
        let mut dofs = DofMap::new(&mesh);
        dofs.finalize().unwrap();
        let state = vec![0.0; dofs.n_raw()];
        let spec = SystemSpec::default();
        let (triplets, _) = assemble(&mesh, &dofs, &state, &spec).unwrap();
        let n = dofs.n_raw();
        let mut dense = vec![vec![0.0; n]; n];
        for &(i, j, v) in &triplets {
            dense[i][j] += v;
        }
        let vel_dofs: Vec<usize> = (0..mesh.n_nodes())
            .flat_map(|n| [dofs.vel_fluid_dof(n, 0).unwrap(), dofs.vel_fluid_dof(n, 1).unwrap()])
            .collect();
        for &i in &vel_dofs {
            for &j in &vel_dofs {
                assert!((dense[i][j] - dense[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frames_leave_the_physics_invariant() {
        // Installing frames must not change the reduced problem: compare
        // residual norms of the same Cartesian field with and without a
        // frame installed (state rotated accordingly).
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.5).unwrap();
        let mut plain = DofMap::new(&mesh);
        plain.finalize().unwrap();
        let mut framed = DofMap::new(&mesh);
        let normal = [0.6, 0.8];
        let node = 0;
        framed.set_frame(node, normal);
        framed.finalize().unwrap();
        let spec = SystemSpec {
            fluid: FluidLaw::Bingham { mu0: 2.0, tau0: 1.0, m: 5.0 },
            body_force: [0.1, 0.2],
            ..Default::default()
        };
        let state = random_state(&plain, 11);
        let mut rot_state = state.clone();
        // express node's velocity in (n, t) components
        let base = plain.vel_fluid_dof(node, 0).unwrap();
        let q = frame_matrix(normal);
        let vx = state[base];
        let vy = state[base + 1];
        rot_state[base] = q[0][0] * vx + q[1][0] * vy;
        rot_state[base + 1] = q[0][1] * vx + q[1][1] * vy;
        let (_, r1) = assemble(&mesh, &plain, &state, &spec).unwrap();
        let (_, r2) = assemble(&mesh, &framed, &rot_state, &spec).unwrap();
        let n1: f64 = r1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n2: f64 = r2.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n1 - n2).abs() < 1e-12 * n1.max(1.0), "{n1} vs {n2}");
    }
}
