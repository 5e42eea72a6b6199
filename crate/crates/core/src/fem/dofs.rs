//! Degree-of-freedom bookkeeping for the mixed Taylor-Hood problems.
//!
//! Four scalar/vector fields can be active on a mesh: the free-fluid
//! velocity (P2, 2 components), the Darcy seepage velocity (P2, 2
//! components), and the two pressures (P1, 1 component each). Every active
//! (field, node, component) gets a *raw* index. Constraints are expressed
//! per raw index:
//!
//! * `Fixed(v)` — Dirichlet value; the Newton correction of the DOF is 0.
//! * `Tied(m)` — the DOF is identified with raw DOF `m` (periodic pairs,
//!   shared interface normal components).
//! * `Free(k)` — reduced (solved-for) index `k`, assigned by [`DofMap::finalize`].
//!
//! Velocity DOFs at nodes carrying a rotation frame represent the
//! normal/tangential components `(u_n, u_t)` rather than `(u_x, u_y)`;
//! assembly rotates element blocks into these frames before scattering, so
//! the constraint machinery never needs to know about frames.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofStatus {
    Free,
    Fixed(f64),
    Tied(usize),
}

/// Outcome of resolving a raw DOF through tie chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolved {
    Free(usize),
    Fixed(f64),
}

pub struct DofMap {
    /// node -> raw base of the 2 fluid velocity DOFs
    vel_fluid: Vec<Option<usize>>,
    vel_darcy: Vec<Option<usize>>,
    /// corner node -> raw pressure DOF
    pres_fluid: Vec<Option<usize>>,
    pres_darcy: Vec<Option<usize>>,
    /// per mesh node: unit normal of the local frame, tangent is
    /// `(-n_y, n_x)`; applies to both velocity fields at that node
    frames: Vec<Option<[f64; 2]>>,
    status: Vec<DofStatus>,
    /// raw -> resolved, filled in by finalize()
    resolved: Vec<Resolved>,
    n_free: usize,
    finalized: bool,
}

impl DofMap {
    /// Activates fields per the triangle regions: Stokes regions carry the
    /// fluid velocity/pressure, Darcy regions the seepage velocity and
    /// macro pressure.
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let mut fluid_node = vec![false; n];
        let mut darcy_node = vec![false; n];
        for (t, region) in mesh.triangles.iter().zip(&mesh.regions) {
            let flag = if region.is_stokes() { &mut fluid_node } else { &mut darcy_node };
            for &nid in t {
                flag[nid] = true;
            }
        }
        let mut n_raw = 0;
        let mut base = |active: bool, count: usize| -> Option<usize> {
            if active {
                let b = n_raw;
                n_raw += count;
                Some(b)
            } else {
                None
            }
        };
        let mut vel_fluid = Vec::with_capacity(n);
        let mut vel_darcy = Vec::with_capacity(n);
        let mut pres_fluid = Vec::with_capacity(n);
        let mut pres_darcy = Vec::with_capacity(n);
        for i in 0..n {
            vel_fluid.push(base(fluid_node[i], 2));
            vel_darcy.push(base(darcy_node[i], 2));
            let corner = mesh.is_corner(i);
            pres_fluid.push(base(corner && fluid_node[i], 1));
            pres_darcy.push(base(corner && darcy_node[i], 1));
        }
        DofMap {
            vel_fluid,
            vel_darcy,
            pres_fluid,
            pres_darcy,
            frames: vec![None; n],
            status: vec![DofStatus::Free; n_raw],
            resolved: Vec::new(),
            n_free: 0,
            finalized: false,
        }
    }

    pub fn n_raw(&self) -> usize {
        self.status.len()
    }

    pub fn n_free(&self) -> usize {
        assert!(self.finalized);
        self.n_free
    }

    pub fn vel_fluid_dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.vel_fluid[node].map(|b| b + comp)
    }

    pub fn vel_darcy_dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.vel_darcy[node].map(|b| b + comp)
    }

    pub fn pres_fluid_dof(&self, node: usize) -> Option<usize> {
        self.pres_fluid[node]
    }

    pub fn pres_darcy_dof(&self, node: usize) -> Option<usize> {
        self.pres_darcy[node]
    }

    pub fn frame(&self, node: usize) -> Option<[f64; 2]> {
        self.frames[node]
    }

    /// Installs a normal/tangential frame at a node. Velocity DOFs of both
    /// fields at the node then mean `(u_n, u_t)`. Installing the same
    /// normal twice is a no-op; conflicting normals are an error (corner
    /// nodes of a polygonal interface get the first edge's normal).
    pub fn set_frame(&mut self, node: usize, normal: [f64; 2]) -> bool {
        match self.frames[node] {
            None => {
                self.frames[node] = Some(normal);
                true
            }
            Some(existing) => {
                let dot = existing[0] * normal[0] + existing[1] * normal[1];
                dot > 1.0 - 1e-9
            }
        }
    }

    pub fn fix(&mut self, raw: usize, value: f64) {
        debug_assert!(!self.finalized);
        // later constraints must not silently override an existing tie
        match self.status[raw] {
            DofStatus::Free | DofStatus::Fixed(_) => self.status[raw] = DofStatus::Fixed(value),
            DofStatus::Tied(_) => {}
        }
    }

    pub fn tie(&mut self, slave: usize, master: usize) {
        debug_assert!(!self.finalized);
        if slave != master {
            self.status[slave] = DofStatus::Tied(master);
        }
    }

    pub fn is_tied(&self, raw: usize) -> bool {
        matches!(self.status[raw], DofStatus::Tied(_))
    }

    pub fn is_fixed(&self, raw: usize) -> bool {
        matches!(self.resolve_status(raw), DofStatus::Fixed(_))
    }

    fn resolve_status(&self, mut raw: usize) -> DofStatus {
        for _ in 0..64 {
            match self.status[raw] {
                DofStatus::Tied(m) => raw = m,
                other => return other,
            }
        }
        panic!("tie chain too deep at raw dof {raw}");
    }

    /// Numbers the free DOFs and freezes the constraint set.
    pub fn finalize(&mut self) -> Result<()> {
        let n = self.n_raw();
        // detect cycles
        for raw in 0..n {
            let mut cur = raw;
            let mut steps = 0;
            while let DofStatus::Tied(m) = self.status[cur] {
                cur = m;
                steps += 1;
                if steps > n {
                    return Err(Error::Solver(format!("cyclic tie chain at dof {raw}")));
                }
            }
        }
        let mut resolved = vec![Resolved::Fixed(0.0); n];
        let mut n_free = 0;
        for raw in 0..n {
            if let DofStatus::Free = self.status[raw] {
                resolved[raw] = Resolved::Free(n_free);
                n_free += 1;
            }
        }
        for raw in 0..n {
            let mut cur = raw;
            while let DofStatus::Tied(m) = self.status[cur] {
                cur = m;
            }
            resolved[raw] = match self.status[cur] {
                DofStatus::Free => resolved[cur],
                DofStatus::Fixed(v) => Resolved::Fixed(v),
                DofStatus::Tied(_) => unreachable!(),
            };
        }
        self.resolved = resolved;
        self.n_free = n_free;
        self.finalized = true;
        Ok(())
    }

    pub fn resolve(&self, raw: usize) -> Resolved {
        assert!(self.finalized);
        self.resolved[raw]
    }

    /// Initial raw state: Dirichlet values installed, tied DOFs synced,
    /// free DOFs zero.
    pub fn init_state(&self) -> Vec<f64> {
        assert!(self.finalized);
        let mut state = vec![0.0; self.n_raw()];
        for raw in 0..self.n_raw() {
            if let Resolved::Fixed(v) = self.resolved[raw] {
                state[raw] = v;
            }
        }
        state
    }

    /// Applies a reduced Newton correction to the raw state. Fixed DOFs are
    /// untouched; tied DOFs copy their master.
    pub fn apply_correction(&self, state: &mut [f64], dx: &[f64], scale: f64) {
        assert!(self.finalized);
        for raw in 0..self.n_raw() {
            if let DofStatus::Free = self.status[raw] {
                if let Resolved::Free(k) = self.resolved[raw] {
                    state[raw] += scale * dx[k];
                }
            }
        }
        self.sync_tied(state);
    }

    /// Copies master values onto tied DOFs.
    pub fn sync_tied(&self, state: &mut [f64]) {
        for raw in 0..self.n_raw() {
            if let DofStatus::Tied(_) = self.status[raw] {
                let mut cur = raw;
                while let DofStatus::Tied(m) = self.status[cur] {
                    cur = m;
                }
                state[raw] = state[cur];
            }
        }
    }

    /// Condenses a raw residual onto the free DOFs: tied rows accumulate
    /// into their masters, fixed rows drop.
    pub fn reduce_residual(&self, raw_res: &[f64]) -> Vec<f64> {
        assert!(self.finalized);
        let mut out = vec![0.0; self.n_free];
        for (raw, &v) in raw_res.iter().enumerate() {
            if let Resolved::Free(k) = self.resolved[raw] {
                out[k] += v;
            }
        }
        out
    }

    /// Condenses raw matrix triplets onto the free DOFs.
    pub fn reduce_triplets(&self, raw: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
        assert!(self.finalized);
        let mut out = Vec::with_capacity(raw.len());
        for &(i, j, v) in raw {
            if v == 0.0 {
                continue;
            }
            if let (Resolved::Free(ri), Resolved::Free(rj)) =
                (self.resolved[i], self.resolved[j])
            {
                out.push((ri, rj, v));
            }
        }
        out
    }
}

/// Rotation from frame coordinates to Cartesian at one node:
/// `u_xy = Q u_nt`, columns are the normal and the tangent `(-n_y, n_x)`.
pub fn frame_matrix(normal: [f64; 2]) -> [[f64; 2]; 2] {
    [[normal[0], -normal[1]], [normal[1], normal[0]]]
}
