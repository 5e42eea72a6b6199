//! Conforming triangular meshes with P2/P1 (Taylor-Hood) connectivity.
//!
//! Meshes are generated for plain rectangles, perforated domains with
//! circular holes, periodic unit cells, boundary-layer stacks, and coupled
//! Stokes-Darcy domains. Triangles carry six nodes (three corner vertices,
//! counterclockwise, followed by the edge midpoints 0-1, 1-2, 2-0).

mod generate;
mod io;

pub use generate::{
    generate_boundary_layer_mesh, generate_dns_mesh, generate_homogenized_mesh,
    generate_perforated_mesh, generate_rectangle_mesh, generate_rve_mesh, ObstacleGrid,
};
pub use io::{read_mesh, write_mesh};

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    SlipWall,
    Obstacle,
    Interface,
    PeriodicMaster,
    PeriodicSlave,
    BlTop,
    BlBottom,
}

impl BoundaryTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "INLET",
            BoundaryTag::Outlet => "OUTLET",
            BoundaryTag::SlipWall => "SLIP_WALL",
            BoundaryTag::Obstacle => "OBSTACLE",
            BoundaryTag::Interface => "INTERFACE",
            BoundaryTag::PeriodicMaster => "PERIODIC_MASTER",
            BoundaryTag::PeriodicSlave => "PERIODIC_SLAVE",
            BoundaryTag::BlTop => "BL_TOP",
            BoundaryTag::BlBottom => "BL_BOTTOM",
        }
    }

    pub fn from_name(s: &str) -> Option<BoundaryTag> {
        Some(match s {
            "INLET" => BoundaryTag::Inlet,
            "OUTLET" => BoundaryTag::Outlet,
            "SLIP_WALL" => BoundaryTag::SlipWall,
            "OBSTACLE" => BoundaryTag::Obstacle,
            "INTERFACE" => BoundaryTag::Interface,
            "PERIODIC_MASTER" => BoundaryTag::PeriodicMaster,
            "PERIODIC_SLAVE" => BoundaryTag::PeriodicSlave,
            "BL_TOP" => BoundaryTag::BlTop,
            "BL_BOTTOM" => BoundaryTag::BlBottom,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Darcy,
    RveFluid,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Fluid => "FLUID",
            Region::Darcy => "DARCY",
            Region::RveFluid => "RVE_FLUID",
        }
    }

    pub fn from_name(s: &str) -> Option<Region> {
        Some(match s {
            "FLUID" => Region::Fluid,
            "DARCY" => Region::Darcy,
            "RVE_FLUID" => Region::RveFluid,
            _ => return None,
        })
    }

    /// Regions assembled with the Stokes weak form.
    pub fn is_stokes(&self) -> bool {
        matches!(self, Region::Fluid | Region::RveFluid)
    }
}

/// A tagged edge. Endpoints `a`, `b` are corner vertices, `mid` is the P2
/// midpoint node. The orientation is such that the unit normal
/// `(t_y, -t_x)` obtained from the direction `t = b - a` points out of the
/// domain (boundary edges), or from the porous/Darcy side into the free
/// fluid (interface edges).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub mid: usize,
    pub tag: BoundaryTag,
}

impl BoundaryEdge {
    pub fn nodes(&self) -> [usize; 3] {
        [self.a, self.b, self.mid]
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    /// Corner vertices first, then edge midpoints.
    pub vertices: Vec<Point>,
    pub n_corners: usize,
    /// Six-node connectivity: corners ccw, then midpoints 0-1, 1-2, 2-0.
    pub triangles: Vec<[usize; 6]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Periodic node identification (master, slave), covering corner and
    /// midpoint nodes.
    pub periodic_pairs: Vec<(usize, usize)>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_corner(&self, node: usize) -> bool {
        node < self.n_corners
    }

    pub fn corner_coords(&self, tri: usize) -> [Point; 3] {
        let t = &self.triangles[tri];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corner_coords(tri);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.regions[t] == region)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn centroid(&self, tri: usize) -> Point {
        let [a, b, c] = self.corner_coords(tri);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        self.vertices[e.a].dist(&self.vertices[e.b])
    }

    /// Unit normal of a tagged edge (out of the domain / out of the porous
    /// side), and the unit tangent.
    pub fn edge_normal_tangent(&self, e: &BoundaryEdge) -> ([f64; 2], [f64; 2]) {
        let a = self.vertices[e.a];
        let b = self.vertices[e.b];
        let len = a.dist(&b);
        let t = [(b.x - a.x) / len, (b.y - a.y) / len];
        ([t[1], -t[0]], t)
    }

    /// Structural sanity checks shared by all generators.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashMap::new();
        for (i, tri) in self.triangles.iter().enumerate() {
            let area = self.signed_area(i);
            if area <= 0.0 {
                return Err(format!("triangle {i} has non-positive area {area}"));
            }
            for k in 0..3 {
                let a = self.vertices[tri[k]];
                let b = self.vertices[tri[(k + 1) % 3]];
                let m = self.vertices[tri[3 + k]];
                let scale = a.dist(&b).max(1.0);
                let err = ((m.x - 0.5 * (a.x + b.x)).powi(2)
                    + (m.y - 0.5 * (a.y + b.y)).powi(2))
                .sqrt();
                if err > 1e-12 * scale {
                    return Err(format!("triangle {i}: midpoint {k} off the edge center"));
                }
            }
        }
        for e in &self.boundary_edges {
            let key = if e.a < e.b { (e.a, e.b) } else { (e.b, e.a) };
            if let Some(prev) = seen.insert(key, e.tag) {
                if prev != e.tag {
                    return Err(format!(
                        "edge ({}, {}) tagged both {} and {}",
                        e.a,
                        e.b,
                        prev.name(),
                        e.tag.name()
                    ));
                }
            }
        }
        for &(m, s) in &self.periodic_pairs {
            if m >= self.n_nodes() || s >= self.n_nodes() {
                return Err("periodic pair out of range".into());
            }
        }
        Ok(())
    }

    pub fn interface_edges(&self) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Interface)
    }

    /// Point locator for field interpolation.
    pub fn locator(&self) -> Locator<'_> {
        Locator::new(self)
    }
}

/// Uniform-grid spatial index over triangles.
pub struct Locator<'m> {
    mesh: &'m Mesh,
    x0: f64,
    y0: f64,
    inv_h: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl<'m> Locator<'m> {
    fn new(mesh: &'m Mesh) -> Self {
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for p in &mesh.vertices[..mesh.n_corners] {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let n_target = (mesh.triangles.len() as f64).sqrt().ceil() as usize + 1;
        let nx = n_target.max(1);
        let ny = n_target.max(1);
        let hx = ((xmax - xmin) / nx as f64).max(1e-12);
        let hy = ((ymax - ymin) / ny as f64).max(1e-12);
        let h = hx.max(hy);
        let inv_h = 1.0 / h;
        let nx = (((xmax - xmin) * inv_h).ceil() as usize).max(1);
        let ny = (((ymax - ymin) * inv_h).ceil() as usize).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corner_coords(t);
            let txmin = a.x.min(b.x).min(c.x);
            let txmax = a.x.max(b.x).max(c.x);
            let tymin = a.y.min(b.y).min(c.y);
            let tymax = a.y.max(b.y).max(c.y);
            let i0 = (((txmin - xmin) * inv_h).floor().max(0.0) as usize).min(nx - 1);
            let i1 = (((txmax - xmin) * inv_h).floor().max(0.0) as usize).min(nx - 1);
            let j0 = (((tymin - ymin) * inv_h).floor().max(0.0) as usize).min(ny - 1);
            let j1 = (((tymax - ymin) * inv_h).floor().max(0.0) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t);
                }
            }
        }
        Locator { mesh, x0: xmin, y0: ymin, inv_h, nx, ny, bins }
    }

    /// Locates the triangle containing `p` and returns barycentric
    /// coordinates w.r.t. its corner vertices.
    pub fn find(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let i = (((p.x - self.x0) * self.inv_h).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p.y - self.y0) * self.inv_h).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.bins[j * self.nx + i] {
            let [a, b, c] = self.mesh.corner_coords(t);
            let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
            if det.abs() < 1e-30 {
                continue;
            }
            let l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
            let l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
            let l0 = 1.0 - l1 - l2;
            let min_l = l0.min(l1).min(l2);
            if min_l >= -1e-9 {
                return Some((t, [l0, l1, l2]));
            }
            if best.map_or(true, |(_, _, m)| min_l > m) {
                best = Some((t, [l0, l1, l2], min_l));
            }
        }
        // accept slightly-outside hits caused by binning round-off
        best.and_then(|(t, l, m)| if m > -1e-6 { Some((t, l)) } else { None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_covers_area_exactly() {
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.5).unwrap();
        assert!(mesh.triangles.len() >= 4);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        mesh.validate().unwrap();
    }

    #[test]
    fn rectangle_partition_of_domain_under_refinement() {
        for h in [0.9, 0.45, 0.2, 0.11, 0.05] {
            let mesh = generate_rectangle_mesh(10.0, 4.0, h).unwrap();
            assert!((mesh.total_area() - 40.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rectangle_vertex_count_at_resolution() {
        // structured-grid construction: 21 x 21 lattice at h = 0.05
        let mesh = generate_rectangle_mesh(1.0, 1.0, 0.05).unwrap();
        assert!(mesh.n_corners >= 350 && mesh.n_corners <= 700, "{}", mesh.n_corners);
    }

    #[test]
    fn rectangle_edge_length_bound() {
        let h = 0.13;
        let mesh = generate_rectangle_mesh(2.0, 1.0, h).unwrap();
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.corner_coords(t);
            for (p, q) in [(a, b), (b, c), (c, a)] {
                assert!(p.dist(&q) <= 1.5 * h + 1e-12);
            }
        }
    }

    #[test]
    fn rectangle_rejects_degenerate_dims() {
        assert!(generate_rectangle_mesh(0.0, 1.0, 0.1).is_err());
        assert!(generate_rectangle_mesh(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn locator_round_trip() {
        let mesh = generate_rectangle_mesh(2.0, 1.0, 0.3).unwrap();
        let loc = mesh.locator();
        let (t, l) = loc.find(Point::new(1.234, 0.567)).unwrap();
        let [a, b, c] = mesh.corner_coords(t);
        let x = l[0] * a.x + l[1] * b.x + l[2] * c.x;
        let y = l[0] * a.y + l[1] * b.y + l[2] * c.y;
        assert!((x - 1.234).abs() < 1e-12);
        assert!((y - 0.567).abs() < 1e-12);
    }
}
