//! Mesh generators: structured rectangles, tiled perforated domains with
//! boundary-fitted circular holes, homogenized Stokes-Darcy domains,
//! periodic unit cells, and boundary-layer stacks.

use super::{BoundaryEdge, BoundaryTag, Mesh, Point, Region};
use crate::error::{Error, Result};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use std::collections::{BTreeMap, BTreeSet};

const TOL: f64 = 1e-9;
const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Regular grid of circular obstacles occupying a block of unit cells.
#[derive(Debug, Clone, Copy)]
pub struct ObstacleGrid {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    /// Obstacle radius, `0 < radius < cell_size / 2`.
    pub radius: f64,
    /// Lower-left corner of the (unrotated) block.
    pub origin: Point,
    /// Rotation of the whole block about its center, radians.
    pub rotation_angle: f64,
}

impl ObstacleGrid {
    pub fn block_center(&self) -> Point {
        Point::new(
            self.origin.x + 0.5 * self.cols as f64 * self.cell_size,
            self.origin.y + 0.5 * self.rows as f64 * self.cell_size,
        )
    }

    pub fn validate(&self, width: f64, height: f64) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Mesh("obstacle grid must have positive extent".into()));
        }
        if !(self.radius > 0.0 && self.radius < 0.5 * self.cell_size) {
            return Err(Error::Mesh(format!(
                "obstacle intersects cell boundary: radius {} with cell size {}",
                self.radius, self.cell_size
            )));
        }
        // the rotated block must stay inside the outer rectangle
        let c = self.block_center();
        let half_diag = 0.5
            * self.cell_size
            * ((self.cols as f64).powi(2) + (self.rows as f64).powi(2)).sqrt();
        let inside = c.x - half_diag >= -TOL
            && c.x + half_diag <= width + TOL
            && c.y - half_diag >= -TOL
            && c.y + half_diag <= height + TOL;
        let axis_inside = self.rotation_angle == 0.0
            && self.origin.x >= -TOL
            && self.origin.y >= -TOL
            && self.origin.x + self.cols as f64 * self.cell_size <= width + TOL
            && self.origin.y + self.rows as f64 * self.cell_size <= height + TOL;
        if !(inside || axis_inside) {
            return Err(Error::Mesh("obstacle grid not contained in outer domain".into()));
        }
        Ok(())
    }

    /// Obstacle centers in global (rotated) coordinates.
    pub fn centers(&self) -> Vec<Point> {
        let bc = self.block_center();
        let (s, c) = self.rotation_angle.sin_cos();
        let mut out = Vec::new();
        for j in 0..self.rows {
            for i in 0..self.cols {
                let lx = self.origin.x + (i as f64 + 0.5) * self.cell_size - bc.x;
                let ly = self.origin.y + (j as f64 + 0.5) * self.cell_size - bc.y;
                out.push(Point::new(bc.x + c * lx - s * ly, bc.y + s * lx + c * ly));
            }
        }
        out
    }

    fn is_axis_aligned_unit(&self, width: f64, height: f64) -> bool {
        let int = |v: f64| (v - v.round()).abs() < TOL;
        self.rotation_angle == 0.0
            && (self.cell_size - 1.0).abs() < TOL
            && int(self.origin.x)
            && int(self.origin.y)
            && int(width)
            && int(height)
    }
}

// ---------------------------------------------------------------------------
// builder
// ---------------------------------------------------------------------------

struct MeshBuilder {
    pts: Vec<Point>,
    key: BTreeMap<(i64, i64), usize>,
    tris: Vec<([usize; 3], Region)>,
}

fn qkey(p: Point) -> (i64, i64) {
    ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)
}

impl MeshBuilder {
    fn new() -> Self {
        MeshBuilder { pts: Vec::new(), key: BTreeMap::new(), tris: Vec::new() }
    }

    fn pid(&mut self, p: Point) -> usize {
        let k = qkey(p);
        if let Some(&i) = self.key.get(&k) {
            return i;
        }
        let i = self.pts.len();
        self.pts.push(p);
        self.key.insert(k, i);
        i
    }

    fn tri(&mut self, a: usize, b: usize, c: usize, region: Region) {
        let pa = self.pts[a];
        let pb = self.pts[b];
        let pc = self.pts[c];
        let area2 = (pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y);
        if area2 > 0.0 {
            self.tris.push(([a, b, c], region));
        } else {
            self.tris.push(([a, c, b], region));
        }
    }

    fn crossed_rect(
        &mut self,
        x0: f64,
        y0: f64,
        w: f64,
        h: f64,
        nx: usize,
        ny: usize,
        region: Region,
    ) {
        let dx = w / nx as f64;
        let dy = h / ny as f64;
        for j in 0..ny {
            for i in 0..nx {
                let p00 = self.pid(Point::new(x0 + i as f64 * dx, y0 + j as f64 * dy));
                let p10 = self.pid(Point::new(x0 + (i + 1) as f64 * dx, y0 + j as f64 * dy));
                let p11 =
                    self.pid(Point::new(x0 + (i + 1) as f64 * dx, y0 + (j + 1) as f64 * dy));
                let p01 = self.pid(Point::new(x0 + i as f64 * dx, y0 + (j + 1) as f64 * dy));
                let cc = self.pid(Point::new(
                    x0 + (i as f64 + 0.5) * dx,
                    y0 + (j as f64 + 0.5) * dy,
                ));
                self.tri(p00, p10, cc, region);
                self.tri(p10, p11, cc, region);
                self.tri(p11, p01, cc, region);
                self.tri(p01, p00, cc, region);
            }
        }
    }

    fn diag_rect(&mut self, w: f64, h: f64, nx: usize, ny: usize, region: Region) {
        let dx = w / nx as f64;
        let dy = h / ny as f64;
        for j in 0..ny {
            for i in 0..nx {
                let p00 = self.pid(Point::new(i as f64 * dx, j as f64 * dy));
                let p10 = self.pid(Point::new((i + 1) as f64 * dx, j as f64 * dy));
                let p11 = self.pid(Point::new((i + 1) as f64 * dx, (j + 1) as f64 * dy));
                let p01 = self.pid(Point::new(i as f64 * dx, (j + 1) as f64 * dy));
                self.tri(p00, p10, p11, region);
                self.tri(p00, p11, p01, region);
            }
        }
    }

    /// Unit cell with a centered circular hole, meshed as a blended ring
    /// grid between the circle polygon and the cell boundary. Fully
    /// symmetric under the symmetries of the square.
    fn ogrid_cell(
        &mut self,
        origin: Point,
        cell: f64,
        radius: f64,
        n: usize,
        rings: usize,
        region: Region,
        map: &dyn Fn(Point) -> Point,
    ) {
        let center = Point::new(origin.x + 0.5 * cell, origin.y + 0.5 * cell);
        let m = 4 * n;
        // cell boundary points, ccw from the lower-left corner
        let mut square = Vec::with_capacity(m);
        for i in 0..n {
            square.push(Point::new(origin.x + i as f64 / n as f64 * cell, origin.y));
        }
        for i in 0..n {
            square.push(Point::new(origin.x + cell, origin.y + i as f64 / n as f64 * cell));
        }
        for i in 0..n {
            square.push(Point::new(
                origin.x + (1.0 - i as f64 / n as f64) * cell,
                origin.y + cell,
            ));
        }
        for i in 0..n {
            square.push(Point::new(origin.x, origin.y + (1.0 - i as f64 / n as f64) * cell));
        }
        let mut ring_ids: Vec<Vec<usize>> = Vec::with_capacity(rings + 1);
        for k in 0..=rings {
            let t = k as f64 / rings as f64;
            let mut ids = Vec::with_capacity(m);
            for s in &square {
                let ang = (s.y - center.y).atan2(s.x - center.x);
                let c = Point::new(
                    center.x + radius * ang.cos(),
                    center.y + radius * ang.sin(),
                );
                let p = Point::new(c.x + t * (s.x - c.x), c.y + t * (s.y - c.y));
                ids.push(self.pid(map(p)));
            }
            ring_ids.push(ids);
        }
        for k in 0..rings {
            for j in 0..m {
                let j1 = (j + 1) % m;
                let q0 = ring_ids[k][j];
                let q1 = ring_ids[k][j1];
                let q2 = ring_ids[k + 1][j1];
                let q3 = ring_ids[k + 1][j];
                let pc = Point::new(
                    0.25 * (self.pts[q0].x + self.pts[q1].x + self.pts[q2].x + self.pts[q3].x),
                    0.25 * (self.pts[q0].y + self.pts[q1].y + self.pts[q2].y + self.pts[q3].y),
                );
                let cc = self.pid(pc);
                self.tri(q0, q1, cc, region);
                self.tri(q1, q2, cc, region);
                self.tri(q2, q3, cc, region);
                self.tri(q3, q0, cc, region);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// finalize: P2 enrichment, boundary extraction, tags, periodic pairing
// ---------------------------------------------------------------------------

struct FinalizeOpts<'a> {
    classify: &'a dyn Fn(Point) -> BoundaryTag,
    /// Interior edges that form an interface within a single region
    /// (boundary-layer stacks). Receives the edge midpoint.
    interface_interior: Option<&'a dyn Fn(Point) -> bool>,
    /// For interface edges between equal regions: which side is porous
    /// (receives the triangle centroid).
    porous_side: Option<&'a dyn Fn(Point) -> bool>,
    /// Translations carrying the master onto the slave periodic boundary.
    periodic_shifts: &'a [(f64, f64)],
}

impl Default for FinalizeOpts<'_> {
    fn default() -> Self {
        FinalizeOpts {
            classify: &|_| BoundaryTag::SlipWall,
            interface_interior: None,
            porous_side: None,
            periodic_shifts: &[],
        }
    }
}

fn finalize(builder: MeshBuilder, opts: FinalizeOpts) -> Result<Mesh> {
    let n_corners = builder.pts.len();
    let mut vertices = builder.pts;
    let tris = builder.tris;

    // undirected edge -> (midpoint id, [adjacent triangles])
    let mut edges: BTreeMap<(usize, usize), (usize, Vec<usize>)> = BTreeMap::new();
    let mut triangles: Vec<[usize; 6]> = Vec::with_capacity(tris.len());
    let mut regions = Vec::with_capacity(tris.len());
    for (ti, (tri, region)) in tris.iter().enumerate() {
        let mut t6 = [0usize; 6];
        t6[..3].copy_from_slice(tri);
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            let entry = edges.entry(key).or_insert_with(|| {
                let pa = vertices[key.0];
                let pb = vertices[key.1];
                let mid = vertices.len();
                vertices.push(Point::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)));
                (mid, Vec::new())
            });
            entry.1.push(ti);
            t6[3 + k] = entry.0;
        }
        triangles.push(t6);
        regions.push(*region);
    }

    let mut boundary_edges = Vec::new();
    for (&(a, b), &(mid, ref adj)) in &edges {
        let pa = vertices[a];
        let pb = vertices[b];
        let pm = Point::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y));
        if adj.len() == 1 {
            // orient ccw with respect to the owning triangle
            let (oa, ob) = oriented(&triangles[adj[0]], a, b);
            boundary_edges.push(BoundaryEdge { a: oa, b: ob, mid, tag: (opts.classify)(pm) });
        } else if adj.len() == 2 {
            let (t0, t1) = (adj[0], adj[1]);
            let differing = regions[t0] != regions[t1]
                && (regions[t0] == Region::Darcy || regions[t1] == Region::Darcy);
            let marked = opts
                .interface_interior
                .map(|f| f(pm))
                .unwrap_or(false);
            if differing || marked {
                // orientation from the porous-side triangle
                let porous_tri = if differing {
                    if regions[t0] == Region::Darcy { t0 } else { t1 }
                } else {
                    let c0 = tri_centroid(&vertices, &triangles[t0]);
                    let porous = opts.porous_side.expect("porous_side required");
                    if porous(c0) { t0 } else { t1 }
                };
                let (oa, ob) = oriented(&triangles[porous_tri], a, b);
                boundary_edges.push(BoundaryEdge { a: oa, b: ob, mid, tag: BoundaryTag::Interface });
            }
        } else {
            return Err(Error::Mesh(format!("edge ({a}, {b}) shared by {} triangles", adj.len())));
        }
    }

    // periodic node pairing by translation
    let mut periodic_pairs = BTreeSet::new();
    if !opts.periodic_shifts.is_empty() {
        let mut masters = Vec::new();
        let mut slaves: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for e in &boundary_edges {
            match e.tag {
                BoundaryTag::PeriodicMaster => masters.extend_from_slice(&e.nodes()),
                BoundaryTag::PeriodicSlave => {
                    for nid in e.nodes() {
                        slaves.insert(qkey(vertices[nid]), nid);
                    }
                }
                _ => {}
            }
        }
        masters.sort_unstable();
        masters.dedup();
        for &mnode in &masters {
            let p = vertices[mnode];
            for &(sx, sy) in opts.periodic_shifts {
                let shifted = Point::new(p.x + sx, p.y + sy);
                if let Some(&snode) = slaves.get(&qkey(shifted)) {
                    periodic_pairs.insert((mnode, snode));
                }
            }
        }
    }

    let mesh = Mesh {
        vertices,
        n_corners,
        triangles,
        regions,
        boundary_edges,
        periodic_pairs: periodic_pairs.into_iter().collect(),
    };
    mesh.validate().map_err(Error::Mesh)?;
    Ok(mesh)
}

fn oriented(tri: &[usize; 6], a: usize, b: usize) -> (usize, usize) {
    for k in 0..3 {
        let ta = tri[k];
        let tb = tri[(k + 1) % 3];
        if ta == a && tb == b {
            return (a, b);
        }
        if ta == b && tb == a {
            return (b, a);
        }
    }
    unreachable!("edge not part of its triangle");
}

fn tri_centroid(vertices: &[Point], tri: &[usize; 6]) -> Point {
    Point::new(
        (vertices[tri[0]].x + vertices[tri[1]].x + vertices[tri[2]].x) / 3.0,
        (vertices[tri[0]].y + vertices[tri[1]].y + vertices[tri[2]].y) / 3.0,
    )
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

fn side_tag(p: Point, width: f64, height: f64) -> Option<BoundaryTag> {
    if p.x.abs() < TOL {
        Some(BoundaryTag::Inlet)
    } else if (p.x - width).abs() < TOL {
        Some(BoundaryTag::Outlet)
    } else if p.y.abs() < TOL || (p.y - height).abs() < TOL {
        Some(BoundaryTag::SlipWall)
    } else {
        None
    }
}

/// Conforming triangulation of a `width x height` rectangle, boundary
/// tagged by side (left inlet, right outlet, top and bottom walls).
pub fn generate_rectangle_mesh(width: f64, height: f64, target_h: f64) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0 && target_h > 0.0) {
        return Err(Error::Mesh(format!(
            "degenerate rectangle: width {width}, height {height}, target_h {target_h}"
        )));
    }
    let nx = (width / target_h).ceil().max(1.0) as usize;
    let ny = (height / target_h).ceil().max(1.0) as usize;
    let mut b = MeshBuilder::new();
    b.diag_rect(width, height, nx, ny, Region::Fluid);
    finalize(
        b,
        FinalizeOpts {
            classify: &|p| side_tag(p, width, height).expect("point not on boundary"),
            ..Default::default()
        },
    )
}

fn rings_for(radius: f64, cell: f64, n: usize) -> usize {
    (((SQRT_HALF - radius / cell) * n as f64).ceil() as usize).max(2)
}

fn subdivisions(target_h: f64, min_n: usize) -> usize {
    ((1.0 / target_h).round() as usize).max(min_n)
}

/// Fully resolved (DNS) mesh: rectangle with a grid of circular holes,
/// hole boundaries tagged OBSTACLE.
pub fn generate_perforated_mesh(
    width: f64,
    height: f64,
    grid: &ObstacleGrid,
    target_h: f64,
) -> Result<Mesh> {
    grid.validate(width, height)?;
    if grid.is_axis_aligned_unit(width, height) {
        let n = subdivisions(target_h, 4);
        let rings = rings_for(grid.radius, 1.0, n);
        let (w, h) = (width.round() as usize, height.round() as usize);
        let (bx, by) = (grid.origin.x.round() as i64, grid.origin.y.round() as i64);
        let mut b = MeshBuilder::new();
        for j in 0..h {
            for i in 0..w {
                let in_block = (i as i64) >= bx
                    && (i as i64) < bx + grid.cols as i64
                    && (j as i64) >= by
                    && (j as i64) < by + grid.rows as i64;
                let origin = Point::new(i as f64, j as f64);
                if in_block {
                    b.ogrid_cell(origin, 1.0, grid.radius, n, rings, Region::Fluid, &|p| p);
                } else {
                    b.crossed_rect(origin.x, origin.y, 1.0, 1.0, n, n, Region::Fluid);
                }
            }
        }
        finalize(
            b,
            FinalizeOpts {
                classify: &|p| side_tag(p, width, height).unwrap_or(BoundaryTag::Obstacle),
                ..Default::default()
            },
        )
    } else {
        let mut b = MeshBuilder::new();
        let outline = add_rotated_block(&mut b, grid, target_h, BlockFill::Perforated)?;
        add_cdt_exterior(&mut b, width, height, target_h, &outline, Region::Fluid)?;
        finalize(
            b,
            FinalizeOpts {
                classify: &|p| side_tag(p, width, height).unwrap_or(BoundaryTag::Obstacle),
                ..Default::default()
            },
        )
    }
}

/// Alias for the DNS mesh generator.
pub fn generate_dns_mesh(
    width: f64,
    height: f64,
    grid: &ObstacleGrid,
    target_h: f64,
) -> Result<Mesh> {
    generate_perforated_mesh(width, height, grid, target_h)
}

/// Homogenized-mode mesh: the obstacle block becomes a Darcy region, the
/// rest stays Stokes fluid; the edges between the two are tagged INTERFACE
/// oriented from the Darcy side into the fluid.
pub fn generate_homogenized_mesh(
    width: f64,
    height: f64,
    grid: &ObstacleGrid,
    target_h: f64,
) -> Result<Mesh> {
    grid.validate(width, height)?;
    if grid.is_axis_aligned_unit(width, height) {
        let n = subdivisions(target_h, 1);
        let (w, h) = (width.round() as usize, height.round() as usize);
        let (bx, by) = (grid.origin.x.round() as i64, grid.origin.y.round() as i64);
        let mut b = MeshBuilder::new();
        for j in 0..h {
            for i in 0..w {
                let in_block = (i as i64) >= bx
                    && (i as i64) < bx + grid.cols as i64
                    && (j as i64) >= by
                    && (j as i64) < by + grid.rows as i64;
                let region = if in_block { Region::Darcy } else { Region::Fluid };
                b.crossed_rect(i as f64, j as f64, 1.0, 1.0, n, n, region);
            }
        }
        finalize(
            b,
            FinalizeOpts {
                classify: &|p| side_tag(p, width, height).expect("point not on boundary"),
                ..Default::default()
            },
        )
    } else {
        let mut b = MeshBuilder::new();
        let outline = add_rotated_block(&mut b, grid, target_h, BlockFill::Darcy)?;
        add_cdt_exterior(&mut b, width, height, target_h, &outline, Region::Fluid)?;
        finalize(
            b,
            FinalizeOpts {
                classify: &|p| side_tag(p, width, height).expect("point not on boundary"),
                ..Default::default()
            },
        )
    }
}

/// Periodic unit cell: unit square minus a centered disk of radius `xi`.
/// Left/bottom boundaries are periodic masters, right/top slaves; the hole
/// is tagged OBSTACLE. Opposite boundary discretizations are exact
/// translated copies and the node pairing is recorded.
pub fn generate_rve_mesh(xi: f64, target_h: f64) -> Result<Mesh> {
    if !(xi > 0.0 && xi < 0.5) {
        return Err(Error::Mesh(format!(
            "obstacle intersects cell boundary: radius {xi} in a unit cell"
        )));
    }
    if !(target_h > 0.0) {
        return Err(Error::Mesh("target_h must be positive".into()));
    }
    let n = subdivisions(target_h, 4);
    let rings = rings_for(xi, 1.0, n);
    let mut b = MeshBuilder::new();
    b.ogrid_cell(Point::new(0.0, 0.0), 1.0, xi, n, rings, Region::RveFluid, &|p| p);
    finalize(
        b,
        FinalizeOpts {
            classify: &|p| {
                if p.x.abs() < TOL || p.y.abs() < TOL {
                    BoundaryTag::PeriodicMaster
                } else if (p.x - 1.0).abs() < TOL || (p.y - 1.0).abs() < TOL {
                    BoundaryTag::PeriodicSlave
                } else {
                    BoundaryTag::Obstacle
                }
            },
            periodic_shifts: &[(1.0, 0.0), (0.0, 1.0)],
            ..Default::default()
        },
    )
}

/// Boundary-layer stack: one porous unit cell (with obstacle) in
/// `y in [0, 1]`, topped by `free_cells` unperforated unit cells. Left and
/// right are periodic, the seam `y = 1` is tagged INTERFACE with the normal
/// pointing up into the free region.
pub fn generate_boundary_layer_mesh(xi: f64, free_cells: usize, target_h: f64) -> Result<Mesh> {
    if free_cells == 0 {
        return Err(Error::Mesh("boundary layer needs at least one free cell".into()));
    }
    if !(xi > 0.0 && xi < 0.5) {
        return Err(Error::Mesh(format!(
            "obstacle intersects cell boundary: radius {xi} in a unit cell"
        )));
    }
    let n = subdivisions(target_h, 4);
    let rings = rings_for(xi, 1.0, n);
    let top = (1 + free_cells) as f64;
    let mut b = MeshBuilder::new();
    b.ogrid_cell(Point::new(0.0, 0.0), 1.0, xi, n, rings, Region::Fluid, &|p| p);
    for j in 1..=free_cells {
        b.crossed_rect(0.0, j as f64, 1.0, 1.0, n, n, Region::Fluid);
    }
    finalize(
        b,
        FinalizeOpts {
            classify: &|p| {
                if p.y.abs() < TOL {
                    BoundaryTag::BlBottom
                } else if (p.y - top).abs() < TOL {
                    BoundaryTag::BlTop
                } else if p.x.abs() < TOL {
                    BoundaryTag::PeriodicMaster
                } else if (p.x - 1.0).abs() < TOL {
                    BoundaryTag::PeriodicSlave
                } else {
                    BoundaryTag::Obstacle
                }
            },
            interface_interior: Some(&|p| (p.y - 1.0).abs() < TOL),
            porous_side: Some(&|c| c.y < 1.0),
            periodic_shifts: &[(1.0, 0.0)],
            ..Default::default()
        },
    )
}

// ---------------------------------------------------------------------------
// rotated blocks and the unstructured exterior
// ---------------------------------------------------------------------------

enum BlockFill {
    Perforated,
    Darcy,
}

/// Meshes the obstacle block in its local frame, maps it through the block
/// rotation, and returns the ccw outline polygon of the block boundary.
fn add_rotated_block(
    b: &mut MeshBuilder,
    grid: &ObstacleGrid,
    target_h: f64,
    fill: BlockFill,
) -> Result<Vec<Point>> {
    let cell = grid.cell_size;
    let min_n = match fill {
        BlockFill::Perforated => 4,
        BlockFill::Darcy => 1,
    };
    let n = ((cell / target_h).round() as usize).max(min_n);
    let bc = grid.block_center();
    let half_w = 0.5 * grid.cols as f64 * cell;
    let half_h = 0.5 * grid.rows as f64 * cell;
    let (s, c) = grid.rotation_angle.sin_cos();
    let map = move |p: Point| -> Point {
        // local block coords (origin at block lower-left) -> global
        let lx = p.x - half_w;
        let ly = p.y - half_h;
        Point::new(bc.x + c * lx - s * ly, bc.y + s * lx + c * ly)
    };
    for j in 0..grid.rows {
        for i in 0..grid.cols {
            let origin = Point::new(i as f64 * cell, j as f64 * cell);
            match fill {
                BlockFill::Perforated => {
                    let rings = rings_for(grid.radius, cell, n);
                    b.ogrid_cell(origin, cell, grid.radius, n, rings, Region::Fluid, &map);
                }
                BlockFill::Darcy => {
                    // crossed cells through the map
                    let dx = cell / n as f64;
                    for jj in 0..n {
                        for ii in 0..n {
                            let q = |u: f64, v: f64| {
                                Point::new(origin.x + u * dx, origin.y + v * dx)
                            };
                            let p00 = b.pid(map(q(ii as f64, jj as f64)));
                            let p10 = b.pid(map(q(ii as f64 + 1.0, jj as f64)));
                            let p11 = b.pid(map(q(ii as f64 + 1.0, jj as f64 + 1.0)));
                            let p01 = b.pid(map(q(ii as f64, jj as f64 + 1.0)));
                            let cc = b.pid(map(q(ii as f64 + 0.5, jj as f64 + 0.5)));
                            b.tri(p00, p10, cc, Region::Darcy);
                            b.tri(p10, p11, cc, Region::Darcy);
                            b.tri(p11, p01, cc, Region::Darcy);
                            b.tri(p01, p00, cc, Region::Darcy);
                        }
                    }
                }
            }
        }
    }
    // ccw outline of the block in local coords, then mapped
    let w = grid.cols as f64 * cell;
    let h = grid.rows as f64 * cell;
    let step = cell / n as f64;
    let mut outline = Vec::new();
    let nx = grid.cols * n;
    let ny = grid.rows * n;
    for i in 0..nx {
        outline.push(Point::new(i as f64 * step, 0.0));
    }
    for j in 0..ny {
        outline.push(Point::new(w, j as f64 * step));
    }
    for i in 0..nx {
        outline.push(Point::new(w - i as f64 * step, h));
    }
    for j in 0..ny {
        outline.push(Point::new(0.0, h - j as f64 * step));
    }
    Ok(outline.into_iter().map(map).collect())
}

fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y)
            && p.x < (pj.x - pi.x) * (p.y - pi.y) / (pj.y - pi.y) + pi.x
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let vx = b.x - a.x;
    let vy = b.y - a.y;
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(&Point::new(a.x + t * vx, a.y + t * vy))
}

fn dist_to_polygon(p: Point, poly: &[Point]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        d = d.min(dist_to_segment(p, poly[i], poly[j]));
    }
    d
}

/// Constrained Delaunay triangulation of the rectangle minus the (already
/// meshed) block, conforming to the block outline.
fn add_cdt_exterior(
    b: &mut MeshBuilder,
    width: f64,
    height: f64,
    target_h: f64,
    outline: &[Point],
    region: Region,
) -> Result<()> {
    let n = subdivisions(target_h, 1);
    let spacing = 1.0 / n as f64;
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>, p: Point| {
        cdt.insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::Mesh(format!("triangulation insert failed: {e:?}")))
    };

    // outer rectangle boundary, ccw
    let nx = ((width / spacing).round() as usize).max(1);
    let ny = ((height / spacing).round() as usize).max(1);
    let mut rect = Vec::new();
    for i in 0..nx {
        rect.push(Point::new(i as f64 * width / nx as f64, 0.0));
    }
    for j in 0..ny {
        rect.push(Point::new(width, j as f64 * height / ny as f64));
    }
    for i in 0..nx {
        rect.push(Point::new(width - i as f64 * width / nx as f64, height));
    }
    for j in 0..ny {
        rect.push(Point::new(0.0, height - j as f64 * height / ny as f64));
    }
    let rect_handles = rect
        .iter()
        .map(|&p| insert(&mut cdt, p))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..rect_handles.len() {
        let j = (i + 1) % rect_handles.len();
        cdt.add_constraint(rect_handles[i], rect_handles[j]);
    }
    let hole_handles = outline
        .iter()
        .map(|&p| insert(&mut cdt, p))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..hole_handles.len() {
        let j = (i + 1) % hole_handles.len();
        cdt.add_constraint(hole_handles[i], hole_handles[j]);
    }
    // interior background points, kept clear of both boundaries
    for j in 1..ny {
        for i in 1..nx {
            let p = Point::new(i as f64 * width / nx as f64, j as f64 * height / ny as f64);
            if point_in_polygon(p, outline) || dist_to_polygon(p, outline) < 0.6 * spacing {
                continue;
            }
            insert(&mut cdt, p)?;
        }
    }
    for face in cdt.inner_faces() {
        let vs = face.positions();
        let centroid = Point::new(
            (vs[0].x + vs[1].x + vs[2].x) / 3.0,
            (vs[0].y + vs[1].y + vs[2].y) / 3.0,
        );
        if point_in_polygon(centroid, outline) {
            continue;
        }
        let ids = [
            b.pid(Point::new(vs[0].x, vs[0].y)),
            b.pid(Point::new(vs[1].x, vs[1].y)),
            b.pid(Point::new(vs[2].x, vs[2].y)),
        ];
        b.tri(ids[0], ids[1], ids[2], region);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn straight_grid(cols: usize, rows: usize, xi: f64, origin: Point) -> ObstacleGrid {
        ObstacleGrid {
            rows,
            cols,
            cell_size: 1.0,
            radius: xi,
            origin,
            rotation_angle: 0.0,
        }
    }

    #[test]
    fn perforated_channel_area() {
        // 4x4 grid of xi = 0.25 holes in a 10x4 channel
        let grid = straight_grid(4, 4, 0.25, Point::new(3.0, 0.0));
        let mesh = generate_perforated_mesh(10.0, 4.0, &grid, 0.2).unwrap();
        let expect = 40.0 - 16.0 * PI * 0.0625;
        assert!(
            ((mesh.total_area() - expect) / expect).abs() < 0.01,
            "area {} vs {expect}",
            mesh.total_area()
        );
        assert!(mesh.boundary_edges.iter().any(|e| e.tag == BoundaryTag::Obstacle));
    }

    #[test]
    fn perforated_rejects_oversized_radius() {
        let grid = straight_grid(4, 4, 0.5, Point::new(3.0, 0.0));
        let err = generate_perforated_mesh(10.0, 4.0, &grid, 0.2).unwrap_err();
        assert!(err.to_string().contains("obstacle intersects cell boundary"));
    }

    #[test]
    fn rotation_preserves_fluid_area() {
        let mut grid = straight_grid(4, 4, 0.25, Point::new(3.0, 1.0));
        let straight = generate_perforated_mesh(10.0, 6.0, &grid, 0.25).unwrap();
        grid.rotation_angle = PI / 6.0;
        let rotated = generate_perforated_mesh(10.0, 6.0, &grid, 0.25).unwrap();
        let rel = (straight.total_area() - rotated.total_area()).abs() / straight.total_area();
        assert!(rel < 1e-3, "relative area change {rel}");
    }

    #[test]
    fn obstacle_vertices_outside_disks() {
        let grid = straight_grid(2, 2, 0.25, Point::new(1.0, 1.0));
        let mesh = generate_perforated_mesh(4.0, 4.0, &grid, 0.25).unwrap();
        for center in grid.centers() {
            for p in &mesh.vertices[..mesh.n_corners] {
                assert!(p.dist(&center) >= grid.radius - 1e-10);
            }
        }
    }

    #[test]
    fn circle_segment_count_minimum() {
        let grid = straight_grid(1, 1, 0.25, Point::new(0.0, 0.0));
        let mesh = generate_perforated_mesh(1.0, 1.0, &grid, 0.5).unwrap();
        let n_obstacle = mesh
            .boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Obstacle)
            .count();
        assert!(n_obstacle >= 16, "only {n_obstacle} segments on the circle");
    }

    #[test]
    fn rve_area_and_periodic_pairs() {
        for (xi, expect) in [(0.25, 1.0 - PI * 0.0625), (0.125, 1.0 - PI * 0.015625)] {
            let mesh = generate_rve_mesh(xi, 0.125).unwrap();
            assert!(((mesh.total_area() - expect) / expect).abs() < 0.01);
            assert!(!mesh.periodic_pairs.is_empty());
            // every pair translated by (1,0) or (0,1)
            for &(m, s) in &mesh.periodic_pairs {
                let pm = mesh.vertices[m];
                let ps = mesh.vertices[s];
                let dx = ps.x - pm.x;
                let dy = ps.y - pm.y;
                let ok = ((dx - 1.0).abs() < 1e-10 && dy.abs() < 1e-10)
                    || (dx.abs() < 1e-10 && (dy - 1.0).abs() < 1e-10);
                assert!(ok, "bad periodic pair shift ({dx}, {dy})");
            }
        }
    }

    #[test]
    fn rve_pairing_is_complete_on_left_edge() {
        let mesh = generate_rve_mesh(0.25, 0.125).unwrap();
        // every node on x = 0 must have a partner at distance exactly 1 in x
        let mut left_nodes = 0;
        for (i, p) in mesh.vertices.iter().enumerate() {
            if p.x.abs() < 1e-10 {
                left_nodes += 1;
                assert!(
                    mesh.periodic_pairs.iter().any(|&(m, _)| m == i),
                    "left node {i} has no periodic partner"
                );
            }
        }
        assert!(left_nodes > 0);
    }

    #[test]
    fn boundary_layer_strip_area() {
        let mesh = generate_boundary_layer_mesh(0.25, 4, 0.2).unwrap();
        let expect = 5.0 - PI * 0.0625;
        assert!(((mesh.total_area() - expect) / expect).abs() < 0.01);
        assert!(mesh.boundary_edges.iter().any(|e| e.tag == BoundaryTag::BlTop));
        assert!(mesh.boundary_edges.iter().any(|e| e.tag == BoundaryTag::BlBottom));
        let n_iface = mesh.interface_edges().count();
        assert!(n_iface > 0, "interface edges missing");
        // interface normal points up into the free region
        for e in mesh.interface_edges() {
            let (n, _) = mesh.edge_normal_tangent(e);
            assert!(n[1] > 0.99, "interface normal {n:?}");
        }
    }

    #[test]
    fn homogenized_mesh_has_interface_loop() {
        let grid = straight_grid(4, 4, 0.25, Point::new(3.0, 1.0));
        let mesh = generate_homogenized_mesh(10.0, 6.0, &grid, 1.0).unwrap();
        assert!((mesh.total_area() - 60.0).abs() < 1e-9);
        assert!((mesh.region_area(Region::Darcy) - 16.0).abs() < 1e-9);
        // interface length = perimeter of the 4x4 block
        let len: f64 = mesh.interface_edges().map(|e| mesh.edge_length(e)).sum();
        assert!((len - 16.0).abs() < 1e-9);
        // normals point away from the block center
        for e in mesh.interface_edges() {
            let (n, _) = mesh.edge_normal_tangent(e);
            let pm = mesh.vertices[e.mid];
            let out = [(pm.x - 5.0), (pm.y - 3.0)];
            assert!(n[0] * out[0] + n[1] * out[1] > 0.0);
        }
    }

    #[test]
    fn homogenized_rotated_mesh_is_conforming() {
        let grid = ObstacleGrid {
            rows: 4,
            cols: 4,
            cell_size: 1.0,
            radius: 0.25,
            origin: Point::new(3.0, 1.0),
            rotation_angle: PI / 6.0,
        };
        let mesh = generate_homogenized_mesh(10.0, 6.0, &grid, 0.5).unwrap();
        assert!((mesh.total_area() - 60.0).abs() < 1e-6);
        assert!((mesh.region_area(Region::Darcy) - 16.0).abs() < 1e-9);
        let len: f64 = mesh.interface_edges().map(|e| mesh.edge_length(e)).sum();
        assert!((len - 16.0).abs() < 1e-9);
    }

    #[test]
    fn dns_mesh_scale_at_paper_resolution() {
        // benchmark-2 style mesh at a fine resolution: order 10^4 nodes
        let grid = straight_grid(4, 4, 0.125, Point::new(3.0, 1.0));
        let mesh = generate_perforated_mesh(10.0, 6.0, &grid, 1.0 / 8.0).unwrap();
        assert!(
            mesh.n_nodes() > 10_000 && mesh.n_nodes() < 200_000,
            "{} nodes",
            mesh.n_nodes()
        );
        // node/element ratio consistent with 6-node triangles (roughly 2:1)
        let ratio = mesh.n_nodes() as f64 / mesh.triangles.len() as f64;
        assert!(ratio > 1.5 && ratio < 3.0, "ratio {ratio}");
    }
}
