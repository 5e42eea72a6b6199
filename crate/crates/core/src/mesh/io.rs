//! Plain-text mesh serialization.
//!
//! Format: header line `nodes N triangles T edges E`, then node lines
//! `id x y`, triangle lines `id n1..n6 region`, edge lines `id a b tag`.
//! Whitespace-separated ASCII with deterministic ordering.
//!
//! Derived structure (corner count, edge midpoints, periodic pairing) is
//! reconstructed from the connectivity on read: corners are the nodes used
//! in the first three triangle slots, the midpoint of a tagged edge is the
//! one recorded by the triangle owning that edge, and periodic pairs are
//! re-matched by translating master-edge nodes across the domain bounding
//! box.

use super::{BoundaryEdge, BoundaryTag, Mesh, Point, Region};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "nodes {} triangles {} edges {}",
        mesh.n_nodes(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    )?;
    for (i, p) in mesh.vertices.iter().enumerate() {
        writeln!(w, "{i} {:.17e} {:.17e}", p.x, p.y)?;
    }
    for (i, (t, r)) in mesh.triangles.iter().zip(&mesh.regions).enumerate() {
        writeln!(
            w,
            "{i} {} {} {} {} {} {} {}",
            t[0],
            t[1],
            t[2],
            t[3],
            t[4],
            t[5],
            r.name()
        )?;
    }
    for (i, e) in mesh.boundary_edges.iter().enumerate() {
        writeln!(w, "{i} {} {} {}", e.a, e.b, e.tag.name())?;
    }
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let bad = |line: usize, what: &str| Error::Mesh(format!("{}:{line}: {what}", path.display()));
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty mesh file"))?;
    let header = header?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "nodes" || toks[2] != "triangles" || toks[4] != "edges" {
        return Err(bad(1, "malformed header"));
    }
    let parse = |s: &str, line: usize| -> Result<usize> {
        s.parse().map_err(|_| bad(line, "expected an integer"))
    };
    let n_nodes = parse(toks[1], 1)?;
    let n_tris = parse(toks[3], 1)?;
    let n_edges = parse(toks[5], 1)?;

    let mut next = |expect: usize| -> Result<(usize, Vec<String>)> {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::Mesh(format!("{}: truncated mesh file", path.display())))?;
        let line = line?;
        let toks: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if toks.len() != expect {
            return Err(Error::Mesh(format!(
                "{}:{}: expected {expect} fields, got {}",
                path.display(),
                i + 1,
                toks.len()
            )));
        }
        Ok((i + 1, toks))
    };

    let mut vertices = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, t) = next(3)?;
        let x: f64 = t[1].parse().map_err(|_| bad(ln, "bad coordinate"))?;
        let y: f64 = t[2].parse().map_err(|_| bad(ln, "bad coordinate"))?;
        vertices.push(Point::new(x, y));
    }
    let mut triangles = Vec::with_capacity(n_tris);
    let mut regions = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let (ln, t) = next(8)?;
        let mut conn = [0usize; 6];
        for k in 0..6 {
            conn[k] = parse(&t[1 + k], ln)?;
            if conn[k] >= n_nodes {
                return Err(bad(ln, "node id out of range"));
            }
        }
        let region =
            Region::from_name(&t[7]).ok_or_else(|| bad(ln, "unknown region name"))?;
        triangles.push(conn);
        regions.push(region);
    }

    // corners occupy the first three connectivity slots
    let n_corners = triangles
        .iter()
        .flat_map(|t| t[..3].iter())
        .max()
        .map_or(n_nodes, |&m| m + 1);

    // corner pair -> midpoint node, from the owning triangles
    let mut mids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in &triangles {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            mids.insert((a.min(b), a.max(b)), t[3 + k]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, t) = next(4)?;
        let a = parse(&t[1], ln)?;
        let b = parse(&t[2], ln)?;
        if a >= n_nodes || b >= n_nodes {
            return Err(bad(ln, "node id out of range"));
        }
        let tag =
            BoundaryTag::from_name(&t[3]).ok_or_else(|| bad(ln, "unknown boundary tag"))?;
        let mid = *mids
            .get(&(a.min(b), a.max(b)))
            .ok_or_else(|| bad(ln, "edge does not belong to any triangle"))?;
        boundary_edges.push(BoundaryEdge { a, b, mid, tag });
    }

    let periodic_pairs = rebuild_periodic_pairs(&vertices, &boundary_edges);
    let mesh = Mesh {
        vertices,
        n_corners,
        triangles,
        regions,
        boundary_edges,
        periodic_pairs,
    };
    mesh.validate().map_err(Error::Mesh)?;
    Ok(mesh)
}

/// Re-matches periodic master/slave nodes by translating across the domain
/// bounding box (periodic boundaries are opposite sides of the box).
fn rebuild_periodic_pairs(vertices: &[Point], edges: &[BoundaryEdge]) -> Vec<(usize, usize)> {
    let qkey = |p: Point| ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
    let mut masters = Vec::new();
    let mut slaves: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for e in edges {
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
    if masters.is_empty() {
        return Vec::new();
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in vertices {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    masters.sort_unstable();
    masters.dedup();
    let mut pairs = std::collections::BTreeSet::new();
    for &m in &masters {
        let p = vertices[m];
        for shift in [(x1 - x0, 0.0), (0.0, y1 - y0)] {
            let q = Point::new(p.x + shift.0, p.y + shift.1);
            if let Some(&s) = slaves.get(&qkey(q)) {
                pairs.insert((m, s));
            }
        }
    }
    pairs.into_iter().collect()
}
