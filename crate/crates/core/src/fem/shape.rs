//! P1 and P2 Lagrange shape functions on the reference triangle
//! `{(r, s) : r >= 0, s >= 0, r + s <= 1}`.
//!
//! Node order matches the mesh connectivity: corners (0,0), (1,0), (0,1),
//! then edge midpoints 0-1, 1-2, 2-0.

/// P1 values at (r, s).
pub fn p1_values(r: f64, s: f64) -> [f64; 3] {
    [1.0 - r - s, r, s]
}

/// Constant P1 gradients in reference coordinates, [d/dr, d/ds] per node.
pub fn p1_grads() -> [[f64; 2]; 3] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

/// P2 values at (r, s).
pub fn p2_values(r: f64, s: f64) -> [f64; 6] {
    let t = 1.0 - r - s;
    [
        t * (2.0 * t - 1.0),
        r * (2.0 * r - 1.0),
        s * (2.0 * s - 1.0),
        4.0 * t * r,
        4.0 * r * s,
        4.0 * s * t,
    ]
}

/// P2 gradients at (r, s) in reference coordinates, [d/dr, d/ds] per node.
pub fn p2_grads(r: f64, s: f64) -> [[f64; 2]; 6] {
    let t = 1.0 - r - s;
    [
        [1.0 - 4.0 * t, 1.0 - 4.0 * t],
        [4.0 * r - 1.0, 0.0],
        [0.0, 4.0 * s - 1.0],
        [4.0 * (t - r), -4.0 * r],
        [4.0 * s, 4.0 * r],
        [-4.0 * s, 4.0 * (t - s)],
    ]
}

/// 1D quadratic shape functions on [-1, 1] with nodes at -1, +1, 0
/// (endpoint a, endpoint b, midpoint) — matching edge node order.
pub fn line_p2_values(x: f64) -> [f64; 3] {
    [0.5 * x * (x - 1.0), 0.5 * x * (x + 1.0), 1.0 - x * x]
}

/// Geometry mapping of a straight-sided triangle: returns physical gradients
/// of the P2 basis and the Jacobian determinant (2 * area).
pub fn physical_p2_grads(
    coords: &[[f64; 2]; 3],
    r: f64,
    s: f64,
) -> ([[f64; 2]; 6], f64) {
    // affine map x = x0 + J [r, s]
    let j00 = coords[1][0] - coords[0][0];
    let j01 = coords[2][0] - coords[0][0];
    let j10 = coords[1][1] - coords[0][1];
    let j11 = coords[2][1] - coords[0][1];
    let det = j00 * j11 - j01 * j10;
    let inv = 1.0 / det;
    // rows of J^{-T}
    let a = [j11 * inv, -j10 * inv];
    let b = [-j01 * inv, j00 * inv];
    let gref = p2_grads(r, s);
    let mut g = [[0.0; 2]; 6];
    for i in 0..6 {
        g[i][0] = a[0] * gref[i][0] + a[1] * gref[i][1];
        g[i][1] = b[0] * gref[i][0] + b[1] * gref[i][1];
    }
    (g, det)
}

/// Physical gradients of the P1 basis on a straight-sided triangle.
pub fn physical_p1_grads(coords: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let j00 = coords[1][0] - coords[0][0];
    let j01 = coords[2][0] - coords[0][0];
    let j10 = coords[1][1] - coords[0][1];
    let j11 = coords[2][1] - coords[0][1];
    let det = j00 * j11 - j01 * j10;
    let inv = 1.0 / det;
    let a = [j11 * inv, -j10 * inv];
    let b = [-j01 * inv, j00 * inv];
    let gref = p1_grads();
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        g[i][0] = a[0] * gref[i][0] + a[1] * gref[i][1];
        g[i][1] = b[0] * gref[i][0] + b[1] * gref[i][1];
    }
    (g, det)
}
