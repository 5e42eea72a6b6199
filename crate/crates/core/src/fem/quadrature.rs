//! Quadrature rules on the reference triangle and reference line.
//!
//! Weights on the triangle sum to 1/2 (the reference area); the Jacobian
//! determinant from the affine map supplies the physical scaling.

/// Quadrature point on the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub r: f64,
    pub s: f64,
    pub w: f64,
}

/// Degree-2 rule (3 points at edge midpoints).
pub const TRI_DEG2: [TriPoint; 3] = [
    TriPoint { r: 0.5, s: 0.0, w: 1.0 / 6.0 },
    TriPoint { r: 0.5, s: 0.5, w: 1.0 / 6.0 },
    TriPoint { r: 0.0, s: 0.5, w: 1.0 / 6.0 },
];

const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const W1: f64 = 0.066_197_076_394_253_09;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_34;
const W2: f64 = 0.062_969_590_272_413_58;

/// Degree-5 rule (7 points: centroid + two symmetric orbits).
pub const TRI_DEG5: [TriPoint; 7] = [
    TriPoint { r: 1.0 / 3.0, s: 1.0 / 3.0, w: 9.0 / 80.0 },
    TriPoint { r: A1, s: B1, w: W1 },
    TriPoint { r: B1, s: A1, w: W1 },
    TriPoint { r: B1, s: B1, w: W1 },
    TriPoint { r: A2, s: B2, w: W2 },
    TriPoint { r: B2, s: A2, w: W2 },
    TriPoint { r: B2, s: B2, w: W2 },
];

/// Gauss point on the reference line [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct LinePoint {
    pub x: f64,
    pub w: f64,
}

const G3: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)

/// 3-point Gauss-Legendre rule on [-1, 1], exact through degree 5.
pub const LINE_GAUSS3: [LinePoint; 3] = [
    LinePoint { x: -G3, w: 5.0 / 9.0 },
    LinePoint { x: 0.0, w: 8.0 / 9.0 },
    LinePoint { x: G3, w: 5.0 / 9.0 },
];

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_tri(rule: &[TriPoint], f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.iter().map(|q| q.w * f(q.r, q.s)).sum()
    }

    /// Exact value of the monomial integral r^m s^n over the reference
    /// triangle: m! n! / (m + n + 2)!.
    fn exact_monomial(m: u32, n: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        fact(m) * fact(n) / fact(m + n + 2)
    }

    #[test]
    fn deg2_rule_is_exact_through_degree_2() {
        for m in 0..=2u32 {
            for n in 0..=(2 - m) {
                let got = integrate_tri(&TRI_DEG2, |r, s| r.powi(m as i32) * s.powi(n as i32));
                let want = exact_monomial(m, n);
                assert!((got - want).abs() < 1e-15, "r^{m} s^{n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn deg5_rule_is_exact_through_degree_5() {
        for m in 0..=5u32 {
            for n in 0..=(5 - m) {
                let got = integrate_tri(&TRI_DEG5, |r, s| r.powi(m as i32) * s.powi(n as i32));
                let want = exact_monomial(m, n);
                assert!(
                    (got - want).abs() < 1e-15,
                    "r^{m} s^{n}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn gauss3_exact_through_degree_5() {
        for k in 0..=5u32 {
            let got: f64 = LINE_GAUSS3.iter().map(|q| q.w * q.x.powi(k as i32)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() < 1e-15, "x^{k}: {got} vs {want}");
        }
    }

    #[test]
    fn weights_sum_to_reference_measures() {
        let s2: f64 = TRI_DEG2.iter().map(|q| q.w).sum();
        let s5: f64 = TRI_DEG5.iter().map(|q| q.w).sum();
        let sl: f64 = LINE_GAUSS3.iter().map(|q| q.w).sum();
        assert!((s2 - 0.5).abs() < 1e-15);
        assert!((s5 - 0.5).abs() < 1e-15);
        assert!((sl - 2.0).abs() < 1e-15);
    }
}
