//! Deviatoric stress laws and their consistent tangents.
//!
//! Two laws are supported: Newtonian `tau = mu * D` and the regularized
//! Bingham model
//!
//! ```text
//! tau = [ mu0 + tau0 * (1 - exp(-m * sqrt(J2))) / sqrt(J2) ] * D
//! ```
//!
//! where `J2 = 0.5 * D:D`. The exponential regularization keeps the
//! apparent viscosity finite at rest, with `mu_app -> mu0 + tau0 * m`
//! as `D -> 0`.

/// Switch point on `sqrt(J2)` below which the apparent viscosity and its
/// derivative are evaluated by series expansion instead of the closed form.
pub const EPS_REG: f64 = 1e-12;

/// Constitutive law for the deviatoric stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluidLaw {
    Newtonian {
        mu: f64,
    },
    Bingham {
        /// Plastic viscosity, governs the flow past the yield threshold.
        mu0: f64,
        /// Yield stress.
        tau0: f64,
        /// Regularization parameter of the exponential smoothing.
        m: f64,
    },
}

impl FluidLaw {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            FluidLaw::Newtonian { mu } => {
                if !(mu > 0.0) {
                    return Err(format!("viscosity must be positive, got {mu}"));
                }
            }
            FluidLaw::Bingham { mu0, tau0, m } => {
                if !(mu0 > 0.0) {
                    return Err(format!("plastic viscosity must be positive, got {mu0}"));
                }
                if !(tau0 >= 0.0) {
                    return Err(format!("yield stress must be non-negative, got {tau0}"));
                }
                if !(m > 0.0) {
                    return Err(format!("regularization parameter must be positive, got {m}"));
                }
            }
        }
        Ok(())
    }

    /// Reference viscosity scale, used for interface friction derived from
    /// the boundary-layer constant.
    pub fn viscosity_scale(&self) -> f64 {
        match *self {
            FluidLaw::Newtonian { mu } => mu,
            FluidLaw::Bingham { mu0, .. } => mu0,
        }
    }

    pub fn is_linear(&self) -> bool {
        match *self {
            FluidLaw::Newtonian { .. } => true,
            FluidLaw::Bingham { tau0, .. } => tau0 == 0.0,
        }
    }
}

/// Symmetric second-order tensor in 2D, stored as (xx, yy, xy).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { xx: 0.0, yy: 0.0, xy: 0.0 };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    /// Full double contraction `self : other`.
    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn scale(&self, s: f64) -> SymTensor2 {
        SymTensor2::new(self.xx * s, self.yy * s, self.xy * s)
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Conjugation by a rotation: `R self R^T`.
    pub fn rotate(&self, c: f64, s: f64) -> SymTensor2 {
        // R = [[c, -s], [s, c]]
        let xx = c * c * self.xx - 2.0 * c * s * self.xy + s * s * self.yy;
        let yy = s * s * self.xx + 2.0 * c * s * self.xy + c * c * self.yy;
        let xy = c * s * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        SymTensor2::new(xx, yy, xy)
    }
}

/// Fourth-order tangent with minor symmetries, stored as a 3x3 matrix on the
/// component basis (xx, yy, xy). Application to a symmetric tensor carries
/// the factor 2 on the shear column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent4 {
    pub c: [[f64; 3]; 3],
}

impl Tangent4 {
    /// The symmetric identity `I_sym` (both major and minor symmetries).
    pub fn identity_sym() -> Tangent4 {
        Tangent4 {
            c: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]],
        }
    }

    pub fn scaled_identity(mu: f64) -> Tangent4 {
        Tangent4 {
            c: [[mu, 0.0, 0.0], [0.0, mu, 0.0], [0.0, 0.0, 0.5 * mu]],
        }
    }

    /// `self : d` for a symmetric tensor `d`.
    pub fn apply(&self, d: &SymTensor2) -> SymTensor2 {
        let v = [d.xx, d.yy, 2.0 * d.xy];
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = self.c[i][0] * v[0] + self.c[i][1] * v[1] + self.c[i][2] * v[2];
        }
        SymTensor2::new(out[0], out[1], out[2])
    }

    /// Adds `w * a (x) b` (dyadic of symmetric tensors) to the tangent.
    pub fn add_dyad(&mut self, a: &SymTensor2, b: &SymTensor2, w: f64) {
        let av = [a.xx, a.yy, a.xy];
        let bv = [b.xx, b.yy, b.xy];
        for i in 0..3 {
            for j in 0..3 {
                // product ordered so that a == b gives bit-exact symmetry
                self.c[i][j] += av[i] * bv[j] * w;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
    }
}

/// Second invariant of the strain rate, `J2 = 0.5 * D:D`.
pub fn j2(d: &SymTensor2) -> f64 {
    0.5 * d.ddot(d)
}

/// Apparent viscosity `mu_app(J2)` of the regularized Bingham law.
fn mu_app_bingham(mu0: f64, tau0: f64, m: f64, s: f64) -> f64 {
    if s < EPS_REG {
        // series of (1 - exp(-m s)) / s about s = 0
        let x = m * s;
        mu0 + tau0 * m * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        mu0 + tau0 * (-f64::exp_m1(-m * s)) / s
    }
}

/// Derivative `d mu_app / d J2`.
fn dmu_dj2_bingham(tau0: f64, m: f64, s: f64) -> f64 {
    if s == 0.0 {
        // The tangent contribution mu'_app * D (x) D vanishes with D.
        0.0
    } else if s < EPS_REG {
        
        // [(m s + 1) exp(-m s) - 1] / (2 s^3) expanded about s = 0
        tau0 * (-m * m / (4.0 * s) + m * m * m / 6.0 - m * m * m * m * s / 16.0)
    } else {
        let x = m * s;
        let g = f64::exp_m1(-x) + x * (-x).exp();
        tau0 * g / (2.0 * s * s * s)
    }
}

/// Deviatoric stress `tau(D)`.
pub fn deviatoric_stress(law: &FluidLaw, d: &SymTensor2) -> SymTensor2 {
    match *law {
        FluidLaw::Newtonian { mu } => d.scale(mu),
        FluidLaw::Bingham { mu0, tau0, m } => {
            let s = j2(d).sqrt();
            d.scale(mu_app_bingham(mu0, tau0, m, s))
        }
    }
}

/// Apparent viscosity of the law at the given strain rate. For the Newtonian
/// law this is the constant viscosity.
pub fn apparent_viscosity(law: &FluidLaw, d: &SymTensor2) -> f64 {
    match *law {
        FluidLaw::Newtonian { mu } => mu,
        FluidLaw::Bingham { mu0, tau0, m } => mu_app_bingham(mu0, tau0, m, j2(d).sqrt()),
    }
}

/// Apparent viscosity and its derivative w.r.t. `J2`, from the invariant
/// alone. This is what the element loops consume.
pub fn viscosity_state(law: &FluidLaw, j2v: f64) -> (f64, f64) {
    match *law {
        FluidLaw::Newtonian { mu } => (mu, 0.0),
        FluidLaw::Bingham { mu0, tau0, m } => {
            let s = j2v.max(0.0).sqrt();
            (mu_app_bingham(mu0, tau0, m, s), dmu_dj2_bingham(tau0, m, s))
        }
    }
}

/// Consistent tangent `d tau / d D`.
pub fn tangent(law: &FluidLaw, d: &SymTensor2) -> Tangent4 {
    match *law {
        FluidLaw::Newtonian { mu } => Tangent4::scaled_identity(mu),
        FluidLaw::Bingham { mu0, tau0, m } => {
            let s = j2(d).sqrt();
            let mut t = Tangent4::scaled_identity(mu_app_bingham(mu0, tau0, m, s));
            t.add_dyad(d, d, dmu_dj2_bingham(tau0, m, s));
            t
        }
    }
}

/// Deviatoric projector of the linearization, with the 3D factor 1/3 kept
/// verbatim; stored with minor symmetries so it acts correctly on symmetric
/// tensors.
pub fn deviatoric_projector() -> Tangent4 {
    let t = 1.0 / 3.0;
    Tangent4 {
        c: [
            [1.0 - t, -t, 0.0],
            [-t, 1.0 - t, 0.0],
            [0.0, 0.0, 0.5],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rand_tensor(rng: &mut impl Rng, scale: f64) -> SymTensor2 {
        SymTensor2::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn j2_trivial_cases() {
        assert_eq!(j2(&SymTensor2::ZERO), 0.0);
        assert_eq!(j2(&SymTensor2::new(1.0, -1.0, 0.0)), 1.0);
    }

    #[test]
    fn j2_matches_component_sum_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let d = rand_tensor(&mut rng, 3.0);
            // independent summation over the full 2x2 matrix
            let full = [[d.xx, d.xy], [d.xy, d.yy]];
            let mut acc = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    acc += full[i][j] * full[i][j];
                }
            }
            let oracle = 0.5 * acc;
            assert!((j2(&d) - oracle).abs() <= 1e-14 * oracle.max(1.0));
        }
    }

    #[test]
    fn newtonian_stress_is_identity_scaling() {
        let law = FluidLaw::Newtonian { mu: 1.0 };
        let d = SymTensor2::new(1.0, -1.0, 0.0);
        let t = deviatoric_stress(&law, &d);
        assert_eq!(t, d);
    }

    #[test]
    fn bingham_stress_at_unit_j2() {
        // mu0=20, tau0=20, m=15, D=diag(1,-1) so J2=1:
        // mu_app = 20 + 20 (1 - e^-15)
        let law = FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 };
        let d = SymTensor2::new(1.0, -1.0, 0.0);
        let mu_app = 20.0 + 20.0 * (1.0 - (-15.0_f64).exp());
        assert!((mu_app - 39.99999388).abs() < 1e-6);
        let t = deviatoric_stress(&law, &d);
        assert!((t.xx - mu_app).abs() < 1e-12 * mu_app);
        assert!((t.yy + mu_app).abs() < 1e-12 * mu_app);
    }

    #[test]
    fn bingham_rest_limit() {
        // mu_app -> mu0 + tau0 * m as D -> 0
        let law = FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 };
        let limit = 320.0;
        let v = apparent_viscosity(&law, &SymTensor2::ZERO);
        assert!((v - limit).abs() < 1e-8 * limit);
        // tau -> (mu0 + tau0 m) D for tiny D
        let d = SymTensor2::new(1e-13, -1e-13, 0.0);
        let t = deviatoric_stress(&law, &d);
        assert!((t.xx / d.xx - limit).abs() < 1e-6 * limit);
    }

    #[test]
    fn bingham_tangent_finite_difference() {
        let law = FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 };
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            // scale D so J2 spans [0.1, 10]
            let mut d = rand_tensor(&mut rng, 1.0);
            let target = rng.gen_range(0.1..10.0_f64);
            let cur = j2(&d);
            d = d.scale((target / cur).sqrt());
            let dd = rand_tensor(&mut rng, 1.0);
            let eps = 1e-6 * d.norm();
            let tp = deviatoric_stress(&law, &SymTensor2::new(d.xx + eps * dd.xx, d.yy + eps * dd.yy, d.xy + eps * dd.xy));
            let tm = deviatoric_stress(&law, &SymTensor2::new(d.xx - eps * dd.xx, d.yy - eps * dd.yy, d.xy - eps * dd.xy));
            let fd = SymTensor2::new(
                (tp.xx - tm.xx) / (2.0 * eps),
                (tp.yy - tm.yy) / (2.0 * eps),
                (tp.xy - tm.xy) / (2.0 * eps),
            );
            let an = tangent(&law, &d).apply(&dd);
            let denom = fd.norm().max(1e-30);
            let err = SymTensor2::new(an.xx - fd.xx, an.yy - fd.yy, an.xy - fd.xy).norm() / denom;
            worst = worst.max(err);
        }
        assert!(worst < 1e-6, "worst tangent FD error {worst}");
    }

    #[test]
    fn bingham_zero_yield_reduces_to_newtonian() {
        let b = FluidLaw::Bingham { mu0: 20.0, tau0: 0.0, m: 15.0 };
        let n = FluidLaw::Newtonian { mu: 20.0 };
        let d = SymTensor2::new(0.3, -0.8, 0.45);
        assert_eq!(deviatoric_stress(&b, &d), deviatoric_stress(&n, &d));
        assert_eq!(tangent(&b, &d), tangent(&n, &d));
    }

    #[test]
    fn newtonian_tangent_constant() {
        let law = FluidLaw::Newtonian { mu: 20.0 };
        let t = tangent(&law, &SymTensor2::new(4.0, 1.0, -2.0));
        assert_eq!(t, Tangent4::scaled_identity(20.0));
    }

    #[test]
    fn tangent_major_symmetry_exact() {
        let law = FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 };
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let d = rand_tensor(&mut rng, 2.0);
            let t = tangent(&law, &d);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(t.c[i][j], t.c[j][i]);
                }
            }
        }
    }

    #[test]
    fn projector_identity_on_trace_free_input() {
        let p = deviatoric_projector();
        let d = SymTensor2::new(1.0, -1.0, 0.7);
        let once = p.apply(&d);
        assert!((once.xx - d.xx).abs() < 1e-15);
        assert!((once.yy - d.yy).abs() < 1e-15);
        assert!((once.xy - d.xy).abs() < 1e-15);
        let twice = p.apply(&once);
        assert!((twice.xx - once.xx).abs() < 1e-15);
        assert!((twice.xy - once.xy).abs() < 1e-15);
    }

    #[test]
    fn projector_on_identity_tensor() {
        // Direct component evaluation of the projector with the 3D factor 1/3
        // applied to the 2D identity: delta_ij - (1/3) delta_ij delta_kk
        // with k running over 1..2 gives (1 - 2/3) I = diag(1/3, 1/3).
        let p = deviatoric_projector();
        let out = p.apply(&SymTensor2::new(1.0, 1.0, 0.0));
        assert!((out.xx - 1.0 / 3.0).abs() < 1e-15);
        assert!((out.yy - 1.0 / 3.0).abs() < 1e-15);
        assert!(out.xy.abs() < 1e-15);
    }

    #[test]
    fn frame_invariance_both_laws() {
        let laws = [
            FluidLaw::Newtonian { mu: 3.0 },
            FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 },
        ];
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for law in &laws {
            for _ in 0..20 {
                let d = rand_tensor(&mut rng, 2.0);
                let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                let (s, c) = ang.sin_cos();
                let lhs = deviatoric_stress(law, &d.rotate(c, s));
                let rhs = deviatoric_stress(law, &d).rotate(c, s);
                let scale = rhs.norm().max(1.0);
                assert!((lhs.xx - rhs.xx).abs() < 1e-12 * scale);
                assert!((lhs.yy - rhs.yy).abs() < 1e-12 * scale);
                assert!((lhs.xy - rhs.xy).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn mu_app_bounded_by_rest_limit() {
        let law = FluidLaw::Bingham { mu0: 20.0, tau0: 20.0, m: 15.0 };
        let sup = 20.0 + 20.0 * 15.0;
        for k in -12..4 {
            let s = 10.0_f64.powi(k);
            let d = SymTensor2::new(s, -s, 0.0);
            let v = apparent_viscosity(&law, &d.scale(1.0 / 2.0_f64.sqrt()));
            assert!(v > 0.0 && v <= sup + 1e-9 * sup);
        }
    }
}
