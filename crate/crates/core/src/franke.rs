//! Manufactured test problem: the Franke function restricted to the sphere.
//!
//! Surface Laplacians are computed from ambient derivatives. For a function
//! `F` on R³ and a point `x` on S²,
//!
//! ```text
//! Δ*F(x) = ΔF(x) − xᵀ ∇²F(x) x − 2 x·∇F(x)
//! ```
//!
//! which has no coordinate singularity at the poles.

use std::sync::Arc;

use crate::kernel::OperatorL;
use crate::sphere::{SphericalCap, SurfacePoint};

/// First and second ambient partial derivatives of a scalar field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// Surface Laplacian from an ambient jet evaluated at a unit vector.
pub fn surface_laplacian(p: &SurfacePoint, jet: &Jet) -> f64 {
    let x = p.to_array();
    let trace = jet.hess[0][0] + jet.hess[1][1] + jet.hess[2][2];
    let mut quad = 0.0;
    let mut radial = 0.0;
    for i in 0..3 {
        radial += x[i] * jet.grad[i];
        for j in 0..3 {
            quad += x[i] * x[j] * jet.hess[i][j];
        }
    }
    trace - quad - 2.0 * radial
}

/// One-dimensional exponent piece `s·(9v − c)²` or `s·(9v − c)`.
#[derive(Debug, Clone, Copy)]
enum Exponent {
    Quadratic { scale: f64, shift: f64 },
    Linear { scale: f64, shift: f64 },
}

impl Exponent {
    /// (value, d/dv, d²/dv²)
    fn eval(self, v: f64) -> (f64, f64, f64) {
        match self {
            Exponent::Quadratic { scale, shift } => {
                let u = 9.0 * v - shift;
                (scale * u * u, 18.0 * scale * u, 162.0 * scale)
            }
            Exponent::Linear { scale, shift } => (scale * (9.0 * v - shift), 9.0 * scale, 0.0),
        }
    }
}

/// `amp · exp(−qx(x) − qy(y))`.
#[derive(Debug, Clone, Copy)]
struct GaussTerm {
    amp: f64,
    qx: Exponent,
    qy: Exponent,
}

const FRANKE_TERMS: [GaussTerm; 4] = [
    GaussTerm {
        amp: 0.75,
        qx: Exponent::Quadratic {
            scale: 0.25,
            shift: 2.0,
        },
        qy: Exponent::Quadratic {
            scale: 0.25,
            shift: 2.0,
        },
    },
    GaussTerm {
        amp: 0.75,
        qx: Exponent::Quadratic {
            scale: 1.0 / 49.0,
            shift: -1.0,
        },
        qy: Exponent::Linear {
            scale: 0.1,
            shift: -1.0,
        },
    },
    GaussTerm {
        amp: 0.5,
        qx: Exponent::Quadratic {
            scale: 0.25,
            shift: 7.0,
        },
        qy: Exponent::Quadratic {
            scale: 0.25,
            shift: 3.0,
        },
    },
    GaussTerm {
        amp: -0.2,
        qx: Exponent::Quadratic {
            scale: 1.0,
            shift: 4.0,
        },
        qy: Exponent::Quadratic {
            scale: 1.0,
            shift: 7.0,
        },
    },
];

impl GaussTerm {
    fn jet(&self, x: f64, y: f64) -> Jet {
        let (ex, dx, dxx) = self.qx.eval(x);
        let (ey, dy, dyy) = self.qy.eval(y);
        let v = self.amp * (-ex - ey).exp();
        let mut jet = Jet {
            value: v,
            ..Jet::default()
        };
        jet.grad[0] = -dx * v;
        jet.grad[1] = -dy * v;
        jet.hess[0][0] = (dx * dx - dxx) * v;
        jet.hess[1][1] = (dy * dy - dyy) * v;
        jet.hess[0][1] = dx * dy * v;
        jet.hess[1][0] = jet.hess[0][1];
        jet
    }
}

/// Ambient jet of the Franke function `F(x, y)` (independent of z).
pub fn franke_jet(p: &SurfacePoint) -> Jet {
    FRANKE_TERMS.iter().fold(Jet::default(), |mut acc, term| {
        let j = term.jet(p.x, p.y);
        acc.value += j.value;
        for i in 0..3 {
            acc.grad[i] += j.grad[i];
            for k in 0..3 {
                acc.hess[i][k] += j.hess[i][k];
            }
        }
        acc
    })
}

pub fn franke_u(p: &SurfacePoint) -> f64 {
    FRANKE_TERMS
        .iter()
        .map(|t| t.amp * (-t.qx.eval(p.x).0 - t.qy.eval(p.y).0).exp())
        .sum()
}

/// `Δ*u` for the Franke function.
pub fn franke_surface_laplacian(p: &SurfacePoint) -> f64 {
    surface_laplacian(p, &franke_jet(p))
}

pub type ScalarField = Arc<dyn Fn(&SurfacePoint) -> f64 + Send + Sync>;

/// `Lu = f` in the cap, `u = g` on its rim.
#[derive(Clone)]
pub struct DirichletProblem {
    pub f: ScalarField,
    pub g: ScalarField,
    pub exact_u: Option<ScalarField>,
    pub cap: SphericalCap,
    pub op: OperatorL,
}

impl std::fmt::Debug for DirichletProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletProblem")
            .field("cap", &self.cap)
            .field("op", &self.op)
            .field("has_exact", &self.exact_u.is_some())
            .finish()
    }
}

impl DirichletProblem {
    pub fn new(f: ScalarField, g: ScalarField, cap: SphericalCap, op: OperatorL) -> Self {
        DirichletProblem {
            f,
            g,
            exact_u: None,
            cap,
            op,
        }
    }
}

/// The manufactured problem whose exact solution is the Franke function:
/// `f = κ²u − Δ*u`, `g = u`.
pub fn make_franke_problem(cap: SphericalCap, op: OperatorL) -> DirichletProblem {
    let k2 = op.kappa() * op.kappa();
    let u: ScalarField = Arc::new(franke_u);
    DirichletProblem {
        f: Arc::new(move |p| k2 * franke_u(p) - franke_surface_laplacian(p)),
        g: u.clone(),
        exact_u: Some(u),
        cap,
        op,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_points(n: usize, seed: u64) -> Vec<SurfacePoint> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                let z = 2.0 * lcg(&mut s) - 1.0;
                let phi = 2.0 * PI * lcg(&mut s);
                SurfacePoint::from_spherical(z.acos(), phi)
            })
            .collect()
    }

    #[test]
    fn first_term_peak() {
        let (x, y) = (2.0 / 9.0, 2.0 / 9.0);
        let p = SurfacePoint {
            x,
            y,
            z: (1.0 - x * x - y * y).sqrt(),
        };
        let rest: f64 = FRANKE_TERMS[1..]
            .iter()
            .map(|t| t.amp * (-t.qx.eval(x).0 - t.qy.eval(y).0).exp())
            .sum();
        assert!((franke_u(&p) - rest - 0.75).abs() < 1e-15);
    }

    #[test]
    fn north_pole_value() {
        let expect = 0.75 * (-2.0f64).exp()
            + 0.75 * (-1.0f64 / 49.0 - 0.1).exp()
            + 0.5 * (-(49.0f64 + 9.0) / 4.0).exp()
            - 0.2 * (-16.0f64 - 49.0).exp();
        assert!((franke_u(&SurfacePoint::NORTH) - expect).abs() < 1e-15);
    }

    #[test]
    fn mirror_symmetry() {
        for p in random_points(50, 3) {
            let q = SurfacePoint { z: -p.z, ..p };
            assert_eq!(franke_u(&p), franke_u(&q));
            assert_eq!(franke_surface_laplacian(&p), franke_surface_laplacian(&q));
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let h = 1e-5;
        for p in random_points(20, 11) {
            let j = franke_jet(&p);
            let f = |x: f64, y: f64| franke_u(&SurfacePoint { x, y, z: p.z });
            let fx = (f(p.x + h, p.y) - f(p.x - h, p.y)) / (2.0 * h);
            let fy = (f(p.x, p.y + h) - f(p.x, p.y - h)) / (2.0 * h);
            let fxy = (f(p.x + h, p.y + h) - f(p.x + h, p.y - h) - f(p.x - h, p.y + h)
                + f(p.x - h, p.y - h))
                / (4.0 * h * h);
            assert!((j.grad[0] - fx).abs() < 1e-6 * (1.0 + fx.abs()));
            assert!((j.grad[1] - fy).abs() < 1e-6 * (1.0 + fy.abs()));
            assert!((j.hess[0][1] - fxy).abs() < 1e-3 * (1.0 + fxy.abs()));
        }
    }

    #[test]
    fn harmonic_eigenvalues() {
        for p in random_points(100, 5) {
            let mut jet = Jet {
                value: 1.0,
                ..Jet::default()
            };
            assert_eq!(surface_laplacian(&p, &jet), 0.0);

            // F = z: λ₁ = 2
            jet = Jet {
                value: p.z,
                grad: [0.0, 0.0, 1.0],
                ..Jet::default()
            };
            assert!((surface_laplacian(&p, &jet) + 2.0 * p.z).abs() < 1e-10);

            // F = xy: λ₂ = 6
            let mut h = [[0.0; 3]; 3];
            h[0][1] = 1.0;
            h[1][0] = 1.0;
            jet = Jet {
                value: p.x * p.y,
                grad: [p.y, p.x, 0.0],
                hess: h,
            };
            assert!((surface_laplacian(&p, &jet) + 6.0 * p.x * p.y).abs() < 1e-10);
        }
    }

    #[test]
    fn forcing_consistency() {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        let prob = make_franke_problem(cap, OperatorL::new(1.0).unwrap());
        for p in random_points(30, 9) {
            let res = (prob.f)(&p) + franke_surface_laplacian(&p) - franke_u(&p);
            assert!(res.abs() < 1e-12);
        }
        let rim = cap.point_at(cap.radius(), 0.0);
        assert_eq!((prob.g)(&rim), franke_u(&rim));
        let exact = prob.exact_u.as_ref().unwrap();
        assert_eq!((prob.g)(&rim), exact(&rim));
        assert!((prob.f)(&SurfacePoint::NORTH).is_finite());
    }
}
