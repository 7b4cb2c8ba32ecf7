//! The compactly supported Wendland kernel on S², its images under the
//! zonal Laplace–Beltrami operator, and the Legendre (spectral) coefficients
//! of the kernel.
//!
//! A zonal kernel `φ(x, y) = Φ(x·y)` is stored through its radial profile
//! `p(r) = Φ(1 − r²/2)` in the chord variable `r = |x − y|`. On zonal
//! functions the Laplace–Beltrami operator acts as the Legendre operator
//! `ℒ = d/dt (1 − t²) d/dt`, which in the chord variable reads
//!
//! ```text
//! ℒp = ¼ [ (4 − r²) p″ + (4 − 3r²) p′ / r ]
//! ℒ rᵏ = k² rᵏ⁻² − k(k + 2)/4 · rᵏ
//! ```
//!
//! so it maps polynomials without a linear term to polynomials of the same
//! degree. All kernel images needed by the collocation matrix are therefore
//! plain polynomials, including their values at `r = 0`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

/// A radial profile `p(r) = Σ c_k r^k` on `[0, 1]`, identically zero for `r > 1`.
///
/// For `r > 1/2` the profile is evaluated from its expansion in `s = 1 − r`,
/// which avoids the cancellation of the monomial form where a compactly
/// supported kernel vanishes to high order.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    coefficients: Vec<f64>,
    shifted: Vec<f64>,
}

impl RadialProfile {
    pub fn new(coefficients: Vec<f64>) -> Self {
        let mut p = RadialProfile {
            coefficients,
            shifted: Vec::new(),
        };
        p.trim();
        p.shifted = taylor_shift(&p.coefficients);
        p
    }

    fn trim(&mut self) {
        while self.coefficients.len() > 1 && *self.coefficients.last().unwrap() == 0.0 {
            self.coefficients.pop();
        }
        if self.coefficients.is_empty() {
            self.coefficients.push(0.0);
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Horner evaluation with compact support. Negative `r` is rejected.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::invalid(format!(
                "radial argument {r} must be non-negative"
            )));
        }
        Ok(self.value(r))
    }

    /// Unchecked variant of [`eval`](Self::eval) for hot loops; `r` must be ≥ 0.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r > 1.0 {
            return 0.0;
        }
        self.polynomial(r)
    }

    /// The polynomial itself, ignoring the support cut-off.
    #[inline]
    pub fn polynomial(&self, r: f64) -> f64 {
        if r > 0.5 {
            let s = 1.0 - r;
            self.shifted.iter().rev().fold(0.0, |acc, &c| acc * s + c)
        } else {
            self.coefficients
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * r + c)
        }
    }

    /// Coefficients of `p(1 − s)` in powers of `s`.
    pub fn shifted_coefficients(&self) -> &[f64] {
        &self.shifted
    }

    /// Profile as a function of `t = x·y`, i.e. `Φ(t) = p(√(2 − 2t))`.
    pub fn zonal(&self, t: f64) -> f64 {
        self.value((2.0 - 2.0 * t).max(0.0).sqrt())
    }

    pub fn scaled(&self, s: f64) -> RadialProfile {
        RadialProfile::new(self.coefficients.iter().map(|c| c * s).collect())
    }

    pub fn plus(&self, other: &RadialProfile) -> RadialProfile {
        let n = self.coefficients.len().max(other.coefficients.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        RadialProfile::new(
            (0..n)
                .map(|i| get(&self.coefficients, i) + get(&other.coefficients, i))
                .collect(),
        )
    }
}

/// Coefficients `d_k` with `Σ c_j rʲ = Σ d_k (1 − r)ᵏ`. A `d_k` below the
/// rounding bound of its own computation is set to zero, so an exact zero of
/// order `m` at `r = 1` survives as `d_0 = … = d_{m−1} = 0`.
fn taylor_shift(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut d = vec![0.0; n];
    let mut bound = vec![0.0; n];
    let mut binom = vec![1.0_f64; n];
    for (j, &cj) in c.iter().enumerate() {
        // binom[k] = C(j, k)
        for k in (1..j).rev() {
            binom[k] += binom[k - 1];
        }
        if j > 0 {
            binom[j] = 1.0;
        }
        for k in 0..=j {
            let term = cj * binom[k];
            d[k] += if k % 2 == 0 { term } else { -term };
            bound[k] += term.abs();
        }
    }
    for (dk, b) in d.iter_mut().zip(&bound) {
        if dk.abs() <= 4.0 * n as f64 * f64::EPSILON * b {
            *dk = 0.0;
        }
    }
    d
}

/// `(1 − r)⁸₊ (1 + 8r + 25r² + 32r³)`, expanded to degree 11.
pub fn wendland_psi() -> RadialProfile {
    let mut poly = vec![1.0, 8.0, 25.0, 32.0];
    for _ in 0..8 {
        // multiply by (1 − r)
        let mut next = vec![0.0; poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c;
        }
        poly = next;
    }
    RadialProfile::new(poly)
}

/// Image of a profile under the Legendre operator ℒ, written in the chord
/// variable. Fails when `p` has a linear term, whose image has a `1/r` pole.
pub fn apply_legendre_operator(p: &RadialProfile) -> Result<RadialProfile> {
    let c = p.coefficients();
    if c.len() > 1 && c[1].abs() > 1e-12 * p.max_abs_coefficient() {
        return Err(Error::SingularProfile(c[1]));
    }
    let mut out = vec![0.0; c.len()];
    for (k, &ck) in c.iter().enumerate().skip(2) {
        let kf = k as f64;
        out[k - 2] += kf * kf * ck;
        out[k] -= kf * (kf + 2.0) / 4.0 * ck;
    }
    Ok(RadialProfile::new(out))
}

/// `L = κ²I − Δ*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorL {
    kappa: f64,
}

impl OperatorL {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!(
                "kappa {kappa} must be finite and non-negative"
            )));
        }
        Ok(OperatorL { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Profile of `L` applied to one argument of the zonal kernel.
    pub fn apply(&self, p: &RadialProfile) -> Result<RadialProfile> {
        let k2 = self.kappa * self.kappa;
        Ok(p.scaled(k2).plus(&apply_legendre_operator(p)?.scaled(-1.0)))
    }
}

/// Profiles of `φ`, `L₂φ` and `L₁L₂φ`: the entries of the three Gram blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub psi: RadialProfile,
    pub l_psi: RadialProfile,
    pub ll_psi: RadialProfile,
    pub sobolev_order: f64,
    pub kappa: f64,
}

impl KernelTable {
    pub fn build(psi: RadialProfile, op: OperatorL) -> Result<Self> {
        let k2 = op.kappa() * op.kappa();
        let lap = apply_legendre_operator(&psi)?;
        let lap2 = apply_legendre_operator(&lap)?;
        let l_psi = psi.scaled(k2).plus(&lap.scaled(-1.0));
        let ll_psi = psi.scaled(k2 * k2).plus(&lap.scaled(-2.0 * k2)).plus(&lap2);
        Ok(KernelTable {
            psi,
            l_psi,
            ll_psi,
            sobolev_order: 4.5,
            kappa: op.kappa(),
        })
    }

    /// The Wendland table used throughout the experiments.
    pub fn wendland(op: OperatorL) -> Self {
        Self::build(wendland_psi(), op).expect("Wendland profile has no linear term")
    }
}

/// Closed form of ℒΦ for the Wendland kernel as it is usually printed,
/// `−44(√(2−2t) − 1)⁶ (6t² − 19t + 12 + (208t³ − 260t² − 92t + 144)/√(2−2t))`.
///
/// On the support `t ≥ 1/2` it equals `−ℒΦ(t)`; below it is not truncated.
pub fn printed_closed_form(t: f64) -> f64 {
    let r = (2.0 - 2.0 * t).sqrt();
    -44.0
        * (r - 1.0).powi(6)
        * (6.0 * t * t - 18.0 * t - t
            + 12.0
            + (208.0 * t.powi(3) - 260.0 * t * t - 92.0 * t + 144.0) / r)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// `P_0(t) … P_ℓmax(t)` by the three-term recurrence.
pub fn legendre_values(ell_max: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if ell_max >= 1 {
        out.push(t);
    }
    for l in 2..=ell_max {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * t * out[l - 1] - (lf - 1.0) * out[l - 2]) / lf;
        out.push(next);
    }
}

pub const MAX_DEGREE: usize = 200;

fn legendre_coefficients_with(psi: &RadialProfile, ell_max: usize, n_nodes: usize) -> Vec<f64> {
    // a_ℓ = 2π ∫_{-1}^{1} Φ(t) P_ℓ(t) dt = 2π ∫_0^1 p(r) P_ℓ(1 − r²/2) r dr
    let (x, w) = gauss_legendre(n_nodes);
    let mut a = vec![0.0; ell_max + 1];
    let mut p = Vec::with_capacity(ell_max + 1);
    for (xi, wi) in x.iter().zip(&w) {
        let r = 0.5 * (xi + 1.0);
        let weight = 0.5 * wi * psi.polynomial(r) * r;
        legendre_values(ell_max, 1.0 - 0.5 * r * r, &mut p);
        for (al, pl) in a.iter_mut().zip(&p) {
            *al += weight * pl;
        }
    }
    a.iter_mut().for_each(|v| *v *= 2.0 * PI);
    a
}

/// Legendre coefficients `a_0 … a_ℓmax` of a zonal kernel with support
/// `r ≤ 1`, for n = 2 (`ω₁ = 2π`, unit weight).
///
/// Quadrature runs in the chord variable, where the integrand is a
/// polynomial; the result is cross-checked against twice as many nodes.
pub fn legendre_coefficients(psi: &RadialProfile, ell_max: usize) -> Result<Vec<f64>> {
    if ell_max > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "ell_max {ell_max} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    let n = (4 * ell_max).max(32);
    let coarse = legendre_coefficients_with(psi, ell_max, n);
    let fine = legendre_coefficients_with(psi, ell_max, 2 * n);
    let scale = fine.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let change = coarse
        .iter()
        .zip(&fine)
        .fold(0.0_f64, |m, (c, f)| m.max((c - f).abs()))
        / scale.max(f64::MIN_POSITIVE);
    if change > 1e-10 {
        return Err(Error::Quadrature { nodes: n, change });
    }
    Ok(fine)
}

/// Truncated series `(1/4π) Σ a_ℓ (2ℓ + 1) P_ℓ(t)`.
pub fn legendre_series(a: &[f64], t: f64) -> f64 {
    let mut p = Vec::with_capacity(a.len());
    legendre_values(a.len().saturating_sub(1), t, &mut p);
    a.iter()
        .zip(&p)
        .enumerate()
        .map(|(l, (al, pl))| al * (2 * l + 1) as f64 * pl)
        .sum::<f64>()
        / (4.0 * PI)
}

/// Least-squares slope of `ln a_ℓ` against `ln ℓ` over `lo..=hi`.
pub fn decay_slope(a: &[f64], lo: usize, hi: usize) -> Result<f64> {
    if lo == 0 || hi <= lo || hi >= a.len() {
        return Err(Error::invalid(format!("bad fit range {lo}..={hi}")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (l, &al) in a.iter().enumerate().take(hi + 1).skip(lo) {
        if al <= 0.0 {
            return Err(Error::invalid(format!("a_{l} = {al:e} is not positive")));
        }
        xs.push((l as f64).ln());
        ys.push(al.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// `ell,a_ell` rows.
pub fn write_spectrum_csv<W: Write>(mut out: W, a: &[f64]) -> Result<()> {
    writeln!(out, "ell,a_ell")?;
    for (l, v) in a.iter().enumerate() {
        writeln!(out, "{l},{v:?}")?;
    }
    Ok(())
}

/// Finite-difference self-checks of the operator images, used by the
/// `kernel-check` command.
pub mod selfcheck {
    use super::*;

    /// Fourth-order central estimates of `f′, f″, f‴, f⁗` at `t`.
    pub fn derivatives(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> [f64; 4] {
        let v: Vec<f64> = (-3..=3).map(|k| f(t + k as f64 * h)).collect();
        let (m3, m2, m1, z, p1, p2, p3) = (v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
        let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
        let d3 = (m3 - 8.0 * m2 + 13.0 * m1 - 13.0 * p1 + 8.0 * p2 - p3) / (8.0 * h.powi(3));
        let d4 = (-m3 + 12.0 * m2 - 39.0 * m1 + 56.0 * z - 39.0 * p1 + 12.0 * p2 - p3)
            / (6.0 * h.powi(4));
        [d1, d2, d3, d4]
    }

    /// `(1 − t²)Φ″ − 2tΦ′` by finite differences.
    pub fn legendre_image_fd(phi: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let d = derivatives(phi, t, h);
        (1.0 - t * t) * d[1] - 2.0 * t * d[0]
    }

    /// `ℒ²Φ = (1 − t²)²Φ⁗ − 8t(1 − t²)Φ‴ + (14t² − 6)Φ″ + 4tΦ′` by finite differences.
    pub fn legendre_image2_fd(phi: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let d = derivatives(phi, t, h);
        let s = 1.0 - t * t;
        s * s * d[3] - 8.0 * t * s * d[2] + (14.0 * t * t - 6.0) * d[1] + 4.0 * t * d[0]
    }

    #[derive(Debug, Clone, serde::Serialize)]
    pub struct OperatorCheck {
        pub t: Vec<f64>,
        pub polynomial: Vec<f64>,
        pub finite_difference: Vec<f64>,
        pub printed: Vec<f64>,
        /// `max |poly − fd| / max |fd|` over the sample.
        pub max_rel_error: f64,
        /// `max |poly + printed| / max |poly|` over `t ≥ 1/2`.
        pub printed_sign_flipped_rel_error: f64,
    }

    /// Compares the polynomial ℒψ (and ℒ²ψ when `second` is set) with
    /// finite differences at `n` equispaced `t` in `[t_lo, t_hi]`.
    pub fn check_operator(
        psi: &RadialProfile,
        n: usize,
        t_lo: f64,
        t_hi: f64,
        second: bool,
    ) -> Result<OperatorCheck> {
        let lap = apply_legendre_operator(psi)?;
        let target = if second {
            apply_legendre_operator(&lap)?
        } else {
            lap
        };
        let phi = |t: f64| psi.zonal(t);
        let ts: Vec<f64> = (0..n)
            .map(|i| t_lo + (t_hi - t_lo) * i as f64 / (n - 1).max(1) as f64)
            .collect();
        let poly: Vec<f64> = ts.iter().map(|&t| target.zonal(t)).collect();
        let fd: Vec<f64> = ts
            .iter()
            .map(|&t| {
                // keep the stencil clear of the (1 − t)^{5/2} kink at t = 1
                let room = (1.0 - t.abs()) / 4.0;
                if second {
                    legendre_image2_fd(&phi, t, room.min(1e-3))
                } else {
                    legendre_image_fd(&phi, t, room.min(1e-4))
                }
            })
            .collect();
        let printed: Vec<f64> = ts.iter().map(|&t| printed_closed_form(t)).collect();
        let fd_scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let max_rel_error = poly
            .iter()
            .zip(&fd)
            .fold(0.0_f64, |m, (p, f)| m.max((p - f).abs()))
            / fd_scale;
        let on_support = ts
            .iter()
            .zip(poly.iter().zip(&printed))
            .filter(|(t, _)| **t >= 0.5);
        let poly_scale = on_support
            .clone()
            .fold(0.0_f64, |m, (_, (p, _))| m.max(p.abs()));
        let printed_sign_flipped_rel_error = on_support
            .fold(0.0_f64, |m, (_, (p, q))| m.max((p + q).abs()))
            / poly_scale.max(f64::MIN_POSITIVE);
        Ok(OperatorCheck {
            t: ts,
            polynomial: poly,
            finite_difference: fd,
            printed,
            max_rel_error,
            printed_sign_flipped_rel_error,
        })
    }
}
