//! Closed-form benchmark solutions.
//!
//! The Boussinesq system here is `u_t = v_x`, `v_t = (u + u² - u_xx)_x`.

use serde::{Deserialize, Serialize};

/// `u = -3p²/2 · sech²(p/2 · (x - ct + d))` with `c = √(1-p²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub p: f64,
    pub d: f64,
}

impl SolitonParams {
    /// Single-soliton benchmark: `p = 1/√3`, `d = 10`.
    pub fn benchmark() -> Self {
        Self {
            p: 1.0 / 3f64.sqrt(),
            d: 10.0,
        }
    }

    pub fn speed(&self) -> f64 {
        (1.0 - self.p * self.p).sqrt()
    }
}

pub fn soliton_uv(x: f64, t: f64, params: &SolitonParams) -> (f64, f64) {
    let SolitonParams { p, d } = *params;
    let c = params.speed();
    let s = 1.0 / (0.5 * p * (x - c * t + d)).cosh();
    let s2 = s * s;
    (-1.5 * p * p * s2, 1.5 * c * p * p * s2)
}

/// Two-soliton solution `u = -6 ∂ₓ² log ω`,
/// `ω = 1 + e^{η₁} + e^{η₂} + A e^{η₁+η₂}`, `η_j = p_j(x - c_j t + d_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSolitonParams {
    pub p1: f64,
    pub p2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl TwoSolitonParams {
    /// Interaction benchmark: `p₁ = 1/√6`, `p₂ = 1/√5`, `d₁ = -20`, `d₂ = 20`.
    pub fn benchmark() -> Self {
        Self {
            p1: 1.0 / 6f64.sqrt(),
            p2: 1.0 / 5f64.sqrt(),
            d1: -20.0,
            d2: 20.0,
        }
    }

    /// `c_j = (-1)^j √(1 - p_j²)`.
    pub fn speeds(&self) -> (f64, f64) {
        (-(1.0 - self.p1 * self.p1).sqrt(), (1.0 - self.p2 * self.p2).sqrt())
    }

    pub fn interaction(&self) -> f64 {
        let (c1, c2) = self.speeds();
        let dc = (c1 - c2).powi(2);
        (dc - 3.0 * (self.p1 - self.p2).powi(2)) / (dc - 3.0 * (self.p1 + self.p2).powi(2))
    }
}

/// Returns `(u, v)` with `v = -6 ∂ₓ∂ₜ log ω`, the decaying antiderivative of `u_t`.
pub fn two_soliton_uv(x: f64, t: f64, params: &TwoSolitonParams) -> (f64, f64) {
    let TwoSolitonParams { p1, p2, d1, d2 } = *params;
    let (c1, c2) = params.speeds();
    let a = params.interaction();
    let e1 = p1 * (x - c1 * t + d1);
    let e2 = p2 * (x - c2 * t + d2);
    // Scale every exponential by exp(-m) so none overflows.
    let m = 0f64.max(e1).max(e2).max(e1 + e2);
    let w0 = (-m).exp();
    let w1 = (e1 - m).exp();
    let w2 = (e2 - m).exp();
    let w12 = a * (e1 + e2 - m).exp();
    let (k1, k2, k12) = (p1, p2, p1 + p2);
    let (o1, o2) = (-p1 * c1, -p2 * c2);
    let o12 = o1 + o2;
    let w = w0 + w1 + w2 + w12;
    let wx = k1 * w1 + k2 * w2 + k12 * w12;
    let wxx = k1 * k1 * w1 + k2 * k2 * w2 + k12 * k12 * w12;
    let wt = o1 * w1 + o2 * w2 + o12 * w12;
    let wxt = k1 * o1 * w1 + k2 * o2 * w2 + k12 * o12 * w12;
    let u = -6.0 * (wxx / w - (wx / w).powi(2));
    let v = -6.0 * (wxt / w - wx * wt / (w * w));
    (u, v)
}

/// Travelling wave of the pKP equation, `2 tanh(x + y - 7t/4 + 5) + 2`.
pub fn pkp_wave(x: f64, y: f64, t: f64) -> f64 {
    2.0 * (x + y - 1.75 * t + 5.0).tanh() + 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soliton_peak_values() {
        let p = SolitonParams::benchmark();
        let (u, v) = soliton_uv(-10.0, 0.0, &p);
        assert!((u + 0.5).abs() < 1e-15);
        assert!((v - 0.5 * (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((v - 0.408_248_290_463_863).abs() < 1e-12);
        let (u, _) = soliton_uv(-10.0 + 2.0 * 40.0 / p.p + 100.0, 0.0, &p);
        assert!(u.abs() < 1e-30);
    }

    fn bouss_residual(f: impl Fn(f64, f64) -> (f64, f64), x: f64, t: f64) -> (f64, f64) {
        let h = 1e-3;
        let u = |x, t| f(x, t).0;
        let v = |x, t| f(x, t).1;
        let dx = |g: &dyn Fn(f64, f64) -> f64, x: f64, t: f64| {
            (-g(x + 2.0 * h, t) + 8.0 * g(x + h, t) - 8.0 * g(x - h, t) + g(x - 2.0 * h, t)) / (12.0 * h)
        };
        let dt = |g: &dyn Fn(f64, f64) -> f64, x: f64, t: f64| {
            (-g(x, t + 2.0 * h) + 8.0 * g(x, t + h) - 8.0 * g(x, t - h) + g(x, t - 2.0 * h)) / (12.0 * h)
        };
        let uxx =
            |x: f64, t: f64| (-u(x + 2.0 * h, t) + 16.0 * u(x + h, t) - 30.0 * u(x, t) + 16.0 * u(x - h, t) - u(x - 2.0 * h, t)) / (12.0 * h * h);
        let flux = |x: f64, t: f64| u(x, t) + u(x, t).powi(2) - uxx(x, t);
        (dt(&u, x, t) - dx(&v, x, t), dt(&v, x, t) - dx(&flux, x, t))
    }

    #[test]
    fn soliton_solves_boussinesq() {
        let p = SolitonParams::benchmark();
        for &(x, t) in &[(-12.0, 0.3), (-5.0, 2.0), (3.0, 7.0)] {
            let (r1, r2) = bouss_residual(|x, t| soliton_uv(x, t, &p), x, t);
            assert!(r1.abs() < 1e-7 && r2.abs() < 1e-5, "{r1} {r2}");
        }
    }

    #[test]
    fn interaction_coefficient() {
        assert!((TwoSolitonParams::benchmark().interaction() - 3.045_875_734_3).abs() < 1e-9);
    }

    #[test]
    fn two_soliton_decays_and_is_consistent() {
        let p = TwoSolitonParams::benchmark();
        for x in [-400.0, 400.0, -2000.0, 2000.0] {
            let (u, v) = two_soliton_uv(x, 0.0, &p);
            assert!(u.abs() < 1e-14 && v.abs() < 1e-14, "{x}: {u} {v}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-60.0..60.0);
            let t: f64 = rng.gen_range(0.0..50.0);
            let ut = (two_soliton_uv(x, t + h, &p).0 - two_soliton_uv(x, t - h, &p).0) / (2.0 * h);
            let vx = (two_soliton_uv(x + h, t, &p).1 - two_soliton_uv(x - h, t, &p).1) / (2.0 * h);
            assert!((ut - vx).abs() <= 1e-6);
        }
        for &(x, t) in &[(-20.0, 1.0), (15.0, 10.0), (0.0, 20.0)] {
            let (r1, r2) = bouss_residual(|x, t| two_soliton_uv(x, t, &p), x, t);
            assert!(r1.abs() < 1e-6 && r2.abs() < 1e-5, "{r1} {r2}");
        }
    }

    #[test]
    fn pkp_wave_range_and_equation() {
        assert_eq!(pkp_wave(-5.0, 0.0, 0.0), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-2;
        for _ in 0..100 {
            let (x, y, t): (f64, f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..5.0));
            let u = pkp_wave(x, y, t);
            assert!(u > 0.0 && u < 4.0 || (u - 4.0).abs() < 1e-12 || u.abs() < 1e-12);
            // Sixth-order central differences.
            let d1 = |f: &dyn Fn(f64) -> f64, s: f64| {
                (f(s + 3.0 * h) - 9.0 * f(s + 2.0 * h) + 45.0 * f(s + h) - 45.0 * f(s - h) + 9.0 * f(s - 2.0 * h) - f(s - 3.0 * h)) / (60.0 * h)
            };
            let d2 = |f: &dyn Fn(f64) -> f64, s: f64| {
                (2.0 * f(s + 3.0 * h) - 27.0 * f(s + 2.0 * h) + 270.0 * f(s + h) - 490.0 * f(s) + 270.0 * f(s - h) - 27.0 * f(s - 2.0 * h)
                    + 2.0 * f(s - 3.0 * h))
                    / (180.0 * h * h)
            };
            let ux = |xx: f64, tt: f64| d1(&|s| pkp_wave(s, y, tt), xx);
            let uxt = d1(&|s| ux(x, s), t);
            let uxx = d2(&|s| pkp_wave(s, y, t), x);
            let uxxxx = d2(&|s| d2(&|r| pkp_wave(r, y, t), s), x);
            let uyy = d2(&|s| pkp_wave(x, s, t), y);
            let res = uxt + 1.5 * ux(x, t) * uxx + 0.25 * uxxxx + 0.75 * uyy;
            assert!(res.abs() <= 1e-5, "{res}");
        }
    }
}
