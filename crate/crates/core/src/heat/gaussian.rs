//! One-dimensional Gaussian heat-kernel primitives, normalised as
//! `p_t(z) = (4πt)^{-1/2} exp(-z²/4t)`.

use std::f64::consts::PI;

use crate::special::{erfc, erfcx};

/// `d²/4t` beyond which a pair is dropped from double sums.
pub const CUTOFF_EXPONENT: f64 = 46.0;

/// One-dimensional heat kernel density.
#[inline]
pub fn density(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `(4πt)^{-n/2} exp(-d²/4t)` on ℝⁿ.
pub fn density_nd(n: usize, t: f64, d: f64) -> f64 {
    (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).powf(n as f64 / 2.0)
}

/// Mass of the kernel beyond `z`: `∫_z^∞ p_t = erfc(z / 2√t) / 2`.
#[inline]
pub fn upper_mass(t: f64, z: f64) -> f64 {
    0.5 * erfc(z / (2.0 * t.sqrt()))
}

/// `T(z) = ∫_z^∞ upper_mass(t, s) ds`, the second antiderivative of `p_t`
/// with `T(+∞) = 0`. Uses `T(-z) = z + T(z)` for negative arguments.
pub fn second_antiderivative(t: f64, z: f64) -> f64 {
    if z < 0.0 {
        return -z + second_antiderivative(t, -z);
    }
    let u = z / (2.0 * t.sqrt());
    if u > 27.0 {
        return 0.0;
    }
    // T = p(z) (2t - z upper_mass / p) with upper_mass / p = √(πt) erfcx(u)
    let p = density(t, z);
    p * (2.0 * t - z * (PI * t).sqrt() * erfcx(u))
}

/// Kernel averaged over two cells of width `h` whose centres are `d` apart:
/// `h⁻² ∫∫ p_t(x - y) dx dy`.
pub fn cell_average(t: f64, h: f64, d: f64) -> f64 {
    let d = d.abs();
    let tt = |z: f64| second_antiderivative(t, z);
    if d < 0.5 * h {
        // T(h) - 2T(0) + T(-h) with T(-h) = h + T(h)
        (2.0 * tt(h) - 2.0 * tt(0.0) + h) / (h * h)
    } else {
        (tt(d + h) - 2.0 * tt(d) + tt(d - h)) / (h * h)
    }
}

/// Kernel mass that a cell `[lo, hi]` sends beyond `edge` (to the right),
/// averaged over the cell.
pub fn cell_mass_right_of(t: f64, lo: f64, hi: f64, edge: f64) -> f64 {
    (second_antiderivative(t, edge - hi) - second_antiderivative(t, edge - lo)) / (hi - lo)
}

/// Kernel mass that a cell `[lo, hi]` sends below `edge` (to the left).
pub fn cell_mass_left_of(t: f64, lo: f64, hi: f64, edge: f64) -> f64 {
    (second_antiderivative(t, lo - edge) - second_antiderivative(t, hi - edge)) / (hi - lo)
}

/// Periodised density `Σ_k p_t(z + kL)` over `|k| <= images`.
pub fn periodic_density(t: f64, period: f64, images: usize, z: f64) -> f64 {
    let z = z.rem_euclid(period);
    let z = if z > 0.5 * period { z - period } else { z };
    let mut s = density(t, z);
    for k in 1..=images {
        let kl = k as f64 * period;
        s += density(t, z + kl) + density(t, z - kl);
    }
    s
}

/// Image count keeping the dropped tail below 1e-14 of the kept sum.
pub fn default_images(t: f64, period: f64) -> usize {
    (6.0 * t.sqrt() * std::f64::consts::LN_10 / period).ceil() as usize + 2
}

/// Largest index offset with `(m h)² / 4t <= CUTOFF_EXPONENT`, plus one.
pub fn reach(t: f64, h: f64) -> usize {
    ((4.0 * CUTOFF_EXPONENT * t).sqrt() / h).floor() as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_values() {
        assert!((density(0.5, 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!((density(2.0, 0.0) - 1.0 / (8.0 * PI).sqrt()).abs() < 1e-16);
        assert!((density(2.0, 0.0) - 0.199_471_140_200_716_35).abs() < 1e-15);
    }

    #[test]
    fn second_antiderivative_derivatives() {
        // finite differences: T' = -upper_mass, T'' = p
        let t = 0.03;
        for &z in &[-0.4, -0.05, 0.0, 0.02, 0.3, 0.9] {
            let e = 1e-5;
            let d1 =
                (second_antiderivative(t, z + e) - second_antiderivative(t, z - e)) / (2.0 * e);
            assert!((d1 + upper_mass(t, z)).abs() < 1e-8, "z = {z}");
            let e = 1e-4;
            let d2 = (second_antiderivative(t, z + e) - 2.0 * second_antiderivative(t, z)
                + second_antiderivative(t, z - e))
                / (e * e);
            assert!(
                (d2 - density(t, z)).abs() < 1e-5 * (1.0 + density(t, z)),
                "z = {z}"
            );
        }
        assert!((second_antiderivative(t, 0.0) - (t / PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn cell_average_matches_quadrature() {
        // composite midpoint over both cells, 400 x 400 nodes
        let (t, h) = (1e-3, 0.02);
        for &d in &[0.0, 0.02, 0.06, 0.14] {
            let n = 400;
            let mut s = 0.0;
            for a in 0..n {
                let x = d + (a as f64 + 0.5) / n as f64 * h;
                for b in 0..n {
                    let y = (b as f64 + 0.5) / n as f64 * h;
                    s += density(t, x - y);
                }
            }
            let quad = s / (n * n) as f64;
            let exact = cell_average(t, h, d);
            assert!(
                (quad - exact).abs() < 1e-4 * exact.max(1e-3),
                "d = {d}: {quad} vs {exact}"
            );
        }
    }

    #[test]
    fn cell_rows_telescope_to_unit_mass() {
        let (t, h) = (1e-3, 1.0 / 256.0);
        let r = reach(t, h) + 2;
        let mut s = cell_average(t, h, 0.0) * h;
        for m in 1..=r {
            s += 2.0 * cell_average(t, h, m as f64 * h) * h;
        }
        assert!((s - 1.0).abs() < 1e-13, "{s}");
    }

    #[test]
    fn periodic_density_is_even_and_periodic() {
        let (t, l) = (0.05, 1.0);
        let k = default_images(t, l);
        for &z in &[0.1, 0.37, 0.5] {
            let a = periodic_density(t, l, k, z);
            assert!((a - periodic_density(t, l, k, -z)).abs() < 1e-15 * a);
            assert!((a - periodic_density(t, l, k, z + 3.0 * l)).abs() < 1e-13 * a);
        }
    }
}
