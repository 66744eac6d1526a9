use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use num_complex::Complex64;

/// `zeta = i ln R0(z)`, evaluated as `arcsin(2z / pi)` on the principal
/// branch with real arguments outside `[-1, 1]` taken as limits from the
/// upper half-plane. Satisfies `sin(zeta) = 2z / pi`.
pub fn activation(z: Complex64) -> Complex64 {
    let w = z * FRAC_2_PI;
    if w.im == 0.0 {
        let x = w.re;
        if x.abs() <= 1.0 {
            return Complex64::new(x.asin(), 0.0);
        }
        // arcsin(x + i0) = sgn(x) pi/2 + i arccosh|x|
        return Complex64::new(FRAC_PI_2.copysign(x), x.abs().acosh());
    }
    let zeta = w.asin();
    // one Newton step on sin(zeta) - w tightens the identity off the axis
    let c = zeta.cos();
    if c.norm() > 1e-3 {
        let polished = zeta - (zeta.sin() - w) / c;
        if (polished.sin() - w).norm() < (zeta.sin() - w).norm() {
            return polished;
        }
    }
    zeta
}

/// `activation(c z) - activation(z)`, which tends to `i ln c` for large `|z|`.
pub fn amplitude_shift_check(z: Complex64, c: f64) -> Complex64 {
    if c == 1.0 {
        return Complex64::new(0.0, 0.0);
    }
    activation(z * c) - activation(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fixed_values() {
        assert_eq!(activation(c(0.0, 0.0)), c(0.0, 0.0));
        assert!((activation(c(FRAC_PI_2, 0.0)) - c(FRAC_PI_2, 0.0)).norm() < 1e-15);
        let want = c(FRAC_PI_2, (2.0 + 3f64.sqrt()).ln());
        assert!((activation(c(PI, 0.0)) - want).norm() < 1e-12);
        // the negative real axis continues from the upper half-plane too
        let want = c(-FRAC_PI_2, (2.0 + 3f64.sqrt()).ln());
        assert!((activation(c(-PI, 0.0)) - want).norm() < 1e-12);
    }

    #[test]
    fn branch_identity_on_grid() {
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            for j in 0..100 {
                let z = c(-10.0 + 20.0 * i as f64 / 99.0, -10.0 + 20.0 * j as f64 / 99.0);
                let back = activation(z).sin() * FRAC_PI_2;
                worst = worst.max((back - z).norm());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn continuous_from_above_on_the_real_axis() {
        for x in [-7.0, -2.0, -1.0, 0.3, 1.2, 2.0, 9.0] {
            let on = activation(c(x, 0.0));
            let above = activation(c(x, 1e-9));
            assert!((on - above).norm() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn odd_inside_the_window() {
        for k in 0..50 {
            let x = -1.5 + 3.0 * k as f64 / 49.0;
            assert!((activation(c(-x, 0.0)) + activation(c(x, 0.0))).norm() < 1e-12);
        }
    }

    #[test]
    fn log_shift_at_large_amplitude() {
        let d = amplitude_shift_check(c(1000.0, 0.0), 10.0);
        assert!((d - c(0.0, 10f64.ln())).norm() < 1e-4);
        assert_eq!(amplitude_shift_check(c(3.0, 2.0), 1.0), c(0.0, 0.0));
        let small = amplitude_shift_check(c(0.1, 0.0), 2.0);
        assert_eq!(small.im, 0.0);
        assert!((small.re - (activation(c(0.2, 0.0)) - activation(c(0.1, 0.0))).re).abs() < 1e-15);
    }
}
