//! Fixed points, separatrices, action-angle data and the complex-analytic
//! picture (singularities `beta*`, geodesic flow, S-matrix coefficients).

mod analytic;
mod orbit;
mod separatrix;

pub use analytic::{find_beta_star, geodesic_flow, smatrix_coeffs, BetaStar, ComplexRect};
pub use orbit::{
    effective_mass, omega_at_separatrix, orbit_summary, period_log_fit, turning_points, LogFit, OrbitSummary,
};
pub use separatrix::{trace_separatrix, SeparatrixInfo};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::models::ModelSpec;

/// Newton roots closer than this are the same equilibrium.
pub const DEDUP_RADIUS: f64 = 1e-8;
/// `|Re lambda|` below this classifies a fixed point as a center.
pub const CENTER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    OPoint,
    XPoint,
}

/// A classified fixed point of the canonical flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub q: f64,
    pub p: f64,
    pub kind: EquilibriumKind,
    pub eigenvalues: [Complex64; 2],
    pub energy: f64,
    /// Unit eigenvectors `(unstable, stable)` in `(q, p)`, x-points only.
    pub eigenvectors: Option<[[f64; 2]; 2]>,
}

impl Equilibrium {
    /// Positive real eigenvalue of an x-point (the linearization rate).
    pub fn growth_rate(&self) -> Option<f64> {
        match self.kind {
            EquilibriumKind::XPoint => Some(self.eigenvalues[0].re.abs()),
            EquilibriumKind::OPoint => None,
        }
    }
}

/// Axis-aligned box in the `(q, p)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Rect {
    pub fn new(q_min: f64, q_max: f64, p_min: f64, p_max: f64) -> Self {
        Self {
            q_min,
            q_max,
            p_min,
            p_max,
        }
    }

    pub fn contains(&self, q: f64, p: f64, slack: f64) -> bool {
        q >= self.q_min - slack && q <= self.q_max + slack && p >= self.p_min - slack && p <= self.p_max + slack
    }
}

/// Canonical linearization `d(qdot, pdot)/d(q, p)`.
fn linearization(model: &dyn ModelSpec, q: f64, p: f64) -> [[f64; 2]; 2] {
    let h = model.hessian(q, p, 0.0);
    [[h[1][0], h[1][1]], [-h[0][0], -h[0][1]]]
}

fn eigen2(a: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = Complex64::new(0.25 * tr * tr - det, 0.0).sqrt();
    let half = Complex64::new(0.5 * tr, 0.0);
    // larger real part first
    let (l1, l2) = (half + disc, half - disc);
    if l1.re >= l2.re {
        [l1, l2]
    } else {
        [l2, l1]
    }
}

fn real_eigenvector(a: [[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    // rows of (A - lambda I) are orthogonal to the eigenvector; use the better-conditioned one
    let r0 = [a[0][0] - lambda, a[0][1]];
    let r1 = [a[1][0], a[1][1] - lambda];
    let r = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) {
        r0
    } else {
        r1
    };
    let v = [-r[1], r[0]];
    let n = v[0].hypot(v[1]);
    let v = [v[0] / n, v[1] / n];
    // fix orientation: positive q component (or positive p if q component vanishes)
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        [-v[0], -v[1]]
    } else {
        v
    }
}

/// Classifies the fixed point at `(q, p)` via the linearization eigenvalues.
pub fn classify(model: &dyn ModelSpec, q: f64, p: f64) -> Equilibrium {
    let a = linearization(model, q, p);
    let eigenvalues = eigen2(a);
    let is_center = eigenvalues.iter().all(|l| l.re.abs() < CENTER_TOLERANCE);
    let (kind, eigenvectors) = if is_center {
        (EquilibriumKind::OPoint, None)
    } else {
        let unstable = real_eigenvector(a, eigenvalues[0].re);
        let stable = real_eigenvector(a, eigenvalues[1].re);
        (EquilibriumKind::XPoint, Some([unstable, stable]))
    };
    Equilibrium {
        q,
        p,
        kind,
        eigenvalues,
        energy: model.hamiltonian(q, p, 0.0),
        eigenvectors,
    }
}

fn newton_critical_point(model: &dyn ModelSpec, mut q: f64, mut p: f64) -> Option<(f64, f64)> {
    for _ in 0..60 {
        let g = [model.dh_dq(q, p, 0.0), model.dh_dp(q, p, 0.0)];
        if g[0].hypot(g[1]) < 1e-15 {
            break;
        }
        let h = model.hessian(q, p, 0.0);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-300 || !det.is_finite() {
            return None;
        }
        let dq = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dp = (-h[1][0] * g[0] + h[0][0] * g[1]) / det;
        q -= dq;
        p -= dp;
        if !(q.is_finite() && p.is_finite()) {
            return None;
        }
        if dq.hypot(dp) < 1e-15 * (1.0 + q.hypot(p)) {
            break;
        }
    }
    let g = [model.dh_dq(q, p, 0.0), model.dh_dp(q, p, 0.0)];
    (g[0].hypot(g[1]) < 1e-10).then_some((q, p))
}

/// Finds and classifies all fixed points in `bounds` by Newton iteration on
/// `grad H = 0` from a `grid_n x grid_n` lattice of seeds.
pub fn find_equilibria(model: &dyn ModelSpec, bounds: Rect, grid_n: usize) -> Result<Vec<Equilibrium>> {
    if grid_n < 4 {
        return Err(invalid(format!("grid_n must be >= 4, got {grid_n}")));
    }
    if !(bounds.q_max > bounds.q_min && bounds.p_max > bounds.p_min) {
        return Err(invalid("search box is degenerate"));
    }
    let mut roots: Vec<(f64, f64)> = Vec::new();
    for i in 0..grid_n {
        for j in 0..grid_n {
            let q0 = bounds.q_min + (bounds.q_max - bounds.q_min) * i as f64 / (grid_n - 1) as f64;
            let p0 = bounds.p_min + (bounds.p_max - bounds.p_min) * j as f64 / (grid_n - 1) as f64;
            let Some((q, p)) = newton_critical_point(model, q0, p0) else {
                continue;
            };
            if !bounds.contains(q, p, 1e-9) {
                continue;
            }
            if roots.iter().all(|r| (r.0 - q).hypot(r.1 - p) > DEDUP_RADIUS) {
                roots.push((q, p));
            }
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(roots.into_iter().map(|(q, p)| classify(model, q, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DoubleWell, Harmonic, Pendulum};
    use std::f64::consts::PI;

    #[test]
    fn double_well_structure() {
        let eq = find_equilibria(&DoubleWell, Rect::new(-2.0, 2.0, -2.0, 2.0), 9).unwrap();
        assert_eq!(eq.len(), 3);
        let kinds: Vec<_> = eq.iter().map(|e| (e.q, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (-1.0, EquilibriumKind::OPoint),
                (0.0, EquilibriumKind::XPoint),
                (1.0, EquilibriumKind::OPoint)
            ]
        );
        let x = &eq[1];
        assert!((x.eigenvalues[0].re - 1.0).abs() < 1e-8 && (x.eigenvalues[1].re + 1.0).abs() < 1e-8);
        for o in [&eq[0], &eq[2]] {
            assert!((o.eigenvalues[0].im.abs() - 2f64.sqrt()).abs() < 1e-8);
            assert!(o.eigenvalues[0].re.abs() < 1e-12);
        }
        let [u, s] = x.eigenvectors.unwrap();
        // unstable direction of pdot = q: (1, 1)/sqrt2; stable (1, -1)/sqrt2
        assert!((u[0] - u[1]).abs() < 1e-12 && (s[0] + s[1]).abs() < 1e-12);
    }

    #[test]
    fn pendulum_structure() {
        let eq = find_equilibria(&Pendulum, Rect::new(-PI / 2.0, 1.5 * PI, -1.0, 1.0), 12).unwrap();
        assert_eq!(eq.len(), 2);
        assert_eq!(eq[0].kind, EquilibriumKind::OPoint);
        assert!(eq[0].q.abs() < 1e-12);
        assert_eq!(eq[1].kind, EquilibriumKind::XPoint);
        assert!((eq[1].q - PI).abs() < 1e-12);
    }

    #[test]
    fn harmonic_center() {
        let eq = find_equilibria(&Harmonic, Rect::new(-1.0, 1.0, -1.0, 1.0), 5).unwrap();
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].kind, EquilibriumKind::OPoint);
        assert!((eq[0].eigenvalues[0].im.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_search() {
        assert!(find_equilibria(&Harmonic, Rect::new(0.0, 0.0, -1.0, 1.0), 5).is_err());
        assert!(find_equilibria(&Harmonic, Rect::new(-1.0, 1.0, -1.0, 1.0), 3).is_err());
    }

    struct Scaled<M>(M, f64);
    impl<M: ModelSpec> ModelSpec for Scaled<M> {
        fn id(&self) -> &str {
            "scaled"
        }
        fn hamiltonian(&self, q: f64, p: f64, t: f64) -> f64 {
            self.1 * self.0.hamiltonian(q, p, t)
        }
        fn dh_dq(&self, q: f64, p: f64, t: f64) -> f64 {
            self.1 * self.0.dh_dq(q, p, t)
        }
        fn dh_dp(&self, q: f64, p: f64, t: f64) -> f64 {
            self.1 * self.0.dh_dp(q, p, t)
        }
        fn is_separable(&self) -> bool {
            false
        }
    }

    #[test]
    fn scaling_h_preserves_kinds() {
        let base = find_equilibria(&DoubleWell, Rect::new(-2.0, 2.0, -2.0, 2.0), 9).unwrap();
        for c in [0.1, 3.0, 17.0] {
            let scaled = find_equilibria(&Scaled(DoubleWell, c), Rect::new(-2.0, 2.0, -2.0, 2.0), 9).unwrap();
            assert_eq!(scaled.len(), base.len());
            for (a, b) in base.iter().zip(&scaled) {
                assert_eq!(a.kind, b.kind);
                assert!((b.eigenvalues[0] - c * a.eigenvalues[0]).norm() < 1e-6 * c);
            }
        }
    }
}
