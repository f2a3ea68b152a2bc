//! Formal powers: the polynomial-like basis generated by an impedance.
//!
//! The families interleave under the weighted antiderivatives,
//! φ_a^(k) = k·J_a[φ_{1/a}^(k−1)] and φ_{1/a}^(k) = k·J_{1/a}[φ_a^(k−1)],
//! starting from φ^(0) ≡ 1. For a ≡ 1 both families collapse to the monomials
//! (x − x₀)^k. The table also powers generalized Taylor expansions: m-fold
//! weighted derivatives and integrals satisfy
//! u = J_a^(m)[D_a^(m)u] + Σ_{k<m} D_a^(k)u(x₀)/k!·φ_a^(k).

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::impedance::{validate_proper, Impedance};
use crate::ops::{op_d, op_j, Side};
use crate::quadrature::{cumulative_integral, integrate, weighted_lp_norm};
use crate::scalar::Scalar;
use std::io::Write;
use std::sync::Arc;

/// Formal powers φ_a^(k) and φ_{1/a}^(k), k = 0..=K, on a shared grid.
///
/// Alongside each φ the table carries its monomial deviation
/// δ^(k) = φ^(k) − (x−x₀)^k, built by its own recursion
/// δ_a^(k) = k·(J_a[δ_{1/a}^(k−1)] + ∫(x−x₀)^{k−1}(a^{−2}−1)) so the
/// difference is formed additively, never by subtracting two large values.
/// Series evaluations sum the δ family on top of a closed unit-impedance
/// part, which keeps them well conditioned when ρ·|x−x₀| is large and the
/// raw φ terms would cancel catastrophically.
#[derive(Debug, Clone)]
pub struct FormalPowerTable {
    a: Impedance,
    grid: Arc<Grid>,
    phi_direct: Vec<SampledFunction<f64>>,
    phi_recip: Vec<SampledFunction<f64>>,
    delta_direct: Vec<SampledFunction<f64>>,
    delta_recip: Vec<SampledFunction<f64>>,
}

/// Builds the φ table up to order `k_max`, anchored at the grid anchor.
pub fn build_formal_powers(
    a: &Impedance,
    grid: &Arc<Grid>,
    k_max: usize,
) -> Result<FormalPowerTable> {
    validate_proper(a, grid)?;
    let one = SampledFunction::constant(grid, 1.0);
    let zero = SampledFunction::constant(grid, 0.0);
    let x0 = grid.anchor();
    let inv_sq_minus = SampledFunction::from_fn(grid, |x| a.eval_inv_sq(x) - 1.0);
    let sq_minus = SampledFunction::from_fn(grid, |x| a.eval_sq(x) - 1.0);
    let centered = SampledFunction::from_fn(grid, |x| x - x0);
    let mut monomial = one.clone();
    let mut phi_direct = vec![one.clone()];
    let mut phi_recip = vec![one];
    let mut delta_direct = vec![zero.clone()];
    let mut delta_recip = vec![zero];
    for k in 1..=k_max {
        let kf = k as f64;
        let next_direct = op_j(&phi_recip[k - 1], a, Side::Direct).scaled(kf);
        let next_recip = op_j(&phi_direct[k - 1], a, Side::Reciprocal).scaled(kf);
        phi_direct.push(next_direct);
        phi_recip.push(next_recip);
        let drive_direct = cumulative_integral(&monomial.mul(&inv_sq_minus));
        let drive_recip = cumulative_integral(&monomial.mul(&sq_minus));
        let next_delta_direct =
            op_j(&delta_recip[k - 1], a, Side::Direct).add(&drive_direct).scaled(kf);
        let next_delta_recip =
            op_j(&delta_direct[k - 1], a, Side::Reciprocal).add(&drive_recip).scaled(kf);
        delta_direct.push(next_delta_direct);
        delta_recip.push(next_delta_recip);
        monomial = monomial.mul(&centered);
    }
    Ok(FormalPowerTable {
        a: a.clone(),
        grid: Arc::clone(grid),
        phi_direct,
        phi_recip,
        delta_direct,
        delta_recip,
    })
}

impl FormalPowerTable {
    pub fn impedance(&self) -> &Impedance {
        &self.a
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Anchor x₀ of the table.
    pub fn anchor(&self) -> f64 {
        self.grid.anchor()
    }

    /// Highest available order K.
    pub fn order(&self) -> usize {
        self.phi_direct.len() - 1
    }

    /// φ_a^(k).
    pub fn phi(&self, k: usize) -> &SampledFunction<f64> {
        &self.phi_direct[k]
    }

    /// φ_{1/a}^(k).
    pub fn phi_recip(&self, k: usize) -> &SampledFunction<f64> {
        &self.phi_recip[k]
    }

    /// φ of the requested family.
    pub fn phi_side(&self, k: usize, side: Side) -> &SampledFunction<f64> {
        match side {
            Side::Direct => &self.phi_direct[k],
            Side::Reciprocal => &self.phi_recip[k],
        }
    }

    /// Monomial deviation δ_a^(k) = φ_a^(k) − (x−x₀)^k.
    pub fn delta(&self, k: usize) -> &SampledFunction<f64> {
        &self.delta_direct[k]
    }

    /// δ_{1/a}^(k) = φ_{1/a}^(k) − (x−x₀)^k.
    pub fn delta_recip(&self, k: usize) -> &SampledFunction<f64> {
        &self.delta_recip[k]
    }

    /// The same table seen from the reciprocal impedance (families swapped).
    pub fn swapped(&self) -> FormalPowerTable {
        FormalPowerTable {
            a: self.a.reciprocal(),
            grid: Arc::clone(&self.grid),
            phi_direct: self.phi_recip.clone(),
            phi_recip: self.phi_direct.clone(),
            delta_direct: self.delta_recip.clone(),
            delta_recip: self.delta_direct.clone(),
        }
    }

    /// Writes the table as CSV: x, phi_a_0..K, phi_recip_0..K.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "x")?;
        for k in 0..=self.order() {
            write!(out, ",phi_a_{k}")?;
        }
        for k in 0..=self.order() {
            write!(out, ",phi_recip_{k}")?;
        }
        writeln!(out)?;
        for (i, &x) in self.grid.nodes().iter().enumerate() {
            write!(out, "{x:.17e}")?;
            for k in 0..=self.order() {
                write!(out, ",{:.17e}", self.phi_direct[k].values()[i])?;
            }
            for k in 0..=self.order() {
                write!(out, ",{:.17e}", self.phi_recip[k].values()[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// m-fold weighted derivative D_a^(m)u: alternate D_a, D_{1/a}, D_a, …
pub fn generalized_derivative<T: Scalar>(
    u: &SampledFunction<T>,
    m: usize,
    a: &Impedance,
) -> SampledFunction<T> {
    let mut w = u.clone();
    for j in 1..=m {
        let side = if j % 2 == 1 { Side::Direct } else { Side::Reciprocal };
        w = op_d(&w, a, side);
    }
    w
}

/// m-fold weighted integral J_a^(m)v: m factors, outermost J_a, alternating.
pub fn generalized_integral<T: Scalar>(
    v: &SampledFunction<T>,
    m: usize,
    a: &Impedance,
) -> SampledFunction<T> {
    let mut w = v.clone();
    for i in (1..=m).rev() {
        let side = if i % 2 == 1 { Side::Direct } else { Side::Reciprocal };
        w = op_j(&w, a, side);
    }
    w
}

/// Generalized Taylor coefficients c_k = D_a^(k)u(x₀)/k! for k < m, and the
/// remainder u − Σ c_k φ_a^(k), which equals J_a^(m)[D_a^(m)u].
pub fn taylor_expand<T: Scalar>(
    u: &SampledFunction<T>,
    m: usize,
    table: &FormalPowerTable,
) -> Result<(Vec<T>, SampledFunction<T>)> {
    if m == 0 {
        return Err(Error::Config("taylor expansion order m must be at least 1".into()));
    }
    if m - 1 > table.order() {
        return Err(Error::Config(format!(
            "taylor expansion to order {m} needs a table of order >= {}, got {}",
            m - 1,
            table.order()
        )));
    }
    let mut coeffs = Vec::with_capacity(m);
    let mut w = u.clone();
    let mut factorial = 1.0;
    for k in 0..m {
        if k > 0 {
            factorial *= k as f64;
            let side = if k % 2 == 1 { Side::Direct } else { Side::Reciprocal };
            w = op_d(&w, table.impedance(), side);
        }
        coeffs.push(w.at_anchor().scale(1.0 / factorial));
    }
    let mut remainder = u.clone();
    for (k, &c) in coeffs.iter().enumerate() {
        let phi = table.phi(k);
        for (r, &p) in remainder.values_mut().iter_mut().zip(phi.values()) {
            *r -= c.scale(p);
        }
    }
    Ok((coeffs, remainder))
}

/// A finite expansion Σ_k α_k φ^(k) in one formal-power family.
#[derive(Debug, Clone)]
pub struct FormalPolynomial<T: Scalar = f64> {
    pub coefficients: Vec<T>,
    pub side: Side,
}

impl<T: Scalar> FormalPolynomial<T> {
    pub fn new(coefficients: Vec<T>, side: Side) -> Self {
        FormalPolynomial { coefficients, side }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Evaluate on the table's grid.
    pub fn eval(&self, table: &FormalPowerTable) -> Result<SampledFunction<T>> {
        if self.degree() > table.order() {
            return Err(Error::Config(format!(
                "polynomial degree {} exceeds table order {}",
                self.degree(),
                table.order()
            )));
        }
        let mut out = SampledFunction::constant(table.grid(), T::ZERO);
        for (k, &c) in self.coefficients.iter().enumerate() {
            let phi = table.phi_side(k, self.side);
            for (o, &p) in out.values_mut().iter_mut().zip(phi.values()) {
                *o += c.scale(p);
            }
        }
        Ok(out)
    }
}

/// Deviation data for a sequence of perturbed impedances against a base one.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    /// ‖aₙ² − a²‖ in L¹ per perturbation.
    pub l1_sq_dev: Vec<f64>,
    /// ‖aₙ⁻² − a⁻²‖ in L¹ per perturbation.
    pub l1_inv_sq_dev: Vec<f64>,
    /// sup_x |φ_{aₙ}^(k) − φ_a^(k)| per perturbation, per order k.
    pub phi_sup_dev: Vec<Vec<f64>>,
    /// Same for the reciprocal family.
    pub phi_recip_sup_dev: Vec<Vec<f64>>,
}

impl PerturbationReport {
    /// Largest φ deviation (either family) per perturbation.
    pub fn max_phi_dev(&self) -> Vec<f64> {
        self.phi_sup_dev
            .iter()
            .zip(&self.phi_recip_sup_dev)
            .map(|(d, r)| {
                d.iter()
                    .chain(r)
                    .copied()
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Builds φ tables for each perturbed impedance and reports their deviation
/// from the base table, alongside the L¹ deviations of the squared
/// coefficients that control them.
pub fn perturbation_convergence_check(
    a: &Impedance,
    perturbed: &[Impedance],
    k_max: usize,
    grid: &Arc<Grid>,
) -> Result<PerturbationReport> {
    let base = build_formal_powers(a, grid, k_max)?;
    let mut report = PerturbationReport {
        l1_sq_dev: Vec::new(),
        l1_inv_sq_dev: Vec::new(),
        phi_sup_dev: Vec::new(),
        phi_recip_sup_dev: Vec::new(),
    };
    for an in perturbed {
        let tn = build_formal_powers(an, grid, k_max)?;
        let dev_sq = an.sample_sq(grid).sub(&a.sample_sq(grid));
        let dev_inv = an.sample_inv_sq(grid).sub(&a.sample_inv_sq(grid));
        report.l1_sq_dev.push(integrate(&dev_sq.map(f64::abs)));
        report.l1_inv_sq_dev.push(integrate(&dev_inv.map(f64::abs)));
        report.phi_sup_dev.push(
            (0..=k_max).map(|k| tn.phi(k).sup_distance(base.phi(k))).collect(),
        );
        report.phi_recip_sup_dev.push(
            (0..=k_max).map(|k| tn.phi_recip(k).sup_distance(base.phi_recip(k))).collect(),
        );
    }
    Ok(report)
}

/// L²_a distance ‖u − v‖ with weight a².
pub fn l2a_distance(u: &SampledFunction<f64>, v: &SampledFunction<f64>, a: &Impedance) -> f64 {
    let w = a.sample_sq(u.grid());
    weighted_lp_norm(&u.sub(v), &w, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_table() -> FormalPowerTable {
        let g = Grid::uniform(0.0, 1.0, 2001, 0.0).unwrap();
        build_formal_powers(&Impedance::affine(), &g, 12).unwrap()
    }

    #[test]
    fn unit_impedance_gives_monomials() {
        let g = Grid::uniform(-1.0, 1.0, 2001, 0.0).unwrap();
        let t = build_formal_powers(&Impedance::unit(), &g, 10).unwrap();
        for k in 0..=10 {
            let exact = SampledFunction::from_fn(&g, |x| x.powi(k as i32));
            assert!(
                t.phi(k).sup_distance(&exact) < 1e-12,
                "phi^({k}) deviates by {}",
                t.phi(k).sup_distance(&exact)
            );
        }
    }

    #[test]
    fn unit_impedance_deltas_are_exactly_zero() {
        let g = Grid::uniform(-1.0, 1.0, 801, 0.0).unwrap();
        let t = build_formal_powers(&Impedance::unit(), &g, 10).unwrap();
        for k in 0..=10 {
            assert_eq!(t.delta(k).sup_norm(), 0.0, "delta^({k}) not identically zero");
            assert_eq!(t.delta_recip(k).sup_norm(), 0.0);
        }
    }

    #[test]
    fn deltas_reconstruct_the_formal_powers() {
        let g = Grid::uniform(-0.8, 0.8, 1601, 0.0).unwrap();
        for a in [Impedance::affine(), Impedance::exp(0.7)] {
            let t = build_formal_powers(&a, &g, 12).unwrap();
            for k in 0..=12 {
                let rebuilt = SampledFunction::from_fn(&g, |x| x.powi(k as i32))
                    .add(t.delta(k));
                let dist = t.phi(k).sup_distance(&rebuilt);
                assert!(dist < 1e-11, "a={} k={k} dist={dist:.3e}", a.id());
                let rebuilt_r = SampledFunction::from_fn(&g, |x| x.powi(k as i32))
                    .add(t.delta_recip(k));
                assert!(t.phi_recip(k).sup_distance(&rebuilt_r) < 1e-11);
            }
        }
    }

    #[test]
    fn affine_low_orders_match_closed_forms() {
        let t = affine_table();
        let g = t.grid();
        let phi1 = SampledFunction::from_fn(g, |x| x / (1.0 + x));
        let phi2 = SampledFunction::from_fn(g, |x| x * x * (x + 3.0) / (3.0 * (1.0 + x)));
        let psi1 = SampledFunction::from_fn(g, |x| x + x * x + x * x * x / 3.0);
        let psi2 = SampledFunction::from_fn(g, |x| x * x + 2.0 * x * x * x / 3.0);
        assert!(t.phi(1).sup_distance(&phi1) < 1e-13);
        assert!(t.phi(2).sup_distance(&phi2) < 1e-13);
        assert!(t.phi_recip(1).sup_distance(&psi1) < 1e-13);
        assert!(t.phi_recip(2).sup_distance(&psi2) < 1e-13);
        assert!((t.phi_recip(1).values()[g.len() - 1] - 7.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn exp_first_power() {
        let g = Grid::uniform(0.0, 1.0, 2001, 0.0).unwrap();
        let c = 0.8;
        let t = build_formal_powers(&Impedance::exp(c), &g, 3).unwrap();
        let exact = SampledFunction::from_fn(&g, |x| (1.0 - (-2.0 * c * x).exp()) / (2.0 * c));
        assert!(t.phi(1).sup_distance(&exact) < 1e-13);
    }

    #[test]
    fn derivative_relation_links_the_families() {
        // D_a φ_a^(k) = k φ_{1/a}^(k−1).
        let t = affine_table();
        for k in 1..=10 {
            let lhs = op_d(t.phi(k), t.impedance(), Side::Direct);
            let rhs = t.phi_recip(k - 1).scaled(k as f64);
            assert!(
                lhs.sup_distance(&rhs) < 1e-8,
                "k = {k}: {}",
                lhs.sup_distance(&rhs)
            );
        }
    }

    #[test]
    fn generalized_derivative_shifts_orders() {
        // D_a^(m) φ_a^(n) = n(n−1)…(n−m+1) φ^(n−m) in the family of a^(±1).
        let t = affine_table();
        // Each extra derivative amplifies the one-sided edge error by ~1/h,
        // so the tolerance grows with m.
        for (n, m, tol) in [(4usize, 2usize, 1e-6), (5, 3, 2e-4), (6, 2, 1e-6)] {
            let lhs = generalized_derivative(t.phi(n), m, t.impedance());
            let fall: f64 = (n - m + 1..=n).map(|j| j as f64).product();
            let side = if m % 2 == 1 { Side::Reciprocal } else { Side::Direct };
            let rhs = t.phi_side(n - m, side).scaled(fall);
            assert!(
                lhs.sup_distance(&rhs) < tol,
                "n={n} m={m}: {}",
                lhs.sup_distance(&rhs)
            );
        }
    }

    #[test]
    fn generalized_integral_of_one_gives_scaled_powers() {
        // J_a^(m)[1] = φ_a^(m)/m!
        let t = affine_table();
        let one = SampledFunction::constant(t.grid(), 1.0);
        for m in 1..=4 {
            let lhs = generalized_integral(&one, m, t.impedance());
            let mf: f64 = (1..=m).map(|j| j as f64).product();
            let rhs = t.phi(m).scaled(1.0 / mf);
            assert!(lhs.sup_distance(&rhs) < 1e-12, "m={m}: {}", lhs.sup_distance(&rhs));
        }
    }

    #[test]
    fn taylor_remainder_identity() {
        let t = affine_table();
        let u = SampledFunction::from_fn(t.grid(), |x| x * x * x + 2.0 * x * x);
        let m = 3;
        let (coeffs, remainder) = taylor_expand(&u, m, &t).unwrap();
        assert_eq!(coeffs.len(), 3);
        assert!((coeffs[0] - 0.0).abs() < 1e-13);
        let via_integral =
            generalized_integral(&generalized_derivative(&u, m, t.impedance()), m, t.impedance());
        assert!(
            remainder.sup_distance(&via_integral) < 1e-8,
            "identity residual {}",
            remainder.sup_distance(&via_integral)
        );
    }

    #[test]
    fn formal_polynomial_evaluates() {
        let t = affine_table();
        let p = FormalPolynomial::new(vec![1.0, 0.0, 3.0], Side::Direct);
        let direct = p.eval(&t).unwrap();
        let manual = t.phi(0).add(&t.phi(2).scaled(3.0));
        assert!(direct.sup_distance(&manual) < 1e-15);
        let too_big = FormalPolynomial::new(vec![0.0; 20], Side::Direct);
        assert!(too_big.eval(&t).is_err());
    }

    #[test]
    fn perturbed_tables_converge_with_the_impedance() {
        let g = Grid::uniform(0.0, 1.0, 1001, 0.0).unwrap();
        let a = Impedance::affine();
        let perturbed: Vec<Impedance> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&n| {
                let xs: Vec<f64> = g.nodes().to_vec();
                let ys: Vec<f64> = xs.iter().map(|&x| 1.0 + x + 1.0 / n).collect();
                Impedance::from_samples(xs, ys).unwrap()
            })
            .collect();
        let report = perturbation_convergence_check(&a, &perturbed, 6, &g).unwrap();
        let dev = report.max_phi_dev();
        assert!(dev[0] > dev[1] && dev[1] > dev[2], "not monotone: {dev:?}");
        assert!(report.l1_sq_dev[0] > report.l1_sq_dev[2]);
    }
}
