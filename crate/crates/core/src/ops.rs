//! Impedance-weighted integral and derivative operators.
//!
//! For an impedance a these are J_a v = ∫_{x₀}^x v/a² dt and D_a u = a²u′,
//! plus their reciprocal-impedance twins (a ↦ 1/a swaps the weights). The
//! compositions R_a = J_a J_{1/a} and L_a = D_{1/a} D_a give the resolvent
//! kernel of the line and the Sturm-Liouville operator itself:
//! L_a u = (a²u′)′/a².

use crate::grid::SampledFunction;
use crate::impedance::Impedance;
use crate::quadrature::cumulative_integral;
use crate::scalar::Scalar;
use crate::stencil::derivative;

/// Which member of the impedance pair {a, 1/a} an operator is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Operators J_a, D_a.
    Direct,
    /// Operators J_{1/a}, D_{1/a}.
    Reciprocal,
}

impl Side {
    pub fn flipped(self) -> Side {
        match self {
            Side::Direct => Side::Reciprocal,
            Side::Reciprocal => Side::Direct,
        }
    }
}

/// J v = ∫_{x₀}^x v·a^{∓2} dt, anchored at the grid anchor x₀.
pub fn op_j<T: Scalar>(v: &SampledFunction<T>, a: &Impedance, side: Side) -> SampledFunction<T> {
    let grid = v.grid();
    let weight: Vec<f64> = match side {
        Side::Direct => grid.nodes().iter().map(|&x| a.eval_inv_sq(x)).collect(),
        Side::Reciprocal => grid.nodes().iter().map(|&x| a.eval_sq(x)).collect(),
    };
    let integrand = SampledFunction::new(
        std::sync::Arc::clone(grid),
        v.values()
            .iter()
            .zip(&weight)
            .map(|(&vi, &wi)| vi.scale(wi))
            .collect(),
    )
    .expect("values match grid length");
    cumulative_integral(&integrand)
}

/// D u = a^{±2}·u′, with u′ from the grid stencil.
pub fn op_d<T: Scalar>(u: &SampledFunction<T>, a: &Impedance, side: Side) -> SampledFunction<T> {
    let du = derivative(u);
    let grid = u.grid();
    let weight: Vec<f64> = match side {
        Side::Direct => grid.nodes().iter().map(|&x| a.eval_sq(x)).collect(),
        Side::Reciprocal => grid.nodes().iter().map(|&x| a.eval_inv_sq(x)).collect(),
    };
    SampledFunction::new(
        std::sync::Arc::clone(grid),
        du.values()
            .iter()
            .zip(&weight)
            .map(|(&di, &wi)| di.scale(wi))
            .collect(),
    )
    .expect("values match grid length")
}

/// R_a v = J_a J_{1/a} v, the right inverse of L_a with R_a v(x₀) = 0 and
/// D_a R_a v(x₀) = 0.
pub fn op_r<T: Scalar>(v: &SampledFunction<T>, a: &Impedance) -> SampledFunction<T> {
    op_j(&op_j(v, a, Side::Reciprocal), a, Side::Direct)
}

/// L_a u = D_{1/a} D_a u = (a²u′)′/a².
pub fn op_l<T: Scalar>(u: &SampledFunction<T>, a: &Impedance) -> SampledFunction<T> {
    op_d(&op_d(u, a, Side::Direct), a, Side::Reciprocal)
}

/// a-Wronskian W_a[u, v] = u·D_a v − v·D_a u; constant in x when u and v solve
/// the same equation −(a²w′)′ = λa²w.
pub fn wronskian<T: Scalar>(
    u: &SampledFunction<T>,
    v: &SampledFunction<T>,
    a: &Impedance,
) -> SampledFunction<T> {
    let du = op_d(u, a, Side::Direct);
    let dv = op_d(v, a, Side::Direct);
    u.mul(&dv).sub(&v.mul(&du))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::quadrature::integrate;

    fn grid01() -> std::sync::Arc<Grid> {
        Grid::uniform(0.0, 1.0, 2001, 0.0).unwrap()
    }

    #[test]
    fn op_j_direct_matches_affine_antiderivative() {
        // J_a[1](x) = ∫₀^x (1+t)⁻² dt = x/(1+x) for a = 1+x.
        let g = grid01();
        let one = SampledFunction::constant(&g, 1.0);
        let j = op_j(&one, &Impedance::affine(), Side::Direct);
        let exact = SampledFunction::from_fn(&g, |x| x / (1.0 + x));
        assert!(j.sup_distance(&exact) < 1e-13);
    }

    #[test]
    fn op_j_reciprocal_matches_affine_antiderivative() {
        // J_{1/a}[1](x) = ∫₀^x (1+t)² dt, value 7/3 at x = 1.
        let g = grid01();
        let one = SampledFunction::constant(&g, 1.0);
        let j = op_j(&one, &Impedance::affine(), Side::Reciprocal);
        assert!((j.values()[g.len() - 1] - 7.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn op_r_affine_value() {
        // R_a[1](x) = ∫₀^x (1+t)⁻² ((1+t)³−1)/3 dt; at x = 1 this is
        // ∫₀¹ [(1+t) − (1+t)⁻²]/3 dt = (3/2 − 1/2)/3 = 1/3.
        let g = grid01();
        let one = SampledFunction::constant(&g, 1.0);
        let r = op_r(&one, &Impedance::affine());
        assert!((r.values()[g.len() - 1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn op_l_is_left_inverse_of_op_r() {
        let g = grid01();
        let a = Impedance::exp(0.5);
        let v = SampledFunction::from_fn(&g, |x| (2.0 * x).cos());
        let lr = op_l(&op_r(&v, &a), &a);
        assert!(lr.sup_distance(&v) < 1e-7, "got {}", lr.sup_distance(&v));
    }

    #[test]
    fn factorization_matches_strong_form() {
        // L_a u = u″ + 2(a′/a)u′ for smooth a; check on a = e^{x}, u = sin x.
        let g = grid01();
        let a = Impedance::exp(1.0);
        let u = SampledFunction::from_fn(&g, |x| x.sin());
        let lhs = op_l(&u, &a);
        let exact = SampledFunction::from_fn(&g, |x| -x.sin() + 2.0 * x.cos());
        assert!(lhs.sup_distance(&exact) < 1e-7, "got {}", lhs.sup_distance(&exact));
    }

    #[test]
    fn wronskian_of_unit_solutions_is_constant_one() {
        let g = Grid::uniform(0.0, std::f64::consts::PI, 2001, 0.0).unwrap();
        let rho = 3.0;
        let c = SampledFunction::from_fn(&g, |x| (rho * x).cos());
        let s = SampledFunction::from_fn(&g, |x| (rho * x).sin() / rho);
        let w = wronskian(&c, &s, &Impedance::unit());
        let one = SampledFunction::constant(&g, 1.0);
        assert!(w.sup_distance(&one) < 1e-9);
    }

    #[test]
    fn quadrature_and_ops_are_linear() {
        let g = grid01();
        let a = Impedance::affine();
        let u = SampledFunction::from_fn(&g, |x| x * x);
        let v = SampledFunction::from_fn(&g, |x| (3.0 * x).sin());
        let lin = op_j(&u.add(&v.scaled(2.0)), &a, Side::Direct);
        let sep = op_j(&u, &a, Side::Direct).add(&op_j(&v, &a, Side::Direct).scaled(2.0));
        assert!(lin.sup_distance(&sep) < 1e-14);
        let iu = integrate(&u);
        assert!((iu - 1.0 / 3.0).abs() < 1e-12);
    }
}
