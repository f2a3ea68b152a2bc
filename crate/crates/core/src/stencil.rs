//! Finite-difference stencils on sampled functions.
//!
//! Uniform grids use 5-point interior stencils with matching-order one-sided
//! stencils at the edges (4th order throughout); nonuniform grids fall back to
//! quadratic (3-point) stencils.

use crate::grid::SampledFunction;
use crate::scalar::Scalar;
use std::sync::Arc;

/// First derivative, 4th order on uniform grids.
pub fn derivative<T: Scalar>(f: &SampledFunction<T>) -> SampledFunction<T> {
    let v = f.values();
    let n = v.len();
    let grid = f.grid();
    let mut out = vec![T::ZERO; n];
    match grid.uniform_spacing() {
        Some(h) if n >= 5 => {
            let s = 1.0 / (12.0 * h);
            out[0] = (v[0].scale(-25.0) + v[1].scale(48.0) - v[2].scale(36.0)
                + v[3].scale(16.0)
                - v[4].scale(3.0))
            .scale(s);
            out[1] = (v[0].scale(-3.0) - v[1].scale(10.0) + v[2].scale(18.0) - v[3].scale(6.0)
                + v[4])
            .scale(s);
            for i in 2..n - 2 {
                out[i] = (v[i - 2] - v[i - 1].scale(8.0) + v[i + 1].scale(8.0) - v[i + 2]).scale(s);
            }
            out[n - 2] = (v[n - 1].scale(3.0) + v[n - 2].scale(10.0) - v[n - 3].scale(18.0)
                + v[n - 4].scale(6.0)
                - v[n - 5])
            .scale(s);
            out[n - 1] = (v[n - 1].scale(25.0) - v[n - 2].scale(48.0) + v[n - 3].scale(36.0)
                - v[n - 4].scale(16.0)
                + v[n - 5].scale(3.0))
            .scale(s);
        }
        _ => {
            let x = grid.nodes();
            out[0] = three_point_derivative(&x[0..3], &v[0..3], x[0]);
            for i in 1..n - 1 {
                out[i] = three_point_derivative(&x[i - 1..i + 2], &v[i - 1..i + 2], x[i]);
            }
            out[n - 1] = three_point_derivative(&x[n - 3..n], &v[n - 3..n], x[n - 1]);
        }
    }
    SampledFunction::new(Arc::clone(grid), out).expect("values match grid length")
}

/// Second derivative, 4th order on uniform grids (6-point one-sided edges).
pub fn second_derivative<T: Scalar>(f: &SampledFunction<T>) -> SampledFunction<T> {
    let v = f.values();
    let n = v.len();
    let grid = f.grid();
    let mut out = vec![T::ZERO; n];
    match grid.uniform_spacing() {
        Some(h) if n >= 6 => {
            let s = 1.0 / (12.0 * h * h);
            let edge = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
            let near = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
            out[0] = weighted(&v[0..6], &edge).scale(s);
            out[1] = weighted(&v[0..6], &near).scale(s);
            for i in 2..n - 2 {
                out[i] = (-v[i - 2] + v[i - 1].scale(16.0) - v[i].scale(30.0)
                    + v[i + 1].scale(16.0)
                    - v[i + 2])
                .scale(s);
            }
            let mut tail: Vec<T> = v[n - 6..n].to_vec();
            tail.reverse();
            out[n - 2] = weighted(&tail, &near).scale(s);
            out[n - 1] = weighted(&tail, &edge).scale(s);
        }
        _ => {
            let x = grid.nodes();
            for (i, o) in out.iter_mut().enumerate() {
                let lo = i.clamp(1, n - 2);
                *o = three_point_second(&x[lo - 1..lo + 2], &v[lo - 1..lo + 2]);
            }
        }
    }
    SampledFunction::new(Arc::clone(grid), out).expect("values match grid length")
}

fn weighted<T: Scalar>(v: &[T], w: &[f64]) -> T {
    v.iter()
        .zip(w)
        .fold(T::ZERO, |acc, (&vi, &wi)| acc + vi.scale(wi))
}

/// Derivative at `x` of the quadratic through (x₀..x₂, v₀..v₂).
fn three_point_derivative<T: Scalar>(x: &[f64], v: &[T], at: f64) -> T {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let d0 = (2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let d1 = (2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2));
    let d2 = (2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
    v[0].scale(d0) + v[1].scale(d1) + v[2].scale(d2)
}

/// Constant second derivative of the quadratic through three points.
fn three_point_second<T: Scalar>(x: &[f64], v: &[T]) -> T {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let d0 = 2.0 / ((x0 - x1) * (x0 - x2));
    let d1 = 2.0 / ((x1 - x0) * (x1 - x2));
    let d2 = 2.0 / ((x2 - x0) * (x2 - x1));
    v[0].scale(d0) + v[1].scale(d1) + v[2].scale(d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn derivative_is_exact_on_quartics() {
        let g = Grid::uniform(-1.0, 1.0, 41, 0.0).unwrap();
        let f = SampledFunction::from_fn(&g, |x| x.powi(4) - 2.0 * x.powi(3) + x);
        let d = derivative(&f);
        let exact = SampledFunction::from_fn(&g, |x| 4.0 * x.powi(3) - 6.0 * x * x + 1.0);
        assert!(d.sup_distance(&exact) < 1e-12);
    }

    #[test]
    fn derivative_handles_high_degree_to_sixth_order_need() {
        let g = Grid::uniform(-1.0, 1.0, 2001, 0.0).unwrap();
        let f = SampledFunction::from_fn(&g, |x| x.powi(10));
        let d = derivative(&f);
        let exact = SampledFunction::from_fn(&g, |x| 10.0 * x.powi(9));
        // One-sided edge stencils carry the largest constant: ~6e-9 here.
        assert!(d.sup_distance(&exact) < 2e-8, "got {}", d.sup_distance(&exact));
    }

    #[test]
    fn second_derivative_fourth_order() {
        let err_for = |n: usize| {
            let g = Grid::uniform(0.0, 1.0, n, 0.0).unwrap();
            let f = SampledFunction::from_fn(&g, |x| (3.0 * x).sin());
            let d2 = second_derivative(&f);
            let exact = SampledFunction::from_fn(&g, |x| -9.0 * (3.0 * x).sin());
            d2.sup_distance(&exact)
        };
        let (e1, e2) = (err_for(101), err_for(201));
        assert!(e1 / e2 > 12.0, "expected ~16x error drop, got {}", e1 / e2);
    }

    #[test]
    fn nonuniform_falls_back_to_quadratic_stencils() {
        let g = Grid::from_nodes(vec![0.0, 0.1, 0.3, 0.6, 1.0], 0).unwrap();
        let f = SampledFunction::from_fn(&g, |x| x * x);
        let d = derivative(&f);
        let exact = SampledFunction::from_fn(&g, |x| 2.0 * x);
        assert!(d.sup_distance(&exact) < 1e-12);
        let d2 = second_derivative(&f);
        assert!(d2.values().iter().all(|&v| (v - 2.0).abs() < 1e-10));
    }
}
