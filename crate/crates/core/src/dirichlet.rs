//! Dirichlet spectral problems on (ℓ₁, ℓ₂): −(a²u′)′ = λa²u with
//! u(ℓ₁) = u(ℓ₂) = 0.
//!
//! Eigenvalues are the roots of the characteristic function
//! Λ(λ) = S_a(√λ, ℓ₂) = Σ (−1)^k λ^k φ_a^(2k+1)(ℓ₂)/(2k+1)!, a series in λ
//! that is explicitly even in ρ. It is summed in split form,
//! sin(√λ·d)/√λ plus the λ-series of the monomial deviations δ^(2k+1), so
//! the terms stay small where the raw φ series would cancel. Eigenfunctions
//! are the same split series over the grid, normalized in L²_a. The module
//! also provides the eigenfunction expansion and the Dirichlet right-inverse
//! (Poisson solve).

use crate::error::{Error, Result};
use crate::formal::FormalPowerTable;
use crate::grid::SampledFunction;
use crate::impedance::Impedance;
use crate::ops::{op_j, op_l, op_r, Side};
use crate::quadrature::{inner_product, weighted_lp_norm};
use crate::scalar::Scalar;
use crate::C64;

/// Relative tail threshold for the λ-series.
const TAIL_TOL: f64 = 1e-15;

/// One Dirichlet eigenpair: index n ≥ 1, eigenvalue λ_n, and the
/// eigenfunction normalized to ‖φ_n‖_{L²_a} = 1 with D_a φ_n(ℓ₁) > 0.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub index: usize,
    pub lambda: f64,
    pub eigenfunction: SampledFunction<f64>,
}

/// Formal-power order needed to evaluate the λ-series up to `lambda_max` on
/// an interval of the given diameter: the smallest K with
/// (√λ·d)^K / K! below 1e−18, plus a margin.
pub fn suggested_order(lambda_max: f64, diameter: f64) -> usize {
    let y = lambda_max.abs().sqrt() * diameter.abs();
    let target = -18.0 * std::f64::consts::LN_10;
    let mut ln_term = 0.0;
    let mut k = 0usize;
    while (ln_term > target || (k as f64) < y) && k < 10_000 {
        k += 1;
        ln_term += (y / k as f64).ln();
    }
    k + 6
}

/// Endpoint values δ^(2k+1)(ℓ₂) of the odd monomial deviations; the
/// characteristic series is their λ-sum on top of the closed unit part.
fn endpoint_deltas(table: &FormalPowerTable) -> Vec<f64> {
    let last = table.grid().len() - 1;
    let odd_count = (table.order() + 1) / 2;
    (0..odd_count).map(|k| table.delta(2 * k + 1).values()[last]).collect()
}

/// sin(√λ·d)/√λ, continued analytically through λ ≤ 0.
fn unit_s(lambda: f64, d: f64) -> f64 {
    let z = lambda * d * d;
    if z.abs() < 1e-6 {
        d * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0)
    } else if lambda > 0.0 {
        let r = lambda.sqrt();
        (r * d).sin() / r
    } else {
        let m = (-lambda).sqrt();
        (m * d).sinh() / m
    }
}

/// cos(√λ·d), continued analytically through λ ≤ 0.
fn unit_c(lambda: f64, d: f64) -> f64 {
    let z = lambda * d * d;
    if z.abs() < 1e-6 {
        1.0 - z / 2.0 + z * z / 24.0 - z * z * z / 720.0
    } else if lambda > 0.0 {
        (lambda.sqrt() * d).cos()
    } else {
        ((-lambda).sqrt() * d).cosh()
    }
}

/// d/dλ of sin(√λ·d)/√λ; the direct formula cancels near λ = 0, so a short
/// series takes over there.
fn unit_s_derivative(lambda: f64, d: f64) -> f64 {
    let z = lambda * d * d;
    if z.abs() < 1e-4 {
        -d.powi(3) / 6.0 + lambda * d.powi(5) / 60.0 - lambda * lambda * d.powi(7) / 1680.0
    } else {
        (d * unit_c(lambda, d) - unit_s(lambda, d)) / (2.0 * lambda)
    }
}

/// Σ_k (−λ)^k δ_k/(2k+1)! with adaptive truncation; two consecutive terms
/// below TAIL_TOL count as converged so a single small endpoint value cannot
/// stop the sum early. `Range` error when the orders run out first.
fn delta_char_sum<T: Scalar>(lambda: T, deltas: &[f64]) -> Result<T> {
    let mut scale = T::from_real(1.0);
    let mut sum = T::from_real(0.0);
    let mut streak = 0;
    for (k, &dk) in deltas.iter().enumerate() {
        if k > 0 {
            scale = (scale * lambda).scale(-1.0 / ((2 * k) as f64 * (2 * k + 1) as f64));
        }
        let term = scale.scale(dk);
        sum += term;
        if term.modulus() <= TAIL_TOL * sum.modulus().max(1.0) {
            streak += 1;
            if streak >= 2 {
                return Ok(sum);
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::Range(format!(
        "characteristic series did not converge with {} odd formal powers; \
         rebuild the table with a higher order",
        deltas.len()
    )))
}

/// Σ_{k≥1} k(−1)^k λ^{k−1} δ_k/(2k+1)!: λ-derivative of the δ part.
fn delta_char_derivative_sum(lambda: f64, deltas: &[f64]) -> Result<f64> {
    if deltas.len() < 2 {
        return Ok(0.0);
    }
    let mut scale = -1.0 / 6.0;
    let mut sum = 0.0;
    let mut streak = 0;
    for (k, &dk) in deltas.iter().enumerate().skip(1) {
        if k > 1 {
            scale *= -lambda * k as f64
                / ((k - 1) as f64 * (2 * k) as f64 * (2 * k + 1) as f64);
        }
        let term = scale * dk;
        sum += term;
        if term.abs() <= TAIL_TOL * sum.abs().max(1.0) {
            streak += 1;
            if streak >= 2 {
                return Ok(sum);
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::Range(format!(
        "characteristic series did not converge with {} odd formal powers; \
         rebuild the table with a higher order",
        deltas.len()
    )))
}

/// Λ(λ) = S_a(√λ, ℓ₂) for a table anchored at ℓ₁, evaluated as
/// sin(√λ·d)/√λ plus the δ correction so large λ·d² costs no precision.
pub fn characteristic_function(lambda: C64, table: &FormalPowerTable) -> Result<C64> {
    check_anchor(table)?;
    let d = table.grid().right() - table.grid().left();
    let z = lambda * d * d;
    let unit = if z.norm() < 1e-6 {
        (C64::from_real(1.0) - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0).scale(d)
    } else {
        let r = lambda.sqrt();
        (r * d).sin() / r
    };
    Ok(unit + delta_char_sum(lambda, &endpoint_deltas(table))?)
}

fn check_anchor(table: &FormalPowerTable) -> Result<()> {
    if table.grid().anchor_index() != 0 {
        return Err(Error::Precondition(
            "Dirichlet problems need the formal-power anchor at the left endpoint".into(),
        ));
    }
    Ok(())
}

fn char_value(lambda: f64, deltas: &[f64], d: f64) -> Result<f64> {
    Ok(unit_s(lambda, d) + delta_char_sum(lambda, deltas)?)
}

/// dΛ/dλ via the term-differentiated series.
fn char_derivative(lambda: f64, deltas: &[f64], d: f64) -> Result<f64> {
    Ok(unit_s_derivative(lambda, d) + delta_char_derivative_sum(lambda, deltas)?)
}

/// Eigenfunction candidate: sin(√λ(x−ℓ₁))/√λ plus the pointwise δ^(2k+1)
/// λ-series.
fn lambda_series_function(
    lambda: f64,
    table: &FormalPowerTable,
) -> Result<SampledFunction<f64>> {
    let grid = table.grid();
    let x0 = grid.anchor();
    let mut sum = SampledFunction::from_fn(grid, |x| unit_s(lambda, x - x0));
    let odd_count = (table.order() + 1) / 2;
    let mut scale = 1.0;
    let mut streak = 0;
    for k in 0..odd_count {
        if k > 0 {
            scale *= -lambda / ((2 * k) as f64 * (2 * k + 1) as f64);
        }
        let delta = table.delta(2 * k + 1);
        sum.add_scaled(delta, scale);
        if scale.abs() * delta.sup_norm() <= TAIL_TOL * sum.sup_norm().max(1.0) {
            streak += 1;
            if streak >= 2 {
                return Ok(sum);
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::Range(format!(
        "eigenfunction series did not converge at lambda = {lambda}; \
         rebuild the table with a higher order"
    )))
}

/// Finds the first `n_max` Dirichlet eigenvalues in [0, lambda_max] by a
/// sign-change scan, bisection, and one Newton polish, then returns the
/// normalized eigenfunctions.
pub fn find_eigenvalues(
    n_max: usize,
    lambda_max: f64,
    table: &FormalPowerTable,
) -> Result<Vec<EigenPair>> {
    check_anchor(table)?;
    if n_max == 0 {
        return Ok(Vec::new());
    }
    if lambda_max <= 0.0 {
        return Err(Error::Config(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    let deltas = endpoint_deltas(table);
    let span = table.grid().right() - table.grid().left();
    let a = table.impedance();
    let grid = table.grid();

    // Mesh spacing below the minimal-gap estimate π²/∫a⁻².
    let inv_sq = a.sample_inv_sq(grid);
    let total = crate::quadrature::integrate(&inv_sq);
    let gap = std::f64::consts::PI.powi(2) / total;
    let step = (gap / 4.0).min(lambda_max / 8.0);

    let mut pairs = Vec::with_capacity(n_max);
    let mut prev_lambda = 0.0;
    let mut prev_val = char_value(0.0, &deltas, span)?;
    let mut lam = step;
    while pairs.len() < n_max && prev_lambda < lambda_max {
        let lam_clamped = lam.min(lambda_max);
        let val = char_value(lam_clamped, &deltas, span)?;
        if prev_val == 0.0 {
            pairs.push(make_pair(pairs.len() + 1, prev_lambda, table, a)?);
        } else if val.signum() != prev_val.signum() {
            let root = refine_root(prev_lambda, lam_clamped, prev_val, &deltas, span)?;
            pairs.push(make_pair(pairs.len() + 1, root, table, a)?);
        }
        prev_lambda = lam_clamped;
        prev_val = val;
        lam += step;
    }
    if pairs.len() < n_max {
        return Err(Error::Range(format!(
            "found {} of {} eigenvalues below lambda_max = {}; raise lambda_max",
            pairs.len(),
            n_max,
            lambda_max
        )));
    }
    Ok(pairs)
}

fn refine_root(
    mut lo: f64,
    mut hi: f64,
    mut val_lo: f64,
    deltas: &[f64],
    span: f64,
) -> Result<f64> {
    for _ in 0..80 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = char_value(mid, deltas, span)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == val_lo.signum() {
            lo = mid;
            val_lo = v;
        } else {
            hi = mid;
        }
    }
    let mut root = 0.5 * (lo + hi);
    let d = char_derivative(root, deltas, span)?;
    if d != 0.0 {
        let polished = root - char_value(root, deltas, span)? / d;
        if polished > lo - (hi - lo) && polished < hi + (hi - lo) {
            root = polished;
        }
    }
    Ok(root)
}

fn make_pair(
    index: usize,
    lambda: f64,
    table: &FormalPowerTable,
    a: &Impedance,
) -> Result<EigenPair> {
    let raw = lambda_series_function(lambda, table)?;
    let sq = a.sample_sq(table.grid());
    let norm = inner_product(&raw, &raw, &sq).max(0.0).sqrt();
    if norm == 0.0 {
        return Err(Error::Iteration(format!(
            "eigenfunction at lambda = {lambda} has zero norm"
        )));
    }
    Ok(EigenPair {
        index,
        lambda,
        eigenfunction: raw.scaled(1.0 / norm),
    })
}

/// ‖L_a φ_n + λ_n φ_n‖_{L²_a}: how well a pair satisfies the equation.
pub fn eigen_residual(pair: &EigenPair, a: &Impedance) -> f64 {
    let lu = op_l(&pair.eigenfunction, a);
    let resid = lu.add(&pair.eigenfunction.scaled(pair.lambda));
    let sq = a.sample_sq(pair.eigenfunction.grid());
    weighted_lp_norm(&resid, &sq, 2.0)
}

/// Eigenfunction expansion of `u`: coefficients ⟨u, φ_n⟩_{L²_a}, the final
/// partial sum, and the sup-norm error after each added term.
#[derive(Debug, Clone)]
pub struct FourierExpansion {
    pub coefficients: Vec<f64>,
    pub partial_sum: SampledFunction<f64>,
    pub sup_errors: Vec<f64>,
}

pub fn fourier_expand(
    u: &SampledFunction<f64>,
    pairs: &[EigenPair],
    a: &Impedance,
) -> FourierExpansion {
    let sq = a.sample_sq(u.grid());
    let mut partial = SampledFunction::constant(u.grid(), 0.0);
    let mut coefficients = Vec::with_capacity(pairs.len());
    let mut sup_errors = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let c = inner_product(u, &pair.eigenfunction, &sq);
        coefficients.push(c);
        partial = partial.add(&pair.eigenfunction.scaled(c));
        sup_errors.push(u.sub(&partial).sup_norm());
    }
    FourierExpansion {
        coefficients,
        partial_sum: partial,
        sup_errors,
    }
}

/// Solves L_a u = g with u(ℓ₁) = u(ℓ₂) = 0: u = R_a g + c₁ φ_a^(1) + c₀,
/// with (c₀, c₁) from the 2×2 endpoint system. The determinant is
/// φ^(1)(ℓ₂) − φ^(1)(ℓ₁) = ∫ a⁻² > 0, so the system is always solvable.
pub fn solve_dirichlet_poisson(
    g: &SampledFunction<f64>,
    a: &Impedance,
) -> Result<SampledFunction<f64>> {
    let w = op_r(g, a);
    let ones = SampledFunction::constant(g.grid(), 1.0);
    let phi1 = op_j(&ones, a, Side::Direct);
    let last = g.grid().len() - 1;
    let (w_l, w_r) = (w.values()[0], w.values()[last]);
    let (p_l, p_r) = (phi1.values()[0], phi1.values()[last]);
    let det = p_r - p_l;
    if det <= 0.0 {
        return Err(Error::InvalidImpedance(
            "endpoint system is singular: ∫a⁻² is not positive".into(),
        ));
    }
    let c1 = -(w_r - w_l) / det;
    let c0 = -w_l - c1 * p_l;
    Ok(w.add(&phi1.scaled(c1)).map(|v| v + c0))
}
