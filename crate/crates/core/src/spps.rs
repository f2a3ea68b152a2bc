//! Spectral parameter power series: solutions of −(a²u′)′ = ρ²a²u as power
//! series in ρ with formal-power coefficients.
//!
//! e_a(ρ,x) = Σ (iρ)^k φ_a^(k)/k! generalizes e^{iρx}; its even and odd parts
//! C_a(ρ,x) = Σ (−1)^k ρ^{2k} φ^(2k)/(2k)! and
//! S_a(ρ,x) = Σ (−1)^k ρ^{2k} φ^(2k+1)/(2k+1)! generalize cos ρx and
//! sin(ρx)/ρ, with e_a = C_a + iρ S_a. The Darboux derivative sends each
//! series termwise into the reciprocal family:
//! D_a e_a = iρ e_{1/a}, D_a C_a = −ρ² S_{1/a}, D_a S_a = C_{1/a}.

use crate::error::{Error, Result};
use crate::formal::FormalPowerTable;
use crate::grid::SampledFunction;
use crate::impedance::Impedance;
use crate::oracle;
use crate::quadrature::cumulative_integral;
use crate::scalar::Scalar;
use crate::C64;
use std::sync::Arc;

pub use crate::ops::wronskian;

/// Relative tail threshold for automatic series truncation.
pub const TAIL_TOL: f64 = 1e-12;

/// Which SPPS solution a series represents, named by its unit-impedance limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// e_a(ρ,·): e_a(x₀) = 1, D_a e_a(x₀) = iρ.
    E,
    /// C_a(ρ,·): C_a(x₀) = 1, D_a C_a(x₀) = 0.
    C,
    /// S_a(ρ,·): S_a(x₀) = 0, D_a S_a(x₀) = 1.
    S,
}

impl SolutionKind {
    /// Initial values (u(x₀), D_a u(x₀)).
    pub fn initial_conditions(self, rho: C64) -> (C64, C64) {
        match self {
            SolutionKind::E => (C64::ONE, C64::i() * rho),
            SolutionKind::C => (C64::ONE, C64::ZERO),
            SolutionKind::S => (C64::ZERO, C64::ONE),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "e" | "E" => Ok(SolutionKind::E),
            "c" | "C" => Ok(SolutionKind::C),
            "s" | "S" => Ok(SolutionKind::S),
            _ => Err(Error::Config(format!("unknown solution kind {s:?} (expected e, C, or S)"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SolutionKind::E => "e",
            SolutionKind::C => "C",
            SolutionKind::S => "S",
        }
    }
}

/// How many series terms to take.
#[derive(Debug, Clone, Copy)]
pub enum Truncation {
    /// Stop once the next term falls below TAIL_TOL relative to the sum,
    /// capped at the table order.
    Auto,
    /// Exactly N + 1 terms (series index 0..=N).
    Terms(usize),
}

/// A truncated SPPS series evaluated on the table grid.
#[derive(Debug, Clone)]
pub struct SppsSolution {
    pub kind: SolutionKind,
    pub rho: C64,
    /// Number of correction terms summed on top of the closed unit part.
    pub terms_used: usize,
    pub values: SampledFunction<C64>,
    /// Sup norm of the first correction term beyond the truncation.
    pub tail_estimate: f64,
}

/// Highest φ order the k-th series term needs.
fn phi_order(kind: SolutionKind, k: usize) -> usize {
    match kind {
        SolutionKind::E => k,
        SolutionKind::C => 2 * k,
        SolutionKind::S => 2 * k + 1,
    }
}

/// Coefficient ratio term_k / term_{k−1} applied to the scalar prefactor.
fn coefficient_step(kind: SolutionKind, k: usize, rho: C64) -> C64 {
    let kf = k as f64;
    match kind {
        SolutionKind::E => C64::i() * rho / kf,
        SolutionKind::C => -rho * rho / ((2.0 * kf - 1.0) * (2.0 * kf)),
        SolutionKind::S => -rho * rho / ((2.0 * kf) * (2.0 * kf + 1.0)),
    }
}

/// Closed unit-impedance part of a series: cos ρp, sin(ρp)/ρ, or e^{iρp}
/// with p = x − x₀.
fn unit_part(kind: SolutionKind, rho: C64, grid: &Arc<crate::grid::Grid>) -> SampledFunction<C64> {
    let x0 = grid.anchor();
    match kind {
        SolutionKind::E => {
            SampledFunction::from_fn(grid, |x| (C64::i() * rho * (x - x0)).exp())
        }
        SolutionKind::C => SampledFunction::from_fn(grid, |x| (rho * (x - x0)).cos()),
        SolutionKind::S if rho.norm() == 0.0 => {
            SampledFunction::from_fn(grid, |x| C64::from_real(x - x0))
        }
        SolutionKind::S => SampledFunction::from_fn(grid, |x| (rho * (x - x0)).sin() / rho),
    }
}

/// Evaluates the SPPS series of the given kind on the table's grid.
///
/// The sum is arranged as the closed unit-impedance solution plus the
/// correction series in the monomial deviations δ^(k) = φ^(k) − (x−x₀)^k.
/// Both arrangements are the same series; the split one stays accurate when
/// ρ·|x−x₀| is large and the raw φ terms would cancel catastrophically, and
/// for a ≡ 1 it is exact. With [`Truncation::Auto`] the correction stops
/// once the next term's sup norm drops below TAIL_TOL · max(1, ‖sum‖∞); if
/// the table order runs out first, the last term's size is still reported as
/// `tail_estimate` so the caller can judge the truncation quality.
pub fn spps_eval(
    kind: SolutionKind,
    rho: C64,
    table: &FormalPowerTable,
    trunc: Truncation,
) -> Result<SppsSolution> {
    let cap = match kind {
        SolutionKind::E => table.order(),
        SolutionKind::C => table.order() / 2,
        SolutionKind::S => (table.order().max(1) - 1) / 2,
    };
    let n_terms = match trunc {
        Truncation::Auto => None,
        Truncation::Terms(n) => {
            if n > cap {
                return Err(Error::Config(format!(
                    "series index {n} for kind {} needs table order {}, got {}",
                    kind.label(),
                    phi_order(kind, n),
                    table.order()
                )));
            }
            Some(n)
        }
    };
    let grid = table.grid();
    let mut sum = unit_part(kind, rho, grid);
    let mut coeff = C64::ONE;
    let mut terms_used = 0;
    let mut tail = f64::INFINITY;
    for k in 0..=cap {
        if k > 0 {
            coeff *= coefficient_step(kind, k, rho);
        }
        let delta = table.delta(phi_order(kind, k));
        let term_sup = coeff.norm() * delta.sup_norm();
        if n_terms.is_none() && k > 0 && term_sup < TAIL_TOL * sum.sup_norm().max(1.0) {
            tail = term_sup;
            break;
        }
        for (s, &p) in sum.values_mut().iter_mut().zip(delta.values()) {
            *s += coeff.scale(p);
        }
        terms_used = k + 1;
        tail = term_sup;
        if let Some(n) = n_terms {
            if k == n {
                // Tail from the next term when the table still has it.
                if n + 1 <= cap {
                    let next = coeff * coefficient_step(kind, n + 1, rho);
                    tail = next.norm() * table.delta(phi_order(kind, n + 1)).sup_norm();
                }
                break;
            }
        }
    }
    Ok(SppsSolution { kind, rho, terms_used, values: sum, tail_estimate: tail })
}

/// Darboux image D_a u of an SPPS solution, computed termwise from the
/// reciprocal family: returns the sampled image and its tail estimate. The
/// image equals iρ·e_{1/a}, −ρ²·S_{1/a}, or C_{1/a} for kinds e, C, S.
pub fn spps_darboux_derivative(
    sol: &SppsSolution,
    table: &FormalPowerTable,
) -> Result<(SampledFunction<C64>, f64)> {
    let swapped = table.swapped();
    let rho = sol.rho;
    let (image_kind, prefactor) = match sol.kind {
        SolutionKind::E => (SolutionKind::E, C64::i() * rho),
        SolutionKind::C => (SolutionKind::S, -rho * rho),
        SolutionKind::S => (SolutionKind::C, C64::ONE),
    };
    // The image of an N-term series is the image series with one term fewer;
    // matching term counts keeps the truncation errors aligned.
    let image_terms = sol.terms_used.saturating_sub(1);
    let image = spps_eval(image_kind, rho, &swapped, Truncation::Terms(image_terms))?;
    Ok((image.values.scaled(prefactor), prefactor.norm() * image.tail_estimate))
}

/// Sup norm of W[u,v] − W[u,v](x₀): how far the a-Wronskian drifts from
/// constancy across the grid.
pub fn wronskian_drift(
    u: &SampledFunction<C64>,
    v: &SampledFunction<C64>,
    a: &Impedance,
) -> f64 {
    let w = wronskian(u, v, a);
    let w0 = w.at_anchor();
    w.values().iter().map(|&x| (x - w0).norm()).fold(0.0, f64::max)
}

/// Empirical a-priori-estimate ratios for the C and S series against their
/// unit-impedance limits.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub rho_count: usize,
    pub x_count: usize,
    pub max_ratio_c: f64,
    pub max_ratio_s: f64,
}

/// Checks the deviation envelopes
/// |C_a(ρ,x) − cos ρ(x−x₀)| · (1+|ρ|d) / (|ρ|d · e^{|Im ρ|d} · e^{Q₁(x)}) and
/// the same for ρS_a vs sin, with d = x − x₀ and Q₁(x) = ∫_{x₀}^x |2a′/a|.
/// Reports the maximum ratio over the sample set; boundedness as samples are
/// refined is the empirical form of the a-priori estimate.
pub fn estimate_check(
    a: &Impedance,
    rho_samples: &[f64],
    x_samples: &[f64],
    grid: &Arc<crate::grid::Grid>,
) -> Result<EstimateReport> {
    let x0 = grid.anchor();
    let q1_cum = cumulative_integral(&SampledFunction::from_fn(grid, |x| {
        (2.0 * a.derivative(x) / a.eval(x)).abs()
    }));
    let x_indices: Vec<usize> = x_samples
        .iter()
        .map(|&x| {
            grid.index_of(x).ok_or_else(|| {
                Error::Config(format!("x sample {x} is not a grid node"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut max_c = 0.0f64;
    let mut max_s = 0.0f64;
    for &rho in rho_samples {
        let rho_c = C64::new(rho, 0.0);
        let c_sol = oracle::solve(SolutionKind::C, a, rho_c, grid)?;
        let s_sol = oracle::solve(SolutionKind::S, a, rho_c, grid)?;
        for &i in &x_indices {
            let x = grid.nodes()[i];
            let d = x - x0;
            if rho.abs() * d.abs() < 1e-300 {
                continue;
            }
            let q1 = q1_cum.values()[i];
            let envelope = rho.abs() * d.abs() * q1.exp() / (1.0 + rho.abs() * d.abs());
            let dev_c = (c_sol.u.values()[i] - C64::from_real((rho * d).cos())).norm();
            let dev_s =
                (s_sol.u.values()[i].scale(rho) - C64::from_real((rho * d).sin())).norm();
            max_c = max_c.max(dev_c / envelope);
            max_s = max_s.max(dev_s / envelope);
        }
    }
    Ok(EstimateReport {
        rho_count: rho_samples.len(),
        x_count: x_indices.len(),
        max_ratio_c: max_c,
        max_ratio_s: max_s,
    })
}
