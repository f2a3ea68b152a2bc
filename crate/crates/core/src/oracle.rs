//! Independent reference solutions: closed forms for the catalog impedances
//! and an adaptive RK5(4) integrator with dense output for everything else.
//!
//! The ODE −(a²u′)′ = λa²u is integrated as the first-order system
//! u′ = v/a², v′ = −λa²u with v = D_a u, so both the solution and its
//! weighted derivative come out of one pass.

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::impedance::{Impedance, ImpedanceKind};
use crate::scalar::Scalar;
use crate::spps::SolutionKind;
use crate::C64;
use std::sync::Arc;

/// Where a reference solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSource {
    ClosedForm,
    OdeIntegration,
}

/// A reference solution sampled on a grid: u and D_a u = a²u′.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub u: SampledFunction<C64>,
    pub du: SampledFunction<C64>,
    pub lambda: C64,
    pub source: OracleSource,
}

/// sin(z)/z, series-guarded near z = 0.
fn sin_over(z: C64) -> C64 {
    if z.norm() < 1e-2 {
        let z2 = z * z;
        C64::ONE - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0
    } else {
        z.sin() / z
    }
}

/// (sin(z)/z − cos z)/z², series-guarded near z = 0.
fn sin_cos_defect(z: C64) -> C64 {
    if z.norm() < 0.5 {
        // Σ_{k≥1} (−1)^{k+1} 2k z^{2k−2}/(2k+1)!
        let z2 = z * z;
        let mut term = C64::from_real(1.0 / 3.0);
        let mut sum = term;
        for k in 2..10 {
            let kf = k as f64;
            term *= -z2 * kf / ((kf - 1.0) * (2.0 * kf) * (2.0 * kf + 1.0));
            sum += term;
        }
        sum
    } else {
        (z.sin() / z - z.cos()) / (z * z)
    }
}

/// (u, D_a u) of the closed-form solution at one point, anchored at x₀ = 0.
fn closed_form_point(kind: SolutionKind, a: &Impedance, rho: C64, x: f64) -> Result<(C64, C64)> {
    let i = C64::i();
    match a.kind() {
        ImpedanceKind::Unit => {
            let z = rho * x;
            Ok(match kind {
                SolutionKind::E => ((i * z).exp(), i * rho * (i * z).exp()),
                SolutionKind::C => (z.cos(), -rho * z.sin()),
                SolutionKind::S => (sin_over(z) * x, z.cos()),
            })
        }
        ImpedanceKind::Affine => {
            let z = rho * x;
            let w = 1.0 + x;
            let s_over = sin_over(z) * x; // sin(ρx)/ρ
            Ok(match kind {
                SolutionKind::C => (
                    (z.cos() + s_over) / w,
                    (z.cos() - rho * z.sin()).scale(w) - (z.cos() + s_over),
                ),
                SolutionKind::S => (
                    s_over / w,
                    C64::from_real(w) * z.cos() - s_over,
                ),
                SolutionKind::E => (
                    ((i * z).exp() + s_over) / w,
                    (i * rho * (i * z).exp() + z.cos()).scale(w) - ((i * z).exp() + s_over),
                ),
            })
        }
        ImpedanceKind::RecipAffine => {
            let z = rho * x;
            let w = 1.0 + x;
            let s_over = sin_over(z) * x;
            let c = C64::from_real(w) * z.cos() - s_over;
            let dc = -rho * rho * s_over / w;
            let s = s_over.scale(w) + sin_cos_defect(z) * (x * x * x);
            let ds = (s_over + z.cos()) / w;
            Ok(match kind {
                SolutionKind::C => (c, dc),
                SolutionKind::S => (s, ds),
                SolutionKind::E => (c + i * rho * s, dc + i * rho * ds),
            })
        }
        ImpedanceKind::Exp(cc) => {
            let c = *cc;
            let omega = (rho * rho - c * c).sqrt();
            let z = omega * x;
            let grow = (c * x).exp(); // a(x)
            let decay = 1.0 / grow;
            let s_over = sin_over(z) * x; // sin(ωx)/ω
            Ok(match kind {
                SolutionKind::C => (
                    (z.cos() + s_over.scale(c)).scale(decay),
                    (-rho * rho * s_over).scale(grow),
                ),
                SolutionKind::S => (
                    s_over.scale(decay),
                    (z.cos() - s_over.scale(c)).scale(grow),
                ),
                SolutionKind::E => (
                    (z.cos() + s_over * (c + i * rho)).scale(decay),
                    (i * rho * (z.cos() + s_over * (i * rho - c))).scale(grow),
                ),
            })
        }
        ImpedanceKind::Sampled { .. } => Err(Error::Config(format!(
            "no closed form for impedance {}",
            a.id()
        ))),
    }
}

/// Closed-form solution on a grid. The catalog formulas are anchored at 0, so
/// the grid anchor must be 0.
pub fn closed_form(
    kind: SolutionKind,
    a: &Impedance,
    rho: C64,
    grid: &Arc<Grid>,
) -> Result<OracleSolution> {
    if grid.anchor() != 0.0 {
        return Err(Error::Precondition(format!(
            "closed forms are anchored at 0; grid anchor is {}",
            grid.anchor()
        )));
    }
    let mut u = Vec::with_capacity(grid.len());
    let mut du = Vec::with_capacity(grid.len());
    for &x in grid.nodes() {
        let (ux, dux) = closed_form_point(kind, a, rho, x)?;
        u.push(ux);
        du.push(dux);
    }
    Ok(OracleSolution {
        u: SampledFunction::new(Arc::clone(grid), u)?,
        du: SampledFunction::new(Arc::clone(grid), du)?,
        lambda: rho * rho,
        source: OracleSource::ClosedForm,
    })
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 6] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// Difference between the 5th- and 4th-order weights (7 entries: FSAL stage).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output polynomial: y(θ) = y₀ + h Σ_i k_i Σ_j P[i][j] θ^{j+1}.
const P: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-13;
const MAX_STEPS: usize = 1_000_000;

type State = [C64; 2];

struct System<'a> {
    a: &'a Impedance,
    lambda: C64,
    forcing: Option<&'a dyn Fn(f64) -> f64>,
}

impl System<'_> {
    fn rhs(&self, x: f64, y: &State) -> State {
        let asq = self.a.eval_sq(x);
        let mut vprime = -self.lambda * y[0].scale(asq);
        if let Some(f) = self.forcing {
            vprime += C64::from_real(asq * f(x));
        }
        [y[1].scale(1.0 / asq), vprime]
    }
}

fn err_norm(e: &State, y0: &State, y1: &State) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let scale = ATOL + RTOL * y0[i].norm().max(y1[i].norm());
        let r = e[i].norm() / scale;
        acc += r * r;
    }
    (acc / 2.0).sqrt()
}

/// Integrates from `x0` with state `ic`, emitting dense output at `targets`
/// (which must be sorted moving away from x0, and may include x0 itself).
fn integrate_dense(
    sys: &System,
    x0: f64,
    ic: State,
    targets: &[f64],
    out: &mut Vec<State>,
) -> Result<()> {
    let mut ti = 0;
    while ti < targets.len() && targets[ti] == x0 {
        out.push(ic);
        ti += 1;
    }
    if ti >= targets.len() {
        return Ok(());
    }
    let x_end = targets[targets.len() - 1];
    let dir = if x_end > x0 { 1.0 } else { -1.0 };

    let mut x = x0;
    let mut y = ic;
    let mut f = sys.rhs(x, &y);

    // Initial step size from the local derivative scale.
    let d0 = y[0].norm().max(y[1].norm()).max(1.0);
    let d1 = f[0].norm().max(f[1].norm());
    let mut h = if d1 > 1e-10 { 0.01 * d0 / d1 } else { 1e-4 * (x_end - x0).abs() };
    h = h.min((x_end - x0).abs()).max(1e-12);

    let mut k = [[C64::ZERO; 2]; 7];
    for _step in 0..MAX_STEPS {
        if (x - x_end).abs() < 1e-14 * (x_end - x0).abs().max(1.0) {
            break;
        }
        h = h.min((x_end - x).abs());
        let hs = dir * h;

        k[0] = f;
        for s in 1..6 {
            let mut ys = y;
            for j in 0..s {
                let w = A[s][j] * hs;
                ys[0] += k[j][0].scale(w);
                ys[1] += k[j][1].scale(w);
            }
            k[s] = sys.rhs(x + C[s] * hs, &ys);
        }
        let mut y_new = y;
        for j in 0..6 {
            let w = B[j] * hs;
            y_new[0] += k[j][0].scale(w);
            y_new[1] += k[j][1].scale(w);
        }
        let f_new = sys.rhs(x + hs, &y_new);
        k[6] = f_new;
        let mut err = [C64::ZERO; 2];
        for j in 0..7 {
            let w = E[j] * hs;
            err[0] += k[j][0].scale(w);
            err[1] += k[j][1].scale(w);
        }
        let en = err_norm(&err, &y, &y_new);
        if en <= 1.0 {
            // Dense output for every target inside this step.
            let x_new = x + hs;
            while ti < targets.len() && (targets[ti] - x) * dir <= (x_new - x) * dir + 1e-300 {
                let theta = ((targets[ti] - x) / hs).clamp(0.0, 1.0);
                let mut yt = y;
                for j in 0..7 {
                    let poly = theta
                        * (P[j][0]
                            + theta * (P[j][1] + theta * (P[j][2] + theta * P[j][3])));
                    yt[0] += k[j][0].scale(hs * poly);
                    yt[1] += k[j][1].scale(hs * poly);
                }
                out.push(yt);
                ti += 1;
            }
            x = x_new;
            y = y_new;
            f = f_new;
            if ti >= targets.len() {
                return Ok(());
            }
            let factor = if en < 1e-30 { 10.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 10.0) };
            h *= factor;
        } else {
            h *= (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h < 1e-15 {
            return Err(Error::Iteration(format!(
                "step size collapsed at x = {x} (stiff or singular coefficient)"
            )));
        }
    }
    if ti < targets.len() {
        return Err(Error::Iteration(format!(
            "integrator exceeded {MAX_STEPS} steps before reaching {x_end}"
        )));
    }
    Ok(())
}

fn split_and_integrate(
    sys: &System,
    grid: &Arc<Grid>,
    ic: State,
) -> Result<Vec<State>> {
    let nodes = grid.nodes();
    let ai = grid.anchor_index();
    let x0 = grid.anchor();
    // Left of the anchor, integrated outward; then the anchor and the right.
    let left: Vec<f64> = nodes[..ai].iter().rev().copied().collect();
    let mut out_left = Vec::with_capacity(left.len());
    integrate_dense(sys, x0, ic, &left, &mut out_left)?;
    let right: Vec<f64> = nodes[ai..].to_vec();
    let mut out_right = Vec::with_capacity(right.len());
    integrate_dense(sys, x0, ic, &right, &mut out_right)?;
    out_left.reverse();
    out_left.extend(out_right);
    Ok(out_left)
}

/// Integrates −(a²u′)′ = λa²u over the grid from initial values
/// (u(x₀), D_a u(x₀)) at the grid anchor.
pub fn ode_solve(
    a: &Impedance,
    lambda: C64,
    ic: (C64, C64),
    grid: &Arc<Grid>,
) -> Result<OracleSolution> {
    let sys = System { a, lambda, forcing: None };
    let states = split_and_integrate(&sys, grid, [ic.0, ic.1])?;
    pack(states, lambda, grid)
}

/// Integrates the forced equation L_a u = g, i.e. (a²u′)′ = a²(g − λu),
/// from initial values (u(x₀), D_a u(x₀)).
pub fn ode_solve_forced(
    a: &Impedance,
    lambda: C64,
    g: &dyn Fn(f64) -> f64,
    ic: (C64, C64),
    grid: &Arc<Grid>,
) -> Result<OracleSolution> {
    let sys = System { a, lambda, forcing: Some(g) };
    let states = split_and_integrate(&sys, grid, [ic.0, ic.1])?;
    pack(states, lambda, grid)
}

fn pack(states: Vec<State>, lambda: C64, grid: &Arc<Grid>) -> Result<OracleSolution> {
    let u: Vec<C64> = states.iter().map(|s| s[0]).collect();
    let du: Vec<C64> = states.iter().map(|s| s[1]).collect();
    Ok(OracleSolution {
        u: SampledFunction::new(Arc::clone(grid), u)?,
        du: SampledFunction::new(Arc::clone(grid), du)?,
        lambda,
        source: OracleSource::OdeIntegration,
    })
}

/// (u, D_a u) at a single point, integrating from `x0` with the given ICs.
pub fn ode_point(
    a: &Impedance,
    lambda: C64,
    ic: (C64, C64),
    x0: f64,
    x1: f64,
) -> Result<(C64, C64)> {
    if x0 == x1 {
        return Ok(ic);
    }
    let sys = System { a, lambda, forcing: None };
    let mut out = Vec::with_capacity(1);
    integrate_dense(&sys, x0, [ic.0, ic.1], &[x1], &mut out)?;
    Ok((out[0][0], out[0][1]))
}

/// Reference solution of the given kind: closed form when the impedance is in
/// the catalog, RK integration otherwise.
pub fn solve(
    kind: SolutionKind,
    a: &Impedance,
    rho: C64,
    grid: &Arc<Grid>,
) -> Result<OracleSolution> {
    match a.kind() {
        ImpedanceKind::Sampled { .. } => {
            ode_solve(a, rho * rho, kind.initial_conditions(rho), grid)
        }
        _ if grid.anchor() == 0.0 => closed_form(kind, a, rho, grid),
        _ => ode_solve(a, rho * rho, kind.initial_conditions(rho), grid),
    }
}

/// e_a(ρ, x) and D_a e_a(ρ, x) at one point, anchored at 0: closed form for
/// catalog impedances, point integration otherwise.
pub fn e_point(a: &Impedance, rho: C64, x: f64) -> Result<(C64, C64)> {
    match a.kind() {
        ImpedanceKind::Sampled { .. } => ode_point(
            a,
            rho * rho,
            SolutionKind::E.initial_conditions(rho),
            0.0,
            x,
        ),
        _ => closed_form_point(SolutionKind::E, a, rho, x),
    }
}
