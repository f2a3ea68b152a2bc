//! Impedance coefficients a(x) and the proper-impedance check.
//!
//! An impedance is proper on an interval when a > 0 and both a and 1/a are
//! square integrable there. The built-in catalog (unit, affine, exponential)
//! is analytic; arbitrary coefficients come in as sampled tables interpolated
//! piecewise-linearly.

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledFunction};
use crate::quadrature::integrate;
use std::path::Path;
use std::sync::Arc;

/// Tolerance for the a(0) = 1 normalization required by transmutation kernels.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum ImpedanceKind {
    /// a ≡ 1.
    Unit,
    /// a(x) = 1 + x.
    Affine,
    /// a(x) = 1/(1 + x).
    RecipAffine,
    /// a(x) = e^{cx}.
    Exp(f64),
    /// Piecewise-linear table; `inverted` marks the reciprocal of the table.
    Sampled {
        xs: Arc<Vec<f64>>,
        ys: Arc<Vec<f64>>,
        inverted: bool,
    },
}

/// A positive coefficient function a(x), evaluable anywhere on its domain.
#[derive(Debug, Clone)]
pub struct Impedance {
    kind: ImpedanceKind,
}

impl Impedance {
    pub fn unit() -> Self {
        Impedance { kind: ImpedanceKind::Unit }
    }

    pub fn affine() -> Self {
        Impedance { kind: ImpedanceKind::Affine }
    }

    pub fn exp(c: f64) -> Self {
        Impedance { kind: ImpedanceKind::Exp(c) }
    }

    /// Piecewise-linear impedance through (xs[i], ys[i]).
    pub fn from_samples(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidImpedance(format!(
                "sample table needs matching columns with at least 2 rows, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidImpedance(
                "sample abscissae must be finite and strictly increasing".into(),
            ));
        }
        if ys.iter().any(|&y| !(y.is_finite() && y > 0.0)) {
            return Err(Error::InvalidImpedance("sampled impedance must be finite and positive".into()));
        }
        Ok(Impedance {
            kind: ImpedanceKind::Sampled { xs: Arc::new(xs), ys: Arc::new(ys), inverted: false },
        })
    }

    /// Resolve a catalog id: `unit`, `affine`, `exp:<c>`, or `file:<path>`
    /// (two-column CSV x, a(x); a header row is skipped if present).
    pub fn from_catalog(id: &str) -> Result<Self> {
        match id {
            "unit" => Ok(Self::unit()),
            "affine" => Ok(Self::affine()),
            _ => {
                if let Some(c) = id.strip_prefix("exp:") {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::Config(format!("bad exponent in impedance id {id:?}")))?;
                    Ok(Self::exp(c))
                } else if let Some(path) = id.strip_prefix("file:") {
                    Self::from_csv(Path::new(path))
                } else {
                    Err(Error::Config(format!(
                        "unknown impedance id {id:?} (expected unit, affine, exp:<c>, file:<path>)"
                    )))
                }
            }
        }
    }

    /// Load a two-column CSV table (x, a(x)).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::Config(format!("cannot read impedance file {path:?}: {e}")))?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record
                .map_err(|e| Error::Config(format!("bad CSV in {path:?} at row {row}: {e}")))?;
            if record.len() < 2 {
                return Err(Error::Config(format!("{path:?} row {row}: expected 2 columns")));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if row == 0 => continue, // header row
                _ => {
                    return Err(Error::Config(format!("{path:?} row {row}: non-numeric data")));
                }
            }
        }
        Self::from_samples(xs, ys)
    }

    pub fn kind(&self) -> &ImpedanceKind {
        &self.kind
    }

    /// Short identifier for reports.
    pub fn id(&self) -> String {
        match &self.kind {
            ImpedanceKind::Unit => "unit".into(),
            ImpedanceKind::Affine => "affine".into(),
            ImpedanceKind::RecipAffine => "recip-affine".into(),
            ImpedanceKind::Exp(c) => format!("exp:{c}"),
            ImpedanceKind::Sampled { xs, inverted, .. } => {
                if *inverted {
                    format!("recip-sampled[{}]", xs.len())
                } else {
                    format!("sampled[{}]", xs.len())
                }
            }
        }
    }

    /// a(x).
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            ImpedanceKind::Unit => 1.0,
            ImpedanceKind::Affine => 1.0 + x,
            ImpedanceKind::RecipAffine => 1.0 / (1.0 + x),
            ImpedanceKind::Exp(c) => (c * x).exp(),
            ImpedanceKind::Sampled { xs, ys, inverted } => {
                let v = interp_linear(xs, ys, x);
                if *inverted {
                    1.0 / v
                } else {
                    v
                }
            }
        }
    }

    /// a(x)².
    pub fn eval_sq(&self, x: f64) -> f64 {
        let a = self.eval(x);
        a * a
    }

    /// a(x)⁻².
    pub fn eval_inv_sq(&self, x: f64) -> f64 {
        let a = self.eval(x);
        1.0 / (a * a)
    }

    /// a′(x): analytic for catalog kinds, segment slope for sampled tables.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            ImpedanceKind::Unit => 0.0,
            ImpedanceKind::Affine => 1.0,
            ImpedanceKind::RecipAffine => {
                let d = 1.0 + x;
                -1.0 / (d * d)
            }
            ImpedanceKind::Exp(c) => c * (c * x).exp(),
            ImpedanceKind::Sampled { xs, ys, inverted } => {
                let slope = interp_slope(xs, ys, x);
                if *inverted {
                    let v = interp_linear(xs, ys, x);
                    -slope / (v * v)
                } else {
                    slope
                }
            }
        }
    }

    /// d(a²)/dx, used by the kernel extension march.
    pub fn sq_derivative(&self, x: f64) -> f64 {
        2.0 * self.eval(x) * self.derivative(x)
    }

    /// The reciprocal impedance 1/a. Applying it twice returns the original
    /// exactly for every kind.
    pub fn reciprocal(&self) -> Impedance {
        let kind = match &self.kind {
            ImpedanceKind::Unit => ImpedanceKind::Unit,
            ImpedanceKind::Affine => ImpedanceKind::RecipAffine,
            ImpedanceKind::RecipAffine => ImpedanceKind::Affine,
            ImpedanceKind::Exp(c) => ImpedanceKind::Exp(-c),
            ImpedanceKind::Sampled { xs, ys, inverted } => ImpedanceKind::Sampled {
                xs: Arc::clone(xs),
                ys: Arc::clone(ys),
                inverted: !inverted,
            },
        };
        Impedance { kind }
    }

    /// Samples a on a grid.
    pub fn sample(&self, grid: &Arc<Grid>) -> SampledFunction<f64> {
        SampledFunction::from_fn(grid, |x| self.eval(x))
    }

    /// Samples a² on a grid.
    pub fn sample_sq(&self, grid: &Arc<Grid>) -> SampledFunction<f64> {
        SampledFunction::from_fn(grid, |x| self.eval_sq(x))
    }

    /// Samples a⁻² on a grid.
    pub fn sample_inv_sq(&self, grid: &Arc<Grid>) -> SampledFunction<f64> {
        SampledFunction::from_fn(grid, |x| self.eval_inv_sq(x))
    }

    /// True when a(0) = 1 up to the normalization tolerance.
    pub fn is_normalized_at_zero(&self) -> bool {
        (self.eval(0.0) - 1.0).abs() <= NORMALIZATION_TOL
    }
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    // Constant extrapolation beyond the table keeps positivity.
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&t| t <= x).min(n - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] * (1.0 - w) + ys[i] * w
}

fn interp_slope(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] || x >= xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&t| t <= x).min(n - 1);
    (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
}

/// Result of the proper-impedance check on a grid.
#[derive(Debug, Clone)]
pub struct ProperCertificate {
    /// ‖a‖ in L² over the grid interval.
    pub norm_a_l2: f64,
    /// ‖1/a‖ in L² over the grid interval.
    pub norm_a_inv_l2: f64,
    /// Smallest node value of a.
    pub min_value: f64,
}

/// Checks a > 0 and square integrability of a and 1/a on the grid, returning
/// the norms. Fails with an invalid-impedance error otherwise.
pub fn validate_proper(a: &Impedance, grid: &Arc<Grid>) -> Result<ProperCertificate> {
    let samples = a.sample(grid);
    let min_value = samples.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_value > 0.0) || samples.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidImpedance(format!(
            "{} is not positive on [{}, {}] (min {min_value})",
            a.id(),
            grid.left(),
            grid.right()
        )));
    }
    let norm_a_sq = integrate(&a.sample_sq(grid));
    let norm_inv_sq = integrate(&a.sample_inv_sq(grid));
    if !(norm_a_sq.is_finite() && norm_inv_sq.is_finite()) {
        return Err(Error::InvalidImpedance(format!(
            "{} is not square integrable together with its reciprocal",
            a.id()
        )));
    }
    Ok(ProperCertificate {
        norm_a_l2: norm_a_sq.sqrt(),
        norm_a_inv_l2: norm_inv_sq.sqrt(),
        min_value,
    })
}

/// Free-function form of [`Impedance::reciprocal`].
pub fn reciprocal_impedance(a: &Impedance) -> Impedance {
    a.reciprocal()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_ids_resolve() {
        assert!(matches!(Impedance::from_catalog("unit").unwrap().kind(), ImpedanceKind::Unit));
        assert!(matches!(Impedance::from_catalog("affine").unwrap().kind(), ImpedanceKind::Affine));
        match Impedance::from_catalog("exp:0.5").unwrap().kind() {
            ImpedanceKind::Exp(c) => assert_eq!(*c, 0.5),
            k => panic!("wrong kind {k:?}"),
        }
        assert!(Impedance::from_catalog("quadratic").is_err());
    }

    #[test]
    fn reciprocal_is_an_involution() {
        for a in [Impedance::unit(), Impedance::affine(), Impedance::exp(0.7)] {
            let twice = a.reciprocal().reciprocal();
            for &x in &[0.0, 0.3, 0.9] {
                assert_eq!(a.eval(x), twice.eval(x));
                assert!((a.eval(x) * a.reciprocal().eval(x) - 1.0).abs() < 1e-15);
            }
        }
        let s = Impedance::from_samples(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!((s.reciprocal().eval(0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.reciprocal().reciprocal().eval(0.5), s.eval(0.5));
    }

    #[test]
    fn affine_norms_on_unit_interval() {
        let g = Grid::uniform(0.0, 1.0, 2001, 0.0).unwrap();
        let cert = validate_proper(&Impedance::affine(), &g).unwrap();
        assert!((cert.norm_a_l2.powi(2) - 7.0 / 3.0).abs() < 1e-12);
        assert!((cert.norm_a_inv_l2.powi(2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_impedance_rejected() {
        let g = Grid::uniform(-2.0, 0.0, 101, -2.0).unwrap();
        assert!(validate_proper(&Impedance::affine(), &g).is_err());
        assert!(Impedance::from_samples(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn sampled_interpolates_linearly() {
        let a = Impedance::from_samples(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!((a.eval(0.5) - 1.5).abs() < 1e-15);
        assert!((a.eval(1.5) - 1.5).abs() < 1e-15);
        assert_eq!(a.derivative(0.25), 1.0);
        assert_eq!(a.derivative(1.75), -1.0);
    }

    #[test]
    fn exp_derivatives() {
        let a = Impedance::exp(2.0);
        assert!((a.derivative(0.3) - 2.0 * (0.6f64).exp()).abs() < 1e-12);
        assert!((a.sq_derivative(0.3) - 4.0 * (1.2f64).exp()).abs() < 1e-12);
    }
}
