//! Coordinate-representation study of the similarity as a multiplication
//! operator: the radial-type second-order ODE
//!
//! ```text
//! psi'' + (2q/(q-1)) (1/x) psi' + (-x^2 + (2ux + beta)/(1-q)) psi = 0
//! ```
//!
//! with `beta = u^2 - (q-1)`, its Frobenius analysis at the regular singular
//! point `x = 0`, outward integration by two independent stepper families,
//! and square-integrability diagnostics. Everything here is plain binary64;
//! no similarity inverse is involved.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("q = 1 is excluded: the construction divides by q - 1")]
    UnitDeformation,
    #[error("coefficients have a pole at x = 0; use the series seed instead")]
    PoleAtOrigin,
    #[error("series abscissa |x| = {x} outside the guard 0 < |x| <= 0.2")]
    SeriesGuard { x: f64 },
    #[error("series order {order} below the minimum of 8")]
    OrderTooSmall { order: usize },
    #[error("exponent difference {difference} is a nonnegative integer; the subdominant branch may need a logarithmic term")]
    BranchDegenerate { difference: f64 },
    #[error("negative abscissa {x} not representable on the exponent-{exponent} branch")]
    NegativeAbscissa { x: f64, exponent: f64 },
    #[error("step size collapsed near x = {x}")]
    StepSizeCollapse { x: f64 },
    #[error("integration state became non-finite near x = {x}")]
    NonFiniteState { x: f64 },
    #[error("integration range [{x0}, {x_end}] is empty or reversed")]
    BadRange { x0: f64, x_end: f64 },
}

/// Problem record: deformation `q != 1`, shift `u`, and the derived
/// constant `beta = u^2 - (q-1)`. The multiplication function is fixed to
/// the identity map, the one worked choice that keeps the origin a regular
/// singular point with a first-order pole in the damping coefficient only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeProblem {
    pub q: f64,
    pub u: f64,
    pub beta: f64,
}

impl OdeProblem {
    pub fn new(q: f64, u: f64) -> Result<Self, OdeError> {
        if q == 1.0 || !q.is_finite() || !u.is_finite() {
            return Err(OdeError::UnitDeformation);
        }
        Ok(Self {
            q,
            u,
            beta: u * u - (q - 1.0),
        })
    }

    /// Constant coefficient of the first-order pole: `x phi1(x) = 2q/(q-1)`.
    pub fn pole_strength(&self) -> f64 {
        2.0 * self.q / (self.q - 1.0)
    }
}

/// Coefficient pair `(phi1, phi2)` at `x != 0`.
pub fn ode_coefficients(x: f64, problem: &OdeProblem) -> Result<(f64, f64), OdeError> {
    if x == 0.0 {
        return Err(OdeError::PoleAtOrigin);
    }
    let phi1 = problem.pole_strength() / x;
    let phi2 = -x * x + (2.0 * problem.u * x + problem.beta) / (1.0 - problem.q);
    Ok((phi1, phi2))
}

/// Frobenius exponents at the origin: `r1 = 0` and `r2 = -(q+1)/(q-1)`.
pub fn indicial_exponents(q: f64) -> Result<(f64, f64), OdeError> {
    if q == 1.0 || !q.is_finite() {
        return Err(OdeError::UnitDeformation);
    }
    Ok((0.0, -(q + 1.0) / (q - 1.0)))
}

/// Which Frobenius exponent seeds the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Exponent 0; analytic at the origin.
    R0,
    /// Exponent `-(q+1)/(q-1)`.
    R1,
}

impl Branch {
    pub fn exponent(&self, q: f64) -> Result<f64, OdeError> {
        let (r0, r1) = indicial_exponents(q)?;
        Ok(match self {
            Branch::R0 => r0,
            Branch::R1 => r1,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Branch::R0 => "frobenius_r0",
            Branch::R1 => "frobenius_r1",
        }
    }
}

/// Detects the classical degeneracy: when the exponents differ by a
/// (nearly) nonnegative integer, the series on the smaller exponent may
/// need a logarithmic term and is reported rather than silently built.
fn degeneracy(q: f64, branch: Branch) -> Result<(), OdeError> {
    let (r0, r1) = indicial_exponents(q)?;
    let (big, small) = if r0 >= r1 { (r0, r1) } else { (r1, r0) };
    let difference = big - small;
    let wanted = branch.exponent(q)?;
    let integer_gap = (difference - difference.round()).abs() < 1e-9 && difference.round() >= 0.0;
    if integer_gap && wanted == small {
        return Err(OdeError::BranchDegenerate { difference });
    }
    Ok(())
}

/// Truncated Frobenius series `x^r sum c_k x^k` with its derivative.
#[derive(Debug, Clone)]
pub struct FrobeniusSeries {
    pub exponent: f64,
    pub coeffs: Vec<f64>,
}

impl FrobeniusSeries {
    /// Build the series from the standard recursion
    /// `c_k F(r+k) = -(c0 c_{k-2} + c1 c_{k-3} - c_{k-4})` with
    /// `F(s) = s(s - 1 + p0)` and `c_0 = 1`.
    pub fn build(problem: &OdeProblem, branch: Branch, order: usize) -> Result<Self, OdeError> {
        if order < 8 {
            return Err(OdeError::OrderTooSmall { order });
        }
        degeneracy(problem.q, branch)?;
        let r = branch.exponent(problem.q)?;
        let p0 = problem.pole_strength();
        let b2 = problem.beta / (1.0 - problem.q);
        let b3 = 2.0 * problem.u / (1.0 - problem.q);

        let mut coeffs = vec![0.0f64; order + 1];
        coeffs[0] = 1.0;
        for k in 1..=order {
            let mut rhs = 0.0;
            if k >= 2 {
                rhs += b2 * coeffs[k - 2];
            }
            if k >= 3 {
                rhs += b3 * coeffs[k - 3];
            }
            if k >= 4 {
                rhs -= coeffs[k - 4];
            }
            let s = r + k as f64;
            let indicial = s * (s - 1.0 + p0);
            if indicial.abs() < 1e-10 * (1.0 + s * s) {
                return Err(OdeError::BranchDegenerate {
                    difference: k as f64,
                });
            }
            coeffs[k] = -rhs / indicial;
        }
        Ok(Self { exponent: r, coeffs })
    }

    /// Value and first derivative at `x`. Negative abscissae are valid only
    /// on integer-exponent branches.
    pub fn eval(&self, x: f64) -> Result<(f64, f64), OdeError> {
        if x == 0.0 {
            // Limit exists only for r = 0; handled explicitly.
            if self.exponent == 0.0 {
                let dv = if self.coeffs.len() > 1 { self.coeffs[1] } else { 0.0 };
                return Ok((self.coeffs[0], dv));
            }
            return Err(OdeError::PoleAtOrigin);
        }
        if x < 0.0 && self.exponent.fract() != 0.0 {
            return Err(OdeError::NegativeAbscissa {
                x,
                exponent: self.exponent,
            });
        }
        let mut poly = 0.0;
        let mut dpoly = 0.0;
        for (k, ck) in self.coeffs.iter().enumerate().rev() {
            poly = poly * x + ck;
            dpoly = dpoly * x + (self.exponent + k as f64) * ck;
        }
        let lead = if x < 0.0 {
            // Integer exponent; powi keeps the sign exact.
            x.powi(self.exponent as i32)
        } else {
            x.powf(self.exponent)
        };
        Ok((lead * poly, lead / x * dpoly))
    }

    /// Second derivative, used by the series-residual diagnostics.
    pub fn eval_second(&self, x: f64) -> Result<f64, OdeError> {
        if x == 0.0 {
            return Err(OdeError::PoleAtOrigin);
        }
        let mut acc = 0.0;
        for (k, ck) in self.coeffs.iter().enumerate().rev() {
            let s = self.exponent + k as f64;
            acc = acc * x + s * (s - 1.0) * ck;
        }
        let lead = x.powf(self.exponent);
        Ok(lead / (x * x) * acc)
    }
}

/// Series evaluation with the operating guards: `0 < |x| <= 0.2`,
/// `order >= 8`. Returns `(psi, psi')` for integrator seeding.
pub fn frobenius_series(
    problem: &OdeProblem,
    branch: Branch,
    order: usize,
    x: f64,
) -> Result<(f64, f64), OdeError> {
    if x == 0.0 || x.abs() > 0.2 {
        return Err(OdeError::SeriesGuard { x });
    }
    FrobeniusSeries::build(problem, branch, order)?.eval(x)
}

/// Stepper family for the outward integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Integrator {
    /// Adaptive embedded Runge-Kutta 5(4).
    DormandPrince54,
    /// Classical fixed-step fourth-order Runge-Kutta.
    ClassicRk4,
}

/// How a solution behaves under the dominant `psi'' ~ x^2 psi` envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthClass {
    Decaying,
    Growing,
}

/// Sampled outward solution with growth diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct OdeSolution {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub branch: Branch,
    pub growth_class: GrowthClass,
    /// Fitted slope of `log|psi|` against `x^2/2` over the trailing window;
    /// near +1 for growing and -1 for decaying solutions.
    pub envelope_slope: f64,
    /// Partial mass `(L, integral of psi^2 over [x0, L])` at geometric
    /// checkpoints.
    pub l2_partial: Vec<(f64, f64)>,
}

/// Default seed abscissa and series order for outward integration.
pub const DEFAULT_SEED_X: f64 = 0.05;
pub const DEFAULT_SEED_ORDER: usize = 24;

fn rhs(problem: &OdeProblem, x: f64, psi: f64, dpsi: f64) -> (f64, f64) {
    let phi1 = problem.pole_strength() / x;
    let phi2 = -x * x + (2.0 * problem.u * x + problem.beta) / (1.0 - problem.q);
    (dpsi, -phi1 * dpsi - phi2 * psi)
}

/// Integrate outward from the series seed to `x_end` with the default
/// integrator and seed settings.
pub fn integrate_psi(
    problem: &OdeProblem,
    branch: Branch,
    x_end: f64,
) -> Result<OdeSolution, OdeError> {
    let seed = FrobeniusSeries::build(problem, branch, DEFAULT_SEED_ORDER)?;
    let (v, dv) = seed.eval(DEFAULT_SEED_X)?;
    integrate_from(
        problem,
        branch,
        DEFAULT_SEED_X,
        (v, dv),
        x_end,
        Integrator::DormandPrince54,
    )
}

/// Integrate outward from an explicit seed state.
pub fn integrate_from(
    problem: &OdeProblem,
    branch: Branch,
    x0: f64,
    state: (f64, f64),
    x_end: f64,
    method: Integrator,
) -> Result<OdeSolution, OdeError> {
    if !(x_end > x0 && x0 > 0.0) {
        return Err(OdeError::BadRange { x0, x_end });
    }
    let mut grid = vec![x0];
    let mut values = vec![state.0];
    let mut derivatives = vec![state.1];

    match method {
        Integrator::DormandPrince54 => {
            dopri_steps(problem, x0, state, x_end, &mut grid, &mut values, &mut derivatives)?
        }
        Integrator::ClassicRk4 => {
            rk4_steps(problem, x0, state, x_end, &mut grid, &mut values, &mut derivatives)?
        }
    }

    let (growth_class, envelope_slope) = classify_growth(&grid, &values, x0, x_end);
    let l2_partial = partial_mass(&grid, &values, x0, x_end);

    Ok(OdeSolution {
        grid,
        values,
        derivatives,
        branch,
        growth_class,
        envelope_slope,
        l2_partial,
    })
}

const DOPRI_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DOPRI_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DOPRI_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_SAMPLE_STEP: f64 = 0.02;

fn dopri_steps(
    problem: &OdeProblem,
    x0: f64,
    state: (f64, f64),
    x_end: f64,
    grid: &mut Vec<f64>,
    values: &mut Vec<f64>,
    derivatives: &mut Vec<f64>,
) -> Result<(), OdeError> {
    let (atol, rtol) = (1e-12, 1e-11);
    let mut x = x0;
    let mut y = [state.0, state.1];
    let mut h: f64 = 1e-4;
    while x < x_end {
        h = h.min(MAX_SAMPLE_STEP).min(x_end - x);
        if h < 1e-13 {
            return Err(OdeError::StepSizeCollapse { x });
        }
        let mut k = [[0.0f64; 2]; 7];
        let (f0, f1) = rhs(problem, x, y[0], y[1]);
        k[0] = [f0, f1];
        for stage in 0..6 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                ys[0] += h * DOPRI_A[stage][j] * kj[0];
                ys[1] += h * DOPRI_A[stage][j] * kj[1];
            }
            let (f0, f1) = rhs(problem, x + DOPRI_C[stage] * h, ys[0], ys[1]);
            k[stage + 1] = [f0, f1];
        }
        // Fifth-order solution: the last A row doubles as the b vector.
        let mut y5 = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            y5[0] += h * DOPRI_A[5][j] * kj[0];
            y5[1] += h * DOPRI_A[5][j] * kj[1];
        }
        let mut y4 = y;
        for (j, kj) in k.iter().enumerate() {
            y4[0] += h * DOPRI_B4[j] * kj[0];
            y4[1] += h * DOPRI_B4[j] * kj[1];
        }
        if !(y5[0].is_finite() && y5[1].is_finite()) {
            return Err(OdeError::NonFiniteState { x });
        }
        let err = {
            let e0 = (y5[0] - y4[0]).abs() / (atol + rtol * y5[0].abs().max(y[0].abs()));
            let e1 = (y5[1] - y4[1]).abs() / (atol + rtol * y5[1].abs().max(y[1].abs()));
            e0.max(e1).max(1e-30)
        };
        if err <= 1.0 {
            x += h;
            y = y5;
            grid.push(x);
            values.push(y[0]);
            derivatives.push(y[1]);
        }
        h *= (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
    }
    Ok(())
}

fn rk4_steps(
    problem: &OdeProblem,
    x0: f64,
    state: (f64, f64),
    x_end: f64,
    grid: &mut Vec<f64>,
    values: &mut Vec<f64>,
    derivatives: &mut Vec<f64>,
) -> Result<(), OdeError> {
    let span = x_end - x0;
    let steps = (span / 2e-4).ceil() as usize;
    let h = span / steps as f64;
    let mut x = x0;
    let mut y = [state.0, state.1];
    let record_every = (MAX_SAMPLE_STEP / h).floor().max(1.0) as usize;
    for i in 1..=steps {
        let (k10, k11) = rhs(problem, x, y[0], y[1]);
        let (k20, k21) = rhs(problem, x + h / 2.0, y[0] + h / 2.0 * k10, y[1] + h / 2.0 * k11);
        let (k30, k31) = rhs(problem, x + h / 2.0, y[0] + h / 2.0 * k20, y[1] + h / 2.0 * k21);
        let (k40, k41) = rhs(problem, x + h, y[0] + h * k30, y[1] + h * k31);
        y[0] += h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40);
        y[1] += h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41);
        x = x0 + i as f64 * h;
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(OdeError::NonFiniteState { x });
        }
        if i % record_every == 0 || i == steps {
            grid.push(x);
            values.push(y[0]);
            derivatives.push(y[1]);
        }
    }
    Ok(())
}

/// Least-squares slope of `log|psi|` against `x^2/2` over the trailing
/// window; the dominant balance `psi'' ~ x^2 psi` makes it approach +1 or
/// -1 depending on the selected envelope.
fn classify_growth(grid: &[f64], values: &[f64], x0: f64, x_end: f64) -> (GrowthClass, f64) {
    let lo = (x_end - 1.0).max(0.5 * (x0 + x_end));
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (x, v) in grid.iter().zip(values) {
        if *x >= lo && v.abs() > 1e-280 {
            pts.push((x * x / 2.0, v.abs().ln()));
        }
    }
    if pts.len() < 4 {
        return (GrowthClass::Growing, f64::NAN);
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let class = if slope > 0.0 {
        GrowthClass::Growing
    } else {
        GrowthClass::Decaying
    };
    (class, slope)
}

fn partial_mass(grid: &[f64], values: &[f64], x0: f64, x_end: f64) -> Vec<(f64, f64)> {
    let mut checkpoints = Vec::new();
    let mut mark = x0 * std::f64::consts::SQRT_2;
    while mark < x_end {
        checkpoints.push(mark);
        mark *= std::f64::consts::SQRT_2;
    }
    checkpoints.push(x_end);

    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = 0.0;
    let mut next = 0usize;
    for i in 1..grid.len() {
        let dx = grid[i] - grid[i - 1];
        acc += 0.5 * dx * (values[i] * values[i] + values[i - 1] * values[i - 1]);
        while next < checkpoints.len() && grid[i] >= checkpoints[next] {
            out.push((grid[i], acc));
            next += 1;
        }
    }
    if out.is_empty() {
        out.push((*grid.last().unwrap(), acc));
    }
    out
}

/// Scan entry for one mixture angle.
#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub theta: f64,
    pub growth_class: GrowthClass,
    pub envelope_slope: f64,
    pub l2_partial: Vec<(f64, f64)>,
}

/// Mixture scan over seeds `cos(theta) psi_r0 + sin(theta) psi_r1`.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub entries: Vec<ScanEntry>,
    pub any_decaying: bool,
    /// Mixtures dropped because the subdominant branch is degenerate and
    /// cannot seed a plain power series.
    pub skipped_mixtures: usize,
}

/// Probe square integrability across branch mixtures, where both branches
/// are seedable. A report with no decaying entry is a valid outcome:
/// generic mixtures ride the growing envelope, and the scan cannot certify
/// existence claims either way.
pub fn square_integrability_scan(
    problem: &OdeProblem,
    thetas: &[f64],
    x_end: f64,
) -> Result<ScanReport, OdeError> {
    let r0 = FrobeniusSeries::build(problem, Branch::R0, DEFAULT_SEED_ORDER)?;
    let needs_r1 = thetas.iter().any(|t| t.sin().abs() > 1e-15);
    let r1 = if needs_r1 {
        match FrobeniusSeries::build(problem, Branch::R1, DEFAULT_SEED_ORDER) {
            Ok(series) => Some(series),
            Err(OdeError::BranchDegenerate { .. }) => None,
            Err(other) => return Err(other),
        }
    } else {
        None
    };

    let mut entries = Vec::with_capacity(thetas.len());
    let mut any_decaying = false;
    let mut skipped_mixtures = 0usize;
    for &theta in thetas {
        let mixing = theta.sin().abs() > 1e-15;
        if mixing && r1.is_none() {
            skipped_mixtures += 1;
            continue;
        }
        let (v0, d0) = r0.eval(DEFAULT_SEED_X)?;
        let (mut v, mut dv) = (theta.cos() * v0, theta.cos() * d0);
        if mixing {
            let (v1, d1) = r1.as_ref().unwrap().eval(DEFAULT_SEED_X)?;
            v += theta.sin() * v1;
            dv += theta.sin() * d1;
        }
        let sol = integrate_from(
            problem,
            Branch::R0,
            DEFAULT_SEED_X,
            (v, dv),
            x_end,
            Integrator::DormandPrince54,
        )?;
        if sol.growth_class == GrowthClass::Decaying {
            any_decaying = true;
        }
        entries.push(ScanEntry {
            theta,
            growth_class: sol.growth_class,
            envelope_slope: sol.envelope_slope,
            l2_partial: sol.l2_partial,
        });
    }
    Ok(ScanReport {
        entries,
        any_decaying,
        skipped_mixtures,
    })
}

/// Estimated pole order at `t = 0` of the zeroth-order coefficient after
/// the inversion `x = 1/t`, from a log-log slope on a shrinking sequence.
/// An order above 2 certifies that infinity is not a regular singular
/// point; here it comes out 6.
pub fn infinity_pole_order(problem: &OdeProblem) -> f64 {
    let g = |t: f64| {
        let x = 1.0 / t;
        let (_, phi2) = ode_coefficients(x, problem).expect("x != 0");
        phi2 / t.powi(4)
    };
    let mut slopes = Vec::new();
    for k in 3..7 {
        let t1 = 10f64.powi(-k);
        let t2 = 10f64.powi(-(k + 1));
        let s = -((g(t2).abs().ln() - g(t1).abs().ln()) / (t2.ln() - t1.ln()));
        slopes.push(s);
    }
    slopes.iter().sum::<f64>() / slopes.len() as f64
}
