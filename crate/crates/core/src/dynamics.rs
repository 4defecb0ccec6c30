//! Time integration of `dρ/dt = 𝓛ρ` on the vectorized state.

use std::io::Write;

use crate::algebra::{axpy, devectorize, norm, ComplexMatrix, Operator, SparseOperator, VectorizedState, C64};
use crate::error::{Error, Result};
use crate::lindblad::Superoperator;
use crate::state::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepper {
    /// Dormand–Prince 5(4) with step-size control.
    Adaptive,
    /// Classical Runge–Kutta with a fixed step.
    FixedRk4 { dt: f64 },
}

#[derive(Clone, Debug)]
pub struct IntegrationControls {
    pub stepper: Stepper,
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen from the generator norm when `None`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Times at which states are recorded; `t_final` is always recorded.
    pub sample_times: Vec<f64>,
    /// Rescale to unit trace after every step.
    pub renormalize: bool,
    /// Named operators whose expectation values are recorded.
    pub observables: Vec<(String, ComplexMatrix)>,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        Self {
            stepper: Stepper::Adaptive,
            rtol: 1e-8,
            atol: 1e-10,
            initial_step: None,
            max_steps: 5_000_000,
            sample_times: Vec::new(),
            renormalize: false,
            observables: Vec::new(),
        }
    }
}

impl IntegrationControls {
    pub fn sampled(times: Vec<f64>) -> Self {
        Self { sample_times: times, ..Self::default() }
    }

    pub fn with_observable(mut self, name: impl Into<String>, op: ComplexMatrix) -> Self {
        self.observables.push((name.into(), op));
        self
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// `(name, Re tr(O ρ(t)))` per recorded time.
    pub observables: Vec<(String, Vec<f64>)>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    /// CSV with a `time` column followed by one column per observable.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.observables.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.12e}")];
            row.extend(self.observables.iter().map(|(_, v)| format!("{:.12e}", v[k])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Matrix–vector products with a sparse copy when that is cheaper.
struct Rhs {
    op: Operator,
}

impl Rhs {
    fn new(sop: &Superoperator) -> Self {
        let op = match sop.matrix() {
            Operator::Dense(m) if m.rows() > 64 => {
                let s = SparseOperator::from_dense(m);
                if s.nnz() * 4 < m.rows() * m.cols() {
                    Operator::Sparse(s)
                } else {
                    Operator::Dense(m.clone())
                }
            }
            other => other.clone(),
        };
        Self { op }
    }

    fn eval(&self, x: &[C64], y: &mut [C64]) {
        self.op.mul_vec_into(x, y)
    }
}

fn to_state(y: &[C64]) -> Result<DensityMatrix> {
    let m = devectorize(&VectorizedState::new(y.to_vec()))?;
    Ok(DensityMatrix::from_trusted(m))
}

fn renormalize(y: &mut [C64], d: usize) {
    let tr: C64 = (0..d).map(|i| y[i * d + i]).sum();
    if tr.norm() > 0.0 {
        for z in y.iter_mut() {
            *z /= tr;
        }
    }
}

// Dormand–Prince tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Stepping state shared by [`integrate`] and [`converge_to_steady`].
struct Integrator<'a> {
    rhs: Rhs,
    controls: &'a IntegrationControls,
    d: usize,
    t: f64,
    y: Vec<C64>,
    /// `𝓛 y` at the current point.
    f: Vec<C64>,
    h: f64,
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    steps: usize,
    rejected: usize,
}

impl<'a> Integrator<'a> {
    fn new(sop: &Superoperator, rho0: &DensityMatrix, controls: &'a IntegrationControls) -> Result<Self> {
        if rho0.dim() != sop.hilbert_dim() {
            return Err(Error::Dimension(format!(
                "initial state has dimension {}, Liouvillian acts on {}",
                rho0.dim(),
                sop.hilbert_dim()
            )));
        }
        if !(controls.rtol > 0.0 && controls.atol >= 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        let rhs = Rhs::new(sop);
        let y = rho0.vectorized().into_vec();
        let n = y.len();
        let mut f = vec![C64::new(0.0, 0.0); n];
        rhs.eval(&y, &mut f);
        let scale = sop.matrix().frobenius_norm().max(1e-300);
        let h = match controls.stepper {
            Stepper::FixedRk4 { dt } => {
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("fixed step must be positive, got {dt}")));
                }
                dt
            }
            Stepper::Adaptive => controls.initial_step.unwrap_or(0.01 / scale),
        };
        Ok(Self {
            rhs,
            controls,
            d: sop.hilbert_dim(),
            t: 0.0,
            y,
            f,
            h,
            k: vec![vec![C64::new(0.0, 0.0); n]; 7],
            tmp: vec![C64::new(0.0, 0.0); n],
            steps: 0,
            rejected: 0,
        })
    }

    fn residual(&self) -> f64 {
        norm(&self.f)
    }

    /// Advances to at most `t_stop`.
    fn step(&mut self, t_stop: f64) -> Result<()> {
        if self.steps >= self.controls.max_steps {
            return Err(Error::Integration { time: self.t, reason: "maximum number of steps reached".into() });
        }
        match self.controls.stepper {
            Stepper::FixedRk4 { dt } => self.rk4((t_stop - self.t).min(dt)),
            Stepper::Adaptive => self.dopri(t_stop)?,
        }
        self.steps += 1;
        if self.controls.renormalize {
            renormalize(&mut self.y, self.d);
            self.rhs.eval(&self.y, &mut self.f);
        }
        Ok(())
    }

    fn rk4(&mut self, h: f64) {
        let hc = C64::new(h, 0.0);
        let half = C64::new(h / 2.0, 0.0);
        let [k1, k2, k3, k4] = [0, 1, 2, 3];
        self.k[k1].copy_from_slice(&self.f);
        for (stage, coeff) in [(k2, half), (k3, half), (k4, hc)] {
            self.tmp.copy_from_slice(&self.y);
            let (done, rest) = self.k.split_at_mut(stage);
            axpy(coeff, &done[stage - 1], &mut self.tmp);
            self.rhs.eval(&self.tmp, &mut rest[0]);
        }
        for i in 0..self.y.len() {
            self.y[i] += hc / 6.0 * (self.k[k1][i] + 2.0 * self.k[k2][i] + 2.0 * self.k[k3][i] + self.k[k4][i]);
        }
        self.t += h;
        self.rhs.eval(&self.y, &mut self.f);
    }

    fn dopri(&mut self, t_stop: f64) -> Result<()> {
        let n = self.y.len();
        loop {
            let remaining = t_stop - self.t;
            let h = self.h.min(remaining);
            let h_min = 1e-14 * self.t.abs().max(1.0);
            if h < h_min && h < remaining {
                return Err(Error::Integration {
                    time: self.t,
                    reason: format!("step size {h:.3e} underflowed"),
                });
            }
            self.k[0].copy_from_slice(&self.f);
            for s in 1..7 {
                self.tmp.copy_from_slice(&self.y);
                for j in 0..s {
                    if A[s][j] != 0.0 {
                        let coeff = C64::new(h * A[s][j], 0.0);
                        for i in 0..n {
                            self.tmp[i] += coeff * self.k[j][i];
                        }
                    }
                }
                self.rhs.eval(&self.tmp, &mut self.k[s]);
            }
            // tmp holds the fifth-order solution (stage 7 evaluation point)
            let mut err = 0.0;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    if E[s] != 0.0 {
                        e += self.k[s][i] * E[s];
                    }
                }
                err += (e * h).norm_sqr();
            }
            let err = err.sqrt();
            let scale = self.controls.atol + self.controls.rtol * norm(&self.y).max(norm(&self.tmp));
            let ratio = err / scale;
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if ratio <= 1.0 {
                self.t = if h == remaining { t_stop } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.tmp);
                self.f.copy_from_slice(&self.k[6]);
                // keep the controller's proposal even when the step was clipped
                if h == self.h {
                    self.h = h * factor;
                }
                return Ok(());
            }
            self.rejected += 1;
            self.h = h * factor.min(1.0);
        }
    }

    fn record(&self, traj: &mut Trajectory) -> Result<()> {
        let state = to_state(&self.y)?;
        for (k, (_, op)) in self.controls.observables.iter().enumerate() {
            traj.observables[k].1.push(state.expectation(op).re);
        }
        traj.times.push(self.t);
        traj.states.push(state);
        Ok(())
    }
}

/// Integrates from `t = 0` to `t_final`, recording the initial state, every
/// requested sample time in `(0, t_final)` and the final state.
pub fn integrate(
    sop: &Superoperator,
    rho0: &DensityMatrix,
    t_final: f64,
    controls: &IntegrationControls,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Config(format!("final time must be positive, got {t_final}")));
    }
    let mut it = Integrator::new(sop, rho0, controls)?;
    let mut stops: Vec<f64> = controls.sample_times.iter().copied().filter(|&t| t > 0.0 && t < t_final).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_final);

    for op in controls.observables.iter().map(|(_, o)| o) {
        if op.rows() != sop.hilbert_dim() || op.cols() != sop.hilbert_dim() {
            return Err(Error::Dimension("observable does not match the Hilbert space".into()));
        }
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        observables: controls.observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
        steps: 0,
        rejected: 0,
    };
    it.record(&mut traj)?;
    for stop in stops {
        while it.t < stop {
            it.step(stop)?;
        }
        it.record(&mut traj)?;
    }
    traj.steps = it.steps;
    traj.rejected = it.rejected;
    Ok(traj)
}

#[derive(Clone, Debug)]
pub struct Convergence {
    pub state: DensityMatrix,
    /// Simulated time at which the criterion was met (or `t_max`).
    pub elapsed: f64,
    pub converged: bool,
    /// `‖𝓛 vec ρ‖₂` of the returned state.
    pub residual: f64,
    pub steps: usize,
}

/// Integrates until `‖𝓛 vec ρ‖₂ ≤ tol` or `t_max`. The integration
/// tolerances are tightened to `0.1 · tol / ‖𝓛‖_F` when the defaults are
/// looser than that.
pub fn converge_to_steady(sop: &Superoperator, rho0: &DensityMatrix, tol: f64, t_max: f64) -> Result<Convergence> {
    converge_to_steady_with(sop, rho0, tol, t_max, &IntegrationControls::default())
}

pub fn converge_to_steady_with(
    sop: &Superoperator,
    rho0: &DensityMatrix,
    tol: f64,
    t_max: f64,
    controls: &IntegrationControls,
) -> Result<Convergence> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::Config(format!("time limit must be positive, got {t_max}")));
    }
    // near the steady state the step size sits at the stability limit and
    // each step leaves a local error of order the tolerance in fast modes,
    // so ‖𝓛ρ‖ cannot drop below ‖𝓛‖ times the local tolerance
    let local = 0.1 * tol / sop.matrix().frobenius_norm().max(1e-300);
    let tightened =
        IntegrationControls { rtol: controls.rtol.min(local), atol: controls.atol.min(local), ..controls.clone() };
    let mut it = Integrator::new(sop, rho0, &tightened)?;
    while it.residual() > tol && it.t < t_max {
        it.step(t_max)?;
    }
    let converged = it.residual() <= tol;
    if !converged {
        log::warn!("no convergence by t = {t_max}: ‖𝓛ρ‖ = {:.3e} > {tol:.1e}", it.residual());
    }
    Ok(Convergence { state: to_state(&it.y)?, elapsed: it.t, converged, residual: it.residual(), steps: it.steps })
}

/// `max_t |tr(Q† ρ(t)) − tr(Q† ρ(0))|`
pub fn check_conserved(trajectory: &Trajectory, quantity: &ComplexMatrix) -> Result<f64> {
    let first = trajectory.states.first().ok_or_else(|| Error::Config("empty trajectory".into()))?;
    if quantity.rows() != first.dim() || quantity.cols() != first.dim() {
        return Err(Error::Dimension(format!(
            "quantity is {}x{}, states are {}x{}",
            quantity.rows(),
            quantity.cols(),
            first.dim(),
            first.dim()
        )));
    }
    let value = |s: &DensityMatrix| quantity.inner(s.matrix());
    let v0 = value(first);
    Ok(trajectory.states.iter().map(|s| (value(s) - v0).norm()).fold(0.0, f64::max))
}
