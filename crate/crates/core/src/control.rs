//! Piecewise-constant control fields `H_c = u_x S_x + u_y S_y + u_z S_z`
//! (with `S_k = sum_j sigma^k_j`) added to `H_+`, and gradient ascent on the
//! final-time quantum Fisher information.

use crate::error::{Error, Result};
use crate::lindblad::{unvectorize, vectorize, DensityMatrix, LindbladSpec, TRACE_DRIFT_LIMIT};
use crate::metrology::{default_step, qfi_mixed, EIGEN_CUTOFF};
use crate::models::ModelSpec;
use crate::operators::{expm, site_operator, CMatrix, CVector, Operator, PauliAxis, C64, I, MAX_SITES};

/// Control amplitudes `(u_x, u_y, u_z)` on `M` equal intervals of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    horizon: f64,
    amplitudes: Vec<[f64; 3]>,
    amplitude_bound: f64,
}

impl ControlSchedule {
    /// `amplitude_bound = 0` means unbounded.
    pub fn new(horizon: f64, amplitudes: Vec<[f64; 3]>, amplitude_bound: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("control horizon must be positive, got {horizon}")));
        }
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput("control schedule needs at least one interval".into()));
        }
        if !(amplitude_bound >= 0.0) || !amplitude_bound.is_finite() {
            return Err(Error::InvalidInput(format!("amplitude bound must be >= 0, got {amplitude_bound}")));
        }
        for (k, u) in amplitudes.iter().enumerate() {
            if u.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidInput(format!("interval {k} has non-finite amplitudes")));
            }
            if amplitude_bound > 0.0 && u.iter().any(|a| a.abs() > amplitude_bound) {
                return Err(Error::InvalidInput(format!("interval {k} exceeds the amplitude bound {amplitude_bound}")));
            }
        }
        Ok(Self { horizon, amplitudes, amplitude_bound })
    }

    pub fn zeros(horizon: f64, n_intervals: usize, amplitude_bound: f64) -> Result<Self> {
        Self::new(horizon, vec![[0.0; 3]; n_intervals], amplitude_bound)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_intervals(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[[f64; 3]] {
        &self.amplitudes
    }

    pub fn amplitude_bound(&self) -> f64 {
        self.amplitude_bound
    }

    pub fn interval_length(&self) -> f64 {
        self.horizon / self.amplitudes.len() as f64
    }

    /// Each interval split into `factor` copies of itself.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let amplitudes = self.amplitudes.iter().flat_map(|u| std::iter::repeat_n(*u, factor)).collect();
        Self::new(self.horizon, amplitudes, self.amplitude_bound)
    }

    fn clamp(&self, value: f64) -> f64 {
        if self.amplitude_bound > 0.0 {
            value.clamp(-self.amplitude_bound, self.amplitude_bound)
        } else {
            value
        }
    }

    fn flat(&self) -> Vec<f64> {
        self.amplitudes.iter().flatten().copied().collect()
    }

    fn with_flat(&self, flat: &[f64]) -> Self {
        let amplitudes = flat.chunks(3).map(|c| [self.clamp(c[0]), self.clamp(c[1]), self.clamp(c[2])]).collect();
        Self { horizon: self.horizon, amplitudes, amplitude_bound: self.amplitude_bound }
    }
}

/// `u_x S_x + u_y S_y + u_z S_z` on `n_sites` spins.
pub fn control_hamiltonian(u: [f64; 3], n_sites: usize) -> Result<Operator> {
    if !(1..=MAX_SITES).contains(&n_sites) {
        return Err(Error::InvalidInput(format!("n_sites must be in 1..={MAX_SITES}, got {n_sites}")));
    }
    let dim = 1usize << n_sites;
    let mut m = CMatrix::zeros(dim, dim);
    for (axis, &amp) in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z].into_iter().zip(&u) {
        if amp == 0.0 {
            continue;
        }
        for j in 1..=n_sites {
            m += site_operator(axis, j, n_sites)?.matrix() * C64::new(amp, 0.0);
        }
    }
    Operator::new(m)
}

/// Superoperator of `-i [H, .]` on row-major `vec(rho)`.
fn commutator_superop(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let id = CMatrix::identity(n, n);
    (h.kronecker(&id) - id.kronecker(&h.transpose())) * (-I)
}

fn block_diag(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    out.view_mut((n, n), (n, n)).copy_from(m);
    out
}

/// Precomputed generators for the QFI objective at `theta` and `theta +- h`.
///
/// Each interval is propagated with the exact exponential of its Liouvillian,
/// so the objective is a smooth function of the amplitudes. Chain 0 carries
/// `rho(theta)`; chain 1 carries `(rho(theta + h) - rho(theta - h), rho(theta - h))`
/// under the block generator `[[L_+, L_+ - L_-], [0, L_-]]`, which keeps the
/// parameter difference free of cancellation.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    n_sites: usize,
    dim: usize,
    initial: [CVector; 2],
    generators: [CMatrix; 2],
    /// `-i [S_k, .]` for `k = x, y, z`, per chain.
    control_superops: [[CMatrix; 3]; 2],
    step: f64,
}

impl ControlProblem {
    /// Controls are held fixed while `param` is varied.
    pub fn new(spec: &ModelSpec, param: &str, rho0: &DensityMatrix) -> Result<Self> {
        let theta = spec.model.get(param)?;
        let dim = spec.model.dim();
        if rho0.dim() != dim {
            return Err(Error::Dimension { expected: dim, found: rho0.dim() });
        }
        let step = default_step(theta);
        let liouvillian = |value: f64| -> Result<CMatrix> {
            let model = spec.model.with_param(param, value)?;
            Ok(LindbladSpec::from_model(&model, spec.gamma_policy)?.liouvillian())
        };
        let (plus, minus) = (liouvillian(theta + step)?, liouvillian(theta - step)?);
        let d2 = dim * dim;
        let mut pair = CMatrix::zeros(2 * d2, 2 * d2);
        pair.view_mut((0, 0), (d2, d2)).copy_from(&plus);
        pair.view_mut((0, d2), (d2, d2)).copy_from(&(&plus - &minus));
        pair.view_mut((d2, d2), (d2, d2)).copy_from(&minus);
        let n_sites = spec.model.n_sites();
        let unit = |k: usize| -> Result<CMatrix> {
            let mut u = [0.0; 3];
            u[k] = 1.0;
            Ok(commutator_superop(control_hamiltonian(u, n_sites)?.matrix()))
        };
        let base_controls = [unit(0)?, unit(1)?, unit(2)?];
        let pair_controls = std::array::from_fn(|k| block_diag(&base_controls[k]));
        let rho0 = vectorize(rho0.matrix());
        let mut pair0 = CVector::zeros(2 * d2);
        pair0.rows_mut(d2, d2).copy_from(&rho0);
        Ok(Self {
            n_sites,
            dim,
            initial: [rho0, pair0],
            generators: [liouvillian(theta)?, pair],
            control_superops: [base_controls, pair_controls],
            step,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn propagator(&self, chain: usize, u: &[f64], extra: Option<&CMatrix>, dt: f64) -> CMatrix {
        let mut l = self.generators[chain].clone();
        for (k, &amp) in u.iter().enumerate() {
            if amp != 0.0 {
                l += &self.control_superops[chain][k] * C64::new(amp, 0.0);
            }
        }
        if let Some(extra) = extra {
            l += if chain == 0 { extra.clone() } else { block_diag(extra) };
        }
        expm(&(l * C64::new(dt, 0.0)))
    }

    fn final_states(&self, schedule: &ControlSchedule, extra: Option<&CMatrix>) -> [CVector; 2] {
        let dt = schedule.interval_length();
        std::array::from_fn(|c| {
            schedule.amplitudes().iter().fold(self.initial[c].clone(), |rho, u| self.propagator(c, u, extra, dt) * rho)
        })
    }

    fn qfi_from_finals(&self, finals: &[CVector; 2]) -> Result<f64> {
        let rho = unvectorize(&finals[0], self.dim, self.dim);
        let rho = DensityMatrix::new((&rho + rho.adjoint()) * C64::new(0.5, 0.0))?;
        let drift = (rho.trace() - 1.0).abs();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { drift, time: f64::NAN });
        }
        let d2 = self.dim * self.dim;
        let diff = finals[1].rows(0, d2).into_owned();
        let drho = unvectorize(&(diff * C64::new(0.5 / self.step, 0.0)), self.dim, self.dim);
        let drho = (&drho + drho.adjoint()) * C64::new(0.5, 0.0);
        qfi_mixed(&rho, &drho, EIGEN_CUTOFF)
    }

    /// QFI of `rho(T)` with respect to the estimated parameter.
    pub fn objective(&self, schedule: &ControlSchedule) -> Result<f64> {
        self.qfi_from_finals(&self.final_states(schedule, None))
    }

    /// Objective with a constant extra Hamiltonian added on every interval.
    pub fn objective_with_offset(&self, schedule: &ControlSchedule, offset: &Operator) -> Result<f64> {
        if offset.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: offset.dim() });
        }
        let extra = commutator_superop(offset.matrix());
        self.qfi_from_finals(&self.final_states(schedule, Some(&extra)))
    }

    /// Central-difference gradient in every amplitude with step `delta`.
    ///
    /// Perturbing interval `k` only changes its own propagator, so each
    /// component costs `S_k P_k(u +- delta) a_k` with cached prefix states
    /// `a_k` and suffix maps `S_k`.
    pub fn gradient(&self, schedule: &ControlSchedule, delta: f64) -> Result<Vec<f64>> {
        self.fd_gradient(schedule, delta, true)
    }

    /// Forward-difference gradient, used as an independent check.
    pub fn forward_gradient(&self, schedule: &ControlSchedule, delta: f64) -> Result<Vec<f64>> {
        self.fd_gradient(schedule, delta, false)
    }

    fn fd_gradient(&self, schedule: &ControlSchedule, delta: f64, central: bool) -> Result<Vec<f64>> {
        let m = schedule.n_intervals();
        let dt = schedule.interval_length();
        let amps = schedule.amplitudes();
        let mut prefix: Vec<Vec<CVector>> = Vec::with_capacity(2);
        let mut suffix: Vec<Vec<CMatrix>> = Vec::with_capacity(2);
        for c in 0..2 {
            let props: Vec<CMatrix> = amps.iter().map(|u| self.propagator(c, u, None, dt)).collect();
            let size = self.initial[c].len();
            let mut a = Vec::with_capacity(m);
            let mut rho = self.initial[c].clone();
            for p in &props {
                a.push(rho.clone());
                rho = p * rho;
            }
            let mut s = vec![CMatrix::identity(size, size); m];
            for k in (0..m.saturating_sub(1)).rev() {
                s[k] = &s[k + 1] * &props[k + 1];
            }
            prefix.push(a);
            suffix.push(s);
        }
        let base = if central { 0.0 } else { self.objective(schedule)? };
        let final_with = |k: usize, u: &[f64]| -> [CVector; 2] {
            std::array::from_fn(|c| &suffix[c][k] * (self.propagator(c, u, None, dt) * &prefix[c][k]))
        };
        let mut grad = Vec::with_capacity(3 * m);
        for (k, u) in amps.iter().enumerate() {
            for c in 0..3 {
                let mut up = *u;
                up[c] += delta;
                let f_plus = self.qfi_from_finals(&final_with(k, &up))?;
                if central {
                    let mut down = *u;
                    down[c] -= delta;
                    let f_minus = self.qfi_from_finals(&final_with(k, &down))?;
                    grad.push((f_plus - f_minus) / (2.0 * delta));
                } else {
                    grad.push((f_plus - base) / delta);
                }
            }
        }
        Ok(grad)
    }
}

/// QFI at the horizon of `schedule`, starting from `rho0`.
pub fn objective_qfi(spec: &ModelSpec, schedule: &ControlSchedule, param: &str, rho0: &DensityMatrix) -> Result<f64> {
    ControlProblem::new(spec, param, rho0)?.objective(schedule)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub max_iter: usize,
    /// Amplitude step of the central-difference gradient.
    pub grad_step: f64,
    /// Initial ascent rate; halved on rejection, grown on acceptance.
    pub learning_rate: f64,
    /// Stop once an accepted step changes the objective by less than this.
    pub ftol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { max_iter: 200, grad_step: 1e-4, learning_rate: 1.0, ftol: 1e-10 }
    }
}

/// Gradients with every component below this count as stationary.
pub const GRADIENT_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 60;
const RATE_GROWTH: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub iterations: usize,
    /// Objective before the first step and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub final_schedule: ControlSchedule,
    pub converged: bool,
    /// Set when an objective evaluation failed and the run was cut short.
    pub failure: Option<Error>,
}

impl OptimizationReport {
    pub fn initial_objective(&self) -> f64 {
        self.objective_trace[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// Gradient ascent with backtracking on the final-time QFI.
///
/// Fails outright only if the starting schedule cannot be evaluated; later
/// failures end the run and are recorded in the report.
pub fn optimize_controls(
    spec: &ModelSpec,
    schedule0: &ControlSchedule,
    param: &str,
    rho0: &DensityMatrix,
    opts: &OptimizeOptions,
) -> Result<OptimizationReport> {
    if !(opts.grad_step > 0.0) || !(opts.learning_rate > 0.0) || !(opts.ftol >= 0.0) {
        return Err(Error::InvalidInput("grad_step and learning_rate must be positive, ftol non-negative".into()));
    }
    let problem = ControlProblem::new(spec, param, rho0)?;
    let mut schedule = schedule0.clone();
    let mut value = problem.objective(&schedule)?;
    let mut report = OptimizationReport {
        iterations: 0,
        objective_trace: vec![value],
        final_schedule: schedule.clone(),
        converged: false,
        failure: None,
    };
    let mut rate = opts.learning_rate;
    while report.iterations < opts.max_iter {
        report.iterations += 1;
        let grad = match problem.gradient(&schedule, opts.grad_step) {
            Ok(g) => g,
            Err(e) => {
                report.failure = Some(e);
                break;
            }
        };
        if grad.iter().all(|g| g.abs() < GRADIENT_TOL) {
            report.converged = true;
            break;
        }
        let x = schedule.flat();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + rate * g).collect();
            let candidate = schedule.with_flat(&trial);
            match problem.objective(&candidate) {
                Ok(f) if f >= value => {
                    accepted = Some((candidate, f));
                    break;
                }
                Ok(_) | Err(_) => rate *= 0.5,
            }
        }
        let Some((candidate, f)) = accepted else {
            // no ascent direction at any resolvable step length
            report.converged = true;
            break;
        };
        let delta = f - value;
        schedule = candidate;
        value = f;
        report.objective_trace.push(value);
        report.final_schedule = schedule.clone();
        rate *= RATE_GROWTH;
        if delta < opts.ftol {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}
