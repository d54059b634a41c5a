//! Fisher-Rao metrics and Fisher information.
//!
//! Conventions: pure-state metrics are reported as `g`; mixed-state series
//! report the quantum Fisher information `F` (for pure states `F = 4 g`).

use crate::dynamics::{biorthogonal_renormalize, evolve_pair, LeftStateVector, StateVector, Stepping, TimeGrid};
use crate::error::{Error, Result};
use crate::lindblad::{integrate_master_difference, integrate_master_with, DensityMatrix, LindbladSpec};
use crate::models::ModelSpec;
use crate::operators::{
    check_hermitian, hermitian_eigen, min_hermitian_eigenvalue, norm_one, CMatrix, Operator, C64, ONE,
};

/// Named values of the estimation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    names: Vec<String>,
    values: Vec<f64>,
}

impl ParamPoint {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::InvalidInput(format!("{} parameter names but {} values", names.len(), values.len())));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidInput(format!("duplicate parameter name `{name}`")));
            }
        }
        Ok(Self { names, values })
    }

    pub fn single(name: &str, value: f64) -> Self {
        Self { names: vec![name.to_string()], values: vec![value] }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::UnknownParameter { name: name.to_string(), available: self.names.join(", ") })
    }

    /// Copy with `name` set to `value`.
    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter { name: name.to_string(), available: self.names.join(", ") })?;
        let mut out = self.clone();
        out.values[i] = value;
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    FrPure,
    FrBiorthogonal,
    QfiMixed,
    Cfi,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::FrPure => "fr_pure",
            MetricKind::FrBiorthogonal => "fr_biorthogonal",
            MetricKind::QfiMixed => "qfi_mixed",
            MetricKind::Cfi => "cfi",
        }
    }
}

/// Which dynamics [`metric_vs_time`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    SchrodingerBiorthogonal,
    Lindblad,
}

/// Lower bound on values of non-negative metric kinds.
pub const NEGATIVITY_TOL: f64 = 1e-9;

/// Time series of one metric diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: MetricKind,
    pub param: String,
}

impl MetricSeries {
    /// Checks lengths and finiteness. Every kind except `FrBiorthogonal` must
    /// also be non-negative up to [`NEGATIVITY_TOL`]; the biorthogonal form
    /// is not positive definite.
    pub fn new(times: Vec<f64>, values: Vec<f64>, kind: MetricKind, param: &str) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension { expected: times.len(), found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite metric value {v}")));
        }
        if kind != MetricKind::FrBiorthogonal {
            if let Some(v) = values.iter().find(|&&v| v < -NEGATIVITY_TOL) {
                return Err(Error::InvalidInput(format!("negative {} value {v:e}", kind.as_str())));
            }
        }
        Ok(Self { times, values, kind, param: param.to_string() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak(&self) -> f64 {
        self.values[self.argmax()]
    }
}

/// `g_ij = <d_i psi|d_j psi> - <psi|d_i psi><d_j psi|psi>` for a unit-norm `psi`.
pub fn fr_metric_pure(psi: &StateVector, dpsi_i: &StateVector, dpsi_j: &StateVector) -> Result<C64> {
    for d in [dpsi_i, dpsi_j] {
        if d.dim() != psi.dim() {
            return Err(Error::Dimension { expected: psi.dim(), found: d.dim() });
        }
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Normalization { what: "state norm", value: norm });
    }
    let (p, di, dj) = (psi.amplitudes(), dpsi_i.amplitudes(), dpsi_j.amplitudes());
    Ok(di.dotc(dj) - p.dotc(di) * dj.dotc(p))
}

/// `g_ij = <d_i psi~|d_j psi> - <d_i psi~|psi><psi~|d_j psi>` for a pair with
/// `<psi~|psi> = 1`.
pub fn fr_metric_biorthogonal(
    psi: &StateVector,
    psitilde: &LeftStateVector,
    dpsi_i: &StateVector,
    dpsitilde_i: &LeftStateVector,
    dpsi_j: &StateVector,
) -> Result<C64> {
    let dim = psi.dim();
    for d in [psitilde.dim(), dpsi_i.dim(), dpsitilde_i.dim(), dpsi_j.dim()] {
        if d != dim {
            return Err(Error::Dimension { expected: dim, found: d });
        }
    }
    let overlap = psitilde.overlap(psi);
    if (overlap - ONE).norm() > 1e-8 {
        return Err(Error::Normalization { what: "|<psi~|psi> - 1|", value: (overlap - ONE).norm() });
    }
    let (p, pt, dt_i, dj) = (psi.amplitudes(), psitilde.amplitudes(), dpsitilde_i.amplitudes(), dpsi_j.amplitudes());
    Ok(dt_i.dotc(dj) - dt_i.dotc(p) * pt.dotc(dj))
}

/// Default eigenvalue cutoff of [`qfi_mixed`].
pub const EIGEN_CUTOFF: f64 = 1e-12;

/// Symmetric-logarithmic-derivative QFI
/// `F = 2 sum_{l_i + l_j > cutoff} |<i|d rho|j>|^2 / (l_i + l_j)`.
pub fn qfi_mixed(rho: &DensityMatrix, drho: &CMatrix, eigen_cutoff: f64) -> Result<f64> {
    if drho.nrows() != rho.dim() || drho.ncols() != rho.dim() {
        return Err(Error::Dimension { expected: rho.dim(), found: drho.nrows() });
    }
    check_hermitian(drho, 1e-8)?;
    let (lambda, u) = hermitian_eigen(rho.matrix());
    let d = u.adjoint() * drho * &u;
    let mut f = 0.0;
    for i in 0..lambda.len() {
        for j in 0..lambda.len() {
            let denom = lambda[i] + lambda[j];
            if denom > eigen_cutoff {
                f += d[(i, j)].norm_sqr() / denom;
            }
        }
    }
    Ok(2.0 * f)
}

/// Projectors onto the computational basis.
pub fn computational_povm(dim: usize) -> Vec<Operator> {
    (0..dim)
        .map(|k| {
            let mut m = CMatrix::zeros(dim, dim);
            m[(k, k)] = ONE;
            Operator::from_matrix_unchecked(m)
        })
        .collect()
}

/// Outcome probabilities below this are dropped from [`cfi`].
pub const PROBABILITY_FLOOR: f64 = 1e-12;

fn validate_povm(povm: &[Operator], dim: usize) -> Result<()> {
    if povm.is_empty() {
        return Err(Error::InvalidPovm("no elements".into()));
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for (k, e) in povm.iter().enumerate() {
        if e.dim() != dim {
            return Err(Error::InvalidPovm(format!("element {k} has dimension {}, expected {dim}", e.dim())));
        }
        if check_hermitian(e.matrix(), 1e-8).is_err() {
            return Err(Error::InvalidPovm(format!("element {k} is not Hermitian")));
        }
        let min = min_hermitian_eigenvalue(e.matrix());
        if min < -1e-8 {
            return Err(Error::InvalidPovm(format!("element {k} has negative eigenvalue {min:e}")));
        }
        sum += e.matrix();
    }
    let deviation = norm_one(&(sum - CMatrix::identity(dim, dim)));
    if deviation > 1e-8 {
        return Err(Error::InvalidPovm(format!("elements sum to identity only within {deviation:e}")));
    }
    Ok(())
}

/// Classical Fisher information `sum_x (d p_x)^2 / p_x` of a measurement.
pub fn cfi(rho: &DensityMatrix, drho: &CMatrix, povm: &[Operator]) -> Result<f64> {
    validate_povm(povm, rho.dim())?;
    if drho.nrows() != rho.dim() || drho.ncols() != rho.dim() {
        return Err(Error::Dimension { expected: rho.dim(), found: drho.nrows() });
    }
    let mut f = 0.0;
    for e in povm {
        let p = (e.matrix() * rho.matrix()).trace().re;
        if p > PROBABILITY_FLOOR {
            let dp = (e.matrix() * drho).trace().re;
            f += dp * dp / p;
        }
    }
    Ok(f)
}

/// Quantities that can be differenced with respect to a parameter.
pub trait Differentiable: Sized {
    type Derivative;

    /// `(plus - minus) / (2 step)` after bringing both into the gauge of `base`.
    fn central_difference(plus: Self, minus: Self, base: &Self, step: f64) -> Result<Self::Derivative>;
}

fn inv_two_step(step: f64) -> C64 {
    C64::new(0.5 / step, 0.0)
}

impl Differentiable for StateVector {
    type Derivative = StateVector;

    fn central_difference(plus: Self, minus: Self, _base: &Self, step: f64) -> Result<StateVector> {
        let diff = plus.phase_aligned().into_vector() - minus.phase_aligned().into_vector();
        Ok(StateVector::from_vector(diff * inv_two_step(step)))
    }
}

impl Differentiable for LeftStateVector {
    type Derivative = LeftStateVector;

    fn central_difference(plus: Self, minus: Self, _base: &Self, step: f64) -> Result<LeftStateVector> {
        let diff = plus.phase_aligned().into_vector() - minus.phase_aligned().into_vector();
        Ok(LeftStateVector::from_vector(diff * inv_two_step(step)))
    }
}

/// Jointly renormalizes `<psi~|psi> = 1`, then multiplies both by the phase
/// that makes the first non-negligible component of `psi` real positive.
pub(crate) fn pair_gauge(psi: &StateVector, psitilde: &LeftStateVector) -> Result<(StateVector, LeftStateVector)> {
    let (psi, psitilde) = biorthogonal_renormalize(psi, psitilde)?;
    let aligned = psi.phase_aligned();
    let threshold = 1e-14 * psi.norm();
    let phase = psi
        .amplitudes()
        .iter()
        .zip(aligned.amplitudes().iter())
        .find(|(z, _)| z.norm() > threshold)
        .map(|(z, a)| a / z)
        .unwrap_or(ONE);
    Ok((aligned, psitilde.scaled(phase)))
}

impl Differentiable for (StateVector, LeftStateVector) {
    type Derivative = (StateVector, LeftStateVector);

    fn central_difference(plus: Self, minus: Self, _base: &Self, step: f64) -> Result<Self::Derivative> {
        let (rp, lp) = pair_gauge(&plus.0, &plus.1)?;
        let (rm, lm) = pair_gauge(&minus.0, &minus.1)?;
        let k = inv_two_step(step);
        Ok((
            StateVector::from_vector((rp.into_vector() - rm.into_vector()) * k),
            LeftStateVector::from_vector((lp.into_vector() - lm.into_vector()) * k),
        ))
    }
}

impl Differentiable for DensityMatrix {
    type Derivative = CMatrix;

    fn central_difference(plus: Self, minus: Self, _base: &Self, step: f64) -> Result<CMatrix> {
        Ok((plus.into_matrix() - minus.into_matrix()) * inv_two_step(step))
    }
}

impl Differentiable for CMatrix {
    type Derivative = CMatrix;

    fn central_difference(plus: Self, minus: Self, _base: &Self, step: f64) -> Result<CMatrix> {
        Ok((plus - minus) * inv_two_step(step))
    }
}

impl<T: Differentiable> Differentiable for Vec<T> {
    type Derivative = Vec<T::Derivative>;

    fn central_difference(plus: Self, minus: Self, base: &Self, step: f64) -> Result<Self::Derivative> {
        if plus.len() != minus.len() || plus.len() != base.len() {
            return Err(Error::Dimension { expected: base.len(), found: plus.len().min(minus.len()) });
        }
        plus.into_iter().zip(minus).zip(base).map(|((p, m), b)| T::central_difference(p, m, b, step)).collect()
    }
}

/// Finite-difference step `1e-5 max(1, |theta|)`.
pub fn default_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// Central difference of `evaluate` in the coordinate `param`.
pub fn param_derivative<T, F>(evaluate: F, point: &ParamPoint, param: &str, step: f64) -> Result<T::Derivative>
where
    T: Differentiable,
    F: Fn(&ParamPoint) -> Result<T>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {step}")));
    }
    let theta = point.get(param)?;
    let base = evaluate(point)?;
    let plus = evaluate(&point.with(param, theta + step)?)?;
    let minus = evaluate(&point.with(param, theta - step)?)?;
    T::central_difference(plus, minus, &base, step)
}

/// Tunables of [`metric_vs_time_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// Finite-difference step; `None` uses [`default_step`].
    pub fd_step: Option<f64>,
    pub eigen_cutoff: f64,
    /// RK4 substeps per grid interval. `Auto` is resolved once at the base
    /// point and reused for the shifted evaluations.
    pub stepping: Stepping,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { fd_step: None, eigen_cutoff: EIGEN_CUTOFF, stepping: Stepping::Auto }
    }
}

/// Allowed `|Im g|` (relative to `max(1, |g|)`) of the biorthogonal metric.
pub const IMAGINARY_TOL: f64 = 1e-8;

pub fn metric_vs_time(spec: &ModelSpec, kind: DynamicsKind, param: &str, grid: &TimeGrid) -> Result<MetricSeries> {
    metric_vs_time_with(spec, kind, param, grid, &MetricOptions::default())
}

/// Metric diagonal in `param` at every grid time.
///
/// Schrödinger runs evolve the pair `(psi, psi~)` from `psi~(0) = psi(0)` and
/// report the real part of the biorthogonal metric. Lindblad runs integrate the
/// master equation and report the QFI of the trace-one solution. The three
/// evaluations at `theta` and `theta +- h` share one integration step size.
pub fn metric_vs_time_with(
    spec: &ModelSpec,
    kind: DynamicsKind,
    param: &str,
    grid: &TimeGrid,
    opts: &MetricOptions,
) -> Result<MetricSeries> {
    let point = spec.model.param_point();
    let theta = point.get(param)?;
    let step = opts.fd_step.unwrap_or_else(|| default_step(theta));
    match kind {
        DynamicsKind::SchrodingerBiorthogonal => {
            let psi0 = spec.initial()?;
            let psi0t = LeftStateVector::from(&psi0);
            let h = spec.model.hamiltonian();
            let stepping = Stepping::Substeps(opts.stepping.substeps(grid.dt(), h.norm_one()));
            let evaluate = |p: &ParamPoint| -> Result<Vec<(StateVector, LeftStateVector)>> {
                let h = spec.model.with_point(p)?.hamiltonian();
                let res = evolve_pair(&h, &psi0, &psi0t, grid, stepping)?;
                Ok(res.right_states.into_iter().zip(res.left_states).collect())
            };
            let base = evaluate(&point)?;
            let derivs = param_derivative(evaluate, &point, param, step)?;
            let mut values = Vec::with_capacity(base.len());
            for ((psi, psit), (dpsi, dpsit)) in base.iter().zip(&derivs) {
                let (psi, psit) = pair_gauge(psi, psit)?;
                let g = fr_metric_biorthogonal(&psi, &psit, dpsi, dpsit, dpsi)?;
                if g.im.abs() > IMAGINARY_TOL * g.norm().max(1.0) {
                    return Err(Error::ImaginaryMetric { imag: g.im });
                }
                values.push(g.re);
            }
            MetricSeries::new(grid.times(), values, MetricKind::FrBiorthogonal, param)
        }
        DynamicsKind::Lindblad => {
            let (base, derivs) = lindblad_trajectory_derivative(spec, param, grid, step, opts.stepping)?;
            let values = base
                .iter()
                .zip(&derivs)
                .map(|(rho, drho)| qfi_mixed(rho, &hermitian_part(drho), opts.eigen_cutoff))
                .collect::<Result<Vec<_>>>()?;
            MetricSeries::new(grid.times(), values, MetricKind::QfiMixed, param)
        }
    }
}

/// Classical Fisher information of `povm` along the master-equation solution.
pub fn cfi_vs_time(spec: &ModelSpec, param: &str, grid: &TimeGrid, povm: &[Operator]) -> Result<MetricSeries> {
    cfi_vs_time_with(spec, param, grid, povm, &MetricOptions::default())
}

pub fn cfi_vs_time_with(
    spec: &ModelSpec,
    param: &str,
    grid: &TimeGrid,
    povm: &[Operator],
    opts: &MetricOptions,
) -> Result<MetricSeries> {
    let theta = spec.model.get(param)?;
    let step = opts.fd_step.unwrap_or_else(|| default_step(theta));
    let (base, derivs) = lindblad_trajectory_derivative(spec, param, grid, step, opts.stepping)?;
    let values = base.iter().zip(&derivs).map(|(rho, drho)| cfi(rho, drho, povm)).collect::<Result<Vec<_>>>()?;
    MetricSeries::new(grid.times(), values, MetricKind::Cfi, param)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Master-equation trajectory at the model point and its parameter derivative.
pub(crate) fn lindblad_trajectory_derivative(
    spec: &ModelSpec,
    param: &str,
    grid: &TimeGrid,
    step: f64,
    stepping: Stepping,
) -> Result<(Vec<DensityMatrix>, Vec<CMatrix>)> {
    let point = spec.model.param_point();
    let rho0 = DensityMatrix::pure(&spec.initial()?);
    let base_spec = LindbladSpec::from_model(&spec.model, spec.gamma_policy)?;
    let substeps = stepping.substeps(grid.dt(), base_spec.generator_norm());
    let theta = point.get(param)?;
    let at = |value: f64| LindbladSpec::from_model(&spec.model.with_param(param, value)?, spec.gamma_policy);
    let base = integrate_master_with(&base_spec, &rho0, grid, Stepping::Substeps(substeps))?;
    let diffs = integrate_master_difference(&at(theta + step)?, &at(theta - step)?, &rho0, grid, substeps)?;
    let derivs = diffs.into_iter().map(|d| d * C64::new(0.5 / step, 0.0)).collect();
    Ok((base, derivs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_right_with;
    use crate::models::{InitialState, Model, TwoLevelPTParams, YangLeeParams};
    use crate::operators::{matrix_exponential, pauli, CVector, PauliAxis, I};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_level(s: f64, r: f64) -> Model {
        Model::TwoLevel(TwoLevelPTParams { s, r })
    }

    fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
        let v = CVector::from_fn(dim, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        StateVector::from_vector(v / c(n, 0.0))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
        let a = CMatrix::from_fn(dim, dim, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&a + a.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn param_point_contract() {
        assert!(ParamPoint::new(vec!["s".into(), "s".into()], vec![1.0, 2.0]).is_err());
        assert!(ParamPoint::new(vec!["s".into()], vec![]).is_err());
        let p = ParamPoint::new(vec!["s".into(), "r".into()], vec![1.0, 2.0]).unwrap();
        assert_eq!(p.with("r", 3.0).unwrap().get("r").unwrap(), 3.0);
        assert!(p.get("kappa").is_err());
    }

    #[test]
    fn stationary_state_has_zero_metric() {
        let psi = StateVector::plus(1);
        let zero = psi.scaled(c(0.0, 0.0));
        assert_eq!(fr_metric_pure(&psi, &zero, &zero).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn pure_metric_requires_unit_norm() {
        let psi = StateVector::plus(1).scaled(c(2.0, 0.0));
        assert!(matches!(fr_metric_pure(&psi, &psi, &psi), Err(Error::Normalization { .. })));
    }

    #[test]
    fn analytic_t_squared() {
        // d_s psi = -i t sigma^x psi; <sigma^x> = 0 and Var(sigma^x) = 1 on |0>
        let t = 1.7;
        let h = pauli(PauliAxis::X).scale(c(0.4, 0.0));
        let psi = StateVector::from_vector(
            matrix_exponential(&h.scale(c(0.0, -t))).into_matrix() * StateVector::basis(2, 0).amplitudes(),
        );
        let dpsi = StateVector::from_vector(pauli(PauliAxis::X).matrix() * psi.amplitudes() * c(0.0, -t));
        let g = fr_metric_pure(&psi, &dpsi, &dpsi).unwrap();
        assert!((g - c(t * t, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn generator_eigenstate_carries_no_information() {
        let spec = ModelSpec::new(two_level(0.7, 0.0)).with_initial_state(InitialState::Plus);
        let grid = TimeGrid::new(0.0, 3.0, 6).unwrap();
        for g in metric_vs_time(&spec, DynamicsKind::SchrodingerBiorthogonal, "s", &grid).unwrap().values {
            assert!(g.abs() < 1e-9);
        }
    }

    #[test]
    fn t_squared_benchmark_series() {
        let spec = ModelSpec::new(two_level(1.0, 0.0)).with_initial_state(InitialState::Zero);
        let grid = TimeGrid::new(0.0, 5.0, 50).unwrap();
        let series = metric_vs_time(&spec, DynamicsKind::SchrodingerBiorthogonal, "s", &grid).unwrap();
        assert_eq!(series.values[0], 0.0);
        for (t, g) in series.times.iter().zip(&series.values).skip(1) {
            assert!((g - t * t).abs() < 1e-6 * t * t, "t={t} g={g}");
        }
    }

    #[test]
    fn biorthogonal_collapses_to_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let psi = random_state(&mut rng, 4);
            let d = random_state(&mut rng, 4).scaled(c(0.3, 0.1));
            let pure = fr_metric_pure(&psi, &d, &d).unwrap();
            let bio =
                fr_metric_biorthogonal(&psi, &LeftStateVector::from(&psi), &d, &LeftStateVector::from(&d), &d).unwrap();
            assert!((pure - bio).norm() < 1e-12);
        }
    }

    #[test]
    fn biorthogonal_requires_pairing() {
        let psi = StateVector::plus(1);
        let psit = LeftStateVector::from(&psi).scaled(c(2.0, 0.0));
        assert!(fr_metric_biorthogonal(&psi, &psit, &psi, &psit, &psi).is_err());
    }

    #[test]
    fn hermitian_collapse_along_trajectory() {
        let spec = ModelSpec::new(Model::YangLee(YangLeeParams::new(0.8, 0.0, 2).unwrap()));
        let grid = TimeGrid::new(0.0, 4.0, 20).unwrap();
        let series = metric_vs_time(&spec, DynamicsKind::SchrodingerBiorthogonal, "lam", &grid).unwrap();
        // pure-state oracle on the normalized right trajectory
        let h_of = |lam: f64| Model::YangLee(YangLeeParams::new(lam, 0.0, 2).unwrap()).hamiltonian();
        let stepping = Stepping::Substeps(Stepping::Auto.substeps(grid.dt(), h_of(0.8).norm_one()));
        let traj = |lam: f64| evolve_right_with(&h_of(lam), &StateVector::plus(2), &grid, stepping).unwrap();
        let h = default_step(0.8);
        let (base, plus, minus) = (traj(0.8), traj(0.8 + h), traj(0.8 - h));
        for k in 0..base.len() {
            let d = StateVector::central_difference(plus[k].clone(), minus[k].clone(), &base[k], h).unwrap();
            let g = fr_metric_pure(&base[k].phase_aligned(), &d, &d).unwrap();
            assert!((g.re - series.values[k]).abs() < 1e-10 * g.re.max(1.0), "{} vs {}", g.re, series.values[k]);
        }
    }

    #[test]
    fn biorthogonal_metric_starts_at_zero() {
        let spec = ModelSpec::new(two_level(2.0, 1.0));
        let grid = TimeGrid::new(0.0, 3.0, 30).unwrap();
        let series = metric_vs_time(&spec, DynamicsKind::SchrodingerBiorthogonal, "s", &grid).unwrap();
        assert_eq!(series.kind, MetricKind::FrBiorthogonal);
        assert_eq!(series.values[0], 0.0);
        assert_eq!(series.len(), 31);
    }

    #[test]
    fn qfi_examples() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert_eq!(qfi_mixed(&rho, &CMatrix::zeros(2, 2), EIGEN_CUTOFF).unwrap(), 0.0);
        let eps = 0.3;
        let drho = pauli(PauliAxis::Z).matrix() * c(eps / 2.0, 0.0);
        assert!((qfi_mixed(&rho, &drho, EIGEN_CUTOFF).unwrap() - eps * eps).abs() < 1e-14);
        let skew = pauli(PauliAxis::Z).matrix() * I;
        assert!(matches!(qfi_mixed(&rho, &skew, EIGEN_CUTOFF), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn cfi_examples() {
        let p: f64 = 0.3;
        let dp: f64 = 0.2;
        let rho =
            DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_vec(vec![c(p, 0.0), c(1.0 - p, 0.0)]))).unwrap();
        let drho = pauli(PauliAxis::Z).matrix() * c(dp, 0.0);
        let f = cfi(&rho, &drho, &computational_povm(2)).unwrap();
        assert!((f - dp * dp * (1.0 / p + 1.0 / (1.0 - p))).abs() < 1e-12);
        assert_eq!(cfi(&rho, &drho, &[Operator::identity(2)]).unwrap(), 0.0);
    }

    #[test]
    fn invalid_povms() {
        let rho = DensityMatrix::maximally_mixed(2);
        let drho = CMatrix::zeros(2, 2);
        assert!(matches!(cfi(&rho, &drho, &[]), Err(Error::InvalidPovm(_))));
        assert!(matches!(cfi(&rho, &drho, &computational_povm(2)[..1]), Err(Error::InvalidPovm(_))));
        let bad = vec![pauli(PauliAxis::Z), &Operator::identity(2) - &pauli(PauliAxis::Z)];
        assert!(matches!(cfi(&rho, &drho, &bad), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let point = ParamPoint::single("x", 0.4);
        let d = param_derivative(|_| Ok(StateVector::plus(1)), &point, "x", 1e-5).unwrap();
        assert_eq!(d.norm(), 0.0);
    }

    fn rotated(theta: f64) -> StateVector {
        let u = matrix_exponential(&pauli(PauliAxis::Z).scale(c(0.0, -theta)));
        StateVector::from_vector(u.into_matrix() * StateVector::plus(1).amplitudes())
    }

    #[test]
    fn derivative_matches_analytic_with_second_order_error() {
        // the aligned family e^{i theta} exp(-i theta sigma^z)|+> = (1, e^{2 i theta})/sqrt(2)
        let theta = 0.3;
        let base = rotated(theta).phase_aligned();
        let analytic = CVector::from_vec(vec![c(0.0, 0.0), base.amplitudes()[1] * c(0.0, 2.0)]);
        let point = ParamPoint::single("theta", theta);
        let err = |h: f64| {
            let d = param_derivative(|p: &ParamPoint| Ok(rotated(p.get("theta")?)), &point, "theta", h).unwrap();
            (d.amplitudes() - &analytic).norm()
        };
        assert!(err(1e-4) < 1e-7);
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        // the metric sees only the gauge-invariant part: g = Var(sigma^z) = 1
        let d = param_derivative(|p: &ParamPoint| Ok(rotated(p.get("theta")?)), &point, "theta", 1e-5).unwrap();
        assert!((fr_metric_pure(&base, &d, &d).unwrap().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn derivative_rejects_bad_steps() {
        let point = ParamPoint::single("x", 0.0);
        assert!(param_derivative(|_| Ok(StateVector::plus(1)), &point, "x", 0.0).is_err());
        assert!(param_derivative(|_| Ok(StateVector::plus(1)), &point, "y", 1e-3).is_err());
    }

    #[test]
    fn lindblad_series_rises_then_falls() {
        let spec = ModelSpec::new(two_level(0.2, 1.0)).with_initial_state(InitialState::Zero);
        let grid = TimeGrid::new(0.0, 30.0, 60).unwrap();
        let series = metric_vs_time(&spec, DynamicsKind::Lindblad, "s", &grid).unwrap();
        let k = series.argmax();
        assert!(k > 0 && k < series.len() - 1);
        assert_eq!(series.values[0], 0.0);
    }

    #[test]
    fn cfi_series_is_bounded_by_qfi() {
        let spec = ModelSpec::new(two_level(1.0, 1.0)).with_initial_state(InitialState::Zero);
        let grid = TimeGrid::new(0.0, 5.0, 25).unwrap();
        let q = metric_vs_time(&spec, DynamicsKind::Lindblad, "s", &grid).unwrap();
        let f = cfi_vs_time(&spec, "s", &grid, &computational_povm(2)).unwrap();
        for (a, b) in f.values.iter().zip(&q.values) {
            assert!(*a <= b + 1e-6);
        }
    }

    #[test]
    fn unknown_parameter_is_reported() {
        let spec = ModelSpec::new(two_level(1.0, 0.5));
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            metric_vs_time(&spec, DynamicsKind::Lindblad, "kappa", &grid),
            Err(Error::UnknownParameter { .. })
        ));
    }

    #[test]
    fn negative_values_rejected_for_information_kinds() {
        assert!(MetricSeries::new(vec![0.0], vec![-1e-6], MetricKind::QfiMixed, "s").is_err());
        assert!(MetricSeries::new(vec![0.0], vec![-1e-6], MetricKind::FrBiorthogonal, "s").is_ok());
        assert!(MetricSeries::new(vec![0.0, 1.0], vec![0.0], MetricKind::Cfi, "s").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn pure_state_qfi_is_four_g(seed in any::<u64>(), dim in 2usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_state(&mut rng, dim);
            let gen = random_hermitian(&mut rng, dim);
            let dpsi = StateVector::from_vector(&gen * psi.amplitudes() * c(0.0, -1.0));
            let g = fr_metric_pure(&psi, &dpsi, &dpsi).unwrap().re;
            let (p, d) = (psi.amplitudes(), dpsi.amplitudes());
            let drho = d * p.adjoint() + p * d.adjoint();
            let rho = DensityMatrix::pure(&psi);
            let f = qfi_mixed(&rho, &drho, EIGEN_CUTOFF).unwrap();
            prop_assert!((f - 4.0 * g).abs() < 1e-6);
            prop_assert!(g >= -1e-12);
            prop_assert!(cfi(&rho, &drho, &computational_povm(dim)).unwrap() <= f + 1e-6);
        }

        #[test]
        fn cfi_bounded_by_qfi_mixed(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CMatrix::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let m = &a * a.adjoint();
            let rho = DensityMatrix::new(&m / m.trace()).unwrap();
            let mut drho = random_hermitian(&mut rng, 2);
            let tr = drho.trace();
            drho -= CMatrix::identity(2, 2) * (tr / c(2.0, 0.0));
            let f = qfi_mixed(&rho, &drho, EIGEN_CUTOFF).unwrap();
            prop_assert!(f >= 0.0);
            prop_assert!(cfi(&rho, &drho, &computational_povm(2)).unwrap() <= f + 1e-6);
        }
    }
}
