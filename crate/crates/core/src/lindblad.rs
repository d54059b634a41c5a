//! Density-matrix dynamics: the master equation
//! `d rho/dt = -i [H_+, rho] + D[Gamma] rho` with
//! `D[Gamma] rho = Gamma rho Gamma^dagger - 1/2 {Gamma^dagger Gamma, rho}`,
//! its explicit Euler step, and the no-jump evolution.

use crate::dynamics::{rk4_linear_map, StateVector, Stepping, TimeGrid};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::operators::{
    check_hermitian, hermitian_split, max_abs_diff, min_hermitian_eigenvalue, norm_one, principal_sqrt_hermitian,
    CMatrix, CVector, Operator, C64, I,
};

/// Possibly non-normalized mixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Accepts finite square matrices that are Hermitian within `1e-10`.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let op = Operator::new(mat)?;
        check_hermitian(op.matrix(), 1e-10)?;
        Ok(Self { mat: op.into_matrix() })
    }

    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    /// `|psi><psi|`.
    pub fn pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self { mat: v * v.adjoint() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { mat: CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.mat, &self.mat.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.mat)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    fn symmetrized(mat: CMatrix) -> Self {
        Self { mat: hermitian_part(&mat) }
    }
}

/// How `Gamma = sqrt(2 H_1)` is regularized when `H_1` is indefinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaPolicy {
    /// Principal square root of `2 H_1` as is; complex for indefinite `H_1`.
    Strict,
    /// Square root of `2 (H_1 + c)` with `c = max(0, -min eig H_1)`.
    #[default]
    Shift,
}

impl GammaPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaPolicy::Strict => "strict",
            GammaPolicy::Shift => "shift",
        }
    }
}

/// `Gamma = sqrt(2 (H_1 + c))` with `c` fixed by the policy.
pub fn gamma_from_h1(h1: &Operator, policy: GammaPolicy) -> Result<Operator> {
    check_hermitian(h1.matrix(), 1e-10)?;
    let shift = match policy {
        GammaPolicy::Strict => 0.0,
        GammaPolicy::Shift => (-min_hermitian_eigenvalue(h1.matrix())).max(0.0),
    };
    let n = h1.dim();
    let shifted = (h1.matrix() + CMatrix::identity(n, n) * C64::new(shift, 0.0)) * C64::new(2.0, 0.0);
    principal_sqrt_hermitian(&Operator::from_matrix_unchecked(shifted))
}

/// Hermitian part and jump operators of a master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSpec {
    pub h_plus: Operator,
    pub jump_ops: Vec<Operator>,
}

impl LindbladSpec {
    pub fn new(h_plus: Operator, jump_ops: Vec<Operator>) -> Result<Self> {
        check_hermitian(h_plus.matrix(), 1e-10)?;
        for g in &jump_ops {
            if g.dim() != h_plus.dim() {
                return Err(Error::Dimension { expected: h_plus.dim(), found: g.dim() });
            }
        }
        Ok(Self { h_plus, jump_ops })
    }

    /// `H_+` and `Gamma = sqrt(2 H_1)` of a model with `H = H_+ - i H_1`.
    pub fn from_model(model: &Model, policy: GammaPolicy) -> Result<Self> {
        let (h_plus, h1) = model.split();
        let gamma = gamma_from_h1(&h1, policy)?;
        Ok(Self { h_plus, jump_ops: vec![gamma] })
    }

    /// `H_+` and `Gamma` built from an arbitrary `H` through its Hermitian split.
    pub fn from_hamiltonian(h: &Operator, policy: GammaPolicy) -> Result<Self> {
        let (h_plus, minus) = hermitian_split(h);
        let gamma = gamma_from_h1(&minus.scale(I), policy)?;
        Ok(Self { h_plus, jump_ops: vec![gamma] })
    }

    /// Same dissipation with `H_+` replaced by `H_+ + extra`.
    pub fn with_extra_hamiltonian(&self, extra: &Operator) -> Result<Self> {
        if extra.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: extra.dim() });
        }
        Self::new(&self.h_plus + extra, self.jump_ops.clone())
    }

    pub fn dim(&self) -> usize {
        self.h_plus.dim()
    }

    /// Right-hand side of the master equation.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let h = self.h_plus.matrix();
        let mut out = (h * rho - rho * h) * (-I);
        for g in &self.jump_ops {
            out += dissipator_matrix(g.matrix(), rho);
        }
        out
    }

    /// Upper bound on the one-norm of the generator, used for step control.
    pub fn generator_norm(&self) -> f64 {
        2.0 * self.h_plus.norm_one() + self.jump_ops.iter().map(|g| 2.0 * g.norm_one().powi(2)).sum::<f64>()
    }

    /// Superoperator `L` acting on row-major `vec(rho)`:
    /// `vec(A rho B) = (A (x) B^T) vec(rho)`.
    pub fn liouvillian(&self) -> CMatrix {
        let n = self.dim();
        let id = CMatrix::identity(n, n);
        let h = self.h_plus.matrix();
        let mut l = (h.kronecker(&id) - id.kronecker(&h.transpose())) * (-I);
        for g in &self.jump_ops {
            let g = g.matrix();
            let gdg = g.adjoint() * g;
            l += g.kronecker(&g.conjugate());
            l -= (gdg.kronecker(&id) + id.kronecker(&gdg.transpose())) * C64::new(0.5, 0.0);
        }
        l
    }
}

fn dissipator_matrix(g: &CMatrix, rho: &CMatrix) -> CMatrix {
    let gd = g.adjoint();
    let gdg = &gd * g;
    g * rho * &gd - (&gdg * rho + rho * &gdg) * C64::new(0.5, 0.0)
}

/// `Gamma rho Gamma^dagger - 1/2 {Gamma^dagger Gamma, rho}`.
pub fn dissipator(gamma: &Operator, rho: &DensityMatrix) -> Result<CMatrix> {
    if gamma.dim() != rho.dim() {
        return Err(Error::Dimension { expected: gamma.dim(), found: rho.dim() });
    }
    Ok(dissipator_matrix(gamma.matrix(), rho.matrix()))
}

fn check_dims(spec: &LindbladSpec, rho: &DensityMatrix) -> Result<()> {
    if spec.dim() != rho.dim() {
        return Err(Error::Dimension { expected: spec.dim(), found: rho.dim() });
    }
    Ok(())
}

/// One explicit Euler step `rho + tau (-i [H_+, rho] + D[Gamma] rho)`.
pub fn lindblad_step(spec: &LindbladSpec, rho: &DensityMatrix, tau: f64) -> Result<DensityMatrix> {
    check_dims(spec, rho)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("step tau must be positive, got {tau}")));
    }
    let next = rho.matrix() + spec.apply(rho.matrix()) * C64::new(tau, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(next))
}

/// Largest tolerated `|tr rho - 1|` before [`integrate_master`] gives up.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Most negative tolerated eigenvalue of a master-equation state.
pub const POSITIVITY_LIMIT: f64 = -1e-8;

fn rk4_step(f: &impl Fn(&CMatrix) -> CMatrix, y: &CMatrix, h: f64) -> CMatrix {
    let half = C64::new(h / 2.0, 0.0);
    let k1 = f(y);
    let k2 = f(&(y + &k1 * half));
    let k3 = f(&(y + &k2 * half));
    let k4 = f(&(y + &k3 * C64::new(h, 0.0)));
    y + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

fn integrate_linear(
    f: impl Fn(&CMatrix) -> CMatrix,
    rho0: &CMatrix,
    grid: &TimeGrid,
    substeps: usize,
    mut on_store: impl FnMut(usize, &CMatrix) -> Result<CMatrix>,
) -> Result<Vec<CMatrix>> {
    let h = grid.dt() / substeps as f64;
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut rho = on_store(0, rho0)?;
    out.push(rho.clone());
    for k in 1..=grid.n_steps() {
        for _ in 0..substeps {
            rho = rk4_step(&f, &rho, h);
        }
        rho = on_store(k, &rho)?;
        out.push(rho.clone());
    }
    Ok(out)
}

/// Row-major `vec(m)`, matching [`LindbladSpec::liouvillian`].
pub(crate) fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.len(), m.transpose().iter().copied())
}

pub(crate) fn unvectorize(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, v.as_slice())
}

/// States up to this dimension are propagated through a dense superoperator.
const DENSE_MAX_DIM: usize = 16;

fn matrix_power(m: &CMatrix, mut n: usize) -> CMatrix {
    let mut result = CMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `substeps` RK4 steps of `y' = L y` across one grid interval, as one map.
fn rk4_interval_map(l: &CMatrix, dt: f64, substeps: usize) -> CMatrix {
    matrix_power(&rk4_linear_map(l, dt / substeps as f64), substeps)
}

/// Same contract as [`integrate_linear`] with the interval map precomputed.
fn integrate_dense(
    interval_map: &CMatrix,
    y0: &CMatrix,
    grid: &TimeGrid,
    mut on_store: impl FnMut(usize, &CMatrix) -> Result<CMatrix>,
) -> Result<Vec<CMatrix>> {
    let (rows, cols) = y0.shape();
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut y = on_store(0, y0)?;
    out.push(y.clone());
    for k in 1..=grid.n_steps() {
        let next = unvectorize(&(interval_map * vectorize(&y)), rows, cols);
        y = on_store(k, &next)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// RK4 solution of the master equation on `grid`.
///
/// Each stored state is re-symmetrized. Trace drift beyond
/// [`TRACE_DRIFT_LIMIT`] and eigenvalues below [`POSITIVITY_LIMIT`] are
/// reported as errors rather than corrected.
pub fn integrate_master(spec: &LindbladSpec, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    integrate_master_with(spec, rho0, grid, Stepping::Auto)
}

pub fn integrate_master_with(
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    stepping: Stepping,
) -> Result<Vec<DensityMatrix>> {
    check_dims(spec, rho0)?;
    let drift0 = (rho0.trace() - 1.0).abs();
    if drift0 > 1e-8 {
        return Err(Error::Normalization { what: "initial density matrix trace - 1", value: drift0 });
    }
    let substeps = stepping.substeps(grid.dt(), spec.generator_norm());
    let store = |k: usize, rho: &CMatrix| {
        let state = DensityMatrix::symmetrized(rho.clone());
        let time = grid.time(k);
        let drift = (state.trace() - 1.0).abs();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { drift, time });
        }
        let min_eigenvalue = state.min_eigenvalue();
        if min_eigenvalue < POSITIVITY_LIMIT {
            return Err(Error::Positivity { min_eigenvalue, time });
        }
        Ok(state.into_matrix())
    };
    let states = if spec.dim() <= DENSE_MAX_DIM {
        integrate_dense(&rk4_interval_map(&spec.liouvillian(), grid.dt(), substeps), rho0.matrix(), grid, store)?
    } else {
        integrate_linear(|r| spec.apply(r), rho0.matrix(), grid, substeps, store)?
    };
    Ok(states.into_iter().map(DensityMatrix::from_matrix_unchecked).collect())
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `rho_a(t) - rho_b(t)` for two specs started from the same state.
///
/// Integrates the pair `(rho_a - rho_b, rho_b)` with generator
/// `[[L_a, L_a - L_b], [0, L_b]]`, which is exactly the difference of the two
/// RK4 solutions but never subtracts two nearly equal trajectories.
pub(crate) fn integrate_master_difference(
    a: &LindbladSpec,
    b: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<Vec<CMatrix>> {
    check_dims(a, rho0)?;
    check_dims(b, rho0)?;
    let n = rho0.dim();
    let mut stacked = CMatrix::zeros(2 * n, n);
    stacked.rows_mut(n, n).copy_from(rho0.matrix());
    let rhs = |y: &CMatrix| {
        let diff = y.rows(0, n).into_owned();
        let rho_b = y.rows(n, n).into_owned();
        let lb = b.apply(&rho_b);
        let mut out = CMatrix::zeros(2 * n, n);
        out.rows_mut(0, n).copy_from(&(a.apply(&diff) + (a.apply(&rho_b) - &lb)));
        out.rows_mut(n, n).copy_from(&lb);
        out
    };
    let store = |_: usize, y: &CMatrix| {
        let mut out = y.clone();
        out.rows_mut(0, n).copy_from(&hermitian_part(&y.rows(0, n).into_owned()));
        out.rows_mut(n, n).copy_from(&hermitian_part(&y.rows(n, n).into_owned()));
        Ok(out)
    };
    let states = if n <= DENSE_MAX_DIM {
        let (la, lb) = (a.liouvillian(), b.liouvillian());
        let d2 = n * n;
        let mut pair = CMatrix::zeros(2 * d2, 2 * d2);
        pair.view_mut((0, 0), (d2, d2)).copy_from(&la);
        pair.view_mut((0, d2), (d2, d2)).copy_from(&(&la - &lb));
        pair.view_mut((d2, d2), (d2, d2)).copy_from(&lb);
        integrate_dense(&rk4_interval_map(&pair, grid.dt(), substeps), &stacked, grid, store)?
    } else {
        integrate_linear(rhs, &stacked, grid, substeps, store)?
    };
    Ok(states.into_iter().map(|y| y.rows(0, n).into_owned()).collect())
}

/// Smallest trace [`no_jump_evolution`] accepts.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Integrates `d rho/dt = -i [H_+, rho] + i {H_-, rho}` with RK4.
///
/// The trace is not conserved in general. With `renormalize` every stored
/// state is divided by its trace; the integration itself always runs on the
/// unnormalized state.
pub fn no_jump_evolution(
    h: &Operator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    renormalize: bool,
) -> Result<Vec<DensityMatrix>> {
    if h.dim() != rho0.dim() {
        return Err(Error::Dimension { expected: h.dim(), found: rho0.dim() });
    }
    let (plus, minus) = hermitian_split(h);
    let (hp, hm) = (plus.matrix(), minus.matrix());
    let rhs = |rho: &CMatrix| (hp * rho - rho * hp) * (-I) + (hm * rho + rho * hm) * I;
    let substeps = Stepping::Auto.substeps(grid.dt(), 2.0 * norm_one(hp) + 2.0 * norm_one(hm));
    let states = integrate_linear(rhs, rho0.matrix(), grid, substeps, |k, rho| {
        let trace = rho.trace().re;
        if trace.abs() < DECAY_FLOOR {
            return Err(Error::DecayUnderflow { trace, time: grid.time(k) });
        }
        Ok(rho.clone())
    })?;
    Ok(states
        .into_iter()
        .map(|rho| {
            let rho = if renormalize { &rho / rho.trace() } else { rho };
            DensityMatrix::symmetrized(rho)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{closed_form_two_level, plus_state};
    use crate::models::{build_two_level, TwoLevelPTParams, YangLeeParams};
    use crate::operators::{matrix_exponential, pauli, CVector, PauliAxis};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn grid(t_end: f64, n: usize) -> TimeGrid {
        TimeGrid::new(0.0, t_end, n).unwrap()
    }

    fn two_level_spec(s: f64, r: f64, policy: GammaPolicy) -> LindbladSpec {
        LindbladSpec::from_model(&Model::TwoLevel(TwoLevelPTParams { s, r }), policy).unwrap()
    }

    #[test]
    fn scalar_gamma() {
        let h1 = Operator::identity(2).scale(c(0.5, 0.0));
        for policy in [GammaPolicy::Strict, GammaPolicy::Shift] {
            assert!(gamma_from_h1(&h1, policy).unwrap().max_abs_diff(&Operator::identity(2)) < 1e-14);
        }
    }

    #[test]
    fn strict_gamma_of_indefinite_h1() {
        let g = gamma_from_h1(&pauli(PauliAxis::X).scale(c(0.5, 0.0)), GammaPolicy::Strict).unwrap();
        let expected = Operator::from_rows(2, &[c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)]).unwrap();
        assert!(g.max_abs_diff(&expected) < 1e-14);
        assert!((&g * &g).max_abs_diff(&pauli(PauliAxis::X)) < 1e-8);
    }

    #[test]
    fn shifted_gamma_of_indefinite_h1() {
        let g = gamma_from_h1(&pauli(PauliAxis::X).scale(c(0.5, 0.0)), GammaPolicy::Shift).unwrap();
        // sqrt(sigma^x + 1) = sqrt(2) |+><+|
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = Operator::from_rows(2, &[c(h, 0.0); 4]).unwrap();
        assert!(g.max_abs_diff(&expected) < 1e-14);
        assert!((&g * &g).max_abs_diff(&(&pauli(PauliAxis::X) + &Operator::identity(2))) < 1e-8);
        assert!(g.is_hermitian(1e-14));
    }

    #[test]
    fn gamma_needs_hermitian_h1() {
        assert!(matches!(
            gamma_from_h1(&build_two_level(&TwoLevelPTParams { s: 1.0, r: 1.0 }), GammaPolicy::Shift),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn dissipator_examples() {
        let rho = DensityMatrix::pure(&StateVector::basis(2, 1));
        assert_eq!(dissipator(&Operator::identity(2), &rho).unwrap(), CMatrix::zeros(2, 2));

        let lowering = Operator::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let d = dissipator(&lowering, &rho).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(max_abs_diff(&d, &expected) < 1e-15);
        assert!(dissipator(&Operator::identity(4), &rho).is_err());
    }

    #[test]
    fn euler_step_examples() {
        let spec = LindbladSpec::new(pauli(PauliAxis::Z), vec![Operator::identity(2)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(lindblad_step(&spec, &rho, 0.3).unwrap().max_abs_diff(&rho) < 1e-16);

        let spec = two_level_spec(0.2, 1.0, GammaPolicy::Shift);
        let rho = DensityMatrix::pure(&plus_state());
        let next = lindblad_step(&spec, &rho, 0.01).unwrap();
        assert!((next.trace() - rho.trace()).abs() < 1e-15);
        assert!(lindblad_step(&spec, &rho, 0.0).is_err());
    }

    #[test]
    fn euler_step_is_first_order() {
        let spec = two_level_spec(0.2, 1.0, GammaPolicy::Shift);
        let rho = DensityMatrix::pure(&plus_state());
        let err = |tau: f64| {
            let exact = integrate_master(&spec, &rho, &grid(tau, 1)).unwrap().pop().unwrap();
            lindblad_step(&spec, &rho, tau).unwrap().max_abs_diff(&exact)
        };
        let slope = (err(1e-2) / err(5e-3)).log2();
        assert!(slope >= 1.9, "slope {slope}");
    }

    #[test]
    fn unitary_limit_preserves_purity() {
        let spec = LindbladSpec::new(pauli(PauliAxis::Z), vec![]).unwrap();
        let rho0 = DensityMatrix::pure(&plus_state());
        for rho in integrate_master(&spec, &rho0, &grid(10.0, 50)).unwrap() {
            assert!((rho.purity() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn master_matches_liouvillian_exponential() {
        let spec = two_level_spec(0.2, 1.0, GammaPolicy::Shift);
        let rho0 = DensityMatrix::pure(&StateVector::basis(2, 0));
        let states = integrate_master(&spec, &rho0, &grid(2.0, 4)).unwrap();
        let l = Operator::new(spec.liouvillian() * c(2.0, 0.0)).unwrap();
        let vec0 = CVector::from_iterator(4, rho0.matrix().transpose().iter().copied());
        let vec_t = matrix_exponential(&l).into_matrix() * vec0;
        let rho_t = CMatrix::from_row_slice(2, 2, vec_t.as_slice());
        assert!(max_abs_diff(states[4].matrix(), &rho_t) < 1e-9);
    }

    #[test]
    fn dense_and_matrix_rk4_agree() {
        let model = Model::YangLee(YangLeeParams::new(0.7, 0.4, 2).unwrap());
        let spec = LindbladSpec::from_model(&model, GammaPolicy::Shift).unwrap();
        let rho0 = DensityMatrix::pure(&StateVector::plus(2));
        let g = grid(3.0, 6);
        let map = rk4_interval_map(&spec.liouvillian(), g.dt(), 7);
        let dense = integrate_dense(&map, rho0.matrix(), &g, |_, y| Ok(y.clone())).unwrap();
        let direct = integrate_linear(|r| spec.apply(r), rho0.matrix(), &g, 7, |_, y| Ok(y.clone())).unwrap();
        for (a, b) in dense.iter().zip(&direct) {
            assert!(max_abs_diff(a, b) < 1e-13);
        }
    }

    #[test]
    fn difference_equals_difference_of_runs() {
        let at = |s: f64| two_level_spec(s, 1.0, GammaPolicy::Shift);
        let rho0 = DensityMatrix::pure(&StateVector::basis(2, 0));
        let g = grid(5.0, 10);
        let diffs = integrate_master_difference(&at(0.3), &at(0.25), &rho0, &g, 20).unwrap();
        let plus = integrate_master_with(&at(0.3), &rho0, &g, Stepping::Substeps(20)).unwrap();
        let minus = integrate_master_with(&at(0.25), &rho0, &g, Stepping::Substeps(20)).unwrap();
        for ((d, p), m) in diffs.iter().zip(&plus).zip(&minus) {
            assert!(max_abs_diff(d, &(p.matrix() - m.matrix())) < 1e-12);
        }
    }

    #[test]
    fn two_level_reaches_stationary_state() {
        let spec = two_level_spec(0.2, 1.0, GammaPolicy::Shift);
        let rho0 = DensityMatrix::pure(&plus_state());
        let states = integrate_master(&spec, &rho0, &grid(40.0, 40)).unwrap();
        let last = states.last().unwrap();
        assert!((last.trace() - 1.0).abs() < 1e-8);
        assert!(spec.apply(last.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-4);
    }

    #[test]
    fn yang_lee_single_site_keeps_trace() {
        let model = Model::YangLee(YangLeeParams::new(1.0, 1.0, 1).unwrap());
        let spec = LindbladSpec::from_model(&model, GammaPolicy::Shift).unwrap();
        let rho0 = DensityMatrix::pure(&StateVector::plus(1));
        for rho in integrate_master(&spec, &rho0, &grid(10.0, 100)).unwrap() {
            assert!((rho.trace() - 1.0).abs() < 1e-8);
            assert!(rho.hermiticity_error() < 1e-9);
            assert!(rho.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn strict_policy_preserves_trace() {
        let model = Model::YangLee(YangLeeParams::new(1.0, 1.0, 2).unwrap());
        let spec = LindbladSpec::from_model(&model, GammaPolicy::Strict).unwrap();
        let rho0 = DensityMatrix::pure(&StateVector::plus(2));
        // positivity is not guaranteed for a non-Hermitian Gamma, but the trace is
        let mut rho = rho0.matrix().clone();
        for _ in 0..100 {
            rho = rk4_step(&|r: &CMatrix| spec.apply(r), &rho, 0.01);
        }
        assert!((rho.trace() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn master_rejects_unnormalized_start() {
        let spec = two_level_spec(0.2, 1.0, GammaPolicy::Shift);
        let rho0 = DensityMatrix::new(CMatrix::identity(2, 2)).unwrap();
        assert!(matches!(integrate_master(&spec, &rho0, &grid(1.0, 1)), Err(Error::Normalization { .. })));
    }

    #[test]
    fn no_jump_hermitian_is_von_neumann() {
        let rho0 = DensityMatrix::pure(&StateVector::basis(2, 0));
        let h = pauli(PauliAxis::X).scale(c(0.7, 0.0));
        for rho in no_jump_evolution(&h, &rho0, &grid(5.0, 25), false).unwrap() {
            assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_jump_trace_tracks_closed_form_norm() {
        let p = TwoLevelPTParams { s: 2.0, r: 1.0 };
        let g = grid(3.0, 30);
        let states = no_jump_evolution(&build_two_level(&p), &DensityMatrix::pure(&plus_state()), &g, false).unwrap();
        let (_, _, n0) = closed_form_two_level(&p, 0.0).unwrap();
        for (t, rho) in g.times().into_iter().zip(&states) {
            let (_, _, n) = closed_form_two_level(&p, t).unwrap();
            assert!((rho.trace() - n * n / (n0 * n0)).abs() < 1e-8);
        }
    }

    #[test]
    fn no_jump_renormalized_has_unit_trace() {
        let p = TwoLevelPTParams { s: 0.2, r: 1.0 };
        let g = grid(5.0, 20);
        for rho in no_jump_evolution(&build_two_level(&p), &DensityMatrix::pure(&plus_state()), &g, true).unwrap() {
            assert!((rho.trace() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn no_jump_reports_decay_underflow() {
        // H = 5i: i{H_-, rho} = -10 rho
        let h = Operator::identity(2).scale(c(0.0, 5.0));
        let rho0 = DensityMatrix::pure(&plus_state());
        let res = no_jump_evolution(&h, &rho0, &grid(10.0, 10), false);
        assert!(matches!(res, Err(Error::DecayUnderflow { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dissipator_is_traceless_and_hermitian(
            g in proptest::collection::vec(-1.0f64..1.0, 8),
            a in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let gamma = Operator::from_rows(2, &[c(g[0], g[1]), c(g[2], g[3]), c(g[4], g[5]), c(g[6], g[7])]).unwrap();
            let m = CMatrix::from_row_slice(2, 2, &[c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7])]);
            let rho = DensityMatrix::new(&m * m.adjoint()).unwrap();
            let d = dissipator(&gamma, &rho).unwrap();
            prop_assert!(d.trace().norm() < 1e-12);
            prop_assert!(max_abs_diff(&d, &d.adjoint()) < 1e-12);
        }

        #[test]
        fn master_contract_two_level(s in 0.1f64..3.0, r in 0.0f64..2.0) {
            let spec = two_level_spec(s, r, GammaPolicy::Shift);
            let rho0 = DensityMatrix::pure(&plus_state());
            for rho in integrate_master(&spec, &rho0, &grid(10.0, 20)).unwrap() {
                prop_assert!((rho.trace() - 1.0).abs() < 1e-8);
                prop_assert!(rho.hermiticity_error() < 1e-9);
                prop_assert!(rho.min_eigenvalue() > -1e-8);
            }
        }
    }
}
