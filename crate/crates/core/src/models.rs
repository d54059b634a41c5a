//! The two concrete systems: the two-level PT model `H = s sigma^x - i r sigma^z`
//! and the periodic Yang-Lee chain
//! `H = -1/2 sum_j (sigma^z_j + lam sigma^x_j sigma^x_{j+1} + i kappa sigma^x_j)`.

use crate::dynamics::StateVector;
use crate::error::{Error, Result};
use crate::lindblad::GammaPolicy;
use crate::metrology::ParamPoint;
use crate::operators::{
    hermitian_split, min_gap, site_operator, spectrum, CMatrix, CVector, Operator, PauliAxis, C64, I, MAX_SITES,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelPTParams {
    pub s: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YangLeeParams {
    pub lam: f64,
    pub kappa: f64,
    pub n_sites: usize,
}

impl YangLeeParams {
    pub fn new(lam: f64, kappa: f64, n_sites: usize) -> Result<Self> {
        if !(1..=MAX_SITES).contains(&n_sites) {
            return Err(Error::InvalidInput(format!("n_sites must be in 1..={MAX_SITES}, got {n_sites}")));
        }
        if !lam.is_finite() || !kappa.is_finite() {
            return Err(Error::InvalidInput("Yang-Lee parameters must be finite".into()));
        }
        Ok(Self { lam, kappa, n_sites })
    }

    /// Periodic boundary conditions are the only supported case.
    pub fn periodic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Unbroken,
    ExceptionalPoint,
    Broken,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Unbroken => "Unbroken",
            Phase::ExceptionalPoint => "ExceptionalPoint",
            Phase::Broken => "Broken",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLabel {
    pub label: Phase,
    /// Largest `|Im E|` over the spectrum.
    pub max_abs_im: f64,
    /// Smallest distance between two eigenvalues.
    pub min_gap: f64,
}

/// `[[-ir, s], [s, ir]]`.
pub fn build_two_level(p: &TwoLevelPTParams) -> Operator {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, -p.r), C64::new(p.s, 0.0), C64::new(p.s, 0.0), C64::new(0.0, p.r)],
    );
    Operator::from_matrix_unchecked(m)
}

/// `(E_+, E_-) = (+w, -w)` with `w` the principal square root of `s^2 - r^2`.
pub fn two_level_eigenvalues(p: &TwoLevelPTParams) -> (C64, C64) {
    let w = C64::new(p.s * p.s - p.r * p.r, 0.0).sqrt();
    (w, -w)
}

/// Squared normalization `|n_pm|^2 = 1 / (2 |s| w)` of the eigenstates
/// `n_pm (s, i r pm w)`. For `s = 1` this is `1 / (2 w)` on `(1, i r pm w)`.
pub fn two_level_normalization(p: &TwoLevelPTParams) -> Result<f64> {
    let discriminant = p.s * p.s - p.r * p.r;
    if discriminant <= 0.0 {
        return Err(Error::PhaseDomain { discriminant });
    }
    Ok(1.0 / (2.0 * p.s.abs() * discriminant.sqrt()))
}

/// Eigenstates `|E_pm> = n_pm (s, i r pm w)` with real positive `n_pm`,
/// normalized so that `<E_pm|P|E_pm> = pm sign(s)` with `P = sigma^x`.
pub fn two_level_eigenstates(p: &TwoLevelPTParams) -> Result<(StateVector, StateVector)> {
    let n = two_level_normalization(p)?.sqrt();
    let w = (p.s * p.s - p.r * p.r).sqrt();
    let state = |sign: f64| {
        StateVector::from_vector(CVector::from_vec(vec![C64::new(n * p.s, 0.0), C64::new(n * sign * w, n * p.r)]))
    };
    Ok((state(1.0), state(-1.0)))
}

/// PT inner product `<a| P |b>` with `P = sigma^x`, i.e. `(PT a)^T b`.
pub fn pt_inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    for v in [a, b] {
        if v.dim() != 2 {
            return Err(Error::Dimension { expected: 2, found: v.dim() });
        }
    }
    let (a, b) = (a.amplitudes(), b.amplitudes());
    Ok(a[0].conj() * b[1] + a[1].conj() * b[0])
}

/// `H0 = -1/2 sum_j (sigma^z_j + lam sigma^x_j sigma^x_{j+1})` and
/// `H1 = kappa/2 sum_j sigma^x_j`, so that `H = H0 - i H1`.
pub fn yang_lee_split(p: &YangLeeParams) -> (Operator, Operator) {
    let n = p.n_sites;
    let dim = 1usize << n;
    let site = |axis, j| site_operator(axis, j, n).expect("site index within chain");
    let mut field = CMatrix::zeros(dim, dim);
    let mut coupling = CMatrix::zeros(dim, dim);
    let mut transverse = CMatrix::zeros(dim, dim);
    for j in 1..=n {
        let next = j % n + 1;
        field += site(PauliAxis::Z, j).matrix();
        coupling += (&site(PauliAxis::X, j) * &site(PauliAxis::X, next)).matrix();
        transverse += site(PauliAxis::X, j).matrix();
    }
    let h0 = (field + coupling * C64::new(p.lam, 0.0)) * C64::new(-0.5, 0.0);
    let h1 = transverse * C64::new(0.5 * p.kappa, 0.0);
    (Operator::from_matrix_unchecked(h0), Operator::from_matrix_unchecked(h1))
}

pub fn build_yang_lee(p: &YangLeeParams) -> Operator {
    let (h0, h1) = yang_lee_split(p);
    Operator::from_matrix_unchecked(h0.matrix() - h1.matrix() * I)
}

/// Default tolerance for [`classify_phase`].
pub const PHASE_TOL: f64 = 1e-9;

/// Labels the spectrum of `h`.
///
/// A point is an exceptional point when two eigenvalues lie within `tol` and
/// the cluster is defective (fewer independent eigenvectors than its
/// multiplicity). Symmetry-protected degeneracies with a full eigenbasis are
/// labelled by their imaginary parts instead.
pub fn classify_phase(h: &Operator, tol: f64) -> Result<PhaseLabel> {
    let eigenvalues = spectrum(h)?;
    let max_abs_im = eigenvalues.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
    let gap = if eigenvalues.len() > 1 { min_gap(&eigenvalues) } else { f64::INFINITY };
    let label = if gap <= tol && has_defective_cluster(h, &eigenvalues, tol) {
        Phase::ExceptionalPoint
    } else if max_abs_im <= tol {
        Phase::Unbroken
    } else {
        Phase::Broken
    };
    Ok(PhaseLabel { label, max_abs_im, min_gap: gap })
}

fn has_defective_cluster(h: &Operator, eigenvalues: &[C64], tol: f64) -> bool {
    let n = h.dim();
    let scale = h.norm_one().max(1.0);
    let rank_tol = tol.sqrt() * scale;
    let mut assigned = vec![false; eigenvalues.len()];
    for i in 0..eigenvalues.len() {
        if assigned[i] {
            continue;
        }
        let mut cluster = vec![i];
        assigned[i] = true;
        // transitive closure of the "within tol" relation
        let mut k = 0;
        while k < cluster.len() {
            let anchor = eigenvalues[cluster[k]];
            for j in 0..eigenvalues.len() {
                if !assigned[j] && (eigenvalues[j] - anchor).norm() <= tol {
                    assigned[j] = true;
                    cluster.push(j);
                }
            }
            k += 1;
        }
        if cluster.len() < 2 {
            continue;
        }
        let mean = cluster.iter().map(|&j| eigenvalues[j]).sum::<C64>() / C64::new(cluster.len() as f64, 0.0);
        let shifted = h.matrix() - CMatrix::identity(n, n) * mean;
        let null_dim = shifted.singular_values().iter().filter(|&&sv| sv <= rank_tol).count();
        if null_dim < cluster.len() {
            return true;
        }
    }
    false
}

/// A concrete Hamiltonian family with named real parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    TwoLevel(TwoLevelPTParams),
    YangLee(YangLeeParams),
}

impl Model {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Model::TwoLevel(_) => &["s", "r"],
            Model::YangLee(_) => &["lam", "kappa"],
        }
    }

    pub fn param_point(&self) -> ParamPoint {
        let values = match self {
            Model::TwoLevel(p) => vec![p.s, p.r],
            Model::YangLee(p) => vec![p.lam, p.kappa],
        };
        let names = self.parameter_names().iter().map(|s| s.to_string()).collect();
        ParamPoint::new(names, values).expect("model parameter names are distinct")
    }

    fn unknown(&self, name: &str) -> Error {
        Error::UnknownParameter { name: name.to_string(), available: self.parameter_names().join(", ") }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        match (self, name) {
            (Model::TwoLevel(p), "s") => Ok(p.s),
            (Model::TwoLevel(p), "r") => Ok(p.r),
            (Model::YangLee(p), "lam") => Ok(p.lam),
            (Model::YangLee(p), "kappa") => Ok(p.kappa),
            _ => Err(self.unknown(name)),
        }
    }

    pub fn with_param(&self, name: &str, value: f64) -> Result<Model> {
        let mut out = *self;
        match (&mut out, name) {
            (Model::TwoLevel(p), "s") => p.s = value,
            (Model::TwoLevel(p), "r") => p.r = value,
            (Model::YangLee(p), "lam") => p.lam = value,
            (Model::YangLee(p), "kappa") => p.kappa = value,
            _ => return Err(self.unknown(name)),
        }
        Ok(out)
    }

    /// Applies every coordinate of `point`.
    pub fn with_point(&self, point: &ParamPoint) -> Result<Model> {
        point.iter().try_fold(*self, |m, (name, value)| m.with_param(name, value))
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::TwoLevel(_) => 2,
            Model::YangLee(p) => 1 << p.n_sites,
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            Model::TwoLevel(_) => 1,
            Model::YangLee(p) => p.n_sites,
        }
    }

    pub fn hamiltonian(&self) -> Operator {
        match self {
            Model::TwoLevel(p) => build_two_level(p),
            Model::YangLee(p) => build_yang_lee(p),
        }
    }

    /// `(H_+, H_1)` with `H = H_+ - i H_1`, both Hermitian.
    pub fn split(&self) -> (Operator, Operator) {
        match self {
            Model::YangLee(p) => yang_lee_split(p),
            Model::TwoLevel(_) => {
                let (plus, minus) = hermitian_split(&self.hamiltonian());
                (plus, minus.scale(I))
            }
        }
    }
}

/// Classifies `base` at each grid point, in input order.
pub fn phase_scan(base: &Model, grid: &[ParamPoint], tol: f64) -> Result<Vec<(ParamPoint, PhaseLabel)>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("phase scan grid is empty".into()));
    }
    grid.iter()
        .map(|point| {
            let model = base.with_point(point)?;
            Ok((point.clone(), classify_phase(&model.hamiltonian(), tol)?))
        })
        .collect()
}

/// Initial pure state of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `|+>^{(x) N}`.
    Plus,
    /// `|0...0>`.
    Zero,
    Custom(StateVector),
}

impl InitialState {
    pub fn state(&self, n_sites: usize) -> Result<StateVector> {
        match self {
            InitialState::Plus => Ok(StateVector::plus(n_sites)),
            InitialState::Zero => Ok(StateVector::basis(1 << n_sites, 0)),
            InitialState::Custom(v) => {
                if v.dim() != 1 << n_sites {
                    return Err(Error::Dimension { expected: 1 << n_sites, found: v.dim() });
                }
                let norm = v.norm();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(Error::Normalization { what: "initial state norm", value: norm });
                }
                Ok(v.clone())
            }
        }
    }
}

/// A model together with its initial state and dissipation convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub model: Model,
    pub initial_state: InitialState,
    pub gamma_policy: GammaPolicy,
}

impl ModelSpec {
    pub fn new(model: Model) -> Self {
        Self { model, initial_state: InitialState::Plus, gamma_policy: GammaPolicy::Shift }
    }

    pub fn with_initial_state(mut self, initial_state: InitialState) -> Self {
        self.initial_state = initial_state;
        self
    }

    pub fn with_gamma_policy(mut self, gamma_policy: GammaPolicy) -> Self {
        self.gamma_policy = gamma_policy;
        self
    }

    pub fn initial(&self) -> Result<StateVector> {
        self.initial_state.state(self.model.n_sites())
    }
}
