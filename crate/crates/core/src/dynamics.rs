//! Non-Hermitian Schrödinger evolution of paired right and left states.
//!
//! Right states follow `i d/dt |psi> = H |psi>`, left states follow
//! `i d/dt |psi~> = H^dagger |psi~>`; together they conserve `<psi~|psi>`.

use crate::error::{Error, Result};
use crate::models::TwoLevelPTParams;
use crate::operators::{norm_one, CMatrix, CVector, Operator, C64, I, ONE};

macro_rules! state_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            amps: CVector,
        }

        impl $name {
            /// Checks that the amplitudes are non-empty and finite.
            pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
                if amplitudes.is_empty() {
                    return Err(Error::InvalidInput("state dimension must be positive".into()));
                }
                if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidInput("state has non-finite amplitudes".into()));
                }
                Ok(Self { amps: CVector::from_vec(amplitudes) })
            }

            pub(crate) fn from_vector(amps: CVector) -> Self {
                Self { amps }
            }

            /// Computational basis vector `|index>`.
            pub fn basis(dim: usize, index: usize) -> Self {
                let mut amps = CVector::zeros(dim);
                amps[index] = ONE;
                Self { amps }
            }

            /// `|+>^{(x) n_sites}`.
            pub fn plus(n_sites: usize) -> Self {
                let dim = 1usize << n_sites;
                let amp = C64::new((dim as f64).sqrt().recip(), 0.0);
                Self { amps: CVector::from_element(dim, amp) }
            }

            pub fn dim(&self) -> usize {
                self.amps.len()
            }

            pub fn amplitudes(&self) -> &CVector {
                &self.amps
            }

            pub fn into_vector(self) -> CVector {
                self.amps
            }

            /// Conventional Euclidean norm.
            pub fn norm(&self) -> f64 {
                self.amps.norm()
            }

            pub fn scaled(&self, factor: C64) -> Self {
                Self { amps: &self.amps * factor }
            }

            /// Multiplies by the phase that makes the first non-negligible
            /// component real and positive.
            pub fn phase_aligned(&self) -> Self {
                Self { amps: align_phase(&self.amps) }
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                (&self.amps - &other.amps).iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        }
    };
}

state_type!(
    /// Right (ket) state `|psi>`.
    StateVector
);
state_type!(
    /// Left (dual) state `|psi~>` of a biorthogonal pair.
    LeftStateVector
);

impl LeftStateVector {
    /// `<self|right>`.
    pub fn overlap(&self, right: &StateVector) -> C64 {
        self.amps.dotc(&right.amps)
    }
}

impl From<&StateVector> for LeftStateVector {
    fn from(state: &StateVector) -> Self {
        Self { amps: state.amps.clone() }
    }
}

pub(crate) fn align_phase(v: &CVector) -> CVector {
    let threshold = 1e-14 * v.norm();
    match v.iter().find(|z| z.norm() > threshold) {
        Some(z) => v * (z.conj() / z.norm()),
        None => v.clone(),
    }
}

/// Uniform time grid `t_k = t_start + k (t_end - t_start) / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() || t_end <= t_start {
            return Err(Error::InvalidInput(format!("time grid needs t_end > t_start (got {t_start}..{t_end})")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("time grid needs n_steps >= 1".into()));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    /// All `n_steps + 1` grid times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// How many RK4 steps to take per grid interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    /// Enough substeps that each step is at most `0.01 / ||generator||_1`.
    Auto,
    /// Fixed number of substeps per grid interval.
    Substeps(usize),
}

/// Step size scale: `h <= AUTO_STEP_SCALE / ||generator||`.
pub const AUTO_STEP_SCALE: f64 = 0.01;

impl Stepping {
    pub(crate) fn substeps(self, interval: f64, generator_norm: f64) -> usize {
        match self {
            Stepping::Substeps(n) => n.max(1),
            Stepping::Auto => ((interval * generator_norm / AUTO_STEP_SCALE).ceil() as usize).max(1),
        }
    }
}

/// One classical RK4 step for the linear system `y' = G y` is exactly
/// `y + h G y + (hG)^2 y / 2 + (hG)^3 y / 6 + (hG)^4 y / 24`; build that
/// polynomial once and reuse it.
pub(crate) fn rk4_linear_map(generator: &CMatrix, h: f64) -> CMatrix {
    let n = generator.nrows();
    let hg = generator * C64::new(h, 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut map = term.clone();
    for k in 1..=4 {
        term = &term * &hg * C64::new(1.0 / k as f64, 0.0);
        map += &term;
    }
    map
}

fn propagate(generator: &CMatrix, psi0: &CVector, grid: &TimeGrid, stepping: Stepping) -> Vec<CVector> {
    let substeps = stepping.substeps(grid.dt(), norm_one(generator));
    let step = rk4_linear_map(generator, grid.dt() / substeps as f64);
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut psi = psi0.clone();
    out.push(psi.clone());
    for _ in 0..grid.n_steps() {
        for _ in 0..substeps {
            psi = &step * psi;
        }
        out.push(psi.clone());
    }
    out
}

fn check_dims(h: &Operator, dim: usize) -> Result<()> {
    if h.dim() != dim {
        return Err(Error::Dimension { expected: h.dim(), found: dim });
    }
    Ok(())
}

/// Right-state trajectory on `grid` (no renormalization).
pub fn evolve_right(h: &Operator, psi0: &StateVector, grid: &TimeGrid) -> Result<Vec<StateVector>> {
    evolve_right_with(h, psi0, grid, Stepping::Auto)
}

pub fn evolve_right_with(
    h: &Operator,
    psi0: &StateVector,
    grid: &TimeGrid,
    stepping: Stepping,
) -> Result<Vec<StateVector>> {
    check_dims(h, psi0.dim())?;
    let generator = h.matrix() * (-I);
    Ok(propagate(&generator, psi0.amplitudes(), grid, stepping).into_iter().map(StateVector::from_vector).collect())
}

/// Left-state trajectory: evolution under `H^dagger`.
pub fn evolve_left(h: &Operator, psi0tilde: &LeftStateVector, grid: &TimeGrid) -> Result<Vec<LeftStateVector>> {
    evolve_left_with(h, psi0tilde, grid, Stepping::Auto)
}

pub fn evolve_left_with(
    h: &Operator,
    psi0tilde: &LeftStateVector,
    grid: &TimeGrid,
    stepping: Stepping,
) -> Result<Vec<LeftStateVector>> {
    check_dims(h, psi0tilde.dim())?;
    let generator = h.matrix().adjoint() * (-I);
    Ok(propagate(&generator, psi0tilde.amplitudes(), grid, stepping)
        .into_iter()
        .map(LeftStateVector::from_vector)
        .collect())
}

/// Paired trajectories on a common grid.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub grid: TimeGrid,
    pub right_states: Vec<StateVector>,
    pub left_states: Vec<LeftStateVector>,
    /// Conventional norm `||psi(t)||` of the biorthonormal right state. For
    /// the two-level model this is `N(t) / sqrt(s^2 - r^2)`.
    pub norm_factor: Vec<f64>,
}

impl EvolutionResult {
    /// Largest `|<psi~(t)|psi(t)> - 1|` along the trajectory.
    pub fn max_pairing_error(&self) -> f64 {
        self.left_states.iter().zip(&self.right_states).map(|(l, r)| (l.overlap(r) - ONE).norm()).fold(0.0, f64::max)
    }
}

/// Evolves a biorthogonal pair. The initial pair is renormalized first so
/// that `<psi~|psi> = 1` along the whole trajectory.
pub fn evolve_pair(
    h: &Operator,
    psi0: &StateVector,
    psi0tilde: &LeftStateVector,
    grid: &TimeGrid,
    stepping: Stepping,
) -> Result<EvolutionResult> {
    let (psi0, psi0tilde) = biorthogonal_renormalize(psi0, psi0tilde)?;
    let right_states = evolve_right_with(h, &psi0, grid, stepping)?;
    let left_states = evolve_left_with(h, &psi0tilde, grid, stepping)?;
    let norm_factor = right_states.iter().map(StateVector::norm).collect();
    Ok(EvolutionResult { grid: *grid, right_states, left_states, norm_factor })
}

/// Rescales `(psi, psi~)` so that `<psi~|psi> = 1`.
///
/// With `c = sqrt(<psi~|psi>)` (principal branch) the right state is divided
/// by `c` and the left state by `conj(c)`.
pub fn biorthogonal_renormalize(
    psi: &StateVector,
    psitilde: &LeftStateVector,
) -> Result<(StateVector, LeftStateVector)> {
    if psi.dim() != psitilde.dim() {
        return Err(Error::Dimension { expected: psi.dim(), found: psitilde.dim() });
    }
    let overlap = psitilde.overlap(psi);
    if overlap.norm() < 1e-14 {
        return Err(Error::SelfOrthogonal { overlap: overlap.norm() });
    }
    let c = overlap.sqrt();
    Ok((psi.scaled(c.inv()), psitilde.scaled(c.conj().inv())))
}

/// Closed-form biorthonormal trajectory of the two-level model from
/// `|psi0> = |psi~0> = (|0> + |1>)/sqrt(2)`.
///
/// With `w = sqrt(s^2 - r^2)`:
///
/// ```text
/// psi(t)  = (w cos wt - (is + r) sin wt, w cos wt - (is - r) sin wt) / (sqrt(2) w)
/// psi~(t) = (w cos wt - (is - r) sin wt, w cos wt - (is + r) sin wt) / (sqrt(2) w)
/// N(t)    = sqrt(s^2 - r^2 cos(2 w t))
/// ```
///
/// so that `<psi~|psi> = 1` and `||psi(t)|| = N(t) / w`. Only defined in the
/// unbroken phase.
pub fn closed_form_two_level(p: &TwoLevelPTParams, t: f64) -> Result<(StateVector, LeftStateVector, f64)> {
    let discriminant = p.s * p.s - p.r * p.r;
    if discriminant <= 0.0 {
        return Err(Error::PhaseDomain { discriminant });
    }
    let w = discriminant.sqrt();
    let (sin, cos) = (w * t).sin_cos();
    let wc = C64::new(w * cos, 0.0);
    let is_plus_r = C64::new(p.r, p.s);
    let is_minus_r = C64::new(-p.r, p.s);
    let scale = C64::new(1.0 / (std::f64::consts::SQRT_2 * w), 0.0);
    let right = vec![(wc - is_plus_r * sin) * scale, (wc - is_minus_r * sin) * scale];
    let left = vec![(wc - is_minus_r * sin) * scale, (wc - is_plus_r * sin) * scale];
    let norm = (p.s * p.s - p.r * p.r * (2.0 * w * t).cos()).sqrt();
    Ok((
        StateVector::from_vector(CVector::from_vec(right)),
        LeftStateVector::from_vector(CVector::from_vec(left)),
        norm,
    ))
}

/// Paper-default initial state for two-level runs, `(|0> + |1>)/sqrt(2)`.
pub fn plus_state() -> StateVector {
    StateVector::plus(1)
}
