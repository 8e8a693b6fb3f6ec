//! The 16-level donor spin model: Hamiltonian, spectrum, and transitions.
//!
//! The system is a spin-7/2 nucleus hyperfine-coupled to a spin-1/2 electron
//! in a static field `B0`. All energies are stored in GHz (frequency units,
//! h = 1). Nuclear basis index 0 is m_I = +7/2 and indices descend from
//! there; electron index 0 is spin-down, which is the low-energy manifold at
//! positive electron gyromagnetic ratio.
//!
//! `H = B0 (-gamma_n I_z + gamma_e S_z) + A S.I + sum_{ab} Q_ab I_a I_b`

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix};

/// Nuclear spin of the donor (7/2), fixed for this model.
pub const NUCLEAR_SPIN: f64 = 3.5;
/// Nuclear levels (2I + 1).
pub const NUCLEAR_LEVELS: usize = 8;
/// Composite spin dimension.
pub const SPIN_DIM: usize = 16;

const MHZ: f64 = 1e-3;
const KHZ: f64 = 1e-6;

/// Physical constants of the donor system.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystemParams {
    /// Static magnetic field, tesla.
    pub b0_tesla: f64,
    /// Nuclear gyromagnetic ratio, MHz/T.
    pub gamma_n_mhz_per_t: f64,
    /// Electron gyromagnetic ratio, GHz/T.
    pub gamma_e_ghz_per_t: f64,
    /// Hyperfine coupling, MHz.
    pub hyperfine_mhz: f64,
    /// Symmetric quadrupole tensor Q_ab, kHz.
    pub quadrupole_khz: [[f64; 3]; 3],
}

impl Default for SpinSystemParams {
    /// Bulk-silicon donor constants; the quadrupole tensor defaults to a
    /// diagonal Q_zz = 25 kHz, the middle of the observed 4-50 kHz range.
    fn default() -> Self {
        SpinSystemParams {
            b0_tesla: 1.0,
            gamma_n_mhz_per_t: 5.55,
            gamma_e_ghz_per_t: 27.97,
            hyperfine_mhz: 101.52,
            quadrupole_khz: [[0.0; 3], [0.0; 3], [0.0, 0.0, 25.0]],
        }
    }
}

impl SpinSystemParams {
    pub fn with_b0(mut self, b0_tesla: f64) -> Self {
        self.b0_tesla = b0_tesla;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0_tesla > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "b0_tesla must be positive, got {}",
                self.b0_tesla
            )));
        }
        if !(self.gamma_n_mhz_per_t > 0.0) {
            return Err(Error::InvalidParameter(
                "gamma_n_mhz_per_t must be positive".into(),
            ));
        }
        if !(self.gamma_e_ghz_per_t * 1e3 > self.gamma_n_mhz_per_t) {
            return Err(Error::InvalidParameter(
                "gamma_e must exceed gamma_n".into(),
            ));
        }
        if !(self.hyperfine_mhz > 0.0) {
            return Err(Error::InvalidParameter(
                "hyperfine_mhz must be positive".into(),
            ));
        }
        for a in 0..3 {
            for b in (a + 1)..3 {
                let (qab, qba) = (self.quadrupole_khz[a][b], self.quadrupole_khz[b][a]);
                if (qab - qba).abs() > 1e-9 * qab.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "quadrupole tensor not symmetric: Q[{a}][{b}] = {qab}, Q[{b}][{a}] = {qba}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest quadrupole entry magnitude, kHz.
    pub fn max_quadrupole_khz(&self) -> f64 {
        self.quadrupole_khz
            .iter()
            .flatten()
            .fold(0.0f64, |m, q| m.max(q.abs()))
    }

    /// Warns (does not error) when the energy hierarchy
    /// `gamma_e B0 >> A >> max|Q|` is not comfortably satisfied.
    pub fn hierarchy_warning(&self) -> Option<String> {
        let zeeman_ghz = self.gamma_e_ghz_per_t * self.b0_tesla;
        let a_ghz = self.hyperfine_mhz * MHZ;
        let q_ghz = self.max_quadrupole_khz() * KHZ;
        const FACTOR: f64 = 20.0;
        if zeeman_ghz < FACTOR * a_ghz {
            return Some(format!(
                "electron Zeeman energy {zeeman_ghz} GHz is not >> hyperfine {a_ghz} GHz"
            ));
        }
        if q_ghz > 0.0 && a_ghz < FACTOR * q_ghz {
            return Some(format!(
                "hyperfine {a_ghz} GHz is not >> quadrupole {q_ghz} GHz"
            ));
        }
        None
    }
}

/// m_I value of a nuclear index (index 0 -> +7/2, descending).
pub fn nuclear_m_value(index: usize) -> f64 {
    NUCLEAR_SPIN - index as f64
}

/// Angular-momentum operators (Ix, Iy, Iz) for I = 7/2, with m_I descending
/// down the basis.
pub fn nuclear_operators() -> [CMatrix; 3] {
    let n = NUCLEAR_LEVELS;
    let mut plus = CMatrix::zeros(n);
    for i in 1..n {
        let m = nuclear_m_value(i);
        let c = (NUCLEAR_SPIN * (NUCLEAR_SPIN + 1.0) - m * (m + 1.0)).sqrt();
        plus[(i - 1, i)] = Complex64::new(c, 0.0);
    }
    let minus = plus.dagger();
    let ix = CMatrix::from_fn(n, |r, c| (plus[(r, c)] + minus[(r, c)]) * 0.5);
    let iy = CMatrix::from_fn(n, |r, c| {
        (plus[(r, c)] - minus[(r, c)]) * Complex64::new(0.0, -0.5)
    });
    let iz = CMatrix::from_fn(n, |r, c| {
        if r == c {
            Complex64::new(nuclear_m_value(r), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    [ix, iy, iz]
}

/// Spin-1/2 operators (Sx, Sy, Sz) in the (down, up) basis.
pub fn electron_operators() -> [CMatrix; 3] {
    let mut sx = CMatrix::zeros(2);
    sx[(0, 1)] = Complex64::new(0.5, 0.0);
    sx[(1, 0)] = Complex64::new(0.5, 0.0);
    let mut sy = CMatrix::zeros(2);
    sy[(0, 1)] = Complex64::new(0.0, 0.5);
    sy[(1, 0)] = Complex64::new(0.0, -0.5);
    let mut sz = CMatrix::zeros(2);
    sz[(0, 0)] = Complex64::new(-0.5, 0.0);
    sz[(1, 1)] = Complex64::new(0.5, 0.0);
    [sx, sy, sz]
}

/// Builds the 16x16 spin Hamiltonian in GHz.
///
/// Composite index is `nuclear * 2 + electron`.
pub fn build_hamiltonian(params: &SpinSystemParams) -> Result<CMatrix> {
    params.validate()?;
    let [ix, iy, iz] = nuclear_operators();
    let [sx, sy, sz] = electron_operators();
    let i2 = CMatrix::identity(2);
    let i8 = CMatrix::identity(NUCLEAR_LEVELS);

    let gamma_n_ghz = params.gamma_n_mhz_per_t * MHZ;
    let a_ghz = params.hyperfine_mhz * MHZ;
    let b0 = params.b0_tesla;

    let mut h = CMatrix::zeros(SPIN_DIM);
    let add = |h: &mut CMatrix, m: &CMatrix, w: f64| {
        for r in 0..SPIN_DIM {
            for c in 0..SPIN_DIM {
                h[(r, c)] += m[(r, c)] * w;
            }
        }
    };

    // Zeeman terms
    add(&mut h, &kron(&iz, &i2), -gamma_n_ghz * b0);
    add(&mut h, &kron(&i8, &sz), params.gamma_e_ghz_per_t * b0);
    // hyperfine S.I
    let nuclear = [&ix, &iy, &iz];
    let electron = [&sx, &sy, &sz];
    for axis in 0..3 {
        add(&mut h, &kron(nuclear[axis], electron[axis]), a_ghz);
    }
    // quadrupole sum over axis pairs
    for (a, na) in nuclear.iter().enumerate() {
        for (b, nb) in nuclear.iter().enumerate() {
            let q = params.quadrupole_khz[a][b] * KHZ;
            if q != 0.0 {
                add(&mut h, &kron(&na.mul(nb), &i2), q);
            }
        }
    }
    Ok(h)
}

/// Spin level label (nuclear level, electron level).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpinLevel {
    pub nuclear: u8,
    pub electron: u8,
}

impl SpinLevel {
    fn from_index(idx: usize) -> SpinLevel {
        SpinLevel {
            nuclear: (idx / 2) as u8,
            electron: (idx % 2) as u8,
        }
    }

    fn index(&self) -> usize {
        self.nuclear as usize * 2 + self.electron as usize
    }
}

impl std::fmt::Display for SpinLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let m = nuclear_m_value(self.nuclear as usize);
        let arrow = if self.electron == 0 { "down" } else { "up" };
        write!(f, "|m_I={m:+.1},{arrow}>")
    }
}

/// Diagonalized spin Hamiltonian.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Eigenvalues in GHz, ascending (ties broken by dominant label index).
    pub eigenvalues_ghz: Vec<f64>,
    /// Orthonormal eigenvectors as matrix columns, matching the eigenvalues.
    pub eigenvectors: CMatrix,
    /// Basis label with the largest amplitude in each eigenvector.
    pub dominant_labels: Vec<SpinLevel>,
}

/// Diagonalizes a Hermitian spin Hamiltonian.
pub fn spectrum(h: &CMatrix) -> Result<Spectrum> {
    if h.dim() != SPIN_DIM {
        return Err(Error::InvalidParameter(format!(
            "spin Hamiltonian must be {SPIN_DIM}x{SPIN_DIM}, got {}",
            h.dim()
        )));
    }
    let eig = h.hermitian_eigen()?;
    let dominant = |col: usize| -> usize {
        let mut best = 0;
        let mut best_mag = -1.0;
        for r in 0..SPIN_DIM {
            let mag = eig.vectors[(r, col)].norm();
            if mag > best_mag + 1e-15 {
                best_mag = mag;
                best = r;
            }
        }
        best
    };
    let mut order: Vec<(usize, usize)> = (0..SPIN_DIM).map(|c| (c, dominant(c))).collect();
    order.sort_by(|a, b| {
        eig.values[a.0]
            .total_cmp(&eig.values[b.0])
            .then(a.1.cmp(&b.1))
    });

    let eigenvalues_ghz: Vec<f64> = order.iter().map(|&(c, _)| eig.values[c]).collect();
    let dominant_labels: Vec<SpinLevel> = order
        .iter()
        .map(|&(_, d)| SpinLevel::from_index(d))
        .collect();
    // fix each eigenvector's global phase: dominant entry real-positive
    let mut eigenvectors = CMatrix::zeros(SPIN_DIM);
    for (new_col, &(c, d)) in order.iter().enumerate() {
        let pivot = eig.vectors[(d, c)];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for r in 0..SPIN_DIM {
            eigenvectors[(r, new_col)] = eig.vectors[(r, c)] * phase;
        }
    }
    Ok(Spectrum {
        eigenvalues_ghz,
        eigenvectors,
        dominant_labels,
    })
}

impl Spectrum {
    /// Energy of the eigenstate dominated by `level`; errors when the
    /// dominant labels do not identify the basis uniquely.
    pub fn energy_of(&self, level: SpinLevel) -> Result<f64> {
        self.check_labelling()?;
        let pos = self
            .dominant_labels
            .iter()
            .position(|&l| l == level)
            .expect("bijective labelling covers every level");
        Ok(self.eigenvalues_ghz[pos])
    }

    /// Errors unless the dominant labels form a bijection onto the basis.
    pub fn check_labelling(&self) -> Result<()> {
        let mut seen = [false; SPIN_DIM];
        for l in &self.dominant_labels {
            let idx = l.index();
            if seen[idx] {
                return Err(Error::DegenerateSpectrum(format!(
                    "two eigenvectors share dominant label {l}"
                )));
            }
            seen[idx] = true;
        }
        Ok(())
    }
}

/// Transition families of the donor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionKind {
    /// Electron flip at fixed nuclear projection (8 lines).
    Esr,
    /// Adjacent nuclear step inside the electron-down manifold (7 lines).
    NmrDown,
    /// Adjacent nuclear step inside the electron-up manifold (7 lines).
    NmrUp,
    /// Flip-flop |m_I, down> <-> |m_I - 1, up| (7 lines).
    Edsr,
}

impl std::fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransitionKind::Esr => write!(f, "ESR"),
            TransitionKind::NmrDown => write!(f, "NMR_down"),
            TransitionKind::NmrUp => write!(f, "NMR_up"),
            TransitionKind::Edsr => write!(f, "EDSR"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEntry {
    pub from: SpinLevel,
    pub to: SpinLevel,
    pub frequency_ghz: f64,
}

#[derive(Clone, Debug)]
pub struct TransitionTable {
    pub kind: TransitionKind,
    pub entries: Vec<TransitionEntry>,
}

/// Enumerates the addressable transitions of one family.
pub fn transition_table(spec: &Spectrum, kind: TransitionKind) -> Result<TransitionTable> {
    spec.check_labelling()?;
    let pairs: Vec<(SpinLevel, SpinLevel)> = match kind {
        TransitionKind::Esr => (0..8)
            .map(|n| {
                (
                    SpinLevel {
                        nuclear: n,
                        electron: 0,
                    },
                    SpinLevel {
                        nuclear: n,
                        electron: 1,
                    },
                )
            })
            .collect(),
        TransitionKind::NmrDown | TransitionKind::NmrUp => {
            let e = if kind == TransitionKind::NmrDown { 0 } else { 1 };
            (0..7)
                .map(|n| {
                    (
                        SpinLevel {
                            nuclear: n,
                            electron: e,
                        },
                        SpinLevel {
                            nuclear: n + 1,
                            electron: e,
                        },
                    )
                })
                .collect()
        }
        TransitionKind::Edsr => (0..7)
            .map(|n| {
                (
                    SpinLevel {
                        nuclear: n,
                        electron: 0,
                    },
                    SpinLevel {
                        nuclear: n + 1,
                        electron: 1,
                    },
                )
            })
            .collect(),
    };
    let mut entries = Vec::with_capacity(pairs.len());
    for (from, to) in pairs {
        let f = (spec.energy_of(to)? - spec.energy_of(from)?).abs();
        if !(f > 0.0) {
            return Err(Error::DegenerateSpectrum(format!(
                "transition {from} <-> {to} has zero frequency"
            )));
        }
        entries.push(TransitionEntry {
            from,
            to,
            frequency_ghz: f,
        });
    }
    Ok(TransitionTable { kind, entries })
}

/// Frequency of the emission flip-flop line |7/2, down> <-> |5/2, up>.
pub fn edsr_flipflop_frequency(params: &SpinSystemParams) -> Result<f64> {
    let spec = spectrum(&build_hamiltonian(params)?)?;
    let from = SpinLevel {
        nuclear: 0,
        electron: 0,
    };
    let to = SpinLevel {
        nuclear: 1,
        electron: 1,
    };
    Ok((spec.energy_of(to)? - spec.energy_of(from)?).abs())
}

/// Calibration tolerance on the flip-flop frequency, GHz (1 kHz).
pub const CALIBRATION_TOL_GHZ: f64 = 1e-6;
const CALIBRATION_MAX_ITERS: usize = 60;

/// Finds the field at which the flip-flop line hits `target_ghz`, by
/// bisection over `bracket` (the frequency is monotone in B0 there).
pub fn calibrate_b0(
    params: &SpinSystemParams,
    target_ghz: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "calibration bracket [{lo}, {hi}] is not an increasing positive interval"
        )));
    }
    let f = |b: f64| -> Result<f64> {
        edsr_flipflop_frequency(&params.clone().with_b0(b)).map(|freq| freq - target_ghz)
    };
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::TargetNotBracketed {
            target: target_ghz,
            lo,
            hi,
            f_lo: f_lo + target_ghz,
            f_hi: f_hi + target_ghz,
        });
    }
    let (mut lo, mut hi, mut f_lo) = (lo, hi, f_lo);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..CALIBRATION_MAX_ITERS {
        mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.abs() <= CALIBRATION_TOL_GHZ {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::InvalidParameter(format!(
        "calibration did not reach {CALIBRATION_TOL_GHZ} GHz within {CALIBRATION_MAX_ITERS} iterations (last B0 = {mid})"
    )))
}
