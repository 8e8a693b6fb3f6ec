//! Gate matrices, durations, and the stochastic noise model.
//!
//! Ideal gates are exact unitaries on the donor spin registers. Noise is
//! trajectory-based: with probability `1 - fidelity` a gate suffers a phase
//! flip (a random nontrivial sign pattern across the levels it addresses),
//! and when dephasing is enabled each gate additionally dephases its target
//! subsystem with probability `1 - exp(-duration/T2)`. Density matrices are
//! never formed; ensemble statistics come from averaging seeded pure-state
//! trajectories.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng;
use crate::state_algebra::{BasisLabel, SparseState, Subsystem};

/// Abstract gate kinds of the protocol.
#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    /// Qudit Hadamard on the 8 nuclear levels (order-8 Fourier matrix).
    Hadamard8,
    /// Swap of two nuclear levels (population permutation).
    Permutation { a: u8, b: u8 },
    /// Electron flip conditioned on nuclear level `nuclear`.
    EsrFlip { nuclear: u8 },
    /// Flip-flop |7/2, down> <-> |5/2, up> (nuclear indices 0 and 1).
    EdsrFlipFlop,
    /// Adjacent nuclear swap between `level` and `level + 1`.
    NmrStep { level: u8 },
    /// Diagonal phase per photonic mode, applied as a frame correction.
    PhaseCorrection(Vec<f64>),
    /// Electron flip across all nuclear levels at once (all eight lines).
    BroadbandEsr,
    /// Cavity emission into one time bin.
    Emission { bin: u8 },
    /// Simultaneous relaxation through the per-line cavities.
    FrequencyEmission,
    /// State preparation of |7/2, down, vac>.
    Init,
}

impl GateKind {
    pub fn class(&self) -> GateClass {
        match self {
            GateKind::Hadamard8 => GateClass::Hadamard8,
            GateKind::Permutation { .. } => GateClass::Permutation,
            GateKind::EsrFlip { .. } | GateKind::BroadbandEsr => GateClass::Esr,
            GateKind::EdsrFlipFlop => GateClass::Edsr,
            GateKind::NmrStep { .. } => GateClass::Nmr,
            GateKind::PhaseCorrection(_) => GateClass::PhaseCorrection,
            GateKind::Emission { .. } | GateKind::FrequencyEmission => GateClass::Emission,
            GateKind::Init => GateClass::Init,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::Hadamard8 => write!(f, "hadamard8"),
            GateKind::Permutation { a, b } => write!(f, "permutation({a},{b})"),
            GateKind::EsrFlip { nuclear } => write!(f, "esr_flip({nuclear})"),
            GateKind::EdsrFlipFlop => write!(f, "edsr_flipflop"),
            GateKind::NmrStep { level } => write!(f, "nmr_step({level})"),
            GateKind::PhaseCorrection(_) => write!(f, "phase_correction"),
            GateKind::BroadbandEsr => write!(f, "broadband_esr"),
            GateKind::Emission { bin } => write!(f, "emission({bin})"),
            GateKind::FrequencyEmission => write!(f, "frequency_emission"),
            GateKind::Init => write!(f, "init"),
        }
    }
}

/// Fidelity classes of the noise table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum GateClass {
    Init,
    Nmr,
    Esr,
    Edsr,
    Hadamard8,
    Permutation,
    Emission,
    PhaseCorrection,
}

/// Default wall-clock duration of a gate in microseconds.
///
/// ESR pulses run about 1 us and EDSR about 10 us; an NMR pi-pulse takes a
/// few tens of us (resolved to 30); the qudit Hadamard up to 100 us; cavity
/// emission 333 ns. Non-adjacent permutations go through the sub-global
/// rotation route at 200 us, adjacent ones are a single NMR pulse.
pub fn gate_duration(kind: &GateKind) -> f64 {
    match kind {
        GateKind::Hadamard8 => 100.0,
        GateKind::Permutation { a, b } => {
            if a.abs_diff(*b) == 1 {
                30.0
            } else {
                200.0
            }
        }
        GateKind::EsrFlip { .. } | GateKind::BroadbandEsr => 1.0,
        GateKind::EdsrFlipFlop => 10.0,
        GateKind::NmrStep { .. } => 30.0,
        GateKind::PhaseCorrection(_) => 0.0,
        GateKind::Emission { .. } | GateKind::FrequencyEmission => 0.333,
        GateKind::Init => 0.0,
    }
}

/// A gate together with its booked duration and configured fidelity.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub duration_us: f64,
    pub fidelity: f64,
}

impl GateOp {
    /// Builds an op with the default duration and the noise table's fidelity.
    pub fn new(kind: GateKind, noise: &NoiseSpec) -> GateOp {
        let duration_us = gate_duration(&kind);
        let fidelity = noise.fidelity(kind.class());
        GateOp {
            kind,
            duration_us,
            fidelity,
        }
    }

    pub fn with_duration(mut self, duration_us: f64) -> GateOp {
        self.duration_us = duration_us;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fidelity > 0.0 && self.fidelity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gate fidelity {} out of range (0, 1]",
                self.fidelity
            )));
        }
        if self.duration_us < 0.0 {
            return Err(Error::InvalidParameter(
                "gate duration must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Noise configuration: per-class gate fidelities and coherence times.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Master switch; everything below is ignored when false.
    pub enabled: bool,
    /// Applies per-gate T2 dephasing in addition to the fidelity errors.
    pub dephasing: bool,
    pub gate_fidelities: BTreeMap<GateClass, f64>,
    pub t2_electron_us: f64,
    pub t2_nucleus_hadamard_us: f64,
    pub t1_electron_s: f64,
}

impl NoiseSpec {
    fn measured_fidelities() -> BTreeMap<GateClass, f64> {
        let mut m = BTreeMap::new();
        m.insert(GateClass::Init, 0.995);
        m.insert(GateClass::Nmr, 0.998);
        m.insert(GateClass::Esr, 0.995);
        m.insert(GateClass::Edsr, 0.995);
        m.insert(GateClass::Hadamard8, 0.998);
        m.insert(GateClass::Permutation, 0.998);
        m.insert(GateClass::Emission, 1.0);
        m.insert(GateClass::PhaseCorrection, 1.0);
        m
    }

    /// Noise switched off; fields keep the measured defaults.
    pub fn disabled() -> NoiseSpec {
        NoiseSpec {
            enabled: false,
            ..NoiseSpec::gate_errors_only()
        }
    }

    /// Measured gate fidelities active, per-gate dephasing off.
    pub fn gate_errors_only() -> NoiseSpec {
        NoiseSpec {
            enabled: true,
            dephasing: false,
            gate_fidelities: NoiseSpec::measured_fidelities(),
            t2_electron_us: 510.0,
            t2_nucleus_hadamard_us: 247.0,
            t1_electron_s: 2.44,
        }
    }

    /// Gate fidelities plus duration-driven T2 dephasing.
    pub fn full() -> NoiseSpec {
        NoiseSpec {
            dephasing: true,
            ..NoiseSpec::gate_errors_only()
        }
    }

    pub fn fidelity(&self, class: GateClass) -> f64 {
        self.gate_fidelities.get(&class).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        for (class, f) in &self.gate_fidelities {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "fidelity {f} for {class:?} out of range (0, 1]"
                )));
            }
        }
        for (name, t) in [
            ("t2_electron_us", self.t2_electron_us),
            ("t2_nucleus_hadamard_us", self.t2_nucleus_hadamard_us),
            ("t1_electron_s", self.t1_electron_s),
        ] {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::disabled()
    }
}

/// A stochastic event recorded on a trajectory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoiseEvent {
    /// Phase flip across the levels the gate addresses.
    PhaseFlip,
    /// T2 dephasing on the gate's target subsystem.
    Dephasing,
    /// Preparation landed in the wrong nuclear level.
    InitFlip { to: u8 },
}

impl fmt::Display for NoiseEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseEvent::PhaseFlip => write!(f, "phase_flip"),
            NoiseEvent::Dephasing => write!(f, "dephasing"),
            NoiseEvent::InitFlip { to } => write!(f, "init_flip({to})"),
        }
    }
}

/// The explicit SU(8) qudit Hadamard: `H[j][k] = exp(2 pi i j k / 8)/sqrt(8)`.
///
/// Every entry has magnitude `1/sqrt(8)`; column 0 is uniform and real, so
/// applying it to `|7/2>` prepares the uniform nuclear superposition.
pub fn qudit_hadamard_matrix() -> CMatrix {
    let norm = 1.0 / 8f64.sqrt();
    CMatrix::from_fn(8, |j, k| {
        Complex64::from_polar(norm, 2.0 * std::f64::consts::PI * (j * k % 8) as f64 / 8.0)
    })
}

/// Transposition of nuclear levels `i` and `j` as an 8x8 unitary.
pub fn permutation_gate(i: u8, j: u8) -> Result<CMatrix> {
    if i == j {
        return Err(Error::InvalidParameter(
            "permutation requires two distinct levels".into(),
        ));
    }
    if i >= 8 || j >= 8 {
        return Err(Error::InvalidParameter(format!(
            "permutation levels ({i},{j}) out of range 0..8"
        )));
    }
    let mut m = CMatrix::identity(8);
    m[(i as usize, i as usize)] = Complex64::new(0.0, 0.0);
    m[(j as usize, j as usize)] = Complex64::new(0.0, 0.0);
    m[(i as usize, j as usize)] = Complex64::new(1.0, 0.0);
    m[(j as usize, i as usize)] = Complex64::new(1.0, 0.0);
    Ok(m)
}

/// Swaps the amplitudes of two spin labels for every photonic pattern.
fn swap_spin_labels(state: &SparseState, a: (u8, u8), b: (u8, u8)) -> SparseState {
    let register = *state.register();
    let terms = state.terms().map(|(label, amp)| {
        let spin = (label.nuclear, label.electron);
        let out = if spin == a {
            BasisLabel::new(b.0, b.1, label.occupations)
        } else if spin == b {
            BasisLabel::new(a.0, a.1, label.occupations)
        } else {
            label
        };
        (out, amp)
    });
    SparseState::from_terms(register, terms).expect("spin swap preserves the register")
}

/// Applies the ideal unitary of a spin gate or phase correction.
///
/// Emission kinds are owned by the protocol module (they involve the cavity
/// subspace, not a spin unitary) and are rejected here.
pub fn apply_ideal(state: &SparseState, kind: &GateKind) -> Result<SparseState> {
    match kind {
        GateKind::Hadamard8 => {
            state.apply_unitary(&qudit_hadamard_matrix(), &Subsystem::Nuclear)
        }
        GateKind::Permutation { a, b } => {
            state.apply_unitary(&permutation_gate(*a, *b)?, &Subsystem::Nuclear)
        }
        GateKind::NmrStep { level } => {
            if *level >= 7 {
                return Err(Error::InvalidParameter(format!(
                    "nmr step level {level} has no neighbour below"
                )));
            }
            state.apply_unitary(&permutation_gate(*level, *level + 1)?, &Subsystem::Nuclear)
        }
        GateKind::EsrFlip { nuclear } => {
            if *nuclear >= 8 {
                return Err(Error::InvalidParameter(format!(
                    "esr flip nuclear index {nuclear} out of range"
                )));
            }
            Ok(swap_spin_labels(state, (*nuclear, 0), (*nuclear, 1)))
        }
        GateKind::EdsrFlipFlop => Ok(swap_spin_labels(state, (0, 0), (1, 1))),
        GateKind::BroadbandEsr => {
            let mut x = CMatrix::zeros(2);
            x[(0, 1)] = Complex64::new(1.0, 0.0);
            x[(1, 0)] = Complex64::new(1.0, 0.0);
            state.apply_unitary(&x, &Subsystem::Electron)
        }
        GateKind::PhaseCorrection(phases) => {
            if phases.len() != state.register().modes {
                return Err(Error::RegisterMismatch(format!(
                    "phase correction has {} phases for {} modes",
                    phases.len(),
                    state.register().modes
                )));
            }
            let diag: Vec<Complex64> = phases
                .iter()
                .map(|&t| Complex64::from_polar(1.0, t))
                .collect();
            state.apply_unitary(
                &CMatrix::diagonal(&diag),
                &Subsystem::Modes((0..phases.len()).collect()),
            )
        }
        GateKind::Init => Ok(state.clone()),
        GateKind::Emission { .. } | GateKind::FrequencyEmission => Err(Error::InvalidParameter(
            "emission is applied by the protocol module".into(),
        )),
    }
}

/// Levels a phase flip addresses, per gate kind.
enum FlipTarget {
    NuclearLevels(Vec<u8>),
    SpinLabels(Vec<(u8, u8)>),
    Electron,
    None,
}

fn flip_target(kind: &GateKind) -> FlipTarget {
    match kind {
        GateKind::Hadamard8 => FlipTarget::NuclearLevels((0..8).collect()),
        GateKind::Permutation { a, b } => FlipTarget::NuclearLevels(vec![*a, *b]),
        GateKind::NmrStep { level } => FlipTarget::NuclearLevels(vec![*level, *level + 1]),
        GateKind::EsrFlip { nuclear } => {
            FlipTarget::SpinLabels(vec![(*nuclear, 0), (*nuclear, 1)])
        }
        GateKind::EdsrFlipFlop => FlipTarget::SpinLabels(vec![(0, 0), (1, 1)]),
        GateKind::BroadbandEsr
        | GateKind::Emission { .. }
        | GateKind::FrequencyEmission => FlipTarget::Electron,
        GateKind::PhaseCorrection(_) | GateKind::Init => FlipTarget::None,
    }
}

/// Random sign pattern over `n` units, excluding the two trivial (global
/// phase) patterns, so a sampled flip always changes relative phases.
fn nontrivial_signs(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let signs: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        if signs.iter().any(|&s| s != signs[0]) {
            return signs;
        }
    }
}

fn apply_signs(state: &SparseState, target: &FlipTarget, signs: &[f64]) -> SparseState {
    let register = *state.register();
    let terms = state.terms().map(|(label, amp)| {
        let sign = match target {
            FlipTarget::NuclearLevels(set) => set
                .iter()
                .position(|&n| n == label.nuclear)
                .map_or(1.0, |i| signs[i]),
            FlipTarget::SpinLabels(set) => set
                .iter()
                .position(|&s| s == (label.nuclear, label.electron))
                .map_or(1.0, |i| signs[i]),
            FlipTarget::Electron => signs[label.electron as usize],
            FlipTarget::None => 1.0,
        };
        (label, amp * sign)
    });
    SparseState::from_terms(register, terms).expect("sign flips preserve the register")
}

/// Dephasing T2 constant and sign-pattern width for a gate class.
fn dephasing_channel(class: GateClass, noise: &NoiseSpec) -> Option<(FlipTarget, f64)> {
    match class {
        GateClass::Esr | GateClass::Edsr | GateClass::Emission => {
            Some((FlipTarget::Electron, noise.t2_electron_us))
        }
        GateClass::Hadamard8 | GateClass::Permutation | GateClass::Nmr => Some((
            FlipTarget::NuclearLevels((0..8).collect()),
            noise.t2_nucleus_hadamard_us,
        )),
        GateClass::PhaseCorrection | GateClass::Init => None,
    }
}

/// Stochastic errors applied after a gate's ideal action; shared by
/// [`apply_noisy_gate`] and the protocol's emission steps.
pub(crate) fn apply_noise(
    state: SparseState,
    op: &GateOp,
    noise: &NoiseSpec,
    rng: &mut ChaCha8Rng,
) -> (SparseState, Vec<NoiseEvent>) {
    let mut events = Vec::new();
    if !noise.enabled {
        return (state, events);
    }
    let mut out = state;

    if op.kind == GateKind::Init {
        if rng.gen::<f64>() < 1.0 - op.fidelity {
            let offset = rng.gen_range(1u8..8);
            let register = *out.register();
            let mut to = 0;
            let terms: Vec<(BasisLabel, Complex64)> = out
                .terms()
                .map(|(label, amp)| {
                    let wrong = (label.nuclear + offset) % 8;
                    to = wrong;
                    (
                        BasisLabel::new(wrong, label.electron, label.occupations),
                        amp,
                    )
                })
                .collect();
            out = SparseState::from_terms(register, terms).expect("init flip keeps the register");
            events.push(NoiseEvent::InitFlip { to });
        }
        return (out, events);
    }

    let target = flip_target(&op.kind);
    let width = match &target {
        FlipTarget::NuclearLevels(set) => set.len(),
        FlipTarget::SpinLabels(set) => set.len(),
        FlipTarget::Electron => 2,
        FlipTarget::None => 0,
    };

    if width > 0 && rng.gen::<f64>() < 1.0 - op.fidelity {
        let signs = nontrivial_signs(width, rng);
        out = apply_signs(&out, &target, &signs);
        events.push(NoiseEvent::PhaseFlip);
    }

    if noise.dephasing && op.duration_us > 0.0 {
        if let Some((deph_target, t2)) = dephasing_channel(op.kind.class(), noise) {
            let p = 1.0 - (-op.duration_us / t2).exp();
            if rng.gen::<f64>() < p {
                let w = match &deph_target {
                    FlipTarget::NuclearLevels(set) => set.len(),
                    _ => 2,
                };
                let signs = nontrivial_signs(w, rng);
                out = apply_signs(&out, &deph_target, &signs);
                events.push(NoiseEvent::Dephasing);
            }
        }
    }
    (out, events)
}

/// Applies a gate's ideal unitary followed by its stochastic error channel.
///
/// With noise disabled this is exactly the ideal gate. Each call consumes
/// its own seeded stream, so trajectory ensembles parallelize without
/// ordering effects.
pub fn apply_noisy_gate(
    state: &SparseState,
    op: &GateOp,
    noise: &NoiseSpec,
    rng_seed: u64,
) -> Result<(SparseState, Vec<NoiseEvent>)> {
    op.validate()?;
    noise.validate()?;
    let ideal = apply_ideal(state, &op.kind)?;
    let mut rng = rng::stream(rng_seed);
    Ok(apply_noise(ideal, op, noise, &mut rng))
}
