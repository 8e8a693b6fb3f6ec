//! Sparse complex state vectors over composite labels.
//!
//! A basis label is `(nuclear level, electron level, per-mode occupations)`.
//! Protocol states never exceed a few dozen terms even though the ambient
//! Hilbert space (16 spin levels times 2^modes photonic patterns) is huge, so
//! amplitudes live in a `BTreeMap` keyed by a packed label. The map ordering
//! doubles as the canonical label order used by dumps and the global-phase
//! convention.
//!
//! Occupations are restricted to 0/1 per mode with at most four photons per
//! register; that covers every construction in this crate (the largest is the
//! four-photon third-quantized reference state).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, UNITARITY_TOL};
use crate::rng;

/// Amplitudes below this magnitude are dropped after public operations.
pub const PRUNE_EPS: f64 = 1e-14;
/// Norm agreement required of public operation outputs.
pub const NORM_TOL: f64 = 1e-10;
/// Fidelity threshold defining "equal up to phase" in tests.
pub const STATE_EQ_FIDELITY: f64 = 1.0 - 1e-9;
/// Hard cap on photons per register.
pub const MAX_PHOTONS: u32 = 4;
/// Hard cap on modes per register (labels pack occupations into 32 bits).
pub const MAX_MODES: usize = 32;

/// Shape of a state's composite register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Register {
    /// Nuclear levels (8 for the donor, 1 when the spin has been traced out).
    pub nuclear_levels: usize,
    /// Electron levels (2 for the donor, 1 when absent).
    pub electron_levels: usize,
    /// Number of photonic modes (time bins or cavity frequencies).
    pub modes: usize,
}

impl Register {
    /// Donor spin (8 nuclear x 2 electron levels) plus `modes` photonic modes.
    pub fn spin_with_modes(modes: usize) -> Register {
        Register {
            nuclear_levels: 8,
            electron_levels: 2,
            modes,
        }
    }

    /// Photon-only register.
    pub fn photonic(modes: usize) -> Register {
        Register {
            nuclear_levels: 1,
            electron_levels: 1,
            modes,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.modes > MAX_MODES {
            return Err(Error::InvalidParameter(format!(
                "register supports at most {MAX_MODES} modes, got {}",
                self.modes
            )));
        }
        if self.nuclear_levels == 0 || self.electron_levels == 0 {
            return Err(Error::InvalidParameter(
                "register subsystem dimensions must be nonzero".into(),
            ));
        }
        Ok(())
    }

    /// True when the register carries a nontrivial spin part.
    pub fn has_spin(&self) -> bool {
        self.nuclear_levels > 1 || self.electron_levels > 1
    }
}

/// One basis label of the composite register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BasisLabel {
    /// Nuclear level index, 0..8; index 0 is m_I = +7/2, descending.
    pub nuclear: u8,
    /// Electron level index; 0 is spin-down.
    pub electron: u8,
    /// Photon occupations, bit `i` set when mode `i` holds a photon.
    pub occupations: u32,
}

impl BasisLabel {
    pub fn new(nuclear: u8, electron: u8, occupations: u32) -> BasisLabel {
        BasisLabel {
            nuclear,
            electron,
            occupations,
        }
    }

    /// Spin-only label over the vacuum.
    pub fn spin(nuclear: u8, electron: u8) -> BasisLabel {
        BasisLabel::new(nuclear, electron, 0)
    }

    /// Photon-only label.
    pub fn photons(occupations: u32) -> BasisLabel {
        BasisLabel::new(0, 0, occupations)
    }

    pub fn photon_count(&self) -> u32 {
        self.occupations.count_ones()
    }

    pub fn occupied(&self, mode: usize) -> bool {
        self.occupations >> mode & 1 == 1
    }

    fn pack(&self) -> u64 {
        (self.nuclear as u64) << 40 | (self.electron as u64) << 32 | self.occupations as u64
    }

    fn unpack(key: u64) -> BasisLabel {
        BasisLabel {
            nuclear: (key >> 40) as u8,
            electron: (key >> 32 & 0xff) as u8,
            occupations: key as u32,
        }
    }

    fn validate(&self, reg: &Register) -> Result<()> {
        if (self.nuclear as usize) >= reg.nuclear_levels {
            return Err(Error::InvalidParameter(format!(
                "nuclear index {} out of range 0..{}",
                self.nuclear, reg.nuclear_levels
            )));
        }
        if (self.electron as usize) >= reg.electron_levels {
            return Err(Error::InvalidParameter(format!(
                "electron index {} out of range 0..{}",
                self.electron, reg.electron_levels
            )));
        }
        if reg.modes < MAX_MODES && self.occupations >> reg.modes != 0 {
            return Err(Error::InvalidParameter(format!(
                "occupation pattern {:#b} uses modes beyond the register's {}",
                self.occupations, reg.modes
            )));
        }
        if self.photon_count() > MAX_PHOTONS {
            return Err(Error::UnsupportedOccupancy(format!(
                "{} photons exceed the cap of {MAX_PHOTONS}",
                self.photon_count()
            )));
        }
        Ok(())
    }

    /// Occupation bitstring with mode 0 leftmost, e.g. `01000000`.
    pub fn occupation_string(&self, modes: usize) -> String {
        (0..modes)
            .map(|m| if self.occupied(m) { '1' } else { '0' })
            .collect()
    }
}

/// Which part of the register an operator or measurement addresses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subsystem {
    Nuclear,
    Electron,
    /// A block of photonic modes, by index. Non-diagonal unitaries on a mode
    /// block act on the single-photon sector (photon in mode i -> sum over
    /// modes j of u[j][i]); labels with two or more photons inside the block
    /// are rejected unless the unitary is diagonal.
    Modes(Vec<usize>),
}

/// Sparse complex-amplitude state over [`BasisLabel`]s.
#[derive(Clone, Debug)]
pub struct SparseState {
    register: Register,
    amps: BTreeMap<u64, Complex64>,
}

impl SparseState {
    /// Basis state `|label>`.
    pub fn basis_state(register: Register, label: BasisLabel) -> Result<SparseState> {
        register.validate()?;
        label.validate(&register)?;
        let mut amps = BTreeMap::new();
        amps.insert(label.pack(), Complex64::new(1.0, 0.0));
        Ok(SparseState { register, amps })
    }

    /// Vacuum state of the register (spin indices 0, no photons).
    pub fn vacuum(register: Register) -> Result<SparseState> {
        SparseState::basis_state(register, BasisLabel::new(0, 0, 0))
    }

    /// Builds a normalized state from labelled amplitudes.
    pub fn from_terms(
        register: Register,
        terms: impl IntoIterator<Item = (BasisLabel, Complex64)>,
    ) -> Result<SparseState> {
        register.validate()?;
        let mut amps = BTreeMap::new();
        for (label, amp) in terms {
            label.validate(&register)?;
            *amps.entry(label.pack()).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let mut state = SparseState { register, amps };
        state.prune();
        let n = state.norm_sqr();
        if n <= 0.0 {
            return Err(Error::InvalidParameter(
                "state construction produced zero norm".into(),
            ));
        }
        state.scale(1.0 / n.sqrt());
        Ok(state)
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    /// Number of stored terms.
    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    /// Iterates terms in canonical label order.
    pub fn terms(&self) -> impl Iterator<Item = (BasisLabel, Complex64)> + '_ {
        self.amps.iter().map(|(&k, &a)| (BasisLabel::unpack(k), a))
    }

    /// Amplitude of a label (zero when absent).
    pub fn amplitude(&self, label: BasisLabel) -> Complex64 {
        self.amps
            .get(&label.pack())
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    fn scale(&mut self, factor: f64) {
        for a in self.amps.values_mut() {
            *a *= factor;
        }
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE_EPS);
    }

    fn renormalized(mut self) -> SparseState {
        let n = self.norm_sqr();
        if n > 0.0 {
            self.scale(1.0 / n.sqrt());
        }
        self.prune();
        self
    }

    /// Applies the global-phase convention: the first nonzero amplitude in
    /// label order is made real and positive.
    pub fn canonicalize_phase(mut self) -> SparseState {
        if let Some((_, &a)) = self.amps.iter().next() {
            let r = a.norm();
            if r > 0.0 {
                let phase = a.conj() / r;
                for amp in self.amps.values_mut() {
                    *amp *= phase;
                }
            }
        }
        self
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &SparseState) -> Result<Complex64> {
        if self.register != other.register {
            return Err(Error::RegisterMismatch(
                "inner product requires identical registers".into(),
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in &self.amps {
            if let Some(b) = other.amps.get(k) {
                acc += a.conj() * b;
            }
        }
        Ok(acc)
    }

    /// Fidelity `|<self|other>|^2`.
    pub fn fidelity(&self, other: &SparseState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Text dump, one line per term:
    /// `<nuclear>,<electron>,<occupation-bitstring>,<re>,<im>`, sorted by
    /// label (nuclear, then electron, then occupation pattern).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (label, amp) in self.terms() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                label.nuclear,
                label.electron,
                label.occupation_string(self.register.modes),
                amp.re,
                amp.im
            ));
        }
        out
    }

    /// Applies a unitary to one subsystem.
    pub fn apply_unitary(&self, u: &CMatrix, subsystem: &Subsystem) -> Result<SparseState> {
        u.require_unitary(UNITARITY_TOL)?;
        match subsystem {
            Subsystem::Nuclear => {
                if u.dim() != self.register.nuclear_levels {
                    return Err(Error::RegisterMismatch(format!(
                        "nuclear unitary must be {0}x{0}",
                        self.register.nuclear_levels
                    )));
                }
                self.apply_spin_unitary(u, |label| label.nuclear, |label, k| label.nuclear = k)
            }
            Subsystem::Electron => {
                if u.dim() != self.register.electron_levels {
                    return Err(Error::RegisterMismatch(format!(
                        "electron unitary must be {0}x{0}",
                        self.register.electron_levels
                    )));
                }
                self.apply_spin_unitary(u, |label| label.electron, |label, k| label.electron = k)
            }
            Subsystem::Modes(block) => self.apply_mode_unitary(u, block),
        }
    }

    fn apply_spin_unitary(
        &self,
        u: &CMatrix,
        read: impl Fn(&BasisLabel) -> u8,
        write: impl Fn(&mut BasisLabel, u8),
    ) -> Result<SparseState> {
        let mut amps: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (label, amp) in self.terms() {
            let col = read(&label) as usize;
            for row in 0..u.dim() {
                let coeff = u[(row, col)];
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                let mut out = label;
                write(&mut out, row as u8);
                *amps.entry(out.pack()).or_insert(Complex64::new(0.0, 0.0)) += coeff * amp;
            }
        }
        let mut state = SparseState {
            register: self.register,
            amps,
        };
        state.prune();
        Ok(state)
    }

    fn apply_mode_unitary(&self, u: &CMatrix, block: &[usize]) -> Result<SparseState> {
        if u.dim() != block.len() {
            return Err(Error::RegisterMismatch(format!(
                "mode-block unitary is {}x{0} but the block has {} modes",
                u.dim(),
                block.len()
            )));
        }
        let mut seen = 0u32;
        for &m in block {
            if m >= self.register.modes {
                return Err(Error::InvalidParameter(format!(
                    "mode {m} out of range 0..{}",
                    self.register.modes
                )));
            }
            if seen >> m & 1 == 1 {
                return Err(Error::InvalidParameter(format!(
                    "mode {m} repeated in block"
                )));
            }
            seen |= 1 << m;
        }

        let diagonal = u.is_diagonal(PRUNE_EPS);
        let mut amps: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (label, amp) in self.terms() {
            let occupied: Vec<usize> = (0..block.len())
                .filter(|&j| label.occupied(block[j]))
                .collect();
            if diagonal {
                let mut phase = Complex64::new(1.0, 0.0);
                for &j in &occupied {
                    phase *= u[(j, j)];
                }
                *amps
                    .entry(label.pack())
                    .or_insert(Complex64::new(0.0, 0.0)) += phase * amp;
            } else {
                match occupied.len() {
                    0 => {
                        *amps
                            .entry(label.pack())
                            .or_insert(Complex64::new(0.0, 0.0)) += amp;
                    }
                    1 => {
                        let src = occupied[0];
                        for dst in 0..block.len() {
                            let coeff = u[(dst, src)];
                            if coeff.norm_sqr() == 0.0 {
                                continue;
                            }
                            let mut out = label;
                            out.occupations &= !(1u32 << block[src]);
                            out.occupations |= 1u32 << block[dst];
                            *amps.entry(out.pack()).or_insert(Complex64::new(0.0, 0.0)) +=
                                coeff * amp;
                        }
                    }
                    _ => {
                        return Err(Error::UnsupportedOccupancy(
                            "non-diagonal mode unitaries act on the single-photon sector only"
                                .into(),
                        ))
                    }
                }
            }
        }
        let mut state = SparseState {
            register: self.register,
            amps,
        };
        state.prune();
        Ok(state)
    }

    fn outcome_value(&self, label: &BasisLabel, subsystem: &Subsystem) -> u32 {
        match subsystem {
            Subsystem::Nuclear => label.nuclear as u32,
            Subsystem::Electron => label.electron as u32,
            Subsystem::Modes(block) => {
                let mut v = 0u32;
                for (j, &m) in block.iter().enumerate() {
                    if label.occupied(m) {
                        v |= 1 << j;
                    }
                }
                v
            }
        }
    }

    /// Probability of each outcome of a projective measurement on the
    /// subsystem, in ascending outcome order.
    pub fn outcome_distribution(&self, subsystem: &Subsystem) -> BTreeMap<u32, f64> {
        let mut dist = BTreeMap::new();
        for (label, amp) in self.terms() {
            *dist
                .entry(self.outcome_value(&label, subsystem))
                .or_insert(0.0) += amp.norm_sqr();
        }
        dist
    }

    /// Post-measurement state conditioned on `outcome`, with its probability.
    pub fn project(&self, subsystem: &Subsystem, outcome: u32) -> Result<(SparseState, f64)> {
        let mut amps = BTreeMap::new();
        let mut prob = 0.0;
        for (label, amp) in self.terms() {
            if self.outcome_value(&label, subsystem) == outcome {
                prob += amp.norm_sqr();
                amps.insert(label.pack(), amp);
            }
        }
        if amps.is_empty() {
            return Err(Error::NoSupport(format!(
                "outcome {outcome} has zero probability"
            )));
        }
        let state = SparseState {
            register: self.register,
            amps,
        }
        .renormalized();
        Ok((state, prob))
    }

    /// Projective measurement with a Born-rule sample from the seeded stream.
    ///
    /// Returns `(outcome, post-measurement state, outcome probability)`.
    pub fn measure_projective(
        &self,
        subsystem: &Subsystem,
        rng_seed: u64,
    ) -> Result<(u32, SparseState, f64)> {
        let dist = self.outcome_distribution(subsystem);
        let total: f64 = dist.values().sum();
        let mut draw = rng::stream(rng_seed).gen::<f64>() * total;
        let mut chosen = None;
        for (&outcome, &p) in &dist {
            if draw < p {
                chosen = Some(outcome);
                break;
            }
            draw -= p;
        }
        // Guard against rounding at the upper edge of the cumulative walk.
        let outcome = chosen.unwrap_or_else(|| *dist.keys().next_back().expect("nonempty state"));
        let (state, prob) = self.project(subsystem, outcome)?;
        Ok((outcome, state, prob))
    }

    /// Drops trivial spin registers, leaving a photon-only state.
    ///
    /// Requires every term to share the same spin label (i.e. spin and
    /// photons are in a product state with a definite spin component).
    pub fn trace_out_spin(&self) -> Result<SparseState> {
        let mut spin = None;
        for (label, _) in self.terms() {
            let s = (label.nuclear, label.electron);
            if *spin.get_or_insert(s) != s {
                return Err(Error::StructureMismatch(
                    "spin is still entangled with the photonic register".into(),
                ));
            }
        }
        let register = Register::photonic(self.register.modes);
        let amps = self
            .amps
            .iter()
            .map(|(&k, &a)| (BasisLabel::photons(BasisLabel::unpack(k).occupations).pack(), a))
            .collect();
        Ok(SparseState { register, amps })
    }
}

/// `|W_k>`: one photon in an equal superposition over `k` modes.
pub fn w_state(k: usize) -> Result<SparseState> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "w_state requires at least one mode".into(),
        ));
    }
    let amp = Complex64::new(1.0 / (k as f64).sqrt(), 0.0);
    SparseState::from_terms(
        Register::photonic(k),
        (0..k).map(|m| (BasisLabel::photons(1 << m), amp)),
    )
}

/// Tensor product of two states on disjoint registers.
///
/// The result's modes are `a`'s modes followed by `b`'s. At most one factor
/// may carry a nontrivial spin register (there is a single donor).
pub fn tensor_product(a: &SparseState, b: &SparseState) -> Result<SparseState> {
    if a.register.has_spin() && b.register.has_spin() {
        return Err(Error::RegisterMismatch(
            "both factors carry a spin register; registers must be disjoint".into(),
        ));
    }
    let register = Register {
        nuclear_levels: a.register.nuclear_levels.max(b.register.nuclear_levels),
        electron_levels: a.register.electron_levels.max(b.register.electron_levels),
        modes: a.register.modes + b.register.modes,
    };
    register.validate()?;
    let shift = a.register.modes;
    let mut terms = Vec::with_capacity(a.term_count() * b.term_count());
    for (la, aa) in a.terms() {
        for (lb, ab) in b.terms() {
            let label = BasisLabel::new(
                la.nuclear.max(lb.nuclear),
                la.electron.max(lb.electron),
                la.occupations | lb.occupations << shift,
            );
            label.validate(&register)?;
            terms.push((label, aa * ab));
        }
    }
    SparseState::from_terms(register, terms)
}

/// First-quantized expansion of a single-occupancy pattern: all orderings of
/// the occupied modes, each with amplitude `1/sqrt(N!)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstQuantizedExpansion {
    /// All `N!` ordered mode sequences.
    pub sequences: Vec<Vec<usize>>,
    /// Common amplitude `1/sqrt(N!)`.
    pub amplitude: f64,
}

/// Expands a second-quantized occupation pattern into its first-quantized
/// form. Occupations above one photon per mode are outside this model.
pub fn first_quantized_expansion(occupations: &[u8]) -> Result<FirstQuantizedExpansion> {
    let mut modes = Vec::new();
    for (m, &occ) in occupations.iter().enumerate() {
        match occ {
            0 => {}
            1 => modes.push(m),
            _ => {
                return Err(Error::UnsupportedOccupancy(format!(
                    "mode {m} holds {occ} photons; single occupancy only"
                )))
            }
        }
    }
    let n = modes.len() as u32;
    if n > MAX_PHOTONS {
        return Err(Error::UnsupportedOccupancy(format!(
            "{n} photons exceed the cap of {MAX_PHOTONS}"
        )));
    }
    let mut sequences = Vec::new();
    permutations(&mut modes, 0, &mut sequences);
    sequences.sort();
    let count = sequences.len().max(1);
    Ok(FirstQuantizedExpansion {
        amplitude: 1.0 / (count as f64).sqrt(),
        sequences,
    })
}

fn permutations(items: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if start == items.len() {
        out.push(items.clone());
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permutations(items, start + 1, out);
        items.swap(start, i);
    }
}

/// The four-photon third-quantized reference state over four parties with
/// four local modes each (16 modes total; party `i` owns modes `4i..4i+4`).
///
/// Each of the `4!` terms places one photon per party, the local mode of
/// party `i` being `perm(i)` for a permutation `perm`; all amplitudes are
/// `1/sqrt(4!)`.
pub fn third_quantized_sigma(parties: [&str; 4]) -> Result<SparseState> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if parties[i] == parties[j] {
                return Err(Error::InvalidParameter(format!(
                    "duplicate party label {:?}",
                    parties[i]
                )));
            }
        }
    }
    let mut perms = Vec::new();
    let mut base = vec![0usize, 1, 2, 3];
    permutations(&mut base, 0, &mut perms);
    let amp = Complex64::new(1.0 / (perms.len() as f64).sqrt(), 0.0);
    let terms = perms.into_iter().map(|perm| {
        let mut occ = 0u32;
        for (party, &local) in perm.iter().enumerate() {
            occ |= 1 << (4 * party + local);
        }
        (BasisLabel::photons(occ), amp)
    });
    SparseState::from_terms(Register::photonic(16), terms)
}

/// Assignment of photonic modes to parties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyLayout {
    parties: usize,
    mode_to_party: Vec<usize>,
}

impl PartyLayout {
    /// Builds a layout from an explicit mode -> party map.
    pub fn new(parties: usize, mode_to_party: Vec<usize>) -> Result<PartyLayout> {
        if parties == 0 {
            return Err(Error::InvalidParameter("layout needs parties".into()));
        }
        for (m, &p) in mode_to_party.iter().enumerate() {
            if p >= parties {
                return Err(Error::InvalidParameter(format!(
                    "mode {m} assigned to party {p}, but only {parties} parties exist"
                )));
            }
        }
        Ok(PartyLayout {
            parties,
            mode_to_party,
        })
    }

    /// One mode per party: mode `i` belongs to party `i`.
    pub fn one_mode_per_party(k: usize) -> PartyLayout {
        PartyLayout {
            parties: k,
            mode_to_party: (0..k).collect(),
        }
    }

    /// `copies` identical k-mode registers concatenated; mode `i` of each
    /// copy belongs to party `i`.
    pub fn copies(copies: usize, k: usize) -> PartyLayout {
        PartyLayout {
            parties: k,
            mode_to_party: (0..copies * k).map(|m| m % k).collect(),
        }
    }

    /// Contiguous blocks: party `i` owns modes `per_party*i .. per_party*(i+1)`.
    pub fn contiguous(parties: usize, per_party: usize) -> PartyLayout {
        PartyLayout {
            parties,
            mode_to_party: (0..parties * per_party).map(|m| m / per_party).collect(),
        }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn modes(&self) -> usize {
        self.mode_to_party.len()
    }

    pub fn party_of(&self, mode: usize) -> usize {
        self.mode_to_party[mode]
    }

    /// Modes owned by a party, ascending.
    pub fn modes_of(&self, party: usize) -> Vec<usize> {
        (0..self.modes())
            .filter(|&m| self.mode_to_party[m] == party)
            .collect()
    }

    pub fn check_covers(&self, register: &Register) -> Result<()> {
        if self.modes() != register.modes {
            return Err(Error::RegisterMismatch(format!(
                "layout covers {} modes but the register has {}",
                self.modes(),
                register.modes
            )));
        }
        Ok(())
    }

    /// Photon count per party for an occupation pattern.
    pub fn party_counts(&self, label: &BasisLabel) -> Vec<u8> {
        let mut counts = vec![0u8; self.parties];
        for m in 0..self.modes() {
            if label.occupied(m) {
                counts[self.mode_to_party[m]] += 1;
            }
        }
        counts
    }
}

/// Distribution of per-party photon counts for a state under a layout.
pub fn occupation_distribution(
    state: &SparseState,
    layout: &PartyLayout,
) -> Result<BTreeMap<Vec<u8>, f64>> {
    layout.check_covers(state.register())?;
    let mut dist = BTreeMap::new();
    for (label, amp) in state.terms() {
        *dist.entry(layout.party_counts(&label)).or_insert(0.0) += amp.norm_sqr();
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn w8_has_eight_uniform_terms() {
        let w = w_state(8).unwrap();
        assert_eq!(w.term_count(), 8);
        for (label, amp) in w.terms() {
            assert_eq!(label.photon_count(), 1);
            assert_abs_diff_eq!(amp.re, 0.3535533905932738, epsilon = 1e-12);
            assert_abs_diff_eq!(amp.im, 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn w1_is_a_single_term() {
        let w = w_state(1).unwrap();
        assert_eq!(w.term_count(), 1);
        assert_abs_diff_eq!(w.amplitude(BasisLabel::photons(1)).re, 1.0, epsilon = 1e-12);
        assert!(w_state(0).is_err());
    }

    #[test]
    fn w4_overlap_with_basis_terms() {
        let w = w_state(4).unwrap();
        for m in 0..4 {
            let basis =
                SparseState::basis_state(Register::photonic(4), BasisLabel::photons(1 << m))
                    .unwrap();
            assert_abs_diff_eq!(w.inner(&basis).unwrap().norm(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn tensor_of_w8_pair_has_64_terms_of_one_eighth() {
        let w = w_state(8).unwrap();
        let ww = tensor_product(&w, &w).unwrap();
        assert_eq!(ww.term_count(), 64);
        for (label, amp) in ww.terms() {
            assert_eq!(label.photon_count(), 2);
            assert_abs_diff_eq!(amp.norm(), 0.125, epsilon = 1e-12);
        }
    }

    #[test]
    fn tensor_of_w2_pair_by_hand() {
        let w = w_state(2).unwrap();
        let ww = tensor_product(&w, &w).unwrap();
        assert_eq!(ww.term_count(), 4);
        for pattern in [0b0101u32, 0b1001, 0b0110, 0b1010] {
            assert_abs_diff_eq!(
                ww.amplitude(BasisLabel::photons(pattern)).re,
                0.5,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn vacuum_tensor_extends_register() {
        let vac = SparseState::vacuum(Register::photonic(3)).unwrap();
        let w = w_state(2).unwrap();
        let t = tensor_product(&vac, &w).unwrap();
        assert_eq!(t.register().modes, 5);
        assert_eq!(t.term_count(), 2);
        assert_abs_diff_eq!(
            t.amplitude(BasisLabel::photons(1 << 3)).re,
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn tensor_rejects_two_spin_registers() {
        let a = SparseState::vacuum(Register::spin_with_modes(1)).unwrap();
        let b = SparseState::vacuum(Register::spin_with_modes(1)).unwrap();
        assert!(matches!(
            tensor_product(&a, &b),
            Err(Error::RegisterMismatch(_))
        ));
    }

    #[test]
    fn identity_unitary_is_noop_and_inverse_restores() {
        let w = w_state(4).unwrap();
        let id = CMatrix::identity(4);
        let block = Subsystem::Modes(vec![0, 1, 2, 3]);
        let same = w.apply_unitary(&id, &block).unwrap();
        assert!(w.fidelity(&same).unwrap() >= STATE_EQ_FIDELITY);

        // a random mode rotation followed by its inverse
        let theta: f64 = 0.7;
        let mut u = CMatrix::identity(4);
        u[(0, 0)] = c(theta.cos(), 0.0);
        u[(0, 2)] = c(-theta.sin(), 0.0);
        u[(2, 0)] = c(theta.sin(), 0.0);
        u[(2, 2)] = c(theta.cos(), 0.0);
        let rotated = w.apply_unitary(&u, &block).unwrap();
        let back = rotated.apply_unitary(&u.dagger(), &block).unwrap();
        assert!(w.fidelity(&back).unwrap() >= STATE_EQ_FIDELITY);
        assert_abs_diff_eq!(rotated.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn non_unitary_rejected() {
        let w = w_state(2).unwrap();
        let mut bad = CMatrix::identity(2);
        bad[(0, 0)] = c(0.5, 0.0);
        assert!(matches!(
            w.apply_unitary(&bad, &Subsystem::Modes(vec![0, 1])),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn measurement_of_basis_state_is_deterministic() {
        let reg = Register::spin_with_modes(2);
        let state = SparseState::basis_state(reg, BasisLabel::new(3, 1, 0b10)).unwrap();
        let (outcome, post, prob) = state.measure_projective(&Subsystem::Nuclear, 1).unwrap();
        assert_eq!(outcome, 3);
        assert_abs_diff_eq!(prob, 1.0, epsilon = 1e-12);
        assert!(post.fidelity(&state).unwrap() >= STATE_EQ_FIDELITY);
    }

    #[test]
    fn measurement_is_reproducible_for_fixed_seed() {
        let w = w_state(8).unwrap();
        let block = Subsystem::Modes((0..8).collect());
        for seed in [0u64, 1, 99] {
            let (o1, _, p1) = w.measure_projective(&block, seed).unwrap();
            let (o2, _, p2) = w.measure_projective(&block, seed).unwrap();
            assert_eq!(o1, o2);
            assert_abs_diff_eq!(p1, p2);
            assert_abs_diff_eq!(p1, 0.125, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_quantized_counts() {
        let four = first_quantized_expansion(&[1, 1, 1, 1]).unwrap();
        assert_eq!(four.sequences.len(), 24);
        assert_abs_diff_eq!(four.amplitude, 1.0 / 24f64.sqrt(), epsilon = 1e-15);

        let one = first_quantized_expansion(&[0, 1, 0]).unwrap();
        assert_eq!(one.sequences, vec![vec![1]]);
        assert_abs_diff_eq!(one.amplitude, 1.0, epsilon = 1e-15);

        let two = first_quantized_expansion(&[1, 0, 1]).unwrap();
        assert_eq!(two.sequences, vec![vec![0, 2], vec![2, 0]]);
        assert_abs_diff_eq!(two.amplitude, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);

        assert!(matches!(
            first_quantized_expansion(&[2, 0]),
            Err(Error::UnsupportedOccupancy(_))
        ));
    }

    #[test]
    fn sigma_state_shape() {
        let sigma = third_quantized_sigma(["V", "X", "Y", "Z"]).unwrap();
        assert_eq!(sigma.term_count(), 24);
        let amp = 1.0 / 24f64.sqrt();
        let layout = PartyLayout::contiguous(4, 4);
        for (label, a) in sigma.terms() {
            assert_abs_diff_eq!(a.norm(), amp, epsilon = 1e-12);
            assert_eq!(layout.party_counts(&label), vec![1, 1, 1, 1]);
        }
        assert_abs_diff_eq!(sigma.norm_sqr(), 1.0, epsilon = 1e-12);
        assert!(third_quantized_sigma(["V", "V", "Y", "Z"]).is_err());
    }

    #[test]
    fn sigma_invariant_under_matched_relabelling() {
        // Swapping two parties' roles while swapping their local-mode blocks
        // maps the state onto itself.
        let sigma = third_quantized_sigma(["V", "X", "Y", "Z"]).unwrap();
        let mut swapped_terms = Vec::new();
        for (label, amp) in sigma.terms() {
            let mut occ = 0u32;
            for m in 0..16 {
                if label.occupied(m) {
                    let (party, local) = (m / 4, m % 4);
                    let new_party = match party {
                        0 => 1,
                        1 => 0,
                        p => p,
                    };
                    occ |= 1 << (4 * new_party + local);
                }
            }
            swapped_terms.push((BasisLabel::photons(occ), amp));
        }
        let swapped = SparseState::from_terms(Register::photonic(16), swapped_terms).unwrap();
        assert!(sigma.fidelity(&swapped).unwrap() >= STATE_EQ_FIDELITY);
    }

    #[test]
    fn occupation_distribution_for_w8() {
        let w = w_state(8).unwrap();
        let layout = PartyLayout::one_mode_per_party(8);
        let dist = occupation_distribution(&w, &layout).unwrap();
        assert_eq!(dist.len(), 8);
        for (counts, p) in &dist {
            assert_eq!(counts.iter().map(|&c| c as u32).sum::<u32>(), 1);
            assert_abs_diff_eq!(*p, 0.125, epsilon = 1e-12);
        }
        let total: f64 = dist.values().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn occupation_distribution_vacuum_and_two_photons() {
        let vac = SparseState::vacuum(Register::photonic(4)).unwrap();
        let layout = PartyLayout::one_mode_per_party(4);
        let dist = occupation_distribution(&vac, &layout).unwrap();
        assert_eq!(dist.len(), 1);
        assert_abs_diff_eq!(dist[&vec![0u8, 0, 0, 0]], 1.0, epsilon = 1e-12);

        let w = w_state(8).unwrap();
        let ww = tensor_product(&w, &w).unwrap();
        let copies = PartyLayout::copies(2, 8);
        let dist = occupation_distribution(&ww, &copies).unwrap();
        let distinct_mass: f64 = dist
            .iter()
            .filter(|(counts, _)| counts.iter().all(|&c| c <= 1))
            .map(|(_, p)| p)
            .sum();
        assert_abs_diff_eq!(distinct_mass, 0.875, epsilon = 1e-12);
    }

    #[test]
    fn dump_is_sorted_and_stable() {
        let w = w_state(2).unwrap();
        let expected = "0,0,10,0.7071067811865475,0\n0,0,01,0.7071067811865475,0\n";
        assert_eq!(w.dump(), expected);
    }

    #[test]
    fn pruning_below_threshold_is_sound() {
        let big = c(1.0, 0.0);
        let tiny = c(1e-15, 0.0);
        let state = SparseState::from_terms(
            Register::photonic(2),
            vec![
                (BasisLabel::photons(0b01), big),
                (BasisLabel::photons(0b10), tiny),
            ],
        )
        .unwrap();
        assert_eq!(state.term_count(), 1);
        let dist = state.outcome_distribution(&Subsystem::Modes(vec![0, 1]));
        assert!((dist[&0b01] - 1.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random unitary built from pairwise phase rotations; exactly
        /// unitary by construction.
        fn rotation_unitary(n: usize, rotations: &[(usize, usize, f64, f64)]) -> CMatrix {
            let mut u = CMatrix::identity(n);
            for &(p, q, theta, phi) in rotations {
                let (p, q) = (p % n, q % n);
                if p == q {
                    continue;
                }
                let mut g = CMatrix::identity(n);
                let e = Complex64::from_polar(1.0, phi);
                g[(p, p)] = e * theta.cos();
                g[(p, q)] = -e * theta.sin();
                g[(q, p)] = c(theta.sin(), 0.0);
                g[(q, q)] = c(theta.cos(), 0.0);
                u = u.mul(&g);
            }
            u
        }

        fn arb_rotations() -> impl Strategy<Value = Vec<(usize, usize, f64, f64)>> {
            proptest::collection::vec(
                (0usize..8, 0usize..8, -3.0f64..3.0, -3.0f64..3.0),
                1..6,
            )
        }

        proptest! {
            #[test]
            fn unitaries_preserve_norm(rotations in arb_rotations(), seed in 0u64..1_000) {
                let mut rng = crate::rng::stream(seed);
                let terms: Vec<(BasisLabel, Complex64)> = (0..8)
                    .map(|m| {
                        (
                            BasisLabel::photons(1 << m),
                            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        )
                    })
                    .collect();
                let state = SparseState::from_terms(Register::photonic(8), terms).unwrap();
                let u = rotation_unitary(8, &rotations);
                let out = state.apply_unitary(&u, &Subsystem::Modes((0..8).collect())).unwrap();
                prop_assert!((out.norm_sqr() - 1.0).abs() <= NORM_TOL);
            }

            #[test]
            fn apply_unitary_is_linear(rotations in arb_rotations()) {
                let u = rotation_unitary(8, &rotations);
                let block = Subsystem::Modes((0..8).collect());
                let psi = w_state(8).unwrap();
                let phi = SparseState::basis_state(
                    Register::photonic(8),
                    BasisLabel::photons(1 << 3),
                ).unwrap();
                let alpha = c(0.6, 0.2);
                let beta = c(-0.3, 0.7);
                // combine, normalize, apply
                let combined = SparseState::from_terms(
                    Register::photonic(8),
                    psi.terms()
                        .map(|(l, a)| (l, alpha * a))
                        .chain(phi.terms().map(|(l, a)| (l, beta * a))),
                ).unwrap();
                let lhs = combined.apply_unitary(&u, &block).unwrap();
                // apply, then combine with the same weights
                let upsi = psi.apply_unitary(&u, &block).unwrap();
                let uphi = phi.apply_unitary(&u, &block).unwrap();
                let rhs = SparseState::from_terms(
                    Register::photonic(8),
                    upsi.terms()
                        .map(|(l, a)| (l, alpha * a))
                        .chain(uphi.terms().map(|(l, a)| (l, beta * a))),
                ).unwrap();
                prop_assert!(lhs.fidelity(&rhs).unwrap() >= 1.0 - 1e-10);
            }
        }
    }
}
