//! Parity-mode spin-blockade readout, QND readout of the inner qubits, the
//! composite `M↓↓` observable and initialization by post-selection.
//!
//! A parity measurement returns 1 for an even (parallel) pair and 0 for an odd
//! (antiparallel) pair. Even outcomes project coherently. Odd outcomes relax the
//! pair to a fixed antiparallel product state; since that relaxation is
//! incoherent, it is unravelled by picking which odd basis component the pair
//! was found in before resetting it.
//!
//! All sequences run on a [`Tracker`], which either samples one outcome per
//! measurement or enumerates every outcome branch with its probability. The
//! latter gives exact outcome distributions for a fixed input state.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gates::rx;
use crate::state::{check_pair, Projector, Spin, StateVector};

/// Outcome branches below this probability are dropped.
const PRUNE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    /// QND reference parity.
    A,
    /// QND parity after the conditional rotation.
    B,
    /// First parity of `M↓↓`.
    C,
    /// Second parity of `M↓↓`, after the CNOT.
    D,
    /// Parity confirming the initialized outer pairs.
    Confirm,
    Qnd,
    DownDown,
    /// Direct projective readout of one qubit, 1 for `|↓⟩`.
    Z,
}

/// Names one bit in a measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub kind: Kind,
    pub a: u8,
    pub b: u8,
    pub round: u8,
}

impl Label {
    pub fn pair(kind: Kind, q1: usize, q2: usize) -> Self {
        Label { kind, a: q1 as u8, b: q2 as u8, round: 0 }
    }

    pub fn qubit(kind: Kind, q: usize) -> Self {
        Label { kind, a: q as u8, b: 0, round: 0 }
    }

    fn with_round(mut self, round: usize) -> Self {
        self.round = round as u8;
        self
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            Kind::A => "M_A",
            Kind::B => "M_B",
            Kind::C => "M_C",
            Kind::D => "M_D",
            Kind::Confirm => "M_init",
            Kind::Qnd => "QND",
            Kind::DownDown => "M_dd",
            Kind::Z => "M_Z",
        };
        if self.b == 0 {
            write!(f, "{name}({})", self.a)?;
        } else {
            write!(f, "{name}({},{})", self.a, self.b)?;
        }
        if self.round > 0 {
            write!(f, "#{}", self.round)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub label: Label,
    pub bit: u8,
}

/// Latest value recorded under `label`.
pub fn find_bit(records: &[Record], label: Label) -> Option<u8> {
    records.iter().rev().find(|r| r.label == label).map(|r| r.bit)
}

/// A pair read out by spin blockade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsbPair {
    pub q1: usize,
    pub q2: usize,
    /// State of `(q1, q2)` after an odd outcome relaxes.
    pub odd_target: [Spin; 2],
}

impl PsbPair {
    pub fn new(q1: usize, q2: usize, odd_target: [Spin; 2]) -> Result<Self> {
        if odd_target[0] == odd_target[1] {
            return Err(invalid("odd collapse target must be antiparallel"));
        }
        if q1 == q2 {
            return Err(Error::SameQubit(q1));
        }
        Ok(PsbPair { q1, q2, odd_target })
    }

    /// Qubits 1-2, relaxing to `|↑↓⟩`.
    pub fn left() -> Self {
        PsbPair { q1: 1, q2: 2, odd_target: [Spin::Up, Spin::Down] }
    }

    /// Qubits 5-6, relaxing to `|↓↑⟩`.
    pub fn right() -> Self {
        PsbPair { q1: 5, q2: 6, odd_target: [Spin::Down, Spin::Up] }
    }
}

/// Knobs of the readout model. Defaults describe ideal readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// Chance an odd outcome relaxes to the pair's target state.
    pub relax_probability: f64,
    /// Symmetric flip rate of every reported parity bit.
    pub readout_error: f64,
    /// Chance an even outcome also collapses `↓↓` versus `↑↑`.
    pub even_dephasing: f64,
    /// Odd number of QND rounds combined by majority vote.
    pub qnd_repeats: usize,
    /// Flip the outer qubit after an even `M_D`, before the QND readout.
    pub conditional_flip: bool,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        ReadoutParams {
            relax_probability: 1.0,
            readout_error: 0.0,
            even_dephasing: 0.0,
            qnd_repeats: 3,
            conditional_flip: true,
        }
    }
}

impl ReadoutParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("relax_probability", self.relax_probability),
            ("readout_error", self.readout_error),
            ("even_dephasing", self.even_dephasing),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.qnd_repeats.is_multiple_of(2) {
            return Err(invalid(format!("qnd_repeats must be odd, got {}", self.qnd_repeats)));
        }
        Ok(())
    }

    /// Whether readout of a basis state is deterministic.
    pub fn is_ideal(&self) -> bool {
        self.relax_probability == 1.0 && self.readout_error == 0.0 && self.even_dephasing == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub state: StateVector,
    pub records: Vec<Record>,
}

impl Branch {
    pub fn bit(&self, label: Label) -> Option<u8> {
        find_bit(&self.records, label)
    }

    fn child(&self, p: f64, state: StateVector, record: Option<Record>) -> (f64, Branch) {
        let mut records = self.records.clone();
        records.extend(record);
        (p, Branch { weight: self.weight * p, state, records })
    }
}

/// Runs measurement sequences either by sampling or by enumerating outcomes.
#[derive(Debug)]
pub struct Tracker {
    rng: Option<ChaCha8Rng>,
    branches: Vec<Branch>,
    discarded: f64,
}

impl Tracker {
    pub fn sample(state: StateVector, rng: ChaCha8Rng) -> Self {
        Tracker { rng: Some(rng), branches: vec![root(state)], discarded: 0.0 }
    }

    pub fn enumerate(state: StateVector) -> Self {
        Tracker { rng: None, branches: vec![root(state)], discarded: 0.0 }
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<Branch> {
        self.branches
    }

    /// Probability mass that survived post-selection.
    pub fn retained_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    pub fn discarded_weight(&self) -> f64 {
        self.discarded
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Sampled mode only: the single surviving branch.
    pub fn single(&self) -> Option<&Branch> {
        match self.branches.as_slice() {
            [b] => Some(b),
            _ => None,
        }
    }

    /// Replaces every branch by its outcome children. `f` returns conditional probabilities.
    pub fn step<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&Branch) -> Result<Vec<(f64, Branch)>>,
    {
        let mut next = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let children = f(b)?;
            match self.rng.as_mut() {
                Some(rng) => next.push(pick(children, rng)?),
                None => next.extend(children.into_iter().map(|(_, c)| c)),
            }
        }
        self.branches = next;
        Ok(())
    }

    pub fn unitary<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&[Record], &mut StateVector) -> Result<()>,
    {
        for b in &mut self.branches {
            f(&b.records, &mut b.state)?;
        }
        Ok(())
    }

    /// Appends a bit computed from each branch's record.
    pub fn derive<F>(&mut self, label: Label, f: F)
    where
        F: Fn(&[Record]) -> u8,
    {
        for b in &mut self.branches {
            let bit = f(&b.records);
            b.records.push(Record { label, bit });
        }
    }

    /// Drops branches whose record fails `keep`.
    pub fn postselect<F>(&mut self, keep: F)
    where
        F: Fn(&[Record]) -> bool,
    {
        let mut lost = 0.0;
        self.branches.retain(|b| {
            let k = keep(&b.records);
            if !k {
                lost += b.weight;
            }
            k
        });
        self.discarded += lost;
    }

    /// Weighted mean of `f` over the surviving branches.
    pub fn expectation<F>(&self, f: F) -> Option<f64>
    where
        F: Fn(&Branch) -> f64,
    {
        let w = self.retained_weight();
        if w <= 0.0 {
            return None;
        }
        Some(self.branches.iter().map(|b| b.weight * f(b)).sum::<f64>() / w)
    }
}

fn root(state: StateVector) -> Branch {
    Branch { weight: 1.0, state, records: Vec::new() }
}

fn pick(children: Vec<(f64, Branch)>, rng: &mut ChaCha8Rng) -> Result<Branch> {
    let total: f64 = children.iter().map(|(p, _)| p).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let last = children.len() - 1;
    for (i, (p, mut c)) in children.into_iter().enumerate() {
        acc += p;
        if u < acc || i == last {
            c.weight = 1.0;
            return Ok(c);
        }
    }
    unreachable!("children is non-empty")
}

/// Outcome children of one parity measurement, including reported-bit flips.
pub fn psb_children(b: &Branch, pair: &PsbPair, label: Label, params: &ReadoutParams) -> Result<Vec<(f64, Branch)>> {
    let n = b.state.n_qubits();
    check_pair(pair.q1, pair.q2, n)?;
    let (q1, q2) = (pair.q1, pair.q2);
    let mut physical: Vec<(f64, u8, StateVector)> = Vec::new();

    let even = Projector::Parity { q1, q2, even: true };
    let p_even = b.state.probability(&even)?;
    if p_even > PRUNE {
        let d = params.even_dephasing;
        if d < 1.0 {
            physical.push(((1.0 - d) * p_even, 1, b.state.project(&even, true)?.1));
        }
        if d > 0.0 {
            for spin in [Spin::Down, Spin::Up] {
                let proj = Projector::Pair { q1, q2, spins: [spin, spin] };
                let p = b.state.probability(&proj)?;
                if p > PRUNE {
                    physical.push((d * p, 1, b.state.project(&proj, true)?.1));
                }
            }
        }
    }

    let odd = Projector::Parity { q1, q2, even: false };
    let p_odd = b.state.probability(&odd)?;
    if p_odd > PRUNE {
        let r = params.relax_probability;
        if r > 0.0 {
            for spins in [[Spin::Down, Spin::Up], [Spin::Up, Spin::Down]] {
                let proj = Projector::Pair { q1, q2, spins };
                let p = b.state.probability(&proj)?;
                if p > PRUNE {
                    let mut s = b.state.project(&proj, true)?.1;
                    s.set_spin_product(q1, pair.odd_target[0]);
                    s.set_spin_product(q2, pair.odd_target[1]);
                    physical.push((r * p, 0, s));
                }
            }
        }
        if r < 1.0 {
            physical.push(((1.0 - r) * p_odd, 0, b.state.project(&odd, true)?.1));
        }
    }

    let eps = params.readout_error;
    let mut out = Vec::with_capacity(physical.len() * 2);
    for (p, bit, s) in physical {
        if eps > 0.0 {
            out.push(b.child(p * eps, s.clone(), Some(Record { label, bit: 1 - bit })));
        }
        if eps < 1.0 {
            out.push(b.child(p * (1.0 - eps), s, Some(Record { label, bit })));
        }
    }
    Ok(out)
}

/// Direct projective readout of one qubit; bit 1 for `|↓⟩`.
pub fn z_children(b: &Branch, q: usize, params: &ReadoutParams) -> Result<Vec<(f64, Branch)>> {
    let label = Label::qubit(Kind::Z, q);
    let eps = params.readout_error;
    let mut out = Vec::new();
    for (spin, bit) in [(Spin::Down, 1u8), (Spin::Up, 0u8)] {
        let proj = Projector::Qubit { q, spin };
        let p = b.state.probability(&proj)?;
        if p > PRUNE {
            let s = b.state.project(&proj, true)?.1;
            if eps > 0.0 {
                out.push(b.child(p * eps, s.clone(), Some(Record { label, bit: 1 - bit })));
            }
            if eps < 1.0 {
                out.push(b.child(p * (1.0 - eps), s, Some(Record { label, bit })));
            }
        }
    }
    Ok(out)
}

pub fn psb(t: &mut Tracker, pair: &PsbPair, label: Label, params: &ReadoutParams) -> Result<()> {
    t.step(|b| psb_children(b, pair, label, params))
}

/// QND readout of `target` through `pair`, rotating `crot_qubit` (a member of
/// the pair) when `target` is up. Records each round's parities and the
/// majority-vote bit, 1 meaning `|↓⟩`.
pub fn qnd(
    t: &mut Tracker,
    target: usize,
    pair: &PsbPair,
    crot_qubit: usize,
    params: &ReadoutParams,
) -> Result<()> {
    if crot_qubit != pair.q1 && crot_qubit != pair.q2 {
        return Err(invalid(format!("CROT qubit {crot_qubit} is not in pair ({},{})", pair.q1, pair.q2)));
    }
    if params.qnd_repeats.is_multiple_of(2) {
        return Err(invalid("qnd_repeats must be odd"));
    }
    let x_pi = rx(PI);
    for round in 1..=params.qnd_repeats {
        let a = Label::qubit(Kind::A, target).with_round(round);
        let b = Label::qubit(Kind::B, target).with_round(round);
        psb(t, pair, a, params)?;
        t.unitary(|_, s| s.apply_controlled_1q(target, crot_qubit, &x_pi))?;
        psb(t, pair, b, params)?;
    }
    let repeats = params.qnd_repeats;
    t.derive(Label::qubit(Kind::Qnd, target), |rec| {
        let down_votes = (1..=repeats)
            .filter(|&r| {
                let a = find_bit(rec, Label::qubit(Kind::A, target).with_round(r));
                let b = find_bit(rec, Label::qubit(Kind::B, target).with_round(r));
                a == b
            })
            .count();
        u8::from(2 * down_votes > repeats)
    });
    Ok(())
}

/// Outer and inner qubit of a readout pair. The outer qubit is the one left up
/// by odd-outcome relaxation.
fn outer_inner(pair: &PsbPair) -> (usize, usize) {
    if pair.odd_target[0] == Spin::Up {
        (pair.q1, pair.q2)
    } else {
        (pair.q2, pair.q1)
    }
}

/// `M_C`, CNOT (inner controls outer), `M_D`; records `M↓↓ = M_C ∧ M_D`.
pub fn m_downdown(t: &mut Tracker, pair: &PsbPair, params: &ReadoutParams) -> Result<()> {
    let (outer, inner) = outer_inner(pair);
    let c = Label::pair(Kind::C, pair.q1, pair.q2);
    let d = Label::pair(Kind::D, pair.q1, pair.q2);
    psb(t, pair, c, params)?;
    t.unitary(|_, s| s.apply_cnot(inner, outer))?;
    psb(t, pair, d, params)?;
    t.derive(Label::pair(Kind::DownDown, pair.q1, pair.q2), |rec| {
        find_bit(rec, c).unwrap_or(0) & find_bit(rec, d).unwrap_or(0)
    });
    Ok(())
}

/// Flip `q` when the latest bit under `label` reports an even pair.
fn flip_if_even(t: &mut Tracker, q: usize, label: Label) -> Result<()> {
    let x_pi = rx(PI);
    t.unitary(|rec, s| if find_bit(rec, label) == Some(1) { s.apply_1q(&x_pi, q) } else { Ok(()) })
}

/// The six-qubit readout pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub qubits: usize,
}

impl Layout {
    pub fn new(qubits: usize) -> Result<Self> {
        if qubits == 0 || qubits > crate::state::MAX_QUBITS {
            return Err(Error::QubitCount(qubits));
        }
        Ok(Layout { qubits })
    }

    pub fn paper() -> Self {
        Layout { qubits: 6 }
    }

    /// Whether the spin-blockade pipeline applies; other sizes read out directly.
    pub fn uses_psb(&self) -> bool {
        self.qubits == 6
    }
}

pub const fn label_dd_left() -> Label {
    Label { kind: Kind::DownDown, a: 1, b: 2, round: 0 }
}

pub const fn label_dd_right() -> Label {
    Label { kind: Kind::DownDown, a: 5, b: 6, round: 0 }
}

pub const fn label_qnd(q: usize) -> Label {
    Label { kind: Kind::Qnd, a: q as u8, b: 0, round: 0 }
}

/// `M↓↓(1,2)`, optional flip of qubit 1, `QND(3)`, then the mirror image on the
/// right. Bits: `M↓↓(1,2)`, `QND(3)`, `QND(4)`, `M↓↓(5,6)`.
pub fn readout_all(t: &mut Tracker, params: &ReadoutParams) -> Result<()> {
    let (left, right) = (PsbPair::left(), PsbPair::right());
    m_downdown(t, &left, params)?;
    if params.conditional_flip {
        flip_if_even(t, 1, Label::pair(Kind::D, 1, 2))?;
    }
    qnd(t, 3, &left, 2, params)?;
    m_downdown(t, &right, params)?;
    if params.conditional_flip {
        flip_if_even(t, 6, Label::pair(Kind::D, 5, 6))?;
    }
    qnd(t, 4, &right, 5, params)
}

/// Magnetization readout: `M_C` on each outer pair and QND on the inner qubits,
/// without the CNOT and `M_D` stage.
pub fn readout_magnetization(t: &mut Tracker, params: &ReadoutParams) -> Result<()> {
    let (left, right) = (PsbPair::left(), PsbPair::right());
    let c_left = Label::pair(Kind::C, 1, 2);
    let c_right = Label::pair(Kind::C, 5, 6);
    psb(t, &left, c_left, params)?;
    if params.conditional_flip {
        flip_if_even(t, 1, c_left)?;
    }
    qnd(t, 3, &left, 2, params)?;
    psb(t, &right, c_right, params)?;
    if params.conditional_flip {
        flip_if_even(t, 6, c_right)?;
    }
    qnd(t, 4, &right, 5, params)
}

/// Reads every qubit directly (layouts without spin-blockade pairs).
pub fn readout_direct(t: &mut Tracker, qubits: &[usize], params: &ReadoutParams) -> Result<()> {
    for &q in qubits {
        t.step(|b| z_children(b, q, params))?;
    }
    Ok(())
}

/// `Z` of qubit `q` from a magnetization record: `M_C` parity for 2 and 5
/// (their outer neighbours are down after initialization), QND for 3 and 4.
pub fn z_from_magnetization_record(records: &[Record], q: usize) -> Option<f64> {
    let bit = match q {
        2 => find_bit(records, Label::pair(Kind::C, 1, 2))?,
        5 => find_bit(records, Label::pair(Kind::C, 5, 6))?,
        3 | 4 => find_bit(records, label_qnd(q))?,
        _ => return None,
    };
    // even parity / QND 1 both mean the qubit is down
    Some(if bit == 1 { -1.0 } else { 1.0 })
}

/// Where the raw pre-initialization state comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitSource {
    /// The post-selected product state `|↑↓↓↓↓↑⟩`.
    PostSelectedSeed,
    /// A uniformly random basis state each shot.
    MaximallyMixed,
}

impl std::str::FromStr for InitSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "seed" | "postselected" => Ok(InitSource::PostSelectedSeed),
            "mixed" | "thermal" => Ok(InitSource::MaximallyMixed),
            other => Err(format!("unknown init source `{other}`")),
        }
    }
}

pub fn raw_initial_state<R: Rng + ?Sized>(source: InitSource, rng: &mut R) -> Result<StateVector> {
    match source {
        InitSource::PostSelectedSeed => StateVector::basis_index(6, 0b100001),
        InitSource::MaximallyMixed => StateVector::basis_index(6, rng.random_range(0..64)),
    }
}

/// QND on 3 and 4 post-selecting `↓` with odd final parities, π flips of the
/// outer qubits, then even confirming parities.
pub fn initialize(t: &mut Tracker, params: &ReadoutParams) -> Result<()> {
    let (left, right) = (PsbPair::left(), PsbPair::right());
    let last = params.qnd_repeats;
    qnd(t, 3, &left, 2, params)?;
    t.postselect(|rec| {
        find_bit(rec, label_qnd(3)) == Some(1)
            && find_bit(rec, Label::qubit(Kind::B, 3).with_round(last)) == Some(0)
    });
    qnd(t, 4, &right, 5, params)?;
    t.postselect(|rec| {
        find_bit(rec, label_qnd(4)) == Some(1)
            && find_bit(rec, Label::qubit(Kind::B, 4).with_round(last)) == Some(0)
    });
    let x_pi = rx(PI);
    t.unitary(|_, s| {
        s.apply_1q(&x_pi, 1)?;
        s.apply_1q(&x_pi, 6)
    })?;
    let cl = Label::pair(Kind::Confirm, 1, 2);
    let cr = Label::pair(Kind::Confirm, 5, 6);
    psb(t, &left, cl, params)?;
    psb(t, &right, cr, params)?;
    t.postselect(|rec| find_bit(rec, cl) == Some(1) && find_bit(rec, cr) == Some(1));
    Ok(())
}

/// Sampled single-shot parity measurement.
pub fn psb_measure(s: &StateVector, pair: &PsbPair, params: &ReadoutParams, rng: ChaCha8Rng) -> Result<(u8, StateVector)> {
    let label = Label::pair(Kind::C, pair.q1, pair.q2);
    let mut t = Tracker::sample(s.clone(), rng);
    psb(&mut t, pair, label, params)?;
    let b = t.single().ok_or(Error::ZeroProbability)?;
    Ok((b.bit(label).unwrap_or(0), b.state.clone()))
}

/// Sampled single-shot QND readout; bit 1 means `|↓⟩`.
pub fn qnd_measure(
    s: &StateVector,
    target: usize,
    pair: &PsbPair,
    crot_qubit: usize,
    params: &ReadoutParams,
    rng: ChaCha8Rng,
) -> Result<(u8, StateVector)> {
    let mut t = Tracker::sample(s.clone(), rng);
    qnd(&mut t, target, pair, crot_qubit, params)?;
    let b = t.single().ok_or(Error::ZeroProbability)?;
    Ok((b.bit(label_qnd(target)).unwrap_or(0), b.state.clone()))
}

/// Sampled `M↓↓`: returns the combined bit, the post state and `(M_C, M_D)`.
pub fn m_downdown_sequence(
    s: &StateVector,
    pair: &PsbPair,
    params: &ReadoutParams,
    rng: ChaCha8Rng,
) -> Result<(u8, StateVector, (u8, u8))> {
    let mut t = Tracker::sample(s.clone(), rng);
    m_downdown(&mut t, pair, params)?;
    let b = t.single().ok_or(Error::ZeroProbability)?;
    let (q1, q2) = (pair.q1, pair.q2);
    Ok((
        b.bit(Label::pair(Kind::DownDown, q1, q2)).unwrap_or(0),
        b.state.clone(),
        (b.bit(Label::pair(Kind::C, q1, q2)).unwrap_or(0), b.bit(Label::pair(Kind::D, q1, q2)).unwrap_or(0)),
    ))
}

/// The four readout bits and their conjunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadoutRecord {
    pub dd_left: u8,
    pub qnd3: u8,
    pub qnd4: u8,
    pub dd_right: u8,
}

impl ReadoutRecord {
    pub fn from_records(rec: &[Record]) -> Self {
        ReadoutRecord {
            dd_left: find_bit(rec, label_dd_left()).unwrap_or(0),
            qnd3: find_bit(rec, label_qnd(3)).unwrap_or(0),
            qnd4: find_bit(rec, label_qnd(4)).unwrap_or(0),
            dd_right: find_bit(rec, label_dd_right()).unwrap_or(0),
        }
    }

    pub fn bits(&self) -> [u8; 4] {
        [self.dd_left, self.qnd3, self.qnd4, self.dd_right]
    }

    /// 1 when all six qubits read as down.
    pub fn all_down(&self) -> u8 {
        self.dd_left & self.qnd3 & self.qnd4 & self.dd_right
    }
}

pub fn readout_all_sampled(s: &StateVector, params: &ReadoutParams, rng: ChaCha8Rng) -> Result<ReadoutRecord> {
    let mut t = Tracker::sample(s.clone(), rng);
    readout_all(&mut t, params)?;
    let b = t.single().ok_or(Error::ZeroProbability)?;
    Ok(ReadoutRecord::from_records(&b.records))
}

/// Sampled initialization. Returns whether the shot is retained and the state.
pub fn initialize_by_postselection(
    raw: &StateVector,
    params: &ReadoutParams,
    rng: ChaCha8Rng,
) -> Result<(bool, StateVector)> {
    if raw.n_qubits() != 6 {
        return Err(Error::DimensionMismatch(raw.n_qubits(), 6));
    }
    let mut t = Tracker::sample(raw.clone(), rng);
    initialize(&mut t, params)?;
    match t.single() {
        Some(b) => Ok((true, b.state.clone())),
        None => Ok((false, raw.clone())),
    }
}

/// `P(1 ∧ 1) = p·q` for independent channels, against `min(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndBias {
    pub product: f64,
    pub min: f64,
    pub holds: bool,
    pub strict: bool,
}

pub fn and_bias_check(p: f64, q: f64) -> Result<AndBias> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("probabilities must lie in [0, 1], got ({p}, {q})")));
    }
    let product = p * q;
    let min = p.min(q);
    Ok(AndBias { product, min, holds: product <= min, strict: product < min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::f64::consts::FRAC_1_SQRT_2;

    const D: Spin = Spin::Down;
    const U: Spin = Spin::Up;

    fn ideal() -> ReadoutParams {
        ReadoutParams::default()
    }

    fn six(spins: [Spin; 6]) -> StateVector {
        StateVector::basis_state(6, &spins).unwrap()
    }

    #[test]
    fn psb_even_eigenstate_is_untouched() {
        let s = StateVector::all_down(6).unwrap();
        let (bit, post) = psb_measure(&s, &PsbPair::left(), &ideal(), stream(&[1])).unwrap();
        assert_eq!(bit, 1);
        assert_eq!(post, s);
    }

    #[test]
    fn psb_odd_relaxes_to_target() {
        let s = six([D, U, D, D, D, D]);
        let (bit, post) = psb_measure(&s, &PsbPair::left(), &ideal(), stream(&[2])).unwrap();
        assert_eq!(bit, 0);
        assert_eq!(post, six([U, D, D, D, D, D]));
    }

    #[test]
    fn psb_superposition_branches() {
        let h = FRAC_1_SQRT_2;
        let z = crate::C64::new(0.0, 0.0);
        // (|↓↓⟩ + |↓↑⟩)/√2 on qubits (1,2): index 0 and index 2
        let s = StateVector::from_amplitudes(vec![crate::C64::new(h, 0.0), z, crate::C64::new(h, 0.0), z]).unwrap();
        let pair = PsbPair { q1: 1, q2: 2, odd_target: [U, D] };
        let mut t = Tracker::enumerate(s);
        let label = Label::pair(Kind::C, 1, 2);
        psb(&mut t, &pair, label, &ideal()).unwrap();
        let br = t.branches();
        assert_eq!(br.len(), 2);
        let even = br.iter().find(|b| b.bit(label) == Some(1)).unwrap();
        let odd = br.iter().find(|b| b.bit(label) == Some(0)).unwrap();
        assert!((even.weight - 0.5).abs() < 1e-15 && (odd.weight - 0.5).abs() < 1e-15);
        assert_eq!(even.state, StateVector::basis_index(2, 0).unwrap());
        assert_eq!(odd.state, StateVector::basis_index(2, 0b01).unwrap());
    }

    #[test]
    fn qnd_eigenstates() {
        let pair = PsbPair::left();
        let (bit, _) = qnd_measure(&six([U, D, D, D, D, U]), 3, &pair, 2, &ideal(), stream(&[3])).unwrap();
        assert_eq!(bit, 1);
        let (bit, _) = qnd_measure(&six([U, D, U, D, D, U]), 3, &pair, 2, &ideal(), stream(&[4])).unwrap();
        assert_eq!(bit, 0);
    }

    #[test]
    fn qnd_truth_table_all_pair_states() {
        // any reference pair state, target down keeps parity, target up flips it
        for idx in 0..4usize {
            for target_up in [false, true] {
                let i = idx | (usize::from(target_up) << 2);
                let s = StateVector::basis_index(6, i).unwrap();
                let mut t = Tracker::enumerate(s);
                let p = ReadoutParams { qnd_repeats: 1, ..ideal() };
                qnd(&mut t, 3, &PsbPair::left(), 2, &p).unwrap();
                assert_eq!(t.branches().len(), 1);
                let b = &t.branches()[0];
                let a = b.bit(Label::qubit(Kind::A, 3).with_round(1)).unwrap();
                let bb = b.bit(Label::qubit(Kind::B, 3).with_round(1)).unwrap();
                assert_eq!(a != bb, target_up);
                assert_eq!(b.bit(label_qnd(3)), Some(u8::from(!target_up)));
            }
        }
    }

    #[test]
    fn m_downdown_truth_table() {
        let cases = [([D, D], 1, 1, 1), ([U, U], 1, 0, 0), ([U, D], 0, 0, 0), ([D, U], 0, 0, 0)];
        for (pair_spins, mc, md, dd) in cases {
            let s = six([pair_spins[0], pair_spins[1], D, D, D, D]);
            let (bit, _, sub) = m_downdown_sequence(&s, &PsbPair::left(), &ideal(), stream(&[5])).unwrap();
            assert_eq!((bit, sub), (dd, (mc, md)), "pair {pair_spins:?}");
            // mirrored on the right pair: outer qubit 6, inner 5
            let s = six([D, D, D, D, pair_spins[1], pair_spins[0]]);
            let (bit, _, sub) = m_downdown_sequence(&s, &PsbPair::right(), &ideal(), stream(&[6])).unwrap();
            assert_eq!((bit, sub), (dd, (mc, md)), "right pair {pair_spins:?}");
        }
    }

    #[test]
    fn readout_all_examples() {
        let all = readout_all_sampled(&six([D; 6]), &ideal(), stream(&[7])).unwrap();
        assert_eq!((all.bits(), all.all_down()), ([1, 1, 1, 1], 1));
        let q3 = readout_all_sampled(&six([D, D, U, D, D, D]), &ideal(), stream(&[8])).unwrap();
        assert_eq!((q3.bits(), q3.all_down()), ([1, 0, 1, 1], 0));
        let q1 = readout_all_sampled(&six([U, D, D, D, D, D]), &ideal(), stream(&[9])).unwrap();
        assert_eq!(q1.bits(), [0, 1, 1, 1]);
        for flip in [false, true] {
            let p = ReadoutParams { conditional_flip: flip, ..ideal() };
            let q4 = readout_all_sampled(&six([D, D, D, U, D, D]), &p, stream(&[10])).unwrap();
            assert_eq!(q4.bits(), [1, 1, 0, 1]);
        }
    }

    #[test]
    fn initialization_examples() {
        let (kept, s) = initialize_by_postselection(&six([U, D, D, D, D, U]), &ideal(), stream(&[11])).unwrap();
        assert!(kept);
        assert!((s.fidelity_with(&six([D; 6])).unwrap() - 1.0).abs() < 1e-15);
        let mut t = Tracker::enumerate(six([D; 6]));
        initialize(&mut t, &ideal()).unwrap();
        assert!(t.retained_weight() < 1.0);
        for b in t.branches() {
            assert!((b.state.fidelity_with(&six([D; 6])).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn and_bias_examples() {
        let r = and_bias_check(1.0, 1.0).unwrap();
        assert_eq!((r.product, r.holds, r.strict), (1.0, true, false));
        let r = and_bias_check(0.9, 0.8).unwrap();
        assert!((r.product - 0.72).abs() < 1e-15 && r.strict);
        assert!(and_bias_check(1.2, 0.5).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ReadoutParams { qnd_repeats: 2, ..ideal() }.validate().is_err());
        assert!(ReadoutParams { readout_error: -0.1, ..ideal() }.validate().is_err());
        assert!(PsbPair::new(1, 2, [U, U]).is_err());
    }

    #[test]
    fn label_display() {
        assert_eq!(label_dd_left().to_string(), "M_dd(1,2)");
        assert_eq!(label_qnd(3).to_string(), "QND(3)");
        assert_eq!(Label::qubit(Kind::A, 4).with_round(2).to_string(), "M_A(4)#2");
    }
}
