//! Timed gate lists, the quench circuits, CNOT compilation and exact-unitary oracles.
//!
//! Gate lists are time ordered: the first op acts first. Drive rotations last
//! `|θ|/π · t_π(q)`, `RZ` is a virtual frame update with zero duration and an
//! exchange window accumulates `exp(+i·φ/4·Z⊗Z)` with `φ = 2π·J·t`. A
//! conditional phase of π therefore takes `t = 1/(2J)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gates::{pauli_x, rx, ry, rz, C64};
use crate::linalg::{embed_1q, CMatrix};
use crate::state::{check_label, check_pair, StateVector, MAX_QUBITS};

pub const DEFAULT_T_PI_NS: f64 = 170.0;
/// Exchange strength giving a 400 ns CZ.
pub const DEFAULT_J_HZ: f64 = 1.25e6;

/// Per-qubit drive and per-pair exchange calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub t_pi_default_ns: f64,
    pub t_pi_ns: BTreeMap<usize, f64>,
    pub j_default_hz: f64,
    pub j_hz: BTreeMap<(usize, usize), f64>,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            t_pi_default_ns: DEFAULT_T_PI_NS,
            t_pi_ns: BTreeMap::new(),
            j_default_hz: DEFAULT_J_HZ,
            j_hz: BTreeMap::new(),
        }
    }
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl DeviceParams {
    pub fn t_pi(&self, q: usize) -> f64 {
        self.t_pi_ns.get(&q).copied().unwrap_or(self.t_pi_default_ns)
    }

    pub fn j(&self, a: usize, b: usize) -> f64 {
        self.j_hz.get(&pair_key(a, b)).copied().unwrap_or(self.j_default_hz)
    }

    pub fn set_j(&mut self, a: usize, b: usize, hz: f64) {
        self.j_hz.insert(pair_key(a, b), hz);
    }

    /// Duration of a controlled-phase of π on the pair.
    pub fn t_cz(&self, a: usize, b: usize) -> Result<f64> {
        let j = self.j(a, b);
        if !(j > 0.0) {
            return Err(invalid(format!("exchange J for pair ({a},{b}) must be positive, got {j}")));
        }
        Ok(1e9 / (2.0 * j))
    }

    pub fn drive_duration(&self, q: usize, theta: f64) -> f64 {
        theta.abs() / PI * self.t_pi(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    /// Ideal `diag(1,1,1,-1)`.
    Cz,
    /// Raw exchange window; `angle` is the accumulated `2π·J·t`.
    Zz,
    /// Textbook CNOT, expanded by [`compile_cnot`] for timing and noise.
    Cnot,
    /// Free evolution of the whole register.
    Idle,
}

impl GateKind {
    fn tag(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Cz => "CZ",
            GateKind::Zz => "ZZ",
            GateKind::Cnot => "CNOT",
            GateKind::Idle => "IDLE",
        }
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Cz | GateKind::Zz | GateKind::Cnot)
    }
}

impl FromStr for GateKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "RX" => GateKind::Rx,
            "RY" => GateKind::Ry,
            "RZ" => GateKind::Rz,
            "CZ" => GateKind::Cz,
            "ZZ" => GateKind::Zz,
            "CNOT" => GateKind::Cnot,
            "IDLE" => GateKind::Idle,
            other => return Err(format!("unknown gate kind `{other}`")),
        })
    }
}

/// One timed operation. For two-qubit kinds `q` is the control (or first) qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub q: usize,
    pub q2: Option<usize>,
    pub angle: f64,
    pub duration_ns: f64,
}

impl GateOp {
    pub fn rx(q: usize, theta: f64, dev: &DeviceParams) -> Self {
        Self::drive(GateKind::Rx, q, theta, dev)
    }

    pub fn ry(q: usize, theta: f64, dev: &DeviceParams) -> Self {
        Self::drive(GateKind::Ry, q, theta, dev)
    }

    fn drive(kind: GateKind, q: usize, theta: f64, dev: &DeviceParams) -> Self {
        GateOp { kind, q, q2: None, angle: theta, duration_ns: dev.drive_duration(q, theta) }
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        GateOp { kind: GateKind::Rz, q, q2: None, angle: theta, duration_ns: 0.0 }
    }

    pub fn idle(q: usize, duration_ns: f64) -> Self {
        GateOp { kind: GateKind::Idle, q, q2: None, angle: 0.0, duration_ns }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self.q2 {
            Some(b) => vec![self.q, b],
            None => vec![self.q],
        }
    }

    /// Whether `q` is actively driven or coupled by this op.
    pub fn touches(&self, q: usize) -> bool {
        self.kind != GateKind::Idle && (self.q == q || self.q2 == Some(q))
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.q2 {
            Some(b) => write!(f, "{} {},{} {:?} {:?}", self.kind.tag(), self.q, b, self.angle, self.duration_ns),
            None => write!(f, "{} {} {:?} {:?}", self.kind.tag(), self.q, self.angle, self.duration_ns),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
    device: DeviceParams,
}

impl Circuit {
    pub fn new(n_qubits: usize, device: DeviceParams) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Circuit { n_qubits, ops: Vec::new(), device })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        match op.q2 {
            Some(b) => check_pair(op.q, b, self.n_qubits)?,
            None => {
                check_label(op.q, self.n_qubits)?;
                if op.kind.is_two_qubit() {
                    return Err(invalid(format!("{} needs two qubits", op.kind.tag())));
                }
            }
        }
        if !(op.duration_ns >= 0.0) || !op.angle.is_finite() {
            return Err(invalid(format!("bad duration or angle in `{op}`")));
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn rx(&mut self, q: usize, theta: f64) -> Result<()> {
        let op = GateOp::rx(q, theta, &self.device);
        self.push(op)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        let t_cz = self.device.t_cz(control, target)?;
        let duration_ns = self.device.t_pi(target) + t_cz;
        self.push(GateOp { kind: GateKind::Cnot, q: control, q2: Some(target), angle: 0.0, duration_ns })
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch(self.n_qubits, other.n_qubits));
        }
        self.ops.extend_from_slice(&other.ops);
        Ok(())
    }

    /// Start/end of every op under gapless sequential execution.
    pub fn schedule(&self) -> Vec<(f64, f64)> {
        let mut t = 0.0;
        self.ops
            .iter()
            .map(|op| {
                let start = t;
                t += op.duration_ns;
                (start, t)
            })
            .collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.ops.iter().map(|op| op.duration_ns).sum()
    }

    /// Replaces CNOT macros by their native sequence.
    pub fn expanded(&self) -> Result<Vec<GateOp>> {
        let mut out = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            match (op.kind, op.q2) {
                (GateKind::Cnot, Some(t)) => out.extend(compile_cnot(op.q, t, &self.device)?),
                _ => out.push(*op),
            }
        }
        Ok(out)
    }

    /// Applies the circuit without noise. CNOT macros act as the textbook gate,
    /// which equals their compiled form up to a global phase.
    pub fn apply(&self, s: &mut StateVector) -> Result<()> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch(s.n_qubits(), self.n_qubits));
        }
        for op in &self.ops {
            apply_op(s, op)?;
        }
        Ok(())
    }

    pub fn counts(&self, kind: GateKind) -> usize {
        self.ops.iter().filter(|op| op.kind == kind).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# qubits {}\n", self.n_qubits);
        out += &format!("# tpi default {:?}\n", self.device.t_pi_default_ns);
        for (q, t) in &self.device.t_pi_ns {
            out += &format!("# tpi {q} {t:?}\n");
        }
        out += &format!("# j default {:?}\n", self.device.j_default_hz);
        for ((a, b), j) in &self.device.j_hz {
            out += &format!("# j {a},{b} {j:?}\n");
        }
        for op in &self.ops {
            out += &format!("{op}\n");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut device = DeviceParams::default();
        let mut ops = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |m: String| Error::Parse { line: line_no, message: m };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_start_matches('#').split_whitespace().collect();
            if line.starts_with('#') {
                match fields.as_slice() {
                    ["qubits", v] => n = Some(parse_num::<usize>(v).map_err(err)?),
                    ["tpi", "default", v] => device.t_pi_default_ns = parse_num(v).map_err(err)?,
                    ["tpi", q, v] => {
                        device.t_pi_ns.insert(parse_num(q).map_err(err)?, parse_num(v).map_err(err)?);
                    }
                    ["j", "default", v] => device.j_default_hz = parse_num(v).map_err(err)?,
                    ["j", pair, v] => {
                        let (a, b) = parse_pair(pair).map_err(err)?;
                        device.set_j(a, b, parse_num(v).map_err(err)?);
                    }
                    _ => {}
                }
                continue;
            }
            let [kind, qs, angle, dur] = fields.as_slice() else {
                return Err(err(format!("expected `KIND q[,q2] angle duration`, got `{line}`")));
            };
            let kind: GateKind = kind.parse().map_err(err)?;
            let (q, q2) = if qs.contains(',') {
                let (a, b) = parse_pair(qs).map_err(err)?;
                (a, Some(b))
            } else {
                (parse_num(qs).map_err(err)?, None)
            };
            ops.push(GateOp {
                kind,
                q,
                q2,
                angle: parse_num(angle).map_err(err)?,
                duration_ns: parse_num(dur).map_err(err)?,
            });
        }
        let n = n.ok_or(Error::Parse { line: 0, message: "missing `# qubits N` header".into() })?;
        let mut c = Circuit::new(n, device)?;
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }
}

fn parse_num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse number `{s}`"))
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    Ok((parse_num(a)?, parse_num(b)?))
}

/// Phases of the exchange window, indexed `↓↓, ↓↑, ↑↓, ↑↑`.
pub fn zz_phases(phi: f64) -> [C64; 4] {
    let par = C64::from_polar(1.0, phi / 4.0);
    let anti = C64::from_polar(1.0, -phi / 4.0);
    [par, anti, anti, par]
}

pub(crate) fn apply_op(s: &mut StateVector, op: &GateOp) -> Result<()> {
    let one = C64::new(1.0, 0.0);
    match (op.kind, op.q2) {
        (GateKind::Rx, _) => s.apply_1q(&rx(op.angle), op.q),
        (GateKind::Ry, _) => s.apply_1q(&ry(op.angle), op.q),
        (GateKind::Rz, _) => s.apply_1q(&rz(op.angle), op.q),
        (GateKind::Idle, _) => Ok(()),
        (GateKind::Cz, Some(b)) => s.apply_controlled_phase(op.q, b, &[one, one, one, -one]),
        (GateKind::Zz, Some(b)) => s.apply_controlled_phase(op.q, b, &zz_phases(op.angle)),
        (GateKind::Cnot, Some(b)) => s.apply_cnot(op.q, b),
        (kind, None) => Err(invalid(format!("{} needs two qubits", kind.tag()))),
    }
}

/// Native sequence for CNOT: `Y_t(π/2)`, `Z_c(-π/2)`, `Z_t(-π/2)`, exchange for
/// a π conditional phase, `Y_t(-π/2)`. The Hadamards of `H·CZ·H` are replaced
/// by Y rotations, so no Hadamard primitive appears.
pub fn compile_cnot(control: usize, target: usize, dev: &DeviceParams) -> Result<Vec<GateOp>> {
    if control == target {
        return Err(Error::SameQubit(control));
    }
    let t_cz = dev.t_cz(control, target)?;
    Ok(vec![
        GateOp::ry(target, FRAC_PI_2, dev),
        GateOp::rz(control, -FRAC_PI_2),
        GateOp::rz(target, -FRAC_PI_2),
        GateOp {
            kind: GateKind::Zz,
            q: control,
            q2: Some(target),
            angle: 2.0 * PI * dev.j(control, target) * t_cz * 1e-9,
            duration_ns: t_cz,
        },
        GateOp::ry(target, -FRAC_PI_2, dev),
    ])
}

/// Dense unitary of an op list on `n` qubits, built column by column.
pub fn ops_unitary(n: usize, ops: &[GateOp]) -> Result<CMatrix> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    let dim = 1usize << n;
    let mut u = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut s = StateVector::basis_index(n, col)?;
        for op in ops {
            apply_op(&mut s, op)?;
        }
        for (row, a) in s.amplitudes().iter().enumerate() {
            u[(row, col)] = *a;
        }
    }
    Ok(u)
}

pub fn circuit_unitary(c: &Circuit) -> Result<CMatrix> {
    ops_unitary(c.n_qubits, &c.ops)
}

/// Busy time per qubit counts native pulses and exchange windows touching it;
/// idle time is the remainder of the total duration.
pub fn idle_times(c: &Circuit) -> Result<BTreeMap<usize, f64>> {
    let total = c.total_duration();
    let native = c.expanded()?;
    Ok((1..=c.n_qubits)
        .map(|q| {
            let busy: f64 = native.iter().filter(|op| op.touches(q)).map(|op| op.duration_ns).sum();
            (q, total - busy)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuenchVariant {
    /// Valid only for the all-down initial state.
    Simplified,
    /// Exact quench unitary, with the closing CNOT staircase.
    Full,
    /// The closing staircase is the initial-state-independent extension; the
    /// gate list matches [`QuenchVariant::Full`].
    Extended,
}

impl FromStr for QuenchVariant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simplified" => Ok(QuenchVariant::Simplified),
            "full" => Ok(QuenchVariant::Full),
            "extended" => Ok(QuenchVariant::Extended),
            other => Err(format!("unknown quench variant `{other}`")),
        }
    }
}

/// Which physical qubits host the logical chain. `combo[i]` is logical qubit `i+1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuenchSpec {
    pub n: usize,
    pub variant: QuenchVariant,
    pub combo: Vec<usize>,
    pub register: usize,
}

impl QuenchSpec {
    /// Chain on qubits `1..=n` of an `n`-qubit register.
    pub fn chain(n: usize, variant: QuenchVariant) -> Self {
        QuenchSpec { n, variant, combo: (1..=n).collect(), register: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.register == 0 || self.register > MAX_QUBITS {
            return Err(Error::QubitCount(self.register));
        }
        if self.n == 0 || self.n > self.register {
            return Err(invalid(format!("chain of {} qubits does not fit a {}-qubit register", self.n, self.register)));
        }
        if self.combo.len() != self.n {
            return Err(Error::BitLength { got: self.combo.len(), expected: self.n });
        }
        for &q in &self.combo {
            check_label(q, self.register)?;
        }
        if !is_contiguous(&self.combo) {
            return Err(invalid(format!("combo {:?} is not a contiguous run of neighbours", self.combo)));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        combo_label(&self.combo)
    }
}

fn is_contiguous(combo: &[usize]) -> bool {
    let fwd = combo.windows(2).all(|w| w[1] == w[0] + 1);
    let rev = combo.windows(2).all(|w| w[0] == w[1] + 1);
    fwd || rev
}

pub fn combo_label(combo: &[usize]) -> String {
    combo.iter().map(|q| q.to_string()).collect::<Vec<_>>().join("-")
}

/// All contiguous windows of `n` neighbours in a `register`-qubit array, each
/// in forward and reverse order.
pub fn all_combos(n: usize, register: usize) -> Vec<Vec<usize>> {
    all_combos_within(n, 1, register)
}

/// Like [`all_combos`] restricted to physical qubits `lo..=hi`.
pub fn all_combos_within(n: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 || hi < lo || n > hi - lo + 1 {
        return out;
    }
    for start in lo..=hi + 1 - n {
        let fwd: Vec<usize> = (start..start + n).collect();
        let rev: Vec<usize> = fwd.iter().rev().copied().collect();
        out.push(fwd.clone());
        if rev != fwd {
            out.push(rev);
        }
    }
    out
}

/// Quench circuit for the spec at evolution angle `theta`.
pub fn build_quench(spec: &QuenchSpec, theta: f64, dev: &DeviceParams) -> Result<Circuit> {
    spec.validate()?;
    let p = |logical: usize| spec.combo[logical - 1];
    let n = spec.n;
    let mut c = Circuit::new(spec.register, dev.clone())?;
    c.rx(p(1), theta)?;
    if n > 1 {
        c.rx(p(n), theta)?;
    }
    for i in 1..n {
        c.cnot(p(i), p(i + 1))?;
    }
    for i in 1..n {
        c.rx(p(i), theta)?;
    }
    if spec.variant != QuenchVariant::Simplified {
        for i in (1..n).rev() {
            c.cnot(p(i), p(i + 1))?;
        }
    }
    Ok(c)
}

/// `J0·(Σ X_i X_{i+1} + X_1 + X_N)` on `n` qubits.
pub fn quench_hamiltonian(n: usize, j0: f64) -> Result<CMatrix> {
    quench_terms(n).map(|terms| terms.into_iter().fold(CMatrix::zeros(1 << n, 1 << n), |acc, t| acc + t) * C64::new(j0, 0.0))
}

/// Individual Pauli terms of the quench Hamiltonian (bulk bonds, then the two boundary fields).
pub fn quench_terms(n: usize) -> Result<Vec<CMatrix>> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    let x = pauli_x();
    let mut terms: Vec<CMatrix> = (1..n).map(|i| embed_1q(&x, i, n) * embed_1q(&x, i + 1, n)).collect();
    terms.push(embed_1q(&x, 1, n));
    terms.push(embed_1q(&x, n, n));
    Ok(terms)
}

/// `X_1 · Π X_i X_{i+1} · X_N`, which is the identity for every `n ≥ 2`.
pub fn constraint_product(n: usize) -> Result<CMatrix> {
    if n < 2 {
        return Err(invalid("constraint needs at least two qubits"));
    }
    let terms = quench_terms(n)?;
    let (bonds, fields) = terms.split_at(n - 1);
    let mut prod = fields[0].clone();
    for b in bonds {
        prod *= b;
    }
    Ok(prod * &fields[1])
}
