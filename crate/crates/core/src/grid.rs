//! Network data model: buses, branches, per-unit conventions, admittance matrix
//! construction and DG injection application.
//!
//! All quantities are per-unit on the system MVA base unless a field says
//! otherwise. DG sizes cross the API boundary in MW and are converted here.

use num_complex::Complex;

use crate::error::ModelError;
use crate::scalar::{lit, Real};

/// External bus identifier (positive, unique within a network).
pub type BusId = usize;

/// Bus classification for the load-flow problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    /// Reference bus: fixed voltage magnitude and angle, absorbs the imbalance.
    Slack,
    /// Generator bus: fixed real power and voltage magnitude.
    Pv,
    /// Load bus: fixed real and reactive injections.
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus<T> {
    pub id: BusId,
    pub kind: BusKind,
    /// Real power demand, per-unit.
    pub p_demand: T,
    /// Reactive power demand, per-unit.
    pub q_demand: T,
    /// Scheduled real generation, per-unit.
    pub p_gen: T,
    /// Scheduled reactive generation, per-unit (meaningful for PQ buses).
    pub q_gen: T,
    /// Voltage setpoint magnitude, per-unit (meaningful for Slack/PV).
    pub v_setpoint: T,
    pub v_min: T,
    pub v_max: T,
    /// Shunt conductance at the bus, per-unit.
    pub shunt_g: T,
    /// Shunt susceptance at the bus, per-unit.
    pub shunt_b: T,
}

impl<T: Real> Bus<T> {
    /// A PQ bus with the given demand and unity voltage limits of +-6%.
    pub fn load(id: BusId, p_demand: T, q_demand: T) -> Self {
        Bus {
            id,
            kind: BusKind::Pq,
            p_demand,
            q_demand,
            p_gen: T::zero(),
            q_gen: T::zero(),
            v_setpoint: T::one(),
            v_min: lit(0.94),
            v_max: lit(1.06),
            shunt_g: T::zero(),
            shunt_b: T::zero(),
        }
    }

    /// Net scheduled real injection (generation minus demand), per-unit.
    pub fn p_injection(&self) -> T {
        self.p_gen - self.p_demand
    }

    /// Net scheduled reactive injection, per-unit.
    pub fn q_injection(&self) -> T {
        self.q_gen - self.q_demand
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub from: BusId,
    pub to: BusId,
    /// Series resistance, per-unit.
    pub r: T,
    /// Series reactance, per-unit.
    pub x: T,
    /// Total line charging susceptance, per-unit (split half per terminal).
    pub b_charging: T,
    /// Off-nominal tap ratio on the `from` side; 1.0 means no transformer.
    pub tap_ratio: T,
    /// Optional series current rating, per-unit; `None` means unlimited.
    pub rating: Option<T>,
}

impl<T: Real> Branch<T> {
    pub fn line(from: BusId, to: BusId, r: T, x: T, b_charging: T) -> Self {
        Branch {
            from,
            to,
            r,
            x,
            b_charging,
            tap_ratio: T::one(),
            rating: None,
        }
    }

    /// Series admittance 1/(r + jx).
    pub fn series_admittance(&self) -> Complex<T> {
        Complex::new(self.r, self.x).inv()
    }
}

/// Static description of the grid: per-unit bases plus bus and branch tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub name: String,
    /// System MVA base; all per-unit power quantities are on this base.
    pub base_mva: T,
    /// Nominal voltage base in kV. Metadata only: it never enters per-unit math.
    pub base_kv: T,
    pub buses: Vec<Bus<T>>,
    pub branches: Vec<Branch<T>>,
    /// Optional uniform operating voltage band that overrides per-bus limits.
    pub v_band: Option<(T, T)>,
}

impl<T: Real> Network<T> {
    pub fn new(name: impl Into<String>, base_mva: T) -> Self {
        Network {
            name: name.into(),
            base_mva,
            base_kv: T::zero(),
            buses: Vec::new(),
            branches: Vec::new(),
            v_band: None,
        }
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Internal index of a bus id, in bus-table order.
    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus<T>> {
        self.buses.iter().find(|b| b.id == id)
    }

    /// Index of the slack bus, if exactly one exists.
    pub fn slack_index(&self) -> Option<usize> {
        let mut it = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    /// Effective voltage limits for a bus: the uniform band when set, otherwise
    /// the per-bus limits.
    pub fn voltage_limits(&self, index: usize) -> (T, T) {
        match self.v_band {
            Some((lo, hi)) => (lo, hi),
            None => (self.buses[index].v_min, self.buses[index].v_max),
        }
    }
}

/// One structural violation discovered by [`validate_network`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    MultipleSlack { count: usize },
    NoSlack,
    DuplicateBusId { id: BusId },
    DanglingEndpoint { from: BusId, to: BusId },
    SelfLoop { bus: BusId },
    ZeroImpedance { from: BusId, to: BusId },
    NegativeResistance { from: BusId, to: BusId },
    NonPositiveTap { from: BusId, to: BusId },
    VoltageBandInverted { bus: BusId },
    NonFiniteDemand { bus: BusId },
    NonPositiveBase,
    Disconnected { unreachable: usize },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::MultipleSlack { count } => write!(f, "multiple slack buses ({count})"),
            Finding::NoSlack => write!(f, "no slack bus"),
            Finding::DuplicateBusId { id } => write!(f, "duplicate bus id {id}"),
            Finding::DanglingEndpoint { from, to } => {
                write!(f, "branch {from}-{to} references a missing bus (dangling endpoint)")
            }
            Finding::SelfLoop { bus } => write!(f, "branch with identical endpoints at bus {bus}"),
            Finding::ZeroImpedance { from, to } => {
                write!(f, "branch {from}-{to} has zero series impedance")
            }
            Finding::NegativeResistance { from, to } => {
                write!(f, "branch {from}-{to} has negative resistance")
            }
            Finding::NonPositiveTap { from, to } => {
                write!(f, "branch {from}-{to} has non-positive tap ratio")
            }
            Finding::VoltageBandInverted { bus } => {
                write!(f, "bus {bus} has v_min >= v_max")
            }
            Finding::NonFiniteDemand { bus } => write!(f, "bus {bus} has non-finite demand"),
            Finding::NonPositiveBase => write!(f, "base MVA must be positive"),
            Finding::Disconnected { unreachable } => {
                write!(f, "network is not connected ({unreachable} buses unreachable)")
            }
        }
    }
}

/// Outcome of structural validation; empty means every invariant holds.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.findings.is_empty() {
            return write!(f, "ok");
        }
        for (i, finding) in self.findings.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Checks every type invariant plus connectivity and reports all violations.
pub fn validate_network<T: Real>(network: &Network<T>) -> ValidationReport {
    let mut findings = Vec::new();

    if !(network.base_mva > T::zero()) {
        findings.push(Finding::NonPositiveBase);
    }

    let slack_count = network
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Slack)
        .count();
    if slack_count == 0 {
        findings.push(Finding::NoSlack);
    } else if slack_count > 1 {
        findings.push(Finding::MultipleSlack { count: slack_count });
    }

    let mut seen = std::collections::HashSet::new();
    for bus in &network.buses {
        if !seen.insert(bus.id) {
            findings.push(Finding::DuplicateBusId { id: bus.id });
        }
        if !(bus.v_min < bus.v_max) {
            findings.push(Finding::VoltageBandInverted { bus: bus.id });
        }
        if !bus.p_demand.is_finite() || !bus.q_demand.is_finite() {
            findings.push(Finding::NonFiniteDemand { bus: bus.id });
        }
    }

    for br in &network.branches {
        if br.from == br.to {
            findings.push(Finding::SelfLoop { bus: br.from });
        }
        if network.index_of(br.from).is_none() || network.index_of(br.to).is_none() {
            findings.push(Finding::DanglingEndpoint {
                from: br.from,
                to: br.to,
            });
            continue;
        }
        if br.r == T::zero() && br.x == T::zero() {
            findings.push(Finding::ZeroImpedance {
                from: br.from,
                to: br.to,
            });
        }
        if br.r < T::zero() {
            findings.push(Finding::NegativeResistance {
                from: br.from,
                to: br.to,
            });
        }
        if !(br.tap_ratio > T::zero()) {
            findings.push(Finding::NonPositiveTap {
                from: br.from,
                to: br.to,
            });
        }
    }

    if let Some(unreachable) = unreachable_count(network) {
        if unreachable > 0 {
            findings.push(Finding::Disconnected { unreachable });
        }
    }

    ValidationReport { findings }
}

/// Number of buses unreachable from bus 0 over valid branches, or `None` for an
/// empty network.
fn unreachable_count<T: Real>(network: &Network<T>) -> Option<usize> {
    let n = network.buses.len();
    if n == 0 {
        return None;
    }
    let mut adj = vec![Vec::new(); n];
    for br in &network.branches {
        if let (Some(f), Some(t)) = (network.index_of(br.from), network.index_of(br.to)) {
            adj[f].push(t);
            adj[t].push(f);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    Some(seen.iter().filter(|s| !**s).count())
}

/// Bus admittance matrix in dense complex form with magnitude/angle views.
#[derive(Debug, Clone)]
pub struct AdmittanceMatrix<T> {
    order: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Real> AdmittanceMatrix<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[i * self.order + j]
    }

    /// |Y_ij|
    pub fn magnitude(&self, i: usize, j: usize) -> T {
        self.get(i, j).norm()
    }

    /// theta_ij, the angle of Y_ij in radians.
    pub fn angle(&self, i: usize, j: usize) -> T {
        self.get(i, j).arg()
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    /// Y * v for a complex voltage vector.
    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.order;
        debug_assert_eq!(v.len(), n);
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        for i in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            let row = &self.entries[i * n..(i + 1) * n];
            for (yij, vj) in row.iter().zip(v) {
                acc += *yij * *vj;
            }
            out[i] = acc;
        }
        out
    }
}

/// Builds the bus admittance matrix from the standard branch pi-model.
///
/// Off-diagonal (i, j) accumulates -y_series/tap over every branch i-j
/// (parallel branches sum); the diagonal accumulates series terms, half
/// line-charging per terminal and the bus shunt.
pub fn build_admittance_matrix<T: Real>(
    network: &Network<T>,
) -> Result<AdmittanceMatrix<T>, ModelError> {
    let n = network.buses.len();
    if let Some(unreachable) = unreachable_count(network) {
        if unreachable > 0 {
            return Err(ModelError::Disconnected(unreachable));
        }
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut entries = vec![zero; n * n];
    let half = lit::<T>(0.5);

    for br in &network.branches {
        let f = network
            .index_of(br.from)
            .ok_or(ModelError::UnknownBus(br.from))?;
        let t = network
            .index_of(br.to)
            .ok_or(ModelError::UnknownBus(br.to))?;
        if br.r == T::zero() && br.x == T::zero() {
            return Err(ModelError::ZeroImpedanceBranch {
                from: br.from,
                to: br.to,
            });
        }
        let ys = br.series_admittance();
        let ych = Complex::new(T::zero(), half * br.b_charging);
        let a = br.tap_ratio;
        let a2 = a * a;
        entries[f * n + f] += (ys + ych) / a2;
        entries[t * n + t] += ys + ych;
        entries[f * n + t] -= ys / a;
        entries[t * n + f] -= ys / a;
    }
    for (i, bus) in network.buses.iter().enumerate() {
        entries[i * n + i] += Complex::new(bus.shunt_g, bus.shunt_b);
    }
    Ok(AdmittanceMatrix { order: n, entries })
}

/// A set of DG real-power injections keyed by bus id; sizes are in MW.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DgPlacement<T> {
    entries: Vec<(BusId, T)>,
}

impl<T: Real> DgPlacement<T> {
    pub fn new() -> Self {
        DgPlacement {
            entries: Vec::new(),
        }
    }

    /// Builds a placement from (bus, MW) pairs; repeated buses accumulate.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (BusId, T)>) -> Self {
        let mut p = DgPlacement::new();
        for (bus, size) in pairs {
            p.add(bus, size);
        }
        p
    }

    pub fn add(&mut self, bus: BusId, size_mw: T) {
        if let Some(entry) = self.entries.iter_mut().find(|(b, _)| *b == bus) {
            entry.1 = entry.1 + size_mw;
        } else {
            self.entries.push((bus, size_mw));
        }
    }

    pub fn entries(&self) -> &[(BusId, T)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total placed capacity in MW.
    pub fn total_mw(&self) -> T {
        self.entries.iter().map(|(_, s)| *s).sum()
    }
}

/// Returns a copy of the network with each DG entry applied as added real
/// generation at its bus (net injection rises by size/base_mva). Bus kinds,
/// counts and branches are unchanged; the input network is not modified.
pub fn apply_dg_injections<T: Real>(
    network: &Network<T>,
    placement: &DgPlacement<T>,
) -> Result<Network<T>, ModelError> {
    let mut out = network.clone();
    for &(bus_id, size_mw) in placement.entries() {
        let idx = out.index_of(bus_id).ok_or(ModelError::UnknownBus(bus_id))?;
        if out.buses[idx].kind == BusKind::Slack {
            return Err(ModelError::PlacementOnSlack(bus_id));
        }
        let size_pu = size_mw / out.base_mva;
        out.buses[idx].p_gen = out.buses[idx].p_gen + size_pu;
    }
    Ok(out)
}
