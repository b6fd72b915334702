//! Grid data model: buses, generators and lines in per-unit.

mod matpower;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use sha2::{Digest, Sha256};

pub use matpower::{parse_case, parse_case_with, serialize_case, ParseError, ParseOptions, Parsed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Pq,
    Pv,
    Reference,
    Isolated,
}

impl BusKind {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Self::Pq),
            2 => Some(Self::Pv),
            3 => Some(Self::Reference),
            4 => Some(Self::Isolated),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Self::Pq => 1,
            Self::Pv => 2,
            Self::Reference => 3,
            Self::Isolated => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    pub demand_pu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: usize,
    pub bus: u32,
    pub p_min_pu: f64,
    pub p_max_pu: f64,
    /// $ per per-unit of output per period.
    pub cost_per_pu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: usize,
    pub from_bus: u32,
    pub to_bus: u32,
    pub susceptance_pu: f64,
    pub flow_limit_pu: f64,
    pub switchable: bool,
}

/// Immutable grid with precomputed incidence lists.
///
/// Lines and generators whose bus is unknown are kept (so [`validate`] can
/// report them) but left out of the incidence lists.
#[derive(Debug, Clone)]
pub struct Network {
    name: String,
    base_mva: f64,
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    lines: Vec<Line>,
    bus_pos: HashMap<u32, usize>,
    line_pos: HashMap<usize, usize>,
    lines_from: Vec<Vec<usize>>,
    lines_to: Vec<Vec<usize>>,
    gens_at: Vec<Vec<usize>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.base_mva == other.base_mva
            && self.buses == other.buses
            && self.generators == other.generators
            && self.lines == other.lines
    }
}

impl Network {
    pub fn new(
        name: impl Into<String>,
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        lines: Vec<Line>,
    ) -> Self {
        let mut bus_pos = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            bus_pos.entry(b.id).or_insert(i);
        }
        let line_pos = lines.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
        let mut lines_from = vec![Vec::new(); buses.len()];
        let mut lines_to = vec![Vec::new(); buses.len()];
        for (i, l) in lines.iter().enumerate() {
            if let (Some(&o), Some(&d)) = (bus_pos.get(&l.from_bus), bus_pos.get(&l.to_bus)) {
                lines_from[o].push(i);
                lines_to[d].push(i);
            }
        }
        let mut gens_at = vec![Vec::new(); buses.len()];
        for (i, g) in generators.iter().enumerate() {
            if let Some(&b) = bus_pos.get(&g.bus) {
                gens_at[b].push(i);
            }
        }
        Self {
            name: name.into(),
            base_mva,
            buses,
            generators,
            lines,
            bus_pos,
            line_pos,
            lines_from,
            lines_to,
            gens_at,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Position of the bus with label `id` in [`Network::buses`].
    pub fn bus_position(&self, id: u32) -> Option<usize> {
        self.bus_pos.get(&id).copied()
    }

    /// Position of the line with id `id` in [`Network::lines`].
    pub fn line_position(&self, id: usize) -> Option<usize> {
        self.line_pos.get(&id).copied()
    }

    /// Line positions leaving the bus at position `bus`.
    pub fn lines_from(&self, bus: usize) -> &[usize] {
        &self.lines_from[bus]
    }

    /// Line positions entering the bus at position `bus`.
    pub fn lines_to(&self, bus: usize) -> &[usize] {
        &self.lines_to[bus]
    }

    pub fn generators_at(&self, bus: usize) -> &[usize] {
        &self.gens_at[bus]
    }

    /// Position of the first reference bus.
    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusKind::Reference)
    }

    pub fn nominal_demand(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.demand_pu).collect()
    }

    pub fn nominal_cost(&self) -> Vec<f64> {
        self.generators.iter().map(|g| g.cost_per_pu).collect()
    }

    pub fn switchable_lines(&self) -> impl Iterator<Item = &Line> {
        self.lines.iter().filter(|l| l.switchable)
    }

    /// SHA-256 over the numeric content, with values rounded to 12
    /// significant digits so that a serialize/parse round trip keeps it.
    pub fn fingerprint(&self) -> String {
        use fmt::Write;
        let mut s = String::new();
        let r = |v: f64| format!("{v:.11e}");
        let _ = writeln!(s, "base {}", r(self.base_mva));
        for b in &self.buses {
            let _ = writeln!(s, "bus {} {} {}", b.id, b.kind.code(), r(b.demand_pu));
        }
        for g in &self.generators {
            let _ = writeln!(
                s,
                "gen {} {} {} {} {}",
                g.id,
                g.bus,
                r(g.p_min_pu),
                r(g.p_max_pu),
                r(g.cost_per_pu)
            );
        }
        for l in &self.lines {
            let _ = writeln!(
                s,
                "line {} {} {} {} {} {}",
                l.id,
                l.from_bus,
                l.to_bus,
                r(l.susceptance_pu),
                r(l.flow_limit_pu),
                l.switchable
            );
        }
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    /// `"<n> buses, <n> generators, <n> lines"`.
    pub fn summary(&self) -> String {
        format!(
            "{} buses, {} generators, {} lines",
            self.buses.len(),
            self.generators.len(),
            self.lines.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NoReferenceBus,
    MultipleReferenceBuses(Vec<u32>),
    DuplicateBus(u32),
    NonFiniteDemand { bus: u32 },
    NonPositiveBaseMva(f64),
    LineMissingBus { line: usize, bus: u32 },
    GeneratorMissingBus { generator: usize, bus: u32 },
    DuplicateLine(usize),
    SelfLoop { line: usize },
    BadSusceptance { line: usize, value: f64 },
    BadFlowLimit { line: usize, value: f64 },
    InvertedDispatchBounds { generator: usize, p_min: f64, p_max: f64 },
    BadCost { generator: usize, value: f64 },
    /// Buses not reachable from the first bus over the network's lines.
    Disconnected { buses: Vec<u32> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoReferenceBus => write!(f, "no reference bus"),
            Self::MultipleReferenceBuses(ids) => {
                let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "multiple reference buses: {}", ids.join(", "))
            }
            Self::DuplicateBus(id) => write!(f, "bus {id} defined more than once"),
            Self::NonFiniteDemand { bus } => write!(f, "bus {bus} has non-finite demand"),
            Self::NonPositiveBaseMva(v) => write!(f, "baseMVA must be positive, got {v}"),
            Self::LineMissingBus { line, bus } => write!(f, "line {line} references missing bus {bus}"),
            Self::GeneratorMissingBus { generator, bus } => {
                write!(f, "generator {generator} references missing bus {bus}")
            }
            Self::DuplicateLine(id) => write!(f, "line id {id} used more than once"),
            Self::SelfLoop { line } => write!(f, "line {line} connects a bus to itself"),
            Self::BadSusceptance { line, value } => {
                write!(f, "line {line} susceptance must be positive and finite, got {value}")
            }
            Self::BadFlowLimit { line, value } => {
                write!(f, "line {line} flow limit must be positive and finite, got {value}")
            }
            Self::InvertedDispatchBounds { generator, p_min, p_max } => {
                write!(f, "generator {generator} has p_min {p_min} > p_max {p_max}")
            }
            Self::BadCost { generator, value } => {
                write!(f, "generator {generator} cost must be finite and non-negative, got {value}")
            }
            Self::Disconnected { buses } => {
                let ids: Vec<String> = buses.iter().map(|i| i.to_string()).collect();
                write!(f, "network is disconnected; unreachable buses: {}", ids.join(", "))
            }
        }
    }
}

/// Checks every data-model invariant; an empty list means the network is usable.
pub fn validate(net: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !(net.base_mva > 0.0 && net.base_mva.is_finite()) {
        out.push(Diagnostic::NonPositiveBaseMva(net.base_mva));
    }
    let mut seen = BTreeSet::new();
    for b in &net.buses {
        if !seen.insert(b.id) {
            out.push(Diagnostic::DuplicateBus(b.id));
        }
        if !b.demand_pu.is_finite() {
            out.push(Diagnostic::NonFiniteDemand { bus: b.id });
        }
    }
    let refs: Vec<u32> = net.buses.iter().filter(|b| b.kind == BusKind::Reference).map(|b| b.id).collect();
    match refs.len() {
        0 if !net.buses.is_empty() => out.push(Diagnostic::NoReferenceBus),
        0 | 1 => {}
        _ => out.push(Diagnostic::MultipleReferenceBuses(refs)),
    }
    for g in &net.generators {
        if net.bus_position(g.bus).is_none() {
            out.push(Diagnostic::GeneratorMissingBus { generator: g.id, bus: g.bus });
        }
        if !(g.p_min_pu <= g.p_max_pu) {
            out.push(Diagnostic::InvertedDispatchBounds { generator: g.id, p_min: g.p_min_pu, p_max: g.p_max_pu });
        }
        if !(g.cost_per_pu.is_finite() && g.cost_per_pu >= 0.0) {
            out.push(Diagnostic::BadCost { generator: g.id, value: g.cost_per_pu });
        }
    }
    let mut line_ids = BTreeSet::new();
    for l in &net.lines {
        if !line_ids.insert(l.id) {
            out.push(Diagnostic::DuplicateLine(l.id));
        }
        for bus in [l.from_bus, l.to_bus] {
            if net.bus_position(bus).is_none() {
                out.push(Diagnostic::LineMissingBus { line: l.id, bus });
            }
        }
        if l.from_bus == l.to_bus {
            out.push(Diagnostic::SelfLoop { line: l.id });
        }
        if !(l.susceptance_pu > 0.0 && l.susceptance_pu.is_finite()) {
            out.push(Diagnostic::BadSusceptance { line: l.id, value: l.susceptance_pu });
        }
        if !(l.flow_limit_pu > 0.0 && l.flow_limit_pu.is_finite()) {
            out.push(Diagnostic::BadFlowLimit { line: l.id, value: l.flow_limit_pu });
        }
    }
    let unreachable = unreachable_buses(net);
    if !unreachable.is_empty() {
        out.push(Diagnostic::Disconnected { buses: unreachable });
    }
    out
}

fn unreachable_buses(net: &Network) -> Vec<u32> {
    let n = net.buses.len();
    if n == 0 {
        return Vec::new();
    }
    let mut adj = vec![Vec::new(); n];
    for l in &net.lines {
        if let (Some(o), Some(d)) = (net.bus_position(l.from_bus), net.bus_position(l.to_bus)) {
            adj[o].push(d);
            adj[d].push(o);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(b) = stack.pop() {
        for &c in &adj[b] {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).map(|i| net.buses[i].id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn triangle() -> Network {
        let bus = |id, kind, d| Bus { id, kind, demand_pu: d };
        let line = |id, from_bus, to_bus, lim| Line {
            id,
            from_bus,
            to_bus,
            susceptance_pu: 10.0,
            flow_limit_pu: lim,
            switchable: true,
        };
        Network::new(
            "tri",
            100.0,
            vec![bus(1, BusKind::Reference, 0.0), bus(2, BusKind::Pq, 2.0), bus(3, BusKind::Pv, 0.0)],
            vec![
                Generator { id: 1, bus: 1, p_min_pu: 0.0, p_max_pu: 3.0, cost_per_pu: 1000.0 },
                Generator { id: 2, bus: 3, p_min_pu: 0.0, p_max_pu: 3.0, cost_per_pu: 10000.0 },
            ],
            vec![line(1, 1, 2, 0.8), line(2, 1, 3, 1.0), line(3, 2, 3, 3.0)],
        )
    }

    #[test]
    fn incidence_lists_partition_line_endpoints() {
        let net = triangle();
        let mut from: Vec<usize> = (0..3).flat_map(|b| net.lines_from(b).to_vec()).collect();
        let mut to: Vec<usize> = (0..3).flat_map(|b| net.lines_to(b).to_vec()).collect();
        from.sort();
        to.sort();
        assert_eq!(from, vec![0, 1, 2]);
        assert_eq!(to, vec![0, 1, 2]);
        assert_eq!(net.lines_from(0), &[0, 1]);
        assert_eq!(net.lines_to(2), &[1, 2]);
        assert_eq!(net.generators_at(2), &[1]);
    }

    #[test]
    fn valid_triangle_has_no_diagnostics() {
        assert!(validate(&triangle()).is_empty());
    }

    #[test]
    fn two_reference_buses_are_named_together() {
        let t = triangle();
        let mut buses = t.buses().to_vec();
        buses[2].kind = BusKind::Reference;
        let net = Network::new("x", 100.0, buses, t.generators().to_vec(), t.lines().to_vec());
        let diags = validate(&net);
        assert_eq!(diags, vec![Diagnostic::MultipleReferenceBuses(vec![1, 3])]);
        assert!(diags[0].to_string().contains("1, 3"));
    }

    #[test]
    fn missing_bus_is_reported_with_its_id() {
        let t = triangle();
        let mut lines = t.lines().to_vec();
        lines[2].to_bus = 42;
        let net = Network::new("x", 100.0, t.buses().to_vec(), t.generators().to_vec(), lines);
        let diags = validate(&net);
        assert!(diags.contains(&Diagnostic::LineMissingBus { line: 3, bus: 42 }));
        assert!(diags.iter().any(|d| d.to_string().contains("42")));
    }

    #[test]
    fn disconnected_bus_is_reported() {
        let t = triangle();
        let mut buses = t.buses().to_vec();
        buses.push(Bus { id: 9, kind: BusKind::Pq, demand_pu: 0.0 });
        let net = Network::new("x", 100.0, buses, t.generators().to_vec(), t.lines().to_vec());
        assert_eq!(validate(&net), vec![Diagnostic::Disconnected { buses: vec![9] }]);
    }

    #[test]
    fn fingerprint_ignores_name_and_sub_ulp_noise() {
        let a = triangle();
        let mut lines = a.lines().to_vec();
        lines[0].susceptance_pu = 1.0 / (1.0 / 10.0);
        lines[1].susceptance_pu = 10.000000000000002;
        let b = Network::new("other", 100.0, a.buses().to_vec(), a.generators().to_vec(), lines);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut lines = a.lines().to_vec();
        lines[0].flow_limit_pu = 0.81;
        let c = Network::new("tri", 100.0, a.buses().to_vec(), a.generators().to_vec(), lines);
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
