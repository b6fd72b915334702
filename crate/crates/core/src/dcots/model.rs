//! The big-M switching MIP.

use std::f64::consts::PI;

use otswitch_lp::{LinearProgram, MipProblem, Relation};

use super::{DcotsError, DcotsInstance, DispatchSolution, Topology, ANGLE_WINDOW};

/// Column positions of each variable group: `[p | θ | u | v | f | y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub generators: usize,
    pub buses: usize,
    pub lines: usize,
}

impl VarLayout {
    pub fn p(&self, g: usize) -> usize {
        g
    }
    pub fn theta(&self, b: usize) -> usize {
        self.generators + b
    }
    pub fn u(&self, b: usize) -> usize {
        self.generators + self.buses + b
    }
    pub fn v(&self, b: usize) -> usize {
        self.generators + 2 * self.buses + b
    }
    pub fn f(&self, l: usize) -> usize {
        self.generators + 3 * self.buses + l
    }
    pub fn y(&self, l: usize) -> usize {
        self.generators + 3 * self.buses + self.lines + l
    }
    pub fn len(&self) -> usize {
        self.generators + 3 * self.buses + 2 * self.lines
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What each MIP row encodes; indexes are network positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `f − B Δθ ≤ 2πB (1 − y)`
    OhmUpper(usize),
    /// `f − B Δθ ≥ −2πB (1 − y)`
    OhmLower(usize),
    /// `Δθ ≤ π/6 + 2π (1 − y)`
    AngleUpper(usize),
    /// `Δθ ≥ −π/6 − 2π (1 − y)`
    AngleLower(usize),
    /// `f ≤ F y`
    FlowUpper(usize),
    /// `f ≥ −F y`
    FlowLower(usize),
    Balance(usize),
    /// `Σ (1 − y) ≤ K`
    Cardinality,
}

impl RowKind {
    /// Rows whose right-hand side carries a `2π` big-M term.
    pub fn is_big_m(self) -> bool {
        matches!(self, Self::OhmUpper(_) | Self::OhmLower(_) | Self::AngleUpper(_) | Self::AngleLower(_))
    }
}

#[derive(Debug, Clone)]
pub struct DcotsMip {
    pub mip: MipProblem,
    pub layout: VarLayout,
    pub row_kinds: Vec<RowKind>,
    /// Line id at each network position.
    pub line_ids: Vec<usize>,
}

pub fn build_dcots_mip(inst: &DcotsInstance) -> Result<DcotsMip, DcotsError> {
    let net = inst.network();
    let layout = VarLayout { generators: net.generators().len(), buses: net.buses().len(), lines: net.lines().len() };
    let m = inst.infeasibility_cost();
    let mut lp = LinearProgram::new();
    for (g, c) in net.generators().iter().zip(inst.gen_cost()) {
        lp.add_named_var(format!("p_g{}", g.id), *c, g.p_min_pu, g.p_max_pu);
    }
    let reference = net.reference_bus();
    for (b, bus) in net.buses().iter().enumerate() {
        let bound = if Some(b) == reference { 0.0 } else { PI };
        lp.add_named_var(format!("theta_b{}", bus.id), 0.0, -bound, bound);
    }
    for bus in net.buses() {
        lp.add_named_var(format!("u_b{}", bus.id), m, 0.0, f64::INFINITY);
    }
    for bus in net.buses() {
        lp.add_named_var(format!("v_b{}", bus.id), m, 0.0, f64::INFINITY);
    }
    for line in net.lines() {
        lp.add_named_var(format!("f_l{}", line.id), 0.0, f64::NEG_INFINITY, f64::INFINITY);
    }
    for line in net.lines() {
        let lo = if line.switchable { 0.0 } else { 1.0 };
        lp.add_named_var(format!("y_l{}", line.id), 0.0, lo, 1.0);
    }
    debug_assert_eq!(lp.num_vars(), layout.len());

    let mut kinds = Vec::new();
    let mut row = |lp: &mut LinearProgram, kind, coeffs, rel, rhs| {
        lp.add_constraint(coeffs, rel, rhs);
        kinds.push(kind);
    };
    for (l, line) in net.lines().iter().enumerate() {
        let o = layout.theta(net.bus_position(line.from_bus).expect("validated"));
        let d = layout.theta(net.bus_position(line.to_bus).expect("validated"));
        let (f, y, b) = (layout.f(l), layout.y(l), line.susceptance_pu);
        let big = 2.0 * PI * b;
        row(&mut lp, RowKind::OhmUpper(l), vec![(f, 1.0), (o, -b), (d, b), (y, big)], Relation::Le, big);
        row(&mut lp, RowKind::OhmLower(l), vec![(f, 1.0), (o, -b), (d, b), (y, -big)], Relation::Ge, -big);
        row(&mut lp, RowKind::AngleUpper(l), vec![(o, 1.0), (d, -1.0), (y, 2.0 * PI)], Relation::Le, ANGLE_WINDOW + 2.0 * PI);
        row(&mut lp, RowKind::AngleLower(l), vec![(o, 1.0), (d, -1.0), (y, -2.0 * PI)], Relation::Ge, -ANGLE_WINDOW - 2.0 * PI);
        row(&mut lp, RowKind::FlowUpper(l), vec![(f, 1.0), (y, -line.flow_limit_pu)], Relation::Le, 0.0);
        row(&mut lp, RowKind::FlowLower(l), vec![(f, 1.0), (y, line.flow_limit_pu)], Relation::Ge, 0.0);
    }
    for b in 0..layout.buses {
        let mut coeffs: Vec<(usize, f64)> = net.generators_at(b).iter().map(|&g| (layout.p(g), 1.0)).collect();
        coeffs.extend(net.lines_to(b).iter().map(|&l| (layout.f(l), 1.0)));
        coeffs.extend(net.lines_from(b).iter().map(|&l| (layout.f(l), -1.0)));
        coeffs.push((layout.u(b), 1.0));
        coeffs.push((layout.v(b), -1.0));
        row(&mut lp, RowKind::Balance(b), coeffs, Relation::Eq, inst.demand()[b]);
    }
    if let Some(k) = inst.cardinality() {
        let coeffs = (0..layout.lines).map(|l| (layout.y(l), 1.0)).collect();
        row(&mut lp, RowKind::Cardinality, coeffs, Relation::Ge, layout.lines as f64 - k as f64);
    }
    let integer_vars = (0..layout.lines).map(|l| layout.y(l)).collect();
    let line_ids = net.lines().iter().map(|l| l.id).collect();
    Ok(DcotsMip { mip: MipProblem::new(lp, integer_vars), layout, row_kinds: kinds, line_ids })
}

impl DcotsMip {
    /// The MIP relaxation with every `y` fixed to `topo`: an LP.
    pub fn fix_topology(&self, inst: &DcotsInstance, topo: &Topology) -> Result<LinearProgram, DcotsError> {
        topo.check(inst)?;
        let mut lp = self.mip.lp.clone();
        for (l, line) in inst.network().lines().iter().enumerate() {
            let y = if topo.is_open(line.id) { 0.0 } else { 1.0 };
            lp.lower[self.layout.y(l)] = y;
            lp.upper[self.layout.y(l)] = y;
        }
        Ok(lp)
    }

    /// MIP point corresponding to a fixed-topology dispatch.
    pub fn point_from(&self, sol: &DispatchSolution) -> Vec<f64> {
        let ly = &self.layout;
        let mut x = vec![0.0; ly.len()];
        for (g, &p) in sol.dispatch.iter().enumerate() {
            x[ly.p(g)] = p;
        }
        for b in 0..ly.buses {
            x[ly.theta(b)] = sol.angle[b];
            x[ly.u(b)] = sol.load_shed[b];
            x[ly.v(b)] = sol.over_generation[b];
        }
        for (l, &id) in self.line_ids.iter().enumerate() {
            x[ly.f(l)] = sol.flow[l];
            x[ly.y(l)] = if sol.topology.is_open(id) { 0.0 } else { 1.0 };
        }
        x
    }

    /// Topology read off a MIP point (`y < 0.5` means open).
    pub fn topology_of(&self, x: &[f64]) -> Topology {
        Topology::from_open(
            (0..self.layout.lines).filter(|&l| x[self.layout.y(l)] < 0.5).map(|l| self.line_ids[l]),
        )
    }
}
