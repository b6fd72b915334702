//! Reader and writer for the MATPOWER case-file subset used here.
//!
//! Consumed columns (0-based): bus BUS_I 0, BUS_TYPE 1, PD 2; gen GEN_BUS 0,
//! GEN_STATUS 7, PMAX 8, PMIN 9; branch F_BUS 0, T_BUS 1, BR_X 3, RATE_A 5,
//! TAP 8, SHIFT 9, BR_STATUS 10; gencost MODEL 0, NCOST 3, coefficients from 4.
//! The optional `mpc.branch_switchable` vector (one entry per branch row)
//! marks lines that may not be opened.

use std::fmt::{self, Write};

use thiserror::Error;

use super::{Bus, BusKind, Generator, Line, Network};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unsupported: {msg}")]
    Unsupported { line: usize, msg: String },
    #[error("line {line}: reference to missing bus {bus}")]
    DanglingBus { line: usize, bus: i64 },
    #[error("missing required field mpc.{0}")]
    Missing(&'static str),
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Keep only the linear term of quadratic cost curves instead of failing.
    pub linearize_cost: bool,
    /// Limit given to branches whose RATE_A is 0 (unlimited), in p.u.
    pub unlimited_rate_pu: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { linearize_cost: false, unlimited_rate_pu: 100.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub network: Network,
    /// Non-fatal issues (ignored taps, dropped constant costs, ...).
    pub warnings: Vec<String>,
}

/// Parses with default options, discarding warnings.
pub fn parse_case(text: &str) -> Result<Network, ParseError> {
    parse_case_with(text, &ParseOptions::default()).map(|p| p.network)
}

struct Matrix {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

#[derive(Default)]
struct Fields {
    name: Option<String>,
    base_mva: Option<f64>,
    bus: Option<Matrix>,
    gen: Option<Matrix>,
    branch: Option<Matrix>,
    gencost: Option<Matrix>,
    switchable: Option<Matrix>,
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => in_str = !in_str,
            '%' | '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, ParseError> {
    tok.parse::<f64>().map_err(|_| syntax(line, format!("invalid number '{tok}'")))
}

/// Reads matrix body text starting right after `[` until the closing `]`.
fn read_matrix(lines: &[(usize, &str)], mut idx: usize, first: &str, start_line: usize) -> Result<(Matrix, usize), ParseError> {
    let mut rows = Vec::new();
    let mut row: Vec<f64> = Vec::new();
    let mut row_line = start_line;
    let mut text = first.to_string();
    let mut line_no = start_line;
    loop {
        let mut tail = None;
        let body = match text.find(']') {
            Some(p) => {
                tail = Some(text[p + 1..].trim().to_string());
                text[..p].to_string()
            }
            None => text.clone(),
        };
        for (k, chunk) in body.split(';').enumerate() {
            if k > 0 && !row.is_empty() {
                rows.push((row_line, std::mem::take(&mut row)));
            }
            for tok in chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if row.is_empty() {
                    row_line = line_no;
                }
                row.push(parse_number(tok, line_no)?);
            }
        }
        // A newline also ends a row.
        if !row.is_empty() {
            rows.push((row_line, std::mem::take(&mut row)));
        }
        if let Some(tail) = tail {
            if !(tail.is_empty() || tail == ";") {
                return Err(syntax(line_no, format!("unexpected '{tail}' after matrix")));
            }
            break;
        }
        idx += 1;
        match lines.get(idx) {
            Some(&(n, l)) => {
                line_no = n;
                text = l.to_string();
            }
            None => return Err(syntax(start_line, "unterminated matrix")),
        }
    }
    if let Some((_, first_row)) = rows.first() {
        let width = first_row.len();
        if let Some((n, r)) = rows.iter().find(|(_, r)| r.len() != width) {
            return Err(syntax(*n, format!("row has {} columns, expected {width}", r.len())));
        }
    }
    Ok((Matrix { line: start_line, rows }, idx))
}

fn skip_until(lines: &[(usize, &str)], mut idx: usize, first: &str, close: char, start_line: usize) -> Result<usize, ParseError> {
    let mut text = first;
    loop {
        if text.contains(close) {
            return Ok(idx);
        }
        idx += 1;
        match lines.get(idx) {
            Some(&(_, l)) => text = l,
            None => return Err(syntax(start_line, format!("unterminated block, expected '{close}'"))),
        }
    }
}

fn read_fields(text: &str, warnings: &mut Vec<String>) -> Result<Fields, ParseError> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l).trim())).collect();
    let mut f = Fields::default();
    let mut idx = 0;
    while idx < lines.len() {
        let (n, line) = lines[idx];
        if line.is_empty() || line == "end" || line == "return" || line == "end;" || line == "return;" {
            idx += 1;
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            let name = rest.split('=').nth(1).map(str::trim).unwrap_or("").trim_end_matches(';');
            if name.is_empty() {
                return Err(syntax(n, "malformed function line"));
            }
            f.name = Some(name.to_string());
            idx += 1;
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            return Err(syntax(n, format!("unrecognized statement '{line}'")));
        };
        let Some((field, value)) = rest.split_once('=') else {
            return Err(syntax(n, "expected '=' in assignment"));
        };
        let field = field.trim();
        let value = value.trim();
        if let Some(body) = value.strip_prefix('[') {
            let (m, end) = read_matrix(&lines, idx, body, n)?;
            idx = end + 1;
            match field {
                "bus" => f.bus = Some(m),
                "gen" => f.gen = Some(m),
                "branch" => f.branch = Some(m),
                "gencost" => f.gencost = Some(m),
                "branch_switchable" => f.switchable = Some(m),
                "dcline" if !m.rows.is_empty() => {
                    return Err(ParseError::Unsupported { line: n, msg: "DC lines (mpc.dcline)".into() })
                }
                _ => warnings.push(format!("line {n}: ignoring mpc.{field}")),
            }
        } else if let Some(body) = value.strip_prefix('{') {
            idx = skip_until(&lines, idx, body, '}', n)? + 1;
        } else {
            let v = value.trim_end_matches(';').trim();
            match field {
                "baseMVA" => f.base_mva = Some(parse_number(v, n)?),
                "version" => {}
                _ => warnings.push(format!("line {n}: ignoring mpc.{field}")),
            }
            idx += 1;
        }
    }
    Ok(f)
}

fn need_cols(m: &Matrix, cols: usize, what: &str) -> Result<(), ParseError> {
    match m.rows.first() {
        Some((n, r)) if r.len() < cols => {
            Err(syntax(*n, format!("{what} rows need at least {cols} columns, found {}", r.len())))
        }
        _ => Ok(()),
    }
}

fn as_id(v: f64, line: usize, what: &str) -> Result<i64, ParseError> {
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(syntax(line, format!("{what} must be an integer, got {v}")));
    }
    Ok(v as i64)
}

fn bus_label(v: f64, line: usize) -> Result<u32, ParseError> {
    let id = as_id(v, line, "bus number")?;
    u32::try_from(id).map_err(|_| syntax(line, format!("bus number {id} out of range")))
}

pub fn parse_case_with(text: &str, opts: &ParseOptions) -> Result<Parsed, ParseError> {
    let mut warnings = Vec::new();
    let f = read_fields(text, &mut warnings)?;
    let base_mva = f.base_mva.ok_or(ParseError::Missing("baseMVA"))?;
    let bus_m = f.bus.ok_or(ParseError::Missing("bus"))?;
    let gen_m = f.gen.ok_or(ParseError::Missing("gen"))?;
    let branch_m = f.branch.unwrap_or(Matrix { line: 0, rows: Vec::new() });
    need_cols(&bus_m, 3, "bus")?;
    need_cols(&gen_m, 10, "gen")?;
    need_cols(&branch_m, 11, "branch")?;

    let mut buses = Vec::new();
    let mut isolated = Vec::new();
    for (n, r) in &bus_m.rows {
        let id = bus_label(r[0], *n)?;
        let code = as_id(r[1], *n, "bus type")?;
        let kind = BusKind::from_code(code).ok_or_else(|| syntax(*n, format!("invalid bus type {code}")))?;
        if kind == BusKind::Isolated {
            warnings.push(format!("line {n}: isolated bus {id} dropped"));
            isolated.push(id);
            continue;
        }
        buses.push(Bus { id, kind, demand_pu: r[2] / base_mva });
    }
    let known = |id: i64| buses.iter().any(|b| i64::from(b.id) == id);
    let is_isolated = |id: i64| isolated.iter().any(|&b| i64::from(b) == id);

    let costs = match &f.gencost {
        Some(m) => {
            need_cols(m, 4, "gencost")?;
            if m.rows.len() < gen_m.rows.len() {
                return Err(syntax(m.line, format!("gencost has {} rows for {} generators", m.rows.len(), gen_m.rows.len())));
            }
            m.rows.iter().take(gen_m.rows.len()).map(|(n, r)| linear_cost(*n, r, opts, &mut warnings)).collect::<Result<Vec<_>, _>>()?
        }
        None => return Err(ParseError::Missing("gencost")),
    };

    let mut generators = Vec::new();
    for (k, (n, r)) in gen_m.rows.iter().enumerate() {
        let bus = as_id(r[0], *n, "generator bus")?;
        if r[7] <= 0.0 {
            continue;
        }
        if !known(bus) {
            if is_isolated(bus) {
                warnings.push(format!("line {n}: generator at isolated bus {bus} dropped"));
                continue;
            }
            return Err(ParseError::DanglingBus { line: *n, bus });
        }
        generators.push(Generator {
            id: generators.len() + 1,
            bus: bus as u32,
            p_min_pu: r[9] / base_mva,
            p_max_pu: r[8] / base_mva,
            cost_per_pu: costs[k] * base_mva,
        });
    }

    let switchable: Vec<f64> = match &f.switchable {
        Some(m) => {
            let flat: Vec<f64> = m.rows.iter().flat_map(|(_, r)| r.iter().copied()).collect();
            if flat.len() != branch_m.rows.len() {
                return Err(syntax(m.line, format!("branch_switchable has {} entries for {} branches", flat.len(), branch_m.rows.len())));
            }
            flat
        }
        None => vec![1.0; branch_m.rows.len()],
    };

    let mut lines = Vec::new();
    for (k, (n, r)) in branch_m.rows.iter().enumerate() {
        if r[10] <= 0.0 {
            continue;
        }
        let from = as_id(r[0], *n, "from bus")?;
        let to = as_id(r[1], *n, "to bus")?;
        let mut skip = false;
        for b in [from, to] {
            if !known(b) {
                if is_isolated(b) {
                    skip = true;
                } else {
                    return Err(ParseError::DanglingBus { line: *n, bus: b });
                }
            }
        }
        if skip {
            warnings.push(format!("line {n}: branch touching an isolated bus dropped"));
            continue;
        }
        let x = r[3];
        if x == 0.0 {
            return Err(ParseError::Unsupported { line: *n, msg: "branch with zero reactance".into() });
        }
        let (tap, shift) = (r[8], r[9]);
        if (tap != 0.0 && tap != 1.0) || shift != 0.0 {
            warnings.push(format!("line {n}: transformer tap {tap} / shift {shift} ignored"));
        }
        let flow_limit_pu = if r[5] == 0.0 { opts.unlimited_rate_pu } else { r[5] / base_mva };
        lines.push(Line {
            id: lines.len() + 1,
            from_bus: from as u32,
            to_bus: to as u32,
            susceptance_pu: 1.0 / x,
            flow_limit_pu,
            switchable: switchable[k] != 0.0,
        });
    }

    let name = f.name.unwrap_or_else(|| "case".to_string());
    Ok(Parsed { network: Network::new(name, base_mva, buses, generators, lines), warnings })
}

/// Returns the linear coefficient ($/MWh) of a polynomial gencost row.
fn linear_cost(line: usize, r: &[f64], opts: &ParseOptions, warnings: &mut Vec<String>) -> Result<f64, ParseError> {
    let model = as_id(r[0], line, "cost model")?;
    if model != 2 {
        return Err(ParseError::Unsupported { line, msg: format!("cost model {model} (only polynomial model 2)") });
    }
    let ncost = as_id(r[3], line, "NCOST")?;
    let ncost = usize::try_from(ncost).map_err(|_| syntax(line, "negative NCOST"))?;
    if r.len() < 4 + ncost {
        return Err(syntax(line, format!("gencost row lists {ncost} coefficients but has only {} values", r.len() - 4)));
    }
    // Highest power first: c_{n-1} ... c_1 c_0.
    let coeffs = &r[4..4 + ncost];
    let coef = |power: usize| if power < ncost { coeffs[ncost - 1 - power] } else { 0.0 };
    for power in 2..ncost {
        if coef(power) != 0.0 {
            if !opts.linearize_cost {
                return Err(ParseError::Unsupported {
                    line,
                    msg: format!("nonzero degree-{power} cost coefficient {} (use linearize-cost)", coef(power)),
                });
            }
            warnings.push(format!("line {line}: degree-{power} cost term dropped"));
        }
    }
    if coef(0) != 0.0 {
        warnings.push(format!("line {line}: constant cost term {} dropped", coef(0)));
    }
    Ok(coef(1))
}

/// Writes `net` as a MATPOWER case; unused columns get neutral values.
pub fn serialize_case(net: &Network) -> String {
    let base = net.base_mva();
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {}", net.name());
    s.push_str("mpc.version = '2';\n");
    let _ = writeln!(s, "mpc.baseMVA = {base};\n");
    s.push_str("%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n");
    for b in net.buses() {
        let _ = writeln!(s, "\t{}\t{}\t{}\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;", b.id, b.kind.code(), Num(b.demand_pu * base));
    }
    s.push_str("];\n\n%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for g in net.generators() {
        let _ = writeln!(
            s,
            "\t{}\t0\t0\t0\t0\t1\t{}\t1\t{}\t{};",
            g.bus,
            Num(base),
            Num(g.p_max_pu * base),
            Num(g.p_min_pu * base)
        );
    }
    s.push_str("];\n\n%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [\n");
    for l in net.lines() {
        let rate = Num(l.flow_limit_pu * base);
        let _ = writeln!(
            s,
            "\t{}\t{}\t0\t{}\t0\t{rate}\t{rate}\t{rate}\t0\t0\t1;",
            l.from_bus,
            l.to_bus,
            Num(1.0 / l.susceptance_pu)
        );
    }
    s.push_str("];\n\n%% generator cost data\n%\t2\tstartup\tshutdown\tn\tc1\tc0\nmpc.gencost = [\n");
    for g in net.generators() {
        let _ = writeln!(s, "\t2\t0\t0\t2\t{}\t0;", Num(g.cost_per_pu / base));
    }
    s.push_str("];\n");
    if net.lines().iter().any(|l| !l.switchable) {
        s.push_str("\nmpc.branch_switchable = [\n");
        for l in net.lines() {
            let _ = writeln!(s, "\t{};", u8::from(l.switchable));
        }
        s.push_str("];\n");
    }
    s
}

/// Shortest representation that parses back to the same `f64`.
struct Num(f64);

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("Inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-Inf")
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_BUS: &str = "function mpc = one\nmpc.baseMVA = 100;\nmpc.bus = [1 3 50 0 0 0 1 1 0 0 1 1.1 0.9];\nmpc.gen = [1 0 0 0 0 1 100 1 80 0];\nmpc.gencost = [2 0 0 2 12 0];\n";

    #[test]
    fn smallest_case_parses() {
        let net = parse_case(ONE_BUS).unwrap();
        assert_eq!(net.buses().len(), 1);
        assert!(net.lines().is_empty());
        assert_eq!(net.generators()[0].cost_per_pu, 1200.0);
        assert_eq!(net.generators()[0].p_max_pu, 0.8);
        assert_eq!(net.buses()[0].demand_pu, 0.5);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let bad = ONE_BUS.replace("mpc.gen = [1 0", "mpc.gen = [1 x");
        assert_eq!(parse_case(&bad).unwrap_err(), ParseError::Syntax { line: 4, msg: "invalid number 'x'".into() });
        let unterminated = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0\n";
        assert!(matches!(parse_case(unterminated), Err(ParseError::Syntax { line: 2, .. })));
        assert!(matches!(parse_case("x = 3"), Err(ParseError::Syntax { line: 1, .. })));
    }

    #[test]
    fn quadratic_costs_need_opt_in() {
        let quad = ONE_BUS.replace("[2 0 0 2 12 0]", "[2 0 0 3 0.01 12 7]");
        let err = parse_case(&quad).unwrap_err();
        assert!(matches!(err, ParseError::Unsupported { line: 5, .. }), "{err}");
        let opts = ParseOptions { linearize_cost: true, ..Default::default() };
        let p = parse_case_with(&quad, &opts).unwrap();
        assert_eq!(p.network.generators()[0].cost_per_pu, 1200.0);
        assert_eq!(p.warnings.len(), 2);
        let zero_quad = ONE_BUS.replace("[2 0 0 2 12 0]", "[2 0 0 3 0 12 0]");
        assert!(parse_case(&zero_quad).is_ok());
    }

    #[test]
    fn dc_lines_and_piecewise_costs_are_rejected() {
        let dc = format!("{ONE_BUS}mpc.dcline = [1 2 1 10 10 0 0 1 1 0 10 0 0 0 0 0 0];\n");
        assert!(matches!(parse_case(&dc), Err(ParseError::Unsupported { line: 6, .. })));
        let pwl = ONE_BUS.replace("[2 0 0 2 12 0]", "[1 0 0 2 0 0 80 960]");
        assert!(matches!(parse_case(&pwl), Err(ParseError::Unsupported { .. })));
    }

    #[test]
    fn dangling_bus_reference_is_an_error() {
        let text = format!("{ONE_BUS}mpc.branch = [1 7 0 0.1 0 100 100 100 0 0 1];\n");
        assert_eq!(parse_case(&text).unwrap_err(), ParseError::DanglingBus { line: 6, bus: 7 });
    }

    #[test]
    fn status_zero_and_unlimited_rate_handling() {
        let text = "mpc.baseMVA = 100;
mpc.bus = [
  1 3 0;
  2 1 20;
];
mpc.gen = [
  1 0 0 0 0 1 100 1 80 0;
  2 0 0 0 0 1 100 0 80 0;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1;
  1 2 0 0.2 0 50 0 0 0 0 0;
  1 2 0 0.5 0 50 0 0 0.98 0 1;
];
mpc.gencost = [
  2 0 0 2 10 0;
  2 0 0 2 20 0;
];
";
        let p = parse_case_with(text, &ParseOptions { unlimited_rate_pu: 7.0, ..Default::default() }).unwrap();
        let net = p.network;
        assert_eq!(net.generators().len(), 1);
        assert_eq!(net.lines().len(), 2);
        assert_eq!(net.lines()[0].flow_limit_pu, 7.0);
        assert_eq!(net.lines()[1].id, 2);
        assert_eq!(net.lines()[1].susceptance_pu, 2.0);
        assert!(p.warnings.iter().any(|w| w.contains("tap")));
    }

    #[test]
    fn switchable_extension_round_trips() {
        let text = format!(
            "{}mpc.branch = [1 2 0 0.1 0 100 0 0 0 0 1; 1 2 0 0.1 0 100 0 0 0 0 1];\nmpc.branch_switchable = [1 0];\n",
            ONE_BUS.replace("mpc.bus = [1 3 50 0 0 0 1 1 0 0 1 1.1 0.9];", "mpc.bus = [1 3 50; 2 1 0];")
        );
        let net = parse_case(&text).unwrap();
        assert!(net.lines()[0].switchable);
        assert!(!net.lines()[1].switchable);
        let again = parse_case(&serialize_case(&net)).unwrap();
        assert_eq!(again, net);
    }

    #[test]
    fn comments_and_cell_arrays_are_skipped() {
        let text = format!(
            "% header\n{ONE_BUS}mpc.bus_name = {{\n\t'Alpha';  % 50% loaded\n}};\nmpc.areas = [1 1];\n"
        );
        let p = parse_case_with(&text, &ParseOptions::default()).unwrap();
        assert_eq!(p.network.name(), "one");
        assert_eq!(p.warnings.len(), 1);
    }
}
