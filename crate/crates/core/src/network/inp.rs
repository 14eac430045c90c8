//! Reader and writer for the subset of the EPANET INP format needed to load
//! benchmark networks.
//!
//! Supported sections: `[JUNCTIONS]`, `[RESERVOIRS]`, `[PIPES]`, `[VALVES]`,
//! `[DEMANDS]`, `[PATTERNS]`, `[COORDINATES]`, `[TIMES]`, `[TAGS]` and the
//! `Units`, `Headloss`, `Pattern` and `Demand Multiplier` keys of
//! `[OPTIONS]`. Other sections are skipped with a warning. Only the
//! Hazen-Williams head loss formula is accepted.
//!
//! Links tagged `PRV` or `DBV` in `[TAGS]` are flagged as existing control
//! valves; `PRV` entries of `[VALVES]` are flagged automatically.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{DemandNode, Link, LinkKind, NetworkError, NetworkModel, NodeRef, SourceNode};

#[derive(Debug, Error, PartialEq)]
pub enum InpError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required section [{0}]")]
    MissingSection(&'static str),
    #[error("unsupported head loss formula {0}; only H-W is supported")]
    UnsupportedHeadloss(String),
    #[error("unsupported flow units {0}")]
    UnsupportedUnits(String),
    #[error("line {line}: link {id} is a {kind}, which is not supported")]
    UnsupportedLink { line: usize, id: String, kind: String },
    #[error("line {line}: unknown node {node}")]
    UnknownNode { line: usize, node: String },
    #[error("line {line}: unknown pattern {pattern}")]
    UnknownPattern { line: usize, pattern: String },
    #[error("timestep {index} is outside the pattern period {period}")]
    Timestep { index: usize, period: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Timestep selection applied while resolving demand patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct InpOptions {
    /// Explicit pattern step indices. When `None`, the `peak_steps` steps with
    /// the largest total demand are used.
    pub timesteps: Option<Vec<usize>>,
    pub peak_steps: usize,
}

impl Default for InpOptions {
    fn default() -> Self {
        InpOptions {
            timesteps: None,
            peak_steps: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedInp {
    pub network: NetworkModel,
    pub warnings: Vec<String>,
    /// Pattern step index of each network timestep.
    pub timesteps: Vec<usize>,
    pub pattern_period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Junctions,
    Reservoirs,
    Pipes,
    Valves,
    Demands,
    Patterns,
    Coordinates,
    Times,
    Options,
    Tags,
    Pumps,
    Title,
    End,
    Ignored,
}

#[derive(Debug, Clone, Copy)]
struct Units {
    flow: f64,
    length: f64,
    diameter: f64,
}

fn units_for(name: &str) -> Option<Units> {
    const FT: f64 = 0.3048;
    const INCH: f64 = 0.0254;
    let us = |flow| Units {
        flow,
        length: FT,
        diameter: INCH,
    };
    let si = |flow| Units {
        flow,
        length: 1.0,
        diameter: 1e-3,
    };
    Some(match name.to_ascii_uppercase().as_str() {
        "CFS" => us(0.028316846592),
        "GPM" => us(6.30901964e-5),
        "MGD" => us(0.0438126364),
        "IMGD" => us(0.0526168042),
        "AFD" => us(0.01427641),
        "LPS" => si(1e-3),
        "LPM" => si(1.0 / 60_000.0),
        "MLD" => si(1000.0 / 86_400.0),
        "CMH" => si(1.0 / 3600.0),
        "CMD" => si(1.0 / 86_400.0),
        "CMS" => si(1.0),
        _ => return None,
    })
}

/// Convert a raw value with a unit factor. Unit factors of one and powers of
/// ten below one are applied by division so that decimal input round-trips.
fn convert(raw: f64, factor: f64) -> f64 {
    if factor == 1.0 {
        raw
    } else if factor == 1e-3 {
        raw / 1000.0
    } else {
        raw * factor
    }
}

struct RawJunction {
    id: String,
    elevation: f64,
    demand: f64,
    pattern: Option<String>,
    line: usize,
}

struct RawReservoir {
    id: String,
    head: f64,
    pattern: Option<String>,
    line: usize,
}

struct RawLink {
    id: String,
    from: String,
    to: String,
    kind: LinkKind,
    length: f64,
    diameter: f64,
    roughness: f64,
    loss: f64,
    prv: bool,
    line: usize,
}

struct RawDemand {
    node: String,
    demand: f64,
    pattern: Option<String>,
    line: usize,
}

fn syntax(line: usize, message: impl Into<String>) -> InpError {
    InpError::Syntax {
        line,
        message: message.into(),
    }
}

fn number(tok: &str, line: usize, what: &str) -> Result<f64, InpError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line, format!("invalid {what} '{tok}'")))
}

fn require(toks: &[&str], n: usize, line: usize, what: &str) -> Result<(), InpError> {
    if toks.len() < n {
        return Err(syntax(
            line,
            format!("{what} needs at least {n} fields, found {}", toks.len()),
        ));
    }
    Ok(())
}

/// Parse an INP document into a validated network.
pub fn parse_inp(text: &str, opts: &InpOptions) -> Result<ParsedInp, InpError> {
    let mut warnings = Vec::new();
    let mut warn = |msg: String| {
        log::warn!("{msg}");
        warnings.push(msg);
    };

    let mut section = Section::Ignored;
    let mut seen_sections = Vec::new();
    let mut junctions = Vec::new();
    let mut reservoirs = Vec::new();
    let mut links: Vec<RawLink> = Vec::new();
    let mut demands: Vec<RawDemand> = Vec::new();
    let mut patterns: HashMap<String, Vec<f64>> = HashMap::new();
    let mut pattern_order: Vec<String> = Vec::new();
    let mut coordinates: HashMap<String, (f64, f64)> = HashMap::new();
    let mut tags: Vec<(String, String, usize)> = Vec::new();
    let mut units_name = "GPM".to_string();
    let mut default_pattern = "1".to_string();
    let mut demand_multiplier = 1.0;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw_line.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let name = content
                .trim_start_matches('[')
                .split(']')
                .next()
                .unwrap_or("")
                .trim()
                .to_ascii_uppercase();
            section = match name.as_str() {
                "JUNCTIONS" => Section::Junctions,
                "RESERVOIRS" => Section::Reservoirs,
                "PIPES" => Section::Pipes,
                "VALVES" => Section::Valves,
                "DEMANDS" => Section::Demands,
                "PATTERNS" => Section::Patterns,
                "COORDINATES" => Section::Coordinates,
                "TIMES" => Section::Times,
                "OPTIONS" => Section::Options,
                "TAGS" => Section::Tags,
                "TITLE" => Section::Title,
                "END" => Section::End,
                "PUMPS" => {
                    warn(format!("line {line_no}: unsupported section [PUMPS] ignored"));
                    Section::Pumps
                }
                other => {
                    warn(format!("line {line_no}: unsupported section [{other}] ignored"));
                    Section::Ignored
                }
            };
            seen_sections.push(section);
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        match section {
            Section::Junctions => {
                require(&toks, 2, line_no, "junction")?;
                junctions.push(RawJunction {
                    id: toks[0].to_string(),
                    elevation: number(toks[1], line_no, "elevation")?,
                    demand: match toks.get(2) {
                        Some(t) => number(t, line_no, "demand")?,
                        None => 0.0,
                    },
                    pattern: toks.get(3).map(|s| s.to_string()),
                    line: line_no,
                });
            }
            Section::Reservoirs => {
                require(&toks, 2, line_no, "reservoir")?;
                reservoirs.push(RawReservoir {
                    id: toks[0].to_string(),
                    head: number(toks[1], line_no, "head")?,
                    pattern: toks.get(2).map(|s| s.to_string()),
                    line: line_no,
                });
            }
            Section::Pipes => {
                require(&toks, 6, line_no, "pipe")?;
                if let Some(status) = toks.get(7) {
                    match status.to_ascii_uppercase().as_str() {
                        "OPEN" => {}
                        "CV" => warn(format!(
                            "line {line_no}: check valve on pipe {} treated as an open pipe",
                            toks[0]
                        )),
                        other => warn(format!(
                            "line {line_no}: pipe {} status {other} ignored; pipe is open",
                            toks[0]
                        )),
                    }
                }
                links.push(RawLink {
                    id: toks[0].to_string(),
                    from: toks[1].to_string(),
                    to: toks[2].to_string(),
                    kind: LinkKind::Pipe,
                    length: number(toks[3], line_no, "length")?,
                    diameter: number(toks[4], line_no, "diameter")?,
                    roughness: number(toks[5], line_no, "roughness")?,
                    loss: 0.0,
                    prv: false,
                    line: line_no,
                });
            }
            Section::Valves => {
                require(&toks, 6, line_no, "valve")?;
                let kind = toks[4].to_ascii_uppercase();
                let setting = number(toks[5], line_no, "setting")?;
                let minor = match toks.get(6) {
                    Some(t) => number(t, line_no, "minor loss")?,
                    None => 0.0,
                };
                let loss = match kind.as_str() {
                    "TCV" => setting,
                    "PRV" => minor,
                    other => {
                        warn(format!(
                            "line {line_no}: {other} valve {} modelled as an open valve",
                            toks[0]
                        ));
                        minor
                    }
                };
                links.push(RawLink {
                    id: toks[0].to_string(),
                    from: toks[1].to_string(),
                    to: toks[2].to_string(),
                    kind: LinkKind::Valve,
                    length: 0.0,
                    diameter: number(toks[3], line_no, "diameter")?,
                    roughness: 0.0,
                    loss,
                    prv: kind == "PRV",
                    line: line_no,
                });
            }
            Section::Demands => {
                require(&toks, 2, line_no, "demand")?;
                demands.push(RawDemand {
                    node: toks[0].to_string(),
                    demand: number(toks[1], line_no, "demand")?,
                    pattern: toks.get(2).map(|s| s.to_string()),
                    line: line_no,
                });
            }
            Section::Patterns => {
                require(&toks, 2, line_no, "pattern")?;
                let values = toks[1..]
                    .iter()
                    .map(|t| number(t, line_no, "multiplier"))
                    .collect::<Result<Vec<_>, _>>()?;
                let id = toks[0].to_string();
                if !patterns.contains_key(&id) {
                    pattern_order.push(id.clone());
                }
                patterns.entry(id).or_default().extend(values);
            }
            Section::Coordinates => {
                require(&toks, 3, line_no, "coordinate")?;
                coordinates.insert(
                    toks[0].to_string(),
                    (number(toks[1], line_no, "x")?, number(toks[2], line_no, "y")?),
                );
            }
            Section::Tags => {
                require(&toks, 3, line_no, "tag")?;
                tags.push((
                    toks[0].to_ascii_uppercase(),
                    format!("{}\u{0}{}", toks[1], toks[2]),
                    line_no,
                ));
            }
            Section::Options => {
                let key = toks[0].to_ascii_uppercase();
                match key.as_str() {
                    "UNITS" => {
                        require(&toks, 2, line_no, "Units option")?;
                        units_name = toks[1].to_ascii_uppercase();
                    }
                    "HEADLOSS" => {
                        require(&toks, 2, line_no, "Headloss option")?;
                        let f = toks[1].to_ascii_uppercase();
                        if f != "H-W" {
                            return Err(InpError::UnsupportedHeadloss(toks[1].to_string()));
                        }
                    }
                    "PATTERN" => {
                        require(&toks, 2, line_no, "Pattern option")?;
                        default_pattern = toks[1].to_string();
                    }
                    "DEMAND" if toks.get(1).map(|s| s.eq_ignore_ascii_case("MULTIPLIER")) == Some(true) => {
                        require(&toks, 3, line_no, "Demand Multiplier option")?;
                        demand_multiplier = number(toks[2], line_no, "demand multiplier")?;
                    }
                    _ => {}
                }
            }
            Section::Pumps => {
                return Err(InpError::UnsupportedLink {
                    line: line_no,
                    id: toks[0].to_string(),
                    kind: "pump".into(),
                });
            }
            Section::Times | Section::Title | Section::End | Section::Ignored => {}
        }
    }

    for (name, sec) in [
        ("JUNCTIONS", Section::Junctions),
        ("RESERVOIRS", Section::Reservoirs),
        ("PIPES", Section::Pipes),
    ] {
        if !seen_sections.contains(&sec) {
            return Err(InpError::MissingSection(name));
        }
    }
    let units = units_for(&units_name).ok_or_else(|| InpError::UnsupportedUnits(units_name.clone()))?;

    let period = patterns.values().map(Vec::len).max().unwrap_or(1).max(1);
    let lookup_pattern = |name: &Option<String>, line: usize| -> Result<Option<&Vec<f64>>, InpError> {
        match name {
            Some(p) => patterns.get(p).map(Some).ok_or_else(|| InpError::UnknownPattern {
                line,
                pattern: p.clone(),
            }),
            None => Ok(patterns.get(&default_pattern)),
        }
    };
    let multiplier = |p: Option<&Vec<f64>>, step: usize| p.map_or(1.0, |v| v[step % v.len()]);

    // Nodal demand components: (base demand in SI, pattern).
    let node_pos: HashMap<&str, usize> = junctions.iter().enumerate().map(|(i, j)| (j.id.as_str(), i)).collect();
    let mut components: Vec<Vec<(f64, Option<&Vec<f64>>)>> = Vec::with_capacity(junctions.len());
    for j in &junctions {
        components.push(vec![(
            convert(j.demand, units.flow),
            lookup_pattern(&j.pattern, j.line)?,
        )]);
    }
    let mut replaced = vec![false; junctions.len()];
    for d in &demands {
        let i = *node_pos.get(d.node.as_str()).ok_or_else(|| InpError::UnknownNode {
            line: d.line,
            node: d.node.clone(),
        })?;
        if !replaced[i] {
            components[i].clear();
            replaced[i] = true;
        }
        components[i].push((convert(d.demand, units.flow), lookup_pattern(&d.pattern, d.line)?));
    }
    let demand_at = |i: usize, step: usize| -> f64 {
        components[i]
            .iter()
            .map(|&(base, p)| base * multiplier(p, step) * demand_multiplier)
            .sum()
    };

    let steps = match &opts.timesteps {
        Some(list) => {
            if let Some(&bad) = list.iter().find(|&&s| s >= period) {
                return Err(InpError::Timestep { index: bad, period });
            }
            list.clone()
        }
        None => {
            let mut totals: Vec<(usize, f64)> = (0..period)
                .map(|s| (s, (0..junctions.len()).map(|i| demand_at(i, s)).sum()))
                .collect();
            totals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut chosen: Vec<usize> = totals.iter().take(opts.peak_steps.max(1)).map(|p| p.0).collect();
            chosen.sort_unstable();
            chosen
        }
    };

    let nodes: Vec<DemandNode> = junctions
        .iter()
        .map(|j| DemandNode {
            id: j.id.clone(),
            elevation: convert(j.elevation, units.length),
            coordinates: coordinates.get(&j.id).copied(),
        })
        .collect();
    let sources: Vec<SourceNode> = reservoirs
        .iter()
        .map(|r| SourceNode {
            id: r.id.clone(),
            coordinates: coordinates.get(&r.id).copied(),
        })
        .collect();
    let mut reservoir_patterns = Vec::with_capacity(reservoirs.len());
    for r in &reservoirs {
        // Reservoirs follow only an explicit head pattern.
        let p = match &r.pattern {
            Some(_) => lookup_pattern(&r.pattern, r.line)?,
            None => None,
        };
        reservoir_patterns.push(p);
    }

    let mut index: HashMap<&str, NodeRef> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        index.insert(&n.id, NodeRef::Demand(i));
    }
    for (s, src) in sources.iter().enumerate() {
        index.insert(&src.id, NodeRef::Source(s));
    }
    let mut out_links = Vec::with_capacity(links.len());
    for l in &links {
        let resolve = |id: &str| {
            index.get(id).copied().ok_or_else(|| InpError::UnknownNode {
                line: l.line,
                node: id.to_string(),
            })
        };
        let from = resolve(&l.from)?;
        let to = resolve(&l.to)?;
        let diameter = convert(l.diameter, units.diameter);
        let mut link = match l.kind {
            LinkKind::Pipe => Link::pipe(&l.id, from, to, convert(l.length, units.length), diameter, l.roughness),
            LinkKind::Valve => Link::valve(&l.id, from, to, diameter, l.loss),
        };
        link.is_existing_prv = l.prv;
        out_links.push(link);
    }
    let link_pos: HashMap<String, usize> = out_links.iter().enumerate().map(|(j, l)| (l.id.clone(), j)).collect();
    for (object, key, line) in &tags {
        if object != "LINK" {
            continue;
        }
        let (id, tag) = key.split_once('\u{0}').expect("tag key has separator");
        let Some(&j) = link_pos.get(id) else {
            warn(format!("line {line}: tag for unknown link {id} ignored"));
            continue;
        };
        match tag.to_ascii_uppercase().as_str() {
            "PRV" => out_links[j].is_existing_prv = true,
            "DBV" => out_links[j].is_existing_dbv = true,
            _ => {}
        }
    }

    let demand_snapshots = steps
        .iter()
        .map(|&s| (0..nodes.len()).map(|i| demand_at(i, s)).collect())
        .collect();
    let head_snapshots = steps
        .iter()
        .map(|&s| {
            reservoirs
                .iter()
                .zip(&reservoir_patterns)
                .map(|(r, p)| convert(r.head, units.length) * multiplier(*p, s))
                .collect()
        })
        .collect();

    let network = NetworkModel::new(out_links, nodes, sources, demand_snapshots, head_snapshots)?;
    Ok(ParsedInp {
        network,
        warnings,
        timesteps: steps,
        pattern_period: period,
    })
}

/// Shortest decimal text for `value * scale` that parses back to `value`
/// after division by `scale`.
fn scaled_decimal(value: f64, scale: f64) -> String {
    let mut candidate = value * scale;
    let back = |c: f64| {
        let parsed: f64 = format!("{c}").parse().unwrap();
        if scale == 1000.0 {
            parsed / 1000.0
        } else {
            parsed / scale
        }
    };
    if back(candidate) == value {
        return format!("{candidate}");
    }
    for _ in 0..8 {
        let up = candidate.next_up();
        if back(up) == value {
            return format!("{up}");
        }
        let down = candidate.next_down();
        if back(down) == value {
            return format!("{down}");
        }
        candidate = if back(candidate) < value { up } else { down };
    }
    format!("{}", value * scale)
}

/// Write a network as INP text in `CMS` units.
///
/// Every timestep becomes one pattern step, so parsing the output with
/// `timesteps = 0..n_t` reproduces the model exactly.
pub fn write_inp(net: &NetworkModel) -> String {
    let n_t = net.n_timesteps();
    let mut out = String::new();
    let varies = |series: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = series.collect();
        v.iter().any(|&x| x != v[0])
    };
    let mut patterns: Vec<(String, Vec<f64>)> = Vec::new();

    out.push_str("[JUNCTIONS]\n;ID\tElev\tDemand\tPattern\n");
    for (i, node) in net.nodes.iter().enumerate() {
        let series: Vec<f64> = net.demands.iter().map(|d| d[i]).collect();
        if varies(&mut series.iter().copied()) {
            let name = format!("D_{}", node.id);
            let _ = writeln!(out, "{}\t{}\t1\t{}", node.id, node.elevation, name);
            patterns.push((name, series));
        } else {
            let _ = writeln!(out, "{}\t{}\t{}", node.id, node.elevation, series[0]);
        }
    }
    out.push_str("\n[RESERVOIRS]\n;ID\tHead\tPattern\n");
    for (s, src) in net.sources.iter().enumerate() {
        let series: Vec<f64> = net.source_heads.iter().map(|h| h[s]).collect();
        if varies(&mut series.iter().copied()) {
            let name = format!("H_{}", src.id);
            let _ = writeln!(out, "{}\t1\t{}", src.id, name);
            patterns.push((name, series));
        } else {
            let _ = writeln!(out, "{}\t{}", src.id, series[0]);
        }
    }
    out.push_str("\n[PIPES]\n;ID\tNode1\tNode2\tLength\tDiameter\tRoughness\tMinorLoss\tStatus\n");
    for l in net.links.iter().filter(|l| l.kind == LinkKind::Pipe) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t0\tOpen",
            l.id,
            net.node_id(l.from),
            net.node_id(l.to),
            l.length,
            scaled_decimal(l.diameter, 1000.0),
            l.roughness
        );
    }
    out.push_str("\n[VALVES]\n;ID\tNode1\tNode2\tDiameter\tType\tSetting\tMinorLoss\n");
    for l in net.links.iter().filter(|l| l.kind == LinkKind::Valve) {
        let d = scaled_decimal(l.diameter, 1000.0);
        let (from, to) = (net.node_id(l.from), net.node_id(l.to));
        if l.is_existing_prv {
            let _ = writeln!(out, "{}\t{from}\t{to}\t{d}\tPRV\t0\t{}", l.id, l.loss_coefficient);
        } else {
            let _ = writeln!(out, "{}\t{from}\t{to}\t{d}\tTCV\t{}\t0", l.id, l.loss_coefficient);
        }
    }
    out.push_str("\n[TAGS]\n");
    for l in &net.links {
        if l.is_existing_prv && l.kind == LinkKind::Pipe {
            let _ = writeln!(out, "LINK\t{}\tPRV", l.id);
        }
        if l.is_existing_dbv {
            let _ = writeln!(out, "LINK\t{}\tDBV", l.id);
        }
    }
    if n_t > 1 {
        patterns.push(("STEPS".to_string(), vec![1.0; n_t]));
    }
    out.push_str("\n[PATTERNS]\n");
    for (name, values) in &patterns {
        for chunk in values.chunks(6) {
            let vals: Vec<String> = chunk.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{name}\t{}", vals.join("\t"));
        }
    }
    out.push_str("\n[COORDINATES]\n");
    for (id, c) in net
        .nodes
        .iter()
        .map(|n| (&n.id, n.coordinates))
        .chain(net.sources.iter().map(|s| (&s.id, s.coordinates)))
    {
        if let Some((x, y)) = c {
            let _ = writeln!(out, "{id}\t{x}\t{y}");
        }
    }
    out.push_str("\n[OPTIONS]\nUnits\tCMS\nHeadloss\tH-W\n\n[END]\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_NODE: &str = "\
[TITLE]
minimal
[JUNCTIONS]
;ID Elev Demand
J1  0    5
[RESERVOIRS]
R1  50
[PIPES]
P1  R1  J1  1000  300  130  0  Open
[OPTIONS]
Units LPS
Headloss H-W
[END]
";

    #[test]
    fn two_node_file() {
        let p = parse_inp(TWO_NODE, &InpOptions::default()).unwrap();
        let net = &p.network;
        assert_eq!((net.n_links(), net.n_nodes(), net.n_sources()), (1, 1, 1));
        assert_eq!(net.n_timesteps(), 1);
        assert!((net.demands[0][0] - 0.005).abs() < 1e-15);
        assert_eq!(net.source_heads[0][0], 50.0);
        assert!((net.links[0].diameter - 0.3).abs() < 1e-15);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn pumps_section_warns_and_rejects_entries() {
        let with_empty = TWO_NODE.replace("[OPTIONS]", "[PUMPS]\n[OPTIONS]");
        let p = parse_inp(&with_empty, &InpOptions::default()).unwrap();
        assert!(p.warnings.iter().any(|w| w.contains("unsupported section")));

        let with_pump = TWO_NODE.replace("[OPTIONS]", "[PUMPS]\nPU1 R1 J1 HEAD C1\n[OPTIONS]");
        let err = parse_inp(&with_pump, &InpOptions::default()).unwrap_err();
        assert!(matches!(err, InpError::UnsupportedLink { line: 11, .. }), "{err:?}");
    }

    #[test]
    fn unknown_sections_are_ignored_with_warning() {
        let text = TWO_NODE.replace("[OPTIONS]", "[QUALITY]\nJ1 0.5\n[OPTIONS]");
        let p = parse_inp(&text, &InpOptions::default()).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn rejects_darcy_weisbach() {
        let text = TWO_NODE.replace("H-W", "D-W");
        assert!(matches!(
            parse_inp(&text, &InpOptions::default()),
            Err(InpError::UnsupportedHeadloss(_))
        ));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = TWO_NODE.replace("J1  0    5", "J1  zero 5");
        assert_eq!(
            parse_inp(&text, &InpOptions::default()).unwrap_err(),
            InpError::Syntax {
                line: 5,
                message: "invalid elevation 'zero'".into()
            }
        );
    }

    #[test]
    fn rejects_disconnected_graph() {
        let text = TWO_NODE.replace("J1  0    5", "J1  0    5\nJ2  0 1");
        assert!(matches!(
            parse_inp(&text, &InpOptions::default()),
            Err(InpError::Network(NetworkError::Disconnected(_)))
        ));
    }

    #[test]
    fn gpm_units_are_converted() {
        let text = TWO_NODE.replace("LPS", "GPM").replace("1000  300", "1000  12");
        let net = parse_inp(&text, &InpOptions::default()).unwrap().network;
        assert!((net.links[0].length - 304.8).abs() < 1e-9);
        assert!((net.links[0].diameter - 0.3048).abs() < 1e-12);
        assert!((net.demands[0][0] - 5.0 * 6.30901964e-5).abs() < 1e-15);
    }

    #[test]
    fn peak_steps_follow_patterns() {
        let text = "\
[JUNCTIONS]
J1 0 10 P
J2 0 10
[RESERVOIRS]
R1 60
[PIPES]
P1 R1 J1 100 200 120
P2 J1 J2 100 200 120
[DEMANDS]
J2 4 P
J2 1
[PATTERNS]
P 0.5 1.5 0.8 2.0 1.0 0.2
[OPTIONS]
Units LPS
";
        let p = parse_inp(
            text,
            &InpOptions {
                timesteps: None,
                peak_steps: 2,
            },
        )
        .unwrap();
        assert_eq!(p.timesteps, vec![1, 3]);
        let d = &p.network.demands;
        assert!((d[0][0] - 0.015).abs() < 1e-15);
        // J2: [DEMANDS] replaces the junction demand; second entry has no pattern.
        assert!((d[1][1] - (0.004 * 2.0 + 0.001)).abs() < 1e-15);

        let explicit = parse_inp(
            text,
            &InpOptions {
                timesteps: Some(vec![5]),
                peak_steps: 4,
            },
        )
        .unwrap();
        assert!((explicit.network.demands[0][0] - 0.002).abs() < 1e-15);
        assert!(matches!(
            parse_inp(
                text,
                &InpOptions {
                    timesteps: Some(vec![6]),
                    peak_steps: 4
                }
            ),
            Err(InpError::Timestep { index: 6, period: 6 })
        ));
    }

    #[test]
    fn valves_and_tags() {
        let text = "\
[JUNCTIONS]
J1 0 1
J2 0 1
[RESERVOIRS]
R1 60
[PIPES]
P1 R1 J1 100 200 120
[VALVES]
V1 J1 J2 150 PRV 30 0.2
V2 J2 J1 150 TCV 3
[TAGS]
LINK P1 DBV
[OPTIONS]
Units LPS
";
        let net = parse_inp(text, &InpOptions::default()).unwrap().network;
        let v1 = &net.links[1];
        assert!(v1.is_existing_prv && v1.kind == LinkKind::Valve);
        assert_eq!(v1.loss_coefficient, 0.2);
        assert_eq!(net.links[2].loss_coefficient, 3.0);
        assert!(net.links[0].is_existing_dbv);
    }

    #[test]
    fn writer_round_trips() {
        let net = crate::fixtures::grid(3, 3);
        let text = write_inp(&net);
        let opts = InpOptions {
            timesteps: Some((0..net.n_timesteps()).collect()),
            peak_steps: 4,
        };
        let back = parse_inp(&text, &opts).unwrap().network;
        assert_eq!(net, back);
    }
}
