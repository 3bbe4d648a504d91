//! Case file input and machine-readable result output.
//!
//! Two input formats are supported:
//!
//! * a MATPOWER-style text subset (numeric matrices under `mpc.bus`, `mpc.gen`
//!   and `mpc.branch` headers, `%` comments, MW/MVAr quantities on `baseMVA`),
//!   used to ingest the standard IEEE cases;
//! * a canonical JSON schema (the round-trip source of truth), documented in
//!   the README: `{name, base_mva, buses:[{id,kind,pd,qd,pg,qg,vset,vmin,
//!   vmax,gs,bs}], branches:[{from,to,r,x,b,tap,rating}]}` plus optional
//!   `base_kv`, `source` and `v_band` metadata.
//!
//! All CSV output is UTF-8, comma-separated, '.' decimal, fixed 6-decimal
//! formatting, deterministic column order.

use serde::{Deserialize, Serialize};

use crate::error::CaseError;
use crate::grid::{Branch, Bus, BusKind, Network};

// ---------------------------------------------------------------------------
// MATPOWER-style text subset
// ---------------------------------------------------------------------------

/// Parses the documented MATPOWER-style subset into a `Network<f64>`.
///
/// Bus kinds come from the bus-type column (3 = slack, 2 = PV, 1 = PQ);
/// MW/MVAr columns are divided by the base MVA. Out-of-service rows
/// (status 0) are dropped. Unknown `mpc.<section>` matrices and non-numeric
/// tokens are parse errors carrying the line number.
pub fn parse_case_text(text: &str) -> Result<Network<f64>, CaseError> {
    let mut name = String::from("case");
    let mut base_mva: Option<f64> = None;
    let mut bus_rows: Option<Vec<Vec<f64>>> = None;
    let mut gen_rows: Option<Vec<Vec<f64>>> = None;
    let mut branch_rows: Option<Vec<Vec<f64>>> = None;

    let mut section: Option<(String, Vec<Vec<f64>>, usize)> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = match raw.find('%') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }

        if let Some((_, rows, _)) = section.as_mut() {
            // inside a matrix: rows until `];`
            let mut body = trimmed;
            let mut closing = false;
            if let Some(pos) = body.find(']') {
                closing = true;
                body = body[..pos].trim();
            }
            if !body.is_empty() {
                let row = parse_row(body, line)?;
                rows.push(row);
            }
            if closing {
                let (sect_name, rows, start_line) = section.take().expect("section is open");
                store_section(
                    &sect_name,
                    rows,
                    start_line,
                    &mut bus_rows,
                    &mut gen_rows,
                    &mut branch_rows,
                )?;
            }
            continue;
        }

        if let Some(rest) = trimmed.strip_prefix("function") {
            if let Some(pos) = rest.find('=') {
                name = rest[pos + 1..].trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }

        if let Some((key, value)) = split_assignment(trimmed) {
            let key = key.strip_prefix("mpc.").unwrap_or(key);
            if value.starts_with('[') {
                // matrix opener; content may begin on the same line
                let mut rows = Vec::new();
                let mut body = value[1..].trim();
                let mut closed = false;
                if let Some(pos) = body.find(']') {
                    closed = true;
                    body = body[..pos].trim();
                }
                if !body.is_empty() {
                    rows.push(parse_row(body, line)?);
                }
                if closed {
                    store_section(
                        key,
                        rows,
                        line,
                        &mut bus_rows,
                        &mut gen_rows,
                        &mut branch_rows,
                    )?;
                } else {
                    match key {
                        "bus" | "gen" | "branch" => section = Some((key.to_string(), rows, line)),
                        other => {
                            return Err(CaseError::Parse {
                                line,
                                msg: format!("unknown section '{other}'"),
                            })
                        }
                    }
                }
            } else {
                match key {
                    "baseMVA" => {
                        let v = value.trim_end_matches(';').trim();
                        base_mva = Some(v.parse::<f64>().map_err(|_| CaseError::Parse {
                            line,
                            msg: format!("non-numeric baseMVA '{v}'"),
                        })?);
                    }
                    "version" | "name" => {} // tolerated scalar metadata
                    other => {
                        return Err(CaseError::Parse {
                            line,
                            msg: format!("unknown assignment '{other}'"),
                        })
                    }
                }
            }
            continue;
        }

        return Err(CaseError::Parse {
            line,
            msg: format!("unrecognized statement '{trimmed}'"),
        });
    }

    if let Some((sect, _, start)) = section {
        return Err(CaseError::Parse {
            line: start,
            msg: format!("section '{sect}' is not closed"),
        });
    }

    let base_mva = base_mva.ok_or(CaseError::MissingBaseMva)?;
    let bus_rows = bus_rows.ok_or(CaseError::MissingSection("bus"))?;
    let branch_rows = branch_rows.ok_or(CaseError::MissingSection("branch"))?;
    let gen_rows = gen_rows.unwrap_or_default();

    assemble_network(name, base_mva, &bus_rows, &gen_rows, &branch_rows)
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let pos = line.find('=')?;
    let key = line[..pos].trim();
    let value = line[pos + 1..].trim();
    if key.is_empty() || key.contains(char::is_whitespace) {
        return None;
    }
    Some((key, value))
}

fn parse_row(body: &str, line: usize) -> Result<Vec<f64>, CaseError> {
    let body = body.trim_end_matches(';').trim();
    body.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| CaseError::Parse {
                line,
                msg: format!("non-numeric token '{tok}'"),
            })
        })
        .collect()
}

fn store_section(
    name: &str,
    rows: Vec<Vec<f64>>,
    line: usize,
    bus: &mut Option<Vec<Vec<f64>>>,
    gen: &mut Option<Vec<Vec<f64>>>,
    branch: &mut Option<Vec<Vec<f64>>>,
) -> Result<(), CaseError> {
    let slot = match name {
        "bus" => bus,
        "gen" => gen,
        "branch" => branch,
        other => {
            return Err(CaseError::Parse {
                line,
                msg: format!("unknown section '{other}'"),
            })
        }
    };
    if slot.is_some() {
        return Err(CaseError::Parse {
            line,
            msg: format!("duplicate section '{name}'"),
        });
    }
    *slot = Some(rows);
    Ok(())
}

fn assemble_network(
    name: String,
    base_mva: f64,
    bus_rows: &[Vec<f64>],
    gen_rows: &[Vec<f64>],
    branch_rows: &[Vec<f64>],
) -> Result<Network<f64>, CaseError> {
    if base_mva <= 0.0 {
        return Err(CaseError::Schema {
            path: "baseMVA".into(),
            msg: format!("must be positive, got {base_mva}"),
        });
    }
    let mut network = Network::new(name, base_mva);

    for (i, row) in bus_rows.iter().enumerate() {
        if row.len() < 13 {
            return Err(CaseError::Schema {
                path: format!("bus[{i}]"),
                msg: format!("expected at least 13 columns, got {}", row.len()),
            });
        }
        let kind = match row[1] as i64 {
            3 => BusKind::Slack,
            2 => BusKind::Pv,
            1 => BusKind::Pq,
            other => {
                return Err(CaseError::Schema {
                    path: format!("bus[{i}].type"),
                    msg: format!("bus type {other} is not one of 1, 2, 3"),
                })
            }
        };
        network.buses.push(Bus {
            id: row[0] as usize,
            kind,
            p_demand: row[2] / base_mva,
            q_demand: row[3] / base_mva,
            p_gen: 0.0,
            q_gen: 0.0,
            v_setpoint: 1.0,
            v_min: row[12],
            v_max: row[11],
            shunt_g: row[4] / base_mva,
            shunt_b: row[5] / base_mva,
        });
    }

    for (i, row) in gen_rows.iter().enumerate() {
        if row.len() < 8 {
            return Err(CaseError::Schema {
                path: format!("gen[{i}]"),
                msg: format!("expected at least 8 columns, got {}", row.len()),
            });
        }
        if row[7] == 0.0 {
            continue; // out of service
        }
        let bus_id = row[0] as usize;
        let idx = network
            .index_of(bus_id)
            .ok_or_else(|| CaseError::Schema {
                path: format!("gen[{i}].bus"),
                msg: format!("references unknown bus {bus_id}"),
            })?;
        network.buses[idx].p_gen += row[1] / base_mva;
        network.buses[idx].q_gen += row[2] / base_mva;
        network.buses[idx].v_setpoint = row[5];
    }

    for (i, row) in branch_rows.iter().enumerate() {
        if row.len() < 11 {
            return Err(CaseError::Schema {
                path: format!("branch[{i}]"),
                msg: format!("expected at least 11 columns, got {}", row.len()),
            });
        }
        if row[10] == 0.0 {
            continue; // out of service
        }
        if row[9] != 0.0 {
            return Err(CaseError::Schema {
                path: format!("branch[{i}].angle"),
                msg: "phase-shifting transformers are not supported".into(),
            });
        }
        let tap = if row[8] == 0.0 { 1.0 } else { row[8] };
        let rating = if row[5] > 0.0 {
            Some(row[5] / base_mva)
        } else {
            None
        };
        network.branches.push(Branch {
            from: row[0] as usize,
            to: row[1] as usize,
            r: row[2],
            x: row[3],
            b_charging: row[4],
            tap_ratio: tap,
            rating,
        });
    }

    Ok(network)
}

// ---------------------------------------------------------------------------
// Canonical JSON schema
// ---------------------------------------------------------------------------

/// Canonical structured representation of a network plus metadata; this is the
/// JSON wire format and round-trips losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDocument {
    pub name: String,
    pub base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_kv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Optional uniform operating voltage band override (lo, hi), per-unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_band: Option<(f64, f64)>,
    pub buses: Vec<BusDoc>,
    pub branches: Vec<BranchDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusDoc {
    pub id: usize,
    pub kind: BusKind,
    pub pd: f64,
    pub qd: f64,
    pub pg: f64,
    pub qg: f64,
    pub vset: f64,
    pub vmin: f64,
    pub vmax: f64,
    pub gs: f64,
    pub bs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDoc {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    pub tap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
}

impl CaseDocument {
    pub fn from_network(network: &Network<f64>) -> Self {
        CaseDocument {
            name: network.name.clone(),
            base_mva: network.base_mva,
            base_kv: (network.base_kv != 0.0).then_some(network.base_kv),
            source: None,
            v_band: network.v_band,
            buses: network
                .buses
                .iter()
                .map(|b| BusDoc {
                    id: b.id,
                    kind: b.kind,
                    pd: b.p_demand,
                    qd: b.q_demand,
                    pg: b.p_gen,
                    qg: b.q_gen,
                    vset: b.v_setpoint,
                    vmin: b.v_min,
                    vmax: b.v_max,
                    gs: b.shunt_g,
                    bs: b.shunt_b,
                })
                .collect(),
            branches: network
                .branches
                .iter()
                .map(|br| BranchDoc {
                    from: br.from,
                    to: br.to,
                    r: br.r,
                    x: br.x,
                    b: br.b_charging,
                    tap: br.tap_ratio,
                    rating: br.rating,
                })
                .collect(),
        }
    }

    pub fn into_network(self) -> Result<Network<f64>, CaseError> {
        if self.base_mva <= 0.0 {
            return Err(CaseError::Schema {
                path: "base_mva".into(),
                msg: format!("must be positive, got {}", self.base_mva),
            });
        }
        if let Some((lo, hi)) = self.v_band {
            if !(lo < hi) {
                return Err(CaseError::Schema {
                    path: "v_band".into(),
                    msg: format!("band ({lo}, {hi}) is not increasing"),
                });
            }
        }
        let mut network = Network::new(self.name, self.base_mva);
        network.base_kv = self.base_kv.unwrap_or(0.0);
        network.v_band = self.v_band;
        for (i, b) in self.buses.iter().enumerate() {
            if !(b.vmin < b.vmax) {
                return Err(CaseError::Schema {
                    path: format!("buses[{i}]"),
                    msg: format!("vmin {} must be below vmax {}", b.vmin, b.vmax),
                });
            }
            network.buses.push(Bus {
                id: b.id,
                kind: b.kind,
                p_demand: b.pd,
                q_demand: b.qd,
                p_gen: b.pg,
                q_gen: b.qg,
                v_setpoint: b.vset,
                v_min: b.vmin,
                v_max: b.vmax,
                shunt_g: b.gs,
                shunt_b: b.bs,
            });
        }
        for br in &self.branches {
            network.branches.push(Branch {
                from: br.from,
                to: br.to,
                r: br.r,
                x: br.x,
                b_charging: br.b,
                tap_ratio: br.tap,
                rating: br.rating,
            });
        }
        Ok(network)
    }
}

/// Reads a network from canonical JSON text.
pub fn read_case_json(text: &str) -> Result<Network<f64>, CaseError> {
    let doc: CaseDocument = serde_json::from_str(text)?;
    doc.into_network()
}

/// Writes a network as canonical JSON text (pretty-printed, trailing newline).
pub fn write_case_json(network: &Network<f64>) -> String {
    let doc = CaseDocument::from_network(network);
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

/// Loads a case from a file path by extension: `.json` is the canonical
/// schema, anything else the MATPOWER-style subset.
pub fn read_case_file(path: &std::path::Path) -> Result<Network<f64>, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|e| CaseError::Parse {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        read_case_json(&text)
    } else {
        parse_case_text(&text)
    }
}

// ---------------------------------------------------------------------------
// CSV result tables
// ---------------------------------------------------------------------------

/// Formats one CSV cell: fixed 6-decimal for numbers, verbatim for labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    Empty,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Text(s) => write!(f, "{s}"),
            Cell::Num(x) => write!(f, "{x:.6}"),
            Cell::Int(x) => write!(f, "{x}"),
            Cell::Empty => Ok(()),
        }
    }
}

/// Renders a header plus rows as CSV text (UTF-8, comma separator, '\n' line
/// ends). An empty row set yields a header-only file.
pub fn write_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
