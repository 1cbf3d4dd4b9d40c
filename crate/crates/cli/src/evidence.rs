//! Evidence and belief files for filtering a model read from disk.
//!
//! Evidence is CSV with a header of observed variable names and one row per
//! time slice. Discrete values are label names or value indices; an empty
//! field or `?` leaves the variable unobserved in that slice (blank lines
//! are skipped, so single-column files need `?`).

use std::io::{Read, Write};

use hdmn::filter::BeliefState;
use hdmn::propagate::Marginal;
use hdmn::{DynamicMixedNetwork, Evidence64, Value};

use crate::{CliError, Result};

pub fn read_evidence<R: Read>(dmn: &DynamicMixedNetwork<f64>, input: R) -> Result<Vec<Evidence64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| CliError::Format(e.to_string()))?.clone();
    let mut vars = Vec::new();
    for name in header.iter() {
        let v = dmn
            .find(name)
            .ok_or_else(|| CliError::Format(format!("evidence column `{name}` is not a state variable")))?;
        vars.push(v);
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
        let line = row + 2;
        let mut ev = Evidence64::new();
        for (field, &v) in rec.iter().zip(&vars) {
            if field.is_empty() || field == "?" {
                continue;
            }
            let var = &dmn.state()[v.0];
            let value = if var.is_discrete() {
                let k = var
                    .label_index(field)
                    .or_else(|| field.parse().ok().filter(|&k| k < var.card().unwrap_or(0)))
                    .ok_or_else(|| CliError::Format(format!("line {line}: `{field}` is not a value of {}", var.name)))?;
                Value::Discrete(k)
            } else {
                Value::Continuous(
                    field
                        .parse()
                        .map_err(|_| CliError::Format(format!("line {line}: `{field}` is not a number")))?,
                )
            };
            ev.insert(v, value);
        }
        out.push(ev);
    }
    Ok(out)
}

/// Long format: one row per slice and variable; discrete marginals list
/// their probabilities separated by spaces.
pub fn write_beliefs_csv<W: Write>(dmn: &DynamicMixedNetwork<f64>, beliefs: &[BeliefState<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Format(e.to_string());
    w.write_record(["t", "variable", "probs", "mean", "variance"]).map_err(io)?;
    for b in beliefs {
        for (v, m) in &b.marginals {
            let name = &dmn.state()[v.0].name;
            let rec = match m {
                Marginal::Discrete(p) => {
                    let ps: Vec<String> = p.iter().map(f64::to_string).collect();
                    [b.t.to_string(), name.clone(), ps.join(" "), String::new(), String::new()]
                }
                Marginal::Gaussian { mean, variance } => {
                    [b.t.to_string(), name.clone(), String::new(), mean.to_string(), variance.to_string()]
                }
            };
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Format(e.to_string()))?;
    Ok(())
}

#[derive(serde::Serialize)]
struct JsonBelief<'a> {
    t: usize,
    marginals: std::collections::BTreeMap<&'a str, &'a Marginal<f64>>,
    log_likelihood: Option<f64>,
}

pub fn beliefs_json(dmn: &DynamicMixedNetwork<f64>, beliefs: &[BeliefState<f64>]) -> String {
    let rows: Vec<JsonBelief> = beliefs
        .iter()
        .map(|b| JsonBelief {
            t: b.t,
            marginals: b.marginals.iter().map(|(v, m)| (dmn.state()[v.0].name.as_str(), m)).collect(),
            log_likelihood: b.log_likelihood,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("beliefs serialize");
    s.push('\n');
    s
}
