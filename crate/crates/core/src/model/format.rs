//! Text format for dynamic mixed networks.
//!
//! ```text
//! hdmn/1
//! # comments run to end of line
//! VARIABLES
//! discrete <name> <label> <label> ...
//! continuous <name>
//! CPDS
//! table <prior|transition> <child> [| <parent> ...]
//!   <probabilities, parent rows row-major, child fastest>
//! gaussian <prior|transition> <child> [| <parent> ...]
//!   <intercept> <coef per continuous parent> <variance>   (one row per discrete parent tuple)
//! CONSTRAINTS
//! relation <prior|transition> <var> <var> ...
//!   <allowed tuple as value indices>   (one per line)
//! equal <prior|transition> <a> <b>
//! notequal <prior|transition> <a> <b>
//! DYNAMICS
//! observed <name> ...
//! ```
//!
//! In transition blocks `x'` names the previous-slice copy of `x` and a bare
//! `x` the current one. Gaussian parents may be listed in any order; they
//! are split by kind, keeping relative order. Sections may appear in any
//! order but VARIABLES must come first; unknown sections are rejected.

use std::fmt::Write as _;
use std::path::Path;

use super::{
    ConstraintRelation, Cpd, DiscreteCpd, DynamicBuilder, DynamicMixedNetwork, LgParams,
    LinearGaussianCpd, VarId, VarKind, VarTable,
};
use crate::error::{HdmnError, Result};
use crate::scalar::Real;

pub const HEADER: &str = "hdmn/1";

const SECTIONS: [&str; 4] = ["VARIABLES", "CPDS", "CONSTRAINTS", "DYNAMICS"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    Prior,
    Transition,
}

enum BlockKind {
    Table,
    Gaussian,
    Relation,
}

struct Block {
    line: usize,
    kind: BlockKind,
    part: Part,
    child: String,
    names: Vec<String>,
    data: Vec<(usize, String)>,
}

fn err(line: usize, msg: impl Into<String>) -> HdmnError {
    HdmnError::Parse {
        line,
        msg: msg.into(),
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\'', '|', '#']) && !s.chars().any(char::is_whitespace)
}

struct Parser<S: Real> {
    builder: DynamicBuilder<S>,
    names: Vec<String>,
}

impl<S: Real> Parser<S> {
    fn lookup(&self, line: usize, part: Part, token: &str) -> Result<VarId> {
        let (base, prev) = match token.strip_suffix('\'') {
            Some(b) => (b, true),
            None => (token, false),
        };
        let v = self
            .names
            .iter()
            .position(|n| n == base)
            .map(VarId)
            .ok_or_else(|| err(line, format!("unknown variable `{base}`")))?;
        match (part, prev) {
            (Part::Prior, true) => Err(err(line, format!("`{token}` is not allowed in a prior block"))),
            (Part::Prior, false) => Ok(v),
            (Part::Transition, true) => Ok(self.builder.prev(v)),
            (Part::Transition, false) => Ok(self.builder.cur(v)),
        }
    }

    fn state(&self, id: VarId) -> VarId {
        // strip the current-slice tag used by the builder
        VarId(id.0 & ((1 << 48) - 1))
    }

    fn is_discrete(&self, id: VarId) -> bool {
        self.builder.card(self.state(id)) > 0
    }

    fn card(&self, id: VarId) -> usize {
        self.builder.card(self.state(id))
    }

    fn numbers(data: &[(usize, String)]) -> Result<Vec<S>> {
        data.iter()
            .map(|(l, t)| {
                t.parse::<f64>()
                    .map(S::lit)
                    .map_err(|_| err(*l, format!("expected a number, found `{t}`")))
            })
            .collect()
    }

    fn finish(&mut self, b: Block) -> Result<()> {
        let child = self.lookup(b.line, b.part, &b.child)?;
        let vars: Vec<VarId> = b
            .names
            .iter()
            .map(|n| self.lookup(b.line, b.part, n))
            .collect::<Result<_>>()?;
        match b.kind {
            BlockKind::Table => {
                if !self.is_discrete(child) {
                    return Err(err(b.line, format!("table block for continuous `{}`", b.child)));
                }
                let cpd = DiscreteCpd::new(child, vars, Self::numbers(&b.data)?);
                self.add_cpd(b.part, cpd.into());
            }
            BlockKind::Gaussian => {
                if self.is_discrete(child) {
                    return Err(err(b.line, format!("gaussian block for discrete `{}`", b.child)));
                }
                let (dp, cp): (Vec<VarId>, Vec<VarId>) =
                    vars.into_iter().partition(|&v| self.is_discrete(v));
                let width = cp.len() + 2;
                let nums = Self::numbers(&b.data)?;
                let rows: usize = dp.iter().map(|&v| self.card(v)).product();
                if nums.len() != rows * width {
                    return Err(err(
                        b.line,
                        format!("gaussian block needs {} numbers, found {}", rows * width, nums.len()),
                    ));
                }
                let params = nums
                    .chunks(width)
                    .map(|r| LgParams::new(r[0], r[1..width - 1].to_vec(), r[width - 1]))
                    .collect();
                let cpd = LinearGaussianCpd::new(child, dp, cp, params);
                self.add_cpd(b.part, cpd.into());
            }
            BlockKind::Relation => {
                let mut scope = vec![child];
                scope.extend(vars);
                if let Some(v) = scope.iter().find(|&&v| !self.is_discrete(v)) {
                    return Err(err(b.line, format!("constraint over continuous variable {v}")));
                }
                let cards: Vec<usize> = scope.iter().map(|&v| self.card(v)).collect();
                let vals: Vec<usize> = b
                    .data
                    .iter()
                    .map(|(l, t)| {
                        t.parse::<usize>()
                            .map_err(|_| err(*l, format!("expected a value index, found `{t}`")))
                    })
                    .collect::<Result<_>>()?;
                if !vals.len().is_multiple_of(scope.len()) {
                    return Err(err(b.line, "relation data is not a whole number of tuples"));
                }
                let tuples = vals.chunks(scope.len()).map(<[usize]>::to_vec).collect();
                let rel = ConstraintRelation::new(scope, cards, tuples)
                    .map_err(|e| err(b.line, e.to_string()))?;
                self.add_constraint(b.part, rel);
            }
        }
        Ok(())
    }

    fn add_cpd(&mut self, part: Part, cpd: Cpd<S>) {
        match part {
            Part::Prior => self.builder.prior_cpd(cpd),
            Part::Transition => self.builder.transition_cpd(cpd),
        };
    }

    fn add_constraint(&mut self, part: Part, rel: ConstraintRelation) {
        match part {
            Part::Prior => self.builder.prior_constraint(rel),
            Part::Transition => self.builder.transition_constraint(rel),
        };
    }

    fn macro_relation(&mut self, line: usize, part: Part, equal: bool, toks: &[&str]) -> Result<()> {
        if toks.len() != 2 {
            return Err(err(line, "equal/notequal take exactly two variables"));
        }
        let a = self.lookup(line, part, toks[0])?;
        let b = self.lookup(line, part, toks[1])?;
        if !self.is_discrete(a) || !self.is_discrete(b) {
            return Err(err(line, "equal/notequal need discrete variables"));
        }
        let (ka, kb) = (self.card(a), self.card(b));
        let rel = ConstraintRelation::from_predicate(vec![a, b], vec![ka, kb], |t| (t[0] == t[1]) == equal)
            .map_err(|e| err(line, e.to_string()))?;
        self.add_constraint(part, rel);
        Ok(())
    }
}

fn parse_part(line: usize, tok: Option<&&str>) -> Result<Part> {
    match tok.copied() {
        Some("prior") => Ok(Part::Prior),
        Some("transition") => Ok(Part::Transition),
        other => Err(err(line, format!("expected `prior` or `transition`, found {other:?}"))),
    }
}

/// Parse an `hdmn/1` model.
pub fn parse_model<S: Real>(text: &str) -> Result<DynamicMixedNetwork<S>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((l, other)) => return Err(err(l, format!("expected header `{HEADER}`, found `{other}`"))),
        None => return Err(err(0, "empty model file")),
    }
    let mut p = Parser {
        builder: DynamicBuilder::new(),
        names: Vec::new(),
    };
    let mut section = "";
    let mut seen: Vec<&str> = Vec::new();
    let mut open: Option<Block> = None;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let head = toks[0];
        if toks.len() == 1 && head.chars().all(|c| c.is_ascii_uppercase()) {
            if let Some(b) = open.take() {
                p.finish(b)?;
            }
            let Some(&s) = SECTIONS.iter().find(|&&s| s == head) else {
                return Err(err(ln, format!("unknown section `{head}`")));
            };
            if seen.contains(&s) {
                return Err(err(ln, format!("duplicate section `{s}`")));
            }
            if s != "VARIABLES" && !seen.contains(&"VARIABLES") {
                return Err(err(ln, "VARIABLES must be the first section"));
            }
            seen.push(s);
            section = s;
            continue;
        }
        let numeric = head.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
            || head.eq_ignore_ascii_case("inf");
        if numeric {
            match open.as_mut() {
                Some(b) => b.data.extend(toks.iter().map(|t| (ln, t.to_string()))),
                None => return Err(err(ln, "data line outside a block")),
            }
            continue;
        }
        if let Some(b) = open.take() {
            p.finish(b)?;
        }
        match (section, head) {
            ("VARIABLES", "discrete") => {
                if toks.len() < 3 {
                    return Err(err(ln, "discrete variable needs a name and at least one label"));
                }
                if !valid_name(toks[1]) {
                    return Err(err(ln, format!("invalid variable name `{}`", toks[1])));
                }
                p.names.push(toks[1].to_string());
                p.builder.discrete_labeled(toks[1], &toks[2..]);
            }
            ("VARIABLES", "continuous") => {
                if toks.len() != 2 || !valid_name(toks[1]) {
                    return Err(err(ln, "continuous variable needs exactly one valid name"));
                }
                p.names.push(toks[1].to_string());
                p.builder.continuous(toks[1]);
            }
            ("CPDS", "table" | "gaussian") | ("CONSTRAINTS", "relation") => {
                let part = parse_part(ln, toks.get(1))?;
                let rest = &toks[2..];
                let (child, names) = if head == "relation" {
                    match rest.split_first() {
                        Some((c, r)) => (c.to_string(), r.iter().map(|s| s.to_string()).collect()),
                        None => return Err(err(ln, "relation needs a scope")),
                    }
                } else {
                    let Some((c, r)) = rest.split_first() else {
                        return Err(err(ln, "CPD block needs a child"));
                    };
                    let parents: Vec<String> = match r.split_first() {
                        None => Vec::new(),
                        Some((&"|", ps)) => ps.iter().map(|s| s.to_string()).collect(),
                        Some(_) => return Err(err(ln, "expected `|` before parents")),
                    };
                    (c.to_string(), parents)
                };
                let kind = match head {
                    "table" => BlockKind::Table,
                    "gaussian" => BlockKind::Gaussian,
                    _ => BlockKind::Relation,
                };
                open = Some(Block {
                    line: ln,
                    kind,
                    part,
                    child,
                    names,
                    data: Vec::new(),
                });
            }
            ("CONSTRAINTS", "equal" | "notequal") => {
                let part = parse_part(ln, toks.get(1))?;
                p.macro_relation(ln, part, head == "equal", &toks[2..])?;
            }
            ("DYNAMICS", "observed") => {
                for t in &toks[1..] {
                    let v = p.lookup(ln, Part::Prior, t)?;
                    p.builder.observe(v);
                }
            }
            ("", _) => return Err(err(ln, "content before the first section")),
            (s, k) => return Err(err(ln, format!("unexpected `{k}` in section {s}"))),
        }
    }
    if let Some(b) = open.take() {
        p.finish(b)?;
    }
    p.builder.build()
}

pub fn read_model<S: Real>(path: impl AsRef<Path>) -> Result<DynamicMixedNetwork<S>> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| HdmnError::Model(format!("{}: {e}", path.as_ref().display())))?;
    parse_model(&text)
}

fn num<S: Real>(x: S) -> String {
    format!("{:?}", x.to_f64_lossy())
}

/// Serialize to `hdmn/1`; [`parse_model`] inverts this exactly.
pub fn write_model<S: Real>(dmn: &DynamicMixedNetwork<S>) -> String {
    let n = dmn.num_state();
    let state = dmn.state();
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "VARIABLES").unwrap();
    for v in state {
        match &v.kind {
            VarKind::Discrete { labels } => writeln!(out, "discrete {} {}", v.name, labels.join(" ")),
            VarKind::Continuous => writeln!(out, "continuous {}", v.name),
        }
        .unwrap();
    }
    let name_of = |part: Part, id: VarId| -> String {
        match part {
            Part::Prior => state[id.0].name.clone(),
            Part::Transition if id.0 < n => format!("{}'", state[id.0].name),
            Part::Transition => state[id.0 - n].name.clone(),
        }
    };
    let tag = |part| if part == Part::Prior { "prior" } else { "transition" };
    writeln!(out, "CPDS").unwrap();
    for (part, net) in [(Part::Prior, dmn.prior()), (Part::Transition, dmn.transition())] {
        for cpd in net.cpds() {
            let parents: Vec<String> = cpd.parents().iter().map(|&p| name_of(part, p)).collect();
            let bar = if parents.is_empty() {
                String::new()
            } else {
                format!(" | {}", parents.join(" "))
            };
            match cpd {
                Cpd::Discrete(c) => {
                    writeln!(out, "table {} {}{bar}", tag(part), name_of(part, c.child)).unwrap();
                    let k = net.card(c.child);
                    for row in c.table.chunks(k) {
                        let r: Vec<String> = row.iter().map(|&x| num(x)).collect();
                        writeln!(out, "  {}", r.join(" ")).unwrap();
                    }
                }
                Cpd::LinearGaussian(c) => {
                    writeln!(out, "gaussian {} {}{bar}", tag(part), name_of(part, c.child)).unwrap();
                    for p in &c.params {
                        let mut r = vec![num(p.intercept)];
                        r.extend(p.coefficients.iter().map(|&x| num(x)));
                        r.push(num(p.variance));
                        writeln!(out, "  {}", r.join(" ")).unwrap();
                    }
                }
            }
        }
    }
    writeln!(out, "CONSTRAINTS").unwrap();
    for (part, net) in [(Part::Prior, dmn.prior()), (Part::Transition, dmn.transition())] {
        for rel in net.constraints() {
            let scope: Vec<String> = rel.scope().iter().map(|&v| name_of(part, v)).collect();
            writeln!(out, "relation {} {}", tag(part), scope.join(" ")).unwrap();
            for t in rel.tuples() {
                let r: Vec<String> = t.iter().map(usize::to_string).collect();
                writeln!(out, "  {}", r.join(" ")).unwrap();
            }
        }
    }
    writeln!(out, "DYNAMICS").unwrap();
    if !dmn.observed().is_empty() {
        let obs: Vec<&str> = dmn.observed().iter().map(|v| state[v.0].name.as_str()).collect();
        writeln!(out, "observed {}", obs.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "hdmn/1
# two-state weather with a noisy sensor
VARIABLES
discrete rain no yes
continuous temp
continuous reading
CPDS
table prior rain
  0.7 0.3
gaussian prior temp | rain
  20 4
  12 9
gaussian prior reading | temp
  0 1 0.25
table transition rain | rain'
  0.8 0.2
  0.4 0.6
gaussian transition temp | temp' rain
  2 0.9 1
  1 0.9 2
gaussian transition reading | temp
  0 1 0.25
CONSTRAINTS
notequal transition rain' rain
DYNAMICS
observed reading
";

    #[test]
    fn parses_sample() {
        let m = parse_model::<f64>(SAMPLE).unwrap();
        assert_eq!(m.num_state(), 3);
        assert_eq!(m.observed(), &[VarId(2)]);
        assert_eq!(m.transition().constraints()[0].len(), 2);
        let Some(Cpd::LinearGaussian(t)) = m.transition().cpd(m.cur(VarId(1))) else {
            panic!("missing temp CPD")
        };
        assert_eq!(t.discrete_parents, vec![m.cur(VarId(0))]);
        assert_eq!(t.continuous_parents, vec![VarId(1)]);
    }

    #[test]
    fn roundtrip() {
        let m = parse_model::<f64>(SAMPLE).unwrap();
        let again = parse_model::<f64>(&write_model(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn rejects_unknown_section() {
        let bad = SAMPLE.replace("DYNAMICS", "EXTRAS");
        assert!(matches!(parse_model::<f64>(&bad), Err(HdmnError::Parse { .. })));
    }

    #[test]
    fn rejects_bad_header_and_prev_in_prior() {
        assert!(parse_model::<f64>("hdmn/2\nVARIABLES\n").is_err());
        let bad = SAMPLE.replace("gaussian prior reading | temp", "gaussian prior reading | temp'");
        assert!(matches!(parse_model::<f64>(&bad), Err(HdmnError::Parse { .. })));
    }

    #[test]
    fn wrong_table_size_is_rejected() {
        let bad = SAMPLE.replace("  0.7 0.3", "  0.7 0.2 0.1");
        assert!(parse_model::<f64>(&bad).is_err());
    }
}
