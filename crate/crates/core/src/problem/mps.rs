//! Reader for the MPS model format, fixed and free (whitespace) layouts.

use std::collections::HashMap;

use log::warn;

use super::model::{LpProblem, RowKind, Sense};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpsFormat {
    /// Whitespace-delimited fields; names cannot contain spaces.
    Free,
    /// Column-positioned fields (2-3, 5-12, 15-22, 25-36, 40-47, 50-61).
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Start,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Parses MPS text in free format. Most fixed-format files without blanks
/// in names parse identically.
pub fn parse_mps<T: Scalar>(text: &str) -> Result<LpProblem<T>> {
    parse_mps_with_format(text, MpsFormat::Free)
}

pub fn parse_mps_with_format<T: Scalar>(text: &str, format: MpsFormat) -> Result<LpProblem<T>> {
    Parser::new(format).run(text)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn fixed_fields(line: &str) -> Vec<String> {
    const SPANS: [(usize, usize); 6] = [(1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61)];
    let chars: Vec<char> = line.chars().collect();
    SPANS
        .iter()
        .map(|&(a, b)| {
            let end = b.min(chars.len());
            if a >= end {
                String::new()
            } else {
                chars[a..end].iter().collect::<String>().trim().to_string()
            }
        })
        .collect()
}

struct Parser<T> {
    format: MpsFormat,
    lp: LpProblem<T>,
    section: Section,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
    // free rows other than the objective are read and discarded
    ignored_rows: HashMap<String, ()>,
    objective_seen: bool,
    entries: HashMap<(usize, usize), T>,
    entry_order: Vec<(usize, usize)>,
    last_column: Option<String>,
}

impl<T: Scalar> Parser<T> {
    fn new(format: MpsFormat) -> Self {
        Self {
            format,
            lp: LpProblem::new("", Sense::Minimize),
            section: Section::Start,
            row_index: HashMap::new(),
            col_index: HashMap::new(),
            ignored_rows: HashMap::new(),
            objective_seen: false,
            entries: HashMap::new(),
            entry_order: Vec::new(),
            last_column: None,
        }
    }

    fn run(mut self, text: &str) -> Result<LpProblem<T>> {
        let mut ended = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('*') {
                continue;
            }
            let is_header = !line.starts_with(|c: char| c.is_whitespace());
            if is_header {
                if self.header(line, lineno)? {
                    ended = true;
                    break;
                }
                continue;
            }
            let fields: Vec<String> = match self.format {
                MpsFormat::Free => line.split_whitespace().map(str::to_string).collect(),
                MpsFormat::Fixed => fixed_fields(line).into_iter().filter(|f| !f.is_empty()).collect(),
            };
            self.data(&fields, lineno)?;
        }
        if !ended {
            return Err(parse_err(text.lines().count(), "missing ENDATA"));
        }
        if !self.objective_seen {
            warn!("model has no objective row; using a zero objective");
        }
        let mut lp = self.lp;
        lp.coefficients = self
            .entry_order
            .iter()
            .map(|&(i, j)| (i, j, self.entries[&(i, j)]))
            .collect();
        lp.validate()?;
        Ok(lp)
    }

    /// Returns true on ENDATA.
    fn header(&mut self, line: &str, lineno: usize) -> Result<bool> {
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = tokens.collect();
        self.section = match keyword.as_str() {
            "NAME" => {
                self.lp.name = rest.join(" ");
                Section::Name
            }
            "OBJSENSE" => {
                if let Some(value) = rest.first() {
                    self.set_sense(value, lineno)?;
                }
                Section::ObjSense
            }
            "ROWS" => Section::Rows,
            "COLUMNS" => Section::Columns,
            "RHS" => Section::Rhs,
            "RANGES" => Section::Ranges,
            "BOUNDS" => Section::Bounds,
            "ENDATA" => return Ok(true),
            other => return Err(parse_err(lineno, format!("malformed section header '{other}'"))),
        };
        Ok(false)
    }

    fn set_sense(&mut self, value: &str, lineno: usize) -> Result<()> {
        self.lp.sense = match value.to_ascii_uppercase().as_str() {
            "MAX" | "MAXIMIZE" => Sense::Maximize,
            "MIN" | "MINIMIZE" => Sense::Minimize,
            other => return Err(parse_err(lineno, format!("unknown objective sense '{other}'"))),
        };
        Ok(())
    }

    fn number(token: &str, lineno: usize) -> Result<T> {
        let value: f64 = token
            .parse()
            .map_err(|_| parse_err(lineno, format!("'{token}' is not a number")))?;
        if value.is_nan() {
            return Err(parse_err(lineno, format!("'{token}' is not a number")));
        }
        Ok(T::lit(value))
    }

    fn data(&mut self, f: &[String], lineno: usize) -> Result<()> {
        match self.section {
            Section::Start => Err(parse_err(lineno, "data line before any section header")),
            Section::Name => Err(parse_err(lineno, "unexpected data after NAME")),
            Section::ObjSense => {
                let value = f.first().ok_or_else(|| parse_err(lineno, "missing objective sense"))?;
                self.set_sense(value, lineno)
            }
            Section::Rows => self.row_line(f, lineno),
            Section::Columns => self.column_line(f, lineno),
            Section::Rhs => self.pairs_line(f, lineno, false),
            Section::Ranges => self.pairs_line(f, lineno, true),
            Section::Bounds => self.bound_line(f, lineno),
        }
    }

    fn row_line(&mut self, f: &[String], lineno: usize) -> Result<()> {
        if f.len() != 2 {
            return Err(parse_err(lineno, "ROWS lines need a type and a name"));
        }
        let name = f[1].clone();
        if self.row_index.contains_key(&name) || self.ignored_rows.contains_key(&name) || name == self.lp.objective_name && self.objective_seen {
            return Err(parse_err(lineno, format!("row '{name}' declared twice")));
        }
        let kind = match f[0].to_ascii_uppercase().as_str() {
            "N" => {
                if self.objective_seen {
                    warn!("dropping free row '{name}'");
                    self.ignored_rows.insert(name, ());
                } else {
                    self.objective_seen = true;
                    self.lp.objective_name = name;
                }
                return Ok(());
            }
            "E" => RowKind::Equal,
            "L" => RowKind::LessEqual,
            "G" => RowKind::GreaterEqual,
            other => return Err(parse_err(lineno, format!("unknown row type '{other}'"))),
        };
        let idx = self.lp.add_row(name.clone(), kind, T::zero());
        self.row_index.insert(name, idx);
        Ok(())
    }

    fn column_line(&mut self, f: &[String], lineno: usize) -> Result<()> {
        if f.len() >= 2 && f[1].trim_matches('\'').eq_ignore_ascii_case("MARKER") {
            return Ok(());
        }
        if f.len() != 3 && f.len() != 5 {
            return Err(parse_err(lineno, "COLUMNS lines need a column and one or two (row, value) pairs"));
        }
        let col_name = &f[0];
        let col = match self.col_index.get(col_name) {
            Some(&j) => {
                if self.last_column.as_deref() != Some(col_name.as_str()) {
                    warn!("column '{col_name}' appears in non-contiguous blocks");
                }
                j
            }
            None => {
                let j = self.lp.add_column(col_name.clone(), T::zero());
                self.col_index.insert(col_name.clone(), j);
                j
            }
        };
        self.last_column = Some(col_name.clone());
        for pair in f[1..].chunks(2) {
            let value = Self::number(&pair[1], lineno)?;
            let row_name = &pair[0];
            if self.objective_seen && *row_name == self.lp.objective_name {
                self.lp.objective[col] += value;
            } else if self.ignored_rows.contains_key(row_name) {
                continue;
            } else if let Some(&i) = self.row_index.get(row_name) {
                let key = (i, col);
                match self.entries.get_mut(&key) {
                    Some(v) => *v += value,
                    None => {
                        self.entries.insert(key, value);
                        self.entry_order.push(key);
                    }
                }
            } else {
                return Err(parse_err(lineno, format!("undeclared row '{row_name}'")));
            }
        }
        Ok(())
    }

    /// RHS and RANGES share a layout: `[set] row value [row value]`.
    fn pairs_line(&mut self, f: &[String], lineno: usize, ranges: bool) -> Result<()> {
        let pairs = match f.len() {
            2 | 4 => f,
            3 | 5 => &f[1..],
            _ => return Err(parse_err(lineno, "expected one or two (row, value) pairs")),
        };
        for pair in pairs.chunks(2) {
            let value = Self::number(&pair[1], lineno)?;
            let row_name = &pair[0];
            if self.objective_seen && *row_name == self.lp.objective_name {
                if ranges {
                    return Err(parse_err(lineno, "RANGES entry on the objective row"));
                }
                // conventional sign: an RHS on the objective is minus the constant
                self.lp.objective_constant -= value;
            } else if self.ignored_rows.contains_key(row_name) {
                continue;
            } else if let Some(&i) = self.row_index.get(row_name) {
                if ranges {
                    let slot = &mut self.lp.ranges[i];
                    *slot = Some(slot.unwrap_or(T::zero()) + value);
                } else {
                    self.lp.rhs[i] += value;
                }
            } else {
                return Err(parse_err(lineno, format!("undeclared row '{row_name}'")));
            }
        }
        Ok(())
    }

    fn bound_line(&mut self, f: &[String], lineno: usize) -> Result<()> {
        let kind = f
            .first()
            .ok_or_else(|| parse_err(lineno, "empty BOUNDS line"))?
            .to_ascii_uppercase();
        let needs_value = match kind.as_str() {
            "UP" | "LO" | "FX" | "LI" | "UI" => true,
            "FR" | "MI" | "PL" | "BV" => false,
            other => return Err(parse_err(lineno, format!("unknown bound type '{other}'"))),
        };
        let (col_name, value) = match (needs_value, f.len()) {
            (true, 4) => (&f[2], Some(Self::number(&f[3], lineno)?)),
            (true, 3) => (&f[1], Some(Self::number(&f[2], lineno)?)),
            (false, 3) => (&f[2], None),
            (false, 2) => (&f[1], None),
            _ => return Err(parse_err(lineno, format!("malformed {kind} bound"))),
        };
        let j = *self
            .col_index
            .get(col_name)
            .ok_or_else(|| parse_err(lineno, format!("undeclared column '{col_name}'")))?;
        let col = &mut self.lp.columns[j];
        let inf = T::infinity();
        match (kind.as_str(), value) {
            ("UP" | "UI", Some(v)) => {
                if v < T::zero() && col.lower == T::zero() {
                    warn!("negative upper bound on '{col_name}' with zero lower bound; lower bound set to -inf");
                    col.lower = -inf;
                }
                col.upper = v;
            }
            ("LO" | "LI", Some(v)) => col.lower = v,
            ("FX", Some(v)) => {
                col.lower = v;
                col.upper = v;
            }
            ("FR", None) => {
                col.lower = -inf;
                col.upper = inf;
            }
            ("MI", None) => col.lower = -inf,
            ("PL", None) => col.upper = inf,
            ("BV", None) => {
                col.lower = T::zero();
                col.upper = T::one();
            }
            _ => unreachable!("bound kinds matched above"),
        }
        Ok(())
    }
}

/// Writes a problem in free MPS format.
pub fn write_mps<T: Scalar>(lp: &LpProblem<T>) -> String {
    use std::fmt::Write;
    let num = |v: T| format!("{:e}", v.to_f64_lossy());
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", lp.name);
    if lp.sense == Sense::Maximize {
        let _ = writeln!(out, "OBJSENSE\n    MAX");
    }
    let _ = writeln!(out, "ROWS\n N  {}", lp.objective_name);
    for row in &lp.rows {
        let t = match row.kind {
            RowKind::Equal => "E",
            RowKind::LessEqual => "L",
            RowKind::GreaterEqual => "G",
        };
        let _ = writeln!(out, " {t}  {}", row.name);
    }
    let _ = writeln!(out, "COLUMNS");
    let mut by_col: Vec<Vec<(usize, T)>> = vec![Vec::new(); lp.columns.len()];
    for &(i, j, v) in &lp.coefficients {
        by_col[j].push((i, v));
    }
    for (j, col) in lp.columns.iter().enumerate() {
        if lp.objective[j] != T::zero() {
            let _ = writeln!(out, "    {}  {}  {}", col.name, lp.objective_name, num(lp.objective[j]));
        }
        for &(i, v) in &by_col[j] {
            let _ = writeln!(out, "    {}  {}  {}", col.name, lp.rows[i].name, num(v));
        }
        if lp.objective[j] == T::zero() && by_col[j].is_empty() {
            let _ = writeln!(out, "    {}  {}  0", col.name, lp.objective_name);
        }
    }
    let _ = writeln!(out, "RHS");
    if lp.objective_constant != T::zero() {
        let _ = writeln!(out, "    RHS  {}  {}", lp.objective_name, num(-lp.objective_constant));
    }
    for (row, &r) in lp.rows.iter().zip(&lp.rhs) {
        if r != T::zero() {
            let _ = writeln!(out, "    RHS  {}  {}", row.name, num(r));
        }
    }
    if lp.ranges.iter().any(Option::is_some) {
        let _ = writeln!(out, "RANGES");
        for (row, r) in lp.rows.iter().zip(&lp.ranges) {
            if let Some(r) = r {
                let _ = writeln!(out, "    RNG  {}  {}", row.name, num(*r));
            }
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for col in &lp.columns {
        let (lo, up) = (col.lower, col.upper);
        if lo == up {
            let _ = writeln!(out, " FX BND  {}  {}", col.name, num(lo));
            continue;
        }
        if lo == T::neg_infinity() && up == T::infinity() {
            let _ = writeln!(out, " FR BND  {}", col.name);
            continue;
        }
        if lo == T::neg_infinity() {
            let _ = writeln!(out, " MI BND  {}", col.name);
        } else if lo != T::zero() {
            let _ = writeln!(out, " LO BND  {}  {}", col.name, num(lo));
        }
        if up != T::infinity() {
            let _ = writeln!(out, " UP BND  {}  {}", col.name, num(up));
        }
    }
    let _ = writeln!(out, "ENDATA");
    out
}
