use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ProblemSpec;

/// How measurements are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LedgerMode {
    /// One entry per oracle call.
    PerMeasurement,
    /// One entry per batch of replicates at the same point, holding the
    /// sample means. Memory stays bounded when `n_t` is large.
    #[default]
    Batched,
}

/// A recorded query. `replicates` is 1 in per-measurement mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: usize,
    /// 0 for the center point x_t, j for the probe x_t + nu e_j.
    pub probe: usize,
    /// 1-based replicate index of the first measurement in this entry.
    pub l: u64,
    pub replicates: u64,
    pub point: Vec<f64>,
    /// `None` when the call returned every function value `f_0..f_m`.
    pub index: Option<usize>,
    pub values: Vec<f64>,
}

impl LedgerEntry {
    /// `(function index, value)` pairs held by this entry.
    pub fn indexed_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let offset = self.index.unwrap_or(0);
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (offset + k, *v))
    }
}

/// Append-only record of every oracle call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ledger {
    dimension: usize,
    constraints: usize,
    mode: LedgerMode,
    entries: Vec<LedgerEntry>,
    measurements: u64,
}

impl Ledger {
    pub fn new(dimension: usize, constraints: usize, mode: LedgerMode) -> Self {
        Self {
            dimension,
            constraints,
            mode,
            entries: Vec::new(),
            measurements: 0,
        }
    }

    pub fn mode(&self) -> LedgerMode {
        self.mode
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Total oracle calls N.
    pub fn measurements(&self) -> u64 {
        self.measurements
    }

    pub(crate) fn record(
        &mut self,
        t: usize,
        probe: usize,
        replicates: u64,
        point: &[f64],
        index: Option<usize>,
        values: &[f64],
    ) {
        let l = match self.entries.last() {
            Some(last)
                if last.t == t
                    && last.probe == probe
                    && last.index == index
                    && last.point == point =>
            {
                last.l + last.replicates
            }
            _ => 1,
        };
        self.entries.push(LedgerEntry {
            t,
            probe,
            l,
            replicates,
            point: point.to_vec(),
            index,
            values: values.to_vec(),
        });
        self.measurements += replicates;
    }

    /// Appends another ledger, e.g. the next barrier round.
    pub fn extend(&mut self, other: Ledger) {
        self.measurements += other.measurements;
        self.entries.extend(other.entries);
    }

    /// Writes `t,l,i,x_1..x_d,value,safe`, one row per function value.
    ///
    /// `safe` is the ground-truth feasibility of the query point when a
    /// problem is supplied and blank otherwise. Batched entries write the
    /// first replicate index and the sample mean.
    pub fn write_csv<W: Write>(&self, writer: W, problem: Option<&ProblemSpec>) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "l".to_string(), "i".to_string()];
        header.extend((1..=self.dimension).map(|j| format!("x_{j}")));
        header.push("value".into());
        header.push("safe".into());
        w.write_record(&header)?;
        for entry in &self.entries {
            let safe = problem.map(|p| is_feasible(p, &entry.point));
            for (i, value) in entry.indexed_values() {
                let mut row = vec![entry.t.to_string(), entry.l.to_string(), i.to_string()];
                row.extend(entry.point.iter().map(|v| v.to_string()));
                row.push(value.to_string());
                row.push(match safe {
                    Some(true) => "1".into(),
                    Some(false) => "0".into(),
                    None => String::new(),
                });
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Number of constraints m of the problem this ledger was recorded on.
    pub fn constraint_count(&self) -> usize {
        self.constraints
    }
}

fn is_feasible(problem: &ProblemSpec, x: &[f64]) -> bool {
    problem
        .constraints
        .iter()
        .all(|c| c.function.value(x) <= 0.0)
}

/// One constraint violated at one recorded query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Position of the offending entry (or CSV row) in the ledger.
    pub entry: usize,
    pub t: usize,
    pub l: u64,
    /// Constraint index in 1..=m.
    pub constraint: usize,
    /// `f_i(x) > 0` at the query point.
    pub magnitude: f64,
}

/// Every recorded query point that violates a ground-truth constraint.
pub fn audit_safety(ledger: &Ledger, problem: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    for (k, entry) in ledger.entries.iter().enumerate() {
        push_violations(problem, k, entry.t, entry.l, &entry.point, &mut out);
    }
    out
}

fn push_violations(
    problem: &ProblemSpec,
    entry: usize,
    t: usize,
    l: u64,
    x: &[f64],
    out: &mut Vec<Violation>,
) {
    for (k, c) in problem.constraints.iter().enumerate() {
        let v = c.function.value(x);
        if v > 0.0 || v.is_nan() {
            out.push(Violation {
                entry,
                t,
                l,
                constraint: k + 1,
                magnitude: v,
            });
        }
    }
}

/// A row read back from a ledger CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub t: usize,
    pub l: u64,
    pub i: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

impl LedgerRow {
    /// Parses a ledger CSV written by [`Ledger::write_csv`].
    pub fn read_csv<R: Read>(reader: R) -> Result<Vec<LedgerRow>, csv::Error> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let dimension = headers.iter().filter(|h| h.starts_with("x_")).count();
        let parse_err = |what: &str, line: usize| {
            csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("row {line}: invalid {what}"),
            ))
        };
        let mut rows = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let field = |k: usize| record.get(k).unwrap_or("");
            let t = field(0).parse().map_err(|_| parse_err("t", line + 2))?;
            let l = field(1).parse().map_err(|_| parse_err("l", line + 2))?;
            let i = field(2).parse().map_err(|_| parse_err("i", line + 2))?;
            let point = (0..dimension)
                .map(|j| {
                    field(3 + j)
                        .parse::<f64>()
                        .map_err(|_| parse_err("coordinate", line + 2))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let value = field(3 + dimension)
                .parse()
                .map_err(|_| parse_err("value", line + 2))?;
            rows.push(LedgerRow {
                t,
                l,
                i,
                point,
                value,
            });
        }
        Ok(rows)
    }
}

/// Audits rows read from a ledger CSV. Rows sharing a point are checked once.
pub fn audit_rows(rows: &[LedgerRow], problem: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut last: Option<&[f64]> = None;
    for (k, row) in rows.iter().enumerate() {
        if last == Some(row.point.as_slice()) {
            continue;
        }
        last = Some(&row.point);
        push_violations(problem, k, row.t, row.l, &row.point, &mut out);
    }
    out
}
