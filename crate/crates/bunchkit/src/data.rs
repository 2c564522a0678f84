//! Paycheck panel ingestion, validation, sample filters, and lag joins.
//!
//! Tables are immutable after construction and cheap to subset or resample:
//! worker and firm ids are interned into a shared pool, so rows are plain
//! `Copy` structs and a firm-cluster resample is a row memcpy. The firm
//! index maps every firm to its row positions and always partitions the row
//! set exactly, which is what the clustered bootstrap relies on.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::{Error, Result, GRID_TOL, HOURS_GRID};

/// Exact header of the canonical paycheck CSV schema.
pub const CSV_HEADER: [&str; 11] = [
    "worker_id",
    "firm_id",
    "week_index",
    "straight_wage",
    "hours_worked",
    "pto_hours",
    "sick_hours",
    "holiday_hours",
    "overtime_hours",
    "pay_frequency",
    "pay_basis",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayFrequency {
    Weekly,
    Biweekly,
    Semimonthly,
    Monthly,
}

impl PayFrequency {
    pub fn as_str(self) -> &'static str {
        match self {
            PayFrequency::Weekly => "weekly",
            PayFrequency::Biweekly => "biweekly",
            PayFrequency::Semimonthly => "semimonthly",
            PayFrequency::Monthly => "monthly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weekly" => Some(PayFrequency::Weekly),
            "biweekly" => Some(PayFrequency::Biweekly),
            "semimonthly" => Some(PayFrequency::Semimonthly),
            "monthly" => Some(PayFrequency::Monthly),
            _ => None,
        }
    }
}

impl fmt::Display for PayFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayBasis {
    Hourly,
    Salaried,
}

impl PayBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            PayBasis::Hourly => "hourly",
            PayBasis::Salaried => "salaried",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hourly" => Some(PayBasis::Hourly),
            "salaried" => Some(PayBasis::Salaried),
            _ => None,
        }
    }
}

impl fmt::Display for PayBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pay-period record with interned ids. Internal storage type; use
/// [`Paycheck`] views for string ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub worker: u32,
    pub firm: u32,
    pub week_index: i64,
    pub straight_wage: f64,
    pub hours_worked: f64,
    pub pto_hours: f64,
    pub sick_hours: f64,
    pub holiday_hours: f64,
    pub overtime_hours: f64,
    pub pay_frequency: PayFrequency,
    pub pay_basis: PayBasis,
    pub lag_hours_worked: Option<f64>,
    pub lag_straight_wage: Option<f64>,
}

/// Borrowed view of one paycheck with resolved ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paycheck<'a> {
    pub worker_id: &'a str,
    pub firm_id: &'a str,
    pub week_index: i64,
    pub straight_wage: f64,
    pub hours_worked: f64,
    pub pto_hours: f64,
    pub sick_hours: f64,
    pub holiday_hours: f64,
    pub overtime_hours: f64,
    pub pay_frequency: PayFrequency,
    pub pay_basis: PayBasis,
    pub lag_hours_worked: Option<f64>,
    pub lag_straight_wage: Option<f64>,
}

#[derive(Debug, Default)]
struct NamePool {
    workers: Vec<String>,
    firms: Vec<String>,
}

/// Which filters to apply when constructing the analysis sample.
///
/// Row-level filters (weekly pay, hourly basis) drop individual paychecks;
/// worker-level filters (ever-overtime, hours-variation) drop every paycheck
/// of a worker that fails them, evaluated on the rows surviving the
/// row-level filters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleFilter {
    pub require_weekly: bool,
    pub require_hourly: bool,
    pub require_ever_overtime: bool,
    pub require_hours_variation: bool,
}

/// Minimum max-min spread of a worker's hours to count as "variation".
pub const HOURS_VARIATION_MIN: f64 = 1.0;

/// An immutable paycheck panel.
#[derive(Debug, Clone)]
pub struct PaycheckTable {
    names: Arc<NamePool>,
    rows: Vec<Row>,
    /// (firm id, row positions), sorted by firm id; non-empty buckets only.
    firm_groups: Vec<(u32, Vec<usize>)>,
}

/// Result of a load: the table plus validation warnings.
#[derive(Debug)]
pub struct LoadOutcome {
    pub table: PaycheckTable,
    /// Rows whose hours_worked needed snapping to the 1/8 grid.
    pub snapped_rows: usize,
    /// (column, count) of empty optional cells defaulted to zero.
    pub defaulted_cells: Vec<(String, usize)>,
}

impl PaycheckTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn worker_name(&self, id: u32) -> &str {
        &self.names.workers[id as usize]
    }

    pub fn firm_name(&self, id: u32) -> &str {
        &self.names.firms[id as usize]
    }

    pub fn n_workers(&self) -> usize {
        let mut seen = HashSet::new();
        self.rows.iter().filter(|r| seen.insert(r.worker)).count()
    }

    pub fn n_firms(&self) -> usize {
        self.firm_groups.len()
    }

    /// Firm buckets: (firm id, row positions). Every row appears in exactly
    /// one bucket.
    pub fn firm_groups(&self) -> &[(u32, Vec<usize>)] {
        &self.firm_groups
    }

    pub fn get(&self, i: usize) -> Paycheck<'_> {
        let r = &self.rows[i];
        Paycheck {
            worker_id: self.worker_name(r.worker),
            firm_id: self.firm_name(r.firm),
            week_index: r.week_index,
            straight_wage: r.straight_wage,
            hours_worked: r.hours_worked,
            pto_hours: r.pto_hours,
            sick_hours: r.sick_hours,
            holiday_hours: r.holiday_hours,
            overtime_hours: r.overtime_hours,
            pay_frequency: r.pay_frequency,
            pay_basis: r.pay_basis,
            lag_hours_worked: r.lag_hours_worked,
            lag_straight_wage: r.lag_straight_wage,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Paycheck<'_>> {
        (0..self.rows.len()).map(move |i| self.get(i))
    }

    pub fn hours_vec(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.hours_worked).collect()
    }

    /// New table holding the given rows (in the given order), sharing the
    /// name pool.
    pub fn subset(&self, indices: &[usize]) -> Result<PaycheckTable> {
        if indices.is_empty() {
            return Err(Error::EmptySample);
        }
        let rows: Vec<Row> = indices.iter().map(|&i| self.rows[i]).collect();
        Ok(PaycheckTable::from_rows(self.names.clone(), rows))
    }

    /// Concatenate whole firm buckets, one per draw (draws index into
    /// `firm_groups`, repetition allowed). Used by the clustered bootstrap.
    pub fn resample_firms(&self, draws: &[usize]) -> PaycheckTable {
        let total: usize = draws.iter().map(|&d| self.firm_groups[d].1.len()).sum();
        let mut rows = Vec::with_capacity(total);
        for &d in draws {
            for &i in &self.firm_groups[d].1 {
                rows.push(self.rows[i]);
            }
        }
        PaycheckTable::from_rows(self.names.clone(), rows)
    }

    fn from_rows(names: Arc<NamePool>, rows: Vec<Row>) -> PaycheckTable {
        let mut by_firm: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            by_firm.entry(r.firm).or_default().push(i);
        }
        let mut firm_groups: Vec<(u32, Vec<usize>)> = by_firm.into_iter().collect();
        firm_groups.sort_unstable_by_key(|(f, _)| *f);
        PaycheckTable {
            names,
            rows,
            firm_groups,
        }
    }

    /// Apply the enabled filters. Filtering is idempotent.
    pub fn apply_sample_filters(&self, filter: &SampleFilter) -> Result<PaycheckTable> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut keep: Vec<usize> = (0..self.rows.len())
            .filter(|&i| {
                let r = &self.rows[i];
                (!filter.require_weekly || r.pay_frequency == PayFrequency::Weekly)
                    && (!filter.require_hourly || r.pay_basis == PayBasis::Hourly)
            })
            .collect();

        if filter.require_ever_overtime || filter.require_hours_variation {
            #[derive(Default)]
            struct Agg {
                any_ot: bool,
                min_h: f64,
                max_h: f64,
                seen: bool,
            }
            let mut per_worker: HashMap<u32, Agg> = HashMap::new();
            for &i in &keep {
                let r = &self.rows[i];
                let a = per_worker.entry(r.worker).or_default();
                a.any_ot |= r.overtime_hours > 0.0;
                if !a.seen {
                    a.min_h = r.hours_worked;
                    a.max_h = r.hours_worked;
                    a.seen = true;
                } else {
                    a.min_h = a.min_h.min(r.hours_worked);
                    a.max_h = a.max_h.max(r.hours_worked);
                }
            }
            keep.retain(|&i| {
                let a = &per_worker[&self.rows[i].worker];
                (!filter.require_ever_overtime || a.any_ot)
                    && (!filter.require_hours_variation || a.max_h - a.min_h >= HOURS_VARIATION_MIN)
            });
        }

        if keep.is_empty() {
            return Err(Error::EmptySample);
        }
        self.subset(&keep)
    }

    /// Attach each worker's previous-period hours and wage. The first
    /// paycheck of a worker has absent lags; a gap in `week_index` still
    /// defines a previous paycheck.
    pub fn lag_join(&self) -> PaycheckTable {
        let mut order: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            order.entry(r.worker).or_default().push(i);
        }
        let mut rows = self.rows.clone();
        for idx in order.values_mut() {
            idx.sort_unstable_by_key(|&i| self.rows[i].week_index);
            for w in idx.windows(2) {
                let (prev, cur) = (w[0], w[1]);
                rows[cur].lag_hours_worked = Some(self.rows[prev].hours_worked);
                rows[cur].lag_straight_wage = Some(self.rows[prev].straight_wage);
            }
            rows[idx[0]].lag_hours_worked = None;
            rows[idx[0]].lag_straight_wage = None;
        }
        PaycheckTable {
            names: self.names.clone(),
            rows,
            firm_groups: self.firm_groups.clone(),
        }
    }

    /// Serialize in the canonical CSV schema (lags are derived fields and
    /// are not written).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                self.worker_name(r.worker),
                self.firm_name(r.firm),
                &r.week_index.to_string(),
                &fmt_f64(r.straight_wage),
                &fmt_f64(r.hours_worked),
                &fmt_f64(r.pto_hours),
                &fmt_f64(r.sick_hours),
                &fmt_f64(r.holiday_hours),
                &fmt_f64(r.overtime_hours),
                r.pay_frequency.as_str(),
                r.pay_basis.as_str(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    // shortest round-trip representation; deterministic across platforms
    format!("{x}")
}

/// Incremental table construction with full row validation.
pub struct TableBuilder {
    names: NamePool,
    worker_ids: HashMap<String, u32>,
    firm_ids: HashMap<String, u32>,
    seen: HashSet<(u32, i64)>,
    rows: Vec<Row>,
    snapped_rows: usize,
    snap: bool,
}

/// Unvalidated input for one paycheck.
#[derive(Debug, Clone)]
pub struct RawPaycheck<'a> {
    pub worker_id: &'a str,
    pub firm_id: &'a str,
    pub week_index: i64,
    pub straight_wage: f64,
    pub hours_worked: f64,
    pub pto_hours: f64,
    pub sick_hours: f64,
    pub holiday_hours: f64,
    pub overtime_hours: f64,
    pub pay_frequency: PayFrequency,
    pub pay_basis: PayBasis,
}

impl Default for TableBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl TableBuilder {
    /// Canonical builder: hours are snapped to the 1/8 grid, exact
    /// midpoints rejected.
    pub fn new() -> Self {
        TableBuilder {
            names: NamePool::default(),
            worker_ids: HashMap::new(),
            firm_ids: HashMap::new(),
            seen: HashSet::new(),
            rows: Vec::new(),
            snapped_rows: 0,
            snap: true,
        }
    }

    /// Builder that stores hours exactly as given. Used by the simulator,
    /// whose oracles depend on unrounded values.
    pub fn new_unsnapped() -> Self {
        TableBuilder {
            snap: false,
            ..TableBuilder::new()
        }
    }

    /// Validate and append one paycheck. `row` is the 1-based position used
    /// in error messages.
    pub fn push(&mut self, row: usize, p: RawPaycheck<'_>) -> Result<()> {
        let err = |message: String| Error::MalformedRow { row, message };
        if p.worker_id.is_empty() {
            return Err(err("worker_id is empty".into()));
        }
        if p.firm_id.is_empty() {
            return Err(err("firm_id is empty".into()));
        }
        if !(p.straight_wage.is_finite() && p.straight_wage > 0.0) {
            return Err(err(format!(
                "straight_wage must be > 0, got {}",
                p.straight_wage
            )));
        }
        for (name, v) in [
            ("hours_worked", p.hours_worked),
            ("pto_hours", p.pto_hours),
            ("sick_hours", p.sick_hours),
            ("holiday_hours", p.holiday_hours),
            ("overtime_hours", p.overtime_hours),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(err(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        let hours_worked = if self.snap {
            let snapped = (p.hours_worked / HOURS_GRID).round() * HOURS_GRID;
            let dev = (p.hours_worked - snapped).abs();
            // round-to-nearest keeps dev below half a grid step except at
            // exact midpoints, which are ambiguous and rejected
            if dev >= GRID_TOL - 1e-12 {
                return Err(err(format!(
                    "hours_worked {} sits {dev:.4} from the 1/8-hour grid (tolerance 1/16)",
                    p.hours_worked
                )));
            }
            if dev > 1e-9 {
                self.snapped_rows += 1;
            }
            snapped
        } else {
            p.hours_worked
        };

        let worker = intern(&mut self.names.workers, &mut self.worker_ids, p.worker_id);
        let firm = intern(&mut self.names.firms, &mut self.firm_ids, p.firm_id);
        if !self.seen.insert((worker, p.week_index)) {
            return Err(Error::DuplicatePaycheck {
                worker_id: p.worker_id.to_string(),
                week_index: p.week_index,
            });
        }
        self.rows.push(Row {
            worker,
            firm,
            week_index: p.week_index,
            straight_wage: p.straight_wage,
            hours_worked,
            pto_hours: p.pto_hours,
            sick_hours: p.sick_hours,
            holiday_hours: p.holiday_hours,
            overtime_hours: p.overtime_hours,
            pay_frequency: p.pay_frequency,
            pay_basis: p.pay_basis,
            lag_hours_worked: None,
            lag_straight_wage: None,
        });
        Ok(())
    }

    /// Rows whose hours needed snapping so far.
    pub fn snapped_rows(&self) -> usize {
        self.snapped_rows
    }

    pub fn finish(self) -> Result<PaycheckTable> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(PaycheckTable::from_rows(Arc::new(self.names), self.rows))
    }
}

fn intern(pool: &mut Vec<String>, ids: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = pool.len() as u32;
    pool.push(name.to_string());
    ids.insert(name.to_string(), id);
    id
}

/// Parse and validate paychecks from a CSV byte stream in the canonical
/// schema. Optional numeric cells (pto, sick, holiday, overtime) may be
/// empty and default to zero with a per-column warning count.
pub fn load_paychecks<R: Read>(reader: R) -> Result<LoadOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != CSV_HEADER {
        return Err(Error::MalformedRow {
            row: 0,
            message: format!(
                "header mismatch: expected {:?}, got {:?}",
                CSV_HEADER.join(","),
                got.join(",")
            ),
        });
    }

    let mut builder = TableBuilder::new();
    let mut defaults: [usize; 4] = [0; 4]; // pto, sick, holiday, overtime
    let mut row_no = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        row_no += 1;
        let err = |message: String| Error::MalformedRow {
            row: row_no,
            message,
        };

        let field = |i: usize| rec.get(i).unwrap_or("");
        let week_index: i64 = field(2)
            .trim()
            .parse()
            .map_err(|_| err(format!("week_index does not parse: {:?}", field(2))))?;
        let req_f64 = |i: usize, name: &str| -> Result<f64> {
            field(i)
                .trim()
                .parse::<f64>()
                .map_err(|_| err(format!("{name} does not parse: {:?}", field(i))))
        };
        let opt_f64 = |i: usize, name: &str, slot: &mut usize| -> Result<f64> {
            let s = field(i).trim();
            if s.is_empty() {
                *slot += 1;
                Ok(0.0)
            } else {
                s.parse::<f64>()
                    .map_err(|_| err(format!("{name} does not parse: {s:?}")))
            }
        };

        let straight_wage = req_f64(3, "straight_wage")?;
        let hours_worked = req_f64(4, "hours_worked")?;
        let (mut d0, mut d1, mut d2, mut d3) = (defaults[0], defaults[1], defaults[2], defaults[3]);
        let pto_hours = opt_f64(5, "pto_hours", &mut d0)?;
        let sick_hours = opt_f64(6, "sick_hours", &mut d1)?;
        let holiday_hours = opt_f64(7, "holiday_hours", &mut d2)?;
        let overtime_hours = opt_f64(8, "overtime_hours", &mut d3)?;
        defaults = [d0, d1, d2, d3];

        let pay_frequency = PayFrequency::parse(field(9).trim())
            .ok_or_else(|| err(format!("pay_frequency not recognized: {:?}", field(9))))?;
        let pay_basis = PayBasis::parse(field(10).trim())
            .ok_or_else(|| err(format!("pay_basis not recognized: {:?}", field(10))))?;

        builder.push(
            row_no,
            RawPaycheck {
                worker_id: field(0),
                firm_id: field(1),
                week_index,
                straight_wage,
                hours_worked,
                pto_hours,
                sick_hours,
                holiday_hours,
                overtime_hours,
                pay_frequency,
                pay_basis,
            },
        )?;
    }

    let snapped_rows = builder.snapped_rows();
    let table = builder.finish()?;
    let names = ["pto_hours", "sick_hours", "holiday_hours", "overtime_hours"];
    let defaulted_cells = names
        .iter()
        .zip(defaults)
        .filter(|(_, c)| *c > 0)
        .map(|(n, c)| (n.to_string(), c))
        .collect();
    Ok(LoadOutcome {
        table,
        snapped_rows,
        defaulted_cells,
    })
}
