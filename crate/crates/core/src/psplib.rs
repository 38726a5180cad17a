//! PSPLIB multi-mode (`.mm`) reader and the deviation rule that turns a
//! deterministic instance into an uncertain one.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::instance::{Activity, Instance, Mode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PsplibError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: expected an integer, found {token:?}")]
    NotAnInteger { line: usize, token: String },
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("job count mismatch: header says {header}, {section} lists {found}")]
    JobCount { header: usize, section: &'static str, found: usize },
    #[error("job {job}: precedence section declares {declared} modes, requests section lists {found}")]
    ModeCount { job: usize, declared: usize, found: usize },
    #[error("doubly constrained resources are not supported ({0} declared)")]
    DoublyConstrained(usize),
    #[error("line {line}: unknown resource column {token:?}")]
    ResourceColumn { line: usize, token: String },
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResourceKind {
    Renewable,
    NonRenewable,
    Doubly,
}

impl ResourceKind {
    fn marker(self) -> &'static str {
        match self {
            ResourceKind::Renewable => "R",
            ResourceKind::NonRenewable => "N",
            ResourceKind::Doubly => "D",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecedenceRow {
    pub job: usize,
    pub modes: usize,
    pub successors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestRow {
    pub job: usize,
    pub mode: usize,
    pub duration: u32,
    /// In the order of [`RawPsplibFile::columns`].
    pub requests: Vec<u32>,
}

/// Token tables of a `.mm` file, before any interpretation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPsplibFile {
    pub jobs: usize,
    pub renewable: usize,
    pub nonrenewable: usize,
    pub doubly: usize,
    pub precedence: Vec<PrecedenceRow>,
    /// Resource columns as `(kind, 1-based number)`, in file order.
    pub columns: Vec<(ResourceKind, usize)>,
    pub requests: Vec<RequestRow>,
    pub availabilities: Vec<u32>,
}

fn int(token: &str, line: usize) -> Result<u32, PsplibError> {
    token
        .parse::<u32>()
        .map_err(|_| PsplibError::NotAnInteger { line, token: token.to_string() })
}

fn after_colon(text: &str, line: usize) -> Result<Vec<&str>, PsplibError> {
    let (_, rest) = text.split_once(':').ok_or_else(|| PsplibError::Syntax {
        line,
        message: "expected `label : value`".into(),
    })?;
    Ok(rest.split_whitespace().collect())
}

/// Parses `R 1  R 2  N 1` style headers, which may also appear glued as `R1`.
fn parse_columns(tokens: &[&str], line: usize) -> Result<Vec<(ResourceKind, usize)>, PsplibError> {
    let mut out = Vec::new();
    let mut idx = 0;
    while idx < tokens.len() {
        let tok = tokens[idx];
        let (marker, rest) = tok.split_at(1);
        let kind = match marker {
            "R" => ResourceKind::Renewable,
            "N" => ResourceKind::NonRenewable,
            "D" => ResourceKind::Doubly,
            _ => return Err(PsplibError::ResourceColumn { line, token: tok.to_string() }),
        };
        let number = if rest.is_empty() {
            idx += 1;
            let next = tokens.get(idx).ok_or_else(|| PsplibError::ResourceColumn { line, token: tok.to_string() })?;
            int(next, line)? as usize
        } else {
            int(rest, line)? as usize
        };
        out.push((kind, number));
        idx += 1;
    }
    Ok(out)
}

impl RawPsplibFile {
    pub fn parse(text: &str) -> Result<Self, PsplibError> {
        let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
        let mut jobs = None;
        let (mut renewable, mut nonrenewable, mut doubly) = (None, None, 0usize);
        let mut precedence = Vec::new();
        let mut requests = Vec::new();
        let mut columns = None;
        let mut availabilities = None;

        let mut pos = 0;
        while pos < lines.len() {
            let (ln, raw) = lines[pos];
            let line = raw.trim();
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("jobs") && lower.contains(':') {
                let toks = after_colon(line, ln)?;
                jobs = Some(int(toks.first().copied().unwrap_or(""), ln)? as usize);
            } else if lower.trim_start_matches('-').trim_start().starts_with("renewable") {
                renewable = Some(int(after_colon(line, ln)?.first().copied().unwrap_or(""), ln)? as usize);
            } else if lower.trim_start_matches('-').trim_start().starts_with("nonrenewable") {
                nonrenewable = Some(int(after_colon(line, ln)?.first().copied().unwrap_or(""), ln)? as usize);
            } else if lower.trim_start_matches('-').trim_start().starts_with("doubly constrained") {
                doubly = int(after_colon(line, ln)?.first().copied().unwrap_or(""), ln)? as usize;
            } else if lower.starts_with("precedence relations") {
                pos += 2; // section title and column header
                let count = jobs.ok_or(PsplibError::MissingSection("jobs (incl. supersource/sink)"))?;
                while pos < lines.len() && precedence.len() < count {
                    let (ln, l) = lines[pos];
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.is_empty() || toks[0].starts_with('*') {
                        break;
                    }
                    if toks.len() < 3 {
                        return Err(PsplibError::Syntax { line: ln, message: "short precedence row".into() });
                    }
                    let job = int(toks[0], ln)? as usize;
                    let modes = int(toks[1], ln)? as usize;
                    let nsucc = int(toks[2], ln)? as usize;
                    let successors = toks[3..]
                        .iter()
                        .map(|t| int(t, ln).map(|v| v as usize))
                        .collect::<Result<Vec<_>, _>>()?;
                    if successors.len() != nsucc {
                        return Err(PsplibError::Syntax {
                            line: ln,
                            message: format!("job {job} declares {nsucc} successors but lists {}", successors.len()),
                        });
                    }
                    precedence.push(PrecedenceRow { job, modes, successors });
                    pos += 1;
                }
                continue;
            } else if lower.starts_with("requests/durations") {
                pos += 1;
                let (hl, header) = *lines.get(pos).ok_or(PsplibError::MissingSection("requests header"))?;
                let toks: Vec<&str> = header.split_whitespace().collect();
                // jobnr. mode duration <columns...>
                if toks.len() < 3 || !toks[0].to_ascii_lowercase().starts_with("jobnr") {
                    return Err(PsplibError::Syntax { line: hl, message: "expected requests column header".into() });
                }
                let cols = parse_columns(&toks[3..], hl)?;
                pos += 1;
                if lines.get(pos).is_some_and(|(_, l)| l.trim_start().starts_with('-')) {
                    pos += 1;
                }
                let mut current_job = None;
                while pos < lines.len() {
                    let (ln, l) = lines[pos];
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.is_empty() || toks[0].starts_with('*') {
                        break;
                    }
                    let width = 2 + cols.len();
                    let (job, rest) = if toks.len() == width + 1 {
                        let job = int(toks[0], ln)? as usize;
                        current_job = Some(job);
                        (job, &toks[1..])
                    } else if toks.len() == width {
                        let job = current_job.ok_or_else(|| PsplibError::Syntax {
                            line: ln,
                            message: "mode row before any job row".into(),
                        })?;
                        (job, &toks[..])
                    } else {
                        return Err(PsplibError::Syntax {
                            line: ln,
                            message: format!("expected {} or {} fields, found {}", width, width + 1, toks.len()),
                        });
                    };
                    let mode = int(rest[0], ln)? as usize;
                    let duration = int(rest[1], ln)?;
                    let reqs = rest[2..].iter().map(|t| int(t, ln)).collect::<Result<Vec<_>, _>>()?;
                    requests.push(RequestRow { job, mode, duration, requests: reqs });
                    pos += 1;
                }
                columns = Some(cols);
                continue;
            } else if lower.starts_with("resourceavailabilities") {
                let (hl, header) = *lines.get(pos + 1).ok_or(PsplibError::MissingSection("availability header"))?;
                let toks: Vec<&str> = header.split_whitespace().collect();
                let cols = parse_columns(&toks, hl)?;
                let (vl, values) = *lines.get(pos + 2).ok_or(PsplibError::MissingSection("availability values"))?;
                let vals = values.split_whitespace().map(|t| int(t, vl)).collect::<Result<Vec<_>, _>>()?;
                if vals.len() != cols.len() {
                    return Err(PsplibError::Syntax {
                        line: vl,
                        message: format!("{} availability columns but {} values", cols.len(), vals.len()),
                    });
                }
                if let Some(req_cols) = &columns {
                    if *req_cols != cols {
                        return Err(PsplibError::Syntax {
                            line: hl,
                            message: "availability columns differ from the requests header".into(),
                        });
                    }
                }
                columns.get_or_insert(cols);
                availabilities = Some(vals);
                pos += 3;
                continue;
            }
            pos += 1;
        }

        let jobs = jobs.ok_or(PsplibError::MissingSection("jobs (incl. supersource/sink)"))?;
        if doubly > 0 {
            return Err(PsplibError::DoublyConstrained(doubly));
        }
        let columns = columns.ok_or(PsplibError::MissingSection("REQUESTS/DURATIONS"))?;
        let availabilities = availabilities.ok_or(PsplibError::MissingSection("RESOURCEAVAILABILITIES"))?;
        if precedence.is_empty() {
            return Err(PsplibError::MissingSection("PRECEDENCE RELATIONS"));
        }
        let count = |kind| columns.iter().filter(|(k, _)| *k == kind).count();
        if columns.iter().any(|(k, _)| *k == ResourceKind::Doubly) {
            return Err(PsplibError::DoublyConstrained(count(ResourceKind::Doubly)));
        }
        let renewable = renewable.unwrap_or_else(|| count(ResourceKind::Renewable));
        let nonrenewable = nonrenewable.unwrap_or_else(|| count(ResourceKind::NonRenewable));
        Ok(RawPsplibFile {
            jobs,
            renewable,
            nonrenewable,
            doubly,
            precedence,
            columns,
            requests,
            availabilities,
        })
    }

    /// Structural checks and conversion into an [`Instance`]. PSPLIB job `j`
    /// becomes activity `j - 1`; deviations start at zero.
    pub fn to_instance(&self) -> Result<Instance, PsplibError> {
        if self.precedence.len() != self.jobs {
            return Err(PsplibError::JobCount {
                header: self.jobs,
                section: "PRECEDENCE RELATIONS",
                found: self.precedence.len(),
            });
        }
        let mut per_job: BTreeMap<usize, Vec<&RequestRow>> = BTreeMap::new();
        for row in &self.requests {
            per_job.entry(row.job).or_default().push(row);
        }
        if per_job.len() != self.jobs {
            return Err(PsplibError::JobCount {
                header: self.jobs,
                section: "REQUESTS/DURATIONS",
                found: per_job.len(),
            });
        }
        let renew_cols: Vec<usize> = self.column_positions(ResourceKind::Renewable);
        let nonrenew_cols: Vec<usize> = self.column_positions(ResourceKind::NonRenewable);
        if renew_cols.len() != self.renewable || nonrenew_cols.len() != self.nonrenewable {
            return Err(PsplibError::Syntax {
                line: 0,
                message: format!(
                    "header declares {}R/{}N resources, columns provide {}R/{}N",
                    self.renewable,
                    self.nonrenewable,
                    renew_cols.len(),
                    nonrenew_cols.len()
                ),
            });
        }

        let mut activities = Vec::with_capacity(self.jobs);
        let mut edges = Vec::new();
        for (idx, prec) in self.precedence.iter().enumerate() {
            if prec.job != idx + 1 {
                return Err(PsplibError::Syntax {
                    line: 0,
                    message: format!("precedence rows out of order at job {}", prec.job),
                });
            }
            let rows = per_job.get(&prec.job).map(Vec::as_slice).unwrap_or(&[]);
            if rows.len() != prec.modes {
                return Err(PsplibError::ModeCount { job: prec.job, declared: prec.modes, found: rows.len() });
            }
            let mut modes = Vec::with_capacity(rows.len());
            for (m, row) in rows.iter().enumerate() {
                if row.mode != m + 1 {
                    return Err(PsplibError::Syntax {
                        line: 0,
                        message: format!("job {} lists mode {} out of order", row.job, row.mode),
                    });
                }
                modes.push(Mode {
                    nominal_duration: row.duration,
                    max_deviation: 0,
                    renewable_req: renew_cols.iter().map(|&c| row.requests[c]).collect(),
                    nonrenewable_req: nonrenew_cols.iter().map(|&c| row.requests[c]).collect(),
                });
            }
            activities.push(Activity::new(modes));
            for &s in &prec.successors {
                if s == 0 || s > self.jobs {
                    return Err(PsplibError::Syntax {
                        line: 0,
                        message: format!("job {} has unknown successor {s}", prec.job),
                    });
                }
                edges.push((prec.job - 1, s - 1));
            }
        }
        Ok(Instance::new(
            activities,
            edges,
            renew_cols.iter().map(|&c| self.availabilities[c]).collect(),
            nonrenew_cols.iter().map(|&c| self.availabilities[c]).collect(),
        ))
    }

    fn column_positions(&self, kind: ResourceKind) -> Vec<usize> {
        let mut cols: Vec<(usize, usize)> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, (k, _))| *k == kind)
            .map(|(pos, &(_, number))| (number, pos))
            .collect();
        cols.sort();
        cols.into_iter().map(|(_, pos)| pos).collect()
    }

    /// Token tables for an instance (deviations are not representable and
    /// are dropped).
    pub fn from_instance(instance: &Instance) -> Self {
        let kr = instance.num_renewable();
        let kn = instance.num_nonrenewable();
        let mut columns: Vec<(ResourceKind, usize)> = (1..=kr).map(|k| (ResourceKind::Renewable, k)).collect();
        columns.extend((1..=kn).map(|k| (ResourceKind::NonRenewable, k)));
        let precedence = (0..instance.num_activities())
            .map(|i| PrecedenceRow {
                job: i + 1,
                modes: instance.modes(i).len(),
                successors: instance
                    .precedences
                    .iter()
                    .filter(|&&(a, _)| a == i)
                    .map(|&(_, b)| b + 1)
                    .collect(),
            })
            .collect();
        let requests = (0..instance.num_activities())
            .flat_map(|i| {
                instance.modes(i).iter().enumerate().map(move |(m, mode)| RequestRow {
                    job: i + 1,
                    mode: m + 1,
                    duration: mode.nominal_duration,
                    requests: mode.renewable_req.iter().chain(&mode.nonrenewable_req).copied().collect(),
                })
            })
            .collect();
        let availabilities = instance.renewable_caps.iter().chain(&instance.nonrenewable_caps).copied().collect();
        RawPsplibFile {
            jobs: instance.num_activities(),
            renewable: kr,
            nonrenewable: kn,
            doubly: 0,
            precedence,
            columns,
            requests,
            availabilities,
        }
    }

    /// Renders the tables in PSPLIB layout.
    pub fn to_text(&self) -> String {
        let stars = "*".repeat(72);
        let mut out = String::new();
        let _ = writeln!(out, "{stars}");
        let _ = writeln!(out, "projects                      :  1");
        let _ = writeln!(out, "jobs (incl. supersource/sink ):  {}", self.jobs);
        let _ = writeln!(out, "RESOURCES");
        let _ = writeln!(out, "  - renewable                 :  {}   R", self.renewable);
        let _ = writeln!(out, "  - nonrenewable              :  {}   N", self.nonrenewable);
        let _ = writeln!(out, "  - doubly constrained        :  {}   D", self.doubly);
        let _ = writeln!(out, "{stars}");
        let _ = writeln!(out, "PRECEDENCE RELATIONS:");
        let _ = writeln!(out, "jobnr.    #modes  #successors   successors");
        for row in &self.precedence {
            let mut line = format!("{:>4}{:>9}{:>11}", row.job, row.modes, row.successors.len());
            for (idx, s) in row.successors.iter().enumerate() {
                let width = if idx == 0 { 12 } else { 4 };
                let _ = write!(line, "{s:>width$}");
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "{stars}");
        let _ = writeln!(out, "REQUESTS/DURATIONS:");
        let header: String = self.columns.iter().map(|(k, n)| format!("  {} {}", k.marker(), n)).collect();
        let _ = writeln!(out, "jobnr. mode duration{header}");
        let _ = writeln!(out, "{}", "-".repeat(72));
        let mut last_job = None;
        for row in &self.requests {
            let job = if last_job == Some(row.job) { String::new() } else { row.job.to_string() };
            last_job = Some(row.job);
            let mut line = format!("{:>3}{:>7}{:>6}", job, row.mode, row.duration);
            for (idx, r) in row.requests.iter().enumerate() {
                let width = if idx == 0 { 8 } else { 5 };
                let _ = write!(line, "{r:>width$}");
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "{stars}");
        let _ = writeln!(out, "RESOURCEAVAILABILITIES:");
        let _ = writeln!(out, "{header}");
        let values: String = self.availabilities.iter().map(|v| format!("{v:>5}")).collect();
        let _ = writeln!(out, " {values}");
        let _ = writeln!(out, "{stars}");
        out
    }
}

/// Parses a PSPLIB `.mm` file into an instance with zero deviations.
pub fn parse_mm(text: &str) -> Result<Instance, PsplibError> {
    RawPsplibFile::parse(text)?.to_instance()
}

/// Sets `d̂ = ⌊factor · d̄⌋` on every mode of every non-dummy activity.
///
/// The factor is given as an exact fraction `numerator / denominator`.
pub fn apply_deviation_rule(instance: &Instance, factor: DeviationFactor) -> Instance {
    let mut out = instance.clone();
    let sink = out.sink();
    for (i, activity) in out.activities.iter_mut().enumerate() {
        if i == 0 || i == sink {
            continue;
        }
        for mode in &mut activity.modes {
            mode.max_deviation = factor.apply(mode.nominal_duration);
        }
    }
    out
}

/// Nonnegative rational deviation factor, 0.7 by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviationFactor {
    numerator: u64,
    denominator: u64,
}

impl DeviationFactor {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0, "deviation factor denominator must be positive");
        Self { numerator, denominator }
    }

    pub fn apply(self, nominal: u32) -> u32 {
        (u64::from(nominal) * self.numerator / self.denominator) as u32
    }

    pub fn as_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl std::fmt::Display for DeviationFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl Default for DeviationFactor {
    fn default() -> Self {
        Self::new(7, 10)
    }
}

impl std::str::FromStr for DeviationFactor {
    type Err = String;

    /// Accepts decimal notation (`0.7`, `1`, `0.25`) or a fraction (`7/10`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid deviation factor {s:?}");
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse::<u64>().map_err(|_| bad())?;
            let den = b.trim().parse::<u64>().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            return Ok(Self::new(num, den));
        }
        let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 9 || (whole.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        let whole = if whole.is_empty() { 0 } else { whole.parse::<u64>().map_err(|_| bad())? };
        let frac_value = if frac.is_empty() { 0 } else { frac.parse::<u64>().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        Ok(Self::new(whole * den + frac_value, den))
    }
}

/// Result of loading a directory of instances.
#[derive(Debug, Default)]
pub struct InstanceSet {
    pub instances: Vec<(String, Instance)>,
    pub failures: Vec<(String, PsplibError)>,
}

/// Parses every file in `dir` whose name matches `pattern` (`*` and `?`
/// wildcards), in lexicographic name order. Per-file parse errors are
/// collected in [`InstanceSet::failures`].
pub fn load_instance_set(dir: &Path, pattern: &str) -> Result<InstanceSet, LoadError> {
    let entries = fs::read_dir(dir).map_err(|source| LoadError::Io { path: dir.to_path_buf(), source })?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| LoadError::Io { path: dir.to_path_buf(), source })?;
        if !entry.path().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if wildcard_match(pattern, &name) {
            names.push(name);
        }
    }
    names.sort();
    let mut set = InstanceSet::default();
    for name in names {
        let path = dir.join(&name);
        let text = fs::read_to_string(&path).map_err(|source| LoadError::Io { path: path.clone(), source })?;
        match parse_mm(&text) {
            Ok(inst) => set.instances.push((name, inst)),
            Err(err) => set.failures.push((name, err)),
        }
    }
    Ok(set)
}

pub fn wildcard_match(pattern: &str, name: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let s: Vec<char> = name.chars().collect();
    let (mut pi, mut si) = (0, 0);
    let (mut star, mut mark) = (None, 0);
    while si < s.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == s[si]) {
            pi += 1;
            si += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            mark = si;
            pi += 1;
        } else if let Some(st) = star {
            pi = st + 1;
            mark += 1;
            si = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
************************************************************************
file with basedata            : test.bas
initial value random generator: 1
************************************************************************
projects                      :  1
jobs (incl. supersource/sink ):  4
horizon                       :  20
RESOURCES
  - renewable                 :  1   R
  - nonrenewable              :  1   N
  - doubly constrained        :  0   D
************************************************************************
PROJECT INFORMATION:
pronr.  #jobs rel.date duedate tardcost  MPM-Time
    1      2      0       10        3       10
************************************************************************
PRECEDENCE RELATIONS:
jobnr.    #modes  #successors   successors
   1        1          2           2   3
   2        2          1           4
   3        1          1           4
   4        1          0
************************************************************************
REQUESTS/DURATIONS:
jobnr. mode duration  R 1  N 1
------------------------------------------------------------------------
  1      1     0       0    0
  2      1     3       2    4
         2     5       1    2
  3      1    10       3    0
  4      1     0       0    0
************************************************************************
RESOURCEAVAILABILITIES:
  R 1  N 1
    4    5
************************************************************************
";

    #[test]
    fn parses_small_file() {
        let inst = parse_mm(SMALL).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.renewable_caps, vec![4]);
        assert_eq!(inst.nonrenewable_caps, vec![5]);
        assert_eq!(inst.modes(1).len(), 2);
        assert_eq!(inst.mode(1, 1), &Mode {
            nominal_duration: 5,
            max_deviation: 0,
            renewable_req: vec![1],
            nonrenewable_req: vec![2],
        });
        assert!(inst.precedences.contains(&(0, 1)));
        assert!(inst.precedences.contains(&(2, 3)));
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn deviation_rule_examples() {
        let f = DeviationFactor::default();
        assert_eq!(f.apply(10), 7);
        assert_eq!(f.apply(0), 0);
        assert_eq!(f.apply(1), 0);
        // 0.7 * 10 is 6.999... in binary floating point
        assert_eq!(((0.7f64 * 10.0).floor()) as u32, 7);
        assert_eq!(f.apply(3), 2);
        let inst = apply_deviation_rule(&parse_mm(SMALL).unwrap(), f);
        assert_eq!(inst.mode(2, 0).max_deviation, 7);
        assert_eq!(inst.mode(3, 0).max_deviation, 0);
        assert_eq!(inst.mode(1, 1).max_deviation, 3);
        assert_eq!(inst.mode(0, 0).max_deviation, 0);
    }

    #[test]
    fn factor_parsing() {
        assert_eq!("0.7".parse::<DeviationFactor>().unwrap().apply(10), 7);
        assert_eq!("7/10".parse::<DeviationFactor>().unwrap().apply(10), 7);
        assert_eq!("1".parse::<DeviationFactor>().unwrap().apply(9), 9);
        assert_eq!(".5".parse::<DeviationFactor>().unwrap().apply(9), 4);
        assert!("-0.5".parse::<DeviationFactor>().is_err());
        assert!("1/0".parse::<DeviationFactor>().is_err());
    }

    #[test]
    fn rejects_non_integer_with_line() {
        let bad = SMALL.replace("  3      1    10", "  3      1    1x");
        match parse_mm(&bad) {
            Err(PsplibError::NotAnInteger { line, token }) => {
                assert_eq!(token, "1x");
                assert_eq!(bad.lines().nth(line - 1).unwrap().trim_start().split_whitespace().nth(2), Some("1x"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_mode_count_mismatch() {
        let bad = SMALL.replace("   2        2          1", "   2        3          1");
        assert!(matches!(parse_mm(&bad), Err(PsplibError::ModeCount { job: 2, declared: 3, found: 2 })));
    }

    #[test]
    fn rejects_job_count_mismatch() {
        let bad = SMALL.replace("jobs (incl. supersource/sink ):  4", "jobs (incl. supersource/sink ):  5");
        assert!(matches!(parse_mm(&bad), Err(PsplibError::JobCount { .. })));
    }

    #[test]
    fn rejects_doubly_constrained() {
        let bad = SMALL.replace("doubly constrained        :  0", "doubly constrained        :  1");
        assert_eq!(parse_mm(&bad), Err(PsplibError::DoublyConstrained(1)));
    }

    #[test]
    fn rejects_bad_header() {
        let bad = SMALL.replace("jobnr. mode duration  R 1  N 1", "jobnr. mode duration  R 1  X 1");
        assert!(matches!(parse_mm(&bad), Err(PsplibError::ResourceColumn { .. })));
    }

    #[test]
    fn text_round_trip() {
        let raw = RawPsplibFile::parse(SMALL).unwrap();
        let again = RawPsplibFile::parse(&raw.to_text()).unwrap();
        assert_eq!(raw, again);
    }

    #[test]
    fn wildcards() {
        assert!(wildcard_match("*.mm", "j1010_1.mm"));
        assert!(wildcard_match("j10??_*.mm", "j1010_1.mm"));
        assert!(!wildcard_match("*.mm", "j1010_1.sm"));
        assert!(wildcard_match("*", ""));
    }
}
