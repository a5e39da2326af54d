//! Text formats: key-value records, CSV tables and profile literals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::ExperimentReport;
use crate::shapes::Profile;
use crate::{Error, Result};

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Key-value lines `key = value` in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    entries: Vec<(String, String)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn real(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, fmt_real(value))
    }

    pub fn reals(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let joined: Vec<String> = values.iter().map(|v| fmt_real(*v)).collect();
        self.text(key, joined.join(","))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().fold(String::new(), |mut out, (k, v)| {
            let _ = writeln!(out, "{k} = {v}");
            out
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Self::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
            r.text(k, v);
        }
        Ok(r)
    }
}

/// CSV text with a header row; reals use [`fmt_real`].
pub fn csv(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_real(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Two-column `x1,f` table over the full period.
pub fn profile_csv(p: &Profile) -> String {
    let h = p.cell_width();
    let rows: Vec<Vec<f64>> = p
        .full_period()
        .iter()
        .enumerate()
        .map(|(i, f)| vec![-0.5 + (i as f64 + 0.5) * h, *f])
        .collect();
    csv(&["x1", "f"], &rows)
}

/// Report table preceded by a `# statement` comment line.
pub fn report_csv(r: &ExperimentReport) -> String {
    let cols: Vec<&str> = r.columns.iter().map(String::as_str).collect();
    format!("# {}\n{}", r.statement, csv(&cols, &r.rows))
}

/// Summary record of a report: fits, residuals and checks.
pub fn report_record(r: &ExperimentReport) -> Record {
    let mut rec = Record::new();
    rec.text("experiment", &r.name).text("statement", &r.statement);
    for f in &r.fits {
        rec.real(&format!("fit.{}", f.name), f.value);
        if !f.residuals.is_empty() {
            rec.reals(&format!("fit.{}.residuals", f.name), &f.residuals);
        }
    }
    for c in &r.checks {
        rec.text(&format!("check.{}", c.name), if c.passed { "pass" } else { "fail" });
        rec.text(&format!("check.{}.detail", c.name), &c.detail);
    }
    rec.text("passed", r.passed());
    rec
}

fn parse_real(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{what} `{s}`: {e}")))
}

/// Profile literal: `cyl:R`, `ball:R`, `file:PATH` or `rand:SEED:M`.
/// `cyl` and `ball` use `m` cells.
pub fn parse_profile(literal: &str, n: usize, m: usize) -> Result<Profile> {
    let (kind, rest) = literal
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("profile literal `{literal}` has no `kind:` prefix")))?;
    match kind {
        "cyl" => Profile::constant(n, m, parse_real(rest, "radius")?),
        "ball" => Profile::ball(n, m, parse_real(rest, "radius")?),
        "file" => read_profile_file(Path::new(rest), n),
        "rand" => {
            let (seed, cells) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("`rand:{rest}` needs SEED:M")))?;
            let seed = seed
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("seed `{seed}`: {e}")))?;
            let cells = cells
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("cell count `{cells}`: {e}")))?;
            if cells == 0 {
                return Err(Error::Parse("random profile needs at least one cell".into()));
            }
            Profile::random(n, cells, seed, 0.25)
        }
        other => Err(Error::Parse(format!("unknown profile kind `{other}`"))),
    }
}

/// Reads lines `x1 f` with `x1` strictly increasing in `(0, 1/2]`. Each value
/// holds on `(previous x1, x1]`; the profile has one cell per line, sampled
/// at the cell centres.
pub fn read_profile_file(path: &Path, n: usize) -> Result<Profile> {
    let text = fs::read_to_string(path)?;
    parse_profile_table(&text, n)
}

pub fn parse_profile_table(text: &str, n: usize) -> Result<Profile> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(x), Some(f), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("line {}: expected two columns", i + 1)));
        };
        let (x, f) = (parse_real(x, "x1")?, parse_real(f, "f")?);
        if !(x > 0.0 && x <= 0.5) {
            return Err(Error::Parse(format!("line {}: x1 = {x} outside (0, 1/2]", i + 1)));
        }
        if points.last().is_some_and(|(px, _)| *px >= x) {
            return Err(Error::Parse(format!("line {}: x1 not strictly increasing", i + 1)));
        }
        points.push((x, f));
    }
    if points.is_empty() {
        return Err(Error::Parse("profile file has no data".into()));
    }
    let m = points.len();
    let values = (0..m)
        .map(|i| {
            let x = (i as f64 + 0.5) / (2 * m) as f64;
            points.iter().find(|(px, _)| *px >= x).map_or(0.0, |(_, f)| *f)
        })
        .collect();
    Profile::new(n, values)
}

/// Writes `contents` to `dir/name`, creating the directory.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reals_have_seventeen_significant_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(f64::NAN), "NaN");
    }

    #[test]
    fn record_keeps_order_and_round_trips() {
        let mut r = Record::new();
        r.real("value", 1.5).text("method", "quadrature").real("error", 2e-9);
        let text = r.render();
        assert_eq!(text.lines().next(), Some("value = 1.5000000000000000e0"));
        assert_eq!(Record::parse(&text).unwrap(), r);
    }

    #[test]
    fn literals() {
        assert_eq!(parse_profile("cyl:0.25", 3, 8).unwrap(), Profile::constant(3, 8, 0.25).unwrap());
        assert_eq!(parse_profile("ball:0.2", 2, 8).unwrap(), Profile::ball(2, 8, 0.2).unwrap());
        assert_eq!(
            parse_profile("rand:7:12", 3, 8).unwrap(),
            Profile::random(3, 12, 7, 0.25).unwrap()
        );
        for bad in ["cyl", "cyl:x", "sphere:1", "rand:1", "rand:a:3", "rand:1:0", "cyl:-1"] {
            assert!(parse_profile(bad, 3, 8).is_err(), "{bad}");
        }
    }

    #[test]
    fn profile_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        fs::write(&path, "# edges\n0.125 0.3\n0.25 0.2\n0.375 0.1\n0.5 0\n").unwrap();
        let p = parse_profile(&format!("file:{}", path.display()), 3, 99).unwrap();
        assert_eq!(p.values(), &[0.3, 0.2, 0.1, 0.0]);
        assert!(parse_profile_table("0.2 1\n0.1 2\n", 3).is_err());
        assert!(parse_profile_table("0.6 1\n", 3).is_err());
        assert!(parse_profile_table("0.25 1\n0.5 2\n", 3).is_err());
        assert!(parse_profile_table("0.1\n", 3).is_err());
        assert!(parse_profile_table("", 3).is_err());
    }

    #[test]
    fn csv_layout() {
        let t = csv(&["a", "b"], &[vec![1.0, 2.0]]);
        assert_eq!(t, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
        let p = Profile::constant(2, 2, 0.1).unwrap();
        assert_eq!(profile_csv(&p).lines().count(), 5);
    }

    proptest! {
        #[test]
        fn formatted_reals_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }
}
