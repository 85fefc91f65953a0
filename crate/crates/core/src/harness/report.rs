//! Study reports: frozen CSV schema, metadata sidecar and gnuplot files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const REPORT_COLUMNS: &str = "h,E_h,f_h,rescaled_energy,limit_energy,gap,order";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub h: f64,
    pub e_h: f64,
    pub f_h: f64,
    pub rescaled_energy: f64,
    pub limit_energy: f64,
    pub gap: f64,
    /// empty for the first row and for vanishing gaps
    pub order: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<ReportRow>,
    /// canonical configuration text
    pub config_echo: String,
}

pub fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Invariant(format!("cannot write {}: {e}", path.display()))
}

/// Observed order `log(gap₀/gap₁)/log(h₀/h₁)`.
pub fn observed_order(h0: f64, gap0: f64, h1: f64, gap1: f64) -> Option<f64> {
    if gap0 > 0.0 && gap1 > 0.0 && h0 != h1 {
        Some((gap0 / gap1).ln() / (h0 / h1).ln())
    } else {
        None
    }
}

impl StudyReport {
    pub fn new(config_echo: String) -> Self {
        StudyReport {
            rows: Vec::new(),
            config_echo,
        }
    }

    /// Appends a row, filling in the gap and the order against the previous row.
    pub fn push(&mut self, h: f64, e_h: f64, f_h: f64, rescaled: f64, limit: f64) {
        let gap = (rescaled - limit).abs();
        let order = self
            .rows
            .last()
            .and_then(|p| observed_order(p.h, p.gap, h, gap));
        self.rows.push(ReportRow {
            h,
            e_h,
            f_h,
            rescaled_energy: rescaled,
            limit_energy: limit,
            gap,
            order,
        });
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.h, r.e_h, r.f_h, r.rescaled_energy, r.limit_energy, r.gap, order
            );
        }
        s
    }

    /// Parses CSV written by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| Error::Config(format!("report header: {e}")))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != REPORT_COLUMNS {
            return Err(Error::Config(format!("unexpected report columns {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Config(format!("report row: {e}")))?;
            let f = |k: usize| -> Result<f64> {
                rec[k]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number {:?}", &rec[k])))
            };
            rows.push(ReportRow {
                h: f(0)?,
                e_h: f(1)?,
                f_h: f(2)?,
                rescaled_energy: f(3)?,
                limit_energy: f(4)?,
                gap: f(5)?,
                order: if rec[6].is_empty() { None } else { Some(f(6)?) },
            });
        }
        Ok(StudyReport {
            rows,
            config_echo: String::new(),
        })
    }

    /// Writes `<stem>.csv`, `<stem>.meta`, `<stem>.dat` and `<stem>.gp` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let put = |name: String, body: String| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| io_err(&p, e))
        };
        put(format!("{stem}.csv"), self.to_csv())?;
        put(format!("{stem}.meta"), metadata(&self.config_echo))?;
        let mut dat = String::from("# h gap\n");
        for r in &self.rows {
            let _ = writeln!(dat, "{:e} {:e}", r.h, r.gap);
        }
        put(format!("{stem}.dat"), dat)?;
        put(
            format!("{stem}.gp"),
            format!(
                "set terminal pngcairo size 800,600\n\
                 set output '{stem}.png'\n\
                 set logscale xy\n\
                 set xlabel 'h'\n\
                 set ylabel 'gap'\n\
                 set key top left\n\
                 plot '{stem}.dat' using 1:2 with linespoints title 'gap', \\\n\
                 \x20    '{stem}.dat' using 1:($1*{c:e}) with lines dashtype 2 title 'O(h)'\n",
                c = self.rows.first().map_or(1.0, |r| if r.h > 0.0 { r.gap / r.h } else { 1.0 }),
            ),
        )
    }
}

/// Version, thread count, timestamp and the configuration echo.
pub fn metadata(config_echo: &str) -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# threads {}", rayon::current_num_threads());
    let _ = writeln!(s, "# unix_time {secs}");
    s.push_str(config_echo);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_and_csv_round_trip() {
        let mut r = StudyReport::new(String::new());
        r.push(0.1, 1e-4, 0.1, 1.2, 1.0);
        r.push(0.05, 6.25e-6, 0.05, 1.05, 1.0);
        r.push(0.025, 3.9e-7, 0.025, 1.0, 1.0);
        assert_eq!(r.rows[0].order, None);
        assert!((r.rows[1].order.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.rows[2].order, None);
        let back = StudyReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.rows, r.rows);
        assert!(r.to_csv().starts_with(REPORT_COLUMNS));
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = StudyReport::new("study.kind = recovery\n".into());
        r.push(0.1, 1e-4, 0.1, 1.0, 0.5);
        r.write(dir.path(), "recovery").unwrap();
        for ext in ["csv", "meta", "dat", "gp"] {
            assert!(dir.path().join(format!("recovery.{ext}")).exists());
        }
        let meta = fs::read_to_string(dir.path().join("recovery.meta")).unwrap();
        assert!(meta.contains("study.kind = recovery"));
    }
}
