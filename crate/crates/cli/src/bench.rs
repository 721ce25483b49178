//! `bench`: wall-clock comparison of density similarity and RWMD.

use std::fmt::Write as _;
use std::time::Instant;

use densim::pipeline::{self, Prepared};
use densim::Error;

use crate::args::BenchArgs;
use crate::commands::{self, Finish, Ran};
use crate::error::{invalid, CliError, CliResult, StageExt};
use crate::files;
use crate::output::OutputDir;

/// Stages shorter than this are repeated and their median reported.
const REPEAT_BELOW_S: f64 = 10.0;
const REPEATS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkReport {
    pub n_docs: usize,
    pub n_features: usize,
    /// Mean number of distinct features per document, `F`.
    pub mean_unique_features: f64,
    /// Exponent `b` in `F = N_f * N_d^(-b)`; undefined for a single document.
    pub b: Option<f64>,
    pub n_points: usize,
    pub threads: usize,
    pub ds: Option<DsTimes>,
    pub rwmd: Option<RwmdTimes>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsTimes {
    pub density_s: f64,
    pub similarity_s: f64,
    pub total_s: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwmdTimes {
    /// Lower bound when `timed_out`.
    pub total_s: f64,
    pub runs: usize,
    pub timed_out: bool,
}

impl BenchmarkReport {
    /// `rwmd / ds`; a lower bound when RWMD timed out.
    pub fn ratio(&self) -> Option<f64> {
        match (&self.ds, &self.rwmd) {
            (Some(d), Some(r)) if d.total_s > 0.0 => Some(r.total_s / d.total_s),
            _ => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{v}");
        };
        row("n_docs", self.n_docs.to_string());
        row("n_features", self.n_features.to_string());
        row("mean_unique_features", format!("{:?}", self.mean_unique_features));
        row("b", self.b.map_or_else(String::new, |b| format!("{b:?}")));
        row("n_points", self.n_points.to_string());
        row("threads", self.threads.to_string());
        if let Some(d) = &self.ds {
            row("ds_density_s", format!("{:?}", d.density_s));
            row("ds_similarity_s", format!("{:?}", d.similarity_s));
            row("ds_total_s", format!("{:?}", d.total_s));
            row("ds_runs", d.runs.to_string());
        }
        if let Some(r) = &self.rwmd {
            row("rwmd_total_s", format!("{:?}", r.total_s));
            row("rwmd_runs", r.runs.to_string());
            row("rwmd_timed_out", r.timed_out.to_string());
        }
        if let Some(r) = self.ratio() {
            row("ratio", format!("{r:?}"));
        }
        s
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn corpus_stats(p: &Prepared) -> (usize, f64, Option<f64>) {
    let q = &p.queries;
    let (n_docs, nnz) = match &p.items {
        Some(i) => (q.n_docs() + i.n_docs(), q.nnz() + i.nnz()),
        None => (q.n_docs(), q.nnz()),
    };
    let f = nnz as f64 / n_docs as f64;
    let b = (n_docs > 1).then(|| (p.embedding.len() as f64 / f).ln() / (n_docs as f64).ln());
    (n_docs, f, b)
}

fn parse_methods(spec: &str) -> CliResult<(bool, bool)> {
    let mut ds = false;
    let mut rwmd = false;
    for m in spec.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        match m {
            "ds" => ds = true,
            "rwmd" => rwmd = true,
            other => return invalid(format!("unknown method {other:?} (expected ds or rwmd)")),
        }
    }
    if !ds && !rwmd {
        return invalid("no methods to benchmark");
    }
    Ok((ds, rwmd))
}

pub fn bench(a: &BenchArgs) -> Ran {
    let params = commands::ds_params(&a.ds)?;
    let limit = commands::timeout(&a.rwmd)?;
    let (run_ds, run_rwmd) = parse_methods(&a.methods)?;
    let p = commands::prepare_corpora(&a.corpus)?;
    let (n_docs, f, b) = corpus_stats(&p);
    let mut report = BenchmarkReport {
        n_docs,
        n_features: p.embedding.len(),
        mean_unique_features: f,
        b,
        n_points: params.n_points,
        threads: rayon::current_num_threads(),
        ds: None,
        rwmd: None,
    };
    let items = p.items();

    if run_ds {
        let mut runs = Vec::new();
        while runs.len() < REPEATS {
            let out = pipeline::run_ds(&p.queries, items, &p.embedding, &params).stage("density similarity")?;
            let t = out.timings;
            runs.push((t.density.as_secs_f64(), t.similarity.as_secs_f64(), t.total().as_secs_f64()));
            if runs[0].2 >= REPEAT_BELOW_S {
                break;
            }
        }
        report.ds = Some(DsTimes {
            density_s: median(runs.iter().map(|r| r.0).collect()),
            similarity_s: median(runs.iter().map(|r| r.1).collect()),
            total_s: median(runs.iter().map(|r| r.2).collect()),
            runs: runs.len(),
        });
    }

    let mut deferred = None;
    if run_rwmd {
        let variant = commands::rwmd_variant(a.rwmd.rwmd_variant);
        let mut runs = Vec::new();
        let mut timed_out = false;
        while runs.len() < REPEATS {
            let started = Instant::now();
            match pipeline::run_rwmd(&p.queries, items, &p.embedding, variant, limit) {
                Ok((_, took)) => runs.push(took.as_secs_f64()),
                Err(Error::Timeout(_)) => {
                    runs = vec![started.elapsed().as_secs_f64()];
                    timed_out = true;
                    break;
                }
                Err(e) => return Err(CliError::Stage { stage: "rwmd", source: e }),
            }
            if runs[0] >= REPEAT_BELOW_S {
                break;
            }
        }
        if timed_out {
            deferred = Some(CliError::Timeout(format!(
                "rwmd: timed out after {:.1} s; partial report written",
                runs[0]
            )));
        }
        report.rwmd = Some(RwmdTimes {
            total_s: median(runs.clone()),
            runs: runs.len(),
            timed_out,
        });
    }

    let mut out = OutputDir::create(&a.out.out)?;
    out.write_str(files::REPORT, &report.to_csv())?;
    print!("{}", report.to_csv());
    let fin = Finish {
        deferred_error: deferred,
        ..Finish::default()
    };
    Ok((out, fin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_layout_and_ratio() {
        let r = BenchmarkReport {
            n_docs: 2,
            n_features: 10,
            mean_unique_features: 5.0,
            b: Some(1.0),
            n_points: 100,
            threads: 1,
            ds: Some(DsTimes {
                density_s: 0.5,
                similarity_s: 0.25,
                total_s: 0.75,
                runs: 3,
            }),
            rwmd: Some(RwmdTimes {
                total_s: 7.5,
                runs: 3,
                timed_out: false,
            }),
        };
        assert_eq!(r.ratio(), Some(10.0));
        let csv = r.to_csv();
        assert!(csv.starts_with("key,value\nn_docs,2\n"));
        assert!(csv.ends_with("ratio,10.0\n"));
        let only_ds = BenchmarkReport { rwmd: None, ..r };
        assert_eq!(only_ds.ratio(), None);
        assert!(!only_ds.to_csv().contains("ratio"));
    }

    #[test]
    fn methods_and_median() {
        assert_eq!(parse_methods("ds,rwmd").unwrap(), (true, true));
        assert_eq!(parse_methods("rwmd").unwrap(), (false, true));
        assert!(parse_methods("").is_err());
        assert!(parse_methods("wmd").is_err());
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0]), 4.0);
    }
}
