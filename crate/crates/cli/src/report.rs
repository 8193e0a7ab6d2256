//! Case-proportion tables and boxplot data from a finished sweep directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use trsqp_core::HessianKind;

use crate::error::{CliError, Result};
use crate::output::PROPORTION_COLUMNS;
use crate::plan::{NoiseSpec, SolverSpec};

/// Case 3 percentages above this are highlighted.
pub const CASE3_HIGHLIGHT: f64 = 25.0;

/// Pooled case counts of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionEntry {
    pub problem: String,
    pub solver: SolverSpec,
    pub noise: NoiseSpec,
    pub beta: String,
    pub counts: [usize; 3],
}

/// Reads the pooled (`seed = all`) row of every proportion file in `dir`.
pub fn read_proportions(dir: &Path) -> Result<Vec<ProportionEntry>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let mut rdr = csv::Reader::from_path(&path)?;
        let header = rdr.headers()?.clone();
        if header.iter().ne(PROPORTION_COLUMNS.iter().copied()) {
            return Err(CliError::Config(format!("{}: unexpected header", path.display())));
        }
        for rec in rdr.records() {
            let rec = rec?;
            if &rec[4] != "all" {
                continue;
            }
            let count = |i: usize| {
                rec[i]
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("{}: bad count `{}`", path.display(), &rec[i])))
            };
            out.push(ProportionEntry {
                problem: rec[0].to_string(),
                solver: rec[1].parse()?,
                noise: rec[2].parse()?,
                beta: rec[3].to_string(),
                counts: [count(6)?, count(7)?, count(8)?],
            });
        }
    }
    Ok(out)
}

fn noise_rank(n: &NoiseSpec) -> (u8, f64) {
    match *n {
        NoiseSpec::None => (0, 0.0),
        NoiseSpec::Gaussian(s) => (1, s),
        NoiseSpec::Subsample => (2, 0.0),
    }
}

fn hessian_rank(k: HessianKind) -> usize {
    HessianKind::ALL.iter().position(|&h| h == k).unwrap_or(usize::MAX)
}

/// Renders the β-schedule × Hessian-kind × σ² grid of case percentages,
/// pooling iterations over problems. Missing cells print as `—`; Case 3
/// values above [`CASE3_HIGHLIGHT`] are bold.
pub fn report_table1(entries: &[ProportionEntry]) -> String {
    let mut noises: Vec<NoiseSpec> = Vec::new();
    for e in entries.iter().filter(|e| e.solver.hessian().is_some()) {
        if !noises.contains(&e.noise) {
            noises.push(e.noise);
        }
    }
    noises.sort_by(|a, b| {
        let (ra, rb) = (noise_rank(a), noise_rank(b));
        ra.0.cmp(&rb.0).then(ra.1.total_cmp(&rb.1))
    });

    let mut grid: BTreeMap<(String, usize), BTreeMap<String, [usize; 3]>> = BTreeMap::new();
    let mut rows: BTreeSet<(String, usize)> = BTreeSet::new();
    for e in entries {
        let Some(kind) = e.solver.hessian() else { continue };
        let row = (e.beta.clone(), hessian_rank(kind));
        rows.insert(row.clone());
        let acc = grid.entry(row).or_default().entry(e.noise.label()).or_insert([0; 3]);
        for (a, c) in acc.iter_mut().zip(e.counts) {
            *a += c;
        }
    }

    let mut out = String::from("| β_k | B_k |");
    for n in &noises {
        out += &format!(" σ²={} case 1 | case 2 | case 3 |", n.label());
    }
    out += "\n|---|---|";
    for _ in &noises {
        out += "---:|---:|---:|";
    }
    out.push('\n');
    for row in &rows {
        let kind = HessianKind::ALL[row.1];
        out += &format!("| {} | {} |", row.0, display_kind(kind));
        for n in &noises {
            match grid.get(row).and_then(|m| m.get(&n.label())) {
                Some(c) if c.iter().sum::<usize>() > 0 => {
                    let total: usize = c.iter().sum();
                    for (i, v) in c.iter().enumerate() {
                        let pct = 100.0 * *v as f64 / total as f64;
                        if i == 2 && pct > CASE3_HIGHLIGHT {
                            out += &format!(" **{pct:.1}** |");
                        } else {
                            out += &format!(" {pct:.1} |");
                        }
                    }
                }
                _ => out += " — | — | — |",
            }
        }
        out.push('\n');
    }
    out
}

fn display_kind(k: HessianKind) -> &'static str {
    match k {
        HessianKind::Id => "Id",
        HessianKind::Sr1 => "SR1",
        HessianKind::EstH => "EstH",
        HessianKind::AveH => "AveH",
    }
}

/// One row per run with its final KKT residual, from `summary.json`.
pub fn boxplot_csv(summary_json: &str) -> Result<String> {
    let v: serde_json::Value = serde_json::from_str(summary_json)?;
    let cells = v["cells"]
        .as_array()
        .ok_or_else(|| CliError::Config("summary.json has no cells".into()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["problem", "solver", "noise", "beta", "seed", "status", "final_kkt"])?;
    for c in cells {
        let field = |k: &str| c[k].as_str().unwrap_or_default().to_string();
        for r in c["runs"].as_array().into_iter().flatten() {
            let kkt = r["final_kkt"].as_f64().map_or("NaN".to_string(), |x| x.to_string());
            w.write_record([
                field("problem"),
                field("solver"),
                field("noise"),
                field("beta"),
                r["seed"].to_string(),
                r["status"].as_str().unwrap_or_default().to_string(),
                kkt,
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `table1.md` and `boxplot.csv` into a sweep directory and returns
/// the table.
pub fn write_report(dir: &Path) -> Result<String> {
    let prop_dir = dir.join("proportions");
    let entries = if prop_dir.is_dir() {
        read_proportions(&prop_dir)?
    } else {
        Vec::new()
    };
    let table = report_table1(&entries);
    fs::write(dir.join("table1.md"), &table)?;
    let summary = dir.join("summary.json");
    if summary.is_file() {
        fs::write(dir.join("boxplot.csv"), boxplot_csv(&fs::read_to_string(summary)?)?)?;
    }
    Ok(table)
}
