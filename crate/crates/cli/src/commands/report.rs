use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use phee_core::metrics::{f_test_variance, render_fold_table, FTest, FoldRow, FoldSummary, RowValues, Tail};
use serde::Serialize;

use super::evaluate::EvaluationFile;
use crate::config::RunConfig;
use crate::io::{create_dir, parse_serde, write_json, write_run_config, write_text};

const COMPARED: [&str; 2] = ["overall.em_f1", "overall.token_f1"];

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// LABEL=PATH to a report.json from evaluate; repeat a label to group runs.
    #[arg(long = "run", value_name = "LABEL=PATH", required = true, value_parser = parse_pair)]
    pub runs: Vec<(String, String)>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Two labels whose run-to-run variances are compared.
    #[arg(long, value_name = "LABEL", num_args = 1)]
    pub compare: Vec<String>,
    /// two-sided | upper.
    #[arg(long, value_parser = parse_serde::<Tail>)]
    pub tail: Option<Tail>,
    /// LABEL=N, the average number of training cases for a row.
    #[arg(long, value_name = "LABEL=N", value_parser = parse_pair)]
    pub cases: Vec<(String, String)>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected LABEL=VALUE, got {s:?}")),
    }
}

#[derive(Serialize)]
struct GroupOut<'a> {
    label: &'a str,
    runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a FoldSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<&'a BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cases: Option<f64>,
}

#[derive(Serialize)]
struct Comparison<'a> {
    a: &'a str,
    b: &'a str,
    tests: BTreeMap<&'static str, FTest>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<()> {
    if let Some(t) = args.tail {
        cfg.report.tail = t;
    }
    cfg.validate()?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<BTreeMap<String, f64>>> = BTreeMap::new();
    for (label, path) in &args.runs {
        let file = EvaluationFile::load(path.as_ref())?;
        if !groups.contains_key(label) {
            order.push(label.clone());
        }
        groups.entry(label.clone()).or_default().push(file.evaluation.metrics());
    }
    let mut cases = BTreeMap::new();
    for (label, n) in &args.cases {
        if !groups.contains_key(label) {
            bail!("--cases {label}={n}: no run has that label");
        }
        let v: f64 = n.parse().map_err(|_| anyhow::anyhow!("--cases {label}={n}: not a number"))?;
        cases.insert(label.as_str(), v);
    }
    let summaries: BTreeMap<&str, FoldSummary> = groups
        .iter()
        .filter(|(_, runs)| runs.len() > 1)
        .map(|(l, runs)| Ok((l.as_str(), FoldSummary::from_metrics(runs)?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut out_groups = Vec::new();
    for label in &order {
        let runs = &groups[label];
        let summary = summaries.get(label.as_str());
        let values = match summary {
            Some(s) => RowValues::Folds(s),
            None => RowValues::Single(&runs[0]),
        };
        let c = cases.get(label.as_str()).copied();
        rows.push(FoldRow { label, values, cases: c });
        out_groups.push(GroupOut {
            label,
            runs: runs.len(),
            summary,
            metrics: if summary.is_none() { Some(&runs[0]) } else { None },
            cases: c,
        });
    }
    let mut text = render_fold_table(&rows);

    create_dir(&args.out)?;
    if !args.compare.is_empty() {
        let [a, b] = args.compare.as_slice() else {
            bail!("--compare takes exactly two labels, got {}", args.compare.len());
        };
        let mut tests = BTreeMap::new();
        for metric in COMPARED {
            let values = |label: &str| -> Result<Vec<f64>> {
                let Some(runs) = groups.get(label) else { bail!("--compare {label}: no run has that label") };
                Ok(runs.iter().map(|r| r[metric]).collect())
            };
            tests.insert(metric, f_test_variance(&values(a)?, &values(b)?, cfg.report.tail)?);
        }
        text.push('\n');
        for (metric, t) in &tests {
            text.push_str(&format!(
                "F-test {a} vs {b} on {metric}: F = {:.4} (df {}, {}), p = {:.4} ({})\n",
                t.f,
                t.df_num,
                t.df_den,
                t.p,
                match t.tail {
                    Tail::TwoSided => "two-sided",
                    Tail::Upper => "upper tail",
                }
            ));
        }
        write_json(&args.out.join("f_test.json"), &Comparison { a, b, tests })?;
    }

    write_text(&args.out.join("report.txt"), &text)?;
    write_json(&args.out.join("report.json"), &out_groups)?;
    write_run_config(&args.out, "report", &args, &cfg)?;
    print!("{text}");
    Ok(())
}
