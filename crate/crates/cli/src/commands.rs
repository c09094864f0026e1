use std::collections::BTreeMap;
use std::path::Path;

use fdshift_core::metrics::{self, RiskCoverageCurve};
use fdshift_core::oracle::{aurc_oracle, auroc_oracle};
use fdshift_core::precision_audit::{audit, synthesize_highconf_bundle, AuditMode};
use fdshift_core::risk_control::{ece, platt_apply, platt_fit_with, selective_risk, sgr_select, PlattOptions};
use fdshift_core::{
    compute_csf, failure_labels, load_bundle, rank_table, run_studies, save_bundle, study_scores, CsfId, FdError,
    MatrixFormat, MetricId, MetricKey, MetricReport, PredictionBundle, ShiftTag, StudyKind, StudySpec,
};
use serde_json::{json, Map, Value};

use crate::config::{ConfigFile, Emit, RunConfig};
use crate::output::{fmt_num, num, nums, slug, write_csv, write_file, write_json};
use crate::{svg, synth, AuditModeArg, CliError, Command, GlobalArgs, SynthKind};

/// Largest oracle deviation `verify` accepts.
pub const VERIFY_TOLERANCE: f64 = 1e-12;

pub fn dispatch(global: &GlobalArgs, command: Command) -> Result<(), CliError> {
    if let Command::Synth {
        kind,
        n,
        c,
        failure_rate,
        gap_low,
        gap_high,
    } = command
    {
        return cmd_synth(global, kind, n, c, failure_rate, gap_low, gap_high);
    }
    let (cfg, bundle) = load_context(global)?;
    match command {
        Command::Score { csfs } => cmd_score(&cfg, &bundle, csfs),
        Command::Evaluate { emit } => cmd_evaluate(cfg, &bundle, emit),
        Command::RcCurve { csf, study } => cmd_rc_curve(&cfg, &bundle, &csf, study.as_deref()),
        Command::Sgr {
            rstar,
            delta,
            csf,
            holdout,
        } => cmd_sgr(&cfg, &bundle, &csf, rstar, delta, holdout.as_deref()),
        Command::Calibrate {
            csf,
            bins,
            platt_smoothing,
        } => cmd_calibrate(&cfg, &bundle, &csf, bins, platt_smoothing),
        Command::PrecisionAudit { precisions, mode } => cmd_precision_audit(&cfg, &bundle, &precisions, mode),
        Command::Verify => cmd_verify(&cfg, &bundle),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn load_context(global: &GlobalArgs) -> Result<(RunConfig, PredictionBundle), CliError> {
    let file = match &global.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    let path = global
        .bundle
        .clone()
        .or_else(|| file.bundle_path.clone())
        .ok_or_else(|| CliError::Config("no bundle given: pass --bundle DIR or set bundle_path".into()))?;
    let bundle = load_bundle(&path)?;
    let cfg = RunConfig::resolve(file, global, &bundle)?;
    Ok((cfg, bundle))
}

fn iid_study() -> StudySpec {
    StudySpec {
        name: "iid".into(),
        kind: StudyKind::Standard,
        shift_filter: vec![ShiftTag::Iid],
        metrics: vec![MetricId::Aurc],
    }
}

fn softmax_json(cfg: &RunConfig) -> Value {
    json!({
        "precision": cfg.eval.softmax.precision.as_str(),
        "temperature": num(cfg.eval.softmax.temperature),
    })
}

fn cmd_score(cfg: &RunConfig, bundle: &PredictionBundle, csfs: Vec<CsfId>) -> Result<(), CliError> {
    let csfs = if csfs.is_empty() { cfg.csfs.clone() } else { csfs };
    let mut columns = Vec::with_capacity(csfs.len());
    for csf in &csfs {
        columns.push(compute_csf(bundle, csf, &cfg.eval.softmax)?.scores);
    }
    let scores: Map<String, Value> = csfs
        .iter()
        .zip(&columns)
        .map(|(csf, s)| (csf.to_string(), nums(s)))
        .collect();
    write_json(
        &cfg.output_dir.join("scores.json"),
        &json!({ "softmax": softmax_json(cfg), "n": bundle.n_samples(), "scores": scores }),
    )?;
    let names: Vec<String> = csfs.iter().map(|c| c.to_string()).collect();
    let mut header = vec!["index"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..bundle.n_samples())
        .map(|i| {
            std::iter::once(i.to_string())
                .chain(columns.iter().map(|col| fmt_num(col[i])))
                .collect()
        })
        .collect();
    write_csv(&cfg.output_dir.join("scores.csv"), &header, &rows)?;
    println!("scored {} samples with {} CSFs", bundle.n_samples(), csfs.len());
    Ok(())
}

/// AURC is reported ×10³ under `aurc`, with the raw value under `aurc_raw`.
fn metric_entries(metric: MetricId, value: f64) -> Vec<(String, f64)> {
    if metric == MetricId::Aurc {
        vec![("aurc".into(), value * 1e3), ("aurc_raw".into(), value)]
    } else {
        vec![(metric.to_string(), value)]
    }
}

pub fn report_json(cfg: &RunConfig, report: &MetricReport) -> Value {
    let ranks = rank_table(report);
    let mut studies = Map::new();
    for spec in &cfg.studies {
        let mut by_csf: BTreeMap<String, Map<String, Value>> = BTreeMap::new();
        for (key, &v) in report.values.iter().filter(|(k, _)| k.study == spec.name) {
            let entry = by_csf.entry(key.csf.to_string()).or_default();
            for (name, value) in metric_entries(key.metric, v) {
                entry.insert(name, num(value));
            }
        }
        let mut skipped: BTreeMap<String, Map<String, Value>> = BTreeMap::new();
        for (key, reason) in report.skipped.iter().filter(|(k, _)| k.study == spec.name) {
            skipped
                .entry(key.csf.to_string())
                .or_default()
                .insert(key.metric.to_string(), Value::from(reason.as_str()));
        }
        let study_ranks: Map<String, Value> = ranks
            .iter()
            .filter(|((study, _), _)| *study == spec.name)
            .map(|((_, metric), entries)| {
                let list = entries
                    .iter()
                    .map(|e| json!({ "csf": e.csf.to_string(), "rank": e.rank, "value": num(e.value) }))
                    .collect();
                (metric.to_string(), Value::Array(list))
            })
            .collect();
        let size = report.sizes.get(&spec.name).copied();
        studies.insert(
            spec.name.clone(),
            json!({
                "kind": spec.kind,
                "shift_filter": spec.shift_filter,
                "samples": size.map(|s| s.samples),
                "evaluated": size.map(|s| s.evaluated),
                "metrics": by_csf,
                "ranks": study_ranks,
                "skipped": skipped,
            }),
        );
    }
    json!({
        "softmax": softmax_json(cfg),
        "ece_bins": cfg.eval.ece_bins,
        "e_aurc_mode": cfg.eval.e_aurc_mode,
        "csfs": cfg.csfs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "studies": studies,
    })
}

pub fn report_rows(report: &MetricReport) -> Vec<Vec<String>> {
    let ranks = rank_table(report);
    let rank_of = |key: &MetricKey| {
        ranks[&(key.study.clone(), key.metric)]
            .iter()
            .find(|e| e.csf == key.csf)
            .map(|e| e.rank)
            .expect("every value is ranked")
    };
    let mut rows = Vec::new();
    for (key, &v) in &report.values {
        let rank = rank_of(key);
        for (name, value) in metric_entries(key.metric, v) {
            rows.push(vec![
                key.study.clone(),
                key.csf.to_string(),
                name,
                fmt_num(value),
                rank.to_string(),
            ]);
        }
    }
    rows
}

fn cmd_evaluate(mut cfg: RunConfig, bundle: &PredictionBundle, emit: Vec<Emit>) -> Result<(), CliError> {
    if !emit.is_empty() {
        cfg.emit = emit.into_iter().collect();
    }
    let report = run_studies(bundle, &cfg.studies, &cfg.csfs, &cfg.eval)?;
    let out = &cfg.output_dir;
    if cfg.emit.contains(&Emit::Json) {
        write_json(&out.join("report.json"), &report_json(&cfg, &report))?;
    }
    if cfg.emit.contains(&Emit::Csv) {
        write_csv(
            &out.join("report.csv"),
            &["study", "csf", "metric", "value", "rank"],
            &report_rows(&report),
        )?;
    }
    let mut plots = 0;
    if cfg.emit.contains(&Emit::Svg) {
        for spec in &cfg.studies {
            for csf in &cfg.csfs {
                let (scores, labels) = study_scores(bundle, spec, csf, &cfg.eval.softmax)?;
                let curve = match metrics::rc_curve(&scores, &labels) {
                    Ok(c) => c,
                    Err(FdError::EmptyEvaluationSet) => continue,
                    Err(e) => return Err(e.into()),
                };
                let name = format!("rc_{}_{}.svg", slug(&spec.name), slug(&csf.to_string()));
                let title = format!("{} / {}", spec.name, csf);
                write_file(&out.join(name), svg::render(&curve, &title).as_bytes())?;
                plots += 1;
            }
        }
    }
    println!(
        "{} values over {} studies, {} skipped, {} plots",
        report.values.len(),
        cfg.studies.len(),
        report.skipped.len(),
        plots
    );
    Ok(())
}

fn find_study<'a>(cfg: &'a RunConfig, name: Option<&str>) -> Result<&'a StudySpec, CliError> {
    match name {
        None => Ok(&cfg.studies[0]),
        Some(n) => cfg
            .studies
            .iter()
            .find(|s| s.name == n)
            .ok_or_else(|| CliError::Config(format!("no study named `{n}`"))),
    }
}

fn curve_json(curve: &RiskCoverageCurve) -> Value {
    json!({
        "coverages": nums(&curve.coverages),
        "risks": nums(&curve.risks),
        "weights": nums(&curve.weights),
        "aurc": num(curve.aurc()),
    })
}

fn cmd_rc_curve(cfg: &RunConfig, bundle: &PredictionBundle, csf: &CsfId, study: Option<&str>) -> Result<(), CliError> {
    let spec = find_study(cfg, study)?;
    let (scores, labels) = study_scores(bundle, spec, csf, &cfg.eval.softmax)?;
    let curve = metrics::rc_curve(&scores, &labels)?;
    let stem = format!("rc_{}_{}", slug(&spec.name), slug(&csf.to_string()));
    let rows: Vec<Vec<String>> = curve
        .coverages
        .iter()
        .zip(&curve.risks)
        .map(|(&c, &r)| vec![fmt_num(c), fmt_num(r)])
        .collect();
    write_csv(&cfg.output_dir.join(format!("{stem}.csv")), &["coverage", "risk"], &rows)?;
    let mut value = curve_json(&curve);
    value["study"] = Value::from(spec.name.as_str());
    value["csf"] = Value::from(csf.to_string());
    write_json(&cfg.output_dir.join(format!("{stem}.json")), &value)?;
    println!("{} points, aurc={}", curve.len(), fmt_num(curve.aurc()));
    Ok(())
}

fn cmd_sgr(
    cfg: &RunConfig,
    bundle: &PredictionBundle,
    csf: &CsfId,
    r_star: f64,
    delta: f64,
    holdout: Option<&Path>,
) -> Result<(), CliError> {
    let spec = iid_study();
    let (scores, labels) = study_scores(bundle, &spec, csf, &cfg.eval.softmax)?;
    let result = sgr_select(&scores, &labels.residuals, r_star, delta)?;
    let mut value = json!({
        "csf": csf.to_string(),
        "threshold": num(result.threshold),
        "risk_bound": num(result.risk_bound),
        "empirical_coverage": num(result.empirical_coverage),
        "empirical_risk": num(result.empirical_risk),
        "delta": num(result.delta),
        "r_star": num(result.r_star),
    });
    if let Some(dir) = holdout {
        let test = load_bundle(dir)?;
        let (ts, tl) = study_scores(&test, &spec, csf, &cfg.eval.softmax)?;
        let accepted = ts.iter().filter(|&&s| s >= result.threshold).count();
        value["holdout"] = json!({
            "coverage": num(accepted as f64 / ts.len() as f64),
            "risk": selective_risk(&ts, &tl.residuals, result.threshold).map(num),
        });
    }
    write_json(&cfg.output_dir.join("sgr.json"), &value)?;
    println!(
        "threshold={} coverage={} risk_bound={}",
        fmt_num(result.threshold),
        fmt_num(result.empirical_coverage),
        fmt_num(result.risk_bound)
    );
    Ok(())
}

fn cmd_calibrate(
    cfg: &RunConfig,
    bundle: &PredictionBundle,
    csf: &CsfId,
    bins: usize,
    smoothing: bool,
) -> Result<(), CliError> {
    if bins == 0 {
        return Err(CliError::Config("--bins must be positive".into()));
    }
    let (scores, labels) = study_scores(bundle, &iid_study(), csf, &cfg.eval.softmax)?;
    let residuals = &labels.residuals;
    let ece_raw = if scores.iter().all(|s| (0.0..=1.0).contains(s)) {
        Some(ece(&scores, residuals, bins)?)
    } else {
        None
    };
    let opts = PlattOptions {
        smoothing,
        ..PlattOptions::default()
    };
    let mut value = json!({
        "csf": csf.to_string(),
        "bins": bins,
        "platt_smoothing": smoothing,
        "ece_raw": ece_raw.map(num),
    });
    match platt_fit_with(&scores, residuals, &opts) {
        Ok(model) => {
            let calibrated = platt_apply(&model, &scores);
            value["platt"] = json!({ "a": num(model.a), "b": num(model.b) });
            value["ece_platt"] = num(ece(&calibrated, residuals, bins)?);
        }
        Err(e @ (FdError::PerfectSeparation(_) | FdError::DegenerateLabels(_))) => {
            value["platt"] = Value::Null;
            value["platt_error"] = Value::from(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    write_json(&cfg.output_dir.join("calibration.json"), &value)?;
    println!(
        "ece_raw={} ece_platt={}",
        ece_raw.map_or("-".into(), fmt_num),
        value["ece_platt"].as_f64().map_or("-".into(), fmt_num)
    );
    Ok(())
}

fn cmd_precision_audit(
    cfg: &RunConfig,
    bundle: &PredictionBundle,
    precisions: &[fdshift_core::Precision],
    mode: AuditModeArg,
) -> Result<(), CliError> {
    let mode = match mode {
        AuditModeArg::Quantize => AuditMode::Quantize,
        AuditModeArg::ComputeOnly => AuditMode::ComputeOnly,
    };
    let residuals = failure_labels(bundle, StudyKind::Standard)?.residuals;
    let report = audit(bundle, &residuals, precisions, cfg.eval.softmax.temperature, mode)?;
    let mut per = Map::new();
    let mut rows = Vec::new();
    for (p, s) in &report.per_precision {
        per.insert(
            p.to_string(),
            json!({
                "round_to_one_rate": num(s.round_to_one_rate),
                "round_to_one_count": s.round_to_one_count,
                "aurc": num(s.aurc),
                "auroc_f": s.auroc_f.map(num),
                "accuracy": num(s.accuracy),
            }),
        );
        rows.push(vec![
            p.to_string(),
            fmt_num(s.round_to_one_rate),
            s.round_to_one_count.to_string(),
            fmt_num(s.aurc),
            s.auroc_f.map_or(String::new(), fmt_num),
            fmt_num(s.accuracy),
        ]);
        println!(
            "{p}: round_to_one_rate={} auroc_f={} aurc={}",
            fmt_num(s.round_to_one_rate),
            s.auroc_f.map_or("-".into(), fmt_num),
            fmt_num(s.aurc)
        );
    }
    write_json(
        &cfg.output_dir.join("precision_audit.json"),
        &json!({
            "mode": report.mode,
            "temperature": num(report.temperature),
            "per_precision": per,
        }),
    )?;
    write_csv(
        &cfg.output_dir.join("precision_audit.csv"),
        &["precision", "round_to_one_rate", "round_to_one_count", "aurc", "auroc_f", "accuracy"],
        &rows,
    )
}

/// Largest deviations between the metric implementations and the oracles
/// over every (study, CSF) pair, plus the number of pairs checked.
pub fn verify(cfg: &RunConfig, bundle: &PredictionBundle) -> Result<(f64, f64, usize), CliError> {
    let (mut aurc_dev, mut auroc_dev, mut pairs) = (0.0f64, 0.0f64, 0);
    for spec in &cfg.studies {
        for csf in &cfg.csfs {
            let (scores, labels) = study_scores(bundle, spec, csf, &cfg.eval.softmax)?;
            if labels.eval_count() == 0 {
                continue;
            }
            pairs += 1;
            let fast = metrics::rc_curve(&scores, &labels)?.aurc();
            let slow = aurc_oracle(&scores, &labels.residuals, &labels.eval_mask)?;
            aurc_dev = aurc_dev.max((fast - slow).abs());

            let (masked, positive): (Vec<f64>, Vec<bool>) = (0..scores.len())
                .filter(|&i| labels.is_evaluated(i))
                .map(|i| (scores[i], labels.residuals[i] == 0))
                .unzip();
            match (metrics::auroc_f(&scores, &labels), auroc_oracle(&masked, &positive)) {
                (Ok(a), Ok(b)) => auroc_dev = auroc_dev.max((a - b).abs()),
                (Err(FdError::DegenerateLabels(_)), Err(FdError::DegenerateLabels(_))) => {}
                (Ok(_), Err(_)) | (Err(_), Ok(_)) => auroc_dev = f64::INFINITY,
                (Err(e), _) => return Err(e.into()),
            }
        }
    }
    Ok((aurc_dev, auroc_dev, pairs))
}

fn cmd_verify(cfg: &RunConfig, bundle: &PredictionBundle) -> Result<(), CliError> {
    let (aurc_dev, auroc_dev, pairs) = verify(cfg, bundle)?;
    println!("pairs_checked={pairs}");
    println!("aurc_max_dev={aurc_dev:.1e}");
    println!("auroc_max_dev={auroc_dev:.1e}");
    if aurc_dev > VERIFY_TOLERANCE || auroc_dev > VERIFY_TOLERANCE {
        return Err(CliError::Verification(format!(
            "deviation above {VERIFY_TOLERANCE:.0e} (aurc {aurc_dev:.1e}, auroc {auroc_dev:.1e})"
        )));
    }
    Ok(())
}

fn cmd_synth(
    global: &GlobalArgs,
    kind: SynthKind,
    n: usize,
    c: usize,
    failure_rate: f64,
    gap_low: f64,
    gap_high: f64,
) -> Result<(), CliError> {
    let out = global
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("synth needs --out DIR".into()))?;
    let seed = synth::env_seed().map_err(CliError::Config)?;
    let bundle = match kind {
        SynthKind::Highconf => synthesize_highconf_bundle(n, c, failure_rate, gap_low, gap_high, seed)?,
        SynthKind::Calibrated => synth::calibrated_bundle(n, c, seed)?,
    };
    save_bundle(&bundle, out, MatrixFormat::Csv)?;
    println!("wrote {} samples × {} classes to {}", n, c, out.display());
    Ok(())
}
