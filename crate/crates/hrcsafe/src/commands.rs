//! Subcommands. Each writes its artifacts into the configured output
//! directory and returns the computed values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hrcsafe_core::collision::PerceptionProfile;
use hrcsafe_core::metrics::{
    calibrate_margins, compare_grids, compare_reports, heatmap, safety_report, Calibration, CalibrationTarget,
    Decrease, DecreaseGrid, HeatmapGrid, Interval, Method, ReportComparison, SafetyReport,
};
use hrcsafe_core::simkit::{
    coco_thresholds, evaluate, generate_scenario, run_attentive, run_baseline, to_profile, EvalSummary, RunOutput,
};

use crate::checks::{self, Check};
use crate::config::{Overrides, RunConfig, TpModeConfig};
use crate::output::{num, sha256_hex, table, Provenance, Sink};
use crate::{derive_seed, Error};

/// A validated config with the overrides applied.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub prov: Provenance,
}

impl Run {
    pub fn from_text(text: &str, overrides: &Overrides) -> Result<Self, Error> {
        let mut config = RunConfig::parse(text)?;
        config.apply(overrides);
        config.validate()?;
        let mut hashed = text.to_owned();
        hashed.push('\n');
        hashed.push_str(&overrides.canonical());
        let prov = Provenance {
            config_sha256: sha256_hex(hashed.as_bytes()),
            seed: config.seed,
        };
        Ok(Self { config, prov })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, overrides)
    }

    fn sink(&self) -> Result<Sink, Error> {
        Sink::new(&self.config.out_dir, self.prov.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSafety {
    pub name: String,
    pub profile: PerceptionProfile,
    pub report: SafetyReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub baseline: String,
    pub candidate: String,
    pub comparison: ReportComparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyOutcome {
    pub profiles: Vec<ProfileSafety>,
    pub comparisons: Vec<ComparisonRow>,
    pub calibration: Option<Calibration>,
}

impl SafetyOutcome {
    pub fn get(&self, name: &str) -> Option<&ProfileSafety> {
        self.profiles.iter().find(|p| p.name == name)
    }
}

fn decrease_cell(d: Decrease) -> String {
    match d {
        Decrease::Percent(p) => num(p),
        Decrease::CandidateWorse => "-inf".into(),
    }
}

fn stderr_cell(s: Option<f64>) -> String {
    s.map(num).unwrap_or_default()
}

fn method_comments(run: &Run) -> Result<Vec<String>, Error> {
    let c = &run.config;
    let m = c.margins()?;
    let i = c.integration()?;
    let (cs, ds) = (c.space_c()?, c.space_d()?);
    Ok(vec![
        format!("margins s_a={} s_b={} (m)", num(m.s_a()), num(m.s_b())),
        format!(
            "integration method={} resolution={}",
            match i.method {
                Method::Grid => "grid",
                Method::MonteCarlo => "monte-carlo",
            },
            i.resolution
        ),
        format!(
            "critical space u=[{}, {}] m/s r_lower={} m horizon={} s",
            num(cs.u.lo),
            num(cs.u.hi),
            num(cs.r_lower),
            num(cs.horizon)
        ),
        format!(
            "applicable space alpha=[{}, {}] rad r=[{}, {}] m u=[{}, {}] m/s",
            num(ds.alpha.lo),
            num(ds.alpha.hi),
            num(ds.r.lo),
            num(ds.r.hi),
            num(ds.u.lo),
            num(ds.u.hi)
        ),
        format!("tp_mode={}", tp_mode_name(c.tp_mode)),
    ])
}

fn tp_mode_name(m: TpModeConfig) -> &'static str {
    match m {
        TpModeConfig::Total => "total",
        TpModeConfig::Inference => "inference",
    }
}

fn safety_on(
    run: &Run,
    sink: &mut Sink,
    named: &[(String, PerceptionProfile)],
    pairs: &[(String, String)],
    targets: Option<(&[CalibrationTarget], Interval, usize)>,
) -> Result<SafetyOutcome, Error> {
    let c = &run.config;
    let margins = c.margins()?;
    let (cs, ds, integ) = (c.space_c()?, c.space_d()?, c.integration()?);
    let mut profiles = Vec::with_capacity(named.len());
    for (name, p) in named {
        profiles.push(ProfileSafety {
            name: name.clone(),
            profile: *p,
            report: safety_report(p, margins, &cs, &ds, &integ)?,
        });
    }
    let find = |n: &str| profiles.iter().find(|p| p.name == n).expect("names resolved by validation");
    let mut comparisons = Vec::with_capacity(pairs.len());
    for (b, k) in pairs {
        comparisons.push(ComparisonRow {
            baseline: b.clone(),
            candidate: k.clone(),
            comparison: compare_reports(&find(b).report, &find(k).report)?,
        });
    }
    let calibration = match targets {
        Some((t, search, steps)) => Some(calibrate_margins(t, search, steps, &cs, &ds, &integ)?),
        None => None,
    };

    let comments = method_comments(run)?;
    let header = [
        "profile", "t_p_ms", "t_r_ms", "recall", "iou", "ccp", "ccp_stderr", "acp", "acp_stderr",
    ];
    let rows: Vec<Vec<String>> = profiles
        .iter()
        .map(|p| {
            vec![
                p.name.clone(),
                num(p.profile.t_p * 1000.0),
                num(p.profile.t_r * 1000.0),
                num(p.profile.recall),
                num(p.profile.iou),
                num(p.report.ccp.value),
                stderr_cell(p.report.ccp.stderr),
                num(p.report.acp.value),
                stderr_cell(p.report.acp.stderr),
            ]
        })
        .collect();
    sink.csv("safety.csv", &comments, &header, &rows)?;

    let mut text = String::new();
    for line in &comments {
        let _ = writeln!(text, "# {line}");
    }
    text.push('\n');
    let shown: Vec<Vec<String>> = profiles
        .iter()
        .map(|p| {
            vec![
                p.name.clone(),
                format!("{:.3}", p.profile.t_p * 1000.0),
                format!("{:.5}", p.profile.recall),
                format!("{:.3}", p.profile.iou),
                format!("{:.4e}", p.report.ccp.value),
                format!("{:.4e}", p.report.acp.value),
            ]
        })
        .collect();
    text.push_str(&table(&["profile", "T_p (ms)", "recall", "IoU", "CCP", "ACP"], &shown));

    if !comparisons.is_empty() {
        let header = ["baseline", "candidate", "ccp_decrease_pct", "acp_decrease_pct"];
        let rows: Vec<Vec<String>> = comparisons
            .iter()
            .map(|r| {
                vec![
                    r.baseline.clone(),
                    r.candidate.clone(),
                    decrease_cell(r.comparison.ccp),
                    decrease_cell(r.comparison.acp),
                ]
            })
            .collect();
        sink.csv("safety_decrease.csv", &comments, &header, &rows)?;
        let pct = |d: Decrease| match d {
            Decrease::Percent(p) => format!("{p:.3}%"),
            Decrease::CandidateWorse => "-inf".into(),
        };
        let shown: Vec<Vec<String>> = comparisons
            .iter()
            .map(|r| vec![r.baseline.clone(), r.candidate.clone(), pct(r.comparison.ccp), pct(r.comparison.acp)])
            .collect();
        text.push('\n');
        text.push_str(&table(&["baseline", "candidate", "CCP decrease", "ACP decrease"], &shown));
    }

    if let Some(cal) = &calibration {
        let rows: Vec<Vec<String>> = cal.scan.iter().map(|(s, f)| vec![num(*s), num(*f)]).collect();
        let notes = vec![
            format!("best_margins_sum={} residual={}", num(cal.margins_sum), num(cal.residual)),
            "objective is the sum of squared relative errors against the targets".into(),
        ];
        sink.csv("calibration.csv", &notes, &["margins_sum", "objective"], &rows)?;
        let _ = writeln!(
            text,
            "\ncalibrated margins sum {:.4} m (residual {:.4e})",
            cal.margins_sum, cal.residual
        );
    }
    sink.text("safety.txt", &text)?;

    Ok(SafetyOutcome {
        profiles,
        comparisons,
        calibration,
    })
}

/// CCP and ACP of every configured profile, decreases of every configured
/// comparison, and a margins calibration when targets are configured.
pub fn cmd_safety(run: &Run) -> Result<SafetyOutcome, Error> {
    let c = &run.config;
    if c.profiles.is_empty() {
        return Err(Error::Usage("safety needs at least one [[profiles]] entry".into()));
    }
    let named = c
        .profiles
        .iter()
        .map(|p| Ok((p.name.clone(), c.profile(&p.name)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let pairs: Vec<(String, String)> = c
        .comparisons
        .iter()
        .map(|p| (p.baseline.clone(), p.candidate.clone()))
        .collect();
    let targets = match &c.calibration {
        Some(cal) => {
            let t = cal
                .targets
                .iter()
                .map(|t| {
                    Ok(CalibrationTarget {
                        profile: c.profile(&t.profile)?,
                        ccp: t.ccp,
                        acp: t.acp,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let search = Interval::new(cal.search[0], cal.search[1])?;
            Some((t, search, cal.steps))
        }
        None => None,
    };
    let mut sink = run.sink()?;
    safety_on(
        run,
        &mut sink,
        &named,
        &pairs,
        targets.as_ref().map(|(t, s, n)| (t.as_slice(), *s, *n)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOutcome {
    pub baseline: HeatmapGrid,
    pub candidate: HeatmapGrid,
    pub decrease: DecreaseGrid,
}

fn grid_rows(r_axis: &[f64], cells: impl Fn(usize, usize) -> String, nu: usize) -> Vec<Vec<String>> {
    r_axis
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut row = Vec::with_capacity(nu + 1);
            row.push(num(r));
            row.extend((0..nu).map(|j| cells(i, j)));
            row
        })
        .collect()
}

fn heatmap_on(
    run: &Run,
    sink: &mut Sink,
    base: (&str, PerceptionProfile),
    cand: (&str, PerceptionProfile),
) -> Result<HeatmapOutcome, Error> {
    let c = &run.config;
    let h = &c.heatmap;
    let margins = c.margins()?;
    let (r_axis, u_axis) = (h.r.values(), h.u.values());
    let baseline = heatmap(&base.1, margins, &r_axis, &u_axis, h.alpha)?;
    let candidate = heatmap(&cand.1, margins, &r_axis, &u_axis, h.alpha)?;
    let decrease = compare_grids(&baseline, &candidate)?;

    let mut header_cells = vec!["r_m\\u_mps".to_owned()];
    header_cells.extend(u_axis.iter().map(|u| num(*u)));
    let header: Vec<&str> = header_cells.iter().map(|s| s.as_str()).collect();
    let axes = [
        format!("axis r: from={} to={} points={} (m, rows)", num(h.r.from), num(h.r.to), h.r.points),
        format!("axis u: from={} to={} points={} (m/s, columns)", num(h.u.from), num(h.u.to), h.u.points),
        format!("alpha={} rad", num(h.alpha)),
        format!("margins s_a={} s_b={} (m)", num(margins.s_a()), num(margins.s_b())),
    ];
    let nu = u_axis.len();
    for (file, what, grid) in [
        ("heatmap_baseline.csv", base.0, &baseline),
        ("heatmap_candidate.csv", cand.0, &candidate),
    ] {
        let mut comments = axes.to_vec();
        comments.push(format!("collision probability of profile `{what}`"));
        let rows = grid_rows(&r_axis, |i, j| num(grid.get(i, j)), nu);
        sink.csv(file, &comments, &header, &rows)?;
    }
    let mut comments = axes.to_vec();
    comments.push(format!("decrease percentage from `{}` to `{}`", base.0, cand.0));
    let rows = grid_rows(&r_axis, |i, j| decrease_cell(decrease.get(i, j)), nu);
    sink.csv("heatmap_decrease.csv", &comments, &header, &rows)?;
    Ok(HeatmapOutcome {
        baseline,
        candidate,
        decrease,
    })
}

/// Collision probability grids of the configured baseline and candidate
/// profiles and their decrease percentage.
pub fn cmd_heatmap(run: &Run) -> Result<HeatmapOutcome, Error> {
    let c = &run.config;
    let (Some(b), Some(k)) = (&c.heatmap.baseline, &c.heatmap.candidate) else {
        return Err(Error::Usage("heatmap needs `heatmap.baseline` and `heatmap.candidate`".into()));
    };
    let mut sink = run.sink()?;
    heatmap_on(run, &mut sink, (b, c.profile(b)?), (k, c.profile(k)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub baseline: RunOutput,
    pub attentive: RunOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub scenarios: Vec<ScenarioOutcome>,
    /// Pooled over every frame of every scenario.
    pub baseline: EvalSummary,
    pub attentive: EvalSummary,
}

fn change_pct(base: f64, ours: f64) -> Option<f64> {
    (base != 0.0).then(|| 100.0 * (ours - base) / base)
}

fn summary_metrics(s: &EvalSummary) -> [(&'static str, f64); 7] {
    [
        ("inference_ms", s.inference_ms),
        ("total_ms", s.total_ms),
        ("overhead_ms", s.overhead_ms),
        ("ar", s.ar),
        ("iou", s.mean_iou),
        ("ap50", s.ap50),
        ("ap75", s.ap75),
    ]
}

fn simulate_on(run: &Run, sink: &mut Sink) -> Result<SimulateOutcome, Error> {
    let c = &run.config;
    if c.scenarios.is_empty() {
        return Err(Error::Usage("simulate needs at least one [[scenarios]] entry".into()));
    }
    let spec = c.detector()?;
    let attentive = c.attentive()?;
    let mut scenarios = Vec::with_capacity(c.scenarios.len());
    for (i, sc) in c.scenarios.iter().enumerate() {
        let scenario = generate_scenario(&c.scenario(i)?)?;
        let i = i as u64;
        scenarios.push(ScenarioOutcome {
            name: sc.name.clone(),
            baseline: run_baseline(&scenario, &spec, derive_seed(c.seed, i, 1))?,
            attentive: run_attentive(&scenario, &spec, &attentive, derive_seed(c.seed, i, 2))?,
        });
    }

    let mut gt = Vec::new();
    let (mut base_frames, mut ours_frames) = (Vec::new(), Vec::new());
    for (i, s) in scenarios.iter().enumerate() {
        gt.extend(generate_scenario(&c.scenario(i)?)?.gt_track);
        base_frames.extend(s.baseline.frames.iter().cloned());
        ours_frames.extend(s.attentive.frames.iter().cloned());
    }
    let thresholds = coco_thresholds();
    let baseline = evaluate(&base_frames, &gt, &thresholds)?;
    let pooled_ours = evaluate(&ours_frames, &gt, &thresholds)?;

    let cell = |v: Option<f64>| v.map(num).unwrap_or_else(|| "n/a".into());
    let rows: Vec<Vec<String>> = summary_metrics(&baseline)
        .iter()
        .zip(summary_metrics(&pooled_ours))
        .map(|((name, b), (_, o))| vec![name.to_string(), num(*b), num(o), cell(change_pct(*b, o))])
        .collect();
    let notes = vec![
        format!("{} scenarios, {} frames, pooled", scenarios.len(), baseline.frames),
        "times in ms, ar/ap in percent".into(),
    ];
    sink.csv("simulate.csv", &notes, &["metric", "baseline", "ours", "change_pct"], &rows)?;

    let mut header = vec!["scenario", "variant"];
    header.extend(summary_metrics(&baseline).iter().map(|m| m.0));
    header.push("frames");
    let mut rows = Vec::new();
    for s in &scenarios {
        for (variant, out) in [("baseline", &s.baseline), ("ours", &s.attentive)] {
            let mut row = vec![s.name.clone(), variant.to_owned()];
            row.extend(summary_metrics(&out.summary).iter().map(|m| num(m.1)));
            row.push(out.summary.frames.to_string());
            rows.push(row);
        }
    }
    sink.csv("simulate_scenarios.csv", &[], &header, &rows)?;

    let mut rows = Vec::new();
    for s in &scenarios {
        for (variant, out) in [("baseline", &s.baseline), ("ours", &s.attentive)] {
            for f in &out.frames {
                let region = f
                    .region
                    .map(|b| format!("{} {} {} {}", num(b.x), num(b.y), num(b.w), num(b.h)))
                    .unwrap_or_else(|| "full".into());
                let sizes = f.model_sizes.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
                let best = f.best().map(|d| num(d.confidence)).unwrap_or_default();
                rows.push(vec![
                    s.name.clone(),
                    variant.to_owned(),
                    f.index.to_string(),
                    region,
                    sizes,
                    num(f.inference * 1000.0),
                    num(f.overhead * 1000.0),
                    f.detections.len().to_string(),
                    best,
                ]);
            }
        }
    }
    let header = [
        "scenario", "variant", "frame", "region", "model_sizes", "inference_ms", "overhead_ms", "detections",
        "best_confidence",
    ];
    sink.csv("simulate_frames.csv", &[], &header, &rows)?;

    let shown: Vec<Vec<String>> = summary_metrics(&baseline)
        .iter()
        .zip(summary_metrics(&pooled_ours))
        .map(|((name, b), (_, o))| {
            vec![
                name.to_string(),
                format!("{b:.3}"),
                format!("{o:.3}"),
                change_pct(*b, o).map(|p| format!("{p:.3}%")).unwrap_or_else(|| "n/a".into()),
            ]
        })
        .collect();
    let text = format!(
        "{} scenarios, {} frames\n\n{}",
        scenarios.len(),
        baseline.frames,
        table(&["metric", "baseline", "ours", "change"], &shown)
    );
    sink.text("simulate.txt", &text)?;

    Ok(SimulateOutcome {
        scenarios,
        baseline,
        attentive: pooled_ours,
    })
}

/// Baseline and attentive pipelines over every configured scenario.
pub fn cmd_simulate(run: &Run) -> Result<SimulateOutcome, Error> {
    let mut sink = run.sink()?;
    simulate_on(run, &mut sink)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub simulate: SimulateOutcome,
    pub safety: SafetyOutcome,
    pub heatmap: HeatmapOutcome,
    /// Relative path and SHA-256 of every artifact, in write order.
    pub files: Vec<(String, String)>,
}

/// Simulation, derived perception profiles, their safety metrics and
/// heatmaps, and a manifest of everything written.
pub fn cmd_report(run: &Run) -> Result<ReportOutcome, Error> {
    let c = &run.config;
    let mut sink = run.sink()?;
    let simulate = simulate_on(run, &mut sink)?;
    let t_r = c.response_latency.secs();
    let mode = c.tp_mode.into();
    let named = vec![
        ("baseline".to_owned(), to_profile(&simulate.baseline, t_r, mode)?),
        ("attentive".to_owned(), to_profile(&simulate.attentive, t_r, mode)?),
    ];
    let pairs = vec![("baseline".to_owned(), "attentive".to_owned())];
    let safety = safety_on(run, &mut sink, &named, &pairs, None)?;
    let heatmap = heatmap_on(run, &mut sink, ("baseline", named[0].1), ("attentive", named[1].1))?;

    let mut files = Vec::new();
    for rel in sink.written() {
        let path = sink.path(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        files.push((rel.display().to_string(), sha256_hex(&bytes)));
    }
    let mut manifest = format!(
        "version = \"{}\"\nseed = {}\nconfig_sha256 = \"{}\"\ntp_mode = \"{}\"\n",
        env!("CARGO_PKG_VERSION"),
        run.prov.seed,
        run.prov.config_sha256,
        tp_mode_name(c.tp_mode),
    );
    for (path, hash) in &files {
        let _ = write!(manifest, "\n[[files]]\npath = \"{path}\"\nsha256 = \"{hash}\"\n");
    }
    sink.text("manifest.toml", &manifest)?;
    Ok(ReportOutcome {
        simulate,
        safety,
        heatmap,
        files,
    })
}

/// Every brute-force validator at interactive sizes, plus estimator
/// agreement for each configured profile.
pub fn cmd_oracle(run: &Run) -> Result<Vec<Check>, Error> {
    let c = &run.config;
    let seed = c.seed;
    let mut out = vec![
        checks::closed_form_vs_frames(200, 20_000, derive_seed(seed, 0, 10)),
        checks::travel_distance_vs_sweep(200, 1e-5, derive_seed(seed, 0, 11)),
        checks::iou_vs_boxes(1000, derive_seed(seed, 0, 12)),
        checks::evaluator_vs_reference(50, derive_seed(seed, 0, 13)),
    ];
    let margins = c.margins()?;
    let d = c.space_d()?;
    for p in &c.profiles {
        let a = checks::acp_estimators_agree(&c.profile(&p.name)?, margins, &d, 64, 100_000, seed)?;
        out.push(Check {
            name: format!("grid vs monte-carlo ACP for `{}`", p.name),
            passed: a.agree,
            detail: format!(
                "grid {:.4e}, monte-carlo {:.4e} (stderr {:.2e}), tolerance {:.2e}",
                a.grid, a.monte_carlo, a.stderr, a.tolerance
            ),
        });
    }
    Ok(out)
}
