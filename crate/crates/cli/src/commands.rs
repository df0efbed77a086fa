//! The subcommands. Each runner takes a validated configuration and an
//! output directory, writes its artifacts and returns the summary document.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use thinfilm_core::bounce::{
    classify_region, compute_separatrix, critical_point, default_matching_range, eig_pe,
    matching_solution, vbar_correction_exponent, PhasePoint, Region, SeparatrixKind,
};
use thinfilm_core::limit_analysis::{dichotomy, touchdown_constant, StableSide};
use thinfilm_core::oscillation::{analyse, OscillationReport};
use thinfilm_core::polyfamily::{
    count_roots_right, double_zero, eval_p, fitted_slope_constant, z0_root, PolyParams,
};
use thinfilm_core::shooting::{
    classify_backward, classify_grid, find_heteroclinic, heteroclinic_profile, is_banded,
    profile_residual, HeteroclinicProfile, HeteroclinicResult, ManifoldSeed, ProbeRecord, Verdict,
};
use thinfilm_core::ModelParams;

use crate::config::{
    config_hash, AsymptoticsRun, ClassifyRun, ConfigError, OscillationRun, PhaseplaneRun, PolysRun,
    RunConfig, ShootRun,
};
use crate::output::{render_csv, Cell, Meta, OutDir};

/// Why a command failed.
#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Numerical(thinfilm_core::Error),
    Io(anyhow::Error),
}

impl CommandError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable kind.
    pub fn kind(&self) -> String {
        match self {
            CommandError::Config(_) => "config".into(),
            CommandError::Numerical(e) => {
                let dbg = format!("{e:?}");
                let name: String = dbg.chars().take_while(|c| c.is_alphanumeric()).collect();
                format!("numerical.{name}")
            }
            CommandError::Io(_) => "io".into(),
        }
    }

    /// The machine-readable error document.
    pub fn to_json(&self) -> Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "{e}"),
            CommandError::Numerical(e) => write!(f, "{e}"),
            CommandError::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<thinfilm_core::Error> for CommandError {
    fn from(e: thinfilm_core::Error) -> Self {
        CommandError::Numerical(e)
    }
}

impl From<anyhow::Error> for CommandError {
    fn from(e: anyhow::Error) -> Self {
        CommandError::Io(e)
    }
}

pub type CmdResult<T> = Result<T, CommandError>;

/// Artifact metadata of a configuration.
pub fn meta_of<T: RunConfig>(cfg: &T) -> Meta {
    Meta::new(T::COMMAND, config_hash(cfg))
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize> {
    meta: &'a Meta,
    config: &'a C,
    results: Value,
    timing_seconds: f64,
    warnings: Vec<String>,
}

fn write_summary<C: Serialize>(
    out: &mut OutDir,
    meta: &Meta,
    cfg: &C,
    results: Value,
    started: Instant,
    warnings: Vec<String>,
) -> CmdResult<Value> {
    let s = Summary {
        meta,
        config: cfg,
        results,
        timing_seconds: started.elapsed().as_secs_f64(),
        warnings,
    };
    out.json("summary.json", &s)?;
    Ok(serde_json::to_value(&s).expect("summary serialises"))
}

/// Column names of the profile CSV.
pub const PROFILE_COLUMNS: [&str; 9] = ["tau", "xi", "phi", "w", "psi", "theta", "h", "dh", "d2h"];

/// Profile rows ordered by increasing `ξ`.
pub fn profile_rows(profile: &HeteroclinicProfile) -> Vec<Vec<Cell>> {
    profile
        .points
        .iter()
        .map(|p| {
            vec![
                p.tau.into(),
                p.phys.xi.into(),
                p.compact.phi.into(),
                p.compact.w.into(),
                p.compact.psi.into(),
                p.compact.theta.into(),
                p.phys.h.into(),
                p.phys.dh.into(),
                p.phys.d2h.into(),
            ]
        })
        .collect()
}

/// The profile CSV document of a heteroclinic result.
pub fn profile_csv(meta: &Meta, result: &HeteroclinicResult) -> String {
    render_csv(
        meta,
        &PROFILE_COLUMNS,
        &profile_rows(&heteroclinic_profile(result)),
    )
}

#[derive(Serialize)]
struct VerdictRecord {
    stage: usize,
    coordinate: f64,
    sigma: f64,
    verdict: Verdict,
    tau_end: f64,
    horizon: f64,
    trigger: thinfilm_core::shooting::Trigger,
}

fn verdict_records(probes: &[ProbeRecord], sigma: f64) -> Vec<VerdictRecord> {
    probes
        .iter()
        .map(|p| VerdictRecord {
            stage: p.stage,
            coordinate: p.coordinate,
            sigma,
            verdict: p.verdict,
            tau_end: p.tau_end,
            horizon: p.horizon,
            trigger: p.trigger,
        })
        .collect()
}

/// `shoot`: heteroclinic candidate, profile CSV, probe JSONL, summary.
pub fn run_shoot(cfg: &ShootRun, out_dir: &Path) -> CmdResult<Value> {
    let started = Instant::now();
    let meta = meta_of(cfg);
    let mut out = OutDir::create(out_dir)?;
    let params = ModelParams::new(cfg.a);
    let result = find_heteroclinic(&params, cfg.sigma, cfg.bracket(), &cfg.shooting)?;
    let profile = heteroclinic_profile(&result);
    let residual = profile_residual(&result, cfg.residual_points)?;
    out.csv(
        "profile.csv",
        &meta,
        &PROFILE_COLUMNS,
        &profile_rows(&profile),
    )?;
    out.jsonl(
        "verdicts.jsonl",
        &meta,
        &verdict_records(&result.probes, cfg.sigma),
    )?;
    let mut warnings = vec![];
    if !profile.tails_ok {
        warnings.push(format!(
            "tail ratios {:?} outside [0.5, 2]",
            profile.tail_ratios
        ));
    }
    let (phi_lo, phi_hi) = (result.diagnostics.phi_min, result.diagnostics.phi_max);
    let results = json!({
        "nu_bar": result.nu_bar,
        "bracket": [result.bracket.0, result.bracket.1],
        "bracket_width": result.bracket.1 - result.bracket.0,
        "orientation": [result.orientation.0, result.orientation.1],
        "stages": result.stages,
        "probes": result.probes.len(),
        "tau_span": [result.trajectory.t_start(), result.trajectory.t_end()],
        "theta_end": result.trajectory.last_state()[3],
        "phi_range": [phi_lo, phi_hi],
        "tail_ratios": [profile.tail_ratios.0, profile.tail_ratios.1],
        "profile_residual": residual,
        "profile_points": profile.points.len(),
        "diagnostics": result.diagnostics,
    });
    write_summary(&mut out, &meta, cfg, results, started, warnings)
}

/// `classify`: one verdict per `ν` of the grid.
pub fn run_classify(cfg: &ClassifyRun, out_dir: &Path) -> CmdResult<Value> {
    let started = Instant::now();
    let meta = meta_of(cfg);
    let mut out = OutDir::create(out_dir)?;
    let params = ModelParams::new(cfg.a);
    let probes = classify_grid(&cfg.seeds(), cfg.sigma, &params, &cfg.shooting)?;
    out.jsonl(
        "verdicts.jsonl",
        &meta,
        &verdict_records(&probes, cfg.sigma),
    )?;
    let verdicts: Vec<Verdict> = probes.iter().map(|p| p.verdict).collect();
    let count = |v: Verdict| verdicts.iter().filter(|x| **x == v).count();
    let banded = is_banded(&verdicts);
    let mut warnings = vec![];
    if !banded && verdicts.len() > 1 {
        warnings.push("verdicts do not form two contiguous bands".into());
    }
    let results = json!({
        "seeds": verdicts.len(),
        "blow_up": count(Verdict::BlowUp),
        "touchdown": count(Verdict::Touchdown),
        "undetermined": count(Verdict::Undetermined),
        "banded": banded,
    });
    write_summary(&mut out, &meta, cfg, results, started, warnings)
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::R1 => "R1",
        Region::R2 => "R2",
        Region::R3 => "R3",
        Region::R4 => "R4",
        Region::R5 => "R5",
        Region::OnIsocline => "isocline",
    }
}

/// `phaseplane`: separatrix tables, region grid and the `p_e` marker.
pub fn run_phaseplane(cfg: &PhaseplaneRun, out_dir: &Path) -> CmdResult<Value> {
    let started = Instant::now();
    let meta = meta_of(cfg);
    let mut out = OutDir::create(out_dir)?;
    let mut warnings = vec![];

    let vbar = compute_separatrix(SeparatrixKind::Vbar, cfg.vbar_range, cfg.vbar_nodes)?;
    let rows: Vec<Vec<Cell>> = vbar
        .samples
        .iter()
        .map(|&(u, v)| {
            vec![
                u.into(),
                v.into(),
                region_name(classify_region(&PhasePoint { u, v })).into(),
            ]
        })
        .collect();
    let r4_everywhere = rows.iter().all(|r| r[2] == Cell::from("R4"));
    out.csv("vbar.csv", &meta, &["u", "v", "region"], &rows)?;

    let vhat = compute_separatrix(SeparatrixKind::Vhat, cfg.vhat_range, cfg.vhat_nodes)?;
    let rows: Vec<Vec<Cell>> = vhat
        .samples
        .iter()
        .map(|&(u, v)| vec![u.into(), v.into()])
        .collect();
    out.csv("vhat.csv", &meta, &["u", "v"], &rows)?;

    let mut rows = vec![];
    for u in cfg.region_u.points() {
        for v in cfg.region_v.points() {
            rows.push(vec![
                u.into(),
                v.into(),
                region_name(classify_region(&PhasePoint { u, v })).into(),
            ]);
        }
    }
    out.csv("regions.csv", &meta, &["u", "v", "region"], &rows)?;

    let pe = critical_point();
    let eig = eig_pe();
    let rows = vec![vec![
        Cell::from("p_e"),
        pe.u.into(),
        pe.v.into(),
        eig.lambda_plus.re.into(),
        eig.lambda_plus.im.into(),
    ]];
    out.csv(
        "markers.csv",
        &meta,
        &["label", "u", "v", "re_lambda", "im_lambda"],
        &rows,
    )?;

    let exponent = match vbar_correction_exponent(
        &compute_separatrix(SeparatrixKind::Vbar, (-30.0, cfg.exponent_window.1), 2000)?,
        cfg.exponent_window,
    ) {
        Ok(p) => Some(p),
        Err(e) => {
            warnings.push(format!("correction exponent not fitted: {e}"));
            None
        }
    };
    let results = json!({
        "p_e": [pe.u, pe.v],
        "lambda_plus": [eig.lambda_plus.re, eig.lambda_plus.im],
        "vbar_range": [vbar.u_range.0, vbar.u_range.1],
        "vbar_in_r4_at_every_node": r4_everywhere,
        "vbar_at_minus_20": vbar.eval(-20.0),
        "vbar_correction_exponent": exponent,
        "vhat_range": [vhat.u_range.0, vhat.u_range.1],
    });
    write_summary(&mut out, &meta, cfg, results, started, warnings)
}

fn count_name(c: &thinfilm_core::polyfamily::RootCount) -> Value {
    use thinfilm_core::polyfamily::RootCount::*;
    match c {
        ZeroRoots => json!({ "case": "zero_roots" }),
        TwoRoots(a, b) => json!({ "case": "two_roots", "roots": [a, b] }),
        DoubleRoot(z) => json!({ "case": "double_root", "root": z }),
    }
}

/// `polys`: double-zero table over `M` and sampled curves at one `M`.
pub fn run_polys(cfg: &PolysRun, out_dir: &Path) -> CmdResult<Value> {
    let started = Instant::now();
    let meta = meta_of(cfg);
    let mut out = OutDir::create(out_dir)?;
    let mut rows = vec![];
    let mut worst_residual: f64 = 0.0;
    for m in cfg.m_grid() {
        let d = double_zero(m)?;
        let (z0, slope) = z0_root(&PolyParams::new(m, d.beta_star))?;
        worst_residual = worst_residual
            .max(d.residual_value.abs())
            .max(d.residual_slope.abs());
        rows.push(vec![
            m.into(),
            d.z_star.into(),
            d.beta_star.into(),
            z0.into(),
            slope.into(),
            d.residual_value.into(),
            d.residual_slope.into(),
        ]);
    }
    out.csv(
        "double_zero.csv",
        &meta,
        &[
            "m",
            "z_star",
            "beta_star",
            "z0",
            "z0_slope",
            "residual_value",
            "residual_slope",
        ],
        &rows,
    )?;

    let m = cfg.sample_m;
    let beta_star = double_zero(m)?.beta_star;
    let n = cfg.z_points;
    let (za, zb) = cfg.z_range;
    let mut rows = vec![];
    let mut counts = vec![];
    for &off in &cfg.beta_offsets {
        let p = PolyParams::new(m, beta_star + off);
        for i in 0..n {
            let z = za + (zb - za) * i as f64 / (n - 1) as f64;
            rows.push(vec![
                m.into(),
                off.into(),
                p.beta.into(),
                z.into(),
                eval_p(z, &p).value.into(),
            ]);
        }
        counts.push(json!({ "beta_offset": off, "beta": p.beta, "roots_right_of_one": count_name(&count_roots_right(&p)?) }));
    }
    out.csv(
        "samples.csv",
        &meta,
        &["m", "beta_offset", "beta", "z", "p"],
        &rows,
    )?;
    let grid: Vec<f64> = (0..=60)
        .map(|i| 10f64.powf(-3.0 + 0.1 * i as f64))
        .collect();
    let results = json!({
        "max_double_zero_residual": worst_residual,
        "sample_m": m,
        "beta_star": beta_star,
        "root_cases": counts,
        "slope_constant": fitted_slope_constant(&grid)?,
    });
    write_summary(&mut out, &meta, cfg, results, started, vec![])
}

/// `asymptotics`: limit-system fit constants and the matching amplitudes.
pub fn run_asymptotics(cfg: &AsymptoticsRun, out_dir: &Path) -> CmdResult<Value> {
    let started = Instant::now();
    let meta = meta_of(cfg);
    let mut out = OutDir::create(out_dir)?;
    let mut touchdown = vec![];
    for &o in &cfg.offsets {
        let d = dichotomy(StableSide::Minus, o, cfg.touchdown_horizon, &cfg.limit)?;
        touchdown.push(json!({
            "offset": o,
            "verdict": d.verdict,
            "tau_star": d.tau_star,
            "fit_constant": d.fit_constant,
            "fit_residual": d.fit_residual,
            "relative_error": (d.fit_constant - touchdown_constant()).abs() / touchdown_constant(),
        }));
    }
    let b = dichotomy(
        StableSide::Plus,
        cfg.blowup_offset,
        cfg.blowup_horizon,
        &cfg.limit,
    )?;
    let mut rows = vec![];
    for &k in &cfg.slopes {
        let (_, c) = matching_solution(k, default_matching_range(k))?;
        rows.push(vec![
            k.into(),
            c.amplitude_a.into(),
            (c.amplitude_a / k.powi(5)).into(),
            c.gamma_out.into(),
            c.fit_residual.into(),
        ]);
    }
    out.csv(
        "amplitude.csv",
        &meta,
        &[
            "k",
            "amplitude",
            "amplitude_over_k5",
            "gamma_out",
            "fit_residual",
        ],
        &rows,
    )?;
    let ratios: Vec<f64> = rows
        .iter()
        .filter_map(|r| {
            if let Cell::Num(x) = r[2] {
                Some(x)
            } else {
                None
            }
        })
        .collect();
    let spread = match (
        ratios.iter().cloned().reduce(f64::min),
        ratios.iter().cloned().reduce(f64::max),
    ) {
        (Some(lo), Some(hi)) => Some((hi - lo) / lo),
        _ => None,
    };
    let results = json!({
        "touchdown_target": touchdown_constant(),
        "touchdown": touchdown,
        "blowup_target": 1.0,
        "blowup": {
            "offset": cfg.blowup_offset,
            "verdict": b.verdict,
            "fit_constant": b.fit_constant,
            "fit_residual": b.fit_residual,
        },
        "amplitude_over_k5_relative_spread": spread,
    });
    out.json("asymptotics.json", &results)?;
    write_summary(&mut out, &meta, cfg, results, started, vec![])
}

/// The oscillation report of one trajectory, labelled by its source.
#[derive(Debug, Clone, Serialize)]
pub struct LabelledReport {
    pub source: String,
    pub nu: Option<f64>,
    pub verdict: Option<Verdict>,
    pub report: OscillationReport,
}

/// Runs the oscillation diagnostics on the tracked heteroclinic candidate
/// and on the detuned seeds `ν̄ + detune`.
pub fn oscillation_reports(
    cfg: &OscillationRun,
) -> CmdResult<(HeteroclinicResult, Vec<LabelledReport>)> {
    let params = ModelParams::new(cfg.a);
    let bracket = (-cfg.shooting.delta0 / 4.0, cfg.shooting.delta0 / 4.0);
    let het = find_heteroclinic(&params, cfg.sigma, bracket, &cfg.shooting)?;
    let mut reports = vec![LabelledReport {
        source: "heteroclinic".into(),
        nu: Some(het.nu_bar),
        verdict: None,
        report: analyse(&het.trajectory, cfg.prominence, cfg.deep_threshold),
    }];
    reports.extend(detuned_reports(&het, cfg)?);
    Ok((het, reports))
}

/// Oscillation reports of the seeds `ν̄ + detune` around an existing
/// candidate.
pub fn detuned_reports(
    het: &HeteroclinicResult,
    cfg: &OscillationRun,
) -> CmdResult<Vec<LabelledReport>> {
    let params = ModelParams::new(cfg.a);
    let mut reports = vec![];
    for &d in &cfg.detune {
        let nu = het.nu_bar + d;
        let o = classify_backward(
            &ManifoldSeed {
                nu,
                sigma: cfg.sigma,
            },
            &params,
            cfg.horizon,
            &cfg.shooting,
        )?;
        reports.push(LabelledReport {
            source: format!("detuned{d:+e}"),
            nu: Some(nu),
            verdict: Some(o.verdict),
            report: analyse(&o.trajectory, cfg.prominence, cfg.deep_threshold),
        });
    }
    Ok(reports)
}

/// `oscillation-report`: extrema tables and the JSON report.
pub fn run_oscillation(cfg: &OscillationRun, out_dir: &Path) -> CmdResult<Value> {
    let started = Instant::now();
    let meta = meta_of(cfg);
    let mut out = OutDir::create(out_dir)?;
    let (het, reports) = oscillation_reports(cfg)?;
    let mut rows = vec![];
    let mut warnings = vec![];
    for r in &reports {
        for &(t, p) in &r.report.sequence.maxima {
            rows.push(vec![
                r.source.clone().into(),
                "max".into(),
                t.into(),
                p.into(),
            ]);
        }
        for &(t, p) in &r.report.sequence.minima {
            rows.push(vec![
                r.source.clone().into(),
                "min".into(),
                t.into(),
                p.into(),
            ]);
        }
        if r.report.deep_maxima < 2 {
            warnings.push(format!(
                "{}: {} deep maxima (fewer than 2)",
                r.source, r.report.deep_maxima
            ));
        }
        warnings.extend(
            r.report
                .warnings
                .iter()
                .map(|w| format!("{}: {w}", r.source)),
        );
    }
    out.csv(
        "extrema.csv",
        &meta,
        &["source", "kind", "tau", "phi"],
        &rows,
    )?;
    out.json("oscillation.json", &reports)?;
    let results = json!({
        "nu_bar": het.nu_bar,
        "reports": reports.iter().map(|r| json!({
            "source": r.source,
            "nu": r.nu,
            "verdict": r.verdict,
            "maxima": r.report.sequence.maxima.len(),
            "minima": r.report.sequence.minima.len(),
            "deep_maxima": r.report.deep_maxima,
            "iteration": r.report.iteration,
        })).collect::<Vec<_>>(),
    });
    write_summary(&mut out, &meta, cfg, results, started, warnings)
}
