//! One function per command. Each writes its files into the output directory
//! and returns their names.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::json;

use rvfield::alignment::field::burn_in_length;
use rvfield::alignment::{
    check_e_prime, connected_clusters, gumbel_check, gumbel_params, heatmap_export, lundberg_solve,
    sample_cluster_q, score_field, simulate_scores, tilt, validate_model, FieldMode, GumbelParams,
    McConfig, ScoreModel,
};
use rvfield::anchoring::{estimate_theta_anchored, palm_check, AnchorKind};
use rvfield::blocks::{
    ai_bounds, anticlustering_diagnostic, empirical_intensity, make_blocks, B3Status, TestFunction,
};
use rvfield::lattice::cheb_ball;
use rvfield::tailproc::{collect_tail_samples, quantile_level, write_tail_samples};
use rvfield::{rng, ClusterShape, MaModel, MultiIndex};

use crate::config::{Config, Mode};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    SimulateField,
    TailEstimate,
    ThetaAnchored,
    PalmCheck,
    BlocksDiagnose,
    AlignValidate,
    AlignConstants,
    AlignGumbelCheck,
    AlignClusterSample,
    AlignPvalue,
    Heatmap,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }

    fn uses_score_model(self) -> bool {
        matches!(
            self,
            Command::AlignValidate
                | Command::AlignConstants
                | Command::AlignGumbelCheck
                | Command::AlignClusterSample
                | Command::AlignPvalue
                | Command::Heatmap
        )
    }
}

pub(crate) enum Model {
    Ma(MaModel),
    Score(ScoreModel),
}

impl Model {
    pub(crate) fn load(cmd: Command, cfg: &Config) -> Result<(Self, String), CliError> {
        let path = cfg
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("no model file given".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let model = match cmd {
            // either kind of model
            Command::BlocksDiagnose => match MaModel::from_toml(&text) {
                Ok(m) => Model::Ma(m),
                Err(e) => {
                    Model::Score(ScoreModel::from_toml(&text).map_err(|_| CliError::from(e))?)
                }
            },
            c if c.uses_score_model() => Model::Score(ScoreModel::from_toml(&text)?),
            _ => Model::Ma(MaModel::from_toml(&text)?),
        };
        Ok((model, text))
    }
}

/// Output directory plus the list of files written so far.
pub(crate) struct Sink {
    dir: PathBuf,
    pub(crate) written: Vec<String>,
}

impl Sink {
    pub(crate) fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub(crate) fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn csv(&mut self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        Ok(csv::Writer::from_writer(self.file(name)?))
    }

    pub(crate) fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = self.file(name)?;
        f.write_all(body.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| CliError::io(&path, e))
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).expect("json serializes");
        body.push('\n');
        self.text(name, &body)
    }
}

pub(crate) fn dispatch(
    cmd: Command,
    cfg: &Config,
    seed: u64,
    model: &Model,
    sink: &mut Sink,
) -> Result<(), CliError> {
    match (cmd, model) {
        (Command::SimulateField, Model::Ma(m)) => simulate_field(cfg, seed, m, sink),
        (Command::TailEstimate, Model::Ma(m)) => tail_estimate(cfg, seed, m, sink),
        (Command::ThetaAnchored, Model::Ma(m)) => theta_anchored(cfg, seed, m, sink),
        (Command::PalmCheck, Model::Ma(m)) => palm(cfg, seed, m, sink),
        (Command::BlocksDiagnose, Model::Ma(m)) => blocks_diagnose(cfg, seed, m, sink),
        (Command::BlocksDiagnose, Model::Score(m)) => score_blocks(cfg, seed, m, sink),
        (Command::AlignValidate, Model::Score(m)) => align_validate(cfg, m, sink),
        (Command::AlignConstants, Model::Score(m)) => align_constants(cfg, seed, m, sink),
        (Command::AlignGumbelCheck, Model::Score(m)) => align_gumbel_check(cfg, seed, m, sink),
        (Command::AlignClusterSample, Model::Score(m)) => align_cluster_sample(cfg, seed, m, sink),
        (Command::AlignPvalue, Model::Score(m)) => align_pvalue(cfg, seed, m, sink),
        (Command::Heatmap, Model::Score(m)) => heatmap(cfg, seed, m, sink),
        _ => unreachable!("model kind follows the command"),
    }
}

fn simulate_field(cfg: &Config, seed: u64, m: &MaModel, sink: &mut Sink) -> Result<(), CliError> {
    let w = m.sample_window(&cfg.field.extent, seed)?;
    let mut out = sink.csv("field.csv")?;
    let mut header: Vec<String> = (1..=w.dim()).map(|a| format!("index_{a}")).collect();
    header.push("value".into());
    out.write_record(&header)?;
    for (lin, v) in w.values().iter().enumerate() {
        let mut row: Vec<String> = w
            .position(lin)
            .coords()
            .iter()
            .map(|c| c.to_string())
            .collect();
        row.push(v.to_string());
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn checked_quantiles(cfg: &Config) -> Result<&[f64], CliError> {
    let q = &cfg.field.quantiles;
    if q.is_empty() || q.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(CliError::Config(format!(
            "quantiles {q:?} must be nonempty and inside (0, 1)"
        )));
    }
    Ok(q)
}

fn tail_estimate(cfg: &Config, seed: u64, m: &MaModel, sink: &mut Sink) -> Result<(), CliError> {
    let quantiles = checked_quantiles(cfg)?;
    let w = m.sample_window(&cfg.field.extent, seed)?;
    let mut lags: Vec<MultiIndex> = match &cfg.tail.lags {
        Some(l) if l.iter().any(|c| c.is_empty()) => {
            return Err(CliError::Config("empty lag".into()))
        }
        Some(l) => l.iter().map(|c| MultiIndex::new(c.clone())).collect(),
        None => cheb_ball(m.dim(), 2),
    };
    let origin = MultiIndex::origin(m.dim());
    if !lags.contains(&origin) {
        lags.push(origin);
    }
    lags.sort();
    lags.dedup();
    let mut ladder = Vec::new();
    for &q in quantiles {
        let u = quantile_level(&w, q);
        let samples = collect_tail_samples(&w, u, &lags)?;
        write_tail_samples(
            sink.file(&format!("tail_samples_q{q}.csv"))?,
            &samples,
            &lags,
        )?;
        ladder.push((q, u, samples));
    }
    let mut out = sink.csv("tail_ladder.csv")?;
    out.write_record([
        "quantile",
        "level",
        "samples",
        "lag",
        "mean_ratio",
        "mean_abs_ratio",
        "frac_abs_ratio_gt_half",
    ])?;
    for (q, u, samples) in &ladder {
        let n = samples.len().max(1) as f64;
        for lag in &lags {
            let r: Vec<f64> = samples.iter().map(|s| s.ratio(lag)).collect();
            out.write_record([
                q.to_string(),
                u.to_string(),
                samples.len().to_string(),
                lag.to_string(),
                (r.iter().sum::<f64>() / n).to_string(),
                (r.iter().map(|x| x.abs()).sum::<f64>() / n).to_string(),
                (r.iter().filter(|x| x.abs() > 0.5).count() as f64 / n).to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn anchor_kinds(cfg: &Config) -> Result<Vec<AnchorKind>, CliError> {
    cfg.anchoring
        .kinds
        .iter()
        .map(|k| {
            k.parse::<AnchorKind>()
                .map_err(|_| CliError::Config(format!("unknown anchor kind {k:?}")))
        })
        .collect()
}

fn theta_anchored(cfg: &Config, seed: u64, m: &MaModel, sink: &mut Sink) -> Result<(), CliError> {
    let kinds = anchor_kinds(cfg)?;
    let quantiles = checked_quantiles(cfg)?;
    let w = m.sample_window(&cfg.field.extent, seed)?;
    let s = m.support_radius().max(1);
    let mut radii = cfg
        .anchoring
        .radii
        .clone()
        .unwrap_or_else(|| vec![s, 2 * s, 5 * s, 10 * s]);
    radii.sort_unstable();
    radii.dedup();
    let mut out = sink.csv("theta_anchored.csv")?;
    out.write_record([
        "quantile",
        "anchor",
        "level",
        "radius",
        "theta",
        "theta_se",
        "centers",
        "anchored",
        "mean_cluster_size",
        "theta_x_mean_size",
        "theta_x_mean_size_se",
    ])?;
    for &q in quantiles {
        let u = quantile_level(&w, q);
        for &radius in &radii {
            for &kind in &kinds {
                let e = estimate_theta_anchored(&w, u, radius, kind)?;
                out.write_record([
                    q.to_string(),
                    e.kind.name().to_string(),
                    e.level.to_string(),
                    e.radius.to_string(),
                    e.theta.to_string(),
                    e.se.to_string(),
                    e.n_centers.to_string(),
                    e.n_anchored.to_string(),
                    e.mean_cluster_size.to_string(),
                    e.reciprocal.to_string(),
                    e.reciprocal_se.to_string(),
                ])?;
            }
        }
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn palm(cfg: &Config, seed: u64, m: &MaModel, sink: &mut Sink) -> Result<(), CliError> {
    let level = cfg.palm.level;
    if !(level >= 0.0 && level.is_finite()) {
        return Err(CliError::Config(format!(
            "palm level {level} must be finite and nonnegative"
        )));
    }
    let law = m.tail_law();
    let sampler = law.sampler();
    let ext = m.extremal_objects();
    let dim = m.dim();
    let r = palm_check(
        |r| ClusterShape::canonicalize(dim, sampler.tail(r)).expect("tail field is nonzero"),
        |r| ext.sample_z(r),
        ext.theta,
        |x| f64::from(u8::from(x.norm() > level)),
        cfg.replicates,
        seed,
    );
    sink.json(
        "palm.json",
        &json!({
            "level": level,
            "replicates": cfg.replicates,
            "theta": ext.theta,
            "tail_mean": r.lhs,
            "tail_mean_se": r.lhs_se,
            "anchored_mean": r.rhs,
            "anchored_mean_se": r.rhs_se,
        }),
    )
}

fn blocks_diagnose(cfg: &Config, seed: u64, m: &MaModel, sink: &mut Sink) -> Result<(), CliError> {
    let b = &cfg.blocks;
    let d = m.dim();
    let r = b.r.unwrap_or((b.n as f64).sqrt().ceil() as usize);
    let grid = make_blocks(b.n, r, d)?;
    let a_n = m.normalizing_level(b.n);
    let f = match b.test_function.as_str() {
        "norm_ramp" => TestFunction::NormRamp { eps: b.test_eps },
        "position_weighted" => TestFunction::PositionWeighted { eps: b.test_eps },
        other => return Err(CliError::Config(format!("unknown test function {other:?}"))),
    };
    let extent = vec![b.n; d];
    let windows = (0..cfg.replicates as u64)
        .map(|k| m.sample_window_with(&extent, &mut rng::stream(seed, k)))
        .collect::<Result<Vec<_>, _>>()?;
    if windows.is_empty() {
        return Err(CliError::Config(
            "blocks-diagnose needs at least one replicate".into(),
        ));
    }
    let maxima = windows
        .iter()
        .map(|w| grid.block_maxima(w))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = sink.csv("intensity.csv")?;
    out.write_record([
        "u_over_a_n",
        "blocks_x_exceedance_prob",
        "se",
        "exceeding_blocks",
        "low_count",
    ])?;
    for row in empirical_intensity(&maxima, &grid, a_n, &b.u_ladder)? {
        out.write_record([
            row.u.to_string(),
            row.estimate.to_string(),
            row.se.to_string(),
            row.exceeding_blocks.to_string(),
            row.low_count.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;

    let level = quantile_level(&windows[0], b.anticlustering_quantile);
    let r_ladder = b.r_ladder.clone().unwrap_or_else(|| vec![r]);
    let m_ladder = b
        .m_ladder
        .clone()
        .unwrap_or_else(|| vec![5 * m.support_radius().max(1)]);
    let mut out = sink.csv("anticlustering.csv")?;
    out.write_record(["level", "r", "m", "far_exceedance_prob", "se", "centers"])?;
    for row in anticlustering_diagnostic(&windows, level, &r_ladder, &m_ladder)? {
        out.write_record([
            level.to_string(),
            row.r.to_string(),
            row.m.to_string(),
            row.estimate.to_string(),
            row.se.to_string(),
            row.n_centers.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;

    let rows = ai_bounds(
        &windows,
        &grid,
        a_n,
        &b.eps_ladder,
        &f,
        b.rho,
        Some(m.dependence_range()),
    )?;
    let mut out = sink.csv("ai_bounds.csv")?;
    out.write_record(["eps_over_a_n", "b1", "b1_se", "b2", "b2_se", "b3", "f_sum"])?;
    for row in rows {
        let b3 = match row.b3 {
            B3Status::ExactZero { .. } => "exact_zero",
            B3Status::NotComputed => "not_computed",
        };
        out.write_record([
            row.eps.to_string(),
            row.b1.to_string(),
            row.b1_se.to_string(),
            row.b2.to_string(),
            row.b2_se.to_string(),
            b3.to_string(),
            row.f_sum.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    sink.json(
        "blocks_summary.json",
        &json!({
            "n": b.n,
            "r": r,
            "blocks_per_axis": grid.per_axis(),
            "a_n": a_n,
            "replicates": cfg.replicates,
            "dependence_range": m.dependence_range(),
        }),
    )
}

/// Block intensity of `exp(theta* S)` on score fields, whose tail index is 1;
/// the level is `a_n = C n^2` and the limit is `theta / u`.
fn score_blocks(cfg: &Config, seed: u64, m: &ScoreModel, sink: &mut Sink) -> Result<(), CliError> {
    validate_model(m)?;
    let p = params_for(cfg, seed, m, sink)?;
    let mode = field_mode(cfg, m, p.theta_star)?;
    let n = cfg.alignment.n;
    let mut sides = cfg.blocks.score_r.clone().unwrap_or_else(|| {
        let l = (n as f64).ln();
        vec![
            (l * l).ceil() as usize,
            (n as f64).powf(0.25).ceil() as usize,
        ]
    });
    sides.sort_unstable();
    sides.dedup();
    let grids = sides
        .iter()
        .map(|&r| make_blocks(n, r, 2))
        .collect::<Result<Vec<_>, _>>()?;
    let mut maxima: Vec<Vec<Vec<f64>>> = vec![Vec::new(); grids.len()];
    for k in 0..cfg.replicates as u64 {
        let w = simulate_scores(m, n, mode, &mut rng::stream(seed.wrapping_add(1), k))?.window;
        for (g, grid) in grids.iter().enumerate() {
            let mx = grid.block_maxima(&w)?;
            maxima[g].push(mx.into_iter().map(|s| (p.theta_star * s).exp()).collect());
        }
    }
    let a_n = p.c * (n as f64).powi(2);
    let mut out = sink.csv("score_intensity.csv")?;
    out.write_record([
        "r",
        "u_over_a_n",
        "blocks_x_exceedance_prob",
        "se",
        "exceeding_blocks",
        "low_count",
        "limit",
    ])?;
    for (grid, mx) in grids.iter().zip(&maxima) {
        for row in empirical_intensity(mx, grid, a_n, &cfg.blocks.u_ladder)? {
            out.write_record([
                grid.side().to_string(),
                row.u.to_string(),
                row.estimate.to_string(),
                row.se.to_string(),
                row.exceeding_blocks.to_string(),
                row.low_count.to_string(),
                (p.theta / row.u).to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn align_validate(cfg: &Config, m: &ScoreModel, sink: &mut Sink) -> Result<(), CliError> {
    let report = validate_model(m)?;
    let theta_star = lundberg_solve(m, cfg.alignment.tol.min(1e-12))?;
    let e = check_e_prime(m, &tilt(m, theta_star))?;
    sink.json(
        "validation.json",
        &json!({
            "drift": report.drift,
            "positive_mass": report.positive_mass,
            "lattice": report.lattice,
            "lattice_span": report.span,
            "theta_star": theta_star,
            "entropy_condition": { "holds": e.holds, "lhs": e.lhs, "rhs": e.rhs, "margin": e.margin },
        }),
    )
}

fn mc_config(cfg: &Config, seed: u64) -> McConfig {
    let a = &cfg.alignment;
    McConfig {
        theta_reps: a.theta_reps,
        c_reps: a.c_reps,
        c_probe: a.c_probe,
        tol: a.tol,
        seed,
    }
}

/// Parameters from `alignment.params` when given, else estimated and written.
fn params_for(
    cfg: &Config,
    seed: u64,
    m: &ScoreModel,
    sink: &mut Sink,
) -> Result<GumbelParams, CliError> {
    match &cfg.alignment.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Ok(GumbelParams::from_json(&text)?)
        }
        None => {
            validate_model(m)?;
            let p = gumbel_params(m, &mc_config(cfg, seed))?;
            sink.text("gumbel_params.json", &(p.to_json() + "\n"))?;
            Ok(p)
        }
    }
}

fn align_constants(
    cfg: &Config,
    seed: u64,
    m: &ScoreModel,
    sink: &mut Sink,
) -> Result<(), CliError> {
    validate_model(m)?;
    let p = gumbel_params(m, &mc_config(cfg, seed))?;
    sink.text("gumbel_params.json", &(p.to_json() + "\n"))
}

fn field_mode(cfg: &Config, m: &ScoreModel, theta_star: f64) -> Result<FieldMode, CliError> {
    Ok(match cfg.alignment.mode {
        Mode::Truncated => FieldMode::Truncated,
        Mode::Stationary => {
            let tol = cfg.alignment.burn_in_tol;
            if !(tol > 0.0 && tol < 1.0) {
                return Err(CliError::Config(format!(
                    "burn-in tolerance {tol} outside (0, 1)"
                )));
            }
            FieldMode::Stationary {
                burn_in: burn_in_length(m.drift(), theta_star, tol),
            }
        }
    })
}

fn align_gumbel_check(
    cfg: &Config,
    seed: u64,
    m: &ScoreModel,
    sink: &mut Sink,
) -> Result<(), CliError> {
    validate_model(m)?;
    let p = params_for(cfg, seed, m, sink)?;
    let mode = field_mode(cfg, m, p.theta_star)?;
    let n = cfg.alignment.n;
    let check = gumbel_check(m, &p, n, cfg.replicates, mode, seed.wrapping_add(1));
    let mut out = sink.csv("gumbel_quantiles.csv")?;
    out.write_record([
        "p",
        "empirical_centered_quantile",
        "gumbel_quantile",
        "empirical_cdf_at_gumbel_quantile",
    ])?;
    for row in &check.table {
        out.write_record([
            row.p.to_string(),
            row.empirical.to_string(),
            row.gumbel.to_string(),
            row.empirical_cdf.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    let mut out = sink.csv("centered_maxima.csv")?;
    out.write_record(["replicate", "max_score_minus_centering"])?;
    for (k, x) in check.centered.iter().enumerate() {
        out.write_record([k.to_string(), x.to_string()])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    sink.json(
        "gumbel_summary.json",
        &json!({
            "n": n,
            "replicates": check.reps,
            "ks": check.ks,
            "lattice_warning": check.lattice_warning,
            "burn_in": mode.burn_in(),
            "centering": p.centering(n),
        }),
    )
}

fn align_cluster_sample(
    cfg: &Config,
    seed: u64,
    m: &ScoreModel,
    sink: &mut Sink,
) -> Result<(), CliError> {
    validate_model(m)?;
    let theta_star = lundberg_solve(m, 1e-12)?;
    let s = sample_cluster_q(m, theta_star, cfg.alignment.tol, cfg.alignment.count, seed)?;
    let mut out = sink.csv("cluster_paths.csv")?;
    out.write_record(["path", "step", "partial_sum"])?;
    for (k, path) in s.paths.iter().enumerate() {
        let lo = -(path.backward.len() as i64);
        for step in lo..=path.forward.len() as i64 {
            let v = path.at(step).expect("step in stored range");
            out.write_record([k.to_string(), step.to_string(), v.to_string()])?;
        }
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    sink.json(
        "cluster_summary.json",
        &json!({
            "theta_star": theta_star,
            "paths": s.paths.len(),
            "attempts": s.attempts,
            "acceptance": s.acceptance,
            "acceptance_se": s.acceptance_se,
        }),
    )
}

fn align_pvalue(cfg: &Config, seed: u64, m: &ScoreModel, sink: &mut Sink) -> Result<(), CliError> {
    let p = params_for(cfg, seed, m, sink)?;
    let n = cfg.alignment.n;
    if n < 2 {
        return Err(CliError::Config(format!(
            "sequence length {n} must be at least 2"
        )));
    }
    let mut out = sink.csv("pvalues.csv")?;
    out.write_record(["score", "n", "score_minus_centering", "pvalue"])?;
    for &s in &cfg.alignment.scores {
        out.write_record([
            s.to_string(),
            n.to_string(),
            (s - p.centering(n)).to_string(),
            p.pvalue(s, n).to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn heatmap(cfg: &Config, seed: u64, m: &ScoreModel, sink: &mut Sink) -> Result<(), CliError> {
    validate_model(m)?;
    let theta_star = lundberg_solve(m, 1e-12)?;
    let mode = field_mode(cfg, m, theta_star)?;
    let w = score_field(m, cfg.alignment.n, seed, mode)?;
    let threshold = cfg.alignment.threshold.unwrap_or_else(|| {
        quantile_level(&w, cfg.field.quantiles.iter().copied().fold(0.0, f64::max))
    });
    let cells = heatmap_export(&w, threshold)?;
    rvfield::alignment::field::write_heatmap(sink.file("heatmap.csv")?, &cells)?;
    let mut out = sink.csv("heatmap_clusters.csv")?;
    out.write_record(["cells", "diagonal_spread", "max_score"])?;
    for c in connected_clusters(&cells) {
        out.write_record([
            c.size.to_string(),
            c.diagonal_spread.to_string(),
            c.max_score.to_string(),
        ])?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}
