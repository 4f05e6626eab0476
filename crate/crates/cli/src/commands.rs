use std::path::Path;

use anyhow::{anyhow, Context};
use log::info;
use ndarray::Array2;
use nescope_core::data::{load_csv, save_csv, CsvOptions, InputMatrix};
use nescope_core::loo::{
    interpolation_trajectory, landscape as loo_landscape, validate_loo, Bounds, LooContext,
    ValidateOptions,
};
use nescope_core::metrics::{
    db_index, entropy_difference, neighborhood_preservation, spearman_test, wcdr, wilks_lambda,
    MetricReport,
};
use nescope_core::scores::{
    select_perplexity as run_select, singularity_scores, EdgeSet, PerturbationScorer, ScoreReport,
    SelectConfig, SingularityMethod,
};
use nescope_core::tsne::{run_tsne_with_similarity, similarity_matrix, SimilarityMatrix};

use crate::config::{InputSource, PipelineConfig};
use crate::exit::Failure;

type CmdResult = Result<(), Failure>;

fn similarity(cfg: &PipelineConfig, x: &InputMatrix) -> anyhow::Result<SimilarityMatrix> {
    Ok(similarity_matrix(
        x,
        cfg.tsne.perplexity,
        cfg.tsne.entropy_tol,
    )?)
}

/// The embedding from `path`, or a fresh one written to `embedding.csv`.
fn embedding(
    cfg: &PipelineConfig,
    x: &InputMatrix,
    v: &SimilarityMatrix,
    path: Option<&Path>,
) -> Result<Array2<f64>, Failure> {
    match path {
        Some(p) => {
            if !p.is_file() {
                return Err(Failure::io(anyhow!(
                    "embedding file not found: {}",
                    p.display()
                )));
            }
            let y = load_csv(
                p,
                CsvOptions {
                    header: true,
                    labels: false,
                },
            )
            .with_context(|| format!("reading {}", p.display()))?
            .into_values();
            if y.ncols() != 2 || y.nrows() != x.nrows() {
                return Err(Failure::usage(anyhow!(
                    "embedding {} is {}x{}, expected {}x2",
                    p.display(),
                    y.nrows(),
                    y.ncols(),
                    x.nrows()
                )));
            }
            Ok(y)
        }
        None => {
            let e = run_tsne_with_similarity(v, &cfg.tsne)?;
            e.save_csv(cfg.out_file("embedding.csv"))?;
            e.save_trace_csv(cfg.out_file("loss_trace.csv"))?;
            Ok(e.y)
        }
    }
}

fn class_means(x: &InputMatrix) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let labels = x.labels().ok_or_else(|| {
        Failure::usage(anyhow!(
            "class labels are needed to pick default input points"
        ))
    })?;
    let mean = |class: usize| -> Result<Vec<f64>, Failure> {
        let rows: Vec<usize> = (0..x.nrows()).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            return Err(Failure::usage(anyhow!("class {class} has no members")));
        }
        Ok((0..x.ncols())
            .map(|c| rows.iter().map(|&i| x.values()[[i, c]]).sum::<f64>() / rows.len() as f64)
            .collect())
    };
    Ok((mean(0)?, mean(1)?))
}

pub fn gen(cfg: &PipelineConfig) -> CmdResult {
    let x = cfg.input()?;
    let path = cfg.out_file("data.csv");
    save_csv(
        &x,
        &path,
        CsvOptions {
            header: true,
            labels: x.labels().is_some(),
        },
    )?;
    println!(
        "{} rows x {} columns -> {}",
        x.nrows(),
        x.ncols(),
        path.display()
    );
    Ok(())
}

pub fn embed(cfg: &PipelineConfig) -> CmdResult {
    let x = cfg.input()?;
    let v = similarity(cfg, &x)?;
    let e = run_tsne_with_similarity(&v, &cfg.tsne)?;
    e.save_csv(cfg.out_file("embedding.csv"))?;
    e.save_trace_csv(cfg.out_file("loss_trace.csv"))?;
    println!("final loss {:.6}", e.loss);
    Ok(())
}

pub fn loo_validate(cfg: &PipelineConfig) -> CmdResult {
    let sampler = cfg.sampler().ok_or_else(|| {
        Failure::usage(anyhow!(
            "validation draws fresh points and needs a synthetic input source"
        ))
    })?;
    if cfg.pca_dim.is_some() {
        return Err(Failure::usage(anyhow!(
            "validation does not support PCA preprocessing"
        )));
    }
    let dataset = match &cfg.input {
        InputSource::Preset { name, .. } => serde_json::to_value(name)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        InputSource::Gmm { .. } => "gmm".into(),
        InputSource::SwissRoll { .. } => "swiss-roll".into(),
        InputSource::Csv { .. } => unreachable!("no sampler for CSV input"),
    };
    let opts = ValidateOptions {
        trials: cfg.validate.trials,
        second_iters: cfg.validate.second_iters,
        seed: cfg.seed,
    };
    let mut reports = Vec::new();
    let mut w = csv::Writer::from_path(cfg.out_file("loo_validation.csv"))
        .context("writing loo_validation.csv")?;
    w.write_record(["dataset", "n", "perplexity", "mean", "std"])
        .context("writing loo_validation.csv")?;
    for &n in &cfg.validate.n_list {
        info!("validating n = {n}");
        let x = sampler.sample_n(n, cfg.seed)?;
        let r = validate_loo(&x, &cfg.tsne, sampler.as_dyn(), &opts)?;
        println!("n = {n}: mean {:.5} std {:.5}", r.mean, r.std);
        w.write_record([
            dataset.clone(),
            n.to_string(),
            format!("{:?}", r.perplexity),
            format!("{:?}", r.mean),
            format!("{:?}", r.std),
        ])
        .context("writing loo_validation.csv")?;
        reports.push(r);
    }
    w.flush().context("writing loo_validation.csv")?;
    let f = std::fs::File::create(cfg.out_file("loo_validation.json"))
        .context("writing loo_validation.json")?;
    serde_json::to_writer_pretty(f, &reports).context("writing loo_validation.json")?;
    Ok(())
}

fn write_scores(cfg: &PipelineConfig, report: &ScoreReport, stem: &str) -> CmdResult {
    report.save_csv(cfg.out_file(&format!("{stem}.csv")))?;
    report.save_json(cfg.out_file(&format!("{stem}.json")))?;
    let top = report
        .top_fraction_mean(0.05)
        .map_or("n/a".into(), |m| format!("{m:.6e}"));
    let flagged = report.flagged.iter().filter(|f| **f).count();
    println!(
        "{} points scored, {flagged} flagged, top-5% mean {top}",
        report.finite_indices().len() + report.infinite_count()
    );
    Ok(())
}

pub fn score(cfg: &PipelineConfig, perturbation: bool, emb: Option<&Path>) -> CmdResult {
    let x = cfg.input()?;
    let v = similarity(cfg, &x)?;
    let y = embedding(cfg, &x, &v, emb)?;
    if perturbation {
        let scorer = PerturbationScorer::new(&x, &y, &v, &cfg.perturbation)?;
        let report = scorer.scores()?;
        write_scores(cfg, &report, "perturbation_scores")
    } else {
        let method = match &cfg.singularity {
            SingularityMethod::LargeVis { edges, gamma } if edges.is_empty() => {
                SingularityMethod::LargeVis {
                    edges: EdgeSet::from_similarity(&v),
                    gamma: *gamma,
                }
            }
            m => m.clone(),
        };
        let report = singularity_scores(&y, &v, &method)?;
        write_scores(cfg, &report, "singularity_scores")
    }
}

pub fn landscape(cfg: &PipelineConfig, emb: Option<&Path>) -> CmdResult {
    let x = cfg.input()?;
    let x_new = match &cfg.landscape.x {
        Some(p) => p.clone(),
        None => {
            let (a, b) = class_means(&x)?;
            a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect()
        }
    };
    let v = similarity(cfg, &x)?;
    let y = embedding(cfg, &x, &v, emb)?;
    let ctx = LooContext::new(&x, &y, &v, cfg.tsne.entropy_tol)?;
    let problem = ctx.add_one_problem(&x_new, cfg.landscape.column)?;
    let r = cfg.landscape.resolution;
    let grid = loo_landscape(
        &problem,
        Bounds::around(&problem),
        [r, r],
        &cfg.landscape.strategy,
    )?;
    grid.save_json(cfg.out_file("landscape.json"))?;
    println!("{} local minima", grid.minima.len());
    Ok(())
}

pub fn trajectory(cfg: &PipelineConfig, emb: Option<&Path>) -> CmdResult {
    let x = cfg.input()?;
    let t = &cfg.trajectory;
    let (c1, c2) = match (&t.from, &t.to) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        (None, None) => class_means(&x)?,
        _ => {
            return Err(Failure::usage(anyhow!(
                "give both trajectory endpoints or neither"
            )))
        }
    };
    let v = similarity(cfg, &x)?;
    let y = embedding(cfg, &x, &v, emb)?;
    let ctx = LooContext::new(&x, &y, &v, cfg.tsne.entropy_tol)?;
    let traj = interpolation_trajectory(&ctx, &c1, &c2, t.steps, t.column, &t.strategy)?;
    traj.save_csv(cfg.out_file("trajectory.csv"))?;
    println!(
        "max jump {:.6}, step variance {:.6}",
        traj.max_jump(),
        traj.step_variance()
    );
    Ok(())
}

pub fn select_perplexity(cfg: &PipelineConfig) -> CmdResult {
    let x = cfg.input()?;
    let sc = SelectConfig {
        tsne: cfg.tsne.clone(),
        top_fraction: cfg.select.top_fraction,
        log_scale: cfg.select.log_scale,
    };
    let sel = run_select(&x, &cfg.select.candidates, &sc)?;
    sel.save_csv(cfg.out_file("perplexity_curve.csv"))?;
    sel.embeddings[sel.chosen_index].save_csv(cfg.out_file("embedding.csv"))?;
    println!("chosen perplexity {}", sel.chosen);
    Ok(())
}

pub fn metrics(cfg: &PipelineConfig, emb: Option<&Path>, scores: Option<&Path>) -> CmdResult {
    let x = cfg.input()?;
    let labels = x
        .labels()
        .ok_or_else(|| Failure::usage(anyhow!("metrics need class labels")))?
        .to_vec();
    let v = similarity(cfg, &x)?;
    let y = embedding(cfg, &x, &v, emb)?;
    let n = x.nrows();
    let mut report = MetricReport::new(n);
    report.params = serde_json::json!({
        "perplexity": cfg.tsne.perplexity,
        "k": cfg.metrics.k,
        "embedding": emb.map(|p| p.display().to_string()),
    });

    let ed = entropy_difference(x.values(), &y, &labels)?;
    let np = neighborhood_preservation(x.values(), &y, cfg.metrics.k)?;
    report.scalar("db_index", db_index(&y, &labels)?);
    report.scalar("wcdr", wcdr(&y, &labels)?);
    report.scalar("wilks_lambda", wilks_lambda(&y, &labels)?);
    report.scalar("np_median", np.median);
    report.scalar("np_k", np.k as f64);
    report.vector("np", np.scores)?;
    report.vector("entropy_input", ed.input_entropy)?;
    report.vector("entropy_embedding", ed.embedding_entropy)?;

    if let Some(path) = scores {
        if !path.is_file() {
            return Err(Failure::io(anyhow!(
                "score file not found: {}",
                path.display()
            )));
        }
        let s = ScoreReport::load_json(path)?;
        if s.len() != n {
            return Err(Failure::usage(anyhow!(
                "score report has {} points, data has {n}",
                s.len()
            )));
        }
        let idx = s.finite_indices();
        let a: Vec<f64> = idx.iter().map(|&i| s.scores[i]).collect();
        let b: Vec<f64> = idx.iter().map(|&i| ed.difference[i]).collect();
        let t = spearman_test(&a, &b)?;
        report.scalar("score_entropy_rho", t.rho);
        report.scalar("score_entropy_p", t.p_value);
        report.vector("score", s.scores)?;
    }
    report.vector("entropy_difference", ed.difference)?;

    report.save_json(cfg.out_file("metrics.json"))?;
    report.save_csv(cfg.out_file("metrics.csv"))?;
    report.save_summary_csv(cfg.out_file("metrics_summary.csv"))?;
    for (k, v) in &report.scalars {
        println!("{k} = {v:.6}");
    }
    Ok(())
}
