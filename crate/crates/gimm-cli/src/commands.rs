//! Command implementations: composable stages from generator training to
//! evaluation, plus ablation and sensitivity sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use gimm_core::checkpoint::Checkpoint;
use gimm_core::contrast::{
    embed_graphs, embed_nodes, graph_encoder_from_checkpoint, graph_encoder_to_checkpoint,
    node_encoder_from_checkpoint, node_encoder_to_checkpoint, train_graph_contrast,
    train_node_contrast, write_embeddings_csv, ContrastLogRow,
};
use gimm_core::error::{Error, Result};
use gimm_core::eval::{
    kfold_evaluate, node_split_evaluate, run_ablation, sensitivity_sweep, write_report_csv,
    write_report_json, AblationVariant, EvalReport,
};
use gimm_core::graphdata::Task;
use gimm_core::rng as seedstream;
use gimm_core::viewgen::{train_generator, GeneratorState, TrainLogRow};

use crate::config::RunConfig;

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    // the resolved configuration makes every run diffable and replayable
    write_text(&dir.join("run.cfg"), &cfg.serialize())?;
    Ok(dir)
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn generator_log_csv(log: &[TrainLogRow]) -> String {
    let mut out = String::from("epoch,i_hat,reg,loss\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.i_hat, row.reg, row.loss
        ));
    }
    out
}

fn contrast_log_csv(log: &[ContrastLogRow]) -> String {
    let mut out = String::from("epoch,i_hat,loss\n");
    for row in log {
        out.push_str(&format!("{},{},{}\n", row.epoch, row.i_hat, row.loss));
    }
    out
}

pub struct StagePaths {
    pub generator: PathBuf,
    pub encoder: PathBuf,
    pub embeddings: PathBuf,
}

pub fn stage_paths(cfg: &RunConfig) -> Result<StagePaths> {
    let dir = ensure_out_dir(cfg)?;
    Ok(StagePaths {
        generator: dir.join("generator.json"),
        encoder: dir.join("encoder.json"),
        embeddings: dir.join("embeddings.csv"),
    })
}

pub fn cmd_train_generator(cfg: &RunConfig) -> Result<PathBuf> {
    let dataset = cfg.load_dataset()?;
    let paths = stage_paths(cfg)?;
    let gen_cfg = cfg.generator_config();
    let mut rng = seedstream::stream(cfg.seed, "generator");
    let result = train_generator(&dataset, &gen_cfg, &mut rng)?;

    let echo = serde_json::to_value(&gen_cfg).map_err(|e| Error::Config(e.to_string()))?;
    result.state.to_checkpoint(echo).save(&paths.generator)?;
    write_text(
        &ensure_out_dir(cfg)?.join("generator_log.csv"),
        &generator_log_csv(&result.log),
    )?;
    if let Some(last) = result.log.last() {
        println!(
            "generator: {} epochs, final I_hat {:.6}, R {:.6}",
            result.log.len(),
            last.i_hat,
            last.reg
        );
    }
    println!("wrote {}", paths.generator.display());
    Ok(paths.generator)
}

pub fn cmd_train_encoder(cfg: &RunConfig, generator_path: &Path) -> Result<PathBuf> {
    let dataset = cfg.load_dataset()?;
    let paths = stage_paths(cfg)?;
    let state = GeneratorState::from_checkpoint(Checkpoint::load(generator_path, "generator")?)?;
    let gen_cfg = cfg.generator_config();
    let sampler = cfg.sampler_config();
    let con_cfg = cfg.contrast_config();
    let mut rng = seedstream::stream(cfg.seed, "contrast");
    let echo = serde_json::to_value(&con_cfg).map_err(|e| Error::Config(e.to_string()))?;

    let log = match dataset.task {
        Task::NodeClassification => {
            let g = &dataset.graphs[0];
            let out = train_node_contrast(g, &state, &gen_cfg, &sampler, &con_cfg, &mut rng)?;
            node_encoder_to_checkpoint(&out.encoder, &out.head, echo).save(&paths.encoder)?;
            out.log
        }
        Task::GraphClassification => {
            let out = train_graph_contrast(&dataset, &state, &gen_cfg, &sampler, &con_cfg, &mut rng)?;
            graph_encoder_to_checkpoint(&out.encoder, &out.head, echo).save(&paths.encoder)?;
            out.log
        }
    };
    write_text(
        &ensure_out_dir(cfg)?.join("encoder_log.csv"),
        &contrast_log_csv(&log),
    )?;
    if let Some(last) = log.last() {
        println!(
            "encoder: {} epochs, final I_hat {:.6}",
            log.len(),
            last.i_hat
        );
    }
    println!("wrote {}", paths.encoder.display());
    Ok(paths.encoder)
}

pub fn cmd_embed(cfg: &RunConfig, generator_path: &Path, encoder_path: &Path) -> Result<PathBuf> {
    let dataset = cfg.load_dataset()?;
    let paths = stage_paths(cfg)?;
    let state = GeneratorState::from_checkpoint(Checkpoint::load(generator_path, "generator")?)?;
    let gen_cfg = cfg.generator_config();
    let sampler = cfg.sampler_config();
    let con_cfg = cfg.contrast_config();

    let embs = match dataset.task {
        Task::NodeClassification => {
            let (encoder, _) =
                node_encoder_from_checkpoint(Checkpoint::load(encoder_path, "encoder")?)?;
            embed_nodes(
                &dataset.graphs[0],
                &state,
                &gen_cfg,
                &sampler,
                &encoder,
                con_cfg.embedding_combination,
            )?
        }
        Task::GraphClassification => {
            let (encoder, _) =
                graph_encoder_from_checkpoint(Checkpoint::load(encoder_path, "encoder")?)?;
            embed_graphs(&dataset, &encoder)?
        }
    };
    write_embeddings_csv(&paths.embeddings, &embs)?;
    println!(
        "wrote {} ({} rows x {} dims)",
        paths.embeddings.display(),
        embs.rows,
        embs.cols
    );
    Ok(paths.embeddings)
}

fn print_report(label: &str, report: &EvalReport) {
    println!(
        "{label}: accuracy {:.4} +- {:.4} over {} runs ({:.1}s)",
        report.mean,
        report.std,
        report.run_means.len(),
        report.runtime_seconds
    );
    if let Some(c) = report.chosen_c_mode() {
        println!("  modal SVM C: {c}");
    }
}

fn save_report(cfg: &RunConfig, stem: &str, report: &EvalReport) -> Result<()> {
    let dir = ensure_out_dir(cfg)?;
    write_report_csv(dir.join(format!("{stem}.csv")), report)?;
    write_report_json(dir.join(format!("{stem}.json")), report)?;
    println!(
        "wrote {} and {}",
        dir.join(format!("{stem}.csv")).display(),
        dir.join(format!("{stem}.json")).display()
    );
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let dataset = cfg.load_dataset()?;
    let pipeline = cfg.pipeline_config();
    let report = match dataset.task {
        Task::GraphClassification => kfold_evaluate(&dataset, &pipeline)?,
        Task::NodeClassification => node_split_evaluate(&dataset, &pipeline)?,
    };
    print_report("evaluate", &report);
    save_report(cfg, "report", &report)
}

pub fn cmd_ablate(cfg: &RunConfig, variant: Option<AblationVariant>) -> Result<()> {
    let dataset = cfg.load_dataset()?;
    let pipeline = cfg.pipeline_config();
    let variants: Vec<AblationVariant> = match variant {
        Some(v) => vec![v],
        None => AblationVariant::ALL.to_vec(),
    };
    for v in variants {
        let report = run_ablation(&dataset, v, &pipeline)?;
        print_report(&format!("ablate[{}]", v.name()), &report);
        save_report(cfg, &format!("report_{}", v.name()), &report)?;
    }
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let dataset = cfg.load_dataset()?;
    let pipeline = cfg.pipeline_config();
    let grid = cfg.sweep_grid_values()?;
    let sweep = sensitivity_sweep(&dataset, &grid, &pipeline)?;
    let dir = ensure_out_dir(cfg)?;
    write_text(&dir.join("sweep.csv"), &sweep.to_csv())?;
    let body = serde_json::to_string_pretty(&sweep).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&dir.join("sweep.json"), &body)?;
    println!("sweep over {} x {} cells", grid.len(), grid.len());
    println!("wrote {}", dir.join("sweep.csv").display());
    Ok(())
}

pub fn cmd_all(cfg: &RunConfig) -> Result<()> {
    let generator = cmd_train_generator(cfg)?;
    let encoder = cmd_train_encoder(cfg, &generator)?;
    cmd_embed(cfg, &generator, &encoder)?;
    cmd_evaluate(cfg)
}
