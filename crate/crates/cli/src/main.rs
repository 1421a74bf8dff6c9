//! Batch driver for prototype transport experiments.
//!
//! Each subcommand reads its inputs plus an optional flat `key=value`
//! config, writes fixed file names into `--out`, and prints one summary
//! line. Failures print `ERROR:<code>:<message>` and exit with 1 for
//! invalid data or configuration and 2 for filesystem errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prototransport::eval::{evaluate, selection_distribution, selection_order};
use prototransport::io::{self, ConfigFile};
use prototransport::measures::build_video_measure_with;
use prototransport::pipeline::{
    fuse_scores, rerank_tubes, score_action, score_object_with_reference, transport_actions, transport_objects,
    ObjectReference, TransportOutcome,
};
use prototransport::synth::generate_scenario;
use prototransport::{Error, PrototypeSet, Result};

#[derive(Parser)]
#[command(name = "prototransport", version, about = "Optimal transport of zero-shot class prototypes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic test set with biased prototypes.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Spherical k-means over test embeddings.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        videos: PathBuf,
    },
    /// Transport action prototypes toward the clustered test embeddings.
    TransportActions {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        prototypes: PathBuf,
        #[arg(long)]
        videos: PathBuf,
    },
    /// Transport action prototypes toward the object measure.
    TransportObjects {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        prototypes: PathBuf,
        #[arg(long)]
        objects: PathBuf,
        #[arg(long)]
        likelihoods: PathBuf,
    },
    /// Nearest-prototype scores for test embeddings.
    InferActions {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        prototypes: PathBuf,
        #[arg(long)]
        videos: PathBuf,
    },
    /// Object-likelihood scores for test videos.
    InferObjects {
        #[command(flatten)]
        common: Common,
        /// Prototypes the scores are computed against.
        #[arg(long)]
        prototypes: PathBuf,
        /// Untransported prototypes; used to pick objects when
        /// `object_reference=original`.
        #[arg(long)]
        original_prototypes: Option<PathBuf>,
        #[arg(long)]
        objects: PathBuf,
        #[arg(long)]
        likelihoods: PathBuf,
    },
    /// Convex combination of action and object scores.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        action_scores: PathBuf,
        #[arg(long)]
        object_scores: PathBuf,
    },
    /// Accuracy, confusion and selection metrics.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Scores whose selection frequencies order the confusion axes.
        #[arg(long)]
        baseline_scores: Option<PathBuf>,
    },
    /// Side-by-side table of the headline metrics of several reports.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
    },
    /// Add whole-video scores to tube scores.
    Rerank {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tube_scores: PathBuf,
        #[arg(long)]
        video_scores: PathBuf,
        #[arg(long)]
        tube_map: PathBuf,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth { common }
            | Command::Cluster { common, .. }
            | Command::TransportActions { common, .. }
            | Command::TransportObjects { common, .. }
            | Command::InferActions { common, .. }
            | Command::InferObjects { common, .. }
            | Command::Fuse { common, .. }
            | Command::Eval { common, .. }
            | Command::Report { common, .. }
            | Command::Rerank { common, .. } => common,
        }
    }
}

fn load_config(common: &Common) -> Result<ConfigFile> {
    let mut config = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        config.set("seed", seed.to_string());
    }
    Ok(config)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_transport(out: &Path, stem: &str, outcome: &TransportOutcome, columns: &[String]) -> Result<()> {
    io::write_prototypes(&outcome.prototypes, &out.join(format!("{stem}.emb")))?;
    io::write_prototypes(&outcome.targets, &out.join(format!("{stem}_targets.emb")))?;
    io::write_coupling(
        &out.join(format!("{stem}_coupling.csv")),
        outcome.prototypes.labels(),
        columns,
        &outcome.coupling,
    )
}

const HEADLINE_KEYS: &[&str] = &[
    "items",
    "labels",
    "top1",
    "top5",
    "mean_per_class_accuracy",
    "selection_entropy",
    "never_predicted",
    "never_predicted_fraction",
];

fn run(command: &Command) -> Result<String> {
    let common = command.common();
    let config = load_config(common)?;
    let out = &common.out;
    fs::create_dir_all(out)?;

    match command {
        Command::Synth { .. } => {
            let scenario = config.synth_scenario()?;
            let data = generate_scenario(&scenario)?;
            io::write_embeddings(&data.items, &out.join("items.emb"))?;
            io::write_prototypes(&data.prototypes, &out.join("prototypes.emb"))?;
            io::write_truth(&out.join("truth.csv"), data.items.ids(), &data.truth)?;
            if let (Some(objects), Some(lik)) = (&data.objects, &data.likelihoods) {
                io::write_prototypes(objects, &out.join("objects.emb"))?;
                io::write_likelihoods(lik, &out.join("likelihoods.csv"))?;
            }
            Ok(format!(
                "synth: {} items, {} classes, {} objects, dim {}",
                data.items.len(),
                data.prototypes.len(),
                scenario.n_objects,
                scenario.dim
            ))
        }
        Command::Cluster { videos, .. } => {
            let cfg = config.pipeline_config()?;
            let items = io::read_embeddings(videos)?;
            let (measure, model) = build_video_measure_with(&items, cfg.k, cfg.seed, cfg.video_weighting)?;
            let width = model.k().saturating_sub(1).to_string().len();
            let names: Vec<String> = (0..model.k()).map(|c| format!("cluster{c:0width$}")).collect();
            let centers = PrototypeSet::new(names.clone(), model.centers().to_vec())?;
            io::write_prototypes(&centers, &out.join("centers.emb"))?;
            let mut text = String::from("id,cluster\n");
            for (id, &c) in model.ids().iter().zip(model.assignments()) {
                let _ = writeln!(text, "{id},{}", names[c]);
            }
            write(&out.join("assignments.csv"), &text)?;
            Ok(format!(
                "cluster: {} items into {} clusters ({} non-empty), {} iterations",
                items.len(),
                model.k(),
                measure.len(),
                model.inertia_trace().len()
            ))
        }
        Command::TransportActions { prototypes, videos, .. } => {
            let cfg = config.pipeline_config()?;
            let protos = io::read_prototypes(prototypes)?;
            let items = io::read_embeddings(videos)?;
            let outcome = transport_actions(&protos, &items, &cfg)?;
            let columns: Vec<String> = (0..outcome.target_measure.len()).map(|j| format!("support{j}")).collect();
            write_transport(out, "transported_actions", &outcome, &columns)?;
            Ok(format!(
                "transport-actions: {} prototypes onto {} clusters, lambda {}",
                protos.len(),
                outcome.target_measure.len(),
                cfg.lambda
            ))
        }
        Command::TransportObjects {
            prototypes,
            objects,
            likelihoods,
            ..
        } => {
            let cfg = config.pipeline_config()?;
            let protos = io::read_prototypes(prototypes)?;
            let objs = io::read_prototypes(objects)?;
            let lik = io::read_likelihoods(likelihoods)?;
            let outcome = transport_objects(&protos, &objs, &lik, &cfg)?;
            let kept = outcome.kept_objects.clone().unwrap_or_default();
            write_transport(out, "transported_objects", &outcome, &kept)?;
            Ok(format!(
                "transport-objects: {} prototypes onto {} kept objects, lambda {}",
                protos.len(),
                kept.len(),
                cfg.lambda
            ))
        }
        Command::InferActions { prototypes, videos, .. } => {
            let protos = io::read_prototypes(prototypes)?;
            let items = io::read_embeddings(videos)?;
            let scores = score_action(&items, &protos)?;
            io::write_scores(&scores, &out.join("scores_action.csv"))?;
            Ok(format!("infer-actions: {} items x {} labels", items.len(), protos.len()))
        }
        Command::InferObjects {
            prototypes,
            original_prototypes,
            objects,
            likelihoods,
            ..
        } => {
            let cfg = config.pipeline_config()?;
            let protos = io::read_prototypes(prototypes)?;
            let objs = io::read_prototypes(objects)?;
            let lik = io::read_likelihoods(likelihoods)?;
            let reference = match (cfg.object_reference, original_prototypes) {
                (ObjectReference::Transported, _) => protos.clone(),
                (ObjectReference::Original, Some(path)) => io::read_prototypes(path)?,
                (ObjectReference::Original, None) => {
                    return Err(Error::InvalidConfig(
                        "object_reference=original needs --original-prototypes".into(),
                    ))
                }
            };
            let scores = score_object_with_reference(&lik, &objs, &protos, &reference, cfg.top_objects_t)?;
            io::write_scores(&scores, &out.join("scores_object.csv"))?;
            Ok(format!(
                "infer-objects: {} videos x {} labels, top {} objects",
                lik.video_ids().len(),
                protos.len(),
                cfg.top_objects_t
            ))
        }
        Command::Fuse {
            action_scores,
            object_scores,
            ..
        } => {
            let cfg = config.pipeline_config()?;
            let a = io::read_scores(action_scores)?;
            let o = io::read_scores(object_scores)?;
            let fused = fuse_scores(&a, &o, cfg.epsilon_fusion, cfg.fusion_norm)?;
            io::write_scores(&fused, &out.join("scores_fused.csv"))?;
            Ok(format!(
                "fuse: epsilon {} with {} normalization",
                cfg.epsilon_fusion, cfg.fusion_norm
            ))
        }
        Command::Eval {
            scores,
            truth,
            baseline_scores,
            ..
        } => {
            let s = io::read_scores(scores)?;
            let t = io::read_truth(truth)?;
            let order = match baseline_scores {
                Some(path) => {
                    let base = io::read_scores(path)?;
                    if base.labels() != s.labels() {
                        return Err(Error::IndexMismatch("baseline scores carry different labels".into()));
                    }
                    Some(selection_order(&selection_distribution(&base)?.0))
                }
                None => None,
            };
            let report = evaluate(&s, &t, order.as_deref())?;
            write(&out.join("report.txt"), &report.render())?;
            write(&out.join("confusion.csv"), &report.confusion.to_csv())?;
            Ok(format!(
                "eval: top1 {:.6} top5 {:.6} entropy {:.6} never-predicted {}",
                report.top1,
                report.top5,
                report.selection_entropy,
                report.never_predicted()
            ))
        }
        Command::Report { reports, .. } => {
            let parsed = reports
                .iter()
                .map(|p| parse_report(p))
                .collect::<Result<Vec<_>>>()?;
            let mut text = String::from("key");
            for p in reports {
                let _ = write!(text, ",{}", p.display());
            }
            text.push('\n');
            for key in HEADLINE_KEYS {
                text.push_str(key);
                for r in &parsed {
                    let v = r.iter().find(|(k, _)| k == key).map_or("", |(_, v)| v.as_str());
                    let _ = write!(text, ",{v}");
                }
                text.push('\n');
            }
            write(&out.join("summary.csv"), &text)?;
            Ok(format!("report: {} reports summarized", reports.len()))
        }
        Command::Rerank {
            tube_scores,
            video_scores,
            tube_map,
            ..
        } => {
            let tubes = io::read_scores(tube_scores)?;
            let videos = io::read_scores(video_scores)?;
            let map = io::read_tube_map(tube_map)?;
            let combined = rerank_tubes(&tubes, &videos, &map)?;
            io::write_scores(&combined, &out.join("scores_reranked.csv"))?;
            Ok(format!("rerank: {} tubes", tubes.item_ids().len()))
        }
    }
}

fn parse_report(path: &Path) -> Result<Vec<(String, String)>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .ok_or_else(|| Error::Parse(format!("{}: expected key=value, got {l:?}", path.display())))
        })
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR:usage:{first}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ERROR:{}:{}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
