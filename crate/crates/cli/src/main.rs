use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use featbench_core::describe::{describe_keypoints, read_descriptors, write_descriptors, DescriptorSet};
use featbench_core::detect::{detect, write_keypoints_csv};
use featbench_core::eval::{evaluate, score_matches};
use featbench_core::harness::{generate_series, run_benchmark, write_report, BenchmarkConfig, ConditionFamily};
use featbench_core::image::io::{load_image, read_homography, write_homography, write_pgm};
use featbench_core::matching::{knn2_match, ratio_filter, write_matches_csv, DEFAULT_RATIO};
use featbench_core::{DescriptorKind, DetectorKind, DetectorParams, Error, EvalSettings, GrayImage, MatchPair};
use serde_json::json;

#[derive(Parser)]
#[command(name = "featbench", version, about = "Keypoint detector and descriptor benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect keypoints and print them as CSV.
    Detect {
        image: PathBuf,
        #[arg(long)]
        detector: DetectorKind,
        /// Detector parameters (TOML, or JSON by extension).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect and describe; writes an FDSC descriptor file.
    Describe {
        image: PathBuf,
        #[arg(long)]
        detector: DetectorKind,
        #[arg(long)]
        descriptor: DescriptorKind,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Defaults to `<image stem>.<descriptor>.fdsc` next to the image.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the described keypoints (one row per descriptor).
        #[arg(long)]
        keypoints: Option<PathBuf>,
    },
    /// Ratio-test matching of two descriptor files; prints match CSV.
    Match {
        desc_a: PathBuf,
        desc_b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RATIO)]
        ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeatability (and match correctness) of one image pair.
    Eval {
        image_a: PathBuf,
        image_b: PathBuf,
        /// 3x3 matrix mapping pixels of a to pixels of b.
        #[arg(long)]
        homography: PathBuf,
        #[arg(long)]
        detector: DetectorKind,
        #[arg(long)]
        descriptor: Option<DescriptorKind>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 2.5)]
        eps_pos: f64,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_RATIO)]
        ratio: f64,
    },
    /// Write a synthetic condition series with ground-truth homographies.
    Synth {
        image: PathBuf,
        #[arg(long, value_enum)]
        family: SynthFamily,
        #[arg(long)]
        out: PathBuf,
        /// Parameter grid; the family default when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Run a benchmark grid and write results.csv, run_meta.json and charts.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthFamily {
    Exposure,
    Viewpoint,
    Rotation,
    Scale,
}

impl From<SynthFamily> for ConditionFamily {
    fn from(f: SynthFamily) -> Self {
        match f {
            SynthFamily::Exposure => ConditionFamily::Exposure,
            SynthFamily::Viewpoint => ConditionFamily::Viewpoint,
            SynthFamily::Rotation => ConditionFamily::Rotation,
            SynthFamily::Scale => ConditionFamily::Scale,
        }
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Detect {
            image,
            detector,
            params,
            out,
        } => {
            let params = load_params(params.as_deref())?;
            let img = load_image(&image)?;
            let kps = detect(detector, &img, &params)?;
            log::info!("{}: {} {detector} keypoints", image.display(), kps.len());
            write_keypoints_csv(&kps, output(out.as_deref())?)?;
        }
        Command::Describe {
            image,
            detector,
            descriptor,
            params,
            out,
            keypoints,
        } => {
            let params = load_params(params.as_deref())?;
            let img = load_image(&image)?;
            let kps = detect(detector, &img, &params)?;
            let described = describe_keypoints(descriptor, &img, &kps)?;
            let out = out.unwrap_or_else(|| {
                let stem = image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                image.with_file_name(format!("{stem}.{descriptor}.fdsc"))
            });
            let set = DescriptorSet::new(descriptor, described.descriptors)?;
            write_descriptors(&out, &set)?;
            if let Some(path) = keypoints {
                write_keypoints_csv(&described.keypoints, output(Some(&path))?)?;
            }
            eprintln!("{}: {} descriptors", out.display(), set.descriptors.len());
        }
        Command::Match {
            desc_a,
            desc_b,
            ratio,
            out,
        } => {
            let a = read_descriptors(&desc_a)?;
            let b = read_descriptors(&desc_b)?;
            if a.kind != b.kind {
                return Err(Failure::Usage(format!("cannot match {} against {}", a.kind, b.kind)));
            }
            let pairs = match_sets(&a.descriptors, &b.descriptors, ratio)?;
            write_matches_csv(output(out.as_deref())?, &pairs)?;
        }
        Command::Eval {
            image_a,
            image_b,
            homography,
            detector,
            descriptor,
            params,
            eps_pos,
            tau,
            ratio,
        } => {
            let params = load_params(params.as_deref())?;
            let settings = EvalSettings { eps_pos, tau };
            settings.validate()?;
            let h = read_homography(&homography)?;
            let (a, b) = (load_image(&image_a)?, load_image(&image_b)?);
            let ka = detect(detector, &a, &params)?;
            let kb = detect(detector, &b, &params)?;
            let rep = evaluate(&ka, &kb, &h, dims(&a), dims(&b), &settings)?;
            let mut summary = json!({
                "detector": detector.tag(),
                "n_kp_a": ka.len(),
                "n_kp_b": kb.len(),
                "visible_a": rep.visible_a,
                "visible_b": rep.visible_b,
                "n_correspondences": rep.correspondences.len(),
                "repeatability": rep.repeatability(),
            });
            if let Some(kind) = descriptor {
                let da = describe_keypoints(kind, &a, &ka)?;
                let db = describe_keypoints(kind, &b, &kb)?;
                let pairs = match_sets(&da.descriptors, &db.descriptors, ratio)?;
                let (correct, total) = score_matches(&pairs, &da.keypoints, &db.keypoints, &h, eps_pos)?;
                summary["descriptor"] = json!(kind.tag());
                summary["n_matches"] = json!(total);
                summary["n_correct"] = json!(correct);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
        }
        Command::Synth {
            image,
            family,
            out,
            values,
        } => {
            let family = ConditionFamily::from(family);
            let img = load_image(&image)?;
            let values = if values.is_empty() {
                family.default_parameters()
            } else {
                values
            };
            let series = generate_series(&img, family, &values)?;
            fs::create_dir_all(&out).map_err(|e| Failure::Run(format!("{}: {e}", out.display())))?;
            write_pgm(&img, out.join("reference.pgm"))?;
            let mut index = String::from("parameter,image,homography\n");
            for (spec, test) in &series {
                let name = format!("{family}_{}", spec.parameter);
                write_pgm(test, out.join(format!("{name}.pgm")))?;
                let h_file = match &spec.ground_truth {
                    Some(h) => {
                        write_homography(h, out.join(format!("{name}.h")))?;
                        format!("{name}.h")
                    }
                    None => String::new(),
                };
                index.push_str(&format!("{},{name}.pgm,{h_file}\n", spec.parameter));
            }
            let index_path = out.join("conditions.csv");
            fs::write(&index_path, index).map_err(|e| Failure::Run(format!("{}: {e}", index_path.display())))?;
            eprintln!("{}: {} {family} conditions", out.display(), series.len());
        }
        Command::Bench { config, out } => {
            let cfg = BenchmarkConfig::load(&config)?;
            let report = run_benchmark(&cfg)?;
            let files = write_report(&report, &out)?;
            for f in &files {
                eprintln!("wrote {}", f.display());
            }
            if report.run_failed() {
                return Err(Failure::Run(format!(
                    "{} of {} cells failed",
                    report.meta.failed_cells, report.meta.total_cells
                )));
            }
        }
    }
    Ok(())
}

fn load_params(path: Option<&Path>) -> std::result::Result<DetectorParams, Failure> {
    let Some(path) = path else {
        return Ok(DetectorParams::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    let params: DetectorParams = parsed.map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    params.validate()?;
    Ok(params)
}

/// Ratio-test matches; a train set too small to rank yields none.
fn match_sets(
    a: &[featbench_core::Descriptor],
    b: &[featbench_core::Descriptor],
    ratio: f64,
) -> std::result::Result<Vec<MatchPair>, Failure> {
    match knn2_match(a, b) {
        Ok(c) => Ok(ratio_filter(&c, ratio)?),
        Err(Error::InsufficientTrainSet(n)) => {
            log::warn!("train set has {n} descriptors, no matches");
            ratio_filter(&[], ratio)?;
            Ok(Vec::new())
        }
        Err(e) => Err(e.into()),
    }
}

fn output(path: Option<&Path>) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn dims(img: &GrayImage) -> (usize, usize) {
    (img.width(), img.height())
}
