//! `embgeom` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 file not found, 4 other I/O failure,
//! 5 malformed dump/manifest/family map, 6 failed precondition (alignment,
//! unknown language, component count), 7 numerical failure (zero
//! anisotropy, eigensolver non-convergence), 8 family map does not cover
//! every language.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use embgeom::matrix::format_value;
use embgeom::{
    anisotropy, gamma_matrix, pca_group, phi_matrix, read_embeddings, DumpError, EmbeddingSet,
    FamilyMap, FamilyReport, LabeledMatrix, Manifest, MetricsError, NnMetric, PcaError,
    ReportError, THREADS_ENV,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "embgeom",
    version,
    about = "Geometry of multilingual sentence embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean absolute cosine over all row pairs.
    Anisotropy(Common),
    /// Cross-lingual similarity matrix.
    Gamma {
        #[command(flatten)]
        common: Common,
        /// Round values to this many decimals.
        #[arg(long)]
        round: Option<u32>,
    },
    /// Nearest-neighbour separability matrix.
    Phi {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Metric::Euclidean)]
        metric: Metric,
        #[arg(long)]
        round: Option<u32>,
    },
    /// Principal-component coordinates of a language group.
    Pca {
        #[command(flatten)]
        common: Common,
        /// Comma-separated language codes.
        #[arg(long, value_delimiter = ',', required = true)]
        languages: Vec<String>,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        components: u32,
    },
    /// Family-level summary of both matrices.
    Report {
        #[command(flatten)]
        common: Common,
        /// JSON object mapping language codes to families; defaults to the
        /// built-in XNLI map.
        #[arg(long)]
        families: Option<PathBuf>,
        #[arg(long)]
        round: Option<u32>,
        #[arg(long, value_enum, default_value_t = Metric::Euclidean)]
        metric: Metric,
    },
}

#[derive(Args)]
struct Common {
    /// EMBGEOM1 dump; the manifest is read from `<input>.manifest.json`.
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Defaults to json for `anisotropy` and `report`, csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Euclidean,
    Cosine,
}

impl From<Metric> for NnMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Euclidean => NnMetric::Euclidean,
            Metric::Cosine => NnMetric::CosineDistance,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Dump(DumpError),
    Metrics(MetricsError),
    Pca(PcaError),
    Report(ReportError),
    Alignment(String),
    Output(PathBuf, io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Dump(DumpError::NotFound(_)) => 3,
            CliError::Dump(DumpError::Io { .. }) | CliError::Output(..) => 4,
            CliError::Dump(_) => 5,
            CliError::Metrics(MetricsError::ZeroAnisotropy) => 7,
            CliError::Pca(PcaError::NonConvergence(_)) => 7,
            CliError::Metrics(_) | CliError::Pca(_) | CliError::Alignment(_) => 6,
            CliError::Report(ReportError::MissingFamilies(_)) => 8,
            CliError::Report(_) => 6,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Dump(DumpError::NotFound(p)) => write!(f, "file not found: {}", p.display()),
            CliError::Dump(e) => write!(f, "{e}"),
            CliError::Metrics(e) => write!(f, "{e}"),
            CliError::Pca(e) => write!(f, "{e}"),
            CliError::Report(e) => write!(f, "{e}"),
            CliError::Alignment(m) => write!(f, "alignment error: {m}"),
            CliError::Output(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<DumpError> for CliError {
    fn from(e: DumpError) -> Self {
        CliError::Dump(e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Metrics(e)
    }
}

impl From<PcaError> for CliError {
    fn from(e: PcaError) -> Self {
        CliError::Pca(e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Report(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("embgeom: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    // only fails if a global pool already exists, which cannot happen here
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn load(path: &Path) -> Result<(EmbeddingSet, Manifest), CliError> {
    Ok(read_embeddings(path)?)
}

fn require_sentence_level(manifest: &Manifest) -> Result<(), CliError> {
    if manifest.pooling.is_sentence_level() {
        Ok(())
    } else {
        Err(CliError::Alignment(
            "word-level dump (pooling \"none\") has no sentence alignment; Γ needs a sentence-level dump"
                .into(),
        ))
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Anisotropy(c) => {
            let (set, _) = load(&c.input)?;
            let a = anisotropy(&set)?;
            emit(&c, Format::Json, |w, format| match format {
                Format::Json => json(w, &a),
                Format::Csv => writeln!(w, "anisotropy,pair_count\n{},{}", a.value, a.pair_count),
            })
        }
        Command::Gamma { common, round } => {
            let (set, manifest) = load(&common.input)?;
            require_sentence_level(&manifest)?;
            let (m, _) = gamma_matrix(&set)?;
            emit_matrix(&common, &m, round)
        }
        Command::Phi {
            common,
            metric,
            round,
        } => {
            let (set, _) = load(&common.input)?;
            let m = phi_matrix(&set, metric.into())?;
            emit_matrix(&common, &m, round)
        }
        Command::Pca {
            common,
            languages,
            components,
        } => {
            let (set, _) = load(&common.input)?;
            let codes: Vec<&str> = languages.iter().map(|s| s.trim()).collect();
            let res = pca_group(&set, &codes, components as usize)?;
            emit(&common, Format::Csv, |w, format| match format {
                Format::Json => json(w, &res),
                Format::Csv => {
                    let k = res.components.k();
                    let header: Vec<String> = (1..=k).map(|c| format!("pc{c}")).collect();
                    writeln!(w, "code,sentence_index,{}", header.join(","))?;
                    for (i, (code, idx)) in
                        res.row_labels.iter().zip(&res.sentence_index).enumerate()
                    {
                        let row: Vec<String> = res
                            .coordinates
                            .row(i)
                            .iter()
                            .map(|v| v.to_string())
                            .collect();
                        writeln!(w, "{code},{idx},{}", row.join(","))?;
                    }
                    Ok(())
                }
            })
        }
        Command::Report {
            common,
            families,
            round,
            metric,
        } => {
            let (set, manifest) = load(&common.input)?;
            let map = match &families {
                Some(p) => FamilyMap::load(p)?,
                None => FamilyMap::xnli15(),
            };
            let missing = map.missing(set.codes());
            if !missing.is_empty() {
                return Err(ReportError::MissingFamilies(missing).into());
            }
            require_sentence_level(&manifest)?;
            let (gamma, aniso) = gamma_matrix(&set)?;
            let phi = phi_matrix(&set, metric.into())?;
            let mut report = FamilyReport::build(&gamma, &phi, aniso.value, &map)?;
            if let Some(d) = round {
                report = report.rounded(d);
            }
            emit(&common, Format::Json, |w, format| match format {
                Format::Json => json(w, &report),
                Format::Csv => report_csv(w, &report),
            })
        }
    }
}

fn emit_matrix(common: &Common, m: &LabeledMatrix, round: Option<u32>) -> Result<(), CliError> {
    emit(common, Format::Csv, |w, format| match format {
        Format::Csv => m
            .write_csv(w, round.map(|d| d as usize))
            .map_err(io::Error::other),
        Format::Json => match round {
            None => json(w, m),
            Some(d) => {
                let scale = 10f64.powi(d as i32);
                let values: Vec<Vec<f64>> = m
                    .rows()
                    .iter()
                    .map(|r| r.iter().map(|v| (v * scale).round() / scale).collect())
                    .collect();
                let rounded = LabeledMatrix::new(m.kind(), m.codes().to_vec(), values)
                    .map_err(io::Error::other)?;
                json(w, &rounded)
            }
        },
    })
}

/// Long-form `section,name,value` rows.
fn report_csv(w: &mut dyn Write, r: &FamilyReport) -> io::Result<()> {
    let opt = |v: Option<f64>| v.map(|v| format_value(v, None)).unwrap_or_default();
    writeln!(w, "section,name,value")?;
    for f in &r.families {
        writeln!(w, "family_languages,{},{}", f.family, f.languages.join(" "))?;
        writeln!(
            w,
            "intra_gamma_mean,{},{}",
            f.family,
            opt(f.intra_gamma_mean)
        )?;
        writeln!(w, "intra_phi_mean,{},{}", f.family, opt(f.intra_phi_mean))?;
    }
    writeln!(
        w,
        "inter_family_gamma_mean,,{}",
        opt(r.global.inter_family_gamma_mean)
    )?;
    writeln!(
        w,
        "inter_family_phi_mean,,{}",
        opt(r.global.inter_family_phi_mean)
    )?;
    writeln!(w, "anisotropy,,{}", r.global.anisotropy)?;
    for l in &r.gamma_ranking {
        writeln!(w, "mean_gamma,{},{}", l.code, l.mean_gamma)?;
    }
    Ok(())
}

fn json<T: Serialize>(w: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

fn emit<F>(common: &Common, default: Format, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write, Format) -> io::Result<()>,
{
    let format = common.format.unwrap_or(default);
    let (target, result) = match &common.output {
        Some(path) => {
            let result = File::create(path).and_then(|f| {
                let mut w = BufWriter::new(f);
                write(&mut w, format)?;
                w.flush()
            });
            (path.clone(), result)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            let result = write(&mut w, format).and_then(|()| w.flush());
            (PathBuf::from("<stdout>"), result)
        }
    };
    result.map_err(|e| CliError::Output(target, e))
}
