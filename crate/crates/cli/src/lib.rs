//! The `qcoin` command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use qcoin_core::analysis::{find_fair_phi, p_alice_opt, p_bob_opt, predict};
use qcoin_core::config::{fair_phi, BobKind, ProfileSection, StatesPreset, BB84_PHI};
use qcoin_core::report::{summary_row, SUMMARY_HEADER};
use qcoin_core::rng::{derive_seed, entropy_seed};
use qcoin_core::strategies::AliceProfile;
use qcoin_core::{run_session_with, ConfigDocument, FlipRecord, SessionConfig};
use qcoin_netplay::{NetError, RefereeOptions};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Protocol(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<qcoin_core::Error> for CliError {
    fn from(e: qcoin_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Core(c) => CliError::Config(c.to_string()),
            NetError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Protocol(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "qcoin",
    version,
    about = "Loss-tolerant quantum coin flipping: simulation, analysis and networked play"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one session from a config file.
    Run(RunArgs),
    /// Run a grid of sessions, one CSV row per cell.
    Sweep(SweepArgs),
    /// Print closed-form cheating probabilities and predicted rates.
    Analyze(AnalyzeArgs),
    /// Simulate the channel for networked Alice and Bob clients.
    Referee(RefereeArgs),
    /// Play Alice against a referee.
    PlayAlice(PlayArgs),
    /// Play Bob against a referee.
    PlayBob(PlayArgs),
    /// Start the HTTP sessions service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Master seed; overrides the config file.
    #[arg(long, conflicts_with = "seed_from_entropy")]
    pub seed: Option<u64>,
    /// Draw the master seed from the OS. It is recorded in the outputs.
    #[arg(long)]
    pub seed_from_entropy: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Write one JSON record per flip here (`-` for stdout).
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Write the CSV summary here instead of stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base config; grid values override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named grid; explicit list flags still override it.
    #[arg(long, value_parser = ["fig3"])]
    pub preset: Option<String>,
    /// State angles in degrees, or `bb84` / `fair`.
    #[arg(long, value_delimiter = ',')]
    pub phi: Vec<String>,
    #[arg(long = "visibility", value_delimiter = ',')]
    pub visibility: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,
    /// Profiles as `alice/bob`, e.g. `cheating/honest`.
    #[arg(long, value_delimiter = ',')]
    pub profile: Vec<String>,
    /// Flips per cell (fixed count).
    #[arg(long)]
    pub count: Option<u64>,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// State angles in degrees, or `bb84` / `fair`.
    #[arg(long, value_delimiter = ',', default_values_t = ["bb84".to_string(), "fair".to_string()])]
    pub phi: Vec<String>,
    #[arg(long = "visibility", value_delimiter = ',', default_values_t = [1.0, 0.96])]
    pub visibility: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct RefereeArgs {
    #[arg(long, default_value_t = format!("127.0.0.1:{}", qcoin_netplay::DEFAULT_PORT))]
    pub listen: String,
    /// Only accept parties declaring this config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Read timeout per message, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    /// Exit after this many sessions.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Append each session's records here as JSON lines.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = format!("127.0.0.1:{}", qcoin_netplay::DEFAULT_PORT))]
    pub connect: String,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: String,
    /// Directory for final reports written on stop.
    #[arg(long)]
    pub reports: Option<PathBuf>,
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Referee(a) => cmd_referee(&a, out),
        Command::PlayAlice(a) => cmd_play(&a, qcoin_netplay::Role::Alice, out),
        Command::PlayBob(a) => cmd_play(&a, qcoin_netplay::Role::Bob, out),
        Command::Serve(a) => cmd_serve(&a),
    }
}

fn read_document(path: &Path) -> CliResult<ConfigDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(ConfigDocument::from_toml(&text)?)
}

/// Loads a config, applying seed flags. Without a seed anywhere this fails.
pub fn load_config(path: &Path, seed: &SeedArgs) -> CliResult<SessionConfig> {
    let mut doc = read_document(path)?;
    apply_seed(&mut doc, seed);
    Ok(SessionConfig::from_document(doc)?)
}

fn apply_seed(doc: &mut ConfigDocument, seed: &SeedArgs) {
    if let Some(s) = seed.seed {
        doc.seed = Some(s);
    } else if seed.seed_from_entropy {
        doc.seed = Some(entropy_seed());
    }
}

fn create(path: &Path) -> CliResult<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout()));
    }
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn record_line(r: &FlipRecord) -> String {
    serde_json::to_string(r).expect("records serialize")
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> CliResult<()> {
    let config = load_config(&a.config, &a.seed)?;
    let mut records = a.records.as_deref().map(create).transpose()?;
    let mut write_err = None;
    let stats = run_session_with(&config, |r| {
        if let Some(w) = records.as_mut() {
            if let Err(e) = writeln!(w, "{}", record_line(r)) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    if let Some(mut w) = records {
        w.flush()?;
    }
    let text = format!("{SUMMARY_HEADER}\n{}\n", summary_row(&config, &stats));
    match &a.summary {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_phi(s: &str) -> CliResult<(StatesPreset, Option<f64>)> {
    match s.trim() {
        "bb84" => Ok((StatesPreset::Bb84, None)),
        "fair" => Ok((StatesPreset::Fair, None)),
        x => x
            .parse::<f64>()
            .map(|d| (StatesPreset::Custom, Some(d)))
            .map_err(|_| CliError::Config(format!("bad phi {x:?}"))),
    }
}

fn phi_radians(s: &str) -> CliResult<f64> {
    Ok(match parse_phi(s)? {
        (StatesPreset::Bb84, _) => BB84_PHI,
        (StatesPreset::Fair, _) => fair_phi(),
        (_, d) => d.unwrap().to_radians(),
    })
}

fn parse_kebab<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> CliResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(format!("unknown {what} {s:?}")))
}

/// Parses `alice/bob` into profile fields.
pub fn parse_profile(s: &str) -> CliResult<(AliceProfile, BobKind)> {
    let (a, b) = s
        .split_once('/')
        .ok_or_else(|| CliError::Config(format!("profile {s:?} is not alice/bob")))?;
    Ok((
        parse_kebab("alice profile", a.trim())?,
        parse_kebab("bob profile", b.trim())?,
    ))
}

/// Sweep cells in output order: φ, then V, then η, then profile.
pub fn sweep_cells(a: &SweepArgs) -> CliResult<Vec<SessionConfig>> {
    let mut base = match &a.config {
        Some(p) => read_document(p)?,
        None => ConfigDocument::default(),
    };
    let fig3 = a.preset.as_deref() == Some("fig3");
    let pick = |given: &[String], preset: &[&str]| -> Vec<String> {
        if !given.is_empty() {
            given.to_vec()
        } else if fig3 {
            preset.iter().map(|s| s.to_string()).collect()
        } else {
            Vec::new()
        }
    };
    let phis = pick(&a.phi, &["fair"]);
    let profiles = pick(
        &a.profile,
        &["honest/honest", "cheating/honest", "honest/cheating"],
    );
    let vs = if a.visibility.is_empty() && fig3 {
        vec![0.96]
    } else {
        a.visibility.clone()
    };
    let etas = a.eta.clone();
    let count = a.count.or(fig3.then_some(80_000));

    apply_seed(&mut base, &a.seed);
    let master = base.seed.ok_or_else(|| {
        CliError::Config("seed is required (--seed or --seed-from-entropy)".into())
    })?;
    if let Some(n) = count {
        base.stop = qcoin_core::config::StopSection {
            count: Some(n),
            ..Default::default()
        };
    }

    let phis: Vec<Option<&String>> = if phis.is_empty() {
        vec![None]
    } else {
        phis.iter().map(Some).collect()
    };
    let vs: Vec<Option<f64>> = if vs.is_empty() {
        vec![None]
    } else {
        vs.into_iter().map(Some).collect()
    };
    let etas: Vec<Option<f64>> = if etas.is_empty() {
        vec![None]
    } else {
        etas.into_iter().map(Some).collect()
    };
    let profiles: Vec<Option<&String>> = if profiles.is_empty() {
        vec![None]
    } else {
        profiles.iter().map(Some).collect()
    };

    let mut cells = Vec::new();
    for phi in &phis {
        for v in &vs {
            for eta in &etas {
                for profile in &profiles {
                    let mut doc = base.clone();
                    if let Some(p) = phi {
                        let (states, deg) = parse_phi(p)?;
                        doc.protocol.states = states;
                        doc.protocol.phi_deg = deg;
                    }
                    if let Some(v) = v {
                        doc.source.visibility = *v;
                    }
                    if let Some(e) = eta {
                        doc.channel.eta = *e;
                    }
                    if let Some(p) = profile {
                        let (alice, bob) = parse_profile(p)?;
                        let keep_abort = bob == BobKind::SelectiveAbort;
                        doc.profile = ProfileSection {
                            alice,
                            bob,
                            unhappy: doc.profile.unhappy,
                            abort_theta_deg: doc.profile.abort_theta_deg.filter(|_| keep_abort),
                            abort_accept: doc.profile.abort_accept.clone().filter(|_| keep_abort),
                        };
                    }
                    doc.seed = Some(derive_seed(master, cells.len() as u64) >> 1);
                    cells.push(SessionConfig::from_document(doc)?);
                }
            }
        }
    }
    Ok(cells)
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let cells = sweep_cells(a)?;
    let rows: Vec<String> = cells
        .par_iter()
        .map(|c| run_session_with(c, |_| {}).map(|s| summary_row(c, &s)))
        .collect::<Result<_, _>>()?;
    let mut w: Box<dyn Write> = match &a.out {
        Some(p) => create(p)?,
        None => Box::new(&mut *out),
    };
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

pub const PREDICTION_HEADER: &str =
    "phi_deg,V,pA,pB,pstar_honest,pstar_cheat_alice,pstar_cheat_bob";

fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> CliResult<()> {
    let fair = find_fair_phi();
    writeln!(out, "P_A(45°)={:.6}", p_alice_opt(BB84_PHI)?)?;
    writeln!(out, "P_B(45°)={:.6}", p_bob_opt(BB84_PHI)?)?;
    writeln!(out, "fair φ={:.4}°", fair.to_degrees())?;
    writeln!(out, "P_A(fair)={:.6}", p_alice_opt(fair)?)?;
    writeln!(out, "P_B(fair)={:.6}", p_bob_opt(fair)?)?;
    writeln!(out)?;
    writeln!(out, "{PREDICTION_HEADER}")?;
    for phi in &a.phi {
        let phi = phi_radians(phi)?;
        for &v in &a.visibility {
            let p = predict(phi, v)?;
            writeln!(
                out,
                "{:.4},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                p.phi_deg,
                p.visibility,
                p.p_a,
                p.p_b,
                p.pstar_honest,
                p.pstar_cheat_alice,
                p.pstar_cheat_bob
            )?;
        }
    }
    Ok(())
}

fn cmd_referee(a: &RefereeArgs, out: &mut dyn Write) -> CliResult<()> {
    let expected = a
        .config
        .as_deref()
        .map(|p| {
            load_config(
                p,
                &SeedArgs {
                    seed: None,
                    seed_from_entropy: false,
                },
            )
        })
        .transpose()?;
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        return Err(CliError::Config("timeout must be positive".into()));
    }
    let listener = TcpListener::bind(&a.listen)?;
    eprintln!("referee listening on {}", listener.local_addr()?);
    let options = RefereeOptions {
        timeout: Some(Duration::from_secs_f64(a.timeout)),
        expected,
    };
    let results = qcoin_netplay::serve(listener, options, a.sessions);
    let mut records = match &a.records {
        Some(p) => {
            let f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)?;
            Some(BufWriter::new(f))
        }
        None => None,
    };
    writeln!(out, "{SUMMARY_HEADER}")?;
    let mut last_err = None;
    for result in results {
        match result {
            Ok(t) => {
                if let Some(w) = records.as_mut() {
                    for r in &t.records {
                        writeln!(w, "{}", record_line(r))?;
                    }
                    w.flush()?;
                }
                writeln!(out, "{}", summary_row(&t.config, &t.stats))?;
                out.flush()?;
            }
            Err(e) => {
                eprintln!("session aborted: {e}");
                last_err = Some(e);
            }
        }
    }
    match (a.sessions, last_err) {
        (Some(_), Some(e)) => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_play(a: &PlayArgs, role: qcoin_netplay::Role, out: &mut dyn Write) -> CliResult<()> {
    let config = load_config(&a.config, &a.seed)?;
    let conn = TcpStream::connect(&a.connect)?;
    conn.set_nodelay(true)?;
    let log = match role {
        qcoin_netplay::Role::Alice => qcoin_netplay::play_alice(conn, &config)?,
        qcoin_netplay::Role::Bob => qcoin_netplay::play_bob(conn, &config)?,
    };
    let n = log.verdicts.len();
    let count =
        |f: &dyn Fn(&qcoin_core::Verdict) -> bool| log.verdicts.iter().filter(|v| f(v)).count();
    let zeros = count(&|v| *v == qcoin_core::Verdict::Accepted(0));
    let ones = count(&|v| *v == qcoin_core::Verdict::Accepted(1));
    writeln!(out, "n,accepted0,accepted1,mismatches,attempts,seed")?;
    writeln!(
        out,
        "{n},{zeros},{ones},{},{},{}",
        n - zeros - ones,
        log.attempts,
        config.seed
    )?;
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> CliResult<()> {
    if let Some(dir) = &a.reports {
        std::fs::create_dir_all(dir)?;
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.listen).await?;
        eprintln!("sessions service listening on {}", listener.local_addr()?);
        qcoin_service::serve(listener, qcoin_service::AppState::new(a.reports.clone())).await
    })?;
    Ok(())
}
