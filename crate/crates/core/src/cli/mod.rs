//! Command-line front end.
//!
//! Flags may also come from a JSON file given with `--config`; its keys are
//! flag names (`sigma_y` or `sigma-y`) and flags on the command line win.
//! Every run writes its resolved flags to `run.json` in the run directory,
//! and `card --config run.json` repeats it.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub use commands::parse_denoiser;

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Parser)]
#[command(
    name = "card",
    version,
    about = "Diffusion restoration under correlated Gaussian noise"
)]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GlobalArgs {
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// JSON file of flag values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Run directory; relative output paths are resolved against it.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a patch covariance from dark frames.
    EstimateCov(commands::EstimateCovArgs),
    /// Build a banded synthetic covariance.
    MakeCov(commands::MakeCovArgs),
    /// Add a random symmetric perturbation to a covariance.
    PerturbCov(commands::PerturbCovArgs),
    /// Draw correlated noise.
    Simulate(commands::SimulateArgs),
    /// Degrade a clean image and add correlated noise.
    Degrade(commands::DegradeArgs),
    /// Restore a degraded measurement.
    Restore(commands::RestoreArgs),
    /// Score whitened and plain restoration on a dataset or synthetic cases.
    Eval(commands::EvalArgs),
    /// Covariance-perturbation ablation.
    AblatePerturb(commands::AblatePerturbArgs),
    /// Patch-size ablation.
    AblatePatch(commands::AblatePatchArgs),
    /// Serve a built-in denoiser over stdin/stdout.
    DenoiserPeer(commands::DenoiserPeerArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EstimateCov(_) => "estimate-cov",
            Command::MakeCov(_) => "make-cov",
            Command::PerturbCov(_) => "perturb-cov",
            Command::Simulate(_) => "simulate",
            Command::Degrade(_) => "degrade",
            Command::Restore(_) => "restore",
            Command::Eval(_) => "eval",
            Command::AblatePerturb(_) => "ablate-perturb",
            Command::AblatePatch(_) => "ablate-patch",
            Command::DenoiserPeer(_) => "denoiser-peer",
        }
    }

    fn args_json(&self) -> Value {
        let v = match self {
            Command::EstimateCov(a) => serde_json::to_value(a),
            Command::MakeCov(a) => serde_json::to_value(a),
            Command::PerturbCov(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::Degrade(a) => serde_json::to_value(a),
            Command::Restore(a) => serde_json::to_value(a),
            Command::Eval(a) => serde_json::to_value(a),
            Command::AblatePerturb(a) => serde_json::to_value(a),
            Command::AblatePatch(a) => serde_json::to_value(a),
            Command::DenoiserPeer(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

const SUBCOMMANDS: [&str; 10] = [
    "estimate-cov",
    "make-cov",
    "perturb-cov",
    "simulate",
    "degrade",
    "restore",
    "eval",
    "ablate-perturb",
    "ablate-patch",
    "denoiser-peer",
];

/// Paths and settings shared by every subcommand while it runs.
pub struct RunContext {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl RunContext {
    /// Output paths are taken relative to `--out-dir` when one is given.
    pub fn output(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Where `run.json` goes: `--out-dir`, else the primary output's directory.
    pub fn run_dir(&self, primary: Option<&Path>) -> PathBuf {
        if let Some(d) = &self.out_dir {
            return d.clone();
        }
        primary
            .map(|p| self.output(p))
            .and_then(|p| p.parent().map(Path::to_path_buf))
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn config_tokens(map: &Map<String, Value>) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in map {
        if key == "command" || key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> Result<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Bool(b) => Ok(b.to_string()),
                other => Err(Error::InvalidArgument(format!(
                    "config key {key:?}: unsupported value {other}"
                ))),
            }
        };
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
                out.push(flag.into());
                out.push(joined.into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(out)
}

fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(rest) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(rest));
        }
    }
    found
}

/// Splice values from the `--config` file in front of the command-line
/// flags so the latter take precedence.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    let Value::Object(map) = value else {
        return Err(Error::InvalidArgument(format!(
            "{} must hold a JSON object",
            path.display()
        )));
    };
    let tokens = config_tokens(&map)?;
    let sub_at = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()));
    let mut out: Vec<OsString> = Vec::with_capacity(args.len() + tokens.len() + 1);
    match sub_at {
        Some(i) => {
            out.extend_from_slice(&args[..=i]);
            out.extend(tokens);
            out.extend_from_slice(&args[i + 1..]);
        }
        None => {
            let command = map.get("command").and_then(Value::as_str).ok_or_else(|| {
                Error::InvalidArgument(format!("{} names no command and none was given", path.display()))
            })?;
            out.push(args.first().cloned().unwrap_or_else(|| "card".into()));
            out.push(command.into());
            out.extend(tokens);
            out.extend_from_slice(&args[1..]);
        }
    }
    Ok(out)
}

/// The fully resolved invocation as written to `run.json`.
pub fn run_record(cli: &Cli) -> Value {
    let mut map = Map::new();
    map.insert("command".into(), Value::String(cli.command.name().into()));
    if let Value::Object(g) = serde_json::to_value(&cli.global).expect("globals serialize") {
        map.extend(g);
    }
    if let Value::Object(a) = cli.command.args_json() {
        map.extend(a);
    }
    Value::Object(map)
}

fn write_run_record(cli: &Cli, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let text = serde_json::to_string_pretty(&run_record(cli)).expect("record serializes") + "\n";
    write_atomic(&dir.join(RUN_FILE), |w| std::io::Write::write_all(w, text.as_bytes()))
}

fn execute(cli: &Cli) -> Result<()> {
    let ctx = RunContext {
        seed: cli.global.seed,
        out_dir: cli.global.out_dir.clone(),
    };
    if let Command::DenoiserPeer(a) = &cli.command {
        return commands::denoiser_peer(a);
    }
    if let Some(dir) = &ctx.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let primary = commands::primary_output(&cli.command);
    let result = commands::run(&cli.command, &ctx);
    write_run_record(cli, &ctx.run_dir(primary.as_deref()))?;
    result
}

/// Run the CLI on `args` (program name first) and return the exit code:
/// 0 on success, 1 for invalid input, 2 for runtime failures.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.global.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(
            &cfg,
            r#"{"command": "make-cov", "alpha": 0.3, "bands": [1, 8], "sigma_y": null}"#,
        )
        .unwrap();
        let cfg_s = cfg.to_str().unwrap();
        let out = expand_args(os(&["card", "make-cov", "--config", cfg_s, "--alpha", "0.2"])).unwrap();
        assert_eq!(
            out,
            os(&["card", "make-cov", "--alpha", "0.3", "--bands", "1,8", "--config", cfg_s, "--alpha", "0.2"])
        );
        let implied = expand_args(os(&["card", "--config", cfg_s])).unwrap();
        assert_eq!(implied[1], OsString::from("make-cov"));
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let cli =
            Cli::try_parse_from(["card", "make-cov", "--alpha", "0.3", "--alpha", "0.2", "--out", "c.ct"]).unwrap();
        match cli.command {
            Command::MakeCov(a) => assert_eq!(a.alpha, 0.2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_dir_defaults_to_output_parent() {
        let ctx = RunContext { seed: 0, out_dir: None };
        assert_eq!(ctx.run_dir(Some(Path::new("a/b/c.ct"))), PathBuf::from("a/b"));
        assert_eq!(ctx.run_dir(Some(Path::new("c.ct"))), PathBuf::from("."));
        let ctx = RunContext {
            seed: 0,
            out_dir: Some("runs".into()),
        };
        assert_eq!(ctx.output(Path::new("c.ct")), PathBuf::from("runs/c.ct"));
        assert_eq!(ctx.run_dir(None), PathBuf::from("runs"));
    }

    #[test]
    fn unknown_flag_exits_with_one() {
        assert_eq!(main(["card", "make-cov", "--bogus"]), 1);
        assert_eq!(main(["card", "frobnicate"]), 1);
    }
}
