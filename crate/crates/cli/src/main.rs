mod args;
mod commands;

use std::ffi::OsString;
use std::fs;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use sha2::{Digest, Sha256};

use args::Cli;
use commands::RunContext;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Turns `key = value` lines into flags for `subcommand`. Keys are long flag
/// names with `-` or `_`; `#` starts a comment. Boolean switches take `true` or
/// `false`.
fn config_args(text: &str, subcommand: &str) -> Result<(Vec<String>, Vec<String>), String> {
    let cmd = command();
    let sub = cmd.find_subcommand(subcommand).expect("parsed subcommand exists");
    let (mut global, mut local) = (Vec::new(), Vec::new());
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim().replace('_', "-"), Some(v.trim())),
            None => (line.replace('_', "-"), None),
        };
        if key == "config" {
            return Err(format!("config line {}: nested --config is not supported", n + 1));
        }
        let flag = format!("--{key}");
        let target = if matches!(key.as_str(), "seed" | "threads") { &mut global } else { &mut local };
        let switch = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .is_some_and(|a| !a.get_action().takes_values());
        match (switch, value) {
            (true, None | Some("true")) => target.push(flag),
            (true, Some("false")) => {}
            (true, Some(other)) => {
                return Err(format!("config line {}: `{key}` is a switch, got `{other}`", n + 1));
            }
            (false, Some(v)) => {
                target.push(flag);
                target.push(v.to_string());
            }
            (false, None) => return Err(format!("config line {}: `{key}` needs a value", n + 1)),
        }
    }
    Ok((global, local))
}

/// Parses the command line, splicing in `--config` entries so that flags given
/// explicitly still win.
fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let matches = command().try_get_matches_from(&argv)?;
    let first = Cli::from_arg_matches(&matches)?;
    let Some(path) = &first.config else {
        return Ok(first);
    };
    let text = fs::read_to_string(path).map_err(|e| {
        command().error(ErrorKind::Io, format!("cannot read config {}: {e}", path.display()))
    })?;
    let name = matches.subcommand_name().expect("subcommand is required").to_string();
    let (global, local) = config_args(&text, &name).map_err(|m| command().error(ErrorKind::InvalidValue, m))?;
    let at = argv.iter().position(|a| a.to_str() == Some(name.as_str())).expect("subcommand is in argv");
    let mut spliced: Vec<OsString> = vec![argv[0].clone()];
    spliced.extend(global.into_iter().map(OsString::from));
    spliced.extend(argv[1..=at].iter().cloned());
    spliced.extend(local.into_iter().map(OsString::from));
    spliced.extend(argv[at + 1..].iter().cloned());
    Cli::from_arg_matches(&command().try_get_matches_from(spliced)?)
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
        return ExitCode::from(1);
    }
    let effective = serde_json::to_value(&cli.command).expect("arguments serialize");
    let digest = Sha256::digest(effective.to_string().as_bytes());
    let config_hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    println!("# awe {VERSION} seed={} config={config_hash}", cli.seed);
    let ctx = RunContext {
        seed: cli.seed,
        config_hash,
        version: VERSION,
    };
    match commands::run(&cli.command, &ctx, &effective) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
