//! `frwkv`: train, evaluate, and ablate the FRWKV+ forecasting family.
//!
//! Exit codes: 0 success, 2 config/user error, 3 numeric failure.

mod cfg;
mod commands;

use std::path::PathBuf;

use frwkv_core::data::{DatasetKind, SplitName};
use frwkv_core::error::Error;

use commands::{EvalArgs, SynthArgs};

const USAGE: &str = "\
usage:
  frwkv train  --config FILE
  frwkv eval   --ckpt FILE --data FILE --split {train,val,test}
               [--kind {ratio,etth,ettm}] [--export-preds FILE]
  frwkv ablate --grid FILE [--workers K]
  frwkv report --store FILE --out DIR
  frwkv synth  --out FILE [--vars N] [--len T] [--period P]
               [--noise S] [--jitter J] [--seed K]

environment:
  FRWKV_OUT_ROOT  prefix for relative output directories
  FRWKV_WORKERS   default worker count for ablate
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            exit_code(&e)
        }
    }
}

fn root_error(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => root_error(source),
        other => other,
    }
}

fn exit_code(e: &Error) -> i32 {
    match root_error(e) {
        Error::Divergence(_) => 3,
        _ => 2,
    }
}

/// Flag parser: `--key value` pairs after the subcommand.
struct Flags {
    pairs: Vec<(String, String)>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Flags, Error> {
        let mut pairs = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let key = &args[i];
            if !key.starts_with("--") {
                return Err(Error::Config(format!("unexpected argument {key:?}")));
            }
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::Config(format!("flag {key} needs a value")))?;
            pairs.push((key[2..].to_string(), value.clone()));
            i += 2;
        }
        Ok(Flags { pairs })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let pos = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn require(&mut self, key: &str) -> Result<String, Error> {
        self.take(key)
            .ok_or_else(|| Error::Config(format!("missing required flag --{key}")))
    }

    fn finish(self) -> Result<(), Error> {
        if let Some((k, _)) = self.pairs.first() {
            return Err(Error::Config(format!("unknown flag --{k}")));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, Error> {
    raw.parse()
        .map_err(|_| Error::Config(format!("--{key} {raw:?} is not valid")))
}

fn dispatch(args: &[String]) -> Result<(), Error> {
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return Err(Error::Config("no subcommand given".into()));
    };
    let rest = &args[1..];
    match command.as_str() {
        "train" => {
            let mut flags = Flags::parse(rest)?;
            let config = PathBuf::from(flags.require("config")?);
            flags.finish()?;
            commands::cmd_train(&config)
        }
        "eval" => {
            let mut flags = Flags::parse(rest)?;
            let args = EvalArgs {
                checkpoint: PathBuf::from(flags.require("ckpt")?),
                data: PathBuf::from(flags.require("data")?),
                split: match flags.require("split")?.as_str() {
                    "train" => SplitName::Train,
                    "val" => SplitName::Val,
                    "test" => SplitName::Test,
                    other => {
                        return Err(Error::Config(format!(
                            "--split {other:?} (expected train, val, or test)"
                        )))
                    }
                },
                kind: match flags.take("kind") {
                    Some(raw) => DatasetKind::parse(&raw)?,
                    None => DatasetKind::Ratio,
                },
                export_preds: flags.take("export-preds").map(PathBuf::from),
            };
            flags.finish()?;
            commands::cmd_eval(&args)
        }
        "ablate" => {
            let mut flags = Flags::parse(rest)?;
            let grid = PathBuf::from(flags.require("grid")?);
            let workers = match flags.take("workers") {
                Some(raw) => parse_num("workers", &raw)?,
                None => std::env::var("FRWKV_WORKERS")
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(1),
            };
            flags.finish()?;
            commands::cmd_ablate(&grid, workers)
        }
        "report" => {
            let mut flags = Flags::parse(rest)?;
            let store = PathBuf::from(flags.require("store")?);
            let out = PathBuf::from(flags.require("out")?);
            flags.finish()?;
            commands::cmd_report(&store, &out)
        }
        "synth" => {
            let mut flags = Flags::parse(rest)?;
            let args = SynthArgs {
                out: PathBuf::from(flags.require("out")?),
                vars: match flags.take("vars") {
                    Some(raw) => parse_num("vars", &raw)?,
                    None => 2,
                },
                len: match flags.take("len") {
                    Some(raw) => parse_num("len", &raw)?,
                    None => 480,
                },
                period: match flags.take("period") {
                    Some(raw) => parse_num("period", &raw)?,
                    None => 24,
                },
                noise: match flags.take("noise") {
                    Some(raw) => parse_num("noise", &raw)?,
                    None => 0.1,
                },
                jitter: match flags.take("jitter") {
                    Some(raw) => parse_num("jitter", &raw)?,
                    None => 1.0,
                },
                seed: match flags.take("seed") {
                    Some(raw) => parse_num("seed", &raw)?,
                    None => 2024,
                },
            };
            flags.finish()?;
            commands::cmd_synth(&args)
        }
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            Ok(())
        }
        other => {
            eprint!("{USAGE}");
            Err(Error::Config(format!("unknown subcommand {other:?}")))
        }
    }
}
