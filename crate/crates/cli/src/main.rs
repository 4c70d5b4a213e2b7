mod args;
mod commands;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use peakload::Error;

use args::Cli;

const SUBCOMMANDS: [&str; 9] = [
    "rate", "load", "peak", "lag", "flatten", "simulate", "fit", "lagtable", "tables",
];

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => 2,
        Error::NonConvergence { .. } | Error::Quadrature { .. } => 3,
        Error::Io { .. } | Error::Parse(_) => 4,
    }
}

/// `key=value` lines (blank lines and `#` comments skipped) as `--key value`.
fn config_flags(path: &Path) -> Result<Vec<String>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        flags.push(format!("--{}", key.trim().trim_start_matches("--")));
        flags.push(value.trim().to_string());
    }
    Ok(flags)
}

/// Splices config-file flags in right after the subcommand so that flags
/// typed later on the command line override them.
fn expand_config(mut argv: Vec<String>) -> Result<Vec<String>, Error> {
    let mut path = None;
    for (i, tok) in argv.iter().enumerate() {
        if let Some(p) = tok.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if tok == "--config" {
            path = argv.get(i + 1).cloned();
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let flags = config_flags(Path::new(&path))?;
    if let Some(at) = argv.iter().position(|t| SUBCOMMANDS.contains(&t.as_str())) {
        argv.splice(at + 1..at + 1, flags);
    }
    Ok(argv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match expand_config(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = commands::run(&cli.command)
        .and_then(|report| output::render(&report, cli.format))
        .and_then(|bytes| output::emit(&bytes, cli.out.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), 2);
        assert_eq!(
            exit_code(&Error::NonConvergence {
                what: "peak",
                iterations: 200,
                last: 1.0,
                residual: 1e-3,
                lo: 0.0,
                hi: 2.0,
            }),
            3
        );
        assert_eq!(exit_code(&Error::Parse("x".into())), 4);
    }

    #[test]
    fn config_lands_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "tau = 3\n\n# x\n--sigma=1\n").unwrap();
        let argv: Vec<String> = ["peakload", "--config", cfg.to_str().unwrap(), "peak", "--tau", "5"]
            .map(String::from)
            .to_vec();
        let out = expand_config(argv).unwrap();
        assert_eq!(&out[4..], ["--tau", "3", "--sigma", "1", "--tau", "5"]);
    }
}
