mod args;
mod commands;

use std::process::ExitCode;

use airtime::Error;
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};

fn error_json(e: &Error) -> serde_json::Value {
    let mut v = json!({ "kind": e.kind(), "message": e.to_string() });
    if let Error::Parse { path, line, kind, .. } = e {
        v["path"] = json!(path.display().to_string());
        v["line"] = json!(line);
        v["class"] = json!(format!("{kind:?}"));
    }
    v
}

fn run(cli: &Cli) -> airtime::Result<()> {
    match &cli.command {
        Command::SynthGen(a) => commands::synth_gen(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::SweepK(a) => commands::sweep_k(a),
        Command::SweepThreshold(a) => commands::sweep_threshold(a),
        Command::AblateKernels(a) => commands::ablate_kernels(a),
        Command::Heatmap(a) => commands::heatmap(a),
        Command::Predict(a) => commands::predict(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "kind": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
