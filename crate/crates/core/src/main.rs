use clap::Parser;
use indicial_lab::cli_reports::{exit_code, load_config, run_scenario, write_outputs, Command};
use rayon::prelude::*;
use std::path::PathBuf;
use std::process::ExitCode;

/// Boundary expansions and remainder checks for degenerate elliptic operators.
#[derive(Parser)]
#[command(name = "indicial-lab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario JSON files; each runs independently.
    #[arg(long = "config", required = true, num_args = 1..)]
    configs: Vec<PathBuf>,
    /// Output root; each scenario writes into <out>/<id>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Print every check, not just the summaries.
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    let results: Vec<(String, i32)> = pool.install(|| {
        cli.configs
            .par_iter()
            .map(|path| {
                let cfg = match load_config(path) {
                    Ok(c) => c,
                    Err(e) => return (format!("error: {e}"), 2),
                };
                let res = run_scenario(&cfg, cli.command);
                let code = exit_code(&res);
                let mut text = String::new();
                match &res {
                    Ok(outcome) => {
                        if let Err(e) = write_outputs(outcome, &cli.out.join(&cfg.id)) {
                            return (format!("[{}] error: {e}", cfg.id), 3);
                        }
                        for s in &outcome.summaries {
                            text.push_str(&format!("[{}] {s}\n", cfg.id));
                        }
                        for c in outcome.checks.iter().filter(|c| cli.verbose || !c.pass) {
                            text.push_str(&format!("[{}] {}\n", cfg.id, c.line()));
                        }
                        let n = outcome.checks.len();
                        let ok = outcome.checks.iter().filter(|c| c.pass).count();
                        text.push_str(&format!("[{}] {ok}/{n} checks pass", cfg.id));
                    }
                    Err(e) => text.push_str(&format!("[{}] error: {e}", cfg.id)),
                }
                (text, code)
            })
            .collect()
    });
    let mut worst = 0;
    for (text, code) in results {
        if code == 0 || code == 1 {
            println!("{text}");
        } else {
            eprintln!("{text}");
        }
        worst = worst.max(code);
    }
    ExitCode::from(worst as u8)
}
