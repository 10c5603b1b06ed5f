use clap::{Parser, Subcommand};

mod io;
mod oracle;
mod plotdata;
mod run;
mod sweep;

#[derive(Parser)]
#[command(name = "skyrescue", version, about = "Rescue-area offloading simulator harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a scenario file.
    Gen(run::GenArgs),
    /// Check a scenario file against the structural constraints.
    Validate(run::ValidateArgs),
    /// Train a policy variant and write curve + checkpoints.
    Train(run::TrainArgs),
    /// Evaluate a trained run or a baseline on fixed seeds.
    Eval(run::EvalArgs),
    /// Train/eval across a parameter grid.
    Sweep(sweep::SweepArgs),
    /// Brute-force reference solvers.
    Oracle(oracle::OracleArgs),
    /// Extract plot-ready CSVs from a run directory.
    Plotdata(plotdata::PlotdataArgs),
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Gen(a) => run::cmd_gen(a),
        Cmd::Validate(a) => run::cmd_validate(a),
        Cmd::Train(a) => run::cmd_train(a),
        Cmd::Eval(a) => run::cmd_eval(a),
        Cmd::Sweep(a) => sweep::cmd_sweep(a),
        Cmd::Oracle(a) => oracle::cmd_oracle(a),
        Cmd::Plotdata(a) => plotdata::cmd_plotdata(a),
    };
    match res {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
