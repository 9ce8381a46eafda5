use std::io::{self, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bscript_cli as cli;

#[derive(Parser)]
#[command(name = "bs", version, about = "Run scripts against the demo host classes")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a script file.
    Run { file: PathBuf },
    /// Interactive console. `demo()` builds the frame/text/button demo.
    Repl,
    /// Evaluate an expression and print its values.
    Eval {
        #[arg(short = 'e', long = "expr")]
        expr: String,
    },
    /// Measure call overhead across the bridge.
    Bench {
        #[arg(long, default_value_t = bscript::bench::DEFAULT_ITERATIONS)]
        iterations: u64,
        #[arg(long)]
        json: bool,
    },
}

fn run(args: Args) -> i32 {
    let mut err = io::stderr();
    match args.command {
        Command::Run { file } => cli::run_file(&mut cli::session(), &file, &mut err),
        Command::Eval { expr } => cli::eval_expr(&mut cli::session(), &expr, &mut err),
        Command::Repl => {
            let mut it = cli::session();
            let stdin = io::stdin();
            let mut stdout = io::stdout();
            let prompt: Option<&mut dyn io::Write> = if stdin.is_terminal() { Some(&mut stdout) } else { None };
            cli::repl(&mut it, &mut stdin.lock(), prompt, &mut err);
            cli::EXIT_OK
        }
        Command::Bench { iterations, json } => cli::bench_command(iterations, json, &mut io::stdout(), &mut err),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { cli::EXIT_USAGE } else { cli::EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    // Deeply nested scripts recurse in the evaluator; give it room.
    let worker = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(move || run(args))
        .expect("spawn interpreter thread");
    ExitCode::from(worker.join().unwrap_or(cli::EXIT_SCRIPT) as u8)
}
