use std::io::Write;
use std::process;

use clap::Parser;
use lbvh_bench::{run, Cli, ExitCode};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage as i32 } else { 0 };
            let _ = e.print();
            process::exit(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let status = run::execute(cli.command, &mut out);
    let _ = out.flush();
    if let Err(f) = status {
        eprintln!("error: {}", f.message);
        process::exit(f.code as i32);
    }
}
