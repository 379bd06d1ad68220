use clap::Parser;

use geomorse_cli::report::error_json;
use geomorse_cli::run::{execute, Args};
use geomorse_cli::{EXIT_MISMATCH, EXIT_OK};

fn main() {
    let args = Args::parse();
    let code = match execute(&args) {
        Ok(report) => {
            println!("{}", report.to_json());
            if report.matches {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            }
        }
        Err(err) => {
            println!("{}", error_json(&err));
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    std::process::exit(code);
}
