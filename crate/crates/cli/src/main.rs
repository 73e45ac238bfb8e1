use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    match minlift_cli::run(std::env::args_os()) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(outcome.body.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                eprintln!("error: io: cannot write to stdout");
                return ExitCode::from(1);
            }
            for line in &outcome.summary {
                eprintln!("{line}");
            }
            ExitCode::from(outcome.status)
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
