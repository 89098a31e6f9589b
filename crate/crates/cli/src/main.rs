use std::process::ExitCode;

fn main() -> ExitCode {
    let result = hystkin_cli::init_logging().and_then(|()| hystkin_cli::run(std::env::args_os()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code.exit_status() as u8)
        }
    }
}
