use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ratekit::args::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = ratekit::init_threads().and_then(|()| ratekit::run(&cli));
    match result {
        Ok(done) => {
            if cli.json {
                println!("{}", done.record.to_json());
            } else {
                print!("{}", done.text);
            }
            ExitCode::from(done.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
