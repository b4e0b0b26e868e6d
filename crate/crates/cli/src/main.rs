use clap::Parser;
use voicing_cli::args::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let res = voicing_cli::run(cli);
    if let Err(e) = &res {
        eprintln!("error: {e:#}");
    }
    std::process::exit(voicing_cli::exit_code(&res));
}
