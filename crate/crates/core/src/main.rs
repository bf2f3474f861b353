use clap::Parser;

fn main() {
    env_logger::init();
    let cli = fedmask::cli::Cli::parse();
    let code = match fedmask::cli::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
