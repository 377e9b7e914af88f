use clap::Parser;

fn main() {
    let cli = rqchan::cli::Cli::parse();
    if let Err(e) = rqchan::cli::run(&cli) {
        eprintln!("error: {e}");
        let code = match e {
            rqchan::Error::Config(_) | rqchan::Error::InvalidParameter(_) => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}
