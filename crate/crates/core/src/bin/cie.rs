use clap::Parser;

fn main() {
    let cli = cie::cli::Cli::parse();
    match cie::cli::run(cli) {
        Ok(summary) => print!("{summary}"),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
