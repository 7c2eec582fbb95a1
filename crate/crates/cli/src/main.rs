use clap::Parser;

fn main() {
    let cli = verios_cli::Cli::parse();
    let code = verios_cli::run(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
