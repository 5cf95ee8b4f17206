use clap::Parser;

fn main() {
    let cli = morrey_cli::Cli::parse();
    std::process::exit(morrey_cli::main_with(cli));
}
