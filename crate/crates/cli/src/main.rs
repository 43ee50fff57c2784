fn main() {
    std::process::exit(synesthete_cli::run(std::env::args_os()));
}
