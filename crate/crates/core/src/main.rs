fn main() {
    std::process::exit(lumiscore::cli::run(std::env::args_os()).into());
}
