fn main() {
    std::process::exit(crossnav::cli::run(std::env::args().collect()));
}
