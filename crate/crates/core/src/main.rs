fn main() {
    std::process::exit(pubforge::cli::run());
}
