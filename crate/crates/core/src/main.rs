fn main() {
    std::process::exit(quadscene::cli::run());
}
