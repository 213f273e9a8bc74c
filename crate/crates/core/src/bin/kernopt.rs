fn main() {
    std::process::exit(kernopt::cli::run());
}
