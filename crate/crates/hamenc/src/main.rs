fn main() {
    std::process::exit(hamenc::cli::run());
}
