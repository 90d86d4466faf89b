fn main() {
    std::process::exit(cpdlab::cli::run());
}
