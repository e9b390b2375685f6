fn main() {
    std::process::exit(curricop::cli::run());
}
