fn main() {
    std::process::exit(causalkit::cli::main());
}
