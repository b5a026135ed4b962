fn main() {
    std::process::exit(wavebend::cli::main());
}
