fn main() {
    std::process::exit(pendular_core::cli::run(std::env::args_os()));
}
