fn main() {
    std::process::exit(polaron_core::cli::run(std::env::args_os()));
}
