fn main() {
    std::process::exit(ergokit::cli::run_from_args(std::env::args_os()));
}
