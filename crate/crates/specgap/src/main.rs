fn main() {
    std::process::exit(specgap::cli::main_with_args(std::env::args_os()));
}
