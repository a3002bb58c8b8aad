fn main() {
    std::process::exit(corrgap::cli::main_with_args(std::env::args_os()));
}
