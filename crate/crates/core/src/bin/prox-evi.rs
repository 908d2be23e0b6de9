fn main() {
    std::process::exit(prox_evi::cli::main_with_args(std::env::args_os()));
}
