fn main() {
    std::process::exit(gbm_coupling::cli::main_with_args(std::env::args_os()));
}
