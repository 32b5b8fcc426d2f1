fn main() {
    std::process::exit(mnmr::cli::main_with_args(std::env::args_os()));
}
