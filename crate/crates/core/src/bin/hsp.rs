fn main() {
    std::process::exit(hsp_core::cli::main_with_args(std::env::args_os()));
}
