fn main() {
    std::process::exit(rir_core::cli::main_with_args(std::env::args_os()));
}
