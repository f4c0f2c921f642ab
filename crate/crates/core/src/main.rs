fn main() {
    std::process::exit(mzi_parity::cli::main_with_args(std::env::args_os()));
}
