fn main() {
    std::process::exit(mhal_cli::main_with_args(std::env::args_os()));
}
