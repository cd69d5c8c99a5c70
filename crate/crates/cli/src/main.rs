fn main() {
    std::process::exit(waist_cli::main_with_args(std::env::args_os()));
}
