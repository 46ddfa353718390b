fn main() {
    std::process::exit(hho_cli::main_with_args(std::env::args_os()));
}
