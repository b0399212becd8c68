fn main() {
    std::process::exit(onestep_cli::main_with_args(std::env::args_os()));
}
