fn main() -> std::process::ExitCode {
    ambidebate::cli::main_with_args(std::env::args_os())
}
