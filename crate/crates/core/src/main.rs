fn main() -> std::process::ExitCode {
    keyed_sfft::cli::main_with(std::env::args_os())
}
