fn main() -> std::process::ExitCode {
    facexpr::cli::run(std::env::args_os())
}
