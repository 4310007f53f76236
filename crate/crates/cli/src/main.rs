fn main() -> std::process::ExitCode {
    voc_cli::commands::run(std::env::args_os())
}
