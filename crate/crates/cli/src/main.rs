fn main() -> std::process::ExitCode {
    emoprofile_cli::main_with_args(std::env::args_os())
}
