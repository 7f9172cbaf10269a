fn main() -> std::process::ExitCode {
    stylerag::app::cli::main()
}
