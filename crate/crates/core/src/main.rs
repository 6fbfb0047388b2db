fn main() -> std::process::ExitCode {
    learngraph::cli::main()
}
