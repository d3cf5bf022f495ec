fn main() -> std::process::ExitCode {
    slopscope::cli::main()
}
