fn main() -> std::process::ExitCode {
    starlike::cli::main()
}
