fn main() -> std::process::ExitCode {
    stocs::cli::main()
}
