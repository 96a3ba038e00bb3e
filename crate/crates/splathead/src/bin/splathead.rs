fn main() -> std::process::ExitCode {
    splathead::cli::main()
}
