fn main() -> std::process::ExitCode {
    fairkg::cli::main()
}
