fn main() -> std::process::ExitCode {
    synthfid::cli::main()
}
