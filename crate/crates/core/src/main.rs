fn main() -> std::process::ExitCode {
    noma_sim::cli::run()
}
