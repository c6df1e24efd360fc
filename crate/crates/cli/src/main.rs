fn main() {
    std::process::exit(gdpsim_cli::run_command(std::env::args_os()));
}
