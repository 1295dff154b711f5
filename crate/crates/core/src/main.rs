fn main() {
    std::process::exit(ecut_mppi::cli::cli_main(std::env::args_os()));
}
